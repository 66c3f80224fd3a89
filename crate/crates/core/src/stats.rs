//! Correlations, between-group tests, effect sizes, predictor metrics, and
//! the similarity-threshold sweep.
//!
//! Conventions: mid-ranks for all tied values (required for ordinal human
//! ratings), sample (n-1) variances, and an explicit [`StatValue::NotComputable`]
//! state for undefined results — never a silent zero. No p-values are
//! produced; reports carry statistics and sample sizes and leave inference to
//! the reader.

use std::collections::BTreeSet;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::taxonomy::{classify_from_parts, Category};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} observations, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("flagged and truth sets must be subsets of the universe")]
    NotInUniverse,
    #[error("truth set is empty: no ground truth to score against")]
    NoGroundTruth,
    #[error("sweep grid invalid: min {min}, max {max}, step {step}")]
    InvalidGrid { min: f64, max: f64, step: f64 },
}

/// A statistic that is either a number or explicitly not computable
/// (constant series, zero pooled variance, empty flag set, ...).
///
/// Serializes as a JSON/CSV number, or the string `"NOT_COMPUTABLE"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatValue {
    Value(f64),
    NotComputable,
}

impl StatValue {
    pub fn value(self) -> Option<f64> {
        match self {
            StatValue::Value(v) => Some(v),
            StatValue::NotComputable => None,
        }
    }

    pub fn expect_value(self, what: &str) -> f64 {
        match self {
            StatValue::Value(v) => v,
            StatValue::NotComputable => panic!("{what} was NOT_COMPUTABLE"),
        }
    }

    /// Fixed-decimal display for plain-text reports.
    pub fn fmt(self, decimals: usize) -> String {
        match self {
            StatValue::Value(v) => format!("{v:.decimals$}"),
            StatValue::NotComputable => "NOT_COMPUTABLE".to_string(),
        }
    }
}

impl Serialize for StatValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            StatValue::Value(v) => serializer.serialize_f64(*v),
            StatValue::NotComputable => serializer.serialize_str("NOT_COMPUTABLE"),
        }
    }
}

impl<'de> Deserialize<'de> for StatValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(StatValue::Value(v)),
            Raw::Tag(s) if s == "NOT_COMPUTABLE" => Ok(StatValue::NotComputable),
            Raw::Tag(s) => Err(D::Error::custom(format!("invalid stat value: {s:?}"))),
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Mid-ranks (1-based); tied values share the average of their rank span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged over the tie group
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Sample mean.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (divisor n-1).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Pearson correlation via centered sums, clamped to [-1, 1].
/// A constant series makes the correlation undefined: NOT_COMPUTABLE.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<StatValue, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFewSamples {
            need: 3,
            got: xs.len(),
        });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(StatValue::NotComputable);
    }
    Ok(StatValue::Value((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Spearman rank correlation: mid-ranks, then Pearson on the ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<StatValue, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFewSamples {
            need: 3,
            got: xs.len(),
        });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    pearson(&midranks(xs), &midranks(ys))
}

/// Kruskal-Wallis H with mid-ranks and the tie correction
/// `1 - sum(t^3 - t) / (N^3 - N)`. All values identical makes the correction
/// zero and the statistic undefined: NOT_COMPUTABLE.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<StatValue, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(StatsError::EmptyGroup(i));
        }
        check_finite(g)?;
    }
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    if n_total < 5 {
        return Err(StatsError::TooFewSamples {
            need: 5,
            got: n_total,
        });
    }
    let combined: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = midranks(&combined);

    let n = n_total as f64;
    let mut sum_term = 0.0;
    let mut offset = 0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum_term += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_uncorrected = 12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0);

    // tie sizes from the jointly sorted values
    let mut sorted = combined;
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - tie_sum / (n * n * n - n);
    if correction == 0.0 {
        return Ok(StatValue::NotComputable);
    }
    Ok(StatValue::Value(h_uncorrected / correction))
}

/// Signed Cohen's d with pooled sample standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<StatValue, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples {
            need: 2,
            got: a.len().min(b.len()),
        });
    }
    check_finite(a)?;
    check_finite(b)?;
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let pooled_var =
        ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
    if pooled_var == 0.0 {
        return Ok(StatValue::NotComputable);
    }
    Ok(StatValue::Value((mean(a) - mean(b)) / pooled_var.sqrt()))
}

/// Precision / recall / F1 of a flag set against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: StatValue,
    pub recall: f64,
    pub f1: f64,
}

/// True positive: the predictor flags an item the ground truth marks high.
/// Precision over an empty flag set is NOT_COMPUTABLE; F1 is the harmonic
/// mean, 0 when both components are zero.
pub fn prf(
    flagged: &BTreeSet<String>,
    truth_high: &BTreeSet<String>,
    universe: &BTreeSet<String>,
) -> Result<Prf, StatsError> {
    if !flagged.is_subset(universe) || !truth_high.is_subset(universe) {
        return Err(StatsError::NotInUniverse);
    }
    if truth_high.is_empty() {
        return Err(StatsError::NoGroundTruth);
    }
    let tp = flagged.intersection(truth_high).count() as f64;
    let recall = tp / truth_high.len() as f64;
    if flagged.is_empty() {
        return Ok(Prf {
            precision: StatValue::NotComputable,
            recall,
            f1: 0.0,
        });
    }
    let precision = tp / flagged.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision: StatValue::Value(precision),
        recall,
        f1,
    })
}

/// Per-item inputs to the threshold sweep: everything classification needs
/// short of re-embedding.
#[derive(Debug, Clone, Copy)]
pub struct SweepItem {
    pub s_mean: f64,
    pub agreement_fraction: f64,
    pub human_sigma: f64,
}

/// One sweep grid point: the reclassified category counts plus the Spearman
/// correlation of the taxonomy ordinal score against human sigma.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta_s: f64,
    pub spearman_rho: StatValue,
    pub n_ca: usize,
    pub n_da: usize,
    pub n_cd: usize,
    pub n_dd: usize,
}

/// Reclassify every item at each theta on the inclusive grid.
pub fn theta_sweep(
    items: &[SweepItem],
    theta_min: f64,
    theta_max: f64,
    step: f64,
    theta_a: f64,
) -> Result<Vec<SweepRow>, StatsError> {
    if !(theta_min < theta_max) || !(step > 0.0) {
        return Err(StatsError::InvalidGrid {
            min: theta_min,
            max: theta_max,
            step,
        });
    }
    let steps = ((theta_max - theta_min) / step + 1e-9).floor() as usize;
    let sigmas: Vec<f64> = items.iter().map(|i| i.human_sigma).collect();
    let mut rows = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let theta = theta_min + k as f64 * step;
        let mut counts = [0usize; 4];
        let mut ordinals = Vec::with_capacity(items.len());
        for item in items {
            let category =
                classify_from_parts(item.s_mean, item.agreement_fraction, theta, theta_a);
            ordinals.push(f64::from(category.ordinal_score()));
            let slot = match category {
                Category::ConvergentAgreement => 0,
                Category::DivergentAgreement => 1,
                Category::ConvergentDisagreement => 2,
                Category::DivergentDisagreement => 3,
            };
            counts[slot] += 1;
        }
        let rho = if items.len() < 3 {
            StatValue::NotComputable
        } else {
            spearman(&ordinals, &sigmas)?
        };
        rows.push(SweepRow {
            theta_s: theta,
            spearman_rho: rho,
            n_ca: counts[0],
            n_da: counts[1],
            n_cd: counts[2],
            n_dd: counts[3],
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_anchors() {
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(),
            StatValue::Value(1.0)
        );
        let r = pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 5.0])
            .unwrap()
            .expect_value("r");
        assert!((r - (-0.5)).abs() < 1e-12);
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            StatValue::Value(-1.0)
        );
    }

    #[test]
    fn pearson_constant_series_not_computable() {
        assert_eq!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(),
            StatValue::NotComputable
        );
    }

    #[test]
    fn spearman_tie_anchor() {
        // mid-ranks of x: (1, 2.5, 2.5, 4); pearson of ranks = 4.5/sqrt(22.5)
        let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .expect_value("rho");
        assert!((rho - 0.94868).abs() < 1e-4);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let xs = [0.5, 1.0, 2.0, 4.0, 9.0];
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        assert_eq!(spearman(&xs, &ys).unwrap(), StatValue::Value(1.0));
        assert_eq!(spearman(&xs, &xs.to_vec()).unwrap(), StatValue::Value(1.0));
    }

    #[test]
    fn kruskal_wallis_anchor() {
        let groups = vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ];
        let h = kruskal_wallis(&groups).unwrap().expect_value("H");
        assert!((h - 7.2).abs() < 1e-12);
    }

    #[test]
    fn kruskal_wallis_identical_groups_is_zero() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let h = kruskal_wallis(&groups).unwrap().expect_value("H");
        assert!(h.abs() < 1e-12);
    }

    #[test]
    fn kruskal_wallis_all_tied_not_computable() {
        let groups = vec![vec![2.0, 2.0, 2.0], vec![2.0, 2.0, 2.0]];
        assert_eq!(kruskal_wallis(&groups).unwrap(), StatValue::NotComputable);
    }

    #[test]
    fn cohens_d_anchors() {
        let d = cohens_d(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0])
            .unwrap()
            .expect_value("d");
        assert!((d - (-2.0)).abs() < 1e-12);
        assert_eq!(
            cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            StatValue::Value(0.0)
        );
        let d = cohens_d(&[0.0, 0.0, 2.0, 2.0], &[1.0, 1.0, 3.0, 3.0])
            .unwrap()
            .expect_value("d");
        assert!((d - (-0.866)).abs() < 1e-3);
    }

    #[test]
    fn cohens_d_zero_pooled_variance_not_computable() {
        assert_eq!(
            cohens_d(&[1.0, 1.0], &[2.0, 2.0]).unwrap(),
            StatValue::NotComputable
        );
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn prf_hand_counts() {
        let universe = set(&["1", "2", "3", "4", "5"]);
        let scores = prf(&set(&["1", "2", "3"]), &set(&["2", "3", "4"]), &universe).unwrap();
        assert!((scores.precision.expect_value("p") - 2.0 / 3.0).abs() < 1e-12);
        assert!((scores.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((scores.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prf_perfect_predictor() {
        let universe = set(&["a", "b", "c"]);
        let truth = set(&["a", "b"]);
        let scores = prf(&truth, &truth, &universe).unwrap();
        assert_eq!(scores.precision, StatValue::Value(1.0));
        assert_eq!(scores.recall, 1.0);
        assert_eq!(scores.f1, 1.0);
    }

    #[test]
    fn prf_flag_everything_bound() {
        let universe: BTreeSet<String> = (0..9).map(|i| i.to_string()).collect();
        let truth: BTreeSet<String> = (0..3).map(|i| i.to_string()).collect();
        let scores = prf(&universe, &truth, &universe).unwrap();
        assert!((scores.precision.expect_value("p") - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(scores.recall, 1.0);
    }

    #[test]
    fn prf_empty_flag_set() {
        let universe = set(&["a", "b"]);
        let scores = prf(&BTreeSet::new(), &set(&["a"]), &universe).unwrap();
        assert_eq!(scores.precision, StatValue::NotComputable);
        assert_eq!(scores.recall, 0.0);
        assert_eq!(scores.f1, 0.0);
    }

    #[test]
    fn prf_empty_truth_is_fatal() {
        let universe = set(&["a"]);
        assert!(matches!(
            prf(&set(&["a"]), &BTreeSet::new(), &universe),
            Err(StatsError::NoGroundTruth)
        ));
    }

    #[test]
    fn sweep_grid_has_13_rows() {
        let items = vec![
            SweepItem {
                s_mean: 0.7,
                agreement_fraction: 1.0,
                human_sigma: 0.3,
            },
            SweepItem {
                s_mean: 0.8,
                agreement_fraction: 0.6,
                human_sigma: 0.9,
            },
            SweepItem {
                s_mean: 0.5,
                agreement_fraction: 0.6,
                human_sigma: 0.7,
            },
        ];
        let rows = theta_sweep(&items, 0.60, 0.84, 0.02, 1.0).unwrap();
        assert_eq!(rows.len(), 13);
        assert!((rows[0].theta_s - 0.60).abs() < 1e-9);
        assert!((rows[12].theta_s - 0.84).abs() < 1e-9);
        // every row partitions all items
        for row in &rows {
            assert_eq!(row.n_ca + row.n_da + row.n_cd + row.n_dd, items.len());
        }
    }

    #[test]
    fn sweep_theta_below_all_means_kills_divergent_counts() {
        let items = vec![
            SweepItem {
                s_mean: 0.9,
                agreement_fraction: 1.0,
                human_sigma: 0.1,
            },
            SweepItem {
                s_mean: 0.95,
                agreement_fraction: 0.6,
                human_sigma: 0.8,
            },
            SweepItem {
                s_mean: 0.85,
                agreement_fraction: 1.0,
                human_sigma: 0.2,
            },
        ];
        let rows = theta_sweep(&items, 0.10, 0.30, 0.10, 1.0).unwrap();
        for row in rows {
            assert_eq!(row.n_da + row.n_dd, 0);
        }
    }

    #[test]
    fn stat_value_serde_round_trip() {
        let v = serde_json::to_string(&StatValue::Value(0.27)).unwrap();
        assert_eq!(v, "0.27");
        let nc = serde_json::to_string(&StatValue::NotComputable).unwrap();
        assert_eq!(nc, "\"NOT_COMPUTABLE\"");
        assert_eq!(
            serde_json::from_str::<StatValue>("0.27").unwrap(),
            StatValue::Value(0.27)
        );
        assert_eq!(
            serde_json::from_str::<StatValue>("\"NOT_COMPUTABLE\"").unwrap(),
            StatValue::NotComputable
        );
    }
}
