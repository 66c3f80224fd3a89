//! Four-category disagreement taxonomy and escalation routing policies.
//!
//! Each item lands in one cell of a 2x2: reasoning similarity (convergent
//! when the panel's mean pairwise trace similarity reaches `theta_s`) crossed
//! with verdict agreement (agreement when the modal-verdict fraction reaches
//! `theta_a`). Disagreement cells trigger escalation under the category
//! policy; divergence-only and random policies serve as baselines.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::SimilaritySummary;
use crate::hashing::seed_for;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("verdict list is empty")]
    EmptyVerdicts,
    #[error("verdict count {verdicts} does not match trace count {traces}")]
    VerdictCountMismatch { verdicts: usize, traces: usize },
    #[error("theta_s must lie in (-1, 1), got {0}")]
    ThetaSOutOfRange(f64),
    #[error("theta_a must lie in (0.5, 1.0], got {0}")]
    ThetaAOutOfRange(f64),
    #[error("tau_d must lie in [0, 2], got {0}")]
    TauDOutOfRange(f64),
    #[error("escalation probability must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),
}

/// Binary moderation verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "REMOVE")]
    Remove,
    #[serde(rename = "KEEP")]
    Keep,
}

impl Verdict {
    /// Strict two-class normalization; any other token is a parse failure.
    pub fn parse(token: &str) -> Option<Verdict> {
        match token.trim().to_ascii_uppercase().as_str() {
            "REMOVE" => Some(Verdict::Remove),
            "KEEP" => Some(Verdict::Keep),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Remove => "REMOVE",
            Verdict::Keep => "KEEP",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four cells of the taxonomy.
///
/// Ordinal scores order the cells by how strongly they should signal human
/// disagreement: DA=0, CA=1, DD=2, CD=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "CA")]
    ConvergentAgreement,
    #[serde(rename = "DA")]
    DivergentAgreement,
    #[serde(rename = "CD")]
    ConvergentDisagreement,
    #[serde(rename = "DD")]
    DivergentDisagreement,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::ConvergentAgreement,
        Category::DivergentAgreement,
        Category::ConvergentDisagreement,
        Category::DivergentDisagreement,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Category::ConvergentAgreement => "CA",
            Category::DivergentAgreement => "DA",
            Category::ConvergentDisagreement => "CD",
            Category::DivergentDisagreement => "DD",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::ConvergentAgreement => "Convergent Agreement (CA)",
            Category::DivergentAgreement => "Divergent Agreement (DA)",
            Category::ConvergentDisagreement => "Convergent Disagreement (CD)",
            Category::DivergentDisagreement => "Divergent Disagreement (DD)",
        }
    }

    pub fn ordinal_score(self) -> u8 {
        match self {
            Category::DivergentAgreement => 0,
            Category::ConvergentAgreement => 1,
            Category::DivergentDisagreement => 2,
            Category::ConvergentDisagreement => 3,
        }
    }

    pub fn is_disagreement(self) -> bool {
        matches!(
            self,
            Category::ConvergentDisagreement | Category::DivergentDisagreement
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A classified item: the category together with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyLabel {
    pub category: Category,
    pub theta_s: f64,
    pub theta_a: f64,
    /// Fraction of agents sharing the modal verdict, in [1/N, 1].
    pub agreement_fraction: f64,
    pub ordinal_score: u8,
}

/// Escalation policy identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "CATEGORY")]
    Category,
    #[serde(rename = "DIVERGENCE_ONLY")]
    DivergenceOnly,
    #[serde(rename = "RANDOM")]
    Random,
}

impl Policy {
    pub fn label(self) -> &'static str {
        match self {
            Policy::Category => "Category",
            Policy::DivergenceOnly => "Divergence-only",
            Policy::Random => "Random",
        }
    }
}

/// Escalate-or-auto-resolve outcome for one item under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub item_id: String,
    pub policy: Policy,
    pub escalate: bool,
    /// Policy-specific score: ordinal score (category), divergence
    /// (divergence-only), or the sampled uniform draw (random).
    pub score: f64,
}

/// Core 2x2 rule, shared by [`classify`] and the theta sweep.
///
/// Convergent iff `s_mean >= theta_s`; agreement iff
/// `agreement_fraction >= theta_a`. Both comparisons are inclusive so sweep
/// grids hit reproducible boundaries.
pub fn classify_from_parts(
    s_mean: f64,
    agreement_fraction: f64,
    theta_s: f64,
    theta_a: f64,
) -> Category {
    let convergent = s_mean >= theta_s;
    let agreement = agreement_fraction >= theta_a;
    match (convergent, agreement) {
        (true, true) => Category::ConvergentAgreement,
        (false, true) => Category::DivergentAgreement,
        (true, false) => Category::ConvergentDisagreement,
        (false, false) => Category::DivergentDisagreement,
    }
}

/// Fraction of verdicts equal to the modal verdict.
pub fn agreement_fraction(verdicts: &[Verdict]) -> Result<f64, TaxonomyError> {
    if verdicts.is_empty() {
        return Err(TaxonomyError::EmptyVerdicts);
    }
    let removes = verdicts.iter().filter(|v| **v == Verdict::Remove).count();
    let keeps = verdicts.len() - removes;
    Ok(removes.max(keeps) as f64 / verdicts.len() as f64)
}

fn check_thetas(theta_s: f64, theta_a: f64) -> Result<(), TaxonomyError> {
    if !(theta_s > -1.0 && theta_s < 1.0) {
        return Err(TaxonomyError::ThetaSOutOfRange(theta_s));
    }
    if !(theta_a > 0.5 && theta_a <= 1.0) {
        return Err(TaxonomyError::ThetaAOutOfRange(theta_a));
    }
    Ok(())
}

/// Classify one item from its similarity summary and the panel's verdicts.
pub fn classify(
    summary: &SimilaritySummary,
    verdicts: &[Verdict],
    theta_s: f64,
    theta_a: f64,
) -> Result<TaxonomyLabel, TaxonomyError> {
    check_thetas(theta_s, theta_a)?;
    if verdicts.is_empty() {
        return Err(TaxonomyError::EmptyVerdicts);
    }
    if verdicts.len() != summary.n_traces {
        return Err(TaxonomyError::VerdictCountMismatch {
            verdicts: verdicts.len(),
            traces: summary.n_traces,
        });
    }
    let fraction = agreement_fraction(verdicts)?;
    let category = classify_from_parts(summary.s_mean, fraction, theta_s, theta_a);
    Ok(TaxonomyLabel {
        category,
        theta_s,
        theta_a,
        agreement_fraction: fraction,
        ordinal_score: category.ordinal_score(),
    })
}

/// Category policy: escalate exactly the disagreement cells (CD, DD).
pub fn route(item_id: &str, label: &TaxonomyLabel) -> RoutingDecision {
    RoutingDecision {
        item_id: item_id.to_string(),
        policy: Policy::Category,
        escalate: label.category.is_disagreement(),
        score: f64::from(label.ordinal_score),
    }
}

/// Divergence-only baseline: escalate when `1 - s_mean` reaches `tau_d`.
pub fn route_divergence(
    summary: &SimilaritySummary,
    tau_d: f64,
) -> Result<RoutingDecision, TaxonomyError> {
    if !(0.0..=2.0).contains(&tau_d) {
        return Err(TaxonomyError::TauDOutOfRange(tau_d));
    }
    Ok(RoutingDecision {
        item_id: summary.item_id.clone(),
        policy: Policy::DivergenceOnly,
        escalate: summary.divergence >= tau_d,
        score: summary.divergence,
    })
}

/// Random baseline: Bernoulli(p), seeded per item so the decision is stable
/// regardless of iteration order.
pub fn route_random(item_id: &str, p: f64, seed: u64) -> Result<RoutingDecision, TaxonomyError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(TaxonomyError::ProbabilityOutOfRange(p));
    }
    let item_seed = seed_for(seed, "route-random", crate::hashing::text_hash(item_id));
    let mut rng = ChaCha12Rng::seed_from_u64(item_seed);
    let draw: f64 = rng.random();
    Ok(RoutingDecision {
        item_id: item_id.to_string(),
        policy: Policy::Random,
        escalate: draw < p,
        score: draw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::SimilaritySummary;

    fn summary(s_mean: f64) -> SimilaritySummary {
        SimilaritySummary {
            item_id: "it".into(),
            n_traces: 5,
            pair_sims_upper: vec![s_mean; 10],
            s_mean,
            s_min: s_mean,
            divergence: 1.0 - s_mean,
        }
    }

    #[test]
    fn unanimous_high_similarity_is_ca() {
        let label = classify(&summary(0.80), &[Verdict::Keep; 5], 0.72, 1.0).unwrap();
        assert_eq!(label.category, Category::ConvergentAgreement);
        assert_eq!(label.ordinal_score, 1);
    }

    #[test]
    fn split_low_similarity_is_dd() {
        let verdicts = [
            Verdict::Remove,
            Verdict::Remove,
            Verdict::Remove,
            Verdict::Keep,
            Verdict::Keep,
        ];
        let label = classify(&summary(0.65), &verdicts, 0.72, 1.0).unwrap();
        assert_eq!(label.category, Category::DivergentDisagreement);
        assert!((label.agreement_fraction - 0.6).abs() < 1e-12);
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let verdicts = [
            Verdict::Remove,
            Verdict::Remove,
            Verdict::Remove,
            Verdict::Remove,
            Verdict::Keep,
        ];
        let label = classify(&summary(0.72), &verdicts, 0.72, 1.0).unwrap();
        assert_eq!(label.category, Category::ConvergentDisagreement);
    }

    #[test]
    fn classify_ignores_verdict_order() {
        let a = [Verdict::Remove, Verdict::Keep, Verdict::Remove];
        let b = [Verdict::Keep, Verdict::Remove, Verdict::Remove];
        assert_eq!(
            agreement_fraction(&a).unwrap(),
            agreement_fraction(&b).unwrap()
        );
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let s = summary(0.5);
        assert!(classify(&s, &[Verdict::Keep; 5], 1.0, 1.0).is_err());
        assert!(classify(&s, &[Verdict::Keep; 5], 0.72, 0.5).is_err());
        assert!(classify(&s, &[Verdict::Keep; 5], 0.72, 1.01).is_err());
    }

    #[test]
    fn category_routing_rule() {
        let mk = |category: Category| TaxonomyLabel {
            category,
            theta_s: 0.72,
            theta_a: 1.0,
            agreement_fraction: 1.0,
            ordinal_score: category.ordinal_score(),
        };
        let cd = route("x", &mk(Category::ConvergentDisagreement));
        assert!(cd.escalate);
        assert_eq!(cd.score, 3.0);
        let da = route("x", &mk(Category::DivergentAgreement));
        assert!(!da.escalate);
        assert_eq!(da.score, 0.0);
        let ca = route("x", &mk(Category::ConvergentAgreement));
        assert!(!ca.escalate);
        assert_eq!(ca.score, 1.0);
    }

    #[test]
    fn divergence_routing_thresholds() {
        assert!(route_divergence(&summary(0.4), 0.33).unwrap().escalate);
        // divergence 0 is never escalated for positive tau_d
        assert!(!route_divergence(&summary(1.0), 0.01).unwrap().escalate);
        // tau_d = 0 escalates everything
        assert!(route_divergence(&summary(1.0), 0.0).unwrap().escalate);
    }

    #[test]
    fn random_routing_degenerate_probabilities() {
        for i in 0..50 {
            let id = format!("item-{i}");
            assert!(route_random(&id, 1.0, 9).unwrap().escalate);
            assert!(!route_random(&id, 0.0, 9).unwrap().escalate);
        }
    }

    #[test]
    fn random_routing_rate_near_p() {
        // Law-of-large-numbers check by direct simulation.
        let n = 10_000;
        let escalated = (0..n)
            .filter(|i| route_random(&format!("item-{i}"), 0.5, 1234).unwrap().escalate)
            .count();
        let rate = escalated as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn random_routing_independent_of_iteration_order() {
        let forward: Vec<bool> = (0..100)
            .map(|i| route_random(&format!("i{i}"), 0.5, 7).unwrap().escalate)
            .collect();
        let backward: Vec<bool> = (0..100)
            .rev()
            .map(|i| route_random(&format!("i{i}"), 0.5, 7).unwrap().escalate)
            .collect();
        let backward_reversed: Vec<bool> = backward.into_iter().rev().collect();
        assert_eq!(forward, backward_reversed);
    }
}
