//! Annotated-corpus ingestion, per-item human disagreement, and stratified
//! sampling by disagreement tercile.
//!
//! Input rows are one rating per (item, annotator) pair, in CSV or JSONL,
//! with column names supplied by a schema mapping. Items keep first-seen
//! order. Human disagreement is the standard deviation of annotator scores
//! on a configured dimension (or the mean of per-dimension standard
//! deviations); items with fewer than two annotators get no sigma and are
//! excluded from sampling and evaluation, never silently zeroed.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    MissingFile(String),
    #[error("missing required column: {0}")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("jsonl line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("item {0} has no human sigma; exclude it before binning")]
    MissingSigma(String),
    #[error("no items to bin")]
    NoItems,
    #[error(
        "tercile smaller than per_bin={per_bin}: low={low}, medium={medium}, high={high}"
    )]
    TercileTooSmall {
        per_bin: usize,
        low: usize,
        medium: usize,
        high: usize,
    },
}

/// One annotator's ordinal scores (5-point scale, 0..=4) keyed by dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorRating {
    pub annotator_id: String,
    pub scores: BTreeMap<String, u8>,
}

/// Stratification tercile of human disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bin {
    #[serde(rename = "LOW")]
    Low,
    #[serde(rename = "MEDIUM")]
    Medium,
    #[serde(rename = "HIGH")]
    High,
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bin::Low => "LOW",
            Bin::Medium => "MEDIUM",
            Bin::High => "HIGH",
        })
    }
}

/// A moderated text with its annotator ratings and derived fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentItem {
    pub item_id: String,
    pub text: String,
    pub ratings: Vec<AnnotatorRating>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub human_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin: Option<Bin>,
}

/// Column mapping from the corpus file into rating rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub item_id: String,
    pub annotator_id: String,
    pub text: String,
    /// dimension name -> column name
    pub dimensions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

/// Which dimension's standard deviation constitutes human disagreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionPolicy {
    /// SD of one named dimension.
    Single(String),
    /// Arithmetic mean of per-dimension SDs over dimensions with >= 2 scores.
    MeanOfDimensionSigmas,
}

impl DimensionPolicy {
    pub fn describe(&self) -> String {
        match self {
            DimensionPolicy::Single(dim) => format!("single dimension '{dim}'"),
            DimensionPolicy::MeanOfDimensionSigmas => "mean of per-dimension sigmas".to_string(),
        }
    }
}

/// Standard-deviation divisor. Sample (n-1) is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdMode {
    Sample,
    Population,
}

/// Ingestion output: grouped items plus the malformed-row tally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub items: Vec<ContentItem>,
    pub rows_total: usize,
    pub rows_rejected: usize,
    pub reject_reasons: BTreeMap<String, usize>,
}

struct RowSink {
    items: Vec<ContentItem>,
    index: BTreeMap<String, usize>,
    seen_annotators: BTreeSet<(String, String)>,
    rows_total: usize,
    rows_rejected: usize,
    reject_reasons: BTreeMap<String, usize>,
    required_dimension: Option<String>,
}

impl RowSink {
    fn new(required_dimension: Option<String>) -> Self {
        Self {
            items: Vec::new(),
            index: BTreeMap::new(),
            seen_annotators: BTreeSet::new(),
            rows_total: 0,
            rows_rejected: 0,
            reject_reasons: BTreeMap::new(),
            required_dimension,
        }
    }

    fn reject(&mut self, reason: &str) {
        self.rows_rejected += 1;
        *self.reject_reasons.entry(reason.to_string()).or_insert(0) += 1;
    }

    fn push_row(
        &mut self,
        item_id: String,
        annotator_id: String,
        text: String,
        raw_scores: Vec<(String, Option<String>)>,
    ) {
        self.rows_total += 1;
        if item_id.is_empty() {
            self.reject("missing_item_id");
            return;
        }
        if annotator_id.is_empty() {
            self.reject("missing_annotator_id");
            return;
        }
        if text.is_empty() {
            self.reject("empty_text");
            return;
        }
        let mut scores = BTreeMap::new();
        for (dimension, raw) in raw_scores {
            let Some(raw) = raw else { continue };
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let Ok(value) = raw.parse::<f64>() else {
                self.reject("score_not_numeric");
                return;
            };
            if value.fract() != 0.0 {
                self.reject("score_not_integer");
                return;
            }
            if !(0.0..=4.0).contains(&value) {
                self.reject("score_out_of_range");
                return;
            }
            scores.insert(dimension, value as u8);
        }
        if let Some(required) = &self.required_dimension {
            if !scores.contains_key(required) {
                self.reject("missing_target_dimension");
                return;
            }
        } else if scores.is_empty() {
            self.reject("no_scores");
            return;
        }
        let key = (item_id.clone(), annotator_id.clone());
        if !self.seen_annotators.insert(key) {
            self.reject("duplicate_annotator");
            return;
        }
        let rating = AnnotatorRating {
            annotator_id,
            scores,
        };
        match self.index.entry(item_id.clone()) {
            Entry::Occupied(slot) => {
                self.items[*slot.get()].ratings.push(rating);
            }
            Entry::Vacant(slot) => {
                slot.insert(self.items.len());
                self.items.push(ContentItem {
                    item_id,
                    text,
                    ratings: vec![rating],
                    human_sigma: None,
                    bin: None,
                });
            }
        }
    }

    fn finish(self) -> IngestReport {
        IngestReport {
            items: self.items,
            rows_total: self.rows_total,
            rows_rejected: self.rows_rejected,
            reject_reasons: self.reject_reasons,
        }
    }
}

/// Ingest rating rows and group them into items (first-seen order).
///
/// `required_dimension` marks the dimension every accepted row must score
/// (the configured target dimension under the single-dimension policy).
pub fn ingest(
    path: impl AsRef<Path>,
    schema: &SchemaConfig,
    format: CorpusFormat,
    required_dimension: Option<&str>,
) -> Result<IngestReport, CorpusError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CorpusError::MissingFile(path.display().to_string()));
    }
    let mut sink = RowSink::new(required_dimension.map(str::to_string));
    match format {
        CorpusFormat::Csv => ingest_csv(path, schema, &mut sink)?,
        CorpusFormat::Jsonl => ingest_jsonl(path, schema, &mut sink)?,
    }
    Ok(sink.finish())
}

fn ingest_csv(path: &Path, schema: &SchemaConfig, sink: &mut RowSink) -> Result<(), CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let item_col = col(&schema.item_id)?;
    let annotator_col = col(&schema.annotator_id)?;
    let text_col = col(&schema.text)?;
    let mut dim_cols = Vec::new();
    for (dimension, column) in &schema.dimensions {
        dim_cols.push((dimension.clone(), col(column)?));
    }
    for record in reader.records() {
        let record = record?;
        let cell = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let raw_scores = dim_cols
            .iter()
            .map(|(dimension, idx)| (dimension.clone(), record.get(*idx).map(str::to_string)))
            .collect();
        sink.push_row(cell(item_col), cell(annotator_col), cell(text_col), raw_scores);
    }
    Ok(())
}

fn ingest_jsonl(path: &Path, schema: &SchemaConfig, sink: &mut RowSink) -> Result<(), CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let field_string = |value: Option<&serde_json::Value>| -> Option<String> {
        match value {
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(serde_json::Value::Number(n)) => Some(n.to_string()),
            _ => None,
        }
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::Jsonl {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        let obj = row.as_object().ok_or_else(|| CorpusError::Jsonl {
            line: lineno + 1,
            message: "expected a JSON object per line".to_string(),
        })?;
        // A JSONL corpus must expose the required columns on its first row.
        if lineno == 0 {
            for name in [&schema.item_id, &schema.annotator_id, &schema.text] {
                if !obj.contains_key(name) {
                    return Err(CorpusError::MissingColumn(name.clone()));
                }
            }
        }
        let raw_scores = schema
            .dimensions
            .iter()
            .map(|(dimension, column)| (dimension.clone(), field_string(obj.get(column))))
            .collect();
        sink.push_row(
            field_string(obj.get(&schema.item_id)).unwrap_or_default(),
            field_string(obj.get(&schema.annotator_id)).unwrap_or_default(),
            field_string(obj.get(&schema.text)).unwrap_or_default(),
            raw_scores,
        );
    }
    Ok(())
}

fn standard_deviation(values: &[f64], mode: SdMode) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    match mode {
        SdMode::Sample => (ss / (n - 1.0)).sqrt(),
        SdMode::Population => (ss / n).sqrt(),
    }
}

/// Standard deviation of annotator scores under the configured policy.
/// Returns None (item excluded) when fewer than two annotators cover the
/// selected dimension(s).
pub fn compute_human_sigma(
    item: &ContentItem,
    policy: &DimensionPolicy,
    mode: SdMode,
) -> Option<f64> {
    match policy {
        DimensionPolicy::Single(dimension) => {
            let scores: Vec<f64> = item
                .ratings
                .iter()
                .filter_map(|r| r.scores.get(dimension).map(|s| f64::from(*s)))
                .collect();
            if scores.len() < 2 {
                return None;
            }
            Some(standard_deviation(&scores, mode))
        }
        DimensionPolicy::MeanOfDimensionSigmas => {
            let mut per_dimension: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for rating in &item.ratings {
                for (dimension, score) in &rating.scores {
                    per_dimension
                        .entry(dimension.as_str())
                        .or_default()
                        .push(f64::from(*score));
                }
            }
            let sigmas: Vec<f64> = per_dimension
                .values()
                .filter(|scores| scores.len() >= 2)
                .map(|scores| standard_deviation(scores, mode))
                .collect();
            if sigmas.is_empty() {
                return None;
            }
            Some(sigmas.iter().sum::<f64>() / sigmas.len() as f64)
        }
    }
}

/// Tercile cutoff values and the resulting bin sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinCutoffs {
    pub low_max: f64,
    pub medium_max: f64,
    pub n_low: usize,
    pub n_medium: usize,
    pub n_high: usize,
}

fn nearest_rank(sorted_sigmas: &[f64], fraction: f64) -> f64 {
    let n = sorted_sigmas.len();
    let rank = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
    sorted_sigmas[rank - 1]
}

/// Assign LOW/MEDIUM/HIGH bins by the 1/3 and 2/3 nearest-rank percentiles
/// of human sigma. Items tied with a cutoff go to the lower bin; the sort is
/// made deterministic by breaking sigma ties on item_id.
pub fn assign_bins(items: &mut [ContentItem]) -> Result<BinCutoffs, CorpusError> {
    if items.is_empty() {
        return Err(CorpusError::NoItems);
    }
    let mut keyed: Vec<(f64, &str)> = Vec::with_capacity(items.len());
    for item in items.iter() {
        let sigma = item
            .human_sigma
            .ok_or_else(|| CorpusError::MissingSigma(item.item_id.clone()))?;
        keyed.push((sigma, item.item_id.as_str()));
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite sigma").then(a.1.cmp(b.1)));
    let sorted_sigmas: Vec<f64> = keyed.iter().map(|(s, _)| *s).collect();
    let low_max = nearest_rank(&sorted_sigmas, 1.0 / 3.0);
    let medium_max = nearest_rank(&sorted_sigmas, 2.0 / 3.0);

    let mut counts = [0usize; 3];
    for item in items.iter_mut() {
        let sigma = item.human_sigma.expect("checked above");
        let bin = if sigma <= low_max {
            Bin::Low
        } else if sigma <= medium_max {
            Bin::Medium
        } else {
            Bin::High
        };
        counts[match bin {
            Bin::Low => 0,
            Bin::Medium => 1,
            Bin::High => 2,
        }] += 1;
        item.bin = Some(bin);
    }
    Ok(BinCutoffs {
        low_max,
        medium_max,
        n_low: counts[0],
        n_medium: counts[1],
        n_high: counts[2],
    })
}

/// Draw exactly `per_bin` items per tercile, uniformly without replacement,
/// from a generator seeded by `seed`. Output keeps LOW, MEDIUM, HIGH block
/// order with first-seen order inside each block.
pub fn stratify_sample(
    items: &[ContentItem],
    per_bin: usize,
    seed: u64,
) -> Result<(Vec<ContentItem>, BinCutoffs), CorpusError> {
    let mut binned: Vec<ContentItem> = items.to_vec();
    let cutoffs = assign_bins(&mut binned)?;

    let mut by_bin: BTreeMap<Bin, Vec<usize>> = BTreeMap::new();
    for (idx, item) in binned.iter().enumerate() {
        by_bin.entry(item.bin.expect("assigned above")).or_default().push(idx);
    }
    let size = |bin: Bin| by_bin.get(&bin).map_or(0, Vec::len);
    if size(Bin::Low) < per_bin || size(Bin::Medium) < per_bin || size(Bin::High) < per_bin {
        return Err(CorpusError::TercileTooSmall {
            per_bin,
            low: size(Bin::Low),
            medium: size(Bin::Medium),
            high: size(Bin::High),
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sampled = Vec::with_capacity(per_bin * 3);
    for bin in [Bin::Low, Bin::Medium, Bin::High] {
        let members = &by_bin[&bin];
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, members.len(), per_bin)
            .into_iter()
            .collect();
        chosen.sort_unstable();
        for local in chosen {
            sampled.push(binned[members[local]].clone());
        }
    }
    Ok((sampled, cutoffs))
}
