//! Agreement and expert-comparison statistics.

mod alpha;
mod bootstrap;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::SentenceLabel;

pub use alpha::{alpha_from_coincidences, krippendorff_alpha, CoincidenceMatrix, ReliabilityData};
pub use bootstrap::{
    bootstrap_alpha, intervals_overlap, quantile, BootstrapResult, Interval, DEFAULT_LEVEL,
    DEFAULT_RESAMPLES,
};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum MetricsError {
    #[error("no unit has two or more ratings")]
    NoPairableValues,
    #[error("only one value occurs; alpha is undefined")]
    DegenerateData,
    #[error("interval levels differ: {0} vs {1}")]
    LevelMismatch(f64, f64),
    #[error("label maps cover different sentences")]
    KeyMismatch,
    #[error("{0}")]
    InvalidParameter(String),
}

impl MetricsError {
    /// Stable flag name used in reports.
    pub fn flag(&self) -> &'static str {
        match self {
            MetricsError::NoPairableValues => "NoPairableValues",
            MetricsError::DegenerateData => "DegenerateData",
            MetricsError::LevelMismatch(..) => "LevelMismatch",
            MetricsError::KeyMismatch => "KeyMismatch",
            MetricsError::InvalidParameter(_) => "InvalidParameter",
        }
    }
}

/// Expert labels as gold, player labels as predictions; positive = biased.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub r#fn: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, r#fn: u64, fp: u64, tn: u64) -> Self {
        Self { tp, r#fn, fp, tn }
    }

    /// Counts over keys present in both maps.
    pub fn from_labels<K: Ord>(
        gold: &BTreeMap<K, SentenceLabel>,
        predicted: &BTreeMap<K, SentenceLabel>,
    ) -> Self {
        let mut m = Self::default();
        for (k, g) in gold {
            let Some(p) = predicted.get(k) else { continue };
            match (g, p) {
                (SentenceLabel::Biased, SentenceLabel::Biased) => m.tp += 1,
                (SentenceLabel::Biased, SentenceLabel::NotBiased) => m.r#fn += 1,
                (SentenceLabel::NotBiased, SentenceLabel::Biased) => m.fp += 1,
                (SentenceLabel::NotBiased, SentenceLabel::NotBiased) => m.tn += 1,
            }
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.r#fn + self.fp + self.tn
    }
}

/// `None` marks a metric whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_metrics(m: &ConfusionMatrix) -> ClassificationMetrics {
    ClassificationMetrics {
        accuracy: ratio(m.tp + m.tn, m.total()),
        precision: ratio(m.tp, m.tp + m.fp),
        recall: ratio(m.tp, m.tp + m.r#fn),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementBreakdown {
    pub total: usize,
    pub match_count: usize,
    pub diff_count: usize,
    pub rate: f64,
    /// Disagreements where the first map says biased and the second does not.
    pub a_biased_b_not: usize,
    pub a_not_b_biased: usize,
    /// Shares of `diff_count`; `None` when there are no disagreements.
    pub a_biased_b_not_share: Option<f64>,
    pub a_not_b_biased_share: Option<f64>,
}

/// Compares two label maps over identical key sets.
pub fn agreement_breakdown<K: Ord>(
    labels_a: &BTreeMap<K, SentenceLabel>,
    labels_b: &BTreeMap<K, SentenceLabel>,
) -> Result<AgreementBreakdown, MetricsError> {
    if labels_a.len() != labels_b.len() || labels_a.keys().any(|k| !labels_b.contains_key(k)) {
        return Err(MetricsError::KeyMismatch);
    }
    if labels_a.is_empty() {
        return Err(MetricsError::InvalidParameter("no labels to compare".into()));
    }
    let (mut matches, mut ab, mut ba) = (0, 0, 0);
    for (k, a) in labels_a {
        match (a, &labels_b[k]) {
            (x, y) if x == y => matches += 1,
            (SentenceLabel::Biased, _) => ab += 1,
            _ => ba += 1,
        }
    }
    let total = labels_a.len();
    let diffs = ab + ba;
    Ok(AgreementBreakdown {
        total,
        match_count: matches,
        diff_count: diffs,
        rate: matches as f64 / total as f64,
        a_biased_b_not: ab,
        a_not_b_biased: ba,
        a_biased_b_not_share: ratio(ab as u64, diffs as u64),
        a_not_b_biased_share: ratio(ba as u64, diffs as u64),
    })
}

/// Serialized agreement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub alpha: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub level: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub skipped_resamples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<ClassificationMetrics>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<String>,
}

impl MetricsReport {
    /// Alpha with its bootstrap interval; failures become flags rather than errors.
    pub fn compute(data: &ReliabilityData, resamples: usize, seed: u64, level: f64) -> Self {
        Self::compute_with_bootstrap(data, resamples, seed, level).0
    }

    /// Like [`MetricsReport::compute`], also returning the bootstrap distribution.
    pub fn compute_with_bootstrap(
        data: &ReliabilityData,
        resamples: usize,
        seed: u64,
        level: f64,
    ) -> (Self, Option<BootstrapResult>) {
        let mut report = MetricsReport {
            alpha: None,
            ci_low: None,
            ci_high: None,
            level,
            bootstrap_b: resamples,
            seed,
            skipped_resamples: 0,
            confusion: None,
            metrics: None,
            flags: Vec::new(),
        };
        match krippendorff_alpha(data) {
            Ok(a) => report.alpha = Some(a),
            Err(e) => {
                report.flags.push(e.flag().to_owned());
                return (report, None);
            }
        }
        if resamples == 0 {
            return (report, None);
        }
        match bootstrap_alpha(data, resamples, seed, level) {
            Ok(b) => {
                report.ci_low = Some(b.interval.low);
                report.ci_high = Some(b.interval.high);
                report.skipped_resamples = b.skipped;
                (report, Some(b))
            }
            Err(e) => {
                report.flags.push(e.flag().to_owned());
                (report, None)
            }
        }
    }

    pub fn with_confusion(mut self, confusion: ConfusionMatrix) -> Self {
        self.metrics = Some(classification_metrics(&confusion));
        self.confusion = Some(confusion);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SentenceLabel::{Biased as B, NotBiased as N};

    #[test]
    fn metrics_with_undefined_denominators() {
        let m = classification_metrics(&ConfusionMatrix::new(0, 0, 0, 10));
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        let m = classification_metrics(&ConfusionMatrix::new(1, 1, 1, 1));
        assert_eq!((m.accuracy, m.precision, m.recall), (Some(0.5), Some(0.5), Some(0.5)));
    }

    #[test]
    fn confusion_from_labels() {
        let gold: BTreeMap<_, _> = [(1, B), (2, B), (3, N), (4, N)].into_iter().collect();
        let pred: BTreeMap<_, _> = [(1, B), (2, N), (3, B), (4, N), (5, B)].into_iter().collect();
        assert_eq!(ConfusionMatrix::from_labels(&gold, &pred), ConfusionMatrix::new(1, 1, 1, 1));
    }

    #[test]
    fn breakdown_identical_and_mismatched() {
        let a: BTreeMap<_, _> = [(1, B), (2, N)].into_iter().collect();
        let r = agreement_breakdown(&a, &a).unwrap();
        assert_eq!((r.rate, r.diff_count, r.a_biased_b_not_share), (1.0, 0, None));
        let b: BTreeMap<_, _> = [(1, B), (3, N)].into_iter().collect();
        assert_eq!(agreement_breakdown(&a, &b), Err(MetricsError::KeyMismatch));
    }

    #[test]
    fn report_flags_empty_data() {
        let r = MetricsReport::compute(&ReliabilityData::new(), 10, 1, 0.95);
        assert_eq!(r.flags, vec!["NoPairableValues"]);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["alpha", "ci_low", "ci_high", "level", "bootstrap_b", "seed", "skipped_resamples"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
