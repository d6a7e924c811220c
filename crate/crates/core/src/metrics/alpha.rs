//! Krippendorff's alpha for nominal data with missing ratings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::aggregation::Annotation;

/// An annotator x unit matrix of nominal ratings with missing entries.
///
/// Units are stored column-wise: each unit keeps the list of (rater, value)
/// pairs it received. Ratings are small integer codes; the platform uses
/// 1 for biased and 0 for not biased.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityData {
    units: Vec<u64>,
    raters: Vec<u64>,
    columns: Vec<Vec<(usize, u8)>>,
}

impl ReliabilityData {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from `(rater, unit, value)` triples. A repeated (rater, unit) pair keeps the last value.
    pub fn from_triples(triples: impl IntoIterator<Item = (u64, u64, u8)>) -> Self {
        let mut data = Self::new();
        for (rater, unit, value) in triples {
            data.insert(rater, unit, value);
        }
        data
    }

    /// Sentence-level votes as ratings: raters are players, units are sentences.
    pub fn from_annotations<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> Self {
        Self::from_triples(annotations.into_iter().filter_map(|a| {
            a.sentence_label.map(|l| (a.player_id.0, a.sentence_id.0, l.code()))
        }))
    }

    pub fn insert(&mut self, rater: u64, unit: u64, value: u8) {
        let r = match self.raters.iter().position(|&x| x == rater) {
            Some(r) => r,
            None => {
                self.raters.push(rater);
                self.raters.len() - 1
            }
        };
        let u = match self.units.iter().position(|&x| x == unit) {
            Some(u) => u,
            None => {
                self.units.push(unit);
                self.columns.push(Vec::new());
                self.units.len() - 1
            }
        };
        let column = &mut self.columns[u];
        match column.iter_mut().find(|(rr, _)| *rr == r) {
            Some(slot) => slot.1 = value,
            None => column.push((r, value)),
        }
    }

    pub fn units(&self) -> &[u64] {
        &self.units
    }

    pub fn raters(&self) -> &[u64] {
        &self.raters
    }

    pub fn rating(&self, rater: u64, unit: u64) -> Option<u8> {
        let r = self.raters.iter().position(|&x| x == rater)?;
        let u = self.units.iter().position(|&x| x == unit)?;
        self.columns[u].iter().find(|(rr, _)| *rr == r).map(|&(_, v)| v)
    }

    /// Values given to the `i`-th unit, in insertion order.
    pub fn unit_values(&self, i: usize) -> impl Iterator<Item = u8> + '_ {
        self.columns[i].iter().map(|&(_, v)| v)
    }

    pub fn rating_count(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Indices of units with at least two ratings.
    pub fn pairable_units(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| self.columns[i].len() >= 2).collect()
    }

    /// A new data set made of the given unit columns (repeats allowed).
    pub fn resample(&self, unit_indices: &[usize]) -> Self {
        let mut data = Self { units: Vec::new(), raters: self.raters.clone(), columns: Vec::new() };
        for (k, &i) in unit_indices.iter().enumerate() {
            data.units.push(k as u64);
            data.columns.push(self.columns[i].clone());
        }
        data
    }

    /// Restricts to units accepted by `keep`.
    pub fn filter_units(&self, keep: impl Fn(u64) -> bool) -> Self {
        let picked: Vec<usize> = (0..self.units.len()).filter(|&i| keep(self.units[i])).collect();
        let mut data = self.resample(&picked);
        data.units = picked.iter().map(|&i| self.units[i]).collect();
        data
    }
}

/// Value-pair coincidences over all pairable values.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMatrix {
    pub values: Vec<u8>,
    /// Row-major `values.len()` squared.
    pub counts: Vec<f64>,
}

impl CoincidenceMatrix {
    pub fn from_data(data: &ReliabilityData) -> Self {
        let mut index: BTreeMap<u8, usize> = BTreeMap::new();
        for col in &data.columns {
            for &(_, v) in col {
                index.entry(v).or_insert(0);
            }
        }
        for (i, slot) in index.values_mut().enumerate() {
            *slot = i;
        }
        let k = index.len();
        let mut counts = vec![0.0; k * k];
        let mut per_value = vec![0u32; k];
        for col in &data.columns {
            let m = col.len();
            if m < 2 {
                continue;
            }
            per_value.iter_mut().for_each(|c| *c = 0);
            for &(_, v) in col {
                per_value[index[&v]] += 1;
            }
            let weight = 1.0 / (m - 1) as f64;
            for c in 0..k {
                if per_value[c] == 0 {
                    continue;
                }
                for d in 0..k {
                    let pairs = if c == d {
                        per_value[c] * (per_value[c] - 1)
                    } else {
                        per_value[c] * per_value[d]
                    };
                    counts[c * k + d] += f64::from(pairs) * weight;
                }
            }
        }
        Self { values: index.into_keys().collect(), counts }
    }

    pub fn get(&self, c: usize, d: usize) -> f64 {
        self.counts[c * self.values.len() + d]
    }

    /// Marginal totals n_c.
    pub fn marginals(&self) -> Vec<f64> {
        let k = self.values.len();
        (0..k).map(|c| (0..k).map(|d| self.get(c, d)).sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Alpha = 1 - D_o / D_e over the coincidence matrix of pairable values.
pub fn krippendorff_alpha(data: &ReliabilityData) -> Result<f64, MetricsError> {
    alpha_from_coincidences(&CoincidenceMatrix::from_data(data))
}

pub fn alpha_from_coincidences(m: &CoincidenceMatrix) -> Result<f64, MetricsError> {
    let n = m.total();
    if n <= 0.0 {
        return Err(MetricsError::NoPairableValues);
    }
    let marginals = m.marginals();
    let k = m.values.len();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += m.get(c, d);
                expected += marginals[c] * marginals[d];
            }
        }
    }
    if expected == 0.0 {
        return Err(MetricsError::DegenerateData);
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if d_o == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}
