//! Unit-level bootstrap of alpha.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha::{krippendorff_alpha, ReliabilityData};
use super::MetricsError;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    /// Confidence level, e.g. 0.95.
    pub level: f64,
}

/// Touching intervals count as overlapping.
pub fn intervals_overlap(a: &Interval, b: &Interval) -> Result<bool, MetricsError> {
    if a.level != b.level {
        return Err(MetricsError::LevelMismatch(a.level, b.level));
    }
    Ok(a.low.max(b.low) <= a.high.min(b.high))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub interval: Interval,
    /// One entry per resample; `None` where the resample had no defined alpha.
    pub alphas: Vec<Option<f64>>,
    pub skipped: usize,
    pub seed: u64,
}

impl BootstrapResult {
    pub fn resamples(&self) -> usize {
        self.alphas.len()
    }

    /// `resample_index,alpha` rows for every non-skipped resample.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "resample_index,alpha")?;
        for (i, a) in self.alphas.iter().enumerate() {
            if let Some(a) = a {
                writeln!(out, "{i},{a}")?;
            }
        }
        out.flush()
    }
}

/// Linear-interpolated empirical quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Resamples pairable units with replacement `resamples` times and returns the
/// percentile interval at `level`. Each resample draws from its own ChaCha
/// stream selected by the resample index, so results do not depend on thread
/// scheduling. Resamples without a defined alpha are skipped and counted.
pub fn bootstrap_alpha(
    data: &ReliabilityData,
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult, MetricsError> {
    krippendorff_alpha(data)?;
    if resamples == 0 {
        return Err(MetricsError::InvalidParameter("resample count must be at least 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::InvalidParameter(format!("level {level} outside (0, 1)")));
    }
    let pairable = data.pairable_units();

    let alphas: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let picks: Vec<usize> = (0..pairable.len())
                .map(|_| pairable[rng.random_range(0..pairable.len())])
                .collect();
            krippendorff_alpha(&data.resample(&picks)).ok()
        })
        .collect();

    let mut valid: Vec<f64> = alphas.iter().flatten().copied().collect();
    let skipped = alphas.len() - valid.len();
    if valid.is_empty() {
        return Err(MetricsError::DegenerateData);
    }
    valid.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let interval = Interval {
        low: quantile(&valid, tail),
        high: quantile(&valid, 1.0 - tail),
        level,
    };
    Ok(BootstrapResult { interval, alphas, skipped, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(low: f64, high: f64) -> Interval {
        Interval { low, high, level: 0.95 }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(intervals_overlap(&iv(0.40, 0.48), &iv(0.35, 0.43)), Ok(true));
        assert_eq!(intervals_overlap(&iv(0.40, 0.48), &iv(0.20, 0.30)), Ok(false));
        assert_eq!(intervals_overlap(&iv(0.1, 0.2), &iv(0.2, 0.3)), Ok(true));
        let other = Interval { level: 0.9, ..iv(0.1, 0.2) };
        assert!(matches!(intervals_overlap(&iv(0.1, 0.2), &other), Err(MetricsError::LevelMismatch(..))));
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.0), 0.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
        assert!((quantile(&v, 0.5) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn perfect_agreement_interval() {
        let data = ReliabilityData::from_triples(
            (0..20u64).flat_map(|u| (0..3u64).map(move |r| (r, u, (u % 3 == 0) as u8))),
        );
        let result = bootstrap_alpha(&data, 200, 7, 0.95).unwrap();
        assert_eq!((result.interval.low, result.interval.high), (1.0, 1.0));
        assert_eq!(result.resamples(), 200);
    }

    #[test]
    fn deterministic_for_seed() {
        let data = ReliabilityData::from_triples(
            (0..30u64).flat_map(|u| (0..4u64).map(move |r| (r, u, ((u * 7 + r * 3) % 5 < 2) as u8))),
        );
        let a = bootstrap_alpha(&data, 100, 42, 0.95).unwrap();
        let b = bootstrap_alpha(&data, 100, 42, 0.95).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_alpha(&data, 100, 43, 0.95).unwrap();
        assert_ne!(a.alphas, c.alphas);
    }

    #[test]
    fn histogram_csv() {
        let result = BootstrapResult {
            interval: iv(0.0, 1.0),
            alphas: vec![Some(0.5), None, Some(0.25)],
            skipped: 1,
            seed: 0,
        };
        let mut buf = Vec::new();
        result.write_histogram_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "resample_index,alpha\n0,0.5\n2,0.25\n");
    }
}
