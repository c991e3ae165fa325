//! Intrinsic tokenizer metrics computed from token frequencies.
//!
//! All logarithms are natural. The rank-frequency curve is truncated to
//! `ln(rank) <= truncation_bound` (ranks 1..=403 for the default bound of 6)
//! before the fit, the fit residual and the area are computed; compression
//! and cardinality always use the full stream.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, TokenSequence};
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_TRUNCATION_BOUND: f64 = 6.0;

/// Number of uniformly spaced abscissae the curve is resampled onto before
/// Simpson integration (2^11 + 1, an even number of intervals).
pub const SIMPSON_GRID: usize = 2049;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenFrequencyTable {
    counts: HashMap<TokenId, u64>,
    total: u64,
}

impl TokenFrequencyTable {
    /// Builds a table from explicit counts; zero counts are rejected.
    pub fn from_counts(counts: impl IntoIterator<Item = (TokenId, u64)>) -> Result<Self> {
        let mut table = TokenFrequencyTable::default();
        for (tok, c) in counts {
            if c == 0 {
                return Err(Error::InvalidArgument(format!(
                    "token {tok} has a zero count"
                )));
            }
            *table.counts.entry(tok).or_insert(0) += c;
            table.total += c;
        }
        if table.total == 0 {
            return Err(Error::NoTokens);
        }
        Ok(table)
    }

    pub fn count(&self, token: TokenId) -> u64 {
        self.counts.get(&token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cardinality(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, u64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    /// Adds another table's counts (associative and commutative).
    pub fn merge(&mut self, other: &TokenFrequencyTable) {
        for (&t, &c) in &other.counts {
            *self.counts.entry(t).or_insert(0) += c;
        }
        self.total += other.total;
    }

    /// Multiplies every count by `k`.
    pub fn scaled(&self, k: u64) -> TokenFrequencyTable {
        TokenFrequencyTable {
            counts: self.counts.iter().map(|(&t, &c)| (t, c * k)).collect(),
            total: self.total * k,
        }
    }

    /// `(token, count)` sorted by descending count, ties by ascending id.
    pub fn ranked(&self) -> Vec<(TokenId, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

pub fn count_frequencies(seq: &TokenSequence) -> Result<TokenFrequencyTable> {
    if seq.is_empty() {
        return Err(Error::NoTokens);
    }
    let mut counts: HashMap<TokenId, u64> = HashMap::new();
    for &t in &seq.tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    Ok(TokenFrequencyTable {
        counts,
        total: seq.tokens.len() as u64,
    })
}

pub fn compression(seq: &TokenSequence) -> u64 {
    seq.tokens.len() as u64
}

pub fn cardinality(table: &TokenFrequencyTable) -> u64 {
    table.cardinality() as u64
}

/// Log-log rank-frequency points sorted by ascending log-rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFrequencyCurve {
    pub points: Vec<(f64, f64)>,
    pub truncation_bound: f64,
}

impl RankFrequencyCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn x_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.0, self.points.last()?.0))
    }
}

pub fn rank_frequency_curve(
    table: &TokenFrequencyTable,
    truncation_bound: f64,
) -> RankFrequencyCurve {
    let points = table
        .ranked()
        .into_iter()
        .enumerate()
        .map(|(i, (_, c))| (((i + 1) as f64).ln(), (c as f64).ln()))
        .take_while(|&(x, _)| x <= truncation_bound)
        .collect();
    RankFrequencyCurve {
        points,
        truncation_bound,
    }
}

/// One row of the untruncated curve as exported for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub rank: u64,
    pub count: u64,
    pub log_rank: f64,
    pub log_count: f64,
}

pub fn curve_rows(table: &TokenFrequencyTable) -> Vec<CurveRow> {
    table
        .ranked()
        .into_iter()
        .enumerate()
        .map(|(i, (_, c))| {
            let rank = i as u64 + 1;
            CurveRow {
                rank,
                count: c,
                log_rank: (rank as f64).ln(),
                log_count: (c as f64).ln(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfFit {
    pub beta0: f64,
    pub beta1: f64,
}

impl ZipfFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.beta0 + self.beta1 * x
    }
}

pub fn zipf_fit(curve: &RankFrequencyCurve) -> Result<ZipfFit> {
    let (beta0, beta1) = stats::ols_fit(&curve.points)?;
    Ok(ZipfFit { beta0, beta1 })
}

/// Mean absolute residual of the curve from `fit`.
pub fn power_law_deviation(curve: &RankFrequencyCurve, fit: &ZipfFit) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    let sum: f64 = curve
        .points
        .iter()
        .map(|&(x, y)| (fit.predict(x) - y).abs())
        .sum();
    sum / curve.points.len() as f64
}

/// Area under the piecewise-linear interpolant of `points` (x strictly
/// increasing), resampled onto [`SIMPSON_GRID`] uniform abscissae and
/// integrated with composite Simpson.
pub fn resampled_simpson_area(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len(), 2));
    }
    if points
        .windows(2)
        .any(|w| w[1].0.is_nan() || w[1].0 <= w[0].0)
    {
        return Err(Error::InvalidArgument(
            "curve abscissae must be strictly increasing".into(),
        ));
    }
    let x0 = points[0].0;
    let x1 = points[points.len() - 1].0;
    let intervals = (SIMPSON_GRID - 1) as f64;
    let h = (x1 - x0) / intervals;

    let mut ys = Vec::with_capacity(SIMPSON_GRID);
    let mut seg = 0;
    for k in 0..SIMPSON_GRID {
        let x = if k == SIMPSON_GRID - 1 {
            x1
        } else {
            x0 + k as f64 * h
        };
        while seg + 2 < points.len() && points[seg + 1].0 < x {
            seg += 1;
        }
        let (xa, ya) = points[seg];
        let (xb, yb) = points[seg + 1];
        let t = ((x - xa) / (xb - xa)).clamp(0.0, 1.0);
        ys.push(if t == 1.0 { yb } else { ya + t * (yb - ya) });
    }
    stats::simpson_integrate(&ys, h)
}

/// Area under the (truncated) log-log curve; needs at least three points.
pub fn auc(curve: &RankFrequencyCurve) -> Result<f64> {
    if curve.points.len() < 3 {
        return Err(Error::TooFewPoints(curve.points.len(), 3));
    }
    resampled_simpson_area(&curve.points)
}

/// The five intrinsic metrics for one tokenized corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub compression: u64,
    pub cardinality: u64,
    pub auc: f64,
    pub slope: f64,
    pub power_law: f64,
}

/// Names accepted wherever a subset of metrics is selected.
pub const METRIC_NAMES: [&str; 5] = ["compression", "cardinality", "auc", "power_law", "slope"];

impl MetricVector {
    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "compression" => self.compression as f64,
            "cardinality" => self.cardinality as f64,
            "auc" => self.auc,
            "power_law" | "power-law" | "powerlaw" => self.power_law,
            "slope" => self.slope,
            other => return Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        })
    }
}

/// Metrics for a frequency table; the table total is the compression.
pub fn metrics_from_table(
    table: &TokenFrequencyTable,
    truncation_bound: f64,
) -> Result<MetricVector> {
    let curve = rank_frequency_curve(table, truncation_bound);
    let fit = zipf_fit(&curve)?;
    // a two-point curve is a single segment; the resampled area is still exact
    let area = resampled_simpson_area(&curve.points)?;
    Ok(MetricVector {
        compression: table.total(),
        cardinality: cardinality(table),
        auc: area,
        slope: fit.beta1,
        power_law: power_law_deviation(&curve, &fit),
    })
}

pub fn metric_vector(seq: &TokenSequence) -> Result<MetricVector> {
    metric_vector_with_bound(seq, DEFAULT_TRUNCATION_BOUND)
}

pub fn metric_vector_with_bound(
    seq: &TokenSequence,
    truncation_bound: f64,
) -> Result<MetricVector> {
    metrics_from_table(&count_frequencies(seq)?, truncation_bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: &[TokenId]) -> TokenSequence {
        TokenSequence::new(t.to_vec(), "test")
    }

    fn curve(points: Vec<(f64, f64)>) -> RankFrequencyCurve {
        RankFrequencyCurve {
            points,
            truncation_bound: DEFAULT_TRUNCATION_BOUND,
        }
    }

    #[test]
    fn frequencies() {
        let t = count_frequencies(&seq(&[5, 1, 5])).unwrap();
        assert_eq!((t.count(5), t.count(1), t.total()), (2, 1, 3));
        let t = count_frequencies(&seq(&[7])).unwrap();
        assert_eq!((t.count(7), t.total()), (1, 1));
        assert!(matches!(count_frequencies(&seq(&[])), Err(Error::NoTokens)));
    }

    #[test]
    fn compression_and_cardinality() {
        assert_eq!(compression(&seq(&[5, 1, 5])), 3);
        assert_eq!(compression(&seq(&[])), 0);
        assert_eq!(
            cardinality(&count_frequencies(&seq(&[5, 1, 5])).unwrap()),
            2
        );
        assert_eq!(cardinality(&count_frequencies(&seq(&[7])).unwrap()), 1);
        let draws: Vec<TokenId> = (0..1000u32).map(|i| (i * 7 + i / 3) % 10).collect();
        assert_eq!(cardinality(&count_frequencies(&seq(&draws)).unwrap()), 10);
    }

    #[test]
    fn curve_points_and_ties() {
        let t = TokenFrequencyTable::from_counts([(0, 8), (1, 4), (2, 2)]).unwrap();
        let c = rank_frequency_curve(&t, 6.0);
        assert_eq!(
            c.points,
            vec![
                (0.0, 8f64.ln()),
                (2f64.ln(), 4f64.ln()),
                (3f64.ln(), 2f64.ln())
            ]
        );
        let tie = TokenFrequencyTable::from_counts([(9, 3), (4, 3)]).unwrap();
        assert_eq!(tie.ranked()[0].0, 4);
    }

    #[test]
    fn truncation_keeps_403_ranks() {
        let t =
            TokenFrequencyTable::from_counts((0..1000u32).map(|i| (i, 1000 - i as u64))).unwrap();
        let c = rank_frequency_curve(&t, 6.0);
        assert_eq!(c.len(), 403);
        assert!(c.points.iter().all(|p| p.0 <= 6.0));
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = (1..=403)
            .map(|r| {
                let r = r as f64;
                (r.ln(), (2f64.powi(20) / r).ln())
            })
            .collect();
        let fit = zipf_fit(&curve(pts)).unwrap();
        assert!((fit.beta1 + 1.0).abs() < 1e-9);

        let flat = TokenFrequencyTable::from_counts((0..50u32).map(|i| (i, 5))).unwrap();
        assert!(
            zipf_fit(&rank_frequency_curve(&flat, 6.0))
                .unwrap()
                .beta1
                .abs()
                < 1e-15
        );

        let f = zipf_fit(&curve(vec![(0.0, 0.0), (1.0, 2.0)])).unwrap();
        assert_eq!((f.beta0, f.beta1), (0.0, 2.0));
        assert!(zipf_fit(&curve(vec![(0.0, 1.0)])).is_err());
    }

    #[test]
    fn deviation_examples() {
        let line = curve(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)]);
        assert!(power_law_deviation(&line, &zipf_fit(&line).unwrap()) < 1e-15);
        let bump = curve(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]);
        let fit = zipf_fit(&bump).unwrap();
        assert!((fit.beta0 - 1.0 / 3.0).abs() < 1e-15 && fit.beta1.abs() < 1e-15);
        assert!((power_law_deviation(&bump, &fit) - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn auc_examples() {
        let rect = curve((0..=6).map(|x| (x as f64, 2.5)).collect());
        assert!((auc(&rect).unwrap() - 15.0).abs() < 1e-9);
        let tri = curve(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert!((auc(&tri).unwrap() - 2.0).abs() < 1e-9);
        let h = 3.0 / (SIMPSON_GRID - 1) as f64;
        let quad = curve(
            (0..SIMPSON_GRID)
                .map(|k| (k as f64 * h, (k as f64 * h).powi(2)))
                .collect(),
        );
        assert!((auc(&quad).unwrap() - 9.0).abs() < 1e-6);
        assert!(matches!(
            auc(&curve(vec![(0.0, 1.0), (1.0, 0.0)])),
            Err(Error::TooFewPoints(2, 3))
        ));
    }

    #[test]
    fn metric_vector_small_stream() {
        let m = metric_vector(&seq(&[5, 1, 5])).unwrap();
        assert_eq!((m.compression, m.cardinality), (3, 2));
        assert!(m.power_law.abs() < 1e-15);
        // segment from (0, ln 2) to (ln 2, 0)
        assert!((m.auc - 2f64.ln().powi(2) / 2.0).abs() < 1e-12);
        assert!(metric_vector(&seq(&[7])).is_err());
    }

    #[test]
    fn round_robin_stream_is_flat() {
        let stream: Vec<TokenId> = (0..1000u32).map(|i| i % 10).collect();
        let m = metric_vector(&seq(&stream)).unwrap();
        assert!(m.slope.abs() < 1e-15);
        assert!(m.power_law < 1e-15);
        assert_eq!(m.cardinality, 10);
    }

    #[test]
    fn metric_lookup_by_name() {
        let m = metric_vector(&seq(&[1, 1, 2, 3])).unwrap();
        assert_eq!(m.get("compression").unwrap(), 4.0);
        assert_eq!(m.get("power_law").unwrap(), m.power_law);
        assert!(m.get("entropy").is_err());
    }
}
