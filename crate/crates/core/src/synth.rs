//! Deterministic synthetic data: Zipfian token streams with exactly known
//! counts, and small tokenizer/language worlds with planted outcomes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Direction, DownstreamFixture, FixtureRecord, TokenId, TokenSequence};
use crate::error::{Error, Result};
use crate::metrics::MetricVector;
use crate::predictor::MetricTable;

/// Exact counts `round(C / r^s)` for ranks `1..=n_types`, with `C` chosen so
/// the counts sum to roughly `n_tokens`.
pub fn zipf_counts(n_tokens: u64, n_types: usize, exponent: f64) -> Result<Vec<u64>> {
    if n_types < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 types, got {n_types}"
        )));
    }
    if !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "exponent must be finite and >= 0, got {exponent}"
        )));
    }
    let harmonic: f64 = (1..=n_types).map(|r| (r as f64).powf(-exponent)).sum();
    let c = n_tokens as f64 / harmonic;
    let counts: Vec<u64> = (1..=n_types)
        .map(|r| (c / (r as f64).powf(exponent)).round() as u64)
        .collect();
    if let Some(r) = counts.iter().position(|&k| k == 0) {
        return Err(Error::InvalidArgument(format!(
            "{n_tokens} tokens over {n_types} types at exponent {exponent} leaves rank {} with zero count",
            r + 1
        )));
    }
    Ok(counts)
}

/// A shuffled stream whose token `r - 1` occurs exactly `zipf_counts[r - 1]`
/// times.
pub fn generate_zipf_stream(
    n_tokens: u64,
    n_types: usize,
    exponent: f64,
    seed: u64,
) -> Result<TokenSequence> {
    let counts = zipf_counts(n_tokens, n_types, exponent)?;
    let mut tokens: Vec<TokenId> = Vec::with_capacity(counts.iter().sum::<u64>() as usize);
    for (id, &k) in counts.iter().enumerate() {
        tokens.extend(std::iter::repeat_n(id as TokenId, k as usize));
    }
    tokens.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(TokenSequence::new(tokens, format!("zipf(s={exponent})")))
}

#[derive(Debug, Clone)]
pub struct SyntheticWorldConfig {
    pub tokenizers: usize,
    pub languages: usize,
    pub scale: String,
    /// The metric whose value alone decides downstream quality (lower wins).
    pub determining_metric: String,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        SyntheticWorldConfig {
            tokenizers: 6,
            languages: 4,
            scale: "2.7B".into(),
            determining_metric: "power_law".into(),
            seed: 0,
        }
    }
}

/// Random metrics plus a downstream fixture in which the mean MetricX of a
/// tokenizer is an increasing function of `determining_metric`. Within each
/// language that metric takes evenly spaced values so every pairwise
/// difference has a clear margin.
pub fn synthetic_world(cfg: &SyntheticWorldConfig) -> Result<(MetricTable, DownstreamFixture)> {
    if cfg.tokenizers < 2 || cfg.languages < 1 {
        return Err(Error::InvalidArgument(
            "need at least 2 tokenizers and 1 language".into(),
        ));
    }
    let probe = MetricVector {
        compression: 0,
        cardinality: 0,
        auc: 0.0,
        slope: 0.0,
        power_law: 0.0,
    };
    probe.get(&cfg.determining_metric)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let toks: Vec<String> = (0..cfg.tokenizers)
        .map(|i| format!("tok-{}", (b'a' + i as u8) as char))
        .collect();
    let langs: Vec<String> = (0..cfg.languages).map(|i| format!("lang{i}")).collect();

    let mut metrics = MetricTable::new();
    let mut records = Vec::new();
    for lang in &langs {
        let mut order: Vec<usize> = (0..cfg.tokenizers).collect();
        order.shuffle(&mut rng);
        for (t, tok) in toks.iter().enumerate() {
            let level = (order[t] + 1) as f64;
            let mut mv = MetricVector {
                compression: rng.gen_range(50_000..150_000),
                cardinality: rng.gen_range(5_000..40_000),
                auc: rng.gen_range(40.0..60.0),
                slope: rng.gen_range(-1.3..-0.7),
                power_law: rng.gen_range(0.05..0.5),
            };
            match cfg.determining_metric.as_str() {
                "compression" => mv.compression = 50_000 + 10_000 * level as u64,
                "cardinality" => mv.cardinality = 5_000 + 5_000 * level as u64,
                "auc" => mv.auc = 40.0 + 3.0 * level,
                "slope" => mv.slope = -1.3 + 0.1 * level,
                _ => mv.power_law = 0.05 * level,
            }
            metrics.insert((tok.clone(), lang.clone()), mv);

            let mean = 4.0 + 2.0 * level;
            let spread = rng.gen_range(0.0..1.5);
            for (direction, metricx) in [
                (Direction::FromEnglish, mean + spread),
                (Direction::IntoEnglish, mean - spread),
            ] {
                records.push(FixtureRecord {
                    tokenizer: tok.clone(),
                    scale: cfg.scale.clone(),
                    language: lang.clone(),
                    direction,
                    metricx,
                    chrf: rng.gen_range(30.0..60.0),
                });
            }
        }
    }
    Ok((metrics, DownstreamFixture::from_records(records)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::metric_vector;

    #[test]
    fn zipf_exponent_one() {
        let seq = generate_zipf_stream(1_000_000, 403, 1.0, 7).unwrap();
        let m = metric_vector(&seq).unwrap();
        assert!((m.slope + 1.0).abs() < 2e-2, "slope {}", m.slope);
        assert!(m.power_law < 0.02);
        assert_eq!(m.cardinality, 403);
    }

    #[test]
    fn zipf_exponent_zero_is_flat() {
        let seq = generate_zipf_stream(40_300, 403, 0.0, 7).unwrap();
        let m = metric_vector(&seq).unwrap();
        assert!(m.slope.abs() < 1e-9);
        assert!(m.power_law < 1e-9);
    }

    #[test]
    fn zipf_is_seeded() {
        let a = generate_zipf_stream(5_000, 50, 1.2, 3).unwrap();
        let b = generate_zipf_stream(5_000, 50, 1.2, 3).unwrap();
        let c = generate_zipf_stream(5_000, 50, 1.2, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.tokens, c.tokens);
    }

    #[test]
    fn zipf_zero_counts_rejected() {
        assert!(generate_zipf_stream(100, 403, 1.0, 0).is_err());
        assert!(generate_zipf_stream(100, 2, 1.0, 0).is_err());
    }

    #[test]
    fn world_is_complete() {
        let (metrics, fixture) = synthetic_world(&SyntheticWorldConfig::default()).unwrap();
        assert_eq!(metrics.len(), 24);
        assert_eq!(fixture.len(), 48);
    }
}
