use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DownstreamFixture;
use crate::error::{Error, Result};
use crate::metrics::MetricVector;

/// Intrinsic metrics keyed by `(tokenizer, language)`.
pub type MetricTable = BTreeMap<(String, String), MetricVector>;

/// One comparison: metric differences `X_i - X_j` and whether `i` won.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseExample {
    pub tok_i: String,
    pub tok_j: String,
    pub language: String,
    pub features: Vec<f64>,
    pub label: bool,
}

impl PairwiseExample {
    /// The same comparison seen from the other side.
    pub fn flipped(&self) -> Self {
        PairwiseExample {
            tok_i: self.tok_j.clone(),
            tok_j: self.tok_i.clone(),
            language: self.language.clone(),
            features: self.features.iter().map(|v| -v).collect(),
            label: !self.label,
        }
    }

    pub fn involves(&self, tokenizer: &str) -> bool {
        self.tok_i == tokenizer || self.tok_j == tokenizer
    }
}

pub(crate) fn feature_row(
    metrics: &MetricTable,
    tok: &str,
    lang: &str,
    features: &[String],
) -> Result<Vec<f64>> {
    let mv = metrics
        .get(&(tok.to_string(), lang.to_string()))
        .ok_or_else(|| Error::MissingMetrics {
            tokenizer: tok.to_string(),
            language: lang.to_string(),
        })?;
    features.iter().map(|f| mv.get(f)).collect()
}

pub(crate) fn table_axes(metrics: &MetricTable) -> (Vec<String>, Vec<String>) {
    let toks: BTreeSet<&String> = metrics.keys().map(|(t, _)| t).collect();
    let langs: BTreeSet<&String> = metrics.keys().map(|(_, l)| l).collect();
    (
        toks.into_iter().cloned().collect(),
        langs.into_iter().cloned().collect(),
    )
}

/// One example per language and unordered tokenizer pair, oriented by a
/// seeded coin flip. Tokenizers and languages are taken from `metrics` in
/// sorted order; the label says whether `tok_i` has the lower mean MetricX.
pub fn build_pairwise_dataset(
    metrics: &MetricTable,
    fixture: &DownstreamFixture,
    scale: &str,
    feature_set: &[String],
    seed: u64,
) -> Result<Vec<PairwiseExample>> {
    if feature_set.is_empty() {
        return Err(Error::InvalidArgument("empty feature set".into()));
    }
    let (toks, langs) = table_axes(metrics);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for lang in &langs {
        let rows = toks
            .iter()
            .map(|t| feature_row(metrics, t, lang, feature_set))
            .collect::<Result<Vec<_>>>()?;
        let scores = toks
            .iter()
            .map(|t| fixture.mean_metricx(t, scale, lang))
            .collect::<Result<Vec<_>>>()?;
        for a in 0..toks.len() {
            for b in a + 1..toks.len() {
                if scores[a] == scores[b] {
                    return Err(Error::DownstreamTie(
                        toks[a].clone(),
                        toks[b].clone(),
                        lang.clone(),
                    ));
                }
                let (i, j) = if rng.gen::<bool>() { (b, a) } else { (a, b) };
                let features: Vec<f64> = rows[i].iter().zip(&rows[j]).map(|(x, y)| x - y).collect();
                if features.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite metric difference for {} vs {} on {lang}",
                        toks[i], toks[j]
                    )));
                }
                out.push(PairwiseExample {
                    tok_i: toks[i].clone(),
                    tok_j: toks[j].clone(),
                    language: lang.clone(),
                    features,
                    label: scores[i] < scores[j],
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::builtin_mt_fixture;
    use crate::metrics::METRIC_NAMES;

    fn fake_metrics(fixture: &DownstreamFixture) -> MetricTable {
        let mut m = MetricTable::new();
        for (ti, t) in fixture.tokenizers().iter().enumerate() {
            for (li, l) in fixture.languages().iter().enumerate() {
                let k = (ti * 7 + li) as f64;
                m.insert(
                    (t.clone(), l.clone()),
                    MetricVector {
                        compression: 1000 + ti as u64 * 10 + li as u64,
                        cardinality: 50 + ti as u64,
                        auc: 10.0 + k,
                        slope: -1.0 - 0.01 * k,
                        power_law: 0.1 + 0.001 * k,
                    },
                );
            }
        }
        m
    }

    fn all_features() -> Vec<String> {
        METRIC_NAMES.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sizes_match_pair_counts() {
        let fixture = builtin_mt_fixture();
        let metrics = fake_metrics(&fixture);
        let data = build_pairwise_dataset(&metrics, &fixture, "2.7B", &all_features(), 0).unwrap();
        assert_eq!(data.len(), 60);
        let held = &fixture.tokenizers()[0];
        assert_eq!(data.iter().filter(|e| !e.involves(held)).count(), 40);
        assert_eq!(data.iter().filter(|e| e.involves(held)).count(), 20);
    }

    #[test]
    fn aya_beats_gpt2_on_zh() {
        let fixture = builtin_mt_fixture();
        let metrics = fake_metrics(&fixture);
        for seed in 0..4 {
            let data =
                build_pairwise_dataset(&metrics, &fixture, "2.7B", &all_features(), seed).unwrap();
            let e = data
                .iter()
                .find(|e| e.language == "zh" && e.involves("Aya 23") && e.involves("GPT-2"))
                .unwrap();
            assert_eq!(e.label, e.tok_i == "Aya 23");
        }
    }

    #[test]
    fn flipping_negates_and_relabels() {
        let e = PairwiseExample {
            tok_i: "a".into(),
            tok_j: "b".into(),
            language: "xx".into(),
            features: vec![1.5, -2.0],
            label: true,
        };
        let f = e.flipped();
        assert_eq!(f.features, vec![-1.5, 2.0]);
        assert!(!f.label);
        assert_eq!(f.flipped(), e);
    }

    #[test]
    fn missing_metrics_is_an_error() {
        let fixture = builtin_mt_fixture();
        let mut metrics = fake_metrics(&fixture);
        metrics.remove(&("GPT-2".to_string(), "de".to_string()));
        let err =
            build_pairwise_dataset(&metrics, &fixture, "2.7B", &all_features(), 0).unwrap_err();
        assert!(matches!(err, Error::MissingMetrics { .. }));
    }
}
