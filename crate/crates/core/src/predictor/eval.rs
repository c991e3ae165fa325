use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{
    build_pairwise_dataset, feature_row, table_axes, MetricTable, PairwiseExample,
};
use super::fit::fit_model;
use super::model::{Hyperparameters, ModelKind};
use crate::corpus::DownstreamFixture;
use crate::error::{Error, Result};
use crate::ranking::ProbabilityMatrix;
use crate::stats::f1_score;

/// Everything needed to rebuild the pairwise dataset.
#[derive(Debug, Clone, Copy)]
pub struct PredictionInputs<'a> {
    pub metrics: &'a MetricTable,
    pub fixture: &'a DownstreamFixture,
    pub scale: &'a str,
    pub seed: u64,
    pub cv_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutFold {
    pub heldout: String,
    pub n_train: usize,
    pub n_eval: usize,
    pub f1: f64,
    pub hyperparameters: Hyperparameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: ModelKind,
    pub feature_set: Vec<String>,
    pub scale: String,
    pub seed: u64,
    pub cv_folds: usize,
    pub per_heldout: BTreeMap<String, f64>,
    pub mean_f1: f64,
    pub folds: Vec<HeldOutFold>,
}

/// Trains on every comparison not involving a tokenizer and scores F1 on the
/// comparisons that do, once per tokenizer.
pub fn leave_one_tokenizer_out(
    inputs: PredictionInputs<'_>,
    feature_set: &[String],
    kind: ModelKind,
) -> Result<EvaluationReport> {
    let data = build_pairwise_dataset(
        inputs.metrics,
        inputs.fixture,
        inputs.scale,
        feature_set,
        inputs.seed,
    )?;
    let (toks, _) = table_axes(inputs.metrics);
    if toks.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: toks.len(),
        });
    }

    let folds = toks
        .par_iter()
        .map(|held| {
            let (eval, train): (Vec<&PairwiseExample>, Vec<&PairwiseExample>) =
                data.iter().partition(|e| e.involves(held));
            let train: Vec<PairwiseExample> = train.into_iter().cloned().collect();
            let model = fit_model(kind, &train, inputs.cv_folds)?;
            let predicted = eval
                .iter()
                .map(|e| Ok(model.predict_pair(&e.features)? > 0.5))
                .collect::<Result<Vec<_>>>()?;
            let actual: Vec<bool> = eval.iter().map(|e| e.label).collect();
            Ok(HeldOutFold {
                heldout: held.clone(),
                n_train: train.len(),
                n_eval: eval.len(),
                f1: f1_score(&predicted, &actual)?,
                hyperparameters: model.hyperparameters,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_heldout: BTreeMap<String, f64> =
        folds.iter().map(|f| (f.heldout.clone(), f.f1)).collect();
    let mean_f1 = folds.iter().map(|f| f.f1).sum::<f64>() / folds.len() as f64;
    Ok(EvaluationReport {
        model: kind,
        feature_set: feature_set.to_vec(),
        scale: inputs.scale.to_string(),
        seed: inputs.seed,
        cv_folds: inputs.cv_folds,
        per_heldout,
        mean_f1,
        folds,
    })
}

/// For each language, fits on the other languages and predicts the full
/// matrix of win probabilities between that language's tokenizers. Both
/// orientations are scored and averaged so `P[i][j] + P[j][i] = 1`.
pub fn leave_one_language_out(
    inputs: PredictionInputs<'_>,
    feature_set: &[String],
    kind: ModelKind,
) -> Result<BTreeMap<String, ProbabilityMatrix>> {
    let data = build_pairwise_dataset(
        inputs.metrics,
        inputs.fixture,
        inputs.scale,
        feature_set,
        inputs.seed,
    )?;
    let (_, langs) = table_axes(inputs.metrics);
    if langs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: langs.len(),
        });
    }
    let matrices = langs
        .par_iter()
        .map(|lang| {
            Ok((
                lang.clone(),
                heldout_matrix(&data, inputs, feature_set, kind, lang)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(matrices.into_iter().collect())
}

/// The leave-one-language-out matrix for a single held-out language.
pub fn predict_heldout_language(
    inputs: PredictionInputs<'_>,
    feature_set: &[String],
    kind: ModelKind,
    language: &str,
) -> Result<ProbabilityMatrix> {
    let (_, langs) = table_axes(inputs.metrics);
    if !langs.iter().any(|l| l == language) {
        return Err(Error::InvalidArgument(format!(
            "no metrics for language {language:?}"
        )));
    }
    if langs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: langs.len(),
        });
    }
    let data = build_pairwise_dataset(
        inputs.metrics,
        inputs.fixture,
        inputs.scale,
        feature_set,
        inputs.seed,
    )?;
    heldout_matrix(&data, inputs, feature_set, kind, language)
}

fn heldout_matrix(
    data: &[PairwiseExample],
    inputs: PredictionInputs<'_>,
    feature_set: &[String],
    kind: ModelKind,
    lang: &str,
) -> Result<ProbabilityMatrix> {
    let (toks, _) = table_axes(inputs.metrics);
    let train: Vec<PairwiseExample> = data
        .iter()
        .filter(|e| e.language != lang)
        .cloned()
        .collect();
    let model = fit_model(kind, &train, inputs.cv_folds)?;
    let rows = toks
        .iter()
        .map(|t| feature_row(inputs.metrics, t, lang, feature_set))
        .collect::<Result<Vec<_>>>()?;
    let n = toks.len();
    let mut raw = vec![vec![0.5; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let diff: Vec<f64> = rows[i].iter().zip(&rows[j]).map(|(a, b)| a - b).collect();
                raw[i][j] = model.predict_pair(&diff)?;
            }
        }
    }
    let mut matrix = ProbabilityMatrix::new(toks)?;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                matrix.set(i, j, (raw[i][j] + 1.0 - raw[j][i]) / 2.0);
            }
        }
    }
    Ok(matrix)
}
