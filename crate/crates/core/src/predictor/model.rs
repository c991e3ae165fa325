use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::linalg::{dot, sigmoid, sq_dist};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    LinearSvm,
    RbfSvm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ModelKind::Logistic => "logistic",
            ModelKind::LinearSvm => "linear-svm",
            ModelKind::RbfSvm => "rbf-svm",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "linsvm" | "linear-svm" | "linear" => Ok(ModelKind::LinearSvm),
            "rbfsvm" | "rbf-svm" | "rbf" => Ok(ModelKind::RbfSvm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }
}

/// Per-feature divisor fitted on the training split.
///
/// Features are metric differences, so they are only rescaled (by their
/// root mean square), never centred: negating an input still negates its
/// standardized image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let scale = (0..dim)
            .map(|k| {
                let rms = (rows.iter().map(|r| r[k] * r[k]).sum::<f64>() / n).sqrt();
                if rms > 0.0 && rms.is_finite() {
                    rms
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { scale }
    }

    pub fn identity(dim: usize) -> Self {
        Scaler {
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(v, s)| v / s).collect()
    }
}

/// Sigmoid calibration `P = σ(a·d + b)` over decision values `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, decision: f64) -> f64 {
        sigmoid(self.a * decision + self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Inverse regularization strength.
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseModel {
    pub kind: ModelKind,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub hyperparameters: Hyperparameters,
    pub beta0: f64,
    /// Linear weights in standardized feature space (empty for RBF).
    pub weights: Vec<f64>,
    /// Standardized support vectors (RBF only).
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefficients: Vec<f64>,
    pub platt: Option<Platt>,
}

impl PairwiseModel {
    pub fn dim(&self) -> usize {
        self.scaler.scale.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Raw decision value for an already standardized input.
    pub(crate) fn decision_standardized(&self, z: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Logistic | ModelKind::LinearSvm => self.beta0 + dot(&self.weights, z),
            ModelKind::RbfSvm => {
                let gamma = self.hyperparameters.gamma.unwrap_or(1.0);
                self.beta0
                    + self
                        .support_vectors
                        .iter()
                        .zip(&self.dual_coefficients)
                        .map(|(sv, c)| c * (-gamma * sq_dist(sv, z)).exp())
                        .sum::<f64>()
            }
        }
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.decision_standardized(&self.scaler.apply(x)))
    }

    /// Probability that the first tokenizer of the pair outperforms the second.
    pub fn predict_pair(&self, feature_diff: &[f64]) -> Result<f64> {
        let d = self.decision(feature_diff)?;
        Ok(match (self.kind, self.platt) {
            (ModelKind::Logistic, _) => sigmoid(d),
            (_, Some(p)) => p.probability(d),
            (_, None) => {
                return Err(Error::InvalidArgument(
                    "SVM model has no calibration; fit it with Platt scaling".into(),
                ))
            }
        })
    }

    /// A plain logistic model `σ(beta0 + w·x)` on unscaled inputs.
    pub fn logistic(beta0: f64, weights: Vec<f64>) -> Self {
        let dim = weights.len();
        PairwiseModel {
            kind: ModelKind::Logistic,
            feature_names: (0..dim).map(|i| format!("x{i}")).collect(),
            scaler: Scaler::identity(dim),
            hyperparameters: Hyperparameters {
                c: f64::INFINITY,
                gamma: None,
            },
            beta0,
            weights,
            support_vectors: Vec::new(),
            dual_coefficients: Vec::new(),
            platt: None,
        }
    }
}
