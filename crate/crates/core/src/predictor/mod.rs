//! Pairwise tokenizer-outcome models: dataset construction, logistic and SVM
//! classifiers, and held-out evaluation.

mod dataset;
mod eval;
mod fit;
pub(crate) mod linalg;
mod model;

pub use dataset::{build_pairwise_dataset, MetricTable, PairwiseExample};
pub use eval::{
    leave_one_language_out, leave_one_tokenizer_out, predict_heldout_language, EvaluationReport,
    HeldOutFold, PredictionInputs,
};
pub use fit::{
    fit_linear_svm, fit_logistic, fit_model, fit_platt, fit_rbf_svm_platt,
    fit_with_hyperparameters, stratified_folds, C_GRID, DEFAULT_CV_FOLDS, GAMMA_GRID,
    LINEAR_SVM_ITERATIONS,
};
pub use model::{Hyperparameters, ModelKind, PairwiseModel, Platt, Scaler};
