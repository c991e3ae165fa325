//! Leave-one-tokenizer-out F1 for each model kind on a synthetic world in
//! which one metric decides every comparison.
//!
//! cargo run --release --example pairwise_predictor [metric]

use tokscope::metrics::METRIC_NAMES;
use tokscope::predictor::{leave_one_tokenizer_out, ModelKind, PredictionInputs, DEFAULT_CV_FOLDS};
use tokscope::synth::{synthetic_world, SyntheticWorldConfig};

fn main() -> tokscope::Result<()> {
    let metric = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "power_law".into());
    let cfg = SyntheticWorldConfig {
        determining_metric: metric.clone(),
        ..Default::default()
    };
    let (metrics, fixture) = synthetic_world(&cfg)?;
    let inputs = PredictionInputs {
        metrics: &metrics,
        fixture: &fixture,
        scale: &cfg.scale,
        seed: 0,
        cv_folds: DEFAULT_CV_FOLDS,
    };

    let single = vec![metric.clone()];
    let all: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    for features in [&single, &all] {
        println!("features: {}", features.join(", "));
        for kind in [ModelKind::Logistic, ModelKind::LinearSvm, ModelKind::RbfSvm] {
            let start = std::time::Instant::now();
            let report = leave_one_tokenizer_out(inputs, features, kind)?;
            let per: Vec<String> = report
                .per_heldout
                .iter()
                .map(|(t, f1)| format!("{t}={f1:.2}"))
                .collect();
            println!(
                "  {kind:<10} mean F1 {:.3}  [{}]  ({:.2?})",
                report.mean_f1,
                per.join(" "),
                start.elapsed()
            );
        }
    }
    Ok(())
}
