//! Bradley-Terry skills from pairwise win probabilities, then a full
//! leave-one-language-out ranking on a synthetic world.
//!
//! cargo run --release --example bradley_terry

use tokscope::metrics::METRIC_NAMES;
use tokscope::predictor::{leave_one_language_out, ModelKind, PredictionInputs};
use tokscope::ranking::{
    evaluate_ranking, fit_bradley_terry, ground_truth_ranking, ranking_from_ratings,
    ProbabilityMatrix,
};
use tokscope::synth::{synthetic_world, SyntheticWorldConfig};

fn main() -> tokscope::Result<()> {
    let names: Vec<String> = ["strong", "middle", "weak"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let exact = ProbabilityMatrix::from_ratings(names, &[4.0, 2.0, 1.0])?;
    let ratings = fit_bradley_terry(&exact)?;
    println!(
        "exact 4:2:1 matrix -> {} sweeps, log-likelihood {:.6}",
        ratings.iterations, ratings.final_log_likelihood
    );
    for (n, l) in ratings.names.iter().zip(&ratings.lambda) {
        println!("  {n:<7} {l:.6}");
    }

    let cfg = SyntheticWorldConfig::default();
    let (metrics, fixture) = synthetic_world(&cfg)?;
    let inputs = PredictionInputs {
        metrics: &metrics,
        fixture: &fixture,
        scale: &cfg.scale,
        seed: 0,
        cv_folds: 5,
    };
    let all: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    println!("\nRBF SVM on all metrics, each language held out in turn:");
    for (lang, matrix) in leave_one_language_out(inputs, &all, ModelKind::RbfSvm)? {
        let predicted = ranking_from_ratings(&fit_bradley_terry(&matrix)?);
        let truth = ground_truth_ranking(&fixture, &lang, &cfg.scale)?;
        let tau = evaluate_ranking(&predicted, &truth)?;
        println!("  {lang}: predicted {:?}", predicted.ordered);
        println!(
            "  {:w$}  truth     {:?}  tau {:.3} (p one-sided {:.4})",
            "",
            truth.ordered,
            tau.coefficient,
            tau.p_value_greater,
            w = lang.len()
        );
    }
    Ok(())
}
