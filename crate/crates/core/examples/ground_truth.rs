//! Downstream ground-truth rankings from the bundled machine-translation
//! scores, compared against a set of predicted rankings.
//!
//! cargo run --example ground_truth [scale]

use tokscope::corpus::builtin_mt_fixture;
use tokscope::ranking::{evaluate_ranking, ground_truth_ranking, Ranking};

fn main() -> tokscope::Result<()> {
    let scale = std::env::args().nth(1).unwrap_or_else(|| "2.7B".into());
    let fixture = builtin_mt_fixture();
    let predicted = [
        (
            "cs",
            [
                "Aya 23",
                "Phi-3-mini",
                "Falcon",
                "tiktoken",
                "GPT-NeoX",
                "GPT-2",
            ],
        ),
        (
            "de",
            [
                "Phi-3-mini",
                "Aya 23",
                "tiktoken",
                "Falcon",
                "GPT-NeoX",
                "GPT-2",
            ],
        ),
        (
            "ru",
            [
                "Phi-3-mini",
                "Aya 23",
                "tiktoken",
                "Falcon",
                "GPT-NeoX",
                "GPT-2",
            ],
        ),
        (
            "zh",
            [
                "Aya 23",
                "Phi-3-mini",
                "tiktoken",
                "Falcon",
                "GPT-NeoX",
                "GPT-2",
            ],
        ),
    ];
    for (lang, order) in predicted {
        let truth = ground_truth_ranking(&fixture, lang, &scale)?;
        println!("{lang} at {scale} (mean MetricX, lower is better):");
        for (name, score) in truth.ordered.iter().zip(&truth.scores) {
            println!("  {name:<11} {score:.3}");
        }
        let pred = Ranking::from_order(order.iter().map(|s| s.to_string()).collect());
        let tau = evaluate_ranking(&pred, &truth)?;
        println!(
            "  vs {:?}: tau {:.4}, p two-sided {:.4}, one-sided {:.4}\n",
            pred.ordered, tau.coefficient, tau.p_value, tau.p_value_greater
        );
    }
    Ok(())
}
