//! Spearman and Kendall correlations with exact and asymptotic p-values.
//!
//! cargo run --example rank_correlation

use tokscope::stats::{kendall, spearman, CorrelationResult};

fn show(label: &str, r: &CorrelationResult) {
    println!(
        "{label:<28} {:?} {:+.4}  p two-sided {:.4}  greater {:.4}  less {:.4}  ({:?}, n = {})",
        r.kind, r.coefficient, r.p_value, r.p_value_greater, r.p_value_less, r.method, r.n
    );
}

fn main() -> tokscope::Result<()> {
    let truth = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let one_swap = [1.0, 2.0, 4.0, 3.0, 5.0, 6.0];
    let two_swaps = [2.0, 1.0, 3.0, 4.0, 6.0, 5.0];
    show("one adjacent swap", &kendall(&truth, &one_swap)?);
    show("two adjacent swaps", &kendall(&truth, &two_swaps)?);
    show("two adjacent swaps", &spearman(&truth, &two_swaps)?);

    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 1.0, 4.0, 3.0];
    show("small example", &spearman(&x, &y)?);

    let ties_x = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0];
    let ties_y = [1.0, 3.0, 2.0, 2.0, 5.0, 4.0];
    show("with ties (tau-b)", &kendall(&ties_x, &ties_y)?);

    let n = 30;
    let a: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..n)
        .map(|i| ((i * 7) % n) as f64 + 0.1 * i as f64)
        .collect();
    show("n = 30 (asymptotic)", &spearman(&a, &b)?);
    show("n = 30 (asymptotic)", &kendall(&a, &b)?);
    Ok(())
}
