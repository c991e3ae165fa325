//! Intrinsic metrics of synthetic Zipfian streams across exponents.
//!
//! cargo run --release --example zipf_metrics

use tokscope::metrics::{
    count_frequencies, metric_vector, rank_frequency_curve, DEFAULT_TRUNCATION_BOUND,
};
use tokscope::synth::generate_zipf_stream;

fn main() -> tokscope::Result<()> {
    println!(
        "{:>8} {:>10} {:>6} {:>10} {:>9} {:>10} {:>7}",
        "exponent", "tokens", "types", "auc", "slope", "power_law", "points"
    );
    for exponent in [0.0, 0.5, 0.8, 1.0, 1.2, 1.5] {
        let seq = generate_zipf_stream(1_000_000, 1000, exponent, 0)?;
        let m = metric_vector(&seq)?;
        let curve = rank_frequency_curve(&count_frequencies(&seq)?, DEFAULT_TRUNCATION_BOUND);
        println!(
            "{exponent:>8.1} {:>10} {:>6} {:>10.4} {:>9.4} {:>10.2e} {:>7}",
            m.compression,
            m.cardinality,
            m.auc,
            m.slope,
            m.power_law,
            curve.len()
        );
    }
    Ok(())
}
