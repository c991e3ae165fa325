//! Print the rank-frequency curve of a token stream as CSV, with the OLS
//! fit over the truncated range.
//!
//! cargo run --example export_curve [tokens.txt]

use tokscope::corpus::load_token_stream;
use tokscope::metrics::{
    count_frequencies, curve_rows, rank_frequency_curve, zipf_fit, DEFAULT_TRUNCATION_BOUND,
};
use tokscope::synth::generate_zipf_stream;

fn main() -> tokscope::Result<()> {
    let seq = match std::env::args().nth(1) {
        Some(path) => load_token_stream(path)?,
        None => generate_zipf_stream(100_000, 500, 1.1, 0)?,
    };
    let table = count_frequencies(&seq)?;
    let fit = zipf_fit(&rank_frequency_curve(&table, DEFAULT_TRUNCATION_BOUND))?;
    eprintln!(
        "ln(count) = {:.4} + {:.4} ln(rank) over ln(rank) <= {DEFAULT_TRUNCATION_BOUND}",
        fit.beta0, fit.beta1
    );

    let mut w = csv::Writer::from_writer(std::io::stdout());
    for row in curve_rows(&table) {
        w.serialize(row).expect("stdout");
    }
    w.flush().expect("stdout");
    Ok(())
}
