//! Encode and decode text with a GPT-2 format vocabulary and merge list.
//!
//! cargo run --example bpe_roundtrip [vocab.json merges.txt] [text...]

use std::path::PathBuf;

use tokscope::bpe::{load_bpe, pretokenize};

fn main() -> tokscope::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/gpt2");
    let (vocab, merges) = if args.len() >= 2 && args[0].ends_with(".json") {
        let v = PathBuf::from(args.remove(0));
        (v, PathBuf::from(args.remove(0)))
    } else {
        (fixture.join("vocab.json"), fixture.join("merges.txt"))
    };
    let tok = load_bpe(&vocab, &merges)?;
    println!(
        "{}: {} entries, {} merges",
        tok.name(),
        tok.vocab().size(),
        tok.merges().len()
    );

    let texts = if args.is_empty() {
        vec![
            "hello world".to_string(),
            "Tokenizers don't all agree.".to_string(),
            "Příliš žluťoučký kůň 中文 🚀".to_string(),
        ]
    } else {
        vec![args.join(" ")]
    };
    for text in texts {
        let ids = tok.encode_ids(&text)?;
        let pieces = pretokenize(&text, tok.pattern())?;
        let back = tok.decode(&ids)?;
        println!("\n{text:?}");
        println!("  pieces {pieces:?}");
        println!("  ids    {ids:?}");
        println!(
            "  round trip {}",
            if back == text { "ok" } else { "MISMATCH" }
        );
    }
    Ok(())
}
