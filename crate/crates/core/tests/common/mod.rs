#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tokscope::bpe::{load_bpe, BpeTokenizer};
use tokscope::cli::MetricsReport;
use tokscope::predictor::MetricTable;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn gpt2() -> BpeTokenizer {
    let dir = fixtures().join("gpt2");
    load_bpe(dir.join("vocab.json"), dir.join("merges.txt")).expect("gpt2 fixture loads")
}

#[derive(Debug, Deserialize)]
pub struct ReferenceEncoding {
    pub text: String,
    pub pieces: Vec<String>,
    pub ids: Vec<u32>,
}

pub fn reference_encodings() -> Vec<ReferenceEncoding> {
    let text = std::fs::read_to_string(fixtures().join("gpt2/reference_encodings.jsonl")).unwrap();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[derive(Debug, Deserialize)]
pub struct PublishedLanguage {
    pub truth: Vec<String>,
    pub predicted: Vec<String>,
    pub tau: f64,
}

#[derive(Debug, Deserialize)]
pub struct PublishedRankings {
    pub scale: String,
    pub languages: BTreeMap<String, PublishedLanguage>,
}

pub fn published_rankings() -> PublishedRankings {
    let text = std::fs::read_to_string(fixtures().join("published_rankings.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Writes one labelled metrics report per (tokenizer, language).
pub fn write_metrics_dir(dir: &Path, table: &MetricTable) {
    std::fs::create_dir_all(dir).unwrap();
    for (k, ((tok, lang), mv)) in table.iter().enumerate() {
        let report = MetricsReport {
            metadata: None,
            tokenizer: Some(tok.clone()),
            language: Some(lang.clone()),
            metrics: *mv,
        };
        let path = dir.join(format!("{k:03}.json"));
        std::fs::write(path, serde_json::to_string_pretty(&report).unwrap()).unwrap();
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Spearman's ρ for tie-free ranks by the squared-difference formula, as
/// an exact fraction `(numerator, denominator)`.
pub fn spearman_by_definition(x: &[usize], y: &[usize]) -> (i64, i64) {
    let n = x.len() as i64;
    let d2: i64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a as i64 - b as i64).pow(2))
        .sum();
    (n * (n * n - 1) - 6 * d2, n * (n * n - 1))
}

/// Kendall's τ for tie-free data as `(concordant - discordant, pairs)`.
pub fn kendall_by_definition(x: &[usize], y: &[usize]) -> (i64, i64) {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] as i64 - x[j] as i64).signum();
            let b = (y[i] as i64 - y[j] as i64).signum();
            s += a * b;
        }
    }
    (s, (n * (n - 1) / 2) as i64)
}

/// Permutation p-values of an integer statistic, counted over every
/// reordering of `y`: (two-sided, greater, less).
pub fn enumerate_p_values(
    x: &[usize],
    y: &[usize],
    stat: impl Fn(&[usize], &[usize]) -> (i64, i64),
) -> (f64, f64, f64) {
    let observed = stat(x, y);
    let perms = permutations(y.len());
    let (mut two, mut ge, mut le) = (0usize, 0usize, 0usize);
    for p in &perms {
        let permuted: Vec<usize> = p.iter().map(|&i| y[i]).collect();
        let s = stat(x, &permuted);
        // same denominator, so numerators compare directly
        if s.0.abs() >= observed.0.abs() {
            two += 1;
        }
        if s.0 >= observed.0 {
            ge += 1;
        }
        if s.0 <= observed.0 {
            le += 1;
        }
    }
    let total = perms.len() as f64;
    (two as f64 / total, ge as f64 / total, le as f64 / total)
}
