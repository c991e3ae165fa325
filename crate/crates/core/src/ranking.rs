//! Bradley-Terry aggregation of pairwise win probabilities and Kendall
//! scoring of the resulting rankings.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::DownstreamFixture;
use crate::error::{Error, Result};
use crate::stats::{kendall, CorrelationResult};

pub const PROBABILITY_CLAMP: f64 = 1e-6;
pub const BT_MAX_SWEEPS: usize = 10_000;
pub const BT_TOLERANCE: f64 = 1e-10;
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Relative amount by which a sweep may appear to lower the log-likelihood
/// purely through rounding once the iterates have converged.
pub const LOG_LIKELIHOOD_SLACK: f64 = 1e-14;

/// Square matrix of `P(i beats j)`; missing entries mean "not compared".
///
/// Serialized as `{"names": [...], "probabilities": {"i|j": p, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct ProbabilityMatrix {
    names: Vec<String>,
    p: Vec<Vec<Option<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    names: Vec<String>,
    probabilities: BTreeMap<String, f64>,
}

impl From<ProbabilityMatrix> for MatrixFile {
    fn from(m: ProbabilityMatrix) -> Self {
        let mut probabilities = BTreeMap::new();
        for (i, a) in m.names.iter().enumerate() {
            for (j, b) in m.names.iter().enumerate() {
                if let Some(v) = m.p[i][j] {
                    probabilities.insert(format!("{a}|{b}"), v);
                }
            }
        }
        MatrixFile {
            names: m.names,
            probabilities,
        }
    }
}

impl TryFrom<MatrixFile> for ProbabilityMatrix {
    type Error = Error;

    fn try_from(f: MatrixFile) -> Result<Self> {
        let mut m = ProbabilityMatrix::new(f.names)?;
        for (key, v) in f.probabilities {
            let (a, b) = key.split_once('|').ok_or_else(|| {
                Error::InvalidMatrix(format!("key {key:?} is not of the form \"i|j\""))
            })?;
            let i = m
                .index(a)
                .ok_or_else(|| Error::InvalidMatrix(format!("unknown name {a:?}")))?;
            let j = m
                .index(b)
                .ok_or_else(|| Error::InvalidMatrix(format!("unknown name {b:?}")))?;
            if i == j {
                continue;
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidMatrix(format!(
                    "P({key}) = {v} is outside [0, 1]"
                )));
            }
            m.p[i][j] = Some(v);
        }
        Ok(m)
    }
}

impl ProbabilityMatrix {
    /// An empty matrix over unique names (none may contain `|`).
    pub fn new(names: Vec<String>) -> Result<Self> {
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::InvalidMatrix("duplicate names".into()));
        }
        if let Some(bad) = names.iter().find(|n| n.contains('|')) {
            return Err(Error::InvalidMatrix(format!("name {bad:?} contains '|'")));
        }
        let n = names.len();
        Ok(ProbabilityMatrix {
            names,
            p: vec![vec![None; n]; n],
        })
    }

    /// The exact Bradley-Terry matrix `λ_i / (λ_i + λ_j)`.
    pub fn from_ratings(names: Vec<String>, lambda: &[f64]) -> Result<Self> {
        if names.len() != lambda.len() {
            return Err(Error::LengthMismatch(names.len(), lambda.len()));
        }
        let mut m = ProbabilityMatrix::new(names)?;
        for i in 0..lambda.len() {
            for j in 0..lambda.len() {
                if i != j {
                    m.p[i][j] = Some(lambda[i] / (lambda[i] + lambda[j]));
                }
            }
        }
        Ok(m)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `P(i beats j)`; the diagonal reads as 0.5.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            Some(0.5)
        } else {
            self.p[i][j]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i != j {
            self.p[i][j] = Some(value);
        }
    }

    /// Number of unordered pairs with at least one recorded orientation.
    pub fn compared_pairs(&self) -> usize {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.p[i][j].is_some() || self.p[j][i].is_some())
            .count()
    }

    /// `P_ij ← (P_ij + 1 − P_ji) / 2`, filling a missing side from the other.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                out.p[i][j] = match (self.p[i][j], self.p[j][i]) {
                    (Some(a), Some(b)) => Some((a + 1.0 - b) / 2.0),
                    (Some(a), None) => Some(a),
                    (None, Some(b)) => Some(1.0 - b),
                    (None, None) => None,
                };
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTRatings {
    pub names: Vec<String>,
    /// Positive skills, normalized to unit geometric mean.
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub final_log_likelihood: f64,
    /// Log-likelihood after each sweep, starting from the uniform start.
    pub log_likelihood_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BTRatings {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.lambda[i])
    }

    pub fn ratio(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(a)? / self.get(b)?)
    }
}

fn bt_log_likelihood(wins: &[Vec<f64>], lambda: &[f64]) -> f64 {
    let n = lambda.len();
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && wins[i][j] > 0.0 {
                ll += wins[i][j] * (lambda[i] / (lambda[i] + lambda[j])).ln();
            }
        }
    }
    ll
}

fn connected(n: usize, adjacent: impl Fn(usize, usize) -> bool) -> bool {
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && adjacent(i, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Maximum-likelihood Bradley-Terry skills from (possibly fractional) win
/// counts `wins[i][j]`, by minorization-maximization. The number of
/// comparisons between `i` and `j` is `wins[i][j] + wins[j][i]`.
pub fn fit_bradley_terry_counts(names: Vec<String>, wins: &[Vec<f64>]) -> Result<BTRatings> {
    let n = names.len();
    if n < 2 {
        return Err(Error::InvalidMatrix("need at least two items".into()));
    }
    if wins.len() != n || wins.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMatrix(
            "win matrix is not square over the names".into(),
        ));
    }
    if wins.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidMatrix(
            "win counts must be finite and non-negative".into(),
        ));
    }
    let games: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { wins[i][j] + wins[j][i] })
                .collect()
        })
        .collect();
    if !connected(n, |i, j| games[i][j] > 0.0) {
        return Err(Error::Disconnected);
    }
    let total: Vec<f64> = wins.iter().map(|r| r.iter().sum()).collect();
    if total.iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidMatrix(
            "an item without wins has no finite rating".into(),
        ));
    }

    let mut lambda = vec![1.0; n];
    let mut trace = vec![bt_log_likelihood(wins, &lambda)];
    let mut warnings = Vec::new();
    let mut iterations = 0;
    while iterations < BT_MAX_SWEEPS {
        iterations += 1;
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i && games[i][j] > 0.0)
                    .map(|j| games[i][j] / (lambda[i] + lambda[j]))
                    .sum();
                total[i] / denom
            })
            .collect();
        let log_mean = next.iter().map(|v| v.ln()).sum::<f64>() / n as f64;
        let g = log_mean.exp();
        next.iter_mut().for_each(|v| *v /= g);

        let change = next
            .iter()
            .zip(&lambda)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        lambda = next;
        let ll = bt_log_likelihood(wins, &lambda);
        let prev = *trace.last().expect("trace starts non-empty");
        if ll < prev - LOG_LIKELIHOOD_SLACK * prev.abs() {
            warnings.push(format!(
                "log-likelihood decreased at sweep {iterations}: {prev} -> {ll}"
            ));
        }
        trace.push(ll);
        if change < BT_TOLERANCE {
            break;
        }
    }
    if iterations == BT_MAX_SWEEPS {
        warnings.push(format!(
            "stopped after {BT_MAX_SWEEPS} sweeps before reaching tolerance"
        ));
    }
    Ok(BTRatings {
        names,
        lambda,
        iterations,
        final_log_likelihood: *trace.last().expect("non-empty"),
        log_likelihood_trace: trace,
        warnings,
    })
}

/// Fits skills treating each probability as a fractional win in a single
/// comparison. Probabilities are clamped to `[1e-6, 1 - 1e-6]`.
pub fn fit_bradley_terry(matrix: &ProbabilityMatrix) -> Result<BTRatings> {
    let n = matrix.len();
    let mut clamped = 0usize;
    let mut wins = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let pij = match (matrix.p[i][j], matrix.p[j][i]) {
                (Some(a), Some(b)) => {
                    if (a + b - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidMatrix(format!(
                            "P({0}|{1}) + P({1}|{0}) = {2}, expected 1; symmetrize first",
                            matrix.names[i],
                            matrix.names[j],
                            a + b
                        )));
                    }
                    a
                }
                (Some(a), None) => a,
                (None, Some(b)) => 1.0 - b,
                (None, None) => continue,
            };
            if !(0.0..=1.0).contains(&pij) || pij.is_nan() {
                return Err(Error::InvalidMatrix(format!(
                    "probability {pij} outside [0, 1]"
                )));
            }
            let p = pij.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
            if p != pij {
                clamped += 1;
            }
            wins[i][j] = p;
            wins[j][i] = 1.0 - p;
        }
    }
    let mut ratings = fit_bradley_terry_counts(matrix.names.clone(), &wins)?;
    if clamped > 0 {
        ratings.warnings.insert(
            0,
            format!(
                "{clamped} probabilities clamped to [{PROBABILITY_CLAMP}, {}]",
                1.0 - PROBABILITY_CLAMP
            ),
        );
    }
    Ok(ratings)
}

/// Names best first with their scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub ordered: Vec<String>,
    pub scores: Vec<f64>,
    /// Whether larger scores rank higher.
    pub higher_is_better: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Ranking {
    /// A ranking given only by order; scores are descending positions.
    pub fn from_order(ordered: Vec<String>) -> Self {
        let n = ordered.len();
        Ranking {
            scores: (0..n).map(|k| (n - k) as f64).collect(),
            ordered,
            higher_is_better: true,
            warnings: Vec::new(),
        }
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.ordered.iter().position(|n| n == name)
    }

    pub fn reversed(&self) -> Self {
        Ranking::from_order(self.ordered.iter().rev().cloned().collect())
    }
}

fn sort_with_ties(mut items: Vec<(String, f64)>, higher_is_better: bool) -> Ranking {
    items.sort_by(|a, b| {
        let ord = if higher_is_better {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        ord.then_with(|| a.0.cmp(&b.0))
    });
    // runs of near-equal scores are reordered by name
    let mut warnings = Vec::new();
    let mut start = 0;
    for k in 1..=items.len() {
        if k == items.len() || (items[k].1 - items[k - 1].1).abs() > TIE_TOLERANCE {
            if k - start > 1 {
                items[start..k].sort_by(|a, b| a.0.cmp(&b.0));
                let group: Vec<&str> = items[start..k].iter().map(|(n, _)| n.as_str()).collect();
                warnings.push(format!(
                    "tie between {} broken alphabetically",
                    group.join(", ")
                ));
            }
            start = k;
        }
    }
    Ranking {
        ordered: items.iter().map(|(n, _)| n.clone()).collect(),
        scores: items.iter().map(|(_, s)| *s).collect(),
        higher_is_better,
        warnings,
    }
}

/// Descending skill; near-equal skills are ordered by name with a warning.
pub fn ranking_from_ratings(ratings: &BTRatings) -> Ranking {
    sort_with_ties(
        ratings
            .names
            .iter()
            .cloned()
            .zip(ratings.lambda.iter().copied())
            .collect(),
        true,
    )
}

/// Tokenizers ordered by ascending mean MetricX over both directions.
pub fn ground_truth_ranking(
    fixture: &DownstreamFixture,
    language: &str,
    scale: &str,
) -> Result<Ranking> {
    let items = fixture
        .tokenizers()
        .into_iter()
        .map(|t| {
            let score = fixture.mean_metricx(&t, scale, language)?;
            Ok((t, score))
        })
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::InvalidArgument("fixture has no tokenizers".into()));
    }
    Ok(sort_with_ties(items, false))
}

/// Kendall's τ between the positions two rankings assign to the same names.
pub fn evaluate_ranking(predicted: &Ranking, truth: &Ranking) -> Result<CorrelationResult> {
    let a: BTreeSet<&String> = predicted.ordered.iter().collect();
    let b: BTreeSet<&String> = truth.ordered.iter().collect();
    if a != b || a.len() != predicted.ordered.len() || b.len() != truth.ordered.len() {
        return Err(Error::NameSetMismatch);
    }
    let x: Vec<f64> = truth
        .ordered
        .iter()
        .map(|n| predicted.position(n).expect("same name set") as f64)
        .collect();
    let y: Vec<f64> = (0..truth.ordered.len()).map(|k| k as f64).collect();
    kendall(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::builtin_mt_fixture;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_items() {
        let mut m = ProbabilityMatrix::new(names(&["a", "b"])).unwrap();
        m.set(0, 1, 0.75);
        m.set(1, 0, 0.25);
        let r = fit_bradley_terry(&m).unwrap();
        assert!((r.ratio("a", "b").unwrap() - 3.0).abs() < 1e-6);
        assert_eq!(ranking_from_ratings(&r).ordered, names(&["a", "b"]));
    }

    #[test]
    fn recovers_generating_ratings() {
        let m = ProbabilityMatrix::from_ratings(names(&["x", "y", "z"]), &[4.0, 2.0, 1.0]).unwrap();
        let r = fit_bradley_terry(&m).unwrap();
        assert!((r.ratio("x", "y").unwrap() - 2.0).abs() < 1e-6);
        assert!((r.ratio("y", "z").unwrap() - 2.0).abs() < 1e-6);
        let gm: f64 = r.lambda.iter().map(|v| v.ln()).sum::<f64>();
        assert!(gm.abs() < 1e-9);
        assert!(r
            .log_likelihood_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - LOG_LIKELIHOOD_SLACK * w[0].abs()));
        assert!(r.warnings.is_empty());
        assert_eq!(ranking_from_ratings(&r).ordered, names(&["x", "y", "z"]));
    }

    #[test]
    fn equal_probabilities_tie_alphabetically() {
        let mut m = ProbabilityMatrix::new(names(&["c", "a", "b"])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, 0.5);
            }
        }
        let r = fit_bradley_terry(&m).unwrap();
        assert!(r.lambda.iter().all(|&l| (l - 1.0).abs() < 1e-12));
        let rank = ranking_from_ratings(&r);
        assert_eq!(rank.ordered, names(&["a", "b", "c"]));
        assert!(!rank.warnings.is_empty());
    }

    #[test]
    fn disconnected_graph() {
        let mut m = ProbabilityMatrix::new(names(&["a", "b", "c", "d"])).unwrap();
        m.set(0, 1, 0.6);
        m.set(2, 3, 0.6);
        assert!(matches!(fit_bradley_terry(&m), Err(Error::Disconnected)));
    }

    #[test]
    fn extreme_probabilities_are_clamped() {
        let mut m = ProbabilityMatrix::new(names(&["a", "b"])).unwrap();
        m.set(0, 1, 1.0);
        let r = fit_bradley_terry(&m).unwrap();
        assert!(r.lambda.iter().all(|l| l.is_finite() && *l > 0.0));
        assert!(r.warnings[0].contains("clamped"));
    }

    #[test]
    fn json_round_trip() {
        let m = ProbabilityMatrix::from_ratings(names(&["a", "b"]), &[3.0, 1.0]).unwrap();
        let s = m.to_json().unwrap();
        assert!(s.contains("\"a|b\": 0.75"));
        assert_eq!(ProbabilityMatrix::from_json(&s).unwrap(), m);
    }

    #[test]
    fn ground_truth_zh() {
        let f = builtin_mt_fixture();
        let r = ground_truth_ranking(&f, "zh", "2.7B").unwrap();
        assert_eq!(
            r.ordered,
            names(&[
                "Aya 23",
                "Falcon",
                "Phi-3-mini",
                "tiktoken",
                "GPT-NeoX",
                "GPT-2"
            ])
        );
        assert!((r.scores[0] - 7.215).abs() < 1e-9);
        let cs = ground_truth_ranking(&f, "cs", "2.7B").unwrap();
        assert_eq!(cs.ordered[0], "Phi-3-mini");
        assert!((cs.scores[0] - 7.135).abs() < 1e-9);
    }

    #[test]
    fn evaluate_identity_and_reverse() {
        let r = Ranking::from_order(names(&["a", "b", "c", "d"]));
        assert_eq!(evaluate_ranking(&r, &r).unwrap().coefficient, 1.0);
        assert_eq!(
            evaluate_ranking(&r.reversed(), &r).unwrap().coefficient,
            -1.0
        );
        let other = Ranking::from_order(names(&["a", "b", "c", "e"]));
        assert!(matches!(
            evaluate_ranking(&r, &other),
            Err(Error::NameSetMismatch)
        ));
    }
}
