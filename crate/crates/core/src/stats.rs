//! Statistical kernel: least squares, Simpson quadrature, rank correlations
//! with significance tests, and the F1 score.
//!
//! Everything here is double precision and deterministic. Correlation
//! p-values are exact (full permutation enumeration) for `n <= 8` and
//! asymptotic above that.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest sample size for which p-values are computed by enumerating all
/// `n!` permutations.
pub const EXACT_PERMUTATION_MAX_N: usize = 8;

/// Slack used when comparing permuted statistics against the observed one.
const STAT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Spearman,
    Kendall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub kind: CorrelationKind,
    pub coefficient: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// One-sided p-value for a positive association.
    pub p_value_greater: f64,
    /// One-sided p-value for a negative association.
    pub p_value_less: f64,
    pub n: usize,
    pub method: PValueMethod,
}

/// Average ranks (1-based), ties receive the mean of the positions they span.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    Ok(())
}

/// Spearman's rank correlation with a two-sided test.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let rho = pearson(&rx, &ry)
        .ok_or_else(|| Error::UndefinedCorrelation("zero variance in a ranking".into()))?;
    let n = x.len();

    let (p_value, p_value_greater, p_value_less, method) = if n <= EXACT_PERMUTATION_MAX_N {
        let (two, greater, less) =
            permutation_p_values(&ry, rho, |perm| pearson(&rx, perm).unwrap_or(0.0));
        (two, greater, less, PValueMethod::Exact)
    } else {
        let (two, greater, less) = spearman_t_test(rho, n);
        (two, greater, less, PValueMethod::Asymptotic)
    };

    Ok(CorrelationResult {
        kind: CorrelationKind::Spearman,
        coefficient: rho,
        p_value,
        p_value_greater,
        p_value_less,
        n,
        method,
    })
}

fn spearman_t_test(rho: f64, n: usize) -> (f64, f64, f64) {
    let df = (n - 2) as f64;
    if (1.0 - rho * rho) <= 0.0 {
        return if rho > 0.0 {
            (0.0, 0.0, 1.0)
        } else {
            (0.0, 1.0, 0.0)
        };
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let upper = 1.0 - dist.cdf(t);
    let lower = dist.cdf(t);
    ((2.0 * upper.min(lower)).min(1.0), upper, lower)
}

/// Concordant minus discordant pair count and the τ-b denominator.
fn kendall_parts(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mut s = 0i64;
    let mut ties_x = 0u64;
    let mut ties_y = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            if dx == 0 {
                ties_x += 1;
            }
            if dy == 0 {
                ties_y += 1;
            }
            s += dx * dy;
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - ties_x as f64) * (n0 - ties_y as f64)).sqrt();
    (s as f64, denom)
}

fn kendall_coefficient(x: &[f64], y: &[f64]) -> Option<f64> {
    let (s, denom) = kendall_parts(x, y);
    (denom > 0.0).then(|| (s / denom).clamp(-1.0, 1.0))
}

/// Kendall's τ-b with a two-sided test.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let tau = kendall_coefficient(x, y)
        .ok_or_else(|| Error::UndefinedCorrelation("zero variance in a ranking".into()))?;
    let n = x.len();

    let (p_value, p_value_greater, p_value_less, method) = if n <= EXACT_PERMUTATION_MAX_N {
        let (two, greater, less) =
            permutation_p_values(y, tau, |perm| kendall_coefficient(x, perm).unwrap_or(0.0));
        (two, greater, less, PValueMethod::Exact)
    } else {
        let (two, greater, less) = kendall_normal_test(x, y);
        (two, greater, less, PValueMethod::Asymptotic)
    };

    Ok(CorrelationResult {
        kind: CorrelationKind::Kendall,
        coefficient: tau,
        p_value,
        p_value_greater,
        p_value_less,
        n,
        method,
    })
}

fn tie_group_sizes(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut run = 1usize;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            if run > 1 {
                groups.push(run as f64);
            }
            run = 1;
        }
    }
    if run > 1 {
        groups.push(run as f64);
    }
    groups
}

/// Normal approximation for τ-b using the tie-corrected variance of S.
fn kendall_normal_test(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (s, _) = kendall_parts(x, y);
    let tx = tie_group_sizes(x);
    let ty = tie_group_sizes(y);

    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt: f64 = tx.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let vu: f64 = ty.iter().map(|u| u * (u - 1.0) * (2.0 * u + 5.0)).sum();
    let t1: f64 = tx.iter().map(|t| t * (t - 1.0)).sum();
    let u1: f64 = ty.iter().map(|u| u * (u - 1.0)).sum();
    let t2: f64 = tx.iter().map(|t| t * (t - 1.0) * (t - 2.0)).sum();
    let u2: f64 = ty.iter().map(|u| u * (u - 1.0) * (u - 2.0)).sum();
    let var = (v0 - vt - vu) / 18.0
        + (t1 * u1) / (2.0 * n * (n - 1.0))
        + (t2 * u2) / (9.0 * n * (n - 1.0) * (n - 2.0));

    let z = s / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let upper = 1.0 - normal.cdf(z);
    let lower = normal.cdf(z);
    ((2.0 * upper.min(lower)).min(1.0), upper, lower)
}

/// Enumerates every ordering of `values` (Heap's algorithm) and returns the
/// two-sided, greater and less tail fractions of `stat` against `observed`.
fn permutation_p_values<F>(values: &[f64], observed: f64, stat: F) -> (f64, f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut perm = values.to_vec();
    let n = perm.len();
    let mut counters = vec![0usize; n];
    let (mut total, mut two, mut greater, mut less) = (0u64, 0u64, 0u64, 0u64);

    let mut tally = |p: &[f64]| {
        let s = stat(p);
        total += 1;
        if s.abs() >= observed.abs() - STAT_EPS {
            two += 1;
        }
        if s >= observed - STAT_EPS {
            greater += 1;
        }
        if s <= observed + STAT_EPS {
            less += 1;
        }
    };

    tally(&perm);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            tally(&perm);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }

    let total = total as f64;
    (
        two as f64 / total,
        greater as f64 / total,
        less as f64 / total,
    )
}

/// Composite Simpson's rule over `y` sampled on a uniform grid of spacing `h`.
pub fn simpson_integrate(y: &[f64], h: f64) -> Result<f64> {
    if y.len() < 3 || y.len().is_multiple_of(2) {
        return Err(Error::Quadrature(format!(
            "need an odd number of points >= 3, got {}",
            y.len()
        )));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Quadrature(format!(
            "spacing must be positive, got {h}"
        )));
    }
    let last = y.len() - 1;
    let mut sum = y[0] + y[last];
    for (i, v) in y.iter().enumerate().take(last).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(sum * h / 3.0)
}

/// Ordinary least squares of `y` on `x`; returns `(intercept, slope)`.
pub fn ols_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "{} point(s); need at least 2",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// F1 of the positive class. Returns 0 when precision + recall is 0,
/// including the case with no positives at all.
pub fn f1_score(predicted: &[bool], actual: &[bool]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(
            spearman(&[1., 2., 3.], &[10., 20., 30.])
                .unwrap()
                .coefficient,
            1.0
        );
        assert_eq!(
            spearman(&[1., 2., 3.], &[3., 2., 1.]).unwrap().coefficient,
            -1.0
        );
        let r = spearman(&[1., 2., 3., 4.], &[2., 1., 4., 3.]).unwrap();
        assert!((r.coefficient - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman(&[1., 2.], &[1., 2.]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            spearman(&[1., 2., 3.], &[1., 2.]),
            Err(Error::LengthMismatch(3, 2))
        ));
        assert!(matches!(
            spearman(&[1., 1., 1.], &[1., 2., 3.]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn kendall_swaps() {
        let truth = [1., 2., 3., 4., 5., 6.];
        let one = kendall(&truth, &[2., 1., 3., 4., 5., 6.]).unwrap();
        assert!((one.coefficient - (1.0 - 2.0 / 15.0)).abs() < 1e-12);
        let two = kendall(&truth, &[2., 1., 3., 4., 6., 5.]).unwrap();
        assert!((two.coefficient - 0.7333333333333333).abs() < 1e-12);
        assert_eq!(kendall(&truth, &truth).unwrap().coefficient, 1.0);
    }

    #[test]
    fn kendall_exact_p_values_n6() {
        // Inversion counts for n = 6: 1 perm with 0, 5 with 1, 14 with 2.
        let truth = [1., 2., 3., 4., 5., 6.];
        let one = kendall(&truth, &[2., 1., 3., 4., 5., 6.]).unwrap();
        assert!((one.p_value_greater - 6.0 / 720.0).abs() < 1e-15);
        assert!((one.p_value - 12.0 / 720.0).abs() < 1e-15);
        let two = kendall(&truth, &[2., 1., 3., 4., 6., 5.]).unwrap();
        assert!((two.p_value_greater - 20.0 / 720.0).abs() < 1e-15);
        assert!((two.p_value - 40.0 / 720.0).abs() < 1e-15);
        assert_eq!(two.method, PValueMethod::Exact);
    }

    #[test]
    fn kendall_tau_b_with_ties() {
        // x has one tied pair; C - D = 5 over sqrt(5 * 6)
        let r = kendall(&[1., 1., 2., 3.], &[1., 2., 3., 4.]).unwrap();
        assert!((r.coefficient - 5.0 / 30f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_paths() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let k = kendall(&x, &y).unwrap();
        assert_eq!(k.method, PValueMethod::Asymptotic);
        assert!(k.p_value < 1e-6);
        let s = spearman(&x, &y).unwrap();
        assert_eq!(s.coefficient, 1.0);
        assert_eq!(s.p_value, 0.0);
        let noisy: Vec<f64> = (0..20).map(|i| ((i * 7) % 20) as f64).collect();
        let s = spearman(&x, &noisy).unwrap();
        assert!(s.p_value > 0.0 && s.p_value <= 1.0);
    }

    #[test]
    fn simpson_examples() {
        assert!((simpson_integrate(&[0., 1., 0.], 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((simpson_integrate(&[0., 1., 4.], 1.0).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(simpson_integrate(&[2.5; 5], 1.0).unwrap(), 10.0);
        assert!(simpson_integrate(&[0., 1.], 1.0).is_err());
        assert!(simpson_integrate(&[0., 1., 2., 3.], 1.0).is_err());
        assert!(simpson_integrate(&[0., 1., 2.], 0.0).is_err());
        assert!(simpson_integrate(&[0., 1., 2.], -1.0).is_err());
    }

    #[test]
    fn ols_examples() {
        assert_eq!(ols_fit(&[(0., 1.), (1., 3.)]).unwrap(), (1.0, 2.0));
        let (b0, b1) = ols_fit(&[(0., 0.), (1., 1.), (2., 0.)]).unwrap();
        assert!((b0 - 1.0 / 3.0).abs() < 1e-15 && b1.abs() < 1e-15);
        assert!(ols_fit(&[(1., 0.), (1., 1.)]).is_err());
        assert!(ols_fit(&[(1., 0.)]).is_err());
    }

    #[test]
    fn f1_examples() {
        let labels = [true, false, true, false];
        assert_eq!(f1_score(&labels, &labels).unwrap(), 1.0);
        let wrong: Vec<bool> = labels.iter().map(|l| !l).collect();
        assert_eq!(f1_score(&wrong, &labels).unwrap(), 0.0);
        // TP=2, FP=1, FN=1
        let pred = [true, true, true, false, false];
        let act = [true, true, false, true, false];
        assert!((f1_score(&pred, &act).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(f1_score(&[true], &[true, false]).is_err());
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(mid_ranks(&[10., 20., 20., 5.]), vec![2.0, 3.5, 3.5, 1.0]);
    }
}
