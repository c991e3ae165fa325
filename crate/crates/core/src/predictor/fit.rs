//! Deterministic solvers for the pairwise models and the cross-validated
//! hyperparameter search around them.

use super::linalg::{dot, norm, sigmoid, softplus, solve, sq_dist};
use super::model::{Hyperparameters, ModelKind, PairwiseModel, Platt, Scaler};
use super::PairwiseExample;
use crate::error::{Error, Result};
use crate::stats::f1_score;

/// Inverse regularization strengths searched by cross-validation, strongest
/// regularization first.
pub const C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// RBF kernel widths searched by cross-validation, smoothest first.
pub const GAMMA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

pub const DEFAULT_CV_FOLDS: usize = 5;

const MAX_ITER: usize = 10_000;
const GRAD_TOL: f64 = 1e-8;
const SMO_TOL: f64 = 1e-6;
const SMO_MAX_ITER: usize = 200_000;

/// Fold index per example: each class is dealt round-robin in index order,
/// negatives continuing where positives stopped so fold sizes stay even.
pub fn stratified_folds(labels: &[bool], k: usize) -> Vec<usize> {
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        for (i, &l) in labels.iter().enumerate() {
            if l == class {
                folds[i] = next % k;
                next += 1;
            }
        }
    }
    folds
}

// ---------------------------------------------------------------------------
// Logistic regression

/// Minimizes `mean(log-loss) + ||w||² / (2C)` (intercept unpenalized) by
/// damped Newton steps. Returns `(beta0, w)`.
pub(crate) fn train_logistic(xs: &[Vec<f64>], ys: &[bool], c: f64) -> Result<(f64, Vec<f64>)> {
    let dim = xs.first().map_or(0, Vec::len);
    let n = xs.len() as f64;
    let lambda = 1.0 / c;
    let p = dim + 1;
    let mut theta = vec![0.0; p];

    let objective = |theta: &[f64]| -> f64 {
        let loss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let z = theta[0] + dot(&theta[1..], x);
                softplus(z) - if y { z } else { 0.0 }
            })
            .sum::<f64>()
            / n;
        loss + 0.5 * lambda * dot(&theta[1..], &theta[1..])
    };

    for _ in 0..MAX_ITER {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (x, &y) in xs.iter().zip(ys) {
            let z = theta[0] + dot(&theta[1..], x);
            let s = sigmoid(z);
            let r = s - if y { 1.0 } else { 0.0 };
            let w = s * (1.0 - s);
            let row: Vec<f64> = std::iter::once(1.0).chain(x.iter().copied()).collect();
            for a in 0..p {
                grad[a] += r * row[a] / n;
                for b in 0..p {
                    hess[a][b] += w * row[a] * row[b] / n;
                }
            }
        }
        for a in 1..p {
            grad[a] += lambda * theta[a];
            hess[a][a] += lambda;
        }
        if norm(&grad) < GRAD_TOL {
            return Ok((theta[0], theta[1..].to_vec()));
        }
        // keep the intercept direction solvable when every probability saturates
        hess[0][0] += 1e-12;
        let step = solve(hess, grad.iter().map(|g| -g).collect())
            .unwrap_or_else(|| grad.iter().map(|g| -g).collect());

        let f0 = objective(&theta);
        let slope = dot(&grad, &step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            if objective(&cand) <= f0 + 1e-4 * t * slope {
                theta = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no further decrease is representable; accept if we are at the floor
            if norm(&grad) < 1e-6 {
                return Ok((theta[0], theta[1..].to_vec()));
            }
            return Err(Error::NoConvergence(MAX_ITER));
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}

// ---------------------------------------------------------------------------
// Linear SVM

/// Full-batch subgradient descent on `mean(hinge) + ||θ||² / (2C)` with the
/// bias folded into θ. Step size `1/(λt)`, projection onto the ball of
/// radius `1/sqrt(λ)`, and the best iterate seen is returned.
pub(crate) fn train_linear_svm(
    xs: &[Vec<f64>],
    ys: &[bool],
    c: f64,
    iterations: usize,
) -> (f64, Vec<f64>) {
    let dim = xs.first().map_or(0, Vec::len);
    let n = xs.len() as f64;
    let lambda = 1.0 / c;
    let p = dim + 1;
    let radius = 1.0 / lambda.sqrt();

    let objective = |theta: &[f64]| -> f64 {
        let hinge: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let s = if y { 1.0 } else { -1.0 };
                (1.0 - s * (theta[0] + dot(&theta[1..], x))).max(0.0)
            })
            .sum::<f64>()
            / n;
        hinge + 0.5 * lambda * dot(theta, theta)
    };

    let mut theta = vec![0.0; p];
    let mut best = theta.clone();
    let mut best_obj = objective(&theta);
    for t in 1..=iterations {
        let mut sub = theta.iter().map(|v| lambda * v).collect::<Vec<_>>();
        for (x, &y) in xs.iter().zip(ys) {
            let s = if y { 1.0 } else { -1.0 };
            if s * (theta[0] + dot(&theta[1..], x)) < 1.0 {
                sub[0] -= s / n;
                for k in 0..dim {
                    sub[k + 1] -= s * x[k] / n;
                }
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for (v, g) in theta.iter_mut().zip(&sub) {
            *v -= eta * g;
        }
        let len = norm(&theta);
        if len > radius {
            theta.iter_mut().for_each(|v| *v *= radius / len);
        }
        let obj = objective(&theta);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&theta);
        }
    }
    (best[0], best[1..].to_vec())
}

/// Iteration count for the linear SVM subgradient schedule.
pub const LINEAR_SVM_ITERATIONS: usize = 2_000;

// ---------------------------------------------------------------------------
// RBF SVM (SMO)

pub(crate) struct SmoSolution {
    /// `alpha_i * y_i`
    pub coef: Vec<f64>,
    pub bias: f64,
}

/// Solves the C-SVM dual with an RBF kernel by SMO using the maximal
/// violating pair; ties go to the lowest index.
pub(crate) fn train_rbf_svm(xs: &[Vec<f64>], ys: &[bool], c: f64, gamma: f64) -> SmoSolution {
    let n = xs.len();
    let y: Vec<f64> = ys.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let k: Vec<Vec<f64>> = xs
        .iter()
        .map(|a| xs.iter().map(|b| (-gamma * sq_dist(a, b)).exp()).collect())
        .collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    for _ in 0..SMO_MAX_ITER {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < SMO_TOL {
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };

    SmoSolution {
        coef: alpha.iter().zip(&y).map(|(a, s)| a * s).collect(),
        bias: -rho,
    }
}

// ---------------------------------------------------------------------------
// Platt scaling

/// Fits `P = σ(a·d + b)` to decision values by regularized maximum
/// likelihood with the smoothed targets `(N₊+1)/(N₊+2)` and `1/(N₋+2)`.
pub fn fit_platt(decisions: &[f64], labels: &[bool]) -> Result<Platt> {
    if decisions.len() != labels.len() {
        return Err(Error::LengthMismatch(decisions.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&targets)
            .map(|(&d, &t)| {
                let z = a * d + b;
                softplus(z) - t * z
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((n_pos + 1.0) / (n_neg + 1.0)).ln();
    for _ in 0..100 {
        let (mut g1, mut g2, mut h11, mut h22, mut h21) = (0.0, 0.0, 1e-12, 1e-12, 0.0);
        for (&d, &t) in decisions.iter().zip(&targets) {
            let p = sigmoid(a * d + b);
            let w = p * (1.0 - p);
            g1 += (p - t) * d;
            g2 += p - t;
            h11 += w * d * d;
            h22 += w;
            h21 += w * d;
        }
        if g1.abs() < 1e-10 && g2.abs() < 1e-10 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let f0 = objective(a, b);
        let slope = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            if objective(na, nb) < f0 + 1e-4 * step * slope {
                a = na;
                b = nb;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    Ok(Platt { a, b })
}

// ---------------------------------------------------------------------------
// Model assembly and cross-validation

fn fit_fixed(
    kind: ModelKind,
    xs: &[Vec<f64>],
    ys: &[bool],
    hyper: Hyperparameters,
) -> Result<PairwiseModel> {
    let dim = xs.first().map_or(0, Vec::len);
    let scaler = Scaler::fit(xs);
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| scaler.apply(x)).collect();
    let mut model = PairwiseModel {
        kind,
        feature_names: (0..dim).map(|i| format!("x{i}")).collect(),
        scaler,
        hyperparameters: hyper,
        beta0: 0.0,
        weights: Vec::new(),
        support_vectors: Vec::new(),
        dual_coefficients: Vec::new(),
        platt: None,
    };
    match kind {
        ModelKind::Logistic => {
            let (b, w) = train_logistic(&zs, ys, hyper.c)?;
            model.beta0 = b;
            model.weights = w;
        }
        ModelKind::LinearSvm => {
            let (b, w) = train_linear_svm(&zs, ys, hyper.c, LINEAR_SVM_ITERATIONS);
            model.beta0 = b;
            model.weights = w;
        }
        ModelKind::RbfSvm => {
            let gamma = hyper.gamma.unwrap_or(1.0);
            let sol = train_rbf_svm(&zs, ys, hyper.c, gamma);
            model.beta0 = sol.bias;
            for (z, c) in zs.into_iter().zip(sol.coef) {
                if c != 0.0 {
                    model.support_vectors.push(z);
                    model.dual_coefficients.push(c);
                }
            }
        }
    }
    Ok(model)
}

fn split(examples: &[PairwiseExample]) -> (Vec<Vec<f64>>, Vec<bool>) {
    (
        examples.iter().map(|e| e.features.clone()).collect(),
        examples.iter().map(|e| e.label).collect(),
    )
}

fn subset<T: Clone>(items: &[T], folds: &[usize], fold: usize, keep_fold: bool) -> Vec<T> {
    items
        .iter()
        .zip(folds)
        .filter(|(_, &f)| (f == fold) == keep_fold)
        .map(|(v, _)| v.clone())
        .collect()
}

/// Out-of-fold decision values for a fixed configuration.
fn out_of_fold_decisions(
    kind: ModelKind,
    xs: &[Vec<f64>],
    ys: &[bool],
    hyper: Hyperparameters,
    k: usize,
) -> Result<Vec<f64>> {
    let folds = stratified_folds(ys, k);
    let mut out = vec![0.0; xs.len()];
    for fold in 0..k {
        let train_x = subset(xs, &folds, fold, false);
        let train_y = subset(ys, &folds, fold, false);
        if train_x.is_empty() {
            continue;
        }
        let m = fit_fixed(kind, &train_x, &train_y, hyper)?;
        for (i, x) in xs.iter().enumerate() {
            if folds[i] == fold {
                out[i] = m.decision(x)?;
            }
        }
    }
    Ok(out)
}

fn cv_score(
    kind: ModelKind,
    xs: &[Vec<f64>],
    ys: &[bool],
    hyper: Hyperparameters,
    k: usize,
) -> Result<f64> {
    let folds = stratified_folds(ys, k);
    let decisions = out_of_fold_decisions(kind, xs, ys, hyper, k)?;
    let mut total = 0.0;
    for fold in 0..k {
        let pred: Vec<bool> = subset(&decisions, &folds, fold, true)
            .iter()
            .map(|&d| d > 0.0)
            .collect();
        let act = subset(ys, &folds, fold, true);
        total += f1_score(&pred, &act)?;
    }
    Ok(total / k as f64)
}

fn candidate_grid(kind: ModelKind) -> Vec<Hyperparameters> {
    match kind {
        ModelKind::RbfSvm => C_GRID
            .iter()
            .flat_map(|&c| {
                GAMMA_GRID
                    .iter()
                    .map(move |&g| Hyperparameters { c, gamma: Some(g) })
            })
            .collect(),
        _ => C_GRID
            .iter()
            .map(|&c| Hyperparameters { c, gamma: None })
            .collect(),
    }
}

/// Cross-validated fit. Candidates are visited from strongest to weakest
/// regularization and only a strictly better mean F1 replaces the incumbent.
pub fn fit_model(
    kind: ModelKind,
    examples: &[PairwiseExample],
    cv_folds: usize,
) -> Result<PairwiseModel> {
    if examples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: examples.len(),
        });
    }
    let dim = examples[0].features.len();
    if let Some(bad) = examples.iter().find(|e| e.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.features.len(),
        });
    }
    if examples
        .iter()
        .flat_map(|e| &e.features)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    let (xs, ys) = split(examples);
    let both_classes = ys.iter().any(|&l| l) && ys.iter().any(|&l| !l);
    if kind != ModelKind::Logistic && !both_classes {
        return Err(Error::SingleClass);
    }
    if kind == ModelKind::RbfSvm && examples.len() < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            got: examples.len(),
        });
    }
    let k = cv_folds.clamp(2, xs.len());

    let mut best: Option<(f64, Hyperparameters)> = None;
    for hyper in candidate_grid(kind) {
        let score = cv_score(kind, &xs, &ys, hyper, k)?;
        if best.is_none_or(|(s, _)| score > s + 1e-12) {
            best = Some((score, hyper));
        }
    }
    let (_, hyper) = best.expect("grid is non-empty");

    let mut model = fit_fixed(kind, &xs, &ys, hyper)?;
    if kind != ModelKind::Logistic {
        let decisions = out_of_fold_decisions(kind, &xs, &ys, hyper, k)?;
        model.platt = Some(fit_platt(&decisions, &ys)?);
    }
    Ok(model)
}

pub fn fit_logistic(examples: &[PairwiseExample], cv_folds: usize) -> Result<PairwiseModel> {
    fit_model(ModelKind::Logistic, examples, cv_folds)
}

pub fn fit_linear_svm(examples: &[PairwiseExample], cv_folds: usize) -> Result<PairwiseModel> {
    fit_model(ModelKind::LinearSvm, examples, cv_folds)
}

pub fn fit_rbf_svm_platt(examples: &[PairwiseExample], cv_folds: usize) -> Result<PairwiseModel> {
    fit_model(ModelKind::RbfSvm, examples, cv_folds)
}

/// Fits a model with fixed hyperparameters and no search or calibration.
pub fn fit_with_hyperparameters(
    kind: ModelKind,
    examples: &[PairwiseExample],
    hyper: Hyperparameters,
) -> Result<PairwiseModel> {
    let (xs, ys) = split(examples);
    fit_fixed(kind, &xs, &ys, hyper)
}
