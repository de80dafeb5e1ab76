//! Long-only, fully-invested mean-variance optimization by projected
//! gradient descent over the probability simplex, with an exact
//! restricted-support solve used to polish the final iterate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{ensure_psd, portfolio_variance, MomentEstimates, PortfolioWeights};

/// Objective for [`mvo_optimize`]. `MaxSharpe` maximizes
/// (mu' w - risk_free) / sqrt(w' Sigma w).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MvoObjective {
    MinVariance,
    MaxSharpe { risk_free: f64 },
}

const KKT_TOL: f64 = 1e-9;
const MAX_ITER: usize = 100_000;
const SUPPORT_EPS: f64 = 1e-10;

/// Optimizes the chosen objective subject to w >= 0, sum w = 1.
///
/// Min-variance is convex, so a single run from equal weights (which also
/// serves as the deterministic tie-break for fully symmetric instances)
/// converges globally. The Sharpe ratio is only quasiconcave where the
/// excess return is positive; when no asset beats the risk-free rate the
/// surface splinters into several local maxima, so max-Sharpe restarts the
/// ascent from deterministic tilted points and keeps the best KKT point.
/// A stall on every start returns an error carrying the best iterate.
pub fn mvo_optimize(
    moments: &MomentEstimates,
    objective: MvoObjective,
) -> Result<PortfolioWeights> {
    let n = moments.n_assets();
    if n < 2 {
        return Err(Error::TooFew { what: "assets", needed: 2, got: n });
    }
    let (cov, _) = ensure_psd(moments.cov());
    let mu = moments.mean();

    let equal = DVector::from_element(n, 1.0 / n as f64);
    let tilt = |i: usize| {
        0.9 * DVector::from_fn(n, |j, _| f64::from(u8::from(j == i))) + 0.1 * &equal
    };
    let starts: Vec<DVector<f64>> = match objective {
        MvoObjective::MinVariance => vec![equal],
        MvoObjective::MaxSharpe { risk_free } => {
            let best_mu = mu.imax();
            let mut starts = vec![equal.clone(), tilt(best_mu)];
            if mu[best_mu] <= risk_free {
                // Negative excess everywhere: every vertex can anchor its
                // own local maximum, so cover them all.
                starts.extend((0..n).filter(|&i| i != best_mu).map(tilt));
            }
            starts
        }
    };

    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut stalled: Option<(DVector<f64>, f64)> = None;
    for start in starts {
        let (w, residual) = solve_from(&cov, mu, start, objective);
        if residual < KKT_TOL {
            let value = candidate_value(&cov, mu, &w, objective);
            if best.as_ref().is_none_or(|(_, bv)| value > *bv) {
                best = Some((w, value));
            }
        } else if stalled.as_ref().is_none_or(|(_, br)| residual < *br) {
            stalled = Some((w, residual));
        }
    }
    if let Some((w, _)) = best {
        return finish(moments, w);
    }
    let (w, residual) = stalled.expect("at least one start ran");
    let best_weights = to_weights(moments, &w)?;
    Err(Error::NoConvergence {
        residual,
        iterations: MAX_ITER,
        best: Box::new(best_weights),
    })
}

/// Maximization value used to compare converged KKT points across starts.
fn candidate_value(
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    w: &DVector<f64>,
    objective: MvoObjective,
) -> f64 {
    match objective {
        MvoObjective::MinVariance => -portfolio_variance(cov, w),
        MvoObjective::MaxSharpe { risk_free } => sharpe_value(cov, mu, w, risk_free),
    }
}

/// Projected-gradient run from one start: returns the lowest-residual
/// iterate seen and its KKT residual. Every 128 iterations an exact solve
/// on the current support tries to finish the job early.
fn solve_from(
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    start: DVector<f64>,
    objective: MvoObjective,
) -> (DVector<f64>, f64) {
    let lipschitz = 2.0
        * cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(0.0f64, f64::max);
    let base_step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut w = start;
    let mut best = w.clone();
    let mut best_residual = f64::INFINITY;
    for iter in 0..MAX_ITER {
        let grad = min_gradient(cov, mu, &w, objective);
        let residual = kkt_residual(&w, &grad);
        if residual < best_residual {
            best_residual = residual;
            best = w.clone();
        }
        if residual < KKT_TOL {
            return (w, residual);
        }

        if iter % 128 == 0 {
            if let Some(candidate) = polish(cov, mu, &w, objective) {
                let cand_grad = min_gradient(cov, mu, &candidate, objective);
                let cand_residual = kkt_residual(&candidate, &cand_grad);
                if cand_residual < KKT_TOL {
                    return (candidate, cand_residual);
                }
            }
        }

        match objective {
            MvoObjective::MinVariance => {
                w = project_simplex(&(&w - base_step * &grad));
            }
            // The Sharpe surface has no global Lipschitz constant; an
            // Armijo backtrack from a unit step keeps ascent monotone. No
            // improving step at any scale means the iterate is as good as
            // floats allow, so stop and let the residual check decide.
            MvoObjective::MaxSharpe { risk_free } => {
                let current = sharpe_value(cov, mu, &w, risk_free);
                let mut eta = 1.0;
                let mut stepped = false;
                for _ in 0..60 {
                    let trial = project_simplex(&(&w - eta * &grad));
                    if sharpe_value(cov, mu, &trial, risk_free) > current {
                        w = trial;
                        stepped = true;
                        break;
                    }
                    eta *= 0.5;
                }
                if !stepped {
                    break;
                }
            }
        }
    }

    let grad = min_gradient(cov, mu, &w, objective);
    let residual = kkt_residual(&w, &grad);
    if residual < best_residual {
        best_residual = residual;
        best = w;
    }
    if let Some(candidate) = polish(cov, mu, &best, objective) {
        let g = min_gradient(cov, mu, &candidate, objective);
        let cand_residual = kkt_residual(&candidate, &g);
        if cand_residual < best_residual {
            return (candidate, cand_residual);
        }
    }
    (best, best_residual)
}

fn finish(moments: &MomentEstimates, w: DVector<f64>) -> Result<PortfolioWeights> {
    to_weights(moments, &w)
}

fn to_weights(moments: &MomentEstimates, w: &DVector<f64>) -> Result<PortfolioWeights> {
    // Clip projection round-off and renormalize before validation.
    let mut v: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    PortfolioWeights::new(moments.assets().to_vec(), v)
}

/// Gradient of the MINIMIZATION form of the objective.
fn min_gradient(
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    w: &DVector<f64>,
    objective: MvoObjective,
) -> DVector<f64> {
    match objective {
        MvoObjective::MinVariance => 2.0 * (cov * w),
        MvoObjective::MaxSharpe { risk_free } => {
            let var = portfolio_variance(cov, w);
            if var <= 0.0 {
                // Degenerate zero-risk region: fall back to maximizing
                // excess return, whose minimization gradient is -mu.
                return -mu.clone();
            }
            let sigma = var.sqrt();
            let excess = mu.dot(w) - risk_free;
            // d/dw of -(excess / sigma).
            -(mu / sigma - (cov * w) * (excess / (sigma * var)))
        }
    }
}

fn sharpe_value(cov: &DMatrix<f64>, mu: &DVector<f64>, w: &DVector<f64>, r_f: f64) -> f64 {
    let var = portfolio_variance(cov, w);
    if var <= 0.0 {
        return mu.dot(w) - r_f;
    }
    (mu.dot(w) - r_f) / var.sqrt()
}

/// KKT residual for min f(w) over the simplex: on the support the gradient
/// must be constant (the multiplier), off the support it must not be
/// smaller than that constant.
fn kkt_residual(w: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > SUPPORT_EPS).collect();
    if support.is_empty() {
        return f64::INFINITY;
    }
    let lambda = support.iter().map(|&i| grad[i]).sum::<f64>() / support.len() as f64;
    let mut residual: f64 = 0.0;
    for i in 0..w.len() {
        if w[i] > SUPPORT_EPS {
            residual = residual.max((grad[i] - lambda).abs());
        } else {
            residual = residual.max((lambda - grad[i]).max(0.0));
        }
    }
    residual
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut accum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        accum += uj;
        let t = (accum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    DVector::from_fn(n, |i, _| (v[i] - tau).max(0.0))
}

/// Exact solve restricted to the current support set. For min-variance
/// this is the equality-constrained QP solution; for max-Sharpe it is the
/// tangency portfolio. Returns None when the restricted solution leaves
/// the long-only region or the linear solve fails.
fn polish(
    cov: &DMatrix<f64>,
    mu: &DVector<f64>,
    w: &DVector<f64>,
    objective: MvoObjective,
) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > SUPPORT_EPS).collect();
    let k = support.len();
    if k == 0 {
        return None;
    }
    let cov_s = DMatrix::from_fn(k, k, |a, b| cov[(support[a], support[b])]);
    let rhs = match objective {
        MvoObjective::MinVariance => DVector::from_element(k, 1.0),
        MvoObjective::MaxSharpe { risk_free } => {
            DVector::from_fn(k, |a, _| mu[support[a]] - risk_free)
        }
    };
    let solved = cov_s.lu().solve(&rhs)?;
    let total: f64 = solved.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    let mut out = DVector::zeros(w.len());
    for (a, &i) in support.iter().enumerate() {
        let wi = solved[a] / total;
        if wi < 0.0 {
            return None;
        }
        out[i] = wi;
    }
    Some(out)
}
