//! Critical-line tracing of the long-only mean-variance frontier.
//!
//! Follows the classic turning-point recursion: starting from all capital
//! in the highest-return asset, the multiplier lambda decreases monotonically
//! while assets enter or leave the free set; each change of the active set
//! is a turning point. The trace ends at lambda = 0, the global long-only
//! minimum-variance portfolio.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{ensure_psd, mvo_optimize, MomentEstimates, MvoObjective, PortfolioWeights};

/// Frontier points ordered from the maximum-return corner to the global
/// minimum-variance portfolio, plus any numerical warnings hit on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub points: Vec<super::FrontierPoint>,
    pub warnings: Vec<String>,
}

const LOWER: f64 = 0.0;
const UPPER: f64 = 1.0;

/// Traces all turning points of the long-only frontier. Equal means across
/// the board degenerate the frontier to the single minimum-variance point,
/// which is returned as such.
pub fn cla_frontier(moments: &MomentEstimates) -> Result<Frontier> {
    let n = moments.n_assets();
    if n < 2 {
        return Err(Error::TooFew { what: "assets", needed: 2, got: n });
    }
    let mut warnings = Vec::new();
    let (cov, regularized) = ensure_psd(moments.cov());
    if regularized {
        warnings.push("covariance regularized before frontier trace".to_string());
    }
    let mu = moments.mean().clone();

    let spread = mu.max() - mu.min();
    if spread < 1e-12 {
        let w = mvo_optimize(moments, MvoObjective::MinVariance)?;
        let points = vec![frontier_point(moments, &mu, &cov, w.weights())?];
        return Ok(Frontier { points, warnings });
    }

    // Highest mean first; index breaks exact ties.
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]).then(a.cmp(&b)));

    let mut w = DVector::zeros(n);
    w[ranked[0]] = UPPER;
    let mut free: Vec<usize> = vec![ranked[0]];
    let mut last_lambda: Option<f64> = None;
    let mut points = vec![frontier_point(moments, &mu, &cov, w.as_slice())?];

    for _ in 0..(10 * n + 10) {
        // Case a: a free asset hits one of its bounds.
        let mut l_in: Option<(f64, usize, f64)> = None;
        if free.len() > 1 {
            let parts = Partition::build(&cov, &mu, &free, &w, &mut warnings);
            for (pos, &i) in free.iter().enumerate() {
                if let Some((lambda, bound)) = compute_lambda(&parts, pos, None) {
                    if l_in.map_or(true, |(best, _, _)| lambda > best) {
                        l_in = Some((lambda, i, bound));
                    }
                }
            }
        }

        // Case b: a bounded asset becomes free.
        let mut l_out: Option<(f64, usize)> = None;
        if free.len() < n {
            for i in (0..n).filter(|i| !free.contains(i)) {
                let mut trial = free.clone();
                trial.push(i);
                let parts = Partition::build(&cov, &mu, &trial, &w, &mut warnings);
                if let Some((lambda, _)) =
                    compute_lambda(&parts, trial.len() - 1, Some(w[i]))
                {
                    let admissible = last_lambda.map_or(true, |last| lambda < last);
                    if admissible && l_out.map_or(true, |(best, _)| lambda > best) {
                        l_out = Some((lambda, i));
                    }
                }
            }
        }

        let lambda_in = l_in.map_or(f64::NEG_INFINITY, |(l, _, _)| l);
        let lambda_out = l_out.map_or(f64::NEG_INFINITY, |(l, _)| l);
        if lambda_in <= 0.0 && lambda_out <= 0.0 {
            break;
        }

        let lambda = if lambda_in > lambda_out {
            let (l, i, bound) = l_in.unwrap();
            free.retain(|&x| x != i);
            w[i] = bound;
            l
        } else {
            let (l, i) = l_out.unwrap();
            free.push(i);
            l
        };
        last_lambda = Some(lambda);

        let parts = Partition::build(&cov, &mu, &free, &w, &mut warnings);
        let w_free = compute_free_weights(&parts, lambda);
        for (pos, &i) in free.iter().enumerate() {
            w[i] = w_free[pos];
        }
        points.push(frontier_point(moments, &mu, &cov, w.as_slice())?);
    }

    // Lambda = 0: global minimum variance over the final free set.
    let parts = Partition::build(&cov, &mu, &free, &w, &mut warnings);
    let w_free = compute_free_weights(&parts, 0.0);
    for (pos, &i) in free.iter().enumerate() {
        w[i] = w_free[pos];
    }
    points.push(frontier_point(moments, &mu, &cov, w.as_slice())?);

    Ok(Frontier { points, warnings })
}

/// Free/bounded partition of one active set, with the inverse of the free
/// covariance block and the cross terms the lambda formulas need.
struct Partition {
    inv: DMatrix<f64>,
    mean_free: DVector<f64>,
    /// covarFB * wB, zero when nothing is bounded.
    cross: DVector<f64>,
    /// Sum of bounded weights.
    bounded_sum: f64,
    has_bounded: bool,
}

impl Partition {
    fn build(
        cov: &DMatrix<f64>,
        mu: &DVector<f64>,
        free: &[usize],
        w: &DVector<f64>,
        warnings: &mut Vec<String>,
    ) -> Self {
        let n = cov.nrows();
        let k = free.len();
        let bounded: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
        let cov_f = DMatrix::from_fn(k, k, |a, b| cov[(free[a], free[b])]);
        let inv = invert_with_jitter(cov_f, warnings);
        let mean_free = DVector::from_fn(k, |a, _| mu[free[a]]);
        let (cross, bounded_sum) = if bounded.is_empty() {
            (DVector::zeros(k), 0.0)
        } else {
            let cov_fb =
                DMatrix::from_fn(k, bounded.len(), |a, b| cov[(free[a], bounded[b])]);
            let w_b = DVector::from_fn(bounded.len(), |b, _| w[bounded[b]]);
            (cov_fb * &w_b, w_b.sum())
        };
        Partition { inv, mean_free, cross, bounded_sum, has_bounded: !bounded.is_empty() }
    }
}

fn invert_with_jitter(mut m: DMatrix<f64>, warnings: &mut Vec<String>) -> DMatrix<f64> {
    if let Some(inv) = m.clone().try_inverse() {
        return inv;
    }
    let n = m.nrows();
    let jitter = 1e-10 * (m.trace() / n as f64).max(1e-12);
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    warnings.push("singular free-set covariance; jitter applied".to_string());
    m.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(n, n))
}

/// Lambda at which free-position `pos` pins to a bound. `fixed_bound`
/// carries the current weight when testing a bounded asset for release;
/// otherwise the bound is chosen by the sign of the direction coefficient.
fn compute_lambda(parts: &Partition, pos: usize, fixed_bound: Option<f64>) -> Option<(f64, f64)> {
    let k = parts.mean_free.len();
    let ones = DVector::from_element(k, 1.0);
    let c2 = &parts.inv * &parts.mean_free;
    let c4 = &parts.inv * &ones;
    let c1 = c4.sum();
    let c3 = c2.sum();
    let c = -c1 * c2[pos] + c3 * c4[pos];
    if c == 0.0 || !c.is_finite() {
        return None;
    }
    let bound = fixed_bound.unwrap_or(if c > 0.0 { UPPER } else { LOWER });
    let lambda = if parts.has_bounded {
        let l3 = &parts.inv * &parts.cross;
        let l2 = l3.sum();
        ((1.0 - parts.bounded_sum + l2) * c4[pos] - c1 * (bound + l3[pos])) / c
    } else {
        (c4[pos] - c1 * bound) / c
    };
    lambda.is_finite().then_some((lambda, bound))
}

/// Free-set weights for a given lambda, from the equality-constrained
/// first-order conditions.
fn compute_free_weights(parts: &Partition, lambda: f64) -> DVector<f64> {
    let k = parts.mean_free.len();
    let ones = DVector::from_element(k, 1.0);
    let inv_ones = &parts.inv * &ones;
    let inv_mean = &parts.inv * &parts.mean_free;
    let g1 = inv_mean.sum();
    let g2 = inv_ones.sum();
    let (w1, coverage) = if parts.has_bounded {
        let w1 = &parts.inv * &parts.cross;
        let g4 = w1.sum();
        (w1, 1.0 - parts.bounded_sum + g4)
    } else {
        (DVector::zeros(k), 1.0)
    };
    let gamma = -lambda * g1 / g2 + coverage / g2;
    -w1 + gamma * inv_ones + lambda * inv_mean
}

fn frontier_point(
    moments: &MomentEstimates,
    mu: &DVector<f64>,
    cov: &DMatrix<f64>,
    w: &[f64],
) -> Result<super::FrontierPoint> {
    // Clip turning-point round-off before validating.
    let mut v: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    let wv = DVector::from_row_slice(&v);
    let expected_return = mu.dot(&wv);
    let risk = super::portfolio_variance(cov, &wv).max(0.0).sqrt();
    Ok(super::FrontierPoint {
        weights: PortfolioWeights::new(moments.assets().to_vec(), v)?,
        expected_return,
        risk,
    })
}
