//! Capital allocation within a selected subset: mean-variance optimization,
//! hierarchical risk parity, and the critical-line frontier, all long-only
//! and fully invested.

mod cla;
mod hrp;
mod mvo;

pub use cla::{cla_frontier, Frontier};
pub use hrp::hrp_optimize;
pub use mvo::{mvo_optimize, MvoObjective};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::ReturnMatrix;
use crate::selection::AssetSubset;

/// Long-only weights over an ordered asset list: weights sum to 1 within
/// 1e-8 and each is >= -1e-12 (tolerance for optimizer round-off).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioWeights {
    assets: Vec<String>,
    weights: Vec<f64>,
}

impl PortfolioWeights {
    pub fn new(assets: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if assets.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} assets with {} weights",
                assets.len(),
                weights.len()
            )));
        }
        if assets.is_empty() {
            return Err(Error::TooFew { what: "portfolio assets", needed: 1, got: 0 });
        }
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, not 1")));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < -1e-12) {
            return Err(Error::InvalidParameter(format!("negative weight {w}")));
        }
        Ok(Self { assets, weights })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn weight_of(&self, asset: &str) -> Option<f64> {
        self.assets.iter().position(|a| a == asset).map(|i| self.weights[i])
    }
}

/// Sample mean vector and unbiased covariance matrix for an asset subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    assets: Vec<String>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl MomentEstimates {
    pub fn new(assets: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = assets.len();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "moment dimensions {}x{} / {} for {} assets",
                cov.nrows(),
                cov.ncols(),
                mean.len(),
                n
            )));
        }
        for i in 0..n {
            if cov[(i, i)] < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "negative variance {} for {}",
                    cov[(i, i)],
                    assets[i]
                )));
            }
            for j in 0..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 {
                    return Err(Error::NotSymmetric { i, j, a: cov[(i, j)], b: cov[(j, i)] });
                }
            }
        }
        Ok(Self { assets, mean, cov })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// One point on the mean-variance frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub weights: PortfolioWeights,
    pub expected_return: f64,
    /// Standard deviation of the per-period portfolio return.
    pub risk: f64,
}

/// Sample means and unbiased (divisor T-1) covariance restricted to the
/// subset, in the subset's sorted asset order.
pub fn estimate_moments(returns: &ReturnMatrix, subset: &AssetSubset) -> Result<MomentEstimates> {
    let t = returns.n_rows();
    if t < 2 {
        return Err(Error::TooFew { what: "return rows", needed: 2, got: t });
    }
    let assets: Vec<String> = subset.assets().iter().cloned().collect();
    let mut idx = Vec::with_capacity(assets.len());
    for a in &assets {
        idx.push(returns.asset_index(a)?);
    }
    let r = returns.values();
    let k = idx.len();

    let mean = DVector::from_fn(k, |a, _| r.column(idx[a]).sum() / t as f64);
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut acc = 0.0;
            for row in 0..t {
                acc += (r[(row, idx[a])] - mean[a]) * (r[(row, idx[b])] - mean[b]);
            }
            let v = acc / (t - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    MomentEstimates::new(assets, mean, cov)
}

/// Frontier point with the best (expected_return - r_f) / risk; zero-risk
/// points cannot be ranked and are skipped. Exact Sharpe ties go to the
/// lower-risk point.
pub fn pick_max_sharpe(points: &[FrontierPoint], r_f: f64) -> Result<PortfolioWeights> {
    if points.is_empty() {
        return Err(Error::TooFew { what: "frontier points", needed: 1, got: 0 });
    }
    let mut best: Option<(f64, f64, &FrontierPoint)> = None;
    for p in points {
        if p.risk <= 0.0 {
            continue;
        }
        let sharpe = (p.expected_return - r_f) / p.risk;
        let replace = match best {
            None => true,
            Some((bs, br, _)) => sharpe > bs || (sharpe == bs && p.risk < br),
        };
        if replace {
            best = Some((sharpe, p.risk, p));
        }
    }
    best.map(|(_, _, p)| p.weights.clone()).ok_or(Error::DegenerateFrontier)
}

/// Regularizes a covariance matrix whose smallest eigenvalue dips below
/// 1e-10 by adding lambda I with lambda = 1e-8 * trace / n. Returns the
/// usable matrix and whether regularization fired.
pub(crate) fn ensure_psd(cov: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let n = cov.nrows();
    let eigen = cov.clone().symmetric_eigen();
    let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig >= 1e-10 {
        return (cov.clone(), false);
    }
    let lambda = 1e-8 * cov.trace() / n as f64;
    let mut out = cov.clone();
    for i in 0..n {
        out[(i, i)] += lambda;
    }
    (out, true)
}

/// Portfolio variance w' Sigma w.
pub(crate) fn portfolio_variance(cov: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    (cov * w).dot(w)
}
