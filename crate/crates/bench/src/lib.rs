//! Shared fixtures for the pipeline benchmarks.

use rps_core::market::{compute_returns, pearson_correlation};
use rps_core::selection::{AssetSubset, Provenance};
use rps_core::synthetic::independent_market;
use rps_core::weighting::{estimate_moments, MomentEstimates};
use rps_core::{CorrelationMatrix, ReturnMatrix};

/// A synthetic market sized like the scale target: 100 assets, 200 periods.
pub fn market_fixture() -> (ReturnMatrix, CorrelationMatrix) {
    let prices = independent_market(100, 201, 0.02, 42).expect("valid spec");
    let returns = compute_returns(&prices);
    let corr = pearson_correlation(&returns).expect("full-rank returns");
    (returns, corr)
}

/// Moments for the first `n` assets of the fixture, as a weighter input.
pub fn moments_fixture(returns: &ReturnMatrix, n: usize) -> (MomentEstimates, AssetSubset) {
    let assets: Vec<String> = returns.assets()[..n].to_vec();
    let subset = AssetSubset::new(assets, Provenance::new("bench", 0, "fixture"))
        .expect("non-empty subset");
    let moments = estimate_moments(returns, &subset).expect("assets present");
    (moments, subset)
}
