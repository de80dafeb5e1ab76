//! Seeded synthetic markets for tests, benchmarks, and demo runs.
//!
//! All generators draw from a single ChaCha stream per call, so a given
//! (spec, seed) pair always produces the same price matrix.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::market::PriceMatrix;
use crate::seeding::rng_from;

/// Two equally sized blocks with one latent factor each: assets inside a
/// block correlate at `intra_rho` (population value), assets across blocks
/// are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBlockSpec {
    pub block_size: usize,
    pub periods: usize,
    pub intra_rho: f64,
    /// Per-period return volatility shared by all assets.
    pub vol: f64,
    /// Per-asset drift drawn uniformly from this closed interval.
    pub drift_low: f64,
    pub drift_high: f64,
}

impl Default for TwoBlockSpec {
    fn default() -> Self {
        Self {
            block_size: 10,
            periods: 300,
            intra_rho: 0.8,
            vol: 0.02,
            drift_low: 0.0,
            drift_high: 0.002,
        }
    }
}

/// Builds the two-block market. Asset ids are `A00..` for the first block
/// and `B00..` for the second. Prices start at 100.
pub fn two_block_market(spec: &TwoBlockSpec, seed: u64) -> Result<PriceMatrix> {
    let n = 2 * spec.block_size;
    let mut rng = rng_from(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");

    let drifts: Vec<f64> = (0..n).map(|_| draw_uniform(&mut rng, spec.drift_low, spec.drift_high)).collect();
    let factor_load = spec.intra_rho.max(0.0).sqrt();
    let noise_load = (1.0 - spec.intra_rho.max(0.0)).sqrt();

    let mut returns = vec![0.0; spec.periods * n];
    for t in 0..spec.periods {
        let factors = [gauss.sample(&mut rng), gauss.sample(&mut rng)];
        for i in 0..n {
            let block = i / spec.block_size;
            let shock = factor_load * factors[block] + noise_load * gauss.sample(&mut rng);
            returns[t * n + i] = drifts[i] + spec.vol * shock;
        }
    }

    let assets: Vec<String> = (0..n)
        .map(|i| {
            let (tag, j) = if i < spec.block_size { ('A', i) } else { ('B', i - spec.block_size) };
            format!("{tag}{j:02}")
        })
        .collect();
    prices_from_returns(assets, &returns, spec.periods)
}

/// Independent assets with common volatility and zero drift.
pub fn independent_market(n: usize, periods: usize, vol: f64, seed: u64) -> Result<PriceMatrix> {
    let mut rng = rng_from(seed);
    let gauss = Normal::new(0.0, vol).expect("vol must be finite and positive");
    let returns: Vec<f64> = (0..periods * n).map(|_| gauss.sample(&mut rng)).collect();
    let assets: Vec<String> = (0..n).map(|i| format!("X{i:03}")).collect();
    prices_from_returns(assets, &returns, periods)
}

/// One low-volatility asset with a strong positive drift (`STAR`) next to
/// `n_noise` driftless noisy assets.
pub fn dominant_asset_market(n_noise: usize, periods: usize, seed: u64) -> Result<PriceMatrix> {
    let n = n_noise + 1;
    let mut rng = rng_from(seed);
    let star = Normal::new(0.01, 0.001).expect("star distribution");
    let noise = Normal::new(0.0, 0.02).expect("noise distribution");

    let mut returns = vec![0.0; periods * n];
    for t in 0..periods {
        returns[t * n] = star.sample(&mut rng);
        for i in 1..n {
            returns[t * n + i] = noise.sample(&mut rng);
        }
    }
    let mut assets = vec!["STAR".to_string()];
    assets.extend((0..n_noise).map(|i| format!("N{i:02}")));
    prices_from_returns(assets, &returns, periods)
}

fn draw_uniform(rng: &mut impl Rng, low: f64, high: f64) -> f64 {
    if high > low {
        rng.random_range(low..high)
    } else {
        low
    }
}

/// Compounds per-period returns into a price path starting at 100. The
/// return matrix is row-major `periods x n`; the price matrix gains one
/// extra leading row.
fn prices_from_returns(assets: Vec<String>, returns: &[f64], periods: usize) -> Result<PriceMatrix> {
    let n = assets.len();
    let rows = periods + 1;
    let mut values = vec![0.0; rows * n];
    for i in 0..n {
        values[i] = 100.0;
    }
    for t in 0..periods {
        for i in 0..n {
            let prev = values[t * n + i];
            values[(t + 1) * n + i] = prev * (1.0 + returns[t * n + i]);
        }
    }
    let timestamps: Vec<String> = (0..rows).map(|t| format!("t{t:04}")).collect();
    PriceMatrix::new(assets, timestamps, DMatrix::from_row_slice(rows, n, &values))
}
