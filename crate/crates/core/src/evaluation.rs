//! Out-of-sample performance metrics and selection-stability measurement.
//!
//! Ratios whose denominator is a zero standard deviation are reported as
//! `None` rather than NaN; report writers render them as an explicit
//! "undefined" marker.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    perturb_correlation, shift_split, CorrelationMatrix, DataSplit, ReturnMatrix,
};
use crate::selection::SelectionResult;
use crate::weighting::PortfolioWeights;

/// How per-period returns aggregate into the window total. Compounding is
/// the default; the arithmetic sum exists for linearity-based checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnConvention {
    #[default]
    Compound,
    Arithmetic,
}

impl ReturnConvention {
    pub fn total_return(&self, series: &[f64]) -> f64 {
        match self {
            ReturnConvention::Compound => {
                series.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
            }
            ReturnConvention::Arithmetic => series.iter().sum(),
        }
    }
}

/// Test-range metrics for one weighted portfolio, matching the performance
/// table columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    /// Unweighted mean of pairwise correlations inside the subset.
    pub avg_pairwise_correlation: f64,
    /// Total return over the window per the chosen convention.
    pub total_return: f64,
    /// Sample standard deviation of the per-period portfolio returns.
    pub risk: f64,
    pub sharpe: Option<f64>,
    pub information_ratio: Option<f64>,
    pub m2: Option<f64>,
}

/// Equal-weight (or precomputed) benchmark over the same window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSeries {
    returns: Vec<f64>,
    total_return: f64,
    std: f64,
}

impl BenchmarkSeries {
    pub fn new(returns: Vec<f64>, convention: ReturnConvention) -> Result<Self> {
        if returns.len() < 2 {
            return Err(Error::TooFew {
                what: "benchmark return periods",
                needed: 2,
                got: returns.len(),
            });
        }
        let total_return = convention.total_return(&returns);
        let std = sample_std(&returns);
        Ok(Self { returns, total_return, std })
    }

    /// Equal-weight portfolio of every asset in the matrix over `range`.
    pub fn equal_weight(
        returns: &ReturnMatrix,
        range: Range<usize>,
        convention: ReturnConvention,
    ) -> Result<Self> {
        check_range(&range, returns.n_rows())?;
        let n = returns.n_assets() as f64;
        let r = returns.values();
        let series: Vec<f64> = range.map(|row| r.row(row).sum() / n).collect();
        Self::new(series, convention)
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn total_return(&self) -> f64 {
        self.total_return
    }

    pub fn std(&self) -> f64 {
        self.std
    }
}

/// Jaccard similarities between the subsets of two selection runs,
/// `k1 x k2` with every entry in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityMatrix {
    values: Vec<Vec<f64>>,
}

impl StabilityMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || values[0].is_empty() {
            return Err(Error::TooFew { what: "stability matrix rows", needed: 1, got: 0 });
        }
        let cols = values[0].len();
        for row in &values {
            if row.len() != cols {
                return Err(Error::Parse("ragged stability matrix".into()));
            }
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "similarity {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

fn check_range(range: &Range<usize>, len: usize) -> Result<()> {
    if range.start >= range.end || range.end > len {
        return Err(Error::RangeOutOfBounds {
            start: range.start as i64,
            end: range.end as i64,
            len,
        });
    }
    Ok(())
}

/// Sample standard deviation (divisor n - 1). Callers guarantee n >= 2.
fn sample_std(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// Per-period weighted-sum portfolio returns over `range` (the portfolio is
/// rebalanced back to its weights every period).
pub fn portfolio_returns(
    weights: &PortfolioWeights,
    returns: &ReturnMatrix,
    range: Range<usize>,
) -> Result<Vec<f64>> {
    check_range(&range, returns.n_rows())?;
    let mut idx = Vec::with_capacity(weights.len());
    for a in weights.assets() {
        idx.push(returns.asset_index(a)?);
    }
    let r = returns.values();
    Ok(range
        .map(|row| idx.iter().zip(weights.weights()).map(|(&i, &w)| w * r[(row, i)]).sum())
        .collect())
}

/// Unweighted mean of the correlations over unordered asset pairs.
pub fn avg_pairwise_correlation(corr: &CorrelationMatrix, assets: &[String]) -> Result<f64> {
    if assets.len() < 2 {
        return Err(Error::TooFew { what: "subset assets", needed: 2, got: assets.len() });
    }
    let mut idx = Vec::with_capacity(assets.len());
    for a in assets {
        idx.push(corr.asset_index(a)?);
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..idx.len() {
        for b in (a + 1)..idx.len() {
            total += corr.get(idx[a], idx[b]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// All performance metrics for one portfolio series against a benchmark.
///
/// Total returns are window totals while risk is a per-period standard
/// deviation; Sharpe = (R_p - r_f) / sigma_p mixes the two scales by
/// construction, and M2 = Sharpe * sigma_b + r_f inherits that convention.
pub fn metric_suite(
    series: &[f64],
    bench: &BenchmarkSeries,
    risk_free: f64,
    corr: &CorrelationMatrix,
    weights: &PortfolioWeights,
    convention: ReturnConvention,
) -> Result<PerformanceReport> {
    if series.len() < 2 {
        return Err(Error::TooFew { what: "portfolio return periods", needed: 2, got: series.len() });
    }
    if series.len() != bench.returns().len() {
        return Err(Error::InvalidParameter(format!(
            "series spans {} periods but the benchmark spans {}",
            series.len(),
            bench.returns().len()
        )));
    }
    let total_return = convention.total_return(series);
    let risk = sample_std(series);
    let sharpe = (risk > 0.0).then(|| (total_return - risk_free) / risk);
    let m2 = sharpe.map(|s| s * bench.std() + risk_free);

    let excess: Vec<f64> = series.iter().zip(bench.returns()).map(|(p, b)| p - b).collect();
    let tracking = sample_std(&excess);
    let information_ratio =
        (tracking > 0.0).then(|| (total_return - bench.total_return()) / tracking);

    let avg_pairwise_correlation = avg_pairwise_correlation(corr, weights.assets())?;
    Ok(PerformanceReport {
        avg_pairwise_correlation,
        total_return,
        risk,
        sharpe,
        information_ratio,
        m2,
    })
}

/// |A ∩ B| / |A ∪ B|. Zero when exactly one side is empty; both empty is
/// an error (0/0).
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::InvalidParameter("jaccard of two empty sets".into()));
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// SM[i][j] = jaccard(run1.subsets[i], run2.subsets[j]).
pub fn stability_matrix(
    run1: &SelectionResult,
    run2: &SelectionResult,
) -> Result<StabilityMatrix> {
    if run1.subsets().is_empty() || run2.subsets().is_empty() {
        return Err(Error::TooFew { what: "subsets", needed: 1, got: 0 });
    }
    let mut values = Vec::with_capacity(run1.subsets().len());
    for a in run1.subsets() {
        let mut row = Vec::with_capacity(run2.subsets().len());
        for b in run2.subsets() {
            row.push(jaccard(a.assets(), b.assets())?);
        }
        values.push(row);
    }
    StabilityMatrix::new(values)
}

/// Mean over the k1 row maxima and the k2 column maxima together.
pub fn stability_score(sm: &StabilityMatrix) -> f64 {
    let mut total = 0.0;
    for row in sm.rows() {
        total += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    for j in 0..sm.n_cols() {
        total += (0..sm.n_rows()).map(|i| sm.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
    }
    total / (sm.n_rows() + sm.n_cols()) as f64
}

/// Stability under correlation noise: the runner is invoked on the original
/// matrix and on a perturbed copy (identical strategy seed inside the
/// runner, so the noise is the only difference), and the two results are
/// scored against each other.
pub fn noise_stability<F>(
    corr: &CorrelationMatrix,
    sigma: f64,
    noise_seed: u64,
    runner: F,
) -> Result<f64>
where
    F: Fn(&CorrelationMatrix) -> Result<SelectionResult>,
{
    let base = runner(corr)?;
    let perturbed = perturb_correlation(corr, sigma, noise_seed)?;
    let other = runner(&perturbed)?;
    Ok(stability_score(&stability_matrix(&base, &other)?))
}

/// Stability under a train-window shift: the runner sees the original split
/// and a copy whose train range is shifted by `offset` rows (the test range
/// is untouched), again with identical strategy seeds.
pub fn time_stability<F>(split: &DataSplit, offset: i64, horizon: usize, runner: F) -> Result<f64>
where
    F: Fn(&DataSplit) -> Result<SelectionResult>,
{
    let shifted = shift_split(split, offset, horizon)?;
    let base = runner(split)?;
    let other = runner(&shifted)?;
    Ok(stability_score(&stability_matrix(&base, &other)?))
}
