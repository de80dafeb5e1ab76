//! Price history, simple returns, Pearson correlations, and the
//! train/test split that every downstream stage indexes into.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from;

/// Asset-labelled price history. Rows are timestamps (oldest first),
/// columns are assets. All prices are finite and strictly positive and
/// there are at least three rows, so returns and correlations exist.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceMatrix {
    assets: Vec<String>,
    timestamps: Vec<String>,
    values: DMatrix<f64>,
}

impl PriceMatrix {
    pub fn new(
        assets: Vec<String>,
        timestamps: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if assets.len() < 2 {
            return Err(Error::TooFew { what: "assets", needed: 2, got: assets.len() });
        }
        if timestamps.len() < 3 {
            return Err(Error::TooFew { what: "price rows", needed: 3, got: timestamps.len() });
        }
        if values.nrows() != timestamps.len() || values.ncols() != assets.len() {
            return Err(Error::Parse(format!(
                "price matrix is {}x{} but there are {} timestamps and {} assets",
                values.nrows(),
                values.ncols(),
                timestamps.len(),
                assets.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &assets {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateAsset(id.clone()));
            }
        }
        for row in 0..values.nrows() {
            for col in 0..values.ncols() {
                let v = values[(row, col)];
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::NonPositivePrice {
                        asset: assets[col].clone(),
                        row,
                        value: v,
                    });
                }
            }
        }
        Ok(Self { assets, timestamps, values })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Simple per-period returns, `(T - 1) x N` for a `T x N` price history.
/// Positive prices guarantee every entry is finite and greater than -1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnMatrix {
    pub fn new(assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != assets.len() {
            return Err(Error::Parse(format!(
                "return matrix has {} columns for {} assets",
                values.ncols(),
                assets.len()
            )));
        }
        if values.nrows() < 1 {
            return Err(Error::TooFew { what: "return rows", needed: 1, got: 0 });
        }
        for row in 0..values.nrows() {
            for col in 0..values.ncols() {
                let v = values[(row, col)];
                if !v.is_finite() || v <= -1.0 {
                    return Err(Error::Parse(format!(
                        "return {} for asset {} at row {} is not a valid simple return",
                        v, assets[col], row
                    )));
                }
            }
        }
        Ok(Self { assets, values })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn asset_index(&self, id: &str) -> Result<usize> {
        self.assets
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownAsset(id.to_string()))
    }

    /// Copies out the given row window, keeping all assets.
    pub fn window(&self, range: Range<usize>) -> Result<ReturnMatrix> {
        if range.start >= range.end || range.end > self.n_rows() {
            return Err(Error::RangeOutOfBounds {
                start: range.start as i64,
                end: range.end as i64,
                len: self.n_rows(),
            });
        }
        let rows = self.values.rows(range.start, range.end - range.start).into_owned();
        ReturnMatrix::new(self.assets.clone(), rows)
    }
}

/// Symmetric Pearson correlation matrix with unit diagonal, entries in
/// [-1, 1], labelled by the same asset order as the returns it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = assets.len();
        if n < 2 {
            return Err(Error::TooFew { what: "assets", needed: 2, got: n });
        }
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::Parse(format!(
                "correlation matrix is {}x{} for {} assets",
                values.nrows(),
                values.ncols(),
                n
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 1.0 {
                return Err(Error::Parse(format!(
                    "correlation diagonal at {} is {}, expected exactly 1",
                    i,
                    values[(i, i)]
                )));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::CorrelationOutOfRange(v));
                }
                let back = values[(j, i)];
                if (v - back).abs() > 1e-12 {
                    return Err(Error::NotSymmetric { i, j, a: v, b: back });
                }
            }
        }
        Ok(Self { assets, values })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn asset_index(&self, id: &str) -> Result<usize> {
        self.assets
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownAsset(id.to_string()))
    }

    /// Restriction to a subset of assets, keeping this matrix's order.
    pub fn restrict(&self, subset: &[String]) -> Result<CorrelationMatrix> {
        let mut idx = Vec::with_capacity(subset.len());
        for id in subset {
            idx.push(self.asset_index(id)?);
        }
        let k = idx.len();
        let values = DMatrix::from_fn(k, k, |a, b| self.values[(idx[a], idx[b])]);
        CorrelationMatrix::new(subset.to_vec(), values)
    }
}

/// Half-open index ranges into the timestamp axis: `train` fits the model,
/// `test` evaluates it. Train always ends on or before test starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

impl DataSplit {
    pub fn new(train: Range<usize>, test: Range<usize>, horizon: usize) -> Result<Self> {
        for (name, r) in [("train", &train), ("test", &test)] {
            // A window of fewer than 3 prices yields fewer than 2 returns,
            // which breaks correlations and sample risk downstream.
            if r.start + 3 > r.end {
                return Err(Error::InvalidParameter(format!(
                    "{name} range [{}, {}) must span at least 3 price rows",
                    r.start, r.end
                )));
            }
            if r.end > horizon {
                return Err(Error::RangeOutOfBounds {
                    start: r.start as i64,
                    end: r.end as i64,
                    len: horizon,
                });
            }
        }
        if train.end > test.start {
            return Err(Error::InvalidParameter(format!(
                "train range ends at {} after test starts at {}",
                train.end, test.start
            )));
        }
        Ok(Self { train, test })
    }

    /// Return rows covered by the train price window: prices `[s, e)`
    /// produce returns `[s, e - 1)`.
    pub fn train_return_range(&self) -> Range<usize> {
        self.train.start..self.train.end - 1
    }

    pub fn test_return_range(&self) -> Range<usize> {
        self.test.start..self.test.end - 1
    }
}

/// Parsing options for [`load_prices`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Field delimiter, a single byte. Comma by default.
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// Result of loading a price file: the usable history plus the ids of
/// columns dropped for holding missing or unparsable values.
#[derive(Debug, Clone)]
pub struct LoadedPrices {
    pub prices: PriceMatrix,
    pub dropped: Vec<String>,
}

/// Loads a delimited price table. The first column is a timestamp label,
/// the header row names the assets. A column with any missing or
/// non-numeric cell is dropped and reported rather than failing the load;
/// a non-positive price is an error because it breaks simple returns.
pub fn load_prices(path: &Path, options: &LoadOptions) -> Result<LoadedPrices> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("bad header row: {e}")))?
        .clone();
    if headers.len() < 3 {
        return Err(Error::Parse(
            "need a timestamp column plus at least 2 asset columns".to_string(),
        ));
    }
    let asset_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n_cols = asset_ids.len();

    let mut timestamps = Vec::new();
    let mut cells: Vec<Option<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::Parse(format!("data row {}: {e}", row_idx + 1))
        })?;
        if record.len() != n_cols + 1 {
            return Err(Error::Parse(format!(
                "data row {} has {} fields, expected {}",
                row_idx + 1,
                record.len(),
                n_cols + 1
            )));
        }
        timestamps.push(record[0].to_string());
        for field in record.iter().skip(1) {
            cells.push(if field.is_empty() { None } else { field.parse::<f64>().ok() });
        }
    }

    let n_rows = timestamps.len();
    if n_rows < 3 {
        return Err(Error::TooFew { what: "price rows", needed: 3, got: n_rows });
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (col, id) in asset_ids.iter().enumerate() {
        let complete = (0..n_rows).all(|row| cells[row * n_cols + col].is_some());
        if complete {
            kept.push((col, id.clone()));
        } else {
            dropped.push(id.clone());
        }
    }
    if kept.len() < 2 {
        return Err(Error::TooFew { what: "complete asset columns", needed: 2, got: kept.len() });
    }

    let values = DMatrix::from_fn(n_rows, kept.len(), |row, k| {
        cells[row * n_cols + kept[k].0].unwrap()
    });
    let assets = kept.into_iter().map(|(_, id)| id).collect();
    let prices = PriceMatrix::new(assets, timestamps, values)?;
    Ok(LoadedPrices { prices, dropped })
}

/// Simple returns `r_t = p_(t+1) / p_t - 1`, one row fewer than prices.
pub fn compute_returns(prices: &PriceMatrix) -> ReturnMatrix {
    let t = prices.n_rows();
    let n = prices.n_assets();
    let p = prices.values();
    let values = DMatrix::from_fn(t - 1, n, |row, col| p[(row + 1, col)] / p[(row, col)] - 1.0);
    // Positive prices make every ratio finite and positive, so the
    // ReturnMatrix invariants cannot fail here.
    ReturnMatrix::new(prices.assets().to_vec(), values)
        .expect("returns from a valid price matrix are always valid")
}

/// Pearson correlation between every pair of return columns. An asset whose
/// returns never vary has no defined correlation and is rejected by name.
pub fn pearson_correlation(returns: &ReturnMatrix) -> Result<CorrelationMatrix> {
    let t = returns.n_rows();
    let n = returns.n_assets();
    if t < 2 {
        return Err(Error::TooFew { what: "return rows", needed: 2, got: t });
    }
    let r = returns.values();

    let mut means = vec![0.0; n];
    for col in 0..n {
        means[col] = r.column(col).sum() / t as f64;
    }
    let mut sq = vec![0.0; n];
    for col in 0..n {
        let mut acc = 0.0;
        for row in 0..t {
            let d = r[(row, col)] - means[col];
            acc += d * d;
        }
        if acc == 0.0 {
            return Err(Error::ZeroVariance(returns.assets()[col].clone()));
        }
        sq[col] = acc;
    }

    let mut values = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut cross = 0.0;
            for row in 0..t {
                cross += (r[(row, i)] - means[i]) * (r[(row, j)] - means[j]);
            }
            // Rounding can push |rho| a hair past 1 for collinear columns.
            let rho = (cross / (sq[i] * sq[j]).sqrt()).clamp(-1.0, 1.0);
            values[(i, j)] = rho;
            values[(j, i)] = rho;
        }
    }
    CorrelationMatrix::new(returns.assets().to_vec(), values)
}

/// Adds zero-mean Gaussian noise to each off-diagonal entry, mirroring the
/// same draw across the pair so the result stays symmetric, then clamps to
/// [-1, 1]. The diagonal stays exactly 1. `sigma == 0` returns the input
/// unchanged.
pub fn perturb_correlation(
    corr: &CorrelationMatrix,
    sigma: f64,
    seed: u64,
) -> Result<CorrelationMatrix> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(corr.clone());
    }
    let n = corr.n_assets();
    let mut rng = rng_from(seed);
    let normal = rand_distr::Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut values = corr.values().clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let noisy = (values[(i, j)] + rng.sample(normal)).clamp(-1.0, 1.0);
            values[(i, j)] = noisy;
            values[(j, i)] = noisy;
        }
    }
    CorrelationMatrix::new(corr.assets().to_vec(), values)
}

/// Slides the train window by `offset` timestamps (negative moves it
/// earlier) while leaving the test window alone. The shifted window must
/// stay inside `[0, horizon)`; it is allowed to overlap the test window,
/// which is exactly what a look-back robustness check wants to compare.
pub fn shift_split(split: &DataSplit, offset: i64, horizon: usize) -> Result<DataSplit> {
    let start = split.train.start as i64 + offset;
    let end = split.train.end as i64 + offset;
    if start < 0 || end > horizon as i64 {
        return Err(Error::RangeOutOfBounds { start, end, len: horizon });
    }
    Ok(DataSplit {
        train: start as usize..end as usize,
        test: split.test.clone(),
    })
}

/// Correlation of the return rows inside a price window, the common
/// "correlation over the train window" step.
pub fn window_correlation(
    returns: &ReturnMatrix,
    price_window: Range<usize>,
) -> Result<CorrelationMatrix> {
    if price_window.start + 1 >= price_window.end {
        return Err(Error::InvalidParameter(format!(
            "price window [{}, {}) is too short for returns",
            price_window.start, price_window.end
        )));
    }
    let window = returns.window(price_window.start..price_window.end - 1)?;
    pearson_correlation(&window)
}
