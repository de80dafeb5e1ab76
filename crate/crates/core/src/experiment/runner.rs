//! Experiment execution: select subsets, weight them, rank by in-sample
//! Sharpe, evaluate out of sample, and measure selection stability.
//!
//! One (strategy, weighter) pair is a cell. A failing stage aborts its own
//! cell with a recorded diagnostic; the other cells still run. Subsets from
//! all configured seeds pool into the same cell, so the performance table
//! keeps one row per cell no matter how many seeds replicate the strategy.

use std::ops::Range;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{
    metric_suite, noise_stability, portfolio_returns, time_stability, BenchmarkSeries,
    PerformanceReport, ReturnConvention,
};
use crate::market::{
    compute_returns, load_prices, window_correlation, CorrelationMatrix, DataSplit, LoadOptions,
    PriceMatrix, ReturnMatrix,
};
use crate::seeding::derive_seed;
use crate::selection::{
    mantegna_select, random_select, rps_select, rps_select_with_artifacts, sa_select, AssetSubset,
    Provenance, RpsArtifacts,
};
use crate::weighting::{
    cla_frontier, estimate_moments, hrp_optimize, mvo_optimize, pick_max_sharpe, FrontierPoint,
    MvoObjective, PortfolioWeights,
};

use super::config::{ExperimentConfig, ObjectivePick, StrategyConfig, WeighterConfig};

/// One portfolio after ranking, with both in-sample and out-of-sample
/// metric reports.
#[derive(Debug, Clone, Serialize)]
pub struct RankedPortfolio {
    /// 1-based position within the cell, ordered by train Sharpe.
    pub rank: usize,
    pub subset: AssetSubset,
    pub weights: PortfolioWeights,
    pub train: PerformanceReport,
    pub test: PerformanceReport,
}

/// Outcome of one (strategy, weighter) cell, or of the single SA cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    /// Table label, e.g. "RPS+MVO", "SA", or "Vanilla HRP".
    pub method: String,
    pub strategy: String,
    pub weighter: String,
    /// Ranked portfolios, at most `top_k`, empty when the cell failed.
    pub portfolios: Vec<RankedPortfolio>,
    /// Frontier of the rank-1 portfolio when the weighter traces one.
    pub frontier: Vec<FrontierPoint>,
    pub error: Option<String>,
}

/// Stability scores for one strategy, or the reason they were skipped.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityOutcome {
    pub strategy: String,
    pub noise: Option<f64>,
    pub time: Option<f64>,
    pub skip_reason: Option<String>,
    pub error: Option<String>,
}

/// One strategy's pooled subsets, before weighting or ranking.
#[derive(Debug, Clone, Serialize)]
pub struct StrategySubsets {
    pub label: String,
    pub subsets: Vec<AssetSubset>,
}

/// Output of the selection stage run on its own.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionStage {
    pub strategies: Vec<StrategySubsets>,
    /// (strategy label, diagnostic) for strategies that failed outright.
    pub failures: Vec<(String, String)>,
    pub log: Vec<String>,
}

/// Output of the stability stage run on its own.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityStage {
    pub outcomes: Vec<StabilityOutcome>,
    pub log: Vec<String>,
}

impl StabilityStage {
    pub fn failure_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }
}

/// Everything a run produces, ready for report emission.
#[derive(Debug, Clone, Serialize)]
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub universe: Vec<String>,
    /// Selection-stage output per strategy (full pools, not truncated to
    /// the ranked top-k).
    pub selections: Vec<StrategySubsets>,
    pub cells: Vec<CellResult>,
    pub stability: Vec<StabilityOutcome>,
    pub log: Vec<String>,
    /// RPS pipeline intermediates from the first seed, kept for dumps.
    #[serde(skip)]
    pub rps_artifacts: Option<RpsArtifacts>,
}

impl RunArtifacts {
    /// Requested work that did not complete; drives the partial-failure
    /// exit code.
    pub fn failure_count(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
            + self.stability.iter().filter(|s| s.error.is_some()).count()
    }
}

struct RunContext<'a> {
    returns: &'a ReturnMatrix,
    train_returns: ReturnMatrix,
    train_corr: CorrelationMatrix,
    test_corr: CorrelationMatrix,
    train_range: Range<usize>,
    test_range: Range<usize>,
    train_bench: BenchmarkSeries,
    test_bench: BenchmarkSeries,
    split: DataSplit,
    horizon: usize,
    convention: ReturnConvention,
    risk_free: f64,
}

/// Loads the configured price file and logs dropped columns.
fn load_configured_prices(config: &ExperimentConfig) -> Result<(PriceMatrix, Vec<String>)> {
    if config.data.path.is_empty() {
        return Err(Error::Config("data.path is required".into()));
    }
    let options = LoadOptions { delimiter: config.data.delimiter_byte()? };
    let loaded = load_prices(Path::new(&config.data.path), &options)?;
    let mut log = Vec::new();
    for id in &loaded.dropped {
        log.push(format!("dropped asset {id}: column has missing or unparsable prices"));
    }
    Ok((loaded.prices, log))
}

fn build_context<'a>(
    config: &ExperimentConfig,
    prices: &PriceMatrix,
    returns: &'a ReturnMatrix,
) -> Result<RunContext<'a>> {
    let split = config.split.to_split(prices.n_rows())?;
    let convention = config.return_convention;
    let train_range = split.train_return_range();
    let test_range = split.test_return_range();
    Ok(RunContext {
        returns,
        train_returns: returns.window(train_range.clone())?,
        train_corr: window_correlation(returns, split.train.clone())?,
        test_corr: window_correlation(returns, split.test.clone())?,
        train_bench: BenchmarkSeries::equal_weight(returns, train_range.clone(), convention)?,
        test_bench: BenchmarkSeries::equal_weight(returns, test_range.clone(), convention)?,
        train_range,
        test_range,
        split,
        horizon: prices.n_rows(),
        convention,
        risk_free: config.risk_free_rate,
    })
}

/// Loads the configured price file and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let (prices, log) = load_configured_prices(config)?;
    run_inner(config, &prices, log)
}

/// Runs the experiment on an in-memory price matrix (no file access).
pub fn run_with_prices(config: &ExperimentConfig, prices: &PriceMatrix) -> Result<RunArtifacts> {
    config.validate()?;
    run_inner(config, prices, Vec::new())
}

/// Runs the selection stage alone: pooled subsets per strategy. Strategy
/// failures are isolated, mirroring per-cell isolation in the full run.
pub fn run_selection(config: &ExperimentConfig) -> Result<SelectionStage> {
    config.validate()?;
    let (prices, log) = load_configured_prices(config)?;
    select_with_prices(config, &prices, log)
}

fn select_with_prices(
    config: &ExperimentConfig,
    prices: &PriceMatrix,
    mut log: Vec<String>,
) -> Result<SelectionStage> {
    let returns = compute_returns(prices);
    let ctx = build_context(config, prices, &returns)?;
    let labels = disambiguate(config.strategies.iter().map(|s| s.label()).collect());
    let mut strategies = Vec::new();
    let mut failures = Vec::new();
    let mut rps_artifacts = None;
    for (si, strategy) in config.strategies.iter().enumerate() {
        match collect_outputs(strategy, &ctx, config, &mut log, &mut rps_artifacts) {
            Ok(outputs) => strategies.push(StrategySubsets {
                label: labels[si].clone(),
                subsets: outputs.into_subsets(),
            }),
            Err(e) => {
                log.push(format!("{}: selection failed: {e}", labels[si]));
                failures.push((labels[si].clone(), e.to_string()));
            }
        }
    }
    Ok(SelectionStage { strategies, failures, log })
}

/// Runs the stability checks alone, for every strategy that defines them.
/// Invoked explicitly, so `stability.enabled` is not consulted.
pub fn run_stability_stage(config: &ExperimentConfig) -> Result<StabilityStage> {
    config.validate()?;
    let (prices, mut log) = load_configured_prices(config)?;
    let returns = compute_returns(&prices);
    let ctx = build_context(config, &prices, &returns)?;
    let labels = disambiguate(config.strategies.iter().map(|s| s.label()).collect());
    let mut outcomes = Vec::new();
    for (si, strategy) in config.strategies.iter().enumerate() {
        outcomes.push(run_stability(strategy, &labels[si], config, &ctx, &mut log));
    }
    Ok(StabilityStage { outcomes, log })
}

fn run_inner(
    config: &ExperimentConfig,
    prices: &PriceMatrix,
    mut log: Vec<String>,
) -> Result<RunArtifacts> {
    let returns = compute_returns(prices);
    let universe = prices.assets().to_vec();
    let ctx = build_context(config, prices, &returns)?;

    log.push(format!(
        "universe: {} assets over {} price rows; train prices [{}, {}), test prices [{}, {})",
        universe.len(),
        prices.n_rows(),
        ctx.split.train.start,
        ctx.split.train.end,
        ctx.split.test.start,
        ctx.split.test.end
    ));
    log.push(format!(
        "seeds: {:?}; top_k: {}; return convention: {:?}",
        config.seeds, config.top_k, ctx.convention
    ));

    let strategy_labels = disambiguate(config.strategies.iter().map(|s| s.label()).collect());
    let weighter_labels = disambiguate(config.weighters.iter().map(|w| w.label()).collect());

    let mut selections = Vec::new();
    let mut cells = Vec::new();
    let mut rps_artifacts: Option<RpsArtifacts> = None;

    for (si, strategy) in config.strategies.iter().enumerate() {
        let slabel = &strategy_labels[si];
        match collect_outputs(strategy, &ctx, config, &mut log, &mut rps_artifacts) {
            Ok(StrategyOutputs::Weighted(entries)) => {
                selections.push(StrategySubsets {
                    label: slabel.clone(),
                    subsets: entries.iter().map(|(s, _)| s.clone()).collect(),
                });
                let entries =
                    entries.into_iter().map(|(s, w)| (s, w, Vec::new())).collect::<Vec<_>>();
                cells.push(finish_cell(
                    slabel.clone(),
                    strategy.tag().to_string(),
                    String::new(),
                    entries,
                    &ctx,
                    config,
                    &mut log,
                ));
            }
            Ok(StrategyOutputs::Subsets(subsets)) => {
                log.push(format!("{slabel}: {} subset(s) after pooling", subsets.len()));
                selections.push(StrategySubsets {
                    label: slabel.clone(),
                    subsets: subsets.clone(),
                });
                for (wi, weighter) in config.weighters.iter().enumerate() {
                    let method = format!("{slabel}+{}", weighter_labels[wi]);
                    let cell = weight_cell(
                        method,
                        strategy.tag().to_string(),
                        weighter,
                        &subsets,
                        &ctx,
                        config,
                        &mut log,
                    );
                    cells.push(cell);
                }
            }
            Err(e) => {
                log.push(format!("{slabel}: selection failed: {e}"));
                if strategy.is_one_phased() {
                    cells.push(failed_cell(
                        slabel.clone(),
                        strategy.tag().to_string(),
                        String::new(),
                        e.to_string(),
                    ));
                } else {
                    for (wi, _) in config.weighters.iter().enumerate() {
                        cells.push(failed_cell(
                            format!("{slabel}+{}", weighter_labels[wi]),
                            strategy.tag().to_string(),
                            config.weighters[wi].tag().to_string(),
                            e.to_string(),
                        ));
                    }
                }
            }
        }
    }

    // Vanilla rows: each weighter over the whole universe, no selection.
    match AssetSubset::new(universe.clone(), Provenance::new("vanilla", 0, "full universe")) {
        Ok(full) => {
            for (wi, weighter) in config.weighters.iter().enumerate() {
                let method = format!("Vanilla {}", weighter_labels[wi]);
                let cell = weight_cell(
                    method,
                    "vanilla".to_string(),
                    weighter,
                    std::slice::from_ref(&full),
                    &ctx,
                    config,
                    &mut log,
                );
                cells.push(cell);
            }
        }
        Err(e) => log.push(format!("vanilla rows skipped: {e}")),
    }

    let mut stability = Vec::new();
    if config.stability.enabled {
        for (si, strategy) in config.strategies.iter().enumerate() {
            stability.push(run_stability(strategy, &strategy_labels[si], config, &ctx, &mut log));
        }
    } else {
        log.push("stability checks disabled by config".to_string());
    }

    for cell in &cells {
        match &cell.error {
            Some(e) => log.push(format!("cell {}: FAILED: {e}", cell.method)),
            None => log.push(format!(
                "cell {}: {} portfolio(s) ranked",
                cell.method,
                cell.portfolios.len()
            )),
        }
    }

    Ok(RunArtifacts {
        config: config.clone(),
        universe,
        selections,
        cells,
        stability,
        log,
        rps_artifacts,
    })
}

/// Appends `#n` to repeated labels so two configs of the same kind stay
/// distinguishable in the tables.
fn disambiguate(labels: Vec<&'static str>) -> Vec<String> {
    let mut out = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        if labels.iter().filter(|l| **l == *label).count() > 1 {
            let occurrence = labels[..=i].iter().filter(|l| **l == *label).count();
            out.push(format!("{label}#{occurrence}"));
        } else {
            out.push((*label).to_string());
        }
    }
    out
}

enum StrategyOutputs {
    Subsets(Vec<AssetSubset>),
    Weighted(Vec<(AssetSubset, PortfolioWeights)>),
}

impl StrategyOutputs {
    fn into_subsets(self) -> Vec<AssetSubset> {
        match self {
            StrategyOutputs::Subsets(s) => s,
            StrategyOutputs::Weighted(entries) => entries.into_iter().map(|(s, _)| s).collect(),
        }
    }
}

fn collect_outputs(
    strategy: &StrategyConfig,
    ctx: &RunContext<'_>,
    config: &ExperimentConfig,
    log: &mut Vec<String>,
    rps_artifacts: &mut Option<RpsArtifacts>,
) -> Result<StrategyOutputs> {
    match strategy {
        StrategyConfig::Rps(params) => {
            let mut pooled = Vec::new();
            for (i, &seed) in config.seeds.iter().enumerate() {
                let (result, artifacts) = rps_select_with_artifacts(&ctx.train_corr, params, seed)?;
                if i == 0 && rps_artifacts.is_none() {
                    *rps_artifacts = Some(artifacts);
                }
                for note in result.notes() {
                    log.push(format!("rps seed {seed}: {note}"));
                }
                pooled.extend_from_slice(result.subsets());
            }
            Ok(StrategyOutputs::Subsets(dedupe_pool(pooled, "rps", log)))
        }
        StrategyConfig::Mantegna => {
            let mut pooled = Vec::new();
            for &seed in &config.seeds {
                let result = mantegna_select(&ctx.train_corr, seed)?;
                for note in result.notes() {
                    log.push(format!("mantegna seed {seed}: {note}"));
                }
                pooled.extend_from_slice(result.subsets());
            }
            Ok(StrategyOutputs::Subsets(dedupe_pool(pooled, "mantegna", log)))
        }
        StrategyConfig::Random(params) => {
            let universe = ctx.train_corr.assets().to_vec();
            let mut pooled = Vec::new();
            for &seed in &config.seeds {
                let result =
                    random_select(&universe, params.subset_size, config.rnd_repeats, seed)?;
                pooled.extend_from_slice(result.subsets());
            }
            Ok(StrategyOutputs::Subsets(dedupe_pool(pooled, "random", log)))
        }
        StrategyConfig::Sa(params) => {
            let mut entries = Vec::new();
            for &seed in &config.seeds {
                for rep in 0..config.sa_repeats {
                    let run_seed = derive_seed(seed, "sa-rep", rep as u64);
                    let (result, weights) =
                        sa_select(&ctx.train_returns, params.subset_size, &params.schedule, run_seed)?;
                    entries.push((result.subsets()[0].clone(), weights));
                }
            }
            Ok(StrategyOutputs::Weighted(entries))
        }
    }
}

fn dedupe_pool(pool: Vec<AssetSubset>, tag: &str, log: &mut Vec<String>) -> Vec<AssetSubset> {
    let mut unique: Vec<AssetSubset> = Vec::with_capacity(pool.len());
    let mut dropped = 0usize;
    for s in pool {
        if unique.iter().any(|u| u.same_assets(&s)) {
            dropped += 1;
        } else {
            unique.push(s);
        }
    }
    if dropped > 0 {
        log.push(format!("{tag}: dropped {dropped} duplicate subset(s) across seeds"));
    }
    unique
}

fn failed_cell(method: String, strategy: String, weighter: String, error: String) -> CellResult {
    CellResult {
        method,
        strategy,
        weighter,
        portfolios: Vec::new(),
        frontier: Vec::new(),
        error: Some(error),
    }
}

fn weight_cell(
    method: String,
    strategy: String,
    weighter: &WeighterConfig,
    subsets: &[AssetSubset],
    ctx: &RunContext<'_>,
    config: &ExperimentConfig,
    log: &mut Vec<String>,
) -> CellResult {
    let weighter_tag = weighter.tag().to_string();
    let mut entries = Vec::with_capacity(subsets.len());
    for subset in subsets {
        match weight_one(weighter, subset, ctx, log, &method) {
            Ok(entry) => entries.push(entry),
            Err(e) => {
                return failed_cell(method, strategy, weighter_tag, e.to_string());
            }
        }
    }
    finish_cell(method, strategy, weighter_tag, entries, ctx, config, log)
}

type WeightedEntry = (AssetSubset, PortfolioWeights, Vec<FrontierPoint>);

fn weight_one(
    weighter: &WeighterConfig,
    subset: &AssetSubset,
    ctx: &RunContext<'_>,
    log: &mut Vec<String>,
    method: &str,
) -> Result<WeightedEntry> {
    let moments = estimate_moments(&ctx.train_returns, subset)?;
    match weighter {
        WeighterConfig::Mvo { objective } => {
            let objective = match objective {
                ObjectivePick::MaxSharpe => {
                    MvoObjective::MaxSharpe { risk_free: ctx.risk_free }
                }
                ObjectivePick::MinVariance => MvoObjective::MinVariance,
            };
            let weights = mvo_optimize(&moments, objective)?;
            Ok((subset.clone(), weights, Vec::new()))
        }
        WeighterConfig::Hrp => {
            let assets = moments.assets().to_vec();
            let sub_corr = ctx.train_corr.restrict(&assets)?;
            let weights = hrp_optimize(&moments, &sub_corr)?;
            Ok((subset.clone(), weights, Vec::new()))
        }
        WeighterConfig::Cla { pick } => {
            let frontier = cla_frontier(&moments)?;
            for warning in &frontier.warnings {
                log.push(format!("{method}: cla: {warning}"));
            }
            let weights = match pick {
                ObjectivePick::MaxSharpe => pick_max_sharpe(&frontier.points, ctx.risk_free)?,
                ObjectivePick::MinVariance => {
                    frontier.points.last().expect("frontier is never empty").weights.clone()
                }
            };
            Ok((subset.clone(), weights, frontier.points))
        }
    }
}

/// Ranks weighted entries by train Sharpe (descending, undefined last,
/// ties to lower risk), keeps `top_k`, and evaluates survivors on the test
/// range.
fn finish_cell(
    method: String,
    strategy: String,
    weighter: String,
    entries: Vec<WeightedEntry>,
    ctx: &RunContext<'_>,
    config: &ExperimentConfig,
    log: &mut Vec<String>,
) -> CellResult {
    match try_finish_cell(&method, entries, ctx, config) {
        Ok((portfolios, frontier)) => {
            if portfolios.is_empty() {
                log.push(format!("cell {method}: no viable subsets"));
                return failed_cell(method, strategy, weighter, "no subsets to weight".into());
            }
            CellResult { method, strategy, weighter, portfolios, frontier, error: None }
        }
        Err(e) => failed_cell(method, strategy, weighter, e.to_string()),
    }
}

fn try_finish_cell(
    _method: &str,
    entries: Vec<WeightedEntry>,
    ctx: &RunContext<'_>,
    config: &ExperimentConfig,
) -> Result<(Vec<RankedPortfolio>, Vec<FrontierPoint>)> {
    let mut scored = Vec::with_capacity(entries.len());
    for (subset, weights, frontier) in entries {
        let series = portfolio_returns(&weights, ctx.returns, ctx.train_range.clone())?;
        let train = metric_suite(
            &series,
            &ctx.train_bench,
            ctx.risk_free,
            &ctx.train_corr,
            &weights,
            ctx.convention,
        )?;
        scored.push((subset, weights, frontier, train));
    }
    scored.sort_by(|a, b| {
        let sa = a.3.sharpe.unwrap_or(f64::NEG_INFINITY);
        let sb = b.3.sharpe.unwrap_or(f64::NEG_INFINITY);
        sb.total_cmp(&sa).then(a.3.risk.total_cmp(&b.3.risk))
    });
    scored.truncate(config.top_k);

    let mut portfolios = Vec::with_capacity(scored.len());
    let mut top_frontier = Vec::new();
    for (i, (subset, weights, frontier, train)) in scored.into_iter().enumerate() {
        let series = portfolio_returns(&weights, ctx.returns, ctx.test_range.clone())?;
        let test = metric_suite(
            &series,
            &ctx.test_bench,
            ctx.risk_free,
            &ctx.test_corr,
            &weights,
            ctx.convention,
        )?;
        if i == 0 {
            top_frontier = frontier;
        }
        portfolios.push(RankedPortfolio { rank: i + 1, subset, weights, train, test });
    }
    Ok((portfolios, top_frontier))
}

fn run_stability(
    strategy: &StrategyConfig,
    label: &str,
    config: &ExperimentConfig,
    ctx: &RunContext<'_>,
    log: &mut Vec<String>,
) -> StabilityOutcome {
    if !strategy.supports_stability() {
        let reason =
            "stability is undefined for random draws and annealing restarts".to_string();
        log.push(format!("stability {label}: skipped: {reason}"));
        return StabilityOutcome {
            strategy: label.to_string(),
            noise: None,
            time: None,
            skip_reason: Some(reason),
            error: None,
        };
    }
    let seed = config.seeds[0];
    let select = |corr: &CorrelationMatrix| match strategy {
        StrategyConfig::Rps(params) => rps_select(corr, params, seed),
        StrategyConfig::Mantegna => mantegna_select(corr, seed),
        _ => unreachable!("stability runs only for rps and mantegna"),
    };

    let noise = noise_stability(
        &ctx.train_corr,
        config.stability.sigma,
        derive_seed(seed, "stability-noise", 0),
        select,
    );
    let time = time_stability(&ctx.split, config.stability.offset, ctx.horizon, |s: &DataSplit| {
        let corr = window_correlation(ctx.returns, s.train.clone())?;
        match strategy {
            StrategyConfig::Rps(params) => rps_select(&corr, params, seed),
            StrategyConfig::Mantegna => mantegna_select(&corr, seed),
            _ => unreachable!("stability runs only for rps and mantegna"),
        }
    });

    let mut outcome = StabilityOutcome {
        strategy: label.to_string(),
        noise: None,
        time: None,
        skip_reason: None,
        error: None,
    };
    let mut errors = Vec::new();
    match noise {
        Ok(score) => {
            log.push(format!("stability {label}: noise {score:.6}"));
            outcome.noise = Some(score);
        }
        Err(e) => errors.push(format!("noise: {e}")),
    }
    match time {
        Ok(score) => {
            log.push(format!("stability {label}: time {score:.6}"));
            outcome.time = Some(score);
        }
        Err(e) => errors.push(format!("time: {e}")),
    }
    if !errors.is_empty() {
        let joined = errors.join("; ");
        log.push(format!("stability {label}: FAILED: {joined}"));
        outcome.error = Some(joined);
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{RandomParams, SaParams, SplitConfig};
    use crate::selection::{RpsParams, SaSchedule};
    use crate::synthetic::{two_block_market, TwoBlockSpec};
    use crate::embedding::WalkConfig;

    fn small_market() -> PriceMatrix {
        let spec = TwoBlockSpec { block_size: 5, periods: 160, ..TwoBlockSpec::default() };
        two_block_market(&spec, 77).unwrap()
    }

    fn small_rps() -> RpsParams {
        RpsParams {
            k: 2,
            walk: WalkConfig {
                walk_length: 10,
                walks_per_node: 8,
                embedding_dim: 8,
                window: 3,
                negative_samples: 3,
                epochs: 3,
                ..WalkConfig::default()
            },
            ..RpsParams::default()
        }
    }

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            split: SplitConfig { train: [0, 120], test: [120, 161] },
            strategies: vec![StrategyConfig::Random(RandomParams { subset_size: 4 })],
            weighters: vec![WeighterConfig::Mvo { objective: ObjectivePick::MaxSharpe }],
            top_k: 3,
            rnd_repeats: 10,
            sa_repeats: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn random_mvo_smoke_run_produces_complete_reports() {
        let prices = small_market();
        let mut config = base_config();
        config.top_k = 1;
        config.stability.enabled = false;
        let artifacts = run_with_prices(&config, &prices).unwrap();
        // One RND+MVO cell plus the Vanilla MVO row.
        assert_eq!(artifacts.cells.len(), 2);
        let cell = &artifacts.cells[0];
        assert_eq!(cell.method, "RND+MVO");
        assert!(cell.error.is_none());
        assert_eq!(cell.portfolios.len(), 1);
        let p = &cell.portfolios[0];
        assert_eq!(p.rank, 1);
        assert!(p.train.risk >= 0.0);
        assert!(p.test.risk >= 0.0);
        assert!(p.train.sharpe.is_some());
        let vanilla = &artifacts.cells[1];
        assert_eq!(vanilla.method, "Vanilla MVO");
        assert_eq!(vanilla.portfolios.len(), 1);
        assert_eq!(vanilla.portfolios[0].subset.len(), 10);
        assert_eq!(artifacts.failure_count(), 0);
    }

    #[test]
    fn ranked_lists_are_sorted_and_truncated() {
        let prices = small_market();
        let mut config = base_config();
        config.rnd_repeats = 20;
        config.stability.enabled = false;
        let artifacts = run_with_prices(&config, &prices).unwrap();
        let cell = &artifacts.cells[0];
        assert!(cell.portfolios.len() <= 3);
        assert!(cell.portfolios.len() > 1);
        for pair in cell.portfolios.windows(2) {
            let a = pair[0].train.sharpe.unwrap_or(f64::NEG_INFINITY);
            let b = pair[1].train.sharpe.unwrap_or(f64::NEG_INFINITY);
            assert!(a >= b, "ranking out of order: {a} then {b}");
        }
        for (i, p) in cell.portfolios.iter().enumerate() {
            assert_eq!(p.rank, i + 1);
        }
    }

    #[test]
    fn identical_configs_produce_identical_artifacts() {
        let prices = small_market();
        let mut config = base_config();
        config.strategies = vec![
            StrategyConfig::Rps(small_rps()),
            StrategyConfig::Random(RandomParams { subset_size: 4 }),
        ];
        config.weighters =
            vec![WeighterConfig::Mvo { objective: ObjectivePick::MaxSharpe }, WeighterConfig::Hrp];
        let a = run_with_prices(&config, &prices).unwrap();
        let b = run_with_prices(&config, &prices).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn stability_runs_for_structural_strategies_and_skips_others() {
        let prices = small_market();
        let mut config = base_config();
        config.strategies = vec![
            StrategyConfig::Mantegna,
            StrategyConfig::Random(RandomParams { subset_size: 4 }),
        ];
        let artifacts = run_with_prices(&config, &prices).unwrap();
        assert_eq!(artifacts.stability.len(), 2);
        let mtn = &artifacts.stability[0];
        assert_eq!(mtn.strategy, "MTN");
        assert!(mtn.noise.is_some());
        assert!(mtn.time.is_some());
        assert!(mtn.skip_reason.is_none());
        let rnd = &artifacts.stability[1];
        assert!(rnd.noise.is_none());
        assert!(rnd.skip_reason.is_some());
        assert!(artifacts.log.iter().any(|l| l.contains("skipped")));
    }

    #[test]
    fn sa_forms_a_single_cell_without_weighters() {
        let prices = small_market();
        let mut config = base_config();
        config.strategies = vec![StrategyConfig::Sa(SaParams {
            subset_size: 3,
            schedule: SaSchedule { iters: 300, ..SaSchedule::default() },
        })];
        config.weighters =
            vec![WeighterConfig::Mvo { objective: ObjectivePick::MaxSharpe }, WeighterConfig::Hrp];
        config.stability.enabled = false;
        let artifacts = run_with_prices(&config, &prices).unwrap();
        // SA cell once, then Vanilla MVO and Vanilla HRP.
        assert_eq!(artifacts.cells.len(), 3);
        assert_eq!(artifacts.cells[0].method, "SA");
        assert_eq!(artifacts.cells[0].weighter, "");
        assert!(artifacts.cells[0].portfolios.len() <= config.top_k);
        assert!(!artifacts.cells[0].portfolios.is_empty());
    }

    #[test]
    fn cla_cells_carry_a_frontier_for_the_top_portfolio() {
        let prices = small_market();
        let mut config = base_config();
        config.weighters = vec![WeighterConfig::Cla { pick: ObjectivePick::MaxSharpe }];
        config.stability.enabled = false;
        let artifacts = run_with_prices(&config, &prices).unwrap();
        let cell = &artifacts.cells[0];
        assert!(cell.error.is_none());
        assert!(!cell.frontier.is_empty());
        for p in &cell.frontier {
            assert!(p.risk >= 0.0);
        }
    }

    #[test]
    fn bad_split_is_a_config_error() {
        let prices = small_market();
        let mut config = base_config();
        config.split = SplitConfig { train: [0, 120], test: [120, 999] };
        assert!(run_with_prices(&config, &prices).is_err());
    }

    #[test]
    fn duplicate_strategy_labels_are_disambiguated() {
        let labels = disambiguate(vec!["RPS", "RND", "RPS"]);
        assert_eq!(labels, vec!["RPS#1", "RND", "RPS#2"]);
    }

    #[test]
    fn selection_stage_returns_pools_and_isolates_failures() {
        let prices = small_market();
        let mut config = base_config();
        config.strategies = vec![
            StrategyConfig::Random(RandomParams { subset_size: 4 }),
            // Asks for more assets than the universe holds: must fail alone.
            StrategyConfig::Random(RandomParams { subset_size: 99 }),
        ];
        let stage = select_with_prices(&config, &prices, Vec::new()).unwrap();
        assert_eq!(stage.strategies.len(), 1);
        assert_eq!(stage.strategies[0].label, "RND#1");
        assert!(!stage.strategies[0].subsets.is_empty());
        assert_eq!(stage.failures.len(), 1);
        assert_eq!(stage.failures[0].0, "RND#2");
    }

    #[test]
    fn run_artifacts_keep_full_selection_pools() {
        let prices = small_market();
        let mut config = base_config();
        config.rnd_repeats = 20;
        config.top_k = 2;
        config.stability.enabled = false;
        let artifacts = run_with_prices(&config, &prices).unwrap();
        assert_eq!(artifacts.selections.len(), 1);
        let pool = &artifacts.selections[0];
        assert_eq!(pool.label, "RND");
        // The pool keeps everything; the cell is truncated to top_k.
        assert!(pool.subsets.len() > artifacts.cells[0].portfolios.len());
    }

    #[test]
    fn pooled_seeds_keep_one_cell_per_method() {
        let prices = small_market();
        let mut config = base_config();
        config.seeds = vec![1, 2, 3];
        config.stability.enabled = false;
        let artifacts = run_with_prices(&config, &prices).unwrap();
        assert_eq!(artifacts.cells.len(), 2);
        let cell = &artifacts.cells[0];
        assert!(cell.portfolios.len() <= config.top_k);
        // Subsets from different seeds carry their own provenance.
        let seeds: std::collections::BTreeSet<u64> =
            cell.portfolios.iter().map(|p| p.subset.provenance().seed).collect();
        assert!(!seeds.is_empty());
    }
}
