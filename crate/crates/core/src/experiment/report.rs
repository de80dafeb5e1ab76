//! Report emission: delimited-text tables, plot-point files, the run log,
//! and a structured JSON document mirroring the full artifacts.
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! a rerun either fully replaces a file or leaves the old one intact.
//! Output bytes are a pure function of the artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::PerformanceReport;
use crate::weighting::PortfolioWeights;

use super::runner::{RunArtifacts, StabilityOutcome, StrategySubsets};

pub const PERFORMANCE_HEADER: &str =
    "Method,Correlation,Return,Risk,Sharpe Ratio,Information Ratio,M2";

fn ensure_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)
        .map_err(|source| Error::Io { path: out_dir.display().to_string(), source })
}

fn write_file(out_dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let path = out_dir.join(name);
    atomic_write(&path, content)?;
    Ok(path)
}

/// Writes every report file into `out_dir` (created if missing) and returns
/// the paths written, in emission order.
pub fn emit_reports(artifacts: &RunArtifacts, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![
        write_performance_csv(artifacts, out_dir)?,
        write_portfolios_csv(artifacts, out_dir)?,
        write_subsets_csv(&artifacts.selections, out_dir)?,
        write_weights_csv(artifacts, out_dir)?,
    ];
    written.extend(write_stability_csvs(&artifacts.stability, out_dir)?);
    written.extend(write_frontier_csvs(artifacts, out_dir)?);
    written.push(write_file(out_dir, "run.log", &run_log(artifacts))?);
    let json = serde_json::to_string_pretty(artifacts)
        .map_err(|e| Error::Parse(format!("serializing run document: {e}")))?;
    written.push(write_file(out_dir, "run.json", &(json + "\n"))?);
    Ok(written)
}

/// The performance table: one data row per cell, carrying the rank-1
/// portfolio's test metrics. Failed cells appear only in the run log.
pub fn write_performance_csv(artifacts: &RunArtifacts, out_dir: &Path) -> Result<PathBuf> {
    write_file(out_dir, "performance.csv", &performance_table(artifacts))
}

/// Full ranked detail for every kept portfolio, train and test windows.
pub fn write_portfolios_csv(artifacts: &RunArtifacts, out_dir: &Path) -> Result<PathBuf> {
    write_file(out_dir, "portfolios.csv", &portfolios_table(artifacts)?)
}

/// Selection-stage dump, one line per subset.
pub fn write_subsets_csv(strategies: &[StrategySubsets], out_dir: &Path) -> Result<PathBuf> {
    write_file(out_dir, "subsets.csv", &subsets_dump(strategies))
}

/// Weight dump for every ranked portfolio.
pub fn write_weights_csv(artifacts: &RunArtifacts, out_dir: &Path) -> Result<PathBuf> {
    write_file(out_dir, "weights.csv", &weights_dump(artifacts)?)
}

/// Stability tables, one file per test; header-only when nothing scored.
pub fn write_stability_csvs(
    outcomes: &[StabilityOutcome],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_file(out_dir, "stability_noise.csv", &stability_table(outcomes, |s| s.noise))?,
        write_file(out_dir, "stability_time.csv", &stability_table(outcomes, |s| s.time))?,
    ])
}

/// One frontier plot file per method that traced a frontier.
pub fn write_frontier_csvs(artifacts: &RunArtifacts, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for cell in &artifacts.cells {
        if cell.frontier.is_empty() {
            continue;
        }
        let mut text = String::from("expected_return,risk\n");
        for p in &cell.frontier {
            let _ = writeln!(text, "{:.6},{:.6}", p.expected_return, p.risk);
        }
        written.push(write_file(out_dir, &format!("frontier_{}.csv", slug(&cell.method)), &text)?);
    }
    Ok(written)
}

fn performance_table(artifacts: &RunArtifacts) -> String {
    let mut text = String::from(PERFORMANCE_HEADER);
    text.push('\n');
    for cell in &artifacts.cells {
        let Some(top) = cell.portfolios.first() else { continue };
        let _ = writeln!(text, "{},{}", cell.method, metric_row(&top.test));
    }
    text
}

/// Full ranked detail: every kept portfolio, train and test windows.
fn portfolios_table(artifacts: &RunArtifacts) -> Result<String> {
    let mut text = String::from(
        "Method,Rank,Window,Correlation,Return,Risk,Sharpe Ratio,Information Ratio,M2,Assets\n",
    );
    for cell in &artifacts.cells {
        for p in &cell.portfolios {
            validate_weights(&p.weights)?;
            let assets = p
                .subset
                .assets()
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
                .join(";");
            for (window, report) in [("train", &p.train), ("test", &p.test)] {
                let _ = writeln!(
                    text,
                    "{},{},{window},{},{assets}",
                    cell.method,
                    p.rank,
                    metric_row(report)
                );
            }
        }
    }
    Ok(text)
}

/// One line per distinct selected subset, "strategy,seed,asset1;asset2;...".
fn subsets_dump(strategies: &[StrategySubsets]) -> String {
    let mut lines: Vec<String> = Vec::new();
    for pool in strategies {
        for subset in &pool.subsets {
            let prov = subset.provenance();
            let assets =
                subset.assets().iter().map(String::as_str).collect::<Vec<_>>().join(";");
            let line = format!("{},{},{assets}", prov.strategy, prov.seed);
            if !lines.contains(&line) {
                lines.push(line);
            }
        }
    }
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    text
}

/// "strategy,weighter,asset,weight" rows; the strategy field carries the
/// rank so the top-k portfolios of one cell stay distinguishable.
fn weights_dump(artifacts: &RunArtifacts) -> Result<String> {
    let mut text = String::from("strategy,weighter,asset,weight\n");
    for cell in &artifacts.cells {
        // One-phased strategies weight themselves.
        let weighter = if cell.weighter.is_empty() { &cell.strategy } else { &cell.weighter };
        for p in &cell.portfolios {
            validate_weights(&p.weights)?;
            for (asset, w) in p.weights.assets().iter().zip(p.weights.weights()) {
                let _ = writeln!(
                    text,
                    "{}#{},{weighter},{asset},{w:.6}",
                    cell.strategy, p.rank
                );
            }
        }
    }
    Ok(text)
}

fn stability_table(
    outcomes: &[StabilityOutcome],
    score: impl Fn(&StabilityOutcome) -> Option<f64>,
) -> String {
    let mut text = String::from("strategy,score\n");
    for s in outcomes {
        if let Some(v) = score(s) {
            let _ = writeln!(text, "{},{:.6}", s.strategy, v);
        }
    }
    text
}

fn run_log(artifacts: &RunArtifacts) -> String {
    let mut text = artifacts.log.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    text
}

/// Optional pipeline dumps, present only when the run kept RPS artifacts.
/// Graph: header-less "i,j,weight" edge list. Corpus: one walk per line,
/// space-separated asset identifiers. Embedding: identifier then the d
/// coordinates, space-separated.
pub fn emit_dumps(artifacts: &RunArtifacts, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let Some(rps) = &artifacts.rps_artifacts else {
        return Ok(Vec::new());
    };
    let output = &artifacts.config.output;
    let mut written = Vec::new();

    if output.dump_graph {
        let mut text = String::new();
        for (i, j, w) in rps.graph.edge_list() {
            let _ = writeln!(text, "{i},{j},{w:.6}");
        }
        written.push(write_file(out_dir, "graph.csv", &text)?);
    }
    if output.dump_corpus {
        let assets = rps.corpus.assets();
        let mut text = String::new();
        for walk in rps.corpus.walks() {
            let line: Vec<&str> = walk.iter().map(|&i| assets[i].as_str()).collect();
            let _ = writeln!(text, "{}", line.join(" "));
        }
        written.push(write_file(out_dir, "corpus.txt", &text)?);
    }
    if output.dump_embedding {
        let mut text = String::new();
        for (i, asset) in rps.embedding.assets().iter().enumerate() {
            let coords: Vec<String> =
                rps.embedding.vector(i).iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(text, "{asset} {}", coords.join(" "));
        }
        written.push(write_file(out_dir, "embedding.txt", &text)?);
    }
    Ok(written)
}

fn metric_row(report: &PerformanceReport) -> String {
    format!(
        "{:.6},{:.6},{:.6},{},{},{}",
        report.avg_pairwise_correlation,
        report.total_return,
        report.risk,
        optional(report.sharpe),
        optional(report.information_ratio),
        optional(report.m2),
    )
}

/// Ratios with a zero-variance denominator render as an explicit marker.
fn optional(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "undefined".to_string(),
    }
}

fn validate_weights(weights: &PortfolioWeights) -> Result<()> {
    // Re-validates the invariants at emission time; construction enforces
    // them, so this guards against future non-validating paths.
    PortfolioWeights::new(weights.assets().to_vec(), weights.weights().to_vec()).map(|_| ())
}

fn slug(method: &str) -> String {
    method
        .chars()
        .map(|c| match c {
            'A'..='Z' => c.to_ascii_lowercase(),
            'a'..='z' | '0'..='9' => c,
            _ => '-',
        })
        .collect::<String>()
        .split('-')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let dir = path.parent().ok_or_else(|| Error::Parse(format!(
        "output path {} has no parent directory",
        path.display()
    )))?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Parse(format!("bad output file name {}", path.display())))?;
    let tmp = dir.join(format!(".{file_name}.tmp"));
    fs::write(&tmp, content).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}
