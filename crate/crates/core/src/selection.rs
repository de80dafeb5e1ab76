//! Selection strategies: the embedding pipeline (RPS), the spanning-tree
//! community baseline (Mantegna), uniform random subsets, and simulated
//! annealing over (subset, weights) states.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::clustering::{fuzzy_cmeans, kmeans, memberships_to_subsets};
use crate::embedding::{generate_walks, train_embeddings, EmbeddingMatrix, WalkConfig, WalkCorpus};
use crate::error::{Error, Result};
use crate::graph::{build_rps_graph, kruskal_mst, louvain_communities, WeightedGraph};
use crate::market::{CorrelationMatrix, ReturnMatrix};
use crate::seeding::{derive_seed, rng_from};
use crate::weighting::PortfolioWeights;

const CLUSTER_MAX_ITER: usize = 300;
const CLUSTER_TOL: f64 = 1e-8;

/// Where a subset came from: strategy tag, master seed, and a short
/// discriminator such as `cluster=0` or `draw=17`. Full strategy parameters
/// live in [`SelectionResult::config_echo`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub strategy: String,
    pub seed: u64,
    pub params: String,
}

impl Provenance {
    pub fn new(strategy: &str, seed: u64, params: &str) -> Self {
        Self { strategy: strategy.to_string(), seed, params: params.to_string() }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.is_empty() {
            write!(f, "{}[seed={}]", self.strategy, self.seed)
        } else {
            write!(f, "{}[seed={},{}]", self.strategy, self.seed, self.params)
        }
    }
}

/// A candidate portfolio: at least two distinct assets, plus provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssetSubset {
    assets: BTreeSet<String>,
    provenance: Provenance,
}

impl AssetSubset {
    /// Duplicate names collapse; fewer than two distinct assets is an error
    /// because no weighter downstream can allocate over a singleton.
    pub fn new(assets: Vec<String>, provenance: Provenance) -> Result<Self> {
        let set: BTreeSet<String> = assets.into_iter().collect();
        if set.len() < 2 {
            return Err(Error::TooFew { what: "subset assets", needed: 2, got: set.len() });
        }
        Ok(Self { assets: set, provenance })
    }

    pub fn assets(&self) -> &BTreeSet<String> {
        &self.assets
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn contains(&self, asset: &str) -> bool {
        self.assets.contains(asset)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Set equality, ignoring provenance.
    pub fn same_assets(&self, other: &AssetSubset) -> bool {
        self.assets == other.assets
    }
}

/// Output of one strategy run. Duplicate subsets (set equality) are dropped
/// at construction, keeping the first occurrence; drops are recorded in
/// `notes` alongside any stage messages worth surfacing in the run log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    strategy: String,
    subsets: Vec<AssetSubset>,
    config_echo: String,
    notes: Vec<String>,
}

impl SelectionResult {
    pub fn new(strategy: &str, subsets: Vec<AssetSubset>, config_echo: String) -> Self {
        Self::with_notes(strategy, subsets, config_echo, Vec::new())
    }

    fn with_notes(
        strategy: &str,
        subsets: Vec<AssetSubset>,
        config_echo: String,
        mut notes: Vec<String>,
    ) -> Self {
        let mut unique: Vec<AssetSubset> = Vec::with_capacity(subsets.len());
        let mut dropped = 0usize;
        for s in subsets {
            if unique.iter().any(|u| u.same_assets(&s)) {
                dropped += 1;
            } else {
                unique.push(s);
            }
        }
        if dropped > 0 {
            notes.push(format!("dropped {dropped} duplicate subset(s)"));
        }
        Self { strategy: strategy.to_string(), subsets: unique, config_echo, notes }
    }

    pub fn strategy(&self) -> &str {
        &self.strategy
    }

    pub fn subsets(&self) -> &[AssetSubset] {
        &self.subsets
    }

    pub fn config_echo(&self) -> &str {
        &self.config_echo
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }
}

/// Clustering stage of the RPS pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans,
    Fcm { fuzzifier: f64, threshold: f64 },
}

impl ClusterMethod {
    fn tag(&self) -> String {
        match self {
            ClusterMethod::Kmeans => "kmeans".to_string(),
            ClusterMethod::Fcm { fuzzifier, threshold } => {
                format!("fcm(m={fuzzifier},threshold={threshold})")
            }
        }
    }
}

/// Full parameter set for [`rps_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpsParams {
    /// Cap on the anti-correlation edge weight (hit at rho = 0).
    pub edge_cap: f64,
    pub walk: WalkConfig,
    pub method: ClusterMethod,
    /// Number of clusters, i.e. candidate subsets before size filtering.
    pub k: usize,
}

impl Default for RpsParams {
    fn default() -> Self {
        Self {
            edge_cap: 1e6,
            walk: WalkConfig::default(),
            method: ClusterMethod::Kmeans,
            k: 4,
        }
    }
}

/// Intermediate pipeline products, exposed so a run can dump them.
#[derive(Debug, Clone)]
pub struct RpsArtifacts {
    pub graph: WeightedGraph,
    pub corpus: WalkCorpus,
    pub embedding: EmbeddingMatrix,
}

/// Anti-correlation graph -> weighted walks -> skip-gram embeddings ->
/// clustering. Embedding rows are length-normalized before clustering so
/// cluster geometry follows co-visitation (direction) rather than node
/// visit frequency (norm). Clusters with fewer than two assets are dropped
/// and noted.
pub fn rps_select(corr: &CorrelationMatrix, params: &RpsParams, seed: u64) -> Result<SelectionResult> {
    rps_select_with_artifacts(corr, params, seed).map(|(result, _)| result)
}

pub fn rps_select_with_artifacts(
    corr: &CorrelationMatrix,
    params: &RpsParams,
    seed: u64,
) -> Result<(SelectionResult, RpsArtifacts)> {
    let graph = build_rps_graph(corr, params.edge_cap)?;
    let mut walk_cfg = params.walk.clone();
    walk_cfg.seed = derive_seed(seed, "rps-embed", 0);
    let corpus = generate_walks(&graph, &walk_cfg)?;
    let embedding = train_embeddings(&corpus, &walk_cfg)?;
    let unit = embedding.normalize_rows();

    let cluster_seed = derive_seed(seed, "rps-cluster", 0);
    let groups: Vec<Vec<usize>> = match params.method {
        ClusterMethod::Kmeans => {
            let assignment = kmeans(&unit, params.k, cluster_seed, CLUSTER_MAX_ITER, CLUSTER_TOL)?;
            let mut groups = vec![Vec::new(); params.k];
            for (i, &c) in assignment.labels.iter().enumerate() {
                groups[c].push(i);
            }
            groups
        }
        ClusterMethod::Fcm { fuzzifier, threshold } => {
            let fm = fuzzy_cmeans(
                &unit,
                params.k,
                fuzzifier,
                cluster_seed,
                CLUSTER_MAX_ITER,
                CLUSTER_TOL,
            )?;
            memberships_to_subsets(&fm, threshold)?
        }
    };

    let echo = format!(
        "k={},method={},edge_cap={},dim={},walk_length={},walks_per_node={},window={},epochs={}",
        params.k,
        params.method.tag(),
        params.edge_cap,
        params.walk.embedding_dim,
        params.walk.walk_length,
        params.walk.walks_per_node,
        params.walk.window,
        params.walk.epochs,
    );
    let mut notes = Vec::new();
    let subsets = groups_to_subsets(corr.assets(), &groups, "rps", seed, "cluster", &mut notes)?;
    let result = SelectionResult::with_notes("rps", subsets, echo, notes);
    Ok((result, RpsArtifacts { graph, corpus, embedding }))
}

/// Kruskal spanning tree over Mantegna distances, then Louvain communities.
/// Groups CORRELATED assets, the opposite direction of [`rps_select`];
/// surfaced as-is as the classical baseline.
pub fn mantegna_select(corr: &CorrelationMatrix, seed: u64) -> Result<SelectionResult> {
    let tree = kruskal_mst(corr)?;
    let partition = louvain_communities(&tree, derive_seed(seed, "louvain", 0));
    let echo = format!("communities={}", partition.communities.len());
    let mut notes = Vec::new();
    let subsets = groups_to_subsets(
        corr.assets(),
        &partition.communities,
        "mantegna",
        seed,
        "community",
        &mut notes,
    )?;
    Ok(SelectionResult::with_notes("mantegna", subsets, echo, notes))
}

fn groups_to_subsets(
    assets: &[String],
    groups: &[Vec<usize>],
    strategy: &str,
    seed: u64,
    tag: &str,
    notes: &mut Vec<String>,
) -> Result<Vec<AssetSubset>> {
    let mut out = Vec::new();
    for (gi, group) in groups.iter().enumerate() {
        if group.len() < 2 {
            notes.push(format!(
                "dropped {tag} {gi} with {} asset(s); weighters need at least 2",
                group.len()
            ));
            continue;
        }
        let names: Vec<String> = group.iter().map(|&i| assets[i].clone()).collect();
        out.push(AssetSubset::new(
            names,
            Provenance::new(strategy, seed, &format!("{tag}={gi}")),
        )?);
    }
    Ok(out)
}

/// `count` uniform draws of `subset_size` distinct assets each. Draws that
/// repeat an earlier asset set collapse in the result (noted), so the
/// returned list can be shorter than `count`.
pub fn random_select(
    universe: &[String],
    subset_size: usize,
    count: usize,
    seed: u64,
) -> Result<SelectionResult> {
    let n = universe.len();
    if subset_size < 2 || subset_size > n {
        return Err(Error::InvalidParameter(format!(
            "subset_size {subset_size} must be in [2, {n}]"
        )));
    }
    if count < 1 {
        return Err(Error::InvalidParameter("count must be >= 1".into()));
    }
    let mut rng = rng_from(derive_seed(seed, "random-select", 0));
    let mut subsets = Vec::with_capacity(count);
    for draw in 0..count {
        let names: Vec<String> =
            index::sample(&mut rng, n, subset_size).iter().map(|i| universe[i].clone()).collect();
        subsets.push(AssetSubset::new(
            names,
            Provenance::new("random", seed, &format!("draw={draw}")),
        )?);
    }
    let echo = format!("subset_size={subset_size},count={count}");
    Ok(SelectionResult::new("random", subsets, echo))
}

/// Annealing schedule: start temperature, geometric decay per iteration,
/// and iteration count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub iters: usize,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self { t0: 1.0, cooling: 0.995, iters: 20_000 }
    }
}

impl SaSchedule {
    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::InvalidParameter(format!("t0 {} must be positive", self.t0)));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cooling {} must be in (0, 1)",
                self.cooling
            )));
        }
        if self.iters < 1 {
            return Err(Error::InvalidParameter("iters must be >= 1".into()));
        }
        Ok(())
    }
}

// Dirichlet concentration around the current weights; higher stays closer.
const SA_DIRICHLET_CONC: f64 = 100.0;
const SA_DIRICHLET_SMOOTH: f64 = 0.5;
// Floor keeps the Sharpe objective finite on (near-)constant series.
const SA_STD_FLOOR: f64 = 1e-12;

/// Simulated annealing over (subset, weights) states. Moves swap one asset
/// (the incoming asset inherits the outgoing weight) or resample weights
/// from a Dirichlet centred on the current ones, with equal probability.
/// The objective is the in-sample per-period Sharpe ratio (mean over
/// standard deviation); acceptance is Metropolis `exp(delta / T)` with
/// geometric cooling. Returns the best state seen, weights included; this
/// strategy is one-phased and needs no separate weighter.
pub fn sa_select(
    returns: &ReturnMatrix,
    subset_size: usize,
    schedule: &SaSchedule,
    seed: u64,
) -> Result<(SelectionResult, PortfolioWeights)> {
    let (members, weights, objective, _) = sa_run(returns, subset_size, schedule, seed)?;
    let names: Vec<String> =
        members.iter().map(|&i| returns.assets()[i].clone()).collect();
    let echo = format!(
        "subset_size={subset_size},t0={},cooling={},iters={},objective=train_sharpe,best={objective:.6}",
        schedule.t0, schedule.cooling, schedule.iters
    );
    let subset = AssetSubset::new(names.clone(), Provenance::new("sa", seed, "best"))?;
    let result = SelectionResult::new("sa", vec![subset], echo);
    // Names follow member-index order, which need not be alphabetical;
    // PortfolioWeights pairs each weight with its asset name explicitly.
    let weights = PortfolioWeights::new(names, weights)?;
    Ok((result, weights))
}

/// Core anneal; also returns the sequence of objectives after each accepted
/// move so tests can check monotonicity in the zero-temperature limit.
fn sa_run(
    returns: &ReturnMatrix,
    subset_size: usize,
    schedule: &SaSchedule,
    seed: u64,
) -> Result<(Vec<usize>, Vec<f64>, f64, Vec<f64>)> {
    let n = returns.n_assets();
    if subset_size < 2 || subset_size > n {
        return Err(Error::InvalidParameter(format!(
            "subset_size {subset_size} must be in [2, {n}]"
        )));
    }
    if returns.n_rows() < 2 {
        return Err(Error::TooFew { what: "return rows", needed: 2, got: returns.n_rows() });
    }
    schedule.validate()?;

    let mut rng = rng_from(derive_seed(seed, "sa", 0));
    let mut members: Vec<usize> = index::sample(&mut rng, n, subset_size).into_iter().collect();
    members.sort_unstable();
    let mut weights = vec![1.0 / subset_size as f64; subset_size];
    let mut objective = sa_objective(returns, &members, &weights);

    let mut best = (members.clone(), weights.clone(), objective);
    let mut accepted = vec![objective];
    let mut temperature = schedule.t0;

    for _ in 0..schedule.iters {
        let (cand_members, cand_weights) = propose(&mut rng, n, &members, &weights);
        let cand_objective = sa_objective(returns, &cand_members, &cand_weights);
        let delta = cand_objective - objective;
        let accept = delta >= 0.0 || rng.random::<f64>() < (delta / temperature).exp();
        if accept {
            members = cand_members;
            weights = cand_weights;
            objective = cand_objective;
            accepted.push(objective);
            if objective > best.2 {
                best = (members.clone(), weights.clone(), objective);
            }
        }
        temperature *= schedule.cooling;
    }

    Ok((best.0, best.1, best.2, accepted))
}

fn propose(
    rng: &mut impl Rng,
    n: usize,
    members: &[usize],
    weights: &[f64],
) -> (Vec<usize>, Vec<f64>) {
    let swap_possible = members.len() < n;
    if swap_possible && rng.random::<f64>() < 0.5 {
        let out_pos = rng.random_range(0..members.len());
        let outsiders: Vec<usize> = (0..n).filter(|i| !members.contains(i)).collect();
        let incoming = outsiders[rng.random_range(0..outsiders.len())];
        let mut m = members.to_vec();
        let mut w = weights.to_vec();
        let transferred = w[out_pos];
        m.remove(out_pos);
        w.remove(out_pos);
        let at = m.partition_point(|&x| x < incoming);
        m.insert(at, incoming);
        w.insert(at, transferred);
        (m, w)
    } else {
        let mut draw: Vec<f64> = weights
            .iter()
            .map(|&w| {
                Gamma::new(w * SA_DIRICHLET_CONC + SA_DIRICHLET_SMOOTH, 1.0)
                    .expect("positive shape")
                    .sample(rng)
            })
            .collect();
        let total: f64 = draw.iter().sum();
        if total > 0.0 {
            for d in &mut draw {
                *d /= total;
            }
            (members.to_vec(), draw)
        } else {
            (members.to_vec(), weights.to_vec())
        }
    }
}

/// Per-period Sharpe of the weighted subset over the whole return window.
fn sa_objective(returns: &ReturnMatrix, members: &[usize], weights: &[f64]) -> f64 {
    let r = returns.values();
    let t = r.nrows();
    let mut mean = 0.0;
    let mut series = Vec::with_capacity(t);
    for row in 0..t {
        let v: f64 = members.iter().zip(weights).map(|(&i, &w)| w * r[(row, i)]).sum();
        mean += v;
        series.push(v);
    }
    mean /= t as f64;
    let var: f64 =
        series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t as f64 - 1.0);
    mean / var.sqrt().max(SA_STD_FLOOR)
}
