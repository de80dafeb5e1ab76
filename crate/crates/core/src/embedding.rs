//! Weighted random walks over the asset graph and skip-gram embedding
//! training on the resulting corpus.
//!
//! Walks step to neighbor j of node i with probability w_ij / sum_k w_ik,
//! so heavily weighted (anti-correlated) pairs are co-visited often. The
//! trainer then pulls co-visited nodes together in embedding space.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::seeding::{derive_seed, rng_from};

/// Hyperparameters for walk generation and embedding training.
///
/// `return_param` (p) and `inout_param` (q) bias the walk away from or
/// toward the previous node; both default to 1, which reduces to the
/// plain first-order transition law.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    /// Steps per walk; a walk visits walk_length + 1 nodes.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub embedding_dim: usize,
    /// Context window radius for skip-gram pairs.
    pub window: usize,
    pub negative_samples: usize,
    /// Zero epochs skips training and returns the seeded initialization.
    pub epochs: usize,
    pub learning_rate: f64,
    pub return_param: f64,
    pub inout_param: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walk_length: 20,
            walks_per_node: 10,
            embedding_dim: 32,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            return_param: 1.0,
            inout_param: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("walk_length", self.walk_length),
            ("walks_per_node", self.walks_per_node),
            ("embedding_dim", self.embedding_dim),
            ("window", self.window),
            ("negative_samples", self.negative_samples),
        ] {
            if v < 1 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 1")));
            }
        }
        if self.window > self.walk_length {
            return Err(Error::InvalidParameter(format!(
                "window {} exceeds walk_length {}",
                self.window, self.walk_length
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        for (name, v) in [("return_param", self.return_param), ("inout_param", self.inout_param)]
        {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Walk corpus: `walks_per_node` sequences per start node, grouped by start
/// node in index order (walk `node * walks_per_node + rep` starts at
/// `node`). Each walk holds `walk_length + 1` node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    assets: Vec<String>,
    walks: Vec<Vec<usize>>,
}

impl WalkCorpus {
    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_nodes(&self) -> usize {
        self.assets.len()
    }

    pub fn walks(&self) -> &[Vec<usize>] {
        &self.walks
    }
}

/// Per-asset embedding vectors, row-major `N x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    assets: Vec<String>,
    dim: usize,
    vectors: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds an embedding matrix from row-major vectors.
    pub fn from_vectors(assets: Vec<String>, dim: usize, vectors: Vec<f64>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidParameter("embedding dim must be >= 1".into()));
        }
        if vectors.len() != assets.len() * dim {
            return Err(Error::InvalidParameter(format!(
                "{} values cannot hold {} assets x {} dims",
                vectors.len(),
                assets.len(),
                dim
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite embedding entry".into()));
        }
        Ok(Self { assets, dim, vectors })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Copy with every row scaled to unit Euclidean norm, so distances
    /// between rows depend only on direction (cosine geometry). Skip-gram
    /// norms grow with node visit frequency; that spread carries no
    /// co-occurrence signal and swamps row-to-row distances if left in.
    /// Zero rows are returned unchanged.
    pub fn normalize_rows(&self) -> EmbeddingMatrix {
        let mut vectors = self.vectors.clone();
        for row in vectors.chunks_mut(self.dim) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in row {
                    *x /= norm;
                }
            }
        }
        Self { assets: self.assets.clone(), dim: self.dim, vectors }
    }
}

/// Samples an index from `cumulative` (prefix sums of nonnegative weights).
fn sample_cumulative(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cumulative.last().expect("non-empty cumulative table");
    let r = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= r)
        .min(cumulative.len() - 1)
}

/// Generates `walks_per_node` weighted random walks from every node. Walk
/// RNGs are derived per (node, repetition), so the corpus is independent of
/// scheduling and fully determined by the config seed.
pub fn generate_walks(graph: &WeightedGraph, config: &WalkConfig) -> Result<WalkCorpus> {
    config.validate()?;
    let n = graph.n_nodes();
    let mut neighbors: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut cumulative: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let neigh = graph.neighbors(i);
        if neigh.is_empty() {
            return Err(Error::IsolatedNode(graph.assets()[i].clone()));
        }
        let mut cum = Vec::with_capacity(neigh.len());
        let mut acc = 0.0;
        for &(_, w) in &neigh {
            acc += w;
            cum.push(acc);
        }
        neighbors.push(neigh);
        cumulative.push(cum);
    }

    let first_order = config.return_param == 1.0 && config.inout_param == 1.0;
    let mut walks = Vec::with_capacity(n * config.walks_per_node);
    let mut biased = Vec::new();
    for start in 0..n {
        for rep in 0..config.walks_per_node {
            let child = derive_seed(
                config.seed,
                "walk",
                (start * config.walks_per_node + rep) as u64,
            );
            let mut rng = rng_from(child);
            let mut walk = Vec::with_capacity(config.walk_length + 1);
            walk.push(start);
            let mut prev: Option<usize> = None;
            let mut current = start;
            for _ in 0..config.walk_length {
                let next = if let (false, Some(back)) = (first_order, prev) {
                    biased.clear();
                    let mut acc = 0.0;
                    for &(cand, w) in &neighbors[current] {
                        let bias = if cand == back {
                            1.0 / config.return_param
                        } else if graph.weight(back, cand) > 0.0 {
                            1.0
                        } else {
                            1.0 / config.inout_param
                        };
                        acc += w * bias;
                        biased.push(acc);
                    }
                    let pick = sample_cumulative(&biased, &mut rng);
                    neighbors[current][pick].0
                } else {
                    let pick = sample_cumulative(&cumulative[current], &mut rng);
                    neighbors[current][pick].0
                };
                walk.push(next);
                prev = Some(current);
                current = next;
            }
            walks.push(walk);
        }
    }
    Ok(WalkCorpus { assets: graph.assets().to_vec(), walks })
}

/// Trains skip-gram embeddings with negative sampling over the corpus.
///
/// A single shared matrix serves as both center and context representation,
/// so a positive (center, context) pair pulls the two vectors directly
/// together. The usual separate context matrix would instead make nodes
/// with SIMILAR NEIGHBORHOODS collide, which on this graph means members
/// of the same correlated block; the anti-correlation geometry needs
/// co-visited nodes to be the close ones.
///
/// Updates run in corpus order with a linearly decaying learning rate;
/// negatives are drawn from the unigram distribution raised to 3/4.
/// Draws equal to either endpoint of the pair are discarded.
pub fn train_embeddings(corpus: &WalkCorpus, config: &WalkConfig) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if corpus.walks.is_empty() {
        return Err(Error::TooFew { what: "corpus walks", needed: 1, got: 0 });
    }
    let n = corpus.n_nodes();
    let d = config.embedding_dim;

    let mut init_rng = rng_from(derive_seed(config.seed, "embed-init", 0));
    let span = 0.5 / d as f64;
    let mut emb: Vec<f64> = (0..n * d).map(|_| init_rng.random_range(-span..span)).collect();

    if config.epochs > 0 {
        let mut counts = vec![0u64; n];
        for walk in &corpus.walks {
            for &node in walk {
                counts[node] += 1;
            }
        }
        let mut noise_cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &c in &counts {
            acc += (c as f64).powf(0.75);
            noise_cum.push(acc);
        }

        let pairs_per_epoch: usize = corpus
            .walks
            .iter()
            .map(|walk| {
                let len = walk.len();
                (0..len)
                    .map(|t| t.min(config.window) + (len - 1 - t).min(config.window))
                    .sum::<usize>()
            })
            .sum();
        let total_pairs = (pairs_per_epoch * config.epochs).max(1) as f64;

        let mut rng = rng_from(derive_seed(config.seed, "embed-train", 0));
        let mut grad = vec![0.0f64; d];
        let mut processed = 0usize;
        for _ in 0..config.epochs {
            for walk in &corpus.walks {
                let len = walk.len();
                for t in 0..len {
                    let center = walk[t];
                    let lo = t.saturating_sub(config.window);
                    let hi = (t + config.window).min(len - 1);
                    for (c, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                        if c == t {
                            continue;
                        }
                        let lr = config.learning_rate
                            * (1.0 - processed as f64 / total_pairs).max(1e-4);
                        processed += 1;
                        if context == center {
                            continue;
                        }
                        grad.fill(0.0);
                        sgns_pair_update(
                            &mut emb, &mut grad, d, center, context, 1.0, lr,
                        );
                        for _ in 0..config.negative_samples {
                            let neg = sample_cumulative(&noise_cum, &mut rng);
                            if neg == center || neg == context {
                                continue;
                            }
                            sgns_pair_update(&mut emb, &mut grad, d, center, neg, 0.0, lr);
                        }
                        let base = center * d;
                        for (slot, g) in emb[base..base + d].iter_mut().zip(&grad) {
                            *slot += g;
                        }
                    }
                }
            }
        }
    }

    debug_assert!(emb.iter().all(|v| v.is_finite()));
    Ok(EmbeddingMatrix { assets: corpus.assets.clone(), dim: d, vectors: emb })
}

/// One gradient step on pair (center, target) with the given label. The
/// center update is accumulated into `grad` so all targets of one positive
/// pair see the same center vector; the target row updates in place.
#[inline]
fn sgns_pair_update(
    emb: &mut [f64],
    grad: &mut [f64],
    d: usize,
    center: usize,
    target: usize,
    label: f64,
    lr: f64,
) {
    let cb = center * d;
    let tb = target * d;
    let mut dot = 0.0;
    for k in 0..d {
        dot += emb[cb + k] * emb[tb + k];
    }
    let g = (label - sigmoid(dot)) * lr;
    for k in 0..d {
        grad[k] += g * emb[tb + k];
        emb[tb + k] += g * emb[cb + k];
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    // Clamp keeps exp() in a safe range; the gradient saturates anyway.
    let z = z.clamp(-16.0, 16.0);
    1.0 / (1.0 + (-z).exp())
}

/// Euclidean distance matrix between embedding rows; symmetric with a zero
/// diagonal.
pub fn embedding_distances(emb: &EmbeddingMatrix) -> nalgebra::DMatrix<f64> {
    let n = emb.n_assets();
    let mut out = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (emb.vector(i), emb.vector(j));
            let dist = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            out[(i, j)] = dist;
            out[(j, i)] = dist;
        }
    }
    out
}
