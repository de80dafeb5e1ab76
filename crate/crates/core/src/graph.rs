//! Anti-correlation asset graph, Mantegna distances, Kruskal MST, and
//! Louvain communities.
//!
//! The selection graph inverts the usual similarity convention: the LESS
//! two assets correlate, the HEAVIER the edge between them, so random walks
//! preferentially visit diversifying partners. Note that |coth| treats rho
//! and -rho alike, so strongly negatively correlated assets also get light
//! edges and count as "similar" here.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::market::CorrelationMatrix;
use crate::seeding::rng_from;

/// |coth(x)|, shared by the weight and its offset so they cancel exactly
/// at |rho| = 1 (a stored constant for coth(1) sits one ulp away from the
/// computed value and would leave a 2e-16 residue).
fn coth_abs(x: f64) -> f64 {
    1.0 / x.tanh().abs()
}

/// Edge weight `min(cap, |coth(rho)| - coth(1))`. The weight grows without
/// bound as rho approaches 0, so a cap keeps walk probabilities finite;
/// rho = 0 maps straight to the cap.
pub fn coth_weight(rho: f64, cap: f64) -> Result<f64> {
    check_rho(rho)?;
    if !cap.is_finite() || cap <= 0.0 {
        return Err(Error::InvalidParameter(format!("cap {cap} must be positive")));
    }
    if rho == 0.0 {
        return Ok(cap);
    }
    let w = (coth_abs(rho) - coth_abs(1.0)).max(0.0);
    Ok(w.min(cap))
}

/// Mantegna distance `sqrt(2 (1 - rho))`, in [0, 2].
pub fn mantegna_distance(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok((2.0 * (1.0 - rho)).max(0.0).sqrt())
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || !(-1.0..=1.0).contains(&rho) {
        return Err(Error::CorrelationOutOfRange(rho));
    }
    Ok(())
}

/// Undirected graph over the asset universe with nonnegative edge weights
/// and a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    assets: Vec<String>,
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    pub fn new(assets: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        let n = assets.len();
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::Parse(format!(
                "weight matrix is {}x{} for {} assets",
                weights.nrows(),
                weights.ncols(),
                n
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "self-weight at node {i} must be 0, got {}",
                    weights[(i, i)]
                )));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "edge weight ({i}, {j}) = {w} must be finite and nonnegative"
                    )));
                }
                if (w - weights[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotSymmetric { i, j, a: w, b: weights[(j, i)] });
                }
            }
        }
        Ok(Self { assets, weights })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_nodes(&self) -> usize {
        self.assets.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Neighbors of `i` with strictly positive weight, ascending by index.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.n_nodes())
            .filter(|&j| j != i && self.weights[(i, j)] > 0.0)
            .map(|j| (j, self.weights[(i, j)]))
            .collect()
    }

    /// Upper-triangle edges with positive weight, for dumps.
    pub fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.weights[(i, j)] > 0.0 {
                    edges.push((i, j, self.weights[(i, j)]));
                }
            }
        }
        edges
    }
}

/// Applies [`coth_weight`] to every off-diagonal correlation.
pub fn build_rps_graph(corr: &CorrelationMatrix, cap: f64) -> Result<WeightedGraph> {
    let n = corr.n_assets();
    let mut weights = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = coth_weight(corr.get(i, j), cap)?;
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
    }
    WeightedGraph::new(corr.assets().to_vec(), weights)
}

/// Minimum spanning tree edge: node indices with their Mantegna distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeEdge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// Spanning tree over the asset universe: exactly N-1 edges, connected.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    assets: Vec<String>,
    edges: Vec<TreeEdge>,
}

impl SpanningTree {
    pub fn new(assets: Vec<String>, edges: Vec<TreeEdge>) -> Result<Self> {
        let n = assets.len();
        if n < 2 {
            return Err(Error::TooFew { what: "tree nodes", needed: 2, got: n });
        }
        if edges.len() != n - 1 {
            return Err(Error::InvalidParameter(format!(
                "spanning tree over {n} nodes needs {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut uf = UnionFind::new(n);
        for e in &edges {
            if e.i >= n || e.j >= n || e.i == e.j {
                return Err(Error::InvalidParameter(format!(
                    "bad tree edge ({}, {})",
                    e.i, e.j
                )));
            }
            if !e.distance.is_finite() || e.distance < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "bad tree edge distance {}",
                    e.distance
                )));
            }
            if !uf.union(e.i, e.j) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) closes a cycle",
                    e.i, e.j
                )));
            }
        }
        Ok(Self { assets, edges })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_nodes(&self) -> usize {
        self.assets.len()
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn total_distance(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }
}

/// Kruskal MST on Mantegna distances over the complete correlation graph.
/// Equal-distance edges are taken in lexicographic (i, j) order, which
/// makes the tree unique for any input.
pub fn kruskal_mst(corr: &CorrelationMatrix) -> Result<SpanningTree> {
    let n = corr.n_assets();
    let mut candidates = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            candidates.push(TreeEdge { i, j, distance: mantegna_distance(corr.get(i, j))? });
        }
    }
    candidates.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for e in candidates {
        if uf.union(e.i, e.j) {
            edges.push(e);
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    SpanningTree::new(corr.assets().to_vec(), edges)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Disjoint node groups covering the whole tree. Each community is sorted
/// ascending; communities are ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityPartition {
    pub communities: Vec<Vec<usize>>,
}

const LOUVAIN_EPS: f64 = 1e-9;

/// Louvain modularity maximization over the MST, treating short distances
/// as strong links via similarity 1/(d + eps). Node visit order is shuffled
/// from the seed; everything else iterates in sorted order, so a fixed seed
/// fully determines the partition.
pub fn louvain_communities(tree: &SpanningTree, seed: u64) -> CommunityPartition {
    let n = tree.n_nodes();
    // adjacency[i]: neighbor -> weight; self-loops appear after aggregation.
    let mut adjacency: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for e in tree.edges() {
        let w = 1.0 / (e.distance + LOUVAIN_EPS);
        *adjacency[e.i].entry(e.j).or_insert(0.0) += w;
        *adjacency[e.j].entry(e.i).or_insert(0.0) += w;
    }

    // node_groups[c] lists the original nodes currently merged into
    // super-node c of the working graph.
    let mut node_groups: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut rng = rng_from(seed);

    loop {
        let (assignment, moved) = louvain_level(&adjacency, &mut rng);
        let n_communities = assignment.iter().max().map_or(0, |m| m + 1);
        if !moved || n_communities == adjacency.len() {
            break;
        }

        let mut new_groups: Vec<Vec<usize>> = vec![Vec::new(); n_communities];
        for (node, &c) in assignment.iter().enumerate() {
            new_groups[c].extend(node_groups[node].iter().copied());
        }
        node_groups = new_groups;

        let mut new_adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_communities];
        for (node, neigh) in adjacency.iter().enumerate() {
            let ci = assignment[node];
            for (&other, &w) in neigh {
                let cj = assignment[other];
                if node == other {
                    // Existing self-loop carries over whole.
                    *new_adj[ci].entry(ci).or_insert(0.0) += w;
                } else if ci == cj {
                    // Both directions of the edge visit this branch, so the
                    // merged self-loop accumulates w per direction; degree
                    // bookkeeping in louvain_level counts self-loops once
                    // per stored direction as well.
                    *new_adj[ci].entry(ci).or_insert(0.0) += w / 2.0;
                } else {
                    *new_adj[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        adjacency = new_adj;
    }

    let mut communities: Vec<Vec<usize>> = node_groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    communities.sort_by_key(|g| g[0]);
    CommunityPartition { communities }
}

/// One Louvain level: local node moves until a full pass makes none.
/// Returns the dense community assignment and whether anything moved.
fn louvain_level(
    adjacency: &[BTreeMap<usize, f64>],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<usize>, bool) {
    let n = adjacency.len();
    // Weighted degree including twice the self-loop weight.
    let degree: Vec<f64> = (0..n)
        .map(|i| {
            adjacency[i]
                .iter()
                .map(|(&j, &w)| if j == i { 2.0 * w } else { w })
                .sum()
        })
        .collect();
    let m2: f64 = degree.iter().sum();
    if m2 <= 0.0 {
        return ((0..n).map(|_| 0).collect(), false);
    }

    let mut community: Vec<usize> = (0..n).collect();
    let mut sigma_tot = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut any_move = false;
    loop {
        let mut moved_this_pass = false;
        for &node in &order {
            let old = community[node];
            sigma_tot[old] -= degree[node];

            // Link weight from node into each adjacent community.
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            links.insert(old, 0.0);
            for (&nb, &w) in &adjacency[node] {
                if nb != node {
                    *links.entry(community[nb]).or_insert(0.0) += w;
                }
            }

            // Gain of joining community c is proportional to
            // w(node->c) - sigma_tot[c] * k_node / m2. Moves must beat
            // staying put by a strict margin, so every move raises
            // modularity and the sweep terminates.
            let mut best = old;
            let mut best_gain = links[&old] - sigma_tot[old] * degree[node] / m2;
            for (&c, &w_to_c) in &links {
                if c == old {
                    continue;
                }
                let gain = w_to_c - sigma_tot[c] * degree[node] / m2;
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best = c;
                }
            }

            sigma_tot[best] += degree[node];
            community[node] = best;
            if best != old {
                moved_this_pass = true;
                any_move = true;
            }
        }
        if !moved_this_pass {
            break;
        }
    }

    // Relabel to dense ids ordered by smallest member node.
    let mut first_member: BTreeMap<usize, usize> = BTreeMap::new();
    for node in 0..n {
        first_member.entry(community[node]).or_insert(node);
    }
    let mut labels: Vec<(usize, usize)> =
        first_member.into_iter().map(|(c, first)| (first, c)).collect();
    labels.sort_unstable();
    let relabel: BTreeMap<usize, usize> =
        labels.into_iter().enumerate().map(|(dense, (_, c))| (c, dense)).collect();
    (community.into_iter().map(|c| relabel[&c]).collect(), any_move)
}
