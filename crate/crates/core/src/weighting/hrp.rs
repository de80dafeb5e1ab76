//! Hierarchical risk parity: single-linkage clustering on Mantegna
//! distances, quasi-diagonalization via the dendrogram leaf order, then
//! recursive bisection with inverse-variance capital splits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::mantegna_distance;
use crate::market::CorrelationMatrix;

use super::{MomentEstimates, PortfolioWeights};

/// One agglomeration step. Cluster ids 0..n are leaves; merge t creates
/// cluster n + t. `left` is always the smaller id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
}

/// Weights a subset by the three HRP stages. `corr` must carry exactly the
/// same assets in the same order as `moments`.
pub fn hrp_optimize(
    moments: &MomentEstimates,
    corr: &CorrelationMatrix,
) -> Result<PortfolioWeights> {
    let n = moments.n_assets();
    if n < 2 {
        return Err(Error::TooFew { what: "assets", needed: 2, got: n });
    }
    if corr.assets() != moments.assets() {
        return Err(Error::InvalidParameter(
            "correlation and moment assets differ".to_string(),
        ));
    }

    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = mantegna_distance(corr.get(i, j))?;
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }

    let merges = single_linkage(&dist);
    let order = leaf_order(&merges, n);

    let mut weights = vec![0.0; n];
    bisect(&order, moments.cov(), 1.0, &mut weights);
    PortfolioWeights::new(moments.assets().to_vec(), weights)
}

/// Single-linkage agglomeration with Lance-Williams minimum updates.
/// Distance ties merge the lexicographically smallest cluster-id pair, so
/// the dendrogram is unique.
fn single_linkage(dist: &DMatrix<f64>) -> Vec<Merge> {
    let n = dist.nrows();
    // Working distance table indexed by cluster id; usize::MAX marks
    // retired clusters.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut table: Vec<Vec<f64>> = vec![vec![0.0; 2 * n - 1]; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            table[i][j] = dist[(i, j)];
        }
    }
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best = (usize::MAX, usize::MAX);
        let mut best_d = f64::INFINITY;
        for (ai, &a) in ids.iter().enumerate() {
            for &b in ids.iter().skip(ai + 1) {
                let d = table[a][b];
                if d < best_d || (d == best_d && (a, b) < best) {
                    best_d = d;
                    best = (a, b);
                }
            }
        }
        let (a, b) = best;
        let new_id = n + step;
        merges.push(Merge { left: a, right: b, distance: best_d });
        ids.retain(|&c| c != a && c != b);
        for &c in &ids {
            let d = table[a][c].min(table[b][c]);
            table[new_id][c] = d;
            table[c][new_id] = d;
        }
        ids.push(new_id);
    }
    merges
}

/// Dendrogram leaf order: expand the final merge depth-first, smaller
/// cluster id first. This is the quasi-diagonalization permutation.
fn leaf_order(merges: &[Merge], n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(id) = stack.pop() {
        if id < n {
            order.push(id);
        } else {
            let m = merges[id - n];
            // Right is pushed first so left expands first.
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

/// Variance of the inverse-variance portfolio over the given assets.
fn ivp_variance(cov: &DMatrix<f64>, items: &[usize]) -> f64 {
    let k = items.len();
    let inv: Vec<f64> = items
        .iter()
        // A zero-variance asset would soak up all capital; the floor keeps
        // the split finite without changing well-posed instances.
        .map(|&i| 1.0 / cov[(i, i)].max(1e-18))
        .collect();
    let total: f64 = inv.iter().sum();
    let w = DVector::from_fn(k, |a, _| inv[a] / total);
    let sub = DMatrix::from_fn(k, k, |a, b| cov[(items[a], items[b])]);
    (&sub * &w).dot(&w)
}

/// Recursive bisection: split the ordered list in half and divide capital
/// inversely to each half's inverse-variance-portfolio variance.
fn bisect(order: &[usize], cov: &DMatrix<f64>, capital: f64, weights: &mut [f64]) {
    if order.len() == 1 {
        weights[order[0]] = capital;
        return;
    }
    let (left, right) = order.split_at(order.len() / 2);
    let var_left = ivp_variance(cov, left);
    let var_right = ivp_variance(cov, right);
    let alpha = 1.0 - var_left / (var_left + var_right);
    bisect(left, cov, capital * alpha, weights);
    bisect(right, cov, capital * (1.0 - alpha), weights);
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn corr(assets: &[&str], values: DMatrix<f64>) -> CorrelationMatrix {
        CorrelationMatrix::new(assets.iter().map(|s| s.to_string()).collect(), values)
            .unwrap()
    }

    fn moments(assets: &[&str], mu: &[f64], cov: DMatrix<f64>) -> MomentEstimates {
        MomentEstimates::new(
            assets.iter().map(|s| s.to_string()).collect(),
            DVector::from_row_slice(mu),
            cov,
        )
        .unwrap()
    }

    #[test]
    fn identity_covariance_gives_exactly_equal_weights() {
        for n in [2usize, 4, 8] {
            let assets: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
            let names: Vec<&str> = assets.iter().map(|s| s.as_str()).collect();
            let m = moments(&names, &vec![0.1; n], DMatrix::identity(n, n));
            let c = corr(&names, DMatrix::identity(n, n));
            let w = hrp_optimize(&m, &c).unwrap();
            // Power-of-two sizes make every split exactly one half.
            for &x in w.weights() {
                assert_eq!(x, 1.0 / n as f64);
            }
        }
    }

    #[test]
    fn identity_covariance_odd_n_is_equal_within_float_noise() {
        let n = 5;
        let assets: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
        let names: Vec<&str> = assets.iter().map(|s| s.as_str()).collect();
        let m = moments(&names, &vec![0.1; n], DMatrix::identity(n, n));
        let c = corr(&names, DMatrix::identity(n, n));
        let w = hrp_optimize(&m, &c).unwrap();
        for &x in w.weights() {
            assert!((x - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn two_assets_split_inverse_to_variance() {
        let m = moments(&["a", "b"], &[0.1, 0.1], dmatrix![0.04, 0.0; 0.0, 0.01]);
        let c = corr(&["a", "b"], DMatrix::identity(2, 2));
        let w = hrp_optimize(&m, &c).unwrap();
        assert!((w.weights()[0] - 0.2).abs() < 1e-12);
        assert!((w.weights()[1] - 0.8).abs() < 1e-12);
    }

    /// Independent stage-by-stage trace of the 4-asset two-pair instance,
    /// written with naive scans rather than the library's update scheme.
    fn hand_trace_two_pairs(corr: &DMatrix<f64>, cov: &DMatrix<f64>) -> Vec<f64> {
        let n = 4;
        // Stage 1: naive single linkage over explicit member lists.
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                d[i][j] = (2.0 * (1.0 - corr[(i, j)])).max(0.0).sqrt();
            }
        }
        let mut clusters: Vec<(usize, Vec<usize>)> =
            (0..n).map(|i| (i, vec![i])).collect();
        let mut next_id = n;
        let mut merges: Vec<(usize, usize, Vec<usize>, Vec<usize>)> = Vec::new();
        while clusters.len() > 1 {
            let mut pick = (usize::MAX, usize::MAX);
            let mut pick_pos = (0, 0);
            let mut best = f64::INFINITY;
            for x in 0..clusters.len() {
                for y in x + 1..clusters.len() {
                    let mut link = f64::INFINITY;
                    for &p in &clusters[x].1 {
                        for &q in &clusters[y].1 {
                            link = link.min(d[p][q]);
                        }
                    }
                    let id_pair = (
                        clusters[x].0.min(clusters[y].0),
                        clusters[x].0.max(clusters[y].0),
                    );
                    if link < best || (link == best && id_pair < pick) {
                        best = link;
                        pick = id_pair;
                        pick_pos = (x, y);
                    }
                }
            }
            let (x, y) = pick_pos;
            let (id_a, members_a) = clusters[x].clone();
            let (id_b, members_b) = clusters[y].clone();
            let (first, second) = if id_a < id_b {
                (members_a.clone(), members_b.clone())
            } else {
                (members_b.clone(), members_a.clone())
            };
            merges.push((id_a.min(id_b), id_a.max(id_b), first.clone(), second.clone()));
            let mut merged = first;
            merged.extend(second);
            clusters.retain(|(id, _)| *id != id_a && *id != id_b);
            clusters.push((next_id, merged));
            next_id += 1;
        }

        // Stage 2: leaf order = expansion of the last merge, left-first,
        // where "left" is the smaller cluster id.
        fn expand(
            merges: &[(usize, usize, Vec<usize>, Vec<usize>)],
            id: usize,
            n: usize,
        ) -> Vec<usize> {
            if id < n {
                return vec![id];
            }
            let (left, right, _, _) = merges[id - n];
            let mut out = expand(merges, left, n);
            out.extend(expand(merges, right, n));
            out
        }
        let order = expand(&merges, n + merges.len() - 1, n);

        // Stage 3: recursive bisection with inverse-variance splits.
        fn ivp_var(cov: &DMatrix<f64>, items: &[usize]) -> f64 {
            let inv: Vec<f64> = items.iter().map(|&i| 1.0 / cov[(i, i)]).collect();
            let total: f64 = inv.iter().sum();
            let mut var = 0.0;
            for (a, &i) in items.iter().enumerate() {
                for (b, &j) in items.iter().enumerate() {
                    var += (inv[a] / total) * (inv[b] / total) * cov[(i, j)];
                }
            }
            var
        }
        fn split(cov: &DMatrix<f64>, order: &[usize], capital: f64, out: &mut [f64]) {
            if order.len() == 1 {
                out[order[0]] = capital;
                return;
            }
            let (l, r) = order.split_at(order.len() / 2);
            let (vl, vr) = (ivp_var(cov, l), ivp_var(cov, r));
            let alpha = 1.0 - vl / (vl + vr);
            split(cov, l, capital * alpha, out);
            split(cov, r, capital * (1.0 - alpha), out);
        }
        let mut out = vec![0.0; n];
        split(cov, &order, 1.0, &mut out);
        out
    }

    #[test]
    fn four_asset_two_pair_instance_matches_the_hand_trace() {
        // Pairs (0,1) and (2,3) are internally correlated; cross pairs low.
        let rho = dmatrix![
            1.0, 0.9, 0.1, 0.15;
            0.9, 1.0, 0.05, 0.1;
            0.1, 0.05, 1.0, 0.85;
            0.15, 0.1, 0.85, 1.0
        ];
        let sig = [0.2f64, 0.25, 0.1, 0.15];
        let cov = DMatrix::from_fn(4, 4, |i, j| rho[(i, j)] * sig[i] * sig[j]);
        let assets = ["a", "b", "c", "d"];
        let m = moments(&assets, &[0.1, 0.1, 0.1, 0.1], cov.clone());
        let c = corr(&assets, rho.clone());

        let got = hrp_optimize(&m, &c).unwrap();
        let expected = hand_trace_two_pairs(&rho, &cov);
        for (g, e) in got.weights().iter().zip(&expected) {
            assert!((g - e).abs() < 1e-10, "{:?} vs {expected:?}", got.weights());
        }
        let sum: f64 = got.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_blocks_get_equal_total_weight() {
        // Two identical 2-asset blocks, zero cross-covariance.
        let rho = dmatrix![
            1.0, 0.6, 0.0, 0.0;
            0.6, 1.0, 0.0, 0.0;
            0.0, 0.0, 1.0, 0.6;
            0.0, 0.0, 0.6, 1.0
        ];
        let sig = [0.1f64, 0.2, 0.1, 0.2];
        let cov = DMatrix::from_fn(4, 4, |i, j| rho[(i, j)] * sig[i] * sig[j]);
        let assets = ["a", "b", "c", "d"];
        let m = moments(&assets, &[0.1; 4], cov);
        let c = corr(&assets, rho);
        let w = hrp_optimize(&m, &c).unwrap();
        let block_a = w.weights()[0] + w.weights()[1];
        let block_b = w.weights()[2] + w.weights()[3];
        assert!((block_a - block_b).abs() < 1e-8, "{block_a} vs {block_b}");
    }

    #[test]
    fn single_linkage_ties_are_lexicographic() {
        // All distances equal: merges must proceed (0,1), (2,3), ...
        let dist = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        let merges = single_linkage(&dist);
        assert_eq!((merges[0].left, merges[0].right), (0, 1));
        assert_eq!((merges[1].left, merges[1].right), (2, 3));
        assert_eq!((merges[2].left, merges[2].right), (4, 5));
    }

    #[test]
    fn mismatched_asset_lists_are_rejected() {
        let m = moments(&["a", "b"], &[0.1, 0.1], DMatrix::identity(2, 2));
        let c = corr(&["a", "x"], DMatrix::identity(2, 2));
        assert!(hrp_optimize(&m, &c).is_err());
    }
}
