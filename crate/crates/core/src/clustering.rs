//! K-means and fuzzy c-means over asset embeddings. Each cluster becomes a
//! candidate portfolio downstream, so clusters of mutually anti-correlated
//! assets are the goal, not an artifact.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from};

/// Hard cluster assignment from k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster index per asset, each in [0, k); no cluster is empty.
    pub labels: Vec<usize>,
    /// Row-major k x d centroid matrix.
    pub centroids: Vec<f64>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
}

/// Soft memberships from fuzzy c-means; each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyMembership {
    pub k: usize,
    /// Row-major n x k membership matrix, entries in [0, 1].
    pub memberships: Vec<f64>,
    pub fuzzifier: f64,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds {n} assets")));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centroid uniform, then D^2-weighted picks.
/// Duplicate points can zero every D^2 weight, in which case the lowest
/// unchosen index is taken so seeding stays total and deterministic.
fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.random_range(0..n)];
    let mut best_d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = best_d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in best_d2.iter().enumerate() {
                acc += w;
                if r < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            best_d2[i] = best_d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn embedding_points(emb: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    (0..emb.n_assets()).map(|i| emb.vector(i).to_vec()).collect()
}

/// Lloyd's algorithm with k-means++ seeding. Assignment ties go to the
/// lowest cluster index; a cluster that empties is re-seeded to the point
/// farthest from its current centroid. Converges when no centroid moves
/// more than `tol` or after `max_iter` rounds.
pub fn kmeans(
    emb: &EmbeddingMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    let points = embedding_points(emb);
    let n = points.len();
    check_k(k, n)?;
    if max_iter < 1 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("max_iter >= 1 and tol > 0 required".into()));
    }
    let d = emb.dim();
    let mut rng = rng_from(derive_seed(seed, "kmeans-init", 0));
    let mut centroids = kmeans_pp_init(&points, k, &mut rng);
    let mut labels = vec![0usize; n];

    for _ in 0..max_iter {
        assign_labels(&points, &centroids, &mut labels);
        fix_empty_clusters(&points, &mut centroids, &mut labels, k);

        let mut shift: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let mut mean = vec![0.0; d];
            for &i in &members {
                for (m, v) in mean.iter_mut().zip(&points[i]) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= members.len() as f64;
            }
            shift = shift.max(sq_dist(&mean, centroid).sqrt());
            *centroid = mean;
        }
        if shift < tol {
            break;
        }
    }
    assign_labels(&points, &centroids, &mut labels);
    fix_empty_clusters(&points, &mut centroids, &mut labels, k);

    let inertia = (0..n).map(|i| sq_dist(&points[i], &centroids[labels[i]])).sum();
    Ok(ClusterAssignment {
        k,
        labels,
        centroids: centroids.into_iter().flatten().collect(),
        inertia,
    })
}

fn assign_labels(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) {
    for (i, p) in points.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d2 = sq_dist(p, centroid);
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        labels[i] = best;
    }
}

/// Re-seeds each empty cluster to the point currently farthest from its
/// centroid. Moving that point strictly reduces inertia, so Lloyd's descent
/// property survives the repair.
fn fix_empty_clusters(
    points: &[Vec<f64>],
    centroids: &mut [Vec<f64>],
    labels: &mut [usize],
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = 0usize;
        let mut far_d2 = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] <= 1 {
                continue;
            }
            let d2 = sq_dist(p, &centroids[labels[i]]);
            if d2 > far_d2 {
                far_d2 = d2;
                far = i;
            }
        }
        centroids[empty] = points[far].clone();
        labels[far] = empty;
    }
}

/// Fuzzy c-means: alternates membership and centroid updates until the
/// largest membership change falls below `tol`. A point sitting exactly on
/// a centroid gets full membership there (split evenly if several centroids
/// coincide at the point).
pub fn fuzzy_cmeans(
    emb: &EmbeddingMatrix,
    k: usize,
    m: f64,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<FuzzyMembership> {
    let points = embedding_points(emb);
    let n = points.len();
    check_k(k, n)?;
    if !m.is_finite() || m <= 1.0 {
        return Err(Error::InvalidParameter(format!("fuzzifier m = {m} must be > 1")));
    }
    if max_iter < 1 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("max_iter >= 1 and tol > 0 required".into()));
    }
    let d = emb.dim();
    let mut rng = rng_from(derive_seed(seed, "fcm-init", 0));
    let mut centroids = kmeans_pp_init(&points, k, &mut rng);
    let mut memberships = vec![0.0; n * k];

    for _ in 0..max_iter {
        let mut max_change: f64 = 0.0;
        for (i, p) in points.iter().enumerate() {
            let row = fuzzy_membership_row(p, &centroids, m);
            for (j, &u) in row.iter().enumerate() {
                max_change = max_change.max((u - memberships[i * k + j]).abs());
                memberships[i * k + j] = u;
            }
        }

        for (j, centroid) in centroids.iter_mut().enumerate() {
            let mut num = vec![0.0; d];
            let mut den = 0.0;
            for (i, p) in points.iter().enumerate() {
                let um = memberships[i * k + j].powf(m);
                den += um;
                for (slot, v) in num.iter_mut().zip(p) {
                    *slot += um * v;
                }
            }
            if den > 0.0 {
                for slot in num.iter_mut() {
                    *slot /= den;
                }
                *centroid = num;
            }
        }
        if max_change < tol {
            break;
        }
    }
    Ok(FuzzyMembership { k, memberships, fuzzifier: m })
}

/// Membership row for one point: u_j proportional to d_j^(-2/(m-1)),
/// normalized to sum 1. Zero distances trigger the singularity rule.
fn fuzzy_membership_row(point: &[f64], centroids: &[Vec<f64>], m: f64) -> Vec<f64> {
    let k = centroids.len();
    let d2: Vec<f64> = centroids.iter().map(|c| sq_dist(point, c)).collect();
    let zeros: Vec<usize> = (0..k).filter(|&j| d2[j] == 0.0).collect();
    let mut row = vec![0.0; k];
    if !zeros.is_empty() {
        let share = 1.0 / zeros.len() as f64;
        for j in zeros {
            row[j] = share;
        }
        return row;
    }
    let exponent = 1.0 / (m - 1.0);
    // u_j = 1 / sum_l (d2_j / d2_l)^(1/(m-1)). Scaling by the minimum
    // distance keeps every power in (0, 1], so sharp fuzzifiers cannot
    // overflow to infinity and poison the normalization.
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let inv: Vec<f64> = d2.iter().map(|&v| (dmin / v).powf(exponent)).collect();
    let total: f64 = inv.iter().sum();
    for (slot, v) in row.iter_mut().zip(inv) {
        *slot = v / total;
    }
    row
}

/// Thresholded subsets: asset i joins subset j iff membership >= threshold;
/// empty subsets are dropped. Returns asset index lists per surviving
/// cluster, in cluster order.
pub fn memberships_to_subsets(fm: &FuzzyMembership, threshold: f64) -> Result<Vec<Vec<usize>>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} must be in (0, 1]"
        )));
    }
    let n = fm.memberships.len() / fm.k;
    let mut subsets = Vec::new();
    for j in 0..fm.k {
        let members: Vec<usize> =
            (0..n).filter(|&i| fm.memberships[i * fm.k + j] >= threshold).collect();
        if !members.is_empty() {
            subsets.push(members);
        }
    }
    Ok(subsets)
}
