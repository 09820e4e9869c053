//! Crash-scenario grouping: k-means over (window size, horizon) points,
//! cluster count chosen by the mean silhouette score.
//!
//! Points are internally processed in a canonical coordinate order, so the
//! outcome does not depend on input order. Restarts, seeding and tie-breaks
//! are all deterministic functions of the configured seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("{points} points cannot form {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("only {distinct} distinct points, cannot form {k} clusters")]
    TooFewDistinct { distinct: usize, k: usize },
    #[error("no points to cluster")]
    Empty,
}

/// One qualified fit in scenario space: window size and predicted horizon,
/// both in index-day units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub dt: f64,
    pub horizon: f64,
}

impl FitPoint {
    fn dist2(&self, other: &FitPoint) -> f64 {
        let dx = self.dt - other.dt;
        let dy = self.horizon - other.horizon;
        dx * dx + dy * dy
    }

    fn dist(&self, other: &FitPoint) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// Seeding, restart and scaling controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    /// Standardize both coordinates before clustering (sensitivity studies);
    /// reported centroids and statistics always use raw units.
    pub zscore: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            restarts: 20,
            max_iter: 200,
            zscore: false,
        }
    }
}

/// A clustering of the input points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub k: usize,
    /// Arithmetic mean of each cluster's members, raw units.
    pub centroids: Vec<FitPoint>,
    /// Cluster index per input point, in input order.
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
    pub wcss: f64,
    pub silhouettes: Vec<f64>,
    pub mean_silhouette: f64,
}

/// Per-point silhouette scores and their mean.
///
/// `a_i` is the mean distance to the other members of the point's cluster
/// (0 for singletons, whose score is defined as 0); `b_i` is the smallest
/// mean distance to any other cluster. Two coincident points in perfectly
/// separated clusters score 1; a point equally torn scores 0.
pub fn silhouette_scores(points: &[FitPoint], assignments: &[usize], k: usize) -> (Vec<f64>, f64) {
    let n = points.len();
    let mut scores = vec![0.0; n];
    let counts = {
        let mut c = vec![0usize; k];
        for &a in assignments {
            c[a] += 1;
        }
        c
    };
    for i in 0..n {
        let own = assignments[i];
        if counts[own] <= 1 {
            scores[i] = 0.0;
            continue;
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[assignments[j]] += points[i].dist(&points[j]);
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && counts[c] > 0 {
                b = b.min(sums[c] / counts[c] as f64);
            }
        }
        let denom = a.max(b);
        scores[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    let mean = scores.iter().sum::<f64>() / n.max(1) as f64;
    (scores, mean)
}

/// Lloyd iteration from a distance-weighted seeding, best of the configured
/// restarts by within-cluster sum of squares (ties to the lower restart
/// index). Deterministic for a fixed seed regardless of input order.
pub fn kmeans(points: &[FitPoint], k: usize, cfg: &ClusterConfig) -> Result<ClusterResult, ClusterError> {
    if k < 2 {
        return Err(ClusterError::KTooSmall(k));
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    let order = canonical_order(points);
    let sorted: Vec<FitPoint> = order.iter().map(|&i| points[i]).collect();
    let distinct = count_distinct(&sorted);
    if distinct < k {
        return Err(ClusterError::TooFewDistinct { distinct, k });
    }

    let work: Vec<FitPoint> = if cfg.zscore { standardize(&sorted) } else { sorted.clone() };

    let best = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (r as u64).wrapping_mul(0x9E3779B97F4A7C15));
            let assignment = lloyd(&work, k, cfg.max_iter, &mut rng);
            let wcss = wcss_of(&work, &assignment, k);
            (wcss, r, assignment)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one restart");

    let (_, _, sorted_assignment) = best;

    // relabel clusters by canonical order of first appearance
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0usize;
    for &a in &sorted_assignment {
        if relabel[a] == usize::MAX {
            relabel[a] = next;
            next += 1;
        }
    }
    let mut assignments = vec![0usize; points.len()];
    for (pos, &orig_idx) in order.iter().enumerate() {
        assignments[orig_idx] = relabel[sorted_assignment[pos]];
    }

    Ok(finish(points, assignments, k))
}

/// Builds the result bundle (centroids, counts, WCSS, silhouettes) from an
/// assignment over the raw points.
fn finish(points: &[FitPoint], assignments: Vec<usize>, k: usize) -> ClusterResult {
    let mut counts = vec![0usize; k];
    let mut centroids = vec![FitPoint { dt: 0.0, horizon: 0.0 }; k];
    for (p, &a) in points.iter().zip(&assignments) {
        counts[a] += 1;
        centroids[a].dt += p.dt;
        centroids[a].horizon += p.horizon;
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        if n > 0 {
            c.dt /= n as f64;
            c.horizon /= n as f64;
        }
    }
    let wcss = wcss_of(points, &assignments, k);
    let (silhouettes, mean_silhouette) = if k >= 2 {
        silhouette_scores(points, &assignments, k)
    } else {
        (vec![0.0; points.len()], 0.0)
    };
    ClusterResult {
        k,
        centroids,
        assignments,
        counts,
        wcss,
        silhouettes,
        mean_silhouette,
    }
}

fn canonical_order(points: &[FitPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .dt
            .total_cmp(&points[b].dt)
            .then(points[a].horizon.total_cmp(&points[b].horizon))
            .then(a.cmp(&b))
    });
    order
}

fn count_distinct(sorted: &[FitPoint]) -> usize {
    let mut n = if sorted.is_empty() { 0 } else { 1 };
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            n += 1;
        }
    }
    n
}

fn standardize(points: &[FitPoint]) -> Vec<FitPoint> {
    let n = points.len() as f64;
    let mean_dt = points.iter().map(|p| p.dt).sum::<f64>() / n;
    let mean_h = points.iter().map(|p| p.horizon).sum::<f64>() / n;
    let sd = |f: &dyn Fn(&FitPoint) -> f64, mean: f64| -> f64 {
        let v = points.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / n;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    };
    let sd_dt = sd(&|p| p.dt, mean_dt);
    let sd_h = sd(&|p| p.horizon, mean_h);
    points
        .iter()
        .map(|p| FitPoint {
            dt: (p.dt - mean_dt) / sd_dt,
            horizon: (p.horizon - mean_h) / sd_h,
        })
        .collect()
}

fn wcss_of(points: &[FitPoint], assignments: &[usize], k: usize) -> f64 {
    let mut counts = vec![0usize; k];
    let mut sums = vec![(0.0f64, 0.0f64); k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].0 += p.dt;
        sums[a].1 += p.horizon;
    }
    let mut total = 0.0;
    for (p, &a) in points.iter().zip(assignments) {
        if counts[a] == 0 {
            continue;
        }
        let cx = sums[a].0 / counts[a] as f64;
        let cy = sums[a].1 / counts[a] as f64;
        let dx = p.dt - cx;
        let dy = p.horizon - cy;
        total += dx * dx + dy * dy;
    }
    total
}

/// One Lloyd run: distance-weighted seeding, assign/update until stable.
/// Empty clusters are reseeded at the point farthest from its own centroid.
fn lloyd(points: &[FitPoint], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut centroids: Vec<FitPoint> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| p.dist2(&centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[next]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(p.dist2(centroids.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iter {
        // assign to the nearest centroid, lowest index on ties
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = p.dist2(&centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = p.dist2(centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        // recompute centroids; repair empties with the worst-fitting point
        let mut counts = vec![0usize; k];
        let mut sums = vec![(0.0f64, 0.0f64); k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].0 += p.dt;
            sums[a].1 += p.horizon;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = FitPoint {
                    dt: sums[c].0 / counts[c] as f64,
                    horizon: sums[c].1 / counts[c] as f64,
                };
            } else {
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(i, p), (j, q)| {
                        p.dist2(&centroids[assignment[*i]])
                            .total_cmp(&q.dist2(&centroids[assignment[*j]]))
                            .then(j.cmp(i))
                    })
                    .map(|(i, _)| i)
                    .expect("nonempty points");
                centroids[c] = points[far];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    assignment
}

/// Result of the cluster-count search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub result: ClusterResult,
    /// True when too few points forced a single-cluster report instead of
    /// the silhouette search.
    pub fallback_single: bool,
}

/// Runs k-means for each k in the range and keeps the one with the highest
/// mean silhouette (ties to the smaller k). Fewer points than the smallest
/// k produce a flagged single-cluster report.
pub fn optimal_k(
    points: &[FitPoint],
    k_min: usize,
    k_max: usize,
    cfg: &ClusterConfig,
) -> Result<KSelection, ClusterError> {
    if points.is_empty() {
        return Err(ClusterError::Empty);
    }
    let k_min = k_min.max(2);
    let order = canonical_order(points);
    let sorted: Vec<FitPoint> = order.iter().map(|&i| points[i]).collect();
    let distinct = count_distinct(&sorted);
    let feasible_max = k_max.min(points.len()).min(distinct);

    if feasible_max < k_min {
        let assignments = vec![0usize; points.len()];
        return Ok(KSelection {
            result: finish(points, assignments, 1),
            fallback_single: true,
        });
    }

    let mut best: Option<ClusterResult> = None;
    for k in k_min..=feasible_max {
        let result = kmeans(points, k, cfg)?;
        let better = match &best {
            None => true,
            Some(b) => result.mean_silhouette > b.mean_silhouette,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(KSelection {
        result: best.expect("at least one k evaluated"),
        fallback_single: false,
    })
}

/// One crash scenario: a cluster summarized for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cluster: usize,
    /// Mean and population standard deviation of the predicted horizon.
    pub horizon_mean: f64,
    pub horizon_std: f64,
    /// Mean and population standard deviation of the member window sizes.
    pub dt_mean: f64,
    pub dt_std: f64,
    pub count: usize,
    /// Member fraction over all clustered points.
    pub probability: f64,
    /// Clusters with five or fewer members are weakly supported.
    pub low_support: bool,
}

/// Summarizes clusters as scenarios ordered by probability (ties: nearer
/// horizon first).
pub fn scenario_report(result: &ClusterResult, points: &[FitPoint]) -> Vec<Scenario> {
    let total: usize = result.counts.iter().sum();
    let mut out = Vec::new();
    for c in 0..result.k {
        let members: Vec<&FitPoint> = points
            .iter()
            .zip(&result.assignments)
            .filter_map(|(p, &a)| (a == c).then_some(p))
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let h_mean = members.iter().map(|p| p.horizon).sum::<f64>() / n;
        let d_mean = members.iter().map(|p| p.dt).sum::<f64>() / n;
        let h_std = (members.iter().map(|p| (p.horizon - h_mean).powi(2)).sum::<f64>() / n).sqrt();
        let d_std = (members.iter().map(|p| (p.dt - d_mean).powi(2)).sum::<f64>() / n).sqrt();
        out.push(Scenario {
            cluster: c,
            horizon_mean: h_mean,
            horizon_std: h_std,
            dt_mean: d_mean,
            dt_std: d_std,
            count: members.len(),
            probability: members.len() as f64 / total as f64,
            low_support: members.len() <= 5,
        });
    }
    out.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then(a.horizon_mean.total_cmp(&b.horizon_mean))
            .then(a.dt_mean.total_cmp(&b.dt_mean))
    });
    out
}
