//! KMeans, bisecting KMeans and flat-kernel mean-shift over dense points,
//! plus silhouette-based selection of the cluster count.
//!
//! Points are rows of equal length. Distances are Euclidean; callers that
//! mix feature scales should [`zscore`] first.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Standardizer;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no points to cluster")]
    Empty,
    #[error("k = {k} is invalid for {points} points")]
    InvalidK { k: usize, points: usize },
    #[error("points have inconsistent dimensions ({expected} vs {got})")]
    Ragged { expected: usize, got: usize },
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("candidate list is empty or contains k < 2")]
    Candidates,
    #[error("need at least {need} points for the candidate list, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-finite coordinate in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, ClusterError>;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    /// Centroids (KMeans family) or modes (mean-shift), one per cluster.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances of every point to its assigned centroid.
    pub inertia: f64,
}

impl ClusterResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Kmeans,
    Bisecting,
    MeanShift,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Independent kmeans++ restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            n_init: 20,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or(ClusterError::Empty)?;
    let d = first.len();
    for p in points {
        if p.len() != d {
            return Err(ClusterError::Ragged {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
    }
    Ok(d)
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, d: usize) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    let mut n = 0usize;
    for r in rows {
        n += 1;
        acc.iter_mut().zip(r).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= n.max(1) as f64);
    acc
}

/// Per-dimension z-scoring; constant dimensions map to 0.
pub fn zscore(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(d) = points.first().map(Vec::len) else {
        return Vec::new();
    };
    match Standardizer::fit(points.iter().map(Vec::as_slice), d) {
        Some(s) => points.iter().map(|p| s.apply(p)).collect(),
        None => points.to_vec(),
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// kmeans++ seeding over a seeded shuffle of the point indices.
fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    let mut centroids = vec![points[order[0]].clone()];
    let mut d2: Vec<f64> = order.iter().map(|&i| sq_dist(&points[i], &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = order.len() - 1;
            for (pos, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = pos;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.random_range(0..order.len())
        };
        let c = points[order[pick]].clone();
        for (pos, &i) in order.iter().enumerate() {
            d2[pos] = d2[pos].min(sq_dist(&points[i], &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, l) in points.iter().zip(labels.iter_mut()) {
        let (j, d) = nearest(p, centroids);
        *l = j;
        inertia += d;
    }
    inertia
}

/// Moves the point farthest from the largest cluster's centroid into each
/// empty cluster.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], labels: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = (0..k)
            .max_by_key(|&j| (counts[j], std::cmp::Reverse(j)))
            .expect("k >= 1");
        let far = (0..points.len())
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| {
                sq_dist(&points[a], &centroids[largest])
                    .total_cmp(&sq_dist(&points[b], &centroids[largest]))
                    .then(b.cmp(&a))
            })
            .expect("largest cluster is nonempty");
        labels[far] = empty;
        centroids[empty] = points[far].clone();
    }
}

/// Lloyd iterations from given centroids. Returns the result and the
/// inertia measured after each assignment step.
pub fn lloyd(points: &[Vec<f64>], init: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> Result<(ClusterResult, Vec<f64>)> {
    let d = check_points(points)?;
    let k = init.len();
    if k == 0 || k > points.len() {
        return Err(ClusterError::InvalidK {
            k,
            points: points.len(),
        });
    }
    let mut centroids = init;
    let mut labels = vec![0usize; points.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        assign(points, &centroids, &mut labels);
        repair_empty(points, &mut centroids, &mut labels);
        trace.push(inertia_of(points, &centroids, &labels));
        let mut shift: f64 = 0.0;
        for (j, c) in centroids.iter_mut().enumerate() {
            let new = mean_of(points.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(p, _)| p), d);
            shift = shift.max(dist(c, &new));
            *c = new;
        }
        if shift < tol {
            break;
        }
    }
    assign(points, &centroids, &mut labels);
    repair_empty(points, &mut centroids, &mut labels);
    let inertia = inertia_of(points, &centroids, &labels);
    trace.push(inertia);
    Ok((
        ClusterResult {
            labels,
            centroids,
            inertia,
        },
        trace,
    ))
}

fn inertia_of(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

/// Hartigan refinement: moves single points between clusters while a move
/// strictly lowers the inertia. Moving `x` from `a` to `b` changes the
/// inertia by `n_b/(n_b+1)·|x−c_b|² − n_a/(n_a−1)·|x−c_a|²`, so every
/// fixed point of this pass is also a fixed point of Lloyd's assignment.
/// Returns whether any point moved.
fn single_point_moves(points: &[Vec<f64>], labels: &mut [usize], k: usize) -> bool {
    let d = points[0].len();
    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0; d]; k];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l] += 1;
        centroids[l].iter_mut().zip(p).for_each(|(c, v)| *c += v);
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * sq_dist(p, &centroids[a]);
            let mut target = None;
            let mut best = removal - 1e-12 * removal.max(1.0);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let addition = nb / (nb + 1.0) * sq_dist(p, &centroids[b]);
                if addition < best {
                    best = addition;
                    target = Some(b);
                }
            }
            let Some(b) = target else { continue };
            let nb = counts[b] as f64;
            for (j, v) in p.iter().enumerate() {
                centroids[a][j] = (na * centroids[a][j] - v) / (na - 1.0);
                centroids[b][j] = (nb * centroids[b][j] + v) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            labels[i] = b;
            moved = true;
        }
        if !moved {
            return moved_any;
        }
        moved_any = true;
    }
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterResult> {
    kmeans_with(points, k, seed, KMeansOptions::default())
}

pub fn kmeans_with(points: &[Vec<f64>], k: usize, seed: u64, opts: KMeansOptions) -> Result<ClusterResult> {
    check_points(points)?;
    if k == 0 || k > points.len() {
        return Err(ClusterError::InvalidK {
            k,
            points: points.len(),
        });
    }
    let d = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterResult> = None;
    for _ in 0..opts.n_init.max(1) {
        let init = kmeans_pp(points, k, &mut rng);
        let (mut run, _) = lloyd(points, init, opts.max_iter, opts.tol)?;
        for _ in 0..opts.max_iter {
            if !single_point_moves(points, &mut run.labels, k) {
                break;
            }
            let centroids = (0..k)
                .map(|j| {
                    mean_of(
                        points.iter().zip(&run.labels).filter(|(_, &l)| l == j).map(|(p, _)| p),
                        d,
                    )
                })
                .collect();
            run = lloyd(points, centroids, opts.max_iter, opts.tol)?.0;
        }
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// Starts from one cluster and repeatedly 2-means-splits the cluster with
/// the largest inertia (ties: more points, then lower index).
pub fn bisecting_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterResult> {
    let d = check_points(points)?;
    if k == 0 || k > points.len() {
        return Err(ClusterError::InvalidK {
            k,
            points: points.len(),
        });
    }
    let mut members: Vec<Vec<usize>> = vec![(0..points.len()).collect()];
    let sse = |idx: &[usize]| {
        let c = mean_of(idx.iter().map(|&i| &points[i]), d);
        idx.iter().map(|&i| sq_dist(&points[i], &c)).sum::<f64>()
    };
    let mut inertias = vec![sse(&members[0])];
    for split in 1..k {
        let target = (0..members.len())
            .filter(|&j| members[j].len() >= 2)
            .max_by(|&a, &b| {
                inertias[a]
                    .total_cmp(&inertias[b])
                    .then(members[a].len().cmp(&members[b].len()))
                    .then(b.cmp(&a))
            })
            .expect("k <= #points leaves a splittable cluster");
        let idx = std::mem::take(&mut members[target]);
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
        let halves = kmeans(&sub, 2, seed.wrapping_add(split as u64))?;
        let left: Vec<usize> = idx
            .iter()
            .zip(&halves.labels)
            .filter(|(_, &l)| l == 0)
            .map(|(&i, _)| i)
            .collect();
        let right: Vec<usize> = idx
            .iter()
            .zip(&halves.labels)
            .filter(|(_, &l)| l == 1)
            .map(|(&i, _)| i)
            .collect();
        inertias[target] = sse(&left);
        members[target] = left;
        inertias.push(sse(&right));
        members.push(right);
    }
    let mut labels = vec![0usize; points.len()];
    let mut centroids = Vec::with_capacity(k);
    for (j, idx) in members.iter().enumerate() {
        idx.iter().for_each(|&i| labels[i] = j);
        centroids.push(mean_of(idx.iter().map(|&i| &points[i]), d));
    }
    let inertia = inertia_of(points, &centroids, &labels);
    Ok(ClusterResult {
        labels,
        centroids,
        inertia,
    })
}

/// Half the median pairwise distance; 1.0 when all points coincide.
pub fn default_bandwidth(points: &[Vec<f64>]) -> Result<f64> {
    check_points(points)?;
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(dist(&points[i], &points[j]));
        }
    }
    if d.is_empty() {
        return Ok(1.0);
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    Ok(if median > 0.0 { 0.5 * median } else { 1.0 })
}

/// Flat-kernel mean-shift. Each point climbs to the mean of all points
/// within `bandwidth`; modes closer than `bandwidth / 2` merge, keeping the
/// one with the most points in its ball. Points take the nearest kept mode.
pub fn mean_shift(points: &[Vec<f64>], bandwidth: f64, max_iter: usize) -> Result<ClusterResult> {
    let d = check_points(points)?;
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(ClusterError::Bandwidth(bandwidth));
    }
    let stop = 1e-6 * bandwidth;
    let bw2 = bandwidth * bandwidth;
    let mut modes: Vec<(Vec<f64>, usize)> = points
        .iter()
        .map(|start| {
            let mut m = start.clone();
            let mut support = 0;
            for _ in 0..max_iter.max(1) {
                let inside: Vec<&Vec<f64>> = points.iter().filter(|p| sq_dist(p, &m) <= bw2).collect();
                support = inside.len();
                if inside.is_empty() {
                    break;
                }
                let next = mean_of(inside.into_iter(), d);
                let shift = dist(&next, &m);
                m = next;
                if shift < stop {
                    break;
                }
            }
            (m, support)
        })
        .collect();
    modes.sort_by_key(|m| std::cmp::Reverse(m.1));
    let merge = 0.5 * bandwidth;
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (m, _) in modes {
        if kept.iter().all(|k| dist(k, &m) >= merge) {
            kept.push(m);
        }
    }
    let mut labels = vec![0usize; points.len()];
    let inertia = assign(points, &kept, &mut labels);
    Ok(ClusterResult {
        labels,
        centroids: kept,
        inertia,
    })
}

/// Mean silhouette coefficient. Singleton clusters score 0; a labeling with
/// fewer than two clusters scores 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist(&points[i], &points[j]);
            }
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

pub const DEFAULT_K_CANDIDATES: [usize; 7] = [2, 3, 4, 5, 6, 7, 8];

/// The candidate whose KMeans labeling has the highest mean silhouette;
/// ties go to the smaller k.
pub fn select_k(points: &[Vec<f64>], candidates: &[usize], seed: u64) -> Result<usize> {
    check_points(points)?;
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    if cands.is_empty() || cands[0] < 2 {
        return Err(ClusterError::Candidates);
    }
    let need = *cands.last().expect("nonempty");
    if points.len() < need {
        return Err(ClusterError::TooFewPoints {
            need,
            got: points.len(),
        });
    }
    let mut best = (cands[0], f64::NEG_INFINITY);
    for &k in &cands {
        let r = kmeans(points, k, seed)?;
        let s = silhouette(points, &r.labels);
        if s > best.1 + 1e-12 {
            best = (k, s);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 10.0], vec![10.1, 10.0]]
    }

    fn sorted(mut c: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        c
    }

    fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() < tol))
    }

    /// Minimum within-cluster sum of squares over every 2-partition.
    fn brute_force_two(points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let d = points[0].len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let mut s = 0.0;
            for side in [true, false] {
                let idx: Vec<usize> = (0..n).filter(|&i| (mask >> i & 1 == 1) == side).collect();
                let c: Vec<f64> = (0..d)
                    .map(|j| idx.iter().map(|&i| points[i][j]).sum::<f64>() / idx.len() as f64)
                    .collect();
                s += idx.iter().map(|&i| sq_dist(&points[i], &c)).sum::<f64>();
            }
            best = best.min(s);
        }
        best
    }

    #[test]
    fn k1_centroid_is_mean() {
        let r = kmeans(&four(), 1, 3).unwrap();
        assert!(close(&r.centroids, &[vec![5.05, 5.0]], 1e-12));
        assert!(r.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn four_point_example() {
        let r = kmeans(&four(), 2, 0).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
        assert!(close(
            &sorted(r.centroids.clone()),
            &[vec![0.05, 0.0], vec![10.05, 10.0]],
            1e-12
        ));
        assert!((r.inertia - brute_force_two(&four())).abs() < 1e-12);
    }

    #[test]
    fn duplicated_points_keep_centroids() {
        let pts = four();
        let doubled: Vec<Vec<f64>> = pts.iter().chain(&pts).cloned().collect();
        let a = sorted(kmeans(&pts, 2, 5).unwrap().centroids);
        let b = sorted(kmeans(&doubled, 2, 5).unwrap().centroids);
        assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn invalid_k_and_input() {
        assert!(matches!(kmeans(&four(), 5, 0), Err(ClusterError::InvalidK { .. })));
        assert!(matches!(kmeans(&four(), 0, 0), Err(ClusterError::InvalidK { .. })));
        assert_eq!(kmeans(&[], 1, 0), Err(ClusterError::Empty));
        assert!(matches!(
            kmeans(&[vec![0.0], vec![1.0, 2.0]], 1, 0),
            Err(ClusterError::Ragged { .. })
        ));
    }

    #[test]
    fn lloyd_inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..60)
                .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
                .collect();
            let init = pts[..4].to_vec();
            let (_, trace) = lloyd(&pts, init, 300, 1e-6).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{trace:?}");
            }
        }
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // the second initial centroid is far from everything
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let (r, _) = lloyd(&pts, vec![vec![1.5], vec![100.0]], 300, 1e-6).unwrap();
        let mut counts = [0; 2];
        r.labels.iter().for_each(|&l| counts[l] += 1);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn identical_points_still_fill_every_cluster() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let r = kmeans(&pts, 3, 0).unwrap();
        let mut seen = [false; 3];
        r.labels.iter().for_each(|&l| seen[l] = true);
        assert!(seen.iter().all(|&s| s));
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn kmeans_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        assert_eq!(kmeans(&pts, 3, 9).unwrap(), kmeans(&pts, 3, 9).unwrap());
    }

    #[test]
    fn bisecting_matches_kmeans_on_pairs() {
        let a = kmeans(&four(), 2, 0).unwrap();
        let b = bisecting_kmeans(&four(), 2, 0).unwrap();
        assert!(close(&sorted(a.centroids), &sorted(b.centroids), 1e-12));
        assert!((a.inertia - b.inertia).abs() < 1e-12);
    }

    #[test]
    fn bisecting_extremes() {
        let pts = four();
        let one = bisecting_kmeans(&pts, 1, 0).unwrap();
        assert!(close(&one.centroids, &[vec![5.05, 5.0]], 1e-12));
        let all = bisecting_kmeans(&pts, 4, 0).unwrap();
        assert_eq!(all.inertia, 0.0);
        let mut l = all.labels.clone();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    fn blob(center: &[f64], n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                center
                    .iter()
                    .map(|c| c + rng.random_range(-radius..radius) / 2f64.sqrt())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn mean_shift_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let one = blob(&[3.0, -1.0], 30, 0.1, &mut rng);
        assert_eq!(mean_shift(&one, 10.0, 300).unwrap().k(), 1);
        let mut two = blob(&[0.0, 0.0], 25, 0.1, &mut rng);
        two.extend(blob(&[20.0, 0.0], 25, 0.1, &mut rng));
        let r = mean_shift(&two, 1.0, 300).unwrap();
        assert_eq!(r.k(), 2);
        assert!(r.labels[..25].iter().all(|&l| l == r.labels[0]));
        assert!(r.labels[25..].iter().all(|&l| l == r.labels[25]));
        assert!(mean_shift(&two, 0.0, 300).is_err());
    }

    #[test]
    fn mean_shift_is_translation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pts = blob(&[0.0, 0.0], 20, 1.0, &mut rng);
        pts.extend(blob(&[6.0, 1.0], 20, 1.0, &mut rng));
        let shift = [3.5, -7.25];
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + shift[0], p[1] + shift[1]]).collect();
        let a = mean_shift(&pts, 1.5, 300).unwrap();
        let b = mean_shift(&moved, 1.5, 300).unwrap();
        assert_eq!(a.labels, b.labels);
        let a_moved: Vec<Vec<f64>> = a
            .centroids
            .iter()
            .map(|m| vec![m[0] + shift[0], m[1] + shift[1]])
            .collect();
        assert!(close(&a_moved, &b.centroids, 1e-9));
    }

    #[test]
    fn default_bandwidth_is_half_median_distance() {
        // pairwise distances 1, 2, 3 → median 2
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(default_bandwidth(&pts).unwrap(), 1.0);
        let pts = vec![vec![0.0], vec![4.0], vec![4.0], vec![10.0]];
        // 4 4 10 0 6 6 → sorted 0 4 4 6 6 10 → median 5
        assert_eq!(default_bandwidth(&pts).unwrap(), 2.5);
    }

    /// Silhouette straight from its definition, for cross-checking.
    fn silhouette_reference(points: &[Vec<f64>], labels: &[usize]) -> f64 {
        let n = points.len();
        let mut s = 0.0;
        for i in 0..n {
            let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if same.is_empty() {
                continue;
            }
            let a = same.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / same.len() as f64;
            let mut b = f64::INFINITY;
            for c in labels.iter().copied().filter(|&c| c != labels[i]) {
                let other: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                b = b.min(other.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / other.len() as f64);
            }
            s += (b - a) / a.max(b);
        }
        s / n as f64
    }

    #[test]
    fn silhouette_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..15)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let labels: Vec<usize> = (0..15)
                .map(|i| if i < 3 { i } else { rng.random_range(0..3) })
                .collect();
            assert!((silhouette(&pts, &labels) - silhouette_reference(&pts, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn select_k_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob(&[0.0, 0.0], 20, 0.5, &mut rng);
        pts.extend(blob(&[10.0, 10.0], 20, 0.5, &mut rng));
        assert_eq!(select_k(&pts, &DEFAULT_K_CANDIDATES, 0).unwrap(), 2);
        pts.reverse();
        assert_eq!(select_k(&pts, &DEFAULT_K_CANDIDATES, 0).unwrap(), 2);
        assert_eq!(select_k(&pts, &[3], 0).unwrap(), 3);
        assert!(matches!(
            select_k(&pts[..5], &DEFAULT_K_CANDIDATES, 0),
            Err(ClusterError::TooFewPoints { need: 8, got: 5 })
        ));
        assert_eq!(select_k(&pts, &[], 0), Err(ClusterError::Candidates));
    }

    #[test]
    fn zscore_standardizes_columns() {
        let pts = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        assert_eq!(zscore(&pts), vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }
}
