//! Day clustering: agglomerative hierarchical clustering on a precomputed
//! DTW distance matrix, and a Euclidean K-Means baseline.
//!
//! Cluster ids inside a [`MergeHistory`] follow the usual dendrogram
//! convention: days are `0..n`, and the cluster created by merge `s` gets id
//! `n + s`. A [`ClusterModel`] uses dense 0-based cluster indices in memory;
//! its JSON form numbers clusters from 1.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtw::DistanceMatrix;
use crate::error::{Error, Result};
use crate::ingest::{Dataset, HOURS};
use crate::util;

/// Iteration cap for Lloyd's algorithm.
pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Complete,
    Average,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            _ => Err(Error::arg(format!(
                "unknown linkage '{s}' (expected complete or average)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "kmeans")]
    KMeans,
    #[serde(rename = "ahc-complete")]
    AhcComplete,
    #[serde(rename = "ahc-average")]
    AhcAverage,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::KMeans, Method::AhcComplete, Method::AhcAverage];

    pub fn linkage(self) -> Option<Linkage> {
        match self {
            Method::KMeans => None,
            Method::AhcComplete => Some(Linkage::Complete),
            Method::AhcAverage => Some(Linkage::Average),
        }
    }

    pub fn from_linkage(linkage: Linkage) -> Self {
        match linkage {
            Linkage::Complete => Method::AhcComplete,
            Linkage::Average => Method::AhcAverage,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::AhcComplete => "ahc-complete",
            Method::AhcAverage => "ahc-average",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" | "k-means" => Ok(Method::KMeans),
            "ahc-complete" => Ok(Method::AhcComplete),
            "ahc-average" => Ok(Method::AhcAverage),
            _ => Err(Error::arg(format!(
                "unknown method '{s}' (expected kmeans, ahc-complete or ahc-average)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two merged cluster ids.
    pub left: usize,
    pub right: usize,
    /// Linkage value between `left` and `right` at merge time.
    pub distance: f64,
    pub new_id: usize,
    /// Number of days in the new cluster.
    pub size: usize,
}

/// The dendrogram built by [`ahc`]: `n - 1` merges in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeHistory {
    pub n: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl MergeHistory {
    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.distance).collect()
    }

    /// Flat labels for `k` clusters: the partition left after undoing the
    /// last `k - 1` merges. Labels are numbered `0..k` in order of each
    /// cluster's first day.
    pub fn cut_labels(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.n;
        if k < 1 || k > n {
            return Err(Error::arg(format!("cannot cut {n} days into {k} clusters")));
        }
        // parent pointers over all 2n - 1 node ids
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        for m in &self.merges[..n - k] {
            parent[m.left] = m.new_id;
            parent[m.right] = m.new_id;
        }
        let root = |mut x: usize| {
            while parent[x] != x {
                x = parent[x];
            }
            x
        };
        let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
        let labels = (0..n)
            .map(|day| {
                let r = root(day);
                let next = relabel.len();
                *relabel.entry(r).or_insert(next)
            })
            .collect();
        Ok(labels)
    }
}

/// Agglomerative clustering on a precomputed distance matrix.
///
/// Linkage values are maintained with Lance-Williams updates: complete
/// linkage keeps the running maximum, average linkage keeps the sum of
/// cross-pair distances and divides by the pair count on lookup. Ties are
/// broken by the lower smaller-cluster id, then the lower larger id.
pub fn ahc(dm: &DistanceMatrix, linkage: Linkage) -> Result<MergeHistory> {
    let n = dm.n();
    if n < 2 {
        return Err(Error::arg(format!("AHC needs at least 2 days, got {n}")));
    }
    // Slot `s` holds a live cluster; `acc` stores max (complete) or sum
    // (average) of cross distances between slots.
    let mut acc = dm.entries().to_vec();
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut live: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    let value = |acc: &[f64], size: &[usize], a: usize, b: usize| -> f64 {
        match linkage {
            Linkage::Complete => acc[a * n + b],
            Linkage::Average => acc[a * n + b] / (size[a] * size[b]) as f64,
        }
    };

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (x, &a) in live.iter().enumerate() {
            for &b in &live[x + 1..] {
                let d = value(&acc, &size, a, b);
                let (lo, hi) = (id[a].min(id[b]), id[a].max(id[b]));
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        d < bd || (d == bd && (lo, hi) < (blo, bhi))
                    }
                };
                if better {
                    best = Some((d, lo, hi, a, b));
                }
            }
        }
        let (distance, left, right, a, b) = best.expect("at least two live clusters");

        for &c in &live {
            if c == a || c == b {
                continue;
            }
            let merged = match linkage {
                Linkage::Complete => acc[a * n + c].max(acc[b * n + c]),
                Linkage::Average => acc[a * n + c] + acc[b * n + c],
            };
            acc[a * n + c] = merged;
            acc[c * n + a] = merged;
        }
        size[a] += size[b];
        id[a] = n + step;
        live.retain(|&s| s != b);
        merges.push(Merge {
            left,
            right,
            distance,
            new_id: n + step,
            size: size[a],
        });
    }

    Ok(MergeHistory { n, linkage, merges })
}

/// Fit details recorded with a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inertia: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
}

/// A partition of the dataset's days with element-wise mean centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub method: Method,
    pub params: ModelParams,
    /// Cluster index in `0..k` for every day.
    pub assignments: Vec<usize>,
    /// Day indices per cluster, ascending.
    pub memberships: Vec<Vec<usize>>,
    /// Per-cluster 24·m centroid, variable-major like [`crate::DayProfile::as_flat`].
    pub centroids: Vec<Vec<f64>>,
}

impl ClusterModel {
    /// Builds memberships and centroids from per-day labels in `0..k`.
    pub fn from_labels(
        method: Method,
        params: ModelParams,
        labels: Vec<usize>,
        ds: &Dataset,
    ) -> Result<Self> {
        if labels.len() != ds.len() {
            return Err(Error::arg(format!(
                "{} labels for {} days",
                labels.len(),
                ds.len()
            )));
        }
        let memberships = memberships_from_labels(&labels)?;
        let centroids = compute_centroids(ds, &memberships)?;
        Ok(ClusterModel {
            method,
            params,
            assignments: labels,
            memberships,
            centroids,
        })
    }

    pub fn k(&self) -> usize {
        self.memberships.len()
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.memberships.iter().map(Vec::len).collect()
    }

    pub fn to_json(&self, ds: &Dataset) -> Result<String> {
        let dates = ds.dates();
        if dates.len() != self.n() {
            return Err(Error::arg("model and dataset sizes differ"));
        }
        let n_vars = ds.n_vars();
        let file = ModelFile {
            method: self.method,
            params: self.params.clone(),
            k: self.k(),
            variables: ds.variable_names.clone(),
            assignments: dates
                .iter()
                .zip(&self.assignments)
                .map(|(d, &c)| (d.to_string(), c + 1))
                .collect(),
            memberships: self
                .memberships
                .iter()
                .map(|m| m.iter().map(|&i| dates[i].to_string()).collect())
                .collect(),
            centroids: self
                .centroids
                .iter()
                .map(|c| {
                    (0..HOURS)
                        .map(|h| (0..n_vars).map(|v| c[v * HOURS + h]).collect())
                        .collect()
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Reads a model written by [`ClusterModel::to_json`] for the same
    /// dataset. Centroids are taken from the file as written.
    pub fn from_json(text: &str, ds: &Dataset) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let index: BTreeMap<String, usize> = ds
            .dates()
            .iter()
            .enumerate()
            .map(|(i, d)| (d.to_string(), i))
            .collect();
        if file.assignments.len() != ds.len() {
            return Err(Error::arg(format!(
                "model assigns {} days, dataset has {}",
                file.assignments.len(),
                ds.len()
            )));
        }
        let mut labels = vec![usize::MAX; ds.len()];
        for (date, cluster) in &file.assignments {
            let i = *index
                .get(date)
                .ok_or_else(|| Error::arg(format!("model date {date} not in dataset")))?;
            if *cluster < 1 || *cluster > file.k {
                return Err(Error::arg(format!("cluster id {cluster} outside 1..={}", file.k)));
            }
            labels[i] = cluster - 1;
        }
        let memberships = memberships_from_labels(&labels)?;
        if memberships.len() != file.k || file.centroids.len() != file.k {
            return Err(Error::arg("model K does not match its clusters"));
        }
        let n_vars = ds.n_vars();
        let centroids = file
            .centroids
            .iter()
            .map(|rows| {
                if rows.len() != HOURS || rows.iter().any(|r| r.len() != n_vars) {
                    return Err(Error::arg("centroid is not a 24×m array"));
                }
                let mut flat = vec![0.0; HOURS * n_vars];
                for (h, row) in rows.iter().enumerate() {
                    for (v, &x) in row.iter().enumerate() {
                        flat[v * HOURS + h] = x;
                    }
                }
                Ok(flat)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClusterModel {
            method: file.method,
            params: file.params,
            assignments: labels,
            memberships,
            centroids,
        })
    }

    pub fn save(&self, path: &Path, ds: &Dataset) -> Result<()> {
        util::write_file(path, self.to_json(ds)?)
    }

    pub fn load(path: &Path, ds: &Dataset) -> Result<Self> {
        let bytes = util::read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
        Self::from_json(&text, ds)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    method: Method,
    params: ModelParams,
    k: usize,
    variables: Vec<String>,
    /// date → 1-based cluster id
    assignments: BTreeMap<String, usize>,
    /// per cluster, member dates
    memberships: Vec<Vec<String>>,
    /// per cluster, 24 rows (hours) of m values
    centroids: Vec<Vec<Vec<f64>>>,
}

fn memberships_from_labels(labels: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if labels.contains(&usize::MAX) {
        return Err(Error::arg("a day has no cluster assignment"));
    }
    let mut memberships = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        memberships[l].push(i);
    }
    if let Some(empty) = memberships.iter().position(Vec::is_empty) {
        return Err(Error::arg(format!("cluster {} has no members", empty + 1)));
    }
    Ok(memberships)
}

/// Element-wise mean of each cluster's member day matrices.
pub fn compute_centroids(ds: &Dataset, memberships: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let width = ds.n_vars() * HOURS;
    memberships
        .iter()
        .enumerate()
        .map(|(k, members)| {
            if members.is_empty() {
                return Err(Error::arg(format!("cluster {} has no members", k + 1)));
            }
            // running mean: exact when all members agree at a position
            let mut mean = vec![0.0; width];
            for (seen, &i) in members.iter().enumerate() {
                let day = ds
                    .days
                    .get(i)
                    .ok_or_else(|| Error::arg(format!("day index {i} out of range")))?;
                let count = (seen + 1) as f64;
                for (m, x) in mean.iter_mut().zip(day.as_flat()) {
                    *m += (x - *m) / count;
                }
            }
            Ok(mean)
        })
        .collect()
}

/// Undoes the last `k - 1` merges of `history` and returns the model.
pub fn cut(history: &MergeHistory, k: usize, ds: &Dataset) -> Result<ClusterModel> {
    if history.n != ds.len() {
        return Err(Error::arg("merge history and dataset sizes differ"));
    }
    let labels = history.cut_labels(k)?;
    ClusterModel::from_labels(
        Method::from_linkage(history.linkage),
        ModelParams::default(),
        labels,
        ds,
    )
}

/// The member with the smallest total distance to the other members;
/// ties go to the lowest day index.
pub fn medoid(dm: &DistanceMatrix, members: &[usize]) -> Result<usize> {
    if members.is_empty() {
        return Err(Error::arg("medoid of an empty cluster"));
    }
    let mut best = (f64::INFINITY, usize::MAX);
    for &i in members {
        if i >= dm.n() {
            return Err(Error::arg(format!("day index {i} out of range")));
        }
        let total: f64 = members.iter().map(|&j| dm.get(i, j)).sum();
        if total < best.0 || (total == best.0 && i < best.1) {
            best = (total, i);
        }
    }
    Ok(best.1)
}

/// Result of one K-Means run on flattened day vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each center update.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target above the final sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..n)
        };
        let center = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &center));
        }
        centers.push(center);
    }
    centers
}

fn lloyd(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
    let n = points.len();
    let dim = points[0].len();
    let mut centers = plus_plus_init(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..KMEANS_MAX_ITER {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();

        let mut counts = vec![0usize; k];
        for &l in &next {
            counts[l] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            // move the point farthest from its center into the empty cluster
            let far = (0..n)
                .filter(|&i| counts[next[i]] > 1)
                .map(|i| (i, sq_dist(points[i], &centers[next[i]])))
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| {
                    if x.1 > acc.1 {
                        x
                    } else {
                        acc
                    }
                })
                .0;
            counts[next[far]] -= 1;
            next[far] = empty;
            counts[empty] = 1;
        }

        if next == labels {
            break;
        }
        labels = next;
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            *center = sum.into_iter().map(|s| s / count as f64).collect();
        }
        trace.push(inertia(points, &labels, &centers));
    }

    let inertia = inertia(points, &labels, &centers);
    KMeansFit {
        labels,
        centers,
        inertia,
        iterations,
        inertia_trace: trace,
    }
}

fn inertia(points: &[&[f64]], labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum()
}

/// Runs `restarts` seeded K-Means fits on the days flattened to 24·m
/// vectors and returns the lowest-inertia one (ties: earliest restart).
///
/// Restart `r` draws from a ChaCha8 stream seeded with `seed` on stream
/// `r`, so results do not depend on how restarts are scheduled.
pub fn kmeans_fit(ds: &Dataset, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let n = ds.len();
    if k < 1 || k > n {
        return Err(Error::arg(format!("K-Means needs 1 <= K <= {n}, got K = {k}")));
    }
    if restarts < 1 {
        return Err(Error::arg("K-Means needs at least one restart"));
    }
    let points: Vec<&[f64]> = ds.days.iter().map(|d| d.as_flat()).collect();
    let fits: Vec<KMeansFit> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(&points, k, &mut rng)
        })
        .collect();
    let best = fits
        .into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .expect("restarts >= 1");
    Ok(best)
}

/// [`kmeans_fit`] relabeled by first member day and wrapped as a model.
pub fn kmeans(ds: &Dataset, k: usize, seed: u64, restarts: usize) -> Result<ClusterModel> {
    let fit = kmeans_fit(ds, k, seed, restarts)?;
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    let labels = fit
        .labels
        .iter()
        .map(|&l| {
            if relabel[l] == usize::MAX {
                relabel[l] = next;
                next += 1;
            }
            relabel[l]
        })
        .collect();
    ClusterModel::from_labels(
        Method::KMeans,
        ModelParams {
            seed: Some(seed),
            restarts: Some(restarts),
            inertia: Some(fit.inertia),
            iterations: Some(fit.iterations),
        },
        labels,
        ds,
    )
}
