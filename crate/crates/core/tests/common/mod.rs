//! Reference implementations written straight from the definitions, used as
//! oracles by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repday::ingest::{DayProfile, HOURS};
use repday::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveMerge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
}

/// Agglomerative clustering that recomputes every linkage from the member
/// lists at every step. Ties go to the lexicographically smallest
/// (distance, smaller id, larger id); the cluster made by step `s` is `n + s`.
pub fn naive_ahc(d: &[Vec<f64>], complete: bool) -> Vec<NaiveMerge> {
    let n = d.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                let (ia, ma) = &clusters[x];
                let (ib, mb) = &clusters[y];
                let link = if complete {
                    let mut worst = f64::NEG_INFINITY;
                    for &i in ma {
                        for &j in mb {
                            worst = worst.max(d[i][j]);
                        }
                    }
                    worst
                } else {
                    let mut sum = 0.0;
                    for &i in ma {
                        for &j in mb {
                            sum += d[i][j];
                        }
                    }
                    sum / (ma.len() * mb.len()) as f64
                };
                let (lo, hi) = ((*ia).min(*ib), (*ia).max(*ib));
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => link < bd || (link == bd && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((link, lo, hi, x, y));
                }
            }
        }
        let (distance, left, right, x, y) = best.unwrap();
        let mut members = clusters[x].1.clone();
        members.extend(&clusters[y].1);
        members.sort_unstable();
        clusters.remove(y);
        clusters.remove(x);
        clusters.push((n + step, members));
        merges.push(NaiveMerge {
            left,
            right,
            distance,
        });
    }
    merges
}

/// Symmetric zero-diagonal matrix; integer-valued entries in `0..levels`
/// when `levels` is set (many exact ties), otherwise uniform in [0, 1).
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, levels: Option<u32>) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let x = match levels {
                Some(l) => rng.random_range(0..l) as f64,
                None => rng.random::<f64>(),
            };
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    d
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn mean_of(points: &[&Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; points[0].len()];
    for p in points {
        for (a, b) in m.iter_mut().zip(p.iter()) {
            *a += b;
        }
    }
    m.iter().map(|x| x / points.len() as f64).collect()
}

fn groups(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut g = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        g[l].push(i);
    }
    g
}

/// Calinski-Harabasz through pairwise squared distances:
/// W = Σ_k (1 / 2n_k) Σ_{i,j∈k} |x_i − x_j|², T likewise over all points,
/// B = T − W.
pub fn ch_pairwise(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = x.len();
    let sq = |i: usize, j: usize| euclid(&x[i], &x[j]).powi(2);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += sq(i, j);
        }
    }
    total /= 2.0 * n as f64;
    let mut within = 0.0;
    for g in groups(labels, k) {
        let mut s = 0.0;
        for &i in &g {
            for &j in &g {
                s += sq(i, j);
            }
        }
        within += s / (2.0 * g.len() as f64);
    }
    let between = total - within;
    between / (k - 1) as f64 / (within / (n - k) as f64)
}

pub fn db_definition(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let g = groups(labels, k);
    let centers: Vec<Vec<f64>> = g
        .iter()
        .map(|m| mean_of(&m.iter().map(|&i| &x[i]).collect::<Vec<_>>()))
        .collect();
    let scatter: Vec<f64> = g
        .iter()
        .zip(&centers)
        .map(|(m, c)| m.iter().map(|&i| euclid(&x[i], c)).sum::<f64>() / m.len() as f64)
        .collect();
    (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| b != a)
                .map(|b| (scatter[a] + scatter[b]) / euclid(&centers[a], &centers[b]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

pub fn silhouette_definition(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let g = groups(labels, k);
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = &g[labels[i]];
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| euclid(&x[i], &x[j])).sum::<f64>()
            / (own.len() - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i])
            .map(|c| g[c].iter().map(|&j| euclid(&x[i], &x[j])).sum::<f64>() / g[c].len() as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// Per-variable DTW sum with unit weights between a day and a flat centroid.
pub fn day_to_centroid(day: &DayProfile, centroid: &[f64]) -> f64 {
    (0..day.n_vars())
        .map(|v| {
            repday::dtw::dtw_distance(day.column(v), &centroid[v * HOURS..(v + 1) * HOURS], None)
                .unwrap()
        })
        .sum()
}

/// Straightforward mean of member days.
pub fn centroid_of(ds: &Dataset, members: &[usize]) -> Vec<f64> {
    let width = ds.n_vars() * HOURS;
    let mut c = vec![0.0; width];
    for &i in members {
        for (a, b) in c.iter_mut().zip(ds.days[i].as_flat()) {
            *a += b;
        }
    }
    c.iter().map(|x| x / members.len() as f64).collect()
}

/// Random dataset of `n` days with `m` variables, values in [0, 1).
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Dataset {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let days = (0..n)
        .map(|d| {
            let columns: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..HOURS).map(|_| rng.random::<f64>()).collect())
                .collect();
            DayProfile::from_columns(start + chrono::Duration::days(d as i64 * 11), &columns).unwrap()
        })
        .collect();
    let names = (0..m).map(|v| format!("v{v}")).collect();
    Dataset::new(days, names, None).unwrap()
}

/// Labels in `0..k` with every label used at least once.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        if labels.iter().collect::<BTreeSet<_>>().len() == k {
            return labels;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative paths and contents of every file below `dir`, sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
