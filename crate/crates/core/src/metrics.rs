//! Cluster validation.
//!
//! Two DTW-based scores judge each day against the cluster centroids:
//!
//! * `MA_i`, the DTW distance from day `i` to its own centroid, and
//! * `MC_i`, the smallest DTW distance from day `i` to any other centroid.
//!
//! The separation score is the mean of `MC_i - MA_i` (higher is better and
//! may be negative); the cohesion score is the largest `MA_i` anywhere
//! (lower is better). The Calinski-Harabasz, Davies-Bouldin and silhouette
//! indices are kept Euclidean on the flattened 24·m day vectors so the two
//! families can be compared.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusterModel, Method, MergeHistory};
use crate::dtw::{self, DistanceMatrix, DtwOptions};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::util::{self, sig6};

fn check_model(ds: &Dataset, model: &ClusterModel) -> Result<()> {
    if model.n() != ds.len() {
        return Err(Error::arg(format!(
            "model assigns {} days, dataset has {}",
            model.n(),
            ds.len()
        )));
    }
    if model.centroids.len() != model.k() {
        return Err(Error::arg("model has no centroid for some cluster"));
    }
    Ok(())
}

/// DTW distance of every day to its own cluster centroid.
pub fn ma_scores(ds: &Dataset, model: &ClusterModel, opts: &DtwOptions) -> Result<Vec<f64>> {
    check_model(ds, model)?;
    ds.days
        .par_iter()
        .zip(&model.assignments)
        .map(|(day, &k)| {
            let centroid = model
                .centroids
                .get(k)
                .ok_or_else(|| Error::arg(format!("day {} has no valid cluster", day.date)))?;
            dtw::profile_dtw(day.as_flat(), centroid, opts)
        })
        .collect()
}

/// DTW distance of every day to the nearest centroid of another cluster.
pub fn mc_scores(ds: &Dataset, model: &ClusterModel, opts: &DtwOptions) -> Result<Vec<f64>> {
    check_model(ds, model)?;
    if model.k() < 2 {
        return Err(Error::arg("MC undefined for a single cluster"));
    }
    ds.days
        .par_iter()
        .zip(&model.assignments)
        .map(|(day, &own)| {
            let mut best = f64::INFINITY;
            for (k, centroid) in model.centroids.iter().enumerate() {
                if k != own {
                    best = best.min(dtw::profile_dtw(day.as_flat(), centroid, opts)?);
                }
            }
            Ok(best)
        })
        .collect()
}

/// Mean of `MC_i - MA_i`. Not clamped: days closer to a foreign centroid
/// pull it below zero.
pub fn separation_score(ma: &[f64], mc: &[f64]) -> Result<f64> {
    if ma.is_empty() || ma.len() != mc.len() {
        return Err(Error::arg(format!(
            "separation score needs equal non-empty lists ({} vs {})",
            ma.len(),
            mc.len()
        )));
    }
    let total: f64 = mc.iter().zip(ma).map(|(c, a)| c - a).sum();
    Ok(total / ma.len() as f64)
}

/// Worst day-to-own-centroid distance over all clusters.
pub fn cohesion_score(ma: &[f64], model: &ClusterModel) -> Result<f64> {
    if ma.len() != model.n() {
        return Err(Error::arg("MA list does not match the model"));
    }
    Ok(model
        .memberships
        .iter()
        .map(|members| members.iter().map(|&i| ma[i]).fold(0.0, f64::max))
        .fold(0.0, f64::max))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_k(model: &ClusterModel, max_k: usize, name: &str) -> Result<()> {
    let k = model.k();
    if k < 2 || k > max_k {
        return Err(Error::arg(format!(
            "{name} needs 2 <= K <= {max_k}, got K = {k}"
        )));
    }
    Ok(())
}

/// Calinski-Harabasz index: between-cluster over within-cluster dispersion,
/// each divided by its degrees of freedom. Returns 1.0 when the
/// within-cluster dispersion is zero.
pub fn calinski_harabasz(ds: &Dataset, model: &ClusterModel) -> Result<f64> {
    check_model(ds, model)?;
    let n = ds.len();
    check_k(model, n.saturating_sub(1), "Calinski-Harabasz")?;
    let k = model.k();
    let width = ds.days[0].as_flat().len();
    let mut mean = vec![0.0; width];
    for day in &ds.days {
        for (m, x) in mean.iter_mut().zip(day.as_flat()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let between: f64 = model
        .memberships
        .iter()
        .zip(&model.centroids)
        .map(|(members, c)| members.len() as f64 * sq_dist(c, &mean))
        .sum();
    let within: f64 = ds
        .days
        .iter()
        .zip(&model.assignments)
        .map(|(day, &l)| sq_dist(day.as_flat(), &model.centroids[l]))
        .sum();
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n - k) as f64 / (within * (k - 1) as f64))
}

/// Davies-Bouldin index: mean over clusters of the worst
/// `(s_k + s_l) / ||c_k - c_l||`, with `s_k` the mean member distance to
/// the centroid. Coincident centroids contribute 0.
pub fn davies_bouldin(ds: &Dataset, model: &ClusterModel) -> Result<f64> {
    check_model(ds, model)?;
    check_k(model, ds.len(), "Davies-Bouldin")?;
    let scatter: Vec<f64> = model
        .memberships
        .iter()
        .zip(&model.centroids)
        .map(|(members, c)| {
            members
                .iter()
                .map(|&i| sq_dist(ds.days[i].as_flat(), c).sqrt())
                .sum::<f64>()
                / members.len() as f64
        })
        .collect();
    let k = model.k();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in 0..k {
            if a == b {
                continue;
            }
            let sep = sq_dist(&model.centroids[a], &model.centroids[b]).sqrt();
            if sep > 0.0 {
                worst = worst.max((scatter[a] + scatter[b]) / sep);
            }
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Mean silhouette coefficient under Euclidean distance. Members of
/// singleton clusters score 0.
pub fn silhouette(ds: &Dataset, model: &ClusterModel) -> Result<f64> {
    check_model(ds, model)?;
    let n = ds.len();
    check_k(model, n.saturating_sub(1), "silhouette")?;
    let k = model.k();
    let sizes = model.sizes();
    let per_day: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = model.assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let xi = ds.days[i].as_flat();
            for (j, day) in ds.days.iter().enumerate() {
                if j != i {
                    sums[model.assignments[j]] += sq_dist(xi, day.as_flat()).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(per_day.iter().sum::<f64>() / n as f64)
}

/// All scores for one clustering. Scores whose preconditions fail for this
/// K (MC and SS at K = 1; CH and silhouette at K = N) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub method: Method,
    pub k: usize,
    pub ma: Vec<f64>,
    pub mc: Option<Vec<f64>>,
    pub ss: Option<f64>,
    pub cs: f64,
    pub ch: Option<f64>,
    pub db: Option<f64>,
    pub silhouette: Option<f64>,
}

impl ValidationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        push_row(
            &mut out,
            self.method,
            self.k,
            [self.ss, Some(self.cs), self.ch, self.db, self.silhouette],
            None,
        );
        out
    }
}

/// Computes every score for `model`.
pub fn validate(ds: &Dataset, model: &ClusterModel, opts: &DtwOptions) -> Result<ValidationReport> {
    let ma = ma_scores(ds, model, opts)?;
    let cs = cohesion_score(&ma, model)?;
    let k = model.k();
    let (mc, ss) = if k >= 2 {
        let mc = mc_scores(ds, model, opts)?;
        let ss = separation_score(&ma, &mc)?;
        (Some(mc), Some(ss))
    } else {
        (None, None)
    };
    let defined = |r: Result<f64>| r.ok();
    Ok(ValidationReport {
        method: model.method,
        k,
        ma,
        mc,
        ss,
        cs,
        ch: defined(calinski_harabasz(ds, model)),
        db: defined(davies_bouldin(ds, model)),
        silhouette: defined(silhouette(ds, model)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub k: usize,
    pub ss: Option<f64>,
    pub cs: Option<f64>,
    pub ch: Option<f64>,
    pub db: Option<f64>,
    pub silhouette: Option<f64>,
    /// Set when fitting or scoring this row failed.
    pub error: Option<String>,
}

/// One row per (method, K), methods in the order requested and K ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSweep {
    pub rows: Vec<SweepRow>,
}

const SWEEP_HEADER: &str = "method,k,ss,cs,ch,db,silhouette,error";

fn push_row(out: &mut String, method: Method, k: usize, vals: [Option<f64>; 5], error: Option<&str>) {
    let _ = write!(out, "{method},{k}");
    for v in vals {
        out.push(',');
        if let Some(x) = v {
            out.push_str(&sig6(x));
        }
    }
    out.push(',');
    if let Some(e) = error {
        out.push('"');
        out.push_str(&e.replace('"', "\"\""));
        out.push('"');
    }
    out.push('\n');
}

impl MetricSweep {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            push_row(
                &mut out,
                r.method,
                r.k,
                [r.ss, r.cs, r.ch, r.db, r.silhouette],
                r.error.as_deref(),
            );
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        util::write_file(&dir.join("sweep.json"), self.to_json()?)?;
        util::write_file(&dir.join("sweep.csv"), self.to_csv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub dtw: DtwOptions,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            dtw: DtwOptions::default(),
            seed: 42,
            restarts: 10,
        }
    }
}

/// How many model fits a sweep performed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitCounts {
    pub ahc: usize,
    pub kmeans: usize,
}

/// Fits every method at every K and scores it. Each AHC linkage is fitted
/// once and cut at every K; K-Means is refitted per K with the same seed.
/// A failing row is recorded with its error and the sweep continues.
/// `dm` is required when any AHC method is requested.
pub fn sweep(
    ds: &Dataset,
    dm: Option<&DistanceMatrix>,
    methods: &[Method],
    k_range: RangeInclusive<usize>,
    opts: &SweepOptions,
) -> Result<(MetricSweep, FitCounts)> {
    let n = ds.len();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi > n.saturating_sub(1) || lo > hi {
        return Err(Error::arg(format!(
            "K range {lo}..={hi} must lie within 2..={}",
            n.saturating_sub(1)
        )));
    }
    if let Some(dm) = dm {
        dm.check_matches(ds)?;
    }
    let dm_for_ahc = || dm.ok_or_else(|| Error::arg("AHC needs a distance matrix"));
    if methods.iter().any(|m| m.linkage().is_some()) {
        dm_for_ahc()?;
    }

    let ahc_fits = AtomicUsize::new(0);
    let kmeans_fits = AtomicUsize::new(0);
    let histories: Vec<(Method, Result<MergeHistory>)> = methods
        .iter()
        .filter_map(|&m| m.linkage().map(|l| (m, l)))
        .map(|(m, l)| {
            ahc_fits.fetch_add(1, Ordering::Relaxed);
            (m, dm_for_ahc().and_then(|dm| clustering::ahc(dm, l)))
        })
        .collect();

    let tasks: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| k_range.clone().map(move |k| (m, k)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(method, k)| {
            let fitted = match method {
                Method::KMeans => {
                    kmeans_fits.fetch_add(1, Ordering::Relaxed);
                    clustering::kmeans(ds, k, opts.seed, opts.restarts)
                }
                _ => {
                    let (_, history) = histories
                        .iter()
                        .find(|(m, _)| *m == method)
                        .expect("history fitted for every AHC method");
                    match history {
                        Ok(h) => clustering::cut(h, k, ds),
                        Err(e) => Err(Error::Argument(e.to_string())),
                    }
                }
            };
            match fitted.and_then(|model| validate(ds, &model, &opts.dtw)) {
                Ok(v) => SweepRow {
                    method,
                    k,
                    ss: v.ss,
                    cs: Some(v.cs),
                    ch: v.ch,
                    db: v.db,
                    silhouette: v.silhouette,
                    error: None,
                },
                Err(e) => SweepRow {
                    method,
                    k,
                    ss: None,
                    cs: None,
                    ch: None,
                    db: None,
                    silhouette: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    Ok((
        MetricSweep { rows },
        FitCounts {
            ahc: ahc_fits.into_inner(),
            kmeans: kmeans_fits.into_inner(),
        },
    ))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
