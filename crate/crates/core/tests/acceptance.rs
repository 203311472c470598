//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the terminal.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chrono::Datelike;
use rand::Rng;
use repday::clustering::{ahc, cut, kmeans, kmeans_fit, ClusterModel, Linkage, Method};
use repday::dtw::{brute_force_dtw, distance_matrix, dtw_distance, DistanceMatrix, DtwOptions};
use repday::ingest::{build_days, normalize, parse_csv, CsvSchema};
use repday::metrics::{self, cohesion_score, ma_scores, spearman, sweep, validate, SweepOptions};
use repday::report::{build_report, emit_svg, seasonal_coherence, ReportOptions, ScenarioReport};
use repday::synth::{self, GroundTruth, SynthConfig};
use repday::Dataset;
use tempfile::TempDir;

use common::*;

const SEED: u64 = 42;
const DAYS: usize = 730;
const K: usize = 14;

struct Shared {
    ds: Dataset,
    truth: GroundTruth,
    dm: DistanceMatrix,
    dm_time: Duration,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let out = synth::generate(&SynthConfig::new(SEED, DAYS)).unwrap();
        let csv = synth::to_csv(&out.dataset);
        let parsed = parse_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        let (raw, excl) = build_days(&parsed.records, &parsed.variable_names).unwrap();
        assert!(excl.is_empty());
        let ds = normalize(&raw).unwrap();
        let t = Instant::now();
        let dm = distance_matrix(&ds, &DtwOptions::default()).unwrap();
        Shared {
            ds,
            truth: out.truth,
            dm,
            dm_time: t.elapsed(),
        }
    })
}

/// ahc-average, ahc-complete and kmeans at K = 14 on the shared dataset.
fn models() -> &'static [ClusterModel; 3] {
    static CELL: OnceLock<[ClusterModel; 3]> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = shared();
        let avg = cut(&ahc(&s.dm, Linkage::Average).unwrap(), K, &s.ds).unwrap();
        let com = cut(&ahc(&s.dm, Linkage::Complete).unwrap(), K, &s.ds).unwrap();
        let km = kmeans(&s.ds, K, SEED, 10).unwrap();
        [avg, com, km]
    })
}

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_repday"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

/// Two independent end-to-end CLI runs on the pinned seed.
fn cli_runs() -> &'static Result<(TempDir, TempDir), String> {
    static CELL: OnceLock<Result<(TempDir, TempDir), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let stages: [&[&str]; 5] = [
            &["synth", "--seed", "42", "--days", "730"],
            &["ingest"],
            &["distances"],
            &["cluster", "--method", "ahc-average", "--k", "14"],
            &["report"],
        ];
        let mut dirs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            for args in stages {
                run_cli(args, dir.path())?;
            }
            dirs.push(dir);
        }
        let b = dirs.pop().unwrap();
        let a = dirs.pop().unwrap();
        Ok((a, b))
    })
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_dtw_oracle() -> Check {
    let mut r = rng(1);
    let t = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..r.random_range(2..=7)).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..r.random_range(2..=7)).map(|_| r.random()).collect();
        let fast = dtw_distance(&a, &b, None).map_err(|e| e.to_string())?;
        let slow = brute_force_dtw(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((fast - slow).abs());
    }
    let elapsed = t.elapsed();
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 pairs, max |fast - brute| = {worst:e}, {elapsed:.2?}"))
}

fn c2_hand_cases() -> Check {
    let a = dtw_distance(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0], None).map_err(|e| e.to_string())?;
    let b = dtw_distance(&[0.0, 2.0], &[0.0, 0.0], None).map_err(|e| e.to_string())?;
    ensure(a == 0.0, || format!("[0,0,1] vs [0,1,1] = {a}"))?;
    ensure(b == 2.0 / 3.0, || format!("[0,2] vs [0,0] = {b}"))?;
    Ok(format!("{a} and {b}"))
}

fn c3_ahc_reference() -> Check {
    let mut r = rng(3);
    let mut merges = 0;
    for trial in 0..100 {
        let n = r.random_range(2..=50);
        let integer = trial % 2 == 0;
        let d = random_matrix(&mut r, n, integer.then_some(4));
        let dm = DistanceMatrix::from_entries(n, d.concat()).map_err(|e| e.to_string())?;
        for (linkage, complete) in [(Linkage::Complete, true), (Linkage::Average, false)] {
            let got = ahc(&dm, linkage).map_err(|e| e.to_string())?;
            let want = naive_ahc(&d, complete);
            ensure(got.merges.len() == want.len(), || format!("trial {trial}: merge counts differ"))?;
            for (s, (g, w)) in got.merges.iter().zip(&want).enumerate() {
                ensure((g.left, g.right) == (w.left, w.right), || {
                    format!("trial {trial} {linkage:?} step {s}: ({}, {}) vs ({}, {})", g.left, g.right, w.left, w.right)
                })?;
                // integer matrices are exact in both; continuous sums may round differently
                let tol = if integer { 0.0 } else { 1e-12 };
                ensure((g.distance - w.distance).abs() <= tol, || {
                    format!("trial {trial} {linkage:?} step {s}: height {} vs {}", g.distance, w.distance)
                })?;
                merges += 1;
            }
        }
    }
    Ok(format!("100 matrices (50 integer-valued with ties), {merges} merges identical"))
}

fn c4_metric_recompute() -> Check {
    let s = shared();
    let opts = DtwOptions::default();
    let mut worst_score = 0.0f64;
    let mut worst_ma = 0.0f64;
    for model in models() {
        let v = validate(&s.ds, model, &opts).map_err(|e| e.to_string())?;
        let mc = v.mc.as_ref().ok_or("MC missing")?;
        let ss = v.ma.iter().zip(mc).map(|(a, c)| c - a).sum::<f64>() / v.ma.len() as f64;
        let cs = model
            .memberships
            .iter()
            .flat_map(|m| m.iter().map(|&i| v.ma[i]))
            .fold(0.0, f64::max);
        worst_score = worst_score.max((ss - v.ss.unwrap()).abs()).max((cs - v.cs).abs());
        // MA straight from the definition with independently built centroids
        let centroids: Vec<Vec<f64>> = model.memberships.iter().map(|m| centroid_of(&s.ds, m)).collect();
        for (i, day) in s.ds.days.iter().enumerate() {
            let ma = day_to_centroid(day, &centroids[model.assignments[i]]);
            worst_ma = worst_ma.max((ma - v.ma[i]).abs());
        }
    }
    ensure(worst_score <= 1e-12, || format!("SS/CS deviation {worst_score:e}"))?;
    ensure(worst_ma <= 1e-9, || format!("MA deviation {worst_ma:e}"))?;

    let mut r = rng(4);
    let mut worst_euclid = 0.0f64;
    for trial in 0..30 {
        let k = 2 + trial % 5;
        let ds = random_dataset(&mut r, 20, 1 + trial % 2);
        let labels = random_labels(&mut r, 20, k);
        let x: Vec<Vec<f64>> = ds.days.iter().map(|d| d.as_flat().to_vec()).collect();
        let model = ClusterModel::from_labels(Method::KMeans, Default::default(), labels.clone(), &ds)
            .map_err(|e| e.to_string())?;
        let pairs = [
            (metrics::calinski_harabasz(&ds, &model), ch_pairwise(&x, &labels, k)),
            (metrics::davies_bouldin(&ds, &model), db_definition(&x, &labels, k)),
            (metrics::silhouette(&ds, &model), silhouette_definition(&x, &labels, k)),
        ];
        for (got, want) in pairs {
            worst_euclid = worst_euclid.max((got.map_err(|e| e.to_string())? - want).abs());
        }
    }
    ensure(worst_euclid <= 1e-9, || format!("CH/DB/silhouette deviation {worst_euclid:e}"))?;
    Ok(format!(
        "SS/CS dev {worst_score:e}, MA dev {worst_ma:e}, CH/DB/Sil dev {worst_euclid:e} (30 sets, n = 20)"
    ))
}

fn c5_trivial_k() -> Check {
    let s = shared();
    let n = s.ds.len();
    let distinct: BTreeSet<Vec<u64>> = s
        .ds
        .days
        .iter()
        .map(|d| d.as_flat().iter().map(|x| x.to_bits()).collect())
        .collect();
    ensure(distinct.len() == n, || "synthetic days are not distinct".into())?;
    let model = cut(&ahc(&s.dm, Linkage::Average).map_err(|e| e.to_string())?, n, &s.ds)
        .map_err(|e| e.to_string())?;
    let ma = ma_scores(&s.ds, &model, &DtwOptions::default()).map_err(|e| e.to_string())?;
    let cs = cohesion_score(&ma, &model).map_err(|e| e.to_string())?;
    ensure(cs == 0.0, || format!("CS at K = N is {cs}"))?;
    let fit = kmeans_fit(&s.ds, n, SEED, 1).map_err(|e| e.to_string())?;
    ensure(fit.inertia == 0.0, || format!("inertia at K = N is {}", fit.inertia))?;
    ensure(metrics::silhouette(&s.ds, &model).is_err(), || "silhouette accepted K = N".into())?;
    let small = Dataset::new(s.ds.days[..12].to_vec(), s.ds.variable_names.clone(), None)
        .map_err(|e| e.to_string())?;
    let singletons = ClusterModel::from_labels(Method::KMeans, Default::default(), (0..12).collect(), &small)
        .map_err(|e| e.to_string())?;
    let v = validate(&small, &singletons, &DtwOptions::default()).map_err(|e| e.to_string())?;
    ensure(v.cs == 0.0 && v.silhouette.is_none(), || "validate at K = N".into())?;
    Ok(format!("N = {n}: CS = 0, inertia = 0, silhouette rejected"))
}

fn share_in_small(model: &ClusterModel, outliers: &[usize]) -> f64 {
    let sizes = model.sizes();
    let small = outliers.iter().filter(|&&i| sizes[model.assignments[i]] <= 3).count();
    small as f64 / outliers.len() as f64
}

fn c6_qualitative() -> Check {
    let s = shared();
    let [avg, _, km] = models();
    let dates = s.ds.dates();
    let outliers: Vec<usize> = s
        .truth
        .outlier_dates()
        .iter()
        .map(|d| dates.binary_search(d).unwrap())
        .collect();
    let share = outliers.len() as f64 / s.ds.len() as f64;
    ensure((0.01..=0.03).contains(&share), || format!("outlier share {share:.3}"))?;
    let (a_avg, a_km) = (share_in_small(avg, &outliers), share_in_small(km, &outliers));
    let coh_avg = seasonal_coherence(avg, &s.ds).map_err(|e| e.to_string())?;
    let coh_km = seasonal_coherence(km, &s.ds).map_err(|e| e.to_string())?;
    let min_avg = *avg.sizes().iter().min().unwrap();
    let min_km = *km.sizes().iter().min().unwrap();
    let detail = format!(
        "{} outliers; in size<=3 clusters: ahc-average {:.0}%, kmeans {:.0}%; coherence {coh_avg:.3} vs {coh_km:.3}; smallest cluster {min_km} vs {min_avg}",
        outliers.len(),
        100.0 * a_avg,
        100.0 * a_km
    );
    ensure(a_avg >= 0.6 && a_km <= 0.2, || format!("(a) fails: {detail}"))?;
    ensure(coh_avg >= coh_km, || format!("(b) fails: {detail}"))?;
    ensure(min_km >= 5 * min_avg, || format!("(c) fails: {detail}"))?;
    Ok(detail)
}

fn c7_sweep_shape() -> Check {
    let s = shared();
    let t = Instant::now();
    let (sw, fits) = sweep(&s.ds, Some(&s.dm), &Method::ALL, 2..=20, &SweepOptions::default())
        .map_err(|e| e.to_string())?;
    let total = s.dm_time + t.elapsed();
    ensure(sw.rows.len() == 57 && sw.rows.iter().all(|r| r.error.is_none()), || "sweep rows incomplete".into())?;
    ensure(fits.ahc == 2, || format!("{} AHC fits, expected one per linkage", fits.ahc))?;
    let rho = |m: Method, pick: fn(&metrics::SweepRow) -> Option<f64>| {
        let rows: Vec<_> = sw.rows_for(m).collect();
        let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| pick(r).unwrap()).collect();
        spearman(&ks, &ys)
    };
    let ss_avg = rho(Method::AhcAverage, |r| r.ss).ok_or("constant SS")?;
    let cs_avg = rho(Method::AhcAverage, |r| r.cs).ok_or("constant CS")?;
    let cs_com = rho(Method::AhcComplete, |r| r.cs).ok_or("constant CS")?;
    let detail = format!(
        "spearman SS(ahc-average) {ss_avg:.3}, CS(ahc-average) {cs_avg:.3}, CS(ahc-complete) {cs_com:.3}; {total:.1?} incl. distance matrix"
    );
    ensure(ss_avg < 0.0 && cs_avg < 0.0 && cs_com < 0.0, || detail.clone())?;
    ensure(total < Duration::from_secs(600), || detail.clone())?;
    Ok(detail)
}

fn c8_determinism() -> Check {
    let (a, b) = cli_runs().as_ref().map_err(Clone::clone)?;
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    ensure(ta.len() >= 9, || format!("only {} files written", ta.len()))?;
    ensure(ta == tb, || "output trees differ".into())?;
    let s = shared();
    let partitions: BTreeSet<Vec<usize>> = (1..=5u64)
        .map(|seed| kmeans(&s.ds, K, seed, 10).map(|m| m.assignments))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(partitions.len() >= 2, || "K-Means gave one partition for 5 seeds".into())?;
    Ok(format!(
        "{} files byte-identical across two CLI runs; K-Means seeds 1-5 gave {} distinct partitions",
        ta.len(),
        partitions.len()
    ))
}

fn check_report(r: &ScenarioReport, ds: &Dataset, svg: &str) -> Result<(), String> {
    r.check_conservation().map_err(|e| e.to_string())?;
    let mut per_month = [0usize; 12];
    for c in &r.clusters {
        let mut own = [0usize; 12];
        for d in &c.dates {
            own[d.month0() as usize] += 1;
        }
        ensure(c.histogram == own, || format!("cluster {} histogram mismatch", c.id))?;
        for (m, x) in own.iter().enumerate() {
            per_month[m] += x;
        }
    }
    let mut calendar = [0usize; 12];
    for d in &ds.days {
        calendar[d.date.month0() as usize] += 1;
    }
    ensure(per_month == calendar, || "monthly totals differ from the calendar".into())?;
    let members: usize = r.clusters.iter().map(|c| c.members).sum();
    ensure(members == ds.len(), || format!("{members} members for {} days", ds.len()))?;
    let doc = roxmltree::Document::parse(svg).map_err(|e| format!("SVG: {e}"))?;
    let panels = doc
        .descendants()
        .filter(|n| n.is_element() && n.attribute("class") == Some("histogram-panel"))
        .count();
    ensure(panels == r.k, || format!("{panels} histogram panels for K = {}", r.k))
}

fn c9_report_conservation() -> Check {
    let s = shared();
    let mut checked = 0;
    for model in models() {
        for opts in [
            ReportOptions::default(),
            ReportOptions {
                representative: repday::report::Representative::Medoid,
                denormalize: false,
            },
        ] {
            let r = build_report(model, &s.ds, Some(&s.dm), &opts).map_err(|e| e.to_string())?;
            check_report(&r, &s.ds, &emit_svg(&r))?;
            checked += 1;
        }
    }
    let (a, _) = cli_runs().as_ref().map_err(Clone::clone)?;
    let read = |name: &str| std::fs::read_to_string(a.path().join(name)).map_err(|e| e.to_string());
    let r = ScenarioReport::from_json(&read("report.json")?).map_err(|e| e.to_string())?;
    let ds = Dataset::load(&a.path().join("dataset.json")).map_err(|e| e.to_string())?;
    check_report(&r, &ds, &read("report.svg")?)?;
    Ok(format!("{} reports: sums conserved, SVG well-formed with K panels", checked + 1))
}

fn main() {
    let checks: [(u8, &str, fn() -> Check); 9] = [
        (1, "DTW oracle equivalence", c1_dtw_oracle),
        (2, "DTW hand cases", c2_hand_cases),
        (3, "AHC reference equivalence", c3_ahc_reference),
        (4, "metric recomputation", c4_metric_recompute),
        (5, "trivial-K identities", c5_trivial_k),
        (6, "qualitative reproduction", c6_qualitative),
        (7, "sweep shape", c7_sweep_shape),
        (8, "determinism", c8_determinism),
        (9, "report conservation", c9_report_conservation),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail} [{:.1?}]", t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name}: {why} [{:.1?}]", t.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
