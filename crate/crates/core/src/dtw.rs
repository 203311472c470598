//! Time-normalized dynamic time warping.
//!
//! The distance between two series is the minimum over warping paths of the
//! mean local cost along the path, `Σ |a[i_s] - b[j_s]| / k`, where `k` is
//! the number of aligned pairs. Because the divisor depends on the path,
//! the usual cumulative-cost recurrence does not minimize it. Instead the
//! DP is layered by the number of diagonal moves `D`: a path reaching
//! `(i, j)` with `D` diagonal moves always has `i + j + 1 - D` cells, so
//! minimizing the raw cost per `(i, j, D)` state and dividing at the end is
//! exact.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{Dataset, DayProfile, HOURS};
use crate::util;

/// Longest series [`brute_force_dtw`] accepts.
pub const BRUTE_FORCE_MAX_LEN: usize = 8;

/// A monotone alignment between two series, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpingPath {
    pub steps: Vec<(usize, usize)>,
}

impl WarpingPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks endpoints and unit steps against series lengths.
    pub fn is_admissible(&self, len_a: usize, len_b: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.steps.first(), self.steps.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (len_a - 1, len_b - 1)
            && self.steps.windows(2).all(|w| {
                let di = w[1].0.wrapping_sub(w[0].0);
                let dj = w[1].1.wrapping_sub(w[0].1);
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }

    /// Mean absolute difference along the path.
    pub fn cost(&self, a: &[f64], b: &[f64]) -> f64 {
        let total = self
            .steps
            .iter()
            .fold(0.0, |acc, &(i, j)| acc + (a[i] - b[j]).abs());
        total / self.steps.len() as f64
    }
}

fn check_series(a: &[f64], b: &[f64], window: Option<usize>) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("DTW needs non-empty series"));
    }
    if let Some(w) = window {
        let diff = a.len().abs_diff(b.len());
        if w < diff {
            return Err(Error::arg(format!(
                "window {w} is narrower than the length difference {diff}"
            )));
        }
    }
    Ok(())
}

#[inline]
fn in_band(i: usize, j: usize, window: Option<usize>) -> bool {
    window.is_none_or(|w| i.abs_diff(j) <= w)
}

/// Offset of cell `j` inside the packed state row `i`, where cell `j` holds
/// `min(i, j) + 1` diagonal-count layers.
#[inline]
fn row_offset(i: usize, j: usize) -> usize {
    if j <= i {
        j * (j + 1) / 2
    } else {
        (i + 1) * (i + 2) / 2 + (j - i - 1) * (i + 1)
    }
}

/// Time-normalized DTW distance with absolute-difference local cost.
///
/// `window` is an optional Sakoe-Chiba band half-width; it must be at least
/// the length difference of the two series.
pub fn dtw_distance(a: &[f64], b: &[f64], window: Option<usize>) -> Result<f64> {
    check_series(a, b, window)?;
    Ok(layered_dtw(a, b, window))
}

fn layered_dtw(a: &[f64], b: &[f64], window: Option<usize>) -> f64 {
    let (n, m) = (a.len(), b.len());
    let row_len = row_offset(n - 1, m);
    let mut prev = vec![f64::INFINITY; row_len];
    let mut cur = vec![f64::INFINITY; row_len];

    for i in 0..n {
        for j in 0..m {
            let base = row_offset(i, j);
            let layers = i.min(j) + 1;
            if !in_band(i, j, window) {
                cur[base..base + layers].fill(f64::INFINITY);
                continue;
            }
            let d = (a[i] - b[j]).abs();
            if i == 0 && j == 0 {
                cur[0] = d;
                continue;
            }
            for layer in 0..layers {
                let mut best = f64::INFINITY;
                // from (i - 1, j)
                if i > 0 && layer <= (i - 1).min(j) {
                    best = best.min(prev[row_offset(i - 1, j) + layer]);
                }
                // from (i, j - 1)
                if j > 0 && layer <= i.min(j - 1) {
                    best = best.min(cur[row_offset(i, j - 1) + layer]);
                }
                // from (i - 1, j - 1), one more diagonal move
                if layer > 0 {
                    best = best.min(prev[row_offset(i - 1, j - 1) + layer - 1]);
                }
                cur[base + layer] = d + best;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let base = row_offset(n - 1, m - 1);
    (0..n.min(m))
        .map(|layer| prev[base + layer] / (n + m - 1 - layer) as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Like [`dtw_distance`] but also returns an optimal warping path.
pub fn dtw_path(a: &[f64], b: &[f64], window: Option<usize>) -> Result<(f64, WarpingPath)> {
    check_series(a, b, window)?;
    let (n, m) = (a.len(), b.len());
    // table[i][j][layer]
    let mut table = vec![vec![Vec::new(); m]; n];
    for i in 0..n {
        for j in 0..m {
            let layers = i.min(j) + 1;
            let mut cell = vec![f64::INFINITY; layers];
            if in_band(i, j, window) {
                let d = (a[i] - b[j]).abs();
                if i == 0 && j == 0 {
                    cell[0] = d;
                } else {
                    for (layer, slot) in cell.iter_mut().enumerate() {
                        let mut best = f64::INFINITY;
                        if i > 0 && layer < table[i - 1][j].len() {
                            best = best.min(table[i - 1][j][layer]);
                        }
                        if j > 0 && layer < table[i][j - 1].len() {
                            best = best.min(table[i][j - 1][layer]);
                        }
                        if layer > 0 {
                            best = best.min(table[i - 1][j - 1][layer - 1]);
                        }
                        *slot = d + best;
                    }
                }
            }
            table[i][j] = cell;
        }
    }

    let (mut layer, dist) = table[n - 1][m - 1]
        .iter()
        .enumerate()
        .map(|(l, &c)| (l, c / (n + m - 1 - l) as f64))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });

    let (mut i, mut j) = (n - 1, m - 1);
    let mut steps = vec![(i, j)];
    while (i, j) != (0, 0) {
        let rest = table[i][j][layer] - (a[i] - b[j]).abs();
        let mut candidates: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(3);
        if layer > 0 {
            candidates.push((table[i - 1][j - 1][layer - 1], i - 1, j - 1, layer - 1));
        }
        if i > 0 && layer < table[i - 1][j].len() {
            candidates.push((table[i - 1][j][layer], i - 1, j, layer));
        }
        if j > 0 && layer < table[i][j - 1].len() {
            candidates.push((table[i][j - 1][layer], i, j - 1, layer));
        }
        let &(_, pi, pj, pl) = candidates
            .iter()
            .min_by(|x, y| (x.0 - rest).abs().total_cmp(&(y.0 - rest).abs()))
            .expect("interior cells have a predecessor");
        (i, j, layer) = (pi, pj, pl);
        steps.push((i, j));
    }
    steps.reverse();
    Ok((dist, WarpingPath { steps }))
}

/// Minimum time-normalized cost by enumerating every admissible path.
/// Exponential; limited to series of at most [`BRUTE_FORCE_MAX_LEN`].
pub fn brute_force_dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    check_series(a, b, None)?;
    if a.len() > BRUTE_FORCE_MAX_LEN || b.len() > BRUTE_FORCE_MAX_LEN {
        return Err(Error::arg(format!(
            "brute-force DTW is limited to series of length {BRUTE_FORCE_MAX_LEN}"
        )));
    }
    let mut best = f64::INFINITY;
    let mut path = vec![(0, 0)];
    enumerate_paths(a.len(), b.len(), &mut path, &mut |p| {
        let total = p.iter().fold(0.0, |acc, &(i, j)| acc + (a[i] - b[j]).abs());
        best = best.min(total / p.len() as f64);
    });
    Ok(best)
}

/// Calls `visit` with every admissible warping path between series of
/// lengths `n` and `m`.
pub fn for_each_path(n: usize, m: usize, mut visit: impl FnMut(&[(usize, usize)])) {
    if n == 0 || m == 0 {
        return;
    }
    let mut path = vec![(0, 0)];
    enumerate_paths(n, m, &mut path, &mut visit);
}

fn enumerate_paths(
    n: usize,
    m: usize,
    path: &mut Vec<(usize, usize)>,
    visit: &mut impl FnMut(&[(usize, usize)]),
) {
    let (i, j) = *path.last().expect("path starts at origin");
    if (i, j) == (n - 1, m - 1) {
        visit(path);
        return;
    }
    for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
        let (ni, nj) = (i + di, j + dj);
        if ni < n && nj < m {
            path.push((ni, nj));
            enumerate_paths(n, m, path, visit);
            path.pop();
        }
    }
}

/// Options shared by every day-to-day distance computation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DtwOptions {
    /// Sakoe-Chiba band half-width; `None` runs the full DP.
    pub window: Option<usize>,
    /// Per-variable weights; `None` means unit weights.
    pub weights: Option<Vec<f64>>,
}

impl DtwOptions {
    pub fn validate(&self, n_vars: usize) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != n_vars {
                return Err(Error::arg(format!(
                    "{} weights given for {n_vars} variables",
                    w.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::arg("weights must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn weight(&self, var: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[var])
    }

    /// Weights with the unit default filled in.
    pub fn resolved_weights(&self, n_vars: usize) -> Vec<f64> {
        (0..n_vars).map(|v| self.weight(v)).collect()
    }
}

/// Weighted sum of per-variable DTW distances between two days.
pub fn multivariate_dtw(a: &DayProfile, b: &DayProfile, opts: &DtwOptions) -> Result<f64> {
    if a.n_vars() != b.n_vars() {
        return Err(Error::arg(format!(
            "variable mismatch: {} vs {} variables",
            a.n_vars(),
            b.n_vars()
        )));
    }
    profile_dtw(a.as_flat(), b.as_flat(), opts)
}

/// [`multivariate_dtw`] on variable-major 24·m buffers, e.g. a day against
/// a cluster centroid.
pub fn profile_dtw(a: &[f64], b: &[f64], opts: &DtwOptions) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() || !a.len().is_multiple_of(HOURS) {
        return Err(Error::arg(format!(
            "profiles must be non-empty 24-hour matrices of equal shape ({} vs {} values)",
            a.len(),
            b.len()
        )));
    }
    let n_vars = a.len() / HOURS;
    opts.validate(n_vars)?;
    let mut total = 0.0;
    for v in 0..n_vars {
        let w = opts.weight(v);
        if w == 0.0 {
            continue;
        }
        let cols = v * HOURS..(v + 1) * HOURS;
        total += w * dtw_distance(&a[cols.clone()], &b[cols], opts.window)?;
    }
    Ok(total)
}

/// Symmetric matrix of pairwise day distances plus the context it was
/// computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
    pub variable_names: Vec<String>,
    pub weights: Vec<f64>,
    pub window: Option<usize>,
    pub dates: Vec<NaiveDate>,
}

impl DistanceMatrix {
    /// Wraps a full row-major `n × n` buffer. Checks symmetry, zero
    /// diagonal and non-negativity.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::arg(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::arg(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..i {
                let x = entries[i * n + j];
                if x != entries[j * n + i] {
                    return Err(Error::arg(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::arg(format!("entry ({i},{j}) = {x} is not a distance")));
                }
            }
        }
        Ok(DistanceMatrix {
            n,
            entries,
            variable_names: Vec::new(),
            weights: Vec::new(),
            window: None,
            dates: Vec::new(),
        })
    }

    /// Builds from the strict lower triangle, row-major (`(1,0), (2,0), (2,1), ...`).
    pub fn from_lower_triangle(n: usize, lower: &[f64]) -> Result<Self> {
        if lower.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::arg("lower triangle has the wrong length"));
        }
        let mut entries = vec![0.0; n * n];
        let mut it = lower.iter();
        for i in 1..n {
            for j in 0..i {
                let x = *it.next().expect("length checked");
                entries[i * n + j] = x;
                entries[j * n + i] = x;
            }
        }
        Self::from_entries(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Text form: a small header (`n`, `variables`, `weights`, `window`,
    /// `dates`), then rows `1..n` of the strict lower triangle, one
    /// comma-separated row per line. Floats use shortest round-trip
    /// formatting, so reading the file back is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n,{}", self.n);
        let _ = writeln!(out, "variables,{}", self.variable_names.join(","));
        let weights: Vec<String> = self.weights.iter().map(|w| format!("{w}")).collect();
        let _ = writeln!(out, "weights,{}", weights.join(","));
        match self.window {
            Some(w) => {
                let _ = writeln!(out, "window,{w}");
            }
            None => out.push_str("window,none\n"),
        }
        let dates: Vec<String> = self.dates.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "dates,{}", dates.join(","));
        for i in 1..self.n {
            let row: Vec<String> = (0..i).map(|j| format!("{}", self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("distance matrix: missing '{key}' line")))?;
            let mut fields = line.split(',');
            if fields.next() != Some(key) {
                return Err(Error::Format(format!(
                    "distance matrix: expected '{key}' header, found '{line}'"
                )));
            }
            Ok(fields.filter(|f| !f.is_empty()).map(str::to_string).collect())
        };
        let bad = |what: &str| Error::Format(format!("distance matrix: bad {what}"));
        let n: usize = header("n")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("n"))?;
        let variable_names = header("variables")?;
        let weights = header("weights")?
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad("weight")))
            .collect::<Result<Vec<_>>>()?;
        let window = match header("window")?.first().map(String::as_str) {
            None | Some("none") => None,
            Some(s) => Some(s.parse().map_err(|_| bad("window"))?),
        };
        let dates = header("dates")?
            .iter()
            .map(|s| s.parse::<NaiveDate>().map_err(|_| bad("date")))
            .collect::<Result<Vec<_>>>()?;

        let mut lower = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 1..n {
            let line = lines.next().ok_or_else(|| bad("row count"))?;
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad("entry")))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != i {
                return Err(Error::Format(format!(
                    "distance matrix: row {i} has {} entries",
                    row.len()
                )));
            }
            lower.extend(row);
        }
        let mut dm = Self::from_lower_triangle(n, &lower).map_err(|e| match e {
            Error::Argument(m) => Error::Format(format!("distance matrix: {m}")),
            other => other,
        })?;
        dm.variable_names = variable_names;
        dm.weights = weights;
        dm.window = window;
        dm.dates = dates;
        Ok(dm)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, self.to_csv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = util::read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
        Self::from_csv(&text)
    }

    /// Errors unless this matrix was computed for exactly the days of `ds`.
    pub fn check_matches(&self, ds: &Dataset) -> Result<()> {
        if self.n != ds.len() {
            return Err(Error::arg(format!(
                "distance matrix covers {} days, dataset has {}",
                self.n,
                ds.len()
            )));
        }
        if !self.dates.is_empty() && self.dates != ds.dates() {
            return Err(Error::arg("distance matrix dates differ from the dataset"));
        }
        Ok(())
    }
}

/// All pairwise multivariate DTW distances. Only pairs `j < i` are
/// evaluated; the upper triangle is mirrored.
pub fn distance_matrix(ds: &Dataset, opts: &DtwOptions) -> Result<DistanceMatrix> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::arg(format!("distance matrix needs at least 2 days, got {n}")));
    }
    opts.validate(ds.n_vars())?;
    let rows: Vec<Vec<f64>> = (1..n)
        .into_par_iter()
        .map(|i| {
            (0..i)
                .map(|j| multivariate_dtw(&ds.days[i], &ds.days[j], opts))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut entries = vec![0.0; n * n];
    for (r, row) in rows.iter().enumerate() {
        let i = r + 1;
        for (j, &x) in row.iter().enumerate() {
            entries[i * n + j] = x;
            entries[j * n + i] = x;
        }
    }
    Ok(DistanceMatrix {
        n,
        entries,
        variable_names: ds.variable_names.clone(),
        weights: opts.resolved_weights(ds.n_vars()),
        window: opts.window,
        dates: ds.dates(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        assert_eq!(dtw_distance(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0], None).unwrap(), 0.0);
        assert_eq!(dtw_distance(&[0.0, 2.0], &[0.0, 0.0], None).unwrap(), 2.0 / 3.0);
        assert_eq!(dtw_distance(&[0.0, 1.0], &[1.0, 0.0], None).unwrap(), 2.0 / 3.0);
        assert_eq!(dtw_distance(&[0.3], &[0.8], None).unwrap(), 0.5);
        assert_eq!(brute_force_dtw(&[5.0], &[5.0]).unwrap(), 0.0);
        assert_eq!(brute_force_dtw(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn time_displaced_zero_cost_path() {
        let (d, path) = dtw_path(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0], None).unwrap();
        assert_eq!(d, 0.0);
        assert!(path.is_admissible(3, 3));
        assert_eq!(path.cost(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(dtw_distance(&[], &[1.0], None), Err(Error::Argument(_))));
        assert!(matches!(brute_force_dtw(&[1.0], &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn brute_force_caps_length() {
        let long = [0.0; 9];
        assert!(matches!(brute_force_dtw(&long, &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn narrow_window_rejected() {
        assert!(dtw_distance(&[0.0, 1.0, 2.0, 3.0], &[0.0], Some(2)).is_err());
        assert!(dtw_distance(&[0.0, 1.0, 2.0, 3.0], &[0.0], Some(3)).is_ok());
    }

    #[test]
    fn zero_window_on_equal_lengths_is_diagonal() {
        let a = [0.0, 1.0, 3.0];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(dtw_distance(&a, &b, Some(0)).unwrap(), (1.0 + 0.0 + 2.0) / 3.0);
    }

    #[test]
    fn path_counts_match_delannoy_numbers() {
        let mut count = 0;
        for_each_path(3, 3, |_| count += 1);
        assert_eq!(count, 13);
        let mut count = 0;
        for_each_path(4, 4, |p| {
            assert!(p.len() >= 4 && p.len() <= 7);
            count += 1;
        });
        assert_eq!(count, 63);
    }

    fn day(levels: &[f64]) -> DayProfile {
        let cols: Vec<Vec<f64>> = levels.iter().map(|&l| vec![l; 24]).collect();
        DayProfile::from_columns("2021-01-01".parse().unwrap(), &cols).unwrap()
    }

    #[test]
    fn multivariate_composes_per_variable() {
        let a = day(&[0.1, 0.5]);
        let b = day(&[0.4, 0.25]);
        let unit = DtwOptions::default();
        let d = multivariate_dtw(&a, &b, &unit).unwrap();
        let u = dtw_distance(a.column(0), b.column(0), None).unwrap();
        let v = dtw_distance(a.column(1), b.column(1), None).unwrap();
        assert!((d - (u + v)).abs() < 1e-15);
        assert!((d - 0.55).abs() < 1e-12);
        assert_eq!(multivariate_dtw(&a, &a, &unit).unwrap(), 0.0);
        let zero = DtwOptions {
            window: None,
            weights: Some(vec![0.0, 0.0]),
        };
        assert_eq!(multivariate_dtw(&a, &b, &zero).unwrap(), 0.0);
        assert!(multivariate_dtw(&a, &day(&[0.1]), &unit).is_err());
    }

    #[test]
    fn matrix_needs_two_days() {
        let ds = Dataset::new(vec![day(&[0.5])], vec!["x".into()], None).unwrap();
        assert!(matches!(
            distance_matrix(&ds, &DtwOptions::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn identical_days_give_zero_matrix() {
        let mut d2 = day(&[0.5]);
        d2.date = "2021-01-02".parse().unwrap();
        let ds = Dataset::new(vec![day(&[0.5]), d2], vec!["x".into()], None).unwrap();
        let dm = distance_matrix(&ds, &DtwOptions::default()).unwrap();
        assert_eq!(dm.entries(), &[0.0; 4]);
    }

    #[test]
    fn matrix_validation() {
        assert!(DistanceMatrix::from_entries(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..2.0, 1..8)
    }

    proptest! {
        #[test]
        fn symmetric(a in series(), b in series()) {
            let ab = dtw_distance(&a, &b, None).unwrap();
            let ba = dtw_distance(&b, &a, None).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn identity_and_nonnegativity(a in series(), b in series()) {
            prop_assert_eq!(dtw_distance(&a, &a, None).unwrap(), 0.0);
            prop_assert!(dtw_distance(&a, &b, None).unwrap() >= 0.0);
        }

        #[test]
        fn agrees_with_enumeration(a in series(), b in series()) {
            let fast = dtw_distance(&a, &b, None).unwrap();
            let slow = brute_force_dtw(&a, &b).unwrap();
            prop_assert!((fast - slow).abs() < 1e-12, "{} vs {}", fast, slow);
        }

        #[test]
        fn wide_window_is_unconstrained(a in series(), b in series()) {
            let w = a.len().max(b.len()) - 1;
            let banded = dtw_distance(&a, &b, Some(w)).unwrap();
            prop_assert_eq!(banded, dtw_distance(&a, &b, None).unwrap());
        }

        #[test]
        fn banded_matches_banded_enumeration(a in series(), b in series(), extra in 0usize..3) {
            let w = a.len().abs_diff(b.len()) + extra;
            let fast = dtw_distance(&a, &b, Some(w)).unwrap();
            let mut best = f64::INFINITY;
            for_each_path(a.len(), b.len(), |p| {
                if p.iter().all(|&(i, j)| i.abs_diff(j) <= w) {
                    let c = p.iter().fold(0.0, |acc, &(i, j)| acc + (a[i] - b[j]).abs());
                    best = best.min(c / p.len() as f64);
                }
            });
            prop_assert!((fast - best).abs() < 1e-12);
        }

        #[test]
        fn returned_path_attains_distance(a in series(), b in series()) {
            let (d, path) = dtw_path(&a, &b, None).unwrap();
            prop_assert!(path.is_admissible(a.len(), b.len()));
            let k = path.len();
            prop_assert!(k >= a.len().max(b.len()) && k < a.len() + b.len());
            prop_assert!((path.cost(&a, &b) - d).abs() < 1e-12);
            prop_assert!((d - dtw_distance(&a, &b, None).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn one_step_shift_is_free(x in prop::collection::vec(0.0f64..1.0, 2..8)) {
            // y = x delayed by one step, first value repeated, last value dropped
            // and re-appended so both series share endpoints.
            let mut y = vec![x[0]];
            y.extend_from_slice(&x[..x.len() - 1]);
            let mut xs = x.clone();
            xs.push(*x.last().unwrap());
            y.push(*x.last().unwrap());
            prop_assert_eq!(dtw_distance(&xs, &y, None).unwrap(), 0.0);
        }
    }
}
