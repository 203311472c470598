//! Hourly CSV ingestion, day segmentation and per-variable normalization.
//!
//! Input files carry a header row, one timestamp column
//! (`YYYY-MM-DDTHH:00` or `YYYY-MM-DD HH:00`, naive local time) and one
//! numeric column per variable. Rows that fail to parse are collected as
//! [`RowError`]s rather than aborting the whole file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

pub const HOURS: usize = 24;

/// Longest run of consecutive missing hours that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 2;

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    pub values: Vec<f64>,
}

/// Column mapping for [`parse_csv`]. An empty `value_columns` list selects
/// every column other than the timestamp, in header order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub value_columns: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp_column: "timestamp".to_string(),
            value_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub variable_names: Vec<String>,
    pub records: Vec<RawRecord>,
    pub row_errors: Vec<RowError>,
}

/// A date dropped by [`build_days`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub date: NaiveDate,
    pub reason: String,
}

/// One calendar day as a 24×m matrix.
///
/// Values are stored variable-major so that each variable's 24-hour series
/// is a contiguous slice (see [`DayProfile::column`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DayProfile {
    pub date: NaiveDate,
    n_vars: usize,
    values: Vec<f64>,
}

impl DayProfile {
    /// Builds a profile from one 24-value series per variable.
    pub fn from_columns(date: NaiveDate, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::arg("a day profile needs at least one variable"));
        }
        let mut values = Vec::with_capacity(columns.len() * HOURS);
        for (v, col) in columns.iter().enumerate() {
            if col.len() != HOURS {
                return Err(Error::arg(format!(
                    "variable {v} of {date} has {} hourly values, expected {HOURS}",
                    col.len()
                )));
            }
            values.extend_from_slice(col);
        }
        Ok(DayProfile {
            date,
            n_vars: columns.len(),
            values,
        })
    }

    /// Builds a profile from a variable-major buffer of length `24 * n_vars`.
    pub fn from_flat(date: NaiveDate, n_vars: usize, values: Vec<f64>) -> Result<Self> {
        if n_vars == 0 || values.len() != n_vars * HOURS {
            return Err(Error::arg(format!(
                "expected {} values for {n_vars} variables, got {}",
                n_vars * HOURS,
                values.len()
            )));
        }
        Ok(DayProfile {
            date,
            n_vars,
            values,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn get(&self, hour: usize, var: usize) -> f64 {
        self.values[var * HOURS + hour]
    }

    /// The 24-hour series of one variable.
    pub fn column(&self, var: usize) -> &[f64] {
        &self.values[var * HOURS..(var + 1) * HOURS]
    }

    /// All values, variable-major. This is also the flattened 24·m vector
    /// used by the Euclidean methods.
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }
}

/// Global per-variable range used for min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarRange {
    pub min: f64,
    pub max: f64,
}

impl VarRange {
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn unscale(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub days: Vec<DayProfile>,
    pub variable_names: Vec<String>,
    /// `None` for raw data, otherwise the ranges the data was scaled with.
    pub normalization: Option<Vec<VarRange>>,
}

impl Dataset {
    /// Validates day shapes and date ordering.
    pub fn new(
        days: Vec<DayProfile>,
        variable_names: Vec<String>,
        normalization: Option<Vec<VarRange>>,
    ) -> Result<Self> {
        let m = variable_names.len();
        if m == 0 {
            return Err(Error::arg("dataset needs at least one variable"));
        }
        if let Some(day) = days.iter().find(|d| d.n_vars != m) {
            return Err(Error::arg(format!(
                "day {} has {} variables, dataset declares {m}",
                day.date, day.n_vars
            )));
        }
        if let Some(w) = days.windows(2).find(|w| w[0].date >= w[1].date) {
            return Err(Error::arg(format!(
                "dates must be unique and ascending ({} before {})",
                w[0].date, w[1].date
            )));
        }
        if let Some(ranges) = &normalization {
            if ranges.len() != m {
                return Err(Error::arg("normalization ranges do not match variables"));
            }
        }
        Ok(Dataset {
            days,
            variable_names,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.days.iter().map(|d| d.date).collect()
    }

    /// Maps a normalized value of variable `var` back to data units.
    /// Identity for raw datasets.
    pub fn denormalize_value(&self, var: usize, x: f64) -> f64 {
        match &self.normalization {
            Some(r) => r[var].unscale(x),
            None => x,
        }
    }

    /// Undoes [`normalize`]. Raw datasets are returned unchanged.
    pub fn denormalize(&self) -> Dataset {
        let Some(ranges) = &self.normalization else {
            return self.clone();
        };
        let days = self
            .days
            .iter()
            .map(|d| {
                let mut values = d.values.clone();
                for (v, r) in ranges.iter().enumerate() {
                    for x in &mut values[v * HOURS..(v + 1) * HOURS] {
                        *x = r.unscale(*x);
                    }
                }
                DayProfile { values, ..*d }
            })
            .collect();
        Dataset {
            days,
            variable_names: self.variable_names.clone(),
            normalization: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DatasetFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_file(path, self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = util::read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    variable_names: Vec<String>,
    normalization: Option<Vec<VarRange>>,
    days: Vec<DayFile>,
}

#[derive(Serialize, Deserialize)]
struct DayFile {
    date: NaiveDate,
    /// One 24-value series per variable.
    values: Vec<Vec<f64>>,
}

impl From<&Dataset> for DatasetFile {
    fn from(ds: &Dataset) -> Self {
        DatasetFile {
            variable_names: ds.variable_names.clone(),
            normalization: ds.normalization.clone(),
            days: ds
                .days
                .iter()
                .map(|d| DayFile {
                    date: d.date,
                    values: (0..d.n_vars).map(|v| d.column(v).to_vec()).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DatasetFile> for Dataset {
    type Error = Error;

    fn try_from(file: DatasetFile) -> Result<Self> {
        let days = file
            .days
            .into_iter()
            .map(|d| DayProfile::from_columns(d.date, &d.values))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(days, file.variable_names, file.normalization)
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

/// Parses hourly records from CSV text.
///
/// Fatal conditions (missing header or columns, duplicate timestamps) are
/// returned as errors. Bad cells only drop their row and are reported in
/// [`ParsedCsv::row_errors`] with their 1-based line number.
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<ParsedCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Format("missing header".to_string()));
    }
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let ts_col = find(&schema.timestamp_column).ok_or_else(|| {
        Error::Format(format!(
            "missing timestamp column '{}'",
            schema.timestamp_column
        ))
    })?;
    let value_cols: Vec<(usize, String)> = if schema.value_columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != ts_col)
            .map(|(i, h)| (i, h.trim().to_string()))
            .collect()
    } else {
        schema
            .value_columns
            .iter()
            .map(|name| {
                find(name)
                    .map(|i| (i, name.clone()))
                    .ok_or_else(|| Error::Format(format!("missing value column '{name}'")))
            })
            .collect::<Result<_>>()?
    };
    if value_cols.is_empty() {
        return Err(Error::Format("no value columns".to_string()));
    }

    let mut records = Vec::new();
    let mut row_errors = Vec::new();
    let mut seen: BTreeMap<NaiveDateTime, u64> = BTreeMap::new();
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let Some(raw_ts) = row.get(ts_col) else {
            row_errors.push(RowError {
                line,
                message: "missing timestamp cell".to_string(),
            });
            continue;
        };
        let Some(timestamp) = parse_timestamp(raw_ts) else {
            row_errors.push(RowError {
                line,
                message: format!("unparseable timestamp '{raw_ts}'"),
            });
            continue;
        };
        if timestamp.minute() != 0 || timestamp.second() != 0 {
            row_errors.push(RowError {
                line,
                message: format!("timestamp '{raw_ts}' is not on the hour"),
            });
            continue;
        }
        let mut values = Vec::with_capacity(value_cols.len());
        let mut bad = None;
        for (col, name) in &value_cols {
            let cell = row.get(*col).unwrap_or("").trim();
            match cell.parse::<f64>() {
                Ok(x) if x.is_finite() => values.push(x),
                _ => {
                    bad = Some(format!("non-numeric value '{cell}' in column '{name}'"));
                    break;
                }
            }
        }
        if let Some(message) = bad {
            row_errors.push(RowError { line, message });
            continue;
        }
        if let Some(first) = seen.insert(timestamp, line) {
            return Err(Error::Format(format!(
                "duplicate timestamp {timestamp} on lines {first} and {line}"
            )));
        }
        records.push(RawRecord { timestamp, values });
    }

    Ok(ParsedCsv {
        variable_names: value_cols.into_iter().map(|(_, n)| n).collect(),
        records,
        row_errors,
    })
}

/// Segments hourly records into complete days.
///
/// Runs of at most [`MAX_INTERPOLATED_GAP`] missing hours are filled by
/// linear interpolation between the nearest recorded hours (which may lie
/// on the neighboring date). Every other incomplete date is excluded and
/// listed with a reason.
pub fn build_days(
    records: &[RawRecord],
    variable_names: &[String],
) -> Result<(Dataset, Vec<Exclusion>)> {
    let m = variable_names.len();
    if m == 0 {
        return Err(Error::arg("no variables declared"));
    }
    let mut by_time: BTreeMap<NaiveDateTime, &[f64]> = BTreeMap::new();
    for r in records {
        if r.values.len() != m {
            return Err(Error::arg(format!(
                "record at {} has {} values, expected {m}",
                r.timestamp,
                r.values.len()
            )));
        }
        if by_time.insert(r.timestamp, &r.values).is_some() {
            return Err(Error::Format(format!("duplicate timestamp {}", r.timestamp)));
        }
    }
    let dates: BTreeSet<NaiveDate> = by_time.keys().map(|t| t.date()).collect();

    let mut days = Vec::new();
    let mut exclusions = Vec::new();
    for date in dates {
        match assemble_day(date, &by_time, m) {
            Ok(columns) => days.push(DayProfile::from_columns(date, &columns)?),
            Err(reason) => exclusions.push(Exclusion { date, reason }),
        }
    }
    if days.is_empty() {
        return Err(Error::Data("empty dataset: no complete days".to_string()));
    }
    Ok((Dataset::new(days, variable_names.to_vec(), None)?, exclusions))
}

fn hour_of(date: NaiveDate, hour: usize) -> NaiveDateTime {
    date.and_hms_opt(0, 0, 0).expect("midnight exists") + Duration::hours(hour as i64)
}

fn assemble_day(
    date: NaiveDate,
    by_time: &BTreeMap<NaiveDateTime, &[f64]>,
    m: usize,
) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut columns = vec![vec![f64::NAN; HOURS]; m];
    let mut missing = Vec::new();
    for h in 0..HOURS {
        match by_time.get(&hour_of(date, h)) {
            Some(vals) => {
                for v in 0..m {
                    columns[v][h] = vals[v];
                }
            }
            None => missing.push(h),
        }
    }
    if missing.is_empty() {
        return Ok(columns);
    }
    if missing.len() == HOURS {
        return Err("no records".to_string());
    }

    let mut i = 0;
    while i < missing.len() {
        let start = missing[i];
        let mut end = start;
        while i + 1 < missing.len() && missing[i + 1] == end + 1 {
            i += 1;
            end += 1;
        }
        i += 1;
        let len = end - start + 1;
        if len > MAX_INTERPOLATED_GAP {
            return Err(format!(
                "{} of 24 hours present; gap of {len} hours at {start:02}:00-{end:02}:00 exceeds {MAX_INTERPOLATED_GAP}",
                HOURS - missing.len()
            ));
        }
        let before = hour_of(date, start) - Duration::hours(1);
        let after = hour_of(date, end) + Duration::hours(1);
        let (Some(lo), Some(hi)) = (by_time.get(&before), by_time.get(&after)) else {
            return Err(format!(
                "gap at {start:02}:00-{end:02}:00 has no recorded neighbor to interpolate from"
            ));
        };
        for (step, h) in (start..=end).enumerate() {
            let t = (step + 1) as f64 / (len + 1) as f64;
            for v in 0..m {
                columns[v][h] = lo[v] + (hi[v] - lo[v]) * t;
            }
        }
    }
    Ok(columns)
}

/// Scales every variable to [0, 1] by its global min and max over all days
/// and hours.
pub fn normalize(ds: &Dataset) -> Result<Dataset> {
    if ds.is_normalized() {
        return Err(Error::arg("dataset is already normalized"));
    }
    if ds.is_empty() {
        return Err(Error::Data("empty dataset".to_string()));
    }
    let ranges: Vec<VarRange> = (0..ds.n_vars())
        .map(|v| {
            let (min, max) = ds
                .days
                .iter()
                .flat_map(|d| d.column(v).iter().copied())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x), hi.max(x))
                });
            if max > min {
                Ok(VarRange { min, max })
            } else {
                Err(Error::Data(format!(
                    "variable '{}' is constant ({min}); cannot normalize",
                    ds.variable_names[v]
                )))
            }
        })
        .collect::<Result<_>>()?;

    let days = ds
        .days
        .iter()
        .map(|d| {
            let mut values = d.values.clone();
            for (v, r) in ranges.iter().enumerate() {
                for x in &mut values[v * HOURS..(v + 1) * HOURS] {
                    *x = r.scale(*x);
                }
            }
            DayProfile { values, ..*d }
        })
        .collect();
    Ok(Dataset {
        days,
        variable_names: ds.variable_names.clone(),
        normalization: Some(ranges),
    })
}
