use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Datelike, Days, Months, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::batch::{Batch, Matrix};
use crate::error::{Error, Result};

/// How rows are assigned to time periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodGranularity {
    /// UTC calendar day of the period column's timestamp.
    Day,
    /// ISO week (Monday start) of the timestamp, in UTC.
    Week,
    /// Calendar month of the timestamp, in UTC.
    Month,
    /// Consecutive chunks of this many data rows, in file order.
    Rows(usize),
}

/// Which CSV columns feed the pipeline and how they are partitioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_columns: Vec<String>,
    /// Binary failure label (1 = failure). Optional for unlabeled monitoring data.
    #[serde(default)]
    pub label_column: Option<String>,
    /// Timestamp column; not needed for row-count granularity.
    #[serde(default)]
    pub period_column: Option<String>,
    pub period_granularity: PeriodGranularity,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("feature_columns is empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.feature_columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!("duplicate feature column `{c}`")));
            }
        }
        if let Some(label) = &self.label_column {
            if seen.contains(label.as_str()) {
                return Err(Error::Schema(format!(
                    "label column `{label}` is also listed as a feature"
                )));
            }
        }
        match self.period_granularity {
            PeriodGranularity::Rows(0) => {
                return Err(Error::Schema(
                    "row-count granularity must be positive".into(),
                ))
            }
            PeriodGranularity::Rows(_) => {}
            _ if self.period_column.is_none() => {
                return Err(Error::Schema(
                    "calendar granularity requires a period_column".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Counts and notes produced while loading a CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    /// Drop count keyed by the offending column.
    pub drop_reasons: BTreeMap<String, usize>,
    /// Period keys inside the observed range that ended up with no rows.
    pub omitted_periods: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub batches: Vec<Batch>,
    pub report: IngestionReport,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<LoadedDataset> {
    let file = File::open(path.as_ref())?;
    load_csv_reader(file, schema)
}

/// Parses CSV text into period batches ordered by period, with consecutive
/// `period_id`s starting at 0.
pub fn load_csv_reader<R: Read>(reader: R, schema: &DatasetSchema) -> Result<LoadedDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput("CSV has no header row".into()));
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let feature_idx: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;
    let label_idx = schema.label_column.as_deref().map(find).transpose()?;
    let period_idx = match schema.period_granularity {
        PeriodGranularity::Rows(_) => None,
        _ => Some(find(schema.period_column.as_deref().unwrap_or_default())?),
    };

    let d = feature_idx.len();
    let mut report = IngestionReport::default();
    let mut groups: BTreeMap<PeriodKey, Group> = BTreeMap::new();
    let drop = |report: &mut IngestionReport, column: &str| {
        report.rows_dropped += 1;
        *report.drop_reasons.entry(column.to_string()).or_default() += 1;
    };

    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        report.rows_read += 1;

        let mut values = Vec::with_capacity(d);
        let mut bad = None;
        for (k, &i) in feature_idx.iter().enumerate() {
            match record.get(i).and_then(parse_finite) {
                Some(v) => values.push(v),
                None => {
                    bad = Some(schema.feature_columns[k].as_str());
                    break;
                }
            }
        }
        if let Some(col) = bad {
            drop(&mut report, col);
            continue;
        }
        let label = match label_idx {
            Some(i) => match record.get(i).and_then(parse_label) {
                Some(y) => Some(y),
                None => {
                    drop(
                        &mut report,
                        schema.label_column.as_deref().unwrap_or_default(),
                    );
                    continue;
                }
            },
            None => None,
        };
        let key = match (schema.period_granularity, period_idx) {
            (PeriodGranularity::Rows(n), _) => PeriodKey::Chunk(row_no / n),
            (g, Some(i)) => match record.get(i).and_then(parse_timestamp) {
                Some(date) => PeriodKey::Date(truncate(date, g)),
                None => {
                    drop(
                        &mut report,
                        schema.period_column.as_deref().unwrap_or_default(),
                    );
                    continue;
                }
            },
            (_, None) => unreachable!("calendar granularity without period column"),
        };
        let group = groups.entry(key).or_default();
        group.values.extend_from_slice(&values);
        if let Some(y) = label {
            group.labels.push(y);
        }
        group.rows += 1;
        report.rows_kept += 1;
    }

    if report.rows_read == 0 {
        return Err(Error::EmptyInput("CSV has no data rows".into()));
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput(format!(
            "all {} rows were dropped during parsing",
            report.rows_read
        )));
    }

    // Periods inside the observed range that received no rows.
    let first = *groups.keys().next().unwrap();
    let last = *groups.keys().next_back().unwrap();
    let mut cursor = first;
    while cursor < last {
        if !groups.contains_key(&cursor) {
            report
                .omitted_periods
                .push(cursor.label(schema.period_granularity));
        }
        cursor = cursor.next(schema.period_granularity);
    }

    let mut batches = Vec::with_capacity(groups.len());
    for (period_id, (key, group)) in groups.into_iter().enumerate() {
        let features = Matrix::new(group.rows, d, group.values)?;
        let labels = label_idx.map(|_| group.labels);
        batches.push(Batch::with_key(
            period_id,
            key.label(schema.period_granularity),
            features,
            labels,
        )?);
    }
    Ok(LoadedDataset { batches, report })
}

#[derive(Default)]
struct Group {
    rows: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum PeriodKey {
    Date(NaiveDate),
    Chunk(usize),
}

impl PeriodKey {
    fn next(self, g: PeriodGranularity) -> PeriodKey {
        match self {
            PeriodKey::Chunk(c) => PeriodKey::Chunk(c + 1),
            PeriodKey::Date(d) => PeriodKey::Date(match g {
                PeriodGranularity::Week => d + Days::new(7),
                PeriodGranularity::Month => d + Months::new(1),
                _ => d + Days::new(1),
            }),
        }
    }

    fn label(self, g: PeriodGranularity) -> String {
        match (self, g) {
            (PeriodKey::Chunk(c), PeriodGranularity::Rows(n)) => {
                format!("rows {}-{}", c * n, (c + 1) * n - 1)
            }
            (PeriodKey::Chunk(c), _) => format!("chunk {c}"),
            (PeriodKey::Date(d), PeriodGranularity::Month) => d.format("%Y-%m").to_string(),
            (PeriodKey::Date(d), _) => d.format("%Y-%m-%d").to_string(),
        }
    }
}

fn truncate(date: NaiveDate, g: PeriodGranularity) -> NaiveDate {
    match g {
        PeriodGranularity::Week => {
            date - Days::new(u64::from(date.weekday().num_days_from_monday()))
        }
        PeriodGranularity::Month => date.with_day(1).expect("day 1 always exists"),
        _ => date,
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_label(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" => Some(true),
        "0" | "0.0" | "false" => Some(false),
        _ => None,
    }
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DD HH:MM:SS`, RFC 3339, or integer Unix
/// seconds; everything is interpreted in UTC.
fn parse_timestamp(s: &str) -> Option<NaiveDate> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.date());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt.date());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc().date());
    }
    s.parse::<i64>()
        .ok()
        .and_then(|secs| DateTime::from_timestamp(secs, 0))
        .map(|dt| dt.date_naive())
}
