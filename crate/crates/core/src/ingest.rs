//! Device-log ingestion.
//!
//! Rows are parsed into [`RawRecord`]s whose timestamps may or may not carry
//! a UTC offset. [`uniform_to_utc`] then resolves every row to a UTC instant,
//! borrowing the offset of the nearest preceding row when a row has none,
//! and merges rows that land on the same instant.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest and highest blood glucose accepted, mg/dL.
pub const BG_BOUNDS: (f64, f64) = (10.0, 1000.0);

/// Imputed offsets whose donor row is older than this are flagged in the load report.
const STALE_DONOR_HOURS: i64 = 24;

/// Rejections kept verbatim in a [`LoadReport`]; the rest are only counted.
const MAX_REPORTED_REJECTIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Iob,
    Cob,
    Bg,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Iob, Variable::Cob, Variable::Bg];

    pub fn index(self) -> usize {
        match self {
            Variable::Iob => 0,
            Variable::Cob => 1,
            Variable::Bg => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Iob => "iob",
            Variable::Cob => "cob",
            Variable::Bg => "bg",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iob" => Ok(Variable::Iob),
            "cob" => Ok(Variable::Cob),
            "bg" => Ok(Variable::Bg),
            other => Err(format!("unknown variable '{other}' (expected iob, cob or bg)")),
        }
    }
}

/// A timestamp as written in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawTimestamp {
    Zoned(DateTime<FixedOffset>),
    /// Wall-clock time with no offset information.
    Local(NaiveDateTime),
}

impl RawTimestamp {
    pub fn offset(&self) -> Option<FixedOffset> {
        match self {
            RawTimestamp::Zoned(dt) => Some(*dt.offset()),
            RawTimestamp::Local(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: RawTimestamp,
    pub iob: Option<f64>,
    pub cob: Option<f64>,
    pub bg: Option<f64>,
}

impl RawRecord {
    pub fn get(&self, var: Variable) -> Option<f64> {
        match var {
            Variable::Iob => self.iob,
            Variable::Cob => self.cob,
            Variable::Bg => self.bg,
        }
    }
}

/// One uniformed reading: a UTC instant plus whatever variables were logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub instant: DateTime<Utc>,
    pub iob: Option<f64>,
    pub cob: Option<f64>,
    pub bg: Option<f64>,
}

impl Reading {
    pub fn get(&self, var: Variable) -> Option<f64> {
        match var {
            Variable::Iob => self.iob,
            Variable::Cob => self.cob,
            Variable::Bg => self.bg,
        }
    }

    fn values(&self) -> [Option<f64>; 3] {
        [self.iob, self.cob, self.bg]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UniformSeries {
    pub source_id: String,
    /// Strictly increasing in `instant`.
    pub records: Vec<Reading>,
    /// Rows discarded because no offset could be resolved.
    pub dropped_count: usize,
    /// Rows folded into another row sharing the same instant.
    pub merged_count: usize,
    pub imputed_count: usize,
    /// Imputations whose donor row was more than 24h older.
    pub stale_imputations: usize,
}

impl UniformSeries {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Re-expresses the series as raw records carrying an explicit UTC offset.
    pub fn to_raw_records(&self) -> Vec<RawRecord> {
        let utc = FixedOffset::east_opt(0).expect("zero offset");
        self.records
            .iter()
            .map(|r| RawRecord {
                timestamp: RawTimestamp::Zoned(r.instant.with_timezone(&utc)),
                iob: r.iob,
                cob: r.cob,
                bg: r.bg,
            })
            .collect()
    }
}

/// Logical field → column name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub timestamp: String,
    #[serde(default)]
    pub iob: Option<String>,
    #[serde(default)]
    pub cob: Option<String>,
    #[serde(default)]
    pub bg: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            timestamp: "timestamp".into(),
            iob: Some("iob".into()),
            cob: Some("cob".into()),
            bg: Some("bg".into()),
        }
    }
}

impl Schema {
    fn validate(&self) -> Result<(), IngestError> {
        if self.timestamp.trim().is_empty() {
            return Err(IngestError::InvalidSchema("timestamp column name is empty".into()));
        }
        if self.iob.is_none() && self.cob.is_none() && self.bg.is_none() {
            return Err(IngestError::InvalidSchema(
                "schema must name at least one of iob, cob, bg".into(),
            ));
        }
        Ok(())
    }

    fn columns(&self) -> Vec<(Option<Variable>, &str)> {
        let mut cols = vec![(None, self.timestamp.as_str())];
        for (var, col) in [
            (Variable::Iob, &self.iob),
            (Variable::Cob, &self.cob),
            (Variable::Bg, &self.bg),
        ] {
            if let Some(c) = col {
                cols.push((Some(var), c.as_str()));
            }
        }
        cols
    }

    /// Resolves column positions against a header row.
    pub fn resolve(&self, header: &[&str]) -> Result<ResolvedSchema, IngestError> {
        self.validate()?;
        let find = |name: &str| -> Result<usize, IngestError> {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        let mut resolved = ResolvedSchema {
            timestamp: find(&self.timestamp)?,
            iob: None,
            cob: None,
            bg: None,
        };
        for (var, col) in self.columns().into_iter().skip(1) {
            let idx = Some(find(col)?);
            match var.expect("value column") {
                Variable::Iob => resolved.iob = idx,
                Variable::Cob => resolved.cob = idx,
                Variable::Bg => resolved.bg = idx,
            }
        }
        Ok(resolved)
    }
}

/// Column indices of a [`Schema`] within one concrete header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedSchema {
    pub timestamp: usize,
    pub iob: Option<usize>,
    pub cob: Option<usize>,
    pub bg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    MissingTimestamp,
    MalformedTimestamp { text: String },
    NonNumeric { column: String, text: String },
    NegativeValue { column: String, value: f64 },
    BgOutOfRange { value: f64 },
    NoReadings,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::MissingTimestamp => write!(f, "missing timestamp"),
            RejectReason::MalformedTimestamp { text } => write!(f, "malformed timestamp '{text}'"),
            RejectReason::NonNumeric { column, text } => {
                write!(f, "non-numeric value '{text}' in column {column}")
            }
            RejectReason::NegativeValue { column, value } => {
                write!(f, "negative value {value} in column {column}")
            }
            RejectReason::BgOutOfRange { value } => write!(
                f,
                "bg {value} outside [{}, {}] mg/dL",
                BG_BOUNDS.0, BG_BOUNDS.1
            ),
            RejectReason::NoReadings => write!(f, "no iob, cob or bg value"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Zero-based data row (header excluded).
    pub row: usize,
    #[serde(flatten)]
    pub reason: RejectReason,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("missing header row")]
    MissingHeader,
    #[error("column '{0}' named in schema not found in header")]
    MissingColumn(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
}

const OFFSET_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f%:z",
    "%Y-%m-%dT%H:%M:%S%.f%z",
    "%Y-%m-%d %H:%M:%S%.f%:z",
    "%Y-%m-%d %H:%M:%S%.f%z",
    "%Y-%m-%d %H:%M:%S%.f %z",
    "%Y-%m-%dT%H:%M%:z",
    "%Y-%m-%d %H:%M%:z",
];

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// Parses ISO-8601 with or without offset, or integer epoch milliseconds (UTC).
pub fn parse_timestamp(text: &str) -> Option<RawTimestamp> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.bytes().all(|b| b.is_ascii_digit()) {
        let millis: i64 = text.parse().ok()?;
        let utc = FixedOffset::east_opt(0)?;
        return utc.timestamp_millis_opt(millis).single().map(RawTimestamp::Zoned);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(RawTimestamp::Zoned(dt));
    }
    for fmt in OFFSET_FORMATS {
        if let Ok(dt) = DateTime::parse_from_str(text, fmt) {
            return Some(RawTimestamp::Zoned(dt));
        }
    }
    for fmt in NAIVE_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(RawTimestamp::Local(dt));
        }
    }
    None
}

fn parse_value(cell: Option<&str>, column: &str) -> Result<Option<f64>, RejectReason> {
    let Some(text) = cell.map(str::trim).filter(|t| !t.is_empty()) else {
        return Ok(None);
    };
    let non_numeric = || RejectReason::NonNumeric {
        column: column.to_string(),
        text: text.to_string(),
    };
    // `f64::from_str` is locale independent; reject "inf"/"nan" spellings too.
    let value: f64 = text.parse().map_err(|_| non_numeric())?;
    if !value.is_finite() {
        return Err(non_numeric());
    }
    Ok(Some(value))
}

/// Parses one delimited row. `row` is the zero-based data-row index used in diagnostics.
pub fn parse_record(
    cells: &[&str],
    schema: &ResolvedSchema,
    names: &Schema,
    row: usize,
) -> Result<RawRecord, Rejection> {
    let reject = |reason| Rejection { row, reason };
    let ts_text = cells.get(schema.timestamp).map(|s| s.trim()).unwrap_or("");
    if ts_text.is_empty() {
        return Err(reject(RejectReason::MissingTimestamp));
    }
    let timestamp = parse_timestamp(ts_text).ok_or_else(|| {
        reject(RejectReason::MalformedTimestamp {
            text: ts_text.to_string(),
        })
    })?;

    let cell = |idx: Option<usize>| idx.and_then(|i| cells.get(i).copied());
    let iob = parse_value(cell(schema.iob), names.iob.as_deref().unwrap_or("iob")).map_err(reject)?;
    let cob = parse_value(cell(schema.cob), names.cob.as_deref().unwrap_or("cob")).map_err(reject)?;
    let bg = parse_value(cell(schema.bg), names.bg.as_deref().unwrap_or("bg")).map_err(reject)?;

    for (value, column) in [(iob, &names.iob), (cob, &names.cob)] {
        if let Some(v) = value.filter(|v| *v < 0.0) {
            return Err(reject(RejectReason::NegativeValue {
                column: column.clone().unwrap_or_default(),
                value: v,
            }));
        }
    }
    if let Some(v) = bg.filter(|v| !(BG_BOUNDS.0..=BG_BOUNDS.1).contains(v)) {
        return Err(reject(RejectReason::BgOutOfRange { value: v }));
    }
    if iob.is_none() && cob.is_none() && bg.is_none() {
        return Err(reject(RejectReason::NoReadings));
    }
    Ok(RawRecord {
        timestamp,
        iob,
        cob,
        bg,
    })
}

/// Resolves every record to UTC, sorts, and merges duplicate instants by per-variable mean.
pub fn uniform_to_utc(records: &[RawRecord]) -> UniformSeries {
    let mut series = UniformSeries::default();
    let mut donor: Option<(FixedOffset, DateTime<Utc>)> = None;
    let mut resolved: Vec<Reading> = Vec::with_capacity(records.len());

    for rec in records {
        let instant = match rec.timestamp {
            RawTimestamp::Zoned(dt) => {
                let instant = dt.with_timezone(&Utc);
                donor = Some((*dt.offset(), instant));
                instant
            }
            RawTimestamp::Local(naive) => match donor {
                Some((offset, donor_instant)) => {
                    let Some(instant) = offset
                        .from_local_datetime(&naive)
                        .single()
                        .map(|dt| dt.with_timezone(&Utc))
                    else {
                        series.dropped_count += 1;
                        continue;
                    };
                    series.imputed_count += 1;
                    if instant - donor_instant > Duration::hours(STALE_DONOR_HOURS) {
                        series.stale_imputations += 1;
                    }
                    instant
                }
                None => {
                    series.dropped_count += 1;
                    continue;
                }
            },
        };
        resolved.push(Reading {
            instant,
            iob: rec.iob,
            cob: rec.cob,
            bg: rec.bg,
        });
    }

    // Stable sort keeps file order among equal instants, but the merge below is order-free anyway.
    resolved.sort_by_key(|r| r.instant);

    let mut out: Vec<Reading> = Vec::with_capacity(resolved.len());
    let mut i = 0;
    while i < resolved.len() {
        let mut j = i + 1;
        while j < resolved.len() && resolved[j].instant == resolved[i].instant {
            j += 1;
        }
        if j - i == 1 {
            out.push(resolved[i].clone());
        } else {
            out.push(merge_readings(&resolved[i..j]));
            series.merged_count += j - i - 1;
        }
        i = j;
    }
    series.records = out;
    series
}

fn merge_readings(group: &[Reading]) -> Reading {
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for r in group {
        for (k, v) in r.values().into_iter().enumerate() {
            if let Some(v) = v {
                sums[k] += v;
                counts[k] += 1;
            }
        }
    }
    let mean = |k: usize| (counts[k] > 0).then(|| sums[k] / counts[k] as f64);
    Reading {
        instant: group[0].instant,
        iob: mean(0),
        cob: mean(1),
        bg: mean(2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub present: usize,
    /// Fraction of kept records carrying the variable.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub source_id: String,
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Parse rejections plus rows with an unresolvable offset.
    pub rows_dropped: usize,
    pub rows_merged: usize,
    pub rows_rejected: usize,
    pub offsets_imputed: usize,
    pub stale_imputations: usize,
    pub span_start: Option<DateTime<Utc>>,
    pub span_end: Option<DateTime<Utc>>,
    pub span_hours: f64,
    pub coverage: BTreeMap<Variable, Coverage>,
    pub rejections: Vec<Rejection>,
}

fn build_report(series: &UniformSeries, rows_read: usize, rejections: Vec<Rejection>) -> LoadReport {
    let rows_rejected = rejections.len();
    let kept = series.records.len();
    let coverage = Variable::ALL
        .iter()
        .map(|&var| {
            let present = series.records.iter().filter(|r| r.get(var).is_some()).count();
            let fraction = if kept == 0 { 0.0 } else { present as f64 / kept as f64 };
            (var, Coverage { present, fraction })
        })
        .collect();
    let span_start = series.records.first().map(|r| r.instant);
    let span_end = series.records.last().map(|r| r.instant);
    let span_hours = match (span_start, span_end) {
        (Some(a), Some(b)) => (b - a).num_milliseconds() as f64 / 3.6e6,
        _ => 0.0,
    };
    LoadReport {
        source_id: series.source_id.clone(),
        rows_read,
        rows_kept: kept,
        rows_dropped: rows_rejected + series.dropped_count,
        rows_merged: series.merged_count,
        rows_rejected,
        offsets_imputed: series.imputed_count,
        stale_imputations: series.stale_imputations,
        span_start,
        span_end,
        span_hours,
        coverage,
        rejections: rejections.into_iter().take(MAX_REPORTED_REJECTIONS).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    pub fn detect(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "jsonl" || ext == "ndjson" || ext == "json" => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        }
    }
}

/// Parses CSV text (header row required) into a uniform series and its load report.
pub fn load_csv_str(
    text: &str,
    schema: &Schema,
    source_id: &str,
) -> Result<(UniformSeries, LoadReport), IngestError> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(IngestError::MissingHeader),
    };
    let header_cells: Vec<&str> = header.iter().collect();
    let resolved = schema.resolve(&header_cells)?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut rows_read = 0;
    for (row, result) in rows.enumerate() {
        let rec = result?;
        rows_read += 1;
        let cells: Vec<&str> = rec.iter().collect();
        match parse_record(&cells, &resolved, schema, row) {
            Ok(r) => records.push(r),
            Err(rej) => rejections.push(rej),
        }
    }
    finish(records, rows_read, rejections, source_id)
}

/// Parses line-delimited JSON objects; keys are matched against the schema's column names.
pub fn load_jsonl_str(
    text: &str,
    schema: &Schema,
    source_id: &str,
) -> Result<(UniformSeries, LoadReport), IngestError> {
    schema.validate()?;
    let columns = schema.columns();
    let names: Vec<&str> = columns.iter().map(|(_, c)| *c).collect();
    let resolved = schema.resolve(&names)?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut rows_read = 0;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| IngestError::Json {
            line: line_no + 1,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| IngestError::Json {
            line: line_no + 1,
            message: "expected a JSON object".into(),
        })?;
        let cells: Vec<String> = names
            .iter()
            .map(|name| match obj.get(*name) {
                None | Some(serde_json::Value::Null) => String::new(),
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
            })
            .collect();
        let cells: Vec<&str> = cells.iter().map(String::as_str).collect();
        match parse_record(&cells, &resolved, schema, rows_read) {
            Ok(r) => records.push(r),
            Err(rej) => rejections.push(rej),
        }
        rows_read += 1;
    }
    finish(records, rows_read, rejections, source_id)
}

fn finish(
    records: Vec<RawRecord>,
    rows_read: usize,
    rejections: Vec<Rejection>,
    source_id: &str,
) -> Result<(UniformSeries, LoadReport), IngestError> {
    let mut series = uniform_to_utc(&records);
    series.source_id = source_id.to_string();
    let report = build_report(&series, rows_read, rejections);
    Ok((series, report))
}

/// Loads a CSV or JSON-lines log file. The source id defaults to the file stem.
pub fn load_dataset(
    path: &Path,
    schema: &Schema,
    format: Option<InputFormat>,
) -> Result<(UniformSeries, LoadReport), IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let source_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("unknown")
        .to_string();
    match format.unwrap_or_else(|| InputFormat::detect(path)) {
        InputFormat::Csv => load_csv_str(&text, schema, &source_id),
        InputFormat::Jsonl => load_jsonl_str(&text, schema, &source_id),
    }
}

/// Writes a uniform series as CSV with RFC 3339 UTC instants.
pub fn write_uniform_csv<W: std::io::Write>(series: &UniformSeries, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "iob", "cob", "bg"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &series.records {
        w.write_record([
            r.instant.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            fmt(r.iob),
            fmt(r.cob),
            fmt(r.bg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn resolved() -> (Schema, ResolvedSchema) {
        let schema = Schema::default();
        let r = schema.resolve(&["timestamp", "iob", "cob", "bg"]).unwrap();
        (schema, r)
    }

    fn zoned(s: &str) -> RawRecord {
        RawRecord {
            timestamp: parse_timestamp(s).unwrap(),
            iob: Some(1.0),
            cob: None,
            bg: None,
        }
    }

    #[test]
    fn offset_is_retained() {
        let (names, schema) = resolved();
        let rec = parse_record(&["2018-06-01T14:03:22+02:00", "1.5", "", ""], &schema, &names, 0).unwrap();
        assert_eq!(rec.iob, Some(1.5));
        assert_eq!(rec.cob, None);
        assert_eq!(rec.timestamp.offset(), FixedOffset::east_opt(7200));
    }

    #[test]
    fn missing_timestamp_rejected() {
        let (names, schema) = resolved();
        let err = parse_record(&["", "1.5", "", ""], &schema, &names, 4).unwrap_err();
        assert_eq!(err.row, 4);
        assert_eq!(err.reason, RejectReason::MissingTimestamp);
    }

    #[test]
    fn non_numeric_bg_rejected() {
        let (names, schema) = resolved();
        let err = parse_record(&["2018-06-01T14:03:22Z", "", "", "abc"], &schema, &names, 0).unwrap_err();
        assert!(matches!(err.reason, RejectReason::NonNumeric { ref column, .. } if column == "bg"));
    }

    #[test]
    fn bg_sanity_bound() {
        let (names, schema) = resolved();
        let err = parse_record(&["2018-06-01T14:03:22Z", "", "", "1200"], &schema, &names, 0).unwrap_err();
        assert_eq!(err.reason, RejectReason::BgOutOfRange { value: 1200.0 });
        assert!(parse_record(&["2018-06-01T14:03:22Z", "", "", "10"], &schema, &names, 0).is_ok());
    }

    #[test]
    fn row_without_values_rejected() {
        let (names, schema) = resolved();
        let err = parse_record(&["2018-06-01T14:03:22Z", "", " ", ""], &schema, &names, 0).unwrap_err();
        assert_eq!(err.reason, RejectReason::NoReadings);
    }

    #[test]
    fn timestamp_formats() {
        assert!(matches!(parse_timestamp("2018-06-01T14:03:22Z"), Some(RawTimestamp::Zoned(_))));
        assert!(matches!(parse_timestamp("2018-06-01 14:03:22+0200"), Some(RawTimestamp::Zoned(_))));
        assert!(matches!(parse_timestamp("2018-06-01T14:03:22.123-05:00"), Some(RawTimestamp::Zoned(_))));
        assert!(matches!(parse_timestamp("2018-06-01T14:03:22"), Some(RawTimestamp::Local(_))));
        assert!(matches!(parse_timestamp("2018-06-01 14:03"), Some(RawTimestamp::Local(_))));
        let Some(RawTimestamp::Zoned(dt)) = parse_timestamp("1527861802000") else {
            panic!("epoch millis should parse as UTC");
        };
        assert_eq!(dt.with_timezone(&Utc).to_rfc3339(), "2018-06-01T14:03:22+00:00");
        assert_eq!(parse_timestamp("yesterday"), None);
        assert_eq!(parse_timestamp("   "), None);
    }

    #[test]
    fn converts_to_utc() {
        let out = uniform_to_utc(&[zoned("2018-06-01T14:03:22+02:00")]);
        assert_eq!(out.records[0].instant.to_rfc3339(), "2018-06-01T12:03:22+00:00");
    }

    #[test]
    fn imputes_offset_from_preceding_row() {
        let out = uniform_to_utc(&[zoned("2018-06-01T10:00:00+01:00"), zoned("2018-06-01T11:00:00")]);
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[1].instant.to_rfc3339(), "2018-06-01T10:00:00+00:00");
        assert_eq!(out.imputed_count, 1);
        assert_eq!(out.dropped_count, 0);
    }

    #[test]
    fn leading_offsetless_row_dropped() {
        let out = uniform_to_utc(&[zoned("2018-06-01T09:00:00")]);
        assert!(out.records.is_empty());
        assert_eq!(out.dropped_count, 1);
    }

    #[test]
    fn imputation_uses_nearest_preceding_offset_only() {
        let out = uniform_to_utc(&[
            zoned("2018-06-01T08:00:00"),
            zoned("2018-06-01T10:00:00+01:00"),
            zoned("2018-06-01T12:00:00-04:00"),
            zoned("2018-06-01T13:00:00"),
        ]);
        assert_eq!(out.dropped_count, 1);
        assert_eq!(out.records.last().unwrap().instant.to_rfc3339(), "2018-06-01T17:00:00+00:00");
    }

    #[test]
    fn stale_donor_flagged() {
        let out = uniform_to_utc(&[zoned("2018-06-01T10:00:00+01:00"), zoned("2018-06-03T11:00:00")]);
        assert_eq!(out.stale_imputations, 1);
    }

    #[test]
    fn duplicates_averaged_per_variable() {
        let mut a = zoned("2018-06-01T10:00:00Z");
        a.iob = Some(1.0);
        a.bg = Some(100.0);
        let mut b = zoned("2018-06-01T11:00:00+01:00");
        b.iob = Some(3.0);
        b.bg = None;
        let out = uniform_to_utc(&[a, b]);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.merged_count, 1);
        assert_eq!(out.records[0].iob, Some(2.0));
        assert_eq!(out.records[0].bg, Some(100.0));
    }

    #[test]
    fn empty_input() {
        let out = uniform_to_utc(&[]);
        assert!(out.records.is_empty());
        assert_eq!(out.dropped_count, 0);
    }

    #[test]
    fn csv_load_valid() {
        let text = "timestamp,iob,cob,bg\n\
                    2018-06-01T10:00:00Z,1.0,0,120\n\
                    2018-06-01T10:05:00Z,1.1,0,125\n\
                    2018-06-01T10:10:00Z,1.2,5,130\n";
        let (series, report) = load_csv_str(text, &Schema::default(), "p").unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.dropped_count, 0);
        assert_eq!(report.rows_read, 3);
        assert_eq!(report.rows_kept, 3);
        assert!((report.span_hours - 10.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn csv_load_leading_offsetless_row() {
        let text = "timestamp,iob,cob,bg\n\
                    2018-06-01T09:55:00,1.0,0,120\n\
                    2018-06-01T10:00:00Z,1.0,0,120\n\
                    2018-06-01T10:05:00Z,1.1,0,125\n\
                    2018-06-01T10:10:00Z,1.2,5,130\n";
        let (series, report) = load_csv_str(text, &Schema::default(), "p").unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.dropped_count, 1);
        assert_eq!(report.rows_dropped, 1);
    }

    #[test]
    fn csv_header_only() {
        let (series, report) = load_csv_str("timestamp,iob,cob,bg\n", &Schema::default(), "p").unwrap();
        assert!(series.is_empty());
        assert_eq!(report.span_hours, 0.0);
        assert_eq!(report.span_start, None);
    }

    #[test]
    fn csv_missing_column_named() {
        let err = load_csv_str("timestamp,iob,bg\n", &Schema::default(), "p").unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(ref c) if c == "cob"));
        assert!(err.to_string().contains("cob"));
    }

    #[test]
    fn csv_empty_file() {
        assert!(matches!(
            load_csv_str("", &Schema::default(), "p"),
            Err(IngestError::MissingHeader)
        ));
    }

    #[test]
    fn jsonl_mixed_value_types() {
        let text = r#"{"timestamp": "2018-06-01T10:00:00Z", "iob": 1.5, "bg": "120"}
{"timestamp": 1527847500000, "cob": 12}

{"iob": 2.0}
"#;
        let (series, report) = load_jsonl_str(text, &Schema::default(), "p").unwrap();
        assert_eq!(report.rows_read, 3);
        assert_eq!(series.len(), 2);
        assert_eq!(report.rejections.len(), 1);
        assert_eq!(report.rejections[0].reason, RejectReason::MissingTimestamp);
        assert_eq!(series.records[0].bg, Some(120.0));
    }

    fn arb_record() -> impl Strategy<Value = RawRecord> {
        (0i64..2_000, prop::option::of(-720i32..720), 0u8..4, 0.0f64..10.0).prop_map(
            |(minute, offset_min, dup, v)| {
                let naive = chrono::NaiveDate::from_ymd_opt(2020, 3, 1)
                    .unwrap()
                    .and_hms_opt(0, 0, 0)
                    .unwrap()
                    + Duration::minutes(minute * 5 + dup as i64 % 2);
                let timestamp = match offset_min {
                    Some(o) => {
                        let off = FixedOffset::east_opt(o * 60).unwrap();
                        RawTimestamp::Zoned(off.from_local_datetime(&naive).unwrap())
                    }
                    None => RawTimestamp::Local(naive),
                };
                RawRecord {
                    timestamp,
                    iob: Some(v),
                    cob: None,
                    bg: Some(100.0 + v),
                }
            },
        )
    }

    proptest! {
        #[test]
        fn uniforming_is_idempotent_and_accounted(records in prop::collection::vec(arb_record(), 0..60)) {
            let once = uniform_to_utc(&records);
            let twice = uniform_to_utc(&once.to_raw_records());
            prop_assert_eq!(&once.records, &twice.records);
            prop_assert!(once.records.windows(2).all(|w| w[0].instant < w[1].instant));
            prop_assert_eq!(records.len(), once.records.len() + once.dropped_count + once.merged_count);
        }
    }
}
