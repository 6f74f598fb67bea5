//! Regular hourly/daily series with coverage-based day qualification, and
//! the fixed-length day and week segments cut from them.
//!
//! A day is kept at hourly frequency only when every hour holds at least one
//! reading, and at daily frequency only when each of the eight 3-hour windows
//! does. Which readings count toward coverage is set by [`QualifyBy`].

use std::collections::BTreeMap;
use std::ops::Range;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Reading, UniformSeries, Variable};

pub const HOURS_PER_DAY: usize = 24;
pub const DAYS_PER_WEEK: usize = 7;
const DAILY_WINDOW_HOURS: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("expected a {expected:?} series, got {actual:?}")]
    WrongFrequency { expected: Frequency, actual: Frequency },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Hourly,
    Daily,
}

impl Frequency {
    pub fn step(self) -> Duration {
        match self {
            Frequency::Hourly => Duration::hours(1),
            Frequency::Daily => Duration::days(1),
        }
    }

    fn floor(self, t: DateTime<Utc>) -> DateTime<Utc> {
        let date = t.date_naive();
        let hour = match self {
            Frequency::Hourly => t.hour(),
            Frequency::Daily => 0,
        };
        date.and_hms_opt(hour, 0, 0).expect("valid hour").and_utc()
    }
}

/// Which readings count toward a day's coverage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualifyBy {
    /// Only readings carrying BG; IOB/COB inherit the day's status.
    #[default]
    Bg,
    /// Any reading, whatever variables it carries.
    AnyReading,
    /// Each variable must meet the rule on its own readings.
    EveryVariable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; absent for single-reading bins.
    pub std: Option<f64>,
    pub count: usize,
}

impl BinStats {
    pub fn from_values(values: &[f64]) -> Option<BinStats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding can push the mean of equal values a ulp past max.
        let mean = (values.iter().sum::<f64>() / n as f64).clamp(min, max);
        let std = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Some(BinStats {
            mean,
            min,
            max,
            std,
            count: n,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VarStats {
    pub iob: Option<BinStats>,
    pub cob: Option<BinStats>,
    pub bg: Option<BinStats>,
}

impl VarStats {
    pub fn get(&self, var: Variable) -> Option<&BinStats> {
        match var {
            Variable::Iob => self.iob.as_ref(),
            Variable::Cob => self.cob.as_ref(),
            Variable::Bg => self.bg.as_ref(),
        }
    }

    fn from_readings<'a>(readings: impl Iterator<Item = &'a Reading> + Clone) -> VarStats {
        let collect = |var: Variable| {
            let values: Vec<f64> = readings.clone().filter_map(|r| r.get(var)).collect();
            BinStats::from_values(&values)
        };
        VarStats {
            iob: collect(Variable::Iob),
            cob: collect(Variable::Cob),
            bg: collect(Variable::Bg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub start: DateTime<Utc>,
    /// Readings of any kind falling in the bin.
    pub raw_count: usize,
    pub stats: VarStats,
}

impl Bin {
    pub fn mean(&self, var: Variable) -> Option<f64> {
        self.stats.get(var).map(|s| s.mean)
    }

    pub fn date(&self) -> NaiveDate {
        self.start.date_naive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularSeries {
    pub frequency: Frequency,
    /// Sorted by start.
    pub bins: Vec<Bin>,
    /// Populated bins removed by the coverage rules.
    pub excluded_bins: Vec<DateTime<Utc>>,
    pub excluded_days: Vec<NaiveDate>,
}

impl RegularSeries {
    pub fn empty(frequency: Frequency) -> Self {
        RegularSeries {
            frequency,
            bins: Vec::new(),
            excluded_bins: Vec::new(),
            excluded_days: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn means(&self, var: Variable) -> Vec<Option<f64>> {
        self.bins.iter().map(|b| b.mean(var)).collect()
    }

    /// Distinct UTC dates with at least one retained bin.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut days: Vec<NaiveDate> = self.bins.iter().map(Bin::date).collect();
        days.dedup();
        days
    }

    fn require(&self, expected: Frequency) -> Result<(), ResampleError> {
        if self.frequency == expected {
            Ok(())
        } else {
            Err(ResampleError::WrongFrequency {
                expected,
                actual: self.frequency,
            })
        }
    }
}

/// Assigns readings to bins and aggregates them; no coverage rule applied.
/// The output is dense between the first and last bin, with empty bins
/// carrying `raw_count == 0` and no statistics.
pub fn aggregate_bins(series: &UniformSeries, frequency: Frequency) -> RegularSeries {
    let mut out = RegularSeries::empty(frequency);
    let (Some(first), Some(last)) = (series.records.first(), series.records.last()) else {
        return out;
    };
    let mut start = frequency.floor(first.instant);
    let end = frequency.floor(last.instant);
    let mut idx = 0;
    while start <= end {
        let next = start + frequency.step();
        let from = idx;
        while idx < series.records.len() && series.records[idx].instant < next {
            idx += 1;
        }
        let slice = &series.records[from..idx];
        out.bins.push(Bin {
            start,
            raw_count: slice.len(),
            stats: VarStats::from_readings(slice.iter()),
        });
        start = next;
    }
    out
}

/// Keep iff each of the 24 hourly bins holds at least one reading.
pub fn qualify_day_hourly(hour_counts: &[usize]) -> bool {
    hour_counts.len() == HOURS_PER_DAY && hour_counts.iter().all(|&c| c >= 1)
}

/// Keep iff every 3-hour window of the day holds at least one reading.
pub fn qualify_day_daily<I: IntoIterator<Item = NaiveTime>>(times: I) -> bool {
    const WINDOWS: usize = HOURS_PER_DAY / DAILY_WINDOW_HOURS as usize;
    let mut seen = [false; WINDOWS];
    for t in times {
        seen[(t.hour() / DAILY_WINDOW_HOURS) as usize] = true;
    }
    seen.iter().all(|&s| s)
}

fn counts_toward(reading: &Reading, basis: QualifyBy, var: Option<Variable>) -> bool {
    match (basis, var) {
        (QualifyBy::Bg, _) => reading.bg.is_some(),
        (QualifyBy::AnyReading, _) => true,
        (QualifyBy::EveryVariable, Some(v)) => reading.get(v).is_some(),
        (QualifyBy::EveryVariable, None) => true,
    }
}

fn day_qualifies(day: &[Reading], frequency: Frequency, basis: QualifyBy) -> bool {
    let check = |var: Option<Variable>| {
        let times = day
            .iter()
            .filter(|r| counts_toward(r, basis, var))
            .map(|r| r.instant.time());
        match frequency {
            Frequency::Hourly => {
                let mut counts = [0usize; HOURS_PER_DAY];
                for t in times {
                    counts[t.hour() as usize] += 1;
                }
                qualify_day_hourly(&counts)
            }
            Frequency::Daily => qualify_day_daily(times),
        }
    };
    match basis {
        QualifyBy::EveryVariable => Variable::ALL.iter().all(|&v| check(Some(v))),
        _ => check(None),
    }
}

fn group_by_day(series: &UniformSeries) -> Vec<(NaiveDate, &[Reading])> {
    let records = &series.records;
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let date = records[i].instant.date_naive();
        let mut j = i + 1;
        while j < records.len() && records[j].instant.date_naive() == date {
            j += 1;
        }
        out.push((date, &records[i..j]));
        i = j;
    }
    out
}

/// Aggregates and applies the coverage rule of `frequency` day by day.
pub fn build_regular_series(
    series: &UniformSeries,
    frequency: Frequency,
    basis: QualifyBy,
) -> RegularSeries {
    let mut out = RegularSeries::empty(frequency);
    for (date, day) in group_by_day(series) {
        let keep = day_qualifies(day, frequency, basis);
        let day_series = UniformSeries {
            records: day.to_vec(),
            ..UniformSeries::default()
        };
        let bins = aggregate_bins(&day_series, frequency);
        if keep {
            out.bins.extend(bins.bins.into_iter().filter(|b| b.raw_count > 0));
        } else {
            out.excluded_days.push(date);
            out.excluded_bins
                .extend(bins.bins.iter().filter(|b| b.raw_count > 0).map(|b| b.start));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    DayOfHours,
    WeekOfDays,
}

impl SegmentKind {
    /// Samples per segment.
    pub fn width(self) -> usize {
        match self {
            SegmentKind::DayOfHours => HOURS_PER_DAY,
            SegmentKind::WeekOfDays => DAYS_PER_WEEK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarTag {
    /// First day covered by the segment.
    pub date: NaiveDate,
    pub iso_year: i32,
    pub iso_week: u32,
    pub month: u32,
    /// 1 = Monday … 7 = Sunday.
    pub weekday: u32,
}

impl CalendarTag {
    pub fn of(date: NaiveDate) -> Self {
        let iso = date.iso_week();
        CalendarTag {
            date,
            iso_year: iso.year(),
            iso_week: iso.week(),
            month: date.month(),
            weekday: date.weekday().number_from_monday(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub tag: CalendarTag,
    pub iob: Vec<f64>,
    pub cob: Vec<f64>,
    pub bg: Vec<f64>,
}

impl Segment {
    pub fn get(&self, var: Variable) -> &[f64] {
        match var {
            Variable::Iob => &self.iob,
            Variable::Cob => &self.cob,
            Variable::Bg => &self.bg,
        }
    }

    pub fn get_mut(&mut self, var: Variable) -> &mut Vec<f64> {
        match var {
            Variable::Iob => &mut self.iob,
            Variable::Cob => &mut self.cob,
            Variable::Bg => &mut self.bg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSet {
    pub kind: SegmentKind,
    pub segments: Vec<Segment>,
    /// Fully qualified days/weeks skipped because some variable had no readings in a bin.
    pub skipped_incomplete: usize,
}

impl SegmentSet {
    pub fn empty(kind: SegmentKind) -> Self {
        SegmentSet {
            kind,
            segments: Vec::new(),
            skipped_incomplete: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// One row per segment for a single variable.
    pub fn rows(&self, var: Variable) -> Vec<Vec<f64>> {
        self.segments.iter().map(|s| s.get(var).to_vec()).collect()
    }

    /// Each segment as a V×L matrix over `vars`, in the given order.
    pub fn panel(&self, vars: &[Variable]) -> Vec<Vec<Vec<f64>>> {
        self.segments
            .iter()
            .map(|s| vars.iter().map(|&v| s.get(v).to_vec()).collect())
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> SegmentSet {
        SegmentSet {
            kind: self.kind,
            segments: indices.iter().map(|&i| self.segments[i].clone()).collect(),
            skipped_incomplete: 0,
        }
    }
}

fn full_means(bins: &[&Bin]) -> Option<[Vec<f64>; 3]> {
    let mut rows: [Vec<f64>; 3] = Default::default();
    for bin in bins {
        for var in Variable::ALL {
            rows[var.index()].push(bin.mean(var)?);
        }
    }
    Some(rows)
}

fn segment_from(tag: CalendarTag, [iob, cob, bg]: [Vec<f64>; 3]) -> Segment {
    Segment { tag, iob, cob, bg }
}

/// One 24-hour row per retained day, ordered by date.
pub fn extract_day_segments(series: &RegularSeries) -> Result<SegmentSet, ResampleError> {
    series.require(Frequency::Hourly)?;
    let mut by_day: BTreeMap<NaiveDate, Vec<&Bin>> = BTreeMap::new();
    for bin in &series.bins {
        by_day.entry(bin.date()).or_default().push(bin);
    }
    let mut out = SegmentSet::empty(SegmentKind::DayOfHours);
    for (date, bins) in by_day {
        let complete = bins.len() == HOURS_PER_DAY
            && bins.iter().enumerate().all(|(h, b)| b.start.hour() as usize == h);
        match full_means(&bins).filter(|_| complete) {
            Some(rows) => out.segments.push(segment_from(CalendarTag::of(date), rows)),
            None => out.skipped_incomplete += 1,
        }
    }
    Ok(out)
}

/// One 7-day row per Monday-anchored week whose days are all retained.
pub fn extract_week_segments(series: &RegularSeries) -> Result<SegmentSet, ResampleError> {
    series.require(Frequency::Daily)?;
    let by_day: BTreeMap<NaiveDate, &Bin> = series.bins.iter().map(|b| (b.date(), b)).collect();
    let mut out = SegmentSet::empty(SegmentKind::WeekOfDays);
    for &monday in by_day.keys().filter(|d| d.weekday() == Weekday::Mon) {
        let week: Option<Vec<&Bin>> = (0..DAYS_PER_WEEK as i64)
            .map(|k| by_day.get(&(monday + Duration::days(k))).copied())
            .collect();
        let Some(week) = week else { continue };
        match full_means(&week) {
            Some(rows) => out.segments.push(segment_from(CalendarTag::of(monday), rows)),
            None => out.skipped_incomplete += 1,
        }
    }
    Ok(out)
}

/// Longest run of `true`; ties go to the earliest run.
pub fn longest_true_run(mask: &[bool]) -> Range<usize> {
    let mut best = 0..0;
    let mut start = None;
    for (i, &m) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s > best.len() {
                    best = s..i;
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Longest stretch of consecutive retained days in a daily series.
pub fn longest_run(series: &RegularSeries) -> Result<RegularSeries, ResampleError> {
    series.require(Frequency::Daily)?;
    let mut out = RegularSeries::empty(Frequency::Daily);
    let (Some(first), Some(last)) = (series.bins.first(), series.bins.last()) else {
        return Ok(out);
    };
    let span = (last.date() - first.date()).num_days() as usize + 1;
    let mut mask = vec![false; span];
    let mut slot: Vec<Option<usize>> = vec![None; span];
    for (i, bin) in series.bins.iter().enumerate() {
        let pos = (bin.date() - first.date()).num_days() as usize;
        mask[pos] = true;
        slot[pos] = Some(i);
    }
    let run = longest_true_run(&mask);
    out.bins = run
        .map(|pos| series.bins[slot[pos].expect("masked slot")].clone())
        .collect();
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV columns: `bin_start,raw_count`, then `<var>_{mean,min,max,std,count}` for iob, cob, bg.
pub fn write_regular_csv<W: std::io::Write>(series: &RegularSeries, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["bin_start".to_string(), "raw_count".to_string()];
    for var in Variable::ALL {
        for field in ["mean", "min", "max", "std", "count"] {
            header.push(format!("{var}_{field}"));
        }
    }
    w.write_record(&header)?;
    for bin in &series.bins {
        let mut row = vec![
            bin.start.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            bin.raw_count.to_string(),
        ];
        for var in Variable::ALL {
            match bin.stats.get(var) {
                Some(s) => row.extend([
                    s.mean.to_string(),
                    s.min.to_string(),
                    s.max.to_string(),
                    fmt_opt(s.std),
                    s.count.to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 4).chain(["0".to_string()])),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV columns: `date,iso_year,iso_week,month,weekday,variable,v0..v{L-1}`; one row per segment per variable.
pub fn write_segments_csv<W: std::io::Write>(set: &SegmentSet, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["date", "iso_year", "iso_week", "month", "weekday", "variable"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..set.kind.width()).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for seg in &set.segments {
        for var in Variable::ALL {
            let mut row = vec![
                seg.tag.date.to_string(),
                seg.tag.iso_year.to_string(),
                seg.tag.iso_week.to_string(),
                seg.tag.month.to_string(),
                seg.tag.weekday.to_string(),
                var.to_string(),
            ];
            row.extend(seg.get(var).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
