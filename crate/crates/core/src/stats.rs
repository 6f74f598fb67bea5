//! Scaling, descriptive statistics, mean confidence intervals, resampling
//! fidelity checks and weekday × month heatmaps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::ingest::{UniformSeries, Variable};
use crate::resample::{Frequency, RegularSeries, SegmentSet};

/// Standard deviations below this are treated as zero spread.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate scale: input is constant")]
    DegenerateScale,
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("grouping keys differ: {0}")]
    MismatchedGroupings(String),
    #[error("expected a daily series")]
    NotDaily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    Zscore,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub kind: ScalingKind,
    /// Mean (z-score) or minimum (min-max).
    pub location: f64,
    /// Population std (z-score) or range (min-max).
    pub scale: f64,
    pub degenerate: bool,
}

impl ScalingParams {
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        if self.degenerate {
            return vec![0.0; values.len()];
        }
        values.iter().map(|v| (v - self.location) / self.scale).collect()
    }

    pub fn invert(&self, scaled: &[f64]) -> Vec<f64> {
        scaled.iter().map(|v| v * self.scale + self.location).collect()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn sample_variance(values: &[f64], mean: f64) -> Option<f64> {
    (values.len() > 1)
        .then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64)
}

pub fn zscore_params(values: &[f64]) -> Result<ScalingParams, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let m = mean(values);
    let sd = population_std(values, m);
    if sd <= DEGENERATE_STD * m.abs().max(1.0) {
        return Err(StatsError::DegenerateScale);
    }
    Ok(ScalingParams {
        kind: ScalingKind::Zscore,
        location: m,
        scale: sd,
        degenerate: false,
    })
}

/// `(x − mean) / population std`.
pub fn zscore(values: &[f64]) -> Result<(Vec<f64>, ScalingParams), StatsError> {
    let params = zscore_params(values)?;
    Ok((params.apply(values), params))
}

pub fn minmax_params(values: &[f64]) -> Result<ScalingParams, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooShort { needed: 1, got: 0 });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    Ok(ScalingParams {
        kind: ScalingKind::Minmax,
        location: lo,
        scale: if range > 0.0 { range } else { 1.0 },
        degenerate: range <= 0.0,
    })
}

/// `(x − min) / (max − min)`; constant input maps to zeros with `degenerate` set.
pub fn minmax_scale(values: &[f64]) -> Result<(Vec<f64>, ScalingParams), StatsError> {
    let params = minmax_params(values)?;
    let mut out = params.apply(values);
    if !params.degenerate {
        // Pin the extremes; (max − min) / range can round to 1 − ε.
        for (o, v) in out.iter_mut().zip(values) {
            if *v == params.location {
                *o = 0.0;
            } else if *v == params.location + params.scale {
                *o = 1.0;
            }
            *o = o.clamp(0.0, 1.0);
        }
    }
    Ok((out, params))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingScope {
    /// One set of parameters per variable across all segments.
    #[default]
    Global,
    PerSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedScaling {
    pub variable: Variable,
    /// Present only for per-segment scaling.
    pub segment: Option<usize>,
    pub params: ScalingParams,
}

/// Scales every variable of a segment set.
pub fn scale_segments(
    set: &SegmentSet,
    kind: ScalingKind,
    scope: ScalingScope,
) -> Result<(SegmentSet, Vec<AppliedScaling>), StatsError> {
    let fit = |values: &[f64]| match kind {
        ScalingKind::Zscore => zscore_params(values),
        ScalingKind::Minmax => minmax_params(values),
    };
    let mut out = set.clone();
    let mut applied = Vec::new();
    for var in Variable::ALL {
        match scope {
            ScalingScope::Global => {
                let all: Vec<f64> = set.segments.iter().flat_map(|s| s.get(var).iter().copied()).collect();
                if all.is_empty() {
                    continue;
                }
                let params = fit(&all)?;
                for seg in out.segments.iter_mut() {
                    let scaled = scale_with(&params, seg.get(var));
                    *seg.get_mut(var) = scaled;
                }
                applied.push(AppliedScaling {
                    variable: var,
                    segment: None,
                    params,
                });
            }
            ScalingScope::PerSegment => {
                for (i, seg) in out.segments.iter_mut().enumerate() {
                    let params = fit(seg.get(var))?;
                    let scaled = scale_with(&params, seg.get(var));
                    *seg.get_mut(var) = scaled;
                    applied.push(AppliedScaling {
                        variable: var,
                        segment: Some(i),
                        params,
                    });
                }
            }
        }
    }
    Ok((out, applied))
}

fn scale_with(params: &ScalingParams, values: &[f64]) -> Vec<f64> {
    let mut out = params.apply(values);
    if params.kind == ScalingKind::Minmax {
        out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    out
}

/// Linear-interpolation quantile (the common "type 7" definition) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// Sample statistics; absent for single-element groups.
    pub std: Option<f64>,
    pub variance: Option<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values outside `[q1 − 1.5·IQR, q3 + 1.5·IQR]`.
    pub outliers: usize,
}

pub fn group_stats(values: &[f64]) -> Option<GroupStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = mean(values);
    let variance = sample_variance(values, m);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Some(GroupStats {
        n: values.len(),
        mean: m,
        std: variance.map(f64::sqrt),
        variance,
        min: sorted[0],
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: sorted[sorted.len() - 1],
        outliers: sorted.iter().filter(|v| **v < lo || **v > hi).count(),
    })
}

/// Per-group statistics; empty groups are omitted.
pub fn descriptive_stats<K: Ord + Clone>(groups: &BTreeMap<K, Vec<f64>>) -> BTreeMap<K, GroupStats> {
    groups
        .iter()
        .filter_map(|(k, v)| group_stats(v).map(|s| (k.clone(), s)))
        .collect()
}

/// Student-t interval `mean ± t(1 − α/2, n − 1) · s/√n`.
pub fn mean_confidence_interval(sample: &[f64], level: f64) -> Result<(f64, f64), StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    let n = sample.len();
    if n < 2 {
        return Err(StatsError::TooShort { needed: 2, got: n });
    }
    let m = mean(sample);
    let s = sample_variance(sample, m).unwrap_or(0.0).sqrt();
    if s == 0.0 {
        return Ok((m, m));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let half = t * s / (n as f64).sqrt();
    Ok((m - half, m + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Hour,
    Weekday,
    Month,
    Year,
}

impl GroupBy {
    pub const ALL: [GroupBy; 4] = [GroupBy::Hour, GroupBy::Weekday, GroupBy::Month, GroupBy::Year];

    /// Hour 0–23, weekday 1 (Mon)–7, month 1–12, or calendar year.
    pub fn key(self, t: DateTime<Utc>) -> i32 {
        match self {
            GroupBy::Hour => t.hour() as i32,
            GroupBy::Weekday => t.weekday().number_from_monday() as i32,
            GroupBy::Month => t.month() as i32,
            GroupBy::Year => t.year(),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GroupBy::Hour => "hour",
            GroupBy::Weekday => "weekday",
            GroupBy::Month => "month",
            GroupBy::Year => "year",
        };
        f.write_str(s)
    }
}

/// Raw readings of one variable grouped by calendar key.
pub fn group_readings(series: &UniformSeries, var: Variable, by: GroupBy) -> BTreeMap<i32, Vec<f64>> {
    let mut out: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for r in &series.records {
        if let Some(v) = r.get(var) {
            out.entry(by.key(r.instant)).or_default().push(v);
        }
    }
    out
}

/// Bin means of one variable grouped by calendar key of the bin start.
pub fn group_bins(series: &RegularSeries, var: Variable, by: GroupBy) -> BTreeMap<i32, Vec<f64>> {
    let mut out: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for b in &series.bins {
        if let Some(v) = b.mean(var) {
            out.entry(by.key(b.start)).or_default().push(v);
        }
    }
    out
}

/// Group-by → (group key → group mean).
pub type GroupedMeans = BTreeMap<GroupBy, BTreeMap<i32, f64>>;

pub fn grouped_means(groups: &BTreeMap<GroupBy, BTreeMap<i32, Vec<f64>>>) -> GroupedMeans {
    groups
        .iter()
        .map(|(by, g)| {
            let means = g
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (*k, mean(v)))
                .collect();
            (*by, means)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingFidelity {
    pub by: GroupBy,
    pub ordering_identical: bool,
    pub max_abs_discrepancy: f64,
    /// Key pairs ordered one way in `a` and the other way in `b`.
    pub discordant_pairs: Vec<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub pass: bool,
    pub groupings: Vec<GroupingFidelity>,
}

/// Relative margin under which two group means count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

fn order(x: f64, y: f64) -> std::cmp::Ordering {
    let tol = TIE_TOLERANCE * x.abs().max(y.abs()).max(1.0);
    if (x - y).abs() <= tol {
        std::cmp::Ordering::Equal
    } else {
        x.total_cmp(&y)
    }
}

/// Checks that resampling kept the rank order of group means for every grouping.
/// Pairs tied (within a relative 1e-9) on either side never count as discordant.
pub fn compare_groupings(a: &GroupedMeans, b: &GroupedMeans) -> Result<FidelityReport, StatsError> {
    let by_a: BTreeSet<_> = a.keys().collect();
    let by_b: BTreeSet<_> = b.keys().collect();
    if by_a != by_b {
        return Err(StatsError::MismatchedGroupings(format!(
            "groupings {:?} vs {:?}",
            by_a, by_b
        )));
    }
    let mut groupings = Vec::new();
    for (by, ga) in a {
        let gb = &b[by];
        let ka: BTreeSet<_> = ga.keys().collect();
        let kb: BTreeSet<_> = gb.keys().collect();
        if ka != kb {
            let only_a: Vec<_> = ka.difference(&kb).collect();
            let only_b: Vec<_> = kb.difference(&ka).collect();
            return Err(StatsError::MismatchedGroupings(format!(
                "{by}: only in first {only_a:?}, only in second {only_b:?}"
            )));
        }
        let keys: Vec<i32> = ga.keys().copied().collect();
        let mut discordant_pairs = Vec::new();
        for (i, &x) in keys.iter().enumerate() {
            for &y in &keys[i + 1..] {
                let oa = order(ga[&x], ga[&y]);
                let ob = order(gb[&x], gb[&y]);
                if oa != std::cmp::Ordering::Equal && ob != std::cmp::Ordering::Equal && oa != ob {
                    discordant_pairs.push((x, y));
                }
            }
        }
        let max_abs_discrepancy = keys
            .iter()
            .map(|k| (ga[k] - gb[k]).abs())
            .fold(0.0, f64::max);
        groupings.push(GroupingFidelity {
            by: *by,
            ordering_identical: discordant_pairs.is_empty(),
            max_abs_discrepancy,
            discordant_pairs,
        });
    }
    Ok(FidelityReport {
        pass: groupings.iter().all(|g| g.ordering_identical),
        groupings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub variable: Variable,
    /// `cells[weekday − 1][month − 1]`; absent where no day falls.
    pub cells: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

impl HeatmapGrid {
    pub fn populated(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_some()).count()
    }
}

/// Weekday × month grid of the mean of daily means.
pub fn heatmap_grid(series: &RegularSeries, var: Variable) -> Result<HeatmapGrid, StatsError> {
    if series.frequency != Frequency::Daily {
        return Err(StatsError::NotDaily);
    }
    let mut sums = vec![vec![0.0f64; 12]; 7];
    let mut counts = vec![vec![0usize; 12]; 7];
    for bin in &series.bins {
        if let Some(v) = bin.mean(var) {
            let w = bin.start.weekday().num_days_from_monday() as usize;
            let m = bin.start.month0() as usize;
            sums[w][m] += v;
            counts[w][m] += 1;
        }
    }
    let cells = sums
        .iter()
        .zip(&counts)
        .map(|(srow, crow)| {
            srow.iter()
                .zip(crow)
                .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                .collect()
        })
        .collect();
    Ok(HeatmapGrid {
        variable: var,
        cells,
        counts,
    })
}

/// CSV: `weekday,m1..m12`, blank for absent cells.
pub fn write_heatmap_csv<W: std::io::Write>(grid: &HeatmapGrid, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["weekday".to_string()];
    header.extend((1..=12).map(|m| format!("m{m}")));
    w.write_record(&header)?;
    for (i, row) in grid.cells.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
