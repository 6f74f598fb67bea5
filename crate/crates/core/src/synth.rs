//! Seeded synthetic AID logs with planted ground truth, and planted
//! motif/discord series for matrix-profile checks.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Variable;
use crate::matprof::default_exclusion_radius;

/// Per-variable reference scales; `noise_std` is a fraction of these.
pub const NOISE_SCALE: [(Variable, f64); 3] = [(Variable::Iob, 5.0), (Variable::Cob, 60.0), (Variable::Bg, 100.0)];

const LABEL_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("days must be at least 1")]
    ZeroDays,
    #[error("reading interval must divide into a day and be at least one minute")]
    BadInterval,
    #[error("at least one archetype is required")]
    NoArchetypes,
    #[error("day_labels has {got} entries, expected {expected}")]
    LabelCount { expected: usize, got: usize },
    #[error("day {day} refers to archetype {label}, only {count} defined")]
    UnknownArchetype { day: usize, label: usize, count: usize },
    #[error("planted week starting at day {0} does not fit")]
    WeekOutOfRange(usize),
    #[error("planted weeks at days {0} and {1} overlap")]
    WeeksOverlap(usize, usize),
    #[error("negative noise_std")]
    NegativeNoise,
    #[error("window length m={0} is too small")]
    WindowTooSmall(usize),
    #[error("need at least two motif positions")]
    TooFewMotifs,
    #[error("planted window at {position} does not fit a series of {length}")]
    PositionOutOfRange { position: usize, length: usize },
    #[error("planted windows at {0} and {1} are closer than m+2")]
    PositionsOverlap(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meal {
    pub hour: f64,
    pub carbs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Archetype {
    pub name: String,
    pub meals: Vec<Meal>,
    /// Peak BG rise (mg/dL) of a triangular bump centred at 03:00.
    pub nocturnal_rise: f64,
    pub basal_bg: f64,
}

impl Default for Archetype {
    fn default() -> Self {
        Archetype {
            name: "three-meals".into(),
            meals: vec![
                Meal { hour: 7.5, carbs: 45.0 },
                Meal { hour: 12.5, carbs: 60.0 },
                Meal { hour: 19.0, carbs: 70.0 },
            ],
            nocturnal_rise: 0.0,
            basal_bg: 110.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseShape {
    pub cob_rise_minutes: f64,
    pub cob_decay_minutes: f64,
    pub iob_rise_minutes: f64,
    pub iob_decay_minutes: f64,
    /// Grams of carbohydrate covered by one insulin unit.
    pub carb_ratio: f64,
    /// BG rise per gram on board.
    pub bg_per_gram: f64,
}

impl Default for ResponseShape {
    fn default() -> Self {
        ResponseShape {
            cob_rise_minutes: 15.0,
            cob_decay_minutes: 90.0,
            iob_rise_minutes: 30.0,
            iob_decay_minutes: 120.0,
            carb_ratio: 10.0,
            bg_per_gram: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapWindow {
    /// UTC start.
    pub start: NaiveDateTime,
    pub hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TzChange {
    /// First day (index) written with the new offset.
    pub day: usize,
    pub offset_minutes: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub seed: u64,
    pub days: usize,
    pub start: NaiveDate,
    pub interval_minutes: u32,
    pub archetypes: Vec<Archetype>,
    /// Archetype per day; drawn uniformly from the seed when empty.
    pub day_labels: Vec<usize>,
    pub response: ResponseShape,
    pub noise_std: f64,
    /// Uniform ± jitter applied to every meal time.
    pub meal_jitter_minutes: f64,
    /// Additive BG offset per weekday, Monday first.
    pub weekday_effect: [f64; 7],
    /// Additive BG offset per month, January first.
    pub month_effect: [f64; 12],
    pub utc_offset_minutes: i32,
    pub tz_changes: Vec<TzChange>,
    pub gaps: Vec<GapWindow>,
    /// Every n-th row is written without an offset (the first row and the
    /// first row after an offset change always keep theirs).
    pub offsetless_every: Option<usize>,
    /// Start days of weeks that repeat the first listed week exactly.
    pub motif_weeks: Vec<usize>,
    /// Start day of a week with elevated BG and no meals.
    pub discord_week: Option<usize>,
    pub discord_bg_offset: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            days: 28,
            start: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            interval_minutes: 5,
            archetypes: vec![Archetype::default()],
            day_labels: Vec::new(),
            response: ResponseShape::default(),
            noise_std: 0.0,
            meal_jitter_minutes: 0.0,
            weekday_effect: [0.0; 7],
            month_effect: [0.0; 12],
            utc_offset_minutes: 0,
            tz_changes: Vec::new(),
            gaps: Vec::new(),
            offsetless_every: None,
            motif_weeks: Vec::new(),
            discord_week: None,
            discord_bg_offset: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub days: usize,
    pub start: NaiveDate,
    pub archetype_names: Vec<String>,
    pub day_labels: Vec<usize>,
    pub motif_weeks: Vec<usize>,
    pub discord_week: Option<usize>,
    pub gaps: Vec<GapWindow>,
    /// UTC days left with at least one empty hour by the planted gaps.
    pub gap_days: Vec<NaiveDate>,
    pub tz_changes: Vec<TzChange>,
    pub rows: usize,
    pub offsetless_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// CSV with header `timestamp,iob,cob,bg`.
    pub csv: String,
    pub truth: SynthTruth,
}

fn validate(spec: &SynthSpec) -> Result<(), SynthError> {
    if spec.days == 0 {
        return Err(SynthError::ZeroDays);
    }
    if spec.interval_minutes == 0 || 1440 % spec.interval_minutes != 0 {
        return Err(SynthError::BadInterval);
    }
    if spec.archetypes.is_empty() {
        return Err(SynthError::NoArchetypes);
    }
    if !spec.day_labels.is_empty() {
        if spec.day_labels.len() != spec.days {
            return Err(SynthError::LabelCount {
                expected: spec.days,
                got: spec.day_labels.len(),
            });
        }
        if let Some((day, &label)) = spec.day_labels.iter().enumerate().find(|(_, l)| **l >= spec.archetypes.len()) {
            return Err(SynthError::UnknownArchetype {
                day,
                label,
                count: spec.archetypes.len(),
            });
        }
    }
    if spec.noise_std < 0.0 {
        return Err(SynthError::NegativeNoise);
    }
    let mut weeks: Vec<usize> = spec.motif_weeks.clone();
    weeks.extend(spec.discord_week);
    for &w in &weeks {
        if w + 7 > spec.days {
            return Err(SynthError::WeekOutOfRange(w));
        }
    }
    for (i, &a) in weeks.iter().enumerate() {
        for &b in &weeks[i + 1..] {
            if a.abs_diff(b) < 7 {
                return Err(SynthError::WeeksOverlap(a, b));
            }
        }
    }
    Ok(())
}

/// Ramp to the peak over `rise` minutes, then exponential decay.
fn response(tau: f64, peak: f64, rise: f64, decay: f64) -> f64 {
    if tau < 0.0 {
        0.0
    } else if tau < rise {
        peak * tau / rise
    } else {
        peak * (-(tau - rise) / decay).exp()
    }
}

fn nocturnal(minute: f64, rise: f64) -> f64 {
    let hours_from_peak = (minute / 60.0 - 3.0).abs();
    rise * (1.0 - hours_from_peak / 2.0).max(0.0)
}

fn round_to(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

/// Readings (iob, cob, bg) for one day at every interval.
fn day_values(spec: &SynthSpec, day: usize, label: usize, discord: bool) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(day as u64);
    let arch = &spec.archetypes[label];
    let r = &spec.response;
    let meals: Vec<(f64, f64)> = if discord {
        Vec::new()
    } else {
        arch.meals
            .iter()
            .map(|meal| {
                let jitter = if spec.meal_jitter_minutes > 0.0 {
                    rng.random_range(-spec.meal_jitter_minutes..=spec.meal_jitter_minutes)
                } else {
                    0.0
                };
                (meal.hour * 60.0 + jitter, meal.carbs)
            })
            .collect()
    };
    let date = spec.start + Duration::days(day as i64);
    let effect = spec.weekday_effect[date.weekday_index()] + spec.month_effect[date.month0_index()]
        + if discord { spec.discord_bg_offset } else { 0.0 };
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = |v: Variable| NOISE_SCALE.iter().find(|(x, _)| *x == v).expect("all variables scaled").1 * spec.noise_std;
    let steps = 1440 / spec.interval_minutes as usize;
    (0..steps)
        .map(|s| {
            let minute = (s * spec.interval_minutes as usize) as f64;
            let mut iob = 0.0;
            let mut cob = 0.0;
            for &(at, carbs) in &meals {
                let tau = minute - at;
                cob += response(tau, carbs, r.cob_rise_minutes, r.cob_decay_minutes);
                iob += response(tau, carbs / r.carb_ratio, r.iob_rise_minutes, r.iob_decay_minutes);
            }
            let mut bg = arch.basal_bg + effect + r.bg_per_gram * cob + nocturnal(minute, arch.nocturnal_rise);
            let mut noisy = |v: Variable| {
                let z: f64 = noise.sample(&mut rng);
                z * scale(v)
            };
            iob = round_to((iob + noisy(Variable::Iob)).max(0.0), 3);
            cob = round_to((cob + noisy(Variable::Cob)).max(0.0), 3);
            bg = round_to((bg + noisy(Variable::Bg)).clamp(40.0, 400.0), 2);
            [iob, cob, bg]
        })
        .collect()
}

trait CalendarIndex {
    fn weekday_index(&self) -> usize;
    fn month0_index(&self) -> usize;
}

impl CalendarIndex for NaiveDate {
    fn weekday_index(&self) -> usize {
        chrono::Datelike::weekday(self).num_days_from_monday() as usize
    }
    fn month0_index(&self) -> usize {
        chrono::Datelike::month0(self) as usize
    }
}

fn labels(spec: &SynthSpec) -> Vec<usize> {
    if !spec.day_labels.is_empty() {
        return spec.day_labels.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(LABEL_STREAM);
    (0..spec.days).map(|_| rng.random_range(0..spec.archetypes.len())).collect()
}

fn offset_for_day(spec: &SynthSpec, day: usize) -> i32 {
    let mut changes: Vec<&TzChange> = spec.tz_changes.iter().collect();
    changes.sort_by_key(|c| c.day);
    changes
        .iter()
        .rev()
        .find(|c| c.day <= day)
        .map_or(spec.utc_offset_minutes, |c| c.offset_minutes)
}

fn format_offset(minutes: i32) -> String {
    let sign = if minutes < 0 { '-' } else { '+' };
    let m = minutes.unsigned_abs();
    format!("{sign}{:02}:{:02}", m / 60, m % 60)
}

/// Generates a log in the default ingest schema plus its ground truth.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    validate(spec)?;
    let mut day_labels = labels(spec);
    let discord_days: BTreeSet<usize> = spec.discord_week.map(|d| (d..d + 7).collect()).unwrap_or_default();
    // Day whose content each day reproduces.
    let mut source: Vec<usize> = (0..spec.days).collect();
    if let Some((&first, rest)) = spec.motif_weeks.split_first() {
        for &w in rest {
            for i in 0..7 {
                source[w + i] = first + i;
                day_labels[w + i] = day_labels[first + i];
            }
        }
    }

    let mut gap_hours: BTreeSet<(usize, u32)> = BTreeSet::new();
    let origin = spec.start.and_hms_opt(0, 0, 0).expect("midnight");
    let in_gap = |t: NaiveDateTime| {
        spec.gaps.iter().any(|g| {
            let end = g.start + Duration::milliseconds((g.hours * 3_600_000.0).round() as i64);
            t >= g.start && t < end
        })
    };

    let mut out = String::from("timestamp,iob,cob,bg\n");
    let mut rows = 0usize;
    let mut offsetless_rows = 0usize;
    let mut hour_seen: BTreeSet<(usize, u32)> = BTreeSet::new();
    let mut last_offset: Option<i32> = None;
    for day in 0..spec.days {
        let offset = offset_for_day(spec, day);
        let values = day_values(spec, source[day], day_labels[day], discord_days.contains(&day));
        for (s, [iob, cob, bg]) in values.into_iter().enumerate() {
            let utc = origin + Duration::days(day as i64) + Duration::minutes((s * spec.interval_minutes as usize) as i64);
            if in_gap(utc) {
                gap_hours.insert((day, utc.hour()));
                continue;
            }
            hour_seen.insert((day, utc.hour()));
            let local = utc + Duration::minutes(offset as i64);
            let keep_offset = last_offset != Some(offset)
                || spec.offsetless_every.is_none_or(|n| n == 0 || !(rows + 1).is_multiple_of(n));
            let stamp = local.format("%Y-%m-%dT%H:%M:%S").to_string();
            if keep_offset {
                out.push_str(&format!("{stamp}{},{iob},{cob},{bg}\n", format_offset(offset)));
            } else {
                out.push_str(&format!("{stamp},{iob},{cob},{bg}\n"));
                offsetless_rows += 1;
            }
            last_offset = Some(offset);
            rows += 1;
        }
    }
    let gap_days: Vec<NaiveDate> = gap_hours
        .iter()
        .filter(|key| !hour_seen.contains(key))
        .map(|(day, _)| spec.start + Duration::days(*day as i64))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    Ok(SynthOutput {
        csv: out,
        truth: SynthTruth {
            seed: spec.seed,
            days: spec.days,
            start: spec.start,
            archetype_names: spec.archetypes.iter().map(|a| a.name.clone()).collect(),
            day_labels,
            motif_weeks: spec.motif_weeks.clone(),
            discord_week: spec.discord_week,
            gaps: spec.gaps.clone(),
            gap_days,
            tz_changes: spec.tz_changes.clone(),
            rows,
            offsetless_rows,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSeries {
    pub values: Vec<f64>,
    pub m: usize,
    pub motif_positions: Vec<usize>,
    pub discord_position: usize,
    pub template: Vec<f64>,
}

/// Appends `len` random-walk points starting at `from` and, when `to` is
/// given, pinned to end there (a linearly corrected bridge).
fn walk_segment(
    values: &mut Vec<f64>,
    rng: &mut ChaCha8Rng,
    step: &Normal<f64>,
    from: Option<f64>,
    to: Option<f64>,
    len: usize,
) {
    if len == 0 {
        return;
    }
    let start = from.unwrap_or(0.0);
    let k = SMOOTH_HALF_WIDTH;
    let mut raw = vec![0.0];
    let mut velocity = 0.0;
    for _ in 1..len + 2 * k {
        let last = raw[raw.len() - 1];
        velocity = WALK_MOMENTUM * velocity + step.sample(rng);
        raw.push(last + velocity);
    }
    let mut walk: Vec<f64> = (0..len)
        .map(|i| raw[i..=i + 2 * k].iter().sum::<f64>() / (2 * k + 1) as f64)
        .collect();
    let first = walk[0];
    let trend = if from.is_some() && to.is_some() {
        0.0
    } else if rng.random_bool(0.5) {
        DRIFT
    } else {
        -DRIFT
    };
    walk.iter_mut().enumerate().for_each(|(i, w)| *w += trend * i as f64 - first);
    let correction = match (from, to) {
        (Some(_), Some(end)) if len > 1 => (end - start - walk[len - 1]) / (len - 1) as f64,
        _ => 0.0,
    };
    let shift = match (from, to) {
        (None, Some(end)) => end - walk[len - 1],
        _ => start,
    };
    values.extend(walk.iter().enumerate().map(|(k, w)| shift + w + correction * k as f64));
}

const WALK_MOMENTUM: f64 = 0.9;
const TEMPLATE_MOMENTUM: f64 = 0.8;
const SMOOTH_HALF_WIDTH: usize = 1;
const TEMPLATE_SCALE: f64 = 30.0;
/// Jump placed on both sides of planted windows, in random-walk step units.
const BRACKET_JUMP: f64 = 240.0;
/// Minimum per-step slope of segments leading into or out of the discord.
const DRIFT: f64 = 1.5;
const DISCORD_AMPLITUDE: f64 = 1.0;

/// Smoothed momentum random walk (unit step std) with a template copied
/// verbatim to each motif position and an alternating ±1 "pit" at the
/// discord position.
///
/// Each planted window sits between large jumps so windows only partly
/// overlapping it look like plain steps. Motif copies alternate the jump
/// direction so their shifted windows are not near-copies of each other.
/// The pit sits below both neighbours, far enough that the walk into it
/// falls and the walk out of it rises. `noise_std` is absolute, in units
/// of the base step std.
pub fn plant_motif_series(
    length: usize,
    m: usize,
    motif_positions: &[usize],
    discord_position: usize,
    noise_std: f64,
    seed: u64,
) -> Result<PlantedSeries, SynthError> {
    if m < 3 {
        return Err(SynthError::WindowTooSmall(m));
    }
    if motif_positions.len() < 2 {
        return Err(SynthError::TooFewMotifs);
    }
    if noise_std < 0.0 {
        return Err(SynthError::NegativeNoise);
    }
    let mut planted: Vec<usize> = motif_positions.to_vec();
    planted.push(discord_position);
    for &p in &planted {
        if p == 0 || p + m >= length {
            return Err(SynthError::PositionOutOfRange { position: p, length });
        }
    }
    let min_gap = (m + 2).max(default_exclusion_radius(m) + 1);
    for (i, &a) in planted.iter().enumerate() {
        for &b in &planted[i + 1..] {
            if a.abs_diff(b) < min_gap {
                return Err(SynthError::PositionsOverlap(a.min(b), a.max(b)));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 1.0).expect("unit normal");
    let mut template: Vec<f64> = Vec::with_capacity(m);
    let mut level = 0.0;
    let mut velocity = 0.0;
    for _ in 0..m {
        velocity = TEMPLATE_MOMENTUM * velocity + step.sample(&mut rng);
        level += velocity;
        template.push(level);
    }
    let mean = template.iter().sum::<f64>() / m as f64;
    let sd = (template.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
    template.iter_mut().for_each(|v| *v = TEMPLATE_SCALE * (*v - mean) / sd);

    // Planted windows with the level the walk must reach just before and
    // leave from just after each one.
    let mut plants: Vec<(usize, Vec<f64>, f64, f64)> = Vec::new();
    for (i, &p) in motif_positions.iter().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        plants.push((p, template.clone(), template[0] - sign * BRACKET_JUMP, template[m - 1] + sign * BRACKET_JUMP));
    }
    plants.sort_by_key(|p| p.0);
        let before = plants.iter().rev().find(|p| p.0 < discord_position);
    let after = plants.iter().find(|p| p.0 > discord_position);
    let mut level = f64::NEG_INFINITY;
    if let Some(b) = before {
        level = level.max(b.3 - BRACKET_JUMP + DRIFT * (discord_position - b.0 - m) as f64);
    }
    if let Some(a) = after {
        level = level.max(a.2 - BRACKET_JUMP + DRIFT * (a.0 - discord_position - m) as f64);
    }
    if !level.is_finite() {
        level = 0.0;
    }
    let pit: Vec<f64> = (0..m)
        .map(|j| level + if j % 2 == 0 { DISCORD_AMPLITUDE } else { -DISCORD_AMPLITUDE })
        .collect();
    plants.push((discord_position, pit, level + BRACKET_JUMP, level + BRACKET_JUMP));
    plants.sort_by_key(|p| p.0);

    let mut values = Vec::with_capacity(length);
    let mut cursor = 0;
    let mut entry: Option<f64> = None;
    for (p, window, pre, post) in &plants {
        walk_segment(&mut values, &mut rng, &step, entry, Some(*pre), p - cursor);
        values.extend(window);
        cursor = p + m;
        entry = Some(*post);
    }
    walk_segment(&mut values, &mut rng, &step, entry, None, length - cursor);
    values.truncate(length);
    if noise_std > 0.0 {
        let noise = Normal::new(0.0, noise_std).expect("finite std");
        values.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(PlantedSeries {
        values,
        m,
        motif_positions: motif_positions.to_vec(),
        discord_position,
        template,
    })
}
