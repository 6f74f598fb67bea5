//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use aidmine::cluster::{
    cross_validate_stability, elbow_scan, kfold_split, kmeans_fit, rand_index, silhouette, FoldStrategy,
    KMeansConfig, SilhouetteMetric, StabilityConfig,
};
use aidmine::ingest::{Reading, UniformSeries, Variable};
use aidmine::matprof::{matrix_profile, top_discord, top_motif};
use aidmine::resample::{build_regular_series, Frequency, QualifyBy};
use aidmine::stats::{compare_groupings, group_bins, group_readings, grouped_means, GroupBy};
use aidmine::synth::{plant_motif_series, SynthSpec};
use aidmine::warp::{dba, dtw, DbaOptions, WarpConfig};
use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let step = Normal::new(0.0, 1.0).unwrap();
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            level += step.sample(rng);
            level
        })
        .collect()
}

// 1 ---------------------------------------------------------------------

fn naive_profile(series: &[f64], m: usize, radius: usize) -> Vec<f64> {
    let norm = |w: &[f64]| {
        let mean = w.iter().sum::<f64>() / m as f64;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        w.iter().map(|v| (v - mean) / sd).collect::<Vec<f64>>()
    };
    let windows: Vec<Vec<f64>> = series.windows(m).map(norm).collect();
    (0..windows.len())
        .map(|i| {
            (0..windows.len())
                .filter(|&j| i.abs_diff(j) > radius)
                .map(|j| {
                    windows[i]
                        .iter()
                        .zip(&windows[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let m = [5, 7, 24][case % 3];
        let n = rng.random_range(3 * m..=500);
        let series: Vec<f64> = if case % 2 == 0 {
            gaussian_walk(&mut rng, n)
        } else {
            let noise = Normal::new(0.0, 1.0).unwrap();
            (0..n).map(|_| noise.sample(&mut rng)).collect()
        };
        let fast = matrix_profile(&series, m, None).map_err(|e| e.to_string())?;
        let slow = naive_profile(&series, m, fast.exclusion_radius);
        check(fast.profile.len() == n - m + 1, || format!("case {case}: wrong profile length"))?;
        for (i, (a, b)) in fast.profile.iter().zip(&slow).enumerate() {
            let diff = (a - b).abs();
            worst = worst.max(diff);
            check(diff <= 1e-9, || format!("case {case} (n={n}, m={m}) position {i}: {a} vs {b}"))?;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("100 series, max |diff| {worst:.2e}, {secs:.2} s"))
}

// 2 ---------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let (motifs, discord, m) = ([10usize, 45], 28usize, 7usize);
    let mut max_motif = 0.0f64;
    let mut min_margin = f64::INFINITY;
    for seed in 0..20 {
        let planted = plant_motif_series(71, m, &motifs, discord, 0.05, seed).map_err(|e| e.to_string())?;
        let mp = matrix_profile(&planted.values, m, None).map_err(|e| e.to_string())?;
        let motif = top_motif(&mp).ok_or("empty profile")?;
        let top = top_discord(&mp).ok_or("empty profile")?;
        let pair = (motif.index_a.min(motif.index_b), motif.index_a.max(motif.index_b));
        check(pair == (motifs[0], motifs[1]), || format!("seed {seed}: motif {pair:?}"))?;
        check(top.index == discord, || format!("seed {seed}: discord at {}", top.index))?;
        let runner_up = mp
            .profile
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != discord)
            .map(|(_, d)| *d)
            .fold(f64::NEG_INFINITY, f64::max);
        max_motif = max_motif.max(motif.distance);
        min_margin = min_margin.min(top.distance - runner_up);
    }
    Ok(format!(
        "20/20 recovered, worst motif distance {max_motif:.3}, smallest discord margin {min_margin:.3}"
    ))
}

// 3 ---------------------------------------------------------------------

/// Minimum squared cost over every monotone warping path, by explicit enumeration.
fn exhaustive_dtw_sq(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).powi(2);
        if i == a.len() - 1 && j == b.len() - 1 {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let free = WarpConfig::unconstrained();
    let mut worst = 0.0f64;
    for pair in 0..500 {
        let la = rng.random_range(1..=6);
        let lb = rng.random_range(1..=6);
        let a: Vec<f64> = (0..la).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..lb).map(|_| normal.sample(&mut rng)).collect();
        let d = dtw(&a, &b, &free).map_err(|e| e.to_string())?;
        let oracle = exhaustive_dtw_sq(&a, &b).sqrt();
        worst = worst.max((d - oracle).abs());
        check((d - oracle).abs() <= 1e-9, || format!("pair {pair}: {d} vs oracle {oracle}"))?;
        let back = dtw(&b, &a, &free).map_err(|e| e.to_string())?;
        check((d - back).abs() <= 1e-12, || format!("pair {pair}: asymmetric {d} vs {back}"))?;
        check(dtw(&a, &a, &free).map_err(|e| e.to_string())? == 0.0, || format!("pair {pair}: d(a,a) != 0"))?;
        if la == lb {
            let mut previous = f64::INFINITY;
            for r in 0..=la {
                let banded = dtw(&a, &b, &WarpConfig::sakoe_chiba(r)).map_err(|e| e.to_string())?;
                check(banded <= previous + 1e-12, || format!("pair {pair}: radius {r} raised the distance"))?;
                previous = banded;
            }
            check((previous - d).abs() <= 1e-12, || format!("pair {pair}: full band differs from unconstrained"))?;
        }
    }
    Ok(format!("500 pairs, max |dtw − enumeration| {worst:.2e}"))
}

// 4 ---------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let opts = DbaOptions {
        max_iter: 30,
        tol: 0.0,
    };
    let free = WarpConfig::unconstrained();
    let mut iterations = 0;
    for set in 0..50 {
        let vars = 1 + set % 3;
        let len = rng.random_range(5..=24);
        let count = rng.random_range(2..=12);
        let members: Vec<Vec<Vec<f64>>> = (0..count)
            .map(|_| {
                let shift = rng.random_range(0..4);
                (0..vars)
                    .map(|v| {
                        (0..len)
                            .map(|t| ((t + shift) as f64 * 0.5 + v as f64).sin() + 0.3 * normal.sample(&mut rng))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[Vec<f64>]> = members.iter().map(|m| m.as_slice()).collect();
        let bary = dba(&refs, &free, &opts).map_err(|e| e.to_string())?;
        for w in bary.cost_history.windows(2) {
            check(w[1] <= w[0], || format!("set {set}: cost rose {} -> {}", w[0], w[1]))?;
        }
        iterations += bary.cost_history.len() - 1;

        let single = dba(&refs[..1], &free, &opts).map_err(|e| e.to_string())?;
        check(single.values == members[0], || format!("set {set}: singleton changed"))?;
        let dup: Vec<&[Vec<f64>]> = vec![refs[0]; 4];
        let same = dba(&dup, &free, &opts).map_err(|e| e.to_string())?;
        check(same.values == members[0], || format!("set {set}: duplicates changed"))?;
    }
    Ok(format!("50 sets, {iterations} accepted iterations, all non-increasing"))
}

// 5 ---------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let vars = Variable::ALL;
    let mut worst_rand = 1.0f64;
    for seed in 0..10 {
        let spec = common::labelled_spec(common::two_archetypes(), 100, seed);
        let (set, labels) = common::day_segments(&spec);
        check(set.len() == 200, || format!("seed {seed}: {} segments", set.len()))?;
        let cfg = KMeansConfig {
            seed,
            compute_silhouette: false,
            ..KMeansConfig::default()
        };
        let model = kmeans_fit(&set, 2, &vars, &cfg).map_err(|e| e.to_string())?;
        let ri = rand_index(&model.assignments, &labels);
        worst_rand = worst_rand.min(ri);
        check(ri >= 0.95, || format!("seed {seed}: Rand index {ri:.3}"))?;
    }
    let mut knees = Vec::new();
    for seed in 0..10 {
        let spec = SynthSpec {
            meal_jitter_minutes: 15.0,
            ..common::labelled_spec(common::three_archetypes(), 30, 100 + seed)
        };
        let (set, _) = common::day_segments(&spec);
        let cfg = KMeansConfig {
            seed,
            compute_silhouette: false,
            ..KMeansConfig::default()
        };
        let scan = elbow_scan(&set.panel(&vars), 1..=6, &cfg).map_err(|e| e.to_string())?;
        knees.push(scan.knee);
    }
    let hits = knees.iter().filter(|k| **k == Some(3)).count();
    check(hits >= 9, || format!("knee at 3 in {hits}/10 seeds: {knees:?}"))?;
    Ok(format!("min Rand index {worst_rand:.3} over 10 seeds; knee at k=3 in {hits}/10"))
}

// 6 ---------------------------------------------------------------------

fn in_bounds(s: f64) -> bool {
    (-1.0..=1.0).contains(&s)
}

fn criterion_6() -> Outcome {
    let free = WarpConfig::unconstrained();
    let mut extremes = (f64::INFINITY, f64::NEG_INFINITY);
    let mut track = |values: &[f64]| {
        for &v in values {
            extremes = (extremes.0.min(v), extremes.1.max(v));
        }
    };

    // Two distinct panels, each repeated.
    let a = vec![vec![0.0, 1.0, 3.0, 1.0, 0.0]];
    let b = vec![vec![2.0, 0.0, 0.0, 0.0, 2.0]];
    let data: Vec<_> = (0..6).map(|i| if i < 3 { a.clone() } else { b.clone() }).collect();
    for metric in [SilhouetteMetric::Dtw, SilhouetteMetric::Euclidean] {
        let s = silhouette(&data, &[0, 0, 0, 1, 1, 1], metric, &free).map_err(|e| e.to_string())?;
        check(s.mean == 1.0 && s.per_sample.iter().all(|&v| v == 1.0), || {
            format!("duplicated clusters scored {} ({metric:?})", s.mean)
        })?;
        track(&s.per_sample);
    }

    // Random halves of one distribution.
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let spec = SynthSpec {
            seed,
            days: 60,
            noise_std: 0.1,
            meal_jitter_minutes: 60.0,
            ..SynthSpec::default()
        };
        let (set, _) = common::day_segments(&spec);
        let panels = set.panel(&Variable::ALL);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..panels.len()).map(|_| rng.random_range(0..2)).collect();
        let s = silhouette(&panels, &labels, SilhouetteMetric::Dtw, &free).map_err(|e| e.to_string())?;
        check(in_bounds(s.mean) && s.per_sample.iter().all(|&v| in_bounds(v)), || format!("seed {seed}: out of bounds"))?;
        track(&s.per_sample);
        worst = worst.max(s.mean.abs());
        check(s.mean.abs() <= 0.15, || format!("seed {seed}: random split scored {:.3}", s.mean))?;

        let fitted = kmeans_fit(&set, 3, &Variable::ALL, &KMeansConfig { seed, ..KMeansConfig::default() })
            .map_err(|e| e.to_string())?;
        let m = fitted.silhouette.ok_or("fit returned no silhouette")?;
        check(in_bounds(m), || format!("seed {seed}: fitted silhouette {m}"))?;
    }
    Ok(format!(
        "duplicates score 1.0; max |random split| {worst:.3}; per-sample range [{:.3}, {:.3}]",
        extremes.0, extremes.1
    ))
}

// 7 ---------------------------------------------------------------------

fn day_start(day: usize) -> chrono::DateTime<chrono::Utc> {
    NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap().and_utc() + Duration::days(day as i64)
}

/// Strictly increasing BG readings at the given minutes of each day.
fn series_of(days: &[Vec<u16>]) -> UniformSeries {
    let mut records = Vec::new();
    for (d, minutes) in days.iter().enumerate() {
        let mut minutes = minutes.clone();
        minutes.sort_unstable();
        minutes.dedup();
        for m in minutes {
            records.push(Reading {
                instant: day_start(d) + Duration::minutes(m as i64),
                iob: None,
                cob: None,
                bg: Some(100.0 + m as f64 / 10.0),
            });
        }
    }
    UniformSeries {
        records,
        ..UniformSeries::default()
    }
}

fn kept_days(series: &UniformSeries, frequency: Frequency) -> Vec<NaiveDate> {
    build_regular_series(series, frequency, QualifyBy::Bg).days()
}

/// Minutes of a day, biased toward leaving some hours empty.
fn day_strategy() -> impl Strategy<Value = Vec<u16>> {
    prop_oneof![
        prop::collection::vec(0u16..1440, 0..40),
        (prop::collection::vec(0u16..24, 0..3), prop::collection::vec(0u16..60, 24)).prop_map(|(skip, offs)| {
            (0..24u16).filter(|h| !skip.contains(h)).map(|h| h * 60 + offs[h as usize]).collect()
        }),
    ]
}

fn criterion_7() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 512,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let days = prop::collection::vec(day_strategy(), 1..4);
    let extra = prop::collection::vec(prop::collection::vec(0u16..1440, 0..30), 4);
    runner
        .run(&(days, extra), |(days, extra)| {
            let series = series_of(&days);
            let hourly = kept_days(&series, Frequency::Hourly);
            let daily = kept_days(&series, Frequency::Daily);
            for (d, minutes) in days.iter().enumerate() {
                let date = day_start(d).date_naive();
                let hour_empty = (0..24).any(|h| !minutes.iter().any(|m| m / 60 == h));
                let window_empty = (0..8).any(|w| !minutes.iter().any(|m| m / 180 == w));
                prop_assert_eq!(hourly.contains(&date), !hour_empty, "hourly rule, day {}", d);
                prop_assert_eq!(daily.contains(&date), !window_empty, "daily rule, day {}", d);
            }
            let more: Vec<Vec<u16>> = days
                .iter()
                .zip(&extra)
                .map(|(base, add)| base.iter().chain(add).copied().collect())
                .collect();
            let richer = series_of(&more);
            for (freq, before) in [(Frequency::Hourly, &hourly), (Frequency::Daily, &daily)] {
                let after = kept_days(&richer, freq);
                for d in before {
                    prop_assert!(after.contains(d), "{:?}: adding readings dropped {}", freq, d);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("512 generated cases: empty-hour and empty-window days excluded, monotone under added readings".into())
}

// 8 ---------------------------------------------------------------------

fn fidelity_passes(noise_std: f64, seed: u64) -> Result<bool, String> {
    let spec = SynthSpec {
        seed,
        days: 150,
        noise_std,
        weekday_effect: [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0],
        month_effect: [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ..SynthSpec::default()
    };
    let (series, _) = common::ingest(&spec);
    let regular = build_regular_series(&series, Frequency::Hourly, QualifyBy::Bg);
    let groupings = [GroupBy::Hour, GroupBy::Weekday, GroupBy::Month];
    for var in Variable::ALL {
        let raw: BTreeMap<_, _> = groupings.iter().map(|&by| (by, group_readings(&series, var, by))).collect();
        let binned: BTreeMap<_, _> = groupings.iter().map(|&by| (by, group_bins(&regular, var, by))).collect();
        let report = compare_groupings(&grouped_means(&raw), &grouped_means(&binned)).map_err(|e| e.to_string())?;
        if !report.pass {
            return Ok(false);
        }
    }
    Ok(true)
}

fn criterion_8() -> Outcome {
    check(fidelity_passes(0.0, 8)?, || "noise-free data failed".into())?;
    let mut passed = 0;
    for seed in 0..10 {
        if fidelity_passes(0.01, seed)? {
            passed += 1;
        }
    }
    check(passed >= 9, || format!("noisy data passed in {passed}/10 seeds"))?;
    Ok(format!("noise-free passes; sigma 0.01 passes in {passed}/10 seeds"))
}

// 9 ---------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let plan = kfold_split(253, 11, FoldStrategy::Contiguous, 0).map_err(|e| e.to_string())?;
    check(plan.fold_sizes() == vec![23; 11], || format!("fold sizes {:?}", plan.fold_sizes()))?;
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let spec = common::labelled_spec(common::two_archetypes(), 55, 900 + seed);
        let (set, _) = common::day_segments(&spec);
        let cfg = KMeansConfig {
            seed,
            ..KMeansConfig::default()
        };
        let report = cross_validate_stability(&set.panel(&Variable::ALL), 2, &Variable::ALL, &cfg, &StabilityConfig::default())
            .map_err(|e| e.to_string())?;
        check(report.failed_runs.is_empty(), || format!("seed {seed}: failed folds {:?}", report.failed_runs))?;
        check(report.runs.len() == 11, || format!("seed {seed}: {} fold runs", report.runs.len()))?;
        let ratio = report.ratios.iter().copied().fold(0.0, f64::max);
        worst = worst.max(ratio);
        check(report.stable, || format!("seed {seed}: unstable, ratios {:?}", report.ratios))?;
    }
    Ok(format!("253 -> 11 x 23; stable in 10/10 seeds, worst ratio {worst:.3}"))
}

// 10 --------------------------------------------------------------------

fn sha256_file(path: &Path) -> Result<String, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn aidmine(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_aidmine"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.code() == Some(0), || {
        format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim())
    })
}

/// synth → ingest → mp → cluster into `root`, returning each manifest's hash.
fn pipeline(root: &Path, config: &Path) -> Result<Vec<String>, String> {
    let cfg = config.to_str().ok_or("non-utf8 path")?;
    let dir = |name: &str| root.join(name).to_string_lossy().into_owned();
    let input = root.join("synth").join("synth.csv").to_string_lossy().into_owned();
    aidmine(&["synth", "--config", cfg, "--seed", "17", "--out", &dir("synth")])?;
    for stage in ["ingest", "mp", "cluster"] {
        aidmine(&[stage, "--config", cfg, "--seed", "17", "--input", &input, "--out", &dir(stage)])?;
    }
    let mut hashes = Vec::new();
    for stage in ["synth", "ingest", "mp", "cluster"] {
        let manifest_path = root.join(stage).join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| e.to_string())?;
        let manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        for artifact in manifest["artifacts"].as_array().ok_or("manifest without artifacts")? {
            let path = root.join(stage).join(artifact["path"].as_str().ok_or("artifact without path")?);
            check(path.is_file(), || format!("{} missing", path.display()))?;
            check(sha256_file(&path)? == artifact["sha256"].as_str().unwrap_or_default(), || {
                format!("{} hash differs from manifest", path.display())
            })?;
        }
        hashes.push(sha256_file(&manifest_path)?);
    }
    Ok(hashes)
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"synth": {"days": 71, "noise_std": 0.05, "meal_jitter_minutes": 30},
            "mp": {"m": 7}, "cluster": {"k": 2, "n_init": 3}}"#,
    )
    .map_err(|e| e.to_string())?;
    let a = pipeline(&tmp.path().join("a"), &config)?;
    let b = pipeline(&tmp.path().join("b"), &config)?;
    check(a == b, || format!("manifest hashes differ: {a:?} vs {b:?}"))?;
    Ok(format!("synth/ingest/mp/cluster manifests identical across two runs ({} stages)", a.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("MP oracle equivalence", criterion_1),
        ("planted motif/discord recovery", criterion_2),
        ("DTW correctness", criterion_3),
        ("DBA descent", criterion_4),
        ("planted-archetype clustering", criterion_5),
        ("silhouette bounds", criterion_6),
        ("coverage rules", criterion_7),
        ("statistical fidelity", criterion_8),
        ("fold protocol", criterion_9),
        ("pipeline determinism", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {:>2} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
