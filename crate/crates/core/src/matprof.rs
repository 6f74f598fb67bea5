//! Self-join matrix profile under z-normalized Euclidean distance.
//!
//! The profile is computed diagonal by diagonal with a running dot product
//! (re-anchored every [`REANCHOR_EVERY`] steps to bound drift), then each
//! position's distance to its chosen neighbor is recomputed directly so that
//! `profile[i]` is exactly the distance between windows `i` and `indices[i]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Windows with population std below this are treated as constant.
pub const CONSTANT_STD: f64 = 1e-8;

const REANCHOR_EVERY: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum MatProfError {
    #[error("window length m={0} is too small (need m >= 3)")]
    WindowTooSmall(usize),
    #[error("series of length {got} is too short for m={m}, exclusion radius {radius}: need at least {needed}")]
    SeriesTooShort {
        got: usize,
        needed: usize,
        m: usize,
        radius: usize,
    },
    #[error("query window is constant")]
    ConstantQuery,
    #[error("series contains a non-finite value at position {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixProfileResult {
    pub profile: Vec<f64>,
    pub indices: Vec<usize>,
    pub m: usize,
    pub exclusion_radius: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discord {
    pub index: usize,
    pub distance: f64,
}

/// ⌈m/2⌉.
pub fn default_exclusion_radius(m: usize) -> usize {
    m.div_ceil(2)
}

/// Shortest series for which every window has an admissible neighbor.
pub fn required_length(m: usize, exclusion_radius: usize) -> usize {
    (2 * m).max(m + 2 * exclusion_radius + 1)
}

#[derive(Debug, Clone, Copy)]
struct WindowStats {
    mean: f64,
    std: f64,
}

impl WindowStats {
    fn of(w: &[f64]) -> Self {
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        WindowStats { mean, std }
    }

    fn constant(&self) -> bool {
        self.std < CONSTANT_STD
    }
}

fn window_stats(series: &[f64], m: usize) -> Vec<WindowStats> {
    series.windows(m).map(WindowStats::of).collect()
}

fn check_finite(series: &[f64]) -> Result<(), MatProfError> {
    match series.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(MatProfError::NonFinite(i)),
        None => Ok(()),
    }
}

fn distance_from_dot(dot: f64, m: usize, a: WindowStats, b: WindowStats) -> f64 {
    let mf = m as f64;
    match (a.constant(), b.constant()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (2.0 * mf).sqrt(),
        (false, false) => {
            let rho = (dot - mf * a.mean * b.mean) / (mf * a.std * b.std);
            (2.0 * mf * (1.0 - rho)).max(0.0).sqrt()
        }
    }
}

/// Distance between two equal-length windows after z-normalizing each.
/// One constant window against a non-constant one is √(2m); two constant windows are 0.
pub fn znorm_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (sa, sb) = (WindowStats::of(a), WindowStats::of(b));
    match (sa.constant(), sb.constant()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (2.0 * a.len() as f64).sqrt(),
        (false, false) => a
            .iter()
            .zip(b)
            .map(|(x, y)| ((x - sa.mean) / sa.std - (y - sb.mean) / sb.std).powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Distance from `query` to every length-m window of `series`.
pub fn znorm_distance_profile(query: &[f64], series: &[f64]) -> Result<Vec<f64>, MatProfError> {
    let m = query.len();
    if m < 3 {
        return Err(MatProfError::WindowTooSmall(m));
    }
    if series.len() < m {
        return Err(MatProfError::SeriesTooShort {
            got: series.len(),
            needed: m,
            m,
            radius: 0,
        });
    }
    check_finite(query)?;
    check_finite(series)?;
    let qs = WindowStats::of(query);
    if qs.constant() {
        return Err(MatProfError::ConstantQuery);
    }
    Ok(series
        .windows(m)
        .map(|w| {
            let dot: f64 = query.iter().zip(w).map(|(a, b)| a * b).sum();
            distance_from_dot(dot, m, qs, WindowStats::of(w))
        })
        .collect())
}

#[derive(Clone)]
struct Best {
    dist: Vec<f64>,
    idx: Vec<usize>,
}

impl Best {
    fn new(w: usize) -> Self {
        Best {
            dist: vec![f64::INFINITY; w],
            idx: vec![usize::MAX; w],
        }
    }

    fn offer(&mut self, i: usize, j: usize, d: f64) {
        if d < self.dist[i] || (d == self.dist[i] && j < self.idx[i]) {
            self.dist[i] = d;
            self.idx[i] = j;
        }
    }

    fn merge(mut self, other: Best) -> Best {
        for i in 0..self.dist.len() {
            self.offer(i, other.idx[i], other.dist[i]);
        }
        self
    }
}

/// Matrix profile with neighbors restricted to `|j − i| > exclusion_radius`
/// (default ⌈m/2⌉).
pub fn matrix_profile(
    series: &[f64],
    m: usize,
    exclusion_radius: Option<usize>,
) -> Result<MatrixProfileResult, MatProfError> {
    if m < 3 {
        return Err(MatProfError::WindowTooSmall(m));
    }
    let radius = exclusion_radius.unwrap_or_else(|| default_exclusion_radius(m));
    let needed = required_length(m, radius);
    if series.len() < needed {
        return Err(MatProfError::SeriesTooShort {
            got: series.len(),
            needed,
            m,
            radius,
        });
    }
    check_finite(series)?;

    let w = series.len() - m + 1;
    let stats = window_stats(series, m);
    let dot_at = |i: usize, j: usize| -> f64 {
        series[i..i + m]
            .iter()
            .zip(&series[j..j + m])
            .map(|(a, b)| a * b)
            .sum()
    };

    let best = (radius + 1..w)
        .into_par_iter()
        .fold(
            || Best::new(w),
            |mut best, k| {
                let mut dot = 0.0;
                for i in 0..w - k {
                    let j = i + k;
                    dot = if i % REANCHOR_EVERY == 0 {
                        dot_at(i, j)
                    } else {
                        dot - series[i - 1] * series[j - 1] + series[i + m - 1] * series[j + m - 1]
                    };
                    let d = distance_from_dot(dot, m, stats[i], stats[j]);
                    best.offer(i, j, d);
                    best.offer(j, i, d);
                }
                best
            },
        )
        .reduce(|| Best::new(w), Best::merge);

    let profile = best
        .idx
        .iter()
        .enumerate()
        .map(|(i, &j)| znorm_distance(&series[i..i + m], &series[j..j + m]))
        .collect();
    Ok(MatrixProfileResult {
        profile,
        indices: best.idx,
        m,
        exclusion_radius: radius,
    })
}

/// Lowest profile value (earliest on ties) and its neighbor.
pub fn top_motif(result: &MatrixProfileResult) -> Option<Motif> {
    let mut best: Option<usize> = None;
    for (i, &d) in result.profile.iter().enumerate() {
        if best.is_none_or(|b| d < result.profile[b]) {
            best = Some(i);
        }
    }
    best.map(|i| Motif {
        index_a: i,
        index_b: result.indices[i],
        distance: result.profile[i],
    })
}

/// Highest profile value, earliest on ties.
pub fn top_discord(result: &MatrixProfileResult) -> Option<Discord> {
    let mut best: Option<usize> = None;
    for (i, &d) in result.profile.iter().enumerate() {
        if best.is_none_or(|b| d > result.profile[b]) {
            best = Some(i);
        }
    }
    best.map(|i| Discord {
        index: i,
        distance: result.profile[i],
    })
}

/// CSV: `position,profile,neighbor`.
pub fn write_profile_csv<W: std::io::Write>(result: &MatrixProfileResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position", "profile", "neighbor"])?;
    for (i, (d, j)) in result.profile.iter().zip(&result.indices).enumerate() {
        w.write_record([i.to_string(), d.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent reference: explicit z-normalization and a full double loop.
    fn naive_profile(series: &[f64], m: usize, radius: usize) -> Vec<f64> {
        let znorm = |w: &[f64]| -> Option<Vec<f64>> {
            let mu = w.iter().sum::<f64>() / m as f64;
            let sd = (w.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m as f64).sqrt();
            (sd >= CONSTANT_STD).then(|| w.iter().map(|x| (x - mu) / sd).collect())
        };
        let w = series.len() - m + 1;
        (0..w)
            .map(|i| {
                let zi = znorm(&series[i..i + m]);
                (0..w)
                    .filter(|&j| i.abs_diff(j) > radius)
                    .map(|j| match (&zi, znorm(&series[j..j + m])) {
                        (Some(a), Some(b)) => a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
                        (None, None) => 0.0,
                        _ => (2.0 * m as f64).sqrt(),
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x += rng.random_range(-1.0..1.0);
                x
            })
            .collect()
    }

    #[test]
    fn identical_and_affine_windows_have_zero_distance() {
        let series = [1.0, 3.0, 2.0, 5.0, 4.0, 0.0, 2.0, 6.0, 4.0, 10.0, 8.0];
        let query = [1.0, 3.0, 2.0, 5.0];
        let d = znorm_distance_profile(&query, &series).unwrap();
        assert!(d[0].abs() < 1e-7);
        // series[6..10] = 2·query
        assert!(d[6].abs() < 1e-6);
        assert!(d[1] > 0.1);
    }

    #[test]
    fn distance_profile_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let series = random_walk(&mut rng, 120);
        let query = random_walk(&mut rng, 9);
        let fast = znorm_distance_profile(&query, &series).unwrap();
        for (i, w) in series.windows(9).enumerate() {
            assert!((fast[i] - znorm_distance(&query, w)).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_profile_errors() {
        assert_eq!(znorm_distance_profile(&[1.0, 2.0], &[1.0; 10]), Err(MatProfError::WindowTooSmall(2)));
        assert_eq!(znorm_distance_profile(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(MatProfError::ConstantQuery));
        assert!(matches!(
            znorm_distance_profile(&[1.0, 2.0, 4.0], &[1.0, 2.0]),
            Err(MatProfError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn constant_window_rules() {
        let d = znorm_distance_profile(&[1.0, 2.0, 4.0], &[3.0, 3.0, 3.0, 1.0, 2.0, 4.0]).unwrap();
        assert!((d[0] - 6f64.sqrt()).abs() < 1e-12);
        assert_eq!(znorm_distance(&[2.0; 5], &[7.0; 5]), 0.0);
    }

    #[test]
    fn planted_pattern_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pattern = [0.0, 4.0, -3.0, 5.0, 1.0, -2.0, 6.0];
        let mut series: Vec<f64> = (0..80).map(|_| rng.random_range(-1.0..1.0)).collect();
        series[12..19].copy_from_slice(&pattern);
        series[50..57].copy_from_slice(&pattern);
        let mp = matrix_profile(&series, 7, None).unwrap();
        assert_eq!(mp.profile[12], 0.0);
        assert_eq!(mp.profile[50], 0.0);
        assert_eq!((mp.indices[12], mp.indices[50]), (50, 12));
        let motif = top_motif(&mp).unwrap();
        assert_eq!((motif.index_a, motif.index_b, motif.distance), (12, 50, 0.0));
    }

    #[test]
    fn seventy_one_days_give_sixty_five_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let series = random_walk(&mut rng, 71);
        let mp = matrix_profile(&series, 7, None).unwrap();
        assert_eq!(mp.profile.len(), 65);
        assert_eq!(mp.exclusion_radius, 4);
    }

    #[test]
    fn periodic_series_is_all_zero() {
        let period = [1.0, 5.0, 2.0, 8.0, 3.0, 3.5, 0.5, 7.0, 4.0];
        let series: Vec<f64> = period.iter().cycle().take(90).copied().collect();
        let mp = matrix_profile(&series, 5, None).unwrap();
        assert!(mp.profile.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn too_short_series_rejected() {
        let err = matrix_profile(&[1.0; 15], 7, None).unwrap_err();
        assert_eq!(
            err,
            MatProfError::SeriesTooShort {
                got: 15,
                needed: 16,
                m: 7,
                radius: 4
            }
        );
        assert!(matrix_profile(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 0.0], 2, None).is_err());
    }

    #[test]
    fn invariants_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &m in &[4usize, 7, 12] {
            let series = random_walk(&mut rng, 150);
            let mp = matrix_profile(&series, m, None).unwrap();
            for (i, (&d, &j)) in mp.profile.iter().zip(&mp.indices).enumerate() {
                assert!(d.is_finite() && d >= 0.0);
                assert!(i.abs_diff(j) > mp.exclusion_radius);
                assert!((d - znorm_distance(&series[i..i + m], &series[j..j + m])).abs() < 1e-9);
            }
            let motif = top_motif(&mp).unwrap();
            let discord = top_discord(&mp).unwrap();
            assert!(motif.distance <= discord.distance);
            assert!(motif.index_a.abs_diff(motif.index_b) > mp.exclusion_radius);
        }
    }

    #[test]
    fn matches_naive_with_constant_windows_and_zero_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut series = random_walk(&mut rng, 90);
        series[20..30].iter_mut().for_each(|v| *v = 2.5);
        series[60..66].iter_mut().for_each(|v| *v = -1.0);
        for radius in [0, 1, 3, 5] {
            let mp = matrix_profile(&series, 5, Some(radius)).unwrap();
            let oracle = naive_profile(&series, 5, radius);
            for (a, b) in mp.profile.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9, "radius {radius}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn far_duplicate_only_lowers_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let base = random_walk(&mut rng, 100);
        let before = matrix_profile(&base, 7, None).unwrap();
        let mut extended = base.clone();
        extended.extend(std::iter::repeat_n(0.0, 3));
        extended.extend_from_slice(&base[30..37]);
        let after = matrix_profile(&extended, 7, None).unwrap();
        assert!(after.profile[30] <= before.profile[30] + 1e-12);
        assert!(after.profile[30] < 1e-9);
    }

    #[test]
    fn profile_csv_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mp = matrix_profile(&random_walk(&mut rng, 30), 5, None).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mp, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 27);
    }
}
