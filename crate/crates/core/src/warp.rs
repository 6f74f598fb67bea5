//! Dynamic time warping and DTW barycenter averaging (DBA).
//!
//! Series are handled as V×L panels (`&[Vec<f64>]`, one row per variable);
//! univariate helpers wrap the panel routines with V = 1. Multivariate DTW
//! is the dependent form: one shared warping path, per-step cost summed over
//! all variables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WarpError {
    #[error("cannot warp an empty series")]
    Empty,
    #[error("band radius {radius} cannot connect lengths {len_a} and {len_b}")]
    BandInfeasible { len_a: usize, len_b: usize, radius: usize },
    #[error("variable count mismatch: {a} vs {b}")]
    VariableMismatch { a: usize, b: usize },
    #[error("panel rows have different lengths")]
    RaggedPanel,
    #[error("barycenter members must share one length; found {expected} and {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// DTW constraints. No band means unconstrained warping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpConfig {
    #[serde(default)]
    pub band_radius: Option<usize>,
}

impl WarpConfig {
    pub fn unconstrained() -> Self {
        WarpConfig { band_radius: None }
    }

    pub fn sakoe_chiba(radius: usize) -> Self {
        WarpConfig {
            band_radius: Some(radius),
        }
    }

    fn admits(&self, i: usize, j: usize) -> bool {
        self.band_radius.is_none_or(|r| i.abs_diff(j) <= r)
    }
}

fn panel_len(p: &[Vec<f64>]) -> Result<usize, WarpError> {
    let len = p.first().map(Vec::len).ok_or(WarpError::Empty)?;
    if p.iter().any(|row| row.len() != len) {
        return Err(WarpError::RaggedPanel);
    }
    if len == 0 {
        return Err(WarpError::Empty);
    }
    Ok(len)
}

struct CostMatrix {
    cols: usize,
    acc: Vec<f64>,
}

impl CostMatrix {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.acc[i * self.cols + j]
    }
}

/// Accumulated squared cost over the admissible cells; infeasible cells stay infinite.
fn accumulate(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    config: &WarpConfig,
) -> Result<(usize, usize, CostMatrix), WarpError> {
    if a.len() != b.len() {
        return Err(WarpError::VariableMismatch { a: a.len(), b: b.len() });
    }
    let n = panel_len(a)?;
    let m = panel_len(b)?;
    if let Some(r) = config.band_radius {
        if n.abs_diff(m) > r {
            return Err(WarpError::BandInfeasible {
                len_a: n,
                len_b: m,
                radius: r,
            });
        }
    }
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            if !config.admits(i, j) {
                continue;
            }
            let cost: f64 = a.iter().zip(b).map(|(ra, rb)| (ra[i] - rb[j]).powi(2)).sum();
            let prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[j - 1],
                (_, 0) => acc[(i - 1) * m],
                _ => acc[(i - 1) * m + j - 1]
                    .min(acc[(i - 1) * m + j])
                    .min(acc[i * m + j - 1]),
            };
            acc[i * m + j] = cost + prev;
        }
    }
    Ok((n, m, CostMatrix { cols: m, acc }))
}

/// Sum of squared costs along the optimal path (the square of [`dtw_multivariate`]).
pub fn dtw_sq(a: &[Vec<f64>], b: &[Vec<f64>], config: &WarpConfig) -> Result<f64, WarpError> {
    let (n, m, mat) = accumulate(a, b, config)?;
    Ok(mat.at(n - 1, m - 1))
}

/// Dependent multivariate DTW between two V×L panels.
pub fn dtw_multivariate(a: &[Vec<f64>], b: &[Vec<f64>], config: &WarpConfig) -> Result<f64, WarpError> {
    dtw_sq(a, b, config).map(f64::sqrt)
}

pub fn dtw(a: &[f64], b: &[f64], config: &WarpConfig) -> Result<f64, WarpError> {
    dtw_multivariate(&[a.to_vec()], &[b.to_vec()], config)
}

/// Optimal warping path from (0, 0) to (n−1, m−1) and its squared cost.
/// Ties prefer the diagonal step, then advancing `a`.
pub fn dtw_path(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    config: &WarpConfig,
) -> Result<(f64, Vec<(usize, usize)>), WarpError> {
    let (n, m, mat) = accumulate(a, b, config)?;
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = mat.at(i - 1, j - 1);
                let up = mat.at(i - 1, j);
                let left = mat.at(i, j - 1);
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok((mat.at(n - 1, m - 1), path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbaOptions {
    pub max_iter: usize,
    /// Stop once the relative cost decrease falls below this.
    pub tol: f64,
}

impl Default for DbaOptions {
    fn default() -> Self {
        DbaOptions {
            max_iter: 30,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barycenter {
    /// V×L, same shape as the members.
    pub values: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub initial_cost: f64,
    /// Sum of squared DTW distances to the members.
    pub final_cost: f64,
    /// Cost at initialization followed by the cost after each accepted iteration.
    pub cost_history: Vec<f64>,
}

fn check_members(members: &[&[Vec<f64>]]) -> Result<(), WarpError> {
    let first = members.first().ok_or(WarpError::Empty)?;
    let vars = first.len();
    let len = panel_len(first)?;
    for m in members {
        if m.len() != vars {
            return Err(WarpError::VariableMismatch { a: vars, b: m.len() });
        }
        let l = panel_len(m)?;
        if l != len {
            return Err(WarpError::LengthMismatch { expected: len, found: l });
        }
    }
    Ok(())
}

fn total_cost(avg: &[Vec<f64>], members: &[&[Vec<f64>]], config: &WarpConfig) -> Result<f64, WarpError> {
    let costs: Result<Vec<f64>, _> = members.par_iter().map(|m| dtw_sq(avg, m, config)).collect();
    Ok(costs?.iter().sum())
}

/// Index of the member with the smallest summed DTW distance to the others.
pub fn medoid(members: &[&[Vec<f64>]], config: &WarpConfig) -> Result<usize, WarpError> {
    check_members(members)?;
    let sums: Result<Vec<f64>, WarpError> = (0..members.len())
        .into_par_iter()
        .map(|i| {
            members
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, m)| dtw_multivariate(members[i], m, config))
                .sum()
        })
        .collect();
    let sums = sums?;
    let mut best = 0;
    for (i, s) in sums.iter().enumerate() {
        if *s < sums[best] {
            best = i;
        }
    }
    Ok(best)
}

/// DBA initialized at the medoid.
pub fn dba(members: &[&[Vec<f64>]], config: &WarpConfig, opts: &DbaOptions) -> Result<Barycenter, WarpError> {
    let start = medoid(members, config)?;
    dba_from(members[start].to_vec(), members, config, opts)
}

/// DBA refinement of `init`. An iteration that would raise the cost is
/// discarded and ends the refinement, so `cost_history` never increases.
pub fn dba_from(
    init: Vec<Vec<f64>>,
    members: &[&[Vec<f64>]],
    config: &WarpConfig,
    opts: &DbaOptions,
) -> Result<Barycenter, WarpError> {
    check_members(members)?;
    let len = panel_len(&init)?;
    let expected = panel_len(members[0])?;
    if init.len() != members[0].len() {
        return Err(WarpError::VariableMismatch {
            a: init.len(),
            b: members[0].len(),
        });
    }
    if len != expected {
        return Err(WarpError::LengthMismatch { expected, found: len });
    }

    let mut avg = init;
    let mut cost = total_cost(&avg, members, config)?;
    let mut bary = Barycenter {
        values: Vec::new(),
        iterations_run: 0,
        initial_cost: cost,
        final_cost: cost,
        cost_history: vec![cost],
    };

    while bary.iterations_run < opts.max_iter && cost > 0.0 {
        let paths: Result<Vec<_>, WarpError> = members
            .par_iter()
            .map(|m| dtw_path(&avg, m, config).map(|(_, p)| p))
            .collect();
        let mut sums = vec![vec![0.0; len]; avg.len()];
        let mut counts = vec![0usize; len];
        for (member, path) in members.iter().zip(paths?) {
            for (i, j) in path {
                counts[i] += 1;
                for (v, row) in member.iter().enumerate() {
                    sums[v][i] += row[j];
                }
            }
        }
        let next: Vec<Vec<f64>> = sums
            .iter()
            .zip(&avg)
            .map(|(srow, arow)| {
                srow.iter()
                    .zip(&counts)
                    .zip(arow)
                    .map(|((s, &c), prev)| if c > 0 { s / c as f64 } else { *prev })
                    .collect()
            })
            .collect();
        let next_cost = total_cost(&next, members, config)?;
        if next_cost > cost {
            break;
        }
        let improvement = (cost - next_cost) / cost;
        avg = next;
        cost = next_cost;
        bary.iterations_run += 1;
        bary.cost_history.push(cost);
        if improvement < opts.tol {
            break;
        }
    }
    bary.final_cost = cost;
    bary.values = avg;
    Ok(bary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive minimum over all monotone warping paths.
    fn brute_force(a: &[Vec<f64>], b: &[Vec<f64>], radius: Option<usize>) -> f64 {
        fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, radius: Option<usize>) -> f64 {
            if radius.is_some_and(|r| i.abs_diff(j) > r) {
                return f64::INFINITY;
            }
            let here: f64 = a.iter().zip(b).map(|(x, y)| (x[i] - y[j]) * (x[i] - y[j])).sum();
            let (n, m) = (a[0].len(), b[0].len());
            if i == n - 1 && j == m - 1 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < n && j + 1 < m {
                best = best.min(walk(a, b, i + 1, j + 1, radius));
            }
            if i + 1 < n {
                best = best.min(walk(a, b, i + 1, j, radius));
            }
            if j + 1 < m {
                best = best.min(walk(a, b, i, j + 1, radius));
            }
            here + best
        }
        walk(a, b, 0, 0, radius).sqrt()
    }

    #[test]
    fn identity_and_forced_diagonal() {
        let x = [1.0, 4.0, 2.0, 8.0];
        assert_eq!(dtw(&x, &x, &WarpConfig::default()).unwrap(), 0.0);
        let d = dtw(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &WarpConfig::default()).unwrap();
        assert!((d - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_pair_matches_enumeration() {
        let a = vec![vec![0.0, 1.0, 0.0]];
        let b = vec![vec![0.0, 0.0, 1.0]];
        let d = dtw_multivariate(&a, &b, &WarpConfig::default()).unwrap();
        assert!((d - brute_force(&a, &b, None)).abs() < 1e-12);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_pairs_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n: usize = rng.random_range(1..=6);
            let m: usize = rng.random_range(1..=6);
            let vars = rng.random_range(1..=2);
            let a: Vec<Vec<f64>> = (0..vars).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let b: Vec<Vec<f64>> = (0..vars).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let fast = dtw_multivariate(&a, &b, &WarpConfig::default()).unwrap();
            assert!((fast - brute_force(&a, &b, None)).abs() < 1e-9);
            let r = rng.random_range(n.abs_diff(m)..=6);
            let banded = dtw_multivariate(&a, &b, &WarpConfig::sakoe_chiba(r)).unwrap();
            assert!((banded - brute_force(&a, &b, Some(r))).abs() < 1e-9);
        }
    }

    #[test]
    fn univariate_is_single_row_panel() {
        let a = [0.3, 1.5, -0.7, 2.0];
        let b = [1.0, 0.0, 0.5];
        assert_eq!(
            dtw(&a, &b, &WarpConfig::default()).unwrap(),
            dtw_multivariate(&[a.to_vec()], &[b.to_vec()], &WarpConfig::default()).unwrap()
        );
    }

    #[test]
    fn errors() {
        let cfg = WarpConfig::default();
        assert_eq!(dtw(&[], &[1.0], &cfg), Err(WarpError::Empty));
        assert_eq!(
            dtw(&[1.0, 2.0, 3.0, 4.0], &[1.0], &WarpConfig::sakoe_chiba(2)),
            Err(WarpError::BandInfeasible {
                len_a: 4,
                len_b: 1,
                radius: 2
            })
        );
        assert_eq!(
            dtw_multivariate(&[vec![1.0]], &[vec![1.0], vec![2.0]], &cfg),
            Err(WarpError::VariableMismatch { a: 1, b: 2 })
        );
        assert_eq!(
            dtw_multivariate(&[vec![1.0], vec![1.0, 2.0]], &[vec![1.0], vec![2.0]], &cfg),
            Err(WarpError::RaggedPanel)
        );
    }

    #[test]
    fn path_cost_matches_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a: Vec<Vec<f64>> = vec![(0..10).map(|_| rng.random_range(0.0..1.0)).collect()];
            let b: Vec<Vec<f64>> = vec![(0..8).map(|_| rng.random_range(0.0..1.0)).collect()];
            let (sq, path) = dtw_path(&a, &b, &WarpConfig::default()).unwrap();
            let along: f64 = path.iter().map(|&(i, j)| (a[0][i] - b[0][j]).powi(2)).sum();
            assert!((sq - along).abs() < 1e-12);
            assert_eq!(path[0], (0, 0));
            assert_eq!(*path.last().unwrap(), (9, 7));
            assert!(path.windows(2).all(|w| {
                let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                di <= 1 && dj <= 1 && di + dj >= 1
            }));
        }
    }

    #[test]
    fn band_and_euclidean_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let a: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let free = dtw(&a, &b, &WarpConfig::default()).unwrap();
            let euclid = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(free <= euclid + 1e-12);
            assert!((dtw(&b, &a, &WarpConfig::default()).unwrap() - free).abs() < 1e-9);
            let mut prev = f64::INFINITY;
            for r in 0..=12 {
                let d = dtw(&a, &b, &WarpConfig::sakoe_chiba(r)).unwrap();
                assert!(d <= prev + 1e-12);
                assert!(d >= free - 1e-12);
                prev = d;
            }
            assert!((dtw(&a, &b, &WarpConfig::sakoe_chiba(0)).unwrap() - euclid).abs() < 1e-12);
        }
    }

    #[test]
    fn dba_singleton_and_copies() {
        let x = vec![vec![0.1, 0.7, 0.3, 0.9], vec![1.0, 2.0, 3.0, 0.5]];
        let single = dba(&[&x], &WarpConfig::default(), &DbaOptions::default()).unwrap();
        assert_eq!(single.values, x);
        assert_eq!(single.final_cost, 0.0);
        let copies = dba(&[&x, &x, &x], &WarpConfig::default(), &DbaOptions::default()).unwrap();
        assert_eq!(copies.values, x);
        assert!(dba(&[], &WarpConfig::default(), &DbaOptions::default()).is_err());
    }

    #[test]
    fn dba_rejects_mixed_lengths() {
        let a = vec![vec![1.0, 2.0]];
        let b = vec![vec![1.0, 2.0, 3.0]];
        assert_eq!(
            dba(&[&a, &b], &WarpConfig::default(), &DbaOptions::default()),
            Err(WarpError::LengthMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn dba_descends_from_medoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let template: Vec<f64> = (0..24).map(|h| if (7..10).contains(&h) { 5.0 } else { 1.0 }).collect();
        for _ in 0..10 {
            let members: Vec<Vec<Vec<f64>>> = (0..2)
                .map(|_| vec![template.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect()])
                .collect();
            let refs: Vec<&[Vec<f64>]> = members.iter().map(|m| m.as_slice()).collect();
            let b = dba(&refs, &WarpConfig::default(), &DbaOptions::default()).unwrap();
            assert!(b.final_cost <= b.initial_cost);
            assert!(b.cost_history.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(b.values[0].len(), 24);
        }
    }

    #[test]
    fn medoid_picks_central_member() {
        let members = [vec![vec![0.0, 0.0]], vec![vec![1.0, 1.0]], vec![vec![2.0, 2.0]]];
        let refs: Vec<&[Vec<f64>]> = members.iter().map(|m| m.as_slice()).collect();
        assert_eq!(medoid(&refs, &WarpConfig::default()).unwrap(), 1);
    }
}
