//! Time-series k-means under DTW with DBA barycenters, silhouette and elbow
//! model selection, fold plans and leave-one-fold-out stability checks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Variable;
use crate::resample::SegmentSet;
use crate::warp::{dba_from, dtw_multivariate, dtw_sq, Barycenter, DbaOptions, WarpConfig, WarpError};

/// One segment as a V×L panel.
pub type Panel = Vec<Vec<f64>>;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k={k} is invalid for {count} segments (need 1 <= k <= count)")]
    InvalidK { k: usize, count: usize },
    #[error("silhouette undefined for fewer than two clusters")]
    SilhouetteUndefined,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("assignments cover {got} segments, expected {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("invalid fold count {n_folds} for {count} segments (need 2 <= n_folds <= count)")]
    InvalidFolds { n_folds: usize, count: usize },
    #[error("no variables selected")]
    NoVariables,
    #[error("stability needs k >= 2, got {0}")]
    StabilityNeedsTwoClusters(usize),
    #[error(transparent)]
    Warp(#[from] WarpError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SilhouetteMetric {
    #[default]
    Dtw,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansConfig {
    pub warp: WarpConfig,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
    pub dba: DbaOptions,
    pub silhouette_metric: SilhouetteMetric,
    pub compute_silhouette: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            warp: WarpConfig::default(),
            seed: 0,
            n_init: 5,
            max_iter: 50,
            dba: DbaOptions::default(),
            silhouette_metric: SilhouetteMetric::Dtw,
            compute_silhouette: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub variables: Vec<Variable>,
    pub assignments: Vec<usize>,
    pub barycenters: Vec<Barycenter>,
    /// Sum of squared DTW distances of members to their barycenter.
    pub inertia: f64,
    pub silhouette: Option<f64>,
    pub seed: u64,
    pub config: KMeansConfig,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone)]
struct Run {
    assignments: Vec<usize>,
    centers: Vec<Panel>,
    records: Vec<Option<Barycenter>>,
    inertia: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn nearest(data: &[Panel], centers: &[Panel], warp: &WarpConfig) -> Result<Vec<(usize, f64)>, WarpError> {
    data.par_iter()
        .map(|x| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = dtw_sq(x, center, warp)?;
                if d < best.1 {
                    best = (c, d);
                }
            }
            Ok(best)
        })
        .collect()
}

/// Gives every empty cluster the sample farthest from its barycenter,
/// taken from clusters that keep at least one other member.
fn repair_empty(nearest: &mut [(usize, f64)], centers: &mut [Panel], data: &[Panel]) -> Vec<usize> {
    let k = centers.len();
    let mut reseeded = Vec::new();
    loop {
        let mut sizes = vec![0usize; k];
        for (c, _) in nearest.iter() {
            sizes[*c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return reseeded;
        };
        let mut far: Option<usize> = None;
        for (i, (c, d)) in nearest.iter().enumerate() {
            if sizes[*c] >= 2 && far.is_none_or(|f| *d > nearest[f].1) {
                far = Some(i);
            }
        }
        let i = far.expect("k <= n leaves a cluster with two members");
        centers[empty] = data[i].clone();
        nearest[i] = (empty, 0.0);
        reseeded.push(empty);
    }
}

fn lloyd(data: &[Panel], init: Vec<Panel>, cfg: &KMeansConfig) -> Result<Run, ClusterError> {
    let k = init.len();
    let mut centers = init;
    let mut records: Vec<Option<Barycenter>> = vec![None; k];
    let mut near = nearest(data, &centers, &cfg.warp)?;
    for c in repair_empty(&mut near, &mut centers, data) {
        records[c] = None;
    }
    let mut history = vec![near.iter().map(|(_, d)| d).sum::<f64>()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let assignments: Vec<usize> = near.iter().map(|(c, _)| *c).collect();
        let updated: Result<Vec<Barycenter>, WarpError> = (0..k)
            .into_par_iter()
            .map(|c| {
                let members: Vec<&[Vec<f64>]> = data
                    .iter()
                    .zip(&assignments)
                    .filter(|(_, a)| **a == c)
                    .map(|(x, _)| x.as_slice())
                    .collect();
                dba_from(centers[c].clone(), &members, &cfg.warp, &cfg.dba)
            })
            .collect();
        for (c, bary) in updated?.into_iter().enumerate() {
            centers[c] = bary.values.clone();
            records[c] = Some(bary);
        }
        near = nearest(data, &centers, &cfg.warp)?;
        for c in repair_empty(&mut near, &mut centers, data) {
            records[c] = None;
        }
        history.push(near.iter().map(|(_, d)| d).sum::<f64>());
        if near.iter().map(|(c, _)| *c).eq(assignments.iter().copied()) {
            converged = true;
            break;
        }
    }
    Ok(Run {
        assignments: near.iter().map(|(c, _)| *c).collect(),
        inertia: near.iter().map(|(_, d)| d).sum(),
        centers,
        records,
        history,
        iterations,
        converged,
    })
}

/// k-means++ seeding over squared DTW distances; always picks k distinct samples.
fn plus_plus_init(data: &[Panel], k: usize, warp: &WarpConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Panel>, WarpError> {
    let n = data.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = data
        .par_iter()
        .map(|x| dtw_sq(x, &data[chosen[0]], warp))
        .collect::<Result<_, _>>()?;
    while chosen.len() < k {
        let total: f64 = dist.iter().enumerate().filter(|(i, _)| !chosen.contains(i)).map(|(_, d)| d).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                if chosen.contains(&i) || *d <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < *d {
                    break;
                }
                target -= d;
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        let fresh: Vec<f64> = data
            .par_iter()
            .map(|x| dtw_sq(x, &data[pick], warp))
            .collect::<Result<_, _>>()?;
        for (d, f) in dist.iter_mut().zip(fresh) {
            *d = d.min(f);
        }
    }
    Ok(chosen.into_iter().map(|i| data[i].clone()).collect())
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn fit_panels(
    data: &[Panel],
    k: usize,
    cfg: &KMeansConfig,
    extra_inits: Vec<Vec<Panel>>,
) -> Result<Run, ClusterError> {
    if k < 1 || k > data.len() {
        return Err(ClusterError::InvalidK { k, count: data.len() });
    }
    let restarts = cfg.n_init.max(1);
    let mut runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r);
            let init = plus_plus_init(data, k, &cfg.warp, &mut rng)?;
            lloyd(data, init, cfg)
        })
        .collect::<Result<_, ClusterError>>()?;
    for init in extra_inits {
        runs.push(lloyd(data, init, cfg)?);
    }
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    Ok(runs.swap_remove(best))
}

fn member_cost(data: &[Panel], assignments: &[usize], c: usize, center: &Panel, warp: &WarpConfig) -> Result<f64, WarpError> {
    data.iter()
        .zip(assignments)
        .filter(|(_, a)| **a == c)
        .map(|(x, _)| dtw_sq(x, center, warp))
        .sum()
}

fn into_model(
    data: &[Panel],
    run: Run,
    variables: &[Variable],
    cfg: &KMeansConfig,
) -> Result<ClusterModel, ClusterError> {
    let k = run.centers.len();
    let mut barycenters = Vec::with_capacity(k);
    for (c, (center, record)) in run.centers.iter().zip(run.records).enumerate() {
        let cost = member_cost(data, &run.assignments, c, center, &cfg.warp)?;
        barycenters.push(match record {
            Some(mut b) if b.values == *center => {
                b.final_cost = cost;
                b
            }
            _ => Barycenter {
                values: center.clone(),
                iterations_run: 0,
                initial_cost: cost,
                final_cost: cost,
                cost_history: vec![cost],
            },
        });
    }
    let silhouette = if k >= 2 && cfg.compute_silhouette {
        Some(silhouette(data, &run.assignments, cfg.silhouette_metric, &cfg.warp)?.mean)
    } else {
        None
    };
    Ok(ClusterModel {
        k,
        variables: variables.to_vec(),
        assignments: run.assignments,
        barycenters,
        inertia: run.inertia,
        silhouette,
        seed: cfg.seed,
        config: cfg.clone(),
        iterations: run.iterations,
        converged: run.converged,
        inertia_history: run.history,
    })
}

/// k-means over raw panels (all of one shape).
pub fn kmeans_fit_panels(
    data: &[Panel],
    k: usize,
    variables: &[Variable],
    cfg: &KMeansConfig,
) -> Result<ClusterModel, ClusterError> {
    let run = fit_panels(data, k, cfg, Vec::new())?;
    into_model(data, run, variables, cfg)
}

/// k-means over the selected variables of a (scaled) segment set.
pub fn kmeans_fit(
    segments: &SegmentSet,
    k: usize,
    variables: &[Variable],
    cfg: &KMeansConfig,
) -> Result<ClusterModel, ClusterError> {
    if variables.is_empty() {
        return Err(ClusterError::NoVariables);
    }
    kmeans_fit_panels(&segments.panel(variables), k, variables, cfg)
}

/// Symmetric pairwise distance matrix.
pub fn pairwise_distances(
    data: &[Panel],
    metric: SilhouetteMetric,
    warp: &WarpConfig,
) -> Result<Vec<Vec<f64>>, ClusterError> {
    let n = data.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| match metric {
                    SilhouetteMetric::Dtw => dtw_multivariate(&data[i], &data[j], warp),
                    SilhouetteMetric::Euclidean => dtw_multivariate(&data[i], &data[j], &WarpConfig::sakoe_chiba(0)),
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, d) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteResult {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

/// Silhouette from a precomputed distance matrix; members of singleton clusters score 0.
pub fn silhouette_from_distances(dist: &[Vec<f64>], assignments: &[usize]) -> Result<SilhouetteResult, ClusterError> {
    let n = dist.len();
    if assignments.len() != n {
        return Err(ClusterError::AssignmentLength {
            expected: n,
            got: assignments.len(),
        });
    }
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(ClusterError::SilhouetteUndefined);
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::EmptyCluster(c));
    }
    let per_sample: Vec<f64> = (0..n)
        .map(|i| {
            let own = assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[assignments[j]] += dist[i][j];
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                ((b - a) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteResult { mean, per_sample })
}

pub fn silhouette(
    data: &[Panel],
    assignments: &[usize],
    metric: SilhouetteMetric,
    warp: &WarpConfig,
) -> Result<SilhouetteResult, ClusterError> {
    if assignments.len() != data.len() {
        return Err(ClusterError::AssignmentLength {
            expected: data.len(),
            got: assignments.len(),
        });
    }
    if assignments.iter().copied().max().is_none_or(|m| m < 1) {
        return Err(ClusterError::SilhouetteUndefined);
    }
    silhouette_from_distances(&pairwise_distances(data, metric, warp)?, assignments)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowRow {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub rows: Vec<ElbowRow>,
    /// k with the largest second difference of inertia.
    pub knee: Option<usize>,
}

/// Fits each k in `k_range` (ascending). Each fit also restarts from the
/// previous k's solution plus its worst-fitting sample, so inertia never
/// rises with k.
pub fn elbow_scan(
    data: &[Panel],
    k_range: std::ops::RangeInclusive<usize>,
    cfg: &KMeansConfig,
) -> Result<ElbowScan, ClusterError> {
    let mut rows = Vec::new();
    let mut previous: Option<Run> = None;
    for k in k_range {
        let extra = match &previous {
            Some(prev) if prev.centers.len() + 1 == k => {
                let near = nearest(data, &prev.centers, &cfg.warp)?;
                let worst = (0..data.len())
                    .fold(0, |w, i| if near[i].1 > near[w].1 { i } else { w });
                let mut init = prev.centers.clone();
                init.push(data[worst].clone());
                vec![init]
            }
            _ => Vec::new(),
        };
        let run = fit_panels(data, k, cfg, extra)?;
        let sil = if k >= 2 && cfg.compute_silhouette {
            Some(silhouette(data, &run.assignments, cfg.silhouette_metric, &cfg.warp)?.mean)
        } else {
            None
        };
        rows.push(ElbowRow {
            k,
            inertia: run.inertia,
            silhouette: sil,
        });
        previous = Some(run);
    }
    Ok(ElbowScan {
        knee: knee(&rows),
        rows,
    })
}

fn knee(rows: &[ElbowRow]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for w in rows.windows(3) {
        if w[0].k + 1 != w[1].k || w[1].k + 1 != w[2].k {
            continue;
        }
        let d2 = w[0].inertia - 2.0 * w[1].inertia + w[2].inertia;
        if best.is_none_or(|(_, b)| d2 > b) {
            best = Some((w[1].k, d2));
        }
    }
    best.map(|(k, _)| k)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldStrategy {
    /// Consecutive blocks in segment (time) order.
    #[default]
    Contiguous,
    /// Seeded permutation cut into blocks.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    /// Fold id per segment.
    pub membership: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.membership {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len()).filter(|&i| self.membership[i] != fold).collect()
    }
}

/// Near-equal folds: the first `count % n_folds` folds hold one extra segment.
pub fn kfold_split(count: usize, n_folds: usize, strategy: FoldStrategy, seed: u64) -> Result<FoldPlan, ClusterError> {
    if n_folds < 2 || n_folds > count {
        return Err(ClusterError::InvalidFolds { n_folds, count });
    }
    let mut order: Vec<usize> = (0..count).collect();
    if strategy == FoldStrategy::Shuffled {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (base, extra) = (count / n_folds, count % n_folds);
    let mut membership = vec![0; count];
    let mut pos = 0;
    for fold in 0..n_folds {
        let size = base + usize::from(fold < extra);
        for &i in &order[pos..pos + size] {
            membership[i] = fold;
        }
        pos += size;
    }
    Ok(FoldPlan { n_folds, membership })
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns `assignment[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials-based O(n³) formulation with 1-based sentinels.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of sample pairs on which two labelings agree (same/different cluster).
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same samples");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub n_folds: usize,
    pub threshold: f64,
    pub strategy: FoldStrategy,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            n_folds: 11,
            threshold: 0.5,
            strategy: FoldStrategy::Contiguous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRun {
    pub fold: usize,
    pub train_size: usize,
    /// Reference cluster → cluster of this run.
    pub matching: Vec<usize>,
    pub matched_distances: Vec<f64>,
    pub inertia: f64,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: usize,
    pub n_folds: usize,
    pub threshold: f64,
    pub fold_sizes: Vec<usize>,
    pub reference: ClusterModel,
    pub runs: Vec<FoldRun>,
    /// Folds whose fit failed, with the reason.
    pub failed_runs: Vec<(usize, String)>,
    /// Per reference cluster, the largest matched barycenter distance over all runs.
    pub max_matched_distance: Vec<f64>,
    /// Mean pairwise DTW distance between reference barycenters.
    pub mean_between_distance: f64,
    pub ratios: Vec<f64>,
    pub stable: bool,
}

/// Refits with each fold left out and matches the resulting barycenters to
/// the full-data barycenters.
pub fn cross_validate_stability(
    data: &[Panel],
    k: usize,
    variables: &[Variable],
    cfg: &KMeansConfig,
    stability: &StabilityConfig,
) -> Result<StabilityReport, ClusterError> {
    if k < 2 {
        return Err(ClusterError::StabilityNeedsTwoClusters(k));
    }
    let plan = kfold_split(data.len(), stability.n_folds, stability.strategy, cfg.seed)?;
    let reference = kmeans_fit_panels(data, k, variables, cfg)?;
    let fold_cfg = KMeansConfig {
        compute_silhouette: false,
        ..cfg.clone()
    };

    let outcomes: Vec<(usize, Result<FoldRun, ClusterError>)> = (0..plan.n_folds)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<Panel> = plan.training_indices(fold).into_iter().map(|i| data[i].clone()).collect();
            let run = (|| {
                let model = kmeans_fit_panels(&train, k, variables, &fold_cfg)?;
                let cost: Vec<Vec<f64>> = reference
                    .barycenters
                    .iter()
                    .map(|r| {
                        model
                            .barycenters
                            .iter()
                            .map(|b| dtw_multivariate(&r.values, &b.values, &cfg.warp))
                            .collect::<Result<Vec<f64>, _>>()
                    })
                    .collect::<Result<_, _>>()?;
                let matching = hungarian(&cost);
                Ok(FoldRun {
                    fold,
                    train_size: train.len(),
                    matched_distances: matching.iter().enumerate().map(|(r, &c)| cost[r][c]).collect(),
                    matching,
                    inertia: model.inertia,
                    cluster_sizes: model.cluster_sizes(),
                })
            })();
            (fold, run)
        })
        .collect();

    let mut runs = Vec::new();
    let mut failed_runs = Vec::new();
    for (fold, outcome) in outcomes {
        match outcome {
            Ok(run) => runs.push(run),
            Err(e) => failed_runs.push((fold, e.to_string())),
        }
    }

    let mut max_matched_distance = vec![0.0f64; k];
    for run in &runs {
        for (r, d) in run.matched_distances.iter().enumerate() {
            max_matched_distance[r] = max_matched_distance[r].max(*d);
        }
    }
    let mut between = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            between.push(dtw_multivariate(
                &reference.barycenters[i].values,
                &reference.barycenters[j].values,
                &cfg.warp,
            )?);
        }
    }
    let mean_between_distance = between.iter().sum::<f64>() / between.len() as f64;
    let ratios: Vec<f64> = max_matched_distance
        .iter()
        .map(|&d| match (d, mean_between_distance) {
            (0.0, _) => 0.0,
            (_, 0.0) => f64::INFINITY,
            (d, b) => d / b,
        })
        .collect();
    let stable = failed_runs.is_empty() && ratios.iter().all(|r| *r < stability.threshold);
    Ok(StabilityReport {
        k,
        n_folds: plan.n_folds,
        threshold: stability.threshold,
        fold_sizes: plan.fold_sizes(),
        reference,
        runs,
        failed_runs,
        max_matched_distance,
        mean_between_distance,
        ratios,
        stable,
    })
}

/// Distinct labels used by an assignment vector.
pub fn labels_used(assignments: &[usize]) -> usize {
    assignments.iter().collect::<BTreeSet<_>>().len()
}
