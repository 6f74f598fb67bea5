use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{KMeansConfig, SilhouetteMetric, StabilityConfig};
use crate::ingest::{InputFormat, Schema, Variable};
use crate::resample::{Frequency, QualifyBy, SegmentKind};
use crate::stats::{GroupBy, ScalingKind, ScalingScope};
use crate::synth::SynthSpec;
use crate::warp::{DbaOptions, WarpConfig};

/// Everything a run depends on. Missing keys take defaults, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub schema: Schema,
    /// Frequency for `resample`.
    pub frequency: Frequency,
    pub qualify_by: QualifyBy,
    /// Segment shape for `cluster`, `elbow` and `crossval`.
    pub segments: SegmentKind,
    pub scaling: ScalingConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub validate: ValidateConfig,
    pub heatmap: HeatmapConfig,
    pub mp: MpConfig,
    pub cluster: ClusterConfig,
    pub crossval: StabilityConfig,
    /// Its own `seed` is replaced by the run seed.
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            format: None,
            schema: Schema::default(),
            frequency: Frequency::Hourly,
            qualify_by: QualifyBy::default(),
            segments: SegmentKind::DayOfHours,
            scaling: ScalingConfig::default(),
            seed: 0,
            out: PathBuf::from("out"),
            validate: ValidateConfig::default(),
            heatmap: HeatmapConfig::default(),
            mp: MpConfig::default(),
            cluster: ClusterConfig::default(),
            crossval: StabilityConfig::default(),
            synth: SynthSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// `null` leaves segments unscaled.
    pub kind: Option<ScalingKind>,
    pub scope: ScalingScope,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            kind: Some(ScalingKind::Minmax),
            scope: ScalingScope::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub variables: Vec<Variable>,
    pub groupings: Vec<GroupBy>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            variables: Variable::ALL.to_vec(),
            groupings: vec![GroupBy::Hour, GroupBy::Weekday, GroupBy::Month],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapConfig {
    pub variables: Vec<Variable>,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig {
            variables: Variable::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpConfig {
    /// Window length in bins (days for a daily series).
    pub m: usize,
    /// Defaults to ⌈m/2⌉.
    pub exclusion_radius: Option<usize>,
    pub variable: Variable,
    pub frequency: Frequency,
}

impl Default for MpConfig {
    fn default() -> Self {
        MpConfig {
            m: 7,
            exclusion_radius: None,
            variable: Variable::Iob,
            frequency: Frequency::Daily,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub variables: Vec<Variable>,
    /// Sakoe-Chiba radius; `null` is unconstrained.
    pub band_radius: Option<usize>,
    /// Radii swept by `elbow` at the configured k.
    pub band_radii: Vec<usize>,
    pub n_init: usize,
    pub max_iter: usize,
    /// Relative cost tolerance of the barycenter updates.
    pub tol: f64,
    pub dba_max_iter: usize,
    pub silhouette_metric: SilhouetteMetric,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let kmeans = KMeansConfig::default();
        ClusterConfig {
            k: 2,
            k_min: 1,
            k_max: 8,
            variables: Variable::ALL.to_vec(),
            band_radius: None,
            band_radii: vec![0, 1, 2, 3, 4, 6],
            n_init: kmeans.n_init,
            max_iter: kmeans.max_iter,
            tol: kmeans.dba.tol,
            dba_max_iter: kmeans.dba.max_iter,
            silhouette_metric: kmeans.silhouette_metric,
        }
    }
}

impl ClusterConfig {
    pub fn kmeans(&self, seed: u64) -> KMeansConfig {
        KMeansConfig {
            warp: WarpConfig {
                band_radius: self.band_radius,
            },
            seed,
            n_init: self.n_init,
            max_iter: self.max_iter,
            dba: DbaOptions {
                max_iter: self.dba_max_iter,
                tol: self.tol,
            },
            silhouette_metric: self.silhouette_metric,
            compute_silhouette: true,
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub frequency: Option<Frequency>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub variables: Option<Vec<Variable>>,
    pub band_radius: Option<usize>,
    pub n_folds: Option<usize>,
    pub days: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(input) = &o.input {
            self.input = Some(input.clone());
        }
        if let Some(f) = o.frequency {
            self.frequency = f;
        }
        if let Some(m) = o.m {
            self.mp.m = m;
        }
        if let Some(k) = o.k {
            self.cluster.k = k;
        }
        if let Some(vars) = &o.variables {
            self.cluster.variables = vars.clone();
        }
        if let Some(r) = o.band_radius {
            self.cluster.band_radius = Some(r);
        }
        if let Some(n) = o.n_folds {
            self.crossval.n_folds = n;
        }
        if let Some(d) = o.days {
            self.synth.days = d;
        }
        self.synth.seed = self.seed;
    }
}
