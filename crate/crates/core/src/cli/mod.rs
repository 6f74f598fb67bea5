//! Command-line driver: one subcommand per pipeline stage, a JSON run
//! config with flag overrides, and a manifest of every artifact written.

pub mod config;
pub mod manifest;
pub mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cluster::{cross_validate_stability, elbow_scan, kmeans_fit_panels, ClusterModel};
use crate::ingest::{load_dataset, write_uniform_csv, UniformSeries, Variable};
use crate::matprof::{matrix_profile, top_discord, top_motif, write_profile_csv};
use crate::resample::{
    build_regular_series, extract_day_segments, extract_week_segments, write_regular_csv, write_segments_csv,
    Frequency, RegularSeries, SegmentKind, SegmentSet,
};
use crate::stats::{
    compare_groupings, descriptive_stats, group_bins, group_readings, grouped_means, heatmap_grid,
    scale_segments, write_heatmap_csv, FidelityReport, GroupStats,
};
use crate::synth::generate;

pub use config::{Overrides, RunConfig};
use manifest::{input_entry, ArtifactWriter, FileEntry, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "aidmine", version, about = "Pattern mining for automated-insulin-delivery logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a log, convert timestamps to UTC and write the uniform series.
    Ingest(CommonArgs),
    /// Aggregate to hourly or daily bins and drop days with poor coverage.
    Resample(CommonArgs),
    /// Check that resampling keeps the rank order of hour/weekday/month means.
    Validate(CommonArgs),
    /// Weekday x month heatmaps of daily means.
    Heatmap(CommonArgs),
    /// Matrix profile with top motif and discord.
    Mp(CommonArgs),
    /// DTW k-means over day (or week) segments.
    Cluster(CommonArgs),
    /// Inertia and silhouette over a range of k, plus a band-radius sweep.
    Elbow(CommonArgs),
    /// Leave-one-fold-out stability of the cluster barycenters.
    Crossval(CommonArgs),
    /// Generate a synthetic log with planted ground truth.
    Synth(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Resample(_) => "resample",
            Command::Validate(_) => "validate",
            Command::Heatmap(_) => "heatmap",
            Command::Mp(_) => "mp",
            Command::Cluster(_) => "cluster",
            Command::Elbow(_) => "elbow",
            Command::Crossval(_) => "crossval",
            Command::Synth(_) => "synth",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Ingest(a)
            | Command::Resample(a)
            | Command::Validate(a)
            | Command::Heatmap(a)
            | Command::Mp(a)
            | Command::Cluster(a)
            | Command::Elbow(a)
            | Command::Crossval(a)
            | Command::Synth(a) => a,
        }
    }
}

fn parse_frequency(s: &str) -> Result<Frequency, String> {
    match s.to_ascii_lowercase().as_str() {
        "hourly" => Ok(Frequency::Hourly),
        "daily" => Ok(Frequency::Daily),
        other => Err(format!("unknown frequency '{other}' (expected hourly or daily)")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Input log (CSV or JSON lines).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// hourly or daily.
    #[arg(long, value_parser = parse_frequency)]
    pub frequency: Option<Frequency>,
    /// Matrix-profile window length.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated clustering variables, e.g. iob,cob,bg.
    #[arg(long, value_delimiter = ',')]
    pub variables: Option<Vec<Variable>>,
    /// Sakoe-Chiba band radius.
    #[arg(long)]
    pub band_radius: Option<usize>,
    #[arg(long)]
    pub n_folds: Option<usize>,
    /// Days to synthesize.
    #[arg(long)]
    pub days: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            input: self.input.clone(),
            frequency: self.frequency,
            m: self.m,
            k: self.k,
            variables: self.variables.clone(),
            band_radius: self.band_radius,
            n_folds: self.n_folds,
            days: self.days,
        }
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            eprintln!("aidmine: {}", line.trim_start_matches("error: "));
            return EXIT_ERROR;
        }
    };
    match execute(&cli.command) {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::Fail(reason)) => {
            eprintln!("aidmine {}: validation failed: {reason}", cli.command.name());
            EXIT_VALIDATION
        }
        Err(message) => {
            eprintln!("aidmine {}: {}", cli.command.name(), message.replace('\n', " "));
            EXIT_ERROR
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail(String),
}

/// Resolves the config for `command` and runs it.
pub fn execute(command: &Command) -> Result<Outcome, String> {
    let args = command.args();
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&args.overrides());
    run_subcommand(command.name(), &cfg)
}

struct Context<'a> {
    cfg: &'a RunConfig,
    writer: ArtifactWriter,
    inputs: Vec<FileEntry>,
}

impl Context<'_> {
    fn load(&mut self) -> Result<UniformSeries, String> {
        let path = self.cfg.input.as_deref().ok_or("no input given (set \"input\" or pass --input)")?;
        let (series, report) = load_dataset(path, &self.cfg.schema, self.cfg.format).map_err(|e| e.to_string())?;
        self.inputs.push(input_entry(path)?);
        self.writer.write_json("load_report.json", &report)?;
        Ok(series)
    }

    fn svg(&mut self, name: &str, text: String) -> Result<(), String> {
        self.writer.write(name, text.as_bytes())
    }

    fn csv<F>(&mut self, name: &str, f: F) -> Result<(), String>
    where
        F: FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| format!("cannot format {name}: {e}"))?;
        self.writer.write(name, &buf)
    }
}

fn needs_input(name: &str) -> bool {
    name != "synth"
}

/// Runs one named stage and writes its artifacts plus `manifest.json` into `cfg.out`.
pub fn run_subcommand(name: &str, cfg: &RunConfig) -> Result<Outcome, String> {
    if needs_input(name) {
        match &cfg.input {
            None => return Err("no input given (set \"input\" or pass --input)".into()),
            Some(p) if !p.is_file() => return Err(format!("input {} does not exist", p.display())),
            _ => {}
        }
    }
    let mut ctx = Context {
        cfg,
        writer: ArtifactWriter::create(&cfg.out)?,
        inputs: Vec::new(),
    };
    let outcome = match name {
        "ingest" => ingest(&mut ctx),
        "resample" => resample(&mut ctx),
        "validate" => validate(&mut ctx),
        "heatmap" => heatmap(&mut ctx),
        "mp" => mp(&mut ctx),
        "cluster" => cluster(&mut ctx),
        "elbow" => elbow(&mut ctx),
        "crossval" => crossval(&mut ctx),
        "synth" => synth(&mut ctx),
        other => Err(format!("unknown subcommand '{other}'")),
    }?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: name.into(),
        status: match &outcome {
            Outcome::Pass => "pass".into(),
            Outcome::Fail(_) => "fail".into(),
        },
        inputs: ctx.inputs,
        parameters: parameters(cfg)?,
        artifacts: Vec::new(),
    };
    ctx.writer.finish(manifest)?;
    Ok(outcome)
}

/// The resolved config minus the output directory, with the input reduced
/// to its file name (its content hash is listed under inputs).
fn parameters(cfg: &RunConfig) -> Result<serde_json::Value, String> {
    let mut value = serde_json::to_value(cfg).map_err(|e| e.to_string())?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("out");
        let name = cfg
            .input
            .as_deref()
            .and_then(Path::file_name)
            .and_then(|n| n.to_str())
            .map(|n| serde_json::Value::String(n.to_string()));
        obj.insert("input".into(), name.unwrap_or(serde_json::Value::Null));
    }
    Ok(value)
}

fn ingest(ctx: &mut Context) -> Result<Outcome, String> {
    let series = ctx.load()?;
    ctx.csv("uniform.csv", |buf| write_uniform_csv(&series, buf))?;
    Ok(Outcome::Pass)
}

fn segment_kind(frequency: Frequency) -> SegmentKind {
    match frequency {
        Frequency::Hourly => SegmentKind::DayOfHours,
        Frequency::Daily => SegmentKind::WeekOfDays,
    }
}

fn segment_frequency(kind: SegmentKind) -> Frequency {
    match kind {
        SegmentKind::DayOfHours => Frequency::Hourly,
        SegmentKind::WeekOfDays => Frequency::Daily,
    }
}

fn extract(series: &RegularSeries, kind: SegmentKind) -> Result<SegmentSet, String> {
    match kind {
        SegmentKind::DayOfHours => extract_day_segments(series),
        SegmentKind::WeekOfDays => extract_week_segments(series),
    }
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ResampleSummary {
    frequency: Frequency,
    bins: usize,
    qualified_days: usize,
    excluded_days: Vec<chrono::NaiveDate>,
    segments: usize,
    skipped_incomplete: usize,
}

fn resample(ctx: &mut Context) -> Result<Outcome, String> {
    let series = ctx.load()?;
    let regular = build_regular_series(&series, ctx.cfg.frequency, ctx.cfg.qualify_by);
    let set = extract(&regular, segment_kind(ctx.cfg.frequency))?;
    ctx.csv("regular.csv", |buf| write_regular_csv(&regular, buf))?;
    ctx.csv("segments.csv", |buf| write_segments_csv(&set, buf))?;
    let summary = ResampleSummary {
        frequency: regular.frequency,
        bins: regular.len(),
        qualified_days: regular.days().len(),
        excluded_days: regular.excluded_days.clone(),
        segments: set.len(),
        skipped_incomplete: set.skipped_incomplete,
    };
    ctx.writer.write_json("resample.json", &summary)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct VariableFidelity {
    variable: Variable,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<FidelityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct FidelitySummary {
    pass: bool,
    variables: Vec<VariableFidelity>,
}

fn validate(ctx: &mut Context) -> Result<Outcome, String> {
    let series = ctx.load()?;
    let regular = build_regular_series(&series, Frequency::Hourly, ctx.cfg.qualify_by);
    let mut results = Vec::new();
    let mut stats: BTreeMap<Variable, BTreeMap<String, BTreeMap<i32, GroupStats>>> = BTreeMap::new();
    for &var in &ctx.cfg.validate.variables {
        let mut raw = BTreeMap::new();
        let mut binned = BTreeMap::new();
        for &by in &ctx.cfg.validate.groupings {
            raw.insert(by, group_readings(&series, var, by));
            let groups = group_bins(&regular, var, by);
            stats.entry(var).or_default().insert(by.to_string(), descriptive_stats(&groups));
            binned.insert(by, groups);
        }
        results.push(match compare_groupings(&grouped_means(&raw), &grouped_means(&binned)) {
            Ok(report) => VariableFidelity {
                variable: var,
                report: Some(report),
                error: None,
            },
            Err(e) => VariableFidelity {
                variable: var,
                report: None,
                error: Some(e.to_string()),
            },
        });
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| r.report.as_ref().is_none_or(|rep| !rep.pass))
        .map(|r| r.variable.to_string())
        .collect();
    let summary = FidelitySummary {
        pass: failed.is_empty(),
        variables: results,
    };
    ctx.writer.write_json("fidelity.json", &summary)?;
    ctx.writer.write_json("stats.json", &stats)?;
    if failed.is_empty() {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!("rank order changed for {}", failed.join(", "))))
    }
}

const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
const MONTHS: [&str; 12] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];

fn heatmap(ctx: &mut Context) -> Result<Outcome, String> {
    let series = ctx.load()?;
    let regular = build_regular_series(&series, Frequency::Daily, ctx.cfg.qualify_by);
    for &var in &ctx.cfg.heatmap.variables {
        let grid = heatmap_grid(&regular, var).map_err(|e| e.to_string())?;
        ctx.csv(&format!("heatmap_{var}.csv"), |buf| write_heatmap_csv(&grid, buf))?;
        let title = format!("Mean daily {} by weekday and month", var.name().to_uppercase());
        ctx.svg(&format!("heatmap_{var}.svg"), svg::heatmap(&title, &WEEKDAYS, &MONTHS, &grid.cells))?;
    }
    Ok(Outcome::Pass)
}

/// Longest stretch of consecutive bins carrying `var`; ties go to the earliest.
fn contiguous_values(series: &RegularSeries, var: Variable) -> (usize, Vec<f64>) {
    let step = series.frequency.step();
    let mut best = (0, Vec::new());
    let mut current: (usize, Vec<f64>) = (0, Vec::new());
    for (i, bin) in series.bins.iter().enumerate() {
        let follows = i > 0 && bin.start - series.bins[i - 1].start == step;
        match bin.mean(var) {
            Some(v) if follows && !current.1.is_empty() => current.1.push(v),
            Some(v) => current = (i, vec![v]),
            None => current = (i + 1, Vec::new()),
        }
        if current.1.len() > best.1.len() {
            best = current.clone();
        }
    }
    best
}

#[derive(Serialize)]
struct MpSummary {
    variable: Variable,
    frequency: Frequency,
    m: usize,
    exclusion_radius: usize,
    series_start: Option<chrono::DateTime<chrono::Utc>>,
    series_length: usize,
    profile_length: usize,
    motif: Option<crate::matprof::Motif>,
    discord: Option<crate::matprof::Discord>,
}

fn mp(ctx: &mut Context) -> Result<Outcome, String> {
    let series = ctx.load()?;
    let mpc = &ctx.cfg.mp;
    let regular = build_regular_series(&series, mpc.frequency, ctx.cfg.qualify_by);
    let (first, values) = contiguous_values(&regular, mpc.variable);
    let result = matrix_profile(&values, mpc.m, mpc.exclusion_radius).map_err(|e| e.to_string())?;
    let motif = top_motif(&result);
    let discord = top_discord(&result);
    ctx.csv("profile.csv", |buf| write_profile_csv(&result, buf))?;

    let mut spans = Vec::new();
    if let Some(mo) = motif {
        for start in [mo.index_a, mo.index_b] {
            spans.push(svg::Span {
                start,
                len: mpc.m,
                color: svg::PALETTE[2],
            });
        }
    }
    if let Some(d) = discord {
        spans.push(svg::Span {
            start: d.index,
            len: mpc.m,
            color: svg::PALETTE[3],
        });
    }
    let unit = match mpc.frequency {
        Frequency::Hourly => "hours",
        Frequency::Daily => "days",
    };
    let name = mpc.variable.name().to_uppercase();
    let panels = [
        svg::Panel {
            title: format!("{name}, {} {unit} (motif green, discord red)", values.len()),
            lines: vec![svg::Line {
                label: name.clone(),
                color: svg::PALETTE[0],
                values: values.clone(),
            }],
            spans,
        },
        svg::Panel {
            title: format!("Matrix profile, m = {}", mpc.m),
            lines: vec![svg::Line {
                label: "profile".into(),
                color: svg::PALETTE[1],
                values: result.profile.clone(),
            }],
            spans: Vec::new(),
        },
    ];
    ctx.svg("mp.svg", svg::line_panels(&format!("Matrix profile of {name}"), &panels))?;
    let summary = MpSummary {
        variable: mpc.variable,
        frequency: mpc.frequency,
        m: result.m,
        exclusion_radius: result.exclusion_radius,
        series_start: regular.bins.get(first).map(|b| b.start),
        series_length: values.len(),
        profile_length: result.profile.len(),
        motif,
        discord,
    };
    ctx.writer.write_json("mp.json", &summary)?;
    Ok(Outcome::Pass)
}

/// Qualified, optionally scaled segments and their panels over the clustering variables.
fn prepare(ctx: &mut Context) -> Result<(SegmentSet, Vec<crate::cluster::Panel>), String> {
    let series = ctx.load()?;
    let kind = ctx.cfg.segments;
    let regular = build_regular_series(&series, segment_frequency(kind), ctx.cfg.qualify_by);
    let mut set = extract(&regular, kind)?;
    if set.is_empty() {
        return Err("no complete segments after resampling".into());
    }
    if let Some(scaling) = ctx.cfg.scaling.kind {
        let (scaled, applied) = scale_segments(&set, scaling, ctx.cfg.scaling.scope).map_err(|e| e.to_string())?;
        ctx.writer.write_json("scaling.json", &applied)?;
        set = scaled;
    }
    if ctx.cfg.cluster.variables.is_empty() {
        return Err("no clustering variables".into());
    }
    let panels = set.panel(&ctx.cfg.cluster.variables);
    Ok((set, panels))
}

fn barycenter_svg(model: &ClusterModel, cluster: usize, kind: SegmentKind) -> String {
    let size = model.cluster_sizes()[cluster];
    let lines = model
        .variables
        .iter()
        .enumerate()
        .map(|(vi, var)| svg::Line {
            label: var.name().to_uppercase(),
            color: svg::PALETTE[vi % svg::PALETTE.len()],
            values: model.barycenters[cluster].values[vi].clone(),
        })
        .collect();
    let axis = match kind {
        SegmentKind::DayOfHours => "hour of day",
        SegmentKind::WeekOfDays => "day of week",
    };
    svg::line_panels(
        &format!("Cluster {cluster} of {}: barycenter", model.k),
        &[svg::Panel {
            title: format!("{size} members, x = {axis}"),
            lines,
            spans: Vec::new(),
        }],
    )
}

fn cluster(ctx: &mut Context) -> Result<Outcome, String> {
    let (set, panels) = prepare(ctx)?;
    let cc = &ctx.cfg.cluster;
    let model = kmeans_fit_panels(&panels, cc.k, &cc.variables, &cc.kmeans(ctx.cfg.seed)).map_err(|e| e.to_string())?;
    ctx.writer.write_json("model.json", &model)?;
    let mut table = String::from("date,cluster\n");
    for (seg, a) in set.segments.iter().zip(&model.assignments) {
        let _ = writeln!(table, "{},{a}", seg.tag.date);
    }
    ctx.writer.write("assignments.csv", table.as_bytes())?;
    for c in 0..model.k {
        ctx.svg(&format!("barycenter_{c}.svg"), barycenter_svg(&model, c, set.kind))?;
    }
    Ok(Outcome::Pass)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn elbow(ctx: &mut Context) -> Result<Outcome, String> {
    let (_, panels) = prepare(ctx)?;
    let cc = ctx.cfg.cluster.clone();
    let k_max = cc.k_max.min(panels.len());
    let k_min = cc.k_min.max(1);
    if k_min > k_max {
        return Err(format!("empty k range {k_min}..={k_max} for {} segments", panels.len()));
    }
    let base = cc.kmeans(ctx.cfg.seed);
    let scan = elbow_scan(&panels, k_min..=k_max, &base).map_err(|e| e.to_string())?;
    let mut table = String::from("k,inertia,silhouette\n");
    for row in &scan.rows {
        let _ = writeln!(table, "{},{},{}", row.k, row.inertia, fmt_opt(row.silhouette));
    }
    ctx.writer.write("elbow.csv", table.as_bytes())?;
    ctx.writer.write_json("elbow.json", &scan)?;
    let ks: Vec<f64> = scan.rows.iter().map(|r| r.inertia).collect();
    let sil: Vec<f64> = scan.rows.iter().map(|r| r.silhouette.unwrap_or(f64::NAN)).collect();
    let knee = scan.knee.map(|k| format!(", knee at k = {k}")).unwrap_or_default();
    ctx.svg(
        "elbow.svg",
        svg::line_panels(
            &format!("Elbow scan, k = {k_min}..{k_max}{knee}"),
            &[
                svg::Panel {
                    title: "inertia".into(),
                    lines: vec![svg::Line {
                        label: "inertia".into(),
                        color: svg::PALETTE[0],
                        values: ks,
                    }],
                    spans: Vec::new(),
                },
                svg::Panel {
                    title: "mean silhouette".into(),
                    lines: vec![svg::Line {
                        label: "silhouette".into(),
                        color: svg::PALETTE[1],
                        values: sil,
                    }],
                    spans: Vec::new(),
                },
            ],
        ),
    )?;

    let k = cc.k.min(panels.len());
    let mut sweep = String::from("band_radius,inertia,silhouette\n");
    let radii = std::iter::once(None).chain(cc.band_radii.iter().map(|&r| Some(r)));
    for radius in radii {
        let mut kcfg = base.clone();
        kcfg.warp.band_radius = radius;
        let model = kmeans_fit_panels(&panels, k, &cc.variables, &kcfg).map_err(|e| e.to_string())?;
        let label = radius.map(|r| r.to_string()).unwrap_or_else(|| "none".into());
        let _ = writeln!(sweep, "{label},{},{}", model.inertia, fmt_opt(model.silhouette));
    }
    ctx.writer.write("band_sweep.csv", sweep.as_bytes())?;
    Ok(Outcome::Pass)
}

fn crossval(ctx: &mut Context) -> Result<Outcome, String> {
    let (_, panels) = prepare(ctx)?;
    let cc = &ctx.cfg.cluster;
    let report = cross_validate_stability(&panels, cc.k, &cc.variables, &cc.kmeans(ctx.cfg.seed), &ctx.cfg.crossval)
        .map_err(|e| e.to_string())?;
    ctx.writer.write_json("stability.json", &report)?;
    if report.stable {
        Ok(Outcome::Pass)
    } else {
        let worst = report.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Outcome::Fail(format!(
            "clusters unstable, largest ratio {worst:.3} vs threshold {}",
            report.threshold
        )))
    }
}

fn synth(ctx: &mut Context) -> Result<Outcome, String> {
    let out = generate(&ctx.cfg.synth).map_err(|e| e.to_string())?;
    ctx.writer.write("synth.csv", out.csv.as_bytes())?;
    ctx.writer.write_json("truth.json", &out.truth)?;
    Ok(Outcome::Pass)
}
