//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 internal error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::analysis::{
    threshold_sweep, AnalysisError, DetectionMatrix, SweepResult, ThresholdGrid,
};
use crate::audit::{build_report, compare_named_groups, run_audit, AuditError, Overrides};
use crate::io::manifest::{AuditManifest, ManifestError};
use crate::io::plot::emit_sweep_plot;
use crate::io::report::{emit_report, write_json, AuditReport, ReportFormat};
use crate::stats::PermutationMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "embias",
    version,
    about = "Audit association biases in embedding spaces"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest and every embedding file it references.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run every (model, layer, test) of a manifest and write a report.
    Run(RunArgs),
    /// Count detected biases over a threshold grid for one layer.
    Sweep(SweepArgs),
    /// Permutation test comparing the bias counts of two model groups.
    CompareGroups(CompareArgs),
    /// Render a sweep as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Exact,
    MonteCarlo,
}

impl From<ModeArg> for PermutationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => PermutationMode::Auto,
            ModeArg::Exact => PermutationMode::Exact,
            ModeArg::MonteCarlo => PermutationMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    /// Master seed (falls back to AUDIT_SEED, then the manifest).
    #[arg(long, env = "AUDIT_SEED")]
    pub seed: Option<u64>,
    /// Maximum permutations per test.
    #[arg(long)]
    pub permutations: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Detection threshold for layer profiles.
    #[arg(long)]
    pub p_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads (0 = one per core). Never changes results.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl ComputeArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            permutations: self.permutations,
            replicates: self.replicates,
            p_threshold: self.p_threshold,
            mode: self.mode.map(Into::into),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridScaleArg {
    Log,
    Linear,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_stop: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum)]
    pub grid_scale: Option<GridScaleArg>,
}

impl GridArgs {
    fn is_set(&self) -> bool {
        self.grid_start.is_some()
            || self.grid_stop.is_some()
            || self.grid_points.is_some()
            || self.grid_scale.is_some()
    }

    /// The grid described by the flags, or `default` when none are given.
    fn resolve(
        &self,
        default: &ThresholdGrid,
        scale: GridScaleArg,
    ) -> Result<ThresholdGrid, CliError> {
        if !self.is_set() {
            return Ok(default.clone());
        }
        let values = default.values();
        let start = self.grid_start.unwrap_or(values[0]);
        let stop = self.grid_stop.unwrap_or(values[values.len() - 1]);
        let points = self.grid_points.unwrap_or(values.len());
        let grid = match self.grid_scale.unwrap_or(scale) {
            GridScaleArg::Log => ThresholdGrid::log_spaced(start, stop, points),
            GridScaleArg::Linear => ThresholdGrid::linear(start, stop, points),
        };
        grid.map_err(CliError::input)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    #[command(flatten)]
    pub compute: ComputeArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

/// Where detection results come from: a fresh run of a manifest or a prior report.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Reuse the results of a previous `run`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Layer to sweep (default: the last layer).
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub compute: ComputeArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub group_a: String,
    #[arg(long)]
    pub group_b: String,
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub compute: ComputeArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub plot: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub compute: ComputeArgs,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        }
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        if e.is_input_error() {
            CliError::input(e)
        } else {
            CliError::internal(e)
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::input(e)
    }
}

/// Loads a manifest and all its files, then applies command-line overrides.
fn load_manifest(path: &Path, compute: &ComputeArgs) -> Result<AuditManifest, CliError> {
    let mut manifest = crate::io::parse_manifest(path)?;
    compute
        .overrides()
        .apply(&mut manifest)
        .map_err(CliError::input)?;
    Ok(manifest)
}

/// Detection results plus what the analytics need from their source.
struct Results {
    matrix: DetectionMatrix,
    groups: std::collections::BTreeMap<String, Vec<String>>,
    threshold_grid: ThresholdGrid,
    comparison_grid: ThresholdGrid,
    seed: u64,
}

fn load_results(source: &SourceArgs, compute: &ComputeArgs) -> Result<Results, CliError> {
    if let Some(path) = &source.report {
        let report = AuditReport::read_json(path).map_err(CliError::input)?;
        return Ok(Results {
            matrix: report.to_matrix().map_err(CliError::input)?,
            seed: compute.seed.unwrap_or(report.settings.permutation.seed),
            threshold_grid: report.settings.threshold_grid,
            comparison_grid: report.settings.comparison_grid,
            groups: report.groups,
        });
    }
    let path = source.manifest.as_ref().expect("clap enforces one source");
    let manifest = load_manifest(path, compute)?;
    let run = run_audit(&manifest, compute.jobs)?;
    Ok(Results {
        matrix: run.matrix,
        groups: manifest.groups,
        threshold_grid: manifest.threshold_grid,
        comparison_grid: manifest.comparison_grid,
        seed: manifest.permutation.seed,
    })
}

fn pick_layer(matrix: &DetectionMatrix, layer: &Option<String>) -> Result<String, CliError> {
    match layer {
        Some(l) if matrix.layer_order().contains(l) => Ok(l.clone()),
        Some(l) => Err(CliError::input(AnalysisError::UnknownLayer(l.clone()))),
        None => matrix
            .layer_order()
            .last()
            .cloned()
            .ok_or_else(|| CliError::input("no layers in results")),
    }
}

pub fn cmd_validate(manifest: &Path) -> Result<(), CliError> {
    let m = crate::io::parse_manifest(manifest)?;
    println!(
        "{}: ok ({} models, {} layers, {} tests, {} work items)",
        manifest.display(),
        m.models.len(),
        m.layer_order.len(),
        m.tests.len(),
        m.work_items().len()
    );
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut manifest = load_manifest(&args.manifest, &args.compute)?;
    manifest.threshold_grid = args
        .grid
        .resolve(&manifest.threshold_grid, GridScaleArg::Log)?;
    let run = run_audit(&manifest, args.compute.jobs)?;
    let report = build_report(&manifest, &run)?;
    emit_report(&report, args.format, &args.out).map_err(CliError::input)?;
    info!(
        "wrote {} entries to {}",
        report.entries.len(),
        args.out.display()
    );
    Ok(())
}

fn sweep_csv(sweep: &SweepResult) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "model", "p_threshold", "count"])
        .map_err(CliError::internal)?;
    for (model, counts) in &sweep.per_model {
        for (t, c) in sweep.grid.iter().zip(counts) {
            w.write_record([
                sweep.layer.clone(),
                model.clone(),
                t.to_string(),
                c.to_string(),
            ])
            .map_err(CliError::internal)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::internal(e.error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

fn compute_sweep(
    source: &SourceArgs,
    compute: &ComputeArgs,
    layer: &Option<String>,
    grid: &GridArgs,
) -> Result<SweepResult, CliError> {
    // Reject bad grid flags before any expensive work.
    grid.resolve(&ThresholdGrid::default_sweep(), GridScaleArg::Log)?;
    let results = load_results(source, compute)?;
    let grid = grid.resolve(&results.threshold_grid, GridScaleArg::Log)?;
    let layer = pick_layer(&results.matrix, layer)?;
    threshold_sweep(&results.matrix, &layer, &grid).map_err(CliError::input)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let sweep = compute_sweep(&args.source, &args.compute, &args.layer, &args.grid)?;
    let text = match args.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&sweep).map_err(CliError::internal)?;
            s.push('\n');
            s
        }
        ReportFormat::Csv => sweep_csv(&sweep)?,
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if let Some(plot) = &args.plot {
        emit_sweep_plot(&sweep, &sweep.grid, plot).map_err(CliError::input)?;
    }
    Ok(())
}

pub fn cmd_plot(args: &PlotArgs) -> Result<(), CliError> {
    let sweep = compute_sweep(&args.source, &args.compute, &args.layer, &args.grid)?;
    emit_sweep_plot(&sweep, &sweep.grid, &args.plot).map_err(CliError::input)
}

pub fn cmd_compare_groups(args: &CompareArgs) -> Result<(), CliError> {
    args.grid
        .resolve(&ThresholdGrid::default_comparison(), GridScaleArg::Linear)?;
    let results = load_results(&args.source, &args.compute)?;
    for g in [&args.group_a, &args.group_b] {
        if !results.groups.contains_key(g) {
            return Err(CliError::input(format!("unknown group `{g}`")));
        }
    }
    let grid = args
        .grid
        .resolve(&results.comparison_grid, GridScaleArg::Linear)?;
    let layer = pick_layer(&results.matrix, &args.layer)?;
    let record = compare_named_groups(
        &results.matrix,
        &results.groups,
        &args.group_a,
        &args.group_b,
        &layer,
        &grid,
        results.seed,
    )
    .map_err(CliError::input)?;
    let o = &record.outcome;
    let (lo, hi) = (
        o.delta_orig.iter().min().copied().unwrap_or(0),
        o.delta_orig.iter().max().copied().unwrap_or(0),
    );
    println!(
        "{} vs {} on {}: delta_orig in [{lo}, {hi}] over {} thresholds",
        record.group_a,
        record.group_b,
        record.layer,
        o.grid.len()
    );
    println!(
        "reassignments: {} ({}), tie_fraction: {:.6}, p_value: {:.6}",
        o.n_group_permutations, o.mode, o.tie_fraction, o.p_value
    );
    if let Some(path) = &args.out {
        write_json(&record, path).map_err(CliError::input)?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Validate { manifest } => cmd_validate(manifest),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::CompareGroups(args) => cmd_compare_groups(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
