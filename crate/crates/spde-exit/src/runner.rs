//! Experiment orchestration: one entry point per subcommand, binding config,
//! solver, bound evaluation, and persistence.
//!
//! Every run follows the same protocol: validate the whole config up front
//! (no partial outputs on bad input), create the output directory, save the
//! manifest identity, then write output tables that reference the manifest
//! id in their headers, and finally re-save the manifest with the body
//! checksums. A runtime failure after the directory exists leaves a
//! `PARTIAL` marker naming the error so a half-written directory can never
//! be mistaken for a finished run.
//!
//! Determinism contract: with a fixed config and seed, every CSV body is
//! byte-identical across re-runs. Replica work is farmed out in parallel
//! but reduced in replica order, and all floats are formatted canonically.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::bounds::{
    self, BoundConstants, JBound, MeanSizeBound, N2Bound, RateValue, Thm2Bounds,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::exit::{mc_exit_spec, ExitEstimate, ExitSpec};
use crate::field::{cumulative_to_measure, Field, MeasurePath};
use crate::grid::{SpaceTimeGrid, WeightParams};
use crate::heat::heat_flow_field;
use crate::io::{
    csv_file_body_sha256, measure_table, record_table, set_grid_meta, table_to_control,
    table_to_measure_path, CsvTable, Snapshot, SNAPSHOT_MAGIC,
};
use crate::ldp::{
    candidate_rate_infimum, ldp_scaling_scan, rate_measure, rate_spde, record_to_measure_path,
    skeleton_solve, ControlFunction,
};
use crate::manifest::RunManifest;
use crate::models::ModelSpec;
use crate::noise::NoiseStream;
use crate::solver::{solve_path, SolverConfig};
use crate::weighted::{beta_norm, measure_beta_norm_sq};

/// Marker file left behind when a run dies after producing output.
pub const PARTIAL_MARKER: &str = "PARTIAL";
/// Measure-path CSVs are thinned to at most this many time slices; the
/// binary snapshot keeps full resolution.
const MAX_CSV_SLICES: usize = 257;

/// What to run; file arguments come from the command line, everything else
/// from the config.
#[derive(Debug, Clone)]
pub enum Command {
    Simulate,
    ExitProb,
    Bounds,
    Sweep,
    LdpScan,
    RateEval { path_file: PathBuf },
    Skeleton { control_file: PathBuf },
    MeanSize,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ExitProb => "exit-prob",
            Command::Bounds => "bounds",
            Command::Sweep => "sweep",
            Command::LdpScan => "ldp-scan",
            Command::RateEval { .. } => "rate-eval",
            Command::Skeleton { .. } => "skeleton",
            Command::MeanSize => "mean-size",
            Command::Verify => "verify",
        }
    }
}

/// A finished run: its manifest, where things went, and summary lines for
/// the terminal.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub outputs: Vec<PathBuf>,
    /// Every reported bound was trivial or vacuous (exit status 3).
    pub vacuous_only: bool,
    pub messages: Vec<String>,
}

/// Typed parts shared by all command bodies.
struct Ctx {
    grid: Arc<SpaceTimeGrid>,
    weights: WeightParams,
    model: ModelSpec,
    solver: SolverConfig,
    exit: Option<ExitSpec>,
}

/// Output protocol: manifest first, outputs referencing it, manifest again
/// with checksums.
struct OutputWriter {
    dir: PathBuf,
    manifest: RunManifest,
    manifest_path: PathBuf,
    outputs: Vec<PathBuf>,
    identity_saved: bool,
}

impl OutputWriter {
    fn create(cmd: &Command, cfg: &ExperimentConfig) -> Result<Self> {
        let dir = PathBuf::from(&cfg.run.output_dir);
        std::fs::create_dir_all(&dir)?;
        // A fresh run supersedes any previous failure in this directory.
        let _ = std::fs::remove_file(dir.join(PARTIAL_MARKER));
        let manifest = RunManifest::new(cmd.name(), cfg);
        let manifest_path = dir.join("manifest.json");
        Ok(OutputWriter { dir, manifest, manifest_path, outputs: Vec::new(), identity_saved: false })
    }

    /// Persist the manifest identity before any output exists.
    fn commit_identity(&mut self) -> Result<()> {
        self.manifest.save(&self.manifest_path)?;
        self.identity_saved = true;
        Ok(())
    }

    fn write_table(&mut self, name: &str, table: &mut CsvTable) -> Result<PathBuf> {
        assert!(self.identity_saved, "outputs must not precede the manifest");
        table.set_meta("manifest", self.manifest.manifest_id());
        let path = self.dir.join(name);
        table.save(&path)?;
        self.manifest.record_output(name, table.body_sha256());
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn write_snapshot(&mut self, name: &str, snap: &mut Snapshot) -> Result<PathBuf> {
        assert!(self.identity_saved, "outputs must not precede the manifest");
        snap.meta.insert("manifest".into(), self.manifest.manifest_id());
        let path = self.dir.join(name);
        snap.save(&path)?;
        let bytes = std::fs::read(&path)?;
        let mut hasher = <sha2::Sha256 as sha2::Digest>::new();
        sha2::Digest::update(&mut hasher, &bytes);
        self.manifest
            .record_output(name, format!("{:x}", sha2::Digest::finalize(hasher)));
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn finish(self, vacuous_only: bool, messages: Vec<String>) -> Result<RunOutcome> {
        self.manifest.save(&self.manifest_path)?;
        Ok(RunOutcome {
            manifest: self.manifest,
            manifest_path: self.manifest_path,
            outputs: self.outputs,
            vacuous_only,
            messages,
        })
    }
}

/// NaN stands for "not available" in bound tables; flags are 0/1.
fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn set_constants_meta(table: &mut CsvTable, c: &BoundConstants) {
    for (name, value) in c.ledger() {
        table.set_meta(&format!("const.{name}"), crate::io::format_float(value));
    }
    for (name, src) in &c.provenance {
        table.set_meta(&format!("const_src.{name}"), src);
    }
}

/// Run one experiment end to end. Validation failures leave no trace on
/// disk; runtime failures leave a `PARTIAL` marker in the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, cmd: &Command) -> Result<RunOutcome> {
    let exp = cfg.build()?;
    let ctx = Ctx {
        grid: exp.grid,
        weights: exp.weights,
        model: exp.model,
        solver: exp.solver,
        exit: exp.exit,
    };
    let work = || dispatch(cfg, &ctx, cmd);
    let result = if cfg.run.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build()
            .map_err(|e| Error::Runtime(format!("worker pool: {e}")))?;
        pool.install(work)
    } else {
        work()
    };
    match result {
        Err(e) if !e.is_validation() => {
            let marker = Path::new(&cfg.run.output_dir).join(PARTIAL_MARKER);
            if marker.parent().is_some_and(|d| d.exists()) {
                let _ = std::fs::write(&marker, format!("{e}\n"));
            }
            Err(e)
        }
        other => other,
    }
}

fn dispatch(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    match cmd {
        Command::Simulate => simulate(cfg, ctx, cmd),
        Command::ExitProb => exit_prob(cfg, ctx, cmd),
        Command::Bounds => bounds_cmd(cfg, ctx, cmd),
        Command::Sweep => sweep(cfg, ctx, cmd),
        Command::LdpScan => ldp_scan(cfg, ctx, cmd),
        Command::RateEval { path_file } => rate_eval(cfg, ctx, cmd, path_file),
        Command::Skeleton { control_file } => skeleton(cfg, ctx, cmd, control_file),
        Command::MeanSize => mean_size(cfg, ctx, cmd),
        Command::Verify => verify(cfg, ctx, cmd),
    }
}

fn require_exit(ctx: &Ctx, cmd: &Command) -> Result<ExitSpec> {
    ctx.exit.ok_or_else(|| {
        Error::InvalidConfig(format!("an [exit] block is required for {}", cmd.name()))
    })
}

/// Rate infimum for rate-dependent bounds: the user-supplied value wins,
/// otherwise a candidate is evaluated over the drifted-profile family.
fn resolve_rate(cfg: &ExperimentConfig, ctx: &Ctx, spec: &ExitSpec) -> Result<Option<RateValue>> {
    if let Some(v) = cfg.bounds.rate_inf {
        return Ok(Some(RateValue::user(v)?));
    }
    let drift_grid: Vec<f64> = match cfg.scan.as_ref().map(|s| s.drift_grid.clone()) {
        Some(g) if !g.is_empty() => g,
        _ => (-8..=8).map(|i| i as f64 * 0.5).collect(),
    };
    let candidate = candidate_rate_infimum(&ctx.model, &ctx.grid, &ctx.weights, spec, &drift_grid, 48)?;
    if candidate.value.is_finite() {
        Ok(Some(RateValue::new(candidate.value, bounds::RateProvenance::Evaluated)?))
    } else {
        Ok(None)
    }
}

fn simulate(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let mut out = OutputWriter::create(cmd, cfg)?;
    out.commit_identity()?;
    let mut messages = Vec::new();

    let stream = NoiseStream::new(cfg.run.seed, 0);
    let rec = solve_path(&ctx.model, &ctx.grid, &ctx.solver, &stream, None, None)?;
    let mut table = record_table(&rec);
    table.set_meta("stream_algorithm", crate::noise::STREAM_ALGORITHM);
    out.write_table("simulate.csv", &mut table)?;
    let mut snap = Snapshot::from_record(&rec);
    out.write_snapshot("simulate.snap", &mut snap)?;
    messages.push(format!(
        "replica 0: {} recorded snapshots to t = {}",
        rec.times.len(),
        rec.times.last().expect("record is nonempty")
    ));

    if cfg.run.replicas > 1 {
        let rows: Vec<Result<Vec<f64>>> = (0..cfg.run.replicas as u64)
            .into_par_iter()
            .map(|replica| {
                let stream = NoiseStream::new(cfg.run.seed, replica);
                let rec = solve_path(&ctx.model, &ctx.grid, &ctx.solver, &stream, None, None)?;
                let last = rec.fields.last().expect("record is nonempty");
                let field =
                    Field::new(ctx.grid.clone(), *rec.times.last().expect("nonempty"), last.clone())?;
                let mass = last[ctx.grid.nx] - last[0];
                let norm = beta_norm(&field, &ctx.weights)?;
                let proj = rec.projection_sup.iter().cloned().fold(0.0, f64::max);
                Ok(vec![replica as f64, mass, norm, proj])
            })
            .collect();
        let mut summary = CsvTable::new(
            "simulate-summary/v1",
            &["replica", "final_mass", "final_norm_beta", "projection_sup_max"],
        );
        set_grid_meta(&mut summary, &ctx.grid);
        summary.set_meta("stream_algorithm", crate::noise::STREAM_ALGORITHM);
        summary.set_meta("epsilon", crate::io::format_float(ctx.solver.epsilon));
        let mut failures = 0usize;
        for row in rows {
            match row {
                Ok(r) => summary.push_row(r)?,
                Err(_) => failures += 1,
            }
        }
        if summary.rows.is_empty() {
            return Err(Error::Runtime("every replica failed".into()));
        }
        out.write_table("simulate_summary.csv", &mut summary)?;
        messages.push(format!(
            "{} replicas summarized ({failures} failed)",
            cfg.run.replicas
        ));
    }
    out.finish(false, messages)
}

fn estimate_table(est: &ExitEstimate, spec: &ExitSpec, epsilon: f64) -> Result<CsvTable> {
    let mut t = CsvTable::new(
        "exit-prob/v1",
        &[
            "r",
            "delta0",
            "t_deadline",
            "epsilon",
            "replicas",
            "completed",
            "exits",
            "p_hat",
            "std_err",
            "mean_tau_censored",
            "censor_fraction",
        ],
    );
    t.set_meta("detector", &est.detector);
    t.set_meta("seed", est.seed);
    t.set_meta("stream_algorithm", crate::noise::STREAM_ALGORITHM);
    t.push_row(vec![
        spec.r,
        spec.delta0,
        spec.t_deadline,
        epsilon,
        est.replicas as f64,
        est.completed as f64,
        est.exits as f64,
        est.p_hat,
        est.std_err,
        est.mean_tau_censored,
        est.censor_fraction,
    ])?;
    Ok(t)
}

fn exit_prob(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let spec = require_exit(ctx, cmd)?;
    let mut out = OutputWriter::create(cmd, cfg)?;
    out.commit_identity()?;
    let est = mc_exit_spec(
        &spec,
        &ctx.model,
        &ctx.grid,
        &ctx.weights,
        &ctx.solver,
        cfg.run.replicas,
        cfg.run.seed,
    )?;
    let mut table = estimate_table(&est, &spec, ctx.solver.epsilon)?;
    set_grid_meta(&mut table, &ctx.grid);
    out.write_table("exit_prob.csv", &mut table)?;
    let messages = vec![format!(
        "p_hat = {} +- {} ({} exits / {} completed)",
        est.p_hat, est.std_err, est.exits, est.completed
    )];
    out.finish(false, messages)
}

/// Everything the bound table reports for one parameter point.
struct BoundRow {
    j: JBound,
    thm3: JBound,
    n2: N2Bound,
    mean_size: MeanSizeBound,
    k_opt: u32,
    rate: Option<RateValue>,
    thm1_lower: f64,
    thm1_mean: f64,
    thm2: Option<Thm2Bounds>,
    survival: f64,
}

impl BoundRow {
    fn informative(&self) -> bool {
        let j_info = !self.j.trivial;
        let thm3_info = !self.thm3.trivial;
        let n2_info = !self.n2.vacuous && self.n2.value > 0.0;
        let ms_info = !self.mean_size.vacuous;
        let thm1_info = self.thm1_lower > 0.0;
        let thm2_info = self
            .thm2
            .as_ref()
            .is_some_and(|t| !t.lower_trivial || !t.upper_trivial);
        let surv_info = self.survival < 1.0;
        j_info || thm3_info || n2_info || ms_info || thm1_info || thm2_info || surv_info
    }
}

fn eval_bound_row(
    r: f64,
    delta0: f64,
    epsilon: f64,
    t_horizon: f64,
    w: &WeightParams,
    c: &BoundConstants,
    k_max: u32,
    rate: &Option<RateValue>,
    messages: &mut Vec<String>,
) -> Result<BoundRow> {
    let (k_opt, j) = bounds::optimize_k(r, epsilon, t_horizon, c, k_max)?;
    let thm3 = bounds::thm3_exit_bound(r, epsilon, t_horizon, w, c)?;
    let n2 = bounds::eval_n2(r, epsilon, t_horizon, w, c)?;
    let mean_size = bounds::mean_size_rhs(t_horizon, epsilon, w, c)?;
    let (mut thm1_lower, mut thm1_mean, mut thm2, mut survival) =
        (f64::NAN, f64::NAN, None, f64::NAN);
    if let Some(rate) = rate {
        thm1_lower = bounds::thm1_lower(rate, epsilon, c.delta);
        match bounds::thm1_mean_bound(rate, epsilon, c.delta) {
            Ok(v) => thm1_mean = v,
            Err(e) => messages.push(format!("mean exit-time bound unavailable: {e}")),
        }
        match bounds::thm2_bounds(r, delta0, epsilon, t_horizon, rate, c) {
            Ok(t) => thm2 = Some(t),
            Err(e) => messages.push(format!("sandwich bounds unavailable: {e}")),
        }
        survival = bounds::upperbound_survival(t_horizon, rate, epsilon, c.delta)?;
    } else {
        messages.push(
            "no rate infimum available (no drift in the candidate family exits); \
             rate-dependent bounds reported as NaN"
                .into(),
        );
    }
    Ok(BoundRow {
        j,
        thm3,
        n2,
        mean_size,
        k_opt,
        rate: *rate,
        thm1_lower,
        thm1_mean,
        thm2,
        survival,
    })
}

const BOUND_COLUMNS: [&str; 22] = [
    "r",
    "delta0",
    "epsilon",
    "t_horizon",
    "k_opt",
    "j_exit",
    "j_exit_trivial",
    "rate_inf",
    "rate_user",
    "thm1_lower",
    "thm1_mean_upper",
    "thm2_lower",
    "thm2_upper",
    "thm2_mean_upper",
    "thm2_lower_trivial",
    "thm2_upper_trivial",
    "n2",
    "n2_vacuous",
    "thm3_hitting",
    "survival_upper",
    "mean_size_rhs",
    "mean_size_vacuous",
];

fn bound_row_values(r: f64, delta0: f64, epsilon: f64, t_horizon: f64, b: &BoundRow) -> Vec<f64> {
    vec![
        r,
        delta0,
        epsilon,
        t_horizon,
        b.k_opt as f64,
        b.j.value,
        flag(b.j.trivial),
        b.rate.as_ref().map_or(f64::NAN, |r| r.value),
        flag(matches!(
            b.rate.as_ref().map(|r| r.provenance),
            Some(bounds::RateProvenance::UserSupplied)
        )),
        b.thm1_lower,
        b.thm1_mean,
        b.thm2.as_ref().map_or(f64::NAN, |t| t.lower),
        b.thm2.as_ref().map_or(f64::NAN, |t| t.upper),
        b.thm2.as_ref().map_or(f64::NAN, |t| t.mean_upper),
        b.thm2.as_ref().map_or(f64::NAN, |t| flag(t.lower_trivial)),
        b.thm2.as_ref().map_or(f64::NAN, |t| flag(t.upper_trivial)),
        b.n2.value,
        flag(b.n2.vacuous),
        b.thm3.value,
        b.survival,
        b.mean_size.value,
        flag(b.mean_size.vacuous),
    ]
}

fn bounds_cmd(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let spec = require_exit(ctx, cmd)?;
    let mut out = OutputWriter::create(cmd, cfg)?;
    let mut messages = Vec::new();
    let constants = BoundConstants::constructive(
        &ctx.model,
        &ctx.grid,
        &ctx.weights,
        spec.t_deadline,
        ctx.solver.epsilon,
        cfg.run.seed,
        &cfg.bound_overrides(),
    )?;
    out.manifest.record_constants(&constants);
    out.commit_identity()?;

    let rate = resolve_rate(cfg, ctx, &spec)?;
    let row = eval_bound_row(
        spec.r,
        spec.delta0,
        ctx.solver.epsilon,
        spec.t_deadline,
        &ctx.weights,
        &constants,
        cfg.bounds.k_max,
        &rate,
        &mut messages,
    )?;
    let vacuous_only = !row.informative();

    let mut table = CsvTable::new("bounds/v1", &BOUND_COLUMNS);
    set_grid_meta(&mut table, &ctx.grid);
    set_constants_meta(&mut table, &constants);
    table.push_row(bound_row_values(
        spec.r,
        spec.delta0,
        ctx.solver.epsilon,
        spec.t_deadline,
        &row,
    ))?;
    out.write_table("bounds.csv", &mut table)?;
    messages.push(format!(
        "exit bound J = {} (k = {}{})",
        row.j.value,
        row.k_opt,
        if row.j.trivial { ", trivial" } else { "" }
    ));
    if vacuous_only {
        messages.push("every bound at this point is trivial or vacuous".into());
    }
    out.finish(vacuous_only, messages)
}

fn sweep(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let spec = require_exit(ctx, cmd)?;
    let sweep_cfg = cfg.sweep.clone().unwrap_or_default();
    let r_list = if sweep_cfg.r.is_empty() { vec![spec.r] } else { sweep_cfg.r };
    let eps_list =
        if sweep_cfg.epsilon.is_empty() { vec![ctx.solver.epsilon] } else { sweep_cfg.epsilon };
    let t_list = if sweep_cfg.t.is_empty() { vec![spec.t_deadline] } else { sweep_cfg.t };

    let mut out = OutputWriter::create(cmd, cfg)?;
    let mut messages = Vec::new();
    // Constants are fitted once at the largest noise size: the path-moment
    // constant can only grow with the noise, so the bound stays valid for
    // every smaller epsilon in the sweep.
    let eps_max = eps_list.iter().cloned().fold(f64::MIN, f64::max);
    let t_max = t_list.iter().cloned().fold(f64::MIN, f64::max);
    let constants = BoundConstants::constructive(
        &ctx.model,
        &ctx.grid,
        &ctx.weights,
        t_max,
        eps_max,
        cfg.run.seed,
        &cfg.bound_overrides(),
    )?;
    out.manifest.record_constants(&constants);
    out.commit_identity()?;

    let mut columns: Vec<&str> = BOUND_COLUMNS.to_vec();
    columns.extend_from_slice(&[
        "p_hat",
        "std_err",
        "exits",
        "completed",
        "within_j",
        "within_sandwich_lower",
        "within_sandwich_upper",
    ]);
    let mut table = CsvTable::new("sweep/v1", &columns);
    set_grid_meta(&mut table, &ctx.grid);
    set_constants_meta(&mut table, &constants);
    table.set_meta("stream_algorithm", crate::noise::STREAM_ALGORITHM);

    let mut informative_any = false;
    let mut j_violations = 0usize;
    let mut points = 0usize;
    for &t in &t_list {
        for &eps in &eps_list {
            for &r in &r_list {
                let point_spec = ExitSpec { r, ..spec };
                let point_spec = ExitSpec { t_deadline: t, ..point_spec };
                point_spec.validate(&ctx.grid)?;
                let mut solver = ctx.solver.clone();
                solver.epsilon = eps;
                let est = mc_exit_spec(
                    &point_spec,
                    &ctx.model,
                    &ctx.grid,
                    &ctx.weights,
                    &solver,
                    cfg.run.replicas,
                    cfg.run.seed,
                )?;
                let rate = resolve_rate(cfg, ctx, &point_spec)?;
                let row = eval_bound_row(
                    r,
                    spec.delta0,
                    eps,
                    t,
                    &ctx.weights,
                    &constants,
                    cfg.bounds.k_max,
                    &rate,
                    &mut messages,
                )?;
                informative_any |= row.informative();
                let within_j = est.p_hat <= row.j.value + 2.0 * est.std_err;
                if !within_j {
                    j_violations += 1;
                }
                let (lo_ok, hi_ok) = match &row.thm2 {
                    Some(t2) => (
                        flag(t2.lower <= est.p_hat + 2.0 * est.std_err),
                        flag(est.p_hat <= t2.upper + 4.0 * est.std_err),
                    ),
                    None => (f64::NAN, f64::NAN),
                };
                let mut values = bound_row_values(r, spec.delta0, eps, t, &row);
                values.extend_from_slice(&[
                    est.p_hat,
                    est.std_err,
                    est.exits as f64,
                    est.completed as f64,
                    flag(within_j),
                    lo_ok,
                    hi_ok,
                ]);
                table.push_row(values)?;
                points += 1;
            }
        }
    }
    out.write_table("sweep.csv", &mut table)?;
    messages.push(format!(
        "{points} parameter points; {j_violations} exceeded the exit bound by more than 2 SE"
    ));
    out.finish(!informative_any, messages)
}

fn ldp_scan(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let spec = require_exit(ctx, cmd)?;
    let scan = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("a [scan] block is required for ldp-scan".into()))?;
    let replicas = scan.replicas.unwrap_or(cfg.run.replicas);
    let mut out = OutputWriter::create(cmd, cfg)?;
    out.commit_identity()?;
    let mut messages = Vec::new();

    let rows = ldp_scaling_scan(
        &spec,
        &ctx.model,
        &ctx.grid,
        &ctx.weights,
        &ctx.solver,
        &scan.eps_list,
        replicas,
        cfg.run.seed,
    )?;
    let mut table = CsvTable::new(
        "ldp-scan/v1",
        &[
            "epsilon",
            "p_hat",
            "std_err",
            "eps_log_p",
            "ci_lo",
            "ci_hi",
            "below_resolution",
            "exits",
            "completed",
        ],
    );
    set_grid_meta(&mut table, &ctx.grid);
    table.set_meta("stream_algorithm", crate::noise::STREAM_ALGORITHM);
    table.set_meta("replicas", replicas);
    let rate = resolve_rate(cfg, ctx, &spec)?;
    if let Some(rate) = &rate {
        table.set_meta("candidate_rate", crate::io::format_float(rate.value));
        table.set_meta(
            "candidate_rate_provenance",
            match rate.provenance {
                bounds::RateProvenance::Evaluated => "evaluated",
                bounds::RateProvenance::UserSupplied => "user-supplied",
            },
        );
    }
    let mut flagged = 0usize;
    for row in &rows {
        if row.below_resolution {
            flagged += 1;
        }
        table.push_row(vec![
            row.epsilon,
            row.p_hat,
            row.std_err,
            row.eps_log_p.unwrap_or(f64::NAN),
            row.ci.0,
            row.ci.1,
            flag(row.below_resolution),
            row.estimate.exits as f64,
            row.estimate.completed as f64,
        ])?;
    }
    out.write_table("ldp_scan.csv", &mut table)?;
    messages.push(format!(
        "{} noise sizes scanned; {flagged} below Monte Carlo resolution",
        rows.len()
    ));
    if let Some(rate) = &rate {
        messages.push(format!("candidate rate infimum {}", rate.value));
    }
    out.finish(false, messages)
}

/// Load a stored path (binary snapshot or measure CSV) as a measure path.
fn load_measure_path(path: &Path) -> Result<MeasurePath> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= SNAPSHOT_MAGIC.len() && &bytes[..SNAPSHOT_MAGIC.len()] == SNAPSHOT_MAGIC {
        return Snapshot::read_from(&mut bytes.as_slice())?.to_measure_path();
    }
    table_to_measure_path(&CsvTable::read_from(&mut bytes.as_slice())?)
}

fn rate_eval(
    cfg: &ExperimentConfig,
    ctx: &Ctx,
    cmd: &Command,
    path_file: &Path,
) -> Result<RunOutcome> {
    let path = load_measure_path(path_file)?;
    let result = rate_measure(&path, &ctx.model.kind)?;
    let mut out = OutputWriter::create(cmd, cfg)?;
    out.commit_identity()?;
    let mut table = CsvTable::new(
        "rate-eval/v1",
        &[
            "value",
            "admissible",
            "time_derivative_sup",
            "zero_mean_max",
            "dropped_mass_fraction",
        ],
    );
    table.set_meta("input", path_file.display().to_string());
    table.push_row(vec![
        result.value,
        flag(result.admissible),
        result.residuals.time_derivative_sup,
        result.residuals.zero_mean_max,
        result.residuals.dropped_mass_fraction,
    ])?;
    out.write_table("rate_eval.csv", &mut table)?;
    let messages = vec![if result.admissible {
        format!("rate value {}", result.value)
    } else {
        "path is inadmissible: rate is infinite".into()
    }];
    out.finish(false, messages)
}

fn skeleton(
    cfg: &ExperimentConfig,
    ctx: &Ctx,
    cmd: &Command,
    control_file: &Path,
) -> Result<RunOutcome> {
    let control = table_to_control(&CsvTable::load(control_file)?)?;
    if control.grid().as_ref() != ctx.grid.as_ref() {
        return Err(Error::InvalidConfig(
            "control file grid differs from the configured grid".into(),
        ));
    }
    let h = ControlFunction::new(ctx.grid.clone(), {
        // Rebind onto the configured grid Arc so downstream identity checks hold.
        (0..ctx.grid.nt).map(|n| control.row(n).to_vec()).collect()
    })?;
    let price = rate_spde(&h).value;
    let rec = skeleton_solve(&ctx.model, &h, &ctx.grid)?;

    let mut out = OutputWriter::create(cmd, cfg)?;
    out.commit_identity()?;
    let path = record_to_measure_path(&rec, MAX_CSV_SLICES)?;
    let mut table = measure_table(&path);
    table.set_meta("control_price", crate::io::format_float(price));
    table.set_meta("control_file", control_file.display().to_string());
    table.set_meta("model", ctx.model.kind.name());
    out.write_table("skeleton.csv", &mut table)?;
    let mut snap = Snapshot::from_record(&rec);
    snap.meta.insert("control_price".into(), crate::io::format_float(price));
    out.write_snapshot("skeleton.snap", &mut snap)?;
    let messages = vec![format!(
        "skeleton integrated over {} steps; control price {}",
        ctx.grid.nt, price
    )];
    out.finish(false, messages)
}

fn mean_size(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let ms = cfg.mean_size.as_ref().ok_or_else(|| {
        Error::InvalidConfig("a [mean_size] block is required for mean-size".into())
    })?;
    let mut times = ms.times.clone();
    times.sort_by(|a, b| a.partial_cmp(b).expect("times validated finite"));
    let replicas = ms.replicas.unwrap_or(cfg.run.replicas);
    let basis = ms.basis_size.unwrap_or(ctx.grid.nx).min(ctx.grid.nx);
    let targets: Vec<usize> = times.iter().map(|t| ctx.grid.steps_to(*t).max(1)).collect();
    let last_step = *targets.last().expect("times nonempty");

    let mut out = OutputWriter::create(cmd, cfg)?;
    let t_max = *times.last().expect("times nonempty");
    let constants = BoundConstants::constructive(
        &ctx.model,
        &ctx.grid,
        &ctx.weights,
        t_max,
        ctx.solver.epsilon,
        cfg.run.seed,
        &cfg.bound_overrides(),
    )?;
    out.manifest.record_constants(&constants);
    out.commit_identity()?;
    let mut messages = Vec::new();

    // One pass per replica: an observer captures the squared weighted norm
    // of the measure at each requested time.
    let per_replica: Vec<Result<Vec<f64>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let stream = NoiseStream::new(cfg.run.seed, replica);
            let mut captured = vec![f64::NAN; targets.len()];
            {
                let mut observer = |step: usize,
                                    time: f64,
                                    values: &[f64],
                                    grid: &SpaceTimeGrid|
                 -> Result<bool> {
                    for (slot, target) in targets.iter().enumerate() {
                        if *target == step {
                            let f =
                                Field::new(ctx.grid.clone(), time, values.to_vec())?;
                            let mu = cumulative_to_measure(&f)?;
                            captured[slot] =
                                measure_beta_norm_sq(&mu, &ctx.weights, basis)?;
                        }
                    }
                    let _ = grid;
                    Ok(false)
                };
                solve_path(
                    &ctx.model,
                    &ctx.grid,
                    &ctx.solver,
                    &stream,
                    Some(last_step),
                    Some(&mut observer),
                )?;
            }
            Ok(captured)
        })
        .collect();

    let mut ok_rows: Vec<Vec<f64>> = Vec::with_capacity(replicas);
    let mut failures = 0usize;
    for row in per_replica {
        match row {
            Ok(r) => ok_rows.push(r),
            Err(_) => failures += 1,
        }
    }
    if ok_rows.is_empty() {
        return Err(Error::Runtime("every replica failed".into()));
    }
    let n = ok_rows.len() as f64;

    let mut table = CsvTable::new(
        "mean-size/v1",
        &["t", "mean_norm_sq", "std_err", "replicas", "rhs", "rhs_vacuous", "within_bound"],
    );
    set_grid_meta(&mut table, &ctx.grid);
    set_constants_meta(&mut table, &constants);
    table.set_meta("basis_size", basis);
    table.set_meta("stream_algorithm", crate::noise::STREAM_ALGORITHM);

    let mut log_points: Vec<(f64, f64)> = Vec::new();
    for (slot, &t) in times.iter().enumerate() {
        let mean = ok_rows.iter().map(|r| r[slot]).sum::<f64>() / n;
        let var = ok_rows.iter().map(|r| (r[slot] - mean).powi(2)).sum::<f64>()
            / (n - 1.0).max(1.0);
        let se = (var / n).sqrt();
        let rhs = bounds::mean_size_rhs(t, ctx.solver.epsilon, &ctx.weights, &constants)?;
        let within = if rhs.vacuous { f64::NAN } else { flag(mean <= rhs.value + 2.0 * se) };
        table.push_row(vec![t, mean, se, n, rhs.value, flag(rhs.vacuous), within])?;
        if mean > 0.0 && t > 0.0 {
            log_points.push((t.ln(), mean.ln()));
        }
    }
    let growth = regression_slope(&log_points);
    table.set_meta("growth_exponent", crate::io::format_float(growth));
    out.write_table("mean_size.csv", &mut table)?;
    messages.push(format!(
        "{} times, {} replicas ({failures} failed); growth exponent {growth}",
        times.len(),
        ok_rows.len()
    ));
    out.finish(false, messages)
}

/// Least-squares slope through `(x, y)` points; NaN below two points.
fn regression_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

fn verify(cfg: &ExperimentConfig, ctx: &Ctx, cmd: &Command) -> Result<RunOutcome> {
    let mut checks: Vec<(String, bool)> = Vec::new();

    // Deterministic limit: the zero-noise stepper must track the exact
    // Gaussian-convolution heat flow.
    {
        let mut solver = ctx.solver.clone();
        solver.epsilon = 0.0;
        let ok = (|| -> Result<bool> {
            solver.validate(&ctx.grid)?;
            let stream = NoiseStream::new(0, 0);
            let steps = ctx.grid.steps_to(ctx.grid.t_end.min(0.25)).max(1);
            let rec = solve_path(&ctx.model, &ctx.grid, &solver, &stream, Some(steps), None)?;
            let t = *rec.times.last().expect("nonempty");
            let oracle =
                heat_flow_field(&ctx.model.initial_field(ctx.grid.clone())?, t)?;
            let last = rec.fields.last().expect("nonempty");
            let sup = last
                .iter()
                .zip(oracle.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            // Scheme error scales with dx^2; keep a floor for fine grids.
            let dx = ctx.grid.dx();
            Ok(sup < (2e-3f64).max(0.05 * dx * dx))
        })()
        .unwrap_or(false);
        checks.push(("zero-noise solver matches heat flow".into(), ok));
    }

    // Noise slices must be centered with the cell variance.
    {
        let ok = (|| -> Result<bool> {
            let stream = NoiseStream::new(123, 0);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut count = 0.0;
            for step in 0..64.min(ctx.grid.nt as u64) {
                let slice = crate::noise::sample_slice(&stream, &ctx.grid, step)?;
                for v in &slice.increments {
                    sum += v;
                    sum_sq += v * v;
                    count += 1.0;
                }
            }
            let cell = ctx.grid.da() * ctx.grid.dt();
            let mean = sum / count;
            let var = sum_sq / count - mean * mean;
            let mean_se = (cell / count).sqrt();
            Ok(mean.abs() < 4.0 * mean_se && (var / cell - 1.0).abs() < 0.2)
        })()
        .unwrap_or(false);
        checks.push(("noise increments have cell variance".into(), ok));
    }

    // The control price must scale exactly quadratically.
    {
        let ok = (|| -> Result<bool> {
            let h = ControlFunction::from_fn(ctx.grid.clone(), |t, a| 0.3 + t + 0.1 * a)?;
            let r1 = rate_spde(&h).value;
            let r2 = rate_spde(&h.scale(2.0)).value;
            let r3 = rate_spde(&h.scale(3.0)).value;
            Ok((r2 - 4.0 * r1).abs() <= 1e-12 * r1.max(1.0)
                && (r3 - 9.0 * r1).abs() <= 1e-12 * r1.max(1.0))
        })()
        .unwrap_or(false);
        checks.push(("control price is exactly quadratic".into(), ok));
    }

    // Persistence round trip: a snapshot and a CSV table must survive
    // write/read bit for bit.
    {
        let ok = (|| -> Result<bool> {
            let f = ctx.model.initial_field(ctx.grid.clone())?;
            let snap = Snapshot::new(
                ctx.grid.clone(),
                crate::io::FrameKind::NodeField,
                vec![0.0],
                vec![f.values().to_vec()],
            )?;
            let mut buf = Vec::new();
            snap.write_to(&mut buf)?;
            let back = Snapshot::read_from(&mut buf.as_slice())?;
            let mut table = crate::io::field_table(&f);
            table.set_meta("probe", "1");
            let mut text = Vec::new();
            table.write_to(&mut text)?;
            let table_back = CsvTable::read_from(&mut text.as_slice())?;
            Ok(back == snap && table_back == table)
        })()
        .unwrap_or(false);
        checks.push(("snapshot and csv round-trip".into(), ok));
    }

    // Stored outputs, if any, must still match their manifest checksums.
    let manifest_path = Path::new(&cfg.run.output_dir).join("manifest.json");
    if manifest_path.exists() {
        let stored = RunManifest::load(&manifest_path)?;
        for (name, recorded) in &stored.outputs {
            if !name.ends_with(".csv") {
                continue;
            }
            let path = Path::new(&cfg.run.output_dir).join(name);
            let ok = match csv_file_body_sha256(&path) {
                Ok(h) => &h == recorded,
                Err(_) => false,
            };
            checks.push((format!("stored output {name} matches its checksum"), ok));
        }
    }

    let mut out = OutputWriter::create(cmd, cfg)?;
    out.commit_identity()?;
    let mut table = CsvTable::new("verify/v1", &["check", "passed"]);
    for (i, (name, _)) in checks.iter().enumerate() {
        table.set_meta(&format!("check_{i}"), name);
    }
    for (i, (_, ok)) in checks.iter().enumerate() {
        table.push_row(vec![i as f64, flag(*ok)])?;
    }
    out.write_table("verify.csv", &mut table)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name.as_str())
        .collect();
    let mut messages: Vec<String> = checks
        .iter()
        .map(|(name, ok)| format!("{} {name}", if *ok { "ok " } else { "FAIL" }))
        .collect();
    if failed.is_empty() {
        messages.push(format!("all {} checks passed", checks.len()));
        out.finish(false, messages)
    } else {
        let outcome = out.finish(false, messages)?;
        drop(outcome);
        Err(Error::Runtime(format!("{} checks failed: {}", failed.len(), failed.join("; "))))
    }
}
