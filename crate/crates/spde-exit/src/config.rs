//! Sectioned plain-text experiment configuration.
//!
//! A config file is TOML with blocks `[model]`, `[grid]`, `[weights]`,
//! `[solver]`, `[exit]`, `[bounds]`, `[run]`, and optional `[sweep]`,
//! `[scan]`, `[mean_size]` blocks for the table-producing commands. Files
//! are the reproducibility unit: the canonical re-serialization of a parsed
//! config is what gets hashed into the run manifest, so formatting and key
//! order in the source file never affect provenance.
//!
//! Validation is all-at-once: `build` checks every cross-field constraint
//! (weight ordering, `delta0 < r`, deadline within the time axis, scheme
//! stability, replica counts) and reports the full list of violations in
//! one error, so a bad sweep file surfaces every problem in a single run.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::ConstantOverrides;
use crate::error::{Error, Result};
use crate::exit::{ExitMode, ExitSpec};
use crate::grid::{SpaceTimeGrid, WeightParams};
use crate::models::ModelSpec;
use crate::solver::{Projection, Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Sbm,
    Fvp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelName,
    /// Initial total mass; ignored by the resampling model (always 1).
    #[serde(default = "one")]
    pub mass: f64,
    /// Width of the Gaussian initial profile.
    #[serde(default = "one")]
    pub sigma0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub na: usize,
    pub t_end: f64,
    pub nt: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsBlock {
    pub beta: f64,
    pub beta0: f64,
    pub beta1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub epsilon: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_projection")]
    pub projection: Projection,
    #[serde(default = "default_stability_limit")]
    pub stability_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitBlock {
    pub r: f64,
    pub delta0: f64,
    #[serde(alias = "t")]
    pub t_deadline: f64,
    pub mode: ExitMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    /// Lower end of the time window the exit bound optimizes over.
    pub t_min: Option<f64>,
    /// Slack subtracted from the rate infimum in exponential bounds.
    pub delta: Option<f64>,
    /// User-supplied rate infimum; when absent the candidate scan supplies
    /// an evaluated one.
    pub rate_inf: Option<f64>,
    #[serde(default)]
    pub overrides: ConstantOverrides,
}

impl Default for BoundsBlock {
    fn default() -> Self {
        BoundsBlock {
            k_max: default_k_max(),
            t_min: None,
            delta: None,
            rate_inf: None,
            overrides: ConstantOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default)]
    pub seed: u64,
    pub replicas: usize,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Record every k-th solver step.
    #[serde(default = "one_usize")]
    pub stride: usize,
}

/// Parameter grids crossed by the sweep command; empty lists fall back to
/// the single value from the owning block.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub t: Vec<f64>,
}

/// Noise ladder for the scaling scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub eps_list: Vec<f64>,
    pub replicas: Option<usize>,
    /// Drift values scanned for the candidate rate infimum.
    #[serde(default)]
    pub drift_grid: Vec<f64>,
}

/// Observation times for the population-size table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSizeBlock {
    pub times: Vec<f64>,
    pub basis_size: Option<usize>,
    pub replicas: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_scheme() -> Scheme {
    Scheme::ExplicitEuler
}
fn default_projection() -> Projection {
    Projection::MonotoneClamp
}
fn default_stability_limit() -> f64 {
    0.25
}
fn default_k_max() -> u32 {
    64
}
fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub weights: WeightsBlock,
    pub solver: SolverBlock,
    pub exit: Option<ExitBlock>,
    #[serde(default)]
    pub bounds: BoundsBlock,
    pub run: RunBlock,
    pub sweep: Option<SweepBlock>,
    pub scan: Option<ScanBlock>,
    pub mean_size: Option<MeanSizeBlock>,
}

/// Typed objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub grid: Arc<SpaceTimeGrid>,
    pub weights: WeightParams,
    pub model: ModelSpec,
    pub solver: SolverConfig,
    pub exit: Option<ExitSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    /// Canonical re-serialization; independent of source formatting.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Hash of the canonical form; the manifest's config identity.
    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical().as_bytes());
        format!("{:x}", hasher.finalize())
    }

    /// Constant overrides with the block-level `t_min`/`delta` folded in.
    pub fn bound_overrides(&self) -> ConstantOverrides {
        let mut ov = self.bounds.overrides.clone();
        if self.bounds.t_min.is_some() {
            ov.t_min = self.bounds.t_min;
        }
        if self.bounds.delta.is_some() {
            ov.delta = self.bounds.delta;
        }
        ov
    }

    /// Validate every cross-field constraint and build the typed parts.
    /// All violations are reported together.
    pub fn build(&self) -> Result<Experiment> {
        let mut problems: Vec<String> = Vec::new();
        let note = |r: &mut Vec<String>, e: Error| r.push(e.to_string());

        let grid = match SpaceTimeGrid::new(
            self.grid.x_min,
            self.grid.x_max,
            self.grid.nx,
            self.grid.a_min,
            self.grid.a_max,
            self.grid.na,
            self.grid.t_end,
            self.grid.nt,
        ) {
            Ok(g) => Some(Arc::new(g)),
            Err(e) => {
                note(&mut problems, e);
                None
            }
        };

        let weights =
            match WeightParams::new(self.weights.beta, self.weights.beta0, self.weights.beta1) {
                Ok(w) => Some(w),
                Err(e) => {
                    note(&mut problems, e);
                    None
                }
            };

        let model = match self.model.kind {
            ModelName::Sbm => ModelSpec::sbm(self.model.mass, self.model.sigma0),
            ModelName::Fvp => ModelSpec::fvp(self.model.sigma0),
        };
        let model = match model {
            Ok(m) => {
                if let Some(g) = &grid {
                    if let Err(e) = m.validate_grid(g) {
                        note(&mut problems, e);
                    }
                }
                Some(m)
            }
            Err(e) => {
                note(&mut problems, e);
                None
            }
        };

        let solver = SolverConfig {
            scheme: self.solver.scheme,
            projection: self.solver.projection,
            epsilon: self.solver.epsilon,
            stability_limit: self.solver.stability_limit,
            record_stride: self.run.stride,
        };
        if let Some(g) = &grid {
            if let Err(e) = solver.validate(g) {
                note(&mut problems, e);
            }
        }

        let exit = self.exit.as_ref().map(|e| ExitSpec {
            r: e.r,
            delta0: e.delta0,
            t_deadline: e.t_deadline,
            mode: e.mode,
        });
        if let (Some(spec), Some(g)) = (&exit, &grid) {
            if let Err(e) = spec.validate(g) {
                note(&mut problems, e);
            }
        }

        if self.run.replicas == 0 {
            problems.push("run.replicas must be at least 1".into());
        }
        if self.run.stride == 0 {
            problems.push("run.stride must be at least 1".into());
        }
        if self.bounds.k_max < 4 {
            problems.push(format!("bounds.k_max = {} (need at least 4)", self.bounds.k_max));
        }
        if let Some(t_min) = self.bounds.t_min {
            if !(t_min > 0.0) {
                problems.push(format!("bounds.t_min = {t_min} (need > 0)"));
            }
        }
        if let Some(delta) = self.bounds.delta {
            if !(delta > 0.0) {
                problems.push(format!("bounds.delta = {delta} (need > 0)"));
            }
        }
        if let Some(rate) = self.bounds.rate_inf {
            if !(rate >= 0.0) || !rate.is_finite() {
                problems.push(format!("bounds.rate_inf = {rate} (need finite, nonnegative)"));
            }
        }
        if let Some(scan) = &self.scan {
            if scan.eps_list.is_empty() {
                problems.push("scan.eps_list is empty".into());
            }
            if scan.eps_list.iter().any(|e| !(*e > 0.0)) {
                problems.push("scan.eps_list entries must be positive".into());
            }
            if scan.eps_list.windows(2).any(|w| w[1] >= w[0]) {
                problems.push("scan.eps_list must decrease strictly".into());
            }
            if scan.replicas == Some(0) {
                problems.push("scan.replicas must be at least 1".into());
            }
        }
        if let Some(ms) = &self.mean_size {
            if ms.times.is_empty() {
                problems.push("mean_size.times is empty".into());
            }
            if ms.times.iter().any(|t| !(*t > 0.0) || *t > self.grid.t_end) {
                problems.push("mean_size.times must lie in (0, t_end]".into());
            }
            if ms.replicas == Some(0) {
                problems.push("mean_size.replicas must be at least 1".into());
            }
        }
        if let Some(sweep) = &self.sweep {
            for (name, list) in [("r", &sweep.r), ("epsilon", &sweep.epsilon), ("t", &sweep.t)] {
                if list.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    problems.push(format!("sweep.{name} entries must be positive"));
                }
            }
            if sweep.t.iter().any(|t| *t > self.grid.t_end) {
                problems.push("sweep.t entries must not exceed grid.t_end".into());
            }
        }

        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems.join("; ")));
        }
        Ok(Experiment {
            grid: grid.expect("validated above"),
            weights: weights.expect("validated above"),
            model: model.expect("validated above"),
            solver,
            exit,
        })
    }
}
