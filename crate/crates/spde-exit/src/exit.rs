//! Exit-time detectors and Monte Carlo exit-probability estimation.
//!
//! A detector is a predicate on the current profile; the driver polls it
//! after every completed step, so an exit can fire from step 1 onward and
//! the initial condition itself never counts as an exit. Three detectors are
//! provided: weighted-norm exit (`||u_t||_beta >= r`), population exit (at
//! least unit mass outside `(-r, r)`), and hitting (`||u_t||_beta < delta0`,
//! used for return-to-small-ball questions).
//!
//! `mc_exit` runs independent replicas in parallel. Replica `i` draws its
//! noise from the stream keyed by `(seed, i)`, so results are reproducible
//! bit for bit and independent of thread scheduling; reduction walks the
//! replica-ordered outcome vector.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::interpolate_values;
use crate::grid::{SpaceTimeGrid, WeightParams};
use crate::models::ModelSpec;
use crate::noise::NoiseStream;
use crate::solver::{solve_path, SolverConfig, StepObserver};
use crate::weighted::beta_sup;

/// Exit when the weighted sup-norm reaches the level `r`.
#[derive(Debug, Clone, Copy)]
pub struct NormExit {
    pub r: f64,
    pub w: WeightParams,
}

/// Exit when the mass outside the open interval `(-r, r)` reaches one.
///
/// For a cumulative profile the outside mass is
/// `(u(x_max) - u(r)) + (u(-r) - u(x_min))`, with `u` evaluated by linear
/// interpolation between nodes.
#[derive(Debug, Clone, Copy)]
pub struct PopulationExit {
    pub r: f64,
}

/// Fire when the weighted sup-norm drops strictly below `delta0`.
#[derive(Debug, Clone, Copy)]
pub struct HittingEvent {
    pub delta0: f64,
    pub w: WeightParams,
}

/// A stopping condition polled on the post-step profile.
pub trait ExitDetector: Send + Sync {
    /// Human-readable tag used in reports and output headers.
    fn name(&self) -> &'static str;

    /// Check parameters against the grid before any stepping starts.
    fn validate(&self, grid: &SpaceTimeGrid) -> Result<()>;

    /// Whether the profile `values` satisfies the stopping condition.
    fn triggered(&self, values: &[f64], grid: &SpaceTimeGrid) -> Result<bool>;
}

impl ExitDetector for NormExit {
    fn name(&self) -> &'static str {
        "norm-exit"
    }

    fn validate(&self, _grid: &SpaceTimeGrid) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "norm exit level r = {} must be positive and finite",
                self.r
            )));
        }
        Ok(())
    }

    fn triggered(&self, values: &[f64], grid: &SpaceTimeGrid) -> Result<bool> {
        Ok(beta_sup(values, grid, &self.w)? >= self.r)
    }
}

impl ExitDetector for PopulationExit {
    fn name(&self) -> &'static str {
        "population-exit"
    }

    fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        let reach = (-grid.x_min).min(grid.x_max);
        if !(self.r > 0.0) || self.r >= reach {
            return Err(Error::InvalidConfig(format!(
                "population radius r = {} must lie in (0, {reach}) so both \
                 +-r are interior to the domain",
                self.r
            )));
        }
        Ok(())
    }

    fn triggered(&self, values: &[f64], grid: &SpaceTimeGrid) -> Result<bool> {
        let right = values[grid.nx] - interpolate_values(values, grid, self.r)?;
        let left = interpolate_values(values, grid, -self.r)? - values[0];
        Ok(left + right >= 1.0)
    }
}

impl ExitDetector for HittingEvent {
    fn name(&self) -> &'static str {
        "hitting"
    }

    fn validate(&self, _grid: &SpaceTimeGrid) -> Result<()> {
        if !(self.delta0 > 0.0) || !self.delta0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "hitting level delta0 = {} must be positive and finite",
                self.delta0
            )));
        }
        Ok(())
    }

    fn triggered(&self, values: &[f64], grid: &SpaceTimeGrid) -> Result<bool> {
        Ok(beta_sup(values, grid, &self.w)? < self.delta0)
    }
}

/// Which stopping condition an experiment watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitMode {
    NormExit,
    PopulationExit,
    Hitting,
}

/// Declarative exit-problem description: domain half-width `r`, attraction
/// neighborhood `delta0`, deadline, and the watched condition.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ExitSpec {
    pub r: f64,
    pub delta0: f64,
    pub t_deadline: f64,
    pub mode: ExitMode,
}

impl ExitSpec {
    pub fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0 < self.r) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < delta0 ({}) < r ({})",
                self.delta0, self.r
            )));
        }
        if !(self.t_deadline > 0.0) || self.t_deadline > grid.t_end + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "deadline {} must lie in (0, t_end = {}]",
                self.t_deadline, grid.t_end
            )));
        }
        Ok(())
    }

    /// Detector for the watched condition.
    pub fn detector(&self, w: &WeightParams) -> Box<dyn ExitDetector> {
        match self.mode {
            ExitMode::NormExit => Box::new(NormExit { r: self.r, w: *w }),
            ExitMode::PopulationExit => Box::new(PopulationExit { r: self.r }),
            ExitMode::Hitting => Box::new(HittingEvent { delta0: self.delta0, w: *w }),
        }
    }
}

/// [`mc_exit`] driven by a declarative spec.
pub fn mc_exit_spec(
    spec: &ExitSpec,
    model: &ModelSpec,
    grid: &Arc<SpaceTimeGrid>,
    w: &WeightParams,
    cfg: &SolverConfig,
    replicas: usize,
    seed: u64,
) -> Result<ExitEstimate> {
    spec.validate(grid)?;
    let det = spec.detector(w);
    mc_exit(model, grid, cfg, det.as_ref(), spec.t_deadline, replicas, seed)
}

/// Adapter that runs a detector as a step observer and records the hit.
pub struct DetectorObserver<'a> {
    detector: &'a dyn ExitDetector,
    /// `(step, time)` of the first trigger, if any.
    pub hit: Option<(usize, f64)>,
}

impl<'a> DetectorObserver<'a> {
    pub fn new(detector: &'a dyn ExitDetector) -> Self {
        Self { detector, hit: None }
    }
}

impl StepObserver for DetectorObserver<'_> {
    fn observe(
        &mut self,
        step: usize,
        time: f64,
        values: &[f64],
        grid: &SpaceTimeGrid,
    ) -> Result<bool> {
        if self.detector.triggered(values, grid)? {
            self.hit = Some((step, time));
            return Ok(true);
        }
        Ok(false)
    }
}

/// One replica's outcome inside the Monte Carlo driver.
#[derive(Debug, Clone)]
enum ReplicaOutcome {
    Exited(f64),
    Survived,
    Failed(String),
}

/// Monte Carlo estimate of an exit probability before a deadline.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExitEstimate {
    pub detector: String,
    /// Replicas requested.
    pub replicas: usize,
    /// Replicas that finished without a solver error.
    pub completed: usize,
    /// Replicas whose path failed (non-finite values, range violations, ...).
    pub error_count: usize,
    pub exits: usize,
    /// Exit fraction among completed replicas.
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub std_err: f64,
    /// Mean of `min(tau, T)`: survivors are censored at the deadline.
    pub mean_tau_censored: f64,
    pub censor_fraction: f64,
    pub deadline: f64,
    pub seed: u64,
}

/// Estimate the probability of exiting before `deadline` over independent
/// replicas. Replica `i` uses the noise stream `(seed, i)`; the parallel map
/// collects outcomes in replica order, so the estimate is deterministic for
/// a fixed seed regardless of thread count.
pub fn mc_exit(
    model: &ModelSpec,
    grid: &Arc<SpaceTimeGrid>,
    cfg: &SolverConfig,
    detector: &dyn ExitDetector,
    deadline: f64,
    replicas: usize,
    seed: u64,
) -> Result<ExitEstimate> {
    detector.validate(grid)?;
    cfg.validate(grid)?;
    model.validate_grid(grid)?;
    if replicas == 0 {
        return Err(Error::InvalidConfig("replica count must be positive".into()));
    }
    if !(deadline > 0.0) || deadline > grid.t_end + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "deadline {deadline} must lie in (0, t_end = {}]",
            grid.t_end
        )));
    }
    let steps = grid.steps_to(deadline).max(1);

    let outcomes: Vec<ReplicaOutcome> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let stream = NoiseStream::new(seed, replica);
            let mut obs = DetectorObserver::new(detector);
            match solve_path(model, grid, cfg, &stream, Some(steps), Some(&mut obs)) {
                Ok(_) => match obs.hit {
                    Some((_, t)) => ReplicaOutcome::Exited(t),
                    None => ReplicaOutcome::Survived,
                },
                Err(e) => ReplicaOutcome::Failed(e.to_string()),
            }
        })
        .collect();

    let mut exits = 0usize;
    let mut errors = 0usize;
    let mut tau_sum = 0.0;
    let mut completed = 0usize;
    for out in &outcomes {
        match out {
            ReplicaOutcome::Exited(t) => {
                exits += 1;
                completed += 1;
                tau_sum += t.min(deadline);
            }
            ReplicaOutcome::Survived => {
                completed += 1;
                tau_sum += deadline;
            }
            ReplicaOutcome::Failed(_) => errors += 1,
        }
    }
    if completed == 0 {
        let msg = outcomes
            .iter()
            .find_map(|o| match o {
                ReplicaOutcome::Failed(m) => Some(m.clone()),
                _ => None,
            })
            .unwrap_or_default();
        return Err(Error::Runtime(format!("all {replicas} replicas failed: {msg}")));
    }

    let n = completed as f64;
    let p_hat = exits as f64 / n;
    Ok(ExitEstimate {
        detector: detector.name().to_string(),
        replicas,
        completed,
        error_count: errors,
        exits,
        p_hat,
        std_err: (p_hat * (1.0 - p_hat) / n).sqrt(),
        mean_tau_censored: tau_sum / n,
        censor_fraction: (completed - exits) as f64 / n,
        deadline,
        seed,
    })
}
