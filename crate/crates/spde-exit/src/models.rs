//! The two built-in noise coefficient structures and their closed-form
//! auxiliary integrals.
//!
//! Branching (`Sbm`): `G(a, y, u) = 1{0 <= a <= u} + 1{u <= a <= 0}`, so the
//! noise acting at level `u` is the white noise mass of the interval between
//! 0 and `u`. Resampling (`Fvp`): `G(a, y, u) = 1{a <= u} - u` on the unit
//! auxiliary interval. Both make the `a`-integrals exact: the squared
//! integral is `|u|` resp. `u(1-u)`, the cross integral at two levels is the
//! overlap `min` resp. `min - u1 u2`, and the squared Lipschitz integral is
//! exactly `|u1 - u2|` resp. `|u1 - u2| (1 - |u1 - u2|)`.
//!
//! A `Generic` variant takes an arbitrary coefficient and falls back to
//! midpoint quadrature on the auxiliary cells; it is the slow path and the
//! cross-check oracle for the closed forms.

use crate::error::{Error, Result};
use crate::field::{Field, MONOTONE_TOL};
use crate::gauss::normal_cdf;
use crate::grid::SpaceTimeGrid;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

pub type CoefficientFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ModelKind {
    Sbm,
    Fvp,
    Generic(CoefficientFn),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Sbm => write!(f, "Sbm"),
            ModelKind::Fvp => write!(f, "Fvp"),
            ModelKind::Generic(_) => write!(f, "Generic(..)"),
        }
    }
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Sbm => "sbm",
            ModelKind::Fvp => "fvp",
            ModelKind::Generic(_) => "generic",
        }
    }

    /// Pointwise coefficient value.
    pub fn g(&self, a: f64, y: f64, u: f64) -> f64 {
        match self {
            ModelKind::Sbm => {
                if (0.0..=u).contains(&a) || (u..=0.0).contains(&a) {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::Fvp => (if a <= u { 1.0 } else { 0.0 }) - u,
            ModelKind::Generic(f) => f(a, y, u),
        }
    }

    /// Exact average of the coefficient over one auxiliary cell. For the
    /// indicator models this is the overlap fraction of the cell with the
    /// active interval, which keeps the cross-level covariance exact whenever
    /// the two levels land in different cells.
    pub fn cell_avg_g(&self, a_lo: f64, a_hi: f64, y: f64, u: f64) -> f64 {
        let width = a_hi - a_lo;
        match self {
            ModelKind::Sbm => {
                let (lo, hi) = if u >= 0.0 { (0.0, u) } else { (u, 0.0) };
                overlap(lo, hi, a_lo, a_hi) / width
            }
            ModelKind::Fvp => overlap(f64::NEG_INFINITY, u, a_lo, a_hi) / width - u,
            ModelKind::Generic(f) => f(0.5 * (a_lo + a_hi), y, u),
        }
    }

    /// `int G(a, y, u)^2 da`.
    pub fn g_sq_integral(&self, grid: &SpaceTimeGrid, y: f64, u: f64) -> Result<f64> {
        match self {
            ModelKind::Sbm => Ok(u.abs()),
            ModelKind::Fvp => {
                check_unit_range(u)?;
                Ok(u * (1.0 - u))
            }
            ModelKind::Generic(f) => Ok(quadrature(grid, |a| f(a, y, u).powi(2))),
        }
    }

    /// `int G(a, y, u1) G(a, y, u2) da`.
    pub fn g_cross_integral(&self, grid: &SpaceTimeGrid, y: f64, u1: f64, u2: f64) -> Result<f64> {
        match self {
            ModelKind::Sbm => {
                if u1.signum() * u2.signum() < 0.0 {
                    Ok(0.0)
                } else {
                    Ok(u1.abs().min(u2.abs()))
                }
            }
            ModelKind::Fvp => {
                check_unit_range(u1)?;
                check_unit_range(u2)?;
                Ok(u1.min(u2) - u1 * u2)
            }
            ModelKind::Generic(f) => Ok(quadrature(grid, |a| f(a, y, u1) * f(a, y, u2))),
        }
    }

    /// `int |G(a, y, u1) - G(a, y, u2)|^2 da`. For the branching model this
    /// is exactly `|u1 - u2|`, the identity behind the Lipschitz condition.
    pub fn lipschitz_sq_integral(
        &self,
        grid: &SpaceTimeGrid,
        y: f64,
        u1: f64,
        u2: f64,
    ) -> Result<f64> {
        match self {
            ModelKind::Sbm => Ok((u1 - u2).abs()),
            ModelKind::Fvp => {
                check_unit_range(u1)?;
                check_unit_range(u2)?;
                let d = (u1 - u2).abs();
                Ok(d * (1.0 - d))
            }
            ModelKind::Generic(f) => {
                Ok(quadrature(grid, |a| (f(a, y, u1) - f(a, y, u2)).powi(2)))
            }
        }
    }

    /// Noise (or control) increment at level `u`: the prefix-sum view makes
    /// this O(1) for the indicator models and O(na) for generic coefficients.
    pub fn weighted_sum(&self, sums: &PrefixSum, y: f64, u: f64) -> f64 {
        match self {
            ModelKind::Sbm => {
                if u >= 0.0 {
                    sums.interval(0.0, u)
                } else {
                    sums.interval(u, 0.0)
                }
            }
            ModelKind::Fvp => sums.interval(sums.a_min, u) - u * sums.total(),
            ModelKind::Generic(f) => {
                let mut acc = 0.0;
                for j in 0..sums.cells() {
                    let mid = sums.a_min + (j as f64 + 0.5) * sums.da;
                    acc += f(mid, y, u) * sums.cell(j);
                }
                acc
            }
        }
    }

    /// Valid range of field values for condition sampling.
    fn sample_range(&self, grid: &SpaceTimeGrid) -> (f64, f64) {
        match self {
            ModelKind::Fvp => (0.0, 1.0),
            _ => (grid.a_min.min(0.0), grid.a_max),
        }
    }
}

fn overlap(lo1: f64, hi1: f64, lo2: f64, hi2: f64) -> f64 {
    (hi1.min(hi2) - lo1.max(lo2)).max(0.0)
}

fn check_unit_range(u: f64) -> Result<()> {
    if !(-MONOTONE_TOL..=1.0 + MONOTONE_TOL).contains(&u) {
        return Err(Error::Runtime(format!(
            "resampling model level {u:.6} outside [0, 1]"
        )));
    }
    Ok(())
}

fn quadrature(grid: &SpaceTimeGrid, f: impl Fn(f64) -> f64) -> f64 {
    let da = grid.da();
    (0..grid.na).map(|j| f(grid.a_mid(j)) * da).sum()
}

/// Prefix sums of per-cell weights over the auxiliary axis, with fractional
/// interval queries. `interval(lo, hi)` treats each weight as uniformly
/// spread over its cell, so partial cells contribute proportionally.
#[derive(Debug, Clone)]
pub struct PrefixSum {
    pub a_min: f64,
    pub da: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl PrefixSum {
    pub fn new(a_min: f64, da: f64, values: Vec<f64>) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &values {
            acc += v;
            prefix.push(acc);
        }
        PrefixSum { a_min, da, values, prefix }
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// Cumulative weight of `[a_min, a]` with a fractional last cell.
    fn cumulative(&self, a: f64) -> f64 {
        let n = self.values.len();
        let s = (a - self.a_min) / self.da;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= n as f64 {
            return self.total();
        }
        let j = (s.floor() as usize).min(n - 1);
        let frac = s - j as f64;
        self.prefix[j] + frac * self.values[j]
    }

    pub fn interval(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.cumulative(hi) - self.cumulative(lo)
    }
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// Gaussian distribution function with width `sigma0`, normalized so the
    /// truncated ends are exact (0 on the left, full mass on the right).
    GaussianProfile { sigma0: f64 },
    /// Arbitrary node values; validated against the model's range rules.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Initial total mass. Fixed at 1 for the resampling model.
    pub m0: f64,
    pub initial: InitialCondition,
}

impl ModelSpec {
    pub fn sbm(m0: f64, sigma0: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Sbm,
            m0,
            initial: InitialCondition::GaussianProfile { sigma0 },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fvp(sigma0: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Fvp,
            m0: 1.0,
            initial: InitialCondition::GaussianProfile { sigma0 },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m0 > 0.0) || !self.m0.is_finite() {
            return Err(Error::InvalidConfig(format!("initial mass m0 = {}", self.m0)));
        }
        if matches!(self.kind, ModelKind::Fvp) && (self.m0 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(
                "resampling model carries total mass 1".into(),
            ));
        }
        if let InitialCondition::GaussianProfile { sigma0 } = self.initial {
            if !(sigma0 > 0.0) || !sigma0.is_finite() {
                return Err(Error::InvalidConfig(format!("sigma0 = {sigma0}")));
            }
        }
        Ok(())
    }

    /// Grid compatibility: the resampling model needs the unit auxiliary
    /// interval; the branching model needs the active interval `[0, u]` to
    /// fit in the auxiliary range.
    pub fn validate_grid(&self, grid: &SpaceTimeGrid) -> Result<()> {
        match self.kind {
            ModelKind::Fvp => {
                if grid.a_min != 0.0 || grid.a_max != 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "resampling model needs auxiliary range [0, 1], got [{}, {}]",
                        grid.a_min, grid.a_max
                    )));
                }
            }
            ModelKind::Sbm => {
                if grid.a_min > 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "branching model needs a_min <= 0, got {}",
                        grid.a_min
                    )));
                }
                if grid.a_max <= self.m0 {
                    return Err(Error::InvalidConfig(format!(
                        "a_max = {} does not exceed the initial mass {}",
                        grid.a_max, self.m0
                    )));
                }
            }
            ModelKind::Generic(_) => {}
        }
        Ok(())
    }

    /// Initial cumulative field on the grid.
    pub fn initial_field(&self, grid: Arc<SpaceTimeGrid>) -> Result<Field> {
        self.validate()?;
        self.validate_grid(&grid)?;
        let values = match &self.initial {
            InitialCondition::GaussianProfile { sigma0 } => {
                let lo = normal_cdf(grid.x_min / sigma0);
                let hi = normal_cdf(grid.x_max / sigma0);
                let scale = self.m0 / (hi - lo);
                grid.nodes().map(|y| (normal_cdf(y / sigma0) - lo) * scale).collect()
            }
            InitialCondition::Custom(values) => values.clone(),
        };
        let field = Field::new(grid, 0.0, values)?;
        match self.kind {
            ModelKind::Sbm | ModelKind::Fvp => {
                for (i, pair) in field.values().windows(2).enumerate() {
                    if pair[1] - pair[0] < -MONOTONE_TOL {
                        return Err(Error::NotMonotone {
                            index: i + 1,
                            drop: pair[0] - pair[1],
                            tol: MONOTONE_TOL,
                        });
                    }
                }
                if matches!(self.kind, ModelKind::Fvp) {
                    let last = field.values()[field.grid().nx];
                    if field.values()[0].abs() > 1e-9 || (last - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidConfig(
                            "resampling initial condition must run from 0 to 1".into(),
                        ));
                    }
                }
            }
            ModelKind::Generic(_) => {}
        }
        Ok(field)
    }
}

/// Empirical coefficient conditions over random level pairs.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// Smallest K with `int |G(u1) - G(u2)|^2 da <= K |u1 - u2|` over the samples.
    pub lipschitz_k: f64,
    /// Smallest K with `int G(u)^2 da <= K (1 + u^2)` over the samples.
    pub growth_k: f64,
    pub samples: usize,
}

/// Sample levels uniformly from the model's valid range and report the
/// empirical condition constants.
pub fn check_conditions(
    model: &ModelSpec,
    grid: &SpaceTimeGrid,
    samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = model.kind.sample_range(grid);
    let mut lipschitz_k = 0.0f64;
    let mut growth_k = 0.0f64;
    for _ in 0..samples {
        let y = rng.gen_range(grid.x_min..=grid.x_max);
        let u1 = rng.gen_range(lo..=hi);
        let u2 = rng.gen_range(lo..=hi);
        let gap = (u1 - u2).abs();
        if gap > 1e-12 {
            let l = model.kind.lipschitz_sq_integral(grid, y, u1, u2)?;
            lipschitz_k = lipschitz_k.max(l / gap);
        }
        let gsq = model.kind.g_sq_integral(grid, y, u1)?;
        growth_k = growth_k.max(gsq / (1.0 + u1 * u1));
    }
    Ok(ConditionReport { lipschitz_k, growth_k, samples })
}
