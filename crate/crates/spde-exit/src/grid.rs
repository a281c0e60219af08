//! Discretization of the space-time-auxiliary box `[x_min, x_max] x [0, t_end] x [a_min, a_max]`
//! and the exponential weight family used by every norm in the crate.
//!
//! Spatial nodes are `x_min + i*dx` for `i = 0..=nx`; auxiliary cells and time
//! steps are half-open intervals of width `da` and `dt`. Densities live on the
//! `nx` spatial cells, cumulative fields on the `nx + 1` nodes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub na: usize,
    pub t_end: f64,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        nx: usize,
        a_min: f64,
        a_max: f64,
        na: usize,
        t_end: f64,
        nt: usize,
    ) -> Result<Self> {
        let g = SpaceTimeGrid { x_min, x_max, nx, a_min, a_max, na, t_end, nt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        for (name, v) in [
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("a_min", self.a_min),
            ("a_max", self.a_max),
            ("t_end", self.t_end),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
        }
        if !(self.x_min < 0.0 && 0.0 < self.x_max) {
            return bad(format!(
                "domain must straddle the origin, got [{}, {}]",
                self.x_min, self.x_max
            ));
        }
        if self.nx < 2 {
            return bad(format!("nx = {} (need at least 2 cells)", self.nx));
        }
        if self.na < 1 || !(self.a_min < self.a_max) {
            return bad(format!(
                "auxiliary range [{}, {}] with na = {}",
                self.a_min, self.a_max, self.na
            ));
        }
        if self.nt < 1 || !(self.t_end > 0.0) {
            return bad(format!("time axis t_end = {}, nt = {}", self.t_end, self.nt));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn da(&self) -> f64 {
        (self.a_max - self.a_min) / self.na as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    /// Spatial node `i` for `i` in `0..=nx`.
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Midpoint of auxiliary cell `j` for `j` in `0..na`.
    pub fn a_mid(&self, j: usize) -> f64 {
        self.a_min + (j as f64 + 0.5) * self.da()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.nx).map(move |i| self.node(i))
    }

    /// Number of time steps needed to reach `t` (rounded to the step grid).
    pub fn steps_to(&self, t: f64) -> usize {
        ((t / self.dt()).round() as usize).min(self.nt)
    }
}

/// Exponents of the weight family `exp(-beta |y|)`. The strict ordering
/// `0 < beta0 < beta1 < beta` keeps every weight-ratio constant in the bound
/// machinery equal to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub beta: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl WeightParams {
    pub fn new(beta: f64, beta0: f64, beta1: f64) -> Result<Self> {
        if !(beta.is_finite() && beta0.is_finite() && beta1.is_finite()) {
            return Err(Error::InvalidWeights("weights must be finite".into()));
        }
        if !(0.0 < beta0 && beta0 < beta1 && beta1 < beta) {
            return Err(Error::InvalidWeights(format!(
                "need 0 < beta0 < beta1 < beta, got beta0 = {beta0}, beta1 = {beta1}, beta = {beta}"
            )));
        }
        Ok(WeightParams { beta, beta0, beta1 })
    }

    /// `exp(-beta |y|)`.
    pub fn weight(&self, y: f64) -> f64 {
        (-self.beta * y.abs()).exp()
    }

    /// Weight-ratio constants `sup_y exp(-(beta - beta1)|y|)` and friends.
    /// With the enforced ordering each supremum sits at `y = 0` and equals 1.
    pub fn c3(&self) -> f64 {
        1.0
    }

    pub fn c4(&self) -> f64 {
        1.0
    }

    pub fn c5(&self) -> f64 {
        1.0
    }
}
