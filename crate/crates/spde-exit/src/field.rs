//! Cumulative fields and their measure-space counterparts.
//!
//! A `Field` holds node values of the cumulative function `u(y)`; the measure
//! it encodes has cell densities `rho_j = (u_{j+1} - u_j) / dx`, so the prefix
//! sum of `rho * dx` reproduces `u` exactly and total mass telescopes to
//! `u(x_max) - u(x_min)` with no quadrature error.

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use std::sync::Arc;

/// Slack allowed before a decreasing cumulative step counts as a monotonicity
/// violation. Covers rounding from the projected solver updates.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<SpaceTimeGrid>,
    time: f64,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<SpaceTimeGrid>, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx + 1 {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.nx + 1
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "field value", index: i });
            }
        }
        Ok(Field { grid, time, values })
    }

    /// Sample a function at the grid nodes.
    pub fn from_fn(grid: Arc<SpaceTimeGrid>, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.nodes().map(f).collect();
        Field::new(grid, time, values)
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation of the node values at `y`.
    pub fn interpolate(&self, y: f64) -> Result<f64> {
        interpolate_values(&self.values, &self.grid, y)
    }

    /// Total mass of the encoded measure.
    pub fn mass(&self) -> f64 {
        self.values[self.grid.nx] - self.values[0]
    }
}

/// One time slice of a measure path: densities on the `nx` spatial cells.
#[derive(Debug, Clone)]
pub struct MeasureSlice {
    grid: Arc<SpaceTimeGrid>,
    time: f64,
    density: Vec<f64>,
}

impl MeasureSlice {
    pub fn new(grid: Arc<SpaceTimeGrid>, time: f64, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.nx {
            return Err(Error::InvalidGrid(format!(
                "density has {} values for {} cells",
                density.len(),
                grid.nx
            )));
        }
        for (i, v) in density.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "density value", index: i });
            }
            if *v < 0.0 {
                return Err(Error::Runtime(format!("negative density {v:.3e} in cell {i}")));
            }
        }
        Ok(MeasureSlice { grid, time, density })
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        let dx = self.grid.dx();
        self.density.iter().sum::<f64>() * dx
    }

    /// `int f d(mu)` with the density piecewise constant on cells and `f`
    /// averaged over each cell's endpoints (trapezoid in the node values).
    pub fn integrate_against(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        let dx = g.dx();
        let mut acc = 0.0;
        let mut left = f(g.node(0));
        for (j, rho) in self.density.iter().enumerate() {
            let right = f(g.node(j + 1));
            acc += rho * 0.5 * (left + right) * dx;
            left = right;
        }
        acc
    }
}

/// Time-indexed densities sharing one grid.
#[derive(Debug, Clone)]
pub struct MeasurePath {
    grid: Arc<SpaceTimeGrid>,
    times: Vec<f64>,
    densities: Vec<Vec<f64>>,
}

impl MeasurePath {
    pub fn new(grid: Arc<SpaceTimeGrid>, times: Vec<f64>, densities: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != densities.len() {
            return Err(Error::InvalidGrid(format!(
                "{} times for {} density slices",
                times.len(),
                densities.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidGrid("measure path needs at least two time slices".into()));
        }
        for pair in times.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidGrid("path times must strictly increase".into()));
            }
        }
        for (n, d) in densities.iter().enumerate() {
            if d.len() != grid.nx {
                return Err(Error::InvalidGrid(format!(
                    "slice {n} has {} values for {} cells",
                    d.len(),
                    grid.nx
                )));
            }
            for (i, v) in d.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { what: "path density", index: n * grid.nx + i });
                }
            }
        }
        Ok(MeasurePath { grid, times, densities })
    }

    pub fn from_slices(slices: &[MeasureSlice]) -> Result<Self> {
        let grid = slices
            .first()
            .ok_or_else(|| Error::InvalidGrid("empty measure path".into()))?
            .grid
            .clone();
        if slices.iter().any(|s| s.grid.as_ref() != grid.as_ref()) {
            return Err(Error::GridMismatch);
        }
        MeasurePath::new(
            grid,
            slices.iter().map(|s| s.time).collect(),
            slices.iter().map(|s| s.density.clone()).collect(),
        )
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn densities(&self) -> &[Vec<f64>] {
        &self.densities
    }

    pub fn slice(&self, n: usize) -> MeasureSlice {
        MeasureSlice {
            grid: self.grid.clone(),
            time: self.times[n],
            density: self.densities[n].clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Linear interpolation of raw node values at `y`. Slice form of
/// [`Field::interpolate`] for callers without a `Field` in hand.
pub fn interpolate_values(values: &[f64], grid: &SpaceTimeGrid, y: f64) -> Result<f64> {
    if y < grid.x_min || y > grid.x_max {
        return Err(Error::InvalidGrid(format!(
            "point {y} outside domain [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    let s = ((y - grid.x_min) / grid.dx()).min(grid.nx as f64 - 1e-12).max(0.0);
    let i = s.floor() as usize;
    let frac = s - i as f64;
    Ok(values[i] * (1.0 - frac) + values[i + 1] * frac)
}

/// Differentiate a cumulative field into cell densities. Decreasing steps
/// within `MONOTONE_TOL` are clamped to zero; larger drops are an error.
pub fn cumulative_to_measure(field: &Field) -> Result<MeasureSlice> {
    let g = field.grid.clone();
    let dx = g.dx();
    let mut density = Vec::with_capacity(g.nx);
    for j in 0..g.nx {
        let step = field.values[j + 1] - field.values[j];
        if step < -MONOTONE_TOL {
            return Err(Error::NotMonotone { index: j + 1, drop: -step, tol: MONOTONE_TOL });
        }
        density.push(step.max(0.0) / dx);
    }
    MeasureSlice::new(g, field.time, density)
}

/// Inverse of `cumulative_to_measure`: prefix-sum the densities back into a
/// cumulative field anchored at `base` on the left end.
pub fn measure_to_cumulative(slice: &MeasureSlice, base: f64) -> Result<Field> {
    let g = slice.grid.clone();
    let dx = g.dx();
    let mut values = Vec::with_capacity(g.nx + 1);
    let mut acc = base;
    values.push(acc);
    for rho in &slice.density {
        acc += rho * dx;
        values.push(acc);
    }
    Field::new(g, slice.time, values)
}
