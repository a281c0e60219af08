//! Weighted norms and pairings on fields and measures.
//!
//! The field norm is `sup_y exp(-beta |y|) |f(y)|` over grid nodes. Measures
//! are paired against functions through the weighted integral
//! `int exp(-beta |y|) |f(y)| mu(dy)`, and their squared norm sums the squares
//! of pairings against an L2-orthonormal basis of cell indicator functions
//! `f_j = 1_{cell j} / sqrt(dx)`.

use crate::error::{Error, Result};
use crate::field::{Field, MeasureSlice};
use crate::grid::WeightParams;

/// `sup` over nodes of `exp(-beta |y|) |f(y)|`.
pub fn beta_norm(field: &Field, w: &WeightParams) -> Result<f64> {
    beta_sup(field.values(), field.grid(), w)
}

/// Slice form of [`beta_norm`] for callers that hold raw node values.
pub fn beta_sup(values: &[f64], grid: &crate::grid::SpaceTimeGrid, w: &WeightParams) -> Result<f64> {
    let mut best = 0.0f64;
    for (i, v) in values.iter().enumerate() {
        let x = w.weight(grid.node(i)) * v.abs();
        if !x.is_finite() {
            return Err(Error::NonFinite { what: "weighted field value", index: i });
        }
        best = best.max(x);
    }
    Ok(best)
}

/// Weighted pairing of a measure with a function.
///
/// The default reading integrates `exp(-beta |y|) |f(y)|` against the measure
/// (trapezoid in the node values of the integrand, density constant per cell).
/// The literal reading multiplies the sup-norm factor by total mass instead:
/// `sup_y exp(-beta |y|)|f(y)| * mu(R)`. The two agree for measures
/// concentrated where the weighted integrand is flat and differ otherwise;
/// both are kept so either convention can be exercised.
pub fn measure_beta_inner(
    mu: &MeasureSlice,
    f: impl Fn(f64) -> f64,
    w: &WeightParams,
    literal: bool,
) -> Result<f64> {
    let g = mu.grid();
    let integrand = |y: f64| w.weight(y) * f(y).abs();
    let value = if literal {
        let mut sup = 0.0f64;
        for (i, y) in g.nodes().enumerate() {
            let v = integrand(y);
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "weighted integrand", index: i });
            }
            sup = sup.max(v);
        }
        sup * mu.mass()
    } else {
        let v = mu.integrate_against(integrand);
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "weighted pairing", index: 0 });
        }
        v
    };
    Ok(value)
}

/// Pairings of the measure against the first `basis_size` normalized cell
/// indicators, `<mu, f_j>_beta = sqrt(dx) * rho_j * (w_j + w_{j+1}) / 2`.
pub fn basis_pairings(mu: &MeasureSlice, w: &WeightParams, basis_size: usize) -> Result<Vec<f64>> {
    let g = mu.grid();
    if basis_size > g.nx {
        return Err(Error::InvalidConfig(format!(
            "basis size {} exceeds cell count {}",
            basis_size, g.nx
        )));
    }
    let dx = g.dx();
    let sqrt_dx = dx.sqrt();
    let mut out = Vec::with_capacity(basis_size);
    for j in 0..basis_size {
        let wbar = 0.5 * (w.weight(g.node(j)) + w.weight(g.node(j + 1)));
        out.push(sqrt_dx * mu.density()[j] * wbar);
    }
    Ok(out)
}

/// Squared weighted measure norm: sum of squared basis pairings.
pub fn measure_beta_norm_sq(mu: &MeasureSlice, w: &WeightParams, basis_size: usize) -> Result<f64> {
    let v = basis_pairings(mu, w, basis_size)?;
    Ok(v.iter().map(|x| x * x).sum())
}
