//! Fourier multipliers: powers of the Laplacian, Riesz potentials and the
//! heat semigroup.

use super::{apply_multiplier, Field, FracParams};
use crate::error::{LabError, Result};

const ZERO_MODE_RTOL: f64 = 1e-8;

fn check_zero_mode(u: &Field) -> Result<()> {
    let grid = u.grid();
    let tolerance = ZERO_MODE_RTOL * u.max_abs() * grid.extent().powi(grid.dim() as i32);
    let magnitude = u.integral().abs();
    if magnitude > tolerance {
        return Err(LabError::ZeroMode {
            magnitude,
            tolerance,
        });
    }
    Ok(())
}

/// Multiplies the spectrum of `u` by `|ξ|^{power·s}`.
///
/// `power = 1` is `(-Δ)^{s/2}`, `power = 2` is `(-Δ)^s`. The zero mode is
/// annihilated in every case; for `power < 0` the input must be mean-free.
pub fn frac_laplacian(u: &Field, p: &FracParams, power: f64) -> Result<Field> {
    p.check_grid(u.grid())?;
    if !power.is_finite() {
        return Err(LabError::invalid(format!("power must be finite, got {power}")));
    }
    if power == 0.0 {
        return Ok(u.clone());
    }
    if power < 0.0 {
        check_zero_mode(u)?;
    }
    let exponent = 0.5 * power * p.s();
    let xi2 = u.grid().xi_squared();
    let values = apply_multiplier(u.grid(), u.values(), &xi2, |k2| {
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(exponent)
        }
    });
    Field::new(*u.grid(), values)
}

/// Riesz potential of order `s`: the multiplier `|ξ|^{-s}`.
pub fn riesz_potential(g: &Field, p: &FracParams) -> Result<Field> {
    frac_laplacian(g, p, -1.0)
}

/// Heat semigroup `e^{tΔ}`: the multiplier `exp(-t|ξ|²)`.
pub fn heat_semigroup(u: &Field, t: f64) -> Result<Field> {
    if !(t.is_finite() && t > 0.0) {
        return Err(LabError::invalid(format!("heat time must be positive, got {t}")));
    }
    let xi2 = u.grid().xi_squared();
    let values = apply_multiplier(u.grid(), u.values(), &xi2, |k2| (-t * k2).exp());
    Field::new(*u.grid(), values)
}
