//! Grids, sampled fields and the Fourier calculus built on them.

mod fft;
mod grid;
pub mod io;
mod restricted;
mod spectral;

use serde::{Deserialize, Serialize};

pub use grid::Grid;
pub use restricted::{build_restricted_operator, RestrictedOperator, MAX_RESTRICTED_POINTS};
pub use rustfft::num_complex::Complex64;
pub use spectral::{frac_laplacian, heat_semigroup, riesz_potential};

pub(crate) use fft::{apply_multiplier, forward_real, inverse_real};

use crate::error::{LabError, Result};

/// Default boundary-to-peak ratio accepted by [`tail_check`].
pub const TAIL_TOLERANCE: f64 = 1e-6;

/// Fractional order `s` in dimension `N`, with `0 < s < N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    dim: usize,
    s: f64,
}

impl FracParams {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        let half = dim as f64 / 2.0;
        if dim == 0 || !(s.is_finite() && s > 0.0 && s < half) {
            return Err(LabError::invalid(format!(
                "fractional order must satisfy 0 < s < N/2 (N = {dim}, N/2 = {half}), got s = {s}"
            )));
        }
        Ok(Self { dim, s })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Critical exponent `2* = 2N/(N-2s)`.
    pub fn two_star(&self) -> f64 {
        let n = self.dim as f64;
        2.0 * n / (n - 2.0 * self.s)
    }

    /// `(N-2s)/2`, the scaling weight of the unitary dilation.
    pub fn scaling_exponent(&self) -> f64 {
        (self.dim as f64 - 2.0 * self.s) / 2.0
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(LabError::invalid(format!(
                "fractional parameters are for N = {}, grid has N = {}",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// Real samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::invalid(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = grid.dim();
        let values = (0..grid.len())
            .map(|lin| {
                let x = grid.position(lin);
                f(&x[..n])
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `∫ u dx` as a Riemann sum.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(LabError::invalid("fields live on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Discrete Fourier coefficients with the unitary scaling
    /// `c_k = (h^N / M^N)^{1/2} Σ_j u_j e^{-2πi j·k/M}`, so that
    /// `Σ|c_k|² = h^N Σ|u_j|²`.
    pub fn unitary_spectrum(&self) -> Vec<Complex64> {
        let scale = (self.grid.cell_volume() / self.grid.len() as f64).sqrt();
        let mut spec = forward_real(&self.grid, &self.values);
        for c in &mut spec {
            *c *= scale;
        }
        spec
    }

    /// Inner product `∫ u v dx`.
    pub fn l2_dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Ratio of the largest sample on the box faces to the peak sample.
///
/// Returns the ratio on success; fails when it exceeds `tolerance`.
pub fn tail_check(u: &Field, tolerance: f64) -> Result<f64> {
    let grid = u.grid();
    let peak = u.max_abs();
    if peak == 0.0 {
        return Ok(0.0);
    }
    let m = grid.points_per_axis();
    let mut edge = 0.0_f64;
    for (lin, v) in u.values().iter().enumerate() {
        let idx = grid.unravel(lin);
        if idx[..grid.dim()].iter().any(|&i| i == 0 || i == m - 1) {
            edge = edge.max(v.abs());
        }
    }
    let ratio = edge / peak;
    if ratio > tolerance {
        return Err(LabError::TailCheck {
            label: None,
            ratio,
            tolerance,
            required_extent: 2.0 * grid.extent(),
        });
    }
    Ok(ratio)
}
