//! The translation–dilation group `ℝ^N ⋊ (0,∞)` and its unitary action
//! `D_{y,λ}u(x) = λ^{(2s-N)/2} u((x-y)/λ)`.

use serde::{Deserialize, Serialize};

use crate::closed_form::ClosedForm;
use crate::error::{LabError, Result};
use crate::field::{Field, FracParams, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dislocation {
    pub y: Vec<f64>,
    pub lambda: f64,
}

impl Dislocation {
    pub fn new(y: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(LabError::invalid(format!(
                "dilation must be positive, got {lambda}"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LabError::invalid("translation must be finite"));
        }
        Ok(Self { y, lambda })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            y: vec![0.0; dim],
            lambda: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Group law `(y,λ)∘(a,δ) = (y + λa, λδ)`.
    pub fn compose(&self, other: &Dislocation) -> Dislocation {
        debug_assert_eq!(self.dim(), other.dim());
        Dislocation {
            y: self
                .y
                .iter()
                .zip(&other.y)
                .map(|(y, a)| y + self.lambda * a)
                .collect(),
            lambda: self.lambda * other.lambda,
        }
    }

    /// `(y,λ)^{-1} = (-y/λ, 1/λ)`.
    pub fn inverse(&self) -> Dislocation {
        Dislocation {
            y: self.y.iter().map(|y| -y / self.lambda).collect(),
            lambda: 1.0 / self.lambda,
        }
    }

    /// [`compose`](Self::compose) followed by a range check on `grid`.
    pub fn checked_compose(&self, other: &Dislocation, grid: &Grid) -> Result<Dislocation> {
        let d = self.compose(other);
        d.check_range(grid)?;
        Ok(d)
    }

    pub fn checked_inverse(&self, grid: &Grid) -> Result<Dislocation> {
        let d = self.inverse();
        d.check_range(grid)?;
        Ok(d)
    }

    /// Fails when `λ` lies outside `[h/4, 4L]`.
    pub fn check_range(&self, grid: &Grid) -> Result<()> {
        let (lo, hi) = grid.lambda_range();
        if self.lambda < lo || self.lambda > hi {
            return Err(LabError::invalid(format!(
                "dilation {} outside representable range [{lo}, {hi}]",
                self.lambda
            )));
        }
        if self.dim() != grid.dim() {
            return Err(LabError::invalid(format!(
                "dislocation has {} components, grid has N = {}",
                self.dim(),
                grid.dim()
            )));
        }
        Ok(())
    }

    /// Same dislocation with `y` reduced into the box.
    pub fn wrapped(&self, grid: &Grid) -> Dislocation {
        Dislocation {
            y: self.y.iter().map(|&v| grid.wrap_coord(v)).collect(),
            lambda: self.lambda,
        }
    }

    /// `|log(λ_a/λ_b)| + |y_a - y_b| / λ_a`, with the torus-minimal distance.
    ///
    /// Normalized by the first argument's scale, so not symmetric in general.
    pub fn separation(&self, other: &Dislocation, grid: &Grid) -> f64 {
        (self.lambda / other.lambda).ln().abs()
            + grid.torus_distance(&self.y, &other.y) / self.lambda
    }

    /// Maps a physical point `x` to `(x - y)/λ`.
    pub fn pull_point(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = (x[i] - self.y[i]) / self.lambda;
        }
    }

    /// Amplitude factor `λ^{(2s-N)/2}`.
    pub fn amplitude(&self, p: &FracParams) -> f64 {
        self.lambda.powf(-p.scaling_exponent())
    }
}

/// Applies `D_{y,λ}` to a sampled field using periodic multilinear
/// interpolation of the samples.
pub fn apply(d: &Dislocation, u: &Field, p: &FracParams) -> Result<Field> {
    let grid = *u.grid();
    p.check_grid(&grid)?;
    d.check_range(&grid)?;
    let amp = d.amplitude(p);
    if d.lambda == 1.0 && d.y.iter().all(|&v| v == 0.0) {
        return Ok(u.clone());
    }
    let n = grid.dim();
    let mut z = [0.0; 3];
    let values = (0..grid.len())
        .map(|lin| {
            let x = grid.position(lin);
            d.pull_point(&x[..n], &mut z[..n]);
            amp * interpolate(u, &z[..n])
        })
        .collect();
    Field::new(grid, values)
}

/// Samples `D_{y,λ} f` for a closed-form `f` by exact re-evaluation.
pub fn apply_closed_form(
    d: &Dislocation,
    f: &ClosedForm,
    grid: &Grid,
    p: &FracParams,
) -> Result<Field> {
    p.check_grid(grid)?;
    d.check_range(grid)?;
    ClosedForm::Dislocated {
        dislocation: d.clone(),
        inner: Box::new(f.clone()),
    }
    .sample(grid, p)
}

/// Periodic multilinear interpolation of samples at a physical point.
pub fn interpolate(u: &Field, x: &[f64]) -> f64 {
    let grid = u.grid();
    let n = grid.dim();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..n {
        let t = (x[a] + 0.5 * grid.extent()) / h;
        let fl = t.floor();
        frac[a] = t - fl;
        base[a] = (fl as i64).rem_euclid(m as i64) as usize;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..n {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                idx[a] = (base[a] + 1) % m;
            } else {
                w *= 1.0 - frac[a];
                idx[a] = base[a];
            }
        }
        if w != 0.0 {
            acc += w * u.values()[grid.ravel(&idx)];
        }
    }
    acc
}
