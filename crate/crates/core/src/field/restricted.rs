//! Dense realization of `(-Δ)^s` on functions supported in a mask.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::{apply_multiplier, Field, FracParams, Grid};
use crate::error::{LabError, Result};

/// Largest number of masked points accepted for dense assembly.
pub const MAX_RESTRICTED_POINTS: usize = 5000;

/// `R_Ω (-Δ)^s E_Ω` as a dense symmetric matrix in physical units, so that
/// `u'Au = ‖u‖²_{Ḣs}` for `u` extended by zero outside the mask.
#[derive(Debug, Clone)]
pub struct RestrictedOperator {
    grid: Grid,
    mask: Vec<bool>,
    indices: Vec<usize>,
    matrix: DMatrix<f64>,
    /// Absent when the mask covers the whole torus, where constants span
    /// the kernel.
    cholesky: Option<Cholesky<f64, Dyn>>,
}

pub fn build_restricted_operator(
    grid: &Grid,
    mask: &[bool],
    p: &FracParams,
) -> Result<RestrictedOperator> {
    p.check_grid(grid)?;
    if mask.len() != grid.len() {
        return Err(LabError::invalid(format!(
            "mask has {} entries, grid has {} points",
            mask.len(),
            grid.len()
        )));
    }
    let indices: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let k = indices.len();
    if k == 0 {
        return Err(LabError::invalid("mask selects no grid points"));
    }
    if k > MAX_RESTRICTED_POINTS {
        return Err(LabError::TooLarge {
            points: k,
            bound: MAX_RESTRICTED_POINTS,
        });
    }

    // (-Δ)^s applied to the unit impulse at the origin index; translation
    // invariance gives every column.
    let mut impulse = vec![0.0; grid.len()];
    impulse[0] = 1.0;
    let xi2 = grid.xi_squared();
    let s = p.s();
    let kernel = apply_multiplier(grid, &impulse, &xi2, |k2| {
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(s)
        }
    });

    let m = grid.points_per_axis();
    let n = grid.dim();
    let vol = grid.cell_volume();
    let multi: Vec<[usize; 3]> = indices.iter().map(|&i| grid.unravel(i)).collect();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (i, xi) in multi.iter().enumerate() {
        for (j, xj) in multi.iter().enumerate() {
            let mut off = [0usize; 3];
            for axis in 0..n {
                off[axis] = (xi[axis] + m - xj[axis]) % m;
            }
            a[(i, j)] = vol * kernel[grid.ravel(&off)];
        }
    }
    let sym = (&a + a.transpose()) * 0.5;
    let cholesky = Cholesky::new(sym.clone());
    Ok(RestrictedOperator {
        grid: *grid,
        mask: mask.to_vec(),
        indices,
        matrix: sym,
        cholesky,
    })
}

impl RestrictedOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Linear grid indices of the masked points, in matrix order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(u);
        (&self.matrix * v).as_slice().to_vec()
    }

    /// `u'Au`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let au = self.apply(u);
        au.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    pub fn is_definite(&self) -> bool {
        self.cholesky.is_some()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let chol = self.cholesky.as_ref().ok_or_else(|| {
            LabError::Numerical("restricted operator is not positive definite".into())
        })?;
        Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Relative asymmetry of the assembled matrix before symmetrization is
    /// not retained; this reports `max|A-Aᵀ| / max|A|` of the stored matrix.
    pub fn asymmetry(&self) -> f64 {
        let diff = (&self.matrix - self.matrix.transpose()).amax();
        diff / self.matrix.amax()
    }

    /// Masked values of a field, in matrix order.
    pub fn restrict(&self, u: &Field) -> Vec<f64> {
        self.indices.iter().map(|&i| u.values()[i]).collect()
    }

    /// Zero extension of masked values to the whole grid.
    pub fn extend(&self, u: &[f64]) -> Field {
        let mut values = vec![0.0; self.grid.len()];
        for (&i, &v) in self.indices.iter().zip(u) {
            values[i] = v;
        }
        Field::new(self.grid, values).expect("finite restricted values")
    }
}
