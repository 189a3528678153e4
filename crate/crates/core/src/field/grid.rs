use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Uniform periodic grid on `[-L/2, L/2)^N`.
///
/// Samples are stored row-major: axis 0 varies slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    extent: f64,
}

impl Grid {
    pub const MAX_DIM: usize = 3;
    pub const MIN_POINTS: usize = 8;

    pub fn new(dim: usize, points_per_axis: usize, extent: f64) -> Result<Self> {
        if !(1..=Self::MAX_DIM).contains(&dim) {
            return Err(LabError::invalid(format!(
                "grid dimension must satisfy 1 <= N <= 3, got {dim}"
            )));
        }
        if points_per_axis < Self::MIN_POINTS || !points_per_axis.is_power_of_two() {
            return Err(LabError::invalid(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(LabError::invalid(format!(
                "box extent must be positive and finite, got {extent}"
            )));
        }
        Ok(Self {
            dim,
            points_per_axis,
            extent,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points_per_axis as f64
    }

    /// Volume `h^N` attached to each sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of samples `M^N`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinate of index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.extent + i as f64 * self.spacing()
    }

    /// Signed frequency index in `[-M/2, M/2)` for storage index `i`.
    pub fn frequency_index(&self, i: usize) -> i64 {
        let m = self.points_per_axis;
        if i < m / 2 {
            i as i64
        } else {
            i as i64 - m as i64
        }
    }

    /// Angular wavenumber `2πk/L` for storage index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_index(i) as f64 / self.extent
    }

    /// Multi-index of a linear index (unused trailing axes are zero).
    pub fn unravel(&self, mut linear: usize) -> [usize; 3] {
        let m = self.points_per_axis;
        let mut idx = [0usize; 3];
        for axis in (0..self.dim).rev() {
            idx[axis] = linear % m;
            linear /= m;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let m = self.points_per_axis;
        idx[..self.dim].iter().fold(0, |acc, &i| acc * m + i)
    }

    /// Physical position of a linear index.
    pub fn position(&self, linear: usize) -> [f64; 3] {
        let idx = self.unravel(linear);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// `|ξ|²` for every storage index of the discrete spectrum.
    pub fn xi_squared(&self) -> Vec<f64> {
        let m = self.points_per_axis;
        let k2: Vec<f64> = (0..m).map(|i| self.wavenumber(i).powi(2)).collect();
        (0..self.len())
            .map(|lin| {
                let idx = self.unravel(lin);
                (0..self.dim).map(|a| k2[idx[a]]).sum()
            })
            .collect()
    }

    /// Minimal-image displacement on a periodic axis.
    pub fn wrap_delta(&self, d: f64) -> f64 {
        let l = self.extent;
        d - l * (d / l).round()
    }

    /// Reduce a coordinate into `[-L/2, L/2)`.
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let l = self.extent;
        let r = (x + 0.5 * l).rem_euclid(l) - 0.5 * l;
        if r >= 0.5 * l {
            r - l
        } else {
            r
        }
    }

    /// Torus-minimal Euclidean distance between two points.
    pub fn torus_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| self.wrap_delta(a[i] - b[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Dyadic radii `h·2^k` that lie in `(0, L/2]`.
    pub fn dyadic_radii(&self) -> Vec<f64> {
        let h = self.spacing();
        let half = 0.5 * self.extent;
        let mut out = Vec::new();
        let mut r = h;
        while r <= half * (1.0 + 1e-12) {
            out.push(r);
            r *= 2.0;
        }
        out
    }

    /// Same sample count, extent scaled by `factor`.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.points_per_axis, self.extent * factor)
    }

    /// Twice the samples per axis on the same box.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, self.points_per_axis * 2, self.extent)
    }

    /// Representable dilation range `[h/4, 4L]`.
    pub fn lambda_range(&self) -> (f64, f64) {
        (0.25 * self.spacing(), 4.0 * self.extent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(0, 16, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 24, 1.0).is_err());
        assert!(Grid::new(2, 16, 0.0).is_err());
        assert!(Grid::new(2, 16, f64::NAN).is_err());
    }

    #[test]
    fn frequencies_cover_half_open_band() {
        let g = Grid::new(1, 8, 2.0 * std::f64::consts::PI).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.frequency_index(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!((g.wavenumber(3) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn ravel_round_trip() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for lin in [0, 1, 7, 8, 63, 64, 511] {
            let idx = g.unravel(lin);
            assert_eq!(g.ravel(&idx), lin);
        }
    }

    #[test]
    fn wrap_is_minimal_image() {
        let g = Grid::new(1, 8, 10.0).unwrap();
        assert!((g.wrap_delta(7.0) + 3.0).abs() < 1e-14);
        assert!((g.wrap_coord(5.0) + 5.0).abs() < 1e-14);
        assert!((g.wrap_coord(-5.0) + 5.0).abs() < 1e-14);
        assert!((g.torus_distance(&[-4.5], &[4.5]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dyadic_radii_stop_at_half_box() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        assert_eq!(g.dyadic_radii(), vec![0.25, 0.5, 1.0, 2.0, 4.0]);
    }
}
