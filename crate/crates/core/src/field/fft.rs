//! N-dimensional FFT over a [`Grid`], one axis at a time.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Grid;

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

/// Unnormalized in-place transform of `data` (length `M^N`, row-major).
pub(crate) fn transform(grid: &Grid, data: &mut [Complex64], direction: Direction) {
    let m = grid.points_per_axis();
    let n = grid.dim();
    debug_assert_eq!(data.len(), grid.len());
    let mut planner = FftPlanner::<f64>::new();
    let fft = match direction {
        Direction::Forward => planner.plan_fft_forward(m),
        Direction::Inverse => planner.plan_fft_inverse(m),
    };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); m];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = stride * m;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Forward transform of real samples.
pub(crate) fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, Direction::Forward);
    data
}

/// Inverse transform returning the real part, scaled by `1/M^N`.
pub(crate) fn inverse_real(grid: &Grid, mut data: Vec<Complex64>) -> Vec<f64> {
    transform(grid, &mut data, Direction::Inverse);
    let scale = 1.0 / grid.len() as f64;
    data.iter().map(|c| c.re * scale).collect()
}

/// Applies a real radial Fourier multiplier `m(|ξ|²)` to real samples.
pub(crate) fn apply_multiplier(
    grid: &Grid,
    values: &[f64],
    xi2: &[f64],
    multiplier: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut spec = forward_real(grid, values);
    for (c, &k2) in spec.iter_mut().zip(xi2) {
        *c *= multiplier(k2);
    }
    inverse_real(grid, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_three_dims() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let back = inverse_real(&g, forward_real(&g, &vals));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let g = Grid::new(2, 16, 16.0).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|lin| {
                let idx = g.unravel(lin);
                (2.0 * std::f64::consts::PI * 3.0 * idx[1] as f64 / 16.0).cos()
            })
            .collect();
        let spec = forward_real(&g, &vals);
        let big: Vec<usize> = (0..g.len()).filter(|&i| spec[i].norm() > 1e-9).collect();
        assert_eq!(big, vec![3, 13]);
    }
}
