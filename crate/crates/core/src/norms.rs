//! Norms and seminorms along the embedding chain
//! `Ḣs ↪ L^{2*} ↪ L(2*,∞) ↪ Morrey ↪ thermic Besov`.

use serde::{Deserialize, Serialize};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::field::{apply_multiplier, forward_real, Complex64, Field, FracParams, Grid};

/// `‖u‖_{Ḣs} = (Σ |ξ_k|^{2s} |c_k|²)^{1/2}` with unitary coefficients.
pub fn hs_norm(u: &Field, p: &FracParams) -> f64 {
    let grid = u.grid();
    let xi2 = grid.xi_squared();
    let spec = forward_real(grid, u.values());
    let s = p.s();
    let sum: f64 = spec
        .iter()
        .zip(&xi2)
        .filter(|(_, &k2)| k2 > 0.0)
        .map(|(c, &k2)| k2.powf(s) * c.norm_sqr())
        .sum();
    (sum * grid.cell_volume() / grid.len() as f64).sqrt()
}

/// Ḣs inner product of two fields on the same grid.
pub fn hs_inner(u: &Field, v: &Field, p: &FracParams) -> f64 {
    let grid = u.grid();
    let xi2 = grid.xi_squared();
    let a = forward_real(grid, u.values());
    let b = forward_real(grid, v.values());
    let s = p.s();
    let sum: f64 = a
        .iter()
        .zip(&b)
        .zip(&xi2)
        .filter(|(_, &k2)| k2 > 0.0)
        .map(|((x, y), &k2)| k2.powf(s) * (x * y.conj()).re)
        .sum();
    sum * grid.cell_volume() / grid.len() as f64
}

/// `(h^N Σ|u_i|^p)^{1/p}`.
pub fn lp_norm(u: &Field, exponent: f64) -> Result<f64> {
    if !(exponent >= 1.0 && exponent.is_finite()) {
        return Err(LabError::invalid(format!(
            "Lebesgue exponent must be >= 1, got {exponent}"
        )));
    }
    let sum: f64 = u.values().iter().map(|v| v.abs().powf(exponent)).sum();
    Ok((u.grid().cell_volume() * sum).powf(1.0 / exponent))
}

/// `‖u‖_{L^{2*}}`.
pub fn l2star_norm(u: &Field, p: &FracParams) -> f64 {
    lp_norm(u, p.two_star()).expect("2* > 2")
}

/// Weak-`L^{2*}` quasi-norm `sup_λ λ·|{|u| ≥ λ}|^{1/2*}`, with `λ` ranging
/// over the sample magnitudes.
pub fn weak_l2star(u: &Field, p: &FracParams) -> f64 {
    let mut mags: Vec<f64> = u.values().iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let vol = u.grid().cell_volume();
    let inv = 1.0 / p.two_star();
    mags.iter()
        .enumerate()
        .map(|(i, &v)| v * (vol * (i + 1) as f64).powf(inv))
        .fold(0.0, f64::max)
}

/// Parameters of the Morrey norm `sup_{x,R} (R^γ ⨍_{B_R(x)} |u|^r)^{1/r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorreyParams {
    pub r: f64,
    pub gamma: f64,
    pub radii: Vec<f64>,
}

impl MorreyParams {
    pub fn new(r: f64, gamma: f64, radii: Vec<f64>, dim: usize) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(LabError::invalid(format!("Morrey exponent r must be >= 1, got {r}")));
        }
        if !(0.0..=dim as f64).contains(&gamma) {
            return Err(LabError::invalid(format!(
                "Morrey weight must lie in [0, {dim}], got {gamma}"
            )));
        }
        if radii.is_empty() {
            return Err(LabError::invalid("Morrey radii must be nonempty"));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::invalid("Morrey radii must be positive and strictly increasing"));
        }
        Ok(Self { r, gamma, radii })
    }

    /// Scale-invariant weight `γ = r(N-2s)/2` on the dyadic radii of `grid`.
    pub fn scale_invariant(grid: &Grid, p: &FracParams, r: f64) -> Result<Self> {
        Self::new(r, r * p.scaling_exponent(), grid.dyadic_radii(), grid.dim())
    }

    /// Inserts the geometric midpoint between consecutive radii.
    pub fn with_dense_radii(mut self) -> Self {
        let mut dense = Vec::with_capacity(2 * self.radii.len());
        for w in self.radii.windows(2) {
            dense.push(w[0]);
            dense.push((w[0] * w[1]).sqrt());
        }
        dense.push(*self.radii.last().expect("nonempty"));
        self.radii = dense;
        self
    }
}

/// Sums of a weight over every periodic discrete ball `{y : |x-y| < R}`.
pub(crate) struct BallSums {
    grid: Grid,
    weight_hat: Vec<Complex64>,
}

impl BallSums {
    pub(crate) fn new(grid: &Grid, weights: &[f64]) -> Self {
        Self {
            grid: *grid,
            weight_hat: forward_real(grid, weights),
        }
    }

    /// Ball indicator centred at the origin index, with its point count.
    pub(crate) fn ball(grid: &Grid, radius: f64) -> (Vec<f64>, usize) {
        let h = grid.spacing();
        let n = grid.dim();
        let r2 = radius * radius;
        let mut count = 0;
        let ball = (0..grid.len())
            .map(|lin| {
                let idx = grid.unravel(lin);
                let d2: f64 = (0..n).map(|a| grid.wrap_delta(idx[a] as f64 * h).powi(2)).sum();
                if d2 < r2 {
                    count += 1;
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        (ball, count)
    }

    /// Ball sums at every centre, and the number of points per ball.
    pub(crate) fn sums(&self, radius: f64) -> (Vec<f64>, usize) {
        let (ball, count) = Self::ball(&self.grid, radius);
        let ball_hat = forward_real(&self.grid, &ball);
        // the ball is symmetric, so correlation and convolution agree
        let prod: Vec<Complex64> = self
            .weight_hat
            .iter()
            .zip(&ball_hat)
            .map(|(a, b)| a * b)
            .collect();
        let sums = crate::field::inverse_real(&self.grid, prod)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        (sums, count)
    }
}

pub fn morrey_norm(u: &Field, mp: &MorreyParams) -> f64 {
    let weights: Vec<f64> = u.values().iter().map(|v| v.abs().powf(mp.r)).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return 0.0;
    }
    let balls = BallSums::new(u.grid(), &weights);
    let mut best = 0.0_f64;
    for &radius in &mp.radii {
        let (sums, count) = balls.sums(radius);
        let peak = sums.iter().copied().fold(0.0, f64::max);
        best = best.max(radius.powf(mp.gamma) * peak / count as f64);
    }
    best.powf(1.0 / mp.r)
}

/// Parameters of the thermic Besov norm `sup_t t^{α/2}‖e^{tΔ}u‖_∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub alpha: f64,
    pub times: Vec<f64>,
}

impl BesovParams {
    pub fn new(alpha: f64, times: Vec<f64>, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(LabError::invalid(format!(
                "Besov smoothness must lie in (0, {dim}), got {alpha}"
            )));
        }
        if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::invalid("Besov times must be positive and strictly increasing"));
        }
        Ok(Self { alpha, times })
    }

    /// Times `(h/2)²·4^k` up to `(L/2)²`.
    pub fn dyadic_times(grid: &Grid) -> Vec<f64> {
        let t_max = (0.5 * grid.extent()).powi(2) * (1.0 + 1e-12);
        let mut t = (0.5 * grid.spacing()).powi(2);
        let mut out = Vec::new();
        while t <= t_max {
            out.push(t);
            t *= 4.0;
        }
        out
    }

    /// `α = (N-2s)/2 = N/2*` on the dyadic times of `grid`.
    pub fn scale_invariant(grid: &Grid, p: &FracParams) -> Result<Self> {
        Self::new(p.scaling_exponent(), Self::dyadic_times(grid), grid.dim())
    }
}

pub fn besov_norm(u: &Field, bp: &BesovParams) -> f64 {
    let grid = u.grid();
    let xi2 = grid.xi_squared();
    let spec = forward_real(grid, u.values());
    bp.times
        .iter()
        .map(|&t| {
            let damped: Vec<Complex64> = spec
                .iter()
                .zip(&xi2)
                .map(|(c, &k2)| c * (-t * k2).exp())
                .collect();
            let heat = crate::field::inverse_real(grid, damped);
            t.powf(0.5 * bp.alpha) * heat.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

/// Largest `M` accepted by [`gagliardo_seminorm`] when `N > 1`.
pub const GAGLIARDO_MAX_POINTS: usize = 64;

/// Seminorm `‖u‖_{Ḣs}` for any order `0 < s < 1`, without the `s < N/2`
/// restriction the embedding chain needs.
pub fn hs_seminorm_order(u: &Field, s: f64) -> Result<f64> {
    check_seminorm_order(s)?;
    let grid = u.grid();
    let xi2 = grid.xi_squared();
    let spec = forward_real(grid, u.values());
    let sum: f64 = spec
        .iter()
        .zip(&xi2)
        .filter(|(_, &k2)| k2 > 0.0)
        .map(|(c, &k2)| k2.powf(s) * c.norm_sqr())
        .sum();
    Ok((sum * grid.cell_volume() / grid.len() as f64).sqrt())
}

fn check_seminorm_order(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0 && s < 1.0) {
        return Err(LabError::invalid(format!(
            "the Gagliardo form needs 0 < s < 1, got s = {s}"
        )));
    }
    Ok(())
}

/// `(h^{2N} Σ_{i≠j} |u_i-u_j|² K(x_i-x_j))^{1/2}` where `K` is the
/// periodized kernel `Σ_k |d + kL|^{-(N+2s)}`.
pub fn gagliardo_seminorm(u: &Field, p: &FracParams) -> Result<f64> {
    p.check_grid(u.grid())?;
    gagliardo_seminorm_order(u, p.s())
}

/// [`gagliardo_seminorm`] for an explicit order `0 < s < 1`.
pub fn gagliardo_seminorm_order(u: &Field, s: f64) -> Result<f64> {
    check_seminorm_order(s)?;
    let grid = u.grid();
    if grid.dim() > 1 && grid.points_per_axis() > GAGLIARDO_MAX_POINTS {
        return Err(LabError::invalid(format!(
            "Gagliardo double sum costs O(M^(2N)); need N = 1 or M <= {GAGLIARDO_MAX_POINTS}"
        )));
    }
    let n = grid.dim();
    let m = grid.points_per_axis();
    let vals = u.values();
    let total: f64 = (1..grid.len())
        .into_par_iter()
        .map(|off_lin| {
            let off = grid.unravel(off_lin);
            let weight = periodic_kernel(grid, &off, s);
            let mut diff = 0.0;
            for (lin, &ui) in vals.iter().enumerate() {
                let idx = grid.unravel(lin);
                let mut j = [0usize; 3];
                for a in 0..n {
                    j[a] = (idx[a] + off[a]) % m;
                }
                let d = ui - vals[grid.ravel(&j)];
                diff += d * d;
            }
            weight * diff
        })
        .sum();
    Ok((grid.cell_volume().powi(2) * total).sqrt())
}

/// Image sum over `|k| <= K` plus the integral tail beyond `(K+1/2)L`.
fn periodic_kernel(grid: &Grid, off: &[usize], s: f64) -> f64 {
    let n = grid.dim();
    let h = grid.spacing();
    let l = grid.extent();
    let expo = n as f64 + 2.0 * s;
    let k: i64 = match n {
        1 => 64,
        2 => 6,
        _ => 3,
    };
    let d: Vec<f64> = (0..n).map(|a| grid.wrap_delta(off[a] as f64 * h)).collect();
    let span = (2 * k + 1) as usize;
    let mut sum = 0.0;
    for lin in 0..span.pow(n as u32) {
        let mut rest = lin;
        let mut k2 = 0i64;
        let mut r2 = 0.0;
        for &da in &d {
            let ka = (rest % span) as i64 - k;
            rest /= span;
            k2 += ka * ka;
            r2 += (da + ka as f64 * l).powi(2);
        }
        if k2 <= k * k {
            sum += r2.powf(-0.5 * expo);
        }
    }
    let sphere = 2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / libm::tgamma(n as f64 / 2.0);
    let r = (k as f64 + 0.5) * l;
    sum + sphere * r.powf(-2.0 * s) / (2.0 * s * l.powi(n as i32))
}

/// All norms of one field, in a fixed serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub hs: f64,
    pub l2star: f64,
    pub weak_l2star: f64,
    pub morrey: f64,
    pub besov: f64,
    pub gagliardo: Option<f64>,
    pub dim: usize,
    pub points_per_axis: usize,
    pub extent: f64,
    pub s: f64,
}

/// Computes every norm with the scale-invariant defaults: Morrey with
/// `r = 2`, Besov with `α = N/2*`, Gagliardo only when `s < 1` and affordable.
pub fn norm_report(u: &Field, p: &FracParams) -> Result<NormReport> {
    let grid = u.grid();
    p.check_grid(grid)?;
    let mp = MorreyParams::scale_invariant(grid, p, 2.0)?;
    let bp = BesovParams::scale_invariant(grid, p)?;
    let gagliardo_ok = p.s() < 1.0
        && (grid.dim() == 1 && grid.points_per_axis() <= 4096
            || grid.points_per_axis() <= 32);
    Ok(NormReport {
        hs: hs_norm(u, p),
        l2star: l2star_norm(u, p),
        weak_l2star: weak_l2star(u, p),
        morrey: morrey_norm(u, &mp),
        besov: besov_norm(u, &bp),
        gagliardo: if gagliardo_ok {
            Some(gagliardo_seminorm(u, p)?)
        } else {
            None
        },
        dim: grid.dim(),
        points_per_axis: grid.points_per_axis(),
        extent: grid.extent(),
        s: p.s(),
    })
}

/// Half-Laplacian energy density `|(-Δ)^{s/2}u|²` at each sample.
pub fn energy_density(u: &Field, p: &FracParams) -> Vec<f64> {
    let grid = u.grid();
    let xi2 = grid.xi_squared();
    let half = 0.5 * p.s();
    apply_multiplier(grid, u.values(), &xi2, |k2| if k2 == 0.0 { 0.0 } else { k2.powf(half) })
        .into_iter()
        .map(|v| v * v)
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid1(m: usize, l: f64) -> Grid {
        Grid::new(1, m, l).unwrap()
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let z = Field::zeros(g);
        let r = norm_report(&z, &p).unwrap();
        assert_eq!((r.hs, r.l2star, r.weak_l2star, r.morrey, r.besov), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.gagliardo, Some(0.0));
    }

    #[test]
    fn single_mode_hs() {
        // ‖a cos(ξ0 x)‖²_{L²} = a² L/2, so ‖·‖_{Ḣs} = a |ξ0|^s (L/2)^{1/2}
        let l = 10.0;
        let g = grid1(64, l);
        let p = FracParams::new(1, 0.3).unwrap();
        let xi0 = 2.0 * PI * 2.0 / l;
        let u = Field::from_fn(g, |x| 1.5 * (xi0 * x[0]).cos()).unwrap();
        let expect = 1.5 * xi0.powf(0.3) * (l / 2.0).sqrt();
        assert!((hs_norm(&u, &p) / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_sample_weak_norm() {
        let g = grid1(16, 4.0);
        let p = FracParams::new(1, 0.25).unwrap();
        let mut v = vec![0.0; 16];
        v[5] = -3.0;
        let u = Field::new(g, v).unwrap();
        let expect = 3.0 * g.cell_volume().powf(1.0 / p.two_star());
        assert!((weak_l2star(&u, &p) - expect).abs() < 1e-14);
    }

    #[test]
    fn gaussian_l2_closed_form() {
        // ∫ exp(-2|x|²) dx = (π/2)^{N/2}
        let g = Grid::new(2, 128, 16.0).unwrap();
        let u = Field::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let expect = (PI / 2.0).powf(0.5);
        assert!((lp_norm(&u, 2.0).unwrap() / expect - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lp_rejects_small_exponent() {
        let g = grid1(8, 1.0);
        assert!(lp_norm(&Field::zeros(g), 0.5).is_err());
    }

    #[test]
    fn gagliardo_matches_fourier_constant() {
        // c(1,s)/2 with c(N,s) = s 4^s Γ(N/2+s) / (π^{N/2} Γ(1-s)), evaluated offline
        let g = grid1(2048, 32.0);
        for (s, want) in [(0.3, 0.11504819084081601), (0.5, 0.15915494309189537)] {
            for (c, w) in [(0.0, 1.0), (-2.0, 2.0)] {
                let u = Field::from_fn(g, |x| (-(x[0] - c) * (x[0] - c) / (w * w)).exp()).unwrap();
                let r = hs_seminorm_order(&u, s).unwrap().powi(2)
                    / gagliardo_seminorm_order(&u, s).unwrap().powi(2);
                assert!((r / want - 1.0).abs() < 0.01, "s={s} w={w}: {r}");
            }
        }
        assert!(hs_seminorm_order(&Field::zeros(g), 1.0).is_err());
    }

    #[test]
    fn gagliardo_preconditions() {
        let g = grid1(32, 4.0);
        let p = FracParams::new(3, 1.2).unwrap();
        let g3 = Grid::new(3, 8, 4.0).unwrap();
        assert!(gagliardo_seminorm(&Field::zeros(g3), &p).is_err());
        let g2 = Grid::new(2, 128, 4.0).unwrap();
        let p2 = FracParams::new(2, 0.5).unwrap();
        assert!(gagliardo_seminorm(&Field::zeros(g2), &p2).is_err());
        let p1 = FracParams::new(1, 0.3).unwrap();
        let c = Field::from_fn(g, |_| 2.5).unwrap();
        assert_eq!(gagliardo_seminorm(&c, &p1).unwrap(), 0.0);
    }

    #[test]
    fn morrey_params_validation() {
        assert!(MorreyParams::new(0.5, 1.0, vec![1.0], 2).is_err());
        assert!(MorreyParams::new(1.0, 3.0, vec![1.0], 2).is_err());
        assert!(MorreyParams::new(1.0, 1.0, vec![], 2).is_err());
        assert!(MorreyParams::new(1.0, 1.0, vec![2.0, 1.0], 2).is_err());
        let dense = MorreyParams::new(1.0, 1.0, vec![1.0, 2.0, 4.0], 2)
            .unwrap()
            .with_dense_radii();
        assert_eq!(dense.radii.len(), 5);
        assert!((dense.radii[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn besov_times_cover_the_box() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let t = BesovParams::dyadic_times(&g);
        assert!((t[0] - 0.015625).abs() < 1e-15);
        assert!((t.last().unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_in_fixed_order() {
        let g = grid1(16, 4.0);
        let p = FracParams::new(1, 0.25).unwrap();
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let json = serde_json::to_string(&norm_report(&u, &p).unwrap()).unwrap();
        let keys = ["\"hs\"", "\"l2star\"", "\"weak_l2star\"", "\"morrey\"", "\"besov\"", "\"gagliardo\"", "\"dim\""];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{json}");
    }
}
