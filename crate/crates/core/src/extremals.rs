//! Sharp Sobolev constant, extremal bubbles and Rayleigh quotients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::closed_form::ClosedForm;
use crate::dislocations::Dislocation;
use crate::error::{LabError, Result};
use crate::field::{Field, FracParams, Grid};
use crate::norms::{hs_norm, lp_norm};
use crate::profiles::concentration_argmax;

/// Largest fraction of a bubble's `L^{2*}` mass allowed outside the ball
/// inscribed in the box around its centre.
pub const BUBBLE_TAIL_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    pub value: f64,
    pub n: usize,
    pub s: f64,
}

/// Optimal constant `S*` in `‖u‖^{2*}_{L^{2*}} ≤ S* ‖u‖^{2*}_{Ḣs}`, evaluated
/// in log-Gamma form.
pub fn sharp_constant(n: usize, s: f64) -> Result<SharpConstant> {
    let p = FracParams::new(n, s)?;
    let nf = n as f64;
    let log_inner = -2.0 * s * 2f64.ln() - s * PI.ln() + libm::lgamma((nf - 2.0 * s) / 2.0)
        - libm::lgamma((nf + 2.0 * s) / 2.0)
        + (2.0 * s / nf) * (libm::lgamma(nf) - libm::lgamma(nf / 2.0));
    let value = (0.5 * p.two_star() * log_inner).exp();
    if !(value.is_finite() && value > 0.0) {
        return Err(LabError::Numerical(format!(
            "sharp constant overflowed for N = {n}, s = {s}"
        )));
    }
    Ok(SharpConstant { value, n, s })
}

/// `(c, λ, x0)` of `u(x) = c / (λ² + |x-x0|²)^{(N-2s)/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub c: f64,
    pub lambda: f64,
    pub x0: Vec<f64>,
}

impl BubbleParams {
    pub fn new(c: f64, lambda: f64, x0: Vec<f64>) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(LabError::invalid(format!("bubble amplitude must be nonzero, got {c}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LabError::invalid(format!("bubble width must be positive, got {lambda}")));
        }
        Ok(Self { c, lambda, x0 })
    }

    pub fn eval(&self, x: &[f64], p: &FracParams) -> f64 {
        let r2: f64 = x.iter().zip(&self.x0).map(|(a, b)| (a - b).powi(2)).sum();
        self.c * (self.lambda * self.lambda + r2).powf(-p.scaling_exponent())
    }

    /// Parameters of `D_{y,μ}` applied to this bubble.
    pub fn dislocated(&self, d: &Dislocation, p: &FracParams) -> BubbleParams {
        BubbleParams {
            c: self.c * d.lambda.powf(p.scaling_exponent()),
            lambda: self.lambda * d.lambda,
            x0: self
                .x0
                .iter()
                .zip(&d.y)
                .map(|(x, y)| y + d.lambda * x)
                .collect(),
        }
    }

    /// Peak value `c/λ^{N-2s}`.
    pub fn peak(&self, p: &FracParams) -> f64 {
        self.c * self.lambda.powf(-2.0 * p.scaling_exponent())
    }
}

/// Fraction of `∫|u|^{2*}` outside radius `rho` for a bubble of width
/// `lambda`: the regularized incomplete beta `I_x(N/2, N/2)` at
/// `x = λ²/(λ²+ρ²)`, integrated in the variable `t = sin²θ`.
pub fn bubble_tail_fraction(dim: usize, lambda: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 1.0;
    }
    let x = lambda * lambda / (lambda * lambda + rho * rho);
    let theta_x = x.sqrt().asin();
    let f = |t: f64| (t.sin() * t.cos()).powi(dim as i32 - 1);
    simpson(f, 0.0, theta_x, 2000) / simpson(f, 0.0, 0.5 * PI, 2000)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Radius of the largest ball around `x0` inside the box.
fn inscribed_radius(grid: &Grid, x0: &[f64]) -> f64 {
    let half = 0.5 * grid.extent();
    x0.iter().fold(half, |r, &c| r.min(half - c.abs()))
}

/// Fails when more than `tolerance` of the bubble's `L^{2*}` mass lies
/// outside the box; the error names the extent that would pass.
pub fn bubble_tail_check(grid: &Grid, bp: &BubbleParams, tolerance: f64) -> Result<f64> {
    let rho = inscribed_radius(grid, &bp.x0);
    let frac = bubble_tail_fraction(grid.dim(), bp.lambda, rho);
    if frac > tolerance {
        let offset = bp.x0.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let (mut lo, mut hi) = (rho.max(bp.lambda), rho.max(bp.lambda) * 2.0);
        while bubble_tail_fraction(grid.dim(), bp.lambda, hi) > tolerance {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if bubble_tail_fraction(grid.dim(), bp.lambda, mid) > tolerance {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Err(LabError::TailCheck {
            label: None,
            ratio: frac,
            tolerance,
            required_extent: 2.0 * (hi + offset),
        });
    }
    Ok(frac)
}

/// Exact samples of a bubble after the tail check.
pub fn bubble(grid: &Grid, p: &FracParams, bp: &BubbleParams) -> Result<Field> {
    p.check_grid(grid)?;
    if bp.x0.len() != grid.dim() {
        return Err(LabError::invalid("bubble centre has the wrong dimension"));
    }
    bubble_tail_check(grid, bp, BUBBLE_TAIL_TOLERANCE)?;
    ClosedForm::Bubble(bp.clone()).sample(grid, p)
}

/// Mean of the samples on the box seam (index 0 along some axis), the
/// torus point set farthest from the box centre.
pub fn far_field_level(u: &Field) -> f64 {
    let grid = u.grid();
    let n = grid.dim();
    let (mut sum, mut count) = (0.0, 0usize);
    for (lin, &v) in u.values().iter().enumerate() {
        let idx = grid.unravel(lin);
        if idx[..n].contains(&0) {
            sum += v;
            count += 1;
        }
    }
    sum / count as f64
}

/// `‖u - m‖^{2*}_{L^{2*}} / ‖u‖^{2*}_{Ḣs}` where `m` is the far-field level.
///
/// `Ḣs` on the torus does not see constants; the numerator is taken on the
/// representative that vanishes at the seam, which plays the role of
/// infinity for fields centred in the box.
pub fn rayleigh_quotient(u: &Field, p: &FracParams) -> Result<f64> {
    p.check_grid(u.grid())?;
    let hs = hs_norm(u, p);
    if hs == 0.0 {
        return Err(LabError::invalid("Rayleigh quotient of a field with zero Ḣs energy"));
    }
    let m = far_field_level(u);
    let gauged = u.map(|v| v - m)?;
    let ts = p.two_star();
    Ok((lp_norm(&gauged, ts)? / hs).powf(ts))
}

/// A bubble fitted to a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub params: BubbleParams,
    /// `‖u - b‖_{L^{2*}} / ‖u‖_{L^{2*}}`.
    pub l2star_distance: f64,
    /// `‖u - b‖_{Ḣs} / ‖u‖_{Ḣs}`.
    pub hs_distance: f64,
}

fn unit_bubble_samples(grid: &Grid, p: &FracParams, lambda: f64, x0: &[f64]) -> Vec<f64> {
    let b = BubbleParams {
        c: 1.0,
        lambda,
        x0: x0.to_vec(),
    };
    ClosedForm::Bubble(b).sample(grid, p).expect("grid matches").values().to_vec()
}

fn lp_dist(u: &[f64], b: &[f64], c: f64, q: f64) -> f64 {
    u.iter()
        .zip(b)
        .map(|(x, y)| (x - c * y).abs().powf(q))
        .sum::<f64>()
}

/// Least-squares amplitude followed by the relative `L^{2*}` misfit.
fn misfit(u: &[f64], b: &[f64], q: f64, norm_q: f64) -> (f64, f64) {
    let num: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    let c = if den > 0.0 { num / den } else { 0.0 };
    (c, (lp_dist(u, b, c, q) / norm_q).powf(1.0 / q))
}

/// Fits `(c, λ, x0)` starting from `(x_init, λ_init)`: a coarse scan over
/// half-dyadic widths and neighbouring grid centres, then a pattern search.
pub fn fit_bubble(u: &Field, p: &FracParams, x_init: &[f64], lambda_init: f64) -> Result<BubbleFit> {
    let grid = *u.grid();
    p.check_grid(&grid)?;
    let q = p.two_star();
    let vals = u.values();
    let norm_q: f64 = vals.iter().map(|v| v.abs().powf(q)).sum();
    if norm_q == 0.0 {
        return Err(LabError::Numerical("cannot fit a bubble to a zero field".into()));
    }
    let n = grid.dim();
    let h = grid.spacing();
    let eval = |lambda: f64, x0: &[f64]| {
        let b = unit_bubble_samples(&grid, p, lambda, x0);
        misfit(vals, &b, q, norm_q).1
    };

    let mut best_x = x_init.to_vec();
    let mut best_l = lambda_init;
    let mut best = f64::INFINITY;
    let shifts: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .map(|code| {
            let mut c = code;
            (0..n)
                .map(|_| {
                    let d = (c % 3) as f64 - 1.0;
                    c /= 3;
                    d * h
                })
                .collect()
        })
        .collect();
    for j in -4..=4 {
        let lambda = lambda_init * 2f64.powf(0.5 * j as f64);
        for sh in &shifts {
            let x: Vec<f64> = x_init.iter().zip(sh).map(|(a, b)| a + b).collect();
            let e = eval(lambda, &x);
            if e < best {
                best = e;
                best_x = x;
                best_l = lambda;
            }
        }
    }

    let mut step_l = 2f64.powf(0.25);
    let mut step_x = 0.5 * h;
    while step_x > 1e-3 * h {
        let mut improved = false;
        for cand in [best_l * step_l, best_l / step_l] {
            let e = eval(cand, &best_x);
            if e < best {
                best = e;
                best_l = cand;
                improved = true;
            }
        }
        for axis in 0..n {
            for sign in [1.0, -1.0] {
                let mut x = best_x.clone();
                x[axis] += sign * step_x;
                let e = eval(best_l, &x);
                if e < best {
                    best = e;
                    best_x = x;
                    improved = true;
                }
            }
        }
        if !improved {
            step_l = step_l.sqrt();
            step_x *= 0.5;
        }
    }

    let b = unit_bubble_samples(&grid, p, best_l, &best_x);
    let (c0, _) = misfit(vals, &b, q, norm_q);
    // golden-section polish of the amplitude in the L^{2*} misfit
    let (mut lo, mut hi) = (0.5 * c0.min(1.5 * c0), 1.5 * c0.max(0.5 * c0));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let bb = lo + phi * (hi - lo);
        if lp_dist(vals, &b, a, q) < lp_dist(vals, &b, bb, q) {
            hi = bb;
        } else {
            lo = a;
        }
    }
    let c = 0.5 * (lo + hi);
    if c == 0.0 || !c.is_finite() {
        return Err(LabError::Numerical("bubble fit degenerated to zero amplitude".into()));
    }
    let params = BubbleParams::new(c, best_l, best_x)?;
    let fitted = Field::new(grid, b.iter().map(|v| c * v).collect())?;
    let residual = u.sub(&fitted)?;
    let l2star_distance = (lp_dist(vals, &b, c, q) / norm_q).powf(1.0 / q);
    let hs_u = hs_norm(u, p);
    Ok(BubbleFit {
        params,
        l2star_distance,
        hs_distance: if hs_u > 0.0 { hs_norm(&residual, p) / hs_u } else { 0.0 },
    })
}

/// One entry of the maximizing-sequence diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticEntry {
    /// Dislocation that pulls the concentration back to unit scale at the origin.
    pub pull_back: Dislocation,
    pub fit: BubbleFit,
}

/// For each field: locate the concentration, fit a bubble, and report the
/// distance of the pulled-back field to it. Distances are computed in the
/// original frame, where they coincide with pulled-back distances by
/// invariance and avoid interpolation error.
pub fn optimizer_diagnostic(seq: &[Field], p: &FracParams) -> Result<Vec<DiagnosticEntry>> {
    seq.iter()
        .enumerate()
        .map(|(i, u)| {
            if u.is_zero() {
                return Err(LabError::invalid(format!("field {i} of the sequence is zero")));
            }
            let grid = u.grid();
            let hit = concentration_argmax(u, p, &crate::profiles::search_radii(grid))?;
            let lambda0 = hit.radius / crate::profiles::radius_per_scale(p);
            let fit = fit_bubble(u, p, &hit.point, lambda0)?;
            let d = Dislocation::new(fit.params.x0.clone(), fit.params.lambda)?;
            Ok(DiagnosticEntry {
                pull_back: d.inverse(),
                fit,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_constant_n4_s1() {
        let v = sharp_constant(4, 1.0).unwrap().value;
        let expect = 3.0 / (32.0 * PI * PI);
        assert!((v / expect - 1.0).abs() < 1e-12, "{v} {expect}");
    }

    #[test]
    fn matches_high_precision_oracle() {
        // 40-digit evaluations of the closed form, computed offline
        let cases = [
            (2, 0.5, std::f64::consts::FRAC_1_PI),
            (1, 0.25, 1.393_203_929_685_676_9),
            (3, 0.5, 0.225_079_079_039_276_52),
            (3, 1.0, 0.006_083_545_039_812_939_4),
            (2, 0.25, 0.643_003_979_898_688_8),
        ];
        for (n, s, want) in cases {
            let got = sharp_constant(n, s).unwrap().value;
            assert!((got / want - 1.0).abs() < 1e-12, "N={n} s={s}: {got}");
        }
    }

    #[test]
    fn rejects_out_of_range_order() {
        assert!(sharp_constant(2, 1.0).is_err());
        assert!(sharp_constant(1, 0.0).is_err());
    }

    #[test]
    fn tail_fraction_closed_forms() {
        // N = 1: (2/π) asin(√x); N = 2: x
        let (l, r) = (1.0, 7.0);
        let x: f64 = l * l / (l * l + r * r);
        assert!((bubble_tail_fraction(1, l, r) - 2.0 / PI * x.sqrt().asin()).abs() < 1e-12);
        assert!((bubble_tail_fraction(2, l, r) - x).abs() < 1e-12);
    }

    #[test]
    fn bubble_peak_and_symmetry() {
        let g = Grid::new(2, 64, 32.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let bp = BubbleParams::new(2.0, 0.5, vec![0.0, 0.0]).unwrap();
        let u = bubble(&g, &p, &bp).unwrap();
        let centre = g.ravel(&[32, 32]);
        assert_eq!(u.values()[centre], 2.0 / 0.5);
        for i in 1..32 {
            for j in 1..32 {
                let a = u.values()[g.ravel(&[32 + i, 32 + j])];
                let b = u.values()[g.ravel(&[32 - i, 32 - j])];
                let c = u.values()[g.ravel(&[32 - i, 32 + j])];
                assert_eq!(a, b);
                assert_eq!(a, c);
            }
        }
    }

    #[test]
    fn bubble_decay_constant() {
        // u(x)|x-x0|^{N-2s} → c; at distance 10λ the ratio is (100/101)^{(N-2s)/2}
        let p = FracParams::new(2, 0.5).unwrap();
        let bp = BubbleParams::new(1.7, 1.0, vec![0.0, 0.0]).unwrap();
        let v = bp.eval(&[10.0, 0.0], &p) * 10.0;
        assert!((v / 1.7 - 1.0).abs() < 0.05);
    }

    #[test]
    fn tail_failure_reports_extent() {
        let g = Grid::new(2, 32, 4.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let bp = BubbleParams::new(1.0, 1.0, vec![0.0, 0.0]).unwrap();
        match bubble(&g, &p, &bp) {
            Err(LabError::TailCheck { required_extent, .. }) => {
                let ok = Grid::new(2, 32, required_extent * 1.01).unwrap();
                assert!(bubble(&ok, &p, &bp).is_ok());
            }
            other => panic!("expected tail failure, got {other:?}"),
        }
    }

    #[test]
    fn quotient_is_scale_invariant() {
        let g = Grid::new(2, 64, 16.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let u = Field::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp()).unwrap();
        let q = rayleigh_quotient(&u, &p).unwrap();
        for a in [-3.0, 0.01, 250.0] {
            let qa = rayleigh_quotient(&u.scaled(a), &p).unwrap();
            assert!((qa / q - 1.0).abs() < 1e-12);
        }
        assert!(rayleigh_quotient(&Field::zeros(g), &p).is_err());
    }
}
