//! Concentration search, greedy profile extraction and defect measures.

use serde::{Deserialize, Serialize};

use crate::dislocations::{interpolate, Dislocation};
use crate::error::{LabError, Result};
use crate::extremals::{far_field_level, sharp_constant};
use crate::field::{Field, FracParams, Grid};
use crate::norms::{energy_density, hs_norm, l2star_norm, morrey_norm, BallSums, MorreyParams};

/// Best `(centre, radius)` of the score `R^{-2s}∫_{B_R(x)}|u|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationHit {
    pub point: Vec<f64>,
    pub index: usize,
    pub radius: f64,
    pub score: f64,
}

/// Relative score difference below which two radii count as tied; the grid
/// score of one exact bubble moves by about this much across scales.
pub const TIE_TOLERANCE: f64 = 0.01;

/// Half-dyadic radii `h·2^{k/2}` up to `L/4`. Larger balls see a sizeable
/// part of the torus and merge unrelated concentrations; the half steps keep
/// every scale within `2^{1/4}` of the score's peak radius.
pub fn search_radii(grid: &Grid) -> Vec<f64> {
    let cap = 0.25 * grid.extent() * (1.0 + 1e-12);
    (0..)
        .map(|k| grid.spacing() * 2f64.powf(0.5 * k as f64))
        .take_while(|&r| r <= cap)
        .collect()
}

/// Scans every grid centre and every radius. Ties (within
/// [`TIE_TOLERANCE`] across radii) go to the smallest radius, then the
/// smallest linear index.
pub fn concentration_argmax(u: &Field, p: &FracParams, radii: &[f64]) -> Result<ConcentrationHit> {
    let grid = *u.grid();
    p.check_grid(&grid)?;
    if u.is_zero() {
        return Err(LabError::invalid("concentration search on a zero field"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(LabError::invalid("concentration radii must be positive"));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.total_cmp(b));
    let weights: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let balls = BallSums::new(&grid, &weights);
    let vol = grid.cell_volume();
    let mut best: Option<ConcentrationHit> = None;
    for &radius in &radii {
        let (sums, _) = balls.sums(radius);
        let factor = radius.powf(-2.0 * p.s()) * vol;
        let mut top = (0, f64::NEG_INFINITY);
        for (i, &v) in sums.iter().enumerate() {
            if v > top.1 {
                top = (i, v);
            }
        }
        let score = factor * top.1;
        if best.as_ref().is_none_or(|b| score > b.score * (1.0 + TIE_TOLERANCE)) {
            let x = grid.position(top.0);
            best = Some(ConcentrationHit {
                point: x[..grid.dim()].to_vec(),
                index: top.0,
                radius,
                score,
            });
        }
    }
    Ok(best.expect("radii are nonempty"))
}

/// Score at one centre by direct summation over the ball.
fn score_at(u: &Field, p: &FracParams, centre: &[f64], radius: f64) -> f64 {
    let grid = u.grid();
    let n = grid.dim();
    let sum: f64 = u
        .values()
        .iter()
        .enumerate()
        .filter(|(lin, _)| {
            let x = grid.position(*lin);
            grid.torus_distance(&x[..n], centre) < radius
        })
        .map(|(_, v)| v * v)
        .sum();
    radius.powf(-2.0 * p.s()) * grid.cell_volume() * sum
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Radius maximizing the concentration score of a unit-width bubble, so a
/// concentration at radius `R` corresponds to a width `R/κ`.
pub fn radius_per_scale(p: &FracParams) -> f64 {
    let n = p.dim() as f64;
    let e = n - 2.0 * p.s();
    let score = |log_r: f64| {
        let r = log_r.exp();
        let mass = simpson(|t| t.powf(n - 1.0) * (1.0 + t * t).powf(-e), 0.0, r, 4000);
        r.powf(-2.0 * p.s()) * mass
    };
    let (mut lo, mut hi) = ((1e-2f64).ln(), (1e4f64).ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if score(a) > score(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub max_profiles: usize,
    pub stop_fraction: f64,
    /// Window radius in rescaled units.
    pub window_radius: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            max_profiles: 4,
            stop_fraction: 0.02,
            window_radius: 8.0,
        }
    }
}

impl ProfileConfig {
    pub const MAX_PROFILES: usize = 8;

    pub fn validate(&self) -> Result<()> {
        if self.max_profiles == 0 || self.max_profiles > Self::MAX_PROFILES {
            return Err(LabError::invalid(format!(
                "max_profiles must lie in 1..={}, got {}",
                Self::MAX_PROFILES,
                self.max_profiles
            )));
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction < 1.0) {
            return Err(LabError::invalid(format!(
                "stop_fraction must lie in (0, 1), got {}",
                self.stop_fraction
            )));
        }
        if !(self.window_radius > 0.0 && self.window_radius.is_finite()) {
            return Err(LabError::invalid("window_radius must be positive"));
        }
        Ok(())
    }
}

/// One extracted profile. `field` lives on the grid dilated by `1/λ`, so
/// that rescaled coordinates map exactly onto physical grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub dislocation: Dislocation,
    pub field: Field,
    pub score: f64,
    /// The width fell outside the representable range and was clamped.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ZeroInput,
    Threshold,
    MaxProfiles,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDecomposition {
    pub profiles: Vec<Profile>,
    pub residual: Field,
    pub pythagoras_deficit: f64,
    pub separations: Vec<Vec<f64>>,
    pub residual_l2star: f64,
    pub residual_morrey: f64,
    pub initial_score: f64,
    pub initial_morrey: f64,
    /// Relative `L²` error of `u = Σ D_j ψ_j + residual`.
    pub reconstruction_error: f64,
    pub stop_reason: StopReason,
}

/// `1` inside radius 1, C² smoothstep down to `0` at radius 3.
pub fn window(t: f64) -> f64 {
    let z = ((t - 1.0) / 2.0).clamp(0.0, 1.0);
    1.0 - z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
}

/// Pushes a profile living on a dilated grid forward onto `grid`.
pub fn push_forward(d: &Dislocation, psi: &Field, grid: &Grid, p: &FracParams) -> Result<Field> {
    let n = grid.dim();
    let amp = d.amplitude(p);
    let mut z = [0.0; 3];
    let values = (0..grid.len())
        .map(|lin| {
            let x = grid.position(lin);
            for a in 0..n {
                z[a] = grid.wrap_delta(x[a] - d.y[a]) / d.lambda;
            }
            amp * interpolate(psi, &z[..n])
        })
        .collect();
    Field::new(*grid, values)
}

/// Pulls `piece` back by `d` onto the grid dilated by `1/λ`.
fn pull_back(d: &Dislocation, piece: &Field, p: &FracParams) -> Result<Field> {
    let grid = piece.grid();
    let n = grid.dim();
    let target = grid.dilated(1.0 / d.lambda)?;
    let amp = d.lambda.powf(p.scaling_exponent());
    let mut x = [0.0; 3];
    let values = (0..target.len())
        .map(|lin| {
            let z = target.position(lin);
            for a in 0..n {
                x[a] = grid.wrap_coord(d.y[a] + d.lambda * z[a]);
            }
            amp * interpolate(piece, &x[..n])
        })
        .collect();
    Field::new(target, values)
}

fn neighbour_offsets(n: usize) -> Vec<Vec<i64>> {
    (0..3usize.pow(n as u32))
        .map(|code| {
            let mut c = code;
            (0..n)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .collect()
}

/// Local refinement over the neighbouring grid centres and quarter-dyadic radii.
fn refine_hit(u: &Field, p: &FracParams, hit: &ConcentrationHit) -> ConcentrationHit {
    let grid = u.grid();
    let n = grid.dim();
    let m = grid.points_per_axis() as i64;
    let base = grid.unravel(hit.index);
    let mut best = hit.clone();
    best.score = score_at(u, p, &hit.point, hit.radius);
    let step = 2f64.powf(0.25);
    for radius in [hit.radius / step, hit.radius, hit.radius * step] {
        for off in neighbour_offsets(n) {
            let idx: Vec<usize> = (0..n)
                .map(|a| (base[a] as i64 + off[a]).rem_euclid(m) as usize)
                .collect();
            let lin = grid.ravel(&idx);
            let x = grid.position(lin);
            let score = score_at(u, p, &x[..n], radius);
            if score > best.score {
                best = ConcentrationHit {
                    point: x[..n].to_vec(),
                    index: lin,
                    radius,
                    score,
                };
            }
        }
    }
    best
}

fn l2(u: &Field) -> f64 {
    u.l2_dot(u).sqrt()
}

/// Greedy extraction: locate the strongest concentration, window it in
/// rescaled coordinates, subtract its push-forward, repeat.
pub fn extract_profiles(u: &Field, p: &FracParams, cfg: &ProfileConfig) -> Result<ProfileDecomposition> {
    cfg.validate()?;
    let grid = *u.grid();
    p.check_grid(&grid)?;
    let morrey = MorreyParams::scale_invariant(&grid, p, 2.0)?;
    if u.is_zero() {
        return Ok(ProfileDecomposition {
            profiles: Vec::new(),
            residual: u.clone(),
            pythagoras_deficit: 0.0,
            separations: Vec::new(),
            residual_l2star: 0.0,
            residual_morrey: 0.0,
            initial_score: 0.0,
            initial_morrey: 0.0,
            reconstruction_error: 0.0,
            stop_reason: StopReason::ZeroInput,
        });
    }
    let radii = search_radii(&grid);
    let kappa = radius_per_scale(p);
    let (lo, hi) = grid.lambda_range();
    let n = grid.dim();

    let mut current = u.clone();
    let mut profiles: Vec<Profile> = Vec::new();
    let mut pushed_total = Field::zeros(grid);
    let mut initial_score = None;
    let stop_reason = loop {
        if profiles.len() == cfg.max_profiles {
            break StopReason::MaxProfiles;
        }
        if current.is_zero() {
            break StopReason::Exhausted;
        }
        let hit = concentration_argmax(&current, p, &radii)?;
        let initial = *initial_score.get_or_insert(hit.score);
        if hit.score < cfg.stop_fraction * initial {
            break StopReason::Threshold;
        }
        let hit = refine_hit(&current, p, &hit);
        let raw = hit.radius / kappa;
        let lambda = raw.clamp(lo, hi);
        let d = Dislocation::new(hit.point.clone(), lambda)?;
        let reach = cfg.window_radius * lambda;
        let values = (0..grid.len())
            .map(|lin| {
                let x = grid.position(lin);
                window(grid.torus_distance(&x[..n], &d.y) / reach) * current.values()[lin]
            })
            .collect();
        let piece = Field::new(grid, values)?;
        let psi = pull_back(&d, &piece, p)?;
        let pushed = push_forward(&d, &psi, &grid, p)?;
        current = current.sub(&pushed)?;
        pushed_total = pushed_total.add(&pushed)?;
        profiles.push(Profile {
            dislocation: d,
            field: psi,
            score: hit.score,
            truncated: raw != lambda,
        });
    };

    let hs_u = hs_norm(u, p);
    let hs_res = hs_norm(&current, p);
    let sum_profiles: f64 = profiles.iter().map(|pr| hs_norm(&pr.field, p).powi(2)).sum();
    let separations = profiles
        .iter()
        .map(|a| {
            profiles
                .iter()
                .map(|b| a.dislocation.separation(&b.dislocation, &grid))
                .collect()
        })
        .collect();
    let recon = u.sub(&pushed_total)?.sub(&current)?;
    Ok(ProfileDecomposition {
        pythagoras_deficit: (hs_u * hs_u - sum_profiles - hs_res * hs_res).abs(),
        separations,
        residual_l2star: l2star_norm(&current, p),
        residual_morrey: morrey_norm(&current, &morrey),
        initial_score: initial_score.unwrap_or(0.0),
        initial_morrey: morrey_norm(u, &morrey),
        reconstruction_error: l2(&recon) / l2(u),
        residual: current,
        profiles,
        stop_reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub cell: usize,
    pub center: Vec<f64>,
    pub nu: f64,
    pub mu: f64,
    /// `ν / (S*·μ^{2*/2})`.
    pub quantization_ratio: f64,
    pub quantization_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub cell_size: f64,
    pub cells_per_axis: usize,
    pub nu_cells: Vec<f64>,
    pub mu_cells: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub slack: f64,
    /// Seam level subtracted before computing the `|u|^{2*}` density.
    pub far_field_level: f64,
}

impl DefectReport {
    pub fn quantization_ok(&self) -> bool {
        self.atoms.iter().all(|a| a.quantization_ok)
    }
}

pub const QUANTIZATION_SLACK: f64 = 0.05;

/// Aggregates `|u-m|^{2*}` and `|(-Δ)^{s/2}u|²` over cubic cells of side
/// `cell_size`, with cells laid out so that one is centred on the origin.
/// `m` is the seam level of [`far_field_level`]; it is zero for fields
/// supported away from the seam.
/// Cells holding more than `atom_threshold` of the total `|u|^{2*}` mass are
/// reported as atoms and checked against `ν ≤ S*·μ^{2*/2}`.
pub fn defect_measures(u: &Field, p: &FracParams, cell_size: f64, atom_threshold: f64) -> Result<DefectReport> {
    let grid = *u.grid();
    p.check_grid(&grid)?;
    let h = grid.spacing();
    let m = grid.points_per_axis();
    let ratio = cell_size / h;
    let c = ratio.round() as usize;
    if c == 0 || (ratio - c as f64).abs() > 1e-9 * ratio || !m.is_multiple_of(c) {
        return Err(LabError::invalid(format!(
            "cell size {cell_size} must be a multiple of h = {h} dividing the box"
        )));
    }
    if !(atom_threshold > 0.0 && atom_threshold <= 1.0) {
        return Err(LabError::invalid("atom threshold must lie in (0, 1]"));
    }
    let n = grid.dim();
    let per_axis = m / c;
    let shift = c / 2;
    let ncells = per_axis.pow(n as u32);
    let vol = grid.cell_volume();
    let ts = p.two_star();
    let energy = energy_density(u, p);
    let level = far_field_level(u);
    let mut nu = vec![0.0; ncells];
    let mut mu = vec![0.0; ncells];
    for (lin, (&v, &e)) in u.values().iter().zip(&energy).enumerate() {
        let idx = grid.unravel(lin);
        let cell = (0..n).fold(0, |acc, a| acc * per_axis + ((idx[a] + shift) % m) / c);
        nu[cell] += vol * (v - level).abs().powf(ts);
        mu[cell] += vol * e;
    }
    let total: f64 = nu.iter().sum();
    let s_star = sharp_constant(n, p.s())?.value;
    let atoms = (0..ncells)
        .filter(|&k| total > 0.0 && nu[k] > atom_threshold * total)
        .map(|k| {
            let mut rest = k;
            let mut center = vec![0.0; n];
            for a in (0..n).rev() {
                let j = rest % per_axis;
                rest /= per_axis;
                let lower = -0.5 * grid.extent() + (j * c) as f64 * h - shift as f64 * h;
                center[a] = grid.wrap_coord(lower + 0.5 * cell_size);
            }
            let q = nu[k] / (s_star * mu[k].powf(ts / 2.0));
            Atom {
                cell: k,
                center,
                nu: nu[k],
                mu: mu[k],
                quantization_ratio: q,
                quantization_ok: q <= 1.0 + QUANTIZATION_SLACK,
            }
        })
        .collect();
    Ok(DefectReport {
        cell_size,
        cells_per_axis: per_axis,
        nu_cells: nu,
        mu_cells: mu,
        atoms,
        slack: QUANTIZATION_SLACK,
        far_field_level: level,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLossReport {
    /// `∫_A |(-Δ)^{s/2}u_n|²` per field.
    pub outside_energy: Vec<f64>,
    /// `‖u_n‖²_{Ḣs}` per field.
    pub total_energy: Vec<f64>,
    /// Last recorded outside energy; nonlocality keeps it positive.
    pub floor: f64,
}

/// Energy that fields supported in `omega` carry in the region `outside`.
/// The two masks must be at least two grid cells apart.
pub fn no_energy_loss_check(
    seq: &[Field],
    p: &FracParams,
    omega: &[bool],
    outside: &[bool],
) -> Result<EnergyLossReport> {
    let Some(first) = seq.first() else {
        return Ok(EnergyLossReport {
            outside_energy: Vec::new(),
            total_energy: Vec::new(),
            floor: 0.0,
        });
    };
    let grid = *first.grid();
    if omega.len() != grid.len() || outside.len() != grid.len() {
        return Err(LabError::invalid("masks do not match the grid"));
    }
    let n = grid.dim();
    let gap = 2.0 * grid.spacing();
    let inside: Vec<[f64; 3]> = (0..grid.len()).filter(|&i| omega[i]).map(|i| grid.position(i)).collect();
    for i in (0..grid.len()).filter(|&i| outside[i]) {
        let x = grid.position(i);
        if inside.iter().any(|y| grid.torus_distance(&x[..n], &y[..n]) < gap) {
            return Err(LabError::invalid(
                "outside region overlaps a neighbourhood of the support domain",
            ));
        }
    }
    let vol = grid.cell_volume();
    let mut outside_energy = Vec::with_capacity(seq.len());
    let mut total_energy = Vec::with_capacity(seq.len());
    for (k, u) in seq.iter().enumerate() {
        if u.grid() != &grid {
            return Err(LabError::invalid(format!("field {k} is on a different grid")));
        }
        if u.values().iter().zip(omega).any(|(&v, &m)| !m && v != 0.0) {
            return Err(LabError::invalid(format!("field {k} is not supported in the domain")));
        }
        let e = energy_density(u, p);
        outside_energy.push(vol * e.iter().zip(outside).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>());
        total_energy.push(hs_norm(u, p).powi(2));
    }
    Ok(EnergyLossReport {
        floor: *outside_energy.last().unwrap_or(&0.0),
        outside_energy,
        total_energy,
    })
}
