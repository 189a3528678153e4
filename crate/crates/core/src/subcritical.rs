//! Subcritical extremal problems on a bounded domain and their concentration
//! as the exponent approaches the critical one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::extremals::{fit_bubble, BubbleFit};
use crate::field::{build_restricted_operator, Field, FracParams, Grid, RestrictedOperator};
use crate::norms::BallSums;
use crate::profiles::{concentration_argmax, defect_measures, radius_per_scale, DefectReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk { center: Vec<f64>, radius: f64 },
    Box { center: Vec<f64>, half_widths: Vec<f64> },
}

impl DomainSpec {
    fn center(&self) -> &[f64] {
        match self {
            DomainSpec::Disk { center, .. } | DomainSpec::Box { center, .. } => center,
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Disk { center, radius } => {
                x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>() < radius * radius
            }
            DomainSpec::Box { center, half_widths } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((a, c), w)| (a - c).abs() < *w),
        }
    }

    /// Grid mask of the domain. Fails when it is empty or comes closer than
    /// `L/8` to the box boundary.
    pub fn mask(&self, grid: &Grid) -> Result<Vec<bool>> {
        let n = grid.dim();
        let ok_dim = match self {
            DomainSpec::Disk { center, radius } => center.len() == n && *radius > 0.0,
            DomainSpec::Box { center, half_widths } => {
                center.len() == n && half_widths.len() == n && half_widths.iter().all(|w| *w > 0.0)
            }
        };
        if !ok_dim {
            return Err(LabError::invalid(format!(
                "domain must have N = {n} coordinates and positive size"
            )));
        }
        let limit = 0.5 * grid.extent() - grid.extent() / 8.0;
        let mask: Vec<bool> = (0..grid.len())
            .map(|lin| self.contains(&grid.position(lin)[..n]))
            .collect();
        if !mask.iter().any(|&m| m) {
            return Err(LabError::invalid("domain contains no grid points"));
        }
        for (lin, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let x = grid.position(lin);
            if x[..n].iter().any(|c| c.abs() > limit) {
                return Err(LabError::invalid(format!(
                    "domain must stay L/8 = {} away from the box boundary",
                    grid.extent() / 8.0
                )));
            }
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative change of `F_ε` over `window` accepted steps that counts as
    /// converged.
    pub tolerance: f64,
    pub window: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tolerance: 1e-9,
            window: 10,
            starts: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubcriticalResult {
    pub epsilon: f64,
    pub s_eps: f64,
    /// Zero outside the domain, with `u'Au = 1`.
    pub maximizer: Field,
    pub iterations: usize,
    pub lagrange_lambda: f64,
    /// Largest share of `∫|u|^{2*}` in a ball of radius `L/8`.
    pub ball_fraction: f64,
    pub peak: Vec<f64>,
    pub constraint: f64,
    /// `‖Au - λ_h h^N|u|^{p-2}u‖ / ‖Au‖`.
    pub euler_lagrange_residual: f64,
    /// `F_ε` after every accepted step.
    pub history: Vec<f64>,
}

fn functional(u: &[f64], p: f64, vol: f64) -> f64 {
    vol * u.iter().map(|v| v.abs().powf(p)).sum::<f64>()
}

fn normalize(op: &RestrictedOperator, u: &[f64]) -> Option<Vec<f64>> {
    let q = op.quadratic_form(u);
    if !(q > 0.0 && q.is_finite()) {
        return None;
    }
    let k = q.sqrt();
    Some(u.iter().map(|v| v / k).collect())
}

struct Ascent {
    u: Vec<f64>,
    f: f64,
    iterations: usize,
    history: Vec<f64>,
    converged: bool,
}

/// Projected ascent along the `A`-gradient `A⁻¹∇F_ε`, which is an ascent
/// direction for the constrained problem; the step is halved until `F_ε`
/// increases and doubled after every accepted step.
fn ascend(op: &RestrictedOperator, u0: &[f64], p: f64, cfg: &SolverConfig) -> Option<Ascent> {
    let vol = op.grid().cell_volume();
    let mut u = normalize(op, u0)?;
    let mut f = functional(&u, p, vol);
    let mut history = vec![f];
    let mut step = 1.0 / (p * f);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let grad: Vec<f64> = u.iter().map(|v| p * vol * v.abs().powf(p - 2.0) * v).collect();
        let dir = op.solve(&grad).ok()?;
        let mut accepted = false;
        while step > 1e-16 / (p * f) {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            if let Some(v) = normalize(op, &trial) {
                let fv = functional(&v, p, vol);
                if fv > f {
                    u = v;
                    f = fv;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // no step increases F_ε: stationary to working precision
            converged = true;
            break;
        }
        history.push(f);
        step *= 2.0;
        let len = history.len();
        if len > cfg.window {
            let old = history[len - 1 - cfg.window];
            if (f - old) / f < cfg.tolerance {
                converged = true;
                break;
            }
        }
    }
    Some(Ascent {
        u,
        f,
        iterations,
        history,
        converged,
    })
}

fn starts(op: &RestrictedOperator, domain: &DomainSpec, cfg: &SolverConfig) -> Vec<Vec<f64>> {
    let grid = op.grid();
    let n = grid.dim();
    let c = domain.center();
    let width = match domain {
        DomainSpec::Disk { radius, .. } => *radius,
        DomainSpec::Box { half_widths, .. } => half_widths.iter().cloned().fold(f64::MAX, f64::min),
    };
    let bump: Vec<f64> = op
        .indices()
        .iter()
        .map(|&i| {
            let x = grid.position(i);
            let r2: f64 = (0..n).map(|a| (x[a] - c[a]).powi(2)).sum();
            (-4.0 * r2 / (width * width)).exp()
        })
        .collect();
    let mut out = vec![bump];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 1..cfg.starts.max(1) {
        out.push(op.indices().iter().map(|_| rng.gen_range(0.0..1.0)).collect());
    }
    out
}

fn ball_fraction(u: &Field, p: &FracParams) -> f64 {
    let w: Vec<f64> = u.values().iter().map(|v| v.abs().powf(p.two_star())).collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let (sums, _) = BallSums::new(u.grid(), &w).sums(u.grid().extent() / 8.0);
    sums.iter().cloned().fold(0.0, f64::max) / total
}

/// Maximizes `F_ε(u) = h^N Σ_Ω |u|^{2*-ε}` over `u'Au ≤ 1`. Without an
/// initial iterate the best of `cfg.starts` starts is kept (a centred bump
/// and seeded random fields).
pub fn solve_subcritical(
    op: &RestrictedOperator,
    domain: &DomainSpec,
    p: &FracParams,
    epsilon: f64,
    initial: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SubcriticalResult> {
    p.check_grid(op.grid())?;
    if !op.is_definite() {
        return Err(LabError::Numerical("restricted operator is not positive definite".into()));
    }
    let ts = p.two_star();
    if !(epsilon > 0.0 && epsilon < ts - 2.0) {
        return Err(LabError::invalid(format!(
            "epsilon must lie in (0, 2*-2) = (0, {}), got {epsilon}",
            ts - 2.0
        )));
    }
    if cfg.max_iter == 0 || cfg.window == 0 || !(cfg.tolerance > 0.0) {
        return Err(LabError::invalid("solver needs max_iter, window and tolerance positive"));
    }
    let power = ts - epsilon;
    let candidates = match initial {
        Some(u0) if u0.len() == op.size() => vec![u0.to_vec()],
        Some(_) => return Err(LabError::invalid("initial iterate does not match the domain")),
        None => starts(op, domain, cfg),
    };
    let mut best: Option<Ascent> = None;
    for u0 in candidates {
        if let Some(run) = ascend(op, &u0, power, cfg) {
            if best.as_ref().is_none_or(|b| run.f > b.f) {
                best = Some(run);
            }
        }
    }
    let Some(best) = best else {
        return Err(LabError::Numerical("every start has zero energy".into()));
    };
    if !best.converged {
        return Err(LabError::NotConverged {
            iterations: best.iterations,
            best_value: best.f,
            best: best.u,
        });
    }

    let grid = op.grid();
    let vol = grid.cell_volume();
    let u = best.u;
    let au = op.apply(&u);
    let lambda_h = 1.0 / best.f;
    let residual: f64 = au
        .iter()
        .zip(&u)
        .map(|(a, v)| (a - lambda_h * vol * v.abs().powf(power - 2.0) * v).powi(2))
        .sum::<f64>()
        .sqrt();
    let au_norm = au.iter().map(|a| a * a).sum::<f64>().sqrt();
    let constraint = au.iter().zip(&u).map(|(a, b)| a * b).sum();
    let field = op.extend(&u);
    let (peak_lin, _) = field
        .values()
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    let peak = grid.position(peak_lin)[..grid.dim()].to_vec();
    Ok(SubcriticalResult {
        epsilon,
        s_eps: best.f,
        ball_fraction: ball_fraction(&field, p),
        maximizer: field,
        iterations: best.iterations,
        lagrange_lambda: lambda_h,
        peak,
        constraint,
        euler_lagrange_residual: residual / au_norm,
        history: best.history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectConfig {
    /// Cell side in grid spacings.
    pub cell_points: usize,
    pub atom_threshold: f64,
}

impl Default for DefectConfig {
    fn default() -> Self {
        Self {
            cell_points: 32,
            atom_threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub results: Vec<SubcriticalResult>,
    pub defects: Vec<DefectReport>,
    /// Set when a solve failed; `results` holds the entries before it.
    pub aborted: Option<String>,
}

/// Default `ε` list `{0.8, 0.4, 0.2, 0.1}·(2*-2)/2`.
pub fn default_eps_list(p: &FracParams) -> Vec<f64> {
    let half = (p.two_star() - 2.0) / 2.0;
    [0.8, 0.4, 0.2, 0.1].iter().map(|f| f * half).collect()
}

/// Warm-started solves along a strictly decreasing `ε` list.
pub fn epsilon_sweep(
    domain: &DomainSpec,
    grid: &Grid,
    p: &FracParams,
    eps_list: &[f64],
    solver: &SolverConfig,
    defect: &DefectConfig,
) -> Result<Sweep> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::invalid("epsilon list must be nonempty and strictly decreasing"));
    }
    let mask = domain.mask(grid)?;
    let op = build_restricted_operator(grid, &mask, p)?;
    let mut results: Vec<SubcriticalResult> = Vec::new();
    let mut defects = Vec::new();
    for &eps in eps_list {
        let warm = results.last().map(|r| op.restrict(&r.maximizer));
        match solve_subcritical(&op, domain, p, eps, warm.as_deref(), solver) {
            Ok(r) => {
                defects.push(defect_measures(
                    &r.maximizer,
                    p,
                    defect.cell_points as f64 * grid.spacing(),
                    defect.atom_threshold,
                )?);
                results.push(r);
            }
            Err(e @ LabError::InvalidParameter(_)) => return Err(e),
            Err(e) => {
                return Ok(Sweep {
                    results,
                    defects,
                    aborted: Some(format!("epsilon = {eps}: {e}")),
                })
            }
        }
    }
    Ok(Sweep {
        results,
        defects,
        aborted: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledLimitReport {
    pub fits: Vec<BubbleFit>,
    pub distances: Vec<f64>,
    pub decreasing: bool,
}

/// Fits a bubble to every maximizer of the tail and reports the `L^{2*}`
/// distance between the pulled-back maximizer and the fitted bubble.
pub fn rescaled_limit_check(tail: &[SubcriticalResult], p: &FracParams) -> Result<RescaledLimitReport> {
    let fields: Vec<&Field> = tail.iter().map(|r| &r.maximizer).collect();
    rescaled_limit_fields(&fields, p)
}

pub fn rescaled_limit_fields(fields: &[&Field], p: &FracParams) -> Result<RescaledLimitReport> {
    if fields.len() < 2 {
        return Err(LabError::invalid("rescaled limit check needs at least two maximizers"));
    }
    let kappa = radius_per_scale(p);
    let fits = fields
        .iter()
        .map(|u| {
            let hit = concentration_argmax(u, p, &crate::profiles::search_radii(u.grid()))?;
            fit_bubble(u, p, &hit.point, hit.radius / kappa)
        })
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = fits.iter().map(|f| f.l2star_distance).collect();
    Ok(RescaledLimitReport {
        decreasing: distances.windows(2).all(|w| w[1] < w[0]),
        fits,
        distances,
    })
}
