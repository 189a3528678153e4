use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::config::LabConfig;
use super::manifest::RunManifest;
use crate::audits::{audit_chain, audit_refined, generate_corpus, reference_corpus, rows_to_csv, LabeledField};
use crate::closed_form::ClosedForm;
use crate::error::{LabError, Result};
use crate::extremals::{sharp_constant, BubbleParams};
use crate::field::io::{read_field, write_field};
use crate::field::{Field, FracParams, Grid};
use crate::norms::{hs_norm, l2star_norm, norm_report};
use crate::profiles::extract_profiles;
use crate::subcritical::{epsilon_sweep, Sweep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    SharpConstant,
    Norms,
    AuditRefined,
    AuditChain,
    ProfileExtract,
    SubcriticalSweep,
    CcaAtoms,
    /// The six reference experiments in order.
    Pipeline,
}

impl Command {
    pub const PIPELINE: [Command; 6] = [
        Command::SharpConstant,
        Command::Norms,
        Command::AuditRefined,
        Command::AuditChain,
        Command::ProfileExtract,
        Command::SubcriticalSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SharpConstant => "sharp-constant",
            Command::Norms => "norms",
            Command::AuditRefined => "audit-refined",
            Command::AuditChain => "audit-chain",
            Command::ProfileExtract => "profile-extract",
            Command::SubcriticalSweep => "subcritical-sweep",
            Command::CcaAtoms => "cca-atoms",
            Command::Pipeline => "pipeline",
        }
    }
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| LabError::io(&path, e))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Format(e.to_string()))?;
    write_text(dir, name, &(text + "\n"))
}

pub fn sharp_constant_csv(cfg: &LabConfig) -> Result<String> {
    let mut out = String::from("N,s,two_star,S_star\n");
    for pt in &cfg.sharp_constant.points {
        let p = FracParams::new(pt.dim, pt.order_s)?;
        let c = sharp_constant(pt.dim, pt.order_s)?;
        let _ = writeln!(out, "{},{},{},{}", pt.dim, f(pt.order_s), f(p.two_star()), f(c.value));
    }
    Ok(out)
}

fn corpus_fields(cfg: &LabConfig, grid: &Grid, p: &FracParams) -> Result<Vec<LabeledField>> {
    let spec = reference_corpus(grid.dim(), grid.extent(), cfg.seed);
    generate_corpus(&spec, grid, p)
}

/// Two bubbles in opposite quadrants with widths `L/16` and `L/128` and
/// equal `Ḣs` norms on the whole space, `c ∝ λ^{(N-2s)/2}`.
pub fn two_bubble_synthetic(grid: &Grid, p: &FracParams) -> Result<(Field, [BubbleParams; 2])> {
    let n = grid.dim();
    let q = grid.extent() / 4.0;
    let wide = BubbleParams::new(1.0, grid.extent() / 16.0, vec![-q; n])?;
    let ratio = 0.125f64;
    let narrow = BubbleParams::new(ratio.powf(p.scaling_exponent()), wide.lambda * ratio, vec![q; n])?;
    crate::extremals::bubble(grid, p, &wide)?;
    crate::extremals::bubble(grid, p, &narrow)?;
    let u = ClosedForm::Sum(vec![ClosedForm::Bubble(wide.clone()), ClosedForm::Bubble(narrow.clone())]).sample(grid, p)?;
    Ok((u, [wide, narrow]))
}

fn sweep_csv(sweep: &Sweep, dim: usize) -> String {
    let mut out = String::from("epsilon,S_eps,ball_fraction,iterations,lagrange_lambda,euler_lagrange_residual,atoms");
    for a in 0..dim {
        let _ = write!(out, ",peak_x{a}");
    }
    out.push('\n');
    for (r, d) in sweep.results.iter().zip(&sweep.defects) {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            f(r.epsilon),
            f(r.s_eps),
            f(r.ball_fraction),
            r.iterations,
            f(r.lagrange_lambda),
            f(r.euler_lagrange_residual),
            d.atoms.len()
        );
        for x in &r.peak {
            let _ = write!(out, ",{}", f(*x));
        }
        out.push('\n');
    }
    out
}

fn run_sweep(cfg: &LabConfig) -> Result<Sweep> {
    let grid = cfg.subcritical_grid()?;
    let p = cfg.frac()?;
    epsilon_sweep(&cfg.domain(), &grid, &p, &cfg.eps_list()?, &cfg.solver(), &cfg.defect())
}

fn aborted(sweep: &Sweep) -> Result<()> {
    match &sweep.aborted {
        Some(msg) => Err(LabError::Numerical(format!("subcritical sweep aborted at {msg}"))),
        None => Ok(()),
    }
}

/// Runs one command and returns the files it wrote.
fn run_one(command: Command, cfg: &LabConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.output_dir.join(command.name());
    match command {
        Command::SharpConstant => Ok(vec![write_text(&dir, "sharp_constant.csv", &sharp_constant_csv(cfg)?)?]),
        Command::Norms => {
            let grid = cfg.grid()?;
            let p = cfg.frac()?;
            let fields = match &cfg.norms.input {
                Some(path) => vec![LabeledField {
                    label: path.display().to_string(),
                    field: read_field(path)?,
                }],
                None => corpus_fields(cfg, &grid, &p)?,
            };
            let reports = fields
                .iter()
                .map(|lf| {
                    let p = FracParams::new(lf.field.grid().dim(), p.s())?;
                    Ok(json!({ "label": lf.label, "report": norm_report(&lf.field, &p)? }))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![write_json(&dir, "norms.json", &reports)?])
        }
        Command::AuditRefined => {
            let grid = cfg.grid()?;
            let p = cfg.frac()?;
            let fields = corpus_fields(cfg, &grid, &p)?;
            let theta = cfg.audit.theta.unwrap_or(2.0 / p.two_star());
            let audit = audit_refined(&fields, &p, theta, cfg.audit.morrey_r)?;
            Ok(vec![write_text(&dir, "audit_refined.csv", &rows_to_csv(&audit.rows))?])
        }
        Command::AuditChain => {
            let grid = cfg.grid()?;
            let p = cfg.frac()?;
            let fields = corpus_fields(cfg, &grid, &p)?;
            let audit = audit_chain(&fields, &p)?;
            if !audit.weak_violations.is_empty() {
                return Err(LabError::Numerical(format!(
                    "weak norm above strong norm for {}",
                    audit.weak_violations.join(", ")
                )));
            }
            Ok(vec![write_text(&dir, "audit_chain.csv", &rows_to_csv(&audit.rows))?])
        }
        Command::ProfileExtract => {
            let grid = cfg.grid()?;
            let p = cfg.profile_frac()?;
            let (u, truth) = match &cfg.profiles.input {
                Some(path) => (read_field(path)?, None),
                None => {
                    let (u, t) = two_bubble_synthetic(&grid, &p)?;
                    (u, Some(t))
                }
            };
            let p = FracParams::new(u.grid().dim(), p.s())?;
            let dec = extract_profiles(&u, &p, &cfg.profiles.extraction())?;
            let mut files = Vec::new();
            let mut profiles = Vec::new();
            for (j, pr) in dec.profiles.iter().enumerate() {
                let mut entry = json!({
                    "center": pr.dislocation.y,
                    "lambda": pr.dislocation.lambda,
                    "score": pr.score,
                    "truncated": pr.truncated,
                    "hs": hs_norm(&pr.field, &p),
                });
                if cfg.profiles.write_fields {
                    std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
                    let name = format!("profile_{j}.fslb");
                    write_field(&dir.join(&name), &pr.field)?;
                    entry["field_file"] = json!(name);
                    files.push(dir.join(name));
                }
                profiles.push(entry);
            }
            let report = json!({
                "s": p.s(),
                "input_hs": hs_norm(&u, &p),
                "input_l2star": l2star_norm(&u, &p),
                "truth": truth,
                "stop_reason": dec.stop_reason,
                "initial_score": dec.initial_score,
                "initial_morrey": dec.initial_morrey,
                "residual_l2star": dec.residual_l2star,
                "residual_morrey": dec.residual_morrey,
                "pythagoras_deficit": dec.pythagoras_deficit,
                "reconstruction_error": dec.reconstruction_error,
                "separations": dec.separations,
                "profiles": profiles,
            });
            files.insert(0, write_json(&dir, "profile_extract.json", &report)?);
            Ok(files)
        }
        Command::SubcriticalSweep => {
            let sweep = run_sweep(cfg)?;
            let path = write_text(&dir, "subcritical_sweep.csv", &sweep_csv(&sweep, cfg.grid.dim))?;
            aborted(&sweep)?;
            Ok(vec![path])
        }
        Command::CcaAtoms => {
            let sweep = run_sweep(cfg)?;
            aborted(&sweep)?;
            let reports: Vec<_> = sweep
                .results
                .iter()
                .zip(&sweep.defects)
                .map(|(r, d)| {
                    json!({
                        "epsilon": r.epsilon,
                        "cell_size": d.cell_size,
                        "atoms": d.atoms,
                        "quantization_ok": d.quantization_ok(),
                    })
                })
                .collect();
            Ok(vec![write_json(&dir, "cca_atoms.json", &reports)?])
        }
        Command::Pipeline => unreachable!("expanded by run"),
    }
}

/// Runs `command` (or every pipeline stage) and writes the manifest.
pub fn run(command: Command, cfg: &LabConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let stages: Vec<Command> = match command {
        Command::Pipeline => Command::PIPELINE.to_vec(),
        c => vec![c],
    };
    let root = &cfg.output_dir;
    std::fs::create_dir_all(root).map_err(|e| LabError::io(root, e))?;
    let mut manifest = RunManifest::new(cfg.hash());
    for stage in stages {
        let start = Instant::now();
        let files = run_one(stage, cfg)?;
        let rel = files
            .iter()
            .map(|p| p.strip_prefix(root).unwrap_or(p).display().to_string())
            .collect();
        manifest.outputs.insert(stage.name().to_string(), rel);
        manifest
            .timings_ms
            .insert(stage.name().to_string(), start.elapsed().as_secs_f64() * 1e3);
    }
    manifest.write(root)?;
    Ok(manifest)
}
