//! Reference corpus and empirical audits of the embedding chain and the
//! refined Sobolev inequality.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{ClosedForm, Mode};
use crate::error::{LabError, Result};
use crate::extremals::{bubble_tail_check, BubbleParams, BUBBLE_TAIL_TOLERANCE};
use crate::field::{tail_check, Field, FracParams, Grid, TAIL_TOLERANCE};
use crate::norms::{besov_norm, hs_norm, l2star_norm, morrey_norm, weak_l2star, BesovParams, MorreyParams};

/// How to build one corpus member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Bubbles { bubbles: Vec<BubbleParams> },
    Gaussian { amplitude: f64, center: Vec<f64>, width: f64 },
    /// Integer modes `1 ≤ |k|_∞ ≤ max_mode` with amplitude
    /// `|ξ|^{-(N/2+s+0.1)}` and seeded phases, under a Gaussian envelope.
    BandLimited { stream: u64, max_mode: usize, envelope_width: f64 },
    Packet { frequency: f64, center: Vec<f64>, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub label: String,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledField {
    pub label: String,
    pub field: Field,
}

fn band_limited(stream: u64, seed: u64, max_mode: usize, width: f64, grid: &Grid, p: &FracParams) -> ClosedForm {
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let side = 2 * max_mode + 1;
    let decay = n as f64 / 2.0 + p.s() + 0.1;
    let mut modes = Vec::new();
    for code in 0..side.pow(n as u32) {
        let mut c = code;
        let k: Vec<i64> = (0..n)
            .map(|_| {
                let v = (c % side) as i64 - max_mode as i64;
                c /= side;
                v
            })
            .collect();
        // one representative of each ±k pair
        let first = k.iter().find(|&&v| v != 0);
        if first.is_none_or(|&v| v < 0) {
            continue;
        }
        let wavevector: Vec<f64> = k.iter().map(|&v| 2.0 * PI * v as f64 / grid.extent()).collect();
        let xi = wavevector.iter().map(|v| v * v).sum::<f64>().sqrt();
        modes.push(Mode {
            wavevector,
            amplitude: xi.powf(-decay),
            phase: rng.gen_range(0.0..2.0 * PI),
        });
    }
    ClosedForm::Waves { modes, envelope_width: width }
}

impl Generator {
    pub fn closed_form(&self, seed: u64, grid: &Grid, p: &FracParams) -> ClosedForm {
        match self {
            Generator::Bubbles { bubbles } => {
                ClosedForm::Sum(bubbles.iter().cloned().map(ClosedForm::Bubble).collect())
            }
            Generator::Gaussian { amplitude, center, width } => ClosedForm::Gaussian {
                amplitude: *amplitude,
                center: center.clone(),
                width: *width,
            },
            Generator::BandLimited { stream, max_mode, envelope_width } => {
                band_limited(*stream, seed, *max_mode, *envelope_width, grid, p)
            }
            Generator::Packet { frequency, center, width } => ClosedForm::Packet {
                amplitude: 1.0,
                frequency: *frequency,
                center: center.clone(),
                width: *width,
            },
        }
    }
}

fn labelled(label: &str, e: LabError) -> LabError {
    match e {
        LabError::TailCheck { ratio, tolerance, required_extent, .. } => LabError::TailCheck {
            label: Some(label.to_string()),
            ratio,
            tolerance,
            required_extent,
        },
        LabError::InvalidParameter(m) => LabError::InvalidParameter(format!("{label}: {m}")),
        other => other,
    }
}

/// Samples every entry. Bubbles are held to the `L^{2*}` tail-mass policy,
/// everything else to the boundary-to-peak ratio.
pub fn generate_corpus(spec: &Corpus, grid: &Grid, p: &FracParams) -> Result<Vec<LabeledField>> {
    spec.entries
        .iter()
        .map(|entry| {
            let label = entry.label.as_str();
            let form = entry.generator.closed_form(spec.seed, grid, p);
            let field = form.sample(grid, p).map_err(|e| labelled(label, e))?;
            match &entry.generator {
                Generator::Bubbles { bubbles } => {
                    for b in bubbles {
                        bubble_tail_check(grid, b, BUBBLE_TAIL_TOLERANCE).map_err(|e| labelled(label, e))?;
                    }
                }
                _ => {
                    tail_check(&field, TAIL_TOLERANCE).map_err(|e| labelled(label, e))?;
                }
            }
            Ok(LabeledField {
                label: entry.label.clone(),
                field,
            })
        })
        .collect()
}

fn point(dim: usize, a: f64, b: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = a;
    if dim > 1 {
        v[1] = b;
    }
    v
}

/// The 100-member reference corpus for a box of side `extent`.
pub fn reference_corpus(dim: usize, extent: f64, seed: u64) -> Corpus {
    let q = extent / 16.0;
    let mut entries = Vec::new();
    let mut push = |label: String, generator: Generator| entries.push(CorpusEntry { label, generator });
    let centers = [(0.0, 0.0), (1.0, 0.0), (0.0, -1.0), (-1.5, 1.5), (2.0, 1.0)];
    let bubble = |c: f64, lambda: f64, x0: Vec<f64>| BubbleParams { c, lambda, x0 };

    for (i, lambda) in [0.25, 0.5, 1.0, 2.0].into_iter().enumerate() {
        for (j, &(a, b)) in centers.iter().enumerate() {
            push(
                format!("bubble_{i}_{j}"),
                Generator::Bubbles { bubbles: vec![bubble(1.0, lambda * q, point(dim, a * q, b * q))] },
            );
        }
    }
    for (i, width) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        for (j, &(a, b)) in centers.iter().enumerate() {
            push(
                format!("gaussian_{i}_{j}"),
                Generator::Gaussian { amplitude: 1.0, center: point(dim, a * q, b * q), width: width * q },
            );
        }
    }
    // pairs at prescribed separations and width ratios
    for (i, sep) in [1.0, 2.0, 4.0, 6.0, 8.0].into_iter().enumerate() {
        for (j, (l1, l2, c2)) in [(0.5, 0.5, 1.0), (1.0, 0.25, 0.5), (0.5, 0.125, -1.0)].into_iter().enumerate() {
            push(
                format!("pair_{i}_{j}"),
                Generator::Bubbles {
                    bubbles: vec![
                        bubble(1.0, l1 * q, point(dim, -0.5 * sep * q, 0.0)),
                        bubble(c2, l2 * q, point(dim, 0.5 * sep * q, 0.0)),
                    ],
                },
            );
        }
    }
    for (i, r) in [1.0, 2.0, 3.0, 4.0, 5.0].into_iter().enumerate() {
        for (j, (lambda, sign)) in [(0.5, 1.0), (0.25, -1.0)].into_iter().enumerate() {
            let bubbles = (0..3)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / 3.0;
                    let c = if k == 1 { sign } else { 1.0 };
                    bubble(c, lambda * q * (1.0 + k as f64 * 0.5), point(dim, r * q * t.cos(), r * q * t.sin()))
                })
                .collect();
            push(format!("triple_{i}_{j}"), Generator::Bubbles { bubbles });
        }
    }
    for k in 0..25u64 {
        push(
            format!("band_{k}"),
            Generator::BandLimited { stream: k, max_mode: 4, envelope_width: extent / 12.0 },
        );
    }
    for (i, n) in [1.0, 2.0, 4.0, 8.0, 16.0].into_iter().enumerate() {
        for (j, &(a, b)) in centers[..3].iter().enumerate() {
            push(
                format!("packet_{i}_{j}"),
                Generator::Packet { frequency: n / q, center: point(dim, a * q, b * q), width: q },
            );
        }
    }
    Corpus { entries, seed }
}

/// Centred packets `n^{-s} sin(n x₁) e^{-|x|²/w²}` with `w = L/8`, one per
/// frequency. Wide enough that even `n = 1` oscillates inside the bump.
pub fn packet_family(dim: usize, extent: f64, frequencies: &[f64]) -> Corpus {
    let width = extent / 8.0;
    let entries = frequencies
        .iter()
        .map(|&n| CorpusEntry {
            label: format!("packet_n{n}"),
            generator: Generator::Packet { frequency: n, center: vec![0.0; dim], width },
        })
        .collect();
    Corpus { entries, seed: 0 }
}

/// Norms of one field and the audited ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub label: String,
    pub hs: f64,
    pub l2star: f64,
    pub weak: f64,
    pub morrey: f64,
    pub besov: f64,
    /// `‖u‖_{L^{2*}} / (‖u‖^θ_{Ḣs}·‖u‖^{1-θ}_{Morrey})`.
    pub ratio_refined: f64,
    /// Morrey over weak `L^{2*}`.
    pub ratio_chain1: f64,
    /// Besov over Morrey.
    pub ratio_chain2: f64,
}

pub const CSV_HEADER: &str = "label,hs,l2star,weak,morrey,besov,ratio_refined,ratio_chain1,ratio_chain2";

impl AuditRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.label,
            self.hs,
            self.l2star,
            self.weak,
            self.morrey,
            self.besov,
            self.ratio_refined,
            self.ratio_chain1,
            self.ratio_chain2
        )
    }
}

pub fn rows_to_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

fn audit_row(label: &str, u: &Field, p: &FracParams, theta: f64, mp: &MorreyParams, bp: &BesovParams) -> AuditRow {
    let hs = hs_norm(u, p);
    let l2star = l2star_norm(u, p);
    let weak = weak_l2star(u, p);
    let morrey = morrey_norm(u, mp);
    let besov = besov_norm(u, bp);
    AuditRow {
        label: label.to_string(),
        hs,
        l2star,
        weak,
        morrey,
        besov,
        ratio_refined: l2star / (hs.powf(theta) * morrey.powf(1.0 - theta)),
        ratio_chain1: morrey / weak,
        ratio_chain2: besov / morrey,
    }
}

fn check_fields(fields: &[LabeledField], p: &FracParams) -> Result<Grid> {
    let Some(first) = fields.first() else {
        return Err(LabError::invalid("audit of an empty corpus"));
    };
    let grid = *first.field.grid();
    p.check_grid(&grid)?;
    for f in fields {
        if f.field.grid() != &grid {
            return Err(LabError::invalid(format!("{}: field is on a different grid", f.label)));
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedAudit {
    pub theta: f64,
    pub r: f64,
    pub rows: Vec<AuditRow>,
    /// Corpus maximum of the refined ratio.
    pub constant: f64,
}

/// Refined inequality ratio per field, with `2/2* ≤ θ < 1` and `1 ≤ r < 2*`.
pub fn audit_refined(fields: &[LabeledField], p: &FracParams, theta: f64, r: f64) -> Result<RefinedAudit> {
    let lower = 2.0 / p.two_star();
    if !(theta >= lower && theta < 1.0) {
        return Err(LabError::invalid(format!(
            "theta must satisfy 2/2* = {lower} ≤ θ < 1, got {theta}"
        )));
    }
    if !(r >= 1.0 && r < p.two_star()) {
        return Err(LabError::invalid(format!(
            "Morrey exponent must satisfy 1 ≤ r < 2* = {}, got {r}",
            p.two_star()
        )));
    }
    let grid = check_fields(fields, p)?;
    let mp = MorreyParams::scale_invariant(&grid, p, r)?;
    let bp = BesovParams::scale_invariant(&grid, p)?;
    let rows: Vec<AuditRow> = fields
        .par_iter()
        .filter(|f| !f.field.is_zero())
        .map(|f| audit_row(&f.label, &f.field, p, theta, &mp, &bp))
        .collect();
    let constant = rows.iter().map(|r| r.ratio_refined).fold(0.0, f64::max);
    Ok(RefinedAudit { theta, r, rows, constant })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAudit {
    pub rows: Vec<AuditRow>,
    /// Corpus maximum of Morrey / weak `L^{2*}`.
    pub constant_chain1: f64,
    /// Corpus maximum of Besov / Morrey.
    pub constant_chain2: f64,
    /// Members with weak `L^{2*}` above strong `L^{2*}`.
    pub weak_violations: Vec<String>,
}

/// Middle links of the embedding chain, Morrey with `r = 2`.
pub fn audit_chain(fields: &[LabeledField], p: &FracParams) -> Result<ChainAudit> {
    let grid = check_fields(fields, p)?;
    let mp = MorreyParams::scale_invariant(&grid, p, 2.0)?;
    let bp = BesovParams::scale_invariant(&grid, p)?;
    let theta = 2.0 / p.two_star();
    let rows: Vec<AuditRow> = fields
        .par_iter()
        .filter(|f| !f.field.is_zero())
        .map(|f| audit_row(&f.label, &f.field, p, theta, &mp, &bp))
        .collect();
    let weak_violations = rows
        .iter()
        .filter(|r| r.weak > r.l2star * (1.0 + 1e-12))
        .map(|r| r.label.clone())
        .collect();
    Ok(ChainAudit {
        constant_chain1: rows.iter().map(|r| r.ratio_chain1).fold(0.0, f64::max),
        constant_chain2: rows.iter().map(|r| r.ratio_chain2).fold(0.0, f64::max),
        weak_violations,
        rows,
    })
}

/// Constants fitted at `M` and `2M`, and the members that break the
/// coarse-grid constants (with 10% slack) on the refined grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub refined_constant: [f64; 2],
    pub chain1_constant: [f64; 2],
    pub chain2_constant: [f64; 2],
    pub violations: Vec<String>,
    pub weak_violations: Vec<String>,
}

impl RefinementStudy {
    fn drift(c: &[f64; 2]) -> f64 {
        (c[1] / c[0] - 1.0).abs()
    }

    pub fn max_drift(&self) -> f64 {
        Self::drift(&self.refined_constant)
            .max(Self::drift(&self.chain1_constant))
            .max(Self::drift(&self.chain2_constant))
    }

    pub fn stable(&self) -> bool {
        self.max_drift() < 0.1
    }
}

pub fn refinement_study(spec: &Corpus, grid: &Grid, p: &FracParams, theta: f64, r: f64) -> Result<RefinementStudy> {
    let coarse = generate_corpus(spec, grid, p)?;
    let fine = generate_corpus(spec, &grid.refined()?, p)?;
    let rc = audit_refined(&coarse, p, theta, r)?;
    let rf = audit_refined(&fine, p, theta, r)?;
    let cc = audit_chain(&coarse, p)?;
    let cf = audit_chain(&fine, p)?;
    let slack = 1.1;
    let mut violations = Vec::new();
    for row in &rf.rows {
        if row.ratio_refined > slack * rc.constant {
            violations.push(format!("{}: refined", row.label));
        }
    }
    for row in &cf.rows {
        if row.ratio_chain2 > slack * cc.constant_chain2 {
            violations.push(format!("{}: besov/morrey", row.label));
        }
        if row.ratio_chain1 > slack * cc.constant_chain1 {
            violations.push(format!("{}: morrey/weak", row.label));
        }
    }
    let mut weak_violations = cc.weak_violations.clone();
    weak_violations.extend(cf.weak_violations.iter().cloned());
    Ok(RefinementStudy {
        refined_constant: [rc.constant, rf.constant],
        chain1_constant: [cc.constant_chain1, cf.constant_chain1],
        chain2_constant: [cc.constant_chain2, cf.constant_chain2],
        violations,
        weak_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Grid, FracParams) {
        (Grid::new(2, 64, 16.0).unwrap(), FracParams::new(2, 0.5).unwrap())
    }

    #[test]
    fn empty_spec_gives_empty_list() {
        let (g, p) = setup();
        let c = Corpus { entries: vec![], seed: 1 };
        assert!(generate_corpus(&c, &g, &p).unwrap().is_empty());
    }

    #[test]
    fn reference_corpus_has_one_hundred_members() {
        let c = reference_corpus(2, 16.0, 7);
        assert_eq!(c.entries.len(), 100);
        let mut labels: Vec<_> = c.entries.iter().map(|e| e.label.clone()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 100);
    }

    #[test]
    fn regeneration_is_bitwise_identical() {
        let (g, p) = setup();
        let c = reference_corpus(2, 16.0, 11);
        let a = generate_corpus(&c, &g, &p).unwrap();
        let b = generate_corpus(&c, &g, &p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(crate::field::io::encode(&x.field), crate::field::io::encode(&y.field));
        }
        let other = generate_corpus(&Corpus { seed: 12, ..c }, &g, &p).unwrap();
        assert!(a.iter().zip(&other).any(|(x, y)| x.field != y.field));
    }

    #[test]
    fn packets_keep_bounded_energy() {
        let g = Grid::new(2, 128, 16.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let c = reference_corpus(2, 16.0, 3);
        let fields = generate_corpus(&c, &g, &p).unwrap();
        let hs: Vec<f64> = fields
            .iter()
            .filter(|f| f.label.starts_with("packet_") && f.label.ends_with("_0"))
            .map(|f| hs_norm(&f.field, &p))
            .collect();
        assert_eq!(hs.len(), 5);
        let (lo, hi) = hs.iter().fold((f64::MAX, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 2.0, "{hs:?}");
    }

    #[test]
    fn packet_family_vanishes_in_morrey_and_l2star() {
        let g = Grid::new(2, 128, 16.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let mp = MorreyParams::scale_invariant(&g, &p, 2.0).unwrap();
        let fields = generate_corpus(&packet_family(2, 16.0, &[1.0, 2.0, 4.0, 8.0]), &g, &p).unwrap();
        let norms: Vec<(f64, f64, f64)> = fields
            .iter()
            .map(|f| (hs_norm(&f.field, &p), l2star_norm(&f.field, &p), morrey_norm(&f.field, &mp)))
            .collect();
        for w in norms.windows(2) {
            assert!(w[1].1 < w[0].1 && w[1].2 < w[0].2, "{norms:?}");
            assert!((w[1].0 / w[0].0 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn tail_failure_names_the_member() {
        let (g, p) = setup();
        let c = Corpus {
            entries: vec![CorpusEntry {
                label: "wide".into(),
                generator: Generator::Gaussian { amplitude: 1.0, center: vec![0.0, 0.0], width: 6.0 },
            }],
            seed: 0,
        };
        match generate_corpus(&c, &g, &p) {
            Err(LabError::TailCheck { label, .. }) => assert_eq!(label.as_deref(), Some("wide")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn theta_and_r_ranges() {
        let (g, p) = setup();
        let fields = generate_corpus(&reference_corpus(2, 16.0, 1), &g, &p).unwrap();
        let few = &fields[..2];
        assert!(audit_refined(few, &p, 1.0, 2.0).is_err());
        assert!(audit_refined(few, &p, 0.4, 2.0).is_err());
        assert!(audit_refined(few, &p, 0.5, 4.0).is_err());
        assert!(audit_refined(few, &p, 0.5, 0.5).is_err());
        assert!(audit_refined(few, &p, 0.5, 1.0).is_ok());
    }

    #[test]
    fn zero_fields_are_excluded() {
        let (g, p) = setup();
        let fields = vec![
            LabeledField { label: "zero".into(), field: Field::zeros(g) },
            LabeledField {
                label: "g".into(),
                field: Field::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap(),
            },
        ];
        let chain = audit_chain(&fields, &p).unwrap();
        assert_eq!(chain.rows.len(), 1);
        assert!(chain.weak_violations.is_empty());
    }

    #[test]
    fn bubble_ratios_do_not_depend_on_width() {
        // each width on a box dilated with it, so the family is one field
        // seen at different scales
        let base = Grid::new(2, 128, 16.0).unwrap();
        let p = FracParams::new(2, 0.5).unwrap();
        let rows: Vec<AuditRow> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&l| {
                let g = base.dilated(l).unwrap();
                let field = ClosedForm::Bubble(BubbleParams::new(1.0, l, vec![0.0, 0.0]).unwrap())
                    .sample(&g, &p)
                    .unwrap();
                let one = [LabeledField { label: format!("b{l}"), field }];
                audit_chain(&one, &p).unwrap().rows.remove(0)
            })
            .collect();
        for pick in [
            |r: &AuditRow| r.ratio_refined,
            |r: &AuditRow| r.ratio_chain1,
            |r: &AuditRow| r.ratio_chain2,
        ] {
            let v: Vec<f64> = rows.iter().map(pick).collect();
            let spread = v.iter().cloned().fold(0.0_f64, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread - 1.0 < 1e-2, "{v:?}");
        }
    }
}
