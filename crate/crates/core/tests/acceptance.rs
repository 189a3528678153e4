//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fslab::audits::{generate_corpus, packet_family, reference_corpus, refinement_study};
use fslab::closed_form::ClosedForm;
use fslab::dislocations::Dislocation;
use fslab::extremals::{bubble, rayleigh_quotient, sharp_constant, BubbleParams};
use fslab::field::{Field, FracParams, Grid};
use fslab::lab::{run, Command, LabConfig, RunManifest};
use fslab::norms::{
    besov_norm, gagliardo_seminorm_order, hs_norm, hs_seminorm_order, l2star_norm, morrey_norm, BesovParams,
    MorreyParams,
};
use fslab::profiles::{extract_profiles, ProfileConfig};
use fslab::subcritical::{
    default_eps_list, epsilon_sweep, rescaled_limit_check, DefectConfig, DomainSpec, SolverConfig, Sweep,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo - 1.0
}

fn sharp_constant_reproduction() -> Outcome {
    let cases = [(2, 0.5, 1.0, 1024, 80.0), (1, 0.25, 0.5, 4096, 200.0)];
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, s, lambda, m, l) in cases {
        let start = Instant::now();
        let g = Grid::new(n, m, l).map_err(|e| e.to_string())?;
        let p = FracParams::new(n, s).map_err(|e| e.to_string())?;
        let bp = BubbleParams::new(1.0, lambda, vec![0.0; n]).map_err(|e| e.to_string())?;
        let u = bubble(&g, &p, &bp).map_err(|e| e.to_string())?;
        let q = rayleigh_quotient(&u, &p).map_err(|e| e.to_string())?;
        let want = sharp_constant(n, s).map_err(|e| e.to_string())?.value;
        let err = rel(q, want);
        let secs = start.elapsed().as_secs_f64();
        ok &= err < 0.05 && secs < 60.0;
        lines.push(format!("N={n} s={s}: quotient {q:.5} vs {want:.5}, rel err {err:.2e}, {secs:.1}s"));
    }
    check(ok, lines.join("; "))
}

fn closed_form_constant() -> Outcome {
    let got = sharp_constant(4, 1.0).map_err(|e| e.to_string())?.value;
    let want = 3.0 / (32.0 * std::f64::consts::PI.powi(2));
    let err = rel(got, want);
    check(err < 1e-12, format!("S*(4,1) = {got:.16e}, rel err {err:.1e}"))
}

fn all_norms(u: &Field, p: &FracParams) -> Result<[f64; 4], String> {
    let g = u.grid();
    let mp = MorreyParams::scale_invariant(g, p, 2.0).map_err(|e| e.to_string())?;
    let bp = BesovParams::scale_invariant(g, p).map_err(|e| e.to_string())?;
    Ok([hs_norm(u, p), l2star_norm(u, p), morrey_norm(u, &mp), besov_norm(u, &bp)])
}

fn invariance_suite() -> Outcome {
    // each dislocated bubble is sampled on the box dilated with it, and
    // translations are whole spacings of that box
    let base = Grid::new(2, 128, 16.0).map_err(|e| e.to_string())?;
    let p = FracParams::new(2, 0.5).map_err(|e| e.to_string())?;
    let b = BubbleParams::new(1.0, 1.0, vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    let reference = all_norms(&ClosedForm::Bubble(b.clone()).sample(&base, &p).map_err(|e| e.to_string())?, &p)?;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for lambda in [0.25, 0.5, 2.0, 4.0] {
        let g = base.dilated(lambda).map_err(|e| e.to_string())?;
        for j in [1.0, -3.0, 5.0] {
            let y = vec![j * g.spacing(), -2.0 * j * g.spacing()];
            let d = Dislocation::new(y, lambda).map_err(|e| e.to_string())?;
            let u = ClosedForm::Bubble(b.dislocated(&d, &p)).sample(&g, &p).map_err(|e| e.to_string())?;
            let got = all_norms(&u, &p)?;
            for k in 0..4 {
                worst = worst.max(rel(got[k], reference[k]));
            }
            count += 1;
        }
    }
    check(
        count == 12 && worst < 1e-3,
        format!("{count} dislocations, worst relative drift {worst:.2e} over Hs, L2*, Morrey, Besov"),
    )
}

fn gagliardo_consistency() -> Outcome {
    let g = Grid::new(1, 8192, 32.0).map_err(|e| e.to_string())?;
    let bumps = [(0.0, 1.0), (1.0, 0.5), (-2.0, 2.0), (0.5, 0.7), (3.0, 1.5)];
    let mut lines = Vec::new();
    let mut ok = true;
    for s in [0.3, 0.5, 0.7] {
        let mut ratios = Vec::new();
        for (c, w) in bumps {
            let u = Field::from_fn(g, |x| (-(x[0] - c) * (x[0] - c) / (w * w)).exp()).map_err(|e| e.to_string())?;
            let hs = hs_seminorm_order(&u, s).map_err(|e| e.to_string())?;
            let ga = gagliardo_seminorm_order(&u, s).map_err(|e| e.to_string())?;
            ratios.push(hs * hs / (ga * ga));
        }
        let sp = spread(&ratios);
        ok &= sp < 0.02;
        lines.push(format!("s={s}: spread {:.2}%", 100.0 * sp));
    }
    check(ok, lines.join(", "))
}

fn embedding_audits() -> Outcome {
    let g = Grid::new(2, 128, 16.0).map_err(|e| e.to_string())?;
    let p = FracParams::new(2, 0.5).map_err(|e| e.to_string())?;
    let corpus = reference_corpus(2, 16.0, 20260101);
    let theta = 2.0 / p.two_star();
    let st = refinement_study(&corpus, &g, &p, theta, 2.0).map_err(|e| e.to_string())?;
    check(
        corpus.entries.len() == 100 && st.violations.is_empty() && st.weak_violations.is_empty() && st.stable(),
        format!(
            "{} fields, {} ratio violations, {} weak>strong, constants refined {:.4}->{:.4} chain1 {:.4}->{:.4} chain2 {:.4}->{:.4}, max drift {:.2}%",
            corpus.entries.len(),
            st.violations.len(),
            st.weak_violations.len(),
            st.refined_constant[0],
            st.refined_constant[1],
            st.chain1_constant[0],
            st.chain1_constant[1],
            st.chain2_constant[0],
            st.chain2_constant[1],
            100.0 * st.max_drift()
        ),
    )
}

fn profile_extraction() -> Outcome {
    let start = Instant::now();
    let g = Grid::new(2, 256, 16.0).map_err(|e| e.to_string())?;
    let p = FracParams::new(2, 0.25).map_err(|e| e.to_string())?;
    let (u, truth) = fslab::lab::two_bubble_synthetic(&g, &p).map_err(|e| e.to_string())?;
    let dec = extract_profiles(&u, &p, &ProfileConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut ok = dec.profiles.len() == 2;
    let mut lines = vec![format!("{} profiles", dec.profiles.len())];
    for t in &truth {
        let Some(pr) = dec
            .profiles
            .iter()
            .min_by(|a, b| {
                let da = g.torus_distance(&a.dislocation.y, &t.x0);
                let db = g.torus_distance(&b.dislocation.y, &t.x0);
                da.total_cmp(&db)
            })
        else {
            ok = false;
            continue;
        };
        let dist = g.torus_distance(&pr.dislocation.y, &t.x0);
        let ratio = pr.dislocation.lambda / t.lambda;
        ok &= dist <= t.lambda && ratio.max(1.0 / ratio) <= 2f64.sqrt();
        lines.push(format!(
            "truth lambda {:.4}: offset {dist:.4}, lambda ratio {ratio:.3}",
            t.lambda
        ));
    }
    let res = dec.residual_l2star / l2star_norm(&u, &p);
    let pyth = dec.pythagoras_deficit / hs_norm(&u, &p).powi(2);
    ok &= res < 0.1 && pyth < 0.1 && secs < 120.0;
    lines.push(format!("residual {:.2}%, deficit {:.2}%, {secs:.1}s", 100.0 * res, 100.0 * pyth));
    check(ok, lines.join("; "))
}

fn vanishing_morrey() -> Outcome {
    let g = Grid::new(2, 256, 16.0).map_err(|e| e.to_string())?;
    let p = FracParams::new(2, 0.5).map_err(|e| e.to_string())?;
    let mp = MorreyParams::scale_invariant(&g, &p, 2.0).map_err(|e| e.to_string())?;
    let family = packet_family(2, 16.0, &[1.0, 2.0, 4.0, 8.0, 16.0]);
    let fields = generate_corpus(&family, &g, &p).map_err(|e| e.to_string())?;
    let hs: Vec<f64> = fields.iter().map(|f| hs_norm(&f.field, &p)).collect();
    let l2s: Vec<f64> = fields.iter().map(|f| l2star_norm(&f.field, &p)).collect();
    let morrey: Vec<f64> = fields.iter().map(|f| morrey_norm(&f.field, &mp)).collect();
    let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let hs_ratio = spread(&hs) + 1.0;
    check(
        fields.len() == 5 && down(&l2s) && down(&morrey) && hs_ratio < 2.0,
        format!(
            "morrey {:.4}->{:.4}, L2* {:.4}->{:.4}, Hs max/min {hs_ratio:.3}",
            morrey[0], morrey[4], l2s[0], l2s[4]
        ),
    )
}

fn disk_sweep() -> Result<(Sweep, FracParams, Duration), String> {
    let start = Instant::now();
    let g = Grid::new(2, 64, 4.0).map_err(|e| e.to_string())?;
    let p = FracParams::new(2, 0.5).map_err(|e| e.to_string())?;
    let domain = DomainSpec::Disk { center: vec![0.0, 0.0], radius: 0.9 };
    let sweep = epsilon_sweep(
        &domain,
        &g,
        &p,
        &default_eps_list(&p),
        &SolverConfig::default(),
        &DefectConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    if let Some(msg) = &sweep.aborted {
        return Err(format!("sweep aborted: {msg}"));
    }
    Ok((sweep, p, start.elapsed()))
}

fn subcritical_concentration(sweep: &Sweep, elapsed: Duration) -> Outcome {
    let star = sharp_constant(2, 0.5).map_err(|e| e.to_string())?.value;
    let gaps: Vec<f64> = sweep.results.iter().map(|r| (r.s_eps - star).abs()).collect();
    let fractions: Vec<f64> = sweep.results.iter().map(|r| r.ball_fraction).collect();
    let n = gaps.len();
    let gaps_down = n >= 3 && gaps[n - 3..].windows(2).all(|w| w[1] < w[0]);
    let frac_up = fractions.windows(2).all(|w| w[1] >= w[0]);
    let last_frac = *fractions.last().unwrap_or(&0.0);
    let last = sweep.defects.last();
    let atoms = last.map_or(0, |d| d.atoms.len());
    let quantized = last.is_some_and(|d| d.quantization_ok());
    let ratio = last.and_then(|d| d.atoms.first()).map_or(f64::NAN, |a| a.quantization_ratio);
    check(
        n == 4 && gaps_down && frac_up && last_frac >= 0.9 && atoms == 1 && quantized && elapsed.as_secs() < 600,
        format!(
            "|S_eps-S*| {:?}, ball fractions {:?}, final atoms {atoms}, quantization ratio {ratio:.4}, {:.1}s",
            gaps.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            fractions.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn rescaled_limit(sweep: &Sweep, p: &FracParams) -> Outcome {
    let n = sweep.results.len();
    if n < 3 {
        return Err(format!("only {n} sweep entries"));
    }
    let rep = rescaled_limit_check(&sweep.results[n - 3..], p).map_err(|e| e.to_string())?;
    check(
        rep.decreasing,
        format!(
            "L2* distance to fitted bubble {:?}",
            rep.distances.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn run_pipeline(dir: &Path) -> Result<RunManifest, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    let over = [format!("output_dir=\"{}\"", dir.display())];
    let cfg = LabConfig::load(&path, &over).map_err(|e| e.to_string())?;
    run(Command::Pipeline, &cfg).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("fslab-acceptance-{}", std::process::id()));
    let dirs = [root.join("a"), root.join("b")];
    let manifests = dirs.iter().map(|d| run_pipeline(d)).collect::<Result<Vec<_>, _>>();
    let outcome = manifests.and_then(|m| {
        let files: Vec<&String> = m[0].outputs.values().flatten().collect();
        let mut differing = Vec::new();
        for f in &files {
            let a = std::fs::read(dirs[0].join(f)).map_err(|e| format!("{f}: {e}"))?;
            let b = std::fs::read(dirs[1].join(f)).map_err(|e| format!("{f}: {e}"))?;
            if a != b {
                differing.push(f.to_string());
            }
        }
        let same_lists = m[0].outputs == m[1].outputs;
        check(
            same_lists && differing.is_empty() && m[0].artifact_count() == 6,
            format!("{} artifacts compared, {} differ {:?}", files.len(), differing.len(), differing),
        )
    });
    let _ = std::fs::remove_dir_all(&root);
    outcome
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    // criteria 8 and 9 read the same sweep
    let shared = catch_unwind(disk_sweep).unwrap_or_else(|_| Err("sweep panicked".into()));
    let criteria: Vec<Criterion> = vec![
        ("sharp-constant reproduction", Box::new(sharp_constant_reproduction)),
        ("closed-form constant", Box::new(closed_form_constant)),
        ("invariance suite", Box::new(invariance_suite)),
        ("gagliardo/fourier consistency", Box::new(gagliardo_consistency)),
        ("embedding audits", Box::new(embedding_audits)),
        ("profile extraction", Box::new(profile_extraction)),
        ("vanishing morrey", Box::new(vanishing_morrey)),
        (
            "subcritical concentration",
            Box::new(|| match &shared {
                Ok((s, _, t)) => subcritical_concentration(s, *t),
                Err(e) => Err(e.clone()),
            }),
        ),
        (
            "rescaled limit",
            Box::new(|| match &shared {
                Ok((s, p, _)) => rescaled_limit(s, p),
                Err(e) => Err(e.clone()),
            }),
        ),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.into_iter().enumerate() {
        match guarded(f) {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
