//! Acceptance suite: one PASS/FAIL line per criterion, plus evidence lines
//! for the two conjectured condition-number scalings.
//!
//! Runs as a plain binary (`harness = false`) so that every line is printed
//! in order; the process exits non-zero when any criterion fails.

use std::time::Instant;

use clap::Parser;
use ndarray::Array1;
use qcf_core::chain::{
    forward_difference, inner_l2, laplacian_matrix, laplacian_min_rayleigh, norm_u12, second_difference,
};
use qcf_core::krylov::{
    direct_solve, gfc_stationary_solve, gmres_solve, modified_cg_probe, preconditioned_rate, theoretical_envelope,
};
use qcf_core::linalg::eigvalsh;
use qcf_core::operators::{assemble, displaced, energy, force, ghost_force_vector, rhs_cosine, uniform_deformation};
use qcf_core::potentials::{
    continuum_modulus, critical_strain_atomistic, critical_strain_gfc, gfc_modulus, moduli, FnPotential,
};
use qcf_core::spectral::{
    coercivity_infimum, eigbasis_condition_preconditioned, eigbasis_condition_standard, generalized_spectrum,
    loglog_slope, qcf_inverse_norm_0inf_2inf, spectrum_diff, StabilityConstant,
};
use qcf_core::{GmresConfig, InteriorVector, LennardJones, ModelKind, Morse, PairPotential, Params, State, Variant};
use qcf_experiments::{execute, Cli, FailureClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = qcf_core::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn k_sqrt(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize + 1
}

fn state(a_f: f64) -> State {
    State::from_moduli(1.0, a_f)
}

const TABLE_N: [usize; 4] = [8, 32, 128, 512];
const TABLE_AF: [f64; 5] = [0.8, 0.6, 0.4, 0.2, 0.04];

fn spectrum_grid(generalized: bool) -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, usize, f64) = (0.0, 0, 0.0);
    for n in TABLE_N {
        let p = Params::new(n, k_sqrt(n))?;
        for af in TABLE_AF {
            let c = spectrum_diff(ModelKind::Qcf, ModelKind::Qnl, &p, &state(af), generalized)?;
            if c.linf_diff >= worst.0 {
                worst = (c.linf_diff, n, af);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let mut ok = worst.0 <= 1e-8;
    if !generalized {
        ok &= secs <= 60.0;
    }
    Ok((ok, format!("max linf = {:.3e} at N={} A_F={}, grid time {secs:.1}s", worst.0, worst.1, worst.2)))
}

fn c01_spectrum_identity() -> Outcome {
    spectrum_grid(false)
}

fn c02_generalized_spectrum_identity() -> Outcome {
    spectrum_grid(true)
}

fn small_grid() -> Vec<Params> {
    let mut out = Vec::new();
    for n in [16usize, 64] {
        for k in [1, 4, k_sqrt(n)] {
            out.push(Params::new(n, k).unwrap());
        }
    }
    out
}

fn c03_qnl_closed_form_spectrum() -> Outcome {
    let mut worst = 0.0f64;
    for p in small_grid() {
        for af in [0.8, 0.4, 0.1] {
            let s = state(af);
            let k = p.k();
            let mut want: Vec<f64> = (1..=2 * k + 1)
                .map(|j| {
                    let t = (j as f64 * std::f64::consts::PI / (4 * k + 4) as f64).sin();
                    s.a_f - 4.0 * s.phi2_2f * t * t
                })
                .collect();
            want.extend(std::iter::repeat_n(s.a_f, 2 * p.n() - 2 * k - 2));
            want.sort_by(f64::total_cmp);
            let got = generalized_spectrum(&assemble(ModelKind::Qnl, &p, &s)?)?.real_parts();
            if got.len() != want.len() {
                return Ok((false, format!("N={} K={k}: {} eigenvalues, expected {}", p.n(), got.len(), want.len())));
            }
            worst = got.iter().zip(&want).fold(worst, |m, (a, b)| m.max((a - b).abs()));
        }
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.3e}")))
}

fn c04_qnl_coercivity() -> Outcome {
    let mut worst = 0.0f64;
    for p in small_grid() {
        for af in [0.8, 0.4, 0.1] {
            let inf = coercivity_infimum(&assemble(ModelKind::Qnl, &p, &state(af))?)?.infimum;
            worst = worst.max((inf - af).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max |inf - A_F| = {worst:.3e}")))
}

fn lambda_k(p: &Params, s: &State) -> qcf_core::Result<f64> {
    match coercivity_infimum(&assemble(ModelKind::Qce, p, s)?)?.extracted_constant {
        Some(StabilityConstant::LambdaK(v)) => Ok(v),
        other => Err(qcf_core::QcError::InvalidArgument(format!("no lambda_K extracted: {other:?}"))),
    }
}

fn c05_qce_constant() -> Outcome {
    let s = state(0.4);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut far = 0.0f64;
    for k in [1usize, 2, 3, 4, 6, 8, 12, 16, 24, 32] {
        for n in [k + 8, 4 * k + 4, 96] {
            if k + 2 > n {
                continue;
            }
            let lam = lambda_k(&Params::new(n, k)?, &s)?;
            lo = lo.min(lam);
            hi = hi.max(lam);
            if k >= 16 && n >= k + 8 {
                far = far.max((lam - 0.6595).abs());
            }
        }
    }
    let ok = lo >= 0.5 && hi <= 1.0 && far <= 1e-3;
    Ok((ok, format!("lambda_K in [{lo:.6}, {hi:.6}], max |lambda_K - 0.6595| for K>=16 = {far:.2e}")))
}

fn c06_qcf_indefinite() -> Outcome {
    let ns = [64usize, 128, 256, 512, 1024];
    let s = state(0.8);
    let mut infs = Vec::new();
    for n in ns {
        infs.push(coercivity_infimum(&assemble(ModelKind::Qcf, &Params::new(n, n / 4)?, &s)?)?.infimum);
    }
    let all_negative = infs.iter().all(|v| *v < 0.0);
    let x: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
    let neg: Vec<f64> = infs.iter().map(|v| -v).collect();
    let slope = if all_negative { Some(loglog_slope(&x, &neg)?) } else { None };
    let ok = all_negative && slope.is_some_and(|m| (0.4..=0.6).contains(&m));
    let deficit: Vec<f64> = infs.iter().map(|v| s.a_f - v).collect();
    let deficit_slope = loglog_slope(&x, &deficit)?;
    let listed: Vec<String> = ns.iter().zip(&infs).map(|(n, v)| format!("N={n}: {v:.4}")).collect();
    Ok((
        ok,
        format!(
            "infima [{}], slope of -inf {}, slope of A_F - inf {deficit_slope:.3}",
            listed.join(", "),
            slope.map_or("n/a (not all negative)".to_string(), |m| format!("{m:.3}"))
        ),
    ))
}

fn c07_inverse_norm_bound() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for af in [0.5, 0.1, 0.01] {
        for n in [64usize, 256] {
            let s = state(af);
            let norm = qcf_inverse_norm_0inf_2inf(&Params::new(n, k_sqrt(n))?, &s)?;
            worst = worst.max(norm - 1.0 / s.a_f);
        }
    }
    Ok((worst <= 1e-10, format!("max (norm - 1/A_F) = {worst:.3e}")))
}

fn c08_laplacian_rayleigh() -> Outcome {
    let mut worst = 0.0f64;
    for n in [8usize, 64, 512] {
        let want = {
            let s = (std::f64::consts::PI / (4 * n) as f64).sin();
            4.0 * (n * n) as f64 * s * s
        };
        let dense = eigvalsh(&laplacian_matrix(&Params::lattice(n)?))?[0];
        let lib: f64 = laplacian_min_rayleigh(n);
        worst = worst.max((dense - want).abs()).max((lib - want).abs());
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.3e}")))
}

fn c09_finite_termination() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [128usize, 512] {
        let p = Params::new(n, 4)?;
        let op = assemble(ModelKind::Qcf, &p, &state(0.1))?;
        let f = rhs_cosine(&p);
        let cfg = GmresConfig::new(Variant::PrecondL2).rel_tol(1e-12);
        let (_, trace) = gmres_solve(&op, &f, &cfg, &InteriorVector::zeros(p))?;
        let last = *trace.relative_residuals().last().unwrap();
        ok &= trace.converged && trace.iterations <= 10 && last <= 1e-12;
        notes.push(format!("N={n}: {} iterations, rel {last:.2e}", trace.iterations));
    }
    Ok((ok, notes.join("; ")))
}

/// Relative residuals against the variant's envelope; returns the number of
/// iterations above it.
fn envelope_violations(v: Variant, p: &Params, s: &State, rel: &[f64]) -> qcf_core::Result<usize> {
    let cond = match v {
        Variant::Plain => eigbasis_condition_standard(p, s)?,
        Variant::PrecondL2 => eigbasis_condition_preconditioned(p, s)?.cond_v_tilde,
        Variant::PrecondU12 => eigbasis_condition_preconditioned(p, s)?.cond_w_tilde,
    };
    Ok(rel.iter().enumerate().filter(|(m, r)| **r > theoretical_envelope(v, *m, s, p, cond)).count())
}

fn traced(v: Variant, p: &Params, s: &State) -> qcf_core::Result<Vec<f64>> {
    let op = assemble(ModelKind::Qcf, p, s)?;
    let f = rhs_cosine(p);
    let cfg = GmresConfig::new(v).rel_tol(1e-12).with_reference(direct_solve(&op, &f)?);
    let (_, trace) = gmres_solve(&op, &f, &cfg, &InteriorVector::zeros(*p))?;
    Ok(trace.relative_residuals())
}

fn c10_contraction_rate() -> Outcome {
    let s = state(0.1);
    let q: f64 = preconditioned_rate(&s);
    let root = 0.1f64.sqrt();
    let q_ref = (1.0 - root) / (1.0 + root);
    let p = Params::new(256, k_sqrt(256))?;
    let mut ok = (q - q_ref).abs() <= 1e-12 && (q - 0.5195).abs() <= 5e-5;
    let mut notes = vec![format!("q = {q:.6}")];
    for v in [Variant::PrecondL2, Variant::PrecondU12] {
        let rel = traced(v, &p, &s)?;
        if rel.len() <= 25 {
            return Ok((false, format!("{v}: stopped after {} iterations, before iteration 25", rel.len() - 1)));
        }
        let rate = (rel[25] / rel[5]).powf(1.0 / 20.0);
        let above = envelope_violations(v, &p, &s, &rel)?;
        ok &= rate <= q + 0.05 && above == 0;
        notes.push(format!("{v}: rate {rate:.4}, {above} iterations above envelope"));
    }
    Ok((ok, notes.join("; ")))
}

fn c11_plain_envelope() -> Outcome {
    let s = state(0.5);
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [64usize, 256] {
        for k in [4, k_sqrt(n)] {
            let p = Params::new(n, k)?;
            let rel = traced(Variant::Plain, &p, &s)?;
            let above = envelope_violations(Variant::Plain, &p, &s, &rel)?;
            ok &= above == 0;
            notes.push(format!("N={n} K={k}: {} iterations, {above} above envelope", rel.len() - 1));
        }
    }
    Ok((ok, notes.join("; ")))
}

fn ghost_force_mismatch<P: PairPotential<f64>>(pot: &P, strain: f64, p: &Params) -> qcf_core::Result<f64> {
    let s = moduli(pot, strain)?;
    let y = uniform_deformation(ModelKind::Qce, p, strain);
    let y = y.as_slice().unwrap();
    let fqcf = force(ModelKind::Qcf, p, pot, strain, y)?;
    let fqce = force(ModelKind::Qce, p, pot, strain, y)?;
    let fqnl = force(ModelKind::Qnl, p, pot, strain, y)?;
    let g = ghost_force_vector(p, &s)?.values;
    let mut worst = 0.0f64;
    for j in p.sites() {
        worst = worst.max((g.at(j) - (fqcf.at(j) - fqce.at(j))).abs()).max(fqcf.at(j).abs()).max(fqnl.at(j).abs());
    }
    Ok(worst)
}

fn c12_ghost_force_identity() -> Outcome {
    let grid: Vec<Params> = [(8usize, 1usize), (8, 3), (16, 4), (64, 9), (256, 17)]
        .iter()
        .map(|&(n, k)| Params::new(n, k))
        .collect::<Result<_, _>>()?;
    let soft = FnPotential::new(
        "r^-4 - r^-2",
        |r: f64| r.powi(-4) - r.powi(-2),
        |r: f64| -4.0 * r.powi(-5) + 2.0 * r.powi(-3),
        |r: f64| 20.0 * r.powi(-6) - 6.0 * r.powi(-4),
    );
    let mut worst = 0.0f64;
    for p in &grid {
        worst = worst.max(ghost_force_mismatch(&LennardJones, 1.03, p)?);
        for alpha in [2.0, 4.0] {
            worst = worst.max(ghost_force_mismatch(&Morse { alpha }, 1.1, p)?);
        }
        worst = worst.max(ghost_force_mismatch(&soft, 0.9, p)?);
    }
    Ok((worst <= 1e-12, format!("max mismatch {worst:.3e} over LJ, Morse and r^-4 - r^-2 states")))
}

/// Plain bisection on the closed-form LJ second derivative.
fn lj_root(lambda: f64) -> f64 {
    let d2 = |r: f64| 156.0 * r.powi(-14) - 84.0 * r.powi(-8);
    let g = |f: f64| d2(f) + 4.0 * d2(2.0 * f) + lambda * d2(2.0 * f);
    let (mut a, mut b) = (1.05f64, 1.2f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a) * g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn c13_gfc_behaviour() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    let mut fixed = 0.0f64;
    for (p, s) in [(Params::new(32, 4)?, moduli(&LennardJones, 1.05)?), (Params::new(64, 9)?, state(0.4))] {
        let f = rhs_cosine(&p);
        let r = gfc_stationary_solve(&p, &s, &f, &InteriorVector::zeros(p), 400, 1e-13)?;
        let op = assemble(ModelKind::Qcf, &p, &s)?;
        let res = f.values() - &op.apply_array(r.solution.values());
        let scale = f.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = res.iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale;
        ok &= r.converged;
        fixed = fixed.max(err);
    }
    ok &= fixed <= 1e-10;
    notes.push(format!("fixed-point residual {fixed:.2e}"));

    let lam = lambda_k(&Params::new(64, 16)?, &state(0.4))?;
    let f_star: f64 = critical_strain_atomistic(&LennardJones)?;
    let f_gfc: f64 = critical_strain_gfc(&LennardJones, lam)?;
    let res_star = continuum_modulus(&LennardJones, f_star)?.abs();
    let res_gfc = gfc_modulus(&LennardJones, f_gfc, lam)?.abs();
    let (ref_star, ref_gfc) = (lj_root(0.0), lj_root(lam));
    ok &= f_gfc < f_star && res_star <= 1e-10 && res_gfc <= 1e-10;
    ok &= (f_star - ref_star).abs() <= 1e-9 && (f_gfc - ref_gfc).abs() <= 1e-9;
    ok &= (f_star - 1.1059).abs() <= 1e-4 && (f_gfc - 1.1054).abs() <= 1e-4;
    notes.push(format!(
        "F_* = {f_star:.10} (bisection {ref_star:.10}), F^gfc = {f_gfc:.10} at lambda_K = {lam:.6} \
         (bisection {ref_gfc:.10}), modulus residuals {res_star:.1e}, {res_gfc:.1e}"
    ));
    Ok((ok, notes.join("; ")))
}

fn c14_modified_cg_probe() -> Outcome {
    let p = Params::new(256, 32)?;
    let r = modified_cg_probe(&p, &state(0.8))?;
    let unit_scale: Vec<_> = r.steps.iter().filter(|s| (0.1..=10.0).contains(&s.numerator.abs())).collect();
    let smallest = unit_scale.iter().map(|s| s.alpha.abs()).fold(f64::INFINITY, f64::min);
    let ok = r.rayleigh.abs() <= 1e-10 * norm_u12(&r.direction).powi(2) && !unit_scale.is_empty() && smallest >= 1e8;
    Ok((
        ok,
        format!(
            "<L d, d> = {:.2e}, {} unit-scale numerators, min |alpha| = {smallest:.2e}",
            r.rayleigh,
            unit_scale.len()
        ),
    ))
}

fn fd_checks(rng: &mut ChaCha8Rng) -> qcf_core::Result<(f64, f64)> {
    let lj = LennardJones;
    let p = Params::new(9, 3)?;
    let mut grad_err = 0.0f64;
    let mut hess_err = 0.0f64;
    for kind in ModelKind::ALL {
        for f in [1.0, 1.05] {
            let h = 1e-6 * p.eps();
            if kind.has_energy() {
                let u = InteriorVector::from_fn(p, |_| rng.gen_range(-0.02..0.02) * p.eps());
                let y = displaced(kind, &p, f, &u);
                let frc = force(kind, &p, &lj, f, y.as_slice().unwrap())?;
                let offset = usize::from(kind == ModelKind::Atomistic);
                let scale = frc.values().iter().fold(0.0f64, |a, b| a.max(b.abs())) * p.eps();
                for j in p.sites() {
                    let slot = p.index(j) + 1 + offset;
                    let (mut yp, mut ym) = (y.clone(), y.clone());
                    yp[slot] += h;
                    ym[slot] -= h;
                    let de = (energy(kind, &p, &lj, f, yp.as_slice().unwrap())?
                        - energy(kind, &p, &lj, f, ym.as_slice().unwrap())?)
                        / (2.0 * h);
                    grad_err = grad_err.max((de + p.eps() * frc.at(j)).abs() / scale.max(1e-3));
                }
            }
            let a = assemble(kind, &p, &moduli(&lj, f)?)?;
            let amax = a.matrix().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for j in p.sites() {
                let (mut up, mut dn) = (InteriorVector::zeros(p), InteriorVector::zeros(p));
                up.values_mut()[p.index(j)] = h;
                dn.values_mut()[p.index(j)] = -h;
                let fp = force(kind, &p, &lj, f, displaced(kind, &p, f, &up).as_slice().unwrap())?;
                let fm = force(kind, &p, &lj, f, displaced(kind, &p, f, &dn).as_slice().unwrap())?;
                let col = (fm.values() - fp.values()) / (2.0 * h);
                let d = (&col - &a.matrix().column(p.index(j))).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                hess_err = hess_err.max(d / amax);
            }
        }
    }
    Ok((grad_err, hess_err))
}

fn render(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(args).expect("valid arguments");
    execute(cli.command).expect("valid configuration").render()
}

fn c15_property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (grad_err, hess_err) = fd_checks(&mut rng)?;

    let mut sbp = 0.0f64;
    let mut quad = 0.0f64;
    for _ in 0..64 {
        let n = rng.gen_range(3..80);
        let p = Params::lattice(n)?;
        let e = p.eps();
        let u = InteriorVector::from_fn(p, |_| rng.gen_range(-1.0..1.0));
        let w = InteriorVector::from_fn(p, |_| rng.gen_range(-1.0..1.0));
        let lap: Array1<f64> = laplacian_matrix(&p).dot(u.values());
        let lhs = inner_l2(lap.as_slice().unwrap(), w.values().as_slice().unwrap(), e)?;
        let (gu, gw) = (forward_difference(&u), forward_difference(&w));
        let rhs = inner_l2(gu.values().as_slice().unwrap(), gw.values().as_slice().unwrap(), e)?;
        sbp = sbp.max((lhs - rhs).abs() / (norm_u12(&u) * norm_u12(&w)));

        let p1 = rng.gen_range(0.5..3.0);
        let s = State::from_moduli(p1, rng.gen_range(0.01..1.0) * p1);
        let a = assemble(ModelKind::Atomistic, &p, &s)?;
        let form = inner_l2(a.apply(&u).values().as_slice().unwrap(), u.values().as_slice().unwrap(), e)?;
        let mut curv: Vec<f64> = second_difference(&u).values().to_vec();
        curv.push(-u.at(n as isize - 1) / (e * e));
        curv.push(-u.at(-(n as isize) + 1) / (e * e));
        let g2 = inner_l2(gu.values().as_slice().unwrap(), gu.values().as_slice().unwrap(), e)?;
        let c2 = inner_l2(&curv, &curv, e)?;
        let want = s.a_f * g2 - e * e * s.phi2_2f * c2;
        quad = quad.max((form - want).abs() / form.abs().max(want.abs()));
    }

    let runs: [&[&str]; 3] = [
        &["qcf-lab", "spectrum-table", "--n", "8", "--n", "32"],
        &["qcf-lab", "gmres-figures", "--n", "32", "--k", "4"],
        &["qcf-lab", "critical-strains", "--n", "24", "--k", "8"],
    ];
    let deterministic = runs.iter().all(|args| render(args) == render(args));

    let ok = grad_err <= 1e-6 && hess_err <= 1e-6 && sbp <= 1e-13 && quad <= 1e-12 && deterministic;
    Ok((
        ok,
        format!(
            "gradient FD {grad_err:.1e}, Hessian FD {hess_err:.1e}, summation by parts {sbp:.1e}, \
             quadratic form {quad:.1e}, CSV deterministic = {deterministic}"
        ),
    ))
}

/// Conjecture evidence from the cond-figures sweep; failures here are not
/// solver failures and do not change the exit status.
fn conjecture_evidence() {
    let cli = Cli::try_parse_from(["qcf-lab", "cond-figures"]).expect("valid arguments");
    let report = match execute(cli.command) {
        Ok(r) => r,
        Err(e) => {
            println!("conjecture evidence: FAIL (configuration error: {e})");
            return;
        }
    };
    for check in ["cond_v_sublog", "cond_v_tilde_exponent"] {
        let violations: Vec<_> =
            report.failures.iter().filter(|f| f.class == FailureClass::Conjecture && f.check == check).collect();
        match violations.first() {
            None => println!("conjecture evidence {check}: PASS"),
            Some(f) => println!("conjecture evidence {check}: FAIL conjecture evidence violated ({})", f.detail),
        }
    }
    if let Some(f) = report.failures.iter().find(|f| f.class != FailureClass::Conjecture) {
        println!("conjecture evidence: FAIL solver check {} ({})", f.check, f.detail);
    }
}

fn main() {
    let criteria: [Criterion; 15] = [
        ("spectrum identity", c01_spectrum_identity),
        ("generalized spectrum identity", c02_generalized_spectrum_identity),
        ("QNL closed-form U12 spectrum", c03_qnl_closed_form_spectrum),
        ("QNL coercivity", c04_qnl_coercivity),
        ("QCE constant lambda_K", c05_qce_constant),
        ("QCF indefiniteness", c06_qcf_indefinite),
        ("inverse-norm bound", c07_inverse_norm_bound),
        ("Laplacian Rayleigh identity", c08_laplacian_rayleigh),
        ("preconditioned GMRES finite termination", c09_finite_termination),
        ("preconditioned contraction rate and envelope", c10_contraction_rate),
        ("plain GMRES envelope", c11_plain_envelope),
        ("ghost-force identity", c12_ghost_force_identity),
        ("GFC behaviour and critical strains", c13_gfc_behaviour),
        ("modified-CG instability", c14_modified_cg_probe),
        ("property suites", c15_property_suites),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {name}: {verdict} ({detail}) [{secs:.1}s]", i + 1);
        if !ok {
            failed.push(i + 1);
        }
    }
    conjecture_evidence();
    println!("{} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
