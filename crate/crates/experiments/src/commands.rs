//! One function per subcommand. Each fills the report's table and records
//! the checks it embeds; numerical errors are returned to the caller.

use qcf_core::krylov::{
    direct_solve, gfc_stationary_solve, gmres_solve, preconditioned_rate, theoretical_envelope, GmresConfig,
};
use qcf_core::operators::{assemble, rhs_cosine, ModelKind};
use qcf_core::potentials::{continuum_modulus, critical_strain_atomistic, critical_strain_gfc, gfc_modulus};
use qcf_core::spectral::{
    coercivity_infimum, eigbasis_condition_preconditioned, eigbasis_condition_standard, loglog_slope,
    preconditioned_matrix, spectrum_diff, StabilityConstant,
};
use qcf_core::{fmt17, InteriorVector, Params, Result, State, Variant};

use crate::config::{ExperimentConfig, GridPoint, KRule, PotentialSpec, SpectrumMode};
use crate::report::{FailureClass, Report};

pub const SPECTRUM_TABLE_HEADER: [&str; 8] =
    ["n", "k", "a_f", "phi2_f", "mode", "linf_diff", "max_imag_qcf", "operator_norm"];
pub const COND_FIGURES_HEADER: [&str; 9] =
    ["record", "k_rule", "n", "k", "a_f", "phi2_f", "cond_v", "cond_v_tilde", "cond_w_tilde"];
pub const GMRES_FIGURES_HEADER: [&str; 10] =
    ["variant", "n", "k", "a_f", "phi2_f", "iteration", "residual_norm", "relative_residual", "error_norm", "envelope"];
pub const STABILITY_SCAN_HEADER: [&str; 11] =
    ["n", "k", "a_f", "phi2_f", "inf_atomistic", "inf_qcl", "inf_qcf", "inf_qce", "inf_qnl", "nu_eps", "lambda_k"];
pub const CRITICAL_STRAINS_HEADER: [&str; 10] = [
    "potential",
    "lambda_k",
    "lambda_source",
    "n",
    "k",
    "f_star",
    "f_gfc",
    "gap",
    "modulus_residual_star",
    "modulus_residual_gfc",
];
pub const GFC_SCAN_HEADER: [&str; 10] = [
    "n",
    "k",
    "strain",
    "a_f",
    "qce_min_eigenvalue",
    "spectral_radius",
    "iterations",
    "converged",
    "relative_residual",
    "qcf_residual_max",
];

/// Limit of the QCE interface constant for large K.
pub const LAMBDA_STAR: f64 = 0.6595;

fn frobenius(m: &ndarray::Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn tag(p: &Params, s: &State) -> String {
    format!("n={} k={} a_f={} phi2_f={}", p.n(), p.k(), s.a_f, s.phi2_f)
}

fn grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    cfg.grid().expect("grid validated when the config was resolved")
}

pub fn spectrum_table(cfg: &ExperimentConfig, mode: SpectrumMode, report: &mut Report) -> Result<()> {
    let modes: &[bool] = match mode {
        SpectrumMode::Standard => &[false],
        SpectrumMode::Generalized => &[true],
        SpectrumMode::Both => &[false, true],
    };
    for pt in grid(cfg) {
        let p = pt.params;
        for s in &cfg.states {
            let qcf = assemble(ModelKind::Qcf, &p, s)?;
            for &generalized in modes {
                let cmp = spectrum_diff(ModelKind::Qcf, ModelKind::Qnl, &p, s, generalized)?;
                let norm = if generalized { frobenius(&preconditioned_matrix(&qcf)) } else { frobenius(qcf.matrix()) };
                let label = if generalized { "generalized" } else { "standard" };
                report.table.push_row([
                    p.n().to_string(),
                    p.k().to_string(),
                    fmt17(s.a_f),
                    fmt17(s.phi2_f),
                    label.to_string(),
                    fmt17(cmp.linf_diff),
                    fmt17(cmp.max_imag_a),
                    fmt17(norm),
                ]);
                report.check(cmp.linf_diff <= 1e-8, FailureClass::Assertion, "spectrum_identity", || {
                    format!("{label} {}: linf_diff {:e} > 1e-8", tag(&p, s), cmp.linf_diff)
                });
                report.check(cmp.max_imag_a <= 1e-8 * norm, FailureClass::Assertion, "qcf_real_spectrum", || {
                    format!("{label} {}: max imaginary part {:e}", tag(&p, s), cmp.max_imag_a)
                });
            }
        }
    }
    Ok(())
}

pub fn cond_figures(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    for s in &cfg.states {
        for &rule in &cfg.k_rules {
            let pts: Vec<Params> = grid(cfg).into_iter().filter(|g| g.rule == rule).map(|g| g.params).collect();
            let (mut ns, mut cv, mut cvt, mut cwt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for p in pts {
                let v = eigbasis_condition_standard(&p, s)?;
                let basis = eigbasis_condition_preconditioned(&p, s)?;
                report.table.push_row([
                    "point".to_string(),
                    rule.to_string(),
                    p.n().to_string(),
                    p.k().to_string(),
                    fmt17(s.a_f),
                    fmt17(s.phi2_f),
                    fmt17(v),
                    fmt17(basis.cond_v_tilde),
                    fmt17(basis.cond_w_tilde),
                ]);
                let conds = [v, basis.cond_v_tilde, basis.cond_w_tilde];
                report.check(
                    conds.iter().all(|c| *c >= 1.0 - 1e-12),
                    FailureClass::Assertion,
                    "cond_at_least_one",
                    || format!("{}: {conds:?}", tag(&p, s)),
                );
                if s.phi2_2f == 0.0 {
                    // an orthonormal V~ leaves D V~ with the singular values of D, so cond(W~) = cot(pi / 4N)
                    let cond_d = 1.0 / (std::f64::consts::PI / (4 * p.n()) as f64).tan();
                    let ok = (v - 1.0).abs() <= 1e-10
                        && (basis.cond_v_tilde - 1.0).abs() <= 1e-10
                        && (basis.cond_w_tilde - cond_d).abs() <= 1e-10 * cond_d;
                    report.check(ok, FailureClass::Assertion, "cond_trivial", || {
                        format!("{}: {conds:?} with phi''(2F) = 0, expected [1, 1, {cond_d}]", tag(&p, s))
                    });
                }
                ns.push(p.n() as f64);
                cv.push(v);
                cvt.push(basis.cond_v_tilde);
                cwt.push(basis.cond_w_tilde);
            }
            if ns.len() < 2 {
                continue;
            }
            let slopes = [loglog_slope(&ns, &cv)?, loglog_slope(&ns, &cvt)?, loglog_slope(&ns, &cwt)?];
            report.table.push_row([
                "slope".to_string(),
                rule.to_string(),
                String::new(),
                String::new(),
                fmt17(s.a_f),
                fmt17(s.phi2_f),
                fmt17(slopes[0]),
                fmt17(slopes[1]),
                fmt17(slopes[2]),
            ]);
            if s.phi2_2f < 0.0 {
                report.check(slopes[1] <= 3.3, FailureClass::Conjecture, "cond_v_tilde_exponent", || {
                    format!("rule {rule} a_f={}: fitted exponent {} > 3.3", s.a_f, slopes[1])
                });
                let ratios: Vec<(f64, f64)> =
                    ns.iter().zip(&cv).filter(|(n, _)| **n >= 64.0).map(|(n, c)| (*n, c / n.ln())).collect();
                let decreasing = ratios.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9));
                report.check(decreasing, FailureClass::Conjecture, "cond_v_sublog", || {
                    format!("rule {rule} a_f={}: cond(V)/ln N over N >= 64 is {ratios:?}", s.a_f)
                });
            }
        }
    }
    Ok(())
}

/// Default A_F of each GMRES figure.
fn figure_modulus(v: Variant) -> f64 {
    if v.is_preconditioned() {
        0.1
    } else {
        0.5
    }
}

pub fn gmres_figures(
    cfg: &ExperimentConfig,
    variants: &[Variant],
    max_iter: Option<usize>,
    tol: f64,
    figure_defaults: bool,
    report: &mut Report,
) -> Result<()> {
    let variants: Vec<Variant> = if variants.is_empty() { Variant::ALL.to_vec() } else { variants.to_vec() };
    for &v in &variants {
        let states =
            if figure_defaults { vec![State::from_moduli(1.0, figure_modulus(v))] } else { cfg.states.clone() };
        for pt in grid(cfg) {
            let p = pt.params;
            for s in &states {
                gmres_run(v, &p, s, max_iter, tol, report)?;
            }
        }
    }
    Ok(())
}

fn gmres_run(v: Variant, p: &Params, s: &State, max_iter: Option<usize>, tol: f64, report: &mut Report) -> Result<()> {
    let op = assemble(ModelKind::Qcf, p, s)?;
    let f = rhs_cosine(p);
    let exact = direct_solve(&op, &f)?;
    let mut gcfg = GmresConfig::new(v).rel_tol(tol).with_reference(exact);
    if let Some(m) = max_iter {
        gcfg = gcfg.max_iter(m);
    }
    let (_, trace) = gmres_solve(&op, &f, &gcfg, &InteriorVector::zeros(*p))?;
    let cond = match v {
        Variant::Plain => eigbasis_condition_standard(p, s)?,
        Variant::PrecondL2 => eigbasis_condition_preconditioned(p, s)?.cond_v_tilde,
        Variant::PrecondU12 => eigbasis_condition_preconditioned(p, s)?.cond_w_tilde,
    };
    let rel = trace.relative_residuals();
    let errs = trace.error_norms.clone().unwrap_or_default();
    let mut violations = Vec::new();
    for (m, (r, rr)) in trace.residual_norms.iter().zip(&rel).enumerate() {
        let env = theoretical_envelope(v, m, s, p, cond);
        if *rr > env {
            violations.push(m);
        }
        report.table.push_row([
            v.to_string(),
            p.n().to_string(),
            p.k().to_string(),
            fmt17(s.a_f),
            fmt17(s.phi2_f),
            m.to_string(),
            fmt17(*r),
            fmt17(*rr),
            opt(errs.get(m).copied()),
            fmt17(env),
        ]);
    }
    let id = format!("{v} {}", tag(p, s));
    report
        .comment(format!("run {id} iterations={} converged={} basis_cond={}", trace.iterations, trace.converged, cond));
    let monotone = trace.residual_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    report.check(monotone, FailureClass::Assertion, "residual_monotone", || format!("{id}: residual increased"));
    report.check(violations.is_empty(), FailureClass::Conjecture, "envelope", || {
        format!("{id}: residual above envelope at iterations {violations:?} (conjecture or solver failure)")
    });
    if v == Variant::PrecondL2 && p.k() == 4 && (s.a_f - 0.1).abs() < 1e-12 && s.phi2_f == 1.0 {
        report.check(trace.converged && trace.iterations <= 10, FailureClass::Assertion, "finite_termination", || {
            format!("{id}: {} iterations, converged={}", trace.iterations, trace.converged)
        });
    }
    if v.is_preconditioned() && rel.len() > 25 {
        let q = preconditioned_rate(s);
        let rate = (rel[25] / rel[5]).powf(1.0 / 20.0);
        report.comment(format!("rate {id} observed_5_25={rate} q={q}"));
        report.check(rate <= q + 0.05, FailureClass::Assertion, "contraction_rate", || {
            format!("{id}: observed rate {rate} > q + 0.05 = {}", q + 0.05)
        });
    }
    if v == Variant::PrecondU12 && !errs.is_empty() {
        // ratio of relative error to relative residual while both are above round-off
        let ratios: Vec<f64> =
            errs.iter().zip(&rel).filter(|(_, r)| **r > 1e-12).map(|(e, r)| (e / errs[0]) / r).collect();
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        report.comment(format!("error_to_residual {id} max={hi} min={lo}"));
    }
    Ok(())
}

pub fn stability_scan(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    for s in &cfg.states {
        for &rule in &cfg.k_rules {
            let mut ns = Vec::new();
            let mut neg = Vec::new();
            for pt in grid(cfg).into_iter().filter(|g| g.rule == rule) {
                let p = pt.params;
                let mut inf = [0.0; 5];
                let mut nu = None;
                let mut lambda = None;
                for (slot, kind) in ModelKind::ALL.iter().enumerate() {
                    let r = coercivity_infimum(&assemble(*kind, &p, s)?)?;
                    inf[slot] = r.infimum;
                    match r.extracted_constant {
                        Some(StabilityConstant::NuEps(v)) => nu = Some(v),
                        Some(StabilityConstant::LambdaK(v)) => lambda = Some(v),
                        None => {}
                    }
                }
                let [i_a, i_qcl, i_qcf, i_qce, i_qnl] = inf;
                let mut row = vec![p.n().to_string(), p.k().to_string(), fmt17(s.a_f), fmt17(s.phi2_f)];
                row.extend(inf.iter().map(|x| fmt17(*x)));
                row.push(opt(nu));
                row.push(opt(lambda));
                report.table.push_row(row);

                let id = tag(&p, s);
                let scale = s.phi2_f.abs().max(1.0);
                report.check((i_qnl - s.a_f).abs() <= 1e-10 * scale, FailureClass::Assertion, "qnl_infimum", || {
                    format!("{id}: inf = {i_qnl}")
                });
                report.check((i_qcl - s.a_f).abs() <= 1e-10 * scale, FailureClass::Assertion, "qcl_infimum", || {
                    format!("{id}: inf = {i_qcl}")
                });
                if s.phi2_2f < 0.0 {
                    // the atomistic form adds -eps^2 phi''(2F) ||u''||^2 >= 0 to A_F ||u'||^2
                    report.check(
                        i_qce < i_qnl && i_a >= s.a_f - 1e-10 * scale,
                        FailureClass::Assertion,
                        "stability_ordering",
                        || format!("{id}: atomistic {i_a}, qce {i_qce}, qnl {i_qnl}"),
                    );
                    if let Some(nu) = nu {
                        report
                            .check(nu > 0.0, FailureClass::Assertion, "nu_eps_positive", || format!("{id}: nu = {nu}"));
                    }
                    if let Some(l) = lambda {
                        report.check((0.5..=1.0).contains(&l), FailureClass::Assertion, "lambda_k_range", || {
                            format!("{id}: lambda_K = {l}")
                        });
                        if p.k() >= 16 && p.n() >= p.k() + 8 {
                            report.check(
                                (l - LAMBDA_STAR).abs() <= 1e-3,
                                FailureClass::Assertion,
                                "lambda_k_limit",
                                || format!("{id}: lambda_K = {l}"),
                            );
                        }
                    }
                    if p.n() >= 64 && p.k() >= 2 && 2 * p.k() <= p.n() {
                        report.check(i_qcf < 0.0, FailureClass::Assertion, "qcf_indefinite", || {
                            format!("{id}: inf = {i_qcf}")
                        });
                    }
                    if i_qcf < 0.0 {
                        ns.push(p.n() as f64);
                        neg.push(-i_qcf);
                    }
                }
            }
            if ns.len() >= 3 {
                let slope = loglog_slope(&ns, &neg)?;
                report.comment(format!("qcf_infimum_slope rule={rule} a_f={} slope={slope}", s.a_f));
                report.check((0.4..=0.6).contains(&slope), FailureClass::Assertion, "qcf_infimum_slope", || {
                    format!("rule {rule} a_f={}: slope {slope} outside [0.4, 0.6]", s.a_f)
                });
            }
        }
    }
    Ok(())
}

pub fn critical_strains(
    cfg: &ExperimentConfig,
    potential: PotentialSpec,
    given: &[f64],
    report: &mut Report,
) -> Result<()> {
    let pot = potential.build();
    let f_star = critical_strain_atomistic(pot.as_ref())?;
    let res_star = continuum_modulus(pot.as_ref(), f_star)?;
    report.check(res_star.abs() <= 1e-10, FailureClass::Assertion, "modulus_residual", || {
        format!("A at F_* = {f_star} is {res_star:e}")
    });
    let mut lambdas: Vec<(f64, &str, Option<Params>)> = given.iter().map(|&l| (l, "given", None)).collect();
    if given.is_empty() {
        // lambda_K does not depend on the moduli; any state with phi''(2F) < 0 works
        let probe = State::from_moduli(1.0, 0.4);
        for pt in grid(cfg) {
            let r = coercivity_infimum(&assemble(ModelKind::Qce, &pt.params, &probe)?)?;
            if let Some(c) = r.extracted_constant {
                lambdas.push((c.value(), "measured", Some(pt.params)));
            }
        }
    }
    for (lk, source, params) in lambdas {
        let f_gfc = critical_strain_gfc(pot.as_ref(), lk)?;
        let res_gfc = gfc_modulus(pot.as_ref(), f_gfc, lk)?;
        let gap = f_star - f_gfc;
        report.table.push_row([
            potential.to_string(),
            fmt17(lk),
            source.to_string(),
            params.map(|p| p.n().to_string()).unwrap_or_default(),
            params.map(|p| p.k().to_string()).unwrap_or_default(),
            fmt17(f_star),
            fmt17(f_gfc),
            fmt17(gap),
            fmt17(res_star),
            fmt17(res_gfc),
        ]);
        report.check(res_gfc.abs() <= 1e-10, FailureClass::Assertion, "modulus_residual", || {
            format!("lambda_K={lk}: modulus at F_gfc = {f_gfc} is {res_gfc:e}")
        });
        if lk > 0.0 {
            report.check(gap > 0.0, FailureClass::Assertion, "gfc_before_atomistic", || {
                format!("lambda_K={lk}: F_gfc = {f_gfc} >= F_* = {f_star}")
            });
        } else if lk == 0.0 {
            report.check(gap == 0.0, FailureClass::Assertion, "zero_lambda_gap", || format!("gap = {gap:e}"));
        }
    }
    Ok(())
}

/// Default strain grid of the GFC scan: 1.000, 1.005, ..., 1.110.
pub fn default_strains() -> Vec<f64> {
    (0..=22).map(|i| 1.0 + 0.005 * i as f64).collect()
}

pub fn gfc_scan(cfg: &ExperimentConfig, max_iter: usize, tol: f64, report: &mut Report) -> Result<()> {
    let probe = State::from_moduli(1.0, 0.4);
    for pt in grid(cfg) {
        let p = pt.params;
        let lambda = coercivity_infimum(&assemble(ModelKind::Qce, &p, &probe)?)?
            .extracted_constant
            .map(|c| c.value())
            .unwrap_or(LAMBDA_STAR);
        let f = rhs_cosine(&p);
        for s in &cfg.states {
            let r = gfc_stationary_solve(&p, s, &f, &InteriorVector::zeros(p), max_iter, tol)?;
            let qcf = assemble(ModelKind::Qcf, &p, s)?;
            let last = *r.trace.residual_norms.last().expect("trace has the initial residual");
            let rel = last / r.trace.residual_norms[0];
            let resid = max_abs((f.values() - &qcf.apply_array(r.solution.values())).iter().copied());
            report.table.push_row([
                p.n().to_string(),
                p.k().to_string(),
                opt(s.strain),
                fmt17(s.a_f),
                fmt17(r.qce_min_eigenvalue),
                fmt17(r.spectral_radius),
                r.trace.iterations.to_string(),
                r.converged.to_string(),
                fmt17(rel),
                if r.converged { fmt17(resid) } else { String::new() },
            ]);
            let id = format!("{} strain={:?}", tag(&p, s), s.strain);
            let rho = r.spectral_radius;
            if rho < 0.9 {
                report.check(r.converged, FailureClass::Assertion, "gfc_converges", || format!("{id}: rho = {rho}"));
            }
            if rho > 1.0 {
                report.check(!r.converged, FailureClass::Assertion, "gfc_diverges", || format!("{id}: rho = {rho}"));
            }
            if r.converged {
                report.check(resid <= 1e-10, FailureClass::Assertion, "gfc_fixed_point", || {
                    format!("{id}: max |f - L^qcf u| = {resid:e}")
                });
            }
            // L^qce is positive definite exactly when A_F + lambda_K phi''(2F) > 0
            let predicted = s.a_f + lambda * s.phi2_2f;
            if predicted.abs() > 1e-6 * s.phi2_f.abs() {
                report.check(
                    (r.qce_min_eigenvalue > 0.0) == (predicted > 0.0),
                    FailureClass::Assertion,
                    "qce_positivity",
                    || {
                        format!(
                            "{id}: min eigenvalue {} vs A_F + lambda_K phi''(2F) = {predicted}",
                            r.qce_min_eigenvalue
                        )
                    },
                );
            }
        }
    }
    Ok(())
}

/// Defaults used when the corresponding flag is absent.
pub fn defaults(command_name: &str) -> (Vec<usize>, Vec<KRule>, Vec<f64>) {
    match command_name {
        "spectrum-table" => (vec![8, 32, 128, 512], vec![KRule::Sqrt], vec![0.8, 0.6, 0.4, 0.2, 0.04]),
        "cond-figures" => {
            (vec![16, 32, 64, 128, 256, 512], vec![KRule::Fixed(4), KRule::Sqrt, KRule::Quarter], vec![0.4])
        }
        "gmres-figures" => (vec![64, 256], vec![KRule::Fixed(4), KRule::Sqrt], vec![0.5]),
        "stability-scan" => (vec![64, 128, 256, 512, 1024], vec![KRule::Quarter], vec![0.8]),
        "critical-strains" => (vec![64], vec![KRule::Quarter], vec![0.4]),
        "gfc-scan" => (vec![32], vec![KRule::Fixed(4)], vec![0.4]),
        other => unreachable!("unknown subcommand {other}"),
    }
}
