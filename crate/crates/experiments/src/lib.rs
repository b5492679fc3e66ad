//! Reproduction driver: runs parameter sweeps over the quasicontinuum
//! operators and renders each as a CSV table with embedded checks.

pub mod commands;
pub mod config;
pub mod report;

use qcf_core::CsvTable;

pub use config::{Cli, Command, ExperimentConfig, KRule, PotentialSpec, SpectrumMode};
pub use report::{Failure, FailureClass, Report};

/// Exit status for a configuration rejected before any computation.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

fn header(command: &Command) -> Vec<&'static str> {
    match command {
        Command::SpectrumTable { .. } => commands::SPECTRUM_TABLE_HEADER.to_vec(),
        Command::CondFigures { .. } => commands::COND_FIGURES_HEADER.to_vec(),
        Command::GmresFigures { .. } => commands::GMRES_FIGURES_HEADER.to_vec(),
        Command::StabilityScan { .. } => commands::STABILITY_SCAN_HEADER.to_vec(),
        Command::CriticalStrains { .. } => commands::CRITICAL_STRAINS_HEADER.to_vec(),
        Command::GfcScan { .. } => commands::GFC_SCAN_HEADER.to_vec(),
    }
}

/// Resolves the configuration, runs the subcommand and returns the finished
/// report. Numerical failures end up in the report, not in the `Err` arm.
pub fn execute(mut command: Command) -> Result<Report, ConfigError> {
    let name = command.name();
    let (dn, dk, daf) = commands::defaults(name);
    if let Command::GfcScan { common, .. } = &mut command {
        if common.strain.is_empty() {
            common.strain = commands::default_strains();
        }
    }
    let figure_defaults = match &command {
        Command::GmresFigures { common, .. } => common.af.is_empty() && common.strain.is_empty(),
        _ => false,
    };
    let cfg = ExperimentConfig::resolve(command, &dn, &dk, &daf)?;
    if let Command::GmresFigures { tol, max_iter, .. } = &cfg.command {
        if tol.is_nan() || *tol <= 0.0 {
            return Err(ConfigError(format!("--tol must be positive, got {tol}")));
        }
        if *max_iter == Some(0) {
            return Err(ConfigError("--max-iter must be at least 1".into()));
        }
    }

    let mut report = Report::new(CsvTable::new(header(&cfg.command)));
    report.comment(format!("command={name}"));
    report.comment(format!("n={}", join(&cfg.n_list)));
    report.comment(format!("k_rules={}", join(&cfg.k_rules)));
    if figure_defaults {
        report.comment("states=phi2_f=1 a_f=0.5 (plain) a_f=0.1 (preconditioned)");
    } else {
        let states: Vec<String> = cfg
            .states
            .iter()
            .map(|s| match s.strain {
                Some(f) => format!("strain={f} phi2_f={} a_f={}", s.phi2_f, s.a_f),
                None => format!("phi2_f={} a_f={}", s.phi2_f, s.a_f),
            })
            .collect();
        report.comment(format!("states={}", states.join(" | ")));
    }
    if !cfg.defaulted.is_empty() || figure_defaults {
        let mut d = cfg.defaulted.clone();
        if figure_defaults {
            d.retain(|x| !x.starts_with("A_F"));
            d.push("A_F per figure".into());
        }
        report.comment(format!("defaults_used={}", d.join("; ")));
    }

    let outcome = match &cfg.command {
        Command::SpectrumTable { mode, .. } => commands::spectrum_table(&cfg, *mode, &mut report),
        Command::CondFigures { .. } => commands::cond_figures(&cfg, &mut report),
        Command::GmresFigures { variant, max_iter, tol, .. } => {
            commands::gmres_figures(&cfg, variant, *max_iter, *tol, figure_defaults, &mut report)
        }
        Command::StabilityScan { .. } => commands::stability_scan(&cfg, &mut report),
        Command::CriticalStrains { common, lambda_k } => commands::critical_strains(
            &cfg,
            common.potential.unwrap_or(PotentialSpec::LennardJones),
            lambda_k,
            &mut report,
        ),
        Command::GfcScan { max_iter, tol, .. } => commands::gfc_scan(&cfg, *max_iter, *tol, &mut report),
    };
    if let Err(e) = outcome {
        report.fail(FailureClass::Compute, name, e.to_string());
    }
    Ok(report.finish())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}
