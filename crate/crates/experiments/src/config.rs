//! Command-line surface and its resolution into validated sweep parameters.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcf_core::potentials::moduli;
use qcf_core::{LennardJones, Morse, PairPotential, Params, State, Variant};

use crate::ConfigError;

/// How the interface half-width K is chosen for each lattice size N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KRule {
    Fixed(usize),
    /// `floor(sqrt(N)) + 1`
    Sqrt,
    /// `floor(N / 4)`
    Quarter,
}

impl KRule {
    pub fn k_for(self, n: usize) -> usize {
        match self {
            KRule::Fixed(k) => k,
            KRule::Sqrt => (n as f64).sqrt().floor() as usize + 1,
            KRule::Quarter => n / 4,
        }
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KRule::Fixed(k) => write!(f, "fixed:{k}"),
            KRule::Sqrt => f.write_str("sqrt"),
            KRule::Quarter => f.write_str("quarter"),
        }
    }
}

impl FromStr for KRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sqrt" => Ok(KRule::Sqrt),
            "quarter" => Ok(KRule::Quarter),
            _ => {
                let digits = s.strip_prefix("fixed:").unwrap_or(s);
                digits
                    .parse()
                    .map(KRule::Fixed)
                    .map_err(|_| format!("unknown K rule '{s}' (expected sqrt, quarter, fixed:K or K)"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    LennardJones,
    Morse(f64),
}

impl PotentialSpec {
    pub fn build(self) -> Box<dyn PairPotential<f64>> {
        match self {
            PotentialSpec::LennardJones => Box::new(LennardJones),
            PotentialSpec::Morse(alpha) => Box::new(Morse { alpha }),
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::LennardJones => f.write_str("lj"),
            PotentialSpec::Morse(a) => write!(f, "morse:{a}"),
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "lj" {
            return Ok(PotentialSpec::LennardJones);
        }
        match s.strip_prefix("morse:").map(str::parse::<f64>) {
            Some(Ok(a)) if a > 0.0 && a.is_finite() => Ok(PotentialSpec::Morse(a)),
            _ => Err(format!("unknown potential '{s}' (expected lj or morse:ALPHA with ALPHA > 0)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumMode {
    Standard,
    Generalized,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "qcf-lab", version, about = "Spectral and Krylov experiments on linearized quasicontinuum operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Lattice half-size N; repeat for a sweep.
    #[arg(long = "n", value_name = "N")]
    pub n: Vec<usize>,
    /// Fixed interface half-width K (shorthand for --k-rule fixed:K).
    #[arg(long, conflicts_with = "k_rule")]
    pub k: Option<usize>,
    /// K rule: sqrt (floor(sqrt N)+1), quarter (floor(N/4)) or fixed:K; repeatable.
    #[arg(long = "k-rule", value_name = "RULE")]
    pub k_rule: Vec<KRule>,
    /// Continuum modulus A_F; repeat for a sweep.
    #[arg(long = "af", value_name = "A_F")]
    pub af: Vec<f64>,
    /// phi''(F) for states given by A_F.
    #[arg(long = "phif", default_value_t = 1.0)]
    pub phif: f64,
    /// Pair potential: lj or morse:ALPHA.
    #[arg(long)]
    pub potential: Option<PotentialSpec>,
    /// Macroscopic strain F; with a potential, replaces --af/--phif. Repeatable.
    #[arg(long, value_name = "F")]
    pub strain: Vec<f64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Distance between sorted QCF and QNL spectra over an (N, A_F) grid.
    SpectrumTable {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = SpectrumMode::Both)]
        mode: SpectrumMode,
    },
    /// Eigenbasis condition numbers of L^qcf and L^{-1} L^qcf over N and K rules.
    CondFigures {
        #[command(flatten)]
        common: Common,
    },
    /// GMRES residual and error traces with theoretical envelopes.
    GmresFigures {
        #[command(flatten)]
        common: Common,
        /// plain, precond-l2 or precond-u12; repeatable.
        #[arg(long)]
        variant: Vec<Variant>,
        /// Iteration cap (default 2N-1).
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Coercivity infima of all five operators and the extracted constants.
    StabilityScan {
        #[command(flatten)]
        common: Common,
    },
    /// Critical strains F_* and F^gfc for a pair potential.
    CriticalStrains {
        #[command(flatten)]
        common: Common,
        /// Use this lambda_K instead of measuring it; repeatable.
        #[arg(long = "lambda-k")]
        lambda_k: Vec<f64>,
    },
    /// Ghost-force-correction iteration across a strain scan.
    GfcScan {
        #[command(flatten)]
        common: Common,
        #[arg(long = "max-iter", default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SpectrumTable { .. } => "spectrum-table",
            Command::CondFigures { .. } => "cond-figures",
            Command::GmresFigures { .. } => "gmres-figures",
            Command::StabilityScan { .. } => "stability-scan",
            Command::CriticalStrains { .. } => "critical-strains",
            Command::GfcScan { .. } => "gfc-scan",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::SpectrumTable { common, .. }
            | Command::CondFigures { common }
            | Command::GmresFigures { common, .. }
            | Command::StabilityScan { common }
            | Command::CriticalStrains { common, .. }
            | Command::GfcScan { common, .. } => common,
        }
    }
}

/// A lattice point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub rule: KRule,
    pub params: Params,
}

/// Parsed and validated sweep description shared by all subcommands.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n_list: Vec<usize>,
    pub k_rules: Vec<KRule>,
    pub states: Vec<State>,
    /// Labels of caption parameters that fell back to built-in defaults.
    pub defaulted: Vec<String>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Resolves defaults and checks every (N, K) pair before any computation.
    pub fn resolve(
        command: Command,
        default_n: &[usize],
        default_rules: &[KRule],
        default_af: &[f64],
    ) -> Result<Self, ConfigError> {
        let c = command.common().clone();
        let mut defaulted = Vec::new();
        let n_list = if c.n.is_empty() {
            defaulted.push(format!("N in {default_n:?}"));
            default_n.to_vec()
        } else {
            c.n.clone()
        };
        let k_rules = match (c.k, c.k_rule.is_empty()) {
            (Some(k), _) => vec![KRule::Fixed(k)],
            (None, false) => c.k_rule.clone(),
            (None, true) => {
                let labels: Vec<String> = default_rules.iter().map(ToString::to_string).collect();
                defaulted.push(format!("K rules {}", labels.join(" ")));
                default_rules.to_vec()
            }
        };
        let states = if !c.strain.is_empty() {
            let pot = c.potential.unwrap_or(PotentialSpec::LennardJones).build();
            c.strain
                .iter()
                .map(|&f| moduli(pot.as_ref(), f).map_err(|e| ConfigError(format!("--strain {f}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            if !(c.phif > 0.0 && c.phif.is_finite()) {
                return Err(ConfigError(format!("--phif must be positive, got {}", c.phif)));
            }
            let afs = if c.af.is_empty() {
                defaulted.push(format!("A_F in {default_af:?}"));
                default_af.to_vec()
            } else {
                c.af.clone()
            };
            if let Some(bad) = afs.iter().find(|a| !a.is_finite()) {
                return Err(ConfigError(format!("--af must be finite, got {bad}")));
            }
            afs.iter().map(|&a| State::from_moduli(c.phif, a)).collect()
        };
        let cfg = ExperimentConfig { out: c.out.clone(), command, n_list, k_rules, states, defaulted };
        cfg.grid()?;
        Ok(cfg)
    }

    /// All (rule, N) points in rule-major order.
    pub fn grid(&self) -> Result<Vec<GridPoint>, ConfigError> {
        let mut pts = Vec::new();
        for &rule in &self.k_rules {
            for &n in &self.n_list {
                let k = rule.k_for(n);
                if n < 4 || k < 1 || k + 2 > n {
                    return Err(ConfigError(format!(
                        "N = {n} with K = {k} ({rule}) violates N >= 4 and 1 <= K <= N - 2"
                    )));
                }
                let params = Params::new(n, k).map_err(|e| ConfigError(e.to_string()))?;
                pts.push(GridPoint { rule, params });
            }
        }
        Ok(pts)
    }
}
