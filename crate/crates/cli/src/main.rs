use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use halfmass::config::{Command, RunConfig};
use halfmass::families::FamilyParams;
use halfmass::runner::{exit_code_for, init_threads_from_env, parse_list, run, EXIT_USAGE};

/// Numerical checks for positive mass theorems with noncompact boundary.
#[derive(Parser)]
#[command(name = "halfmass", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Interior, tilted and (with --gamma) capillary dominant energy conditions.
    CheckDec {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        gamma: Option<String>,
        /// DEC tolerance (default depends on the backend).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Energy and momentum fluxes with radius extrapolation.
    Adm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radii: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Divide every charge by this constant.
        #[arg(long)]
        normalize: Option<f64>,
    },
    /// Charges before and after random boundary-plane rotations.
    Invariance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radii: Option<String>,
        #[arg(long)]
        rotations: Option<usize>,
    },
    /// Clifford relations, boundary-operator identities and projectors.
    VerifyClifford {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta_grid: Option<usize>,
    },
    /// Schrödinger–Lichnerowicz and boundary identities under grid refinement.
    VerifySl {
        #[command(flatten)]
        common: Common,
        /// Grid spacings, comma separated.
        #[arg(long)]
        h: Option<String>,
    },
    /// Constant-spinor boundary flux against the assembled charges.
    WittenFlux {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radii: Option<String>,
    },
    /// Capillary surface: null expansion, boundary identities and stability functional.
    Mots {
        #[command(flatten)]
        common: Common,
        /// `plane:<offset>,<slope>` or `cap:<c0>,...,<radius>`.
        #[arg(long)]
        surface: Option<String>,
        /// Degrees, or `linear:<deg>:<s0>,<s1>,...`.
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        basis: Option<usize>,
        #[arg(long)]
        trace_samples: Option<usize>,
    },
    /// List the bundled families and capillary configurations.
    Families {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    /// Angle in degrees.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// `+` or `-`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_sign)]
    sign: Option<i8>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Print the canonical configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s {
        "+" | "+1" | "1" | "plus" => Ok(1),
        "-" | "-1" | "minus" => Ok(-1),
        _ => Err(format!("expected + or -, got '{s}'")),
    }
}

fn radii(s: &Option<String>) -> Result<Option<Vec<f64>>, String> {
    s.as_deref().map(|v| parse_list(v).map_err(|e| format!("bad list '{v}': {e}"))).transpose()
}

fn build(cmd: Cmd) -> Result<(RunConfig, bool), String> {
    let (command, common) = match &cmd {
        Cmd::CheckDec { common, .. } => (Command::CheckDec, common),
        Cmd::Adm { common, .. } => (Command::Adm, common),
        Cmd::Invariance { common, .. } => (Command::Invariance, common),
        Cmd::VerifyClifford { common, .. } => (Command::VerifyClifford, common),
        Cmd::VerifySl { common, .. } => (Command::VerifySl, common),
        Cmd::WittenFlux { common, .. } => (Command::WittenFlux, common),
        Cmd::Mots { common, .. } => (Command::Mots, common),
        Cmd::Families { common } => (Command::Families, common),
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let mut c = RunConfig::load(path).map_err(|e| e.to_string())?;
            c.command = command;
            c
        }
        None => {
            let default = if command == Command::Mots { "schwarzschild-plane" } else { "flat" };
            RunConfig::new(command, FamilyParams::named(default))
        }
    };
    let f = &mut cfg.family;
    if let Some(v) = &common.family {
        f.name = v.clone();
    }
    if let Some(v) = common.n {
        f.n = v;
    }
    if let Some(v) = common.m {
        f.m = v;
    }
    f.amplitude = common.amplitude.or(f.amplitude);
    f.width = common.width.or(f.width);
    f.decay = common.decay.or(f.decay);
    cfg.theta = common.theta.unwrap_or(cfg.theta);
    cfg.sign = common.sign.unwrap_or(cfg.sign);
    cfg.seed = common.seed.unwrap_or(cfg.seed);
    cfg.quadrature_order = common.order.unwrap_or(cfg.quadrature_order);
    if common.json.is_some() {
        cfg.output.json = common.json.clone();
    }
    let print = common.print_config;
    match cmd {
        Cmd::CheckDec { samples, r_max, gamma, tol, .. } => {
            cfg.samples = samples.unwrap_or(cfg.samples);
            cfg.r_max = r_max.unwrap_or(cfg.r_max);
            cfg.gamma = gamma.or(cfg.gamma);
            cfg.tolerances.dec = tol.or(cfg.tolerances.dec);
        }
        Cmd::Adm { radii: r, csv, normalize, .. } => {
            cfg.radii = radii(&r)?.unwrap_or(cfg.radii);
            cfg.output.csv = csv.or(cfg.output.csv);
            cfg.normalize = normalize.or(cfg.normalize);
        }
        Cmd::Invariance { radii: r, rotations, .. } => {
            cfg.radii = radii(&r)?.unwrap_or(cfg.radii);
            cfg.rotations = rotations.unwrap_or(cfg.rotations);
        }
        Cmd::VerifyClifford { theta_grid, .. } => {
            cfg.theta_grid = theta_grid.unwrap_or(cfg.theta_grid);
        }
        Cmd::VerifySl { h, .. } => {
            cfg.spacings = radii(&h)?.unwrap_or(cfg.spacings);
        }
        Cmd::WittenFlux { radii: r, .. } => {
            cfg.radii = radii(&r)?.unwrap_or(cfg.radii);
        }
        Cmd::Mots { surface, gamma, basis, trace_samples, .. } => {
            cfg.surface = surface.or(cfg.surface);
            cfg.gamma = gamma.or(cfg.gamma);
            cfg.basis = basis.unwrap_or(cfg.basis);
            cfg.trace_samples = trace_samples.unwrap_or(cfg.trace_samples);
        }
        Cmd::Families { .. } => {}
    }
    Ok((cfg, print))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let usage = |msg: &str| {
        eprintln!("error: {msg}");
        ExitCode::from(EXIT_USAGE as u8)
    };
    let (cfg, print) = match build(cli.command) {
        Ok(v) => v,
        Err(e) => return usage(&e),
    };
    if print {
        return match cfg.canonical() {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => usage(&e.to_string()),
        };
    }
    if let Err(e) = init_threads_from_env() {
        return usage(&e.to_string());
    }
    match run(&cfg) {
        Ok(out) => {
            if cfg.output.json.is_none() {
                print!("{}", out.json);
            }
            for c in &out.report.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                eprintln!("{tag} {} value={:e} tolerance={:e}", c.name, c.value, c.tolerance);
            }
            let failed = out.failed_checks();
            if !failed.is_empty() {
                eprintln!("failed checks: {}", failed.join(", "));
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
