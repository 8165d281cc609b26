mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use config::{parse_config, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "kkit", version, about = "Geometric side of the Kuznetsov sum formula over Q and real quadratic fields")]
pub struct Cli {
    /// worker threads (default: logical cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// configuration file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Field invariants
    #[command(subcommand)]
    Field(FieldCmd),
    /// Kloosterman sums
    #[command(subcommand)]
    Kloosterman(KloostermanCmd),
    /// The delta-term functional of the special test functions
    #[command(subcommand)]
    Eta(EtaCmd),
    /// Bessel transforms against their envelopes
    #[command(subcommand)]
    Bessel(BesselCmd),
    /// Delta and Kloosterman terms over an s grid
    #[command(subcommand)]
    Geometric(GeometricCmd),
    /// Ray class groups and their ideal counts
    #[command(subcommand)]
    Rayclass(RayclassCmd),
    /// Hecke L-functions on a vertical line
    #[command(subcommand)]
    Lfun(LfunCmd),
    /// Eisenstein coefficient sum: direct against decomposed
    #[command(subcommand)]
    Phi(PhiCmd),
    /// Density constants and the Tauberian harness
    #[command(subcommand)]
    Density(DensityCmd),
    /// Run the acceptance suite
    VerifyAll(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FieldArgs {
    /// squarefree D >= 1; 1 means Q
    #[arg(long = "D")]
    pub d: Option<i64>,
}

#[derive(Args, Debug, Clone)]
pub struct ModulusArgs {
    /// modulus as an integer m (the ideal (m)) or as generators [g1; g2]
    #[arg(long)]
    pub q: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum FieldCmd {
    Info(FieldArgs),
}

#[derive(Subcommand, Debug)]
pub enum KloostermanCmd {
    /// S(r, r; c)
    Eval {
        #[command(flatten)]
        field: FieldArgs,
        /// Fourier index in the inverse different, e.g. 1 or (2+w)/5
        #[arg(long)]
        r: Option<String>,
        /// modulus element, e.g. 7 or 3+2w
        #[arg(long)]
        c: Option<String>,
    },
    /// Weil-Salie ratios over c in q up to units
    Scan {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        modulus: ModulusArgs,
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        max_norm: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum EtaCmd {
    Eval {
        /// plus or minus
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        s: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BesselCmd {
    /// Transform of a special test function against its envelope
    Check {
        /// plus or minus
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        s_grid: Option<String>,
        #[arg(long)]
        y_grid: Option<String>,
        /// emit the cross-method grid of J_w(t) instead
        #[arg(long)]
        cross: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum GeometricCmd {
    Scan {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        modulus: ModulusArgs,
        #[arg(long)]
        r: Option<String>,
        /// e.g. "Q+=1;Q-=2"
        #[arg(long)]
        partition: Option<String>,
        /// e.g. 0.5:0.02:log
        #[arg(long, alias = "grid")]
        s_grid: Option<String>,
        /// norm truncation B
        #[arg(long = "B")]
        bound_b: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum RayclassCmd {
    Table {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        modulus: ModulusArgs,
        /// norm bound for the ideal counts
        #[arg(long)]
        terms: Option<u64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum LfunCmd {
    Eval {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        modulus: ModulusArgs,
        /// character index in the ray class group
        #[arg(long)]
        chi: Option<usize>,
        /// mu as a multiple of the lattice spacing
        #[arg(long)]
        mu_k: Option<i64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        /// number of equal steps from t0 to t1
        #[arg(long)]
        steps: Option<usize>,
        /// explicit grid of t on the line Re s = 1, in place of t0, t1 and steps
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        terms: Option<u64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum PhiCmd {
    Check {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        modulus: ModulusArgs,
        #[arg(long)]
        r: Option<String>,
        /// e.g. 0.5 or 0.5+3i
        #[arg(long)]
        nu: Option<String>,
        #[arg(long = "B")]
        bound_b: Option<u64>,
        #[arg(long)]
        mu_k: Option<i64>,
        /// cusp gamma/delta
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        delta: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum DensityCmd {
    Constants {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        partition: Option<String>,
        /// "j:a,b;..." with 1-based places
        #[arg(long)]
        cube: Option<String>,
    },
    Tauber {
        #[command(flatten)]
        field: FieldArgs,
        /// dgrid, uniform or adversarial
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        partition: Option<String>,
        #[arg(long)]
        cube: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        x_max: Option<f64>,
        /// grid of X
        #[arg(long = "X")]
        x: Option<String>,
    },
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// skip the slow dominance criterion
    #[arg(long)]
    pub quick: bool,
}

/// Exit with usage text when a required value is neither flagged nor configured.
pub fn missing(path: &[&str], flag: &str, key: &str) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    let mut sub = &mut cmd;
    for p in path {
        sub = sub.find_subcommand_mut(p).expect("known subcommand");
    }
    sub.error(
        clap::error::ErrorKind::MissingRequiredArgument,
        format!("missing required flag {flag} (or config key {key})"),
    )
    .exit()
}

fn error_record(kind: &str, msg: &str) {
    let rec = serde_json::json!({ "error": { "kind": kind, "message": msg } });
    eprintln!("{rec}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error_record("threads", &e.to_string());
            return ExitCode::from(1);
        }
    }
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        let text = match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                error_record("io", &format!("{}: {e}", p.display()));
                return ExitCode::from(1);
            }
        };
        cfg = match parse_config(&text) {
            Ok(c) => c,
            Err(e) => {
                error_record("config", &format!("{}: {e}", p.display()));
                return ExitCode::from(1);
            }
        };
    }
    let sink = output::Sink { path: cli.out.clone() };
    match commands::run(cli.command, cfg, &sink) {
        Ok(code) => code,
        Err(e) => {
            let kind = if e.downcast_ref::<kkit::Error>().is_some() { "module" } else { "runtime" };
            error_record(kind, &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
