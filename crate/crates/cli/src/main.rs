//! `kms`: run the inequality experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 operator not
//! elliptic (`check-elliptic` only), 3 non-finite values in the results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "kms",
    version,
    about = "Numerical laboratory for Korn-Maxwell-Sobolev inequalities",
    long_about = "Numerical laboratory for Korn-Maxwell-Sobolev inequalities.\n\n\
        Flags may also be given in a TOML file passed with --config, using the long flag \
        names as keys. Flags on the command line win over the file, and the KMS_SEED \
        environment variable wins over both.\n\n\
        Exit codes: 0 success, 1 usage or configuration error, 2 operator not elliptic, \
        3 non-finite values in the results."
)]
struct Cli {
    /// TOML file with flag values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for corpus items [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Print the effective configuration as TOML and exit
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the unit sphere for the smallest singular value of the symbol
    CheckElliptic(CheckElliptic),
    /// Split a periodic field into divergence-free and curl-free parts
    Decompose(Decompose),
    /// Measure the first-kind or subcritical inequality over a random corpus
    Verify(Verify),
    /// Measure a BMO, Morrey, Lorentz or fractional variant
    VerifyVariant(VerifyVariant),
    /// Measure the second-kind inequality on the unit cube
    Verify2(Verify2),
    /// Oscillating sequence along a kernel direction of a non-elliptic operator
    Counterexample(Counterexample),
    /// Extend a divergence-free field from the unit cube to the tripled cube
    Extend(Extend),
}

#[derive(Debug, Args)]
struct CheckElliptic {
    /// Builtin name (grad, sym, dev, skew, trace) or JSON file
    #[arg(long)]
    operator: Option<String>,
    /// Sphere sample count [default: 2000]
    #[arg(long)]
    samples: Option<usize>,
    /// Ellipticity threshold on the smallest singular value [default: 1e-6]
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct Decompose {
    /// Input KMSF field with 3 or 9 components on a periodic grid
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output for the divergence-free part
    #[arg(long, value_name = "FILE")]
    out_div: Option<PathBuf>,
    /// Output for the curl-free part
    #[arg(long, value_name = "FILE")]
    out_curl: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Grid sides, comma separated [default: 32,48 for verify; 8,16 for fractional; 16,32 otherwise]
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    /// Corpus size [default: 100 for verify, 50 otherwise]
    #[arg(long)]
    corpus: Option<usize>,
    /// Corpus seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Degree of the corpus polynomials [default: 1 for verify2, 2 otherwise]
    #[arg(long)]
    kmax: Option<usize>,
    /// CSV with one row per field and grid
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON summary [default: stdout]
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoxArgs {
    /// Radius of the bump window [default: 0.5]
    #[arg(long)]
    support_radius: Option<f64>,
    /// Side of the periodic box [default: 3]
    #[arg(long)]
    box_width: Option<f64>,
}

#[derive(Debug, Args)]
struct Verify {
    /// Builtin name (grad, sym, dev, skew, trace) or JSON file
    #[arg(long)]
    operator: Option<String>,
    /// first_kind or subcritical [default: first_kind]
    #[arg(long)]
    kind: Option<String>,
    /// Exponent of the curl term [default: 2]
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    bx: BoxArgs,
}

#[derive(Debug, Args)]
struct VerifyVariant {
    /// bmo, morrey, lorentz or fractional
    #[arg(long)]
    kind: Option<String>,
    /// Builtin name or JSON file [default: sym]
    #[arg(long)]
    operator: Option<String>,
    /// Exponent [default: 3 for bmo, 6 for morrey, 2 otherwise]
    #[arg(long)]
    p: Option<f64>,
    /// Lorentz second index [default: each norm's own first index]
    #[arg(long)]
    q: Option<f64>,
    /// Fractional order [default: 0.5]
    #[arg(long)]
    theta: Option<f64>,
    /// Hölder anchor budget [default: 4096]
    #[arg(long)]
    pair_budget: Option<usize>,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    bx: BoxArgs,
}

#[derive(Debug, Args)]
struct Verify2 {
    /// sym or dev
    #[arg(long)]
    mode: Option<String>,
    /// Exponent of the curl term [default: 2]
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Debug, Args)]
struct Counterexample {
    /// Builtin name or JSON file of a non-elliptic operator
    #[arg(long)]
    operator: Option<String>,
    /// Oscillation frequencies, comma separated [default: 4,8,16,32]
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<u32>>,
    /// Norm exponent [default: 2]
    #[arg(long)]
    p: Option<f64>,
    /// Grid side [default: 64]
    #[arg(long)]
    grid: Option<usize>,
    /// CSV with one row per k
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON summary [default: stdout]
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Extend {
    /// Input KMSF vector field on a cube
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output KMSF field on the tripled cube
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// JSON report [default: stdout]
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Number of weak divergence test functions [default: 8]
    #[arg(long)]
    div_tests: Option<usize>,
    /// Seed of the test functions [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

impl CorpusArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            grids: self.grids.clone(),
            corpus: self.corpus,
            seed: self.seed,
            kmax: self.kmax,
            out: self.out.clone(),
            summary: self.summary.clone(),
            ..Default::default()
        }
    }
}

impl BoxArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            support_radius: self.support_radius,
            box_width: self.box_width,
            ..Default::default()
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckElliptic(_) => "check-elliptic",
            Command::Decompose(_) => "decompose",
            Command::Verify(_) => "verify",
            Command::VerifyVariant(_) => "verify-variant",
            Command::Verify2(_) => "verify2",
            Command::Counterexample(_) => "counterexample",
            Command::Extend(_) => "extend",
        }
    }

    /// Flags given on the command line.
    fn config(&self) -> RunConfig {
        match self {
            Command::CheckElliptic(a) => RunConfig {
                operator: a.operator.clone(),
                samples: a.samples,
                tol: a.tol,
                ..Default::default()
            },
            Command::Decompose(a) => RunConfig {
                input: a.input.clone(),
                out_div: a.out_div.clone(),
                out_curl: a.out_curl.clone(),
                ..Default::default()
            },
            Command::Verify(a) => RunConfig {
                operator: a.operator.clone(),
                kind: a.kind.clone(),
                p: a.p,
                ..Default::default()
            }
            .or(a.corpus.config())
            .or(a.bx.config()),
            Command::VerifyVariant(a) => RunConfig {
                kind: a.kind.clone(),
                operator: a.operator.clone(),
                p: a.p,
                q: a.q,
                theta: a.theta,
                pair_budget: a.pair_budget,
                ..Default::default()
            }
            .or(a.corpus.config())
            .or(a.bx.config()),
            Command::Verify2(a) => RunConfig {
                mode: a.mode.clone(),
                p: a.p,
                ..Default::default()
            }
            .or(a.corpus.config()),
            Command::Counterexample(a) => RunConfig {
                operator: a.operator.clone(),
                ks: a.ks.clone(),
                p: a.p,
                grid: a.grid,
                out: a.out.clone(),
                summary: a.summary.clone(),
                ..Default::default()
            },
            Command::Extend(a) => RunConfig {
                input: a.input.clone(),
                out: a.out.clone(),
                report: a.report.clone(),
                div_tests: a.div_tests,
                seed: a.seed,
                ..Default::default()
            },
        }
    }
}

/// Failure with its exit code and a one-line reason.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn report(&self) -> (u8, String) {
        let (code, tag, msg) = match self {
            Failure::Usage(m) => (1, "usage", m),
            Failure::Numerical(m) => (3, "numerical", m),
        };
        (code, format!("error: {tag}: {}", msg.replace('\n', " ")))
    }
}

impl From<kms_core::KmsError> for Failure {
    fn from(e: kms_core::KmsError) -> Self {
        use kms_core::KmsError as E;
        match e {
            E::Numerical(_) | E::NonFinite { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let name = cli.command.name();
    let mut cfg = cli.command.config();
    cfg.jobs = cli.jobs;
    if let Some(path) = &cli.config {
        let file = RunConfig::load(path).map_err(Failure::Usage)?;
        file.check_keys(name, commands::allowed_keys(name))
            .map_err(Failure::Usage)?;
        cfg = cfg.or(file);
    }
    if let Ok(seed) = std::env::var("KMS_SEED") {
        let seed = seed
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("KMS_SEED = '{seed}' is not an unsigned integer")))?;
        cfg.seed = Some(seed);
    }
    if cli.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(0);
    }
    commands::dispatch(name, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(1);
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            let line = line.strip_prefix("error: ").unwrap_or(line);
            eprintln!("error: usage: {line}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (code, line) = f.report();
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
