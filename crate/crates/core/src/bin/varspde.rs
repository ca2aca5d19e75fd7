use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varspde::cli::{run, validate, ExperimentKind, RunConfig, RunFailure};
use varspde::Error;

#[derive(Parser)]
#[command(name = "varspde", version, about = "Variational SPDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed_override: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "VARSPDE_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct PsiArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config names.
    Run(Common),
    /// Check a config without simulating.
    Validate(Common),
    /// Simulate the linear equation.
    SolveLinear(Common),
    /// Simulate the quasilinear equation.
    SolveQl(Common),
    /// Check coercivity and analyticity of the complex operator family.
    SteinVerify(Common),
    /// Tabulate the regularized power functions and their inequalities.
    PsiTest(PsiArgs),
    /// Energy estimates across truncation radii.
    Bootstrap(Common),
    /// Moment estimates with jackknife errors.
    Moments(Common),
    /// Tail probabilities against the Markov bound.
    Tightness(Common),
    /// Cauchy-Riemann residuals of the expectation in the complex parameter.
    Analyticity(Common),
    /// Report coercivity margins of a pair or coefficient field.
    CheckCoercivity(Common),
}

fn fail(f: RunFailure) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::to_string_pretty(&f.to_json()).expect("json")
    );
    ExitCode::from(f.exit_code() as u8)
}

fn load(common: &Common) -> Result<RunConfig, RunFailure> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| RunFailure::Failed(Error::Config("--config is required".into())))?;
    load_path(path, common.seed_override)
}

fn load_path(path: &Path, seed: Option<u64>) -> Result<RunConfig, RunFailure> {
    let mut cfg = match RunConfig::from_path(path) {
        Ok(c) => c,
        Err(Error::Config(m)) if m.starts_with("cannot read") => {
            return Err(RunFailure::Failed(Error::Io(std::io::Error::other(m))))
        }
        Err(e) => return Err(RunFailure::Failed(e)),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cfg: RunConfig, common: &Common) -> ExitCode {
    match run(&cfg, &common.out, common.workers) {
        Ok(m) => {
            println!("{}", serde_json::to_string_pretty(&m).expect("json"));
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}

fn run_kind(kind: ExperimentKind, common: &Common) -> ExitCode {
    let cfg = match load(common) {
        Ok(c) => c,
        Err(f) => return fail(f),
    };
    if cfg.kind != kind {
        let msg = format!(
            "config is a {} experiment, not {}",
            cfg.kind.name(),
            kind.name()
        );
        return fail(RunFailure::Failed(Error::Config(msg)));
    }
    execute(cfg, common)
}

fn psi_test(args: &PsiArgs) -> ExitCode {
    let mut cfg = match &args.common.config {
        Some(p) => match load_path(p, args.common.seed_override) {
            Ok(c) => c,
            Err(f) => return fail(f),
        },
        None => match RunConfig::from_toml("kind = \"psi-test\"") {
            Ok(c) => c,
            Err(e) => return fail(RunFailure::Failed(e)),
        },
    };
    if cfg.kind != ExperimentKind::PsiTest {
        return fail(RunFailure::Failed(Error::Config(format!(
            "config is a {} experiment",
            cfg.kind.name()
        ))));
    }
    if let Some(q) = args.q {
        cfg.numerics.q = q;
    }
    if let Some(m) = &args.m_list {
        cfg.numerics.m_list = m.clone();
    }
    execute(cfg, &args.common)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(c) => match load(c) {
            Ok(cfg) => execute(cfg, c),
            Err(f) => fail(f),
        },
        Command::Validate(c) => {
            let cfg = match load(c) {
                Ok(cfg) => cfg,
                Err(f) => return fail(f),
            };
            let issues = validate(&cfg);
            println!("{}", serde_json::to_string_pretty(&issues).expect("json"));
            if issues.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::SolveLinear(c) => run_kind(ExperimentKind::SolveLinear, c),
        Command::SolveQl(c) => run_kind(ExperimentKind::SolveQl, c),
        Command::SteinVerify(c) => run_kind(ExperimentKind::SteinVerify, c),
        Command::PsiTest(a) => psi_test(a),
        Command::Bootstrap(c) => run_kind(ExperimentKind::Bootstrap, c),
        Command::Moments(c) => run_kind(ExperimentKind::Moments, c),
        Command::Tightness(c) => run_kind(ExperimentKind::Tightness, c),
        Command::Analyticity(c) => run_kind(ExperimentKind::Analyticity, c),
        Command::CheckCoercivity(c) => run_kind(ExperimentKind::CheckCoercivity, c),
    }
}
