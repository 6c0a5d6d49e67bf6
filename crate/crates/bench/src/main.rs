use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use multipoint_bench::complexity::{complexity_tables, complexity_tables_at, crossovers, derived_tables, mismatches};
use multipoint_bench::config::{BenchConfig, ReferenceRule};
use multipoint_bench::records::ExperimentRecord;
use multipoint_bench::slope::windowed_slope;
use multipoint_bench::{records, run_convergence, run_heatmap, verify, write_csv, ConvergenceKind};

/// Multipoint perturbation theory experiments on the 1D periodic
/// Schrödinger model.
#[derive(Debug, Parser)]
#[command(name = "multipoint", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Discretization parameter (planewaves with |m| <= M/2).
    #[arg(long = "M", global = true)]
    m: Option<usize>,

    /// 1-based eigenvalue level.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Shift of the energy norm.
    #[arg(long, global = true)]
    mu: Option<f64>,

    /// Exponent of the energy norm, in [0, 1].
    #[arg(long, global = true)]
    kappa: Option<f64>,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the random instances of `verify`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Reference-point rule for standard perturbation theory.
    #[arg(long, global = true, value_enum)]
    rule: Option<RuleArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Fair,
    ByNorm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Affine,
    Alpha,
    G,
    Mconv,
}

impl From<KindArg> for ConvergenceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Affine => ConvergenceKind::AffineEpsilon,
            KindArg::Alpha => ConvergenceKind::AlphaLimit,
            KindArg::G => ConvergenceKind::GLimit,
            KindArg::Mconv => ConvergenceKind::MConvergence,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the identity and oracle checks; exits nonzero on failure.
    Verify,
    /// Convergence study as CSV, with fitted slopes on standard error.
    Converge {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Coefficients of the affine study, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Option<Vec<f64>>,
    },
    /// Errors over the (alpha_1, alpha_2) grid as CSV.
    Heatmap {
        /// Also evaluate the fit, multipoint, then standard chain.
        #[arg(long)]
        chained: bool,
    },
    /// Symbolic cost tables.
    Complexity {
        #[arg(long, default_value_t = 2)]
        n: u64,
    },
}

fn load_config(common: &Common) -> Result<BenchConfig> {
    let mut cfg = match &common.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    if let Some(m) = common.m {
        cfg.run.m = m;
    }
    if let Some(k) = common.k {
        cfg.run.k = k;
    }
    if let Some(mu) = common.mu {
        cfg.run.mu = mu;
    }
    if let Some(kappa) = common.kappa {
        cfg.run.kappa = kappa;
    }
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(rule) = common.rule {
        cfg.run.rule = match rule {
            RuleArg::Fair => ReferenceRule::Fair,
            RuleArg::ByNorm => ReferenceRule::ByNorm,
        };
    }
    Ok(cfg)
}

fn emit(records: &[ExperimentRecord], out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(records, BufWriter::new(file))?;
        }
        None => write_csv(records, io::stdout().lock())?,
    }
    Ok(())
}

fn report_slopes(records: &[ExperimentRecord], cfg: &BenchConfig) {
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut err = io::stderr().lock();
    for m in methods {
        let pts = records::series(records, m);
        match windowed_slope(&pts, cfg.fit.noise_floor, cfg.fit.preasymptotic_cutoff) {
            Ok(s) => writeln!(err, "slope {m}: {s:.3}"),
            Err(e) => writeln!(err, "slope {m}: {e}"),
        }
        .ok();
    }
}

fn complexity(n: u64) -> Result<()> {
    let symbolic = complexity_tables();
    let at_n = complexity_tables_at(n);
    let derived = derived_tables()?;
    let mut out = io::stdout().lock();
    writeln!(out, "standard perturbation theory (offline, online)")?;
    for (l, (c, e)) in symbolic.standard.iter().zip(&at_n.standard).enumerate() {
        writeln!(
            out,
            "  order {l}: {c}   derived {}   at n = {n}: {e}",
            derived.standard[l]
        )?;
    }
    writeln!(out, "multipoint perturbation theory, s = 1, g = 0 (offline, online)")?;
    for (l, (c, e)) in symbolic.multipoint.iter().zip(&at_n.multipoint).enumerate() {
        writeln!(out, "  D{l}: {c}   derived {}   at n = {n}: {e}", derived.multipoint[l])?;
    }
    for m in mismatches()? {
        writeln!(
            out,
            "note: {} order {} table cell {} differs from the derived cost {}",
            m.table, m.order, m.reference, m.derived
        )?;
    }
    for c in crossovers()? {
        writeln!(
            out,
            "crossover {}: multipoint cheaper online iff {} >= 0 (at n = {n}: {} >= 0)",
            c.label,
            c.margin(),
            c.margin().substitute_n(n)
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Verify => {
            let outcomes = verify::run_all(&cfg)?;
            let mut ok = true;
            for o in &outcomes {
                println!("{o}");
                ok &= o.passed();
            }
            Ok(ok)
        }
        Command::Converge { kind, alpha } => {
            if let Some(a) = alpha {
                cfg.affine.alpha = a;
            }
            let records = run_convergence(kind.into(), &cfg)?;
            emit(&records, &cli.common.out)?;
            if !matches!(kind, KindArg::Mconv) {
                report_slopes(&records, &cfg);
            }
            Ok(true)
        }
        Command::Heatmap { chained } => {
            cfg.heatmap.chained |= chained;
            let records = run_heatmap(&cfg)?;
            emit(&records, &cli.common.out)?;
            Ok(true)
        }
        Command::Complexity { n } => {
            anyhow::ensure!(n >= 1, "n must be at least 1");
            complexity(n)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
