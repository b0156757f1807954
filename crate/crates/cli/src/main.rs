use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use eqvidx_core::cache::write_curve_csv;
use eqvidx_core::config::Config;
use eqvidx_core::error::Error;
use eqvidx_core::jacobi::{Bc, FnCoefficients, ReducedOperator};
use eqvidx_core::partition::{mr_bounds, PartitionReport};
use eqvidx_core::profile::ProfileCurve;
use eqvidx_core::report::{self, curve_summary, fbms_curve, hsiang_curve, IndexReport};
use eqvidx_core::spectral::GapMode;
use eqvidx_core::verify::{quick_config, verify_suite, Summary};

const EXIT_VERIFY: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 4;

/// Equivariant Jacobi spectra of Hsiang's hyperspheres and Alencar's
/// free-boundary tori.
#[derive(Parser, Debug)]
#[command(name = "eqvidx", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Base mesh size (elements before refinement).
    #[arg(long, value_name = "N", global = true)]
    mesh: Option<usize>,
    /// Write the result as JSON.
    #[arg(long, value_name = "PATH", global = true)]
    json: Option<PathBuf>,
    /// Write the profile curve as CSV.
    #[arg(long, value_name = "PATH", global = true)]
    csv: Option<PathBuf>,
    /// Do not read or write the curve cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hsiang's hyperspheres H_m in S^4.
    Hsiang {
        #[command(subcommand)]
        action: Action,
        #[arg(long, global = true)]
        m: Option<u32>,
    },
    /// Free-boundary tori A_l in B^4.
    Fbms {
        #[command(subcommand)]
        action: Action,
        #[arg(long, global = true)]
        ell: Option<usize>,
    },
    /// Partition machinery.
    Partition {
        #[command(subcommand)]
        action: PartitionAction,
    },
    /// Run the acceptance criteria.
    Verify {
        /// Smoke run: m <= 2, l <= 1, 20 random partitions.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Action {
    /// Solve the profile curve and print its summary.
    Solve,
    /// Full index report.
    Index,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum PartitionAction {
    /// [0, pi], V = 1, q = 2, Dirichlet ends, one cut at pi/2, threshold 0.
    Demo,
}

fn config(common: &Common) -> Result<Config> {
    let mut cfg = Config::with_env_cache();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    if let Some(tol) = common.tol {
        cfg.set("tol", &tol.to_string())?;
    }
    if let Some(n) = common.mesh {
        cfg.set("mesh", &n.to_string())?;
    }
    if common.no_cache {
        cfg.cache_dir = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv(path: &Path, curve: &ProfileCurve) -> Result<()> {
    let mut buf = Vec::new();
    write_curve_csv(curve, &mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Precondition(format!("{flag} is required")).into())
}

fn print_report(out: &mut impl Write, r: &IndexReport) -> io::Result<()> {
    let name = match r.family {
        report::Family::Hsiang => "H",
        report::Family::Fbms => "A",
    };
    writeln!(out, "{name}_{}  ({:.1} s)", r.parameter, r.timing.seconds)?;
    let lowest: Vec<String> = r.eigenvalues.iter().take(8).map(|l| format!("{l:.9}")).collect();
    writeln!(out, "  eigenvalues  {}", lowest.join(" "))?;
    for (k, v) in &r.counts {
        writeln!(out, "  count   {k:<36} {v}")?;
    }
    for (k, v) in &r.bounds {
        writeln!(out, "  bound   {k:<36} {v}")?;
    }
    for (k, v) in &r.residuals {
        writeln!(out, "  value   {k:<36} {v:.3e}")?;
    }
    for f in &r.flags {
        writeln!(out, "  flag    {f}")?;
    }
    for (k, v) in &r.verdicts {
        writeln!(out, "  {}    {k}", if *v { "ok  " } else { "FAIL" })?;
    }
    Ok(())
}

fn print_partition(out: &mut impl Write, r: &PartitionReport) -> io::Result<()> {
    writeln!(out, "cuts {:?}, threshold {}", r.cuts, r.threshold)?;
    for p in &r.pieces {
        writeln!(
            out,
            "  [{:.6}, {:.6}]  dirichlet {}/{}  neumann {}/{}",
            p.interval.0, p.interval.1, p.dirichlet.strict, p.dirichlet.nonstrict, p.neumann.strict, p.neumann.nonstrict
        )?;
    }
    writeln!(
        out,
        "mr_lower {} <= full {}/{} <= mr_upper {}  ({})",
        r.mr_lower,
        r.full.strict,
        r.full.nonstrict,
        r.mr_upper,
        if r.sandwich_holds() { "holds" } else { "VIOLATED" }
    )
}

fn print_summary(out: &mut impl Write, s: &Summary) -> io::Result<()> {
    for c in &s.criteria {
        writeln!(out, "{c}")?;
    }
    for (job, e) in &s.errors {
        writeln!(out, "error {job}: {e}")?;
    }
    Ok(())
}

fn solve_output(common: &Common, curve: &ProfileCurve, launches: Vec<f64>) -> Result<()> {
    let summary = curve_summary(curve, launches)?;
    let mut out = io::stdout().lock();
    writeln!(out, "length      {:.12}", summary.length)?;
    writeln!(out, "launches    {:?}", summary.launches)?;
    writeln!(out, "end defects {:.2e} {:.2e}", summary.end_defects[0], summary.end_defects[1])?;
    writeln!(out, "crossings   {:?}", summary.crossings)?;
    writeln!(out, "minimality  {:.2e}", summary.minimality_residual)?;
    if let Some(p) = &common.csv {
        write_csv(p, curve)?;
    }
    if let Some(p) = &common.json {
        write_file(p, &report::to_json(&summary)?)?;
    }
    Ok(())
}

fn index_output(common: &Common, r: &IndexReport, curve: Option<&ProfileCurve>) -> Result<u8> {
    print_report(&mut io::stdout().lock(), r)?;
    if let Some(p) = &common.json {
        write_file(p, &r.to_json()?)?;
    }
    if let (Some(p), Some(c)) = (&common.csv, curve) {
        write_csv(p, c)?;
    }
    Ok(if r.passed() { 0 } else { EXIT_VERIFY })
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = config(&cli.common)?;
    let common = &cli.common;
    match &cli.command {
        Command::Hsiang { action, m } => {
            let m = require(*m, "--m")?;
            if m == 0 || m > cfg.max_m {
                return Err(Error::Precondition(format!("--m must lie in 1..={}", cfg.max_m)).into());
            }
            match action {
                Action::Solve => {
                    let h = hsiang_curve(m, &cfg)?;
                    solve_output(common, &h.curve, h.launches)?;
                    Ok(0)
                }
                Action::Index => {
                    let r = report::hsiang_report(m, &cfg)?;
                    let curve = match common.csv {
                        Some(_) => Some(hsiang_curve(m, &cfg)?.curve),
                        None => None,
                    };
                    index_output(common, &r, curve.as_ref())
                }
            }
        }
        Command::Fbms { action, ell } => {
            let ell = require(*ell, "--ell")?;
            match action {
                Action::Solve => {
                    let (_, curve) = fbms_curve(ell, &cfg)?;
                    let launch = curve.launch;
                    solve_output(common, &curve, vec![launch])?;
                    Ok(0)
                }
                Action::Index => {
                    let r = report::fbms_report(ell, &cfg)?;
                    let curve = match common.csv {
                        Some(_) => Some(fbms_curve(ell, &cfg)?.1),
                        None => None,
                    };
                    index_output(common, &r, curve.as_ref())
                }
            }
        }
        Command::Partition {
            action: PartitionAction::Demo,
        } => {
            let coeffs = std::sync::Arc::new(FnCoefficients {
                weight: |_t: f64| 1.0,
                potential: |_t: f64| 2.0,
            });
            let pi = std::f64::consts::PI;
            let op = ReducedOperator::new(coeffs, (0.0, pi), [Bc::Dirichlet; 2], 64, "demo")?;
            let r = mr_bounds(&op, &[pi / 2.0], 0.0, GapMode::Generic, &cfg.spectral)?;
            print_partition(&mut io::stdout().lock(), &r)?;
            if let Some(p) = &common.json {
                write_file(p, &report::to_json(&r)?)?;
            }
            Ok(if r.sandwich_holds() { 0 } else { EXIT_VERIFY })
        }
        Command::Verify { quick } => {
            let cfg = if *quick { quick_config(&cfg) } else { cfg };
            let s = verify_suite(&cfg);
            print_summary(&mut io::stdout().lock(), &s)?;
            if let Some(p) = &common.json {
                write_file(p, &report::to_json(&s)?)?;
            }
            Ok(match (s.passed(), s.budget_only()) {
                (true, _) => 0,
                (false, true) => EXIT_BUDGET,
                (false, false) => EXIT_VERIFY,
            })
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_numerical_budget() => EXIT_BUDGET,
        Some(err) => match err.root() {
            Error::Precondition(_) | Error::Config(_) | Error::InvalidBoundary(_) => EXIT_USAGE,
            _ => EXIT_VERIFY,
        },
        None => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
