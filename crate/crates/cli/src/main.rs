//! `bergman`: symbolic verification, model sweeps, fits and reports.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! usage, configuration or input errors.

mod config;
mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bergman_core::expansion::{verify_j2, J2Verification};
use bergman_core::fit::{analyze, AnalysisOptions, FitReport};
use bergman_core::manifolds::{ManifoldKind, ModelManifold};
use bergman_core::sweep::{read_csv, run_sweep, sample_pairs, write_csv, SweepConfig, SweepOutput};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "bergman", version, about = "Bergman kernel expansion checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute J2 symbolically and compare it with the reference formula.
    VerifyJ2 {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        dim: u8,
        /// Directory for the golden renderings and the JSON record.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Sample rescaled kernels over a p-sweep and write them as CSV.
    ModelRun {
        #[command(flatten)]
        run: RunArgs,
        /// Output CSV (default: `output` from the config, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a sweep CSV and write the check report as JSON.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Config file; its `[precision]` table and `base_point` are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output JSON (default: stdout).
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        precision: PrecisionArgs,
    },
    /// Run the symbolic checks and both model pipelines; write one JSON report.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        precision: PrecisionArgs,
        /// Output JSON (default: stdout).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `cp1` or `flat-torus`.
    #[arg(long)]
    manifold: Option<ManifoldKind>,
    /// Comma-separated tensor powers.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<u32>>,
    /// Number of sample pairs.
    #[arg(long)]
    count: Option<usize>,
    /// Radius of the disc the pairs are drawn from.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Base point as `re,im`.
    #[arg(long, value_parser = parse_point)]
    base_point: Option<[f64; 2]>,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [re, im] = parts[..] else {
        return Err(format!("expected `re,im`, got `{s}`"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok([num(re)?, num(im)?])
}

#[derive(Args)]
struct PrecisionArgs {
    #[arg(long)]
    max_r: Option<usize>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    quadrature_nodes: Option<usize>,
}

impl PrecisionArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(r) = self.max_r {
            c.precision.max_r = Some(r);
        }
        if let Some(h) = self.fd_step {
            c.precision.fd_step = h;
        }
        if let Some(n) = self.quadrature_nodes {
            c.precision.quadrature_nodes = n;
        }
    }
}

/// Why a command did not succeed.
enum Failure {
    Checks,
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::VerifyJ2 { dim, emit } => cmd_verify_j2(dim as usize, emit.as_deref()),
        Command::ModelRun { run, out } => cmd_model_run(&run, out),
        Command::Fit {
            input,
            config,
            output,
            precision,
        } => cmd_fit(&input, config.as_deref(), output.as_deref(), &precision),
        Command::Report {
            config,
            seed,
            precision,
            output,
        } => cmd_report(config.as_deref(), seed, &precision, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct J2Record<'a> {
    dim: usize,
    equal: bool,
    num_terms: usize,
    mismatches: &'a [String],
    checks: &'a [bergman_core::expansion::NamedCheck],
    passed: bool,
}

impl<'a> From<&'a J2Verification> for J2Record<'a> {
    fn from(v: &'a J2Verification) -> Self {
        Self {
            dim: v.dim,
            equal: v.equal,
            num_terms: v.num_terms,
            mismatches: &v.mismatches,
            checks: &v.checks,
            passed: v.passed(),
        }
    }
}

fn cmd_verify_j2(dim: usize, emit: Option<&Path>) -> Outcome {
    let v = verify_j2(dim).context("symbolic computation")?;
    if let Some(dir) = emit {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let write = |name: String, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        };
        write(
            format!("j2_dim{dim}_computed.txt"),
            v.computed.render_golden(),
        )?;
        write(
            format!("j2_dim{dim}_reference.txt"),
            v.reference.render_golden(),
        )?;
        write_json(
            &J2Record::from(&v),
            Some(&dir.join(format!("j2_dim{dim}.json"))),
        )?;
    }
    println!(
        "verify-j2 dim {dim}: {} ({} terms)",
        if v.passed() { "pass" } else { "FAIL" },
        v.num_terms
    );
    for c in &v.checks {
        println!(
            "  {:<32} {}  {}",
            c.id,
            if c.passed { "pass" } else { "FAIL" },
            c.detail
        );
    }
    for m in &v.mismatches {
        println!("  mismatch {m}");
    }
    if v.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn resolve_run_config(run: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut c = RunConfig::load(run.config.as_deref())?;
    if let Some(m) = run.manifold {
        c.manifold = m;
    }
    if let Some(p) = &run.p {
        c.p_values = Some(p.clone());
    }
    if let Some(n) = run.count {
        c.samples.count = n;
    }
    if let Some(s) = run.sigma {
        c.samples.sigma = s;
    }
    if let Some(s) = run.seed {
        c.seed = s;
    }
    if let Some(b) = run.base_point {
        c.base_point = Some(b);
    }
    c.validate()?;
    Ok(c)
}

fn sweep_for(c: &RunConfig, kind: ManifoldKind) -> SweepOutput {
    let manifold = ModelManifold::new(kind);
    let base_point = c.base_point.map_or_else(
        || manifold.default_base_point(),
        |[re, im]| Complex64::new(re, im),
    );
    run_sweep(&SweepConfig {
        manifold,
        base_point,
        p_values: c.p_values_for(kind),
        pairs: sample_pairs(c.samples.count, c.samples.sigma, c.seed),
    })
}

fn report_failures(out: &SweepOutput) {
    for f in &out.failures {
        eprintln!(
            "chart violation at p = {}, point {}: {}",
            f.p, f.point, f.message
        );
    }
}

fn cmd_model_run(run: &RunArgs, out: Option<PathBuf>) -> Outcome {
    let c = resolve_run_config(run)?;
    let sweep = sweep_for(&c, c.manifold);
    report_failures(&sweep);
    match out.or_else(|| c.output.clone()) {
        Some(path) => {
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&sweep.rows, BufWriter::new(f)).context("writing CSV")?;
            eprintln!(
                "{} rows, {} chart failures -> {}",
                sweep.rows.len(),
                sweep.failures.len(),
                path.display()
            );
        }
        None => write_csv(&sweep.rows, std::io::stdout().lock()).context("writing CSV")?,
    }
    if sweep.rows.is_empty() {
        eprintln!("no sample survived the chart checks");
        return Err(Failure::Checks);
    }
    Ok(())
}

fn analysis_options(c: &RunConfig) -> AnalysisOptions {
    AnalysisOptions {
        max_r: c.precision.max_r,
        fd_step: c.precision.fd_step,
        base_point: c.base_point.map(|[re, im]| Complex64::new(re, im)),
        ..AnalysisOptions::default()
    }
}

fn print_fit_summary(report: &FitReport) {
    eprintln!("{} fit (max_r = {}):", report.model, report.max_r);
    for c in &report.checks {
        eprintln!(
            "  {:<34} {}  measured {:.3e}, tolerance {:.1e}",
            c.id,
            if c.passed { "pass" } else { "FAIL" },
            c.measured,
            c.tolerance
        );
    }
}

fn cmd_fit(
    input: &Path,
    config: Option<&Path>,
    output: Option<&Path>,
    precision: &PrecisionArgs,
) -> Outcome {
    let mut c = RunConfig::load(config)?;
    precision.apply(&mut c);
    c.validate()?;
    let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let rows =
        read_csv(BufReader::new(f)).with_context(|| format!("reading {}", input.display()))?;
    let report = analyze(&rows, &analysis_options(&c)).context("fitting")?;
    write_json(&report, output)?;
    print_fit_summary(&report);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn cmd_report(
    config: Option<&Path>,
    seed: Option<u64>,
    precision: &PrecisionArgs,
    output: Option<&Path>,
) -> Outcome {
    let mut c = RunConfig::load(config)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    precision.apply(&mut c);
    // each manifold uses its own default sweep and base point
    c.p_values = None;
    c.base_point = None;
    c.validate()?;
    let report = report::build(&c)?;
    write_json(&report, output)?;
    for check in &report.checks {
        eprintln!(
            "{:<40} {}  measured {:.3e}, tolerance {:.1e}",
            check.id,
            if check.passed { "pass" } else { "FAIL" },
            check.measured,
            check.tolerance
        );
    }
    eprintln!(
        "{}",
        if report.passed {
            "all checks passed"
        } else {
            "some checks FAILED"
        }
    );
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
