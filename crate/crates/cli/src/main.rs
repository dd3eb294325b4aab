//! `ustat-cs`: confidence sequences over data streams, Monte Carlo
//! experiments, and boundary / spectrum tables.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid flags or
//! configuration, 3 malformed input row.

mod exit;
mod input;
mod monitor;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ustat_cs::boundaries::{gamma, BoundaryKind, BoundaryParams, DEFAULT_ETA, DEFAULT_S};
use ustat_cs::kernels::KernelId;
use ustat_cs::sequences::{CsRecord, Method, SequentialTest, DEFAULT_CLASSICAL_DRAWS};
use ustat_cs::simharness::output::write_result;
use ustat_cs::simharness::{run, ExperimentConfig, ExperimentKind};
use ustat_cs::spectral::{
    estimate_spectrum, EigenMethod, GeometricGrid, SpectrumConfig, WeightScheme, DEFAULT_GRID_RATIO,
    DEFAULT_TRUNC_EXPONENT,
};
use ustat_cs::UStatState;

use exit::usage;
use monitor::{Monitor, MonitorConfig};

#[derive(Parser)]
#[command(name = "ustat-cs", version, about = "Anytime-valid inference for degree-two U-statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream confidence sequence records for a data file or stdin.
    Cs(StreamArgs),
    /// Sequential test of `theta = theta0`; records on stdout, decision on stderr.
    Test {
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta0: f64,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config replication count.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Tabulate gamma(n) on a geometric grid: `n,kind,value`.
    Boundary {
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Both kinds when omitted.
        #[arg(long = "boundary")]
        boundary_kind: Option<BoundaryKind>,
        #[arg(long, default_value_t = 10_000)]
        n_max: u64,
        #[arg(long, default_value_t = DEFAULT_GRID_RATIO)]
        grid_ratio: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the estimated spectrum of a data set:
    /// `index,lambda_hat,beta,contribution_plus,contribution_minus`.
    Spectrum {
        #[arg(long)]
        kernel: KernelId,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        has_header: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        spectrum: SpectrumArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cold start: the first monitoring time.
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_S)]
    s: f64,
}

#[derive(Args)]
struct SpectrumArgs {
    /// `poly:<b>`, `exp:<c>` or `data`.
    #[arg(long, default_value = "data")]
    weights: WeightScheme,
    /// Truncation exponent `a` in `L = floor(N^a)`.
    #[arg(long, default_value_t = DEFAULT_TRUNC_EXPONENT)]
    trunc_a: f64,
    /// Gram subsample exponent `w` (`N = ceil(n^w)`); full Gram when omitted.
    #[arg(long)]
    subsample_w: Option<f64>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    kernel: KernelId,
    /// Data file; stdin when omitted or `-`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    has_header: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    boundary: BoundaryArgs,
    /// Boundary family for the default method.
    #[arg(long = "boundary", default_value = "gm")]
    boundary_kind: BoundaryKind,
    /// Comma-separated methods; defaults to AsympCS (nondegenerate kernels)
    /// or SAGE (mmd-gauss) with the `--boundary` family.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[command(flatten)]
    spectrum: SpectrumArgs,
    /// Spectrum refresh grid ratio.
    #[arg(long, default_value_t = DEFAULT_GRID_RATIO)]
    grid_ratio: f64,
    /// Monte Carlo draws for the Classical-Test critical value.
    #[arg(long, default_value_t = DEFAULT_CLASSICAL_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            // Single-line diagnostic; clap's usage block is dropped.
            let text = e.render().to_string();
            let msg: Vec<&str> = text
                .lines()
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
                .map(str::trim)
                .collect();
            eprintln!("{}", msg.join(" "));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e) as u8)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Cs(args) => cmd_stream(args, None),
        Command::Test { stream, theta0 } => {
            if !theta0.is_finite() {
                return Err(usage("theta0 must be finite"));
            }
            cmd_stream(stream, Some(theta0))
        }
        Command::Simulate { config, out, seed, reps } => cmd_simulate(config, out, seed, reps),
        Command::Boundary {
            boundary,
            boundary_kind,
            n_max,
            grid_ratio,
            out,
        } => cmd_boundary(boundary, boundary_kind, n_max, grid_ratio, out),
        Command::Spectrum {
            kernel,
            input,
            has_header,
            alpha,
            spectrum,
            out,
        } => cmd_spectrum(kernel, input, has_header, alpha, spectrum, out),
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn boundary_params(b: &BoundaryArgs, kind: BoundaryKind) -> anyhow::Result<BoundaryParams> {
    BoundaryParams::with_stitching(kind, b.alpha, b.m, b.eta, b.s).map_err(usage)
}

fn spectrum_config(s: &SpectrumArgs, alpha: f64) -> anyhow::Result<SpectrumConfig> {
    let cfg = SpectrumConfig {
        scheme: s.weights,
        alpha,
        trunc_exponent: s.trunc_a,
        subsample_exponent: s.subsample_w,
        method: EigenMethod::Auto,
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn heuristic_note(scheme: WeightScheme) {
    if scheme == WeightScheme::DataDriven {
        eprintln!("note: data-driven weights are an empirical plug-in heuristic");
    }
}

fn cmd_stream(args: StreamArgs, theta0: Option<f64>) -> anyhow::Result<()> {
    let params = boundary_params(&args.boundary, args.boundary_kind)?;
    let spectrum = spectrum_config(&args.spectrum, params.alpha)?;
    if !(args.grid_ratio > 1.0 && args.grid_ratio.is_finite()) {
        return Err(usage(format!("--grid-ratio must exceed 1, got {}", args.grid_ratio)));
    }
    let mut methods = args.method.clone();
    if methods.is_empty() {
        methods.push(if args.kernel.is_degenerate() {
            Method::sage(args.boundary_kind)
        } else {
            Method::asymp_cs(args.boundary_kind)
        });
    }
    if methods.contains(&Method::ClassicalTest) && args.draws < ustat_cs::sequences::MIN_CLASSICAL_DRAWS {
        return Err(usage(format!(
            "--draws must be >= {}, got {}",
            ustat_cs::sequences::MIN_CLASSICAL_DRAWS,
            args.draws
        )));
    }
    if methods.iter().any(|m| matches!(m, Method::SageLil | Method::SageGm)) {
        heuristic_note(spectrum.scheme);
    }
    let mut monitor = Monitor::new(MonitorConfig {
        kernel: args.kernel,
        methods: methods.clone(),
        params,
        spectrum,
        grid_ratio: args.grid_ratio,
        draws: args.draws,
        seed: args.seed,
    })
    .map_err(usage)?;
    let mut tests: Vec<SequentialTest> = theta0.map(|t| vec![SequentialTest::new(t); methods.len()]).unwrap_or_default();

    let (reader, live) = input::open(args.input.as_deref())?;
    let mut out = output(args.out.as_ref())?;
    writeln!(out, "{}", CsRecord::CSV_HEADER)?;
    if live {
        out.flush()?;
    }
    for item in input::points(reader, args.kernel, args.has_header) {
        let (row, point) = item?;
        let records = monitor.push(point).with_context(|| format!("at row {row}"))?;
        for rec in &records {
            writeln!(out, "{}", rec.to_csv_row())?;
            if let Some(t) = tests.iter_mut().zip(&methods).find(|(_, m)| **m == rec.method) {
                t.0.observe(rec);
            }
            if live {
                out.flush()?;
            }
        }
    }
    out.flush()?;
    if let Some(theta0) = theta0 {
        for (t, m) in tests.iter().zip(&methods) {
            let d = t.decision();
            let first = d.first_rejection_n.map(|n| n.to_string()).unwrap_or_else(|| "none".into());
            eprintln!(
                "decision: method={m} theta0={theta0} n={} reject={} first_rejection_n={first}",
                d.n, d.reject
            );
        }
    }
    Ok(())
}

fn cmd_simulate(path: PathBuf, out: PathBuf, seed: Option<u64>, reps: Option<usize>) -> anyhow::Result<()> {
    let text = fs::read_to_string(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(usage)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(r) = reps {
        config.reps = r;
    }
    config.validate().map_err(usage)?;
    if matches!(config.experiment, ExperimentKind::Power | ExperimentKind::Weights) {
        heuristic_note(config.weight_scheme);
    }
    let result = run(&config)?;
    let files = write_result(&result, &out).with_context(|| format!("writing results to {}", out.display()))?;
    eprintln!("{} [{} files in {}]", result.summary(), files.len(), out.display());
    Ok(())
}

fn cmd_boundary(
    b: BoundaryArgs,
    kind: Option<BoundaryKind>,
    n_max: u64,
    grid_ratio: f64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let kinds = match kind {
        Some(k) => vec![k],
        None => vec![BoundaryKind::Lil, BoundaryKind::Gm],
    };
    let params = kinds
        .iter()
        .map(|&k| boundary_params(&b, k))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if n_max < b.m {
        return Err(usage(format!("--n-max = {n_max} is below --m = {}", b.m)));
    }
    let mut grid = GeometricGrid::points_until(b.m, grid_ratio, n_max).map_err(usage)?;
    if grid.last() != Some(&n_max) {
        grid.push(n_max);
    }
    let mut w = output(out.as_ref())?;
    writeln!(w, "n,kind,value")?;
    for &n in &grid {
        for p in &params {
            writeln!(w, "{n},{},{}", p.kind, gamma(n, p)?)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_spectrum(
    kernel: KernelId,
    input: Option<PathBuf>,
    has_header: bool,
    alpha: f64,
    spectrum: SpectrumArgs,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let cfg = spectrum_config(&spectrum, alpha)?;
    let (reader, _) = input::open(input.as_deref())?;
    let mut state = UStatState::new(kernel);
    for item in input::points(reader, kernel, has_header) {
        let (row, point) = item?;
        state.push(point).with_context(|| format!("at row {row}"))?;
    }
    if state.n() < 2 {
        return Err(usage(format!("spectrum needs at least 2 rows, got {}", state.n())));
    }
    heuristic_note(cfg.scheme);
    let est = estimate_spectrum(&state, &cfg)?;
    let mut w = output(out.as_ref())?;
    writeln!(w, "index,lambda_hat,beta,contribution_plus,contribution_minus")?;
    for (i, &l) in est.eigenvalues.iter().enumerate() {
        let beta = if l < 0.0 { est.weights_minus[i] } else { est.weights[i] };
        let contrib = |side: bool| -> anyhow::Result<f64> {
            if side && beta > 0.0 {
                Ok(l * ustat_cs::boundaries::g_inv(alpha * beta)?.powi(2))
            } else {
                Ok(0.0)
            }
        };
        writeln!(w, "{},{l},{beta},{},{}", i + 1, contrib(l > 0.0)?, contrib(l < 0.0)?)?;
    }
    w.flush()?;
    eprintln!(
        "n={} n_used={} truncation={} scheme={}{} lambda_total={}",
        est.n,
        est.n_used,
        est.truncation(),
        est.scheme,
        if est.fallback_weights { " (fallback poly:2)" } else { "" },
        est.lambda_total
    );
    for (name, side) in [("plus", &est.plus), ("minus", &est.minus)] {
        eprintln!(
            "{name}: total={} log_weighted={} g_weighted={}",
            side.total, side.log_weighted, side.g_weighted
        );
    }
    Ok(())
}
