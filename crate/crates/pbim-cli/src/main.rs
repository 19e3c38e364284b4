//! Command-line front end: test-problem generation, single solver runs,
//! experiment sweeps, bound tables, and the ζ table.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pbim::harness::{
    emit_bound_table, run_single, run_sweep, write_history_csv, ExperimentSpec, ProblemSpec,
};
use pbim::io::{write_matrix_market, write_vector};
use pbim::relaxation::{zeta_poly, ZetaTable, DEFAULT_ZETA_TOL};
use pbim::sparse::remove_zero_rows;
use pbim::tomo::{add_noise, build_projection_matrix, make_sinogram, shepp_logan};
use pbim::{ParallelGeometry64, Result};

#[derive(Parser)]
#[command(name = "pbim", about = "Projected block-iterative solvers for constrained noisy linear systems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a parallel-beam tomography test problem.
    Generate(GenerateArgs),
    /// Run one solver configuration and write its history CSV.
    Solve(SolveArgs),
    /// Run a sweep over a (blocks × rule × noise × seed) grid.
    Sweep(SweepArgs),
    /// Emit the per-k noise-error bound table for all four rules.
    Bounds(BoundsArgs),
    /// Print the ζ_k table.
    Zeta(ZetaArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Image side length in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Number of projection angles, uniform over [0°, 180°).
    #[arg(long, default_value_t = 24)]
    views: usize,
    /// Rays per view.
    #[arg(long, default_value_t = 95)]
    rays: usize,
    /// Relative noise level ‖δb‖/‖b‖ added to the sinogram.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Projection matrix output (MatrixMarket coordinate format).
    #[arg(long, value_name = "FILE")]
    out_matrix: PathBuf,
    /// Right-hand side output (one value per line).
    #[arg(long, value_name = "FILE")]
    out_rhs: PathBuf,
    /// Phantom image output, row-major (one value per line).
    #[arg(long, value_name = "FILE")]
    out_phantom: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix file (MatrixMarket); omit to use the built-in tomography problem.
    #[arg(long, value_name = "FILE", requires = "rhs")]
    matrix: Option<PathBuf>,
    /// Right-hand side file; required with --matrix.
    #[arg(long, value_name = "FILE")]
    rhs: Option<PathBuf>,
    /// Exact solution file (enables relative errors and theta-opt).
    #[arg(long, value_name = "FILE")]
    solution: Option<PathBuf>,
    /// Tomography image size (when no --matrix is given).
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Tomography views.
    #[arg(long, default_value_t = 24)]
    views: usize,
    /// Tomography rays per view.
    #[arg(long, default_value_t = 95)]
    rays: usize,
    /// Number of row blocks p.
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    /// Relaxation rule: psi1|psi2|psi3|gamma|theta-opt|constant.
    #[arg(long, default_value = "psi3")]
    rule: String,
    /// Number of cycles.
    #[arg(long, default_value_t = 100)]
    cycles: usize,
    /// Regularization: 0 or auto (α = σ̲²).
    #[arg(long, default_value = "0")]
    alpha: String,
    /// Relative noise level added to the exact right-hand side.
    #[arg(long, default_value_t = 0.0)]
    noise_level: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weighting scheme: landweber|cimmino|cav|drop|sart.
    #[arg(long, default_value = "cimmino")]
    weights: String,
    /// Exponent r ∈ (1,2] for the psi3 and gamma rules.
    #[arg(long, default_value_t = 1.5)]
    r: f64,
    /// Guessed noise level for gamma's β_{δb} estimate (defaults to --noise-level).
    #[arg(long)]
    guessed_noise: Option<f64>,
    /// Fixed θ for the constant rule.
    #[arg(long)]
    theta: Option<f64>,
    /// Projection relaxation μ ∈ (0,2).
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// History CSV output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Flat key = value config file; flags below override it.
    #[arg(value_name = "CONFIG")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set rules=psi1,gamma (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (defaults to $PBIM_OUTPUT_DIR or ./pbim-out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Largest k tabulated.
    #[arg(long, default_value_t = 100)]
    kmax: usize,
    /// Smallest nonzero weighted singular value σ̲.
    #[arg(long, default_value_t = 1.0)]
    sigma_min: f64,
    /// Weighted noise norm β_{δb}.
    #[arg(long, default_value_t = 0.1)]
    beta_db: f64,
    /// Exponent r ∈ (1,2].
    #[arg(long, default_value_t = 1.5)]
    r: f64,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ZetaArgs {
    /// Largest k tabulated.
    #[arg(long, default_value_t = 100)]
    kmax: usize,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let geom = ParallelGeometry64::new(args.size, args.views, args.rays, 1.0)?;
    let a = build_projection_matrix(&geom)?;
    let phantom = shepp_logan::<f64>(args.size)?;
    let b = make_sinogram(&a, &phantom)?;
    // rays that miss the grid give empty rows; drop them so the written
    // system is directly solvable
    let (a, b, _kept) = remove_zero_rows(&a, &b)?;
    let (b, _delta) = add_noise(&b, args.noise, args.seed);
    write_matrix_market(&a, &args.out_matrix)?;
    write_vector(&b, &args.out_rhs)?;
    write_vector(&phantom.image, &args.out_phantom)?;
    println!(
        "wrote {} ({} x {}, {} entries), {}, {}",
        args.out_matrix.display(),
        a.n_rows(),
        a.n_cols(),
        a.nnz(),
        args.out_rhs.display(),
        args.out_phantom.display(),
    );
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<()> {
    let mut spec = ExperimentSpec::<f64>::defaults();
    spec.problem = match &args.matrix {
        Some(m) => ProblemSpec::Files {
            matrix: m.clone(),
            rhs: args.rhs.clone().expect("clap enforces --rhs with --matrix"),
            solution: args.solution.clone(),
        },
        None => ProblemSpec::Tomo {
            size: args.size,
            views: args.views,
            rays: args.rays,
        },
    };
    spec.blocks = vec![args.blocks];
    spec.rules = vec![args.rule.parse()?];
    spec.noise_levels = vec![args.noise_level];
    spec.guessed_levels = vec![args.guessed_noise.unwrap_or(args.noise_level)];
    spec.cmax = args.cycles;
    spec.seeds = vec![args.seed];
    spec.weights = args.weights.parse()?;
    spec.r = args.r;
    spec.theta = args.theta;
    spec.set("alpha", &args.alpha)?;
    let (summary, history) = run_single(&spec, args.mu)?;
    write_history_csv(&args.out, &history)?;
    println!(
        "wrote {} ({} cycles, min relative error {}, best cycle {})",
        args.out.display(),
        history.len(),
        summary
            .min_relative_error
            .map(|e| format!("{e:.6e}"))
            .unwrap_or_else(|| "n/a".into()),
        summary
            .best_cycle
            .map(|c| c.to_string())
            .unwrap_or_else(|| "n/a".into()),
    );
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::<f64>::parse(&fs::read_to_string(path)?)?,
        None => ExperimentSpec::<f64>::defaults(),
    };
    for kv in &args.sets {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            pbim::Error::Parse(format!("--set expects key=value, got '{kv}'"))
        })?;
        spec.set(key.trim(), value.trim())?;
    }
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    spec.validate()?;
    let report = run_sweep(&spec)?;
    println!(
        "sweep complete: {} cells, {} failures, summary at {}",
        report.summaries.len(),
        report.failures.len(),
        report.summary_path.display(),
    );
    for (cell, err) in &report.failures {
        eprintln!("warning: cell {cell} failed: {err}");
    }
    Ok(())
}

fn bounds(args: &BoundsArgs) -> Result<()> {
    let table = emit_bound_table::<f64>(args.kmax, args.sigma_min, args.beta_db, args.r)?;
    match &args.out {
        Some(path) => {
            fs::write(path, table)?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn zeta(args: &ZetaArgs) -> Result<()> {
    if args.kmax < 2 {
        return Err(pbim::Error::InvalidParameter("zeta table needs kmax >= 2".into()));
    }
    let table = ZetaTable::<f64>::up_to(args.kmax, DEFAULT_ZETA_TOL);
    let mut out = String::from("k,zeta,residual\n");
    for k in 2..=args.kmax {
        let z = table.get(k);
        out.push_str(&format!("{k},{z:.17e},{:.6e}\n", zeta_poly(k, z)));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, out)?;
            println!("wrote {}", path.display());
        }
        None => print!("{out}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args),
        Command::Bounds(args) => bounds(args),
        Command::Zeta(args) => zeta(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
