//! Experiment orchestration: problem generation, sweep execution over
//! (blocks × rule × noise × seed) grids, and CSV report emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::convex::ConvexSet;
use crate::io;
use crate::relaxation::{
    beta_weighted_norm, estimate_noise_vector, rule_bound, RelaxationSchedule, Rule, RuleKind,
    ZetaTable, DEFAULT_ZETA_TOL,
};
use crate::solver::{
    paired_run, theta_opt_search, BlockSystem, CycleRecord, SolverConfig,
};
use crate::sparse::{remove_zero_rows, SparseMatrix};
use crate::tomo::{add_noise, build_projection_matrix, make_sinogram, shepp_logan, ParallelGeometry};
use crate::weights::WeightKind;
use crate::{tf, Error, Result, Scalar};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PBIM_OUTPUT_DIR";

/// Where a sweep's test problem comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemSpec {
    Tomo {
        size: usize,
        views: usize,
        rays: usize,
    },
    Files {
        matrix: PathBuf,
        rhs: PathBuf,
        solution: Option<PathBuf>,
    },
    Random {
        m: usize,
        n: usize,
        seed: u64,
    },
}

/// The full grid a sweep covers.
#[derive(Debug, Clone)]
pub struct ExperimentSpec<T> {
    pub problem: ProblemSpec,
    pub blocks: Vec<usize>,
    pub rules: Vec<RuleKind>,
    pub noise_levels: Vec<T>,
    pub guessed_levels: Vec<T>,
    pub cmax: usize,
    pub seeds: Vec<u64>,
    pub weights: WeightKind,
    /// Exponent for the Ψ₃ and Γ rules.
    pub r: T,
    /// Fixed θ for the constant rule.
    pub theta: Option<T>,
    /// α = σ̲² when set, else 0.
    pub alpha_auto: bool,
    pub output_dir: PathBuf,
}

/// The default output directory: `$PBIM_OUTPUT_DIR` or `./pbim-out`.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("pbim-out"))
}

impl<T: Scalar> ExperimentSpec<T> {
    pub fn defaults() -> Self {
        Self {
            problem: ProblemSpec::Random {
                m: 60,
                n: 40,
                seed: 1,
            },
            blocks: vec![4],
            rules: vec![RuleKind::Psi3],
            noise_levels: vec![tf(0.02)],
            guessed_levels: vec![tf(0.02)],
            cmax: 100,
            seeds: vec![1],
            weights: WeightKind::Cimmino,
            r: tf(1.5),
            theta: None,
            alpha_auto: false,
            output_dir: default_output_dir(),
        }
    }

    /// Parses a flat `key = value` config (one pair per line; `#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::defaults();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key = value", lineno + 1))
            })?;
            spec.set(key.trim(), value.trim())?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Applies one key/value pair; used both by the parser and for CLI
    /// flag overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Parse(format!("bad {what} value '{value}'"));
        match key {
            "problem" => {
                self.problem = match value {
                    "tomo" => ProblemSpec::Tomo {
                        size: 64,
                        views: 24,
                        rays: 95,
                    },
                    "random" => ProblemSpec::Random {
                        m: 60,
                        n: 40,
                        seed: 1,
                    },
                    "files" => ProblemSpec::Files {
                        matrix: PathBuf::new(),
                        rhs: PathBuf::new(),
                        solution: None,
                    },
                    _ => return Err(bad("problem")),
                }
            }
            "size" | "views" | "rays" => {
                let v: usize = value.parse().map_err(|_| bad(key))?;
                if let ProblemSpec::Tomo { size, views, rays } = &mut self.problem {
                    match key {
                        "size" => *size = v,
                        "views" => *views = v,
                        _ => *rays = v,
                    }
                } else {
                    return Err(Error::Parse(format!("'{key}' only applies to tomo problems")));
                }
            }
            "m" | "n" | "problem_seed" => {
                if let ProblemSpec::Random { m, n, seed } = &mut self.problem {
                    match key {
                        "m" => *m = value.parse().map_err(|_| bad(key))?,
                        "n" => *n = value.parse().map_err(|_| bad(key))?,
                        _ => *seed = value.parse().map_err(|_| bad(key))?,
                    }
                } else {
                    return Err(Error::Parse(format!(
                        "'{key}' only applies to random problems"
                    )));
                }
            }
            "matrix" | "rhs" | "solution" => {
                if let ProblemSpec::Files {
                    matrix,
                    rhs,
                    solution,
                } = &mut self.problem
                {
                    match key {
                        "matrix" => *matrix = PathBuf::from(value),
                        "rhs" => *rhs = PathBuf::from(value),
                        _ => *solution = Some(PathBuf::from(value)),
                    }
                } else {
                    return Err(Error::Parse(format!("'{key}' only applies to file problems")));
                }
            }
            "blocks" => self.blocks = parse_list(value)?,
            "rules" => {
                self.rules = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            "noise" => self.noise_levels = parse_real_list(value)?,
            "guessed" => self.guessed_levels = parse_real_list(value)?,
            "cmax" => self.cmax = value.parse().map_err(|_| bad(key))?,
            "seeds" => self.seeds = parse_list(value)?,
            "weights" => self.weights = value.parse()?,
            "r" => self.r = tf(value.parse::<f64>().map_err(|_| bad(key))?),
            "theta" => self.theta = Some(tf(value.parse::<f64>().map_err(|_| bad(key))?)),
            "alpha" => {
                self.alpha_auto = match value {
                    "auto" => true,
                    "0" => false,
                    _ => return Err(bad(key)),
                }
            }
            "out" => self.output_dir = PathBuf::from(value),
            other => return Err(Error::Parse(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.rules.is_empty() || self.noise_levels.is_empty() {
            return Err(Error::InvalidParameter(
                "blocks, rules and noise lists must be nonempty".into(),
            ));
        }
        if self.cmax == 0 {
            return Err(Error::InvalidParameter("cmax must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seed list must be nonempty".into()));
        }
        if self.rules.contains(&RuleKind::Constant) && self.theta.is_none() {
            return Err(Error::InvalidParameter(
                "constant rule requires a theta value".into(),
            ));
        }
        Ok(())
    }
}

fn parse_list<F: std::str::FromStr>(value: &str) -> Result<Vec<F>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad list entry '{s}'")))
        })
        .collect()
}

fn parse_real_list<T: Scalar>(value: &str) -> Result<Vec<T>> {
    Ok(parse_list::<f64>(value)?.into_iter().map(tf).collect())
}

/// A fully assembled test problem: matrix, exact right-hand side, and the
/// exact solution when known.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub matrix: Arc<SparseMatrix<T>>,
    pub b_bar: Vec<T>,
    pub x_star: Option<Vec<T>>,
}

/// A dense random system with `x* ∈ [0,1]^n` and consistent `b̄ = Ax*`.
pub fn random_system<T: Scalar>(m: usize, n: usize, seed: u64) -> Result<Problem<T>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("random system must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(m * n);
    for r in 0..m {
        for c in 0..n {
            triplets.push((r, c, tf::<T>(rng.gen_range(-1.0..1.0))));
        }
    }
    let matrix = SparseMatrix::from_triplets(&triplets, m, n)?;
    let x_star: Vec<T> = (0..n).map(|_| tf::<T>(rng.gen_range(0.0..1.0))).collect();
    let b_bar = matrix.matvec(&x_star)?;
    Ok(Problem {
        matrix: Arc::new(matrix),
        b_bar,
        x_star: Some(x_star),
    })
}

/// Builds the problem a spec describes. Tomography problems drop the rows
/// of rays missing the grid.
pub fn build_problem<T: Scalar>(spec: &ProblemSpec) -> Result<Problem<T>> {
    match spec {
        ProblemSpec::Random { m, n, seed } => random_system(*m, *n, *seed),
        ProblemSpec::Tomo { size, views, rays } => {
            let geom = ParallelGeometry::new(*size, *views, *rays, T::one())?;
            let a = build_projection_matrix(&geom)?;
            let phantom = shepp_logan::<T>(*size)?;
            let b = make_sinogram(&a, &phantom)?;
            let (a, b_bar, _kept) = remove_zero_rows(&a, &b)?;
            Ok(Problem {
                matrix: Arc::new(a),
                b_bar,
                x_star: Some(phantom.image),
            })
        }
        ProblemSpec::Files {
            matrix,
            rhs,
            solution,
        } => {
            let a = io::read_matrix_market::<T>(matrix)?;
            let b_bar = io::read_vector::<T>(rhs)?;
            if b_bar.len() != a.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: a.n_rows(),
                    got: b_bar.len(),
                });
            }
            let x_star = solution
                .as_ref()
                .map(|p| io::read_vector::<T>(p))
                .transpose()?;
            Ok(Problem {
                matrix: Arc::new(a),
                b_bar,
                x_star,
            })
        }
    }
}

/// One sweep cell's outcome in the summary table.
#[derive(Debug, Clone)]
pub struct CellSummary<T> {
    pub blocks: usize,
    pub rule: RuleKind,
    pub noise: T,
    pub seed: u64,
    pub min_relative_error: Option<T>,
    pub best_cycle: Option<usize>,
    pub final_relative_error: Option<T>,
    pub theta_checksum: T,
    pub history_file: String,
}

#[derive(Debug)]
pub struct SweepReport<T> {
    pub summaries: Vec<CellSummary<T>>,
    pub failures: Vec<(String, String)>,
    pub summary_path: PathBuf,
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// Writes a run history in the standard CSV layout.
pub fn write_history_csv<T: Scalar>(path: &Path, records: &[CycleRecord<T>]) -> Result<()> {
    let mut out = String::from(
        "cycle,relative_error,noise_error,iteration_error,residual,theta,bound\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.12e},{:.12e},{}",
            r.cycle,
            fmt_opt(r.relative_error),
            fmt_opt(r.noise_error),
            fmt_opt(r.iteration_error),
            r.residual,
            r.theta,
            fmt_opt(r.bound),
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// The per-k closed-form bound table with the two dominance inequalities.
pub fn emit_bound_table<T: Scalar>(
    k_max: usize,
    sigma_underbar: T,
    beta_db: T,
    r: T,
) -> Result<String> {
    if k_max < 2 {
        return Err(Error::InvalidParameter("bound table needs k_max >= 2".into()));
    }
    let zetas = ZetaTable::up_to(k_max, tf(DEFAULT_ZETA_TOL));
    let mut out = String::from("k,psi1,psi2,psi3,gamma,gamma_le_psi3,psi2_le_psi1\n");
    for k in 2..=k_max {
        let p1 = rule_bound(RuleKind::Psi1, k, sigma_underbar, beta_db, r, &zetas)?;
        let p2 = rule_bound(RuleKind::Psi2, k, sigma_underbar, beta_db, r, &zetas)?;
        let p3 = rule_bound(RuleKind::Psi3, k, sigma_underbar, beta_db, r, &zetas)?;
        let g = rule_bound(RuleKind::Gamma, k, sigma_underbar, beta_db, r, &zetas)?;
        let _ = writeln!(
            out,
            "{k},{p1:.12e},{p2:.12e},{p3:.12e},{g:.12e},{},{}",
            g <= p3,
            p2 <= p1
        );
    }
    Ok(out)
}

/// Builds the schedule one sweep cell needs; Γ estimates β_{δb} from the
/// guessed level via a fresh surrogate noise vector, as a practitioner
/// without access to the true noise would.
#[allow(clippy::too_many_arguments)]
fn cell_schedule<T: Scalar>(
    rule: RuleKind,
    system: &BlockSystem<T>,
    b_noisy: &[T],
    guessed_level: T,
    seed: u64,
    r: T,
    theta: Option<T>,
    k_hint: usize,
) -> Result<RelaxationSchedule<T>> {
    let sigma_bar = system.sigma_bar();
    let rule = match rule {
        RuleKind::Psi1 => Rule::Psi1,
        RuleKind::Psi2 => Rule::Psi2,
        RuleKind::Psi3 => Rule::Psi3 { r },
        RuleKind::Gamma => {
            let ranges = system.partition().ranges();
            let weights = system.weights();
            let beta_b = beta_weighted_norm(ranges, weights, b_noisy)?;
            let surrogate = estimate_noise_vector(b_noisy, guessed_level, seed ^ 0x5eed);
            let beta_db = beta_weighted_norm(ranges, weights, &surrogate)?;
            Rule::Gamma { r, beta_b, beta_db }
        }
        RuleKind::Constant => Rule::Constant {
            theta: theta.ok_or_else(|| {
                Error::InvalidParameter("constant rule requires theta".into())
            })?,
        },
        RuleKind::ThetaOpt => {
            return Err(Error::InvalidParameter(
                "theta-opt is resolved by search, not a direct schedule".into(),
            ))
        }
    };
    RelaxationSchedule::new(rule, sigma_bar, k_hint)
}

/// Runs the whole grid, writing one history CSV per cell plus
/// `summary.csv`, `bdb_table.csv` (exact vs estimated β_{δb}),
/// `ktable.csv` (semi-convergence point and minimum error per cell) and
/// `failures.csv`. Identical specs produce byte-identical outputs.
pub fn run_sweep<T: Scalar>(spec: &ExperimentSpec<T>) -> Result<SweepReport<T>> {
    spec.validate()?;
    fs::create_dir_all(&spec.output_dir)?;
    let problem = build_problem::<T>(&spec.problem)?;

    let mut summaries: Vec<CellSummary<T>> = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    let mut bdb_rows = String::from("blocks,noise,seed,guessed,exact,estimated\n");

    for &p in &spec.blocks {
        let constraint = ConvexSet::uniform_box(T::zero(), T::one(), problem.matrix.n_cols())?;
        let mut system = match BlockSystem::new(
            Arc::clone(&problem.matrix),
            &problem.b_bar,
            p,
            spec.weights,
            &constraint,
            0,
        ) {
            Ok(s) => s,
            Err(e) => {
                failures.push((format!("blocks={p}"), e.to_string()));
                continue;
            }
        };
        let alpha = if spec.alpha_auto {
            let s = match system.ensure_sigma_underbar() {
                Ok(s) => s,
                Err(e) => {
                    failures.push((format!("blocks={p}"), e.to_string()));
                    continue;
                }
            };
            s * s
        } else {
            T::zero()
        };
        let period = p;
        let k_hint = spec.cmax * period;

        for &noise in &spec.noise_levels {
            for &seed in &spec.seeds {
                let (b_noisy, delta_b) = add_noise(&problem.b_bar, noise, seed);
                // exact-vs-estimated β_{δb} comparison rows
                let exact = beta_weighted_norm(
                    system.partition().ranges(),
                    system.weights(),
                    &delta_b,
                )?;
                for &g in &spec.guessed_levels {
                    let surrogate = estimate_noise_vector(&b_noisy, g, seed ^ 0x5eed);
                    let est = beta_weighted_norm(
                        system.partition().ranges(),
                        system.weights(),
                        &surrogate,
                    )?;
                    let _ = writeln!(
                        bdb_rows,
                        "{p},{noise:.6e},{seed},{g:.6e},{exact:.12e},{est:.12e}"
                    );
                }

                for &rule in &spec.rules {
                    let cell = format!("p{p}_{rule}_n{noise:.4}_s{seed}");
                    let outcome = run_cell(
                        spec, &system, &problem, rule, &b_noisy, &delta_b, noise, seed, alpha,
                        k_hint, &cell, T::one(),
                    );
                    match outcome {
                        Ok((summary, history)) => {
                            let path = spec.output_dir.join(&summary.history_file);
                            match write_history_csv(&path, &history) {
                                Ok(()) => summaries.push(summary),
                                Err(e) => failures.push((cell, e.to_string())),
                            }
                        }
                        Err(e) => failures.push((cell, e.to_string())),
                    }
                }
            }
        }
    }

    // summary.csv
    let mut summary_csv = String::from(
        "blocks,rule,noise,seed,min_relative_error,best_cycle,final_relative_error,theta_checksum,history_file\n",
    );
    for s in &summaries {
        let _ = writeln!(
            summary_csv,
            "{},{},{:.6e},{},{},{},{},{:.12e},{}",
            s.blocks,
            s.rule,
            s.noise,
            s.seed,
            fmt_opt(s.min_relative_error),
            s.best_cycle.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(s.final_relative_error),
            s.theta_checksum,
            s.history_file,
        );
    }
    let summary_path = spec.output_dir.join("summary.csv");
    fs::write(&summary_path, &summary_csv)?;
    fs::write(spec.output_dir.join("bdb_table.csv"), &bdb_rows)?;

    // ktable.csv: the semi-convergence table
    let mut ktable = String::from("blocks,rule,noise,seed,k_star,min_relative_error\n");
    for s in &summaries {
        let _ = writeln!(
            ktable,
            "{},{},{:.6e},{},{},{}",
            s.blocks,
            s.rule,
            s.noise,
            s.seed,
            s.best_cycle.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(s.min_relative_error),
        );
    }
    fs::write(spec.output_dir.join("ktable.csv"), &ktable)?;

    let mut fail_csv = String::from("cell,error\n");
    for (cell, err) in &failures {
        let _ = writeln!(fail_csv, "{cell},{}", err.replace(',', ";"));
    }
    fs::write(spec.output_dir.join("failures.csv"), &fail_csv)?;

    Ok(SweepReport {
        summaries,
        failures,
        summary_path,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell<T: Scalar>(
    spec: &ExperimentSpec<T>,
    system: &BlockSystem<T>,
    problem: &Problem<T>,
    rule: RuleKind,
    b_noisy: &[T],
    delta_b: &[T],
    noise: T,
    seed: u64,
    alpha: T,
    k_hint: usize,
    cell: &str,
    mu: T,
) -> Result<(CellSummary<T>, Vec<CycleRecord<T>>)> {
    let guessed = spec
        .guessed_levels
        .iter()
        .copied()
        .find(|&g| g == noise)
        .unwrap_or(noise);

    let schedule = if rule == RuleKind::ThetaOpt {
        // resolve θ-opt by grid search against the exact solution, then run
        // the chosen constant schedule
        let x_star = problem.x_star.as_deref().ok_or_else(|| {
            Error::InvalidParameter("theta-opt needs the exact solution".into())
        })?;
        let sb = system.sigma_bar();
        let two = tf::<T>(2.0);
        let hi = two / (sb * sb);
        let grid: Vec<T> = (1..=50)
            .map(|i| hi * T::from_usize(i).unwrap() / tf::<T>(51.0))
            .collect();
        let template = SolverConfig {
            alpha,
            ..SolverConfig::new(
                RelaxationSchedule::new(Rule::Constant { theta: hi / two }, sb, 2)?,
                spec.cmax,
            )
        };
        let noisy_system = system.with_rhs(b_noisy)?;
        let (theta, _, _) = theta_opt_search(&noisy_system, &template, &grid, spec.cmax, x_star)?;
        RelaxationSchedule::new(Rule::Constant { theta }, sb, 2)?
    } else {
        cell_schedule(rule, system, b_noisy, guessed, seed, spec.r, spec.theta, k_hint)?
    };

    let mut config = SolverConfig::new(schedule, spec.cmax);
    config.alpha = alpha;
    config.mu = mu;
    let run = paired_run(system, delta_b, &config, problem.x_star.as_deref())?;

    let history_file = format!("history_{cell}.csv");

    let theta_checksum = run
        .per_iteration
        .iter()
        .map(|r| r.theta)
        .fold(T::zero(), |a, b| a + b);
    let (min_rel, best_cycle) = match crate::solver::detect_semiconvergence(&run.noisy.history) {
        Ok((c, e)) => (Some(e), Some(c)),
        Err(_) => (None, None),
    };
    let final_rel = run.noisy.history.last().and_then(|r| r.relative_error);
    let summary = CellSummary {
        blocks: system.partition().p(),
        rule,
        noise,
        seed,
        min_relative_error: min_rel,
        best_cycle,
        final_relative_error: final_rel,
        theta_checksum,
        history_file,
    };
    Ok((summary, run.noisy.history))
}

/// Runs exactly one configuration — the first entry of each of the spec's
/// grid lists — and returns its summary plus the per-cycle history without
/// writing any sweep reports.
pub fn run_single<T: Scalar>(
    spec: &ExperimentSpec<T>,
    mu: T,
) -> Result<(CellSummary<T>, Vec<CycleRecord<T>>)> {
    spec.validate()?;
    let problem = build_problem::<T>(&spec.problem)?;
    let p = spec.blocks[0];
    let rule = spec.rules[0];
    let noise = spec.noise_levels[0];
    let seed = spec.seeds[0];
    let constraint = ConvexSet::uniform_box(T::zero(), T::one(), problem.matrix.n_cols())?;
    let mut system = BlockSystem::new(
        Arc::clone(&problem.matrix),
        &problem.b_bar,
        p,
        spec.weights,
        &constraint,
        0,
    )?;
    let alpha = if spec.alpha_auto {
        let s = system.ensure_sigma_underbar()?;
        s * s
    } else {
        T::zero()
    };
    let k_hint = spec.cmax * p;
    let (b_noisy, delta_b) = add_noise(&problem.b_bar, noise, seed);
    let cell = format!("p{p}_{rule}_n{noise:.4}_s{seed}");
    run_cell(
        spec, &system, &problem, rule, &b_noisy, &delta_b, noise, seed, alpha, k_hint, &cell, mu,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("pbim-harness-tests").join(name);
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn config_parse_roundtrip() {
        let text = "\
# a comment
problem = random
m = 30
n = 20
problem_seed = 7
blocks = 2,4
rules = psi1,gamma
noise = 0.02,0.05
guessed = 0.02
cmax = 10
seeds = 1,2
weights = cimmino
r = 1.75
alpha = auto
out = /tmp/somewhere
";
        let spec = ExperimentSpec::<f64>::parse(text).unwrap();
        assert_eq!(
            spec.problem,
            ProblemSpec::Random {
                m: 30,
                n: 20,
                seed: 7
            }
        );
        assert_eq!(spec.blocks, vec![2, 4]);
        assert_eq!(spec.rules, vec![RuleKind::Psi1, RuleKind::Gamma]);
        assert_eq!(spec.noise_levels, vec![0.02, 0.05]);
        assert_eq!(spec.cmax, 10);
        assert_eq!(spec.seeds, vec![1, 2]);
        assert_eq!(spec.r, 1.75);
        assert!(spec.alpha_auto);
        assert_eq!(spec.output_dir, PathBuf::from("/tmp/somewhere"));
    }

    #[test]
    fn config_rejects_garbage() {
        assert!(ExperimentSpec::<f64>::parse("nonsense").is_err());
        assert!(ExperimentSpec::<f64>::parse("frobnicate = 3").is_err());
        assert!(ExperimentSpec::<f64>::parse("rules = warp").is_err());
        // constant rule without theta
        assert!(ExperimentSpec::<f64>::parse("rules = constant").is_err());
    }

    #[test]
    fn random_system_consistent() {
        let p = random_system::<f64>(12, 8, 3).unwrap();
        let x = p.x_star.unwrap();
        assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let ax = p.matrix.matvec(&x).unwrap();
        assert_eq!(ax, p.b_bar);
        // determinism
        let q = random_system::<f64>(12, 8, 3).unwrap();
        assert_eq!(*q.matrix, *p.matrix);
    }

    #[test]
    fn one_cell_sweep_writes_reports() {
        let mut spec = ExperimentSpec::<f64>::defaults();
        spec.problem = ProblemSpec::Random {
            m: 20,
            n: 12,
            seed: 5,
        };
        spec.blocks = vec![2];
        spec.rules = vec![RuleKind::Psi1];
        spec.noise_levels = vec![0.02];
        spec.cmax = 5;
        spec.output_dir = tmp_dir("one-cell");
        let report = run_sweep(&spec).unwrap();
        assert_eq!(report.summaries.len(), 1);
        assert!(report.failures.is_empty());
        assert!(spec.output_dir.join("summary.csv").exists());
        assert!(spec.output_dir.join("bdb_table.csv").exists());
        assert!(spec.output_dir.join("ktable.csv").exists());
        assert!(spec
            .output_dir
            .join(&report.summaries[0].history_file)
            .exists());
    }

    #[test]
    fn sweep_deterministic() {
        let mut spec = ExperimentSpec::<f64>::defaults();
        spec.problem = ProblemSpec::Random {
            m: 16,
            n: 10,
            seed: 9,
        };
        spec.blocks = vec![2];
        spec.rules = vec![RuleKind::Gamma];
        spec.noise_levels = vec![0.05];
        spec.guessed_levels = vec![0.05];
        spec.cmax = 4;
        spec.output_dir = tmp_dir("det-a");
        run_sweep(&spec).unwrap();
        let a = fs::read(spec.output_dir.join("summary.csv")).unwrap();
        let ha = fs::read_dir(&spec.output_dir).unwrap().count();
        spec.output_dir = tmp_dir("det-b");
        run_sweep(&spec).unwrap();
        let b = fs::read(spec.output_dir.join("summary.csv")).unwrap();
        // the summary embeds only relative file names, so bytes must match
        assert_eq!(a, b);
        assert_eq!(ha, fs::read_dir(&spec.output_dir).unwrap().count());
    }

    #[test]
    fn zero_noise_seeds_identical() {
        let mut spec = ExperimentSpec::<f64>::defaults();
        spec.problem = ProblemSpec::Random {
            m: 16,
            n: 10,
            seed: 2,
        };
        spec.blocks = vec![2];
        spec.rules = vec![RuleKind::Psi2];
        spec.noise_levels = vec![0.0];
        spec.guessed_levels = vec![0.0];
        spec.seeds = vec![1, 2];
        spec.cmax = 6;
        spec.output_dir = tmp_dir("zero-noise");
        let report = run_sweep(&spec).unwrap();
        assert_eq!(report.summaries.len(), 2);
        let h1 = fs::read(spec.output_dir.join(&report.summaries[0].history_file)).unwrap();
        let h2 = fs::read(spec.output_dir.join(&report.summaries[1].history_file)).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn bound_table_inequalities() {
        let csv = emit_bound_table::<f64>(50, 0.7, 0.1, 1.5).unwrap();
        let mut rows = 0;
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[5], "true");
            assert_eq!(fields[6], "true");
            rows += 1;
        }
        assert_eq!(rows, 49);
        // zero noise level zeroes every bound
        let csv = emit_bound_table::<f64>(5, 0.7, 0.0, 1.5).unwrap();
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            for f in &fields[1..5] {
                assert_eq!(f.parse::<f64>().unwrap(), 0.0);
            }
        }
    }
}
