//! The iteration engines: the projected block-iterative method, its p = 1
//! simultaneous special case, the generalized block split-feasibility step,
//! and paired noisy/noise-free runs for the error decomposition.

use std::sync::Arc;

use crate::convex::ConvexSet;
use crate::relaxation::{
    noise_bound_general, NoiseBoundInputs, RelaxationSchedule, Rule,
};
use crate::sparse::{BlockPartition, SparseMatrix};
use crate::spectral::{
    estimate_block_norms, estimate_smallest, SpectralEstimates, DEFAULT_POWER_MAX_ITER,
    DEFAULT_POWER_TOL, DEFAULT_RANK_TOL,
};
use crate::weights::{build_weights, BlockWeights, WeightKind, WeightedBlock};
use crate::{tf, Error, Result, Scalar};

/// Relative-error ceiling beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Margin for the λ_k ∈ [ε, 2−ε] admissibility warnings.
pub const LAMBDA_EPSILON: f64 = 1e-3;

/// Block selection rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Control {
    /// i_k = k mod p.
    Cyclic,
    /// A repeating index sequence; valid when every block appears in it,
    /// so that every window of one period touches every block.
    AlmostCyclic(Vec<usize>),
}

impl Control {
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Control::Cyclic => Ok(()),
            Control::AlmostCyclic(seq) => {
                if seq.is_empty() {
                    return Err(Error::InvalidParameter("empty control sequence".into()));
                }
                if let Some(&bad) = seq.iter().find(|&&t| t >= p) {
                    return Err(Error::InvalidParameter(format!(
                        "control index {bad} out of range for {p} blocks"
                    )));
                }
                for t in 0..p {
                    if !seq.contains(&t) {
                        return Err(Error::InvalidParameter(format!(
                            "block {t} never selected by the control sequence"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// The block handled at inner iteration `k`.
    pub fn block(&self, k: usize, p: usize) -> usize {
        match self {
            Control::Cyclic => k % p,
            Control::AlmostCyclic(seq) => seq[k % seq.len()],
        }
    }

    /// Inner iterations per cycle (one pass touching every block).
    pub fn period(&self, p: usize) -> usize {
        match self {
            Control::Cyclic => p,
            Control::AlmostCyclic(seq) => seq.len(),
        }
    }
}

/// Everything one run needs besides the system itself.
#[derive(Debug, Clone)]
pub struct SolverConfig<T> {
    /// Regularization α ≥ 0.
    pub alpha: T,
    /// Projection relaxation μ ∈ (0,2); 1 is the plain projection.
    pub mu: T,
    pub control: Control,
    /// Number of cycles to run.
    pub cycles: usize,
    pub schedule: RelaxationSchedule<T>,
    /// Record history every this many cycles (≥ 1).
    pub record_every: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(schedule: RelaxationSchedule<T>, cycles: usize) -> Self {
        Self {
            alpha: T::zero(),
            mu: T::one(),
            control: Control::Cyclic,
            cycles,
            schedule,
            record_every: 1,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.alpha < T::zero() {
            return Err(Error::InvalidParameter("alpha must be >= 0".into()));
        }
        if self.mu <= T::zero() || self.mu >= tf::<T>(2.0) {
            return Err(Error::InvalidParameter("mu must lie in (0, 2)".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        self.control.validate(p)
    }
}

/// A partitioned, weighted, constrained system ready to iterate on.
#[derive(Debug, Clone)]
pub struct BlockSystem<T> {
    partition: BlockPartition<T>,
    weights: Vec<BlockWeights<T>>,
    constraints: Vec<ConvexSet<T>>,
    /// Per-block target set in the weighted range; the singleton `{b̂^t}`
    /// recovers the plain method, general convex sets give the
    /// split-feasibility step.
    targets: Vec<ConvexSet<T>>,
    estimates: SpectralEstimates<T>,
    sigma_underbar: Option<T>,
}

impl<T: Scalar> BlockSystem<T> {
    /// Partitions `A`, `b` into `p` strips, builds the per-block weights and
    /// power-method norm estimates, and sets the singleton targets `{b̂^t}`.
    pub fn new(
        a: Arc<SparseMatrix<T>>,
        b: &[T],
        p: usize,
        kind: WeightKind,
        constraint: &ConvexSet<T>,
        seed: u64,
    ) -> Result<Self> {
        let partition = BlockPartition::new(Arc::clone(&a), b, p)?;
        let mut weights = Vec::with_capacity(p);
        for t in 0..p {
            weights.push(build_weights(kind, &a, partition.range(t))?);
        }
        let estimates = estimate_block_norms(
            &a,
            partition.ranges(),
            &weights,
            tf(DEFAULT_POWER_TOL),
            DEFAULT_POWER_MAX_ITER,
            seed,
        )?;
        let targets = Self::singleton_targets(&partition, &weights);
        Ok(Self {
            partition,
            weights,
            constraints: vec![constraint.clone(); p],
            targets,
            estimates,
            sigma_underbar: None,
        })
    }

    fn singleton_targets(
        partition: &BlockPartition<T>,
        weights: &[BlockWeights<T>],
    ) -> Vec<ConvexSet<T>> {
        (0..partition.p())
            .map(|t| {
                let b_hat: Vec<T> = partition
                    .rhs(t)
                    .iter()
                    .zip(&weights[t].m_sqrt)
                    .map(|(&v, &s)| v * s)
                    .collect();
                ConvexSet::Singleton(b_hat)
            })
            .collect()
    }

    /// Replaces the singleton targets with general convex range sets,
    /// turning the step into the split-feasibility form.
    pub fn with_targets(mut self, targets: Vec<ConvexSet<T>>) -> Result<Self> {
        if targets.len() != self.partition.p() {
            return Err(Error::DimensionMismatch {
                expected: self.partition.p(),
                got: targets.len(),
            });
        }
        self.targets = targets;
        Ok(self)
    }

    /// The same system with a different right-hand side (identical strips,
    /// weights and spectral estimates — weights do not depend on `b`).
    pub fn with_rhs(&self, b: &[T]) -> Result<Self> {
        let partition = self.partition.with_rhs(b)?;
        let targets = Self::singleton_targets(&partition, &self.weights);
        Ok(Self {
            partition,
            weights: self.weights.clone(),
            constraints: self.constraints.clone(),
            targets,
            estimates: self.estimates.clone(),
            sigma_underbar: self.sigma_underbar,
        })
    }

    pub fn partition(&self) -> &BlockPartition<T> {
        &self.partition
    }

    pub fn weights(&self) -> &[BlockWeights<T>] {
        &self.weights
    }

    pub fn estimates(&self) -> &SpectralEstimates<T> {
        &self.estimates
    }

    pub fn sigma_bar(&self) -> T {
        self.estimates.sigma_bar
    }

    /// Computes σ̲ (the smallest nonzero weighted-block singular value) once
    /// via the dense route; cheap accessor afterwards.
    pub fn ensure_sigma_underbar(&mut self) -> Result<T> {
        if let Some(s) = self.sigma_underbar {
            return Ok(s);
        }
        let s = estimate_smallest(
            self.partition.parent(),
            self.partition.ranges(),
            &self.weights,
            tf(DEFAULT_RANK_TOL),
        )?;
        self.sigma_underbar = Some(s);
        Ok(s)
    }

    pub fn sigma_underbar(&self) -> Option<T> {
        self.sigma_underbar
    }

    pub fn n_cols(&self) -> usize {
        self.partition.parent().n_cols()
    }

    /// The full right-hand side, reassembled from the strips.
    pub fn rhs_full(&self) -> Vec<T> {
        let mut b = Vec::with_capacity(self.partition.parent().n_rows());
        for t in 0..self.partition.p() {
            b.extend_from_slice(self.partition.rhs(t));
        }
        b
    }

    /// `max_t ‖A_tᵀ M_t δb^t‖`, the δ̂ of the noise bounds.
    pub fn delta_hat(&self, delta_b: &[T]) -> Result<T> {
        let a = self.partition.parent();
        if delta_b.len() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: delta_b.len(),
            });
        }
        let mut best = T::zero();
        for t in 0..self.partition.p() {
            let (s, e) = self.partition.range(t);
            let scaled: Vec<T> = delta_b[s..e]
                .iter()
                .zip(&self.weights[t].m_diag)
                .map(|(&v, &m)| v * m)
                .collect();
            let u = a.matvec_transpose_rows((s, e), &scaled)?;
            best = best.max(norm(&u));
        }
        Ok(best)
    }
}

/// `u^t(x, b^t) = A_tᵀ M_t (b^t − A_t x) − αx`, the update direction in its
/// direct (unweighted-range) form.
pub fn u_vector<T: Scalar>(
    matrix: &SparseMatrix<T>,
    range: (usize, usize),
    weights: &BlockWeights<T>,
    x: &[T],
    b_t: &[T],
    alpha: T,
) -> Result<Vec<T>> {
    let ax = matrix.matvec_rows(range, x)?;
    if b_t.len() != ax.len() {
        return Err(Error::DimensionMismatch {
            expected: ax.len(),
            got: b_t.len(),
        });
    }
    let r: Vec<T> = b_t
        .iter()
        .zip(&ax)
        .zip(&weights.m_diag)
        .map(|((&b, &a), &m)| (b - a) * m)
        .collect();
    let mut u = matrix.matvec_transpose_rows(range, &r)?;
    for (uv, &xv) in u.iter_mut().zip(x) {
        *uv -= alpha * xv;
    }
    Ok(u)
}

/// One inner step on block `t`: the split-feasibility update
/// `x ← P_{C_t}(x + θ·(Â_tᵀ(P_{Q_t}(Â_t x) − Â_t x) − αx))` relaxed by μ.
/// With the singleton target `Q_t = {b̂^t}` this is exactly the plain
/// projected block step; every entry point shares this kernel.
fn step_block<T: Scalar>(
    system: &BlockSystem<T>,
    t: usize,
    x: &mut Vec<T>,
    theta: T,
    alpha: T,
    mu: T,
) -> Result<()> {
    let op = WeightedBlock::new(
        system.partition.parent(),
        system.partition.range(t),
        &system.weights[t],
    );
    let ax = op.apply(x)?;
    let q = system.targets[t].project(&ax)?;
    let r: Vec<T> = q.iter().zip(&ax).map(|(&qv, &av)| qv - av).collect();
    let u = op.apply_transpose(&r)?;
    let y: Vec<T> = x
        .iter()
        .zip(&u)
        .map(|(&xv, &uv)| xv + theta * (uv - alpha * xv))
        .collect();
    *x = system.constraints[t].relaxed_project(&y, mu)?;
    Ok(())
}

/// One recorded cycle of a run.
#[derive(Debug, Clone)]
pub struct CycleRecord<T> {
    /// 1-based cycle number.
    pub cycle: usize,
    /// ‖x − x*‖/‖x*‖ when x* is known.
    pub relative_error: Option<T>,
    /// ‖x^k − x̄^k‖ (paired runs only).
    pub noise_error: Option<T>,
    /// ‖x̄^k − x*‖ (paired runs with known x*).
    pub iteration_error: Option<T>,
    /// ‖b − Ax‖.
    pub residual: T,
    /// θ used at the last inner iteration of the cycle.
    pub theta: T,
    /// Noise-error upper bound at this iterate, when evaluable.
    pub bound: Option<T>,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub x: Vec<T>,
    pub history: Vec<CycleRecord<T>>,
    /// Inner iterations whose implied λ_k left [ε, 2−ε].
    pub lambda_warnings: usize,
    pub cycles_run: usize,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn diff_norm<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum::<T>()
        .sqrt()
}

fn relative_error<T: Scalar>(x: &[T], x_star: &[T]) -> T {
    let nx = norm(x_star);
    if nx == T::zero() {
        norm(x)
    } else {
        diff_norm(x, x_star) / nx
    }
}

fn check_divergence<T: Scalar>(x: &[T], rel: Option<T>, cycle: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged(cycle));
    }
    if let Some(r) = rel {
        if r > tf::<T>(DIVERGENCE_LIMIT) {
            return Err(Error::Diverged(cycle));
        }
    }
    Ok(())
}

/// Runs the projected block iteration for `config.cycles` cycles from `x0`
/// (zeros when absent), recording history at cycle boundaries.
pub fn solve<T: Scalar>(
    system: &BlockSystem<T>,
    config: &SolverConfig<T>,
    x0: Option<&[T]>,
    x_star: Option<&[T]>,
) -> Result<SolveResult<T>> {
    let p = system.partition.p();
    config.validate(p)?;
    let n = system.n_cols();
    let mut x = match x0 {
        Some(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            v.to_vec()
        }
        None => vec![T::zero(); n],
    };
    let b = system.rhs_full();
    let a = system.partition.parent();
    let period = config.control.period(p);
    let eps = tf::<T>(LAMBDA_EPSILON);
    let two = tf::<T>(2.0);

    let mut history = Vec::new();
    let mut lambda_warnings = 0usize;
    let mut k = 0usize;
    let mut theta_last = config.schedule.theta0();
    for cycle in 1..=config.cycles {
        for _ in 0..period {
            let t = config.control.block(k, p);
            let theta = config.schedule.theta(k);
            let sig = system.estimates.sigma_max_per_block[t];
            let lambda = theta * (sig * sig + config.alpha);
            if lambda < eps || lambda > two - eps {
                lambda_warnings += 1;
            }
            step_block(system, t, &mut x, theta, config.alpha, config.mu)?;
            theta_last = theta;
            k += 1;
        }
        let rel = x_star.map(|xs| relative_error(&x, xs));
        check_divergence(&x, rel, cycle)?;
        if cycle % config.record_every == 0 || cycle == config.cycles {
            let ax = a.matvec(&x)?;
            let residual = diff_norm(&b, &ax);
            history.push(CycleRecord {
                cycle,
                relative_error: rel,
                noise_error: None,
                iteration_error: None,
                residual,
                theta: theta_last,
                bound: None,
            });
        }
    }
    Ok(SolveResult {
        x,
        history,
        lambda_warnings,
        cycles_run: config.cycles,
    })
}

/// The p = 1 simultaneous method, as the single-block path of [`solve`].
pub fn psirt_solve<T: Scalar>(
    a: Arc<SparseMatrix<T>>,
    b: &[T],
    kind: WeightKind,
    constraint: &ConvexSet<T>,
    config: &SolverConfig<T>,
    seed: u64,
) -> Result<SolveResult<T>> {
    let system = BlockSystem::new(a, b, 1, kind, constraint, seed)?;
    solve(&system, config, None, None)
}

/// One inner-iteration sample of a paired noisy/noise-free run.
#[derive(Debug, Clone)]
pub struct PairedRecord<T> {
    /// 1-based iterate index (after this many inner iterations).
    pub k: usize,
    pub theta: T,
    pub theta_bar: T,
    /// ‖x^k − x̄^k‖.
    pub noise_error: T,
    /// The general noise-error bound, when α = σ̲² and σ̲ is available.
    pub bound: Option<T>,
}

#[derive(Debug, Clone)]
pub struct PairedRunResult<T> {
    pub noisy: SolveResult<T>,
    pub noise_free: SolveResult<T>,
    pub per_iteration: Vec<PairedRecord<T>>,
    pub delta_hat: T,
    /// Final γ = max_j |θ̄_j − θ_j|.
    pub gamma: T,
    /// Final û = max_s ‖u^s(x̄^s, b̄)‖.
    pub u_hat: T,
}

/// Runs the iteration on `b̄ + δb` and `b̄` in lockstep with identical
/// control, recording the noise error, its running inputs and (when α = σ̲²)
/// the theoretical bound per inner iteration. The noisy schedule is the one
/// in `config`; the noise-free trajectory uses its noise-free counterpart.
pub fn paired_run<T: Scalar>(
    system_bar: &BlockSystem<T>,
    delta_b: &[T],
    config: &SolverConfig<T>,
    x_star: Option<&[T]>,
) -> Result<PairedRunResult<T>> {
    let p = system_bar.partition.p();
    config.validate(p)?;
    let b_bar = system_bar.rhs_full();
    if delta_b.len() != b_bar.len() {
        return Err(Error::DimensionMismatch {
            expected: b_bar.len(),
            got: delta_b.len(),
        });
    }
    let b_noisy: Vec<T> = b_bar.iter().zip(delta_b).map(|(&b, &d)| b + d).collect();
    let system_noisy = system_bar.with_rhs(&b_noisy)?;
    let schedule_bar = config.schedule.noise_free_counterpart();
    let delta_hat = system_bar.delta_hat(delta_b)?;

    let n = system_bar.n_cols();
    let mut x = vec![T::zero(); n];
    let mut x_bar = vec![T::zero(); n];
    let a = system_bar.partition.parent();
    let period = config.control.period(p);
    let eps = tf::<T>(LAMBDA_EPSILON);
    let two = tf::<T>(2.0);

    // the bound applies under α = σ̲²
    let bound_active = match system_bar.sigma_underbar {
        Some(s) => (config.alpha - s * s).abs() <= tf::<T>(1e-12) * s * s.max(T::one()),
        None => false,
    };
    let mut inputs = NoiseBoundInputs {
        sigma_underbar: system_bar.sigma_underbar.unwrap_or(T::zero()),
        delta_hat,
        alpha: config.alpha,
        gamma: Vec::new(),
        eta_lo: Vec::new(),
        eta_hi: Vec::new(),
        u_hat: Vec::new(),
    };

    let mut per_iteration = Vec::new();
    let mut noisy_history = Vec::new();
    let mut bar_history = Vec::new();
    let mut lambda_warnings = 0usize;
    let mut k = 0usize;
    let mut theta_last = config.schedule.theta0();
    let (mut gamma, mut eta_lo, mut eta_hi, mut u_hat) =
        (T::zero(), T::infinity(), T::zero(), T::zero());
    for cycle in 1..=config.cycles {
        for _ in 0..period {
            let t = config.control.block(k, p);
            let theta = config.schedule.theta(k);
            let theta_bar = schedule_bar.theta(k);
            let sig = system_bar.estimates.sigma_max_per_block[t];
            let lambda = theta * (sig * sig + config.alpha);
            if lambda < eps || lambda > two - eps {
                lambda_warnings += 1;
            }
            // û samples the update direction on the noise-free trajectory
            let u_bar = u_vector(
                a,
                system_bar.partition.range(t),
                &system_bar.weights[t],
                &x_bar,
                system_bar.partition.rhs(t),
                config.alpha,
            )?;
            gamma = gamma.max((theta_bar - theta).abs());
            eta_lo = eta_lo.min(theta);
            eta_hi = eta_hi.max(theta);
            u_hat = u_hat.max(norm(&u_bar));
            inputs.gamma.push(gamma);
            inputs.eta_lo.push(eta_lo);
            inputs.eta_hi.push(eta_hi);
            inputs.u_hat.push(u_hat);

            step_block(&system_noisy, t, &mut x, theta, config.alpha, config.mu)?;
            step_block(system_bar, t, &mut x_bar, theta_bar, config.alpha, config.mu)?;
            theta_last = theta;
            k += 1;

            let noise_error = diff_norm(&x, &x_bar);
            let bound = if bound_active {
                Some(noise_bound_general(&inputs, k)?)
            } else {
                None
            };
            per_iteration.push(PairedRecord {
                k,
                theta,
                theta_bar,
                noise_error,
                bound,
            });
        }
        let rel = x_star.map(|xs| relative_error(&x, xs));
        let rel_bar = x_star.map(|xs| relative_error(&x_bar, xs));
        check_divergence(&x, rel, cycle)?;
        check_divergence(&x_bar, rel_bar, cycle)?;
        if cycle % config.record_every == 0 || cycle == config.cycles {
            let last = per_iteration.last().unwrap();
            let ax = a.matvec(&x)?;
            let residual = diff_norm(&b_noisy, &ax);
            let iter_err = x_star.map(|xs| diff_norm(&x_bar, xs));
            noisy_history.push(CycleRecord {
                cycle,
                relative_error: rel,
                noise_error: Some(last.noise_error),
                iteration_error: iter_err,
                residual,
                theta: theta_last,
                bound: last.bound,
            });
            let ax_bar = a.matvec(&x_bar)?;
            bar_history.push(CycleRecord {
                cycle,
                relative_error: rel_bar,
                noise_error: None,
                iteration_error: iter_err,
                residual: diff_norm(&b_bar, &ax_bar),
                theta: schedule_bar.theta(k.saturating_sub(1)),
                bound: None,
            });
        }
    }
    Ok(PairedRunResult {
        noisy: SolveResult {
            x,
            history: noisy_history,
            lambda_warnings,
            cycles_run: config.cycles,
        },
        noise_free: SolveResult {
            x: x_bar,
            history: bar_history,
            lambda_warnings: 0,
            cycles_run: config.cycles,
        },
        per_iteration,
        delta_hat,
        gamma,
        u_hat,
    })
}

/// The cycle where the recorded relative error attains its minimum
/// (earliest on ties), with that minimum.
pub fn detect_semiconvergence<T: Scalar>(history: &[CycleRecord<T>]) -> Result<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for rec in history {
        let e = rec.relative_error.ok_or_else(|| {
            Error::InvalidParameter("history lacks relative errors (x* unknown)".into())
        })?;
        if best.map_or(true, |(_, be)| e < be) {
            best = Some((rec.cycle, e));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty history".into()))
}

/// Grid search for the best constant θ: runs `cmax` cycles per grid point
/// and returns the θ with the smallest minimum relative error (ties break
/// toward the earlier grid index).
pub fn theta_opt_search<T: Scalar>(
    system: &BlockSystem<T>,
    template: &SolverConfig<T>,
    grid: &[T],
    cmax: usize,
    x_star: &[T],
) -> Result<(T, T, usize)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty theta grid".into()));
    }
    let mut best: Option<(T, T, usize)> = None;
    for &theta in grid {
        let schedule = RelaxationSchedule::new(
            Rule::Constant { theta },
            system.sigma_bar(),
            2,
        )?;
        let config = SolverConfig {
            cycles: cmax,
            schedule,
            ..template.clone()
        };
        let result = solve(system, &config, None, Some(x_star))?;
        let (cycle, err) = detect_semiconvergence(&result.history)?;
        if best.map_or(true, |(_, be, _)| err < be) {
            best = Some((theta, err, cycle));
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::Rule;

    fn constant_config(theta: f64, cycles: usize) -> SolverConfig<f64> {
        let schedule = RelaxationSchedule::new(Rule::Constant { theta }, 1.0, 2).unwrap();
        SolverConfig::new(schedule, cycles)
    }

    #[test]
    fn control_cyclic_sequence() {
        let c = Control::Cyclic;
        let seq: Vec<usize> = (0..7).map(|k| c.block(k, 3)).collect();
        assert_eq!(seq, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn control_almost_cyclic_validation() {
        assert!(Control::AlmostCyclic(vec![0, 1, 0, 2]).validate(3).is_ok());
        // block 2 never selected
        assert!(Control::AlmostCyclic(vec![0, 1, 0]).validate(3).is_err());
        assert!(Control::AlmostCyclic(vec![0, 3]).validate(3).is_err());
        assert!(Control::AlmostCyclic(vec![]).validate(1).is_err());
    }

    #[test]
    fn u_vector_identity() {
        let a = SparseMatrix::<f64>::identity(2);
        let w = build_weights(WeightKind::Landweber, &a, (0, 2)).unwrap();
        let u = u_vector(&a, (0, 2), &w, &[0.0, 0.0], &[1.0, 2.0], 0.0).unwrap();
        assert_eq!(u, vec![1.0, 2.0]);
    }

    #[test]
    fn u_vector_zero_at_solution() {
        let a = SparseMatrix::<f64>::from_triplets(&[(0, 0, 3.0), (0, 1, 4.0), (1, 1, 5.0)], 2, 2)
            .unwrap();
        let w = build_weights(WeightKind::Cimmino, &a, (0, 2)).unwrap();
        // x = (1,1) solves Ax = (7,5)
        let u = u_vector(&a, (0, 2), &w, &[1.0, 1.0], &[7.0, 5.0], 0.0).unwrap();
        assert!(u.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn u_vector_regularization_only() {
        let a = SparseMatrix::<f64>::from_triplets(&[(0, 0, 3.0), (0, 1, 4.0), (1, 1, 5.0)], 2, 2)
            .unwrap();
        let w = build_weights(WeightKind::Cimmino, &a, (0, 2)).unwrap();
        let u = u_vector(&a, (0, 2), &w, &[1.0, 1.0], &[7.0, 5.0], 0.1).unwrap();
        assert!((u[0] + 0.1).abs() < 1e-14);
        assert!((u[1] + 0.1).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_step() {
        // A = [1], b = 2, C = [0,1], θ = 1: x¹ = P(0 + 1·(2−0)) = 1
        let a = Arc::new(SparseMatrix::from_triplets(&[(0, 0, 1.0)], 1, 1).unwrap());
        let c = ConvexSet::uniform_box(0.0, 1.0, 1).unwrap();
        let system = BlockSystem::new(a, &[2.0], 1, WeightKind::Landweber, &c, 0).unwrap();
        let result = solve(&system, &constant_config(1.0, 1), None, None).unwrap();
        assert_eq!(result.x, vec![1.0]);
    }

    #[test]
    fn fixed_point_at_solution() {
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)], 2, 2).unwrap(),
        );
        let x_star = [1.0, 2.0];
        let b = a.matvec(&x_star).unwrap();
        let c = ConvexSet::uniform_box(0.0, 5.0, 2).unwrap();
        let system = BlockSystem::new(Arc::clone(&a), &b, 2, WeightKind::Cimmino, &c, 0).unwrap();
        let result = solve(&system, &constant_config(1.0, 3), Some(&x_star), Some(&x_star))
            .unwrap();
        for (got, want) in result.x.iter().zip(&x_star) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn psirt_converges_consistent() {
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 0.5), (1, 0, 0.2), (1, 1, 1.0)], 2, 2)
                .unwrap(),
        );
        let x_star = [0.4, 0.7];
        let b = a.matvec(&x_star).unwrap();
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let system = BlockSystem::new(Arc::clone(&a), &b, 1, WeightKind::Cimmino, &c, 0).unwrap();
        // λ = 1 means θ = 1/σ̄²
        let sb = system.sigma_bar();
        let config = constant_config(1.0 / (sb * sb), 5000);
        let result = solve(&system, &config, None, Some(&x_star)).unwrap();
        let err = result.history.last().unwrap().relative_error.unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn psirt_is_single_block_path() {
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 0.5), (1, 1, 1.0)], 2, 2).unwrap(),
        );
        let b = [1.0, 2.0];
        let c = ConvexSet::<f64>::NonNeg;
        let config = constant_config(0.5, 20);
        let via_fn = psirt_solve(Arc::clone(&a), &b, WeightKind::Cimmino, &c, &config, 0).unwrap();
        let system = BlockSystem::new(a, &b, 1, WeightKind::Cimmino, &c, 0).unwrap();
        let via_solve = solve(&system, &config, None, None).unwrap();
        assert_eq!(via_fn.x, via_solve.x);
    }

    #[test]
    fn cq_box_target_containing_ax_is_pure_projection() {
        let a = Arc::new(SparseMatrix::<f64>::identity(2));
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let system = BlockSystem::new(Arc::clone(&a), &[0.0, 0.0], 1, WeightKind::Landweber, &c, 0)
            .unwrap()
            .with_targets(vec![ConvexSet::uniform_box(-10.0, 10.0, 2).unwrap()])
            .unwrap();
        // start from x0 = (2, −1): Âx already inside Q, so x¹ = P_C(x⁰)
        let result = solve(&system, &constant_config(0.9, 1), Some(&[2.0, -1.0]), None).unwrap();
        assert_eq!(result.x, vec![1.0, 0.0]);
    }

    #[test]
    fn cq_split_feasibility_converges() {
        // find x ∈ [0,1]² with Ax ∈ halfspace {y : y₀ + y₁ ≤ 0.5}
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 1.0), (1, 1, 1.0)], 2, 2).unwrap(),
        );
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let q = ConvexSet::halfspace(vec![1.0, 1.0], 0.5).unwrap();
        let system = BlockSystem::new(Arc::clone(&a), &[0.0, 0.0], 1, WeightKind::Landweber, &c, 0)
            .unwrap()
            .with_targets(vec![q.clone()])
            .unwrap();
        let result = solve(&system, &constant_config(1.0, 500), Some(&[1.0, 1.0]), None).unwrap();
        assert!(c.contains(&result.x, 1e-8));
        let ax = a.matvec(&result.x).unwrap();
        assert!(q.contains(&ax, 1e-8));
    }

    #[test]
    fn feasibility_after_every_cycle() {
        let a = Arc::new(
            SparseMatrix::from_triplets(
                &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, -1.0), (1, 1, 1.0), (2, 1, 3.0)],
                3,
                2,
            )
            .unwrap(),
        );
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let system = BlockSystem::new(a, &[1.0, 0.5, 2.0], 3, WeightKind::Cimmino, &c, 0).unwrap();
        let mut config = constant_config(0.8, 10);
        config.record_every = 1;
        let mut x = vec![0.0; 2];
        for _ in 0..10 {
            let r = solve(&system, &config, Some(&x), None).unwrap();
            x = r.x;
            assert!(c.contains(&x, 0.0));
        }
    }

    #[test]
    fn paired_zero_noise_has_zero_noise_error() {
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 0.3), (1, 1, 1.0), (2, 0, 0.5)], 3, 2)
                .unwrap(),
        );
        let b = [1.0, 0.7, 0.2];
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let system = BlockSystem::new(a, &b, 3, WeightKind::Cimmino, &c, 0).unwrap();
        let config = constant_config(0.9, 20);
        let run = paired_run(&system, &[0.0; 3], &config, None).unwrap();
        for rec in &run.per_iteration {
            assert_eq!(rec.noise_error, 0.0);
        }
        assert_eq!(run.delta_hat, 0.0);
        assert_eq!(run.gamma, 0.0);
    }

    #[test]
    fn paired_noise_independent_rule_gamma_zero() {
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 0.4), (3, 1, 0.6)], 4, 2)
                .unwrap(),
        );
        let b = [0.5, 0.5, 0.2, 0.3];
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let system = BlockSystem::new(a, &b, 2, WeightKind::Cimmino, &c, 0).unwrap();
        let schedule =
            RelaxationSchedule::new(Rule::Psi3 { r: 1.5 }, system.sigma_bar(), 40).unwrap();
        let config = SolverConfig::new(schedule, 20);
        let run = paired_run(&system, &[0.01, -0.01, 0.005, 0.0], &config, None).unwrap();
        assert_eq!(run.gamma, 0.0);
        for rec in &run.per_iteration {
            assert_eq!(rec.theta, rec.theta_bar);
        }
    }

    #[test]
    fn semiconvergence_detection() {
        let mk = |vals: &[f64]| -> Vec<CycleRecord<f64>> {
            vals.iter()
                .enumerate()
                .map(|(i, &e)| CycleRecord {
                    cycle: i + 1,
                    relative_error: Some(e),
                    noise_error: None,
                    iteration_error: None,
                    residual: 0.0,
                    theta: 1.0,
                    bound: None,
                })
                .collect()
        };
        assert_eq!(detect_semiconvergence(&mk(&[1.0, 0.5, 0.7])).unwrap(), (2, 0.5));
        assert_eq!(detect_semiconvergence(&mk(&[0.9, 0.8, 0.7])).unwrap(), (3, 0.7));
        // tie breaks to the earliest cycle
        assert_eq!(detect_semiconvergence(&mk(&[0.5, 0.5, 0.9])).unwrap(), (1, 0.5));
    }

    #[test]
    fn theta_opt_single_point_and_tie_break() {
        let a = Arc::new(
            SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 0.4), (1, 1, 1.0)], 2, 2).unwrap(),
        );
        let x_star = [0.3, 0.6];
        let b = a.matvec(&x_star).unwrap();
        let c = ConvexSet::uniform_box(0.0, 1.0, 2).unwrap();
        let system = BlockSystem::new(a, &b, 1, WeightKind::Cimmino, &c, 0).unwrap();
        let template = constant_config(1.0, 1);
        let (t, _, _) = theta_opt_search(&system, &template, &[0.7], 30, &x_star).unwrap();
        assert_eq!(t, 0.7);
        // duplicated grid point: first index wins
        let (t, e1, c1) = theta_opt_search(&system, &template, &[0.7, 0.7], 30, &x_star).unwrap();
        assert_eq!(t, 0.7);
        let (_, e2, c2) = theta_opt_search(&system, &template, &[0.7], 30, &x_star).unwrap();
        assert_eq!((e1, c1), (e2, c2));
    }

    #[test]
    fn invalid_config_rejected() {
        let a = Arc::new(SparseMatrix::<f64>::identity(2));
        let c = ConvexSet::<f64>::WholeSpace;
        let system = BlockSystem::new(a, &[1.0, 1.0], 1, WeightKind::Landweber, &c, 0).unwrap();
        let mut config = constant_config(1.0, 1);
        config.mu = 2.0;
        assert!(solve(&system, &config, None, None).is_err());
        let mut config = constant_config(1.0, 1);
        config.alpha = -0.1;
        assert!(solve(&system, &config, None, None).is_err());
    }

    #[test]
    fn divergence_guard_fires() {
        // θ far too large on an unconstrained system blows up
        let a = Arc::new(SparseMatrix::from_triplets(&[(0, 0, 2.0)], 1, 1).unwrap());
        let c = ConvexSet::<f64>::WholeSpace;
        let system = BlockSystem::new(a, &[1.0], 1, WeightKind::Landweber, &c, 0).unwrap();
        let result = solve(&system, &constant_config(100.0, 200), None, Some(&[0.5]));
        assert!(matches!(result, Err(Error::Diverged(_))));
    }

    #[test]
    fn lambda_warning_counted() {
        let a = Arc::new(SparseMatrix::<f64>::identity(2));
        let c = ConvexSet::<f64>::WholeSpace;
        let system = BlockSystem::new(a, &[1.0, 1.0], 1, WeightKind::Landweber, &c, 0).unwrap();
        // λ = θ·σ̄² = 3 > 2 − ε on every iteration, but projection-free
        // identity stays finite for a few cycles
        let result = solve(&system, &constant_config(3.0, 2), None, None).unwrap();
        assert_eq!(result.lambda_warnings, 2);
    }
}
