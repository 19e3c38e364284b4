//! Relaxation-parameter machinery: the ζ_k roots, the Ψ function, the four
//! step-size rules, and the noise-error bound evaluators.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::weights::BlockWeights;
use crate::{tf, Error, Result, Scalar};

/// Default certificate tolerance for the ζ_k roots.
pub const DEFAULT_ZETA_TOL: f64 = 1e-14;

/// `g_{k−1}(y) = (2k−1)y^{k−1} − (y^{k−2}+⋯+y+1)`, in the geometric-sum
/// closed form that avoids O(k) summation error.
pub fn zeta_poly<T: Scalar>(k: usize, y: T) -> T {
    debug_assert!(k >= 2);
    let two = tf::<T>(2.0);
    let lead = T::from_usize(2 * k - 1).unwrap();
    let p = y.powi((k - 1) as i32);
    if y == T::one() {
        return lead - T::from_usize(k - 1).unwrap();
    }
    let _ = two;
    lead * p - (T::one() - p) / (T::one() - y)
}

/// The unique root ζ_k ∈ (0,1) of `g_{k−1}`, by bisection refined to
/// machine precision. `tol` is the certificate tolerance: the returned
/// root satisfies `|g_{k−1}(ζ_k)| < tol` for desk-scale `k`.
pub fn zeta_root<T: Scalar>(k: usize, _tol: T) -> T {
    assert!(k >= 2, "zeta_root requires k >= 2");
    let mut lo = T::zero(); // g(0) = -1
    let mut hi = T::one(); // g(1) = k
    let two = tf::<T>(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break; // no representable midpoint left
        }
        if zeta_poly(k, mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Precomputed ζ_k values for k = 2..=k_max.
#[derive(Debug, Clone)]
pub struct ZetaTable<T> {
    values: Vec<T>,
    tol: T,
}

impl<T: Scalar> ZetaTable<T> {
    pub fn up_to(k_max: usize, tol: T) -> Self {
        let values = (2..=k_max).map(|k| zeta_root(k, tol)).collect();
        Self { values, tol }
    }

    pub fn k_max(&self) -> usize {
        self.values.len() + 1
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    /// ζ_k; values beyond the precomputed range are computed on the fly.
    pub fn get(&self, k: usize) -> T {
        assert!(k >= 2, "zeta is defined for k >= 2");
        match self.values.get(k - 2) {
            Some(&z) => z,
            None => zeta_root(k, self.tol),
        }
    }
}

/// `Ψ^k(x,y) = (1−(1−yx²)^k)/x`, evaluated through `ln_1p`/`exp_m1` when
/// `yx²` is small.
pub fn psi_function<T: Scalar>(x: T, y: T, k: usize) -> Result<T> {
    if x <= T::zero() {
        return Err(Error::InvalidParameter("psi requires x > 0".into()));
    }
    let s = y * x * x;
    let half = tf::<T>(0.5);
    if s.abs() < half {
        let kk = T::from_usize(k).unwrap();
        Ok(-(kk * (-s).ln_1p()).exp_m1() / x)
    } else {
        Ok((T::one() - (T::one() - s).powi(k as i32)) / x)
    }
}

/// The step-size rules of the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Rule<T> {
    Psi1,
    Psi2,
    Psi3 { r: T },
    Gamma { r: T, beta_b: T, beta_db: T },
    Constant { theta: T },
}

/// Rule identifiers, used by the CLI and the bound table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Psi1,
    Psi2,
    Psi3,
    Gamma,
    ThetaOpt,
    Constant,
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi1" => Ok(RuleKind::Psi1),
            "psi2" => Ok(RuleKind::Psi2),
            "psi3" => Ok(RuleKind::Psi3),
            "gamma" => Ok(RuleKind::Gamma),
            "theta-opt" => Ok(RuleKind::ThetaOpt),
            "constant" => Ok(RuleKind::Constant),
            other => Err(Error::Parse(format!("unknown rule '{other}'"))),
        }
    }
}

impl std::fmt::Display for RuleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RuleKind::Psi1 => "psi1",
            RuleKind::Psi2 => "psi2",
            RuleKind::Psi3 => "psi3",
            RuleKind::Gamma => "gamma",
            RuleKind::ThetaOpt => "theta-opt",
            RuleKind::Constant => "constant",
        };
        f.write_str(s)
    }
}

/// A rule bound to a problem's `σ̄`, producing θ_k for every k.
#[derive(Debug, Clone)]
pub struct RelaxationSchedule<T> {
    rule: Rule<T>,
    sigma_bar: T,
    zetas: ZetaTable<T>,
}

impl<T: Scalar> RelaxationSchedule<T> {
    /// `k_hint` sizes the precomputed ζ table (total inner iterations of the
    /// intended run); values beyond it are computed on demand.
    pub fn new(rule: Rule<T>, sigma_bar: T, k_hint: usize) -> Result<Self> {
        if sigma_bar <= T::zero() {
            return Err(Error::InvalidParameter("sigma_bar must be > 0".into()));
        }
        match &rule {
            Rule::Psi3 { r } | Rule::Gamma { r, .. } => {
                if *r <= T::one() || *r > tf::<T>(2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "rule exponent r = {r} outside (1, 2]"
                    )));
                }
            }
            Rule::Constant { theta } => {
                if *theta <= T::zero() {
                    return Err(Error::InvalidParameter("constant theta must be > 0".into()));
                }
            }
            _ => {}
        }
        if let Rule::Gamma { beta_b, beta_db, .. } = &rule {
            if *beta_b <= T::zero() {
                return Err(Error::InvalidParameter("gamma rule requires beta_b > 0".into()));
            }
            if *beta_db < T::zero() {
                return Err(Error::InvalidParameter("beta_db must be >= 0".into()));
            }
        }
        let zetas = ZetaTable::up_to(k_hint.max(2), tf(DEFAULT_ZETA_TOL));
        Ok(Self {
            rule,
            sigma_bar,
            zetas,
        })
    }

    pub fn rule(&self) -> &Rule<T> {
        &self.rule
    }

    pub fn kind(&self) -> RuleKind {
        match self.rule {
            Rule::Psi1 => RuleKind::Psi1,
            Rule::Psi2 => RuleKind::Psi2,
            Rule::Psi3 { .. } => RuleKind::Psi3,
            Rule::Gamma { .. } => RuleKind::Gamma,
            Rule::Constant { .. } => RuleKind::Constant,
        }
    }

    pub fn sigma_bar(&self) -> T {
        self.sigma_bar
    }

    /// Whether θ_k is unaffected by the noise in the data.
    pub fn noise_independent(&self) -> bool {
        !matches!(self.rule, Rule::Gamma { .. })
    }

    /// The noise-free counterpart schedule used in paired runs: for the
    /// Γ-rule, β_{δb} is set to zero (hence θ̄_k is the constant θ_0);
    /// every other rule is its own counterpart.
    pub fn noise_free_counterpart(&self) -> Self {
        match &self.rule {
            Rule::Gamma { r, beta_b, .. } => Self {
                rule: Rule::Gamma {
                    r: *r,
                    beta_b: *beta_b,
                    beta_db: T::zero(),
                },
                sigma_bar: self.sigma_bar,
                zetas: self.zetas.clone(),
            },
            _ => self.clone(),
        }
    }

    /// θ_0 = θ_1 = √2 σ̄⁻² for the descending rules.
    pub fn theta0(&self) -> T {
        match self.rule {
            Rule::Constant { theta } => theta,
            _ => tf::<T>(2.0).sqrt() / (self.sigma_bar * self.sigma_bar),
        }
    }

    /// The relaxation parameter θ_k.
    pub fn theta(&self, k: usize) -> T {
        let sb2 = self.sigma_bar * self.sigma_bar;
        let two = tf::<T>(2.0);
        match &self.rule {
            Rule::Constant { theta } => *theta,
            _ if k < 2 => two.sqrt() / sb2,
            Rule::Psi1 => {
                let z = self.zetas.get(k);
                two / sb2 * (T::one() - z)
            }
            Rule::Psi2 => {
                let z = self.zetas.get(k);
                let zk = z.powi(k as i32);
                let d = T::one() - zk;
                two / sb2 * (T::one() - z) / (d * d)
            }
            Rule::Psi3 { r } => {
                let z = self.zetas.get(k);
                let zk = z.powi(k as i32);
                let num = (T::one() - zk) * (T::one() - zk);
                two / sb2 * num / (T::one() - z).powf(T::one() - *r)
            }
            Rule::Gamma { r, beta_b, beta_db } => {
                if *beta_db == T::zero() {
                    // with no noise present the rule collapses to θ_0
                    return self.theta0();
                }
                let z = self.zetas.get(k);
                let zk = z.powi(k as i32);
                let zeta_factor = (T::one() - z).powf((T::one() - *r) / two)
                    / (T::one() - zk).sqrt();
                let big_b = two * two.sqrt() * *beta_b * (*beta_b + *beta_db);
                let zb = zeta_factor * *beta_db;
                (big_b + zb * zb - zb * (zb * zb + two * big_b).sqrt())
                    / (two * sb2 * *beta_b * *beta_b)
            }
        }
    }

    /// The implied λ_k for a block of squared norm `sigma_t2` and
    /// regularization `alpha`: λ_k = θ_k (‖Â_t‖² + α).
    pub fn lambda(&self, k: usize, sigma_t2: T, alpha: T) -> T {
        self.theta(k) * (sigma_t2 + alpha)
    }
}

/// Running quantities the general noise bound consumes; entry `j` of each
/// list covers iterations `0..=j`.
#[derive(Debug, Clone)]
pub struct NoiseBoundInputs<T> {
    pub sigma_underbar: T,
    pub delta_hat: T,
    pub alpha: T,
    pub gamma: Vec<T>,
    pub eta_lo: Vec<T>,
    pub eta_hi: Vec<T>,
    pub u_hat: Vec<T>,
}

/// The general upper bound on the noise error `‖x^k − x̄^k‖`:
/// `(1/σ̲)·((γ_{k−1}û_{k−1} + η̄_{k−1}δ̂)/η̲_{k−1})·Ψ^k(σ̲, η̲_{k−1})`,
/// valid under `α = σ̲²`.
pub fn noise_bound_general<T: Scalar>(inputs: &NoiseBoundInputs<T>, k: usize) -> Result<T> {
    if k < 1 {
        return Err(Error::InvalidParameter("noise bound needs k >= 1".into()));
    }
    let j = k - 1;
    let eta_lo = inputs.eta_lo[j];
    if eta_lo <= T::zero() {
        return Err(Error::InvalidParameter("eta_lo must be > 0".into()));
    }
    let s = inputs.sigma_underbar;
    let psi = psi_function(s, eta_lo, k)?;
    let prefix = (inputs.gamma[j] * inputs.u_hat[j] + inputs.eta_hi[j] * inputs.delta_hat) / eta_lo;
    Ok(prefix * psi / s)
}

/// The alternative bound for decreasing relaxation parameters:
/// `(1/σ̲)·((θ₀−θ_{k−1})û_{k−1} + θ₀δ̂)/√θ_{k−1} · (1−ζ_k^k)/√(1−ζ_k)`.
pub fn noise_bound_decreasing<T: Scalar>(
    theta0: T,
    theta_km1: T,
    u_hat_km1: T,
    delta_hat: T,
    sigma_underbar: T,
    zeta_k: T,
    k: usize,
) -> Result<T> {
    if theta_km1 <= T::zero() {
        return Err(Error::InvalidParameter("theta_{k-1} must be > 0".into()));
    }
    let zk = zeta_k.powi(k as i32);
    let factor = (T::one() - zk) / (T::one() - zeta_k).sqrt();
    let prefix = ((theta0 - theta_km1) * u_hat_km1 + theta0 * delta_hat) / theta_km1.sqrt();
    Ok(prefix * factor / sigma_underbar)
}

/// Closed-form per-rule noise-error upper bounds as functions of k.
pub fn rule_bound<T: Scalar>(
    kind: RuleKind,
    k: usize,
    sigma_underbar: T,
    beta_db: T,
    r: T,
    zetas: &ZetaTable<T>,
) -> Result<T> {
    if k < 2 {
        return Err(Error::InvalidParameter("rule bounds are defined for k >= 2".into()));
    }
    let z = zetas.get(k);
    let zk = z.powi(k as i32);
    let pre = beta_db / sigma_underbar;
    let two = tf::<T>(2.0);
    match kind {
        RuleKind::Psi1 => Ok(pre * (T::one() - zk) / (T::one() - z)),
        RuleKind::Psi2 => Ok(pre * (T::one() - zk) * (T::one() - zk) / (T::one() - z)),
        RuleKind::Psi3 => Ok(pre * (T::one() - z).powf(-r / two)),
        RuleKind::Gamma => Ok(pre * (T::one() - zk).sqrt() * (T::one() - z).powf(-r / two)),
        other => Err(Error::InvalidParameter(format!(
            "no closed-form noise bound for rule '{other}'"
        ))),
    }
}

/// `max_t ‖M_t^{1/2} v^t‖` over the strips of a partition — the β values
/// of the Γ-rule when applied to `b` or `δb`.
pub fn beta_weighted_norm<T: Scalar>(
    ranges: &[(usize, usize)],
    weights: &[BlockWeights<T>],
    v: &[T],
) -> Result<T> {
    let total = ranges.last().map_or(0, |&(_, e)| e);
    if v.len() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: v.len(),
        });
    }
    let mut best = T::zero();
    for (&(s, e), w) in ranges.iter().zip(weights) {
        let norm2: T = v[s..e]
            .iter()
            .zip(&w.m_sqrt)
            .map(|(&x, &ms)| {
                let y = x * ms;
                y * y
            })
            .sum();
        best = best.max(norm2.sqrt());
    }
    Ok(best)
}

/// A surrogate noise vector with `‖δb̄‖ = g·‖b‖` exactly, drawn from a
/// seeded standard normal. Used to estimate β_{δb} for the Γ-rule when the
/// true noise is unknown.
pub fn estimate_noise_vector<T: Scalar>(b: &[T], guessed_level: T, seed: u64) -> Vec<T> {
    if guessed_level == T::zero() {
        return vec![T::zero(); b.len()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<T> = (0..b.len())
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            tf::<T>(v)
        })
        .collect();
    let norm_b = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    let norm_e = e.iter().map(|&x| x * x).sum::<T>().sqrt();
    let scale = guessed_level * norm_b / norm_e;
    e.into_iter().map(|x| x * scale).collect()
}
