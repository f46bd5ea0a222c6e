//! Homotopy proximal mapping (HPM) solvers and the ISTA, IHT and PGH
//! baselines.
//!
//! Every HPM variant and ISTA share one primitive, [`prox_gradient_step`]:
//! a gradient step on `½‖Ux − y‖²` followed by soft-thresholding. The
//! variants differ only in how the threshold sequence `λ_t` is scheduled:
//!
//! | algorithm            | `λ_t`                                   | `Δ_{t+1}`                         |
//! |----------------------|-----------------------------------------|-----------------------------------|
//! | oracle, noiseless    | `(δ_s + √2θ_{s,s})/√s · Δ_t`            | `γΔ_t`                            |
//! | oracle, noisy        | same `+ ‖Uᵀe‖_∞`                         | `γΔ_t + (1+√2)√s‖Uᵀe‖_∞`          |
//! | HPM1                 | `(Λ + ηΔ_t)/√s`                          | `(1+√2)ηΔ_t + (1+√2)Λ`            |
//! | HPM2                 | `λ_1 = 2ηΔ_1/√s`, `λ_{t+1} = 2(1+√2)η λ_t` | —                              |
//!
//! HPM2 stops as soon as an update would carry more than `2s` nonzeros and
//! returns the iterate before that update.
//!
//! Runs are single-threaded and deterministic: matrix-vector products
//! accumulate in index order.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{
    hard_threshold_top_s, soft_threshold, soft_threshold_scalar, DenseMatrix, DenseVector,
    SupportSet,
};
use crate::problem::Observation;
use crate::rip::{gamma_condition, RipConstants};

/// Smallest threshold handed to soft-thresholding; schedules that reach zero
/// are clamped here.
pub const LAMBDA_FLOOR: f64 = 1e-15;

/// Power-iteration budget for estimating `λ_max(UᵀU)`.
pub const POWER_ITERATIONS: usize = 50;
pub const POWER_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    HpmOracleNoiseless,
    HpmOracleNoisy,
    Hpm1,
    Hpm2,
    Ista,
    Iht,
    Pgh,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::HpmOracleNoiseless,
        Algorithm::HpmOracleNoisy,
        Algorithm::Hpm1,
        Algorithm::Hpm2,
        Algorithm::Ista,
        Algorithm::Iht,
        Algorithm::Pgh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HpmOracleNoiseless => "hpm-oracle",
            Algorithm::HpmOracleNoisy => "hpm-oracle-noisy",
            Algorithm::Hpm1 => "hpm1",
            Algorithm::Hpm2 => "hpm2",
            Algorithm::Ista => "ista",
            Algorithm::Iht => "iht",
            Algorithm::Pgh => "pgh",
        }
    }

    /// Whether the algorithm belongs to the HPM family (soft-thresholding
    /// with a homotopy schedule and unit step).
    pub fn is_hpm(self) -> bool {
        matches!(
            self,
            Algorithm::HpmOracleNoiseless
                | Algorithm::HpmOracleNoisy
                | Algorithm::Hpm1
                | Algorithm::Hpm2
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Algorithm choice plus every tunable.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Target sparsity `s`.
    pub s: usize,
    /// Contraction parameter `η` of HPM1/HPM2.
    pub eta: f64,
    /// Initial error bound `Δ_1`.
    pub delta1: f64,
    /// HPM1 noise/approximation level `Λ`.
    pub lambda_cap: f64,
    /// Overrides HPM2's `λ_1 = 2ηΔ_1/√s` when set.
    pub hpm2_lambda1: Option<f64>,
    pub rip: Option<RipConstants>,
    /// `‖Uᵀe‖_∞`, used by the noisy oracle schedule.
    pub ut_e_inf: Option<f64>,
    pub max_iters: usize,
    pub ista_lambda: f64,
    /// ISTA/PGH step; defaults to `1/λ_max(UᵀU)`.
    pub ista_step: Option<f64>,
    /// IHT step is `1/iht_gamma`.
    pub iht_gamma: f64,
    pub pgh_lambda_target: f64,
    pub pgh_dec_factor: f64,
    pub pgh_inner_tol_factor: f64,
    /// Stop once `‖x_{t+1} − x_t‖₂` falls to this level.
    pub error_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Hpm2,
            s: 1,
            eta: 0.15,
            delta1: 1.0,
            lambda_cap: 0.0,
            hpm2_lambda1: None,
            rip: None,
            ut_e_inf: None,
            max_iters: 200,
            ista_lambda: 0.01,
            ista_step: None,
            iht_gamma: 1.0,
            pgh_lambda_target: 1.0,
            pgh_dec_factor: 0.7,
            pgh_inner_tol_factor: 0.2,
            error_floor: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, s: usize) -> Self {
        SolverConfig {
            algorithm,
            s,
            ..Default::default()
        }
    }

    /// Contraction factor `γ` implied by the configuration, where one exists.
    pub fn gamma(&self) -> Result<f64> {
        match self.algorithm {
            Algorithm::HpmOracleNoiseless | Algorithm::HpmOracleNoisy => {
                let rip = self
                    .rip
                    .as_ref()
                    .ok_or_else(|| Error::MissingConstant("RIP constants".into()))?;
                Ok(gamma_condition(rip, self.s)?.0)
            }
            Algorithm::Hpm1 => Ok((1.0 + SQRT_2) * self.eta),
            Algorithm::Hpm2 => Ok(2.0 * (1.0 + SQRT_2) * self.eta),
            other => Err(Error::InvalidParameter(format!(
                "{other} has no contraction factor"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::InvalidParameter("s must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.error_floor >= 0.0) {
            return Err(Error::InvalidParameter("error_floor must be nonnegative".into()));
        }
        match self.algorithm {
            Algorithm::HpmOracleNoiseless | Algorithm::HpmOracleNoisy => {
                let gamma = self.gamma()?;
                if gamma >= 1.0 {
                    return Err(Error::Contract(format!(
                        "RIP condition fails: gamma = {gamma} >= 1"
                    )));
                }
                if self.algorithm == Algorithm::HpmOracleNoisy {
                    let v = self
                        .ut_e_inf
                        .ok_or_else(|| Error::MissingConstant("‖Uᵀe‖_∞".into()))?;
                    if !(v >= 0.0) {
                        return Err(Error::InvalidParameter("‖Uᵀe‖_∞ must be nonnegative".into()));
                    }
                }
                positive("delta1", self.delta1)?;
            }
            Algorithm::Hpm1 => {
                positive("eta", self.eta)?;
                if (1.0 + SQRT_2) * self.eta >= 1.0 {
                    return Err(Error::Contract(format!(
                        "HPM1 needs eta < sqrt(2) - 1, got {}",
                        self.eta
                    )));
                }
                if !(self.lambda_cap >= 0.0) {
                    return Err(Error::InvalidParameter("lambda_cap must be nonnegative".into()));
                }
                positive("delta1", self.delta1)?;
            }
            Algorithm::Hpm2 => {
                positive("eta", self.eta)?;
                if 2.0 * (1.0 + SQRT_2) * self.eta >= 1.0 {
                    return Err(Error::Contract(format!(
                        "HPM2 needs 2(1 + sqrt(2)) eta < 1, got eta = {}",
                        self.eta
                    )));
                }
                match self.hpm2_lambda1 {
                    Some(l) => positive("hpm2_lambda1", l)?,
                    None => positive("delta1", self.delta1)?,
                }
            }
            Algorithm::Ista => {
                positive("ista_lambda", self.ista_lambda)?;
                if let Some(step) = self.ista_step {
                    positive("ista_step", step)?;
                }
            }
            Algorithm::Iht => positive("iht_gamma", self.iht_gamma)?,
            Algorithm::Pgh => {
                positive("pgh_lambda_target", self.pgh_lambda_target)?;
                positive("pgh_inner_tol_factor", self.pgh_inner_tol_factor)?;
                if !(self.pgh_dec_factor > 0.0 && self.pgh_dec_factor < 1.0) {
                    return Err(Error::InvalidParameter(
                        "pgh_dec_factor must lie in (0, 1)".into(),
                    ));
                }
                if let Some(step) = self.ista_step {
                    positive("ista_step", step)?;
                }
            }
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Iterate storage: sparse when the iterate is small, dense otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Sparse {
        dim: usize,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
    Dense(Vec<f64>),
}

impl Snapshot {
    pub fn capture(x: &DenseVector) -> Self {
        let nnz = x.nnz();
        if nnz * 4 > x.len() {
            return Snapshot::Dense(x.as_slice().to_vec());
        }
        let (indices, values) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Snapshot::Sparse {
            dim: x.len(),
            indices,
            values,
        }
    }

    pub fn to_vector(&self) -> DenseVector {
        match self {
            Snapshot::Dense(v) => DenseVector::new(v.clone()).expect("stored iterate is finite"),
            Snapshot::Sparse {
                dim,
                indices,
                values,
            } => {
                let mut v = vec![0.0; *dim];
                for (i, x) in indices.iter().zip(values) {
                    v[*i] = *x;
                }
                DenseVector::new(v).expect("stored iterate is finite")
            }
        }
    }

    pub fn support(&self) -> SupportSet {
        match self {
            Snapshot::Sparse { dim, indices, .. } => {
                SupportSet::new(indices.clone(), *dim).expect("indices are sorted and in range")
            }
            Snapshot::Dense(v) => SupportSet::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| **x != 0.0)
                    .map(|(i, _)| i)
                    .collect(),
                v.len(),
            )
            .expect("indices are sorted and in range"),
        }
    }
}

/// One solver update.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    /// 1-based update index; the record holds the iterate produced by it.
    pub t: usize,
    /// Threshold used by the update (`None` for IHT).
    pub lambda: Option<f64>,
    /// Error bound `Δ_t` entering the update, for schedules that carry one.
    pub delta: Option<f64>,
    pub nnz: usize,
    /// Proximal updates performed so far, this one included.
    pub prox_updates: usize,
    /// `½‖Ux − y‖² + λ‖x‖₁` at the produced iterate, where it applies.
    pub objective: Option<f64>,
    pub x: Snapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    MaxIters,
    /// HPM2 only: the next update exceeded `2s` nonzeros.
    SparsityStop,
    Plateau,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::MaxIters => "max-iters",
            Termination::SparsityStop => "sparsity-stop",
            Termination::Plateau => "plateau",
        })
    }
}

/// Full per-iteration history of a run. The starting point `x_1 = 0` is
/// implicit; `records[k]` holds `x_{k+2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateTrace {
    pub algorithm: Algorithm,
    pub records: Vec<IterRecord>,
    pub final_x: DenseVector,
    pub termination: Termination,
    /// Every proximal update computed, including a rejected HPM2 update.
    pub total_prox_updates: usize,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Iterates `x_1 = 0, x_2, …` in order.
    pub fn iterates(&self) -> impl Iterator<Item = DenseVector> + '_ {
        std::iter::once(DenseVector::zeros(self.final_x.len()))
            .chain(self.records.iter().map(|r| r.x.to_vector()))
    }
}

/// `Uᵀ(Ux − y)`.
pub fn gradient(obs: &Observation<'_>, x: &DenseVector) -> Result<DenseVector> {
    let residual = obs.u.matvec(x)?.sub(obs.y)?;
    obs.u.matvec_transpose(&residual)
}

/// `soft_threshold(x − Uᵀ(Ux − y), λ)`.
pub fn prox_gradient_step(
    u: &DenseMatrix,
    y: &DenseVector,
    x: &DenseVector,
    lambda: f64,
) -> Result<DenseVector> {
    prox_gradient_step_scaled(&Observation::new(u, y)?, x, lambda, 1.0)
}

/// `soft_threshold(x − step·Uᵀ(Ux − y), step·λ)`; `step = 1` is the HPM update.
pub fn prox_gradient_step_scaled(
    obs: &Observation<'_>,
    x: &DenseVector,
    lambda: f64,
    step: f64,
) -> Result<DenseVector> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "proximal threshold must be positive, got {lambda}"
        )));
    }
    let g = gradient(obs, x)?;
    let values: Vec<f64> = x
        .iter()
        .zip(g.iter())
        .map(|(xi, gi)| soft_threshold_scalar(xi - step * gi, step * lambda))
        .collect();
    DenseVector::new(values).map_err(diverged)
}

fn diverged(e: Error) -> Error {
    match e {
        Error::NonFinite(i) => Error::Contract(format!(
            "iterate diverged (non-finite entry at {i}); the step or schedule is unstable for this matrix"
        )),
        other => other,
    }
}

/// `½‖Ux − y‖₂² + λ‖x‖₁`.
pub fn bpdn_objective(obs: &Observation<'_>, x: &DenseVector, lambda: f64) -> Result<f64> {
    let r = obs.u.matvec(x)?.sub(obs.y)?;
    Ok(0.5 * r.dot(&r)? + lambda * x.norms().l1)
}

/// Largest eigenvalue of `UᵀU` by power iteration from the all-ones vector.
pub fn lipschitz_estimate(u: &DenseMatrix) -> Result<f64> {
    let d = u.cols();
    let mut v = DenseVector::new(vec![1.0 / (d as f64).sqrt(); d])?;
    let mut est = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = u.matvec_transpose(&u.matvec(&v)?)?;
        let norm = w.l2();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let prev = est;
        est = norm;
        v = w.scale(1.0 / norm)?;
        if (est - prev).abs() <= POWER_TOL * est {
            break;
        }
    }
    Ok(est)
}

fn step_size(u: &DenseMatrix, cfg: &SolverConfig) -> Result<f64> {
    match cfg.ista_step {
        Some(step) => Ok(step),
        None => {
            let l = lipschitz_estimate(u)?;
            if l == 0.0 {
                return Err(Error::InvalidParameter("measurement matrix is zero".into()));
            }
            Ok(1.0 / l)
        }
    }
}

fn plateaued(prev: &DenseVector, next: &DenseVector, floor: f64) -> Result<bool> {
    // A zero iterate under a decreasing threshold has not converged yet.
    Ok(next.nnz() > 0 && prev.distance(next)? <= floor)
}

fn record(
    t: usize,
    lambda: Option<f64>,
    delta: Option<f64>,
    prox_updates: usize,
    objective: Option<f64>,
    x: &DenseVector,
) -> IterRecord {
    IterRecord {
        t,
        lambda,
        delta,
        nnz: x.nnz(),
        prox_updates,
        objective,
        x: Snapshot::capture(x),
    }
}

fn truth_norm_top_s(obs: &Observation<'_>, s: usize) -> Result<Option<f64>> {
    match obs.truth {
        Some(t) => {
            let s = s.min(t.x_star.len());
            Ok(Some(hard_threshold_top_s(t.x_star, s)?.l2()))
        }
        None => Ok(None),
    }
}

/// Shared driver for schedules of the form `λ_t = f(Δ_t)`, `Δ_{t+1} = g(Δ_t)`.
fn run_delta_schedule(
    obs: &Observation<'_>,
    cfg: &SolverConfig,
    lambda_of: impl Fn(f64) -> f64,
    next_delta: impl Fn(f64) -> f64,
) -> Result<IterateTrace> {
    let d = obs.u.cols();
    let mut x = DenseVector::zeros(d);
    let mut delta = cfg.delta1;
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut termination = Termination::MaxIters;
    for t in 1..=cfg.max_iters {
        let lambda = lambda_of(delta).max(LAMBDA_FLOOR);
        let next = prox_gradient_step_scaled(obs, &x, lambda, 1.0)?;
        let objective = bpdn_objective(obs, &next, lambda)?;
        records.push(record(t, Some(lambda), Some(delta), t, Some(objective), &next));
        let stop = plateaued(&x, &next, cfg.error_floor)?;
        x = next;
        delta = next_delta(delta);
        if stop {
            termination = Termination::Plateau;
            break;
        }
    }
    let total = records.len();
    Ok(IterateTrace {
        algorithm: cfg.algorithm,
        records,
        final_x: x,
        termination,
        total_prox_updates: total,
    })
}

fn require(cfg: &SolverConfig, algorithm: Algorithm) -> Result<()> {
    if cfg.algorithm != algorithm {
        return Err(Error::InvalidParameter(format!(
            "config selects {}, not {algorithm}",
            cfg.algorithm
        )));
    }
    cfg.validate()
}

/// HPM with the RIP-based noiseless schedule:
/// `λ_t = (δ_s + √2θ_{s,s})/√s · Δ_t`, `Δ_{t+1} = γΔ_t`.
pub fn run_hpm_oracle_noiseless(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::HpmOracleNoiseless)?;
    let rip = cfg.rip.as_ref().expect("validated");
    let coef = rip.threshold_coefficient()?;
    let gamma = cfg.gamma()?;
    if let Some(t) = obs.truth {
        let need = t.x_star.l2();
        if cfg.delta1 < need {
            return Err(Error::Contract(format!(
                "delta1 = {} is below ‖x_*‖₂ = {need}",
                cfg.delta1
            )));
        }
    }
    run_delta_schedule(obs, cfg, |delta| coef * delta, |delta| gamma * delta)
}

/// HPM with the RIP-based noisy schedule:
/// `λ_t = (δ_s + √2θ_{s,s})/√s · Δ_t + ‖Uᵀe‖_∞`,
/// `Δ_{t+1} = γΔ_t + (1+√2)√s‖Uᵀe‖_∞`.
pub fn run_hpm_oracle_noisy(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::HpmOracleNoisy)?;
    let rip = cfg.rip.as_ref().expect("validated");
    let coef = rip.threshold_coefficient()?;
    let gamma = cfg.gamma()?;
    let ute = cfg.ut_e_inf.expect("validated");
    if let Some(t) = obs.truth {
        let need = t.x_star.l2();
        if cfg.delta1 < need {
            return Err(Error::Contract(format!(
                "delta1 = {} is below ‖x_*‖₂ = {need}",
                cfg.delta1
            )));
        }
    }
    let offset = (1.0 + SQRT_2) * (cfg.s as f64).sqrt() * ute;
    run_delta_schedule(
        obs,
        cfg,
        |delta| coef * delta + ute,
        |delta| gamma * delta + offset,
    )
}

/// HPM1: `λ_t = (Λ + ηΔ_t)/√s`, `Δ_{t+1} = (1+√2)ηΔ_t + (1+√2)Λ`.
pub fn run_hpm1(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::Hpm1)?;
    if let Some(norm) = truth_norm_top_s(obs, cfg.s)? {
        let need = norm.max(cfg.lambda_cap);
        if cfg.delta1 < need {
            return Err(Error::Contract(format!(
                "delta1 = {} is below max(‖x_*^s‖₂, Λ) = {need}",
                cfg.delta1
            )));
        }
    }
    let gamma = cfg.gamma()?;
    let cap = cfg.lambda_cap;
    let root_s = (cfg.s as f64).sqrt();
    let eta = cfg.eta;
    run_delta_schedule(
        obs,
        cfg,
        |delta| (cap + eta * delta) / root_s,
        |delta| gamma * delta + (1.0 + SQRT_2) * cap,
    )
}

/// HPM2: geometric threshold decay `λ_{t+1} = 2(1+√2)η λ_t`, stopping before
/// the first update with more than `2s` nonzeros.
pub fn run_hpm2(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::Hpm2)?;
    let gamma = cfg.gamma()?;
    let d = obs.u.cols();
    let mut lambda = match cfg.hpm2_lambda1 {
        Some(l) => l,
        None => 2.0 * cfg.eta * cfg.delta1 / (cfg.s as f64).sqrt(),
    };
    let mut x = DenseVector::zeros(d);
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut termination = Termination::MaxIters;
    let mut total = 0;
    for t in 1..=cfg.max_iters {
        let used = lambda.max(LAMBDA_FLOOR);
        let next = prox_gradient_step_scaled(obs, &x, used, 1.0)?;
        total += 1;
        lambda *= gamma;
        if next.nnz() > 2 * cfg.s {
            termination = Termination::SparsityStop;
            break;
        }
        let objective = bpdn_objective(obs, &next, used)?;
        records.push(record(t, Some(used), None, total, Some(objective), &next));
        let stop = plateaued(&x, &next, cfg.error_floor)?;
        x = next;
        if stop {
            termination = Termination::Plateau;
            break;
        }
    }
    Ok(IterateTrace {
        algorithm: Algorithm::Hpm2,
        records,
        final_x: x,
        termination,
        total_prox_updates: total,
    })
}

/// Fixed-λ proximal gradient on `½‖Ux − y‖² + λ‖x‖₁` with step `1/L`.
pub fn run_ista(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::Ista)?;
    let step = step_size(obs.u, cfg)?;
    let lambda = cfg.ista_lambda;
    let mut x = DenseVector::zeros(obs.u.cols());
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut termination = Termination::MaxIters;
    for t in 1..=cfg.max_iters {
        let next = prox_gradient_step_scaled(obs, &x, lambda, step)?;
        let objective = bpdn_objective(obs, &next, lambda)?;
        records.push(record(t, Some(lambda), None, t, Some(objective), &next));
        let stop = x.distance(&next)? <= cfg.error_floor;
        x = next;
        if stop {
            termination = Termination::Plateau;
            break;
        }
    }
    let total = records.len();
    Ok(IterateTrace {
        algorithm: Algorithm::Ista,
        records,
        final_x: x,
        termination,
        total_prox_updates: total,
    })
}

/// Iterative hard thresholding `x_{t+1} = H_s(x_t − (1/γ)Uᵀ(Ux_t − y))`.
pub fn run_iht(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::Iht)?;
    let d = obs.u.cols();
    let s = cfg.s.min(d);
    let step = 1.0 / cfg.iht_gamma;
    let mut x = DenseVector::zeros(d);
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut termination = Termination::MaxIters;
    for t in 1..=cfg.max_iters {
        let g = gradient(obs, &x)?;
        let moved = DenseVector::new(
            x.iter().zip(g.iter()).map(|(a, b)| a - step * b).collect(),
        )
        .map_err(diverged)?;
        let next = hard_threshold_top_s(&moved, s)?;
        records.push(record(t, None, None, t, None, &next));
        let stop = plateaued(&x, &next, cfg.error_floor)?;
        x = next;
        if stop {
            termination = Termination::Plateau;
            break;
        }
    }
    let total = records.len();
    Ok(IterateTrace {
        algorithm: Algorithm::Iht,
        records,
        final_x: x,
        termination,
        total_prox_updates: total,
    })
}

/// Proximal-gradient homotopy on `½‖Ux − y‖² + λ‖x‖₁`.
///
/// Stages start at `λ = max(‖Uᵀy‖_∞, λ_target)`. Within a stage, proximal
/// gradient steps (step `1/L`) run until `‖x_{k+1} − x_k‖_∞ ≤ tol_factor·λ`;
/// then `λ ← max(λ_target, dec_factor·λ)`. The run ends once the stage at
/// `λ_target` meets its criterion, or after `max_iters` proximal updates.
pub fn run_pgh(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    require(cfg, Algorithm::Pgh)?;
    let step = step_size(obs.u, cfg)?;
    let target = cfg.pgh_lambda_target;
    let mut lambda = obs.u.matvec_transpose(obs.y)?.linf().max(target);
    let mut x = DenseVector::zeros(obs.u.cols());
    let mut records = Vec::with_capacity(cfg.max_iters);
    let mut updates = 0;
    let mut termination = Termination::MaxIters;
    'stages: loop {
        loop {
            if updates == cfg.max_iters {
                break 'stages;
            }
            let next = prox_gradient_step_scaled(obs, &x, lambda, step)?;
            updates += 1;
            let objective = bpdn_objective(obs, &next, lambda)?;
            records.push(record(updates, Some(lambda), None, updates, Some(objective), &next));
            let change = x.sub(&next)?.linf();
            x = next;
            if change <= cfg.pgh_inner_tol_factor * lambda {
                break;
            }
        }
        if lambda <= target {
            termination = Termination::Plateau;
            break;
        }
        lambda = target.max(cfg.pgh_dec_factor * lambda);
    }
    Ok(IterateTrace {
        algorithm: Algorithm::Pgh,
        records,
        final_x: x,
        termination,
        total_prox_updates: updates,
    })
}

/// Dispatches on `cfg.algorithm`.
pub fn run(obs: &Observation<'_>, cfg: &SolverConfig) -> Result<IterateTrace> {
    match cfg.algorithm {
        Algorithm::HpmOracleNoiseless => run_hpm_oracle_noiseless(obs, cfg),
        Algorithm::HpmOracleNoisy => run_hpm_oracle_noisy(obs, cfg),
        Algorithm::Hpm1 => run_hpm1(obs, cfg),
        Algorithm::Hpm2 => run_hpm2(obs, cfg),
        Algorithm::Ista => run_ista(obs, cfg),
        Algorithm::Iht => run_iht(obs, cfg),
        Algorithm::Pgh => run_pgh(obs, cfg),
    }
}

/// Thresholds applied by an HPM-family run, step by step. Used to re-verify
/// the fundamental inequality after the fact.
pub fn hpm_steps(trace: &IterateTrace) -> Vec<(DenseVector, DenseVector, f64)> {
    let xs: Vec<DenseVector> = trace.iterates().collect();
    trace
        .records
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.lambda.map(|l| (xs[k].clone(), xs[k + 1].clone(), l)))
        .collect()
}

/// Soft-threshold wrapper for callers outside the solver loop.
pub fn shrink(v: &DenseVector, lambda: f64) -> Result<DenseVector> {
    soft_threshold(v, lambda)
}
