//! Seeded generation of measurement matrices, target signals, noise and
//! observations `y = U x_* + e`.
//!
//! Every generator draws from a ChaCha8 stream (`rand_chacha::ChaCha8Rng`)
//! seeded with a 64-bit value. Normal variates use the ziggurat sampler of
//! `rand_distr::StandardNormal`. Output is bitwise reproducible for a fixed
//! build; no cross-language bit identity is attempted.
//!
//! Independent streams are derived from a master seed with
//! [`derive_seed`]: `master ^ splitmix64(index)`.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};

/// One step of the splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ splitmix64(index)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n×d` matrix with i.i.d. `N(0, 1/n)` entries.
pub fn gen_gaussian_matrix(n: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    check_shape(n, d)?;
    let mut r = rng(seed);
    let sd = 1.0 / (n as f64).sqrt();
    let values = (0..n * d)
        .map(|_| sd * r.sample::<f64, _>(StandardNormal))
        .collect();
    DenseMatrix::new(n, d, values)
}

/// `n×d` matrix with i.i.d. entries uniform on `[−1, 1]` scaled by `√(3/n)`,
/// so each entry has variance `1/n`.
pub fn gen_uniform_matrix(n: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    check_shape(n, d)?;
    let mut r = rng(seed);
    let scale = (3.0 / n as f64).sqrt();
    let values = (0..n * d)
        .map(|_| scale * r.random_range(-1.0..=1.0))
        .collect();
    DenseMatrix::new(n, d, values)
}

fn check_shape(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "matrix shape must be positive, got {n}x{d}"
        )));
    }
    Ok(())
}

/// Measurement ensemble used to draw `U`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Gaussian,
    Uniform,
}

impl MatrixKind {
    pub fn generate(self, n: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
        match self {
            MatrixKind::Gaussian => gen_gaussian_matrix(n, d, seed),
            MatrixKind::Uniform => gen_uniform_matrix(n, d, seed),
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Uniform => "uniform",
        })
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MatrixKind::Gaussian),
            "uniform" => Ok(MatrixKind::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown matrix kind {other:?}"))),
        }
    }
}

/// Shape of the target signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    /// `s` standard-normal nonzeros at uniformly chosen positions.
    ExactSparse { s: usize },
    /// `s` nonzeros uniform on `[−1, 1]` at uniformly chosen positions.
    UniformSparse { s: usize },
    /// `x_i = 1/i` (1-indexed).
    PowerLaw,
    /// `x_i = e^{−i}` (1-indexed).
    ExpDecay,
}

impl SignalKind {
    /// Whether the standard protocol for this kind rescales to unit ℓ2 norm.
    pub fn normalized_by_default(self) -> bool {
        matches!(self, SignalKind::ExactSparse { .. } | SignalKind::PowerLaw)
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::ExactSparse { s } => write!(f, "exact-sparse:{s}"),
            SignalKind::UniformSparse { s } => write!(f, "uniform-sparse:{s}"),
            SignalKind::PowerLaw => f.write_str("power-law"),
            SignalKind::ExpDecay => f.write_str("exp-decay"),
        }
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_s = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("bad sparsity in {s:?}")))
        };
        match s.split_once(':') {
            Some(("exact-sparse", v)) => Ok(SignalKind::ExactSparse { s: parse_s(v)? }),
            Some(("uniform-sparse", v)) => Ok(SignalKind::UniformSparse { s: parse_s(v)? }),
            None if s == "power-law" => Ok(SignalKind::PowerLaw),
            None if s == "exp-decay" => Ok(SignalKind::ExpDecay),
            _ => Err(Error::InvalidParameter(format!("unknown signal kind {s:?}"))),
        }
    }
}

/// A signal kind together with its normalization choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub normalize: bool,
}

impl From<SignalKind> for SignalSpec {
    fn from(kind: SignalKind) -> Self {
        SignalSpec {
            kind,
            normalize: kind.normalized_by_default(),
        }
    }
}

/// Draws a length-`d` target signal.
pub fn gen_signal(d: usize, spec: impl Into<SignalSpec>, seed: u64) -> Result<DenseVector> {
    let spec = spec.into();
    if d == 0 {
        return Err(Error::InvalidParameter("signal length must be positive".into()));
    }
    let mut r = rng(seed);
    let mut x = vec![0.0; d];
    match spec.kind {
        SignalKind::ExactSparse { s } | SignalKind::UniformSparse { s } => {
            if s == 0 || s > d {
                return Err(Error::InvalidParameter(format!(
                    "signal sparsity must lie in [1, {d}], got {s}"
                )));
            }
            // partial Fisher-Yates
            let positions = sample(&mut r, d, s);
            for i in positions.iter() {
                x[i] = match spec.kind {
                    SignalKind::ExactSparse { .. } => loop {
                        let z: f64 = r.sample(StandardNormal);
                        if z != 0.0 {
                            break z;
                        }
                    },
                    _ => loop {
                        let z: f64 = r.random_range(-1.0..=1.0);
                        if z != 0.0 {
                            break z;
                        }
                    },
                };
            }
        }
        SignalKind::PowerLaw => {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = 1.0 / (i + 1) as f64;
            }
        }
        SignalKind::ExpDecay => {
            // e^{-i} underflows to 0 past i ≈ 745
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = (-((i + 1) as f64)).exp();
            }
        }
    }
    if spec.normalize {
        let norm = crate::linalg::l2(&x);
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    }
    DenseVector::new(x)
}

/// I.i.d. noise uniform on `[−σ, σ]`; `σ = 0` gives the exact zero vector.
pub fn gen_uniform_noise(n: usize, sigma: f64, seed: u64) -> Result<DenseVector> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise level must be finite and nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(DenseVector::zeros(n));
    }
    let mut r = rng(seed);
    DenseVector::new((0..n).map(|_| r.random_range(-sigma..=sigma)).collect())
}

/// Provenance recorded alongside an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMeta {
    pub matrix: String,
    pub signal: String,
    pub normalize: bool,
    pub sigma: f64,
    pub seed: u64,
}

/// A measurement problem `y = U x_* + e` with its ground truth.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub u: DenseMatrix,
    pub x_star: DenseVector,
    pub e: DenseVector,
    pub y: DenseVector,
    /// Intended sparsity of `x_*`.
    pub s_true: usize,
    pub meta: InstanceMeta,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn d(&self) -> usize {
        self.u.cols()
    }

    /// Observation with the ground truth attached.
    pub fn observation(&self) -> Observation<'_> {
        Observation {
            u: &self.u,
            y: &self.y,
            truth: Some(Truth {
                x_star: &self.x_star,
                e: &self.e,
            }),
        }
    }
}

/// `y = U x_* + e`.
pub fn assemble(
    u: DenseMatrix,
    x_star: DenseVector,
    e: DenseVector,
    s_true: usize,
    meta: InstanceMeta,
) -> Result<ProblemInstance> {
    if e.len() != u.rows() {
        return Err(Error::DimensionMismatch {
            op: "assemble (noise)",
            expected: u.rows(),
            found: e.len(),
        });
    }
    let y = u.matvec(&x_star)?.add(&e)?;
    Ok(ProblemInstance {
        u,
        x_star,
        e,
        y,
        s_true,
        meta,
    })
}

/// Full recipe for a synthetic instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub matrix: MatrixKind,
    pub signal: SignalSpec,
    pub sigma: f64,
}

impl InstanceSpec {
    /// Draws `U`, `x_*` and `e` from streams 0, 1 and 2 derived from `seed`.
    pub fn generate(&self, seed: u64) -> Result<ProblemInstance> {
        let u = self
            .matrix
            .generate(self.n, self.d, derive_seed(seed, 0))?;
        let x_star = gen_signal(self.d, self.signal, derive_seed(seed, 1))?;
        let e = gen_uniform_noise(self.n, self.sigma, derive_seed(seed, 2))?;
        let s_true = match self.signal.kind {
            SignalKind::ExactSparse { s } | SignalKind::UniformSparse { s } => s,
            _ => self.d,
        };
        assemble(
            u,
            x_star,
            e,
            s_true,
            InstanceMeta {
                matrix: self.matrix.to_string(),
                signal: self.signal.kind.to_string(),
                normalize: self.signal.normalize,
                sigma: self.sigma,
                seed,
            },
        )
    }
}

/// Ground truth attached to an observation when it is known.
#[derive(Clone, Copy, Debug)]
pub struct Truth<'a> {
    pub x_star: &'a DenseVector,
    pub e: &'a DenseVector,
}

/// What a solver sees: `U`, `y`, and optionally the ground truth used to
/// enforce preconditions that depend on `x_*`.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub u: &'a DenseMatrix,
    pub y: &'a DenseVector,
    pub truth: Option<Truth<'a>>,
}

impl<'a> Observation<'a> {
    pub fn new(u: &'a DenseMatrix, y: &'a DenseVector) -> Result<Self> {
        if y.len() != u.rows() {
            return Err(Error::DimensionMismatch {
                op: "Observation::new",
                expected: u.rows(),
                found: y.len(),
            });
        }
        Ok(Observation { u, y, truth: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            gen_gaussian_matrix(4, 4, 7).unwrap(),
            gen_gaussian_matrix(4, 4, 7).unwrap()
        );
        assert_ne!(
            gen_gaussian_matrix(4, 4, 7).unwrap(),
            gen_gaussian_matrix(4, 4, 8).unwrap()
        );
        assert_eq!(
            gen_uniform_matrix(3, 5, 1).unwrap(),
            gen_uniform_matrix(3, 5, 1).unwrap()
        );
        let spec = InstanceSpec {
            n: 10,
            d: 20,
            matrix: MatrixKind::Gaussian,
            signal: SignalKind::ExactSparse { s: 3 }.into(),
            sigma: 0.1,
        };
        let (a, b) = (spec.generate(9).unwrap(), spec.generate(9).unwrap());
        assert_eq!(a.u, b.u);
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.e, b.e);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn gaussian_moments() {
        let (n, d) = (400, 100);
        let u = gen_gaussian_matrix(n, d, 123).unwrap();
        let vals = u.as_slice();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sigma = 1.0 / (n as f64).sqrt();
        // standard error of the mean of n·d draws
        assert!(mean.abs() < 4.0 * sigma / ((n * d) as f64).sqrt());
        let avg_col_sq = (0..d)
            .map(|j| u.column(j).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / d as f64;
        assert!((0.9..=1.1).contains(&avg_col_sq), "{avg_col_sq}");
    }

    #[test]
    fn uniform_matrix_scaling_and_variance() {
        let (n, d) = (250, 400);
        let u = gen_uniform_matrix(n, d, 5).unwrap();
        let bound = (3.0 / n as f64).sqrt();
        assert!(u.as_slice().iter().all(|v| v.abs() <= bound));
        let m = u.as_slice().len() as f64;
        let mean = u.as_slice().iter().sum::<f64>() / m;
        let var = u.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let target = 1.0 / n as f64;
        assert!((var - target).abs() < 0.1 * target, "{var} vs {target}");
    }

    #[test]
    fn signal_shapes() {
        let x = gen_signal(100, SignalKind::ExactSparse { s: 5 }, 3).unwrap();
        assert_eq!(x.nnz(), 5);
        assert!((x.l2() - 1.0).abs() < 1e-12);

        let p = gen_signal(3, SignalKind::PowerLaw, 0).unwrap();
        let norm = (1.0f64 + 0.25 + 1.0 / 9.0).sqrt();
        let expect = [1.0 / norm, 0.5 / norm, 1.0 / 3.0 / norm];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.get(0) - 0.857_142_857_142_857_1).abs() < 1e-12);

        let e = gen_signal(2, SignalKind::ExpDecay, 0).unwrap();
        assert_eq!(e.as_slice(), &[(-1.0f64).exp(), (-2.0f64).exp()]);

        let u = gen_signal(50, SignalKind::UniformSparse { s: 7 }, 4).unwrap();
        assert_eq!(u.nnz(), 7);
        assert!(u.linf() <= 1.0);

        assert!(gen_signal(4, SignalKind::ExactSparse { s: 5 }, 0).is_err());
    }

    #[test]
    fn noise_properties() {
        assert_eq!(gen_uniform_noise(5, 0.0, 1).unwrap(), DenseVector::zeros(5));
        let n = 4000;
        let sigma = 0.3;
        let e = gen_uniform_noise(n, sigma, 17).unwrap();
        assert!(e.iter().all(|v| v.abs() <= sigma));
        let mean = e.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * sigma / (12.0 * n as f64).sqrt());
        assert!(gen_uniform_noise(3, -1.0, 0).is_err());
    }

    #[test]
    fn assemble_recomputes_observation() {
        let meta = InstanceMeta {
            matrix: "identity".into(),
            signal: "custom".into(),
            normalize: false,
            sigma: 0.0,
            seed: 0,
        };
        let x = DenseVector::new(vec![1.0, 0.0, -2.0]).unwrap();
        let inst = assemble(
            DenseMatrix::identity(3),
            x.clone(),
            DenseVector::zeros(3),
            2,
            meta.clone(),
        )
        .unwrap();
        assert_eq!(inst.y, x);

        let spec = InstanceSpec {
            n: 6,
            d: 9,
            matrix: MatrixKind::Uniform,
            signal: SignalKind::ExactSparse { s: 2 }.into(),
            sigma: 0.05,
        };
        let inst = spec.generate(4).unwrap();
        let r = inst.y.sub(&inst.u.matvec(&inst.x_star).unwrap()).unwrap();
        assert!(r.distance(&inst.e).unwrap() < 1e-15);

        assert!(assemble(
            DenseMatrix::identity(3),
            x,
            DenseVector::zeros(2),
            2,
            meta
        )
        .is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(derive_seed(42, 3), 42 ^ splitmix64(3));
    }

    #[test]
    fn kind_round_trip() {
        for k in [
            SignalKind::ExactSparse { s: 4 },
            SignalKind::UniformSparse { s: 9 },
            SignalKind::PowerLaw,
            SignalKind::ExpDecay,
        ] {
            assert_eq!(k.to_string().parse::<SignalKind>().unwrap(), k);
        }
        assert_eq!("uniform".parse::<MatrixKind>().unwrap(), MatrixKind::Uniform);
    }
}
