//! Exhaustive restricted-isometry constants for small matrices.
//!
//! `δ_k` is the largest deviation of an eigenvalue of `U_TᵀU_T` from 1 over
//! all supports `|T| = k`; `θ_{s,s}` is the largest spectral norm of
//! `U_TᵀU_{T'}` over disjoint supports of size `s`. Both are computed by
//! brute-force enumeration and are only meant for certifying tiny instances
//! (`d` up to ~30, `s` up to 3). Enumeration is capped; the cap error names
//! the offending `C(d, k)`.
//!
//! Eigenvalues come from nalgebra's `SymmetricEigen` (Householder
//! tridiagonalization followed by implicit symmetric QR). Supports are split
//! across rayon workers by their smallest index; the reduction is a `max`, so
//! serial and parallel runs return bit-identical results.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{fmt_g17, KeyValues};
use crate::linalg::{DenseMatrix, DenseVector};

/// Default upper bound on the number of supports (or support pairs) visited.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `f` on every increasing `k`-subset of `pool` whose first element is
/// `pool[first]`.
fn for_each_combination_from(
    pool: &[usize],
    first: usize,
    k: usize,
    f: &mut impl FnMut(&[usize]),
) {
    let mut idx: Vec<usize> = (first..first + k).collect();
    if k == 0 || idx[k - 1] >= pool.len() {
        return;
    }
    let mut buf: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        f(&buf);
        // advance positions 1..k, keeping position 0 fixed
        let mut pos = k;
        loop {
            if pos <= 1 {
                return;
            }
            pos -= 1;
            if idx[pos] < pool.len() - (k - pos) {
                break;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in pos..k {
            buf[j] = pool[idx[j]];
        }
    }
}

fn for_each_combination(pool: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
    for first in 0..pool.len() {
        for_each_combination_from(pool, first, k, f);
    }
}

fn sub_block(gram: &[f64], d: usize, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| gram[rows[a] * d + cols[b]])
}

fn eigen_range(m: DMatrix<f64>) -> (f64, f64) {
    let ev = SymmetricEigen::new(m).eigenvalues;
    ev.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn check_cap(d: usize, k: usize, count: u128, cap: u128) -> Result<()> {
    if count > cap {
        return Err(Error::EnumerationCap { d, k, count, cap });
    }
    Ok(())
}

/// Smallest and largest eigenvalue of `U_TᵀU_T` over all `|T| = k`.
pub fn restricted_eigen_range(u: &DenseMatrix, k: usize, cap: u128) -> Result<(f64, f64)> {
    let d = u.cols();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "support size must lie in [1, {d}], got {k}"
        )));
    }
    check_cap(d, k, binomial(d, k), cap)?;
    let gram = u.gram();
    let pool: Vec<usize> = (0..d).collect();
    let (lo, hi) = (0..d)
        .into_par_iter()
        .map(|first| {
            let mut range = (f64::INFINITY, f64::NEG_INFINITY);
            for_each_combination_from(&pool, first, k, &mut |t| {
                let (a, b) = if k == 1 {
                    let g = gram[t[0] * d + t[0]];
                    (g, g)
                } else {
                    eigen_range(sub_block(&gram, d, t, t))
                };
                range = (range.0.min(a), range.1.max(b));
            });
            range
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |x, y| (x.0.min(y.0), x.1.max(y.1)),
        );
    Ok((lo, hi))
}

/// Exact `δ_k` by enumeration of all `C(d, k)` supports.
pub fn delta_exhaustive(u: &DenseMatrix, k: usize) -> Result<f64> {
    delta_exhaustive_capped(u, k, DEFAULT_ENUMERATION_CAP)
}

pub fn delta_exhaustive_capped(u: &DenseMatrix, k: usize, cap: u128) -> Result<f64> {
    let (lo, hi) = restricted_eigen_range(u, k, cap)?;
    Ok((hi - 1.0).abs().max((1.0 - lo).abs()))
}

/// Exact `θ_{s,s}` by enumeration of disjoint support pairs of size `s`.
pub fn theta_exhaustive(u: &DenseMatrix, s: usize) -> Result<f64> {
    theta_exhaustive_capped(u, s, DEFAULT_ENUMERATION_CAP)
}

pub fn theta_exhaustive_capped(u: &DenseMatrix, s: usize, cap: u128) -> Result<f64> {
    let d = u.cols();
    if s == 0 || 2 * s > d {
        return Err(Error::InvalidParameter(format!(
            "theta needs 1 <= s and 2s <= d (d = {d}), got s = {s}"
        )));
    }
    check_cap(d, s, binomial(d, s) * binomial(d - s, s) / 2, cap)?;
    let gram = u.gram();
    let pool: Vec<usize> = (0..d).collect();
    let theta = (0..d)
        .into_par_iter()
        .map(|first| {
            let mut best: f64 = 0.0;
            for_each_combination_from(&pool, first, s, &mut |t| {
                // unordered pairs: the partner's smallest index exceeds t[0]
                let rest: Vec<usize> = (t[0] + 1..d).filter(|i| !t.contains(i)).collect();
                for_each_combination(&rest, s, &mut |t2| {
                    let norm = if s == 1 {
                        gram[t[0] * d + t2[0]].abs()
                    } else {
                        let m = sub_block(&gram, d, t, t2);
                        let mtm = m.transpose() * &m;
                        eigen_range(mtm).1.max(0.0).sqrt()
                    };
                    best = best.max(norm);
                });
            });
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(theta)
}

/// Exhaustively computed RIP constants at one sparsity level.
#[derive(Clone, Debug, PartialEq)]
pub struct RipConstants {
    /// `k ↦ δ_k`.
    pub delta: BTreeMap<usize, f64>,
    pub theta_ss: Option<f64>,
    /// Level at which `θ_{s,s}` was computed.
    pub s: usize,
}

impl RipConstants {
    /// `δ_1, …, δ_{3s}` and `θ_{s,s}` for `U`.
    pub fn compute(u: &DenseMatrix, s: usize) -> Result<Self> {
        if s == 0 || 3 * s > u.cols() {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= s and 3s <= d (d = {}), got s = {s}",
                u.cols()
            )));
        }
        let mut delta = BTreeMap::new();
        for k in 1..=3 * s {
            delta.insert(k, delta_exhaustive(u, k)?);
        }
        Ok(RipConstants {
            delta,
            theta_ss: Some(theta_exhaustive(u, s)?),
            s,
        })
    }

    pub fn delta(&self, k: usize) -> Result<f64> {
        self.delta
            .get(&k)
            .copied()
            .ok_or_else(|| Error::MissingConstant(format!("delta_{k}")))
    }

    pub fn theta(&self) -> Result<f64> {
        self.theta_ss
            .ok_or_else(|| Error::MissingConstant(format!("theta_{0}_{0}", self.s)))
    }

    /// `(δ_s + √2 θ_{s,s}) / √s`, the per-unit-error threshold of the
    /// noiseless homotopy schedule.
    pub fn threshold_coefficient(&self) -> Result<f64> {
        let s = self.s;
        Ok((self.delta(s)? + std::f64::consts::SQRT_2 * self.theta()?) / (s as f64).sqrt())
    }

    pub fn to_key_values(&self) -> Result<KeyValues> {
        let mut kv = KeyValues::new();
        kv.set("s", self.s);
        for (k, v) in &self.delta {
            kv.set(&format!("delta_{k}"), fmt_g17(*v));
        }
        if let Some(t) = self.theta_ss {
            kv.set("theta_ss", fmt_g17(t));
        }
        if let Ok((g, ok)) = gamma_condition(self, self.s) {
            kv.set("gamma", fmt_g17(g));
            kv.set("gamma_satisfied", ok);
        }
        Ok(kv)
    }

    pub fn from_key_values(path: &Path, kv: &KeyValues) -> Result<Self> {
        let num = |key: &str, v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::parse(path, 0, format!("bad number for {key:?}")))
        };
        let s = kv
            .get("s")
            .ok_or_else(|| Error::parse(path, 0, "missing key \"s\""))?
            .parse::<usize>()
            .map_err(|_| Error::parse(path, 0, "bad value for \"s\""))?;
        let mut delta = BTreeMap::new();
        let mut theta_ss = None;
        for (key, v) in kv.iter() {
            if let Some(k) = key.strip_prefix("delta_") {
                let k = k
                    .parse::<usize>()
                    .map_err(|_| Error::parse(path, 0, format!("bad key {key:?}")))?;
                delta.insert(k, num(key, v)?);
            } else if key == "theta_ss" {
                theta_ss = Some(num(key, v)?);
            }
        }
        Ok(RipConstants { delta, theta_ss, s })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(path, &KeyValues::read(path)?)
    }
}

/// `γ = δ_s + √2 θ_{s,s} + δ_{3s}` and whether `γ < 1`.
pub fn gamma_condition(c: &RipConstants, s: usize) -> Result<(f64, bool)> {
    if c.s != s {
        return Err(Error::MissingConstant(format!(
            "theta_{s}_{s} (constants were computed at s = {})",
            c.s
        )));
    }
    let gamma = c.delta(s)? + std::f64::consts::SQRT_2 * c.theta()? + c.delta(3 * s)?;
    Ok((gamma, gamma < 1.0))
}

/// Observed `‖Uᵀe‖_∞` against the sub-gaussian tail bound
/// `θ‖e‖₂ √((τ + ln d)/n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UteReport {
    pub actual: f64,
    pub bound: f64,
    pub within: bool,
}

pub fn ut_e_inf_bound_report(
    u: &DenseMatrix,
    e: &DenseVector,
    theta_const: f64,
    tau: f64,
) -> Result<UteReport> {
    if !(theta_const > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidParameter(
            "theta constant and tau must be positive".into(),
        ));
    }
    let actual = u.matvec_transpose(e)?.linf();
    let (n, d) = (u.rows() as f64, u.cols() as f64);
    let bound = theta_const * e.l2() * ((tau + d.ln()) / n).sqrt();
    Ok(UteReport {
        actual,
        bound,
        within: actual <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{gen_gaussian_matrix, gen_uniform_noise};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn binomials() {
        assert_eq!(binomial(30, 6), 593_775);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }

    #[test]
    fn combinations_enumerate_everything_once() {
        let pool: Vec<usize> = (0..7).collect();
        let mut seen = Vec::new();
        for_each_combination(&pool, 3, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 35);
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 35);
        assert!(seen.iter().all(|c| c.windows(2).all(|w| w[0] < w[1])));
    }

    #[test]
    fn identity_has_zero_constants() {
        let u = DenseMatrix::identity(8);
        for k in 1..=4 {
            assert_eq!(delta_exhaustive(&u, k).unwrap(), 0.0);
        }
        assert_eq!(theta_exhaustive(&u, 2).unwrap(), 0.0);
        let c = RipConstants::compute(&u, 2).unwrap();
        assert_eq!(gamma_condition(&c, 2).unwrap(), (0.0, true));
    }

    #[test]
    fn scaled_column_delta_one() {
        let u = DenseMatrix::identity(4)
            .scale_column(2, 2f64.sqrt())
            .unwrap();
        assert!((delta_exhaustive(&u, 1).unwrap() - 1.0).abs() < 1e-15);
        // scaling the whole matrix by c maps ‖u‖² = 2 to 2c² and 1 to c²
        let c = 0.8;
        let expect = ((2.0 * c * c) - 1.0f64).abs().max((1.0 - c * c).abs());
        let got = delta_exhaustive(&u.scale(c).unwrap(), 1).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn theta_of_two_columns_is_their_inner_product() {
        let u = DenseMatrix::from_rows(&[vec![1.0, 0.6], vec![0.0, 0.8]]).unwrap();
        assert!((theta_exhaustive(&u, 1).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_columns_have_zero_theta() {
        let s = 0.5f64.sqrt();
        let u = DenseMatrix::from_rows(&[
            vec![s, s, 0.0, 0.0],
            vec![s, -s, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(theta_exhaustive(&u, 2).unwrap() < 1e-15);
        assert!(delta_exhaustive(&u, 4).unwrap() < 1e-15);
    }

    /// Random unit directions give a lower bound on the exact constant.
    #[test]
    fn delta_dominates_random_direction_search() {
        let u = gen_gaussian_matrix(8, 12, 31).unwrap();
        let exact = delta_exhaustive(&u, 2).unwrap();
        let gram = u.gram();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut best: f64 = 0.0;
        let pool: Vec<usize> = (0..12).collect();
        let per_support = 100_000 / binomial(12, 2) as usize + 1;
        for_each_combination(&pool, 2, &mut |t| {
            for _ in 0..per_support {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let nrm = (a * a + b * b).sqrt();
                let (a, b) = (a / nrm, b / nrm);
                let q = a * a * gram[t[0] * 12 + t[0]]
                    + 2.0 * a * b * gram[t[0] * 12 + t[1]]
                    + b * b * gram[t[1] * 12 + t[1]];
                best = best.max((q - 1.0).abs());
            }
        });
        assert!(best <= exact + 1e-12);
        assert!(exact - best < 5e-2, "{exact} vs {best}");
    }

    #[test]
    fn theta_below_delta_2s_and_monotone() {
        for seed in 0..5 {
            let u = gen_gaussian_matrix(8, 12, seed).unwrap();
            let d: Vec<f64> = (1..=4).map(|k| delta_exhaustive(&u, k).unwrap()).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
            let t2 = theta_exhaustive(&u, 2).unwrap();
            assert!(t2 <= d[3] + 1e-12);
            let t1 = theta_exhaustive(&u, 1).unwrap();
            assert!(t1 <= d[1] + 1e-12);
        }
    }

    #[test]
    fn permutation_invariance() {
        let u = gen_gaussian_matrix(6, 9, 4).unwrap();
        let perm = [3, 8, 0, 5, 1, 7, 2, 6, 4];
        let p = u.permute_columns(&perm).unwrap();
        for k in 1..=3 {
            let a = delta_exhaustive(&u, k).unwrap();
            let b = delta_exhaustive(&p, k).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let u = gen_gaussian_matrix(4, 40, 1).unwrap();
        assert!(matches!(
            delta_exhaustive(&u, 10),
            Err(Error::EnumerationCap { .. })
        ));
        assert!(matches!(
            theta_exhaustive_capped(&u, 3, 1000),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn gamma_arithmetic() {
        let mk = |ds, th, d3| RipConstants {
            delta: BTreeMap::from([(1, ds), (3, d3)]),
            theta_ss: Some(th),
            s: 1,
        };
        let (g, ok) = gamma_condition(&mk(0.3, 0.2, 0.3), 1).unwrap();
        assert!((g - (0.6 + 0.2 * 2f64.sqrt())).abs() < 1e-15);
        assert!((g - 0.882_842_712_474_619).abs() < 1e-12);
        assert!(ok);
        let (g, ok) = gamma_condition(&mk(0.5, 0.3, 0.5), 1).unwrap();
        assert!((g - 1.424_264_068_711_928_5).abs() < 1e-12);
        assert!(!ok);
        let missing = RipConstants {
            delta: BTreeMap::from([(1, 0.1)]),
            theta_ss: Some(0.1),
            s: 1,
        };
        assert!(matches!(
            gamma_condition(&missing, 1),
            Err(Error::MissingConstant(_))
        ));
    }

    #[test]
    fn key_value_round_trip() {
        let u = gen_gaussian_matrix(6, 7, 9).unwrap();
        let c = RipConstants::compute(&u, 2).unwrap();
        let kv = c.to_key_values().unwrap();
        let back = RipConstants::from_key_values(Path::new("mem"), &kv).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn ute_bound_examples() {
        let u = DenseMatrix::identity(10);
        let r = ut_e_inf_bound_report(&u, &DenseVector::zeros(10), 1.0, 1.0).unwrap();
        assert_eq!(r.actual, 0.0);
        assert!(r.within);
        let r = ut_e_inf_bound_report(&u, &DenseVector::basis(10, 0), 1.0, 1.0).unwrap();
        assert_eq!(r.actual, 1.0);
        assert!((r.bound - ((1.0 + 10f64.ln()) / 10.0).sqrt()).abs() < 1e-15);
        assert!(!r.within);
    }

    #[test]
    fn ute_bound_holds_with_high_probability() {
        let (n, d) = (500, 2000);
        let hits = (0..100u64)
            .into_par_iter()
            .filter(|&t| {
                let u = gen_gaussian_matrix(n, d, 1000 + t).unwrap();
                let e = gen_uniform_noise(n, 0.1, 5000 + t).unwrap();
                ut_e_inf_bound_report(&u, &e, 2.0, 3.0).unwrap().within
            })
            .count();
        let need = 1.0 - 2.0 * (-3.0f64).exp() - 0.05;
        assert!(hits as f64 / 100.0 >= need, "{hits}");
    }
}
