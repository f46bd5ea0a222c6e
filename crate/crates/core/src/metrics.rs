//! Recovery errors, rate fitting, and per-step inequality checkers.

use crate::error::{Error, Result};
use crate::linalg::{hard_threshold_top_s, support, DenseMatrix, DenseVector};
use crate::rip::RipConstants;
use crate::solvers::IterateTrace;

/// Absolute slack for inequality checks on O(1)-scale quantities.
pub const CHECK_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryReport {
    /// `‖x̂ − x_*‖₂`.
    pub full_error: f64,
    /// `‖x̂ − x_*^s‖₂`.
    pub top_s_error: f64,
    /// `‖x̂^s − x_*^s‖₂`.
    pub top_s_projected_error: f64,
    /// `|S(x̂) \ S_*|` with `S_*` the support of `x_*^s`.
    pub support_excess: usize,
    pub nnz: usize,
    pub rate_estimate: Option<f64>,
}

fn same_len(op: &'static str, a: &DenseVector, b: &DenseVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op,
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn check_s(s: usize, d: usize) -> Result<()> {
    if s == 0 || s > d {
        return Err(Error::InvalidParameter(format!(
            "sparsity level must lie in [1, {d}], got {s}"
        )));
    }
    Ok(())
}

pub fn recovery_report(x_hat: &DenseVector, x_star: &DenseVector, s: usize) -> Result<RecoveryReport> {
    same_len("recovery_report", x_star, x_hat)?;
    check_s(s, x_star.len())?;
    let star_s = hard_threshold_top_s(x_star, s)?;
    let hat_s = hard_threshold_top_s(x_hat, s)?;
    let s_star = support(&star_s, 0.0);
    Ok(RecoveryReport {
        full_error: x_hat.distance(x_star)?,
        top_s_error: x_hat.distance(&star_s)?,
        top_s_projected_error: hat_s.distance(&star_s)?,
        support_excess: support(x_hat, 0.0).difference_size(&s_star),
        nnz: x_hat.nnz(),
        rate_estimate: None,
    })
}

/// Per-iteration contraction factor `exp(b)`, where `b` is the least-squares
/// slope of `ln(error_t)` against `t` over the entries above `floor`.
pub fn fit_rate(errors: &[f64], floor: f64) -> Result<f64> {
    let points: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > floor && e.is_finite())
        .map(|(t, e)| (t as f64, e.ln()))
        .collect();
    if points.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 5 errors above {floor}, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let tbar = points.iter().map(|p| p.0).sum::<f64>() / m;
    let lbar = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, l) in &points {
        num += (t - tbar) * (l - lbar);
        den += (t - tbar) * (t - tbar);
    }
    Ok((num / den).exp())
}

/// [`fit_rate`] over `‖x_t − x_ref‖₂` for every iterate a trace recorded.
pub fn fit_linear_rate(trace: &IterateTrace, x_ref: &DenseVector, floor: f64) -> Result<f64> {
    same_len("fit_linear_rate", x_ref, &trace.final_x)?;
    let errors = trace
        .records
        .iter()
        .map(|r| r.x.to_vector().distance(x_ref))
        .collect::<Result<Vec<_>>>()?;
    fit_rate(&errors, floor)
}

/// Outcome of one inequality check: whether it held and `rhs − lhs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub holds: bool,
    pub slack: f64,
}

/// Checks the per-step inequality
/// `‖x_{t+1} − x‖² ≤ λ_t√s‖x_{t+1} − x‖ + |(x_{t+1} − x)ᵀ(Uᵀ(Ux_t − y) − (x_t − x))|`
/// for an `s`-sparse reference `x`.
pub fn check_lemma_fund(
    u: &DenseMatrix,
    y: &DenseVector,
    x_t: &DenseVector,
    x_next: &DenseVector,
    lambda_t: f64,
    x_ref: &DenseVector,
    s: usize,
) -> Result<Check> {
    same_len("check_lemma_fund", x_ref, x_t)?;
    same_len("check_lemma_fund", x_ref, x_next)?;
    if x_ref.nnz() > s {
        return Err(Error::NotApplicable(format!(
            "reference has {} nonzeros, more than s = {s}",
            x_ref.nnz()
        )));
    }
    let diff = x_next.sub(x_ref)?;
    let dist = diff.l2();
    let grad = u.matvec_transpose(&u.matvec(x_t)?.sub(y)?)?;
    let inner = diff.dot(&grad.sub(&x_t.sub(x_ref)?)?)?;
    let lhs = dist * dist;
    let rhs = lambda_t * (s as f64).sqrt() * dist + inner.abs();
    Ok(Check {
        holds: lhs <= rhs + CHECK_SLACK,
        slack: rhs - lhs,
    })
}

/// `‖x^s − y‖₂ ≤ √3‖x − y‖₂` for `x, y` of length `2s` with `y` `s`-sparse.
pub fn check_top_s_lemma(x: &DenseVector, y_sparse: &DenseVector, s: usize) -> Result<bool> {
    same_len("check_top_s_lemma", x, y_sparse)?;
    if s == 0 || x.len() != 2 * s {
        return Err(Error::NotApplicable(format!(
            "vectors must have length 2s = {}, got {}",
            2 * s,
            x.len()
        )));
    }
    if y_sparse.nnz() > s {
        return Err(Error::NotApplicable(format!(
            "y has {} nonzeros, more than s = {s}",
            y_sparse.nnz()
        )));
    }
    let lhs = hard_threshold_top_s(x, s)?.distance(y_sparse)?;
    let rhs = 3f64.sqrt() * x.distance(y_sparse)?;
    Ok(lhs <= rhs + 1e-12)
}

/// Counts entries of `x̃ = x_t − UᵀU(x_t − x_*)` off `S_*` whose magnitude
/// exceeds `(δ_s + √2θ_{s,s})/√s · ‖x_t − x_*‖₂`; the bound says at most `s`.
pub fn check_prop1_count(
    u: &DenseMatrix,
    x_t: &DenseVector,
    x_star: &DenseVector,
    rip: &RipConstants,
    s: usize,
) -> Result<(usize, bool)> {
    same_len("check_prop1_count", x_star, x_t)?;
    if rip.s != s {
        return Err(Error::MissingConstant(format!(
            "RIP constants at s = {s} (have s = {})",
            rip.s
        )));
    }
    let s_star = support(x_star, 0.0);
    if s_star.len() > s {
        return Err(Error::NotApplicable(format!(
            "x_* has {} nonzeros, more than s = {s}",
            s_star.len()
        )));
    }
    let excess = support(x_t, 0.0).difference_size(&s_star);
    if excess > s {
        return Err(Error::NotApplicable(format!(
            "|S(x_t) \\ S_*| = {excess} exceeds s = {s}"
        )));
    }
    let diff = x_t.sub(x_star)?;
    let tilde = x_t.sub(&u.matvec_transpose(&u.matvec(&diff)?)?)?;
    let threshold = rip.threshold_coefficient()? * diff.l2();
    let count = tilde
        .iter()
        .enumerate()
        .filter(|(i, v)| !s_star.contains(*i) && v.abs() > threshold)
        .count();
    Ok((count, count <= s))
}

/// Error envelope `max(Λ/η, γᵀΔ₁)` for the geometric-threshold schedule.
pub fn hpm2_envelope(lambda_cap: f64, eta: f64, gamma: f64, iterations: usize, delta1: f64) -> f64 {
    (lambda_cap / eta).max(gamma.powi(iterations as i32) * delta1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::top_s_indices;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn report_of_exact_match_is_zero() {
        let x = v(&[0.0, 3.0, -1.0, 0.0]);
        let r = recovery_report(&x, &x, 2).unwrap();
        assert_eq!(r.full_error, 0.0);
        assert_eq!(r.top_s_error, 0.0);
        assert_eq!(r.top_s_projected_error, 0.0);
        assert_eq!(r.support_excess, 0);
        assert_eq!(r.nnz, 2);
    }

    #[test]
    fn report_of_zero_estimate() {
        let x = v(&[0.0, 3.0, -4.0, 0.0]);
        let r = recovery_report(&DenseVector::zeros(4), &x, 2).unwrap();
        assert_eq!(r.full_error, 5.0);
        assert_eq!(r.support_excess, 0);
        assert!(recovery_report(&DenseVector::zeros(3), &x, 2).is_err());
    }

    #[test]
    fn report_matches_recomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let d = rng.random_range(3..12);
            let s = rng.random_range(1..=d);
            let star: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let hat: Vec<f64> = (0..d)
                .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            let keep = |x: &[f64]| {
                let idx = top_s_indices(x, s);
                (0..d)
                    .map(|i| if idx.contains(&i) { x[i] } else { 0.0 })
                    .collect::<Vec<_>>()
            };
            let dist = |a: &[f64], b: &[f64]| {
                a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
            };
            let star_s = keep(&star);
            let hat_s = keep(&hat);
            let excess = (0..d).filter(|&i| hat[i] != 0.0 && star_s[i] == 0.0).count();
            let r = recovery_report(&v(&hat), &v(&star), s).unwrap();
            assert!((r.full_error - dist(&hat, &star)).abs() < 1e-14);
            assert!((r.top_s_error - dist(&hat, &star_s)).abs() < 1e-14);
            assert!((r.top_s_projected_error - dist(&hat_s, &star_s)).abs() < 1e-14);
            assert_eq!(r.support_excess, excess);
            assert_eq!(r.nnz, hat.iter().filter(|x| **x != 0.0).count());
        }
    }

    #[test]
    fn rate_of_geometric_sequence() {
        let errors: Vec<f64> = (0..30).map(|t| 0.5f64.powi(t)).collect();
        assert!((fit_rate(&errors, 0.0).unwrap() - 0.5).abs() < 1e-10);
        assert!((fit_rate(&[2.0; 8], 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(fit_rate(&[1.0, 0.5, 0.25, 0.0, 0.0], 0.0).is_err());
        // floor drops the tail
        let mut with_tail = errors.clone();
        with_tail.extend([1e-20; 10]);
        assert!((fit_rate(&with_tail, 1e-15).unwrap() - 0.5).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn rate_is_scale_invariant(
            errors in prop::collection::vec(1e-6f64..10.0, 5..40),
            c in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = errors.iter().map(|e| e * c).collect();
            let a = fit_rate(&errors, 0.0).unwrap();
            let b = fit_rate(&scaled, 0.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn report_of_self_is_zero(x in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let s = x.len().div_ceil(2);
            let xv = v(&x);
            let r = recovery_report(&xv, &xv, s).unwrap();
            prop_assert_eq!(r.full_error, 0.0);
            prop_assert_eq!(r.top_s_projected_error, 0.0);
        }

        #[test]
        fn projected_error_within_sqrt3(
            star in prop::collection::vec(-1.0f64..1.0, 8),
            hat_vals in prop::collection::vec(-1.0f64..1.0, 8),
            s in 1usize..4,
        ) {
            let star_s = hard_threshold_top_s(&v(&star), s).unwrap();
            // x̂ − x_*^s confined to 2s coordinates
            let keep = top_s_indices(&hat_vals, s);
            let sup = support(&star_s, 0.0);
            let hat: Vec<f64> = (0..8)
                .map(|i| if keep.contains(&i) || sup.contains(i) { hat_vals[i] } else { 0.0 })
                .collect();
            let r = recovery_report(&v(&hat), &v(&star), s).unwrap();
            prop_assert!(r.top_s_projected_error <= 3f64.sqrt() * r.top_s_error + 1e-12);
        }
    }

    #[test]
    fn lemma_trivial_when_next_equals_reference() {
        let u = DenseMatrix::identity(3);
        let x_ref = v(&[1.0, 0.0, 0.0]);
        let c = check_lemma_fund(&u, &x_ref, &DenseVector::zeros(3), &x_ref, 0.1, &x_ref, 1)
            .unwrap();
        assert!(c.holds);
        assert!(c.slack >= 0.0);
    }

    #[test]
    fn lemma_detects_constructed_violation() {
        // With U = I and y = x_ref the gradient term is x_t − x_ref, so the
        // inner product vanishes and only λ√s‖x_{t+1} − x‖ remains on the right.
        let u = DenseMatrix::identity(2);
        let x_ref = v(&[1.0, 0.0]);
        let x_t = v(&[0.3, -0.2]);
        let x_next = v(&[1.0, 5.0]);
        let c = check_lemma_fund(&u, &x_ref, &x_t, &x_next, 0.1, &x_ref, 1).unwrap();
        assert!(!c.holds);
        assert!((c.slack - (0.1 * 5.0 - 25.0)).abs() < 1e-12);
        assert!(matches!(
            check_lemma_fund(&u, &x_ref, &x_t, &x_next, 0.1, &v(&[1.0, 1.0]), 1),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn top_s_lemma_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..2000 {
            let s = rng.random_range(1..=5);
            let x: Vec<f64> = (0..2 * s).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; 2 * s];
            for i in rand::seq::index::sample(&mut rng, 2 * s, s) {
                y[i] = rng.random_range(-1.0..1.0);
            }
            assert!(check_top_s_lemma(&v(&x), &v(&y), s).unwrap());
        }
        let x = v(&[1.0, 0.0, 0.0, 2.0]);
        assert!(check_top_s_lemma(&x, &x.clone(), 2).unwrap());
        assert!(check_top_s_lemma(&x, &v(&[1.0, 1.0, 1.0, 0.0]), 2).is_err());
        assert!(check_top_s_lemma(&x, &v(&[0.0; 4]), 1).is_err());
    }

    #[test]
    fn prop1_identity_counts_zero() {
        let u = DenseMatrix::identity(6);
        let rip = RipConstants::compute(&u, 2).unwrap();
        let x_star = v(&[0.0, 1.0, 0.0, -2.0, 0.0, 0.0]);
        let x_t = v(&[0.5, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(check_prop1_count(&u, &x_t, &x_star, &rip, 2).unwrap(), (0, true));
        assert_eq!(check_prop1_count(&u, &x_star, &x_star, &rip, 2).unwrap(), (0, true));
        let bad = v(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            check_prop1_count(&u, &bad, &x_star, &rip, 2),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn envelope_takes_the_larger_term() {
        assert_eq!(hpm2_envelope(0.1, 0.2, 0.5, 2, 1.0), 0.5);
        assert_eq!(hpm2_envelope(0.0, 0.2, 0.5, 3, 1.0), 0.125);
    }
}
