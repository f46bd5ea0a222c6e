//! Searches for a small measurement matrix with `δ_s + √2θ_{s,s} + δ_{3s} < 1`.
//!
//! Random ensembles at `n = 25, d = 30, s = 2` sit near `γ ≈ 2–5`, so tiny
//! certified instances have to be designed. Starting from a random matrix
//! with orthonormal rows, Adam descends a log-sum-exp smoothing of `γ`
//! restricted to the currently worst supports; the active supports are
//! refreshed after every full exhaustive evaluation.
//!
//! ```text
//! cargo run --release -p hpm-core --example design_frame -- <seed> <out.csv>
//! ```

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use hpm_core::io::write_matrix_csv;
use hpm_core::rip::{gamma_condition, RipConstants};
use hpm_core::DenseMatrix;

const N: usize = 25;
const D: usize = 30;
const S: usize = 2;
const OUTER: usize = 30;
const INNER: usize = 40;
const ACTIVE: usize = 3000;
const BETA: f64 = 300.0;
const LR: f64 = 2e-3;
const LR_DECAY: f64 = 0.85;

fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + d - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn block(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])])
}

struct Candidates {
    large: Vec<Vec<usize>>,
    small: Vec<Vec<usize>>,
    pairs: Vec<(usize, usize)>,
}

impl Candidates {
    fn new() -> Self {
        let small = combinations(D, S);
        let mut pairs = Vec::new();
        for a in 0..small.len() {
            for b in a + 1..small.len() {
                if small[a].iter().all(|i| !small[b].contains(i)) {
                    pairs.push((a, b));
                }
            }
        }
        Candidates {
            large: combinations(D, 3 * S),
            small,
            pairs,
        }
    }
}

fn extreme_eigs(m: DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m).eigenvalues;
    (e.min(), e.max())
}

fn top_singular(m: &DMatrix<f64>) -> f64 {
    extreme_eigs(m.transpose() * m).1.max(0.0).sqrt()
}

struct Evaluation {
    gamma: f64,
    large: Vec<(f64, f64)>,
    theta: Vec<f64>,
}

fn evaluate(u: &DMatrix<f64>, c: &Candidates) -> Evaluation {
    let g = u.transpose() * u;
    let large: Vec<(f64, f64)> = c.large.iter().map(|t| extreme_eigs(block(&g, t, t))).collect();
    let small: Vec<(f64, f64)> = c.small.iter().map(|t| extreme_eigs(block(&g, t, t))).collect();
    let theta: Vec<f64> = c
        .pairs
        .iter()
        .map(|&(a, b)| top_singular(&block(&g, &c.small[a], &c.small[b])))
        .collect();
    let delta = |v: &[(f64, f64)]| {
        v.iter()
            .map(|(lo, hi)| (hi - 1.0).max(1.0 - lo))
            .fold(0.0, f64::max)
    };
    let gamma = delta(&small) + 2f64.sqrt() * theta.iter().cloned().fold(0.0, f64::max) + delta(&large);
    Evaluation { gamma, large, theta }
}

fn top_k(scores: impl Iterator<Item = f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<(usize, f64)> = scores.enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    idx.into_iter().take(k).map(|p| p.0).collect()
}

/// One smoothed-max term: value and gradient with respect to `U`.
struct Term {
    value: f64,
    grad: DMatrix<f64>,
}

/// `±λ_{max/min}(U_TᵀU_T)` with gradient `±2 U_T v vᵀ` on the columns in `T`.
fn eig_term(u: &DMatrix<f64>, t: &[usize], upper: bool) -> Term {
    let ut = u.select_columns(t);
    let eig = SymmetricEigen::new(ut.transpose() * &ut);
    let k = if upper { eig.eigenvalues.imax() } else { eig.eigenvalues.imin() };
    let v = eig.eigenvectors.column(k).into_owned();
    let sign = if upper { 1.0 } else { -1.0 };
    let local = (&ut * &v) * v.transpose() * (2.0 * sign);
    let mut grad = DMatrix::zeros(N, D);
    for (j, &col) in t.iter().enumerate() {
        grad.set_column(col, &local.column(j));
    }
    Term {
        value: if upper { eig.eigenvalues[k] - 1.0 } else { 1.0 - eig.eigenvalues[k] },
        grad,
    }
}

/// `‖U_AᵀU_B‖₂ = p ᵀU_AᵀU_B q` with gradients `U_B q pᵀ` and `U_A p qᵀ`.
fn cross_term(u: &DMatrix<f64>, a: &[usize], b: &[usize]) -> Term {
    let ua = u.select_columns(a);
    let ub = u.select_columns(b);
    let svd = (ua.transpose() * &ub).svd(true, true);
    let k = svd.singular_values.imax();
    let p = svd.u.as_ref().unwrap().column(k).into_owned();
    let q = svd.v_t.as_ref().unwrap().row(k).transpose();
    let ga = (&ub * &q) * p.transpose();
    let gb = (&ua * &p) * q.transpose();
    let mut grad = DMatrix::zeros(N, D);
    for (j, &col) in a.iter().enumerate() {
        grad.set_column(col, &ga.column(j));
    }
    for (j, &col) in b.iter().enumerate() {
        grad.set_column(col, &gb.column(j));
    }
    Term {
        value: svd.singular_values[k],
        grad,
    }
}

/// Log-sum-exp smoothing of `max_i value_i` and its gradient.
fn soft_max(terms: &[Term]) -> (f64, DMatrix<f64>) {
    let m = terms.iter().map(|t| t.value).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = terms.iter().map(|t| (BETA * (t.value - m)).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut grad = DMatrix::zeros(N, D);
    for (t, wi) in terms.iter().zip(&w) {
        grad += &t.grad * (wi / z);
    }
    (m + z.ln() / BETA, grad)
}

fn initial(seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(N, D, |_, _| StandardNormal.sample(&mut rng));
    // orthonormal rows, scaled so the restricted spectra straddle 1
    let svd = m.svd(true, true);
    svd.v_t.unwrap() * 1.15f64.sqrt()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: design_frame <seed> <out.csv>");
        std::process::exit(1);
    }
    let seed: u64 = args[1].parse().expect("seed must be an integer");
    let out = Path::new(&args[2]);

    let cands = Candidates::new();
    let mut u = initial(seed);
    let (mut m1, mut m2) = (DMatrix::zeros(N, D), DMatrix::zeros(N, D));
    let mut step = 0;
    let mut best = (f64::INFINITY, u.clone());
    for outer in 0..=OUTER {
        let ev = evaluate(&u, &cands);
        eprintln!("round {outer}: gamma = {:.5}", ev.gamma);
        if ev.gamma < best.0 {
            best = (ev.gamma, u.clone());
        }
        if outer == OUTER {
            break;
        }
        let hi = top_k(ev.large.iter().map(|p| p.1), ACTIVE);
        let lo = top_k(ev.large.iter().map(|p| -p.0), ACTIVE);
        let th = top_k(ev.theta.iter().cloned(), ACTIVE);
        let lr = LR * LR_DECAY.powi(outer as i32);
        for _ in 0..INNER {
            let mut large: Vec<Term> = hi.iter().map(|&i| eig_term(&u, &cands.large[i], true)).collect();
            large.extend(lo.iter().map(|&i| eig_term(&u, &cands.large[i], false)));
            let mut small: Vec<Term> = cands.small.iter().map(|t| eig_term(&u, t, true)).collect();
            small.extend(cands.small.iter().map(|t| eig_term(&u, t, false)));
            let cross: Vec<Term> = th
                .iter()
                .map(|&i| {
                    let (a, b) = cands.pairs[i];
                    cross_term(&u, &cands.small[a], &cands.small[b])
                })
                .collect();
            let grad = soft_max(&large).1 + soft_max(&small).1 + soft_max(&cross).1 * 2f64.sqrt();
            // Adam
            step += 1;
            m1 = &m1 * 0.9 + &grad * 0.1;
            m2 = &m2 * 0.999 + grad.map(|g| g * g) * 0.001;
            let c1 = 1.0 - 0.9f64.powi(step);
            let c2 = 1.0 - 0.999f64.powi(step);
            u -= m1.zip_map(&m2, |a, b| lr * (a / c1) / ((b / c2).sqrt() + 1e-8));
        }
    }

    let u = DenseMatrix::new(N, D, best.1.transpose().as_slice().to_vec()).expect("finite");
    let rip = RipConstants::compute(&u, S).expect("exhaustive RIP");
    let (gamma, ok) = gamma_condition(&rip, S).expect("constants present");
    write_matrix_csv(out, &u).expect("write matrix");
    println!("{}: gamma = {gamma:.6} ({})", out.display(), if ok { "certified" } else { "not certified" });
}
