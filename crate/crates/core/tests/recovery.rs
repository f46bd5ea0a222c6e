use hpm_core::linalg::hard_threshold_top_s;
use hpm_core::metrics::{check_lemma_fund, fit_linear_rate, recovery_report};
use hpm_core::problem::{InstanceSpec, MatrixKind, SignalKind};
use hpm_core::solvers::{bpdn_objective, hpm_steps, prox_gradient_step, run};
use hpm_core::{Algorithm, DenseMatrix, DenseVector, ProblemInstance, SolverConfig, Termination};
use proptest::prelude::*;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn instance(n: usize, d: usize, s: usize, sigma: f64, seed: u64) -> ProblemInstance {
    InstanceSpec {
        n,
        d,
        matrix: MatrixKind::Gaussian,
        signal: SignalKind::ExactSparse { s }.into(),
        sigma,
    }
    .generate(seed)
    .unwrap()
}

fn hpm1(inst: &ProblemInstance, s: usize, eta: f64, cap: f64) -> SolverConfig {
    let mut cfg = SolverConfig::new(Algorithm::Hpm1, s);
    cfg.eta = eta;
    cfg.lambda_cap = cap;
    cfg.delta1 = hard_threshold_top_s(&inst.x_star, s).unwrap().l2().max(cap);
    cfg
}

#[test]
fn hpm1_converges_linearly_without_noise() {
    let inst = instance(300, 1000, 5, 0.0, 21);
    let cfg = hpm1(&inst, 5, 0.35, 0.0);
    let trace = run(&inst.observation(), &cfg).unwrap();
    let report = recovery_report(&trace.final_x, &inst.x_star, 5).unwrap();
    assert!(report.full_error < 1e-8, "{report:?}");
    assert_eq!(report.support_excess, 0);
    let rate = fit_linear_rate(&trace, &inst.x_star, 1e-10).unwrap();
    assert!(rate <= (1.0 + SQRT_2) * 0.35 + 0.1, "rate {rate}");
    // the error stays inside the schedule's Δ_t envelope
    for r in &trace.records {
        let delta_next = cfg.gamma().unwrap() * r.delta.unwrap();
        assert!(r.x.to_vector().distance(&inst.x_star).unwrap() <= delta_next * (1.0 + 1e-9) + 1e-14);
    }
}

#[test]
fn hpm1_noise_floor_scales_with_the_noise() {
    let s = 5;
    let eta = 0.35;
    let gamma = (1.0 + SQRT_2) * eta;
    for seed in 0..3 {
        let inst = instance(300, 1000, s, 0.002, seed);
        let ute = inst.u.matvec_transpose(&inst.e).unwrap().linf();
        let cap = (s as f64).sqrt() * ute;
        let cfg = hpm1(&inst, s, eta, cap);
        let trace = run(&inst.observation(), &cfg).unwrap();
        let err = trace.final_x.distance(&inst.x_star).unwrap();
        assert!(err <= SQRT_2 * (1.0 + SQRT_2) * cap / (1.0 - gamma), "seed {seed}: {err}");
    }
}

#[test]
fn hpm2_keeps_at_most_2s_nonzeros_and_recovers() {
    let inst = instance(300, 1000, 5, 0.0, 5);
    let obs = inst.observation();
    let mut cfg = SolverConfig::new(Algorithm::Hpm2, 5);
    cfg.eta = 0.15;
    cfg.hpm2_lambda1 = Some(inst.u.matvec_transpose(&inst.y).unwrap().linf());
    let trace = run(&obs, &cfg).unwrap();
    assert!(trace.records.iter().all(|r| r.nnz <= 10));
    assert!(trace.final_x.distance(&inst.x_star).unwrap() < 1e-6);
    assert_ne!(trace.termination, Termination::SparsityStop);
}

#[test]
fn iht_recovers_an_exactly_sparse_signal() {
    let inst = instance(300, 1000, 5, 0.0, 8);
    let mut cfg = SolverConfig::new(Algorithm::Iht, 5);
    cfg.iht_gamma = 1.5;
    cfg.max_iters = 500;
    let trace = run(&inst.observation(), &cfg).unwrap();
    assert!(trace.final_x.distance(&inst.x_star).unwrap() < 1e-6);
    assert!(trace.records.iter().all(|r| r.nnz <= 5));
}

#[test]
fn ista_objective_never_increases() {
    let inst = instance(100, 300, 5, 0.01, 3);
    let obs = inst.observation();
    let mut cfg = SolverConfig::new(Algorithm::Ista, 5);
    cfg.ista_lambda = 0.05;
    cfg.max_iters = 300;
    let trace = run(&obs, &cfg).unwrap();
    let objectives: Vec<f64> = trace
        .iterates()
        .map(|x| bpdn_objective(&obs, &x, 0.05).unwrap())
        .collect();
    for w in objectives.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn pgh_ends_near_the_lasso_solution_at_its_target() {
    let inst = instance(100, 300, 5, 0.01, 4);
    let obs = inst.observation();
    let target = 0.05;
    let mut pgh = SolverConfig::new(Algorithm::Pgh, 5);
    pgh.pgh_lambda_target = target;
    pgh.pgh_inner_tol_factor = 1e-6;
    pgh.max_iters = 100_000;
    let mut ista = SolverConfig::new(Algorithm::Ista, 5);
    ista.ista_lambda = target;
    ista.max_iters = 100_000;
    ista.error_floor = 1e-13;
    let a = run(&obs, &pgh).unwrap();
    let b = run(&obs, &ista).unwrap();
    assert!(a.final_x.distance(&b.final_x).unwrap() < 1e-4);
}

#[test]
fn every_solver_is_deterministic() {
    let inst = instance(60, 150, 3, 0.01, 12);
    let obs = inst.observation();
    for alg in [Algorithm::Hpm1, Algorithm::Hpm2, Algorithm::Ista, Algorithm::Iht, Algorithm::Pgh] {
        let mut cfg = SolverConfig::new(alg, 3);
        cfg.eta = 0.15;
        cfg.delta1 = 2.0;
        cfg.max_iters = 50;
        cfg.pgh_lambda_target = 0.05;
        let a = run(&obs, &cfg).unwrap();
        let b = run(&obs, &cfg).unwrap();
        assert_eq!(a.final_x, b.final_x, "{alg}");
        assert_eq!(a.records.len(), b.records.len(), "{alg}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any proximal step satisfies the per-step inequality for any s-sparse
    /// reference, whatever `x_t`, `λ` and `y` are.
    #[test]
    fn per_step_inequality_holds_for_arbitrary_steps(
        seed in 0u64..1000,
        lambda in 0.0f64..1.0,
        scale in 0.0f64..2.0,
        s in 1usize..4,
    ) {
        let inst = instance(20, 40, s, 0.05, seed);
        let x_t = DenseVector::new(
            (0..40).map(|i| scale * ((i as f64 * 0.7 + seed as f64).sin())).collect(),
        ).unwrap();
        let x_next = prox_gradient_step(&inst.u, &inst.y, &x_t, lambda).unwrap();
        let c = check_lemma_fund(&inst.u, &inst.y, &x_t, &x_next, lambda, &inst.x_star, s).unwrap();
        prop_assert!(c.holds, "slack {}", c.slack);
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>()) {
        let a = instance(8, 16, 2, 0.1, seed);
        let b = instance(8, 16, 2, 0.1, seed);
        prop_assert_eq!(a.u, b.u);
        prop_assert_eq!(a.y, b.y);
        prop_assert_eq!(a.x_star.nnz(), 2);
    }

    /// Recorded steps replay exactly through the prox-gradient map.
    #[test]
    fn hpm_steps_match_recorded_lambdas(seed in 0u64..500) {
        let inst = instance(30, 60, 3, 0.0, seed);
        let mut cfg = SolverConfig::new(Algorithm::Hpm1, 3);
        cfg.eta = 0.3;
        cfg.delta1 = 1.0;
        cfg.max_iters = 15;
        let trace = run(&inst.observation(), &cfg).unwrap();
        for (x_t, x_next, lambda) in hpm_steps(&trace) {
            prop_assert_eq!(prox_gradient_step(&inst.u, &inst.y, &x_t, lambda).unwrap(), x_next);
        }
        let eye = DenseMatrix::identity(4);
        let y = DenseVector::new(vec![1.0, -0.2, 0.05, 0.0]).unwrap();
        let x = prox_gradient_step(&eye, &y, &DenseVector::zeros(4), 0.1).unwrap();
        prop_assert_eq!(x.as_slice(), &[0.9, -0.1, 0.0, 0.0][..]);
    }
}
