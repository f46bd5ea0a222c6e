//! Protocol execution: seeded trials, one output directory per run, and a
//! `summary.csv` joined after all runs finish.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use hpm_core::io::{fmt_g17, write_text, KeyValues, META_FILE};
use hpm_core::metrics::{fit_linear_rate, recovery_report, RecoveryReport};
use hpm_core::problem::{derive_seed, InstanceSpec, ProblemInstance};
use hpm_core::solvers::run;
use hpm_core::{Algorithm, IterateTrace, Observation, SolverConfig};

use crate::config::{ExperimentConfig, Protocol, SolverSpec};
use crate::error::{CliError, Result};
use crate::trace::{trace_rows, write_trace_csv};

/// Environment variable holding the sweep worker count.
pub const THREADS_ENV: &str = "HPM_THREADS";

pub const SUMMARY_HEADER: &str = "trial,seed,n,solver,param,value,iterations,prox_updates,termination,error_l2,error_top_s,error_top_s_projected,support_excess,nnz,rate";

/// One solver run inside a trial.
#[derive(Clone, Debug)]
pub struct Job {
    pub n: usize,
    pub param: &'static str,
    pub value: f64,
    pub spec: SolverSpec,
}

impl Job {
    fn label(&self) -> String {
        let mut label = self.spec.algorithm.name().to_string();
        if !self.param.is_empty() {
            let _ = write!(label, "-{}-{}", self.param, self.value);
        }
        label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub solver: Algorithm,
    pub param: String,
    pub value: Option<f64>,
    pub iterations: usize,
    pub prox_updates: usize,
    pub termination: String,
    pub report: RecoveryReport,
}

impl SummaryRow {
    fn csv(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.n,
            self.solver,
            self.param,
            self.value.map(fmt_g17).unwrap_or_default(),
            self.iterations,
            self.prox_updates,
            self.termination,
            fmt_g17(r.full_error),
            fmt_g17(r.top_s_error),
            fmt_g17(r.top_s_projected_error),
            r.support_excess,
            r.nnz,
            r.rate_estimate.map(fmt_g17).unwrap_or_default(),
        )
    }
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

fn with(spec: &SolverSpec, f: impl FnOnce(&mut SolverSpec)) -> SolverSpec {
    let mut s = spec.clone();
    f(&mut s);
    s
}

/// Expands the protocol into the runs of one trial.
pub fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let base = &cfg.solver;
    let single = |n: usize| Job {
        n,
        param: "",
        value: f64::NAN,
        spec: base.clone(),
    };
    let eta_jobs = |n: usize, spec: &SolverSpec| -> Vec<Job> {
        match &cfg.eta_list {
            Some(list) => list
                .iter()
                .map(|&eta| Job {
                    n,
                    param: "eta",
                    value: eta,
                    spec: with(spec, |s| s.eta = eta),
                })
                .collect(),
            None => vec![Job {
                n,
                param: "eta",
                value: spec.eta,
                spec: spec.clone(),
            }],
        }
    };
    match cfg.protocol {
        Protocol::Setting1 | Protocol::Setting2 | Protocol::Setting3 | Protocol::Custom => {
            vec![single(cfg.n)]
        }
        Protocol::EtaSweep => eta_jobs(cfg.n, base),
        Protocol::NSweep => cfg
            .n_list
            .iter()
            .flatten()
            .flat_map(|&n| {
                let mut js = eta_jobs(n, base);
                for j in &mut js {
                    if cfg.eta_list.is_none() {
                        j.param = "n";
                        j.value = n as f64;
                    }
                }
                js
            })
            .collect(),
        Protocol::PghCompare | Protocol::BaselineCompare => cfg
            .solvers
            .iter()
            .flat_map(|&algorithm| {
                let spec = with(base, |s| s.algorithm = algorithm);
                let grid = |param: &'static str, list: &Option<Vec<f64>>, fallback: f64, set: fn(&mut SolverSpec, f64)| -> Vec<Job> {
                    list.clone()
                        .unwrap_or_else(|| vec![fallback])
                        .into_iter()
                        .map(|v| Job {
                            n: cfg.n,
                            param,
                            value: v,
                            spec: with(&spec, |s| set(s, v)),
                        })
                        .collect()
                };
                match algorithm {
                    Algorithm::Hpm1 | Algorithm::Hpm2 => eta_jobs(cfg.n, &spec),
                    Algorithm::Ista => grid("lambda", &cfg.lambda_list, spec.ista_lambda, |s, v| s.ista_lambda = v),
                    Algorithm::Iht => grid("gamma", &cfg.gamma_list, spec.iht_gamma, |s, v| s.iht_gamma = v),
                    Algorithm::Pgh => vec![Job {
                        n: cfg.n,
                        param: "lambda_target",
                        value: spec.lambda_target,
                        spec,
                    }],
                    _ => vec![Job {
                        n: cfg.n,
                        param: "",
                        value: f64::NAN,
                        spec,
                    }],
                }
            })
            .collect(),
    }
}

/// Outcome of a single solver run.
pub struct RunOutput {
    pub config: SolverConfig,
    pub trace: IterateTrace,
    pub report: RecoveryReport,
}

/// Runs one solver on an instance and writes `trace.csv`, `report.txt` and
/// `meta.txt` into `out`.
pub fn run_and_write(
    inst: &ProblemInstance,
    spec: &SolverSpec,
    s: usize,
    out: &Path,
    meta: &KeyValues,
) -> Result<RunOutput> {
    let obs: Observation<'_> = inst.observation();
    let config = spec.resolve(&obs, s)?;
    let trace = run(&obs, &config)?;
    let mut report = recovery_report(&trace.final_x, &inst.x_star, s)?;
    let star_s = hpm_core::linalg::hard_threshold_top_s(&inst.x_star, s)?;
    report.rate_estimate = fit_linear_rate(&trace, &star_s, 1e-10).ok();

    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    if !trace.is_empty() {
        write_trace_csv(&out.join("trace.csv"), &trace_rows(&trace, Some((&inst.x_star, s)))?)?;
    }
    let mut rep = KeyValues::new();
    rep.set("algorithm", config.algorithm)
        .set("termination", trace.termination)
        .set("iterations", trace.len())
        .set("prox_updates", trace.total_prox_updates)
        .set("error_l2", fmt_g17(report.full_error))
        .set("error_top_s", fmt_g17(report.top_s_error))
        .set("error_top_s_projected", fmt_g17(report.top_s_projected_error))
        .set("support_excess", report.support_excess)
        .set("nnz", report.nnz);
    if let Some(r) = report.rate_estimate {
        rep.set("rate", fmt_g17(r));
    }
    if let Ok(g) = config.gamma() {
        rep.set("gamma", fmt_g17(g));
    }
    rep.write(&out.join("report.txt"))?;

    let mut m = meta.clone();
    m.set("s", s)
        .set("resolved_delta1", fmt_g17(config.delta1))
        .set("resolved_lambda_cap", fmt_g17(config.lambda_cap));
    if let Some(v) = config.hpm2_lambda1 {
        m.set("resolved_lambda1", fmt_g17(v));
    }
    if let Some(v) = config.ut_e_inf {
        m.set("resolved_ute", fmt_g17(v));
    }
    m.write(&out.join(META_FILE))?;
    Ok(RunOutput {
        config,
        trace,
        report,
    })
}

pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Executes a protocol and returns its summary rows, also written to
/// `output_dir/summary.csv`.
pub fn run_protocol(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut meta = cfg.to_key_values();
    let seeds: Vec<u64> = (0..cfg.trials).map(|k| derive_seed(cfg.seed, k as u64)).collect();
    for (k, s) in seeds.iter().enumerate() {
        meta.set(&format!("trial_{k}_seed"), s);
    }
    meta.write(&out.join(META_FILE))?;

    let jobs = jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    let per_trial: Vec<Result<Vec<SummaryRow>>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(k, &seed)| run_trial(cfg, &jobs, k, seed))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    write_text(&out.join("summary.csv"), &render_summary(&rows))?;
    if matches!(cfg.protocol, Protocol::BaselineCompare | Protocol::PghCompare) {
        write_text(&out.join("best.csv"), &render_summary(&best_per_solver(&rows)))?;
    }
    Ok(rows)
}

fn trial_instance(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<ProblemInstance> {
    Ok(InstanceSpec {
        n,
        d: cfg.d,
        matrix: cfg.matrix,
        signal: cfg.signal,
        sigma: cfg.sigma,
    }
    .generate(seed)?)
}

fn run_trial(cfg: &ExperimentConfig, jobs: &[Job], k: usize, seed: u64) -> Result<Vec<SummaryRow>> {
    let mut sizes: Vec<usize> = jobs.iter().map(|j| j.n).collect();
    sizes.dedup();
    let mut rows = Vec::with_capacity(jobs.len());
    for n in sizes {
        let inst = trial_instance(cfg, n, seed)?;
        let group: Vec<&Job> = jobs.iter().filter(|j| j.n == n).collect();
        rows.extend(run_jobs(cfg, &inst, &group, k, seed)?);
    }
    Ok(rows)
}

fn run_jobs(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    jobs: &[&Job],
    k: usize,
    seed: u64,
) -> Result<Vec<SummaryRow>> {
    let trial_dir = cfg.output_dir.join(format!("trial{k}"));
    let n = inst.n();
    let outputs: Vec<Result<SummaryRow>> = jobs
        .par_iter()
        .map(|job| {
            let dir: PathBuf = trial_dir.join(if cfg.protocol == Protocol::NSweep {
                format!("n-{n}-{}", job.label())
            } else {
                job.label()
            });
            let mut meta = cfg.to_key_values();
            job.spec.write_into(&mut meta);
            meta.set("n", n).set("trial", k).set("seed", seed);
            let run = run_and_write(inst, &job.spec, cfg.s, &dir, &meta)?;
            Ok(SummaryRow {
                trial: k,
                seed,
                n,
                solver: job.spec.algorithm,
                param: job.param.to_string(),
                value: (!job.param.is_empty()).then_some(job.value),
                iterations: run.trace.len(),
                prox_updates: run.trace.total_prox_updates,
                termination: run.trace.termination.to_string(),
                report: run.report,
            })
        })
        .collect();
    outputs.into_iter().collect()
}

/// Runs the protocol's jobs once on an existing instance (read from
/// `source`) instead of generating trials.
pub fn run_on_instance(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    source: &Path,
) -> Result<Vec<SummaryRow>> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut meta = cfg.to_key_values();
    meta.set("instance", source.display())
        .set("instance_seed", inst.meta.seed)
        .set("n", inst.n())
        .set("d", inst.d())
        .set("trials", 1);
    meta.write(&out.join(META_FILE))?;
    let jobs: Vec<Job> = jobs(cfg)
        .into_iter()
        .map(|mut j| {
            j.n = inst.n();
            j
        })
        .collect();
    let refs: Vec<&Job> = jobs.iter().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| run_jobs(cfg, inst, &refs, 0, inst.meta.seed))?;
    write_text(&out.join("summary.csv"), &render_summary(&rows))?;
    write_text(&out.join("best.csv"), &render_summary(&best_per_solver(&rows)))?;
    Ok(rows)
}

/// Per trial and solver, the run with the smallest top-s projected error.
pub fn best_per_solver(rows: &[SummaryRow]) -> Vec<SummaryRow> {
    let mut best: Vec<SummaryRow> = Vec::new();
    for r in rows {
        match best
            .iter_mut()
            .find(|b| b.trial == r.trial && b.n == r.n && b.solver == r.solver)
        {
            Some(b) => {
                if r.report.top_s_projected_error < b.report.top_s_projected_error {
                    *b = r.clone();
                }
            }
            None => best.push(r.clone()),
        }
    }
    best
}
