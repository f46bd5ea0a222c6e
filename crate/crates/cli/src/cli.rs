use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use hpm_core::io::{fmt_g17, read_instance, read_matrix_csv, write_instance, KeyValues, META_FILE};
use hpm_core::problem::{InstanceSpec, MatrixKind, SignalSpec};
use hpm_core::rip::{
    delta_exhaustive_capped, gamma_condition, theta_exhaustive_capped, ut_e_inf_bound_report,
    RipConstants, DEFAULT_ENUMERATION_CAP,
};

use crate::config::{parse_signal, solver_from, ExperimentConfig, Protocol, Reader};
use crate::error::{CliError, Result};
use crate::protocol::{run_and_write, run_protocol};

const AFTER_HELP: &str = "Sweeps and comparisons run trials in parallel; set HPM_THREADS to \
the worker count (default: all logical processors).\n\
Exit codes: 0 success, 1 usage or I/O error, 2 violated solver or protocol precondition.";

#[derive(Debug, Parser)]
#[command(name = "hpm", version, about = "Homotopy proximal mapping experiments", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a problem instance directory
    Gen(GenArgs),
    /// Run one solver on an instance directory
    Solve(SolveArgs),
    /// Sweep eta or n over seeded trials
    Sweep(SweepArgs),
    /// Exhaustive RIP constants of a small matrix
    Rip(RipArgs),
    /// HPM2 against ISTA, IHT and PGH on one instance
    Compare(CompareArgs),
    /// Run a named protocol from a config file
    Run(RunArgs),
}

#[derive(Debug, Args, Default)]
struct ProblemFlags {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Sparsity level
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// gaussian | uniform
    #[arg(long)]
    matrix: Option<String>,
    /// exact-sparse | uniform-sparse | power-law | exp-decay
    #[arg(long)]
    signal: Option<String>,
    /// Rescale x_* to unit norm (default depends on the signal kind)
    #[arg(long)]
    normalize: Option<bool>,
}

impl ProblemFlags {
    fn apply(&self, kv: &mut KeyValues) {
        set(kv, "n", &self.n);
        set(kv, "d", &self.d);
        set(kv, "s", &self.s);
        set(kv, "sigma", &self.sigma);
        set(kv, "seed", &self.seed);
        set(kv, "matrix", &self.matrix);
        set(kv, "signal", &self.signal);
        set(kv, "normalize", &self.normalize);
    }
}

#[derive(Debug, Args, Default)]
struct SolverFlags {
    /// hpm-oracle | hpm-oracle-noisy | hpm1 | hpm2 | ista | iht | pgh
    #[arg(long = "algo")]
    algorithm: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    /// Initial error bound: a number, `auto` or `truth`
    #[arg(long)]
    delta1: Option<String>,
    /// HPM1 noise level: a number or `auto`
    #[arg(long)]
    lambda_cap: Option<String>,
    /// HPM2 starting threshold
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    ista_lambda: Option<f64>,
    #[arg(long)]
    ista_step: Option<f64>,
    #[arg(long)]
    iht_gamma: Option<f64>,
    #[arg(long)]
    lambda_target: Option<f64>,
    #[arg(long)]
    dec_factor: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    error_floor: Option<f64>,
    /// RIP constants written by `hpm rip`
    #[arg(long)]
    rip_file: Option<PathBuf>,
    /// Value of ‖Uᵀe‖_∞ for the noisy oracle schedule
    #[arg(long)]
    ute: Option<f64>,
}

impl SolverFlags {
    fn apply(&self, kv: &mut KeyValues) {
        set(kv, "algorithm", &self.algorithm);
        set(kv, "eta", &self.eta);
        set(kv, "delta1", &self.delta1);
        set(kv, "lambda_cap", &self.lambda_cap);
        set(kv, "lambda1", &self.lambda1);
        set(kv, "max_iters", &self.max_iters);
        set(kv, "ista_lambda", &self.ista_lambda);
        set(kv, "ista_step", &self.ista_step);
        set(kv, "iht_gamma", &self.iht_gamma);
        set(kv, "lambda_target", &self.lambda_target);
        set(kv, "dec_factor", &self.dec_factor);
        set(kv, "inner_tol", &self.inner_tol);
        set(kv, "error_floor", &self.error_floor);
        set(kv, "rip_file", &self.rip_file.as_ref().map(|p| p.display().to_string()));
        set(kv, "ute", &self.ute);
    }
}

fn set<T: ToString>(kv: &mut KeyValues, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.set(key, v.to_string());
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    problem: ProblemFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance directory
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `key = value` file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    s: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// eta | n
    #[arg(long)]
    param: String,
    /// Comma-separated values
    #[arg(long)]
    values: String,
    /// Base setting 1, 2 or 3
    #[arg(long, default_value_t = 2)]
    setting: u8,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    problem: ProblemFlags,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Args)]
struct RipArgs {
    /// Matrix CSV, one row per line
    #[arg(long, conflicts_with = "input")]
    matrix: Option<PathBuf>,
    /// Instance directory (its U.csv, plus e.csv for the noise report)
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    s: usize,
    /// Maximum number of supports to enumerate per constant
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
    /// Also write the constants to this file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tail parameter of the ‖Uᵀe‖_∞ bound (needs --in)
    #[arg(long, requires = "input")]
    tau: Option<f64>,
    /// Sub-gaussian constant of the ‖Uᵀe‖_∞ bound
    #[arg(long, default_value_t = 2.0)]
    theta_const: f64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Instance directory; without it an instance is generated
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Comma-separated solver list
    #[arg(long, default_value = "hpm2,ista,iht,pgh")]
    solvers: String,
    #[arg(long)]
    eta_list: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    problem: ProblemFlags,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Protocol name, overriding the config file
    #[arg(long)]
    protocol: Option<String>,
    /// Extra `key=value` overrides
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command; returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Rip(a) => rip(a),
        Command::Compare(a) => compare(a),
        Command::Run(a) => run(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut kv = Protocol::Custom.defaults();
    a.problem.apply(&mut kv);
    let r = Reader(&kv);
    let s: usize = r.parse("s")?;
    let kind = parse_signal(r.req("signal")?, s)?;
    let spec = InstanceSpec {
        n: r.parse("n")?,
        d: r.parse("d")?,
        matrix: r.parse::<String>("matrix")?.parse::<MatrixKind>()?,
        signal: SignalSpec {
            kind,
            normalize: r.parse_opt("normalize")?.unwrap_or(kind.normalized_by_default()),
        },
        sigma: r.parse("sigma")?,
    };
    let inst = spec.generate(r.parse("seed")?)?;
    write_instance(&a.out, &inst)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn solve(a: SolveArgs) -> Result<()> {
    let inst = read_instance(&a.input)?;
    let mut kv = Protocol::Custom.defaults();
    if let Some(p) = &a.config {
        kv.merge(&KeyValues::read(p)?);
    }
    a.solver.apply(&mut kv);
    set(&mut kv, "s", &a.s);
    let r = Reader(&kv);
    let spec = solver_from(&r)?;
    let s = match (a.s, a.config.is_some() && r.raw("s").is_some()) {
        (Some(s), _) => s,
        (None, true) => r.parse("s")?,
        (None, false) => inst.s_true.min(inst.d()),
    };
    let mut meta = KeyValues::new();
    meta.set("instance", a.input.display())
        .set("instance_seed", inst.meta.seed);
    spec.write_into(&mut meta);
    let out = run_and_write(&inst, &spec, s, &a.out, &meta)?;
    println!(
        "{}: {} after {} updates, error_l2 = {}, error_top_s = {}",
        out.config.algorithm,
        out.trace.termination,
        out.trace.total_prox_updates,
        fmt_g17(out.report.full_error),
        fmt_g17(out.report.top_s_error)
    );
    Ok(())
}

fn base_overrides(config: &Option<PathBuf>, protocol: Protocol) -> Result<KeyValues> {
    let mut kv = KeyValues::new();
    if let Some(p) = config {
        kv.merge(&KeyValues::read(p)?);
    }
    kv.set("protocol", protocol);
    Ok(kv)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let protocol = match a.param.as_str() {
        "eta" => Protocol::EtaSweep,
        "n" => Protocol::NSweep,
        other => return Err(CliError::usage(format!("--param must be eta or n, got {other:?}"))),
    };
    let setting = match a.setting {
        1 => Protocol::Setting1,
        2 => Protocol::Setting2,
        3 => Protocol::Setting3,
        other => return Err(CliError::usage(format!("--setting must be 1, 2 or 3, got {other}"))),
    };
    let mut kv = setting.defaults();
    if protocol == Protocol::EtaSweep {
        kv.set("n", 1000);
    }
    kv.merge(&base_overrides(&a.config, protocol)?);
    kv.set(if protocol == Protocol::EtaSweep { "eta_list" } else { "n_list" }, &a.values);
    a.problem.apply(&mut kv);
    a.solver.apply(&mut kv);
    set(&mut kv, "trials", &a.trials);
    kv.set("output_dir", a.out.display());
    let cfg = ExperimentConfig::from_key_values(&kv)?;
    let rows = run_protocol(&cfg)?;
    println!("{} runs, summary in {}", rows.len(), cfg.output_dir.join("summary.csv").display());
    Ok(())
}

fn rip(a: RipArgs) -> Result<()> {
    let u = match (&a.matrix, &a.input) {
        (Some(m), _) => read_matrix_csv(m)?,
        (None, Some(dir)) => read_matrix_csv(&dir.join("U.csv"))?,
        (None, None) => return Err(CliError::usage("one of --matrix or --in is required")),
    };
    let cap = a.cap as u128;
    if a.s == 0 || 3 * a.s > u.cols() {
        return Err(CliError::Core(hpm_core::Error::InvalidParameter(format!(
            "need 1 <= s and 3s <= d = {}",
            u.cols()
        ))));
    }
    let mut delta = std::collections::BTreeMap::new();
    for k in 1..=3 * a.s {
        delta.insert(k, delta_exhaustive_capped(&u, k, cap)?);
    }
    let constants = RipConstants {
        delta,
        theta_ss: Some(theta_exhaustive_capped(&u, a.s, cap)?),
        s: a.s,
    };
    gamma_condition(&constants, a.s)?;
    let mut kv = constants.to_key_values()?;
    if let (Some(tau), Some(dir)) = (a.tau, &a.input) {
        let e = hpm_core::io::read_vector_csv(&dir.join("e.csv"))?;
        let rep = ut_e_inf_bound_report(&u, &e, a.theta_const, tau)?;
        kv.set("ute_actual", fmt_g17(rep.actual))
            .set("ute_bound", fmt_g17(rep.bound))
            .set("ute_within", rep.within);
    }
    print!("{}", kv.render());
    if let Some(out) = &a.out {
        kv.write(out)?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut kv = base_overrides(&a.config, Protocol::PghCompare)?;
    kv.set("solvers", &a.solvers);
    set(&mut kv, "eta_list", &a.eta_list);
    set(&mut kv, "trials", &a.trials);
    a.problem.apply(&mut kv);
    a.solver.apply(&mut kv);
    kv.set("output_dir", a.out.display());
    let mut full = Protocol::PghCompare.defaults();
    full.merge(&kv);
    let cfg = ExperimentConfig::from_key_values(&full)?;
    let rows = match &a.input {
        None => run_protocol(&cfg)?,
        Some(dir) => crate::protocol::run_on_instance(&cfg, &read_instance(dir)?, dir)?,
    };
    println!("{} runs, summary in {}", rows.len(), cfg.output_dir.join("summary.csv").display());
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut over = KeyValues::new();
    set(&mut over, "protocol", &a.protocol);
    for item in &a.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        over.set(k.trim(), v.trim());
    }
    set(&mut over, "output_dir", &a.out.as_ref().map(|p| p.display().to_string()));
    let cfg = ExperimentConfig::load(a.config.as_deref(), &over)?;
    let rows = run_protocol(&cfg)?;
    println!("{} runs, summary in {}", rows.len(), cfg.output_dir.join("summary.csv").display());
    Ok(())
}

/// Reads `meta.txt` from a run directory.
pub fn read_meta(dir: &Path) -> Result<KeyValues> {
    Ok(KeyValues::read(&dir.join(META_FILE))?)
}
