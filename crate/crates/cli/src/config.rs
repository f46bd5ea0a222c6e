//! Experiment configuration: protocol defaults, `key = value` files and flag
//! overrides, and resolution of solver settings against an instance.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hpm_core::io::{fmt_g17, KeyValues};
use hpm_core::linalg::hard_threshold_top_s;
use hpm_core::problem::{MatrixKind, SignalKind, SignalSpec};
use hpm_core::{Algorithm, Observation, RipConstants, SolverConfig};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Setting1,
    Setting2,
    Setting3,
    EtaSweep,
    NSweep,
    PghCompare,
    BaselineCompare,
    Custom,
}

impl Protocol {
    pub const ALL: [Protocol; 8] = [
        Protocol::Setting1,
        Protocol::Setting2,
        Protocol::Setting3,
        Protocol::EtaSweep,
        Protocol::NSweep,
        Protocol::PghCompare,
        Protocol::BaselineCompare,
        Protocol::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Setting1 => "setting1",
            Protocol::Setting2 => "setting2",
            Protocol::Setting3 => "setting3",
            Protocol::EtaSweep => "eta-sweep",
            Protocol::NSweep => "n-sweep",
            Protocol::PghCompare => "pgh-compare",
            Protocol::BaselineCompare => "baseline-compare",
            Protocol::Custom => "custom",
        }
    }

    /// Default parameters at paper scale.
    pub fn defaults(self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("protocol", self.name())
            .set("trials", 1)
            .set("seed", 1)
            .set("matrix", "gaussian")
            .set("algorithm", "hpm1")
            .set("max_iters", 200)
            .set("error_floor", "1e-12")
            .set("delta1", "truth")
            .set("lambda_cap", "auto")
            .set("ista_lambda", "0.01")
            .set("iht_gamma", 1)
            .set("lambda_target", 1)
            .set("dec_factor", "0.7")
            .set("inner_tol", "0.2")
            .set("output_dir", "out");
        let setting = |kv: &mut KeyValues, which: u8| {
            kv.set("n", 2000).set("d", 10000).set("s", 20).set("max_iters", 500);
            match which {
                1 => kv
                    .set("sigma", 0)
                    .set("signal", "exact-sparse")
                    .set("eta", "0.4"),
                2 => kv
                    .set("sigma", "0.001")
                    .set("signal", "exact-sparse")
                    .set("eta", "0.4"),
                _ => kv
                    .set("sigma", "0.001")
                    .set("signal", "power-law")
                    .set("eta", "0.3"),
            };
        };
        match self {
            Protocol::Setting1 => setting(&mut kv, 1),
            Protocol::Setting2 => setting(&mut kv, 2),
            Protocol::Setting3 => setting(&mut kv, 3),
            Protocol::EtaSweep => {
                setting(&mut kv, 2);
                kv.set("n", 1000).set("eta_list", "0.3,0.35,0.41");
            }
            Protocol::NSweep => {
                setting(&mut kv, 2);
                kv.set("n_list", "1000,1500,2000,2500");
            }
            Protocol::PghCompare | Protocol::BaselineCompare => {
                kv.set("matrix", "uniform")
                    .set("n", 1000)
                    .set("d", 5000)
                    .set("s", 100)
                    .set("sigma", "0.01")
                    .set("algorithm", "hpm2")
                    .set("delta1", "auto")
                    .set("lambda_cap", 0)
                    .set("eta", "0.185")
                    .set("max_iters", 1000);
                if self == Protocol::PghCompare {
                    kv.set("signal", "uniform-sparse")
                        .set("normalize", false)
                        .set("solvers", "hpm2,pgh")
                        .set("eta_list", "0.182,0.185");
                } else {
                    kv.set("signal", "exp-decay")
                        .set("solvers", "hpm2,ista,iht")
                        .set("eta_list", "0.1,0.125,0.15,0.175,0.2")
                        .set("gamma_list", "1,2,5,10")
                        .set("lambda_list", "0.001,0.01,0.1,1");
                }
            }
            Protocol::Custom => {
                kv.set("n", 500)
                    .set("d", 2500)
                    .set("s", 10)
                    .set("sigma", 0)
                    .set("signal", "exact-sparse")
                    .set("algorithm", "hpm2")
                    .set("delta1", "auto")
                    .set("lambda_cap", 0)
                    .set("eta", "0.15");
            }
        }
        kv
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown protocol {s:?}")))
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(hpm_core::Error::InvalidParameter(msg.into()))
}

/// Initial error bound `Δ_1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delta1 {
    Value(f64),
    /// `‖x_*‖₂` for the RIP-scheduled solvers, `max(‖x_*^s‖₂, Λ)` otherwise.
    Truth,
    /// `max(‖Uᵀy‖_∞·√s, Λ)`, usable without ground truth.
    Auto,
}

impl fmt::Display for Delta1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta1::Value(v) => f.write_str(&fmt_g17(*v)),
            Delta1::Truth => f.write_str("truth"),
            Delta1::Auto => f.write_str("auto"),
        }
    }
}

/// Noise/approximation level `Λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaCap {
    Value(f64),
    /// `√s‖Uᵀe‖_∞ + η‖x_* − x_*^s‖₂`; needs ground truth.
    Auto,
}

impl fmt::Display for LambdaCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaCap::Value(v) => f.write_str(&fmt_g17(*v)),
            LambdaCap::Auto => f.write_str("auto"),
        }
    }
}

/// Solver settings before they are resolved against an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub delta1: Delta1,
    pub lambda_cap: LambdaCap,
    pub lambda1: Option<f64>,
    pub max_iters: usize,
    pub ista_lambda: f64,
    pub ista_step: Option<f64>,
    pub iht_gamma: f64,
    pub lambda_target: f64,
    pub dec_factor: f64,
    pub inner_tol: f64,
    pub error_floor: f64,
    pub rip_file: Option<PathBuf>,
    pub ute: Option<f64>,
}

impl SolverSpec {
    /// Fills in every data-dependent quantity and validates the result.
    pub fn resolve(&self, obs: &Observation<'_>, s: usize) -> Result<SolverConfig> {
        let root_s = (s as f64).sqrt();
        let uty = obs.u.matvec_transpose(obs.y)?.linf();
        let ute = match (self.ute, obs.truth) {
            (Some(v), _) => Some(v),
            (None, Some(t)) => Some(obs.u.matvec_transpose(t.e)?.linf()),
            (None, None) => None,
        };
        let needs_truth = |what: &str| {
            CliError::Core(hpm_core::Error::MissingConstant(format!(
                "{what} needs the ground truth"
            )))
        };
        let lambda_cap = match self.lambda_cap {
            LambdaCap::Value(v) => v,
            LambdaCap::Auto => {
                let t = obs.truth.ok_or_else(|| needs_truth("lambda_cap = auto"))?;
                let tail = t.x_star.distance(&hard_threshold_top_s(t.x_star, s.min(t.x_star.len()))?)?;
                root_s * ute.expect("truth gives noise") + self.eta * tail
            }
        };
        let delta1 = match self.delta1 {
            Delta1::Value(v) => v,
            Delta1::Auto => (uty * root_s).max(lambda_cap),
            Delta1::Truth => {
                let t = obs.truth.ok_or_else(|| needs_truth("delta1 = truth"))?;
                match self.algorithm {
                    Algorithm::HpmOracleNoiseless | Algorithm::HpmOracleNoisy => t.x_star.l2(),
                    _ => hard_threshold_top_s(t.x_star, s.min(t.x_star.len()))?
                        .l2()
                        .max(lambda_cap),
                }
            }
        };
        let hpm2_lambda1 = match (self.lambda1, self.delta1) {
            (Some(v), _) => Some(v),
            (None, Delta1::Auto) => Some(uty),
            _ => None,
        };
        let rip = match &self.rip_file {
            Some(p) => Some(RipConstants::read(p)?),
            None => None,
        };
        let cfg = SolverConfig {
            algorithm: self.algorithm,
            s,
            eta: self.eta,
            delta1,
            lambda_cap,
            hpm2_lambda1,
            rip,
            ut_e_inf: ute,
            max_iters: self.max_iters,
            ista_lambda: self.ista_lambda,
            ista_step: self.ista_step,
            iht_gamma: self.iht_gamma,
            pgh_lambda_target: self.lambda_target,
            pgh_dec_factor: self.dec_factor,
            pgh_inner_tol_factor: self.inner_tol,
            error_floor: self.error_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn write_into(&self, kv: &mut KeyValues) {
        kv.set("algorithm", self.algorithm)
            .set("eta", fmt_g17(self.eta))
            .set("delta1", self.delta1)
            .set("lambda_cap", self.lambda_cap)
            .set("max_iters", self.max_iters)
            .set("ista_lambda", fmt_g17(self.ista_lambda))
            .set("iht_gamma", fmt_g17(self.iht_gamma))
            .set("lambda_target", fmt_g17(self.lambda_target))
            .set("dec_factor", fmt_g17(self.dec_factor))
            .set("inner_tol", fmt_g17(self.inner_tol))
            .set("error_floor", fmt_g17(self.error_floor));
        if let Some(v) = self.lambda1 {
            kv.set("lambda1", fmt_g17(v));
        }
        if let Some(v) = self.ista_step {
            kv.set("ista_step", fmt_g17(v));
        }
        if let Some(p) = &self.rip_file {
            kv.set("rip_file", p.display());
        }
        if let Some(v) = self.ute {
            kv.set("ute", fmt_g17(v));
        }
    }
}

/// Typed view over a merged [`KeyValues`] with per-key error messages.
pub(crate) struct Reader<'a>(pub &'a KeyValues);

impl Reader<'_> {
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).filter(|v| !v.is_empty())
    }

    pub fn req(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| invalid(format!("missing required key {key:?}")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.req(key)?;
        v.parse()
            .map_err(|_| invalid(format!("bad value for {key:?}: {v:?}")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let items = v
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| invalid(format!("bad entry {t:?} in {key:?}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(invalid(format!("{key:?} must not be empty")));
        }
        Ok(Some(items))
    }
}

/// Parses `exact-sparse` / `uniform-sparse` with or without an explicit
/// `:s`, and the dense kinds.
pub fn parse_signal(text: &str, s: usize) -> Result<SignalKind> {
    let full = match text {
        "exact-sparse" | "uniform-sparse" => format!("{text}:{s}"),
        other => other.to_string(),
    };
    Ok(full.parse()?)
}

pub(crate) fn solver_from(r: &Reader<'_>) -> Result<SolverSpec> {
    let delta1 = match r.req("delta1")? {
        "truth" => Delta1::Truth,
        "auto" => Delta1::Auto,
        _ => Delta1::Value(r.parse("delta1")?),
    };
    let lambda_cap = match r.req("lambda_cap")? {
        "auto" => LambdaCap::Auto,
        _ => LambdaCap::Value(r.parse("lambda_cap")?),
    };
    Ok(SolverSpec {
        algorithm: r.parse::<String>("algorithm")?.parse()?,
        eta: r.parse("eta")?,
        delta1,
        lambda_cap,
        lambda1: r.parse_opt("lambda1")?,
        max_iters: r.parse("max_iters")?,
        ista_lambda: r.parse("ista_lambda")?,
        ista_step: r.parse_opt("ista_step")?,
        iht_gamma: r.parse("iht_gamma")?,
        lambda_target: r.parse("lambda_target")?,
        dec_factor: r.parse("dec_factor")?,
        inner_tol: r.parse("inner_tol")?,
        error_floor: r.parse("error_floor")?,
        rip_file: r.parse_opt::<String>("rip_file")?.map(PathBuf::from),
        ute: r.parse_opt("ute")?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub sigma: f64,
    pub seed: u64,
    pub trials: usize,
    pub matrix: MatrixKind,
    pub signal: SignalSpec,
    pub solver: SolverSpec,
    /// Solvers run by the comparison protocols.
    pub solvers: Vec<Algorithm>,
    pub eta_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub gamma_list: Option<Vec<f64>>,
    pub lambda_list: Option<Vec<f64>>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Protocol defaults, then `file`, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &KeyValues) -> Result<Self> {
        let mut user = KeyValues::new();
        if let Some(p) = file {
            user.merge(&KeyValues::read(p)?);
        }
        user.merge(overrides);
        let protocol: Protocol = user.get("protocol").unwrap_or("custom").parse()?;
        let mut kv = protocol.defaults();
        kv.merge(&user);
        Self::from_key_values(&kv)
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let r = Reader(kv);
        let protocol: Protocol = r.req("protocol")?.parse()?;
        let s: usize = r.parse("s")?;
        let kind = parse_signal(r.req("signal")?, s)?;
        let normalize = r
            .parse_opt::<bool>("normalize")?
            .unwrap_or(kind.normalized_by_default());
        let solvers = match r.raw("solvers") {
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<Algorithm>())
                .collect::<hpm_core::Result<Vec<_>>>()?,
            None => vec![r.parse::<String>("algorithm")?.parse()?],
        };
        let cfg = ExperimentConfig {
            protocol,
            n: r.parse("n")?,
            d: r.parse("d")?,
            s,
            sigma: r.parse("sigma")?,
            seed: r.parse("seed")?,
            trials: r.parse("trials")?,
            matrix: r.parse::<String>("matrix")?.parse()?,
            signal: SignalSpec { kind, normalize },
            solver: solver_from(&r)?,
            solvers,
            eta_list: r.list("eta_list")?,
            n_list: r.list("n_list")?,
            gamma_list: r.list("gamma_list")?,
            lambda_list: r.list("lambda_list")?,
            output_dir: PathBuf::from(r.req("output_dir")?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.n == 0 || self.d == 0 || self.s == 0 || self.s > self.d {
            return Err(invalid(format!(
                "need n, d >= 1 and 1 <= s <= d, got n = {}, d = {}, s = {}",
                self.n, self.d, self.s
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(invalid("sigma must be nonnegative"));
        }
        if self.protocol == Protocol::EtaSweep && self.eta_list.is_none() {
            return Err(invalid("eta-sweep needs eta_list"));
        }
        if self.protocol == Protocol::NSweep && self.n_list.is_none() {
            return Err(invalid("n-sweep needs n_list"));
        }
        if self.n_list.iter().flatten().any(|n| *n == 0) {
            return Err(invalid("n_list entries must be positive"));
        }
        Ok(())
    }

    /// Every parameter as `key = value` lines, sufficient to rerun.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("protocol", self.protocol)
            .set("n", self.n)
            .set("d", self.d)
            .set("s", self.s)
            .set("sigma", fmt_g17(self.sigma))
            .set("seed", self.seed)
            .set("trials", self.trials)
            .set("matrix", self.matrix)
            .set("signal", self.signal.kind)
            .set("normalize", self.signal.normalize)
            .set(
                "solvers",
                self.solvers
                    .iter()
                    .map(|a| a.name())
                    .collect::<Vec<_>>()
                    .join(","),
            )
            .set("output_dir", self.output_dir.display());
        self.solver.write_into(&mut kv);
        let join = |v: &[f64]| v.iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().join(",");
        if let Some(v) = &self.eta_list {
            kv.set("eta_list", join(v));
        }
        if let Some(v) = &self.gamma_list {
            kv.set("gamma_list", join(v));
        }
        if let Some(v) = &self.lambda_list {
            kv.set("lambda_list", join(v));
        }
        if let Some(v) = &self.n_list {
            kv.set(
                "n_list",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            );
        }
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_for_every_protocol() {
        for p in Protocol::ALL {
            let cfg = ExperimentConfig::from_key_values(&p.defaults()).unwrap();
            assert_eq!(cfg.protocol, p);
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
    }

    #[test]
    fn overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "protocol = setting2\nn = 300 # small\nd = 900\n").unwrap();
        let mut over = KeyValues::new();
        over.set("n", 400);
        let cfg = ExperimentConfig::load(Some(&path), &over).unwrap();
        assert_eq!(cfg.protocol, Protocol::Setting2);
        assert_eq!((cfg.n, cfg.d, cfg.s), (400, 900, 20));
        assert_eq!(cfg.sigma, 0.001);
        assert_eq!(cfg.signal.kind, SignalKind::ExactSparse { s: 20 });
    }

    #[test]
    fn key_values_round_trip() {
        let cfg = ExperimentConfig::from_key_values(&Protocol::BaselineCompare.defaults()).unwrap();
        let again = ExperimentConfig::from_key_values(&cfg.to_key_values()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn missing_sweep_list_is_rejected() {
        let mut kv = Protocol::EtaSweep.defaults();
        kv.set("eta_list", "");
        assert!(ExperimentConfig::from_key_values(&kv).is_err());
        let mut kv = Protocol::Custom.defaults();
        kv.set("trials", 0);
        assert_eq!(
            ExperimentConfig::from_key_values(&kv).unwrap_err().exit_code(),
            2
        );
    }
}
