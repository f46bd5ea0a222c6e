//! Per-iteration CSV traces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hpm_core::io::fmt_g17;
use hpm_core::linalg::{hard_threshold_top_s, support};
use hpm_core::{DenseVector, IterateTrace};

use crate::error::{CliError, Result};

pub const TRACE_HEADER: &str = "iter,lambda,error_l2,error_top_s,nnz,support_excess,objective";

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub lambda: Option<f64>,
    pub error_l2: Option<f64>,
    pub error_top_s: Option<f64>,
    pub nnz: usize,
    pub support_excess: Option<usize>,
    pub objective: Option<f64>,
}

/// One row per recorded update. Error columns need the ground truth and the
/// sparsity level that defines `x_*^s`.
pub fn trace_rows(trace: &IterateTrace, truth: Option<(&DenseVector, usize)>) -> Result<Vec<TraceRow>> {
    let reference = match truth {
        Some((x_star, s)) => {
            let star_s = hard_threshold_top_s(x_star, s.min(x_star.len()))?;
            let s_star = support(&star_s, 0.0);
            Some((x_star, star_s, s_star))
        }
        None => None,
    };
    trace
        .records
        .iter()
        .map(|r| {
            let mut row = TraceRow {
                iter: r.t,
                lambda: r.lambda,
                error_l2: None,
                error_top_s: None,
                nnz: r.nnz,
                support_excess: None,
                objective: r.objective,
            };
            if let Some((x_star, star_s, s_star)) = &reference {
                let x = r.x.to_vector();
                row.error_l2 = Some(x.distance(x_star)?);
                row.error_top_s = Some(x.distance(star_s)?);
                row.support_excess = Some(r.x.support().difference_size(s_star));
            }
            Ok(row)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

pub fn render_trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            opt(r.lambda),
            opt(r.error_l2),
            opt(r.error_top_s),
            r.nnz,
            r.support_excess.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.objective),
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(CliError::usage(format!(
            "refusing to write an empty trace to {}",
            path.display()
        )));
    }
    fs::write(path, render_trace_csv(rows)).map_err(|e| CliError::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(CliError::usage(format!("{}: unexpected trace header", path.display())));
    }
    let bad = |k: usize| CliError::usage(format!("{}:{}: malformed trace row", path.display(), k + 2));
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(k));
            }
            let real = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(k))
                }
            };
            Ok(TraceRow {
                iter: f[0].parse().map_err(|_| bad(k))?,
                lambda: real(f[1])?,
                error_l2: real(f[2])?,
                error_top_s: real(f[3])?,
                nnz: f[4].parse().map_err(|_| bad(k))?,
                support_excess: if f[5].is_empty() {
                    None
                } else {
                    Some(f[5].parse().map_err(|_| bad(k))?)
                },
                objective: real(f[6])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use hpm_core::problem::{InstanceSpec, MatrixKind, SignalKind};
    use hpm_core::solvers::run;
    use hpm_core::{Algorithm, SolverConfig};

    fn small_trace(max_iters: usize) -> (hpm_core::ProblemInstance, IterateTrace) {
        let inst = InstanceSpec {
            n: 100,
            d: 200,
            matrix: MatrixKind::Gaussian,
            signal: SignalKind::ExactSparse { s: 3 }.into(),
            sigma: 0.0,
        }
        .generate(4)
        .unwrap();
        let mut cfg = SolverConfig::new(Algorithm::Hpm1, 3);
        cfg.eta = 0.3;
        cfg.delta1 = 1.0;
        cfg.max_iters = max_iters;
        let trace = run(&inst.observation(), &cfg).unwrap();
        (inst, trace)
    }

    #[test]
    fn one_line_per_iteration_plus_header() {
        let (inst, trace) = small_trace(3);
        let rows = trace_rows(&trace, Some((&inst.x_star, 3))).unwrap();
        let text = render_trace_csv(&rows);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next(), Some(TRACE_HEADER));
    }

    #[test]
    fn perfect_recovery_shows_small_final_error() {
        let (inst, trace) = small_trace(200);
        let rows = trace_rows(&trace, Some((&inst.x_star, 3))).unwrap();
        let last = rows.last().unwrap();
        assert!(last.error_l2.unwrap() < 1e-6);
        assert_eq!(last.support_excess, Some(0));
    }

    #[test]
    fn round_trip_is_exact() {
        let (inst, trace) = small_trace(20);
        let rows = trace_rows(&trace, Some((&inst.x_star, 3))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &rows).unwrap();
        assert_eq!(read_trace_csv(&path).unwrap(), rows);
    }

    #[test]
    fn blind_trace_leaves_error_columns_empty() {
        let (_, trace) = small_trace(2);
        let rows = trace_rows(&trace, None).unwrap();
        assert!(rows.iter().all(|r| r.error_l2.is_none() && r.support_excess.is_none()));
        assert!(render_trace_csv(&rows).lines().nth(1).unwrap().contains(",,,"));
    }

    #[test]
    fn empty_trace_and_bad_header_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        assert!(write_trace_csv(&path, &[]).is_err());
        fs::write(&path, "iter,lambda\n1,2\n").unwrap();
        assert!(read_trace_csv(&path).is_err());
    }
}
