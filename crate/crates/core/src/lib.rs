//! Sparse recovery by homotopy proximal mapping.
//!
//! The crate covers the whole pipeline of a compressive-sensing experiment:
//! seeded problem generation ([`problem`]), an exhaustive RIP oracle for tiny
//! matrices ([`rip`]), the HPM solver family and its baselines ([`solvers`]),
//! and recovery metrics plus per-step inequality checkers ([`metrics`]).
//!
//! ```
//! use hpm_core::problem::{InstanceSpec, MatrixKind, SignalKind};
//! use hpm_core::solvers::{run_hpm2, Algorithm, SolverConfig};
//!
//! let inst = InstanceSpec {
//!     n: 100,
//!     d: 300,
//!     matrix: MatrixKind::Gaussian,
//!     signal: SignalKind::ExactSparse { s: 4 }.into(),
//!     sigma: 0.0,
//! }
//! .generate(7)
//! .unwrap();
//! let obs = inst.observation();
//! let start = inst.u.matvec_transpose(&inst.y).unwrap().linf();
//! let cfg = SolverConfig {
//!     eta: 0.15,
//!     hpm2_lambda1: Some(start),
//!     max_iters: 300,
//!     ..SolverConfig::new(Algorithm::Hpm2, 4)
//! };
//! let trace = run_hpm2(&obs, &cfg).unwrap();
//! assert!(trace.final_x.distance(&inst.x_star).unwrap() < 1e-3);
//! ```

pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod rip;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector, SupportSet};
pub use problem::{Observation, ProblemInstance};
pub use rip::RipConstants;
pub use solvers::{Algorithm, IterateTrace, SolverConfig, Termination};
