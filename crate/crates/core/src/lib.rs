//! Distributionally robust optimization with Kullback-Leibler ambiguity sets,
//! reformulated as dual exponential cone constrained (mixed-integer) conic
//! programs and solved by an in-repo nonsymmetric-cone interior-point method
//! with branch-and-bound.
//!
//! Layering, bottom up:
//! - [`linalg`]: sparse matrices and the LDL^T factorization the solver uses.
//! - [`cones`]: cone vocabulary, membership tests, barriers.
//! - [`program`]: conic programs in standard form plus a builder and a text
//!   interchange format.
//! - [`ipm`]: the homogeneous self-dual interior-point solver.
//! - [`mip`]: branch-and-bound over continuous relaxations, plus an
//!   exhaustive-enumeration oracle.
//! - [`kl`]: KL divergence, ambiguity sets, the worst-case expectation
//!   problem with two independent solution paths.
//! - [`dro`]: the generic robust-counterpart builder.
//! - [`apps`]: newsvendor and uncapacitated facility location models.
//! - [`harness`]: seeded sampling, experiment driver, statistics, CSV
//!   reports.
//! - [`config`]: TOML instance and experiment files.
//! - [`check`]: the fast self-verification suites behind `kldro check`.

pub mod apps;
pub mod check;
pub mod cones;
pub mod config;
pub mod dro;
pub mod harness;
pub mod ipm;
pub mod kl;
pub mod linalg;
pub mod mip;
pub mod program;
