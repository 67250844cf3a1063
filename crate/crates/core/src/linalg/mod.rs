//! Sparse linear algebra used by the interior-point solver.

pub mod ldl;
pub mod sparse;

pub use ldl::{ldl_symbolic, min_degree_order, LdlFactor, LdlSymbolic};
pub use sparse::{dot, norm2, norm_inf, CscMatrix};
