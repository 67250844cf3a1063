//! Problem-specific model builders: the newsvendor robust counterpart and
//! the uncapacitated facility location family.

pub mod newsvendor;
pub mod ufl;

pub use newsvendor::{build_newsvendor_dr, NewsvendorInstance};
pub use ufl::{
    reference_ufl_instance, build_ufl_deterministic, build_ufl_dr, closed_form_cost,
    lemma1_linearization, UflInstance, UflSkeleton,
};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("no open facility")]
    NoOpenFacility,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("model build failed: {0}")]
    Build(String),
    #[error("solve failed: {0}")]
    Solve(String),
}
