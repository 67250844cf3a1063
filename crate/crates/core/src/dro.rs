//! Assembles the robust counterpart of a KL-divergence constrained DRO
//! problem: a first-stage description (linear objective and constraints on y,
//! integrality marks) plus, per random element, a piecewise-max-affine
//! second-stage cost and an ambiguity set. The result is a mixed-integer
//! conic program with, per random element i, a free alpha^i, a nonnegative
//! beta^i and one dual-exponential-cone triple (u, v, w) per scenario:
//!
//!   min  h(y) + sum_i [ alpha^i + eps^i beta^i + sum_s q^i_s u^i_s ]
//!   s.t. alpha^i - v^i_s >= a_l(d^i_s) y + b_l(d^i_s)   (each piece l)
//!        beta^i + w^i_s = 0
//!        (u^i_s, v^i_s, w^i_s) in (K_exp)*,  beta^i >= 0,  y in Y.
//!
//! A block whose radius is zero is routed to the plain expectation model
//! instead (epigraph variables z_{i,s} with the same piece rows and objective
//! weight q_s), so a robustness level of zero degrades to stochastic
//! programming exactly.

use crate::cones::ConeBlock;
use crate::kl::{self, AmbiguitySet, KlError, WcMethod};
use crate::mip::{IntegerVar, MixedIntegerConicProgram};
use crate::program::{ProgramBuilder, Sense};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// First stage: linear cost h(y) = cost . y over nonnegative variables y,
/// linear rows defining Y, and integrality marks with finite bounds.
#[derive(Debug, Clone)]
pub struct FirstStageSpec {
    pub num_vars: usize,
    pub cost: Vec<f64>,
    pub rows: Vec<LinearRow>,
    pub integers: Vec<IntegerVar>,
}

impl FirstStageSpec {
    pub fn validate(&self) -> Result<(), DroError> {
        if self.cost.len() != self.num_vars {
            return Err(DroError::Shape(format!(
                "cost has {} entries for {} variables",
                self.cost.len(),
                self.num_vars
            )));
        }
        for row in &self.rows {
            if row.coeffs.iter().any(|&(j, _)| j >= self.num_vars) {
                return Err(DroError::Shape("row references undeclared y".into()));
            }
        }
        for iv in &self.integers {
            if iv.col >= self.num_vars {
                return Err(DroError::Shape("integer mark out of range".into()));
            }
        }
        Ok(())
    }

    /// y in Y: bounds of integer marks plus every linear row, at slack `tol`.
    pub fn is_feasible(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.num_vars || y.iter().any(|&v| v < -tol) {
            return false;
        }
        for iv in &self.integers {
            let v = y[iv.col];
            if v < iv.lower as f64 - tol || v > iv.upper as f64 + tol {
                return false;
            }
        }
        self.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().map(|&(j, c)| c * y[j]).sum();
            match row.rel {
                Rel::Le => lhs <= row.rhs + tol,
                Rel::Ge => lhs >= row.rhs - tol,
                Rel::Eq => (lhs - row.rhs).abs() <= tol,
            }
        })
    }
}

/// One affine piece of a second-stage cost, parameterized by the realization:
/// coefficient on y_j is `y_coeff_const[j] + d * y_coeff_per_d[j]` and the
/// intercept is `intercept_const + d * intercept_per_d`.
#[derive(Debug, Clone, Default)]
pub struct AffinePiece {
    pub y_coeff_const: Vec<(usize, f64)>,
    pub y_coeff_per_d: Vec<(usize, f64)>,
    pub intercept_const: f64,
    pub intercept_per_d: f64,
}

impl AffinePiece {
    /// Sparse y-coefficients and intercept at realization `d`.
    pub fn at(&self, d: f64) -> (Vec<(usize, f64)>, f64) {
        let mut coeffs: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for &(j, c) in &self.y_coeff_const {
            *coeffs.entry(j).or_insert(0.0) += c;
        }
        for &(j, c) in &self.y_coeff_per_d {
            *coeffs.entry(j).or_insert(0.0) += c * d;
        }
        (
            coeffs.into_iter().collect(),
            self.intercept_const + self.intercept_per_d * d,
        )
    }

    pub fn value(&self, y: &[f64], d: f64) -> f64 {
        let (coeffs, intercept) = self.at(d);
        coeffs.iter().map(|&(j, c)| c * y[j]).sum::<f64>() + intercept
    }
}

/// Second-stage cost H^i(y, d) = max over pieces of an affine function of y.
#[derive(Debug, Clone)]
pub struct SecondStageSpec {
    pub pieces: Vec<AffinePiece>,
}

impl SecondStageSpec {
    pub fn h_value(&self, y: &[f64], d: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.value(y, d))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum DroError {
    #[error("epsilon must be positive for the robust counterpart, got {0}")]
    EpsilonNonpositive(f64),
    #[error("second-stage cost has no pieces")]
    EmptyPieces,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("y violates the first-stage constraints")]
    YInfeasible,
    #[error(transparent)]
    Kl(#[from] KlError),
}

/// Column bookkeeping for one random element of the counterpart.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum BlockVars {
    /// Robust block: alpha column, beta column, per-scenario DualExp triple
    /// start columns.
    Dr {
        alpha: usize,
        beta: usize,
        triples: Vec<usize>,
    },
    /// Expectation block: per-scenario epigraph columns.
    Sp { epigraph: Vec<usize> },
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VariableMap {
    /// Columns of the first-stage y variables.
    pub y_start: usize,
    pub y_len: usize,
    pub blocks: Vec<BlockVars>,
}

#[derive(Debug, Clone)]
pub struct RobustCounterpart {
    pub program: MixedIntegerConicProgram,
    pub map: VariableMap,
}

/// The fully robust counterpart: every block gets the dual-cone machinery,
/// so every radius must be strictly positive.
pub fn build_robust_counterpart(
    first: &FirstStageSpec,
    seconds: &[(SecondStageSpec, AmbiguitySet)],
) -> Result<RobustCounterpart, DroError> {
    for (_, amb) in seconds {
        if amb.epsilon <= 0.0 {
            return Err(DroError::EpsilonNonpositive(amb.epsilon));
        }
    }
    build_counterpart(first, seconds)
}

/// Mixed routing: blocks with epsilon > 0 get the dual-exponential-cone
/// machinery, blocks with epsilon = 0 get expectation epigraphs. With every
/// epsilon zero this is the stochastic-programming model.
pub fn build_counterpart(
    first: &FirstStageSpec,
    seconds: &[(SecondStageSpec, AmbiguitySet)],
) -> Result<RobustCounterpart, DroError> {
    first.validate()?;
    for (spec, _) in seconds {
        if spec.pieces.is_empty() {
            return Err(DroError::EmptyPieces);
        }
    }

    let mut b = ProgramBuilder::new(Sense::Minimize);
    let y_start = b.add_block(ConeBlock::nonneg(first.num_vars));
    for (j, &c) in first.cost.iter().enumerate() {
        b.set_objective(y_start + j, c);
    }

    // per-element alpha/beta or epigraph variables, in element order
    let mut blocks: Vec<BlockVars> = Vec::with_capacity(seconds.len());
    for (_, amb) in seconds {
        if amb.epsilon > 0.0 {
            let alpha = b.add_block(ConeBlock::zero(1));
            let beta = b.add_block(ConeBlock::nonneg(1));
            b.set_objective(alpha, 1.0);
            b.set_objective(beta, amb.epsilon);
            blocks.push(BlockVars::Dr {
                alpha,
                beta,
                triples: Vec::new(),
            });
        } else {
            let s_count = amb.len();
            let z = b.add_block(ConeBlock::zero(s_count));
            for (s, &q) in amb.base.probs().iter().enumerate() {
                b.set_objective(z + s, q);
            }
            blocks.push(BlockVars::Sp {
                epigraph: (z..z + s_count).collect(),
            });
        }
    }
    // per-(i, s) dual exponential triples for the robust blocks
    for (i, (_, amb)) in seconds.iter().enumerate() {
        if let BlockVars::Dr { triples, .. } = &mut blocks[i] {
            for s in 0..amb.len() {
                let t = b.add_block(ConeBlock::dual_exp());
                b.set_objective(t, amb.base.probs()[s]); // q_s u_s
                triples.push(t);
            }
        }
    }

    // first-stage rows
    for row in &first.rows {
        let coeffs: Vec<(usize, f64)> = row.coeffs.iter().map(|&(j, c)| (y_start + j, c)).collect();
        match row.rel {
            Rel::Le => {
                b.add_le_row(&coeffs, row.rhs);
            }
            Rel::Ge => {
                b.add_ge_row(&coeffs, row.rhs);
            }
            Rel::Eq => {
                b.add_eq_row(&coeffs, row.rhs);
            }
        }
    }

    // per-element rows
    for (i, (spec, amb)) in seconds.iter().enumerate() {
        let d_values = amb.base.support();
        match &blocks[i] {
            BlockVars::Dr {
                alpha,
                beta,
                triples,
            } => {
                for (s, &d) in d_values.iter().enumerate() {
                    let t = triples[s];
                    let (u, v, w) = (t, t + 1, t + 2);
                    let _ = u;
                    // alpha - v_s - a_l(d) . y >= b_l(d), one row per piece
                    for piece in &spec.pieces {
                        let (coeffs_d, intercept) = piece.at(d);
                        let mut coeffs: Vec<(usize, f64)> = vec![(*alpha, 1.0), (v, -1.0)];
                        for (j, c) in coeffs_d {
                            coeffs.push((y_start + j, -c));
                        }
                        b.add_ge_row(&coeffs, intercept);
                    }
                    // beta + w_s = 0
                    b.add_eq_row(&[(*beta, 1.0), (w, 1.0)], 0.0);
                }
            }
            BlockVars::Sp { epigraph } => {
                for (s, &d) in d_values.iter().enumerate() {
                    let z = epigraph[s];
                    for piece in &spec.pieces {
                        let (coeffs_d, intercept) = piece.at(d);
                        let mut coeffs: Vec<(usize, f64)> = vec![(z, 1.0)];
                        for (j, c) in coeffs_d {
                            coeffs.push((y_start + j, -c));
                        }
                        b.add_ge_row(&coeffs, intercept);
                    }
                }
            }
        }
    }

    let integers: Vec<IntegerVar> = first
        .integers
        .iter()
        .map(|iv| IntegerVar {
            col: y_start + iv.col,
            lower: iv.lower,
            upper: iv.upper,
        })
        .collect();
    let program = MixedIntegerConicProgram {
        base: b.build(),
        integers,
    };
    debug_assert!(program.validate().is_ok());
    Ok(RobustCounterpart {
        program,
        map: VariableMap {
            y_start,
            y_len: first.num_vars,
            blocks,
        },
    })
}

/// Direct evaluation of the min-max objective at a fixed first-stage
/// decision: h(y) + sum_i worst-case expectation of H^i(y, .) over the i-th
/// ambiguity set, computed through the scalar-dual path so it is independent
/// of the conic reformulation it cross-checks.
pub fn evaluate_true_objective(
    first: &FirstStageSpec,
    seconds: &[(SecondStageSpec, AmbiguitySet)],
    y: &[f64],
) -> Result<f64, DroError> {
    first.validate()?;
    if !first.is_feasible(y, 1e-6) {
        return Err(DroError::YInfeasible);
    }
    let mut total: f64 = first.cost.iter().zip(y).map(|(c, v)| c * v).sum();
    for (spec, amb) in seconds {
        if spec.pieces.is_empty() {
            return Err(DroError::EmptyPieces);
        }
        let h: Vec<f64> = amb
            .base
            .support()
            .iter()
            .map(|&d| spec.h_value(y, d))
            .collect();
        total += kl::worst_case_expectation(amb, &h, WcMethod::ScalarDual)?.value;
    }
    Ok(total)
}

impl RobustCounterpart {
    /// Serialize to `<stem>.cone` (solver interchange format) plus the
    /// sidecar `<stem>.map.toml` holding the index maps and integrality
    /// marks.
    pub fn save(&self, stem: &std::path::Path) -> std::io::Result<()> {
        let cone = stem.with_extension("cone");
        std::fs::write(&cone, self.program.base.to_interchange())?;
        let sidecar = Sidecar {
            y_start: self.map.y_start,
            y_len: self.map.y_len,
            blocks: self.map.blocks.clone(),
            integers: self
                .program
                .integers
                .iter()
                .map(|iv| (iv.col, iv.lower, iv.upper))
                .collect(),
        };
        let text = toml::to_string(&sidecar)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        std::fs::write(stem.with_extension("map.toml"), text)
    }

    pub fn load(stem: &std::path::Path) -> std::io::Result<Self> {
        let cone_text = std::fs::read_to_string(stem.with_extension("cone"))?;
        let base = crate::program::ConicProgram::from_interchange(&cone_text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        let sidecar_text = std::fs::read_to_string(stem.with_extension("map.toml"))?;
        let sidecar: Sidecar = toml::from_str(&sidecar_text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(RobustCounterpart {
            program: MixedIntegerConicProgram {
                base,
                integers: sidecar
                    .integers
                    .iter()
                    .map(|&(col, lower, upper)| IntegerVar { col, lower, upper })
                    .collect(),
            },
            map: VariableMap {
                y_start: sidecar.y_start,
                y_len: sidecar.y_len,
                blocks: sidecar.blocks,
            },
        })
    }

    /// First-stage components of a solution vector, rounded to integers where
    /// marked.
    pub fn extract_y(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x[self.map.y_start..self.map.y_start + self.map.y_len].to_vec();
        for iv in &self.program.integers {
            let local = iv.col - self.map.y_start;
            if local < y.len() {
                y[local] = y[local].round();
            }
        }
        y
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Sidecar {
    y_start: usize,
    y_len: usize,
    blocks: Vec<BlockVars>,
    integers: Vec<(usize, i64, i64)>,
}
