//! Kullback-Leibler divergence machinery: divergence evaluation, the maximum
//! attainable divergence from an empirical distribution, ambiguity sets, the
//! exponential-cone epigraph template, and the worst-case expectation problem
//! with two independent solution paths (conic and a one-dimensional dual
//! search) that cross-validate each other.

use crate::cones::{exp_cone_contains, ConeBlock};
use crate::ipm::{self, SolveStatus, SolverSettings};
use crate::program::{ConicProgram, ProgramBuilder, Sense};
use thiserror::Error;

/// Simplex-sum slack accepted when validating raw probability vectors.
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum KlError {
    #[error("probability vectors have lengths {p} and {q}")]
    DimensionMismatch { p: usize, q: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("epsilon must be nonnegative, got {0}")]
    EpsilonNegative(f64),
    #[error("the conic inner problem requires epsilon > 0, got {0}")]
    EpsilonNonpositive(f64),
    #[error("solver failed with status {0:?}")]
    SolverFailure(SolveStatus),
}

/// Discrete distribution with strictly positive probabilities on distinct
/// support points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self, KlError> {
        if support.len() != probs.len() {
            return Err(KlError::DimensionMismatch {
                p: support.len(),
                q: probs.len(),
            });
        }
        if support.is_empty() {
            return Err(KlError::InvalidDistribution("empty support".into()));
        }
        if probs.iter().any(|&q| q <= 0.0 || !q.is_finite()) {
            return Err(KlError::InvalidDistribution(
                "probabilities must be strictly positive".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(KlError::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let mut sorted = support.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(KlError::InvalidDistribution(
                "support values must be distinct".into(),
            ));
        }
        Ok(EmpiricalDistribution { support, probs })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(d, q)| d * q)
            .sum()
    }

    pub fn max_support(&self) -> f64 {
        self.support
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// All distributions within KL radius `epsilon` of `base`.
#[derive(Debug, Clone)]
pub struct AmbiguitySet {
    pub base: EmpiricalDistribution,
    pub epsilon: f64,
}

impl AmbiguitySet {
    /// `epsilon >= 0` required; radii beyond [`max_kl`] are legal (the set
    /// saturates at the whole simplex).
    pub fn new(base: EmpiricalDistribution, epsilon: f64) -> Result<Self, KlError> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(KlError::EpsilonNegative(epsilon));
        }
        Ok(AmbiguitySet { base, epsilon })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn validate_simplex(v: &[f64], name: &str, strict: bool) -> Result<(), KlError> {
    for &x in v {
        if strict && (x <= 0.0 || !x.is_finite()) {
            return Err(KlError::InvalidDistribution(format!(
                "{name} must be strictly positive"
            )));
        }
        if !strict && (x < -SIMPLEX_TOL || !x.is_finite()) {
            return Err(KlError::InvalidDistribution(format!(
                "{name} has a negative entry"
            )));
        }
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(KlError::InvalidDistribution(format!(
            "{name} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// D_KL(p || q) = sum p_s log(p_s / q_s), with 0 log 0 = 0. Requires p in the
/// simplex and q in its relative interior.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, KlError> {
    if p.len() != q.len() {
        return Err(KlError::DimensionMismatch {
            p: p.len(),
            q: q.len(),
        });
    }
    validate_simplex(q, "q", true)?;
    validate_simplex(p, "p", false)?;
    let mut total = 0.0;
    for (&ps, &qs) in p.iter().zip(q) {
        if ps > 0.0 {
            total += ps * (ps / qs).ln();
        }
    }
    Ok(total)
}

/// Maximum attainable KL divergence from `q`: log(1 / min_s q_s), the
/// supremum of D_KL(p || q) over the simplex (attained at a unit vector).
pub fn max_kl(q: &EmpiricalDistribution) -> f64 {
    let q_min = q.probs.iter().cloned().fold(f64::INFINITY, f64::min);
    (1.0 / q_min).ln()
}

/// Reusable template for the exponential-cone epigraph of the KL constraint:
/// S exponential-cone triples (q_s, p_s, -delta_s) plus one linear budget row
/// sum delta_s <= epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KlEpigraphTemplate {
    pub scenario_count: usize,
}

/// Template with `s` scenarios; `s >= 1`.
pub fn kl_epigraph_blocks(s: usize) -> KlEpigraphTemplate {
    assert!(s >= 1, "at least one scenario");
    KlEpigraphTemplate { scenario_count: s }
}

impl KlEpigraphTemplate {
    /// The S exponential-cone blocks of the template.
    pub fn blocks(&self) -> Vec<ConeBlock> {
        vec![ConeBlock::exp(); self.scenario_count]
    }

    /// Number of linear rows the template adds (the divergence budget row).
    pub fn linear_rows(&self) -> usize {
        1
    }

    /// Feasibility of an explicit assignment (q, p, delta) at slack `tol`:
    /// every triple (q_s, p_s, -delta_s) in K_exp and sum delta <= eps + tol.
    pub fn is_feasible(&self, q: &[f64], p: &[f64], delta: &[f64], epsilon: f64, tol: f64) -> bool {
        if q.len() != self.scenario_count
            || p.len() != self.scenario_count
            || delta.len() != self.scenario_count
        {
            return false;
        }
        let budget: f64 = delta.iter().sum();
        if budget > epsilon + tol {
            return false;
        }
        q.iter()
            .zip(p)
            .zip(delta)
            .all(|((&qs, &ps), &ds)| exp_cone_contains([qs, ps, -ds], tol))
    }
}

/// The worst-case expectation problem over the ambiguity set, as an
/// exponential cone constrained maximization in standard form:
///
///   max sum_s H_s p_s
///   s.t. sum_s p_s = 1, sum_s delta_s <= eps, (q_s, p_s, -delta_s) in K_exp.
///
/// Column layout: scenario s owns the Exp triple at columns (3s, 3s+1, 3s+2)
/// holding (a_s, p_s, m_s) with a_s pinned to q_s by an equality row and
/// delta_s = -m_s; the budget slack is the final column.
pub fn build_inner_primal(
    ambiguity: &AmbiguitySet,
    h_values: &[f64],
) -> Result<ConicProgram, KlError> {
    if h_values.len() != ambiguity.len() {
        return Err(KlError::DimensionMismatch {
            p: h_values.len(),
            q: ambiguity.len(),
        });
    }
    if ambiguity.epsilon <= 0.0 {
        return Err(KlError::EpsilonNonpositive(ambiguity.epsilon));
    }
    let template = kl_epigraph_blocks(ambiguity.len());
    let mut b = ProgramBuilder::new(Sense::Maximize);
    let mut triples = Vec::with_capacity(template.scenario_count);
    for (s, blk) in template.blocks().into_iter().enumerate() {
        let t = b.add_block(blk);
        b.add_eq_row(&[(t, 1.0)], ambiguity.base.probs()[s]);
        b.set_objective(t + 1, h_values[s]);
        triples.push(t);
    }
    let simplex: Vec<(usize, f64)> = triples.iter().map(|&t| (t + 1, 1.0)).collect();
    b.add_eq_row(&simplex, 1.0);
    let budget: Vec<(usize, f64)> = triples.iter().map(|&t| (t + 2, -1.0)).collect();
    b.add_le_row(&budget, ambiguity.epsilon);
    Ok(b.build())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcMethod {
    /// Solve the exponential-cone program with the interior-point method.
    Conic,
    /// One-dimensional dual search; the independent oracle.
    ScalarDual,
}

#[derive(Debug, Clone)]
pub struct WorstCase {
    pub value: f64,
    pub worst_p: Vec<f64>,
}

/// max_{p in P(q, eps)} sum_s p_s H_s. With eps = 0 the set is {q} and the
/// value is the plain expectation; both methods handle that case without
/// touching the conic machinery.
pub fn worst_case_expectation(
    ambiguity: &AmbiguitySet,
    h_values: &[f64],
    method: WcMethod,
) -> Result<WorstCase, KlError> {
    if h_values.len() != ambiguity.len() {
        return Err(KlError::DimensionMismatch {
            p: h_values.len(),
            q: ambiguity.len(),
        });
    }
    let q = ambiguity.base.probs();
    if ambiguity.epsilon == 0.0 {
        let value = q.iter().zip(h_values).map(|(a, b)| a * b).sum();
        return Ok(WorstCase {
            value,
            worst_p: q.to_vec(),
        });
    }
    match method {
        WcMethod::Conic => {
            let prog = build_inner_primal(ambiguity, h_values)?;
            let sol = ipm::solve(&prog, &SolverSettings::default());
            if sol.status != SolveStatus::Optimal {
                return Err(KlError::SolverFailure(sol.status));
            }
            let worst_p: Vec<f64> = (0..ambiguity.len())
                .map(|s| sol.x[3 * s + 1].max(0.0))
                .collect();
            Ok(WorstCase {
                value: sol.objective_value,
                worst_p,
            })
        }
        WcMethod::ScalarDual => Ok(scalar_dual(ambiguity, h_values)),
    }
}

/// The one-dimensional reduction: by Lagrangian duality on the KL constraint,
///
///   max_{D_KL(p||q) <= eps} sum p_s H_s = min_{beta > 0} g(beta),
///   g(beta) = beta eps + beta log sum_s q_s exp(H_s / beta),
///
/// where the inner sup over the simplex is the log-sum-exp identity. g is
/// convex; it is minimized by golden-section search on log beta over the
/// bracket [1e-8, 1e8], with H shifted by max_s H_s so the exponentials never
/// overflow (the shift adds back exactly max_s H_s). This reduction is
/// validated against the conic path by the cross-method oracle suite.
fn scalar_dual(ambiguity: &AmbiguitySet, h: &[f64]) -> WorstCase {
    let q = ambiguity.base.probs();
    let eps = ambiguity.epsilon;
    let s_count = h.len();
    let m = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax = h.iter().position(|&v| v == m).expect("nonempty H vector");

    // saturated set: every vertex is feasible, the max is a vertex value
    if eps >= max_kl(&ambiguity.base) {
        let mut p = vec![0.0; s_count];
        p[argmax] = 1.0;
        return WorstCase {
            value: m,
            worst_p: p,
        };
    }
    // constant H: any feasible p gives the same value
    let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    if m - h_min == 0.0 {
        return WorstCase {
            value: m,
            worst_p: q.to_vec(),
        };
    }

    let g = |beta: f64| -> f64 {
        let z: f64 = q
            .iter()
            .zip(h)
            .map(|(&qs, &hs)| qs * ((hs - m) / beta).exp())
            .sum();
        beta * eps + m + beta * z.ln()
    };

    // golden section on t = ln beta
    let (mut lo, mut hi) = (1e-8f64.ln(), 1e8f64.ln());
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut t1 = hi - phi * (hi - lo);
    let mut t2 = lo + phi * (hi - lo);
    let mut g1 = g(t1.exp());
    let mut g2 = g(t2.exp());
    for _ in 0..120 {
        if g1 <= g2 {
            hi = t2;
            t2 = t1;
            g2 = g1;
            t1 = hi - phi * (hi - lo);
            g1 = g(t1.exp());
        } else {
            lo = t1;
            t1 = t2;
            g1 = g2;
            t2 = lo + phi * (hi - lo);
            g2 = g(t2.exp());
        }
    }
    let beta = ((lo + hi) / 2.0).exp();
    let value = g(beta);

    // worst distribution: p_s proportional to q_s exp(H_s / beta)
    let weights: Vec<f64> = q
        .iter()
        .zip(h)
        .map(|(&qs, &hs)| qs * ((hs - m) / beta).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let worst_p = weights.iter().map(|w| w / total).collect();
    WorstCase { value, worst_p }
}
