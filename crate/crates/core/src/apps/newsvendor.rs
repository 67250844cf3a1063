//! Single-period newsvendor: order y units at cost c, pay a back-order
//! penalty c_b per unit of unmet demand and an inventory cost c_h per unit of
//! leftover stock. The second-stage cost is the max of two affine pieces,
//!
//!   H(y, d) = max{ -c_b y + c_b d,  c_h y - c_h d },
//!
//! which feeds straight into the robust-counterpart builder. A zero radius
//! routes to the expectation (stochastic programming) model.

use super::AppError;
use crate::dro::{self, AffinePiece, FirstStageSpec, RobustCounterpart, SecondStageSpec};
use crate::kl::{AmbiguitySet, EmpiricalDistribution};
use crate::mip::{self, IntegerVar, MipSettings, MipStatus};

#[derive(Debug, Clone)]
pub struct NewsvendorInstance {
    pub c: f64,
    pub c_b: f64,
    pub c_h: f64,
    pub demand: EmpiricalDistribution,
    pub epsilon: f64,
}

impl NewsvendorInstance {
    /// Requires c > 0, c_b > c (ordering is worthwhile), c_h > 0 and a
    /// nonnegative radius.
    pub fn new(
        c: f64,
        c_b: f64,
        c_h: f64,
        demand: EmpiricalDistribution,
        epsilon: f64,
    ) -> Result<Self, AppError> {
        if !(c > 0.0) {
            return Err(AppError::InvalidParameter(format!(
                "c must be > 0, got {c}"
            )));
        }
        if !(c_b > c) {
            return Err(AppError::InvalidParameter(format!(
                "c_b must exceed c ({c}), got {c_b}"
            )));
        }
        if !(c_h > 0.0) {
            return Err(AppError::InvalidParameter(format!(
                "c_h must be > 0, got {c_h}"
            )));
        }
        if epsilon < 0.0 {
            return Err(AppError::InvalidParameter(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        Ok(NewsvendorInstance {
            c,
            c_b,
            c_h,
            demand,
            epsilon,
        })
    }
}

/// H(y, d) = c_b max(d - y, 0) + c_h max(y - d, 0).
pub fn newsvendor_h(c_b: f64, c_h: f64, y: f64, d: f64) -> f64 {
    c_b * (d - y).max(0.0) + c_h * (y - d).max(0.0)
}

/// Order quantities above the largest observed demand are dominated (both the
/// order cost and every scenario's holding cost increase), so y ranges over
/// [0, ceil(max_s d_s)].
pub fn order_upper_bound(demand: &EmpiricalDistribution) -> i64 {
    demand.max_support().ceil().max(0.0) as i64
}

pub fn first_stage(inst: &NewsvendorInstance) -> FirstStageSpec {
    FirstStageSpec {
        num_vars: 1,
        cost: vec![inst.c],
        rows: Vec::new(),
        integers: vec![IntegerVar {
            col: 0,
            lower: 0,
            upper: order_upper_bound(&inst.demand),
        }],
    }
}

pub fn second_stage(inst: &NewsvendorInstance) -> SecondStageSpec {
    SecondStageSpec {
        pieces: vec![
            AffinePiece {
                y_coeff_const: vec![(0, -inst.c_b)],
                intercept_per_d: inst.c_b,
                ..Default::default()
            },
            AffinePiece {
                y_coeff_const: vec![(0, inst.c_h)],
                intercept_per_d: -inst.c_h,
                ..Default::default()
            },
        ],
    }
}

/// The robust counterpart with y integer in [0, max demand]; `epsilon = 0`
/// builds the expectation model instead.
pub fn build_newsvendor_dr(inst: &NewsvendorInstance) -> Result<RobustCounterpart, dro::DroError> {
    let amb = AmbiguitySet::new(inst.demand.clone(), inst.epsilon)?;
    dro::build_counterpart(&first_stage(inst), &[(second_stage(inst), amb)])
}

/// Build, solve, and extract (y*, objective).
pub fn optimal_order_quantity(
    inst: &NewsvendorInstance,
    settings: &MipSettings,
) -> Result<(i64, f64), AppError> {
    let rc = build_newsvendor_dr(inst).map_err(|e| AppError::Build(e.to_string()))?;
    let sol = mip::solve_mip(&rc.program, settings);
    if sol.status != MipStatus::Optimal {
        return Err(AppError::Solve(format!(
            "newsvendor solve ended with {:?}",
            sol.status
        )));
    }
    let y = rc.extract_y(&sol.x)[0] as i64;
    Ok((y, sol.objective_value))
}

/// Smallest integer order with empirical CDF at least (c_b - c)/(c_b + c_h);
/// the sample-average-approximation optimum (marginal-cost argument: the cost
/// difference of ordering one more unit changes sign at the critical ratio).
pub fn saa_critical_ratio_order(inst: &NewsvendorInstance) -> i64 {
    let ratio = (inst.c_b - inst.c) / (inst.c_b + inst.c_h);
    let mut pairs: Vec<(f64, f64)> = inst
        .demand
        .support()
        .iter()
        .copied()
        .zip(inst.demand.probs().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut y = 0i64;
    loop {
        let cdf: f64 = pairs
            .iter()
            .filter(|&&(d, _)| d <= y as f64)
            .map(|&(_, q)| q)
            .sum();
        if cdf >= ratio {
            return y;
        }
        y += 1;
    }
}

/// Expected cost under the empirical distribution at a fixed order quantity.
pub fn sp_cost(inst: &NewsvendorInstance, y: i64) -> f64 {
    inst.c * y as f64
        + inst
            .demand
            .support()
            .iter()
            .zip(inst.demand.probs())
            .map(|(&d, &q)| q * newsvendor_h(inst.c_b, inst.c_h, y as f64, d))
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dro::evaluate_true_objective;

    fn demand(support: &[f64], probs: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(support.to_vec(), probs.to_vec()).unwrap()
    }

    fn reference_costs(demand: EmpiricalDistribution, eps: f64) -> NewsvendorInstance {
        NewsvendorInstance::new(1.0, 2.0, 1.0, demand, eps).unwrap()
    }

    #[test]
    fn h_pieces_match_closed_form() {
        // max of the two pieces equals c_b max(d-y,0) + c_h max(y-d,0)
        let inst = reference_costs(demand(&[5.0], &[1.0]), 0.0);
        let spec = second_stage(&inst);
        for y in 0..=12 {
            for d in 0..=12 {
                let via_pieces = spec.h_value(&[y as f64], d as f64);
                let direct = newsvendor_h(2.0, 1.0, y as f64, d as f64);
                assert!(
                    (via_pieces - direct).abs() < 1e-12,
                    "y={y} d={d}: {via_pieces} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn structural_counts_s3() {
        // S = 3: columns 1 (y) + 1 (alpha) + 1 (beta) + 9 (triples) = 12
        // structural, plus 6 piece-row slacks; rows 6 piece + 3 equality.
        let inst = reference_costs(demand(&[1.0, 2.0, 3.0], &[0.25, 0.5, 0.25]), 0.1);
        let rc = build_newsvendor_dr(&inst).unwrap();
        let prog = &rc.program.base;
        assert_eq!(prog.num_rows(), 2 * 3 + 3);
        assert_eq!(prog.num_vars(), 12 + 6);
        match &rc.map.blocks[0] {
            crate::dro::BlockVars::Dr {
                alpha,
                beta,
                triples,
            } => {
                assert_eq!(*alpha, 1);
                assert_eq!(*beta, 2);
                assert_eq!(triples, &vec![3, 6, 9]);
            }
            _ => panic!("expected a robust block"),
        }
    }

    #[test]
    fn single_scenario_order_matches_demand() {
        // d = 5 deterministic: ordering exactly 5 costs c*5 with H = 0
        // regardless of the worst-case distribution.
        for eps in [0.0, 0.1, 0.3] {
            let inst = reference_costs(demand(&[5.0], &[1.0]), eps);
            let (y, obj) = optimal_order_quantity(&inst, &MipSettings::default()).unwrap();
            assert_eq!(y, 5, "eps={eps}");
            assert!((obj - 5.0).abs() < 1e-5, "eps={eps} obj={obj}");
        }
    }

    #[test]
    fn sp_solution_matches_critical_ratio_by_enumeration() {
        let d = demand(&[2.0, 4.0, 6.0, 9.0], &[0.3, 0.3, 0.2, 0.2]);
        let inst = reference_costs(d, 0.0);
        // enumerate the SP cost directly
        let ub = order_upper_bound(&inst.demand);
        let best = (0..=ub)
            .min_by(|&a, &b| sp_cost(&inst, a).partial_cmp(&sp_cost(&inst, b)).unwrap())
            .unwrap();
        assert_eq!(best, saa_critical_ratio_order(&inst));
        let (y, _) = optimal_order_quantity(&inst, &MipSettings::default()).unwrap();
        assert_eq!(y, best);
    }

    #[test]
    fn order_beyond_max_demand_is_dominated() {
        let d = demand(&[1.0, 3.0, 7.0], &[0.5, 0.3, 0.2]);
        for eps in [0.0, 0.2, 0.7] {
            let inst = reference_costs(d.clone(), eps);
            let first = first_stage(&inst);
            let amb = AmbiguitySet::new(inst.demand.clone(), inst.epsilon).unwrap();
            let seconds = [(second_stage(&inst), amb)];
            let ub = order_upper_bound(&inst.demand);
            // widen the bound so the evaluation accepts larger y
            let mut wide = first.clone();
            wide.integers[0].upper = ub + 5;
            let at_ub = evaluate_true_objective(&wide, &seconds, &[ub as f64]).unwrap();
            for extra in 1..=5 {
                let above =
                    evaluate_true_objective(&wide, &seconds, &[(ub + extra) as f64]).unwrap();
                assert!(
                    above > at_ub,
                    "eps={eps}: y={} not dominated ({above} <= {at_ub})",
                    ub + extra
                );
            }
        }
    }

    #[test]
    fn mip_matches_true_objective_at_optimum() {
        let d = demand(&[0.0, 2.0, 5.0, 8.0], &[0.25, 0.25, 0.25, 0.25]);
        let inst = reference_costs(d, 0.4);
        let rc = build_newsvendor_dr(&inst).unwrap();
        let sol = mip::solve_mip(&rc.program, &MipSettings::default());
        assert_eq!(sol.status, MipStatus::Optimal);
        let y = rc.extract_y(&sol.x);
        let amb = AmbiguitySet::new(inst.demand.clone(), inst.epsilon).unwrap();
        let truth = evaluate_true_objective(&first_stage(&inst), &[(second_stage(&inst), amb)], &y)
            .unwrap();
        assert!(
            (truth - sol.objective_value).abs() <= 1e-6 * (1.0 + truth.abs()),
            "reformulation {} vs direct {}",
            sol.objective_value,
            truth
        );
    }
}
