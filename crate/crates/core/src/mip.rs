//! Mixed-integer conic programs solved by branch-and-bound over continuous
//! relaxations, plus an exhaustive-enumeration mode used as the independent
//! oracle in tests.
//!
//! Node selection is best-first by relaxation bound, branching picks the most
//! fractional variable (ties to the lowest index), and a node whose
//! relaxation fails numerically is pruned with a logged warning so the
//! experiment harness survives isolated solver hiccups. Everything is
//! deterministic: the node queue orders by (bound, insertion sequence).

use crate::cones::ConeKind;
use crate::ipm::{self, SolveStatus, SolverSettings};
use crate::program::{ConicProgram, Sense};
use std::collections::BinaryHeap;

/// Integrality mark: column index plus finite inclusive bounds.
#[derive(Debug, Clone, Copy)]
pub struct IntegerVar {
    pub col: usize,
    pub lower: i64,
    pub upper: i64,
}

#[derive(Debug, Clone)]
pub struct MixedIntegerConicProgram {
    pub base: ConicProgram,
    pub integers: Vec<IntegerVar>,
}

impl MixedIntegerConicProgram {
    /// Integer variables must sit in Zero or Nonneg blocks (never inside an
    /// exponential triple) and carry finite bounds.
    pub fn validate(&self) -> Result<(), String> {
        self.base.validate().map_err(|e| e.to_string())?;
        let ranges = self.base.block_ranges();
        for iv in &self.integers {
            if iv.lower > iv.upper {
                return Err(format!("integer var {} has empty bounds", iv.col));
            }
            let blk = ranges
                .iter()
                .find(|(_, r)| r.contains(&iv.col))
                .map(|(b, _)| *b)
                .ok_or_else(|| format!("integer var {} out of range", iv.col))?;
            if !matches!(blk.kind, ConeKind::Zero | ConeKind::Nonneg) {
                return Err(format!(
                    "integer var {} sits in a {:?} block",
                    iv.col, blk.kind
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub nodes_explored: usize,
    /// Valid bound from the node tree (in the program's sense).
    pub best_bound: f64,
}

#[derive(Debug, Clone)]
pub struct MipSettings {
    pub gap_tol: f64,
    pub node_limit: usize,
    pub integrality_tol: f64,
    pub solver: SolverSettings,
}

impl Default for MipSettings {
    fn default() -> Self {
        MipSettings {
            gap_tol: 1e-6,
            node_limit: 10_000,
            integrality_tol: 1e-6,
            solver: SolverSettings::default(),
        }
    }
}

impl MipSettings {
    /// Default settings with the node relaxations solved at `tol`.
    pub fn with_solver_tol(tol: f64) -> Self {
        MipSettings {
            solver: SolverSettings::with_tol(tol),
            ..Default::default()
        }
    }
}

/// A node's box on the integer variables, aligned with `mip.integers`.
type IntBox = Vec<(i64, i64)>;

/// Clone the base program and append rows enforcing the box. A fixed variable
/// gets an equality row; otherwise a lower-bound row is added when it is
/// informative (> 0, or any value for free variables) and an upper-bound row
/// always (bounds are finite by the type invariant).
fn relaxation_with_box(mip: &MixedIntegerConicProgram, ibox: &IntBox) -> ConicProgram {
    let mut prog = mip.base.clone();
    let ranges = prog.block_ranges();
    let kind_of = |col: usize| -> ConeKind {
        ranges
            .iter()
            .find(|(_, r)| r.contains(&col))
            .map(|(b, _)| b.kind)
            .unwrap()
    };
    let mut entries = prog.a.triplets();
    let mut rhs = prog.rhs.clone();
    let mut cones = prog.cones.clone();
    let mut ncols = prog.num_vars();
    let mut objective = prog.objective.clone();
    let add_row = |entries: &mut Vec<(usize, usize, f64)>,
                   rhs: &mut Vec<f64>,
                   cones: &mut Vec<crate::cones::ConeBlock>,
                   ncols: &mut usize,
                   objective: &mut Vec<f64>,
                   coeffs: &[(usize, f64)],
                   slack_sign: Option<f64>,
                   value: f64| {
        let row = rhs.len();
        for &(j, v) in coeffs {
            entries.push((row, j, v));
        }
        if let Some(sign) = slack_sign {
            let slack = *ncols;
            *ncols += 1;
            cones.push(crate::cones::ConeBlock::nonneg(1));
            objective.push(0.0);
            entries.push((row, slack, sign));
        }
        rhs.push(value);
    };
    for (iv, &(lo, hi)) in mip.integers.iter().zip(ibox) {
        if lo == hi {
            add_row(
                &mut entries,
                &mut rhs,
                &mut cones,
                &mut ncols,
                &mut objective,
                &[(iv.col, 1.0)],
                None,
                lo as f64,
            );
            continue;
        }
        let nonneg = kind_of(iv.col) == ConeKind::Nonneg;
        if lo > 0 || (!nonneg && lo != i64::MIN) {
            // col - slack = lo
            add_row(
                &mut entries,
                &mut rhs,
                &mut cones,
                &mut ncols,
                &mut objective,
                &[(iv.col, 1.0)],
                Some(-1.0),
                lo as f64,
            );
        }
        // col + slack = hi
        add_row(
            &mut entries,
            &mut rhs,
            &mut cones,
            &mut ncols,
            &mut objective,
            &[(iv.col, 1.0)],
            Some(1.0),
            hi as f64,
        );
    }
    prog.a = crate::linalg::CscMatrix::from_triplets(rhs.len(), ncols, &entries);
    prog.rhs = rhs;
    prog.cones = cones;
    prog.objective = objective;
    prog.variable_names = None;
    prog
}

/// Internal minimization value of a solved relaxation.
fn min_sense_value(prog: &ConicProgram, obj: f64) -> f64 {
    match prog.sense {
        Sense::Minimize => obj,
        Sense::Maximize => -obj,
    }
}

struct Node {
    bound: f64, // min-sense lower bound inherited from the parent
    seq: usize,
    ibox: IntBox,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse for best-first (lowest bound)
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-first branch-and-bound. The incumbent is integer-feasible (every
/// integer variable within the integrality tolerance of an integer, then
/// rounded) and the reported best bound is valid for the whole tree.
pub fn solve_mip(mip: &MixedIntegerConicProgram, settings: &MipSettings) -> MipSolution {
    debug_assert!(mip.validate().is_ok(), "{:?}", mip.validate());
    let sense = mip.base.sense;
    let root_box: IntBox = mip.integers.iter().map(|iv| (iv.lower, iv.upper)).collect();

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        ibox: root_box,
    });

    let mut incumbent: Option<(f64, Vec<f64>)> = None; // (min-sense value, x)
    let mut nodes_explored = 0usize;

    while let Some(node) = heap.pop() {
        if nodes_explored >= settings.node_limit {
            // push back so the bound accounting below sees it
            heap.push(node);
            break;
        }
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - settings.gap_tol {
                continue;
            }
        }
        nodes_explored += 1;
        let relax = relaxation_with_box(mip, &node.ibox);
        let sol = ipm::solve(&relax, &settings.solver);
        match sol.status {
            SolveStatus::PrimalInfeasible => continue,
            SolveStatus::Optimal => {}
            other => {
                log::warn!("pruning node with relaxation status {other:?}");
                continue;
            }
        }
        let value = min_sense_value(&relax, sol.objective_value);
        if let Some((inc, _)) = &incumbent {
            if value >= inc - settings.gap_tol {
                continue;
            }
        }
        // most fractional variable: largest distance to the nearest integer,
        // ties to the lowest index (strict > keeps the first maximum)
        let mut most: Option<(usize, f64, f64)> = None;
        for (k, iv) in mip.integers.iter().enumerate() {
            let v = sol.x[iv.col];
            let dist = (v - v.round()).abs();
            if dist > settings.integrality_tol {
                let score = 0.5 - ((v - v.floor()) - 0.5).abs();
                if most.map(|(_, s, _)| score > s).unwrap_or(true) {
                    most = Some((k, score, v));
                }
            }
        }
        match most {
            None => {
                // integer feasible: round and accept
                let mut x = sol.x.clone();
                for iv in &mip.integers {
                    x[iv.col] = x[iv.col].round();
                }
                if incumbent
                    .as_ref()
                    .map(|(inc, _)| value < *inc)
                    .unwrap_or(true)
                {
                    incumbent = Some((value, x));
                }
            }
            Some((k, _, v)) => {
                let (lo, hi) = node.ibox[k];
                let floor = v.floor().clamp(lo as f64, hi as f64) as i64;
                let mut left = node.ibox.clone();
                left[k] = (lo, floor);
                let mut right = node.ibox.clone();
                right[k] = (floor + 1, hi);
                for child in [left, right] {
                    if child[k].0 <= child[k].1 {
                        seq += 1;
                        heap.push(Node {
                            bound: value,
                            seq,
                            ibox: child,
                        });
                    }
                }
            }
        }
    }

    let node_limited = !heap.is_empty() && nodes_explored >= settings.node_limit;

    match incumbent {
        Some((value, x)) => {
            let best_bound_min = if node_limited {
                heap.iter().map(|n| n.bound).fold(value, f64::min)
            } else {
                value
            };
            let (objective_value, best_bound) = match sense {
                Sense::Minimize => (value, best_bound_min),
                Sense::Maximize => (-value, -best_bound_min),
            };
            MipSolution {
                status: if node_limited {
                    MipStatus::NodeLimit
                } else {
                    MipStatus::Optimal
                },
                x,
                objective_value,
                nodes_explored,
                best_bound,
            }
        }
        None => MipSolution {
            status: if node_limited {
                MipStatus::NodeLimit
            } else {
                // either the root relaxation was infeasible or every leaf was
                MipStatus::Infeasible
            },
            x: Vec::new(),
            objective_value: f64::NAN,
            nodes_explored,
            best_bound: f64::NAN,
        },
    }
}

/// Fix the integer variables to each candidate assignment, solve the
/// continuous remainder, and return the best. Ground-truth oracle for
/// [`solve_mip`]; candidates must cover every assignment of interest.
pub fn solve_by_enumeration(
    mip: &MixedIntegerConicProgram,
    candidates: &[Vec<i64>],
    settings: &MipSettings,
) -> MipSolution {
    let sense = mip.base.sense;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut explored = 0usize;
    for cand in candidates {
        assert_eq!(cand.len(), mip.integers.len());
        let ibox: IntBox = cand.iter().map(|&v| (v, v)).collect();
        let relax = relaxation_with_box(mip, &ibox);
        let sol = ipm::solve(&relax, &settings.solver);
        explored += 1;
        if sol.status != SolveStatus::Optimal {
            continue;
        }
        let value = min_sense_value(&relax, sol.objective_value);
        if best.as_ref().map(|(b, _)| value < *b).unwrap_or(true) {
            let mut x = sol.x.clone();
            for (iv, &v) in mip.integers.iter().zip(cand) {
                x[iv.col] = v as f64;
            }
            best = Some((value, x));
        }
    }
    match best {
        Some((value, x)) => {
            let objective_value = match sense {
                Sense::Minimize => value,
                Sense::Maximize => -value,
            };
            MipSolution {
                status: MipStatus::Optimal,
                x,
                objective_value,
                nodes_explored: explored,
                best_bound: objective_value,
            }
        }
        None => MipSolution {
            status: MipStatus::Infeasible,
            x: Vec::new(),
            objective_value: f64::NAN,
            nodes_explored: explored,
            best_bound: f64::NAN,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::ProgramBuilder;

    #[test]
    fn pure_lp_mip_rounds_up() {
        // min y s.t. y >= 2.3, y integer in [0, 10] -> y* = 3
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let y = b.add_var(ConeKind::Nonneg);
        b.set_objective(y, 1.0);
        b.add_ge_row(&[(y, 1.0)], 2.3);
        let mip = MixedIntegerConicProgram {
            base: b.build(),
            integers: vec![IntegerVar {
                col: y,
                lower: 0,
                upper: 10,
            }],
        };
        let sol = solve_mip(&mip, &MipSettings::default());
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.x[y], 3.0);
        assert!((sol.objective_value - 3.0).abs() < 1e-6);
        assert!(sol.objective_value - sol.best_bound <= 1e-6);
    }

    #[test]
    fn infeasible_root_detected() {
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let y = b.add_var(ConeKind::Nonneg);
        b.set_objective(y, 1.0);
        b.add_ge_row(&[(y, 1.0)], 5.0);
        b.add_le_row(&[(y, 1.0)], 1.0);
        let mip = MixedIntegerConicProgram {
            base: b.build(),
            integers: vec![IntegerVar {
                col: y,
                lower: 0,
                upper: 10,
            }],
        };
        let sol = solve_mip(&mip, &MipSettings::default());
        assert_eq!(sol.status, MipStatus::Infeasible);
    }

    #[test]
    fn enumeration_agrees_on_lp() {
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let y = b.add_var(ConeKind::Nonneg);
        let z = b.add_var(ConeKind::Nonneg);
        b.set_objective(y, 2.0);
        b.set_objective(z, 3.0);
        b.add_ge_row(&[(y, 1.0), (z, 2.0)], 4.7);
        let mip = MixedIntegerConicProgram {
            base: b.build(),
            integers: vec![
                IntegerVar {
                    col: y,
                    lower: 0,
                    upper: 6,
                },
                IntegerVar {
                    col: z,
                    lower: 0,
                    upper: 6,
                },
            ],
        };
        let bb = solve_mip(&mip, &MipSettings::default());
        let mut candidates = Vec::new();
        for a in 0..=6 {
            for c in 0..=6 {
                candidates.push(vec![a, c]);
            }
        }
        let en = solve_by_enumeration(&mip, &candidates, &MipSettings::default());
        assert_eq!(bb.status, MipStatus::Optimal);
        assert_eq!(en.status, MipStatus::Optimal);
        assert!(
            (bb.objective_value - en.objective_value).abs() <= 1e-6,
            "bb {} vs enum {}",
            bb.objective_value,
            en.objective_value
        );
    }

    #[test]
    fn validate_rejects_integer_in_exp_block() {
        let mut b = ProgramBuilder::new(Sense::Minimize);
        let t = b.add_block(crate::cones::ConeBlock::exp());
        b.add_eq_row(&[(t, 1.0)], 1.0);
        let mip = MixedIntegerConicProgram {
            base: b.build(),
            integers: vec![IntegerVar {
                col: t + 1,
                lower: 0,
                upper: 1,
            }],
        };
        assert!(mip.validate().is_err());
    }
}
