//! Fast self-verification suites behind the `check` CLI verb: randomized
//! strong duality, the facility-location linearization, the maximum-KL
//! formula, barrier derivatives against finite differences, and the
//! cross-method worst-case oracle. Deterministic seeds throughout.

use crate::apps::ufl::{lemma1_linearization, min_open_distance};
use crate::cones::{barrier, BarrierEval, ConeBlock, ConeKind};
use crate::harness::SplitMix64;
use crate::ipm::{solve_dual_pair_check, SolveStatus, SolverSettings};
use crate::kl::{
    build_inner_primal, kl_divergence, max_kl, worst_case_expectation, AmbiguitySet,
    EmpiricalDistribution, WcMethod,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

fn random_distribution(rng: &mut SplitMix64, max_s: usize) -> EmpiricalDistribution {
    let s = 2 + (rng.next_u64() as usize) % (max_s - 1);
    let mut probs: Vec<f64> = (0..s).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let support: Vec<f64> = (0..s).map(|k| k as f64).collect();
    EmpiricalDistribution::new(support, probs).unwrap()
}

/// Residual-vs-finite-difference comparator: does `eval` match the central
/// finite differences of the barrier at `point` to `rel_tol`? Exposed so a
/// deliberately tampered evaluation can be shown to fail.
pub fn eval_matches_finite_differences(
    block: &ConeBlock,
    point: &[f64],
    eval: &BarrierEval,
    rel_tol: f64,
) -> bool {
    let dim = block.dim;
    for j in 0..dim {
        let h = 1e-6 * point[j].abs().max(1.0);
        let mut xp = point.to_vec();
        let mut xm = point.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = match (barrier(block, &xp), barrier(block, &xm)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return false,
        };
        let fd_grad = (fp.value - fm.value) / (2.0 * h);
        if (fd_grad - eval.gradient[j]).abs() / eval.gradient[j].abs().max(1.0) > rel_tol {
            return false;
        }
        for i in 0..dim {
            let fd_hess = (fp.gradient[i] - fm.gradient[i]) / (2.0 * h);
            // central differences of the gradient carry ~1e-10 noise; scale
            // the comparison by the entry magnitude
            if (fd_hess - eval.hessian[i * dim + j]).abs()
                / eval.hessian[i * dim + j].abs().max(1.0)
                > rel_tol.max(1e-5)
            {
                return false;
            }
        }
    }
    true
}

/// Random strictly interior point of a block.
pub fn random_interior_point(block: &ConeBlock, rng: &mut SplitMix64) -> Vec<f64> {
    match block.kind {
        ConeKind::Zero => vec![0.0; block.dim],
        ConeKind::Nonneg => (0..block.dim).map(|_| 0.1 + 4.9 * rng.next_f64()).collect(),
        ConeKind::Exp => {
            let x2 = 0.2 + 2.8 * rng.next_f64();
            let x3 = -2.0 + 4.0 * rng.next_f64();
            let x1 = x2 * (x3 / x2).exp() * (1.05 + 2.0 * rng.next_f64()) + 0.05;
            vec![x1, x2, x3]
        }
        ConeKind::DualExp => {
            let x = random_interior_point(&ConeBlock::exp(), rng);
            let s = crate::cones::primal_to_dual_map([x[0], x[1], x[2]]);
            s.to_vec()
        }
    }
}

pub fn check_strong_duality(trials: usize) -> CheckOutcome {
    let mut rng = SplitMix64::new(0xD0A11);
    let settings = SolverSettings::default();
    let mut passed = 0;
    let mut failed = 0;
    for _ in 0..trials {
        let q = random_distribution(&mut rng, 10);
        let h: Vec<f64> = (0..q.len()).map(|_| -5.0 + 10.0 * rng.next_f64()).collect();
        let eps = (0.01 + 0.98 * rng.next_f64()) * max_kl(&q);
        let amb = AmbiguitySet::new(q, eps).unwrap();
        let prog = build_inner_primal(&amb, &h).unwrap();
        let chk = solve_dual_pair_check(&prog, &settings);
        let ok = chk.primal_status == SolveStatus::Optimal
            && chk.dual_status == SolveStatus::Optimal
            && chk.gap <= 1e-6 * (1.0 + chk.primal_value.abs());
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    CheckOutcome {
        name: "strong duality (Conic primal vs explicit dual)".into(),
        passed,
        failed,
    }
}

pub fn check_lemma1(trials: usize) -> CheckOutcome {
    let mut rng = SplitMix64::new(0x1E3A1);
    let mut passed = 0;
    let mut failed = 0;
    for _ in 0..trials {
        let n = 1 + (rng.next_u64() as usize) % 8;
        let t: Vec<f64> = (0..n).map(|_| 10.0 * rng.next_f64()).collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.next_u64() % 2 == 1).collect();
        if !y.iter().any(|&b| b) {
            y[(rng.next_u64() as usize) % n] = true;
        }
        let lin = lemma1_linearization(&t, &y).unwrap();
        let brute = min_open_distance(&t, &y).unwrap();
        if (lin - brute).abs() <= 1e-12 {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    CheckOutcome {
        name: "facility-location linearization vs brute force".into(),
        passed,
        failed,
    }
}

pub fn check_max_kl(trials: usize) -> CheckOutcome {
    let mut rng = SplitMix64::new(0xA3B1);
    let mut passed = 0;
    let mut failed = 0;
    for _ in 0..trials {
        let q = random_distribution(&mut rng, 12);
        let s = q.len();
        let mut brute = f64::NEG_INFINITY;
        for k in 0..s {
            let mut p = vec![0.0; s];
            p[k] = 1.0;
            brute = brute.max(kl_divergence(&p, q.probs()).unwrap());
        }
        if (brute - max_kl(&q)).abs() <= 1e-12 {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    CheckOutcome {
        name: "max divergence vs vertex enumeration".into(),
        passed,
        failed,
    }
}

pub fn check_barrier_derivatives(points_per_kind: usize) -> CheckOutcome {
    let mut rng = SplitMix64::new(0xBA221E5);
    let mut passed = 0;
    let mut failed = 0;
    let blocks = [
        ConeBlock::exp(),
        ConeBlock::dual_exp(),
        ConeBlock::nonneg(3),
    ];
    for block in &blocks {
        for _ in 0..points_per_kind {
            let point = random_interior_point(block, &mut rng);
            let ok = barrier(block, &point)
                .map(|eval| eval_matches_finite_differences(block, &point, &eval, 1e-6))
                .unwrap_or(false);
            if ok {
                passed += 1;
            } else {
                failed += 1;
            }
        }
    }
    CheckOutcome {
        name: "barrier gradient/Hessian vs finite differences".into(),
        passed,
        failed,
    }
}

pub fn check_oracle_cross(trials: usize) -> CheckOutcome {
    let mut rng = SplitMix64::new(0x0C0C0);
    let mut passed = 0;
    let mut failed = 0;
    for _ in 0..trials {
        let q = random_distribution(&mut rng, 10);
        let h: Vec<f64> = (0..q.len()).map(|_| -5.0 + 10.0 * rng.next_f64()).collect();
        let eps = rng.next_f64() * 1.2 * max_kl(&q);
        let amb = AmbiguitySet::new(q, eps).unwrap();
        let conic = worst_case_expectation(&amb, &h, WcMethod::Conic);
        let dual = worst_case_expectation(&amb, &h, WcMethod::ScalarDual);
        let ok = match (conic, dual) {
            (Ok(a), Ok(b)) => (a.value - b.value).abs() <= 1e-6 * (1.0 + b.value.abs()),
            _ => false,
        };
        if ok {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    CheckOutcome {
        name: "worst-case oracle: conic vs scalar dual".into(),
        passed,
        failed,
    }
}

/// The full fast verification suite, in a fixed order.
pub fn run_all_checks() -> Vec<CheckOutcome> {
    vec![
        check_strong_duality(30),
        check_oracle_cross(50),
        check_max_kl(1000),
        check_lemma1(1000),
        check_barrier_derivatives(100),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for outcome in run_all_checks() {
            assert!(
                outcome.ok(),
                "{}: {}/{} failed",
                outcome.name,
                outcome.failed,
                outcome.failed + outcome.passed
            );
        }
    }

    #[test]
    fn tampered_barrier_is_caught() {
        // a wrong Hessian constant must trip the finite-difference comparator
        let block = ConeBlock::exp();
        let point = [3.0, 1.0, 0.0];
        let mut eval = barrier(&block, &point).unwrap();
        assert!(eval_matches_finite_differences(&block, &point, &eval, 1e-6));
        eval.hessian[0] *= 1.01;
        assert!(!eval_matches_finite_differences(
            &block, &point, &eval, 1e-6
        ));
        let mut eval2 = barrier(&block, &point).unwrap();
        eval2.gradient[2] += 0.001;
        assert!(!eval_matches_finite_differences(
            &block, &point, &eval2, 1e-6
        ));
    }
}
