//! Randomized strong-duality stress for the solver on worst-case-expectation
//! programs of varying size.

use kldro::cones::ConeBlock;
use kldro::ipm::{solve, solve_dual_pair_check, SolveStatus, SolverSettings};
use kldro::program::{ConicProgram, ProgramBuilder, Sense};

struct Rng(u64);
impl Rng {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn inner_program(q: &[f64], h: &[f64], eps: f64) -> ConicProgram {
    let mut b = ProgramBuilder::new(Sense::Maximize);
    let mut triples = Vec::new();
    for (&qs, &hs) in q.iter().zip(h) {
        let t = b.add_block(ConeBlock::exp());
        b.add_eq_row(&[(t, 1.0)], qs);
        b.set_objective(t + 1, hs);
        triples.push(t);
    }
    let simplex: Vec<(usize, f64)> = triples.iter().map(|&t| (t + 1, 1.0)).collect();
    b.add_eq_row(&simplex, 1.0);
    let budget: Vec<(usize, f64)> = triples.iter().map(|&t| (t + 2, -1.0)).collect();
    b.add_le_row(&budget, eps);
    b.build()
}

fn random_instance(rng: &mut Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let s = 2 + (rng.next_u64() % 9) as usize; // 2..=10
    let mut q: Vec<f64> = (0..s).map(|_| 0.05 + rng.f64()).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    let h: Vec<f64> = (0..s).map(|_| -5.0 + 10.0 * rng.f64()).collect();
    let eps_bar = (1.0 / q.iter().cloned().fold(f64::INFINITY, f64::min)).ln();
    let eps = (0.01 + 0.98 * rng.f64()) * eps_bar;
    (q, h, eps)
}

#[test]
fn strong_duality_on_random_inner_problems() {
    let mut rng = Rng(42);
    let settings = SolverSettings::default();
    let mut max_rel_gap: f64 = 0.0;
    for trial in 0..50 {
        let (q, h, eps) = random_instance(&mut rng);
        let prog = inner_program(&q, &h, eps);
        let chk = solve_dual_pair_check(&prog, &settings);
        assert_eq!(
            chk.primal_status,
            SolveStatus::Optimal,
            "trial {trial}: primal {:?} q={q:?} h={h:?} eps={eps}",
            chk.primal_status
        );
        assert_eq!(chk.dual_status, SolveStatus::Optimal, "trial {trial}: dual");
        let rel = chk.gap / (1.0 + chk.primal_value.abs());
        max_rel_gap = max_rel_gap.max(rel);
        assert!(
            rel <= 1e-6,
            "trial {trial}: gap {rel:.3e} (primal {}, dual {})",
            chk.primal_value,
            chk.dual_value
        );
    }
    println!("max relative duality gap over 50 instances: {max_rel_gap:.3e}");
}

#[test]
fn objective_between_mean_and_max() {
    let mut rng = Rng(7);
    let settings = SolverSettings::default();
    for trial in 0..40 {
        let (q, h, eps) = random_instance(&mut rng);
        let prog = inner_program(&q, &h, eps);
        let sol = solve(&prog, &settings);
        assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}");
        let mean: f64 = q.iter().zip(&h).map(|(a, b)| a * b).sum();
        let max = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            sol.objective_value >= mean - 1e-6 && sol.objective_value <= max + 1e-6,
            "trial {trial}: value {} not in [{mean}, {max}]",
            sol.objective_value
        );
    }
}
