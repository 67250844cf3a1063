//! Cone invariants: duality pairing, map consistency, barrier convexity.

use kldro::check::random_interior_point;
use kldro::cones::{
    barrier, dual_exp_cone_contains, dual_to_primal_map, exp_cone_contains, ConeBlock,
};
use kldro::harness::SplitMix64;
use proptest::prelude::*;

fn box_point(rng: &mut SplitMix64) -> [f64; 3] {
    [
        -3.0 + 6.0 * rng.next_f64(),
        -3.0 + 6.0 * rng.next_f64(),
        -3.0 + 6.0 * rng.next_f64(),
    ]
}

#[test]
fn duality_pairing_nonnegative() {
    // rejection-sample 10,000 members of each cone and pair them
    let mut rng = SplitMix64::new(0xD0A1);
    let mut xs = Vec::with_capacity(10_000);
    while xs.len() < 10_000 {
        let x = box_point(&mut rng);
        if exp_cone_contains(x, 0.0) {
            xs.push(x);
        }
    }
    let mut ss = Vec::with_capacity(10_000);
    while ss.len() < 10_000 {
        let s = box_point(&mut rng);
        if dual_exp_cone_contains(s, 0.0) {
            ss.push(s);
        }
    }
    for (x, s) in xs.iter().zip(&ss) {
        let dot = x[0] * s[0] + x[1] * s[1] + x[2] * s[2];
        assert!(dot >= -1e-9, "pairing violated: {x:?} . {s:?} = {dot}");
    }
}

#[test]
fn map_consistency_random_sampling() {
    // dual membership of s agrees with primal membership of the mapped point
    // away from the measure-zero closure band |s3| <= tol
    let mut rng = SplitMix64::new(0x3A9);
    let tol = 1e-9;
    let mut checked = 0;
    while checked < 20_000 {
        let s = box_point(&mut rng);
        if s[2].abs() <= 2.0 * tol {
            continue;
        }
        let a = dual_exp_cone_contains(s, tol);
        let b = exp_cone_contains(dual_to_primal_map(s), tol);
        assert_eq!(a, b, "disagreement at {s:?}");
        checked += 1;
    }
}

fn cholesky_ok(h: &[f64], dim: usize) -> bool {
    let mut l = vec![0.0f64; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = h[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    true
}

#[test]
fn barrier_hessians_positive_definite() {
    let mut rng = SplitMix64::new(0xBEE5);
    for block in [
        ConeBlock::exp(),
        ConeBlock::dual_exp(),
        ConeBlock::nonneg(4),
    ] {
        for _ in 0..1000 {
            let point = random_interior_point(&block, &mut rng);
            let eval = barrier(&block, &point).expect("interior point");
            assert!(
                cholesky_ok(&eval.hessian, block.dim),
                "hessian not PD at {point:?} for {block:?}"
            );
        }
    }
}

proptest! {
    /// Scaling invariance: both cones are invariant under uniform positive
    /// scaling of the triple.
    #[test]
    fn cones_scale_invariant(
        x1 in -3.0f64..3.0,
        x2 in -3.0f64..3.0,
        x3 in -3.0f64..3.0,
        lambda in 0.1f64..10.0,
    ) {
        let x = [x1, x2, x3];
        let lx = [lambda * x1, lambda * x2, lambda * x3];
        // compare with a scaled tolerance so boundary points cannot flap
        let inside = exp_cone_contains(x, 1e-7);
        let inside_strict = exp_cone_contains(x, 0.0);
        if inside == inside_strict {
            prop_assert_eq!(exp_cone_contains(lx, lambda * 1e-7), inside);
        }
        let inside_d = dual_exp_cone_contains(x, 1e-7);
        let inside_d_strict = dual_exp_cone_contains(x, 0.0);
        if inside_d == inside_d_strict {
            prop_assert_eq!(dual_exp_cone_contains(lx, lambda * 1e-7), inside_d);
        }
    }

    /// The map and its inverse are mutually inverse on arbitrary triples.
    #[test]
    fn map_inverse_round_trip(
        s1 in -10.0f64..10.0,
        s2 in -10.0f64..10.0,
        s3 in -10.0f64..10.0,
    ) {
        let s = [s1, s2, s3];
        let x = dual_to_primal_map(s);
        let back = kldro::cones::primal_to_dual_map(x);
        for k in 0..3 {
            prop_assert!((back[k] - s[k]).abs() <= 1e-12 * (1.0 + s[k].abs()));
        }
    }
}
