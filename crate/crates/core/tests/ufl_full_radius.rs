//! Full-robustness stress on the reference facility-location instance: at
//! the maximum radius the model must price every customer at its worst
//! observed demand, which the closed form verifies by enumeration.

use kldro::apps::ufl;
use kldro::harness::{empirical, sample, substream, DistributionSpec, STREAM_TRAIN};
use kldro::kl::max_kl;
use kldro::mip::{self, MipSettings, MipStatus};

#[test]
fn reference_instance_at_maximum_radius_matches_worst_scenario_enumeration() {
    let skeleton = ufl::reference_ufl_instance();
    let spec = DistributionSpec::DiscreteUniform { a: 0, b: 10 };
    let mut demands = Vec::with_capacity(12);
    for i in 0..12 {
        let mut stream = substream(4711, STREAM_TRAIN, i as u64);
        demands.push(empirical(&sample(&spec, 100, &mut stream).unwrap()));
    }
    let epsilons: Vec<f64> = demands.iter().map(max_kl).collect();
    let inst = skeleton.with_demands(demands.clone(), epsilons).unwrap();
    let rc = ufl::build_ufl_dr(&inst).unwrap();
    let sol = mip::solve_mip(&rc.program, &MipSettings::default());
    assert_eq!(sol.status, MipStatus::Optimal);

    let t = skeleton.transport();
    let maxd: Vec<f64> = demands.iter().map(|d| d.max_support()).collect();
    let minmax = ufl::nonzero_patterns(3)
        .into_iter()
        .map(|pat| {
            let y: Vec<bool> = pat.iter().map(|&v| v == 1).collect();
            ufl::closed_form_cost(&skeleton.fixed_costs, &t, &maxd, &y).unwrap()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(
        (sol.objective_value - minmax).abs() <= 1e-6 * (1.0 + minmax.abs()),
        "dr {} vs worst-scenario enumeration {minmax}",
        sol.objective_value
    );
}
