//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (run with `--nocapture` to see them). Tolerances
//! and thresholds are pinned in code.

use kldro::apps::newsvendor::{self, NewsvendorInstance};
use kldro::apps::ufl;
use kldro::check;
use kldro::harness::{
    empirical, run_experiment, sample, substream, DistributionSpec, ExperimentConfig,
    ProblemConfig, SplitMix64, STREAM_TRAIN,
};
use kldro::ipm::{solve_dual_pair_check, SolveStatus, SolverSettings};
use kldro::kl::{
    build_inner_primal, kl_divergence, max_kl, worst_case_expectation, AmbiguitySet,
    EmpiricalDistribution, WcMethod,
};
use kldro::mip::{self, MipSettings, MipStatus};
use std::time::Instant;

/// The 200 shared random worst-case-expectation instances of criteria 1-2.
fn random_inner_instances(count: usize) -> Vec<(EmpiricalDistribution, Vec<f64>, f64)> {
    let mut rng = SplitMix64::new(0xACCE97);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let s = 2 + (rng.next_u64() as usize) % 9; // S in 2..=10
        let mut probs: Vec<f64> = (0..s).map(|_| 0.05 + rng.next_f64()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let support: Vec<f64> = (0..s).map(|k| k as f64).collect();
        let q = EmpiricalDistribution::new(support, probs).unwrap();
        let h: Vec<f64> = (0..s).map(|_| -5.0 + 10.0 * rng.next_f64()).collect();
        let eps = (0.01 + 0.98 * rng.next_f64()) * max_kl(&q);
        out.push((q, h, eps));
    }
    out
}

#[test]
fn criterion_01_strong_duality() {
    let start = Instant::now();
    let settings = SolverSettings::default();
    let mut worst_rel: f64 = 0.0;
    for (i, (q, h, eps)) in random_inner_instances(200).into_iter().enumerate() {
        let amb = AmbiguitySet::new(q, eps).unwrap();
        let prog = build_inner_primal(&amb, &h).unwrap();
        let chk = solve_dual_pair_check(&prog, &settings);
        assert_eq!(chk.primal_status, SolveStatus::Optimal, "instance {i}");
        assert_eq!(chk.dual_status, SolveStatus::Optimal, "instance {i}");
        let rel = chk.gap / (1.0 + chk.primal_value.abs());
        worst_rel = worst_rel.max(rel);
        assert!(
            chk.gap <= 1e-6 * (1.0 + chk.primal_value.abs()),
            "instance {i}: gap {} at value {}",
            chk.gap,
            chk.primal_value
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 1 PASS - strong duality on 200 instances, worst relative gap {worst_rel:.3e}, {elapsed:?}"
    );
}

#[test]
fn criterion_02_worst_case_oracle_equivalence() {
    let start = Instant::now();
    let mut worst_rel: f64 = 0.0;
    for (i, (q, h, eps)) in random_inner_instances(200).into_iter().enumerate() {
        let amb = AmbiguitySet::new(q, eps).unwrap();
        let conic = worst_case_expectation(&amb, &h, WcMethod::Conic).unwrap();
        let dual = worst_case_expectation(&amb, &h, WcMethod::ScalarDual).unwrap();
        let rel = (conic.value - dual.value).abs() / (1.0 + dual.value.abs());
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= 1e-6,
            "instance {i}: conic {} vs scalar dual {}",
            conic.value,
            dual.value
        );
    }
    println!(
        "criterion 2 PASS - conic and scalar-dual paths agree on 200 instances, worst relative difference {worst_rel:.3e}, {:?}",
        start.elapsed()
    );
}

#[test]
fn criterion_03_max_kl_exactness() {
    let mut rng = SplitMix64::new(0x9A0B3);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let s = 2 + (rng.next_u64() as usize) % 11;
        let mut probs: Vec<f64> = (0..s).map(|_| 0.02 + rng.next_f64()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let support: Vec<f64> = (0..s).map(|k| k as f64).collect();
        let q = EmpiricalDistribution::new(support, probs).unwrap();
        let mut brute = f64::NEG_INFINITY;
        for k in 0..s {
            let mut p = vec![0.0; s];
            p[k] = 1.0;
            brute = brute.max(kl_divergence(&p, q.probs()).unwrap());
        }
        let diff = (brute - max_kl(&q)).abs();
        worst = worst.max(diff);
        assert!(
            diff <= 1e-12,
            "instance {i}: brute {brute} vs formula {}",
            max_kl(&q)
        );
    }
    println!("criterion 3 PASS - max divergence matches vertex enumeration on 1000 draws, worst diff {worst:.3e}");
}

#[test]
fn criterion_04_lemma1_exactness() {
    let mut rng = SplitMix64::new(0x4E41);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = 1 + (rng.next_u64() as usize) % 8;
        let t: Vec<f64> = (0..n).map(|_| 10.0 * rng.next_f64()).collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.next_u64() % 2 == 1).collect();
        if !y.iter().any(|&b| b) {
            y[(rng.next_u64() as usize) % n] = true;
        }
        let lin = ufl::lemma1_linearization(&t, &y).unwrap();
        let brute = ufl::min_open_distance(&t, &y).unwrap();
        let diff = (lin - brute).abs();
        worst = worst.max(diff);
        assert!(
            diff <= 1e-12,
            "instance {i}: {lin} vs {brute} (t={t:?}, y={y:?})"
        );
    }
    println!(
        "criterion 4 PASS - linearization exact on 1000 random (t, y), worst diff {worst:.3e}"
    );
}

fn random_demand(rng: &mut SplitMix64, max_s: usize, value_range: i64) -> EmpiricalDistribution {
    let s = 2 + (rng.next_u64() as usize) % (max_s - 1);
    let mut values: Vec<i64> = Vec::new();
    while values.len() < s {
        let v = (rng.next_u64() % value_range as u64) as i64;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    values.sort_unstable();
    let mut probs: Vec<f64> = (0..s).map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    EmpiricalDistribution::new(values.iter().map(|&v| v as f64).collect(), probs).unwrap()
}

#[test]
fn criterion_05_mip_matches_enumeration() {
    let start = Instant::now();
    let settings = MipSettings::default();
    let mut rng = SplitMix64::new(0x3B0B);
    // 100 random newsvendor instances
    for i in 0..100 {
        let c = 0.5 + 1.5 * rng.next_f64();
        let c_b = c + 0.2 + 2.8 * rng.next_f64();
        let c_h = 0.5 + 1.5 * rng.next_f64();
        let demand = random_demand(&mut rng, 6, 13);
        let eps = rng.next_f64() * 1.2 * max_kl(&demand);
        let inst = NewsvendorInstance::new(c, c_b, c_h, demand, eps).unwrap();
        let rc = newsvendor::build_newsvendor_dr(&inst).unwrap();
        let bb = mip::solve_mip(&rc.program, &settings);
        let ub = newsvendor::order_upper_bound(&inst.demand);
        let candidates: Vec<Vec<i64>> = (0..=ub).map(|y| vec![y]).collect();
        let en = mip::solve_by_enumeration(&rc.program, &candidates, &settings);
        assert_eq!(bb.status, MipStatus::Optimal, "newsvendor {i}");
        assert_eq!(en.status, MipStatus::Optimal, "newsvendor {i}");
        assert!(
            (bb.objective_value - en.objective_value).abs()
                <= 1e-6 * (1.0 + en.objective_value.abs()),
            "newsvendor {i}: bb {} vs enum {}",
            bb.objective_value,
            en.objective_value
        );
    }
    // 50 random small UFL instances (3 facilities, 7 patterns)
    for i in 0..50 {
        let m = 2 + (rng.next_u64() as usize) % 4;
        let fixed: Vec<f64> = (0..3).map(|_| 1.0 + 9.0 * rng.next_f64()).collect();
        let transport: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..3).map(|_| rng.next_f64()).collect())
            .collect();
        let demands: Vec<EmpiricalDistribution> =
            (0..m).map(|_| random_demand(&mut rng, 4, 9)).collect();
        let epsilons: Vec<f64> = demands.iter().map(|d| rng.next_f64() * max_kl(d)).collect();
        let inst = ufl::UflInstance::new(fixed, transport, demands, epsilons).unwrap();
        let rc = ufl::build_ufl_dr(&inst).unwrap();
        let bb = mip::solve_mip(&rc.program, &settings);
        let en = mip::solve_by_enumeration(&rc.program, &ufl::nonzero_patterns(3), &settings);
        assert_eq!(bb.status, MipStatus::Optimal, "ufl {i}");
        assert_eq!(en.status, MipStatus::Optimal, "ufl {i}");
        assert!(
            (bb.objective_value - en.objective_value).abs()
                <= 1e-6 * (1.0 + en.objective_value.abs()),
            "ufl {i}: bb {} vs enum {}",
            bb.objective_value,
            en.objective_value
        );
    }
    println!(
        "criterion 5 PASS - branch-and-bound matches enumeration on 100 newsvendor + 50 ufl instances, {:?}",
        start.elapsed()
    );
}

const REFERENCE_DISTRIBUTIONS: [DistributionSpec; 3] = [
    DistributionSpec::DiscreteUniform { a: 0, b: 10 },
    DistributionSpec::Binomial { n: 10, p: 0.5 },
    DistributionSpec::Poisson { lambda: 5.0 },
];

#[test]
fn criterion_06_newsvendor_robustness_trend() {
    let start = Instant::now();
    let thetas = vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25];
    let mut worst10_improved = 0usize;
    let mut runs = 0usize;
    let mut binomial_saturated = 0usize;
    for spec in REFERENCE_DISTRIBUTIONS {
        for seed in 1..=20u64 {
            let config = ExperimentConfig {
                distribution: spec,
                r: 100,
                thetas: thetas.clone(),
                seed,
                problem: ProblemConfig::Newsvendor {
                    c: 1.0,
                    c_b: 2.0,
                    c_h: 1.0,
                },
            };
            let report = run_experiment(&config).unwrap();
            runs += 1;
            // (a) y*(theta) nondecreasing in every run
            for w in report.rows.windows(2) {
                assert!(
                    w[1].decision[0] >= w[0].decision[0],
                    "{} seed {seed}: y* decreased {} -> {}",
                    spec.name(),
                    w[0].decision[0],
                    w[1].decision[0]
                );
            }
            // (b) theta = 0 equals the SAA critical-ratio solution
            let mut train = substream(seed, STREAM_TRAIN, 0);
            let q = empirical(&sample(&spec, 100, &mut train).unwrap());
            let saa_inst = NewsvendorInstance::new(1.0, 2.0, 1.0, q, 0.0).unwrap();
            let saa = newsvendor::saa_critical_ratio_order(&saa_inst);
            assert_eq!(
                report.rows[0].decision[0],
                saa,
                "{} seed {seed}: theta=0 y* {} vs critical ratio {saa}",
                spec.name(),
                report.rows[0].decision[0]
            );
            // (c) worst-10% at theta = 0.10 vs theta = 0
            let w0 = report.rows[0].summary.worst10;
            let w10 = report.rows[2].summary.worst10;
            if w10 <= w0 {
                worst10_improved += 1;
            }
            // sample-dependent, reported but not asserted: binomial order
            // quantities tend to freeze from theta = 0.05 on
            if matches!(spec, DistributionSpec::Binomial { .. })
                && report.rows[1..]
                    .windows(2)
                    .all(|w| w[0].decision == w[1].decision)
            {
                binomial_saturated += 1;
            }
        }
    }
    println!(
        "  note: binomial y*(theta) constant for theta >= 0.05 in {binomial_saturated}/20 seeds (not asserted)"
    );
    let share = worst10_improved as f64 / runs as f64;
    assert!(
        share >= 0.85,
        "worst-10% improved in only {worst10_improved}/{runs} runs"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    println!(
        "criterion 6 PASS - newsvendor trend over 60 runs: monotone y*, SAA match at theta=0, worst-10% improved in {:.0}% by theta=0.10, {elapsed:?}",
        100.0 * share
    );
}

#[test]
fn criterion_07_ufl_reference_pattern() {
    let start = Instant::now();
    let skeleton = ufl::reference_ufl_instance();
    // the criterion reads theta = 0 and theta = 0.05 only
    let thetas = vec![0.0, 0.05];
    let mut sp_pattern_hits = 0usize;
    let mut dr_pattern_hits = 0usize;
    let mut stdev_improved = 0usize;
    let mut runs = 0usize;
    for spec in REFERENCE_DISTRIBUTIONS {
        for seed in 1..=20u64 {
            let config = ExperimentConfig {
                distribution: spec,
                r: 100,
                thetas: thetas.clone(),
                seed,
                problem: ProblemConfig::Ufl {
                    skeleton: skeleton.clone(),
                },
            };
            let report = run_experiment(&config).unwrap();
            runs += 1;
            if report.rows[0].decision == vec![0, 1, 0] {
                sp_pattern_hits += 1;
            }
            if report.rows[1].decision == vec![1, 0, 1] {
                dr_pattern_hits += 1;
            }
            if report.rows[1].summary.st_dev < report.rows[0].summary.st_dev {
                stdev_improved += 1;
            }
        }
    }
    // fixed costs of the two reference patterns, exactly
    let zero_demand = vec![0.0; 12];
    let t = skeleton.transport();
    let sp_fixed = ufl::closed_form_cost(
        &skeleton.fixed_costs,
        &t,
        &zero_demand,
        &[false, true, false],
    )
    .unwrap();
    let dr_fixed = ufl::closed_form_cost(
        &skeleton.fixed_costs,
        &t,
        &zero_demand,
        &[true, false, true],
    )
    .unwrap();
    assert_eq!(sp_fixed, 5.0);
    assert_eq!(dr_fixed, 20.0);

    let sp_share = sp_pattern_hits as f64 / runs as f64;
    let dr_share = dr_pattern_hits as f64 / runs as f64;
    let sd_share = stdev_improved as f64 / runs as f64;
    assert!(
        sp_share >= 0.90,
        "theta=0 gave (0,1,0) in only {sp_pattern_hits}/{runs}"
    );
    assert!(
        dr_share >= 0.90,
        "theta=0.05 gave (1,0,1) in only {dr_pattern_hits}/{runs}"
    );
    assert!(
        sd_share >= 0.90,
        "st-dev improved in only {stdev_improved}/{runs}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}");
    println!(
        "criterion 7 PASS - ufl patterns over 60 runs: (0,1,0) in {:.0}%, (1,0,1) in {:.0}%, st-dev improved in {:.0}%, fixed costs 5/20 exact, {elapsed:?}",
        100.0 * sp_share,
        100.0 * dr_share,
        100.0 * sd_share
    );
}

#[test]
fn criterion_08_saturation_equals_minmax() {
    let start = Instant::now();
    let settings = MipSettings::default();
    let mut rng = SplitMix64::new(0x5A7);
    let mut worst_rel: f64 = 0.0;
    // newsvendor instances at full radius
    for i in 0..25 {
        let demand = random_demand(&mut rng, 6, 13);
        let eps_bar = max_kl(&demand);
        let inst = NewsvendorInstance::new(1.0, 2.0, 1.0, demand.clone(), eps_bar).unwrap();
        let rc = newsvendor::build_newsvendor_dr(&inst).unwrap();
        let sol = mip::solve_mip(&rc.program, &settings);
        assert_eq!(sol.status, MipStatus::Optimal, "newsvendor {i}");
        let ub = newsvendor::order_upper_bound(&demand);
        let minmax = (0..=ub)
            .map(|y| {
                let worst = demand
                    .support()
                    .iter()
                    .map(|&d| newsvendor::newsvendor_h(2.0, 1.0, y as f64, d))
                    .fold(f64::NEG_INFINITY, f64::max);
                y as f64 + worst
            })
            .fold(f64::INFINITY, f64::min);
        let rel = (sol.objective_value - minmax).abs() / (1.0 + minmax.abs());
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= 1e-6,
            "newsvendor {i}: dr {} vs minmax {minmax}",
            sol.objective_value
        );
    }
    // small ufl instances at full radius
    for i in 0..10 {
        let m = 2 + (rng.next_u64() as usize) % 3;
        let fixed: Vec<f64> = (0..3).map(|_| 1.0 + 6.0 * rng.next_f64()).collect();
        let transport: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..3).map(|_| rng.next_f64()).collect())
            .collect();
        let demands: Vec<EmpiricalDistribution> =
            (0..m).map(|_| random_demand(&mut rng, 4, 9)).collect();
        let epsilons: Vec<f64> = demands.iter().map(max_kl).collect();
        let inst =
            ufl::UflInstance::new(fixed.clone(), transport.clone(), demands.clone(), epsilons)
                .unwrap();
        let rc = ufl::build_ufl_dr(&inst).unwrap();
        let sol = mip::solve_mip(&rc.program, &settings);
        assert_eq!(sol.status, MipStatus::Optimal, "ufl {i}");
        let minmax = ufl::nonzero_patterns(3)
            .into_iter()
            .map(|pat| {
                let y: Vec<bool> = pat.iter().map(|&v| v == 1).collect();
                let maxd: Vec<f64> = demands.iter().map(|d| d.max_support()).collect();
                ufl::closed_form_cost(&fixed, &transport, &maxd, &y).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        let rel = (sol.objective_value - minmax).abs() / (1.0 + minmax.abs());
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= 1e-6,
            "ufl {i}: dr {} vs minmax {minmax}",
            sol.objective_value
        );
    }
    println!(
        "criterion 8 PASS - saturated radius equals worst-scenario enumeration on 35 instances, worst relative diff {worst_rel:.3e}, {:?}",
        start.elapsed()
    );
}

#[test]
fn criterion_09_numerical_hygiene() {
    let fd = check::check_barrier_derivatives(100);
    assert!(
        fd.ok(),
        "barrier finite differences failed {}/{}",
        fd.failed,
        fd.failed + fd.passed
    );
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_kldro"))
        .arg("check")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "kldro check exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout)
    );
    println!(
        "criterion 9 PASS - finite differences on {} points, `kldro check` exit 0",
        fd.passed
    );
}

#[test]
fn criterion_10_determinism() {
    let base = std::env::temp_dir().join(format!("kldro_acc10_{}", std::process::id()));
    let cfg_path = base.join("exp.toml");
    std::fs::create_dir_all(&base).unwrap();
    std::fs::write(
        &cfg_path,
        r#"
problem = "ufl"
r = 40
seed = 31337
thetas = [0.0, 0.05, 0.1]
[distribution]
kind = "uniform"
params = [0, 10]
[ufl]
reference_instance = true
"#,
    )
    .unwrap();
    let run = |dir: &std::path::Path| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_kldro"))
            .args(["experiment", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    run(&dir_a);
    run(&dir_b);
    let mut compared = 0;
    for name in [
        "ufl_uniform_0_10_table.csv",
        "ufl_uniform_0_10_boxplot.csv",
        "ufl_uniform_0_10_raw.csv",
    ] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "file {name} differs between identical runs");
        compared += 1;
    }
    std::fs::remove_dir_all(&base).ok();
    println!("criterion 10 PASS - {compared} report files byte-identical across reruns");
}
