//! Regenerates the two reference table sweeps and prints them.

use kldro::harness::*;

fn main() {
    let t0 = std::time::Instant::now();
    let config = ExperimentConfig {
        distribution: DistributionSpec::DiscreteUniform { a: 0, b: 10 },
        r: 100,
        thetas: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25],
        seed: 20240901,
        problem: ProblemConfig::Newsvendor {
            c: 1.0,
            c_b: 2.0,
            c_h: 1.0,
        },
    };
    let report = run_experiment(&config).unwrap();
    println!("newsvendor uniform ({:?}):", t0.elapsed());
    for row in &report.rows {
        println!(
            "  theta {:.2} y*={} avg {:.2} sd {:.2} worst10 {:.2}",
            row.theta, row.decision[0], row.summary.avg, row.summary.st_dev, row.summary.worst10
        );
    }

    let t1 = std::time::Instant::now();
    let config = ExperimentConfig {
        distribution: DistributionSpec::DiscreteUniform { a: 0, b: 10 },
        r: 100,
        thetas: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25],
        seed: 20240901,
        problem: ProblemConfig::Ufl {
            skeleton: kldro::apps::reference_ufl_instance(),
        },
    };
    let report = run_experiment(&config).unwrap();
    println!("ufl uniform ({:?}):", t1.elapsed());
    for row in &report.rows {
        let dec: Vec<String> = row.decision.iter().map(|v| v.to_string()).collect();
        println!(
            "  theta {:.2} y*=({}) avg {:.2} sd {:.2} worst10 {:.2}",
            row.theta,
            dec.join(","),
            row.summary.avg,
            row.summary.st_dev,
            row.summary.worst10
        );
    }
}
