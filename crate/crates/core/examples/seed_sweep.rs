//! Wide seed sweep over both problems and all three demand distributions;
//! prints one line per failure and a summary. Useful when touching the
//! solver internals.

use kldro::apps::reference_ufl_instance;
use kldro::harness::{run_experiment, DistributionSpec, ExperimentConfig, ProblemConfig};

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let distributions = [
        DistributionSpec::DiscreteUniform { a: 0, b: 10 },
        DistributionSpec::Binomial { n: 10, p: 0.5 },
        DistributionSpec::Poisson { lambda: 5.0 },
    ];
    let thetas = vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25];
    let start = std::time::Instant::now();
    let mut runs = 0usize;
    let mut failures = 0usize;
    for problem in ["newsvendor", "ufl"] {
        for spec in &distributions {
            for seed in 1..=seeds {
                let config = ExperimentConfig {
                    distribution: *spec,
                    r: 100,
                    thetas: thetas.clone(),
                    seed,
                    problem: match problem {
                        "newsvendor" => ProblemConfig::Newsvendor {
                            c: 1.0,
                            c_b: 2.0,
                            c_h: 1.0,
                        },
                        _ => ProblemConfig::Ufl {
                            skeleton: reference_ufl_instance(),
                        },
                    },
                };
                runs += 1;
                if let Err(e) = run_experiment(&config) {
                    failures += 1;
                    println!("FAIL {problem} {} seed={seed}: {e}", spec.name());
                }
            }
        }
    }
    println!(
        "{runs} experiments ({} solves), {failures} failures, {:?}",
        runs * thetas.len(),
        start.elapsed()
    );
}
