//! Command-line driver: solve single instances, run out-of-sample
//! experiments, regenerate the six reference experiments, and run the
//! internal verification suite.
//!
//! Exit codes: 0 success, 1 solver or verification failure, 2 configuration
//! error.

use clap::{Parser, Subcommand};
use kldro::apps::{newsvendor, ufl};
use kldro::config::{self, SolveInstance};
use kldro::harness::{
    emit_report, run_experiment, DistributionSpec, ExperimentConfig, ProblemConfig, ReportFormat,
};
use kldro::kl::{worst_case_expectation, AmbiguitySet, WcMethod};
use kldro::mip::{self, MipSettings, MipStatus};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kldro",
    version,
    about = "KL-divergence constrained distributionally robust optimization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file and print the decision plus the worst-case
    /// distributions at the optimum
    Solve {
        /// Instance file (TOML; [newsvendor] or [ufl] table)
        #[arg(long)]
        config: PathBuf,
        /// Interior-point tolerance override
        #[arg(long)]
        tol: Option<f64>,
        /// Directory to dump the assembled program and its index map
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an out-of-sample experiment and write its report CSVs
    Experiment {
        /// Experiment file (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Seed override
        #[arg(long)]
        seed: Option<u64>,
        /// Robustness levels override (comma separated)
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        /// Output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the six reference experiments (2 problems x 3
    /// distributions)
    Reproduce {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the fast internal verification suite
    Check,
}

enum Failure {
    Config(String),
    Solve(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solve(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solve(m) => m,
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, tol, out } => cmd_solve(&config, tol, out.as_deref()),
        Command::Experiment {
            config,
            seed,
            thetas,
            out,
        } => cmd_experiment(&config, seed, thetas, out),
        Command::Reproduce { out, seed } => cmd_reproduce(out, seed),
        Command::Check => cmd_check(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn read_config(path: &std::path::Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn mip_settings(tol: Option<f64>) -> MipSettings {
    let mut settings = MipSettings::default();
    if let Some(t) = tol {
        settings.solver.tol = t;
    }
    settings
}

fn cmd_solve(
    path: &std::path::Path,
    tol: Option<f64>,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let text = read_config(path)?;
    let instance =
        config::load_solve_instance(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let settings = mip_settings(tol);
    let rc = instance
        .build_model()
        .map_err(|e| Failure::Config(e.to_string()))?;
    dump_program(&rc, out)?;
    let sol = mip::solve_mip(&rc.program, &settings);
    print_status(&sol)?;
    match &instance {
        SolveInstance::Newsvendor { inst, .. } => {
            let y = rc.extract_y(&sol.x)[0] as i64;
            println!("y*={} objective={:.6}", y, sol.objective_value);
            let amb = AmbiguitySet::new(inst.demand.clone(), inst.epsilon)
                .map_err(|e| Failure::Config(e.to_string()))?;
            let h: Vec<f64> = inst
                .demand
                .support()
                .iter()
                .map(|&d| newsvendor::newsvendor_h(inst.c_b, inst.c_h, y as f64, d))
                .collect();
            let wc = worst_case_expectation(&amb, &h, WcMethod::ScalarDual)
                .map_err(|e| Failure::Solve(e.to_string()))?;
            print_worst_case(0, inst.demand.support(), &wc.worst_p);
        }
        SolveInstance::Ufl { inst, .. } => {
            let y: Vec<bool> = rc.extract_y(&sol.x).iter().map(|&v| v > 0.5).collect();
            let pattern = y
                .iter()
                .map(|&b| if b { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",");
            println!("y*={} objective={:.6}", pattern, sol.objective_value);
            for i in 0..inst.num_customers() {
                let dist = ufl::min_open_distance(&inst.transport[i], &y)
                    .map_err(|e| Failure::Solve(e.to_string()))?;
                let amb = AmbiguitySet::new(inst.demands[i].clone(), inst.epsilons[i])
                    .map_err(|e| Failure::Config(e.to_string()))?;
                let h: Vec<f64> = inst.demands[i]
                    .support()
                    .iter()
                    .map(|&d| d * dist)
                    .collect();
                let wc = worst_case_expectation(&amb, &h, WcMethod::ScalarDual)
                    .map_err(|e| Failure::Solve(e.to_string()))?;
                print_worst_case(i, inst.demands[i].support(), &wc.worst_p);
            }
        }
    }
    Ok(())
}

fn dump_program(
    rc: &kldro::dro::RobustCounterpart,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        let stem = dir.join("instance");
        rc.save(&stem)
            .map_err(|e| Failure::Config(format!("cannot dump program: {e}")))?;
        println!(
            "program dumped to {} and {}",
            stem.with_extension("cone").display(),
            stem.with_extension("map.toml").display()
        );
    }
    Ok(())
}

fn print_status(sol: &mip::MipSolution) -> Result<(), Failure> {
    match sol.status {
        MipStatus::Optimal => {
            println!("status Optimal");
            Ok(())
        }
        MipStatus::Infeasible => {
            println!("status PrimalInfeasible");
            Err(Failure::Solve("model is infeasible".into()))
        }
        MipStatus::NodeLimit => {
            println!("status NodeLimit");
            Err(Failure::Solve("node limit reached".into()))
        }
    }
}

fn print_worst_case(element: usize, support: &[f64], p: &[f64]) {
    let pairs = support
        .iter()
        .zip(p)
        .map(|(&d, &prob)| format!("{d}:{prob:.6}"))
        .collect::<Vec<_>>()
        .join(" ");
    println!("worst-case distribution [{element}]: {pairs}");
}

fn cmd_experiment(
    path: &std::path::Path,
    seed: Option<u64>,
    thetas: Option<Vec<f64>>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let text = read_config(path)?;
    let (mut config, mut output) =
        config::load_experiment(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(mut t) = thetas {
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t.dedup();
        config.thetas = t;
    }
    if let Some(dir) = out {
        output.output_dir = dir;
    }
    config
        .validate()
        .map_err(|e| Failure::Config(e.to_string()))?;
    run_and_emit(&config, &output.output_dir, &output.stem)
}

fn run_and_emit(
    config: &ExperimentConfig,
    dir: &std::path::Path,
    stem: &str,
) -> Result<(), Failure> {
    let report = run_experiment(config).map_err(|e| Failure::Solve(e.to_string()))?;
    println!(
        "{} / {} seed={} eps_bar={}",
        report.problem,
        report.distribution,
        report.seed,
        report
            .eps_bar
            .iter()
            .map(|e| format!("{e:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    let mut written = emit_report(&report, ReportFormat::TableCsv, dir, stem)
        .map_err(|e| Failure::Solve(format!("cannot write report: {e}")))?;
    written.extend(
        emit_report(&report, ReportFormat::BoxplotCsv, dir, stem)
            .map_err(|e| Failure::Solve(format!("cannot write report: {e}")))?,
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_reproduce(out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let dir = out.unwrap_or_else(|| "out".into());
    let seed = seed.unwrap_or(20240901);
    let distributions = [
        DistributionSpec::DiscreteUniform { a: 0, b: 10 },
        DistributionSpec::Binomial { n: 10, p: 0.5 },
        DistributionSpec::Poisson { lambda: 5.0 },
    ];
    let thetas = vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25];
    for spec in &distributions {
        let config = ExperimentConfig {
            distribution: *spec,
            r: 100,
            thetas: thetas.clone(),
            seed,
            problem: ProblemConfig::Newsvendor {
                c: 1.0,
                c_b: 2.0,
                c_h: 1.0,
            },
        };
        run_and_emit(&config, &dir, &format!("newsvendor_{}", spec.slug()))?;
    }
    for spec in &distributions {
        let config = ExperimentConfig {
            distribution: *spec,
            r: 100,
            thetas: thetas.clone(),
            seed,
            problem: ProblemConfig::Ufl {
                skeleton: kldro::apps::reference_ufl_instance(),
            },
        };
        run_and_emit(&config, &dir, &format!("ufl_{}", spec.slug()))?;
    }
    Ok(())
}

fn cmd_check() -> Result<(), Failure> {
    let outcomes = kldro::check::run_all_checks();
    let mut any_failed = false;
    for outcome in &outcomes {
        let total = outcome.passed + outcome.failed;
        let verdict = if outcome.ok() { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {}/{}", outcome.name, outcome.passed, total);
        any_failed |= !outcome.ok();
    }
    println!("{} suites run", outcomes.len());
    if any_failed {
        Err(Failure::Solve("verification suite failed".into()))
    } else {
        Ok(())
    }
}
