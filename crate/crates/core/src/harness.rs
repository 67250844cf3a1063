//! Out-of-sample experiment harness: seeded sampling from named
//! distributions, empirical-distribution estimation, solving across a grid of
//! robustness levels, cost evaluation on an independent test draw, and
//! summary statistics in the report shape the CSV emitters expect.
//!
//! Reproducibility contract: every random draw comes from SplitMix64 streams
//! derived deterministically from the experiment seed, with the train draw on
//! substream tag 1, the test draw on tag 2, and per-customer offsets mixed in
//! through the SplitMix64 finalizer. Identical configs therefore produce
//! byte-identical reports on any platform.

use crate::apps::newsvendor::{self, NewsvendorInstance};
use crate::apps::ufl::{self, UflInstance, UflSkeleton};
use crate::apps::AppError;
use crate::kl::{max_kl, EmpiricalDistribution};
use crate::mip::MipSettings;
use thiserror::Error;

// ---------------------------------------------------------------------------
// random streams
// ---------------------------------------------------------------------------

/// SplitMix64: 64-bit splittable generator (golden-ratio increment plus the
/// murmur-style finalizer).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Stream tags for substream derivation.
pub const STREAM_TRAIN: u64 = 1;
pub const STREAM_TEST: u64 = 2;

/// Substream for (seed, tag, index): seed xor tag, with the index folded in
/// through the finalizer so distinct customers get decorrelated streams.
pub fn substream(seed: u64, tag: u64, index: u64) -> SplitMix64 {
    let folded = (seed ^ tag) ^ mix64(index.wrapping_add(0x9E3779B97F4A7C15));
    SplitMix64::new(folded)
}

// ---------------------------------------------------------------------------
// named distributions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DistributionSpec {
    /// Integers a..=b, each equally likely.
    DiscreteUniform {
        a: i64,
        b: i64,
    },
    Binomial {
        n: u32,
        p: f64,
    },
    Poisson {
        lambda: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("statistics need at least one cost realization")]
    EmptyInput,
    #[error("solve failed at theta = {theta}: {message}")]
    SolveFailed { theta: f64, message: String },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        match *self {
            DistributionSpec::DiscreteUniform { a, b } => {
                if a > b {
                    return Err(HarnessError::InvalidSpec(format!(
                        "uniform needs a <= b, got ({a}, {b})"
                    )));
                }
            }
            DistributionSpec::Binomial { p, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(HarnessError::InvalidSpec(format!(
                        "binomial needs p in [0,1], got {p}"
                    )));
                }
            }
            DistributionSpec::Poisson { lambda } => {
                if !(lambda > 0.0) {
                    return Err(HarnessError::InvalidSpec(format!(
                        "poisson needs lambda > 0, got {lambda}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match *self {
            DistributionSpec::DiscreteUniform { a, b } => format!("Uniform({a}, {b})"),
            DistributionSpec::Binomial { n, p } => format!("Binomial({n}, {p})"),
            DistributionSpec::Poisson { lambda } => format!("Poisson({lambda})"),
        }
    }

    /// Filename-safe tag, e.g. `uniform_0_10`, `binomial_10_05`, `poisson_5`.
    pub fn slug(&self) -> String {
        let raw = match *self {
            DistributionSpec::DiscreteUniform { a, b } => format!("uniform_{a}_{b}"),
            DistributionSpec::Binomial { n, p } => format!("binomial_{n}_{p}"),
            DistributionSpec::Poisson { lambda } => format!("poisson_{lambda}"),
        };
        raw.replace('.', "").replace('-', "m")
    }
}

/// Draw `r` variates. Methods are pinned so every implementation reproduces
/// the same stream from the same seed: discrete uniform by inversion,
/// binomial as a sum of n Bernoulli draws (n uniforms consumed per variate),
/// Poisson by sequential-search inversion on one uniform per variate.
pub fn sample(
    spec: &DistributionSpec,
    r: usize,
    stream: &mut SplitMix64,
) -> Result<Vec<i64>, HarnessError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(r);
    match *spec {
        DistributionSpec::DiscreteUniform { a, b } => {
            let width = (b - a + 1) as f64;
            for _ in 0..r {
                let u = stream.next_f64();
                let v = a + (u * width).floor() as i64;
                out.push(v.min(b));
            }
        }
        DistributionSpec::Binomial { n, p } => {
            for _ in 0..r {
                let mut k = 0i64;
                for _ in 0..n {
                    if stream.next_f64() < p {
                        k += 1;
                    }
                }
                out.push(k);
            }
        }
        DistributionSpec::Poisson { lambda } => {
            for _ in 0..r {
                let u = stream.next_f64();
                let mut k = 0i64;
                let mut p = (-lambda).exp();
                let mut cdf = p;
                while u > cdf {
                    k += 1;
                    p *= lambda / k as f64;
                    cdf += p;
                    if k > 10_000 {
                        break; // numerically exhausted tail
                    }
                }
                out.push(k);
            }
        }
    }
    Ok(out)
}

/// Empirical distribution of a sample: distinct observed values in ascending
/// order with probabilities count/R (all strictly positive by construction).
pub fn empirical(samples: &[i64]) -> EmpiricalDistribution {
    assert!(!samples.is_empty(), "empirical needs at least one sample");
    let mut counts: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
    for &v in samples {
        *counts.entry(v).or_insert(0) += 1;
    }
    let r = samples.len() as f64;
    let support: Vec<f64> = counts.keys().map(|&v| v as f64).collect();
    let probs: Vec<f64> = counts.values().map(|&c| c as f64 / r).collect();
    EmpiricalDistribution::new(support, probs).expect("counts give a valid distribution")
}

// ---------------------------------------------------------------------------
// experiment configuration and report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum ProblemConfig {
    Newsvendor {
        c: f64,
        c_b: f64,
        c_h: f64,
    },
    /// UFL on an explicit skeleton (geometry plus fixed costs); every
    /// customer draws from the same named distribution.
    Ufl {
        skeleton: UflSkeleton,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    /// Training and test sample count (R draws each).
    pub r: usize,
    /// Robustness levels, distinct and ascending, in [0, 1].
    pub thetas: Vec<f64>,
    pub seed: u64,
    pub problem: ProblemConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.distribution.validate()?;
        if self.r < 1 {
            return Err(HarnessError::InvalidConfig("R must be >= 1".into()));
        }
        if self.thetas.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "need at least one theta".into(),
            ));
        }
        for w in self.thetas.windows(2) {
            if w[0] >= w[1] {
                return Err(HarnessError::InvalidConfig(
                    "thetas must be distinct and ascending".into(),
                ));
            }
        }
        if self.thetas.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(HarnessError::InvalidConfig(
                "thetas must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub avg: f64,
    pub st_dev: f64,
    pub worst10: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Mean, sample standard deviation (divisor R-1; zero when R = 1), the mean
/// of the ceil(0.1 R) largest values, and quartiles by linear interpolation
/// between order statistics at positions k (R-1)/4.
pub fn statistics(costs: &[f64]) -> Result<Summary, HarnessError> {
    if costs.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let r = costs.len();
    let avg = costs.iter().sum::<f64>() / r as f64;
    let st_dev = if r == 1 {
        0.0
    } else {
        let ss: f64 = costs.iter().map(|&c| (c - avg) * (c - avg)).sum();
        (ss / (r - 1) as f64).sqrt()
    };
    let mut sorted = costs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k_worst = ((0.1 * r as f64).ceil() as usize).max(1);
    let worst10 = sorted[r - k_worst..].iter().sum::<f64>() / k_worst as f64;
    let quartile = |k: usize| -> f64 {
        let pos = k as f64 * (r - 1) as f64 / 4.0;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 < r {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        }
    };
    Ok(Summary {
        avg,
        st_dev,
        worst10,
        min: sorted[0],
        q1: quartile(1),
        median: quartile(2),
        q3: quartile(3),
        max: sorted[r - 1],
    })
}

#[derive(Debug, Clone)]
pub struct ThetaRow {
    pub theta: f64,
    /// First-stage decision (length 1 for the newsvendor).
    pub decision: Vec<i64>,
    pub summary: Summary,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub rows: Vec<ThetaRow>,
    pub seed: u64,
    pub distribution: String,
    pub problem: String,
    /// Maximum KL divergence of each trained empirical distribution (one
    /// entry for the newsvendor, one per customer for UFL).
    pub eps_bar: Vec<f64>,
}

/// Run one experiment: train, solve the model per robustness level (the
/// zero level is the stochastic program), then price the decisions on an
/// independent test draw.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvaluationReport, HarnessError> {
    config.validate()?;
    match &config.problem {
        ProblemConfig::Newsvendor { c, c_b, c_h } => run_newsvendor(config, *c, *c_b, *c_h),
        ProblemConfig::Ufl { skeleton } => run_ufl(config, skeleton),
    }
}

fn solve_failed(theta: f64) -> impl FnOnce(AppError) -> HarnessError {
    move |e| HarnessError::SolveFailed {
        theta,
        message: e.to_string(),
    }
}

fn run_newsvendor(
    config: &ExperimentConfig,
    c: f64,
    c_b: f64,
    c_h: f64,
) -> Result<EvaluationReport, HarnessError> {
    let mut train_stream = substream(config.seed, STREAM_TRAIN, 0);
    let train = sample(&config.distribution, config.r, &mut train_stream)?;
    let q = empirical(&train);
    let eps_bar = max_kl(&q);

    let mut test_stream = substream(config.seed, STREAM_TEST, 0);
    let test = sample(&config.distribution, config.r, &mut test_stream)?;

    let mip = MipSettings::default();
    let mut rows = Vec::with_capacity(config.thetas.len());
    for &theta in &config.thetas {
        let inst = NewsvendorInstance::new(c, c_b, c_h, q.clone(), theta * eps_bar)
            .map_err(solve_failed(theta))?;
        let (y, _) =
            newsvendor::optimal_order_quantity(&inst, &mip).map_err(solve_failed(theta))?;
        let costs: Vec<f64> = test
            .iter()
            .map(|&d| c * y as f64 + newsvendor::newsvendor_h(c_b, c_h, y as f64, d as f64))
            .collect();
        let summary = statistics(&costs)?;
        rows.push(ThetaRow {
            theta,
            decision: vec![y],
            summary,
            costs,
        });
    }
    Ok(EvaluationReport {
        rows,
        seed: config.seed,
        distribution: config.distribution.name(),
        problem: "newsvendor".into(),
        eps_bar: vec![eps_bar],
    })
}

fn run_ufl(
    config: &ExperimentConfig,
    skeleton: &UflSkeleton,
) -> Result<EvaluationReport, HarnessError> {
    let m = skeleton.customer_locations.len();
    let mut trained: Vec<EmpiricalDistribution> = Vec::with_capacity(m);
    let mut eps_bar = Vec::with_capacity(m);
    for i in 0..m {
        let mut stream = substream(config.seed, STREAM_TRAIN, i as u64);
        let draw = sample(&config.distribution, config.r, &mut stream)?;
        let q = empirical(&draw);
        eps_bar.push(max_kl(&q));
        trained.push(q);
    }
    let mut test: Vec<Vec<i64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut stream = substream(config.seed, STREAM_TEST, i as u64);
        test.push(sample(&config.distribution, config.r, &mut stream)?);
    }
    let transport = skeleton.transport();

    let mip = MipSettings::default();
    let mut rows = Vec::with_capacity(config.thetas.len());
    for &theta in &config.thetas {
        let epsilons: Vec<f64> = eps_bar.iter().map(|&e| theta * e).collect();
        let inst: UflInstance = skeleton
            .with_demands(trained.clone(), epsilons)
            .map_err(solve_failed(theta))?;
        let (y, _) = ufl::optimal_facilities(&inst, &mip).map_err(solve_failed(theta))?;
        // test cost realization r: fixed cost + each customer's r-th demand
        // times its nearest-open distance
        let fixed: f64 = skeleton
            .fixed_costs
            .iter()
            .zip(&y)
            .filter(|&(_, &open)| open)
            .map(|(&f, _)| f)
            .sum();
        let mut costs = Vec::with_capacity(config.r);
        for rix in 0..config.r {
            let mut cost = fixed;
            for i in 0..m {
                let dist =
                    ufl::min_open_distance(&transport[i], &y).map_err(solve_failed(theta))?;
                cost += test[i][rix] as f64 * dist;
            }
            costs.push(cost);
        }
        let summary = statistics(&costs)?;
        rows.push(ThetaRow {
            theta,
            decision: y.iter().map(|&open| open as i64).collect(),
            summary,
            costs,
        });
    }
    Ok(EvaluationReport {
        rows,
        seed: config.seed,
        distribution: config.distribution.name(),
        problem: "ufl".into(),
        eps_bar,
    })
}

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// theta, decision, average, standard deviation, worst 10%.
    TableCsv,
    /// theta, five-number summary, plus the raw long-format file.
    BoxplotCsv,
}

fn decision_field(decision: &[i64]) -> String {
    if decision.len() == 1 {
        decision[0].to_string()
    } else {
        let joined = decision
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!("\"{joined}\"")
    }
}

/// Write the report files into `dir` with the given stem; returns the paths
/// written. TableCsv writes `<stem>_table.csv`; BoxplotCsv writes
/// `<stem>_boxplot.csv` and `<stem>_raw.csv`. Rows are ordered by theta.
pub fn emit_report(
    report: &EvaluationReport,
    format: ReportFormat,
    dir: &std::path::Path,
    stem: &str,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::TableCsv => {
            let mut text = String::from("theta,y_star,avg,st_dev,worst10\n");
            for row in &report.rows {
                text.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6}\n",
                    row.theta,
                    decision_field(&row.decision),
                    row.summary.avg,
                    row.summary.st_dev,
                    row.summary.worst10
                ));
            }
            let path = dir.join(format!("{stem}_table.csv"));
            std::fs::write(&path, text)?;
            written.push(path);
        }
        ReportFormat::BoxplotCsv => {
            let mut text = String::from("theta,min,q1,median,q3,max\n");
            for row in &report.rows {
                text.push_str(&format!(
                    "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                    row.theta,
                    row.summary.min,
                    row.summary.q1,
                    row.summary.median,
                    row.summary.q3,
                    row.summary.max
                ));
            }
            let path = dir.join(format!("{stem}_boxplot.csv"));
            std::fs::write(&path, text)?;
            written.push(path);

            let mut raw = String::from("theta,cost\n");
            for row in &report.rows {
                for &c in &row.costs {
                    raw.push_str(&format!("{},{:.6}\n", row.theta, c));
                }
            }
            let raw_path = dir.join(format!("{stem}_raw.csv"));
            std::fs::write(&raw_path, raw)?;
            written.push(raw_path);
        }
    }
    Ok(written)
}
