//! TOML configuration files: problem instances for one-shot solves and
//! experiment descriptions for the out-of-sample harness. Field names are
//! fixed; regression tests pin them.
//!
//! Instance file, newsvendor:
//!
//! ```toml
//! [newsvendor]
//! c = 1.0
//! c_b = 2.0
//! c_h = 1.0
//! epsilon = 0.3            # or: theta = 0.1 (relative to the max divergence)
//! [newsvendor.demand]
//! values = [5]
//! probs = [1.0]            # optional; uniform over values when omitted
//! ```
//!
//! Instance file, facility location (geometry either as locations with exact
//! rationals or an explicit transport matrix `t`):
//!
//! ```toml
//! [ufl]
//! fixed_costs = [10.0, 5.0, 10.0]
//! customer_locations = ["1/36", "3/36"]
//! facility_locations = ["1/6", "1/2", "5/6"]
//! # t = [[0.14, 0.36, 0.81], [0.08, 0.31, 0.75]]
//! theta = 0.05             # or: epsilon = 0.1 / epsilons = [..] per customer
//! [[ufl.demands]]
//! values = [4, 5, 6]
//! probs = [0.25, 0.5, 0.25]
//! # one entry broadcasts to every customer; otherwise one entry per customer
//! ```
//!
//! Experiment file:
//!
//! ```toml
//! problem = "newsvendor"   # or "ufl"
//! r = 100
//! thetas = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25]
//! seed = 20240901
//! output_dir = "out"       # optional
//! stem = "news_uniform"    # optional output file stem
//! [distribution]
//! kind = "uniform"         # "uniform" | "binomial" | "poisson"
//! params = [0, 10]         # uniform: a, b; binomial: n, p; poisson: lambda
//! [newsvendor]
//! c = 1.0
//! c_b = 2.0
//! c_h = 1.0
//! [ufl]
//! reference_instance = true    # or explicit fixed_costs + locations
//! ```

use crate::apps::newsvendor::NewsvendorInstance;
use crate::apps::ufl::{Rational, UflInstance, UflSkeleton};
use crate::harness::{DistributionSpec, ExperimentConfig, ProblemConfig};
use crate::kl::{max_kl, EmpiricalDistribution};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Semantic(String),
}

fn semantic(msg: impl Into<String>) -> ConfigError {
    ConfigError::Semantic(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    values: Vec<f64>,
    probs: Option<Vec<f64>>,
}

impl RawDemand {
    fn build(&self) -> Result<EmpiricalDistribution, ConfigError> {
        let probs = match &self.probs {
            Some(p) => p.clone(),
            None => vec![1.0 / self.values.len() as f64; self.values.len()],
        };
        EmpiricalDistribution::new(self.values.clone(), probs)
            .map_err(|e| semantic(format!("demand: {e}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNewsvendor {
    c: f64,
    c_b: f64,
    c_h: f64,
    epsilon: Option<f64>,
    theta: Option<f64>,
    demand: Option<RawDemand>,
    min_order: Option<i64>,
    max_order: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUfl {
    fixed_costs: Option<Vec<f64>>,
    t: Option<Vec<Vec<f64>>>,
    customer_locations: Option<Vec<String>>,
    facility_locations: Option<Vec<String>>,
    reference_instance: Option<bool>,
    epsilon: Option<f64>,
    epsilons: Option<Vec<f64>>,
    theta: Option<f64>,
    demands: Option<Vec<RawDemand>>,
    min_open: Option<u32>,
    max_open: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    kind: String,
    params: Vec<f64>,
}

impl RawDistribution {
    fn build(&self) -> Result<DistributionSpec, ConfigError> {
        match self.kind.as_str() {
            "uniform" => {
                if self.params.len() != 2 {
                    return Err(semantic("uniform needs params = [a, b]"));
                }
                Ok(DistributionSpec::DiscreteUniform {
                    a: self.params[0] as i64,
                    b: self.params[1] as i64,
                })
            }
            "binomial" => {
                if self.params.len() != 2 {
                    return Err(semantic("binomial needs params = [n, p]"));
                }
                Ok(DistributionSpec::Binomial {
                    n: self.params[0] as u32,
                    p: self.params[1],
                })
            }
            "poisson" => {
                if self.params.len() != 1 {
                    return Err(semantic("poisson needs params = [lambda]"));
                }
                Ok(DistributionSpec::Poisson {
                    lambda: self.params[0],
                })
            }
            other => Err(semantic(format!(
                "unknown distribution kind {other:?} (expected uniform, binomial or poisson)"
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    problem: Option<String>,
    r: Option<usize>,
    thetas: Option<Vec<f64>>,
    seed: Option<u64>,
    output_dir: Option<String>,
    stem: Option<String>,
    distribution: Option<RawDistribution>,
    newsvendor: Option<RawNewsvendor>,
    ufl: Option<RawUfl>,
}

/// A one-shot solvable instance, with any extra first-stage bounds from the
/// config file (order bounds for the newsvendor, open-facility count bounds
/// for UFL).
#[derive(Debug, Clone)]
pub enum SolveInstance {
    Newsvendor {
        inst: NewsvendorInstance,
        min_order: Option<i64>,
        max_order: Option<i64>,
    },
    Ufl {
        inst: UflInstance,
        min_open: Option<u32>,
        max_open: Option<u32>,
    },
}

impl SolveInstance {
    /// Assemble the mixed-integer counterpart, including the extra
    /// first-stage rows.
    pub fn build_model(&self) -> Result<crate::dro::RobustCounterpart, ConfigError> {
        use crate::apps::{newsvendor as nv, ufl as ufl_app};
        use crate::dro::{LinearRow, Rel};
        match self {
            SolveInstance::Newsvendor {
                inst,
                min_order,
                max_order,
            } => {
                let mut first = nv::first_stage(inst);
                if let Some(lo) = min_order {
                    first.rows.push(LinearRow {
                        coeffs: vec![(0, 1.0)],
                        rel: Rel::Ge,
                        rhs: *lo as f64,
                    });
                }
                if let Some(hi) = max_order {
                    first.rows.push(LinearRow {
                        coeffs: vec![(0, 1.0)],
                        rel: Rel::Le,
                        rhs: *hi as f64,
                    });
                }
                let amb = crate::kl::AmbiguitySet::new(inst.demand.clone(), inst.epsilon)
                    .map_err(|e| semantic(e.to_string()))?;
                crate::dro::build_counterpart(&first, &[(nv::second_stage(inst), amb)])
                    .map_err(|e| semantic(e.to_string()))
            }
            SolveInstance::Ufl {
                inst,
                min_open,
                max_open,
            } => {
                let n = inst.num_facilities();
                let mut first = ufl_app::first_stage(inst);
                if let Some(lo) = min_open {
                    first.rows.push(LinearRow {
                        coeffs: (0..n).map(|j| (j, 1.0)).collect(),
                        rel: Rel::Ge,
                        rhs: *lo as f64,
                    });
                }
                if let Some(hi) = max_open {
                    first.rows.push(LinearRow {
                        coeffs: (0..n).map(|j| (j, 1.0)).collect(),
                        rel: Rel::Le,
                        rhs: *hi as f64,
                    });
                }
                let mut seconds = Vec::with_capacity(inst.num_customers());
                for i in 0..inst.num_customers() {
                    let amb =
                        crate::kl::AmbiguitySet::new(inst.demands[i].clone(), inst.epsilons[i])
                            .map_err(|e| semantic(e.to_string()))?;
                    seconds.push((ufl_app::second_stage(inst, i), amb));
                }
                crate::dro::build_counterpart(&first, &seconds).map_err(|e| semantic(e.to_string()))
            }
        }
    }
}

fn parse_locations(raw: &[String], what: &str) -> Result<Vec<Rational>, ConfigError> {
    raw.iter()
        .map(|s| {
            s.parse::<Rational>()
                .map_err(|e| semantic(format!("{what} {s:?}: {e}")))
        })
        .collect()
}

fn resolve_radius(
    epsilon: Option<f64>,
    theta: Option<f64>,
    eps_bar: f64,
) -> Result<f64, ConfigError> {
    match (epsilon, theta) {
        (Some(_), Some(_)) => Err(semantic("give either epsilon or theta, not both")),
        (Some(e), None) => {
            if e < 0.0 {
                Err(semantic("epsilon must be >= 0"))
            } else {
                Ok(e)
            }
        }
        (None, Some(t)) => {
            if !(0.0..=1.0).contains(&t) {
                Err(semantic("theta must lie in [0, 1]"))
            } else {
                Ok(t * eps_bar)
            }
        }
        (None, None) => Ok(0.0),
    }
}

fn ufl_skeleton(raw: &RawUfl) -> Result<(Vec<f64>, Vec<Vec<f64>>), ConfigError> {
    if raw.reference_instance == Some(true) {
        let sk = crate::apps::ufl::reference_ufl_instance();
        return Ok((sk.fixed_costs.clone(), sk.transport()));
    }
    let fixed = raw
        .fixed_costs
        .clone()
        .ok_or_else(|| semantic("ufl needs fixed_costs (or reference_instance = true)"))?;
    if let Some(t) = &raw.t {
        return Ok((fixed, t.clone()));
    }
    let (c_raw, f_raw) = match (&raw.customer_locations, &raw.facility_locations) {
        (Some(c), Some(f)) => (c, f),
        _ => {
            return Err(semantic(
                "ufl needs either t or customer_locations + facility_locations",
            ))
        }
    };
    let sk = UflSkeleton {
        customer_locations: parse_locations(c_raw, "customer location")?,
        facility_locations: parse_locations(f_raw, "facility location")?,
        fixed_costs: fixed.clone(),
    };
    Ok((fixed, sk.transport()))
}

/// Parse an instance file for `solve`: exactly one of `[newsvendor]` /
/// `[ufl]`.
pub fn load_solve_instance(text: &str) -> Result<SolveInstance, ConfigError> {
    let raw: RawFile = toml::from_str(text)?;
    match (raw.newsvendor, raw.ufl) {
        (Some(nv), None) => {
            let demand = nv
                .demand
                .as_ref()
                .ok_or_else(|| semantic("newsvendor instance needs a demand table"))?
                .build()?;
            let eps = resolve_radius(nv.epsilon, nv.theta, max_kl(&demand))?;
            let inst = NewsvendorInstance::new(nv.c, nv.c_b, nv.c_h, demand, eps)
                .map_err(|e| semantic(e.to_string()))?;
            Ok(SolveInstance::Newsvendor {
                inst,
                min_order: nv.min_order,
                max_order: nv.max_order,
            })
        }
        (None, Some(u)) => {
            let (fixed, transport) = ufl_skeleton(&u)?;
            let m = transport.len();
            let raw_demands = u
                .demands
                .as_ref()
                .ok_or_else(|| semantic("ufl instance needs demands"))?;
            let demands: Vec<EmpiricalDistribution> = if raw_demands.len() == 1 {
                let d = raw_demands[0].build()?;
                vec![d; m]
            } else if raw_demands.len() == m {
                raw_demands
                    .iter()
                    .map(|d| d.build())
                    .collect::<Result<_, _>>()?
            } else {
                return Err(semantic(format!(
                    "expected 1 or {m} demand tables, got {}",
                    raw_demands.len()
                )));
            };
            let epsilons: Vec<f64> = if let Some(list) = &u.epsilons {
                if u.epsilon.is_some() || u.theta.is_some() {
                    return Err(semantic("give epsilons, epsilon, or theta - not several"));
                }
                if list.len() != m {
                    return Err(semantic(format!("epsilons must have {m} entries")));
                }
                if list.iter().any(|&e| e < 0.0) {
                    return Err(semantic("epsilons must be >= 0"));
                }
                list.clone()
            } else {
                demands
                    .iter()
                    .map(|d| resolve_radius(u.epsilon, u.theta, max_kl(d)))
                    .collect::<Result<_, _>>()?
            };
            let inst = UflInstance::new(fixed, transport, demands, epsilons)
                .map_err(|e| semantic(e.to_string()))?;
            Ok(SolveInstance::Ufl {
                inst,
                min_open: u.min_open,
                max_open: u.max_open,
            })
        }
        (Some(_), Some(_)) => Err(semantic("give exactly one of [newsvendor] / [ufl]")),
        (None, None) => Err(semantic(
            "instance file needs a [newsvendor] or [ufl] table",
        )),
    }
}

/// Output preferences attached to an experiment config.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub output_dir: std::path::PathBuf,
    pub stem: String,
}

/// Parse an experiment file for `experiment`.
pub fn load_experiment(text: &str) -> Result<(ExperimentConfig, ExperimentOutput), ConfigError> {
    let raw: RawFile = toml::from_str(text)?;
    let problem_name = raw
        .problem
        .clone()
        .ok_or_else(|| semantic("experiment file needs problem = \"newsvendor\" | \"ufl\""))?;
    let distribution = raw
        .distribution
        .as_ref()
        .ok_or_else(|| semantic("experiment file needs a [distribution] table"))?
        .build()?;
    let problem = match problem_name.as_str() {
        "newsvendor" => {
            let nv = raw
                .newsvendor
                .as_ref()
                .ok_or_else(|| semantic("problem = \"newsvendor\" needs a [newsvendor] table"))?;
            if nv.epsilon.is_some()
                || nv.theta.is_some()
                || nv.demand.is_some()
                || nv.min_order.is_some()
                || nv.max_order.is_some()
            {
                return Err(semantic(
                    "experiment newsvendor table takes only c, c_b, c_h",
                ));
            }
            ProblemConfig::Newsvendor {
                c: nv.c,
                c_b: nv.c_b,
                c_h: nv.c_h,
            }
        }
        "ufl" => {
            let u = raw
                .ufl
                .as_ref()
                .ok_or_else(|| semantic("problem = \"ufl\" needs a [ufl] table"))?;
            let skeleton = if u.reference_instance == Some(true) {
                crate::apps::ufl::reference_ufl_instance()
            } else {
                let fixed = u.fixed_costs.clone().ok_or_else(|| {
                    semantic("ufl experiment needs fixed_costs or reference_instance")
                })?;
                let (c_raw, f_raw) = match (&u.customer_locations, &u.facility_locations) {
                    (Some(c), Some(f)) => (c, f),
                    _ => {
                        return Err(semantic(
                            "ufl experiment needs customer_locations + facility_locations",
                        ))
                    }
                };
                UflSkeleton {
                    customer_locations: parse_locations(c_raw, "customer location")?,
                    facility_locations: parse_locations(f_raw, "facility location")?,
                    fixed_costs: fixed,
                }
            };
            ProblemConfig::Ufl { skeleton }
        }
        other => {
            return Err(semantic(format!(
                "unknown problem {other:?} (expected newsvendor or ufl)"
            )))
        }
    };
    let config = ExperimentConfig {
        distribution,
        r: raw.r.unwrap_or(100),
        thetas: raw
            .thetas
            .unwrap_or_else(|| vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25]),
        seed: raw.seed.unwrap_or(20240901),
        problem,
    };
    config.validate().map_err(|e| semantic(e.to_string()))?;
    let stem = raw
        .stem
        .unwrap_or_else(|| format!("{}_{}", problem_name, config.distribution.slug()));
    Ok((
        config,
        ExperimentOutput {
            output_dir: raw.output_dir.unwrap_or_else(|| "out".into()).into(),
            stem,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newsvendor_instance_round_trip() {
        let text = r#"
[newsvendor]
c = 1.0
c_b = 2.0
c_h = 1.0
epsilon = 0.3
[newsvendor.demand]
values = [5]
probs = [1.0]
"#;
        match load_solve_instance(text).unwrap() {
            SolveInstance::Newsvendor { inst, .. } => {
                assert_eq!(inst.c_b, 2.0);
                assert_eq!(inst.epsilon, 0.3);
                assert_eq!(inst.demand.support(), &[5.0]);
            }
            _ => panic!("expected newsvendor"),
        }
    }

    #[test]
    fn ufl_reference_instance_with_theta() {
        let text = r#"
[ufl]
reference_instance = true
theta = 0.5
[[ufl.demands]]
values = [4, 6]
probs = [0.5, 0.5]
"#;
        match load_solve_instance(text).unwrap() {
            SolveInstance::Ufl { inst, .. } => {
                assert_eq!(inst.num_customers(), 12);
                assert_eq!(inst.num_facilities(), 3);
                let expect = 0.5 * 2.0f64.ln();
                for &e in &inst.epsilons {
                    assert!((e - expect).abs() < 1e-12);
                }
            }
            _ => panic!("expected ufl"),
        }
    }

    #[test]
    fn contradictory_order_bounds_build_an_infeasible_model() {
        let text = r#"
[newsvendor]
c = 1.0
c_b = 2.0
c_h = 1.0
min_order = 7
max_order = 3
[newsvendor.demand]
values = [5]
"#;
        let instance = load_solve_instance(text).unwrap();
        let rc = instance.build_model().unwrap();
        let sol = crate::mip::solve_mip(&rc.program, &crate::mip::MipSettings::default());
        assert_eq!(sol.status, crate::mip::MipStatus::Infeasible);
    }

    #[test]
    fn rejects_both_epsilon_and_theta() {
        let text = r#"
[newsvendor]
c = 1.0
c_b = 2.0
c_h = 1.0
epsilon = 0.1
theta = 0.1
[newsvendor.demand]
values = [5]
"#;
        assert!(matches!(
            load_solve_instance(text),
            Err(ConfigError::Semantic(_))
        ));
    }

    #[test]
    fn rejects_unknown_fields_with_diagnostic() {
        let text = "[newsvendor]\nc = 1.0\nc_b = 2.0\nc_h = 1.0\nbogus = 3\n";
        match load_solve_instance(text) {
            Err(ConfigError::Parse(e)) => {
                let msg = e.to_string();
                assert!(
                    msg.contains("bogus"),
                    "diagnostic should name the field: {msg}"
                );
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn experiment_defaults() {
        let text = r#"
problem = "newsvendor"
[distribution]
kind = "uniform"
params = [0, 10]
[newsvendor]
c = 1.0
c_b = 2.0
c_h = 1.0
"#;
        let (config, out) = load_experiment(text).unwrap();
        assert_eq!(config.r, 100);
        assert_eq!(config.thetas.len(), 6);
        assert_eq!(out.output_dir, std::path::PathBuf::from("out"));
        assert!(out.stem.starts_with("newsvendor_uniform"));
    }
}
