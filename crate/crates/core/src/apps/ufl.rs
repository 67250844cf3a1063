//! Uncapacitated facility location: open facilities (binary y_j, fixed cost
//! f_j), serve every customer from its closest open facility at unit
//! transportation cost t_ij per unit of demand.
//!
//! The deterministic model keeps explicit assignment variables x_ij. The
//! distributionally robust model drops them: the per-customer second-stage
//! cost d * min{ t_ij : y_j = 1 } is linearized exactly as
//!
//!   min{ t_j : y_j = 1 } = max_l { t_l - sum_j y_j max(t_l - t_j, 0) }
//!
//! for any y with at least one open facility, giving n affine pieces per
//! (customer, scenario) pair. Assignments are reconstructed afterwards as the
//! nearest open facility, ties to the lowest index.

use super::AppError;
use crate::dro::{
    self, AffinePiece, FirstStageSpec, LinearRow, Rel, RobustCounterpart, SecondStageSpec,
};
use crate::kl::{AmbiguitySet, EmpiricalDistribution};
use crate::mip::{self, IntegerVar, MipSettings, MipStatus, MixedIntegerConicProgram};
use crate::program::{ProgramBuilder, Sense};

#[derive(Debug, Clone)]
pub struct UflInstance {
    /// Fixed opening cost per facility (length n).
    pub fixed_costs: Vec<f64>,
    /// Unit transportation costs, customers x facilities (m x n).
    pub transport: Vec<Vec<f64>>,
    /// Demand distribution per customer (length m).
    pub demands: Vec<EmpiricalDistribution>,
    /// KL radius per customer (length m).
    pub epsilons: Vec<f64>,
}

impl UflInstance {
    pub fn new(
        fixed_costs: Vec<f64>,
        transport: Vec<Vec<f64>>,
        demands: Vec<EmpiricalDistribution>,
        epsilons: Vec<f64>,
    ) -> Result<Self, AppError> {
        let n = fixed_costs.len();
        let m = transport.len();
        if n == 0 || m == 0 {
            return Err(AppError::Shape(
                "need at least one facility and customer".into(),
            ));
        }
        if transport.iter().any(|row| row.len() != n) {
            return Err(AppError::Shape("transport rows must have n entries".into()));
        }
        if demands.len() != m || epsilons.len() != m {
            return Err(AppError::Shape(
                "demands and epsilons must have one entry per customer".into(),
            ));
        }
        if fixed_costs.iter().any(|&f| f < 0.0) || transport.iter().flatten().any(|&t| t < 0.0) {
            return Err(AppError::InvalidParameter(
                "costs must be nonnegative".into(),
            ));
        }
        if epsilons.iter().any(|&e| e < 0.0) {
            return Err(AppError::InvalidParameter("epsilons must be >= 0".into()));
        }
        Ok(UflInstance {
            fixed_costs,
            transport,
            demands,
            epsilons,
        })
    }

    pub fn num_facilities(&self) -> usize {
        self.fixed_costs.len()
    }

    pub fn num_customers(&self) -> usize {
        self.transport.len()
    }
}

/// min{ t_j : y_j = 1 } by direct scan.
pub fn min_open_distance(t_row: &[f64], y: &[bool]) -> Result<f64, AppError> {
    t_row
        .iter()
        .zip(y)
        .filter(|&(_, &open)| open)
        .map(|(&t, _)| t)
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a| a.min(t)))
        })
        .ok_or(AppError::NoOpenFacility)
}

/// The exact linearization max_l { t_l - sum_j y_j max(t_l - t_j, 0) };
/// equals [`min_open_distance`] for every y with an open facility.
pub fn lemma1_linearization(t_row: &[f64], y: &[bool]) -> Result<f64, AppError> {
    if !y.iter().any(|&open| open) {
        return Err(AppError::NoOpenFacility);
    }
    let n = t_row.len();
    let mut best = f64::NEG_INFINITY;
    for l in 0..n {
        let mut z = t_row[l];
        for j in 0..n {
            if y[j] {
                z -= (t_row[l] - t_row[j]).max(0.0);
            }
        }
        best = best.max(z);
    }
    Ok(best)
}

/// Index of the nearest open facility, ties to the lowest index.
pub fn nearest_open_facility(t_row: &[f64], y: &[bool]) -> Result<usize, AppError> {
    let mut best: Option<(f64, usize)> = None;
    for (j, (&t, &open)) in t_row.iter().zip(y).enumerate() {
        if open && best.map(|(bt, _)| t < bt).unwrap_or(true) {
            best = Some((t, j));
        }
    }
    best.map(|(_, j)| j).ok_or(AppError::NoOpenFacility)
}

/// Total cost of a fixed open pattern under fixed demands:
/// sum f_j y_j + sum_i d_i min{ t_ij : y_j = 1 }.
pub fn closed_form_cost(
    fixed_costs: &[f64],
    transport: &[Vec<f64>],
    demands: &[f64],
    y: &[bool],
) -> Result<f64, AppError> {
    let mut total: f64 = fixed_costs
        .iter()
        .zip(y)
        .filter(|&(_, &open)| open)
        .map(|(&f, _)| f)
        .sum();
    for (row, &d) in transport.iter().zip(demands) {
        total += d * min_open_distance(row, y)?;
    }
    Ok(total)
}

/// Deterministic UFL as a pure binary program: assignment variables x_ij,
/// one-facility-per-customer rows, open-facility rows, and the valid
/// inequality sum_j y_j >= 1.
pub fn build_ufl_deterministic(
    fixed_costs: &[f64],
    transport: &[Vec<f64>],
    demands: &[f64],
) -> MixedIntegerConicProgram {
    let n = fixed_costs.len();
    let m = transport.len();
    let mut b = ProgramBuilder::new(Sense::Minimize);
    let y0 = b.add_block(crate::cones::ConeBlock::nonneg(n));
    let x0 = b.add_block(crate::cones::ConeBlock::nonneg(m * n));
    for (j, &f) in fixed_costs.iter().enumerate() {
        b.set_objective(y0 + j, f);
    }
    for i in 0..m {
        for j in 0..n {
            b.set_objective(x0 + i * n + j, demands[i] * transport[i][j]);
        }
    }
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (x0 + i * n + j, 1.0)).collect();
        b.add_eq_row(&coeffs, 1.0);
    }
    for i in 0..m {
        for j in 0..n {
            b.add_le_row(&[(x0 + i * n + j, 1.0), (y0 + j, -1.0)], 0.0);
        }
    }
    let ys: Vec<(usize, f64)> = (0..n).map(|j| (y0 + j, 1.0)).collect();
    b.add_ge_row(&ys, 1.0);

    let mut integers: Vec<IntegerVar> = (0..n)
        .map(|j| IntegerVar {
            col: y0 + j,
            lower: 0,
            upper: 1,
        })
        .collect();
    integers.extend((0..m * n).map(|k| IntegerVar {
        col: x0 + k,
        lower: 0,
        upper: 1,
    }));
    MixedIntegerConicProgram {
        base: b.build(),
        integers,
    }
}

pub fn first_stage(inst: &UflInstance) -> FirstStageSpec {
    let n = inst.num_facilities();
    FirstStageSpec {
        num_vars: n,
        cost: inst.fixed_costs.clone(),
        rows: vec![LinearRow {
            coeffs: (0..n).map(|j| (j, 1.0)).collect(),
            rel: Rel::Ge,
            rhs: 1.0,
        }],
        integers: (0..n)
            .map(|j| IntegerVar {
                col: j,
                lower: 0,
                upper: 1,
            })
            .collect(),
    }
}

/// Pieces for customer i: for each candidate facility l,
/// d ( t_il - sum_j y_j max(t_il - t_ij, 0) ), i.e. per-unit-demand
/// coefficients on y and intercept t_il.
pub fn second_stage(inst: &UflInstance, customer: usize) -> SecondStageSpec {
    let t_row = &inst.transport[customer];
    let n = t_row.len();
    let mut pieces = Vec::with_capacity(n);
    for l in 0..n {
        let mut per_d = Vec::new();
        for j in 0..n {
            let cut = (t_row[l] - t_row[j]).max(0.0);
            if cut > 0.0 {
                per_d.push((j, -cut));
            }
        }
        pieces.push(AffinePiece {
            y_coeff_per_d: per_d,
            intercept_per_d: t_row[l],
            ..Default::default()
        });
    }
    SecondStageSpec { pieces }
}

pub fn ambiguity_sets(inst: &UflInstance) -> Result<Vec<AmbiguitySet>, AppError> {
    inst.demands
        .iter()
        .zip(&inst.epsilons)
        .map(|(d, &e)| AmbiguitySet::new(d.clone(), e).map_err(|k| AppError::Build(k.to_string())))
        .collect()
}

/// The robust counterpart with binary y; customers with a zero radius get
/// expectation blocks.
pub fn build_ufl_dr(inst: &UflInstance) -> Result<RobustCounterpart, dro::DroError> {
    let mut seconds: Vec<(SecondStageSpec, AmbiguitySet)> =
        Vec::with_capacity(inst.num_customers());
    for i in 0..inst.num_customers() {
        let amb = AmbiguitySet::new(inst.demands[i].clone(), inst.epsilons[i])?;
        seconds.push((second_stage(inst, i), amb));
    }
    dro::build_counterpart(&first_stage(inst), &seconds)
}

/// Build, solve, and extract the open pattern plus objective.
pub fn optimal_facilities(
    inst: &UflInstance,
    settings: &MipSettings,
) -> Result<(Vec<bool>, f64), AppError> {
    let rc = build_ufl_dr(inst).map_err(|e| AppError::Build(e.to_string()))?;
    let sol = mip::solve_mip(&rc.program, settings);
    if sol.status != MipStatus::Optimal {
        return Err(AppError::Solve(format!(
            "ufl solve ended with {:?}",
            sol.status
        )));
    }
    let y: Vec<bool> = rc.extract_y(&sol.x).iter().map(|&v| v > 0.5).collect();
    Ok((y, sol.objective_value))
}

/// All nonzero binary patterns over n facilities (the enumeration oracle's
/// candidate set; 2^n - 1 patterns).
pub fn nonzero_patterns(n: usize) -> Vec<Vec<i64>> {
    (1..(1u64 << n))
        .map(|mask| (0..n).map(|j| ((mask >> j) & 1) as i64).collect())
        .collect()
}

/// Exact rational, used for instance geometry that must not drift
/// (the reference grid lives on thirty-sixths).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0);
        Rational { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for Rational {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (
                a.trim().parse::<i64>().map_err(|e| e.to_string())?,
                b.trim().parse::<i64>().map_err(|e| e.to_string())?,
            ),
            None => (s.trim().parse::<i64>().map_err(|e| e.to_string())?, 1),
        };
        if den == 0 {
            return Err("zero denominator".into());
        }
        Ok(Rational { num, den })
    }
}

/// Locations and costs of the reference instance: 12 customers in two even
/// clusters at (2h-1)/36 and (35-2h)/36 for h in 1..=6, three facilities at
/// (2H-1)/6, fixed costs (10, 5, 10), transportation cost equal to distance.
#[derive(Debug, Clone)]
pub struct UflSkeleton {
    pub customer_locations: Vec<Rational>,
    pub facility_locations: Vec<Rational>,
    pub fixed_costs: Vec<f64>,
}

impl UflSkeleton {
    /// |customer - facility| distances as the transport matrix.
    pub fn transport(&self) -> Vec<Vec<f64>> {
        self.customer_locations
            .iter()
            .map(|&c| {
                self.facility_locations
                    .iter()
                    .map(|&f| {
                        // common denominator keeps the arithmetic exact
                        let num = (c.num * f.den - f.num * c.den).abs();
                        let den = c.den * f.den;
                        num as f64 / den as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Attach demand distributions and radii to get a solvable instance.
    pub fn with_demands(
        &self,
        demands: Vec<EmpiricalDistribution>,
        epsilons: Vec<f64>,
    ) -> Result<UflInstance, AppError> {
        UflInstance::new(
            self.fixed_costs.clone(),
            self.transport(),
            demands,
            epsilons,
        )
    }
}

pub fn reference_ufl_instance() -> UflSkeleton {
    let mut customers: Vec<Rational> = (1..=6).map(|h| Rational::new(2 * h - 1, 36)).collect();
    customers.extend((1..=6).map(|h| Rational::new(35 - 2 * h, 36)));
    let facilities: Vec<Rational> = (1..=3).map(|h| Rational::new(2 * h - 1, 6)).collect();
    UflSkeleton {
        customer_locations: customers,
        facility_locations: facilities,
        fixed_costs: vec![10.0, 5.0, 10.0],
    }
}
