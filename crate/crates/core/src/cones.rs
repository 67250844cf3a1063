//! Cone vocabulary: zero (free variables), nonnegative orthant, exponential
//! cone and its dual, together with membership tests and the logarithmic
//! barrier machinery the interior-point solver consumes.
//!
//! The exponential cone is cl{ x : x1 >= x2 e^{x3/x2}, x2 > 0 }; its closure
//! adds the ray { x1 >= 0, x2 = 0, x3 <= 0 }. The dual cone is
//! cl{ s : s1 >= -s3 e^{(s2-s3)/s3}, s3 < 0 } with closure face
//! { s1 >= 0, s2 >= 0, s3 = 0 }. A linear change of variables maps the dual
//! cone onto the primal one, so a single barrier implementation serves both.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConeKind {
    /// Free variables; the dual cone is the origin. Carries no barrier.
    Zero,
    /// Componentwise nonnegative variables.
    Nonneg,
    /// Exponential cone, dimension 3.
    Exp,
    /// Dual exponential cone, dimension 3.
    DualExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub dim: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConeError {
    #[error("{kind:?} blocks must have dimension 3, got {dim}")]
    BadDimension { kind: ConeKind, dim: usize },
    #[error("point has dimension {got}, block has dimension {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("point is not strictly interior to the cone")]
    NotInterior,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, dim: usize) -> Result<Self, ConeError> {
        match kind {
            ConeKind::Exp | ConeKind::DualExp if dim != 3 => {
                Err(ConeError::BadDimension { kind, dim })
            }
            _ if dim == 0 => Err(ConeError::BadDimension { kind, dim }),
            _ => Ok(ConeBlock { kind, dim }),
        }
    }

    pub fn zero(dim: usize) -> Self {
        ConeBlock::new(ConeKind::Zero, dim).unwrap()
    }

    pub fn nonneg(dim: usize) -> Self {
        ConeBlock::new(ConeKind::Nonneg, dim).unwrap()
    }

    pub fn exp() -> Self {
        ConeBlock {
            kind: ConeKind::Exp,
            dim: 3,
        }
    }

    pub fn dual_exp() -> Self {
        ConeBlock {
            kind: ConeKind::DualExp,
            dim: 3,
        }
    }

    /// Barrier complexity parameter nu of the block.
    pub fn complexity(&self) -> f64 {
        match self.kind {
            ConeKind::Zero => 0.0,
            ConeKind::Nonneg => self.dim as f64,
            ConeKind::Exp | ConeKind::DualExp => 3.0,
        }
    }

    /// The cone whose members pair nonnegatively with this one.
    pub fn dual(&self) -> ConeBlock {
        let kind = match self.kind {
            // dual of free is {0}; we have no literal {0} kind, and none is
            // needed: dual programs encode it by omitting the slack.
            ConeKind::Zero => ConeKind::Zero,
            ConeKind::Nonneg => ConeKind::Nonneg,
            ConeKind::Exp => ConeKind::DualExp,
            ConeKind::DualExp => ConeKind::Exp,
        };
        ConeBlock {
            kind,
            dim: self.dim,
        }
    }

    /// Membership of `point` in the block's cone within absolute slack `tol`.
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool, ConeError> {
        if point.len() != self.dim {
            return Err(ConeError::DimensionMismatch {
                want: self.dim,
                got: point.len(),
            });
        }
        Ok(match self.kind {
            ConeKind::Zero => true,
            ConeKind::Nonneg => point.iter().all(|&v| v >= -tol),
            ConeKind::Exp => exp_cone_contains([point[0], point[1], point[2]], tol),
            ConeKind::DualExp => dual_exp_cone_contains([point[0], point[1], point[2]], tol),
        })
    }
}

/// True iff `x` lies within `tol` of the exponential cone: slack `tol` on the
/// defining inequality and on the sign constraints. The closure ray
/// { x1 >= 0, x2 = 0, x3 <= 0 } is handled by a case split at x2 <= tol,
/// where the exponential expression is undefined.
pub fn exp_cone_contains(x: [f64; 3], tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    if x[1] > tol {
        x[0] >= x[1] * (x[2] / x[1]).exp() - tol
    } else if x[1] >= -tol {
        x[0] >= -tol && x[2] <= tol
    } else {
        false
    }
}

/// True iff `s` lies within `tol` of the dual exponential cone, including the
/// closure face { s1 >= 0, s2 >= 0, s3 = 0 } (case split at s3 >= -tol).
pub fn dual_exp_cone_contains(s: [f64; 3], tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    if s[2] < -tol {
        s[0] >= -s[2] * ((s[1] - s[2]) / s[2]).exp() - tol
    } else if s[2] <= tol {
        s[0] >= -tol && s[1] >= -tol
    } else {
        false
    }
}

/// Linear change of variables carrying the dual exponential cone onto the
/// primal one: s in (K_exp)* iff dual_to_primal_map(s) in K_exp. Lets the
/// solver run a single nonsymmetric barrier.
pub fn dual_to_primal_map(s: [f64; 3]) -> [f64; 3] {
    [s[0], -s[2], s[2] - s[1]]
}

/// Inverse of [`dual_to_primal_map`]: x in K_exp maps to a point of (K_exp)*.
pub fn primal_to_dual_map(x: [f64; 3]) -> [f64; 3] {
    [x[0], -x[1] - x[2], -x[1]]
}

/// Barrier value, gradient and Hessian of a block at a strictly interior
/// point.
#[derive(Debug, Clone)]
pub struct BarrierEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major dim x dim symmetric positive definite matrix.
    pub hessian: Vec<f64>,
    pub complexity_parameter: f64,
}

/// Barrier of the 3-dimensional exponential cone,
/// F(x) = -log(x2 log(x1/x2) - x3) - log x1 - log x2, with nu = 3.
/// Returns None when the point is not strictly interior (including the
/// domain guard psi = x2 log(x1/x2) - x3 > 0).
pub fn exp_barrier(x: [f64; 3]) -> Option<(f64, [f64; 3], [[f64; 3]; 3])> {
    let (u, v, w) = (x[0], x[1], x[2]);
    if u <= 0.0 || v <= 0.0 {
        return None;
    }
    let r = (u / v).ln();
    let psi = v * r - w;
    if psi <= 0.0 || !psi.is_finite() {
        return None;
    }
    let value = -psi.ln() - u.ln() - v.ln();
    // grad psi = (v/u, r - 1, -1)
    let pu = v / u;
    let pv = r - 1.0;
    let pw = -1.0;
    let g = [-pu / psi - 1.0 / u, -pv / psi - 1.0 / v, -pw / psi];
    // H = (grad psi)(grad psi)^T / psi^2 - (hess psi)/psi + diag(1/u^2, 1/v^2, 0)
    // hess psi = [ -v/u^2, 1/u, 0; 1/u, -1/v, 0; 0, 0, 0 ]
    let ip2 = 1.0 / (psi * psi);
    let mut h = [[0.0; 3]; 3];
    let grad_psi = [pu, pv, pw];
    for i in 0..3 {
        for j in 0..3 {
            h[i][j] = grad_psi[i] * grad_psi[j] * ip2;
        }
    }
    h[0][0] += v / (u * u * psi) + 1.0 / (u * u);
    h[0][1] += -1.0 / (u * psi);
    h[1][0] += -1.0 / (u * psi);
    h[1][1] += 1.0 / (v * psi) + 1.0 / (v * v);
    Some((value, g, h))
}

const DUAL_MAP: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 1.0]];

/// Barrier of the dual exponential cone as the composition of [`exp_barrier`]
/// with [`dual_to_primal_map`]; nu stays 3 under the linear bijection.
pub fn dual_exp_barrier(s: [f64; 3]) -> Option<(f64, [f64; 3], [[f64; 3]; 3])> {
    let x = dual_to_primal_map(s);
    let (value, gx, hx) = exp_barrier(x)?;
    // grad_s = L^T g(Ls), hess_s = L^T H(Ls) L
    let mut g = [0.0; 3];
    for i in 0..3 {
        for k in 0..3 {
            g[i] += DUAL_MAP[k][i] * gx[k];
        }
    }
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    acc += DUAL_MAP[k][i] * hx[k][l] * DUAL_MAP[l][j];
                }
            }
            h[i][j] = acc;
        }
    }
    Some((value, g, h))
}

/// Barrier evaluation of a cone block at a strictly interior point.
/// Zero blocks carry no barrier: value 0, zero gradient and Hessian, nu = 0.
pub fn barrier(block: &ConeBlock, point: &[f64]) -> Result<BarrierEval, ConeError> {
    if point.len() != block.dim {
        return Err(ConeError::DimensionMismatch {
            want: block.dim,
            got: point.len(),
        });
    }
    match block.kind {
        ConeKind::Zero => Ok(BarrierEval {
            value: 0.0,
            gradient: vec![0.0; block.dim],
            hessian: vec![0.0; block.dim * block.dim],
            complexity_parameter: 0.0,
        }),
        ConeKind::Nonneg => {
            if point.iter().any(|&v| v <= 0.0) {
                return Err(ConeError::NotInterior);
            }
            let d = block.dim;
            let value = -point.iter().map(|v| v.ln()).sum::<f64>();
            let gradient: Vec<f64> = point.iter().map(|v| -1.0 / v).collect();
            let mut hessian = vec![0.0; d * d];
            for (j, &v) in point.iter().enumerate() {
                hessian[j * d + j] = 1.0 / (v * v);
            }
            Ok(BarrierEval {
                value,
                gradient,
                hessian,
                complexity_parameter: d as f64,
            })
        }
        ConeKind::Exp => {
            let (value, g, h) =
                exp_barrier([point[0], point[1], point[2]]).ok_or(ConeError::NotInterior)?;
            Ok(pack3(value, g, h))
        }
        ConeKind::DualExp => {
            let (value, g, h) =
                dual_exp_barrier([point[0], point[1], point[2]]).ok_or(ConeError::NotInterior)?;
            Ok(pack3(value, g, h))
        }
    }
}

fn pack3(value: f64, g: [f64; 3], h: [[f64; 3]; 3]) -> BarrierEval {
    BarrierEval {
        value,
        gradient: g.to_vec(),
        hessian: h.iter().flat_map(|row| row.iter().copied()).collect(),
        complexity_parameter: 3.0,
    }
}

/// Interior point of the exponential cone satisfying grad F(x0) = -x0; using
/// it with s0 = -grad F(x0) starts the solver exactly on the central path.
pub const EXP_INTERIOR_POINT: [f64; 3] = [1.290928, 0.805102, -0.827838];

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn exp_cone_membership_examples() {
        let tol = 1e-9;
        assert!(exp_cone_contains([1.0, 1.0, 0.0], tol)); // e^0 = 1, boundary
        assert!(exp_cone_contains([2.7182818, 1.0, 1.0], 1e-6)); // x1 = e^1 boundary
        assert!(!exp_cone_contains([1.0, 1.0, 1.0], tol)); // e^1 > 1
        assert!(exp_cone_contains([1.0, 0.0, -1.0], tol)); // closure ray, x2 = 0
        assert!(!exp_cone_contains([1.0, 0.0, 1.0], tol));
        assert!(!exp_cone_contains([-1.0, 0.0, -1.0], tol));
        assert!(!exp_cone_contains([1.0, -1.0, 0.0], tol));
    }

    #[test]
    fn dual_exp_cone_membership_examples() {
        let tol = 1e-9;
        // -s3 e^{(s2-s3)/s3} = e^{-1} ~ 0.3679 <= 1
        assert!(dual_exp_cone_contains([1.0, 0.0, -1.0], tol));
        assert!(dual_exp_cone_contains([1.0, 1.0, 0.0], tol)); // closure face
        assert!(!dual_exp_cone_contains([0.1, 0.0, -1.0], tol)); // e^{-1} > 0.1
        assert!(!dual_exp_cone_contains([1.0, 1.0, 1.0], tol)); // s3 > 0
        assert!(!dual_exp_cone_contains([-1.0, 1.0, 0.0], tol));
    }

    #[test]
    fn dual_map_examples() {
        assert_eq!(dual_to_primal_map([1.0, 0.0, -1.0]), [1.0, 1.0, -1.0]);
        assert_eq!(dual_to_primal_map([1.0, 1.0, 0.0]), [1.0, 0.0, -1.0]);
        assert_eq!(dual_to_primal_map([0.1, 0.0, -1.0]), [0.1, 1.0, -1.0]);
        // both memberships hold / fail together
        assert!(exp_cone_contains([1.0, 1.0, -1.0], 1e-9));
        assert!(!exp_cone_contains([0.1, 1.0, -1.0], 1e-9));
    }

    #[test]
    fn map_round_trips() {
        let s = [0.3, -0.7, 1.9];
        let x = dual_to_primal_map(s);
        let back = primal_to_dual_map(x);
        for k in 0..3 {
            assert!((back[k] - s[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn nonneg_barrier_at_one() {
        let b = ConeBlock::nonneg(1);
        let eval = barrier(&b, &[1.0]).unwrap();
        assert_eq!(eval.value, 0.0);
        assert_eq!(eval.gradient, vec![-1.0]);
        assert_eq!(eval.hessian, vec![1.0]);
        assert_eq!(eval.complexity_parameter, 1.0);
    }

    #[test]
    fn exp_barrier_at_e_1_0() {
        // psi = 1*log(e) - 0 = 1 => value = -log 1 - log e - log 1 = -1
        let eval = barrier(&ConeBlock::exp(), &[E, 1.0, 0.0]).unwrap();
        assert!((eval.value + 1.0).abs() < 1e-12);
        assert_eq!(eval.complexity_parameter, 3.0);
    }

    #[test]
    fn barrier_rejects_boundary() {
        assert_eq!(
            barrier(&ConeBlock::exp(), &[1.0, 1.0, 0.0]).unwrap_err(),
            ConeError::NotInterior
        );
        assert_eq!(
            barrier(&ConeBlock::nonneg(2), &[1.0, 0.0]).unwrap_err(),
            ConeError::NotInterior
        );
    }

    #[test]
    fn interior_start_point_is_interior_and_self_dual() {
        let (_, g, _) = exp_barrier(EXP_INTERIOR_POINT).unwrap();
        for i in 0..3 {
            assert!(
                (g[i] + EXP_INTERIOR_POINT[i]).abs() < 1e-4,
                "grad F(x0) should be close to -x0, got {g:?}"
            );
        }
    }

    fn finite_diff_check(block: &ConeBlock, x: &[f64]) {
        let dim = block.dim;
        let eval = barrier(block, x).unwrap();
        let step = 1e-6;
        for j in 0..dim {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            let h = step * x[j].abs().max(1.0);
            xp[j] += h;
            xm[j] -= h;
            let fp = barrier(block, &xp).unwrap();
            let fm = barrier(block, &xm).unwrap();
            let fd_grad = (fp.value - fm.value) / (2.0 * h);
            let scale = eval.gradient[j].abs().max(1.0);
            assert!(
                (fd_grad - eval.gradient[j]).abs() / scale < 1e-6,
                "gradient[{j}] {} vs fd {}",
                eval.gradient[j],
                fd_grad
            );
            for i in 0..dim {
                let fd_hess = (fp.gradient[i] - fm.gradient[i]) / (2.0 * h);
                let scale = eval.hessian[i * dim + j].abs().max(1.0);
                assert!(
                    (fd_hess - eval.hessian[i * dim + j]).abs() / scale < 1e-5,
                    "hessian[{i},{j}]"
                );
            }
        }
    }

    #[test]
    fn exp_gradient_matches_finite_differences() {
        finite_diff_check(&ConeBlock::exp(), &[3.0, 1.0, 0.0]);
        finite_diff_check(&ConeBlock::exp(), &[2.0, 0.5, -1.0]);
        finite_diff_check(&ConeBlock::dual_exp(), &[1.0, 0.2, -0.5]);
        finite_diff_check(&ConeBlock::nonneg(3), &[0.5, 2.0, 7.0]);
    }
}
