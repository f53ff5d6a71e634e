//! The probabilistic solution `omega_r = G^r gamma + y_r`, used as an
//! independent check on the analytic solution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::model::{QbdModel, RhsSpec};
use crate::poisson;
use crate::qme::{QmeOptions, QmeSolutions};
use crate::verify;

const COMPATIBILITY_TOL: f64 = 1e-9;
pub const CONSTANT_SHIFT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbSolution {
    pub gamma: Vector,
    pub y_seq: Vec<Vector>,
    pub omega: Vec<Vector>,
    /// Additive constant; fixed to zero.
    pub c: f64,
    /// Last index of `g` entering the series (they are finite sums).
    pub truncation_k: usize,
}

/// `gamma = (I - P*)^# sum_k R^k g_k`,
/// `y_r = -sum_k sum_{j<r} G^j (U - I)^-1 R^k g_{r+k-j}`, `omega_r = G^r gamma + y_r`.
///
/// For recurrent chains `pi_*^T sum_k R^k g_k` must vanish (within `1e-9`).
pub fn omega_solution(model: &QbdModel, g: &RhsSpec, r_max: usize) -> Result<ProbSolution> {
    let sols = QmeSolutions::compute(model, &QmeOptions::default())?;
    omega_solution_with(model, &sols, g, r_max)
}

pub fn omega_solution_with(model: &QbdModel, sols: &QmeSolutions, g: &RhsSpec, r_max: usize) -> Result<ProbSolution> {
    let m = model.m();
    let n = g.support();
    let ginv = poisson::group_inverse(&(model.b() + model.a1() * &sols.g))?;
    let s = verify::weighted_rhs_sum(&sols.r, g);
    if let Some(pi) = &ginv.pi_star {
        let defect = pi.dot(&s);
        if defect.abs() > COMPATIBILITY_TOL * (1.0 + linalg::vec_norm_inf(&s)) {
            return Err(Error::Compatibility(format!(
                "recurrent chain needs pi_*^T sum_k R^k g_k = 0, got {defect:.3e}"
            )));
        }
    }
    let gamma = &ginv.sharp * &s;
    let mid = linalg::inverse(&(&sols.u - linalg::identity(m)), "U - I")?;

    let mut r_pows = vec![linalg::identity(m)];
    for k in 1..=n {
        r_pows.push(&r_pows[k - 1] * &sols.r);
    }
    let mut g_pows = vec![linalg::identity(m)];
    let mut y_seq = Vec::with_capacity(r_max + 1);
    let mut omega = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        if r > 0 {
            g_pows.push(&g_pows[r - 1] * &sols.g);
        }
        let mut y = Vector::zeros(m);
        for j in 0..r {
            let first = r - j;
            for k in 0..=n.saturating_sub(first) {
                if first + k <= n {
                    y -= &g_pows[j] * (&mid * (&r_pows[k] * g.block(first + k)));
                }
            }
        }
        omega.push(&g_pows[r] * &gamma + &y);
        y_seq.push(y);
    }
    Ok(ProbSolution { gamma, y_seq, omega, c: 0.0, truncation_k: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantShift {
    pub is_match: bool,
    /// Mean of all components of `omega_r - u_r`.
    pub offset: f64,
    /// Largest deviation of a component of `omega_r - u_r` from `offset`.
    pub max_dev: f64,
}

/// Whether `omega - u` is a constant multiple of `1` (within `1e-7`).
pub fn compare_constant_shift(u: &[Vector], omega: &[Vector]) -> ConstantShift {
    if u.len() != omega.len() || u.iter().zip(omega).any(|(a, b)| a.len() != b.len()) || u.is_empty() {
        return ConstantShift { is_match: false, offset: f64::NAN, max_dev: f64::INFINITY };
    }
    let diffs: Vec<f64> = u.iter().zip(omega).flat_map(|(a, b)| (b - a).iter().copied().collect::<Vec<_>>()).collect();
    let offset = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let max_dev = diffs.iter().fold(0.0f64, |acc, d| acc.max((d - offset).abs()));
    ConstantShift { is_match: max_dev <= CONSTANT_SHIFT_TOL, offset, max_dev }
}
