//! Independent oracles (exact residuals, forward recurrence, functional
//! iteration) and a seeded random-model generator for property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{QbdModel, RhsSpec};
use crate::qme::{Classification, QmeOptions, QmeSolutions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub boundary_residual: f64,
    pub interior_residuals: Vec<f64>,
    pub scale: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Boundary residual `(B - I) u0 + A1 u1 + g0` and interior residuals
/// `A-1 u_r + (A0 - I) u_{r+1} + A1 u_{r+2} + g_{r+1}` in the max norm.
/// `pass` iff the largest is at most `tol * (1 + max_r ||u_r||)`.
pub fn residuals(model: &QbdModel, g: &RhsSpec, u: &[Vector], tol: f64) -> ResidualReport {
    let id = linalg::identity(model.m());
    let scale = 1.0 + u.iter().map(linalg::vec_norm_inf).fold(0.0, f64::max);
    let boundary_residual = if u.len() >= 2 {
        linalg::vec_norm_inf(&((model.b() - &id) * &u[0] + model.a1() * &u[1] + g.block(0)))
    } else {
        f64::INFINITY
    };
    let a0_i = model.a0() - &id;
    let interior_residuals: Vec<f64> = u
        .windows(3)
        .enumerate()
        .map(|(r, w)| {
            linalg::vec_norm_inf(
                &(model.a_minus() * &w[0] + &a0_i * &w[1] + model.a1() * &w[2] + g.block(r + 1)),
            )
        })
        .collect();
    let max_residual = interior_residuals.iter().copied().fold(boundary_residual, f64::max);
    ResidualReport {
        boundary_residual,
        interior_residuals,
        scale,
        max_residual,
        tol,
        pass: max_residual <= tol * scale,
    }
}

/// Largest tolerated growth `rho^(r-1)` of rounding errors in the forward recurrence.
pub const ORACLE_MAX_GROWTH: f64 = 1e6;

/// Largest `r <= requested` (at least 2) at which the forward recurrence is still
/// informative: rounding errors grow like `rho^(r-1)`, `rho` the largest root modulus.
pub fn oracle_horizon(sols: &QmeSolutions, requested: usize) -> usize {
    let rho = crate::qme::char_roots(sols)
        .iter()
        .map(|z| z.norm())
        .filter(|v| v.is_finite())
        .fold(1.0f64, f64::max);
    let mut r = 2;
    while r < requested && rho.powi(r as i32) <= ORACLE_MAX_GROWTH {
        r += 1;
    }
    r.min(requested.max(2))
}

/// `u_{r+2} = A1^-1 (-g_{r+1} - A-1 u_r - (A0 - I) u_{r+1})` from the seeds `u0`, `u1`;
/// returns `u_0 .. u_{r_max}`.
pub fn forward_oracle(model: &QbdModel, g: &RhsSpec, u0: &Vector, u1: &Vector, r_max: usize) -> Result<Vec<Vector>> {
    let id = linalg::identity(model.m());
    let lu = model.a1().clone().lu();
    if linalg::condition_number(model.a1()) > linalg::SINGULAR_COND {
        return Err(Error::Singular("A1 is singular; the forward recurrence is undefined".into()));
    }
    let a0_i = model.a0() - &id;
    let mut out = vec![u0.clone(), u1.clone()];
    while out.len() <= r_max {
        let r = out.len() - 2;
        let rhs = -g.block(r + 1) - model.a_minus() * &out[r] - &a0_i * &out[r + 1];
        out.push(lu.solve(&rhs).ok_or_else(|| Error::Singular("A1".into()))?);
    }
    out.truncate(r_max + 1);
    Ok(out)
}

/// Natural fixed-point iteration `X <- (I - A_mid)^-1 (A_low + A_high X^2)` from `X = 0`;
/// converges monotonically to the minimal nonnegative solution.
pub fn functional_iteration(a_low: &Mat, a_mid: &Mat, a_high: &Mat, tol: f64, max_iter: usize) -> Result<Mat> {
    let n = a_low.nrows();
    let inv = linalg::inverse(&(linalg::identity(n) - a_mid), "I - A_mid")?;
    let mut x = Mat::zeros(n, n);
    for _ in 0..max_iter {
        let next = &inv * (a_low + a_high * &x * &x);
        let step = linalg::norm_inf(&(&next - &x));
        x = next;
        if step <= tol {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: crate::qme::qme_residual(a_low, a_mid, a_high, &x) })
}

/// Drift magnitude below which generated recurrent/transient candidates are discarded.
const DRIFT_MARGIN: f64 = 0.02;
const MAX_ATTEMPTS: usize = 200;

/// Deterministic random model of the requested class.
///
/// Recipe: for positive recurrent and transient targets, each row of
/// `[A-1 | A0 | A1]` is drawn uniformly and normalized, some rows of `A1` are
/// zeroed (for `m >= 2`, with probability 1/2) so that `A1` is singular, candidates
/// with `|drift| < 0.02` are redrawn, and `A-1`, `A1` are swapped when the drift
/// sign is wrong. For null recurrent targets `A-1` is drawn with row sums in
/// `[0.1, 0.45]`, `A1 = A-1` and `A0` is the diagonal remainder. In every case
/// `B = A-1 + A0`, and the classification is confirmed before returning.
pub fn random_model(seed: u64, m: usize, target: Classification) -> Result<QbdModel> {
    if m == 0 {
        return Err(Error::Dimension("m must be positive".into()));
    }
    let tag = match target {
        Classification::PositiveRecurrent => 1u64,
        Classification::Transient => 2,
        Classification::NullRecurrent => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag * 64 + m as u64);
    for _ in 0..MAX_ATTEMPTS {
        let Some((a_minus, a0, a1)) = (match target {
            Classification::NullRecurrent => Some(null_recurrent_blocks(&mut rng, m)),
            _ => drifting_blocks(&mut rng, m, target),
        }) else {
            continue;
        };
        let b = &a_minus + &a0;
        let Ok(model) = QbdModel::new(b, a_minus, a0, a1, 1e-12) else { continue };
        match QmeSolutions::compute(&model, &QmeOptions::default()) {
            Ok(sols) if sols.classification == target => return Ok(model),
            _ => continue,
        }
    }
    Err(Error::InvalidModel(format!(
        "no {target} model generated for seed {seed}, m = {m} after {MAX_ATTEMPTS} attempts"
    )))
}

fn drifting_blocks(rng: &mut ChaCha8Rng, m: usize, target: Classification) -> Option<(Mat, Mat, Mat)> {
    let mut a_minus = Mat::from_fn(m, m, |_, _| rng.random::<f64>());
    let mut a0 = Mat::from_fn(m, m, |_, _| rng.random::<f64>());
    let mut a1 = Mat::from_fn(m, m, |_, _| rng.random::<f64>());
    if m >= 2 && rng.random_bool(0.5) {
        let zero_rows = rng.random_range(1..m);
        for _ in 0..zero_rows {
            let i = rng.random_range(0..m);
            a1.row_mut(i).fill(0.0);
        }
    }
    for i in 0..m {
        let s = a_minus.row(i).sum() + a0.row(i).sum() + a1.row(i).sum();
        a_minus.row_mut(i).scale_mut(1.0 / s);
        a0.row_mut(i).scale_mut(1.0 / s);
        a1.row_mut(i).scale_mut(1.0 / s);
    }
    let theta = linalg::stationary_vector(&(&a_minus + &a0 + &a1)).ok()?;
    let d = theta.dot(&((&a1 - &a_minus) * linalg::ones(m)));
    if d.abs() < DRIFT_MARGIN {
        return None;
    }
    let want_negative = target == Classification::PositiveRecurrent;
    if (d < 0.0) != want_negative {
        std::mem::swap(&mut a_minus, &mut a1);
    }
    Some((a_minus, a0, a1))
}

fn null_recurrent_blocks(rng: &mut ChaCha8Rng, m: usize) -> (Mat, Mat, Mat) {
    let mut a_minus = Mat::from_fn(m, m, |_, _| rng.random::<f64>());
    for i in 0..m {
        let target_sum = rng.random_range(0.1..0.45);
        let s = a_minus.row(i).sum();
        a_minus.row_mut(i).scale_mut(target_sum / s);
    }
    let a1 = a_minus.clone();
    let a0 = Mat::from_diagonal(&Vector::from_fn(m, |i, _| 1.0 - 2.0 * a_minus.row(i).sum()));
    (a_minus, a0, a1)
}

/// Random right-hand side `g_0 .. g_n` with entries in `[-1, 1]`.
pub fn random_rhs(seed: u64, m: usize, n: usize) -> RhsSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let blocks = (0..=n).map(|_| Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))).collect();
    RhsSpec::new(blocks, m).expect("consistent block sizes")
}

/// `pi_*^T sum_k R^k g_k` with `pi_*` the unit-sum stationary vector of `P* = B + A1 G`.
pub fn compatibility_defect(model: &QbdModel, sols: &QmeSolutions, g: &RhsSpec) -> Result<f64> {
    let pstar = model.b() + model.a1() * &sols.g;
    let pi = linalg::stationary_vector(&pstar)?;
    Ok(pi.dot(&weighted_rhs_sum(&sols.r, g)))
}

/// `sum_k R^k g_k`.
pub fn weighted_rhs_sum(r: &Mat, g: &RhsSpec) -> Vector {
    let mut acc = Vector::zeros(g.m());
    for k in (0..=g.support()).rev() {
        acc = r * acc + g.block(k);
    }
    acc
}

/// Shifts `g_0` by a multiple of `1` so that the recurrent compatibility
/// condition `pi_*^T sum_k R^k g_k = 0` holds.
pub fn center_rhs(model: &QbdModel, sols: &QmeSolutions, g: &RhsSpec) -> Result<RhsSpec> {
    let c = compatibility_defect(model, sols, g)?;
    let mut blocks = g.blocks().to_vec();
    blocks[0] -= linalg::ones(g.m()) * c;
    RhsSpec::new(blocks, g.m())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(b: f64, am: f64, a0: f64, a1: f64) -> QbdModel {
        let s = |x| Mat::from_element(1, 1, x);
        QbdModel::new(s(b), s(am), s(a0), s(a1), 1e-12).unwrap()
    }

    fn rhs(v: &[f64]) -> RhsSpec {
        RhsSpec::new(v.iter().map(|&x| Vector::from_element(1, x)).collect(), 1).unwrap()
    }

    fn seq(v: &[f64]) -> Vec<Vector> {
        v.iter().map(|&x| Vector::from_element(1, x)).collect()
    }

    #[test]
    fn transient_fixture_residuals() {
        let u: Vec<Vector> = (0..12).map(|r| Vector::from_element(1, 2.5 / 3f64.powi(r))).collect();
        let rep = residuals(&scalar(0.4, 0.2, 0.2, 0.6), &rhs(&[1.0]), &u, 1e-12);
        assert!(rep.max_residual < 1e-14, "{rep:?}");
        assert!(rep.pass);
    }

    #[test]
    fn zero_and_unit_forcing() {
        let model = scalar(0.8, 0.6, 0.2, 0.2);
        let u = seq(&[0.0; 5]);
        let rep = residuals(&model, &RhsSpec::zeros(1), &u, 1e-12);
        assert_eq!(rep.max_residual, 0.0);
        let rep = residuals(&model, &rhs(&[1.0]), &u, 1e-12);
        assert_eq!(rep.boundary_residual, 1.0);
        assert!(rep.interior_residuals.iter().all(|&r| r == 0.0));
        assert!(!rep.pass);
    }

    #[test]
    fn forward_recurrence_fixtures() {
        let pr1 = scalar(0.8, 0.6, 0.2, 0.2);
        let u = forward_oracle(&pr1, &rhs(&[1.0, -3.0]), &seq(&[-2.5])[0], &seq(&[-7.5])[0], 5).unwrap();
        for (got, want) in u.iter().zip([-2.5, -7.5, -7.5, -7.5, -7.5, -7.5]) {
            assert!((got[0] - want).abs() < 1e-12);
        }
        let nr1 = scalar(0.6, 0.4, 0.2, 0.4);
        let u = forward_oracle(&nr1, &rhs(&[1.0, -2.0]), &seq(&[0.0])[0], &seq(&[-2.5])[0], 4).unwrap();
        for (got, want) in u.iter().zip([0.0, -2.5, 0.0, 2.5, 5.0]) {
            assert!((got[0] - want).abs() < 1e-12, "{u:?}");
        }
        let z = forward_oracle(&pr1, &RhsSpec::zeros(1), &seq(&[0.0])[0], &seq(&[0.0])[0], 6).unwrap();
        assert!(z.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn generator_is_deterministic_and_classified() {
        let a = random_model(0, 3, Classification::PositiveRecurrent).unwrap();
        let b = random_model(0, 3, Classification::PositiveRecurrent).unwrap();
        assert_eq!(a, b);
        let pr = random_model(0, 1, Classification::PositiveRecurrent).unwrap();
        assert!(crate::qme::drift(&pr).unwrap() < 0.0);
        let nr = random_model(0, 3, Classification::NullRecurrent).unwrap();
        assert_eq!(nr.a1(), nr.a_minus());
        assert_eq!(crate::qme::drift(&nr).unwrap(), 0.0);
    }

    #[test]
    fn functional_iteration_matches_scalar_root() {
        let s = |x| Mat::from_element(1, 1, x);
        let g = functional_iteration(&s(0.2), &s(0.2), &s(0.6), 1e-15, 10_000).unwrap();
        assert!((g[(0, 0)] - 1.0 / 3.0).abs() < 1e-13);
    }
}
