//! Null recurrent chains via the right shift: the unit root of `G` is moved to
//! zero by a rank-one change of the blocks, the shifted difference equation is
//! solved with the usual machinery, and the original solution is recovered as
//! `u_0 = ũ_0`, `u_k = ũ_k + Q sum_{i<k} ũ_i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{QbdModel, RhsSpec};
use crate::poisson::{self, FinishParts, PoissonOptions, PoissonSolution, SolutionFamily, SolutionPath};
use crate::qme::{self, Classification, Normalization, QmeSolutions};
use crate::spectral::{self, SpectralSplit};
use crate::verify;

const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ShiftData {
    pub w_g: Vector,
    pub v_g_hat: Vector,
    pub w_r_hat: Vector,
    /// `Ĥ = A0 - I + A-1 Ĝ`.
    pub h_hat: Mat,
    pub q: Mat,
    pub a_minus_t: Mat,
    pub a0_t: Mat,
    pub a1_t: Mat,
    pub g_t: Mat,
    pub g_ddot: Mat,
    pub w_t: Mat,
    pub split_t: SpectralSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftInvariants {
    /// Residual of the shifted `G` equation at `G - Q`.
    pub g_t_residual: f64,
    /// Residual of the shifted `Ĝ` equation at the shifted `Ĝ`.
    pub g_ddot_residual: f64,
    pub sp_g_t: f64,
    pub sp_g_ddot: f64,
    /// `||W̃ (I - U)(G̃ G̈ - I) - I||`.
    pub w_t_inverse: f64,
    pub cond_i_minus_gg: f64,
}

impl ShiftInvariants {
    pub fn passed(&self, tol: f64) -> bool {
        self.g_t_residual <= tol
            && self.g_ddot_residual <= tol
            && self.sp_g_t < 1.0 - 1e-6
            && (self.sp_g_ddot - 1.0).abs() <= 1e-8
            && self.w_t_inverse <= tol
            && self.cond_i_minus_gg < linalg::SINGULAR_COND
    }
}

impl ShiftData {
    pub fn invariants(&self, sols: &QmeSolutions) -> ShiftInvariants {
        let m = self.q.nrows();
        let id = linalg::identity(m);
        ShiftInvariants {
            g_t_residual: qme::qme_residual(&self.a_minus_t, &self.a0_t, &self.a1_t, &self.g_t),
            g_ddot_residual: qme::qme_residual(&self.a1_t, &self.a0_t, &self.a_minus_t, &self.g_ddot),
            sp_g_t: linalg::spectral_radius(&self.g_t),
            sp_g_ddot: linalg::spectral_radius(&self.g_ddot),
            w_t_inverse: linalg::norm_inf(&(&self.w_t * (&id - &sols.u) * (&self.g_t * &self.g_ddot - &id) - &id)),
            cond_i_minus_gg: linalg::condition_number(&(&id - &self.g_t * &self.g_ddot)),
        }
    }

    /// Shifted boundary block `B + A1 Q`.
    pub fn b_t(&self, model: &QbdModel) -> Mat {
        model.b() + model.a1() * &self.q
    }
}

/// Builds the right-shifted problem of a null recurrent model.
pub fn right_shift(model: &QbdModel, sols: &QmeSolutions, eps_zero: Option<f64>) -> Result<ShiftData> {
    if sols.classification != Classification::NullRecurrent {
        return Err(Error::Classification(format!("right shift needs a null recurrent chain, got {}", sols.classification)));
    }
    let m = model.m();
    let id = linalg::identity(m);

    let mut w_g = linalg::right_null_vector(&(&sols.g - &id));
    if w_g.sum() < 0.0 {
        w_g = -w_g;
    }
    let v = linalg::left_null_vector(&(&sols.g_hat - &id));
    let vw = v.dot(&w_g);
    if vw.abs() < DEGENERATE_TOL {
        return Err(Error::Degenerate(format!("unit eigenvectors of G and Ĝ are orthogonal ({vw:.3e})")));
    }
    let v_g_hat = v / vw;

    let h_hat = model.a0() - &id + model.a_minus() * &sols.g_hat;
    let h_inv = linalg::inverse(&h_hat, "Ĥ")?;
    let w = linalg::right_null_vector(&(&sols.r_hat - &id));
    let s = v_g_hat.dot(&(&h_inv * &w));
    if s.abs() < DEGENERATE_TOL {
        return Err(Error::Degenerate(format!("normalization scalar v^T Ĥ^-1 w = {s:.3e} vanishes")));
    }
    let w_r_hat = w * (-1.0 / s);

    let q = &w_g * v_g_hat.transpose();
    let a_minus_t = model.a_minus() * (&id - &q);
    let a0_t = model.a0() + model.a1() * &q;
    let a1_t = model.a1().clone();
    let g_t = &sols.g - &q;
    let g_ddot = &sols.g_hat + (&w_g + &h_inv * &w_r_hat) * v_g_hat.transpose();
    let w_t = linalg::inverse(&((&id - &sols.u) * (&g_t * &g_ddot - &id)), "(I - U)(G̃ G̈ - I)")?;
    let eps = eps_zero.unwrap_or_else(|| spectral::default_eps_zero(&g_ddot));
    let split_t = spectral::split(&g_ddot, eps)?;
    Ok(ShiftData { w_g, v_g_hat, w_r_hat, h_hat, q, a_minus_t, a0_t, a1_t, g_t, g_ddot, w_t, split_t })
}

#[derive(Debug, Clone)]
pub struct NullRecurrentSolution {
    pub solution: PoissonSolution,
    pub shift: ShiftData,
    /// Solution `ũ` of the shifted difference equation.
    pub u_tilde: Vec<Vector>,
    /// Largest interior residual of `ũ` against the shifted blocks.
    pub shifted_residual: f64,
}

pub fn solve_null_recurrent(model: &QbdModel, g: &RhsSpec, opts: &PoissonOptions) -> Result<PoissonSolution> {
    let sols = QmeSolutions::compute(model, &opts.qme)?;
    solve_null_recurrent_with(model, &sols, g, opts)
}

pub fn solve_null_recurrent_with(model: &QbdModel, sols: &QmeSolutions, g: &RhsSpec, opts: &PoissonOptions) -> Result<PoissonSolution> {
    Ok(solve_null_recurrent_full(model, sols, g, opts)?.solution)
}

pub fn solve_null_recurrent_full(
    model: &QbdModel,
    sols: &QmeSolutions,
    g: &RhsSpec,
    opts: &PoissonOptions,
) -> Result<NullRecurrentSolution> {
    if g.m() != model.m() {
        return Err(Error::Dimension(format!("g has blocks of length {}, expected {}", g.m(), model.m())));
    }
    let horizon = opts.horizon(g)?;
    let shift = right_shift(model, sols, opts.eps_zero)?;
    let family = SolutionFamily::from_parts(
        shift.g_t.clone(),
        shift.g_ddot.clone(),
        shift.split_t.clone(),
        shift.w_t.clone(),
        g,
    )?;
    let y_star = family.y_star();

    let st = qme::stationary(model, sols, Normalization::UnitSum)?;
    let c = poisson::pi_g(&st.pi0, &sols.r, g);
    let w_inv = linalg::inverse(&family.w, "W̃")?;
    let v = (st.pi0.transpose() * w_inv * &family.split.l).transpose();
    let y = &y_star + poisson::resolve_y_perp(&opts.y_perp, &v, c, g.max_norm())?;

    let b_t = shift.b_t(model);
    let rhs = family.boundary_rhs(&b_t, model.a1(), &y, &g.block(0));
    let ginv = poisson::group_inverse(&(model.b() + model.a1() * &sols.g))?;
    let boundary_compatibility = ginv.pi_star.as_ref().map_or(0.0, |pi| pi.dot(&rhs));
    let x = &ginv.sharp * &rhs + linalg::ones(model.m()) * opts.alpha;

    let u_tilde = family.evaluate(&x, &y, horizon);
    let shifted = QbdModel::from_blocks_unchecked(b_t, shift.a_minus_t.clone(), shift.a0_t.clone(), shift.a1_t.clone())?;
    let shifted_residual = verify::residuals(&shifted, g, &u_tilde, opts.residual_tol)
        .interior_residuals
        .into_iter()
        .fold(0.0, f64::max);
    let u = recover(&shift.q, &u_tilde);

    let solution = poisson::finish(
        model,
        g,
        opts,
        FinishParts {
            classification: Classification::NullRecurrent,
            path: SolutionPath::RightShift,
            sigma1: family.sigma(1),
            sigma_identity: family.sigma_identity(),
            form: family.form_agreement(&x, &y, &u_tilde),
            x,
            y,
            y_star,
            alpha: Some(opts.alpha),
            u,
            boundary_compatibility,
            pi_g: Some(c),
            warnings: sols.warnings.clone(),
        },
    )?;
    Ok(NullRecurrentSolution { solution, shift, u_tilde, shifted_residual })
}

/// `u_0 = ũ_0`, `u_k = ũ_k + Q sum_{i<k} ũ_i`.
pub fn recover(q: &Mat, u_tilde: &[Vector]) -> Vec<Vector> {
    let mut partial = Vector::zeros(q.nrows());
    u_tilde
        .iter()
        .map(|ut| {
            let u = ut + q * &partial;
            partial += ut;
            u
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qme::QmeOptions;

    fn nr1() -> QbdModel {
        let s = |x| Mat::from_element(1, 1, x);
        QbdModel::new(s(0.6), s(0.4), s(0.2), s(0.4), 1e-12).unwrap()
    }

    fn rhs(v: &[f64]) -> RhsSpec {
        RhsSpec::new(v.iter().map(|&x| Vector::from_element(1, x)).collect(), 1).unwrap()
    }

    #[test]
    fn scalar_shift_data() {
        let model = nr1();
        let sols = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
        let s = right_shift(&model, &sols, None).unwrap();
        assert!((s.q[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(s.a_minus_t[(0, 0)].abs() < 1e-15);
        assert!((s.a0_t[(0, 0)] - 0.6).abs() < 1e-14);
        assert!((s.a1_t[(0, 0)] - 0.4).abs() < 1e-15);
        assert!(s.g_t[(0, 0)].abs() < 1e-14);
        assert!((s.h_hat[(0, 0)] + 0.4).abs() < 1e-14);
        assert!((s.w_r_hat[0] - 0.4).abs() < 1e-14);
        assert!((s.g_ddot[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((s.w_t[(0, 0)] + 2.5).abs() < 1e-12);
        let inv = s.invariants(&sols);
        assert!(inv.passed(1e-10), "{inv:?}");
    }

    #[test]
    fn scalar_null_recurrent_solution() {
        let model = nr1();
        let sols = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
        let full = solve_null_recurrent_full(&model, &sols, &rhs(&[1.0, -2.0]), &PoissonOptions::default()).unwrap();
        let u = &full.solution.u;
        assert!((u[1][0] - u[0][0] + 2.5).abs() < 1e-9);
        assert!((u[2][0] - u[1][0] - 2.5).abs() < 1e-9);
        assert!((u[3][0] - u[2][0] - 2.5).abs() < 1e-9);
        assert!(full.solution.residuals.max_residual < 1e-12);
        assert!(full.shifted_residual < 1e-12);
    }

    #[test]
    fn homogeneous_null_recurrent() {
        let sol = solve_null_recurrent(&nr1(), &RhsSpec::zeros(1), &PoissonOptions::default()).unwrap();
        assert!(sol.residuals.max_residual < 1e-14);
        let d0 = sol.u[1][0] - sol.u[0][0];
        for r in 1..sol.horizon {
            assert!((sol.u[r + 1][0] - sol.u[r][0] - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_null_recurrent() {
        let s = |x| Mat::from_element(1, 1, x);
        let pr1 = QbdModel::new(s(0.8), s(0.6), s(0.2), s(0.2), 1e-12).unwrap();
        let sols = QmeSolutions::compute(&pr1, &QmeOptions::default()).unwrap();
        assert!(matches!(right_shift(&pr1, &sols, None), Err(Error::Classification(_))));
    }
}
