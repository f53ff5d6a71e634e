//! The matrix `W`, the resolvent triple `(X, T, Z)` of
//! `eta(lambda) = A-1 + (A0 - I) lambda + A1 lambda^2`, and numerical checks of the
//! identities linking them.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64, Mat};
use crate::model::QbdModel;
use crate::qme::{self, QmeSolutions};
use crate::spectral::{self, SpectralSplit};

/// Above this, the block matrix of condition (ii) is treated as singular.
pub const PAIR_COND_LIMIT: f64 = 1e12;

/// Sample points for the resolvent identity.
/// Candidate points for the resolvent check, at least 0.3 apart so each root
/// can disqualify at most one of them.
pub const LAMBDA_SAMPLES: [(f64, f64); 16] = [
    (-0.5, 0.0),
    (0.5, 0.3),
    (2.2, 0.0),
    (1.7, -0.9),
    (-0.3, 0.7),
    (0.9, -0.6),
    (1.4, 0.5),
    (2.6, 1.1),
    (-1.2, -0.4),
    (0.2, -1.3),
    (3.1, -0.5),
    (-0.8, 1.5),
    (1.1, 1.6),
    (2.0, -1.7),
    (-1.6, 0.6),
    (3.4, 0.7),
];
pub const RESOLVENT_SAMPLE_COUNT: usize = 4;
const SAMPLE_ROOT_DISTANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesCheck {
    pub terms: usize,
    pub converged: bool,
    /// `||W_series - W||_inf`.
    pub difference: f64,
}

#[derive(Debug, Clone)]
pub struct ResolventData {
    pub w: Mat,
    /// `(I - U)(G Ĝ - I)`.
    pub w_inv: Mat,
    pub series: SeriesCheck,
}

/// `W = ((I - U)(G Ĝ - I))^-1`, cross-checked against `sum_j G^j (U - I)^-1 R^j`.
pub fn compute_w(g: &Mat, u: &Mat, r: &Mat, g_hat: &Mat) -> Result<ResolventData> {
    let sp = linalg::spectral_radius(g) * linalg::spectral_radius(r);
    if sp >= 1.0 - 1e-8 {
        return Err(Error::Classification(format!(
            "sp(G) sp(R) = {sp:.12} >= 1: null recurrent input, the series for W diverges"
        )));
    }
    let m = g.nrows();
    let id = linalg::identity(m);
    let w_inv = (&id - u) * (g * g_hat - &id);
    let w = linalg::inverse(&w_inv, "(I - U)(G Ĝ - I)")?;
    let series = w_series(g, u, r, &w)?;
    Ok(ResolventData { w, w_inv, series })
}

fn w_series(g: &Mat, u: &Mat, r: &Mat, w: &Mat) -> Result<SeriesCheck> {
    let m = g.nrows();
    let cap = 10 * m + 200;
    let mid = linalg::inverse(&(u - linalg::identity(m)), "U - I")?;
    let mut left = linalg::identity(m);
    let mut right = linalg::identity(m);
    let mut sum = Mat::zeros(m, m);
    let mut converged = false;
    let mut terms = 0;
    while terms < cap {
        let term = &left * &mid * &right;
        sum += &term;
        terms += 1;
        if linalg::norm_inf(&term) < 1e-14 {
            converged = true;
            break;
        }
        left = &left * g;
        right = &right * r;
    }
    Ok(SeriesCheck { terms, converged, difference: linalg::norm_inf(&(sum - w)) })
}

#[derive(Debug, Clone)]
pub struct ResolventTriple {
    pub x1: Mat,
    pub x2: Mat,
    pub t1: Mat,
    pub t2: Mat,
    pub z1: Mat,
    pub z2: Mat,
}

/// `X1 = [I | L]`, `X2 = K`, `T1 = diag(G, V1^-1)`, `T2 = V0`, `Z1 = [W; -E W]`, `Z2 = -V0 F W`.
pub fn build_triple(g: &Mat, split: &SpectralSplit, w: &Mat) -> Result<ResolventTriple> {
    let m = g.nrows();
    let triple = ResolventTriple {
        x1: spectral::hcat(&linalg::identity(m), &split.l),
        x2: split.k.clone(),
        t1: spectral::block_diag(g, &split.v1_inverse()?),
        t2: split.v0.clone(),
        z1: spectral::vcat(w, &(-(&split.e * w))),
        z2: -(&split.v0 * &split.f * w),
    };
    let cond = triple.pair_condition();
    if !(cond < PAIR_COND_LIMIT) {
        return Err(Error::Singular(format!("decomposable pair matrix has condition number {cond:.3e}")));
    }
    Ok(triple)
}

impl ResolventTriple {
    /// Condition number of `[[X1, X2 T2], [X1 T1, X2]]`.
    pub fn pair_condition(&self) -> f64 {
        let top = spectral::hcat(&self.x1, &(&self.x2 * &self.t2));
        let bottom = spectral::hcat(&(&self.x1 * &self.t1), &self.x2);
        linalg::condition_number(&spectral::vcat(&top, &bottom))
    }

    /// Residuals of `A-1 X1 + (A0 - I) X1 T1 + A1 X1 T1^2 = 0` and
    /// `A1 X2 + (A0 - I) X2 T2 + A-1 X2 T2^2 = 0`, each divided by
    /// `||X|| (1 + ||T|| + ||T||^2)` since `T1` carries `V1^-1`.
    pub fn pair_residuals(&self, model: &QbdModel) -> (f64, f64) {
        let a0_i = model.a0() - linalg::identity(model.m());
        let rel = |res: Mat, x: &Mat, t: &Mat| {
            let nt = linalg::norm_inf(t);
            linalg::norm_inf(&res) / (linalg::norm_inf(x) * (1.0 + nt + nt * nt)).max(1.0)
        };
        let r1 = model.a_minus() * &self.x1 + &a0_i * &self.x1 * &self.t1 + model.a1() * &self.x1 * &self.t1 * &self.t1;
        let r2 = model.a1() * &self.x2 + &a0_i * &self.x2 * &self.t2 + model.a_minus() * &self.x2 * &self.t2 * &self.t2;
        (rel(r1, &self.x1, &self.t1), rel(r2, &self.x2, &self.t2))
    }

    /// `X diag(lambda I - T1, lambda T2 - I)^-1 Z`.
    pub fn resolvent(&self, lambda: Complex64) -> Result<DMatrix<Complex64>> {
        let c = linalg::to_complex;
        let n1 = self.t1.nrows();
        let n2 = self.t2.nrows();
        let d1 = DMatrix::<Complex64>::identity(n1, n1) * lambda - c(&self.t1);
        let d2 = c(&self.t2) * lambda - DMatrix::<Complex64>::identity(n2, n2);
        let s1 = d1
            .lu()
            .solve(&c(&self.z1))
            .ok_or_else(|| Error::Singular("lambda I - T1".into()))?;
        let s2 = if n2 == 0 {
            DMatrix::zeros(0, self.z2.ncols())
        } else {
            d2.lu()
                .solve(&c(&self.z2))
                .ok_or_else(|| Error::Singular("lambda T2 - I".into()))?
        };
        Ok(c(&self.x1) * s1 + c(&self.x2) * s2)
    }

    /// Relative error `||eta(lambda)^-1 - X T(lambda)^-1 Z|| / ||eta(lambda)^-1||` (max-entry norm).
    pub fn resolvent_error(&self, model: &QbdModel, lambda: Complex64) -> Result<f64> {
        let inv = model
            .eta(lambda)
            .try_inverse()
            .ok_or_else(|| Error::Singular("eta(lambda)".into()))?;
        let approx = self.resolvent(lambda)?;
        let scale = inv.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        Ok((inv - approx).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale)
    }
}

/// The first [`RESOLVENT_SAMPLE_COUNT`] candidates farther than 0.05 from every root.
pub fn resolvent_samples(roots: &[Complex64]) -> Vec<Complex64> {
    LAMBDA_SAMPLES
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .filter(|l| roots.iter().all(|z| !z.re.is_finite() || (l - z).norm() > SAMPLE_ROOT_DISTANCE))
        .take(RESOLVENT_SAMPLE_COUNT)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `||W (I - U)(G Ĝ - I) - I||`.
    pub w_inverse: f64,
    /// `||U - A0 - R A-1||`.
    pub u_from_r: f64,
    /// `||W R - Ĝ W||`.
    pub w_r_commute: f64,
    /// `||W A1 (G Ĝ - I) - Ĝ||`.
    pub w_a1: f64,
    /// `||W (A1 G M - Y) - M||`.
    pub w_from_y: f64,
    pub pair_first: f64,
    pub pair_second: f64,
    pub pair_condition: f64,
    pub resolvent: f64,
    pub resolvent_samples: usize,
    pub series: SeriesCheck,
}

impl IdentityReport {
    /// Largest identity residual (the condition number is judged separately).
    pub fn max_residual(&self) -> f64 {
        [self.w_inverse, self.u_from_r, self.w_r_commute, self.w_a1, self.w_from_y, self.pair_first, self.pair_second, self.resolvent]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.pair_condition < PAIR_COND_LIMIT
    }
}

/// Evaluates every identity tying `W`, the split of `Ĝ` and the triple together.
pub fn check_identities(model: &QbdModel, sols: &QmeSolutions, split: &SpectralSplit, data: &ResolventData) -> Result<IdentityReport> {
    let m = model.m();
    let id = linalg::identity(m);
    let w = &data.w;
    let gg = &sols.g * &sols.g_hat - &id;
    let mm = split.m_matrix();
    let v1_inv = split.v1_inverse()?;
    let a0_i = model.a0() - &id;
    let y = spectral::hcat(
        &(model.a1() * &split.l * &v1_inv),
        &(-(model.a_minus() * &split.k * &split.v0) - &a0_i * &split.k),
    );
    let triple = build_triple(&sols.g, split, w)?;
    let (pair_first, pair_second) = triple.pair_residuals(model);
    let samples = resolvent_samples(&qme::char_roots(sols));
    let mut resolvent = 0.0f64;
    for &lambda in &samples {
        resolvent = resolvent.max(triple.resolvent_error(model, lambda)?);
    }
    Ok(IdentityReport {
        w_inverse: linalg::norm_inf(&(w * (&id - &sols.u) * &gg - &id)),
        u_from_r: linalg::norm_inf(&(&sols.u - model.a0() - &sols.r * model.a_minus())),
        w_r_commute: linalg::norm_inf(&(w * &sols.r - &sols.g_hat * w)),
        w_a1: linalg::norm_inf(&(w * model.a1() * &gg - &sols.g_hat)),
        w_from_y: linalg::norm_inf(&(w * (model.a1() * &sols.g * &mm - y) - &mm)),
        pair_first,
        pair_second,
        pair_condition: triple.pair_condition(),
        resolvent,
        resolvent_samples: samples.len(),
        series: data.series.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qme::QmeOptions;

    fn scalar(b: f64, am: f64, a0: f64, a1: f64) -> QbdModel {
        let s = |x| Mat::from_element(1, 1, x);
        QbdModel::new(s(b), s(am), s(a0), s(a1), 1e-12).unwrap()
    }

    fn setup(model: &QbdModel) -> (QmeSolutions, SpectralSplit, ResolventData) {
        let sols = QmeSolutions::compute(model, &QmeOptions::default()).unwrap();
        let split = spectral::split(&sols.g_hat, spectral::default_eps_zero(&sols.g_hat)).unwrap();
        let data = compute_w(&sols.g, &sols.u, &sols.r, &sols.g_hat).unwrap();
        (sols, split, data)
    }

    #[test]
    fn scalar_w_values() {
        for model in [scalar(0.8, 0.6, 0.2, 0.2), scalar(0.4, 0.2, 0.2, 0.6)] {
            let (_, _, data) = setup(&model);
            assert!((data.w[(0, 0)] + 2.5).abs() < 1e-12);
            assert!(data.series.converged);
            assert!(data.series.difference < 1e-8);
        }
        let (_, _, data) = setup(&scalar(0.8, 0.6, 0.2, 0.2));
        assert!((data.w_inv[(0, 0)] + 0.4).abs() < 1e-14);
    }

    #[test]
    fn null_recurrent_w_rejected() {
        let model = scalar(0.6, 0.4, 0.2, 0.4);
        let sols = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
        assert!(matches!(compute_w(&sols.g, &sols.u, &sols.r, &sols.g_hat), Err(Error::Classification(_))));
    }

    #[test]
    fn scalar_triples() {
        let pr1 = scalar(0.8, 0.6, 0.2, 0.2);
        let (sols, split, data) = setup(&pr1);
        let t = build_triple(&sols.g, &split, &data.w).unwrap();
        assert_eq!(t.x1, Mat::from_row_slice(1, 2, &[1.0, 1.0]));
        assert_eq!(t.x2.ncols(), 0);
        assert!((t.t1[(0, 0)] - 1.0).abs() < 1e-14 && (t.t1[(1, 1)] - 3.0).abs() < 1e-13);
        assert!((t.z1[(0, 0)] + 2.5).abs() < 1e-12 && (t.z1[(1, 0)] - 2.5).abs() < 1e-12);
        let at2 = t.resolvent(Complex64::new(2.0, 0.0)).unwrap();
        assert!((at2[(0, 0)] - Complex64::new(-5.0, 0.0)).norm() < 1e-12);

        let tr1 = scalar(0.4, 0.2, 0.2, 0.6);
        let (sols, split, data) = setup(&tr1);
        let t = build_triple(&sols.g, &split, &data.w).unwrap();
        assert!((t.t1[(0, 0)] - 1.0 / 3.0).abs() < 1e-14 && (t.t1[(1, 1)] - 1.0).abs() < 1e-14);
        assert!((t.z1[(0, 0)] + 2.5).abs() < 1e-12 && (t.z1[(1, 0)] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_identity_reports() {
        for model in [scalar(0.8, 0.6, 0.2, 0.2), scalar(0.4, 0.2, 0.2, 0.6)] {
            let (sols, split, data) = setup(&model);
            let rep = check_identities(&model, &sols, &split, &data).unwrap();
            assert!(rep.max_residual() < 1e-12, "{rep:?}");
            assert!(rep.passed(1e-12));
            assert_eq!(rep.resolvent_samples, RESOLVENT_SAMPLE_COUNT);
        }
    }
}
