//! Quadratic matrix equations of the QBD: `G`, `Ĝ`, `R`, `R̂`, `U`, `Û`,
//! drift-based classification, characteristic roots and the boundary
//! stationary vector.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64, Mat, Vector};
use crate::model::QbdModel;
use crate::spectral;

pub const DEFAULT_NULL_BAND: f64 = 1e-9;
pub const DEFAULT_QME_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// `|rho - 1|` below this counts as a unit spectral radius.
const UNIT_RADIUS_TOL: f64 = 1e-8;

/// Drift at or below this (times the block scale) marks a stochastic minimal solution.
const SHIFT_DRIFT_TOL: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::PositiveRecurrent => "PositiveRecurrent",
            Classification::NullRecurrent => "NullRecurrent",
            Classification::Transient => "Transient",
        }
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, Classification::Transient)
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub null_band: f64,
}

impl Default for QmeOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_QME_TOL, max_iter: DEFAULT_MAX_ITER, null_band: DEFAULT_NULL_BAND }
    }
}

/// `||A_low + (A_mid - I) X + A_high X^2||_inf`.
pub fn qme_residual(a_low: &Mat, a_mid: &Mat, a_high: &Mat, x: &Mat) -> f64 {
    let id = linalg::identity(x.nrows());
    linalg::norm_inf(&(a_low + (a_mid - &id) * x + a_high * x * x))
}

/// `||A_high + X (A_mid - I) + X^2 A_low||_inf`, the residual of the `R`-type equation.
pub fn left_qme_residual(a_low: &Mat, a_mid: &Mat, a_high: &Mat, x: &Mat) -> f64 {
    let id = linalg::identity(x.nrows());
    linalg::norm_inf(&(a_high + x * (a_mid - &id) + x * x * a_low))
}

/// Minimal nonnegative solution of `A_low + (A_mid - I) X + A_high X^2 = 0` by cyclic reduction.
///
/// When the blocks describe a recurrent level process the minimal solution is
/// stochastic, so the unit root with right eigenvector `1` is first moved to zero
/// (`Q = 1 u^T`, `u = 1/m`) and the shifted equation is reduced instead; this keeps
/// quadratic convergence at and near null recurrence.
pub fn solve_qme(a_low: &Mat, a_mid: &Mat, a_high: &Mat, tol: f64, max_iter: usize) -> Result<Mat> {
    let n = a_low.nrows();
    for (name, blk) in [("A_low", a_low), ("A_mid", a_mid), ("A_high", a_high)] {
        if blk.nrows() != n || blk.ncols() != n {
            return Err(Error::Dimension(format!("{name} must be {n}x{n}")));
        }
    }
    let stochastic = block_drift(a_low, a_mid, a_high)
        .map(|d| d <= SHIFT_DRIFT_TOL * (1.0 + linalg::norm_inf(a_high)))
        .unwrap_or(false);

    let mut x = if stochastic {
        let q = linalg::ones(n) * Vector::from_element(n, 1.0 / n as f64).transpose();
        let low = a_low * (linalg::identity(n) - &q);
        let mid = a_mid + a_high * &q;
        cyclic_reduction(&low, &mid, a_high, max_iter)? + q
    } else {
        cyclic_reduction(a_low, a_mid, a_high, max_iter)?
    };
    let floor = 16.0 * f64::EPSILON * linalg::norm_inf(&x).max(1.0);
    x.apply(|v| {
        if *v < 0.0 && *v > -floor {
            *v = 0.0
        }
    });

    let residual = qme_residual(a_low, a_mid, a_high, &x);
    if !(residual <= tol) {
        return Err(Error::NoConvergence { iterations: max_iter, residual });
    }
    Ok(x)
}

/// `theta^T (A_high - A_low) 1` with `theta` stationary for the block sum.
fn block_drift(a_low: &Mat, a_mid: &Mat, a_high: &Mat) -> Option<f64> {
    let sum = a_low + a_mid + a_high;
    if !linalg::is_strongly_connected(&sum) {
        return None;
    }
    let theta = linalg::stationary_vector(&sum).ok()?;
    let ones = linalg::ones(a_low.nrows());
    Some(theta.dot(&((a_high - a_low) * ones)))
}

fn cyclic_reduction(a_low: &Mat, a_mid: &Mat, a_high: &Mat, max_iter: usize) -> Result<Mat> {
    let n = a_low.nrows();
    let mut down = a_low.clone();
    let mut diag = a_mid - linalg::identity(n);
    let mut up = a_high.clone();
    let mut first = diag.clone();
    let mut previous: Option<Mat> = None;

    for iteration in 1..=max_iter {
        let lu = diag.clone().lu();
        let (Some(k_down), Some(k_up)) = (lu.solve(&down), lu.solve(&up)) else {
            return Err(Error::Singular(format!("cyclic reduction pivot block at step {iteration}")));
        };
        let up_k_down = &up * &k_down;
        let down_k_up = &down * &k_up;
        first -= &up_k_down;
        diag -= &down_k_up + &up_k_down;
        down = -(&down * &k_down);
        up = -(&up * &k_up);

        let x = -linalg::solve(&first, a_low, "cyclic reduction boundary block")?;
        let scale = linalg::norm_inf(&x).max(1.0);
        let small_coupling = linalg::norm_inf(&down).min(linalg::norm_inf(&up)) <= f64::EPSILON * 1e-2;
        let stalled = previous
            .as_ref()
            .is_some_and(|p| linalg::norm_inf(&(p - &x)) <= 4.0 * f64::EPSILON * scale);
        if small_coupling || stalled || !x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
        previous = Some(x);
    }
    let residual = previous
        .as_ref()
        .map_or(f64::NAN, |x| qme_residual(a_low, a_mid, a_high, x));
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QmeResiduals {
    pub g: f64,
    pub g_hat: f64,
    pub r: f64,
    pub r_hat: f64,
}

impl QmeResiduals {
    pub fn max(&self) -> f64 {
        self.g.max(self.g_hat).max(self.r).max(self.r_hat)
    }
}

/// Solutions of the four quadratic equations plus the derived `U`, `Û`.
#[derive(Debug, Clone)]
pub struct QmeSolutions {
    pub g: Mat,
    pub g_hat: Mat,
    pub r: Mat,
    pub r_hat: Mat,
    pub u: Mat,
    pub u_hat: Mat,
    pub classification: Classification,
    pub drift: f64,
    pub sp_g: f64,
    pub sp_g_hat: f64,
    pub sp_r: f64,
    pub residuals: QmeResiduals,
    pub warnings: Vec<String>,
}

impl QmeSolutions {
    pub fn compute(model: &QbdModel, opts: &QmeOptions) -> Result<Self> {
        let g = solve_qme(model.a_minus(), model.a0(), model.a1(), opts.tol, opts.max_iter)?;
        let g_hat = solve_qme(model.a1(), model.a0(), model.a_minus(), opts.tol, opts.max_iter)?;
        let (u, r, u_hat, r_hat) = compute_r_u(model, &g, &g_hat)?;
        let residuals = QmeResiduals {
            g: qme_residual(model.a_minus(), model.a0(), model.a1(), &g),
            g_hat: qme_residual(model.a1(), model.a0(), model.a_minus(), &g_hat),
            r: left_qme_residual(model.a_minus(), model.a0(), model.a1(), &r),
            r_hat: left_qme_residual(model.a1(), model.a0(), model.a_minus(), &r_hat),
        };
        if !(residuals.max() <= opts.tol) {
            return Err(Error::NoConvergence { iterations: opts.max_iter, residual: residuals.max() });
        }
        let sp_g = linalg::spectral_radius(&g);
        let sp_g_hat = linalg::spectral_radius(&g_hat);
        let sp_r = linalg::spectral_radius(&r);
        let report = classify_parts(model, sp_g, sp_g_hat, opts.null_band)?;
        Ok(Self {
            g,
            g_hat,
            r,
            r_hat,
            u,
            u_hat,
            classification: report.classification,
            drift: report.drift,
            sp_g,
            sp_g_hat,
            sp_r,
            residuals,
            warnings: report.warning.into_iter().collect(),
        })
    }
}

/// `U = A0 + A1 G`, `R = A1 (I - U)^-1`, `Û = A0 + A-1 Ĝ`, `R̂ = A-1 (I - Û)^-1`.
pub fn compute_r_u(model: &QbdModel, g: &Mat, g_hat: &Mat) -> Result<(Mat, Mat, Mat, Mat)> {
    let id = linalg::identity(model.m());
    let u = model.a0() + model.a1() * g;
    let r = linalg::solve_right(model.a1(), &(&id - &u), "I - U")?;
    let u_hat = model.a0() + model.a_minus() * g_hat;
    let r_hat = linalg::solve_right(model.a_minus(), &(&id - &u_hat), "I - Û")?;
    Ok((u, r, u_hat, r_hat))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub classification: Classification,
    pub drift: f64,
    /// Verdict from `sp(G)` and `sp(Ĝ)`; `None` when neither pattern matches.
    pub spectral: Option<Classification>,
    pub warning: Option<String>,
}

/// `theta^T (A1 - A-1) 1` with `theta` the stationary vector of `A-1 + A0 + A1`.
pub fn drift(model: &QbdModel) -> Result<f64> {
    let theta = linalg::stationary_vector(&model.level_sum())?;
    let ones = linalg::ones(model.m());
    Ok(theta.dot(&((model.a1() - model.a_minus()) * ones)))
}

/// Drift-sign classification, cross-checked against the spectral radii of `G` and `Ĝ`.
/// The drift decides; a disagreement only produces a warning.
pub fn classify(model: &QbdModel, sols: &QmeSolutions, null_band: f64) -> Result<ClassReport> {
    classify_parts(model, sols.sp_g, sols.sp_g_hat, null_band)
}

fn classify_parts(model: &QbdModel, sp_g: f64, sp_g_hat: f64, null_band: f64) -> Result<ClassReport> {
    let d = drift(model)?;
    let classification = if d < -null_band {
        Classification::PositiveRecurrent
    } else if d > null_band {
        Classification::Transient
    } else {
        Classification::NullRecurrent
    };
    let g_unit = (sp_g - 1.0).abs() <= UNIT_RADIUS_TOL;
    let g_hat_unit = (sp_g_hat - 1.0).abs() <= UNIT_RADIUS_TOL;
    let spectral = match (g_unit, g_hat_unit) {
        (true, false) => Some(Classification::PositiveRecurrent),
        (false, true) => Some(Classification::Transient),
        (true, true) => Some(Classification::NullRecurrent),
        (false, false) => None,
    };
    let warning = (spectral != Some(classification)).then(|| {
        format!(
            "drift {d:.3e} gives {classification} but sp(G) = {sp_g:.12}, sp(Ĝ) = {sp_g_hat:.12} suggest {}",
            spectral.map_or("no consistent class", Classification::as_str)
        )
    });
    Ok(ClassReport { classification, drift: d, spectral, warning })
}

/// Roots of `det eta(lambda)`: eigenvalues of `G`, then reciprocals of the
/// eigenvalues of `Ĝ` (a zero eigenvalue gives an infinite root), sorted by modulus.
pub fn char_roots(sols: &QmeSolutions) -> Vec<Complex64> {
    let zero = spectral::default_eps_zero(&sols.g_hat);
    let mut roots = linalg::eigenvalues(&sols.g);
    roots.extend(linalg::eigenvalues(&sols.g_hat).into_iter().map(|z| {
        if z.norm() <= zero {
            Complex64::new(f64::INFINITY, 0.0)
        } else {
            Complex64::new(1.0, 0.0) / z
        }
    }));
    roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    roots
}

/// `|xi_{m-1}| < xi_m <= 1 <= xi_{m+1} < |xi_{m+2}|` within `tol`, with `xi_m`,
/// `xi_{m+1}` real.
pub fn roots_interlace(roots: &[Complex64], m: usize, tol: f64) -> bool {
    if roots.len() != 2 * m || m == 0 {
        return false;
    }
    let xi_m = roots[m - 1];
    let xi_m1 = roots[m];
    let real = |z: Complex64| z.im.abs() <= tol;
    let mut ok = real(xi_m) && real(xi_m1) && xi_m.re <= 1.0 + tol && xi_m1.re >= 1.0 - tol && xi_m.re >= -tol;
    if m >= 2 {
        ok &= roots[m - 2].norm() < xi_m.re + tol;
        ok &= !xi_m1.re.is_finite() || roots[m + 1].norm() > xi_m1.re - tol;
    }
    ok
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Normalization {
    /// `pi0^T (I - R)^-1 1 = 1`; positive recurrent chains only.
    Probability,
    /// `pi0^T 1 = 1`.
    UnitSum,
}

#[derive(Debug, Clone)]
pub struct StationaryData {
    pub pi0: Vector,
    pub mode: Normalization,
    r: Mat,
}

impl StationaryData {
    /// `pi_i^T = pi0^T R^i`.
    pub fn level(&self, i: usize) -> Vector {
        let mut row = self.pi0.transpose();
        for _ in 0..i {
            row = &row * &self.r;
        }
        row.transpose()
    }

    pub fn residual(&self, model: &QbdModel, g: &Mat) -> f64 {
        let pstar = model.b() + model.a1() * g;
        let lhs = self.pi0.transpose() * (linalg::identity(model.m()) - pstar);
        lhs.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

/// Boundary vector `pi0` solving `pi0^T (I - B - A1 G) = 0`.
pub fn stationary(model: &QbdModel, sols: &QmeSolutions, mode: Normalization) -> Result<StationaryData> {
    match (mode, sols.classification) {
        (_, Classification::Transient) => {
            return Err(Error::Classification(
                "transient chain: I - B - A1 G is nonsingular and has no invariant vector".into(),
            ))
        }
        (Normalization::Probability, Classification::NullRecurrent) => {
            return Err(Error::Classification(
                "probability normalization requires a positive recurrent chain".into(),
            ))
        }
        _ => {}
    }
    let pstar = model.b() + model.a1() * &sols.g;
    let mut pi0 = linalg::stationary_vector(&pstar)?;
    if mode == Normalization::Probability {
        let id = linalg::identity(model.m());
        let w = linalg::solve_vec(&(&id - &sols.r), &linalg::ones(model.m()), "I - R")?;
        pi0 /= pi0.dot(&w);
    }
    Ok(StationaryData { pi0, mode, r: sols.r.clone() })
}
