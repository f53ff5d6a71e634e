//! General solution of the Poisson equation for positive recurrent and
//! transient QBDs, plus the boundary machinery shared with the null recurrent path.
//!
//! Every solution of the difference equation has the form
//! `u_r = G^r x + L V1^-r y + sigma_r`; the boundary condition then fixes `x`
//! (up to `alpha 1` in the recurrent case) and constrains `y`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{QbdModel, RhsSpec};
use crate::qme::{self, Classification, Normalization, QmeOptions, QmeSolutions};
use crate::spectral::{self, SpectralSplit};
use crate::triple;
use crate::verify::{self, ResidualReport};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
/// Extra levels evaluated past the support of `g`.
pub const DEFAULT_EXTRA_LEVELS: usize = 10;
/// Row sums within this of one mark `P*` as stochastic.
const STOCHASTIC_ROW_TOL: f64 = 1e-10;
/// Relative tolerance on linear constraints in `y`.
const CONSTRAINT_TOL: f64 = 1e-9;
const A1_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum YPerp {
    /// Minimal-norm solution of the boundary constraint.
    #[default]
    MinimalNorm,
    /// `y_perp = 0`; infeasible unless `pi^T g = 0`.
    Zero,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonOptions {
    /// Highest level `R_max` evaluated; defaults to `N + 10`.
    pub levels: Option<usize>,
    pub alpha: f64,
    pub y_perp: YPerp,
    /// Free parameter `y` of the transient case; defaults to `y*`.
    pub y_free: Option<Vec<f64>>,
    /// Zero threshold for the spectral split; defaults to [`spectral::default_eps_zero`].
    pub eps_zero: Option<f64>,
    pub qme: QmeOptions,
    pub residual_tol: f64,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self {
            levels: None,
            alpha: 0.0,
            y_perp: YPerp::MinimalNorm,
            y_free: None,
            eps_zero: None,
            qme: QmeOptions::default(),
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

impl PoissonOptions {
    pub fn horizon(&self, g: &RhsSpec) -> Result<usize> {
        let r = self.levels.unwrap_or(g.support() + DEFAULT_EXTRA_LEVELS);
        if r < 2 {
            return Err(Error::Dimension(format!("at least 2 levels are needed, got {r}")));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolutionPath {
    General,
    NonsingularA1,
    RightShift,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `||sigma_0 - Ĝ sigma_1||` (with the shifted matrices on the shift path).
    pub sigma_identity: f64,
    /// Largest gap between the stable evaluation and `G^r x + L V1^-r y + sigma_r`,
    /// relative to `1 + ` the largest of the three terms.
    pub form_agreement: f64,
    /// Levels where the direct form was finite and compared.
    pub form_levels_compared: usize,
    /// `pi_*^T` times the boundary right-hand side (zero for a solvable recurrent boundary).
    pub boundary_compatibility: f64,
    /// `pi^T g`, recurrent chains only.
    pub pi_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub classification: Classification,
    pub path: SolutionPath,
    pub x: Vector,
    pub y: Vector,
    pub y_star: Vector,
    pub alpha: Option<f64>,
    pub sigma1: Vector,
    pub horizon: usize,
    pub u: Vec<Vector>,
    pub residuals: ResidualReport,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GroupInverseData {
    pub pstar: Mat,
    pub sharp: Mat,
    /// Stationary vector of `P*` when `P*` is stochastic.
    pub pi_star: Option<Vector>,
}

impl GroupInverseData {
    /// Recurrent: `(||I - (I - P*) sharp - 1 pi^T||, ||pi^T sharp||)`;
    /// otherwise `(||(I - P*) sharp - I||, 0)`.
    pub fn residuals(&self) -> (f64, f64) {
        let n = self.pstar.nrows();
        let id = linalg::identity(n);
        let h = &id - &self.pstar;
        match &self.pi_star {
            Some(pi) => {
                let proj = linalg::ones(n) * pi.transpose();
                let first = linalg::norm_inf(&(&id - &h * &self.sharp - proj));
                let second = (pi.transpose() * &self.sharp).iter().fold(0.0f64, |a, x| a.max(x.abs()));
                (first, second)
            }
            None => (linalg::norm_inf(&(&h * &self.sharp - &id)), 0.0),
        }
    }
}

/// Group inverse of `I - P*`: `(I - P* + 1 pi^T)^-1 - 1 pi^T` when `P*` is
/// stochastic, the ordinary inverse when it is strictly substochastic.
pub fn group_inverse(pstar: &Mat) -> Result<GroupInverseData> {
    let n = pstar.nrows();
    let id = linalg::identity(n);
    let stochastic = pstar.row_iter().all(|row| (row.sum() - 1.0).abs() <= STOCHASTIC_ROW_TOL);
    if stochastic {
        let pi = linalg::stationary_vector(pstar)?;
        let proj = linalg::ones(n) * pi.transpose();
        let fundamental = linalg::inverse(&(&id - pstar + &proj), "I - P* + 1 pi^T")?;
        Ok(GroupInverseData { pstar: pstar.clone(), sharp: fundamental - proj, pi_star: Some(pi) })
    } else {
        let sharp = linalg::inverse(&(&id - pstar), "I - P*")?;
        Ok(GroupInverseData { pstar: pstar.clone(), sharp, pi_star: None })
    }
}

/// Family of solutions `u_r(x, y)` of the difference equation for fixed `g`,
/// built from a minimal solution `G`, the split of the matrix `target`
/// (`Ĝ`, or its shifted counterpart) and `W`.
#[derive(Debug, Clone)]
pub struct SolutionFamily {
    pub g: Mat,
    pub target: Mat,
    pub split: SpectralSplit,
    pub w: Mat,
    v1_inv: Mat,
    support: usize,
    wg: Vec<Vector>,
    ewg: Vec<Vector>,
    fwg: Vec<Vector>,
}

impl SolutionFamily {
    pub fn from_parts(g: Mat, target: Mat, split: SpectralSplit, w: Mat, rhs: &RhsSpec) -> Result<Self> {
        let v1_inv = split.v1_inverse()?;
        let wg: Vec<Vector> = rhs.blocks().iter().map(|b| &w * b).collect();
        let ewg = wg.iter().map(|v| &split.e * v).collect();
        let fwg = wg.iter().map(|v| &split.f * v).collect();
        Ok(Self { g, target, split, w, v1_inv, support: rhs.support(), wg, ewg, fwg })
    }

    /// Family for a positive recurrent or transient model.
    pub fn new(model: &QbdModel, sols: &QmeSolutions, rhs: &RhsSpec, eps_zero: Option<f64>) -> Result<Self> {
        if sols.classification == Classification::NullRecurrent {
            return Err(Error::Classification("null recurrent chains need the shifted family".into()));
        }
        if rhs.m() != model.m() {
            return Err(Error::Dimension(format!("g has blocks of length {}, expected {}", rhs.m(), model.m())));
        }
        let eps = eps_zero.unwrap_or_else(|| spectral::default_eps_zero(&sols.g_hat));
        let split = spectral::split(&sols.g_hat, eps)?;
        let data = triple::compute_w(&sols.g, &sols.u, &sols.r, &sols.g_hat)?;
        Self::from_parts(sols.g.clone(), sols.g_hat.clone(), split, data.w, rhs)
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn p(&self) -> usize {
        self.split.p
    }

    fn zero_m(&self) -> Vector {
        Vector::zeros(self.m())
    }

    fn ewg(&self, k: usize) -> Vector {
        self.ewg.get(k).cloned().unwrap_or_else(|| Vector::zeros(self.split.p))
    }

    /// `sum_{j=1}^{nu-1} K V0^j F W g_{j+r}`.
    fn nilpotent_tail(&self, r: usize) -> Vector {
        let mut acc = self.zero_m();
        if self.split.v0.nrows() == 0 {
            return acc;
        }
        let mut pow = self.split.v0.clone();
        for j in 1..self.split.nu {
            if let Some(f) = self.fwg.get(j + r) {
                acc += &self.split.k * (&pow * f);
            }
            pow = &pow * &self.split.v0;
        }
        acc
    }

    /// `y* = -sum_{k=1}^N V1^k E W g_k`.
    pub fn y_star(&self) -> Vector {
        let mut acc = Vector::zeros(self.split.p);
        for k in (1..=self.support).rev() {
            acc = &self.split.v1 * (acc + self.ewg(k));
        }
        -acc
    }

    /// `sigma_r`, evaluated in the stable grouping.
    pub fn sigma(&self, r: usize) -> Vector {
        let zero_m = self.zero_m();
        let zero_p = Vector::zeros(self.split.p);
        self.evaluate(&zero_m, &zero_p, r).pop().expect("r + 1 levels")
    }

    /// `sigma_r` straight from its definition
    /// `-sum_{k=1}^r (G^{r-k} - L V1^{k-r} E) W g_k - sum_j K V0^j F W g_{j+r}`.
    pub fn sigma_direct(&self, r: usize) -> Vector {
        let mut acc = -self.nilpotent_tail(r);
        for k in 1..=r.min(self.support) {
            let gk = linalg::mat_pow(&self.g, r - k) * &self.wg[k];
            let lk = &self.split.l * (linalg::mat_pow(&self.v1_inv, r - k) * &self.ewg[k]);
            acc += lk - gk;
        }
        acc
    }

    /// `G^r dx + L V1^-r dy`.
    pub fn homogeneous(&self, dx: &Vector, dy: &Vector, r: usize) -> Vector {
        linalg::mat_pow(&self.g, r) * dx + &self.split.l * (linalg::mat_pow(&self.v1_inv, r) * dy)
    }

    /// `u_0 .. u_{r_max}` in the cancellation-free grouping
    /// `G^r x - t_r + L V1^-r (y - y*) - L s_r - sum_j K V0^j F W g_{j+r}` with
    /// `t_r = sum_{k<r} G^k W g_{r-k}` and `s_r = sum_{k>r} V1^{k-r} E W g_k`.
    pub fn evaluate(&self, x: &Vector, y: &Vector, r_max: usize) -> Vec<Vector> {
        let p = self.split.p;
        let n = self.support;
        let mut tails = vec![Vector::zeros(p); n.max(r_max) + 1];
        for r in (0..n).rev() {
            tails[r] = &self.split.v1 * (&tails[r + 1] + self.ewg(r + 1));
        }
        let mut gx = x.clone();
        let mut t = self.zero_m();
        let mut z = y - self.y_star();
        let mut out = Vec::with_capacity(r_max + 1);
        for r in 0..=r_max {
            if r > 0 {
                gx = &self.g * gx;
                t = &self.g * t + self.wg.get(r).cloned().unwrap_or_else(|| self.zero_m());
                z = &self.v1_inv * z;
            }
            out.push(&gx - &t + &self.split.l * (&z - &tails[r]) - self.nilpotent_tail(r));
        }
        out
    }

    /// `((B - I) target + A1)(sigma_1 + L V1^-1 y) + g_0`.
    pub fn boundary_rhs(&self, b: &Mat, a1: &Mat, y: &Vector, g0: &Vector) -> Vector {
        let id = linalg::identity(self.m());
        let coupling = (b - &id) * &self.target + a1;
        coupling * (self.sigma(1) + &self.split.l * (&self.v1_inv * y)) + g0
    }

    pub fn v1_inverse(&self) -> &Mat {
        &self.v1_inv
    }

    /// Max over `r <= r_max` of the relative gap between [`Self::evaluate`] and
    /// `G^r x + L V1^-r y + sigma_r`; levels where the direct form overflows are skipped.
    pub fn form_agreement(&self, x: &Vector, y: &Vector, stable: &[Vector]) -> (f64, usize) {
        let mut worst = 0.0f64;
        let mut compared = 0;
        for (r, u) in stable.iter().enumerate() {
            let a = linalg::mat_pow(&self.g, r) * x;
            let b = &self.split.l * (linalg::mat_pow(&self.v1_inv, r) * y);
            let c = self.sigma_direct(r);
            let direct = &a + &b + &c;
            if !direct.iter().all(|v| v.is_finite()) {
                continue;
            }
            let scale = 1.0 + [&a, &b, &c].iter().map(|v| linalg::vec_norm_inf(v)).fold(0.0, f64::max);
            worst = worst.max(linalg::vec_norm_inf(&(u - direct)) / scale);
            compared += 1;
        }
        (worst, compared)
    }

    /// `||sigma_0 - target sigma_1||`.
    pub fn sigma_identity(&self) -> f64 {
        linalg::vec_norm_inf(&(self.sigma(0) - &self.target * self.sigma(1)))
    }
}

/// `pi^T g = sum_k pi0^T R^k g_k`.
pub fn pi_g(pi0: &Vector, r: &Mat, g: &RhsSpec) -> f64 {
    pi0.dot(&verify::weighted_rhs_sum(r, g))
}

/// Resolves `y_perp` from the single constraint `v^T y_perp = c`.
pub(crate) fn resolve_y_perp(mode: &YPerp, v: &Vector, c: f64, scale: f64) -> Result<Vector> {
    let tol = CONSTRAINT_TOL * (1.0 + scale);
    match mode {
        YPerp::MinimalNorm => {
            let nv = v.norm_squared();
            if nv.sqrt() <= 1e-12 * (1.0 + scale) {
                if c.abs() > tol {
                    return Err(Error::Infeasible(format!(
                        "boundary constraint has a vanishing normal but pi^T g = {c:.3e}"
                    )));
                }
                return Ok(Vector::zeros(v.len()));
            }
            Ok(v * (c / nv))
        }
        YPerp::Zero => {
            if c.abs() > tol {
                return Err(Error::Infeasible(format!("y_perp = 0 requires pi^T g = 0, got {c:.3e}")));
            }
            Ok(Vector::zeros(v.len()))
        }
        YPerp::Explicit(vals) => {
            if vals.len() != v.len() {
                return Err(Error::Dimension(format!("y_perp has length {}, expected {}", vals.len(), v.len())));
            }
            let y = Vector::from_column_slice(vals);
            let gap = v.dot(&y) - c;
            if gap.abs() > tol {
                return Err(Error::Infeasible(format!(
                    "y_perp violates the boundary constraint by {gap:.3e}"
                )));
            }
            Ok(y)
        }
    }
}

fn free_vector(values: &Option<Vec<f64>>, default: Vector) -> Result<Vector> {
    match values {
        None => Ok(default),
        Some(v) if v.len() == default.len() => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(Error::Dimension(format!("y has length {}, expected {}", v.len(), default.len()))),
    }
}

/// Solves the Poisson equation, dispatching on the classification of the chain.
pub fn solve(model: &QbdModel, g: &RhsSpec, opts: &PoissonOptions) -> Result<PoissonSolution> {
    let sols = QmeSolutions::compute(model, &opts.qme)?;
    solve_with(model, &sols, g, opts)
}

/// Same as [`solve`].
pub fn solve_poisson(model: &QbdModel, g: &RhsSpec, opts: &PoissonOptions) -> Result<PoissonSolution> {
    solve(model, g, opts)
}

/// [`solve`] with precomputed quadratic-equation solutions.
pub fn solve_with(model: &QbdModel, sols: &QmeSolutions, g: &RhsSpec, opts: &PoissonOptions) -> Result<PoissonSolution> {
    if sols.classification == Classification::NullRecurrent {
        return crate::shift::solve_null_recurrent_with(model, sols, g, opts);
    }
    let horizon = opts.horizon(g)?;
    let family = SolutionFamily::new(model, sols, g, opts.eps_zero)?;
    let ginv = group_inverse(&(model.b() + model.a1() * &sols.g))?;
    let y_star = family.y_star();
    let g0 = g.block(0);

    let (y, alpha, pi_g_value) = match sols.classification {
        Classification::Transient => (free_vector(&opts.y_free, y_star.clone())?, None, None),
        _ => {
            let st = qme::stationary(model, sols, Normalization::Probability)?;
            let c = pi_g(&st.pi0, &sols.r, g);
            let w_inv = linalg::inverse(&family.w, "W")?;
            let v = (st.pi0.transpose() * w_inv * &family.split.l).transpose();
            let y_perp = resolve_y_perp(&opts.y_perp, &v, c, g.max_norm())?;
            (&y_star + y_perp, Some(opts.alpha), Some(c))
        }
    };

    let rhs = family.boundary_rhs(model.b(), model.a1(), &y, &g0);
    let mut x = &ginv.sharp * &rhs;
    let boundary_compatibility = ginv.pi_star.as_ref().map_or(0.0, |pi| pi.dot(&rhs));
    if let Some(a) = alpha {
        x += linalg::ones(model.m()) * a;
    }
    let u = family.evaluate(&x, &y, horizon);
    finish(
        model,
        g,
        opts,
        FinishParts {
            classification: sols.classification,
            path: SolutionPath::General,
            sigma1: family.sigma(1),
            sigma_identity: family.sigma_identity(),
            form: family.form_agreement(&x, &y, &u),
            x,
            y,
            y_star,
            alpha,
            u,
            boundary_compatibility,
            pi_g: pi_g_value,
            warnings: sols.warnings.clone(),
        },
    )
}

pub(crate) struct FinishParts {
    pub classification: Classification,
    pub path: SolutionPath,
    pub x: Vector,
    pub y: Vector,
    pub y_star: Vector,
    pub alpha: Option<f64>,
    pub sigma1: Vector,
    pub sigma_identity: f64,
    pub form: (f64, usize),
    pub u: Vec<Vector>,
    pub boundary_compatibility: f64,
    pub pi_g: Option<f64>,
    pub warnings: Vec<String>,
}

pub(crate) fn finish(model: &QbdModel, g: &RhsSpec, opts: &PoissonOptions, parts: FinishParts) -> Result<PoissonSolution> {
    let residuals = verify::residuals(model, g, &parts.u, opts.residual_tol);
    let mut warnings = parts.warnings;
    if !residuals.pass {
        warnings.push(format!(
            "residual {:.3e} exceeds {:.1e} x scale {:.3e}",
            residuals.max_residual, opts.residual_tol, residuals.scale
        ));
    }
    Ok(PoissonSolution {
        classification: parts.classification,
        path: parts.path,
        horizon: parts.u.len() - 1,
        x: parts.x,
        y: parts.y,
        y_star: parts.y_star,
        alpha: parts.alpha,
        sigma1: parts.sigma1,
        u: parts.u,
        residuals,
        diagnostics: Diagnostics {
            sigma_identity: parts.sigma_identity,
            form_agreement: parts.form.0,
            form_levels_compared: parts.form.1,
            boundary_compatibility: parts.boundary_compatibility,
            pi_g: parts.pi_g,
        },
        warnings,
    })
}

/// Solution when `A1` is nonsingular: `M = I`, `V1 = Ĝ`, and with `ỹ = W^-1 y`
/// `u_r = G^r x - sum_{k<r} G^k W g_{r-k} + W R^-r (ỹ - ỹ*) - sum_{k>r} W R^{k-r} g_k`,
/// `ỹ* = -sum_{k>=1} R^k g_k`. The returned `y`, `y_star` are `ỹ`, `ỹ*`.
pub fn solve_nonsingular_a1(model: &QbdModel, g: &RhsSpec, opts: &PoissonOptions) -> Result<PoissonSolution> {
    let cond = linalg::condition_number(model.a1());
    if !(cond < A1_COND_LIMIT) {
        return Err(Error::Singular(format!("A1 is singular (condition number {cond:.3e})")));
    }
    let sols = QmeSolutions::compute(model, &opts.qme)?;
    if sols.classification == Classification::NullRecurrent {
        return Err(Error::Classification("the nonsingular-A1 form needs a non-null-recurrent chain".into()));
    }
    let m = model.m();
    let horizon = opts.horizon(g)?;
    let data = triple::compute_w(&sols.g, &sols.u, &sols.r, &sols.g_hat)?;
    let w = &data.w;
    let r_inv = linalg::inverse(&sols.r, "R")?;
    let n = g.support();

    let mut y_star = Vector::zeros(m);
    for k in (1..=n).rev() {
        y_star = &sols.r * (y_star + g.block(k));
    }
    let y_star = -y_star;

    let (y, alpha, pi_g_value) = match sols.classification {
        Classification::Transient => (free_vector(&opts.y_free, y_star.clone())?, None, None),
        _ => {
            let st = qme::stationary(model, &sols, Normalization::Probability)?;
            let c = pi_g(&st.pi0, &sols.r, g);
            let y_perp = resolve_y_perp(&opts.y_perp, &st.pi0, c, g.max_norm())?;
            (&y_star + y_perp, Some(opts.alpha), Some(c))
        }
    };

    let id = linalg::identity(m);
    let rhs = (model.b() - &id) * (w * &y) + model.a1() * (w * (&r_inv * &y)) + g.block(0);
    let ginv = group_inverse(&(model.b() + model.a1() * &sols.g))?;
    let boundary_compatibility = ginv.pi_star.as_ref().map_or(0.0, |pi| pi.dot(&rhs));
    let mut x = &ginv.sharp * &rhs;
    if let Some(a) = alpha {
        x += linalg::ones(m) * a;
    }

    let mut tails = vec![Vector::zeros(m); n.max(horizon) + 1];
    for r in (0..n).rev() {
        tails[r] = &sols.r * (&tails[r + 1] + g.block(r + 1));
    }
    let mut gx = x.clone();
    let mut t = Vector::zeros(m);
    let mut z = &y - &y_star;
    let mut u = Vec::with_capacity(horizon + 1);
    for r in 0..=horizon {
        if r > 0 {
            gx = &sols.g * gx;
            t = &sols.g * t + w * g.block(r);
            z = &r_inv * z;
        }
        u.push(&gx - &t + w * (&z - &tails[r]));
    }
    finish(
        model,
        g,
        opts,
        FinishParts {
            classification: sols.classification,
            path: SolutionPath::NonsingularA1,
            x,
            y,
            y_star,
            alpha,
            sigma1: Vector::zeros(m),
            sigma_identity: 0.0,
            form: (0.0, 0),
            u,
            boundary_compatibility,
            pi_g: pi_g_value,
            warnings: sols.warnings.clone(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(b: f64, am: f64, a0: f64, a1: f64) -> QbdModel {
        let s = |x| Mat::from_element(1, 1, x);
        QbdModel::new(s(b), s(am), s(a0), s(a1), 1e-12).unwrap()
    }
    fn pr1() -> QbdModel {
        scalar(0.8, 0.6, 0.2, 0.2)
    }
    fn tr1() -> QbdModel {
        scalar(0.4, 0.2, 0.2, 0.6)
    }
    fn rhs(v: &[f64]) -> RhsSpec {
        RhsSpec::new(v.iter().map(|&x| Vector::from_element(1, x)).collect(), 1).unwrap()
    }
    fn family(model: &QbdModel, g: &RhsSpec) -> SolutionFamily {
        let sols = QmeSolutions::compute(model, &QmeOptions::default()).unwrap();
        SolutionFamily::new(model, &sols, g, None).unwrap()
    }

    #[test]
    fn sigma_values() {
        let f = family(&pr1(), &rhs(&[1.0, -3.0]));
        assert!(f.sigma(1)[0].abs() < 1e-12);
        assert!((f.sigma(3)[0] - 60.0).abs() < 1e-10);
        assert!((f.sigma_direct(3)[0] - 60.0).abs() < 1e-10);
        assert!(f.sigma_identity() < 1e-12);
        let f = family(&pr1(), &rhs(&[2.0]));
        for r in 0..6 {
            assert_eq!(f.sigma(r)[0], 0.0);
        }
    }

    #[test]
    fn y_star_values() {
        assert!((family(&pr1(), &rhs(&[1.0, -3.0])).y_star()[0] + 2.5).abs() < 1e-12);
        assert_eq!(family(&pr1(), &rhs(&[1.0])).y_star()[0], 0.0);
        assert!((family(&pr1(), &rhs(&[0.0, 3.0])).y_star()[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn group_inverse_examples() {
        let one = group_inverse(&Mat::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(one.sharp[(0, 0)], 0.0);
        assert_eq!(one.pi_star.as_ref().unwrap()[0], 1.0);
        let tr = group_inverse(&Mat::from_element(1, 1, 0.6)).unwrap();
        assert!((tr.sharp[(0, 0)] - 2.5).abs() < 1e-14);
        assert!(tr.pi_star.is_none());
        let flip = group_inverse(&Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let want = Mat::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!(linalg::norm_inf(&(&flip.sharp - want)) < 1e-14);
        let (a, b) = flip.residuals();
        assert!(a < 1e-14 && b < 1e-14);
    }

    #[test]
    fn positive_recurrent_walkthrough() {
        let g = rhs(&[1.0, -3.0]);
        for alpha in [0.0, 1.75] {
            let opts = PoissonOptions { alpha, ..Default::default() };
            let sol = solve(&pr1(), &g, &opts).unwrap();
            assert_eq!(sol.classification, Classification::PositiveRecurrent);
            assert!((sol.y[0] + 2.5).abs() < 1e-12 && (sol.y_star[0] + 2.5).abs() < 1e-12);
            assert!(sol.diagnostics.pi_g.unwrap().abs() < 1e-15);
            let x = sol.x[0];
            assert!((x - alpha).abs() < 1e-12);
            assert!((sol.u[0][0] - (x - 2.5)).abs() < 1e-12);
            for r in 1..=sol.horizon {
                assert!((sol.u[r][0] - (x - 7.5)).abs() < 1e-12, "r={r}");
            }
            assert!(sol.residuals.max_residual < 1e-12);
        }
    }

    #[test]
    fn positive_recurrent_unbounded_case() {
        let sol = solve(&pr1(), &rhs(&[1.0]), &PoissonOptions::default()).unwrap();
        assert!((sol.y[0] + 2.5).abs() < 1e-12);
        assert!(sol.residuals.pass);
        let err = solve(&pr1(), &rhs(&[1.0]), &PoissonOptions { y_perp: YPerp::Zero, ..Default::default() });
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn transient_fixture() {
        let sol = solve(&tr1(), &rhs(&[1.0]), &PoissonOptions::default()).unwrap();
        assert_eq!(sol.alpha, None);
        assert!((sol.x[0] - 2.5).abs() < 1e-12);
        for (r, u) in sol.u.iter().enumerate() {
            assert!((u[0] - 2.5 / 3f64.powi(r as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsingular_a1_fixtures() {
        let sol = solve_nonsingular_a1(&tr1(), &rhs(&[1.0]), &PoissonOptions::default()).unwrap();
        for (r, u) in sol.u.iter().enumerate() {
            assert!((u[0] - 2.5 / 3f64.powi(r as i32)).abs() < 1e-12);
        }
        let sol = solve_nonsingular_a1(&pr1(), &rhs(&[1.0, -3.0]), &PoissonOptions::default()).unwrap();
        assert!((sol.y[0] - 1.0).abs() < 1e-12);
        assert!(sol.residuals.max_residual < 1e-12);
        let singular = scalar(1.0, 0.5, 0.5, 0.0);
        let singular = QbdModel::from_blocks_unchecked(
            singular.b().clone(),
            singular.a_minus().clone(),
            singular.a0().clone(),
            singular.a1().clone(),
        )
        .unwrap();
        assert!(matches!(
            solve_nonsingular_a1(&singular, &rhs(&[1.0]), &PoissonOptions::default()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn homogeneous_evaluation() {
        let f = family(&pr1(), &RhsSpec::zeros(1));
        let x = Vector::from_element(1, 1.25);
        let u = f.evaluate(&x, &Vector::zeros(1), 5);
        assert!(u.iter().all(|v| (v[0] - 1.25).abs() < 1e-15));
    }
}
