//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex64 = Complex<f64>;

/// Condition numbers above this are treated as numerically singular.
pub const SINGULAR_COND: f64 = 1e14;

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

/// Max absolute row sum.
pub fn norm_inf(a: &Mat) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm_inf(v: &Vector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// 2-norm condition number; `inf` for exactly singular input.
pub fn condition_number(a: &Mat) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_conditioning(a: &Mat, limit: f64, what: &str) -> Result<()> {
    let cond = condition_number(a);
    if !cond.is_finite() || cond > limit {
        return Err(Error::Singular(format!(
            "{what} is numerically singular (condition number {cond:.3e})"
        )));
    }
    Ok(())
}

/// Solves `a x = b` after a condition-number check.
pub fn solve(a: &Mat, b: &Mat, what: &str) -> Result<Mat> {
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, b.ncols()));
    }
    check_conditioning(a, SINGULAR_COND, what)?;
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{what} is singular")))
}

pub fn solve_vec(a: &Mat, b: &Vector, what: &str) -> Result<Vector> {
    let x = solve(a, &Mat::from_column_slice(b.len(), 1, b.as_slice()), what)?;
    Ok(x.column(0).into_owned())
}

/// Solves `x a = b` (right division).
pub fn solve_right(b: &Mat, a: &Mat, what: &str) -> Result<Mat> {
    Ok(solve(&a.transpose(), &b.transpose(), what)?.transpose())
}

pub fn inverse(a: &Mat, what: &str) -> Result<Mat> {
    solve(a, &identity(a.nrows()), what)
}

pub fn inverse_with_limit(a: &Mat, limit: f64, what: &str) -> Result<Mat> {
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    check_conditioning(a, limit, what)?;
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what} is singular")))
}

pub fn mat_pow(a: &Mat, k: usize) -> Mat {
    let mut out = identity(a.nrows());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// Real Schur decomposition with a bounded number of QR sweeps.
pub fn real_schur(a: &Mat) -> Result<(Mat, Mat)> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::NoConvergence { iterations: 1000 * n.max(1), residual: f64::NAN })?;
    let (q, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 2)..n {
            t[(i, j)] = 0.0;
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    match Schur::try_new(a.clone(), f64::EPSILON, 1000 * a.nrows()) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => vec![Complex64::new(f64::NAN, 0.0); a.nrows()],
    }
}

pub fn spectral_radius(a: &Mat) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Right singular vector of the smallest singular value.
pub fn right_null_vector(a: &Mat) -> Vector {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let idx = svd.singular_values.imin();
    v_t.row(idx).transpose()
}

/// Left singular vector of the smallest singular value.
pub fn left_null_vector(a: &Mat) -> Vector {
    right_null_vector(&a.transpose())
}

/// Stationary vector of a row-stochastic matrix, normalized to unit sum.
///
/// Solves `theta^T (I - P + 1 v^T) = v^T` with `v = 1/n`, which is nonsingular
/// whenever `P` has a single recurrent class.
pub fn stationary_vector(p: &Mat) -> Result<Vector> {
    let n = p.nrows();
    let v = Vector::from_element(n, 1.0 / n as f64);
    let fundamental = identity(n) - p + ones(n) * v.transpose();
    let theta = solve_vec(&fundamental.transpose(), &v, "I - P + 1v^T")?;
    let s = theta.sum();
    Ok(theta / s)
}

/// Strong connectivity of the digraph with an edge `i -> j` wherever `a[(i, j)] > 0`.
pub fn is_strongly_connected(a: &Mat) -> bool {
    let n = a.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { a[(i, j)] } else { a[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub fn to_rows(a: &Mat) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Mat::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn to_complex(a: &Mat) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}
