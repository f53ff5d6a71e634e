//! Splitting a square matrix into a nonsingular part `V1` and a nilpotent part
//! `V0`: `A M = M diag(V1, V0)` with `M = [L | K]` and `M^-1 = [E; F]`.
//!
//! The split is built from a real Schur form whose diagonal blocks are reordered
//! so that eigenvalues of modulus above `eps_zero` come first; the trailing block
//! is then forced to be exactly strictly upper triangular and decoupled from the
//! leading block by a triangular Sylvester solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub v1: Mat,
    pub v0: Mat,
    pub l: Mat,
    pub k: Mat,
    pub e: Mat,
    pub f: Mat,
    pub p: usize,
    pub nu: usize,
    pub eps_zero: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitResiduals {
    /// `||A M - M J|| / max(1, ||A||)`.
    pub similarity: f64,
    /// `||M^-1 M - I||` covering `EL = I`, `FK = I`, `EK = 0`, `FL = 0`.
    pub biorthogonality: f64,
    /// `||LE + KF - I||`.
    pub completeness: f64,
    pub nilpotency_exact: bool,
}

impl SplitResiduals {
    pub fn max(&self) -> f64 {
        self.similarity.max(self.biorthogonality).max(self.completeness)
    }
}

/// `sqrt(eps) * ||A||_inf`.
///
/// Rounding leaves structurally zero eigenvalues at a few `m eps ||A||`, and
/// defective ones at up to `sqrt(eps) ||A||`, so a threshold at `m eps ||A||`
/// misclassifies some of them.
pub fn default_eps_zero(a: &Mat) -> f64 {
    f64::EPSILON.sqrt() * linalg::norm_inf(a)
}

impl SpectralSplit {
    pub fn m(&self) -> usize {
        self.l.nrows()
    }

    /// `M = [L | K]`.
    pub fn m_matrix(&self) -> Mat {
        hcat(&self.l, &self.k)
    }

    /// `M^-1 = [E; F]`.
    pub fn m_inverse(&self) -> Mat {
        vcat(&self.e, &self.f)
    }

    /// `diag(V1, V0)`.
    pub fn jordan_like(&self) -> Mat {
        block_diag(&self.v1, &self.v0)
    }

    pub fn v1_inverse(&self) -> Result<Mat> {
        linalg::inverse(&self.v1, "V1")
    }

    /// `L V1^k E + K V0^k F`, which equals `A^k`.
    pub fn power(&self, k: usize) -> Mat {
        &self.l * linalg::mat_pow(&self.v1, k) * &self.e + &self.k * linalg::mat_pow(&self.v0, k) * &self.f
    }

    pub fn residuals(&self, target: &Mat) -> SplitResiduals {
        let m = self.m_matrix();
        let minv = self.m_inverse();
        let id = linalg::identity(self.m());
        let similarity = linalg::norm_inf(&(target * &m - &m * self.jordan_like()))
            / linalg::norm_inf(target).max(1.0);
        let biorthogonality = linalg::norm_inf(&(&minv * &m - &id));
        let completeness = linalg::norm_inf(&(&self.l * &self.e + &self.k * &self.f - &id));
        let q = self.v0.nrows();
        let nilpotency_exact = q == 0 || {
            let zero = 1e-14 * linalg::norm_inf(&self.v0);
            let small = |a: Mat| a.iter().all(|x| x.abs() <= zero);
            self.nu <= q
                && small(linalg::mat_pow(&self.v0, self.nu))
                && (self.nu == 1 || !small(linalg::mat_pow(&self.v0, self.nu - 1)))
        };
        SplitResiduals { similarity, biorthogonality, completeness, nilpotency_exact }
    }
}

/// Splits `target` into the parts with eigenvalue modulus above and at most `eps_zero`.
pub fn split(target: &Mat, eps_zero: f64) -> Result<SpectralSplit> {
    let n = target.nrows();
    if target.ncols() != n {
        return Err(Error::Dimension(format!("split target must be square, got {}x{}", n, target.ncols())));
    }
    let (mut q, mut t) = linalg::real_schur(target)?;
    let mut blocks = block_sizes(&t);
    triangularize_real_pairs(&mut q, &mut t, &mut blocks);

    // Stable bubble sort: large-modulus blocks to the front.
    let is_large = |t: &Mat, start: usize, size: usize| block_modulus(t, start, size) > eps_zero;
    let mut changed = true;
    while changed {
        changed = false;
        let mut start = 0;
        for b in 0..blocks.len().saturating_sub(1) {
            let (s1, s2) = (blocks[b], blocks[b + 1]);
            if !is_large(&t, start, s1) && is_large(&t, start + s1, s2) {
                swap_blocks(&mut q, &mut t, start, s1, s2)?;
                blocks.swap(b, b + 1);
                changed = true;
            }
            start += blocks[b];
        }
    }

    let mut p = 0;
    let mut start = 0;
    for &size in &blocks {
        if !is_large(&t, start, size) {
            break;
        }
        p += size;
        start += size;
    }

    // Trailing block: force an exactly strictly upper triangular form.
    let mut start = 0;
    let mut large_pairs = Vec::new();
    for &size in &blocks {
        if start >= p {
            if size == 2 {
                let sub = t.view((start, start), (2, 2)).into_owned();
                let v = linalg::right_null_vector(&sub);
                let rot = Mat::from_row_slice(2, 2, &[v[0], -v[1], v[1], v[0]]);
                rotate(&mut q, &mut t, start, &rot);
                t[(start + 1, start + 1)] = 0.0;
            }
            t[(start, start)] = 0.0;
        } else if size == 2 {
            large_pairs.push(start);
        }
        start += size;
    }
    for j in 0..n {
        for i in (j + 1)..n {
            if !(i == j + 1 && large_pairs.contains(&j)) {
                t[(i, j)] = 0.0;
            }
        }
    }

    if p == n {
        let id = linalg::identity(n);
        return Ok(SpectralSplit {
            v1: target.clone(),
            v0: Mat::zeros(0, 0),
            l: id.clone(),
            k: Mat::zeros(n, 0),
            e: id,
            f: Mat::zeros(0, n),
            p,
            nu: 1,
            eps_zero,
        });
    }

    let t11 = t.view((0, 0), (p, p)).into_owned();
    let t12 = t.view((0, p), (p, n - p)).into_owned();
    let nil = t.view((p, p), (n - p, n - p)).into_owned();
    let q1 = q.columns(0, p).into_owned();
    let q2 = q.columns(p, n - p).into_owned();

    let mut y = Mat::zeros(p, n - p);
    if p > 0 {
        let cond = linalg::condition_number(&t11);
        if !(cond <= linalg::SINGULAR_COND) {
            return Err(Error::Split(format!(
                "leading block is numerically singular (condition {cond:.3e}); eigenvalues straddle eps_zero = {eps_zero:.3e}"
            )));
        }
        let lu = t11.clone().lu();
        for j in 0..(n - p) {
            let mut rhs = -t12.column(j).into_owned();
            for i in 0..j {
                rhs += y.column(i) * nil[(i, j)];
            }
            let col = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Split("decoupling solve failed".into()))?;
            y.set_column(j, &col);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Split("decoupling produced non-finite entries".into()));
        }
    }

    let l = q1.clone();
    let k = &q1 * &y + &q2;
    let e = q1.transpose() - &y * q2.transpose();
    let f = q2.transpose();
    let nu = nilpotency_index(&nil);
    Ok(SpectralSplit { v1: t11, v0: nil, l, k, e, f, p, nu, eps_zero })
}

/// Smallest `nu` with `V0^nu = 0` (entries below `1e-14 ||V0||` count as zero); `1` when empty.
pub fn nilpotency_index(v0: &Mat) -> usize {
    let q = v0.nrows();
    if q == 0 {
        return 1;
    }
    let threshold = 1e-14 * linalg::norm_inf(v0);
    let mut pow = v0.clone();
    let mut nu = 1;
    while pow.iter().any(|x| x.abs() > threshold) && nu < q {
        pow = &pow * v0;
        nu += 1;
    }
    nu
}

fn block_sizes(t: &Mat) -> Vec<usize> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push(2);
            i += 2;
        } else {
            out.push(1);
            i += 1;
        }
    }
    out
}

fn block_modulus(t: &Mat, start: usize, size: usize) -> f64 {
    if size == 1 {
        t[(start, start)].abs()
    } else {
        // complex pair: |lambda|^2 = det
        let b = t.view((start, start), (2, 2));
        (b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)]).abs().sqrt()
    }
}

/// Applies the orthogonal 2x2 `rot` to rows/columns `start, start+1` of `t`
/// (`t <- rot^T t rot`) and accumulates it into `q`.
fn rotate(q: &mut Mat, t: &mut Mat, start: usize, rot: &Mat) {
    let rows = t.rows(start, 2).into_owned();
    t.rows_mut(start, 2).copy_from(&(rot.transpose() * rows));
    let cols = t.columns(start, 2).into_owned();
    t.columns_mut(start, 2).copy_from(&(cols * rot));
    let qc = q.columns(start, 2).into_owned();
    q.columns_mut(start, 2).copy_from(&(qc * rot));
}

fn triangularize_real_pairs(q: &mut Mat, t: &mut Mat, blocks: &mut Vec<usize>) {
    let mut out = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for &size in blocks.iter() {
        if size == 2 {
            let (a, b, c, d) = (t[(start, start)], t[(start, start + 1)], t[(start + 1, start)], t[(start + 1, start + 1)]);
            let half_tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let lambda = half_tr + disc.sqrt().copysign(half_tr);
                let (mut v0, mut v1) = (b, lambda - a);
                if v0.hypot(v1) < (lambda - d).hypot(c) {
                    v0 = lambda - d;
                    v1 = c;
                }
                let nrm = v0.hypot(v1);
                if nrm > 0.0 {
                    let rot = Mat::from_row_slice(2, 2, &[v0 / nrm, -v1 / nrm, v1 / nrm, v0 / nrm]);
                    rotate(q, t, start, &rot);
                    t[(start + 1, start)] = 0.0;
                    out.extend([1, 1]);
                    start += 2;
                    continue;
                }
            }
        }
        out.push(size);
        start += size;
    }
    *blocks = out;
}

/// Swaps adjacent diagonal blocks of sizes `s1`, `s2` starting at `start`.
fn swap_blocks(q: &mut Mat, t: &mut Mat, start: usize, s1: usize, s2: usize) -> Result<()> {
    let n = t.nrows();
    let w = s1 + s2;
    let a = t.view((start, start), (s1, s1)).into_owned();
    let b = t.view((start + s1, start + s1), (s2, s2)).into_owned();
    let c = t.view((start, start + s1), (s1, s2)).into_owned();

    // A X - X B = -C via the Kronecker form (I (x) A - B^T (x) I) vec X = -vec C.
    let kron = identity_kron(s2, &a) - b.transpose().kronecker(&linalg::identity(s1));
    let rhs = -Mat::from_column_slice(s1 * s2, 1, c.as_slice());
    let x = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Split("eigenvalue reordering hit coinciding eigenvalues".into()))?;
    let x = Mat::from_column_slice(s1, s2, x.as_slice());

    let mut basis = Mat::zeros(w, s2 + w);
    basis.view_mut((0, 0), (s1, s2)).copy_from(&x);
    basis.view_mut((s1, 0), (s2, s2)).fill_with_identity();
    basis.view_mut((0, s2), (w, w)).fill_with_identity();
    let qf = basis.qr().q();

    let rows = t.rows(start, w).into_owned();
    t.rows_mut(start, w).copy_from(&(qf.transpose() * rows));
    let cols = t.columns(start, w).into_owned();
    t.columns_mut(start, w).copy_from(&(cols * &qf));
    let qc = q.columns(start, w).into_owned();
    q.columns_mut(start, w).copy_from(&(qc * &qf));

    t.view_mut((start + s2, start), (s1, s2)).fill(0.0);
    for j in 0..n {
        let first = if j >= start && j < start + s2 {
            start + s2
        } else if j >= start + s2 && j < start + w {
            start + w
        } else {
            continue;
        };
        for i in first..n {
            t[(i, j)] = 0.0;
        }
    }
    // Restore zeros below the diagonal inside 1x1 blocks produced by the swap.
    if s2 == 1 {
        for i in (start + 1)..n {
            t[(i, start)] = 0.0;
        }
    }
    if s1 == 1 {
        for i in (start + w)..n {
            t[(i, start + w - 1)] = 0.0;
        }
    }
    Ok(())
}

fn identity_kron(k: usize, a: &Mat) -> Mat {
    linalg::identity(k).kronecker(a)
}

pub(crate) fn hcat(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub(crate) fn vcat(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

pub(crate) fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}
