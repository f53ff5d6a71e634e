//! QBD blocks, right-hand sides, the JSON problem document and structural checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Default tolerance for entry ranges and row sums.
pub const DEFAULT_STOCHASTIC_TOL: f64 = 1e-12;

/// The four `m x m` blocks of a level-independent QBD transition matrix.
///
/// ```text
///     | B     A1              |
/// P = | A-1   A0    A1        |
///     |       A-1   A0    A1  |
///     |             ...   ... |
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct QbdModel {
    m: usize,
    b: Mat,
    a_minus: Mat,
    a0: Mat,
    a1: Mat,
}

impl QbdModel {
    /// Builds a model and rejects it unless every structural invariant holds at `tol`.
    pub fn new(b: Mat, a_minus: Mat, a0: Mat, a1: Mat, tol: f64) -> Result<Self> {
        let model = Self::from_blocks_unchecked(b, a_minus, a0, a1)?;
        model.validate(tol).into_result()?;
        Ok(model)
    }

    /// Only checks that the four blocks are square and of equal size.
    pub fn from_blocks_unchecked(b: Mat, a_minus: Mat, a0: Mat, a1: Mat) -> Result<Self> {
        let m = b.nrows();
        if m == 0 {
            return Err(Error::Dimension("phase count m must be positive".into()));
        }
        for (name, blk) in [("B", &b), ("A_minus", &a_minus), ("A0", &a0), ("A1", &a1)] {
            if blk.nrows() != m || blk.ncols() != m {
                return Err(Error::Dimension(format!(
                    "block {name} is {}x{}, expected {m}x{m}",
                    blk.nrows(),
                    blk.ncols()
                )));
            }
        }
        Ok(Self { m, b, a_minus, a0, a1 })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn a_minus(&self) -> &Mat {
        &self.a_minus
    }
    pub fn a0(&self) -> &Mat {
        &self.a0
    }
    pub fn a1(&self) -> &Mat {
        &self.a1
    }

    /// `A-1 + A0 + A1`.
    pub fn level_sum(&self) -> Mat {
        &self.a_minus + &self.a0 + &self.a1
    }

    /// `eta(lambda) = A-1 + (A0 - I) lambda + A1 lambda^2` at a complex point.
    pub fn eta(&self, lambda: linalg::Complex64) -> nalgebra::DMatrix<linalg::Complex64> {
        let id = linalg::identity(self.m);
        let am = linalg::to_complex(&self.a_minus);
        let a0 = linalg::to_complex(&(&self.a0 - &id));
        let a1 = linalg::to_complex(&self.a1);
        am + a0 * lambda + a1 * (lambda * lambda)
    }

    /// Upper-left `3m x 3m` corner of `P`.
    pub fn truncated(&self, levels: usize) -> Mat {
        let m = self.m;
        let n = levels * m;
        let mut p = Mat::zeros(n, n);
        for lvl in 0..levels {
            let diag = if lvl == 0 { &self.b } else { &self.a0 };
            p.view_mut((lvl * m, lvl * m), (m, m)).copy_from(diag);
            if lvl + 1 < levels {
                p.view_mut((lvl * m, (lvl + 1) * m), (m, m)).copy_from(&self.a1);
                p.view_mut(((lvl + 1) * m, lvl * m), (m, m)).copy_from(&self.a_minus);
            }
        }
        p
    }

    /// Structural diagnostics. Never fails and never mutates the model.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut entry_violations = Vec::new();
        for (name, blk) in [("B", &self.b), ("A_minus", &self.a_minus), ("A0", &self.a0), ("A1", &self.a1)] {
            for i in 0..self.m {
                for j in 0..self.m {
                    let v = blk[(i, j)];
                    if !v.is_finite() || v < -tol || v > 1.0 + tol {
                        entry_violations.push(EntryViolation { block: name.to_string(), row: i, col: j, value: v });
                    }
                }
            }
        }
        let boundary = &self.b + &self.a1;
        let boundary_row_residuals: Vec<f64> =
            boundary.row_iter().map(|r| (r.sum() - 1.0).abs()).collect();
        let level = self.level_sum();
        let repeating_row_residuals: Vec<f64> =
            level.row_iter().map(|r| (r.sum() - 1.0).abs()).collect();
        let repeating_irreducible = linalg::is_strongly_connected(&level);
        let truncated_irreducible = linalg::is_strongly_connected(&self.truncated(3));

        let mut warnings = Vec::new();
        if !truncated_irreducible {
            warnings.push(
                "3-level truncation of P is not strongly connected; the level graph may not be irreducible"
                    .to_string(),
            );
        }
        ValidationReport {
            m: self.m,
            tol,
            entry_violations,
            boundary_row_residuals,
            repeating_row_residuals,
            repeating_irreducible,
            truncated_irreducible,
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryViolation {
    pub block: String,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub m: usize,
    pub tol: f64,
    pub entry_violations: Vec<EntryViolation>,
    /// `|row_i(B + A1) 1 - 1|`.
    pub boundary_row_residuals: Vec<f64>,
    /// `|row_i(A-1 + A0 + A1) 1 - 1|`.
    pub repeating_row_residuals: Vec<f64>,
    pub repeating_irreducible: bool,
    pub truncated_irreducible: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn max_boundary_residual(&self) -> f64 {
        self.boundary_row_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_repeating_residual(&self) -> f64 {
        self.repeating_row_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }

    fn first_failure(&self) -> Option<String> {
        if let Some(v) = self.entry_violations.first() {
            return Some(format!(
                "entry {}[{}][{}] = {} is outside [0, 1]",
                v.block, v.row, v.col, v.value
            ));
        }
        for (i, r) in self.boundary_row_residuals.iter().enumerate() {
            if !(*r <= self.tol) {
                return Some(format!("boundary row {i} of B + A1 has row-sum residual {r:.3e}"));
            }
        }
        for (i, r) in self.repeating_row_residuals.iter().enumerate() {
            if !(*r <= self.tol) {
                return Some(format!("repeating row {i} of A_minus + A0 + A1 has row-sum residual {r:.3e}"));
            }
        }
        if !self.repeating_irreducible {
            return Some("A_minus + A0 + A1 is not irreducible".into());
        }
        None
    }

    pub fn into_result(self) -> Result<()> {
        match self.first_failure() {
            Some(msg) => Err(Error::InvalidModel(msg)),
            None => Ok(()),
        }
    }
}

/// Finitely supported right-hand side `g_0, ..., g_N`; `g_k = 0` for `k > N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsSpec {
    blocks: Vec<Vector>,
}

impl RhsSpec {
    pub fn new(blocks: Vec<Vector>, m: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Dimension("g must contain at least one block".into()));
        }
        for (k, blk) in blocks.iter().enumerate() {
            if blk.len() != m {
                return Err(Error::Dimension(format!("g[{k}] has length {}, expected {m}", blk.len())));
            }
            if let Some(j) = blk.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("g[{k}][{j}] is not finite")));
            }
        }
        Ok(Self { blocks })
    }

    pub fn from_rows(rows: &[Vec<f64>], m: usize) -> Result<Self> {
        Self::new(rows.iter().map(|r| Vector::from_column_slice(r)).collect(), m)
    }

    pub fn zeros(m: usize) -> Self {
        Self { blocks: vec![Vector::zeros(m)] }
    }

    /// Index of the last stored block.
    pub fn support(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn m(&self) -> usize {
        self.blocks[0].len()
    }

    /// `g_k`, zero past the support.
    pub fn block(&self, k: usize) -> Vector {
        self.blocks.get(k).cloned().unwrap_or_else(|| Vector::zeros(self.m()))
    }

    pub fn blocks(&self) -> &[Vector] {
        &self.blocks
    }

    pub fn max_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::vec_norm_inf).fold(0.0, f64::max)
    }
}

/// Wire format of a problem document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub m: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "A_minus")]
    pub a_minus: Vec<Vec<f64>>,
    #[serde(rename = "A0")]
    pub a0: Vec<Vec<f64>>,
    #[serde(rename = "A1")]
    pub a1: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

impl ProblemDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Dimension checks only; no stochasticity or irreducibility checks.
    pub fn to_unchecked(&self) -> Result<(QbdModel, RhsSpec)> {
        let m = self.m;
        let block = |name: &str, rows: &[Vec<f64>]| -> Result<Mat> {
            if rows.len() != m {
                return Err(Error::Dimension(format!("{name} has {} rows, expected {m}", rows.len())));
            }
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
                return Err(Error::Dimension(format!("{name} row {i} has {} entries, expected {m}", r.len())));
            }
            Ok(linalg::from_rows(rows))
        };
        let model = QbdModel::from_blocks_unchecked(
            block("B", &self.b)?,
            block("A_minus", &self.a_minus)?,
            block("A0", &self.a0)?,
            block("A1", &self.a1)?,
        )?;
        let rhs = RhsSpec::from_rows(&self.g, m)?;
        Ok((model, rhs))
    }

    pub fn from_problem(model: &QbdModel, rhs: &RhsSpec) -> Self {
        Self {
            m: model.m(),
            b: linalg::to_rows(model.b()),
            a_minus: linalg::to_rows(model.a_minus()),
            a0: linalg::to_rows(model.a0()),
            a1: linalg::to_rows(model.a1()),
            g: rhs.blocks().iter().map(linalg::to_vec).collect(),
        }
    }
}

/// Parses and validates a problem document at the default tolerance.
pub fn load_problem(document: &str) -> Result<(QbdModel, RhsSpec)> {
    load_problem_with_tol(document, DEFAULT_STOCHASTIC_TOL)
}

pub fn load_problem_with_tol(document: &str, tol: f64) -> Result<(QbdModel, RhsSpec)> {
    let (model, rhs) = ProblemDocument::parse(document)?.to_unchecked()?;
    model.validate(tol).into_result()?;
    Ok((model, rhs))
}

pub fn serialize_problem(model: &QbdModel, rhs: &RhsSpec) -> String {
    serde_json::to_string(&ProblemDocument::from_problem(model, rhs)).expect("plain data serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const PR1: &str = r#"{"m":1,"B":[[0.8]],"A_minus":[[0.6]],"A0":[[0.2]],"A1":[[0.2]],"g":[[1],[-3]]}"#;
    const NR1: &str = r#"{"m":1,"B":[[0.6]],"A_minus":[[0.4]],"A0":[[0.2]],"A1":[[0.4]],"g":[[1],[-2]]}"#;

    #[test]
    fn accepts_scalar_fixtures() {
        let (model, rhs) = load_problem(PR1).unwrap();
        assert_eq!(model.m(), 1);
        assert_eq!(rhs.support(), 1);
        assert_eq!(rhs.block(1)[0], -3.0);
        assert_eq!(rhs.block(7)[0], 0.0);
        load_problem(NR1).unwrap();
    }

    #[test]
    fn rejects_repeating_row_sum() {
        let doc = r#"{"m":1,"B":[[0.5]],"A_minus":[[0.5]],"A0":[[0.5]],"A1":[[0.5]],"g":[[1]]}"#;
        let err = load_problem(doc).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("repeating row 0"), "{err}");
    }

    #[test]
    fn rejects_bad_dimensions_and_syntax() {
        let doc = r#"{"m":2,"B":[[0.8]],"A_minus":[[0.6]],"A0":[[0.2]],"A1":[[0.2]],"g":[[1]]}"#;
        assert!(matches!(load_problem(doc), Err(Error::Dimension(_))));
        let doc = r#"{"m":1,"B":[[0.8]],"A_minus":[[0.6]],"A0":[[0.2]],"A1":[[0.2]],"g":[[1, 2]]}"#;
        assert!(matches!(load_problem(doc), Err(Error::Dimension(_))));
        assert!(matches!(load_problem("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn validate_flags_missing_down_transitions() {
        let model = QbdModel::from_blocks_unchecked(
            Mat::from_element(1, 1, 0.5),
            Mat::zeros(1, 1),
            Mat::from_element(1, 1, 0.5),
            Mat::from_element(1, 1, 0.5),
        )
        .unwrap();
        let report = model.validate(DEFAULT_STOCHASTIC_TOL);
        assert!(!report.truncated_irreducible);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn validate_reports_boundary_residual() {
        let model = QbdModel::from_blocks_unchecked(
            Mat::from_element(1, 1, 0.79),
            Mat::from_element(1, 1, 0.6),
            Mat::from_element(1, 1, 0.2),
            Mat::from_element(1, 1, 0.2),
        )
        .unwrap();
        let report = model.validate(DEFAULT_STOCHASTIC_TOL);
        assert!((report.max_boundary_residual() - 0.01).abs() < 1e-12);
        assert!(!report.passed());
        let (pr1, _) = load_problem(PR1).unwrap();
        let ok = pr1.validate(DEFAULT_STOCHASTIC_TOL);
        assert!(ok.passed() && ok.truncated_irreducible && ok.warnings.is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let doc = r#"{"m":1,"B":[[0.8]],"A_minus":[[0.6]],"A0":[[0.2]],"A1":[[0.2]],"g":[[1]],"h":1}"#;
        assert!(matches!(load_problem(doc), Err(Error::Parse(_))));
    }
}
