//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64, Vector};
use crate::model::{self, ProblemDocument, QbdModel, RhsSpec, DEFAULT_STOCHASTIC_TOL};
use crate::poisson::{self, PoissonOptions, PoissonSolution, YPerp, DEFAULT_RESIDUAL_TOL};
use crate::probabilistic;
use crate::qme::{self, Classification, QmeOptions, QmeSolutions, DEFAULT_NULL_BAND};
use crate::shift;
use crate::spectral;
use crate::triple;
use crate::verify;

/// Tolerance for the `lemmas` identity report.
const LEMMA_TOL: f64 = 1e-8;
/// Tolerance (relative to scale) for the forward-recurrence comparison.
const ORACLE_TOL: f64 = 1e-6;
/// Levels past the support of `g` covered by the forward recurrence.
const ORACLE_EXTRA_LEVELS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "qbd-poisson", version, about = "Poisson equation solver for discrete-time QBD processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check stochasticity and irreducibility of the model.
    Validate(Common),
    /// Classify the chain and list the characteristic roots.
    Classify(Common),
    /// Solve the Poisson equation and write the solution as JSON (and CSV).
    Solve(SolveArgs),
    /// Report residuals of the matrix identities behind the solution.
    Lemmas(Common),
    /// Compare the analytic solution with the probabilistic one.
    CompareProb(CompareArgs),
    /// Cross-check the solution against the forward recurrence.
    Oracle(SolveArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Problem document (JSON).
    input: PathBuf,
    /// Where to write the JSON result; standard output if absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Tolerance for entry ranges and row sums.
    #[arg(long, default_value_t = DEFAULT_STOCHASTIC_TOL)]
    stoch_tol: f64,
    /// Drift band treated as null recurrent.
    #[arg(long, default_value_t = DEFAULT_NULL_BAND)]
    null_band: f64,
    /// Modulus at or below which an eigenvalue counts as zero in the spectral split.
    #[arg(long)]
    eps_zero: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Highest level evaluated (default: support of g plus 10).
    #[arg(long)]
    levels: Option<usize>,
    /// Multiple of the all-ones vector added to x in the recurrent case.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    /// `minimal-norm`, `zero`, or a comma-separated vector.
    #[arg(long, default_value = "minimal-norm", value_parser = parse_y_perp, allow_hyphen_values = true)]
    y_perp: YPerp,
    /// Free parameter y of the transient case (comma-separated).
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    y_free: Option<Vec<f64>>,
    /// Residual tolerance relative to 1 + max_r ||u_r||.
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_TOL)]
    residual_tol: f64,
    /// CSV companion file (default: the JSON path with a .csv extension).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Highest level compared (default: support of g plus 10).
    #[arg(long)]
    levels: Option<usize>,
    /// Shift g_0 by a multiple of 1 so a recurrent chain meets the compatibility condition.
    #[arg(long)]
    center: bool,
}

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")))
        .collect()
}

fn parse_y_perp(s: &str) -> std::result::Result<YPerp, String> {
    match s {
        "minimal-norm" | "minimal_norm" => Ok(YPerp::MinimalNorm),
        "zero" => Ok(YPerp::Zero),
        other => parse_vector(other).map(YPerp::Explicit),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report_error("usage", e.to_string().trim_end());
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            e.exit_code()
        }
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Validate(c) => validate(&c),
        Command::Classify(c) => classify(&c),
        Command::Solve(a) => solve(&a),
        Command::Lemmas(c) => lemmas(&c),
        Command::CompareProb(a) => compare_prob(&a),
        Command::Oracle(a) => oracle(&a),
    }
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn load(c: &Common) -> Result<(QbdModel, RhsSpec)> {
    model::load_problem_with_tol(&read_input(&c.input)?, c.stoch_tol)
}

fn qme_options(c: &Common) -> QmeOptions {
    QmeOptions { null_band: c.null_band, ..QmeOptions::default() }
}

fn emit(output: &Option<PathBuf>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match output {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Parse(format!("cannot write {}: {e}", path.display())))
}

fn vec_json(v: &Vector) -> Value {
    json!(linalg::to_vec(v))
}

fn root_json(z: &Complex64) -> Value {
    if !z.re.is_finite() || !z.im.is_finite() {
        json!("inf")
    } else if z.im.abs() <= 1e-12 * z.norm().max(1.0) {
        json!(z.re)
    } else {
        json!([z.re, z.im])
    }
}

fn validate(c: &Common) -> Result<i32> {
    let doc = ProblemDocument::parse(&read_input(&c.input)?)?;
    let (model, _) = doc.to_unchecked()?;
    let report = model.validate(c.stoch_tol);
    let passed = report.passed();
    emit(&c.output, &json!({ "valid": passed, "report": report }))?;
    match report.into_result() {
        Ok(()) => Ok(0),
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            Ok(1)
        }
    }
}

fn classify(c: &Common) -> Result<i32> {
    let (model, _) = load(c)?;
    let sols = QmeSolutions::compute(&model, &qme_options(c))?;
    let roots: Vec<Value> = qme::char_roots(&sols).iter().map(root_json).collect();
    emit(
        &c.output,
        &json!({
            "class": sols.classification.as_str(),
            "drift": sols.drift,
            "roots": roots,
            "sp_G": sols.sp_g,
            "sp_Ghat": sols.sp_g_hat,
            "sp_R": sols.sp_r,
            "warnings": sols.warnings,
        }),
    )?;
    Ok(0)
}

fn solve_options(a: &SolveArgs) -> PoissonOptions {
    PoissonOptions {
        levels: a.levels,
        alpha: a.alpha,
        y_perp: a.y_perp.clone(),
        y_free: a.y_free.clone(),
        eps_zero: a.common.eps_zero,
        qme: qme_options(&a.common),
        residual_tol: a.residual_tol,
    }
}

fn check_flags(a: &SolveArgs) -> Result<()> {
    if let Some(l) = a.levels {
        if l < 2 {
            return Err(Error::Dimension(format!("--levels must be at least 2, got {l}")));
        }
    }
    for (name, v) in [("--residual-tol", a.residual_tol), ("--stoch-tol", a.common.stoch_tol), ("--null-band", a.common.null_band)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidModel(format!("{name} must be a finite nonnegative number")));
        }
    }
    if !a.alpha.is_finite() {
        return Err(Error::InvalidModel("--alpha must be finite".into()));
    }
    Ok(())
}

/// Solution document as written by `solve`.
pub fn solution_json(sol: &PoissonSolution) -> Value {
    json!({
        "class": sol.classification.as_str(),
        "path": sol.path,
        "x": vec_json(&sol.x),
        "y": vec_json(&sol.y),
        "y_star": vec_json(&sol.y_star),
        "alpha": sol.alpha,
        "u": sol.u.iter().map(vec_json).collect::<Vec<_>>(),
        "residuals": sol.residuals,
        "diagnostics": sol.diagnostics,
        "warnings": sol.warnings,
    })
}

/// One row per level: `level,u_1,...,u_m`.
pub fn solution_csv(sol: &PoissonSolution) -> String {
    let m = sol.x.len();
    let mut out = String::from("level");
    for i in 1..=m {
        out.push_str(&format!(",u_{i}"));
    }
    out.push('\n');
    for (r, u) in sol.u.iter().enumerate() {
        out.push_str(&r.to_string());
        for v in u.iter() {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}

fn solve(a: &SolveArgs) -> Result<i32> {
    check_flags(a)?;
    let (model, g) = load(&a.common)?;
    let sol = poisson::solve(&model, &g, &solve_options(a))?;
    emit(&a.common.output, &solution_json(&sol))?;
    let csv_path = a.csv.clone().or_else(|| a.common.output.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = csv_path {
        write_file(&path, &solution_csv(&sol))?;
    }
    if !sol.residuals.pass {
        report_error(
            "residual",
            &format!("residual {:.3e} exceeds tolerance {:.1e} x scale {:.3e}", sol.residuals.max_residual, sol.residuals.tol, sol.residuals.scale),
        );
        return Ok(2);
    }
    Ok(0)
}

fn lemmas(c: &Common) -> Result<i32> {
    let (model, _) = load(c)?;
    let sols = QmeSolutions::compute(&model, &qme_options(c))?;
    let st_residual;
    let (body, passed) = if sols.classification == Classification::NullRecurrent {
        let s = shift::right_shift(&model, &sols, c.eps_zero)?;
        let inv = s.invariants(&sols);
        let split = s.split_t.residuals(&s.g_ddot);
        st_residual = qme::stationary(&model, &sols, qme::Normalization::UnitSum)?.residual(&model, &sols.g);
        let ok = inv.passed(LEMMA_TOL) && split.max() <= LEMMA_TOL;
        (json!({ "shift": inv, "split": split, "p": s.split_t.p, "nu": s.split_t.nu }), ok)
    } else {
        let eps = c.eps_zero.unwrap_or_else(|| spectral::default_eps_zero(&sols.g_hat));
        let split = spectral::split(&sols.g_hat, eps)?;
        let data = triple::compute_w(&sols.g, &sols.u, &sols.r, &sols.g_hat)?;
        let report = triple::check_identities(&model, &sols, &split, &data)?;
        let split_res = split.residuals(&sols.g_hat);
        let ginv = poisson::group_inverse(&(model.b() + model.a1() * &sols.g))?;
        let (gi1, gi2) = ginv.residuals();
        st_residual = match sols.classification {
            Classification::PositiveRecurrent => {
                qme::stationary(&model, &sols, qme::Normalization::Probability)?.residual(&model, &sols.g)
            }
            _ => 0.0,
        };
        let ok = report.passed(LEMMA_TOL) && split_res.max() <= LEMMA_TOL && gi1.max(gi2) <= LEMMA_TOL;
        (
            json!({
                "identities": report,
                "split": split_res,
                "p": split.p,
                "nu": split.nu,
                "group_inverse": [gi1, gi2],
            }),
            ok,
        )
    };
    let passed = passed && st_residual <= LEMMA_TOL && sols.residuals.max() <= LEMMA_TOL;
    emit(
        &c.output,
        &json!({
            "class": sols.classification.as_str(),
            "qme_residuals": sols.residuals,
            "stationary_residual": st_residual,
            "report": body,
            "pass": passed,
        }),
    )?;
    Ok(if passed { 0 } else { 2 })
}

fn compare_prob(a: &CompareArgs) -> Result<i32> {
    let (model, g) = load(&a.common)?;
    let opts = PoissonOptions {
        levels: a.levels,
        y_perp: YPerp::Zero,
        eps_zero: a.common.eps_zero,
        qme: qme_options(&a.common),
        ..PoissonOptions::default()
    };
    let sols = QmeSolutions::compute(&model, &opts.qme)?;
    let g = if a.center && sols.classification.is_recurrent() { verify::center_rhs(&model, &sols, &g)? } else { g };
    let sol = poisson::solve_with(&model, &sols, &g, &opts)?;
    let prob = probabilistic::omega_solution_with(&model, &sols, &g, sol.horizon)?;
    let cmp = probabilistic::compare_constant_shift(&sol.u, &prob.omega);
    let omega_res = verify::residuals(&model, &g, &prob.omega, 1e-7);
    emit(
        &a.common.output,
        &json!({
            "class": sols.classification.as_str(),
            "comparison": cmp,
            "gamma": vec_json(&prob.gamma),
            "omega_residuals": omega_res,
        }),
    )?;
    Ok(if cmp.is_match && omega_res.pass { 0 } else { 2 })
}

fn oracle(a: &SolveArgs) -> Result<i32> {
    check_flags(a)?;
    let (model, g) = load(&a.common)?;
    let opts = solve_options(a);
    let sols = QmeSolutions::compute(&model, &opts.qme)?;
    let sol = poisson::solve_with(&model, &sols, &g, &opts)?;
    let requested = sol.horizon.min(g.support() + ORACLE_EXTRA_LEVELS);
    let horizon = verify::oracle_horizon(&sols, requested);
    let fwd = verify::forward_oracle(&model, &g, &sol.u[0], &sol.u[1], horizon)?;
    let scale = 1.0 + sol.u[..=horizon].iter().map(linalg::vec_norm_inf).fold(0.0, f64::max);
    let max_dev = fwd
        .iter()
        .zip(&sol.u)
        .map(|(f, u)| linalg::vec_norm_inf(&(f - u)))
        .fold(0.0, f64::max);
    let pass = max_dev <= ORACLE_TOL * scale;
    emit(&a.common.output, &json!({ "levels": horizon, "requested_levels": requested, "max_deviation": max_dev, "scale": scale, "pass": pass }))?;
    Ok(if pass { 0 } else { 2 })
}
