//! General solution of the Poisson equation `(I - P) u = g` for discrete-time
//! quasi-birth-and-death (QBD) processes.
//!
//! The transition matrix `P` is block tridiagonal with level-0 block `B` and
//! repeating blocks `A_-1`, `A_0`, `A_1`. Writing the Poisson equation level by
//! level gives a boundary condition plus a second-order matrix difference
//! equation; this crate solves that system in closed form for positive
//! recurrent, transient and null recurrent chains, and checks every
//! intermediate identity numerically.
//!
//! The usual entry point is [`poisson::solve`]:
//!
//! ```
//! use qbd_poisson::model::load_problem;
//! use qbd_poisson::poisson::{solve, PoissonOptions};
//!
//! let doc = r#"{"m":1,"B":[[0.4]],"A_minus":[[0.2]],"A0":[[0.2]],"A1":[[0.6]],"g":[[1.0]]}"#;
//! let (model, rhs) = load_problem(doc).unwrap();
//! let sol = solve(&model, &rhs, &PoissonOptions::default()).unwrap();
//! assert!((sol.u[0][0] - 2.5).abs() < 1e-12);
//! assert!(sol.residuals.pass);
//! ```

// NaN-rejecting `!(a <= b)` checks and index loops that follow the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod poisson;
pub mod probabilistic;
pub mod qme;
pub mod shift;
pub mod spectral;
pub mod triple;
pub mod verify;

pub use error::{Error, Result};
pub use model::{QbdModel, RhsSpec};
pub use poisson::{solve, PoissonOptions, PoissonSolution};
pub use qme::{Classification, QmeSolutions};
