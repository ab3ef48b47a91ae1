//! Design of reliable and resilient microgrids from radial distribution feeders.
//!
//! The crate builds a stochastic mixed-integer linear program covering DER
//! and line investment, grid-tied operation over representative days,
//! per-hour islanding events and internal-fault reliability, and solves it
//! with a column-and-constraint generation loop. A Monte-Carlo simulator
//! cross-checks the analytic reliability indices.

pub mod builder;
pub mod ccg;
pub mod design;
pub mod harness;
pub mod error;
pub mod linearize;
pub mod milp;
pub mod model;
pub mod reliability_eval;
pub mod solver;
pub mod synthetic;

pub use error::{Error, Result};
