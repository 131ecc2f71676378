//! Piston-driven shocks in a 1-D isentropic polytropic gas at vanishing
//! upstream density: steady polar, characteristic solver with diagnostics,
//! a Lagrangian reference solver, asymptotic fits and a CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod exec;
pub mod gas;
pub mod interp;
pub mod io;
pub mod lagrangian;
pub mod moc;
pub mod piston;
pub mod roots;
pub mod shock_polar;

pub use error::{PistonError, Result};
pub use gas::{Gamma, GasState};
