//! Strong-stability-preserving multistep Runge-Kutta methods.
//!
//! - [`method`] and [`spijker`]: coefficient form, Spijker form, canonical
//!   form and the SSP coefficient `C(S,T)`.
//! - [`orderlab`]: stage residuals, stage order and order verification by
//!   truncated Taylor series on random polynomial ODEs.
//! - [`theory`]: stability polynomials, threshold factors and the optimal
//!   second-order family.
//! - [`optimizer`]: multistart search for methods with large SSP coefficient.
//! - [`pdelab`]: time stepping on van der Pol, linear advection and
//!   Buckley-Leverett, with monotonicity monitors and step-size searches.
//! - [`format`]: the `msrk/1` method file format.

pub mod error;
pub mod format;
pub mod method;
pub mod optimizer;
pub mod orderlab;
pub mod par;
pub mod pdelab;
pub mod spijker;
pub mod theory;

pub use error::{MsrkError, Result};
pub use method::{forward_euler, rk44, ssprk33, MsrkMethod, ValidationReport, Violation};
pub use par::Execution;
pub use spijker::{canonical, ssp_coefficient, to_spijker, CanonicalForm, SpijkerForm};
