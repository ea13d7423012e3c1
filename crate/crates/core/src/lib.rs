//! Numerical toolkit for a finite-horizon consumption, investment and
//! job-switching problem with time-varying switching costs.
//!
//! The dual difference function solves a parabolic double-obstacle problem in
//! `(tau, x) = (T - t, ln y)`. This crate solves it by penalization and by
//! projected SOR, extracts the two free boundaries, recovers the dual value
//! functions and the primal policy, and checks the result by Monte Carlo.

pub mod domain;
pub mod dual;
pub mod error;
pub mod free_boundary;
pub mod mc;
pub mod model;
pub mod obstacle;

pub use error::{Error, Result};
