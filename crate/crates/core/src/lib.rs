//! Numerical toolkit for analytic quasi-periodic linear cocycles: stable
//! iteration, Lyapunov spectra, the Avalanche Principle, the reduction of
//! identically singular cocycles, empirical large-deviation measurements and
//! block Jacobi models.

pub mod acceptance;
pub mod avalanche;
pub mod cocycle;
pub mod empirics;
pub mod error;
pub mod linalg;
pub mod models;
pub mod par;
pub mod reduction;
pub mod rng;
pub mod torus;
pub mod trig;

pub use error::{Error, Result};
