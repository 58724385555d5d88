//! Shared numerical kernel: adaptive quadrature over mixed discrete and
//! continuous measures, bracketed monotone root finding and the special
//! functions used by the gamma and Brownian models.

mod invert;
mod measure;
mod quad;
mod root;
pub mod special;

use thiserror::Error;

pub use invert::{invert_cdf, INVERSION_XTOL};
pub use measure::{DensityComponent, IntegrandShape, MixedMeasure, Pdf, TailDecay};
pub use quad::{
    integrate_interval, integrate_piecewise, integrate_power_left, integrate_with_breaks,
    neumaier, Node, QuadResult, Singularity, Tolerance,
};
pub use root::{find_root_monotone, brent, RootResult};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error(
        "quadrature did not converge on [{lo}, {hi}]: estimate {estimate:e}, error {error:e} \
         after {evals} evaluations ({panels} panels)"
    )]
    NonConvergence {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        evals: usize,
        panels: usize,
    },

    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("function is not monotone on [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("root finder stalled at {x} with residual {residual:e}")]
    RootStalled { x: f64, residual: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),
}
