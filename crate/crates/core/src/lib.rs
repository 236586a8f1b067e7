//! Numerical laboratory for posterior contraction of nonparametric Bayesian
//! density estimators on `[0, 1]`.

pub mod divergences;
pub mod entropy;
pub mod error;
pub mod families;
pub mod grid;
pub mod posterior;
pub mod priors;
pub mod ratelab;
pub mod real;

pub use error::{Error, Result};
pub use grid::{Grid, GridDensity};
