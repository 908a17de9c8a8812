//! Numerical laboratory for capillary surfaces in rotationally symmetric
//! bodies: ambient metric calculus, surface geometry, cone comparison,
//! boundary curve integrals, the capillary functional and its stability,
//! elliptic solvers on the disk, and CMC capillary foliations near poles.

pub mod asymptotics;
pub mod barrier;
pub mod capillary;
pub mod cone;
pub mod curves;
pub mod disc;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod foliation;
pub mod graph;
pub mod metric;
pub mod polar;
pub mod profile;
pub mod surface;

pub use error::{LabError, Result};
