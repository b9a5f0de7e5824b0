pub mod asymptotic;
pub mod design;
pub mod error;
pub mod geometry;
pub mod laplace;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod outage;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};
