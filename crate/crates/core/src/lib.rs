//! Transference bounds for functional inequalities of conservative spin
//! systems, with the numerical machinery to test them.

pub mod chaos;
pub mod config;
pub mod constants;
pub mod error;
pub mod exec;
pub mod interp;
pub mod measure1d;
pub mod quad;
pub mod spectral;
pub mod spin;
pub mod tilt;
pub mod transference;

pub use constants::UniversalConstants;
pub use error::{Error, Result};
pub use exec::{Execution, McOptions};
pub use measure1d::{Measure1D, MeasureStats, Potential1D};
