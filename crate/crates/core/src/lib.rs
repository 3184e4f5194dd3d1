//! Local numerical construction of special Ricci–Hessian Kähler metrics in real
//! dimension four, and independent verification of the resulting geometry.

pub mod config;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod fd;
pub mod geometry;
pub mod jet_algebra;
pub mod pipeline;
pub mod profiles;
pub mod series_oracle;
pub mod taylor;

pub use config::RunConfig;
pub use error::{Result, SrhError};
pub use jet_algebra::{Direction, Jet1, RateZ, StateZ};
pub use profiles::{Family, ProfileEval, ProfileParams};
