//! Reference solvers used to validate and benchmark the main algorithms.

pub mod bcd;
pub mod grid;
pub mod oracle;

pub use bcd::bcd_elementwise;
pub use grid::{grid_search_oracle, DEFAULT_RESOLUTION, DEFAULT_SWEEPS, MAX_SITES};
pub use oracle::{projected_gradient_oracle, OracleConfig, OracleTarget};
