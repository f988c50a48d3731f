//! Structural-break detection and herding analysis for daily return panels.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`] loads and aligns price series and derives returns.
//! - [`regression`] is the OLS engine used by the tests and the herding fits.
//! - [`stats`] holds descriptive moments and the Jarque-Bera, ARCH LM and ADF tests.
//! - [`dependence`] computes histogram mutual information and Kendall's tau-b.
//! - [`changepoint`] implements PELT and an unpruned optimal-partitioning oracle.
//! - [`herding`] builds CSSD/CSAD dispersion series and the extreme-day regressions.
//! - [`report`] wires everything into a configurable pipeline that writes CSV tables.

pub mod changepoint;
pub mod data;
pub mod dependence;
pub mod herding;
pub mod regression;
pub mod report;
pub mod stats;
pub mod synthetic;

pub use changepoint::{CostKind, Penalty, Segmentation};
pub use data::{PriceSeries, ReturnConvention, ReturnPanel, ReturnSeries};
pub use regression::{DesignMatrix, RegressionFit};
pub use stats::TestResult;
