//! Estimation of the state-specific differential entropy rate of a scalar
//! time series.
//!
//! The predictive density of the next value given the last `p` values is
//! estimated with a conditional kernel density estimator whose bandwidths and
//! order are chosen by cross-validation. Its differential entropy, evaluated
//! at each observed past, is the specific entropy rate.
//!
//! ```
//! use spenra::{ckde::Bandwidths, entropy, series::Series};
//!
//! let s = Series::new((0..200).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
//! let k = Bandwidths::from_table_order(&[0.1, 0.2]).unwrap();
//! let h = entropy::specific_entropy_series(&s, &k, 1e-6).unwrap();
//! assert_eq!(h.len(), 199);
//! ```

// NaN must fail range checks, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ckde;
pub mod classic;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod optimize;
pub mod quadrature;
pub mod selection;
pub mod series;
pub mod synth;

pub use ckde::{Bandwidths, ConditionalDensityModel, LeaveOut, PredictiveSlice};
pub use entropy::EntropyRateSeries;
pub use error::{Error, Result};
pub use selection::SelectionReport;
pub use series::{EstimationConfig, HistoryBlock, Series};
