//! Dispersion series and the capacity estimators that consume them.
//!
//! All estimators are generic over [`Scalar`](crate::Scalar). Kernel sums
//! inside the step detector accumulate in `f64` whatever the scalar is, since
//! they reach `n²` in magnitude and `f32` cannot difference them reliably.

mod binseg;
mod estimate;
pub mod io;
mod kernel;
mod series;

pub use binseg::{binseg_detect, Segment, Segmentation, StepDetectParams};
pub use estimate::{baseline_estimate, nfty_estimate, EstimateReport, Estimator};
pub use kernel::{kernel_cost, median_heuristic_gamma};
pub use series::{dispersion_from_trace, onesided_dispersion, DispersionSeries, SeriesKind};
