//! Mollified small-increment processes of self-similar processes.
//!
//! The crate simulates Brownian motion, symmetric alpha-stable Lévy motion
//! and fractional Brownian motion on grids, forms the mollified increment
//! processes `eps^{1-H} int X(t - eps u) dpsi(u) / eps`, and studies their
//! occupation, space-time and path-level empirical measures together with
//! the spectral and large-deviation quantities attached to them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Series coefficients and reference values are kept at full printed precision.
#![allow(clippy::excessive_precision)]

pub mod discrete;
pub mod error;
pub mod increments;
pub mod ldp;
pub mod levelproc;
pub mod measures;
pub mod mollifiers;
pub mod numerics;
pub mod paths;
pub mod seeding;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use increments::IncrementProcess;
pub use measures::{EmpiricalMeasure, MeasurePath, SpaceTimeHistogram};
pub use mollifiers::{KernelClassReport, KernelId, SignedKernel};
pub use paths::{GridPath, ProcessDescriptor, ProcessFamily};
pub use seeding::seed_split;
pub use spectral::SpectralDensity;
pub use ldp::{CGFEstimate, RateCurve};
pub use levelproc::PathSampleCloud;
pub use discrete::LagSchedule;
