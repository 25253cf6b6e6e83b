//! Latitude-adaptive quality parameters for neural compression of
//! equirectangular 360-degree video.
//!
//! - [`geometry`]: row latitudes and spherical weights of ERP planes.
//! - [`qpa`]: quality parameter / multiplier relation, per-row adapted
//!   quality maps and the GOP offset schedule.
//! - [`bank`]: modulation vector banks, interpolation and the container file.
//! - [`metrics`]: PSNR / WS-PSNR over raw YUV 4:2:0 sequences.
//! - [`bdrate`]: Bjøntegaard delta rate.
//! - [`sim`]: exponential R-D model simulator of banded allocation.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar type.

pub mod bank;
pub mod bdrate;
pub mod format;
pub mod geometry;
pub mod metrics;
pub mod qpa;
pub mod scalar;
pub mod sim;

pub use bank::{BankError, BankKind, ModulationMatrix};
pub use bdrate::{BdError, BdMethod};
pub use geometry::GeometryError;
pub use metrics::{MetricsError, Plane, SequenceReport, VideoSpec, YuvFrame};
pub use qpa::QpaError;
pub use scalar::Scalar;
pub use sim::SimError;

pub type LatitudeGrid = geometry::LatitudeGrid<f64>;
pub type LatitudeGridF32 = geometry::LatitudeGrid<f32>;
pub type WeightGrid = geometry::WeightGrid<f64>;
pub type WeightGridF32 = geometry::WeightGrid<f32>;

pub type QpaConfig = qpa::QpaConfig<f64>;
pub type QpaConfigF32 = qpa::QpaConfig<f32>;
pub type QualityMap = qpa::QualityMap<f64>;
pub type QualityMapF32 = qpa::QualityMap<f32>;
pub type GopSchedule = qpa::GopSchedule<f64>;

/// Banks as stored in the container file.
pub type VectorBank = bank::VectorBank<f32>;
pub type VectorBankF64 = bank::VectorBank<f64>;
pub type VectorBankSet = bank::VectorBankSet<f32>;

pub type RdPoint = bdrate::RdPoint<f64>;
pub type RdCurve = bdrate::RdCurve<f64>;
pub type RdCurveF32 = bdrate::RdCurve<f32>;

pub type RdModel = sim::RdModel<f64>;
pub type RdModelF32 = sim::RdModel<f32>;
pub type BandAllocation = sim::BandAllocation<f64>;
pub type SimulationReport = sim::SimulationReport<f64>;
