//! Worst-case sample-removal audits for least-squares and Huber regression.

pub mod audit;
pub mod bounds;
pub mod dataset;
pub mod error;
pub mod io;
pub mod linalg;
pub mod regression;
pub mod scalar;
pub mod simulate;

pub use audit::{AuditOptions, AuditQuery, AuditTrace, Method, Target};
pub use bounds::{BoundKind, BoundParams, BoundReport, ModelSpec, NoiseDist};
pub use dataset::{Dataset, GroupColumn};
pub use error::{Error, Result};
pub use linalg::{downdate_inverse, factor_spd, solve_spd, Matrix, SpdFactor};
pub use regression::{HuberConfig, Loss, RegressionFit};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Fit64 = RegressionFit<f64>;
pub type Fit32 = RegressionFit<f32>;
pub type Trace64 = AuditTrace<f64>;
