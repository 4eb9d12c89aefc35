//! Finsler geometry engine: metric families on charts, Chern connection and
//! curvature, geodesics and Jacobi fields, Busemann–Hausdorff and
//! Holmes–Thompson measures, and Monte Carlo checks of integral-curvature
//! comparison inequalities.

pub mod comparison;
pub mod connection;
pub mod error;
pub mod geodesic;
pub mod indicatrix;
pub mod jet;
pub mod measures;
pub mod models;
pub mod ode;
pub mod optimize;
pub mod quadrature;
pub mod rng;

pub use comparison::{ComparisonReport, KNormEstimate, MyersConstants};
pub use error::{FinslerError, Result};
pub use geodesic::{BallSample, GeodesicOptions, GeodesicPath};
pub use measures::{BallEstimate, MeasureKind};
pub use models::{ChartPoint, MetricModel, PerturbedBase, TangentSample};
