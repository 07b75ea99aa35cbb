//! Harmonic functions for conditioning recurrent one-dimensional Lévy
//! processes to avoid finite point sets, bounded unions of intervals and
//! lattices, together with the clock limits and the h-transformed dynamics.

pub mod conditioned_sim;
pub mod error;
pub mod harmonic;
pub mod hitting;
pub mod levy_model;
pub mod paths;
pub mod quadrature;
pub mod report;
pub mod resolvent;

pub use error::{Error, Result};
pub use harmonic::{AvoidSet, HarmonicFn, HarmonicKind, IntervalUnion};
pub use hitting::{HittingSolution, PointSet};
pub use levy_model::{AdmissibilityReport, LevyModel, ModelKind};
pub use paths::MCConfig;
pub use resolvent::{Estimate, QuadratureConfig, ResolventValue};
