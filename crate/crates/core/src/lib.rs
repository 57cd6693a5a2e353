//! Normalized Ricci flow of rotationally symmetric, asymptotically hyperbolic
//! metrics `f(r)² dr² + r² g_sphere`, written in the area-radius gauge.
//!
//! The evolved unknown is the orbital sectional curvature `λ`, sampled on a
//! compactified radial grid. [`evolution`] integrates it; [`diagnostics`]
//! checks the trajectory against the decay envelopes the flow must obey.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod grid;
pub mod initial_data;

pub use error::{DiagnosticsError, EvolutionError, GeometryError, InitialDataError};
pub use evolution::{run, FlowState, Formulation, SolverConfig, Trajectory, Verdict};
pub use geometry::CurvatureProfile;
pub use grid::RadialGrid;
pub use initial_data::{InitialDataSpec, Regime};
