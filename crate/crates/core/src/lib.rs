//! Symmetry algebras of distinguished curves and the special metrics they detect.
//!
//! The crate has two halves that meet in the middle:
//!
//! * an exact, matrix-level half (`algebra`) that realises the flat-model
//!   symmetry computations: graded Lie algebras, the nested stabiliser
//!   filtration of a curve direction, and a flat-chart tangency oracle that
//!   re-derives the same answers from conformal Killing fields;
//! * a numerical half (`metric`, `curvature`, `curves`, `tractor`) that
//!   integrates geodesics and conformal circles on explicit chart metrics,
//!   measures the conformal-circle residual, and cross-checks it against
//!   tractor-frame transport.
//!
//! The `legendrean` and `cr` modules run the analogous linear-algebra checks
//! for contact Legendrean and CR geometries on ingested curvature samples.
//! `suite` bundles the whole battery behind one entry point.

pub mod algebra;
pub mod cr;
pub mod curvature;
pub mod curves;
pub mod jet;
pub mod legendrean;
pub mod metric;
pub mod rescale;
pub mod suite;
pub mod tractor;

pub use curvature::{christoffel, curvature, einstein_check, CurvaturePack};
pub use curves::{
    conformal_circle_integrate, conformal_circle_integrate_with, geodesic_integrate,
    geodesic_integrate_with, CurveState, StepControl, Trajectory,
};
pub use jet::Jet2;
pub use metric::{conformal_rescale, ChartMetric, ConformalFactor};
pub use suite::{run_all, CriterionOutcome};
pub use tractor::{
    appendix_defect, closure_defect, s_frame_circle, s_frame_geodesic, Tractor, TractorEndo,
};
