//! Constants, width thresholds, bound formulas, the regularized reference
//! and the inequality checkers.

pub mod bounds;
pub mod checks;
pub mod constants;
pub mod reference;
pub mod report;
pub mod spectrum;

pub use bounds::*;
pub use checks::{
    check_curvature, check_smoothness_selfbounding, cocoercivity_margin, self_bounding_margin,
    smoothness_margin, weak_convexity_margin, CurvatureCheck, ViolationReport, CHECK_SLACK,
};
pub use constants::{constants, TheoryConstants};
pub use reference::{build_regularized_reference, ReferenceSummary, RegularizedReference};
pub use report::{overparam_thresholds, write_thresholds_csv, BoundReport, ReportInputs, Threshold};
pub use spectrum::{EigenMethod, Extremes};
