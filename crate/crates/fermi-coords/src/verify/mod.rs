//! Executable checks of the chart's defining identities: the four radial
//! conditions, the linear-order prediction table, slope extraction for
//! families that scale a perturbation, and the frame-coefficient recursion
//! that rebuilds the metric jet from curvature data alone.

pub mod conditions;
pub mod linear;
pub mod recursion;

pub use conditions::{check_conditions, ConditionReport, ConditionResidual};
pub use linear::{
    compare_first_order, frame_curvature_stack, linearized_compare, predict_linear_jet,
    CoefficientComparison, FamilyMember, LinearPrediction, PredictedEntry, RowClass, ScalingFit,
    SlopeComparison,
};
pub use recursion::{reassemble_metric_jet, solve_frame_coefficients, FrameCoefficients};

/// Residual bound for the four radial conditions on constructed charts.
pub const TOL_CONDITIONS: f64 = 1e-8;
/// Absolute bound for first-derivative rows of the prediction table.
pub const TOL_FIRST_ORDER: f64 = 1e-7;
/// Max coefficient deviation for the rebuilt metric jet.
pub const TOL_CLOSED_LOOP: f64 = 1e-6;
/// Curvature-vs-surface-data consistency bound.
pub const TOL_GAUSS: f64 = 1e-8;
/// Absolute fallback bound for slope comparisons near zero.
pub const TOL_SLOPE_ABS: f64 = 1e-6;
/// Relative bound for slope comparisons.
pub const TOL_SLOPE_REL: f64 = 1e-3;
/// Required fitted decay exponent of quadratic contamination.
pub const MIN_SCALING_EXPONENT: f64 = 1.8;
/// Floor used in relative deviations.
pub const REL_FLOOR: f64 = 1e-12;

/// Split a monomial exponent vector into (tangential degree, normal degree).
pub(crate) fn xu_degrees(exps: &[u8], k: usize) -> (usize, usize) {
    let m: usize = exps[..k].iter().map(|&e| e as usize).sum();
    let n: usize = exps[k..].iter().map(|&e| e as usize).sum();
    (m, n)
}

/// Expand an exponent vector over variables `lo..hi` into the explicit list
/// of variable positions, repeated per exponent, offset subtracted.
pub(crate) fn expand_indices(exps: &[u8], lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (v, &e) in exps.iter().enumerate().take(hi).skip(lo) {
        for _ in 0..e {
            out.push(v - lo);
        }
    }
    out
}

pub(crate) fn relative_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}
