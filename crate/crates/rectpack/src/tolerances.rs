//! Central numeric tolerances, each with its origin and intended use.
//!
//! Exact quantities live in ℤ[√3] and need no tolerance; everything
//! floating-point compares against one of the constants below. Keeping them
//! in one place makes the tolerance hierarchy visible: construction error
//! (≈ machine epsilon) < solver residual < feasibility slack < bond
//! detection window.

/// Default feasibility slack: pair distances may fall short of 2 and
/// centers may cross the box frame by at most this much. Loose enough to
/// accept converged solver and compactor output (residuals ≤ 1e−12 plus
/// accumulated rounding), tight enough that no genuine overlap passes —
/// gaps in optimal packings are never this small without being contacts.
pub const DEFAULT_FEASIBILITY: f64 = 1e-9;

/// Feasibility slack for canonically constructed grid packings. Their only
/// error is rounding of `1 + (j−1)·√3` coordinates: adjacent-row center
/// distances evaluate to 2 within one unit in the last place (e.g.
/// 1.9999999999999998), so a hair of slack is required and 1e−12 is a
/// comfortable three orders above it.
pub const CONSTRUCTION: f64 = 1e-12;

/// Default bond-extraction window: center pairs within `2 + tol` and
/// centers within `tol` of a wall count as contacts. Solver and compactor
/// output place true contacts within 1e−12 of exact, while the smallest
/// genuine gaps in the packings treated here are ≳ 1e−3 (e.g. the 0.00957
/// near-contacts of the 43- and 57-circle packings): 1e−7 sits safely
/// between.
pub const DEFAULT_BOND: f64 = 1e-7;

/// Newton convergence threshold on the contact-system residual ∞-norm
/// (squared-distance and wall equations). Quadratic convergence drives the
/// residual from ~1e−7 to below this in one step, so demanding 1e−12
/// costs one extra iteration and yields coordinates accurate to ~1e−13.
pub const NEWTON_RESIDUAL: f64 = 1e-12;

/// Agreement required between the analytic Jacobian and a central
/// finite-difference estimate (step 1e−6): the FD truncation error is
/// O(step²·‖∂³f‖) ≈ 1e−12 but cancellation noise is O(ε/step) ≈ 1e−10,
/// amplified by coordinates of size ~10²; 1e−6 leaves three orders of
/// margin while still catching any wrong derivative term (those err at
/// O(1)).
pub const JACOBIAN_FD: f64 = 1e-6;

/// Angular slack (radians) in the open-half-plane rattler test. Exactly
/// opposed contacts subtend a gap of π up to rounding of `atan2`; requiring
/// the gap to exceed π by this margin keeps them classified as blocking.
/// Contact normals are accurate to ~1e−12 rad, far below this slack, while
/// genuinely free circles exceed π by macroscopic angles.
pub const HALF_PLANE_ANGLE_SLACK: f64 = 1e-7;

/// Default compactor stall threshold: a run stops once the relative
/// perimeter decrease per sweep falls below this, i.e. progress is at
/// rounding level.
pub const STALL: f64 = 1e-12;

/// Match required between a solved improvement's width reduction and the
/// tabulated δ value, and generally between solved dimensions and printed
/// reference values (which carry 11–13 digits).
pub const REFERENCE_MATCH: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchy_is_ordered() {
        // Construction noise < solver residual ≤ reference matching <
        // feasibility slack < bond window.
        assert!(f64::EPSILON < CONSTRUCTION);
        assert!(CONSTRUCTION <= NEWTON_RESIDUAL);
        assert!(NEWTON_RESIDUAL < REFERENCE_MATCH);
        assert!(REFERENCE_MATCH <= DEFAULT_FEASIBILITY);
        assert!(DEFAULT_FEASIBILITY < DEFAULT_BOND);
    }

    #[test]
    fn all_positive_and_small() {
        for t in [
            DEFAULT_FEASIBILITY,
            CONSTRUCTION,
            DEFAULT_BOND,
            NEWTON_RESIDUAL,
            JACOBIAN_FD,
            HALF_PLANE_ANGLE_SLACK,
            STALL,
            REFERENCE_MATCH,
        ] {
            assert!(t > 0.0 && t < 1e-3);
        }
    }
}
