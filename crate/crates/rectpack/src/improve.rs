//! Width-reducing local modifications of holed grid packings and a damped
//! Newton solver for circle contact systems.
//!
//! A grid packing whose optimal tuple carries `v ≥ 1` holes wastes a little
//! width: the circles of one boundary-side column can be re-arranged to
//! cover the holes and lean against a wall moved inward by `δ_i`, reducing
//! the perimeter by `2δ_i` at unchanged height. Four such moves exist,
//! distinguished by how many anchor rows the relocated column must bridge:
//!
//! - `δ1` (two anchors per unit): pairs of circles wedge between the ends
//!   of two full rows two apart; `δ1 = 2 − √(2√3)` in closed form.
//! - `δ2` (three anchors): a four-circle chain with one circle kinked off
//!   the wall; closed form `2 − √3/2 − 3^{1/4}(2√3−1) / (2√(4−√3))`.
//! - `δ3` (four anchors): a six-circle chain with two kinked circles; no
//!   closed form — defined by its contact system, solved here.
//! - `δ4` (five anchors): an eight-circle chain with three kinked circles;
//!   likewise defined by its contact system.
//!
//! [`apply_improvement`] builds the modified configuration for every
//! supported tuple family, solves the resulting [`ContactSystem`] with
//! [`solve_contacts`], and validates the outcome (bond structure, height,
//! perimeter) before returning it. Tuples with `v = 2` are handled by one
//! combined solve placing both hole-covering units simultaneously, not by
//! two sequential single-hole moves.
//!
//! The solver treats circles without any declared bond as loose (rattlers):
//! they keep their initial centers and are only checked for feasibility.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::exact::Q3;
use crate::geom::{
    check_feasible, extract_bonds, is_jammed, measure, rattlers_under, BondGraph, Packing,
    Provenance, Wall,
};
use crate::restricted::{tuple_dims, tuple_perimeter, RnTuple, SQRT3_F64};
use crate::tolerances;

const SQRT3: f64 = SQRT3_F64;

/// Maximum Newton iterations before declaring divergence.
const MAX_NEWTON_ITERS: usize = 200;

/// Smallest step-halving factor tried before declaring a stall.
const MIN_LAMBDA: f64 = 1.0 / 65_536.0;

/// Relative threshold below which a Jacobian row counts as dependent on the
/// rows before it (rows are contact gradients with entries of order 1–30,
/// so 1e−8 separates exact dependency from conditioning noise).
const RANK_EPS: f64 = 1e-8;

/// Residual allowed on each declared bond of a solved packing: converged
/// squared-distance residuals below [`tolerances::NEWTON_RESIDUAL`] leave
/// per-bond errors around 1e−13, two orders below this.
const BOND_RESIDUAL: f64 = 1e-10;

/// Seed values of the four width reductions, used only to place initial
/// guesses; the authoritative values come from [`delta_value`].
const SEED_DELTA: [f64; 4] = [
    0.138790281795800802,
    0.057280650855014870,
    0.019353640467610588,
    0.004039527475903907,
];

// ---------------------------------------------------------------------------
// Improvement parameters
// ---------------------------------------------------------------------------

/// One of the four width-improvement parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaParam {
    /// Index 1–4.
    pub index: u8,
    /// The width reduction.
    pub value: f64,
    /// Closed-form expression when one exists (indices 1 and 2).
    pub closed_form: Option<String>,
}

fn delta_values() -> &'static [f64; 4] {
    static VALUES: OnceLock<[f64; 4]> = OnceLock::new();
    VALUES.get_or_init(|| {
        let d1 = 2.0 - (2.0 * SQRT3).sqrt();
        let d2 = 2.0 - 0.5 * SQRT3
            - 3.0_f64.powf(0.25) * (2.0 * SQRT3 - 1.0) / (2.0 * (4.0 - SQRT3).sqrt());
        let d3 = solve_delta(3, RnTuple::new(6, 7, 3, 0, 0, 1));
        let d4 = solve_delta(4, RnTuple::new(7, 9, 4, 0, 0, 1));
        assert!(
            d1 > d2 && d2 > d3 && d3 > d4 && d4 > 0.0,
            "width reductions must be positive and strictly decreasing: \
             {d1} {d2} {d3} {d4}"
        );
        [d1, d2, d3, d4]
    })
}

/// Solves the defining contact system of `δ_i` on its smallest carrier
/// tuple and returns the achieved width reduction. Failure here means the
/// library's own template is broken, which no caller can recover from.
fn solve_delta(i: u8, carrier: RnTuple) -> f64 {
    let layout = build_layout(&carrier, i)
        .unwrap_or_else(|| panic!("missing defining layout for delta index {i}"));
    let seed = layout.seed_packing();
    let sys = ContactSystem {
        n: seed.n,
        bonds: extract_bonds(&seed, tolerances::DEFAULT_BOND),
        free_width: true,
        free_height: false,
    };
    let solved = solve_contacts(&sys, &seed)
        .unwrap_or_else(|e| panic!("defining contact system for delta index {i} failed: {e}"));
    layout.width_regular - solved.width
}

/// The width reduction `δ_i` for `i ∈ 1..=4`. Indices 1 and 2 come from
/// closed forms; 3 and 4 are solved once from their defining contact
/// systems and cached.
///
/// # Panics
///
/// Panics if `i` is outside `1..=4`, or (for 3 and 4) if the defining
/// contact system fails to converge — a broken-build condition.
pub fn delta_value(i: u8) -> f64 {
    assert!((1..=4).contains(&i), "delta index must be 1..=4, got {i}");
    delta_values()[i as usize - 1]
}

/// The full parameter record for `δ_i`, including its closed form when one
/// exists.
pub fn delta_param(i: u8) -> DeltaParam {
    let closed_form = match i {
        1 => Some("2 - sqrt(2*sqrt(3))".to_string()),
        2 => Some("2 - sqrt(3)/2 - 3^(1/4)*(2*sqrt(3)-1)/(2*sqrt(4-sqrt(3)))".to_string()),
        _ => None,
    };
    DeltaParam { index: i, value: delta_value(i), closed_form }
}

/// Perimeter after applying the `δ_i` move to a packing of exact perimeter
/// `p`: both vertical box sides move by `δ_i`, so `P − 2δ_i`.
pub fn perimeter_after_improvement(p: Q3, i: u8) -> f64 {
    p.to_f64() - 2.0 * delta_value(i)
}

// ---------------------------------------------------------------------------
// Contact systems
// ---------------------------------------------------------------------------

/// A system of tangency and wall-contact equations over circle centers and
/// (optionally) the rectangle dimensions.
///
/// The unknowns are the centers of every circle that appears in at least
/// one bond, plus the width and/or height when marked free; circles with no
/// bonds are loose and keep their initial centers. The wall entries of
/// `bonds` are the fixed constraints pinning coordinates to the box frame.
/// Unknown ordering is: all x coordinates (ascending circle index), all y
/// coordinates, then width, then height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactSystem {
    /// Number of circles in the packing the system refers to.
    pub n: u32,
    /// Tangent pairs (`‖c_i − c_j‖ = 2`) and wall contacts.
    pub bonds: BondGraph,
    /// Whether the rectangle width is an unknown.
    pub free_width: bool,
    /// Whether the rectangle height is an unknown.
    pub free_height: bool,
}

/// Why a contact solve failed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    /// The Jacobian at the final iterate has rank below the unknown count:
    /// the system does not pin every unknown. `dependent` lists the
    /// constraints that are linear combinations of earlier ones; an empty
    /// list means the system is simply underconstrained.
    #[error(
        "singular contact system: rank {rank} < {unknowns} unknowns; \
         dependent constraints: [{}]",
        dependent.join(", ")
    )]
    Singular { rank: usize, unknowns: usize, dependent: Vec<String> },
    /// Newton failed to reach the residual target.
    #[error("contact solve diverged after {iterations} iterations (last residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },
    /// The converged configuration violates feasibility or a declared bond.
    #[error("solved configuration is infeasible: {0}")]
    Infeasible(String),
    /// The system description itself is malformed.
    #[error("malformed contact system: {0}")]
    BadSystem(String),
}

/// Index bookkeeping for one solve: which circles move and where each
/// coordinate lives in the unknown vector.
struct SystemShape {
    movers: Vec<usize>,
    /// Circle index → mover slot (`usize::MAX` for non-movers).
    slot: Vec<usize>,
    unknowns: usize,
    w_slot: Option<usize>,
    h_slot: Option<usize>,
}

fn system_shape(sys: &ContactSystem) -> Result<SystemShape, SolveError> {
    let n = sys.n as usize;
    let mut bonded = BTreeSet::new();
    let mut seen_pairs = BTreeSet::new();
    for &(a, b) in &sys.bonds.pairs {
        if a >= n || b >= n {
            return Err(SolveError::BadSystem(format!(
                "pair ({a}, {b}) references a circle out of range 0..{n}"
            )));
        }
        if a == b {
            return Err(SolveError::BadSystem(format!("pair ({a}, {b}) bonds a circle to itself")));
        }
        let key = (a.min(b), a.max(b));
        if !seen_pairs.insert(key) {
            return Err(SolveError::BadSystem(format!("duplicate pair ({a}, {b})")));
        }
        bonded.insert(a);
        bonded.insert(b);
    }
    let mut seen_walls = BTreeSet::new();
    for &(c, wall) in &sys.bonds.walls {
        if c >= n {
            return Err(SolveError::BadSystem(format!(
                "wall contact ({c}, {wall}) references a circle out of range 0..{n}"
            )));
        }
        if !seen_walls.insert((c, wall)) {
            return Err(SolveError::BadSystem(format!("duplicate wall contact ({c}, {wall})")));
        }
        bonded.insert(c);
    }
    if bonded.is_empty() {
        return Err(SolveError::BadSystem("system has no bonds".to_string()));
    }

    let movers: Vec<usize> = bonded.into_iter().collect();
    let mut slot = vec![usize::MAX; n];
    for (s, &c) in movers.iter().enumerate() {
        slot[c] = s;
    }
    let nm = movers.len();
    let mut unknowns = 2 * nm;
    let w_slot = sys.free_width.then(|| {
        let s = unknowns;
        unknowns += 1;
        s
    });
    let h_slot = sys.free_height.then(|| {
        let s = unknowns;
        unknowns += 1;
        s
    });
    Ok(SystemShape { movers, slot, unknowns, w_slot, h_slot })
}

/// Human-readable labels of the equations, in equation order.
fn equation_labels(sys: &ContactSystem) -> Vec<String> {
    let mut labels: Vec<String> =
        sys.bonds.pairs.iter().map(|&(a, b)| format!("pair({a},{b})")).collect();
    labels.extend(sys.bonds.walls.iter().map(|&(c, w)| format!("wall({c},{w})")));
    labels
}

/// Evaluates the residual vector and (optionally) the analytic Jacobian at
/// unknown vector `u`. Equations are the pairs then the wall contacts of
/// the bond graph, in their stored order.
fn eval_system(
    sys: &ContactSystem,
    shape: &SystemShape,
    fixed_w: f64,
    fixed_h: f64,
    u: &DVector<f64>,
    want_jacobian: bool,
) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let nm = shape.movers.len();
    let width = shape.w_slot.map_or(fixed_w, |s| u[s]);
    let height = shape.h_slot.map_or(fixed_h, |s| u[s]);
    let m = sys.bonds.pairs.len() + sys.bonds.walls.len();
    let mut f = DVector::zeros(m);
    let mut jac = want_jacobian.then(|| DMatrix::zeros(m, shape.unknowns));

    for (row, &(a, b)) in sys.bonds.pairs.iter().enumerate() {
        let (sa, sb) = (shape.slot[a], shape.slot[b]);
        let dx = u[sa] - u[sb];
        let dy = u[nm + sa] - u[nm + sb];
        f[row] = dx * dx + dy * dy - 4.0;
        if let Some(j) = jac.as_mut() {
            j[(row, sa)] = 2.0 * dx;
            j[(row, sb)] = -2.0 * dx;
            j[(row, nm + sa)] = 2.0 * dy;
            j[(row, nm + sb)] = -2.0 * dy;
        }
    }
    let base = sys.bonds.pairs.len();
    for (idx, &(c, wall)) in sys.bonds.walls.iter().enumerate() {
        let row = base + idx;
        let s = shape.slot[c];
        match wall {
            Wall::Left => {
                f[row] = u[s] - 1.0;
                if let Some(j) = jac.as_mut() {
                    j[(row, s)] = 1.0;
                }
            }
            Wall::Right => {
                f[row] = u[s] - (width - 1.0);
                if let Some(j) = jac.as_mut() {
                    j[(row, s)] = 1.0;
                    if let Some(ws) = shape.w_slot {
                        j[(row, ws)] = -1.0;
                    }
                }
            }
            Wall::Bottom => {
                f[row] = u[nm + s] - 1.0;
                if let Some(j) = jac.as_mut() {
                    j[(row, nm + s)] = 1.0;
                }
            }
            Wall::Top => {
                f[row] = u[nm + s] - (height - 1.0);
                if let Some(j) = jac.as_mut() {
                    j[(row, nm + s)] = 1.0;
                    if let Some(hs) = shape.h_slot {
                        j[(row, hs)] = -1.0;
                    }
                }
            }
        }
    }
    (f, jac)
}

/// Rank of the Jacobian's row space and the indices of rows dependent on
/// earlier rows, by modified Gram–Schmidt with one re-orthogonalization.
fn dependent_rows(j: &DMatrix<f64>) -> (usize, Vec<usize>) {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for r in 0..j.nrows() {
        let mut v: DVector<f64> = j.row(r).transpose();
        let orig = v.norm();
        if orig == 0.0 {
            dependent.push(r);
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
        }
        let nv = v.norm();
        if nv <= RANK_EPS * orig {
            dependent.push(r);
        } else {
            basis.push(v / nv);
        }
    }
    (basis.len(), dependent)
}

fn singular_error(sys: &ContactSystem, shape: &SystemShape, j: &DMatrix<f64>) -> SolveError {
    let (rank, dep_rows) = dependent_rows(j);
    let labels = equation_labels(sys);
    SolveError::Singular {
        rank,
        unknowns: shape.unknowns,
        dependent: dep_rows.into_iter().map(|r| labels[r].clone()).collect(),
    }
}

/// Solves a contact system by damped Gauss–Newton iteration from `initial`.
///
/// Each step solves the linearized system in least-squares sense (SVD), and
/// the step length is halved until the residual norm decreases (Armijo
/// condition), down to `2⁻¹⁶`. Convergence requires residual ∞-norm below
/// [`tolerances::NEWTON_RESIDUAL`] within 200 iterations. At convergence
/// the Jacobian must have full column rank (an isostatic or over-braced
/// system); rank deficiency is reported as [`SolveError::Singular`] with
/// the dependent constraint subset. The returned packing carries the
/// declared bonds, is feasibility-checked at
/// [`tolerances::DEFAULT_FEASIBILITY`], and satisfies every declared bond
/// to within `1e−10`.
///
/// Circles not mentioned by any bond keep their initial centers.
pub fn solve_contacts(sys: &ContactSystem, initial: &Packing) -> Result<Packing, SolveError> {
    if sys.n != initial.n || initial.centers.len() != sys.n as usize {
        return Err(SolveError::BadSystem(format!(
            "system is for n={} but initial packing has n={} with {} centers",
            sys.n,
            initial.n,
            initial.centers.len()
        )));
    }
    if !(initial.width.is_finite() && initial.width > 0.0)
        || !(initial.height.is_finite() && initial.height > 0.0)
    {
        return Err(SolveError::BadSystem("initial dimensions must be positive".to_string()));
    }
    let shape = system_shape(sys)?;
    let nm = shape.movers.len();
    for (s, &c) in shape.movers.iter().enumerate() {
        let [x, y] = initial.centers[c];
        if !(x.is_finite() && y.is_finite()) {
            return Err(SolveError::BadSystem(format!("initial center {s} of circle {c} is not finite")));
        }
    }

    let mut u = DVector::zeros(shape.unknowns);
    for (s, &c) in shape.movers.iter().enumerate() {
        u[s] = initial.centers[c][0];
        u[nm + s] = initial.centers[c][1];
    }
    if let Some(ws) = shape.w_slot {
        u[ws] = initial.width;
    }
    if let Some(hs) = shape.h_slot {
        u[hs] = initial.height;
    }

    let mut last_residual = f64::INFINITY;
    for iter in 0..MAX_NEWTON_ITERS {
        let (f, jac) = eval_system(sys, &shape, initial.width, initial.height, &u, true);
        let jac = jac.expect("jacobian requested");
        let residual = f.amax();
        last_residual = residual;
        if residual < tolerances::NEWTON_RESIDUAL {
            let (rank, _) = dependent_rows(&jac);
            if rank < shape.unknowns {
                return Err(singular_error(sys, &shape, &jac));
            }
            return assemble_solution(sys, &shape, initial, &u);
        }

        let svd = jac.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let cutoff = 1e-14 * sigma_max.max(1.0);
        let step = match svd.solve(&(-&f), cutoff) {
            Ok(s) => s,
            Err(e) => return Err(SolveError::BadSystem(format!("least-squares step failed: {e}"))),
        };

        let merit0 = f.norm_squared();
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= MIN_LAMBDA {
            let trial = &u + &step * lambda;
            let (ft, _) = eval_system(sys, &shape, initial.width, initial.height, &trial, false);
            if ft.norm_squared() <= merit0 * (1.0 - 1e-4 * lambda) {
                u = trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // No step length makes progress: either the linearization is
            // rank-deficient (mechanism) or the equations are inconsistent
            // and we sit at a nonzero least-squares floor.
            let (rank, _) = dependent_rows(&jac);
            if rank < shape.unknowns {
                return Err(singular_error(sys, &shape, &jac));
            }
            return Err(SolveError::Diverged { iterations: iter + 1, residual });
        }
    }
    Err(SolveError::Diverged { iterations: MAX_NEWTON_ITERS, residual: last_residual })
}

fn assemble_solution(
    sys: &ContactSystem,
    shape: &SystemShape,
    initial: &Packing,
    u: &DVector<f64>,
) -> Result<Packing, SolveError> {
    let nm = shape.movers.len();
    let mut out = initial.clone();
    for (s, &c) in shape.movers.iter().enumerate() {
        out.centers[c] = [u[s], u[nm + s]];
    }
    if let Some(ws) = shape.w_slot {
        out.width = u[ws];
    }
    if let Some(hs) = shape.h_slot {
        out.height = u[hs];
    }
    out.bonds = Some(sys.bonds.clone());
    out.provenance = Provenance::Solved;

    for &(a, b) in &sys.bonds.pairs {
        let dx = out.centers[a][0] - out.centers[b][0];
        let dy = out.centers[a][1] - out.centers[b][1];
        let err = (dx.hypot(dy) - 2.0).abs();
        if err > BOND_RESIDUAL {
            return Err(SolveError::Infeasible(format!(
                "declared pair ({a},{b}) misses tangency by {err:.3e}"
            )));
        }
    }
    for &(c, wall) in &sys.bonds.walls {
        let [x, y] = out.centers[c];
        let gap = match wall {
            Wall::Left => x - 1.0,
            Wall::Right => (out.width - 1.0) - x,
            Wall::Bottom => y - 1.0,
            Wall::Top => (out.height - 1.0) - y,
        };
        if gap.abs() > BOND_RESIDUAL {
            return Err(SolveError::Infeasible(format!(
                "declared wall contact ({c},{wall}) misses by {:.3e}",
                gap.abs()
            )));
        }
    }

    let report = check_feasible(&out, tolerances::DEFAULT_FEASIBILITY);
    if !report.ok {
        let mut parts = Vec::new();
        if let Some(p) = report.pair_violations.first() {
            parts.push(format!(
                "{} overlapping pairs (first: ({}, {}) at distance {:.12})",
                report.pair_violations.len(),
                p.i,
                p.j,
                p.distance
            ));
        }
        if let Some(wv) = report.wall_violations.first() {
            parts.push(format!(
                "{} wall violations (first: circle {} beyond {} wall by {:.3e})",
                report.wall_violations.len(),
                wv.i,
                wv.wall,
                wv.depth
            ));
        }
        if !report.nonfinite.is_empty() {
            parts.push(format!("non-finite centers: {:?}", report.nonfinite));
        }
        return Err(SolveError::Infeasible(parts.join("; ")));
    }
    Ok(out)
}

/// Maximum relative disagreement between the analytic Jacobian and a
/// central finite-difference estimate (step 1e−6) at the configuration
/// `at`, over all matrix entries. Used to validate the derivative code.
pub fn jacobian_fd_max_rel_error(sys: &ContactSystem, at: &Packing) -> Result<f64, SolveError> {
    let shape = system_shape(sys)?;
    let nm = shape.movers.len();
    let mut u = DVector::zeros(shape.unknowns);
    for (s, &c) in shape.movers.iter().enumerate() {
        u[s] = at.centers[c][0];
        u[nm + s] = at.centers[c][1];
    }
    if let Some(ws) = shape.w_slot {
        u[ws] = at.width;
    }
    if let Some(hs) = shape.h_slot {
        u[hs] = at.height;
    }
    let (_, jac) = eval_system(sys, &shape, at.width, at.height, &u, true);
    let jac = jac.expect("jacobian requested");

    let step = 1e-6;
    let mut worst = 0.0_f64;
    for col in 0..shape.unknowns {
        let mut up = u.clone();
        up[col] += step;
        let mut dn = u.clone();
        dn[col] -= step;
        let (fu, _) = eval_system(sys, &shape, at.width, at.height, &up, false);
        let (fd, _) = eval_system(sys, &shape, at.width, at.height, &dn, false);
        for row in 0..fu.len() {
            let fd_est = (fu[row] - fd[row]) / (2.0 * step);
            let a = jac[(row, col)];
            let rel = (a - fd_est).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Improvement layouts
// ---------------------------------------------------------------------------

/// Why an improvement could not be applied.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImproveError {
    /// The tuple/index combination has no supported modification template.
    #[error("no width-improvement template for {tuple:?} with delta index {index}: {reason}")]
    Unsupported { tuple: RnTuple, index: u8, reason: String },
    /// The contact system of the modification failed to solve.
    #[error("contact solve failed: {0}")]
    Solve(#[from] SolveError),
    /// The solved configuration does not validate against the template.
    #[error("solved improvement failed validation: {0}")]
    Validation(String),
    /// No transcribed bond diagram ships for this `n`.
    #[error("no transcribed irregular packing for n = {0}")]
    NoTranscription(u32),
}

/// A fully placed initial configuration for one improvement move: trimmed
/// grid block, re-solved column circles at seed positions, and loose
/// circles at their resting positions.
struct Layout {
    n: u32,
    /// Initial box width consistent with the seed coordinates (the regular
    /// width minus the seed value of δ).
    width_seed: f64,
    /// Width of the unimproved regular box (`2w` or `2w+1`).
    width_regular: f64,
    height: f64,
    centers: Vec<[f64; 2]>,
    /// Circles the strict unilateral test reports as free to move: the
    /// bond-less rattlers (fixed during the solve) plus any bistable
    /// two-contact circle (resting on exactly two tangencies, wedged but
    /// able to leave both).
    loose: Vec<usize>,
}

impl Layout {
    fn seed_packing(&self) -> Packing {
        Packing {
            n: self.n,
            width: self.width_seed,
            height: self.height,
            centers: self.centers.clone(),
            bonds: None,
            provenance: Provenance::Constructed,
        }
    }
}

/// Grid block with the improvement column removed, for tuples with
/// alternating shortened rows (`h− = ⌊h/2⌋`, shortened rows odd from 0):
/// even rows keep `w−1` circles at `x = 1, 3, …, 2w−3`; odd rows keep
/// `w−2` at `x = 2, …, 2w−4`.
fn block_alternating(w: u32, h: u32) -> Vec<[f64; 2]> {
    let mut cs = Vec::new();
    for j in 0..h {
        let y = 1.0 + j as f64 * SQRT3;
        let (x0, count) = if j % 2 == 0 { (1.0, w - 1) } else { (2.0, w - 2) };
        cs.extend((0..count).map(|i| [x0 + 2.0 * i as f64, y]));
    }
    cs
}

/// Grid block with the improvement column removed, for nested full rows
/// (`h− = 0`, box `2w+1` wide): every row keeps `w−1` circles, even rows
/// at `x = 1, …, 2w−3`, odd rows at `x = 2, …, 2w−2`.
fn block_nested(w: u32, h: u32) -> Vec<[f64; 2]> {
    let mut cs = Vec::new();
    for j in 0..h {
        let y = 1.0 + j as f64 * SQRT3;
        let x0 = if j % 2 == 0 { 1.0 } else { 2.0 };
        cs.extend((0..w - 1).map(|i| [x0 + 2.0 * i as f64, y]));
    }
    cs
}

/// Four-circle δ2 chain spanning anchor rows `j0, j0+2, j0+4`, relative to
/// the anchor column base `(xcol, ybase)`. In the `mirror = false` form the
/// kinked circle touches the middle anchor from below; `mirror = true`
/// reflects the chain so the kink touches from above. Both keep the kinked
/// circle's contact with its inner (anchor-column) neighbor; the unmirrored
/// form is used wherever the geometry allows either.
fn chain_delta2(xcol: f64, ybase: f64, mirror: bool) -> Vec<[f64; 2]> {
    let wo = 2.0 - SEED_DELTA[1];
    let a = (4.0 - wo * wo).sqrt();
    let k = (4.0 - (wo - SQRT3) * (wo - SQRT3)).sqrt();
    let offsets: [[f64; 2]; 4] = if !mirror {
        [
            [wo, a],
            [SQRT3, 2.0 * SQRT3 - 1.0],
            [wo, 2.0 * SQRT3 - 1.0 + k],
            [wo, 4.0 * SQRT3 - a],
        ]
    } else {
        [
            [wo, a],
            [wo, a + 2.0],
            [SQRT3, 2.0 * SQRT3 + 1.0],
            [wo, 4.0 * SQRT3 - a],
        ]
    };
    offsets.iter().map(|[dx, dy]| [xcol + dx, ybase + dy]).collect()
}

/// Six-circle δ3 chain spanning anchor rows `j0 … j0+6`. The two kinked
/// circles (second and fifth) have no closed-form seed; their offsets are
/// frozen from a converged solve and refined by Newton.
fn chain_delta3(xcol: f64, ybase: f64) -> Vec<[f64; 2]> {
    let wo = 2.0 - SEED_DELTA[2];
    let a = (4.0 - wo * wo).sqrt();
    let (kx, ky) = (1.579199069907993, 2.236856612050868);
    let offsets: [[f64; 2]; 6] = [
        [wo, a],
        [kx, ky],
        [wo, 3.0 * SQRT3 - 1.0],
        [wo, 3.0 * SQRT3 + 1.0],
        [kx, 6.0 * SQRT3 - ky],
        [wo, 6.0 * SQRT3 - a],
    ];
    offsets.iter().map(|[dx, dy]| [xcol + dx, ybase + dy]).collect()
}

/// Eight-circle δ4 chain spanning anchor rows `j0 … j0+8`. The middle
/// kinked circle sits at the exact lattice tangency `(√3, 4√3+1)`; it has a
/// mirror-equivalent position below the center line, canonicalized to the
/// upper one (keeping contact with the wall circle above it).
fn chain_delta4(xcol: f64, ybase: f64) -> Vec<[f64; 2]> {
    let wo = 2.0 - SEED_DELTA[3];
    let a = (4.0 - wo * wo).sqrt();
    let (kx, ky) = (1.400566123494028, 2.036371061524465);
    let wy = 3.945691770348171;
    let offsets: [[f64; 2]; 8] = [
        [wo, a],
        [kx, ky],
        [wo, wy],
        [wo, wy + 2.0],
        [SQRT3, 4.0 * SQRT3 + 1.0],
        [wo, 8.0 * SQRT3 - wy],
        [kx, 8.0 * SQRT3 - ky],
        [wo, 8.0 * SQRT3 - a],
    ];
    offsets.iter().map(|[dx, dy]| [xcol + dx, ybase + dy]).collect()
}

/// Two-circle δ1 bridge wedged between the ends of anchor rows `j0` and
/// `j0+2`, relative to `(xcol, y(j0))`. Exact closed form: both circles sit
/// on the moved wall at `x = xcol + √(2√3)`.
fn bridge_delta1(xcol: f64, yrow: f64) -> Vec<[f64; 2]> {
    let q = (2.0 * SQRT3).sqrt();
    vec![[xcol + q, yrow + SQRT3 - 1.0], [xcol + q, yrow + SQRT3 + 1.0]]
}

/// Builds the seed layout for `apply_improvement(t, i)`, or `None` when
/// the tuple/index pair is outside the supported catalog.
fn build_layout(t: &RnTuple, i: u8) -> Option<Layout> {
    if t.s != 0 || t.sminus != 0 {
        return None;
    }
    let (w, h, hm, v) = (t.w, t.h, t.hminus, t.v);
    let k = h / 2;
    let xa = (2 * w - 3) as f64; // anchor column of alternating blocks
    let xs = (2 * w - 2) as f64; // anchor column (odd rows) of nested blocks
    let ybase = 1.0;
    let y = |j: u32| 1.0 + j as f64 * SQRT3;
    let height = tuple_dims(t).1.to_f64();
    let wreg = tuple_dims(t).0.to_f64();

    // Bistable two-contact circles (reported loose besides the rattlers).
    let mut bistable: Vec<usize> = Vec::new();
    let (mut centers, seed_delta, rattler_seeds): (Vec<[f64; 2]>, f64, Vec<[f64; 2]>) =
        match (i, h, hm, v) {
            // δ1: pairs of bridge circles between anchor rows (4b, 4b+2),
            // with a loose circle in each inter-bridge slot.
            (1, _, _, _)
                if h % 2 == 1 && h >= 3 && hm == k && k % 2 == 1 && v == (k + 1) / 2 && w >= 3 =>
            {
                let mut cs = block_alternating(w, h);
                for b in 0..v {
                    cs.extend(bridge_delta1(xa, y(4 * b)));
                }
                let loose = (0..v.saturating_sub(1))
                    .map(|b| [xa + 1.542125571658, y(4 * b + 3)])
                    .collect();
                (cs, SEED_DELTA[0], loose)
            }
            // δ2 on five alternating rows (three anchors): plain chain.
            (2, 5, 2, 1) if w >= 4 => {
                let mut cs = block_alternating(w, h);
                cs.extend(chain_delta2(xa, ybase, false));
                (cs, SEED_DELTA[1], vec![])
            }
            // δ2 on six alternating rows: anchors are rows 0, 2, 4; the
            // mirrored chain leaves room for one loose circle at the top.
            (2, 6, 3, 1) if w >= 4 => {
                let mut cs = block_alternating(w, h);
                cs.extend(chain_delta2(xa, ybase, true));
                (cs, SEED_DELTA[1], vec![[xa + 1.419879784550, height - 1.136126041011]])
            }
            // δ2 on seven nested rows: anchors are the odd-row ends 1, 3,
            // 5; loose circles rest in the row-0 and row-6 corners.
            (2, 7, 0, 1) if w >= 4 => {
                let mut cs = block_nested(w, h);
                cs.extend(chain_delta2(xs, y(1), true));
                let loose = vec![
                    [xs + 1.419929339111, 1.136144894653],
                    [xs + 1.419929339111, height - 1.136144894653],
                ];
                (cs, SEED_DELTA[1], loose)
            }
            // δ2 with two holes on nine alternating rows: a chain over
            // anchors 0, 2, 4 plus a kinked pair over anchors 6, 8, with a
            // loose circle between them. Both units are placed by one
            // combined solve. The upper pair's kink rests on exactly two
            // tangencies (the anchor and its partner): it is wedged but
            // bistable — it could swing to the mirror side of the anchor —
            // so the strict rattler test reports it loose as well.
            (2, 9, 4, 2) if w >= 4 => {
                let mut cs = block_alternating(w, h);
                cs.extend(chain_delta2(xa, ybase, false));
                let wo = 2.0 - SEED_DELTA[1];
                let a = (4.0 - wo * wo).sqrt();
                bistable.push(cs.len());
                cs.push([xa + SQRT3, 6.0 * SQRT3 + 2.0]); // kink above anchor row 6
                cs.push([xa + wo, 1.0 + 8.0 * SQRT3 - a]); // wall circle under anchor row 8
                (cs, SEED_DELTA[1], vec![[xa + 1.627802831164, 9.746371545406]])
            }
            // δ3 on seven alternating rows (four anchors): plain chain;
            // with an eighth (shortened) row above, one loose circle rests
            // in the top corner.
            (3, 7, 3, 1) | (3, 8, 4, 1) if w >= 4 => {
                let mut cs = block_alternating(w, h);
                cs.extend(chain_delta3(xa, ybase));
                let loose = if h == 8 {
                    vec![[xa + 1.242294638874, 13.051567794806]]
                } else {
                    vec![]
                };
                (cs, SEED_DELTA[2], loose)
            }
            // δ3 on nested rows: the chain anchors on odd-row ends 1–7;
            // loose circles rest in the even-row corners (bottom, and also
            // top when h = 9).
            (3, 8, 0, 1) | (3, 9, 0, 1) if w >= 4 => {
                let mut cs = block_nested(w, h);
                cs.extend(chain_delta3(xs, y(1)));
                let mut loose = vec![[xs + 1.242294638881, 1.072787858178]];
                if h == 9 {
                    loose.push([xs + 1.242294638881, height - 1.072787858178]);
                }
                (cs, SEED_DELTA[2], loose)
            }
            // δ4 on nine alternating rows (five anchors): the full chain.
            (4, 9, 4, 1) if w >= 4 => {
                let mut cs = block_alternating(w, h);
                cs.extend(chain_delta4(xa, ybase));
                (cs, SEED_DELTA[3], vec![])
            }
            _ => return None,
        };

    let mut loose = bistable;
    for seed in rattler_seeds {
        loose.push(centers.len());
        centers.push(seed);
    }
    loose.sort_unstable();
    let n = t.encoded_n().expect("validated tuple");
    debug_assert_eq!(centers.len() as u32, n, "layout circle count for {t:?}");
    Some(Layout {
        n,
        width_seed: wreg - seed_delta,
        width_regular: wreg,
        height,
        centers,
        loose,
    })
}

/// Applies the `δ_i` width improvement to tuple `t`: removes the
/// boundary-side column, re-places its circles (covering the holes) as the
/// appropriate chain against a wall moved inward by `δ_i`, solves the
/// resulting contact system, and validates the outcome.
///
/// Supported are the hole-carrying hexagonal families (alternating rows
/// `h− = ⌊h/2⌋` with `h ∈ {3, 5, 6, 7, 8, 9}`, nested rows `h− = 0` with
/// `h ∈ {7, 8, 9}`) with the δ index matching the family's anchor count;
/// anything else reports [`ImproveError::Unsupported`].
///
/// The returned packing has the same height as the tuple's box, width
/// reduced by `δ_i`, perimeter `tuple_perimeter(t) − 2δ_i` to 1e−9, and its
/// extracted bond graph equal to the declared one.
pub fn apply_improvement(t: &RnTuple, i: u8) -> Result<Packing, ImproveError> {
    let unsupported = |reason: &str| ImproveError::Unsupported {
        tuple: *t,
        index: i,
        reason: reason.to_string(),
    };
    if !(1..=4).contains(&i) {
        return Err(unsupported("delta index must be 1..=4"));
    }
    let Some(n) = t.encoded_n() else {
        return Err(unsupported("tuple encodes no positive circle count"));
    };
    if !t.is_valid_for(n) {
        return Err(unsupported("tuple violates the family constraints"));
    }
    if t.v == 0 {
        return Err(unsupported("tuple has no holes to absorb"));
    }
    let Some(layout) = build_layout(t, i) else {
        return Err(unsupported(
            "no template: supported are alternating-row tuples (w ≥ 3–4, s = 0) with \
             (h, h−, v, i) in {(2k+1, k, (k+1)/2, 1) k odd; (5,2,1,2); (6,3,1,2); (9,4,2,2); \
             (7,3,1,3); (8,4,1,3); (9,4,1,4)} and nested-row tuples with (7,0,1,2), \
             (8,0,1,3), (9,0,1,3)",
        ));
    };

    let seed = layout.seed_packing();
    let declared = extract_bonds(&seed, tolerances::DEFAULT_BOND);
    let sys = ContactSystem {
        n,
        bonds: declared.clone(),
        free_width: true,
        free_height: false,
    };
    let mut solved = solve_contacts(&sys, &seed)?;
    solved.provenance = Provenance::Improved;

    // The bond structure must survive the refinement exactly.
    let extracted = extract_bonds(&solved, tolerances::DEFAULT_BOND);
    if extracted != declared {
        return Err(ImproveError::Validation(format!(
            "bond structure changed during solve: declared {} pairs / {} wall contacts, \
             extracted {} / {}",
            declared.pairs.len(),
            declared.walls.len(),
            extracted.pairs.len(),
            extracted.walls.len()
        )));
    }
    // Exactly the intended circles are loose (rattlers plus bistables).
    let loose = rattlers_under(&solved, &declared);
    if loose != layout.loose {
        return Err(ImproveError::Validation(format!(
            "loose circles {loose:?} differ from intended {:?}",
            layout.loose
        )));
    }
    // Height is untouched; width shrank by δ_i; perimeter matches.
    if (solved.height - layout.height).abs() > tolerances::CONSTRUCTION {
        return Err(ImproveError::Validation("height changed".to_string()));
    }
    let delta_achieved = layout.width_regular - solved.width;
    let delta = delta_value(i);
    if (delta_achieved - delta).abs() > tolerances::REFERENCE_MATCH {
        return Err(ImproveError::Validation(format!(
            "width reduction {delta_achieved:.15} differs from delta {delta:.15}"
        )));
    }
    let target = perimeter_after_improvement(tuple_perimeter(t), i);
    let got = measure(&solved).perimeter;
    if (got - target).abs() > tolerances::REFERENCE_MATCH {
        return Err(ImproveError::Validation(format!(
            "perimeter {got:.15} differs from expected {target:.15}"
        )));
    }
    let jam = is_jammed(&solved, tolerances::DEFAULT_BOND);
    if !jam.jammed {
        return Err(ImproveError::Validation(format!(
            "improved packing is not jammed: unsupported walls {:?}",
            jam.unsupported_walls
        )));
    }
    Ok(solved)
}

// ---------------------------------------------------------------------------
// Transcribed irregular packings
// ---------------------------------------------------------------------------

/// A transcribed bond diagram of one of the five irregular record packings,
/// together with the seed layout its contact system is solved from.
///
/// Circle indices run top-to-bottom, left-to-right over the seed layout.
/// The diagram distinguishes true contacts (bonds) from apparent ones:
/// every entry of the non-contact lists looks tangent in the layout but
/// must come out of the solve with a strictly positive gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrregularSpec {
    pub n: u32,
    /// Seed rectangle and centers (rounded coordinates) carrying the
    /// transcribed bond graph; the contact solve refines everything but
    /// the rattlers.
    pub seed: Packing,
    /// Circles with no bonds at all; they keep their seed positions, which
    /// center them inside their cages.
    pub rattlers: Vec<usize>,
    /// Apparent wall contacts declared open.
    pub non_contact_walls: Vec<(usize, Wall)>,
    /// Apparent circle–circle contacts declared open.
    pub non_contact_pairs: Vec<(usize, usize)>,
}

/// The `n` values whose record packing is irregular (not reachable by any
/// width-improvement of a grid packing) and ships as a transcribed diagram.
pub fn irregular_ns() -> &'static [u32] {
    &[13, 21, 31, 43, 57]
}

/// Loads the transcribed diagram for `n`, if one ships with the crate.
pub fn irregular_spec(n: u32) -> Option<IrregularSpec> {
    let raw = match n {
        13 => include_str!("../data/irregular_13.json"),
        _ => return None,
    };
    Some(serde_json::from_str(raw).expect("shipped transcription data parses"))
}

/// Distance from circle `i`'s surface to a wall (positive = open gap).
fn wall_gap(p: &Packing, i: usize, wall: Wall) -> f64 {
    let c = p.centers[i];
    match wall {
        Wall::Left => c[0] - 1.0,
        Wall::Right => p.width - 1.0 - c[0],
        Wall::Bottom => c[1] - 1.0,
        Wall::Top => p.height - 1.0 - c[1],
    }
}

/// Reconstructs the irregular record packing for `n` by solving its
/// transcribed contact system with both dimensions free, then validates
/// the result: feasible at the default tolerance, every declared
/// non-contact strictly open, every rattler strictly inside its cage, and
/// the whole packing jammed up to the rattlers.
pub fn reconstruct_irregular(n: u32) -> Result<Packing, ImproveError> {
    let spec = irregular_spec(n).ok_or(ImproveError::NoTranscription(n))?;
    let bonds = spec.seed.bonds.clone().expect("transcribed diagram carries bonds");
    let sys =
        ContactSystem { n: spec.n, bonds: bonds.clone(), free_width: true, free_height: true };
    let mut solved = solve_contacts(&sys, &spec.seed)?;

    let report = check_feasible(&solved, tolerances::DEFAULT_FEASIBILITY);
    if !report.ok {
        return Err(ImproveError::Validation(format!(
            "reconstruction of n={n} infeasible: {} pair and {} wall violations",
            report.pair_violations.len(),
            report.wall_violations.len()
        )));
    }
    for &(i, wall) in &spec.non_contact_walls {
        let gap = wall_gap(&solved, i, wall);
        if gap <= 0.0 {
            return Err(ImproveError::Validation(format!(
                "declared open contact (circle {i}, {wall}) closed: gap {gap:.3e}"
            )));
        }
    }
    for &(i, j) in &spec.non_contact_pairs {
        let (a, b) = (solved.centers[i], solved.centers[j]);
        let gap = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() - 2.0;
        if gap <= 0.0 {
            return Err(ImproveError::Validation(format!(
                "declared open contact (circles {i}, {j}) closed: gap {gap:.3e}"
            )));
        }
    }
    for &r in &spec.rattlers {
        let mut slack = Wall::ALL
            .into_iter()
            .map(|w| wall_gap(&solved, r, w))
            .fold(f64::INFINITY, f64::min);
        for (k, c) in solved.centers.iter().enumerate() {
            if k != r {
                let d = (c[0] - solved.centers[r][0]).hypot(c[1] - solved.centers[r][1]);
                slack = slack.min(d - 2.0);
            }
        }
        if slack <= 0.0 {
            return Err(ImproveError::Validation(format!(
                "rattler {r} is not strictly inside its cage: slack {slack:.3e}"
            )));
        }
    }
    let jam = is_jammed(&solved, tolerances::DEFAULT_BOND);
    if !jam.jammed {
        return Err(ImproveError::Validation(format!(
            "reconstruction of n={n} is not jammed: unsupported walls {:?}",
            jam.unsupported_walls
        )));
    }
    solved.bonds = Some(bonds);
    solved.provenance = Provenance::Solved;
    Ok(solved)
}
