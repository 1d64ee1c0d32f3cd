//! Stochastic compactor: jams `n` unit circles inside a rectangle whose
//! sides press inward, with free aspect ratio, under a restart harness
//! hunting for record perimeters.
//!
//! One run moves the full coordinate vector (all centers plus both box
//! dimensions) along the perimeter gradient projected onto the linearized
//! cone of the currently touching contacts — the continuous form of walls
//! pressing inward while the disks rearrange. Every step is clipped exactly
//! against each non-touching constraint (quadratic in the step for circle
//! pairs, linear for walls), so no overlap ever occurs; the blocking contact
//! joins the working set, contacts whose least-squares multiplier turns
//! negative leave it, and a small restoration move after each step pulls the
//! working contacts back onto exact tangency, letting the step follow the
//! curved contact manifold. A run is locally jammed at a KKT point: the
//! projected gradient vanishes and every multiplier is non-negative (all
//! four walls supported, no contact pulling). Escape rounds then widen one
//! side of the box by a random factor and press again, keeping the result
//! only if the perimeter strictly drops; a full round without improvement
//! ends the run. The perimeter of accepted states is monotone non-increasing.
//!
//! [`search`] repeats runs from random starts with per-restart seeds
//! derived from the master seed, polishes each jammed run by solving the
//! contact system of its near-touching pairs (free width *and* height) when
//! that system is well-posed, and keeps the best result under a
//! deterministic tie-break, so parallel and serial searches agree exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{check_feasible, extract_bonds, measure, Packing, Provenance};
use crate::improve::{solve_contacts, ContactSystem};
use crate::tolerances;

/// A sweep's residual target: accepted states must out-resolve the
/// feasibility tolerance by a wide margin.
const RESOLVE_TOL: f64 = 1e-12;

/// Escape proposals tried per round once a run jams.
const POKE_TRIES: usize = 10;

/// Descent iterations granted to each escape proposal.
const POKE_DESCENT: usize = 1500;

/// Projected-gradient norm below which a jam is declared (subject to the
/// multiplier sign test).
const GTOL: f64 = 1e-8;

/// Multipliers below `−LTOL` mark a contact as pulling; it leaves the
/// working set.
const LTOL: f64 = 1e-9;

/// Clipped steps may land this far on the infeasible side of a constraint;
/// restoration and the final scrub pull the error back well under the
/// feasibility tolerance.
const CLIP_SLOP: f64 = 1e-12;

/// Descent iterations without a perimeter improvement before a run is
/// declared stuck (short of a clean KKT certificate).
const STALL_WINDOW: usize = 60;

/// Tuning of one compaction run and of the restart harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactorParams {
    /// Master random seed; every random choice derives from it.
    pub seed: u64,
    /// Target start density `nπ/(W·H)`; must stay below the hexagonal
    /// bound `π/√12 ≈ 0.9069` (default 0.35).
    pub initial_fill: f64,
    /// Step length of one descent move, relative to the mean box span
    /// (default 0.02).
    pub shrink_rate: f64,
    /// Budget of descent iterations and escape proposals per run
    /// (default 10 000).
    pub max_steps: usize,
    /// A run is jammed when the relative perimeter decrease of an accepted
    /// escape falls below this (default 1e−12).
    pub stall_tolerance: f64,
    /// Number of independent runs in [`search`] (default 1000).
    pub restarts: usize,
}

impl Default for CompactorParams {
    fn default() -> Self {
        CompactorParams {
            seed: 0,
            initial_fill: 0.35,
            shrink_rate: 0.02,
            max_steps: 10_000,
            stall_tolerance: 1e-12,
            restarts: 1000,
        }
    }
}

impl CompactorParams {
    /// Rejects out-of-range parameters (fill outside `(0, π/√12)`,
    /// non-positive rates or tolerances).
    pub fn validate(&self) -> Result<(), CompactError> {
        let hex = std::f64::consts::PI / 12f64.sqrt();
        if !(self.initial_fill > 0.0 && self.initial_fill < hex) {
            return Err(CompactError::BadParams(format!(
                "initial_fill must lie in (0, {hex:.4}), got {}",
                self.initial_fill
            )));
        }
        if !(self.shrink_rate > 0.0 && self.shrink_rate < 1.0) {
            return Err(CompactError::BadParams(format!(
                "shrink_rate must lie in (0, 1), got {}",
                self.shrink_rate
            )));
        }
        if self.stall_tolerance <= 0.0 {
            return Err(CompactError::BadParams("stall_tolerance must be positive".to_string()));
        }
        Ok(())
    }
}

/// Result of one full [`search`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: u32,
    /// Perimeter of the best packing found (equals `measure(best_packing)`).
    pub best_perimeter: f64,
    pub best_packing: Packing,
    /// Number of restarts performed.
    pub attempts: usize,
    /// Derived per-restart seed that produced the best packing.
    pub seed_of_best: u64,
}

/// Outcome of a single compaction run.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactOutcome {
    pub packing: Packing,
    /// False when the step budget ran out before the stall criterion.
    pub converged: bool,
    /// Descent iterations and escape proposals consumed.
    pub steps_used: usize,
}

/// Why the compactor could not run.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompactError {
    #[error("bad compactor parameters: {0}")]
    BadParams(String),
    #[error(
        "could not place {n} circles at fill {fill} after repeated box enlargements; \
         lower the fill"
    )]
    Placement { n: u32, fill: f64 },
    #[error("initial packing is infeasible: {0}")]
    InfeasibleInput(String),
}

/// Derives the seed of restart `idx` from the master seed (a fixed odd
/// multiplier keeps the derived seeds distinct and reproducible).
fn restart_seed(master: u64, idx: u64) -> u64 {
    master.wrapping_add((idx + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// ---------------------------------------------------------------------------
// Random starts
// ---------------------------------------------------------------------------

/// Places `n` circles uniformly at random, without overlap, in a rectangle
/// of random aspect ratio in `[1/2, 2]` sized for the requested fill.
/// Deterministic per seed. On persistent rejection-sampling failure the box
/// is enlarged and placement retried; only repeated failure errors out.
pub fn random_start(n: u32, seed: u64, fill: f64) -> Result<Packing, CompactError> {
    if n == 0 {
        return Err(CompactError::BadParams("n must be at least 1".to_string()));
    }
    let hex = std::f64::consts::PI / 12f64.sqrt();
    if !(fill > 0.0 && fill < hex) {
        return Err(CompactError::BadParams(format!(
            "fill must lie in (0, {hex:.4}), got {fill}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aspect = rng.gen_range(0.5..=2.0);
    let mut area = n as f64 * std::f64::consts::PI / fill;

    for _ in 0..25 {
        let width = (area * aspect).sqrt().max(2.0 + 1e-6);
        let height = (area / aspect).sqrt().max(2.0 + 1e-6);
        let mut centers: Vec<[f64; 2]> = Vec::with_capacity(n as usize);
        let mut placed_all = true;
        'place: for _ in 0..n {
            for _attempt in 0..2000 {
                let x = rng.gen_range(1.0..=width - 1.0);
                let y = rng.gen_range(1.0..=height - 1.0);
                let ok = centers
                    .iter()
                    .all(|c| (c[0] - x).powi(2) + (c[1] - y).powi(2) >= 4.0);
                if ok {
                    centers.push([x, y]);
                    continue 'place;
                }
            }
            placed_all = false;
            break;
        }
        if placed_all {
            return Ok(Packing {
                n,
                width,
                height,
                centers,
                bonds: None,
                provenance: Provenance::Compacted,
            });
        }
        area *= 1.3;
    }
    Err(CompactError::Placement { n, fill })
}

// ---------------------------------------------------------------------------
// Relaxation primitives
// ---------------------------------------------------------------------------

fn clamp_into_box(centers: &mut [[f64; 2]], width: f64, height: f64) {
    for c in centers.iter_mut() {
        c[0] = c[0].clamp(1.0, width - 1.0);
        c[1] = c[1].clamp(1.0, height - 1.0);
    }
}

/// Largest constraint violation: pair overlap `2 − d` or wall penetration.
fn max_violation(centers: &[[f64; 2]], width: f64, height: f64) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in centers.iter().enumerate() {
        worst = worst.max(1.0 - a[0]).max(a[0] - (width - 1.0));
        worst = worst.max(1.0 - a[1]).max(a[1] - (height - 1.0));
        for b in &centers[i + 1..] {
            let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            if d2 < 4.0 {
                worst = worst.max(2.0 - d2.sqrt());
            }
        }
    }
    worst
}

/// Gauss–Seidel separation: symmetric push of each overlapping pair to
/// distance 2, then clamping into the box, until the largest violation
/// falls below [`RESOLVE_TOL`] or the sweep budget is spent. Used to scrub
/// the clipping slop off a finished descent. Coincident centers separate
/// along a deterministic index-derived direction.
fn relax(centers: &mut [[f64; 2]], width: f64, height: f64, max_sweeps: usize) -> bool {
    let n = centers.len();
    for _sweep in 0..max_sweeps {
        for i in 0..n {
            for j in i + 1..n {
                let dx = centers[j][0] - centers[i][0];
                let dy = centers[j][1] - centers[i][1];
                let d2 = dx * dx + dy * dy;
                if d2 >= 4.0 {
                    continue;
                }
                let d = d2.sqrt();
                let (ux, uy) = if d > 1e-12 {
                    (dx / d, dy / d)
                } else {
                    let angle = (i.wrapping_mul(2_654_435_761) ^ j) as f64;
                    (angle.cos(), angle.sin())
                };
                let push = 0.5 * (2.0 - d);
                centers[i][0] -= ux * push;
                centers[i][1] -= uy * push;
                centers[j][0] += ux * push;
                centers[j][1] += uy * push;
            }
        }
        clamp_into_box(centers, width, height);
        if max_violation(centers, width, height) < RESOLVE_TOL {
            return true;
        }
    }
    max_violation(centers, width, height) < RESOLVE_TOL
}

/// Translates the configuration so the support touches the left/bottom
/// walls and moves the right/top walls onto the support. Never enlarges.
fn tighten(centers: &mut [[f64; 2]], width: &mut f64, height: &mut f64) {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for c in centers.iter() {
        xmin = xmin.min(c[0]);
        xmax = xmax.max(c[0]);
        ymin = ymin.min(c[1]);
        ymax = ymax.max(c[1]);
    }
    for c in centers.iter_mut() {
        c[0] -= xmin - 1.0;
        c[1] -= ymin - 1.0;
    }
    *width = (xmax - xmin + 2.0).min(*width);
    *height = (ymax - ymin + 2.0).min(*height);
}

/// Affinely squeezes centers from one box into another (spans measured
/// between the center rails `[1, dim−1]`).
fn squeeze(centers: &[[f64; 2]], from: (f64, f64), to: (f64, f64)) -> Vec<[f64; 2]> {
    let sx = if from.0 - 2.0 > 1e-15 { (to.0 - 2.0) / (from.0 - 2.0) } else { 0.0 };
    let sy = if from.1 - 2.0 > 1e-15 { (to.1 - 2.0) / (from.1 - 2.0) } else { 0.0 };
    centers
        .iter()
        .map(|c| [1.0 + (c[0] - 1.0) * sx, 1.0 + (c[1] - 1.0) * sy])
        .collect()
}

// ---------------------------------------------------------------------------
// Projected descent on the contact manifold
// ---------------------------------------------------------------------------

/// One inequality `g(u) ≥ 0` of the pressing problem over the coordinate
/// vector `u = (x₀, y₀, …, x_{n−1}, y_{n−1}, W, H)`.
#[derive(Clone, Copy, PartialEq)]
enum Constraint {
    /// `x_i − 1 ≥ 0`
    Left(usize),
    /// `W − 1 − x_i ≥ 0`
    Right(usize),
    /// `y_i − 1 ≥ 0`
    Bottom(usize),
    /// `H − 1 − y_i ≥ 0`
    Top(usize),
    /// `‖c_a − c_b‖² − 4 ≥ 0`
    Pair(usize, usize),
}

/// Largest step `t ∈ [0, cap]` along `d` keeping every constraint outside
/// the working set above `−CLIP_SLOP` (exact for walls, via the quadratic
/// roots for pairs), with the index of the blocking constraint if any.
fn clip_step(
    u: &DVector<f64>,
    n: usize,
    cons: &[Constraint],
    in_working: &[bool],
    d: &DVector<f64>,
    cap: f64,
) -> (f64, Option<usize>) {
    let mut t = cap;
    let mut blocker = None;
    for (k, &con) in cons.iter().enumerate() {
        if in_working[k] {
            continue;
        }
        let limit = match con {
            Constraint::Left(i) => linear_limit(u[2 * i] - 1.0, d[2 * i]),
            Constraint::Right(i) => {
                linear_limit(u[2 * n] - 1.0 - u[2 * i], d[2 * n] - d[2 * i])
            }
            Constraint::Bottom(i) => linear_limit(u[2 * i + 1] - 1.0, d[2 * i + 1]),
            Constraint::Top(i) => {
                linear_limit(u[2 * n + 1] - 1.0 - u[2 * i + 1], d[2 * n + 1] - d[2 * i + 1])
            }
            Constraint::Pair(a, b) => {
                let px = u[2 * b] - u[2 * a];
                let py = u[2 * b + 1] - u[2 * a + 1];
                let dx = d[2 * b] - d[2 * a];
                let dy = d[2 * b + 1] - d[2 * a + 1];
                let qa = dx * dx + dy * dy;
                let qb = 2.0 * (px * dx + py * dy);
                let qc = px * px + py * py - 4.0 + CLIP_SLOP;
                if qa < 1e-30 {
                    linear_limit(qc, qb)
                } else if qb >= 0.0 {
                    // Opening parabola with non-negative slope at t = 0:
                    // the gap never shrinks along this direction.
                    None
                } else {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc <= 0.0 {
                        None
                    } else {
                        Some((-qb - disc.sqrt()) / (2.0 * qa))
                    }
                }
            }
        };
        if let Some(limit) = limit {
            if limit < t {
                t = limit.max(0.0);
                blocker = Some(k);
            }
        }
    }
    (t, blocker)
}

/// Step bound for a constraint linear along the step: value `c ≥ 0` now,
/// rate `s` per unit step.
fn linear_limit(c: f64, s: f64) -> Option<f64> {
    if s >= -1e-12 {
        None
    } else {
        Some((c + CLIP_SLOP) / -s)
    }
}

/// Presses the box onto the circles by projected-gradient descent of
/// `W + H` over the active contact set, from a feasible state. The state is
/// replaced by the best feasible iterate. Returns the iterations consumed
/// and whether a KKT certificate (zero projected gradient, non-negative
/// multipliers) was reached.
fn descend(
    centers: &mut [[f64; 2]],
    width: &mut f64,
    height: &mut f64,
    step_len: f64,
    budget: usize,
) -> (usize, bool) {
    let n = centers.len();
    let dim = 2 * n + 2;
    let mut u = DVector::<f64>::zeros(dim);
    for (i, c) in centers.iter().enumerate() {
        u[2 * i] = c[0];
        u[2 * i + 1] = c[1];
    }
    u[2 * n] = *width;
    u[2 * n + 1] = *height;

    let mut cons: Vec<Constraint> = Vec::with_capacity(4 * n + n * (n - 1) / 2);
    for i in 0..n {
        cons.push(Constraint::Left(i));
        cons.push(Constraint::Right(i));
        cons.push(Constraint::Bottom(i));
        cons.push(Constraint::Top(i));
    }
    for a in 0..n {
        for b in a + 1..n {
            cons.push(Constraint::Pair(a, b));
        }
    }

    // Seed the working set with the contacts already tight at entry.
    let mut in_working = vec![false; cons.len()];
    for (k, &con) in cons.iter().enumerate() {
        let slack = match con {
            Constraint::Left(i) => u[2 * i] - 1.0,
            Constraint::Right(i) => u[2 * n] - 1.0 - u[2 * i],
            Constraint::Bottom(i) => u[2 * i + 1] - 1.0,
            Constraint::Top(i) => u[2 * n + 1] - 1.0 - u[2 * i + 1],
            Constraint::Pair(a, b) => {
                let dx = u[2 * b] - u[2 * a];
                let dy = u[2 * b + 1] - u[2 * a + 1];
                (dx * dx + dy * dy).sqrt() - 2.0
            }
        };
        in_working[k] = slack < 1e-9;
    }

    let grad_f = {
        let mut g = DVector::<f64>::zeros(dim);
        g[2 * n] = 1.0;
        g[2 * n + 1] = 1.0;
        g
    };

    let mut best_u = u.clone();
    let mut best_f = u[2 * n] + u[2 * n + 1];
    let mut last_gain = 0usize;
    let mut kkt = false;
    let mut used = 0usize;

    while used < budget {
        used += 1;
        let working: Vec<usize> =
            (0..cons.len()).filter(|&k| in_working[k]).collect();
        let m = working.len();

        // Assemble the working system with unit-norm rows.
        let mut jac = DMatrix::<f64>::zeros(m, dim);
        let mut gval = DVector::<f64>::zeros(m);
        for (r, &k) in working.iter().enumerate() {
            match cons[k] {
                Constraint::Left(i) => {
                    jac[(r, 2 * i)] = 1.0;
                    gval[r] = u[2 * i] - 1.0;
                }
                Constraint::Right(i) => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    jac[(r, 2 * i)] = -s;
                    jac[(r, 2 * n)] = s;
                    gval[r] = (u[2 * n] - 1.0 - u[2 * i]) * s;
                }
                Constraint::Bottom(i) => {
                    jac[(r, 2 * i + 1)] = 1.0;
                    gval[r] = u[2 * i + 1] - 1.0;
                }
                Constraint::Top(i) => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    jac[(r, 2 * i + 1)] = -s;
                    jac[(r, 2 * n + 1)] = s;
                    gval[r] = (u[2 * n + 1] - 1.0 - u[2 * i + 1]) * s;
                }
                Constraint::Pair(a, b) => {
                    let dx = u[2 * b] - u[2 * a];
                    let dy = u[2 * b + 1] - u[2 * a + 1];
                    let d2 = dx * dx + dy * dy;
                    let norm = (8.0 * d2).sqrt().max(1e-300);
                    jac[(r, 2 * a)] = -2.0 * dx / norm;
                    jac[(r, 2 * a + 1)] = -2.0 * dy / norm;
                    jac[(r, 2 * b)] = 2.0 * dx / norm;
                    jac[(r, 2 * b + 1)] = 2.0 * dy / norm;
                    gval[r] = (d2 - 4.0) / norm;
                }
            }
        }

        if m == 0 {
            // Free fall: nothing restrains the walls yet.
            let d = -&grad_f;
            let (t, blocker) = clip_step(&u, n, &cons, &in_working, &d, step_len / d.norm());
            if t > 1e-14 {
                u.axpy(t, &d, 1.0);
                let f = u[2 * n] + u[2 * n + 1];
                if f < best_f - 1e-13 {
                    best_f = f;
                    best_u = u.clone();
                    last_gain = used;
                }
            }
            match blocker {
                Some(k) => in_working[k] = true,
                None if t <= 1e-14 => break,
                None => {}
            }
            continue;
        }

        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let rank_eps = (smax * 1e-12).max(1e-300);

        // Restoration: pull the drifted working contacts back onto tangency.
        if gval.amax() > 1e-13 {
            if let Ok(dr) = svd.solve(&(-&gval), rank_eps) {
                let (t, blocker) = clip_step(&u, n, &cons, &in_working, &dr, 1.0);
                if t > 0.0 {
                    u.axpy(t, &dr, 1.0);
                }
                if let Some(k) = blocker {
                    in_working[k] = true;
                    continue;
                }
            }
        }

        // Project the objective gradient onto the tangent space.
        let vt = svd.v_t.as_ref().expect("svd computed with v");
        let mut p = grad_f.clone();
        for r in 0..svd.singular_values.len() {
            if svd.singular_values[r] > rank_eps {
                let vr = vt.row(r).transpose();
                let coef = vr.dot(&p);
                p.axpy(-coef, &vr, 1.0);
            }
        }

        if p.amax() < GTOL {
            // KKT candidate: least-norm multipliers of J_Wᵀ λ = ∇f decide
            // whether some contact pulls and must be released.
            let uu = svd.u.as_ref().expect("svd computed with u");
            let mut lam = DVector::<f64>::zeros(m);
            for r in 0..svd.singular_values.len() {
                if svd.singular_values[r] > rank_eps {
                    let vr = vt.row(r).transpose();
                    let coef = vr.dot(&grad_f) / svd.singular_values[r];
                    lam.axpy(coef, &uu.column(r).clone_owned(), 1.0);
                }
            }
            let mut arg = None;
            let mut lmin = -LTOL;
            for r in 0..m {
                if lam[r] < lmin {
                    lmin = lam[r];
                    arg = Some(r);
                }
            }
            match arg {
                Some(r) => {
                    in_working[working[r]] = false;
                    continue;
                }
                None => {
                    kkt = true;
                    break;
                }
            }
        }

        let d = -&p;
        let (t, blocker) = clip_step(&u, n, &cons, &in_working, &d, step_len / d.norm());
        if t > 1e-14 {
            u.axpy(t, &d, 1.0);
            let f = u[2 * n] + u[2 * n + 1];
            if f < best_f - 1e-13 {
                best_f = f;
                best_u = u.clone();
                last_gain = used;
            }
        }
        match blocker {
            Some(k) => in_working[k] = true,
            None if t <= 1e-14 => break,
            None => {}
        }
        if used - last_gain > STALL_WINDOW {
            break;
        }
    }

    // Prefer the final iterate (it sits exactly on its contacts) unless an
    // earlier one was strictly better.
    let f_end = u[2 * n] + u[2 * n + 1];
    if f_end <= best_f + 1e-12 {
        best_u = u;
    }
    for (i, c) in centers.iter_mut().enumerate() {
        c[0] = best_u[2 * i];
        c[1] = best_u[2 * i + 1];
    }
    *width = best_u[2 * n];
    *height = best_u[2 * n + 1];
    if max_violation(centers, *width, *height) > RESOLVE_TOL {
        relax(centers, *width, *height, 64);
    }
    (used, kkt)
}

// ---------------------------------------------------------------------------
// One compaction run
// ---------------------------------------------------------------------------

/// Step length for a descent pass: a fixed fraction of the mean box span.
fn step_len(rate: f64, width: f64, height: f64) -> f64 {
    (rate * 0.5 * ((width - 2.0) + (height - 2.0))).max(1e-3)
}

/// Compacts a feasible packing until jammed or the step budget is exhausted.
/// A run descends to a locally jammed state, then alternates escape rounds:
/// each escape widens one side of the box by a random factor and descends
/// again, keeping the result only if its perimeter is strictly lower.
/// (Widening first is essential: a jammed state is a local minimum, so no
/// area-preserving reshaping of the box is accepted by a strict-descent
/// rule.) The perimeter of accepted states is monotone non-increasing,
/// every accepted state is feasible at 1e−9, and the whole run is
/// deterministic in `params.seed`.
pub fn compact(p: &Packing, params: &CompactorParams) -> Result<CompactOutcome, CompactError> {
    params.validate()?;
    if p.n == 0 || p.centers.len() != p.n as usize {
        return Err(CompactError::BadParams("packing must contain n ≥ 1 circles".to_string()));
    }
    let report = check_feasible(p, tolerances::DEFAULT_FEASIBILITY);
    if !report.ok {
        return Err(CompactError::InfeasibleInput(format!(
            "{} pair and {} wall violations",
            report.pair_violations.len(),
            report.wall_violations.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centers = p.centers.clone();
    let mut width = p.width;
    let mut height = p.height;
    tighten(&mut centers, &mut width, &mut height);

    let budget = params.max_steps;
    let first_len = step_len(params.shrink_rate, width, height);
    let (mut used, _) = descend(&mut centers, &mut width, &mut height, first_len, budget);
    let mut converged = false;

    while used < budget {
        let mut escaped = false;
        let mut tries = 0usize;
        while tries < POKE_TRIES && used < budget {
            tries += 1;
            used += 1;
            let widen_width = rng.gen_bool(0.5);
            let f = rng.gen_range(0.05..0.35_f64).exp();
            let target = if widen_width {
                (2.0 + (width - 2.0) * f, height)
            } else {
                (width, 2.0 + (height - 2.0) * f)
            };
            let mut trial = squeeze(&centers, (width, height), target);
            let (mut tw, mut th) = target;
            tighten(&mut trial, &mut tw, &mut th);
            let poke_len = step_len(params.shrink_rate, tw, th);
            let (du, _) = descend(
                &mut trial,
                &mut tw,
                &mut th,
                poke_len,
                POKE_DESCENT.min(budget - used),
            );
            used += du;
            if tw + th < width + height - 1e-12 {
                let gain = (width + height - (tw + th)) / (tw + th);
                centers = trial;
                width = tw;
                height = th;
                // Improvements at numerical resolution mean the run is done.
                if gain < params.stall_tolerance {
                    converged = true;
                } else {
                    escaped = true;
                }
                break;
            }
        }
        if converged {
            break;
        }
        if escaped {
            continue;
        }
        // A full escape round without improvement means the run is done;
        // a round cut short by the budget leaves the run unconverged.
        converged = tries == POKE_TRIES;
        break;
    }

    let out = Packing {
        n: p.n,
        width,
        height,
        centers,
        bonds: None,
        provenance: Provenance::Compacted,
    };
    debug_assert!(check_feasible(&out, tolerances::DEFAULT_FEASIBILITY).ok);
    Ok(CompactOutcome { packing: out, converged, steps_used: used })
}

// ---------------------------------------------------------------------------
// Restart harness
// ---------------------------------------------------------------------------

/// Solves the contact system of the near-touching pairs of a jammed run
/// (free width and height) to drive the perimeter to solver precision.
/// Returns `None` unless some extraction tolerance yields a well-posed
/// system whose solution is feasible and strictly better.
fn polish(p: &Packing) -> Option<Packing> {
    let base = measure(p).perimeter;
    let mut best: Option<(f64, Packing)> = None;
    for tol in [1e-5, 1e-4, 1e-3] {
        let bonds = extract_bonds(p, tol);
        if bonds.pairs.is_empty() && bonds.walls.is_empty() {
            continue;
        }
        let sys = ContactSystem { n: p.n, bonds, free_width: true, free_height: true };
        if let Ok(mut solved) = solve_contacts(&sys, p) {
            let per = measure(&solved).perimeter;
            if per < base && best.as_ref().is_none_or(|(b, _)| per < *b) {
                solved.provenance = Provenance::Compacted;
                best = Some((per, solved));
            }
        }
    }
    best.map(|(_, packing)| packing)
}

/// Runs the `idx`-th restart of [`search`] with master seed `params.seed`:
/// a random start, a full compaction, and the Newton polish. Exposed so
/// callers can run restarts in batches (for progress reporting or
/// checkpointing) while reproducing `search` bit for bit: reducing the
/// outcomes by (perimeter, idx) gives exactly the `search` winner.
pub fn restart_outcome(
    n: u32,
    params: &CompactorParams,
    idx: u64,
) -> Result<(f64, Packing), CompactError> {
    let seed = restart_seed(params.seed, idx);
    let start = random_start(n, seed, params.initial_fill)?;
    let mut per_run = params.clone();
    per_run.seed = seed;
    let outcome = compact(&start, &per_run)?;
    let mut best = outcome.packing;
    if let Some(polished) = polish(&best) {
        best = polished;
    }
    Ok((measure(&best).perimeter, best))
}

/// The seed assigned to the `idx`-th restart under master seed `master`;
/// recorded in [`RunRecord::seed_of_best`] so any single restart can be
/// reproduced in isolation.
pub fn seed_for_restart(master: u64, idx: u64) -> u64 {
    restart_seed(master, idx)
}

/// Runs `params.restarts` independent compaction runs of `n` circles from
/// random starts and returns the best jammed packing. Restarts run in
/// parallel; the winner is reduced with the deterministic tie-break
/// (lowest perimeter, then lowest restart index), so results are
/// bit-identical for identical parameters regardless of thread count.
pub fn search(n: u32, params: &CompactorParams) -> Result<RunRecord, CompactError> {
    params.validate()?;
    if n == 0 {
        return Err(CompactError::BadParams("n must be at least 1".to_string()));
    }
    if params.restarts == 0 {
        return Err(CompactError::BadParams("restarts must be at least 1".to_string()));
    }

    let runs: Result<Vec<(f64, u64, Packing)>, CompactError> = (0..params.restarts as u64)
        .into_par_iter()
        .map(|idx| restart_outcome(n, params, idx).map(|(per, best)| (per, idx, best)))
        .collect();

    let mut runs = runs?;
    runs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite perimeters").then(a.1.cmp(&b.1)));
    let (best_perimeter, best_idx, best_packing) = runs.into_iter().next().expect("restarts ≥ 1");
    Ok(RunRecord {
        n,
        best_perimeter,
        best_packing,
        attempts: params.restarts,
        seed_of_best: restart_seed(params.seed, best_idx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::measure;

    fn quick(restarts: usize, seed: u64) -> CompactorParams {
        CompactorParams { seed, restarts, max_steps: 3000, ..CompactorParams::default() }
    }

    #[test]
    fn params_are_validated() {
        let mut p = CompactorParams::default();
        p.initial_fill = 0.95;
        assert!(matches!(p.validate(), Err(CompactError::BadParams(_))));
        p = CompactorParams::default();
        p.shrink_rate = 0.0;
        assert!(matches!(p.validate(), Err(CompactError::BadParams(_))));
        p = CompactorParams::default();
        p.stall_tolerance = -1.0;
        assert!(matches!(p.validate(), Err(CompactError::BadParams(_))));
    }

    #[test]
    fn random_start_is_deterministic_and_feasible() {
        let a = random_start(13, 42, 0.35).unwrap();
        let b = random_start(13, 42, 0.35).unwrap();
        assert_eq!(a, b);
        let c = random_start(13, 43, 0.35).unwrap();
        assert_ne!(a.centers, c.centers);
        assert!(check_feasible(&a, tolerances::DEFAULT_FEASIBILITY).ok);
        assert_eq!(a.n, 13);
        // The box is sized for the requested fill (unless enlarged).
        assert!((measure(&a).density - 0.35).abs() < 0.05, "density {}", measure(&a).density);
    }

    #[test]
    fn random_start_rejects_bad_inputs() {
        assert!(matches!(random_start(0, 1, 0.35), Err(CompactError::BadParams(_))));
        assert!(matches!(random_start(5, 1, 0.95), Err(CompactError::BadParams(_))));
        assert!(matches!(random_start(5, 1, 0.0), Err(CompactError::BadParams(_))));
    }

    #[test]
    fn one_circle_compacts_to_two_by_two() {
        let start = random_start(1, 7, 0.3).unwrap();
        let out = compact(&start, &quick(1, 7)).unwrap();
        let m = measure(&out.packing);
        assert!((m.perimeter - 8.0).abs() < 1e-6, "P = {}", m.perimeter);
        assert!(out.converged);
    }

    #[test]
    fn compaction_never_increases_perimeter_and_stays_feasible() {
        let start = random_start(9, 11, 0.3).unwrap();
        let before = measure(&start).perimeter;
        let out = compact(&start, &quick(1, 11)).unwrap();
        let after = measure(&out.packing).perimeter;
        assert!(after <= before);
        assert!(check_feasible(&out.packing, tolerances::DEFAULT_FEASIBILITY).ok);
        assert_eq!(out.packing.provenance, Provenance::Compacted);
    }

    #[test]
    fn compact_rejects_infeasible_input() {
        let p = Packing {
            n: 2,
            width: 6.0,
            height: 6.0,
            centers: vec![[1.5, 1.5], [2.0, 1.5]],
            bonds: None,
            provenance: Provenance::Imported,
        };
        assert!(matches!(
            compact(&p, &CompactorParams::default()),
            Err(CompactError::InfeasibleInput(_))
        ));
    }

    #[test]
    fn search_of_one_circle_is_exact() {
        let params = CompactorParams { restarts: 1, ..quick(1, 3) };
        let rec = search(1, &params).unwrap();
        assert_eq!(rec.best_perimeter, 8.0);
        assert_eq!(rec.attempts, 1);
        assert!((rec.best_packing.width - 2.0).abs() < 1e-12);
        assert!((rec.best_packing.height - 2.0).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic() {
        let a = search(5, &quick(6, 17)).unwrap();
        let b = search(5, &quick(6, 17)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn search_finds_the_flat_two_circle_box() {
        let params = CompactorParams { max_steps: 20_000, ..quick(6, 5) };
        let rec = search(2, &params).unwrap();
        assert!((rec.best_perimeter - 12.0).abs() < 1e-6, "P = {}", rec.best_perimeter);
    }

    #[test]
    fn search_rejects_bad_arguments() {
        assert!(matches!(search(0, &quick(1, 1)), Err(CompactError::BadParams(_))));
        let mut p = quick(1, 1);
        p.restarts = 0;
        assert!(matches!(search(3, &p), Err(CompactError::BadParams(_))));
    }
}
