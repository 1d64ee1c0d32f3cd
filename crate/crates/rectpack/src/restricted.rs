//! The restricted family of grid-like packings and its exact search.
//!
//! A packing class member is described by a 6-tuple `(w, h, h−, s, s−, v)`:
//! `h` hexagonal rows of up to `w` circles (`h−` of them shortened by one
//! circle), topped by `s` square-grid rows (`s−` of them shortened by one),
//! with `v` mono-vacancies ("holes") left inside the pattern. The circle
//! count and the rectangle dimensions are exact expressions in ℤ[√3]:
//!
//! ```text
//! n = w(h + s) − h− − s− − v
//! H = 2s + 2 + (h−1)√3   (h > 0;  H = 2s for h = 0)
//! W = 2w + 1 if h > 0 and h− = 0, else 2w
//! P = 2(W + H)
//! ```
//!
//! For each `n` the family is finite (validity requires `w ≤ n` and
//! `h + s ≤ n`) and small enough to search exhaustively with exact
//! arithmetic; [`best_in_rn`] does so with pruning that preserves exactness.
//!
//! Tables display a canonical subset of the tying minimizers (see
//! [`select_display_rows`]): when holed minimizers tie with unholed ones the
//! holed form is the one that admits a further width improvement, so the
//! maximal-`v` representatives are shown; otherwise ties are deduplicated by
//! unordered rectangle shape (a square grid and its transpose count once).

use crate::exact::Q3;
use crate::geom::{Packing, Provenance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `√3` to f64 precision, for constructing canonical packings.
pub(crate) const SQRT3_F64: f64 = 1.732_050_807_568_877_2;

/// A member descriptor `(w, h, h−, s, s−, v)` of the restricted family.
///
/// Field order matters: the derived `Ord` is the lexicographic order in
/// `(w, h, hminus, s, sminus, v)` used for enumeration and table rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RnTuple {
    /// Circles per full row.
    pub w: u32,
    /// Number of hexagonal rows (0 or ≥ 2; a single hexagonal row is a
    /// square-grid row).
    pub h: u32,
    /// Number of shortened hexagonal rows: 0 or `k` for `h = 2k`;
    /// 0, `k`, or `k+1` for `h = 2k+1`.
    pub hminus: u32,
    /// Number of square-grid rows stacked on top of the hexagonal rows.
    pub s: u32,
    /// Number of shortened square-grid rows (`s− ≤ s`, `s− < s + h`).
    pub sminus: u32,
    /// Number of mono-vacancies inside the pattern
    /// (`v ≤ min{w, h+s} − 1`).
    pub v: u32,
}

impl RnTuple {
    pub const fn new(w: u32, h: u32, hminus: u32, s: u32, sminus: u32, v: u32) -> RnTuple {
        RnTuple { w, h, hminus, s, sminus, v }
    }

    /// The circle count `w(h+s) − h− − s− − v` this tuple encodes, or
    /// `None` if it is non-positive or exceeds `u32`.
    pub fn encoded_n(&self) -> Option<u32> {
        let total = self.w as i128 * (self.h as i128 + self.s as i128)
            - self.hminus as i128
            - self.sminus as i128
            - self.v as i128;
        if total >= 1 {
            u32::try_from(total).ok()
        } else {
            None
        }
    }

    /// Checks every structural constraint of the family for circle count
    /// `n`, including the finiteness bounds `w ≤ n` and `h + s ≤ n`.
    pub fn is_valid_for(&self, n: u32) -> bool {
        let r = self.h as u64 + self.s as u64;
        self.w >= 1
            && self.h != 1
            && r >= 1
            && hminus_options(self.h).contains(&self.hminus)
            && self.sminus <= self.s
            && (self.sminus as u64) < self.s as u64 + self.h as u64
            && (self.v as u64) < (self.w as u64).min(r)
            && self.encoded_n() == Some(n)
            && self.w <= n
            && r <= n as u64
    }
}

/// Allowed shortened-hex-row counts for a given number of hex rows.
fn hminus_options(h: u32) -> Vec<u32> {
    let k = h / 2;
    match (h, h % 2) {
        (0, _) => vec![0],
        (_, 0) => vec![0, k],
        _ => vec![0, k, k + 1],
    }
}

/// Exact full-box dimensions `(W, H)` of a tuple's rectangle.
pub fn tuple_dims(t: &RnTuple) -> (Q3, Q3) {
    let w = if t.h > 0 && t.hminus == 0 {
        Q3::new(2 * t.w as i64 + 1, 0)
    } else {
        Q3::new(2 * t.w as i64, 0)
    };
    let h = if t.h > 0 {
        Q3::new(2 * t.s as i64 + 2, t.h as i64 - 1)
    } else {
        Q3::new(2 * t.s as i64, 0)
    };
    (w, h)
}

/// Exact perimeter `2(W + H)`.
pub fn tuple_perimeter(t: &RnTuple) -> Q3 {
    let (w, h) = tuple_dims(t);
    (w + h).checked_mul_int(2).expect("perimeter coefficients exceed i64")
}

/// Exact area `W·H`.
pub fn tuple_area(t: &RnTuple) -> Q3 {
    let (w, h) = tuple_dims(t);
    w.checked_mul(h).expect("area coefficients exceed i64")
}

/// Rectangle aspect ratio `max(W,H) / min(W,H) ≥ 1` as a double.
pub fn aspect_ratio(t: &RnTuple) -> f64 {
    let (w, h) = tuple_dims(t);
    let (long, short) = if w >= h { (w, h) } else { (h, w) };
    long.to_f64() / short.to_f64()
}

/// What [`best_in_rn`] minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Rectangle perimeter `2(W+H)`.
    Perimeter,
    /// Rectangle area `W·H`.
    Area,
}

impl Objective {
    /// The exact objective value of a tuple.
    pub fn value(&self, t: &RnTuple) -> Q3 {
        match self {
            Objective::Perimeter => tuple_perimeter(t),
            Objective::Area => tuple_area(t),
        }
    }

    /// A lower bound on the value of any tuple whose box height is `h_dim`
    /// (every box has `W ≥ 2`), used to prune provably worse candidates.
    fn lower_bound_for_height(&self, h_dim: Q3) -> Q3 {
        match self {
            Objective::Perimeter => (h_dim + Q3::from_int(2))
                .checked_mul_int(2)
                .expect("perimeter bound overflow"),
            Objective::Area => h_dim.checked_mul_int(2).expect("area bound overflow"),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Perimeter => write!(f, "perimeter"),
            Objective::Area => write!(f, "area"),
        }
    }
}

/// Result of the exact search over the restricted family for one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub n: u32,
    pub objective: Objective,
    /// Every tuple attaining the exact minimum, in lexicographic order.
    pub minimizers: Vec<RnTuple>,
    /// The exact minimal objective value.
    pub value: Q3,
    /// True when no minimizer has a hole: the optimum of the family cannot
    /// be lowered by the local width improvements.
    pub regular: bool,
    /// True when the displayed rows (see [`select_display_rows`]) realize
    /// the optimum in rectangles of at least two distinct unordered shapes.
    pub dimorphic: bool,
    /// True when some displayed row mixes hexagonal and square-grid rows
    /// (`h > 0` and `s > 0`).
    pub hybrid: bool,
}

impl SearchResult {
    /// The canonical table rows for this `n` (see [`select_display_rows`]).
    pub fn display_rows(&self) -> Vec<RnTuple> {
        select_display_rows(&self.minimizers)
    }
}

/// Every member of the restricted family encoding `n` circles, in
/// lexicographic `(w, h, h−, s, s−, v)` order, produced lazily.
///
/// The family can be large (millions of members for `n` in the thousands,
/// most of them tall, thin, and nowhere near optimal), so callers that only
/// need the optimum should use [`best_in_rn`] instead.
pub fn enumerate_tuples(n: u32) -> impl Iterator<Item = RnTuple> {
    assert!(n >= 1, "circle count must be at least 1");
    (1..=n).flat_map(move |w| {
        // h = 0 first, then 2..=n: ascending h skipping the forbidden h = 1.
        std::iter::once(0u32).chain(2..=n).flat_map(move |h| {
            hminus_options(h).into_iter().flat_map(move |hm| {
                let s_lo = u32::from(h == 0);
                (s_lo..=n - h).flat_map(move |s| completions(n, w, h, hm, s))
            })
        })
    })
}

/// All `(s−, v)` completions of a partial tuple `(w, h, h−, s)` encoding
/// exactly `n` circles, in ascending `s−` order.
fn completions(n: u32, w: u32, h: u32, hm: u32, s: u32) -> Vec<RnTuple> {
    let r = (h + s) as u64;
    if r > n as u64 || r == 0 {
        return Vec::new();
    }
    let surplus = w as i64 * r as i64 - hm as i64 - n as i64;
    if surplus < 0 {
        return Vec::new();
    }
    let surplus = surplus as u64;
    let s_bound = if h == 0 { (s as u64).saturating_sub(1) } else { s as u64 };
    let v_max = (w as u64).min(r) - 1;
    if surplus > s_bound + v_max {
        return Vec::new();
    }
    let lo = surplus.saturating_sub(v_max);
    let hi = s_bound.min(surplus);
    (lo..=hi)
        .map(|sm| RnTuple::new(w, h, hm, s, sm as u32, (surplus - sm) as u32))
        .collect()
}

/// Exact minimization over the restricted family for `n` circles.
///
/// Exhaustive up to two provably lossless reductions: (1) for a fixed row
/// structure `(h, h−, s)` only the smallest completable `w` can attain the
/// minimum, because `H` is independent of `w` and `W` is strictly
/// increasing in it (and a gap `surplus > s_bound + v_max` at that `w`
/// only widens for larger `w`, since the surplus grows by `h+s ≥ 1` per
/// step while the capacity grows by at most 1); (2) any row structure with
/// `lower_bound_for_height(H) > best` is skipped, and since `H` grows
/// monotonically in `s` and in `h` the loops break early. Ties with the
/// current best are never pruned, so the full minimizer set is returned.
pub fn best_in_rn(n: u32, objective: Objective) -> SearchResult {
    assert!(n >= 1, "circle count must be at least 1");
    // Seed the pruning bound with an always-completable square grid of
    // near-square shape; its tuples are re-encountered (and recorded) by
    // the scan below.
    let s_seed = (n as f64).sqrt().round().max(1.0) as u32;
    let w_seed = n.div_ceil(s_seed);
    let seed = RnTuple::new(w_seed, 0, 0, s_seed, 0, 0);
    let mut best: Q3 = objective.value(&seed);

    let mut minimizers: Vec<RnTuple> = Vec::new();
    'h_loop: for h in std::iter::once(0u32).chain(2..=n) {
        let hex_height = if h > 0 { Q3::new(2, h as i64 - 1) } else { Q3::ZERO };
        if objective.lower_bound_for_height(hex_height) > best {
            break 'h_loop; // taller hex blocks only get worse
        }
        for hm in hminus_options(h) {
            let s_lo = u32::from(h == 0);
            for s in s_lo..=n - h {
                let r = (h + s) as u64;
                let height = hex_height + Q3::from_int(2 * s as i64);
                if objective.lower_bound_for_height(height) > best {
                    break; // larger s only gets worse
                }
                // Smallest w whose surplus is non-negative.
                let w0 = ((n as u64 + hm as u64).div_ceil(r)).max(1);
                if w0 > n as u64 {
                    continue;
                }
                let cands = completions(n, w0 as u32, h, hm, s);
                let Some(&first) = cands.first() else { continue };
                let value = objective.value(&first);
                if value > best {
                    continue;
                }
                if value < best {
                    best = value;
                    minimizers.clear();
                }
                minimizers.extend(cands);
            }
        }
    }

    minimizers.sort_unstable();
    let displayed = select_display_rows(&minimizers);
    SearchResult {
        n,
        objective,
        regular: minimizers.iter().all(|t| t.v == 0),
        dimorphic: distinct_shapes(&displayed) >= 2,
        hybrid: displayed.iter().any(|t| t.h > 0 && t.s > 0),
        minimizers,
        value: best,
    }
}

/// Unordered rectangle shape `{W, H}` of a tuple, as a sorted pair.
fn unordered_shape(t: &RnTuple) -> (Q3, Q3) {
    let (w, h) = tuple_dims(t);
    if w <= h {
        (w, h)
    } else {
        (h, w)
    }
}

fn distinct_shapes(rows: &[RnTuple]) -> usize {
    let mut shapes: Vec<(Q3, Q3)> = rows.iter().map(unordered_shape).collect();
    shapes.sort();
    shapes.dedup();
    shapes.len()
}

/// The canonical displayed subset of a tying minimizer set.
///
/// If any minimizer has holes, only those of maximal `v` are shown (a holed
/// form that ties an unholed one admits a strictly better improved packing,
/// so it is the informative representative). The survivors are then
/// deduplicated by unordered rectangle shape — a square grid and its
/// transpose describe the same packing rotated — keeping per shape the
/// representative with the largest `w` (landscape orientation), then the
/// smallest `s−`, smallest `h−`, and finally lexicographic order. Rows are
/// returned in ascending lexicographic (in particular ascending-`w`) order.
pub fn select_display_rows(minimizers: &[RnTuple]) -> Vec<RnTuple> {
    if minimizers.is_empty() {
        return Vec::new();
    }
    let v_max = minimizers.iter().map(|t| t.v).max().unwrap();
    let pool: Vec<RnTuple> = minimizers.iter().copied().filter(|t| t.v == v_max).collect();

    // Deduplicate by unordered shape.
    let mut by_shape: Vec<((Q3, Q3), RnTuple)> = Vec::new();
    for t in pool {
        let shape = unordered_shape(&t);
        match by_shape.iter_mut().find(|(sh, _)| *sh == shape) {
            None => by_shape.push((shape, t)),
            Some((_, rep)) => {
                let prefer = |a: &RnTuple| (std::cmp::Reverse(a.w), a.sminus, a.hminus, *a);
                if prefer(&t) < prefer(rep) {
                    *rep = t;
                }
            }
        }
    }
    let mut rows: Vec<RnTuple> = by_shape.into_iter().map(|(_, t)| t).collect();
    rows.sort_unstable();
    rows
}

/// One table entry: a circle count with its displayed minimizer rows.
#[derive(Clone, Debug, Serialize)]
pub struct TableGroup {
    pub n: u32,
    /// Displayed rows (see [`select_display_rows`]), ascending `w`.
    pub rows: Vec<RnTuple>,
    /// Exact minimal perimeter (or area, per the objective used).
    pub value: Q3,
    pub regular: bool,
    pub dimorphic: bool,
    pub hybrid: bool,
}

/// Runs [`best_in_rn`] for every `n` in `from..=to` (in parallel) and
/// returns the displayed table groups in ascending `n`.
pub fn make_table(from: u32, to: u32, objective: Objective) -> Vec<TableGroup> {
    assert!(from >= 1 && from <= to, "invalid table range");
    (from..=to)
        .into_par_iter()
        .map(|n| {
            let r = best_in_rn(n, objective);
            TableGroup {
                n,
                rows: r.display_rows(),
                value: r.value,
                regular: r.regular,
                dimorphic: r.dimorphic,
                hybrid: r.hybrid,
            }
        })
        .collect()
}

/// Scans `1..=n_to` (perimeter objective) and returns the groups that are
/// dimorphic (≥ 2 distinct optimal shapes) or hybrid (mixed hexagonal and
/// square-grid rows in a displayed optimum).
pub fn dimorphism_hybrid_scan(n_to: u32) -> Vec<TableGroup> {
    make_table(1, n_to, Objective::Perimeter)
        .into_iter()
        .filter(|g| g.dimorphic || g.hybrid)
        .collect()
}

/// Builds the canonical packing of a tuple: `h` hexagonal rows bottom-up
/// (shortened rows alternate, starting from the second row unless
/// `h− = k+1`, which shortens the odd rows), then `s` square rows with the
/// `s−` shortened ones topmost, then `v` holes removed from the right ends
/// of the topmost `v` rows. The box is the exact `(W, H)` of
/// [`tuple_dims`] rounded to doubles.
pub fn tuple_to_packing(t: &RnTuple) -> Packing {
    let n = t
        .encoded_n()
        .unwrap_or_else(|| panic!("tuple {t:?} encodes no positive circle count"));
    assert!(t.is_valid_for(n), "invalid tuple {t:?}");
    let (wq, hq) = tuple_dims(t);

    // Bottom-up rows of centers.
    let mut rows: Vec<Vec<[f64; 2]>> = Vec::new();
    let hex_top = if t.h > 0 { 1.0 + (t.h - 1) as f64 * SQRT3_F64 } else { 0.0 };
    let short_on_odd = t.hminus > t.h / 2;
    for j in 1..=t.h {
        let y = 1.0 + (j - 1) as f64 * SQRT3_F64;
        let short = t.hminus > 0 && (j % 2 == 1) == short_on_odd;
        // With no shortened rows the full rows alternate their offset to
        // nest (W = 2w + 1); even rows start one unit to the right.
        let offset = if short || (t.hminus == 0 && j % 2 == 0) { 2.0 } else { 1.0 };
        let count = if short { t.w - 1 } else { t.w };
        rows.push((0..count).map(|i| [offset + 2.0 * i as f64, y]).collect());
    }
    for q in 1..=t.s {
        let y = if t.h > 0 { hex_top + 2.0 * q as f64 } else { 2.0 * q as f64 - 1.0 };
        let short = q > t.s - t.sminus; // shortened square rows are topmost
        let count = if short { t.w - 1 } else { t.w };
        rows.push((0..count).map(|i| [1.0 + 2.0 * i as f64, y]).collect());
    }

    // Holes: drop the rightmost circle of the topmost v distinct rows.
    for row in rows.iter_mut().rev().take(t.v as usize) {
        row.pop();
    }

    let centers: Vec<[f64; 2]> = rows.concat();
    debug_assert_eq!(centers.len() as u32, n);
    Packing {
        n,
        width: wq.to_f64(),
        height: hq.to_f64(),
        centers,
        bonds: None,
        provenance: Provenance::Constructed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::check_feasible;

    #[test]
    fn dimension_formulas() {
        // Five hexagonal rows of up to 3: box 6 × (2+4√3).
        let t = RnTuple::new(3, 5, 2, 0, 0, 0);
        assert_eq!(tuple_dims(&t), (Q3::new(6, 0), Q3::new(2, 4)));
        assert_eq!(tuple_perimeter(&t), Q3::new(16, 8));
        assert_eq!(tuple_area(&t), Q3::new(12, 24));
        // Single circle: 2 × 2 box.
        let t1 = RnTuple::new(1, 0, 0, 1, 0, 0);
        assert_eq!(tuple_dims(&t1), (Q3::new(2, 0), Q3::new(2, 0)));
        assert_eq!(tuple_perimeter(&t1), Q3::new(8, 0));
        // Full-length hex rows nest with an extra unit of width.
        let t2 = RnTuple::new(4, 5, 0, 0, 0, 0);
        assert_eq!(tuple_dims(&t2), (Q3::new(9, 0), Q3::new(2, 4)));
        // Hybrid with shortened square row and holes (29 circles):
        // 5·7 − 2 − 1 − 3 = 29 in a 10 × (6+4√3) box.
        let t3 = RnTuple::new(5, 5, 2, 2, 1, 3);
        assert_eq!(t3.encoded_n(), Some(29));
        assert!(t3.is_valid_for(29));
        assert_eq!(tuple_dims(&t3), (Q3::new(10, 0), Q3::new(6, 4)));
    }

    #[test]
    fn aspect_ratio_is_at_least_one() {
        assert_eq!(aspect_ratio(&RnTuple::new(1, 0, 0, 1, 0, 0)), 1.0);
        let tall = RnTuple::new(1, 0, 0, 2, 0, 0); // 2 × 4
        assert_eq!(aspect_ratio(&tall), 2.0);
        let wide = RnTuple::new(2, 0, 0, 1, 0, 0); // 4 × 2
        assert_eq!(aspect_ratio(&wide), 2.0);
    }

    #[test]
    fn validity_constraints() {
        // h = 1 is forbidden.
        assert!(!RnTuple::new(3, 1, 0, 0, 0, 0).is_valid_for(3));
        // h− must come from {0, k, k+1} (odd) / {0, k} (even).
        assert!(RnTuple::new(3, 3, 2, 0, 0, 0).is_valid_for(7)); // k+1 = 2
        assert!(!RnTuple::new(4, 4, 1, 0, 0, 0).is_valid_for(15)); // even h, 1 ∉ {0,2}
        assert!(RnTuple::new(4, 4, 2, 0, 0, 0).is_valid_for(14));
        // v is bounded by min{w, h+s} − 1.
        assert!(!RnTuple::new(2, 0, 0, 4, 0, 2).is_valid_for(6));
        assert!(RnTuple::new(2, 0, 0, 4, 0, 1).is_valid_for(7));
        // s− < s + h kills all-short square grids.
        assert!(!RnTuple::new(3, 0, 0, 2, 2, 0).is_valid_for(4));
        // Finiteness bounds: empty-short-row encodings of small n are out.
        assert!(!RnTuple::new(1, 2, 1, 0, 0, 0).is_valid_for(1));
        assert!(RnTuple::new(1, 0, 0, 1, 0, 0).is_valid_for(1));
    }

    #[test]
    fn enumeration_is_lexicographic_and_valid() {
        for n in [1, 2, 7, 13, 29] {
            let tuples: Vec<RnTuple> = enumerate_tuples(n).collect();
            assert!(!tuples.is_empty());
            let mut sorted = tuples.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(tuples, sorted, "n={n}: not sorted or has duplicates");
            for t in &tuples {
                assert!(t.is_valid_for(n), "n={n}: invalid {t:?}");
            }
        }
    }

    #[test]
    fn enumeration_is_complete_for_small_n() {
        // Independent brute force over a generous raw box.
        for n in [1, 2, 3, 7, 12] {
            let mut raw = Vec::new();
            for w in 1..=n {
                for h in 0..=n {
                    for hm in 0..=n {
                        for s in 0..=n {
                            for sm in 0..=n {
                                for v in 0..=n {
                                    let t = RnTuple::new(w, h, hm, s, sm, v);
                                    if t.is_valid_for(n) {
                                        raw.push(t);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            raw.sort_unstable();
            let fast: Vec<RnTuple> = enumerate_tuples(n).collect();
            assert_eq!(fast, raw, "n={n}");
        }
    }

    #[test]
    fn best_in_rn_small_cases() {
        // n = 1: a 2×2 box, perimeter 8.
        let r = best_in_rn(1, Objective::Perimeter);
        assert_eq!(r.value, Q3::new(8, 0));
        assert_eq!(r.minimizers, vec![RnTuple::new(1, 0, 0, 1, 0, 0)]);
        assert!(r.regular && !r.dimorphic && !r.hybrid);

        // n = 2: 2×4 and 4×2 grids tie; the displayed row is landscape.
        let r = best_in_rn(2, Objective::Perimeter);
        assert_eq!(r.value, Q3::new(12, 0));
        assert_eq!(
            r.minimizers,
            vec![RnTuple::new(1, 0, 0, 2, 0, 0), RnTuple::new(2, 0, 0, 1, 0, 0)]
        );
        assert_eq!(r.display_rows(), vec![RnTuple::new(2, 0, 0, 1, 0, 0)]);
        assert!(r.regular && !r.dimorphic && !r.hybrid);

        // n = 3: two hex rows beat every grid: P = 12 + 2√3 ≈ 15.46.
        let r = best_in_rn(3, Objective::Perimeter);
        assert_eq!(r.value, Q3::new(12, 2));
        assert_eq!(r.display_rows(), vec![RnTuple::new(2, 2, 1, 0, 0, 0)]);

        // n = 7: hex forms with and without a hole tie with a hybrid;
        // the displayed row is the holed one (it admits an improvement).
        let r = best_in_rn(7, Objective::Perimeter);
        assert_eq!(r.value, Q3::new(16, 4));
        assert!(r.minimizers.contains(&RnTuple::new(3, 3, 1, 0, 0, 1)));
        assert!(r.minimizers.contains(&RnTuple::new(3, 3, 2, 0, 0, 0)));
        assert_eq!(r.display_rows(), vec![RnTuple::new(3, 3, 1, 0, 0, 1)]);
        assert!(!r.regular && !r.dimorphic && !r.hybrid);
    }

    #[test]
    fn best_matches_brute_force_enumeration() {
        for n in 1..=60 {
            for objective in [Objective::Perimeter, Objective::Area] {
                let fast = best_in_rn(n, objective);
                let brute_best = enumerate_tuples(n)
                    .map(|t| objective.value(&t))
                    .min()
                    .unwrap();
                assert_eq!(fast.value, brute_best, "n={n} {objective}");
                let mut brute_set: Vec<RnTuple> = enumerate_tuples(n)
                    .filter(|t| objective.value(t) == brute_best)
                    .collect();
                brute_set.sort_unstable();
                assert_eq!(fast.minimizers, brute_set, "n={n} {objective}");
            }
        }
    }

    #[test]
    fn canonical_packings_are_feasible() {
        for t in [
            RnTuple::new(1, 0, 0, 1, 0, 0),
            RnTuple::new(3, 5, 2, 0, 0, 0),
            RnTuple::new(4, 6, 3, 0, 0, 0),
            RnTuple::new(4, 5, 0, 0, 0, 0),
            RnTuple::new(3, 3, 1, 0, 0, 1),
            RnTuple::new(5, 5, 2, 2, 1, 3),
            RnTuple::new(6, 7, 3, 0, 0, 2),
            RnTuple::new(2, 2, 1, 0, 0, 1), // hole empties its row
            RnTuple::new(4, 3, 2, 2, 1, 0), // h− = k+1 under square rows
        ] {
            let n = t.encoded_n().unwrap();
            let p = tuple_to_packing(&t);
            assert_eq!(p.n, n, "{t:?}");
            assert_eq!(p.centers.len() as u32, n, "{t:?}");
            let report = check_feasible(&p, 1e-12);
            assert!(report.ok, "{t:?}: {report:?}");
            let (wq, hq) = tuple_dims(&t);
            assert_eq!(p.width, wq.to_f64());
            assert_eq!(p.height, hq.to_f64());
        }
    }

    #[test]
    fn area_and_perimeter_objectives_differ() {
        // 200 circles: the perimeter optimum is a tall nearly square hex
        // pattern; the area optimum is a much wider, shallower one.
        let per = best_in_rn(200, Objective::Perimeter);
        assert_eq!(per.display_rows(), vec![RnTuple::new(13, 16, 8, 0, 0, 0)]);
        let area = best_in_rn(200, Objective::Area);
        assert_eq!(area.display_rows(), vec![RnTuple::new(29, 7, 3, 0, 0, 0)]);
    }

    #[test]
    fn scan_flags_match_selection() {
        // n = 11 is both dimorphic and hybrid: (3,3,1,1) and (4,3,1,0).
        let r = best_in_rn(11, Objective::Perimeter);
        assert!(r.dimorphic && r.hybrid && r.regular);
        assert_eq!(
            r.display_rows(),
            vec![RnTuple::new(3, 3, 1, 1, 0, 0), RnTuple::new(4, 3, 1, 0, 0, 0)]
        );
        // n = 15 is hybrid only.
        let r = best_in_rn(15, Objective::Perimeter);
        assert!(!r.dimorphic && r.hybrid);
        assert_eq!(r.display_rows(), vec![RnTuple::new(4, 3, 1, 1, 0, 0)]);
        // n = 37: a hybrid ties the raw minimum but the displayed row is
        // the doubly holed hex form, so the group is not flagged hybrid.
        let r = best_in_rn(37, Objective::Perimeter);
        assert!(r.minimizers.contains(&RnTuple::new(5, 7, 3, 1, 0, 0)));
        assert_eq!(r.display_rows(), vec![RnTuple::new(6, 7, 3, 0, 0, 2)]);
        assert!(!r.dimorphic && !r.hybrid && !r.regular);
    }

    #[test]
    fn scan_collects_dimorphic_and_hybrid_groups() {
        let hits = dimorphism_hybrid_scan(62);
        let ns: Vec<u32> = hits.iter().map(|g| g.n).collect();
        assert_eq!(ns, vec![11, 15, 19, 24, 28, 29, 34, 40, 47, 53, 61]);
        let dimorphic: Vec<u32> = hits.iter().filter(|g| g.dimorphic).map(|g| g.n).collect();
        assert_eq!(dimorphic, vec![11, 19, 28, 29, 40, 53]);
    }
}
