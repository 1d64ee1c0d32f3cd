//! Floating-point packing geometry: feasibility, measurement, contact
//! extraction, rattler detection, and a first-order jamming test.
//!
//! A [`Packing`] is `n` unit-radius circles in a `width × height` box;
//! feasibility means every center lies in `[1, W−1] × [1, H−1]` and every
//! pair of centers is at least 2 apart, both up to a stated tolerance.
//! Neighbor queries run on a uniform grid with cell size 2 (a circle's
//! contacts can only lie in the surrounding 3×3 block of cells), keeping
//! every operation here linear in `n` for packings of bounded density.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::tolerances::HALF_PLANE_ANGLE_SLACK;

/// One of the four rectangle walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    Left,
    Right,
    Bottom,
    Top,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::Left, Wall::Right, Wall::Bottom, Wall::Top];

    /// Unit normal pointing from a circle toward this wall.
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Wall::Left => [-1.0, 0.0],
            Wall::Right => [1.0, 0.0],
            Wall::Bottom => [0.0, -1.0],
            Wall::Top => [0.0, 1.0],
        }
    }
}

impl std::fmt::Display for Wall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Wall::Left => "left",
            Wall::Right => "right",
            Wall::Bottom => "bottom",
            Wall::Top => "top",
        };
        write!(f, "{s}")
    }
}

/// Contact structure of a packing: touching circle pairs and circle–wall
/// contacts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondGraph {
    /// Touching pairs `(i, j)` with `i < j`, sorted.
    pub pairs: Vec<(usize, usize)>,
    /// Circle–wall contacts, sorted by circle then wall.
    pub walls: Vec<(usize, Wall)>,
}

impl BondGraph {
    /// Number of contacts (pair + wall) incident to circle `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.pairs.iter().filter(|&&(a, b)| a == i || b == i).count()
            + self.walls.iter().filter(|&&(a, _)| a == i).count()
    }
}

/// How a packing came to be; carried through serialization for audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Canonical construction from a restricted-family tuple.
    Constructed,
    /// Width-improvement applied to a holed restricted packing.
    Improved,
    /// Output of the stochastic compactor.
    Compacted,
    /// Solution of an explicit contact system.
    Solved,
    /// Read from a file of unknown origin.
    Imported,
}

/// `n` unit circles in a `width × height` rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub n: u32,
    pub width: f64,
    pub height: f64,
    /// Circle centers `[x, y]`, in `[1, width−1] × [1, height−1]` when
    /// feasible.
    pub centers: Vec<[f64; 2]>,
    /// Optional contact structure (from transcription or extraction).
    pub bonds: Option<BondGraph>,
    pub provenance: Provenance,
}

/// A circle pair closer than allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairViolation {
    pub i: usize,
    pub j: usize,
    /// Center distance (< 2 − tol).
    pub distance: f64,
}

/// A center outside the admissible box on one side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WallViolation {
    pub i: usize,
    pub wall: Wall,
    /// How far beyond the wall the circle pokes (> tol).
    pub depth: f64,
}

/// Everything [`check_feasible`] found wrong (empty lists when `ok`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub ok: bool,
    pub pair_violations: Vec<PairViolation>,
    pub wall_violations: Vec<WallViolation>,
    /// Indices of circles with non-finite coordinates.
    pub nonfinite: Vec<usize>,
    /// True when `n` disagrees with the number of centers.
    pub count_mismatch: bool,
}

/// Uniform grid over the box with cell size 2: all neighbors of a circle
/// lie within the 3×3 block of cells around it.
struct Grid {
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn build(centers: &[[f64; 2]]) -> Grid {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, c) in centers.iter().enumerate() {
            cells.entry(Self::key(c)).or_default().push(i);
        }
        Grid { cells }
    }

    fn key(c: &[f64; 2]) -> (i64, i64) {
        // Non-finite coordinates are reported separately; clamp them into a
        // sentinel cell so grid construction stays total.
        let q = |x: f64| if x.is_finite() { (x / 2.0).floor() as i64 } else { i64::MIN / 4 };
        (q(c[0]), q(c[1]))
    }

    /// Indices `j > i` within the 3×3 neighborhood of circle `i`.
    fn later_neighbors(&self, centers: &[[f64; 2]], i: usize) -> Vec<usize> {
        let (kx, ky) = Self::key(&centers[i]);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.cells.get(&(kx + dx, ky + dy)) {
                    out.extend(v.iter().copied().filter(|&j| j > i));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Checks feasibility to tolerance `tol`: pairwise center distances at
/// least `2 − tol` and centers within `[1 − tol, W−1 + tol] × [1 − tol,
/// H−1 + tol]`. Reports every violation rather than failing fast.
pub fn check_feasible(p: &Packing, tol: f64) -> FeasibilityReport {
    let mut report = FeasibilityReport {
        ok: true,
        pair_violations: Vec::new(),
        wall_violations: Vec::new(),
        nonfinite: Vec::new(),
        count_mismatch: p.n as usize != p.centers.len(),
    };

    for (i, c) in p.centers.iter().enumerate() {
        if !(c[0].is_finite() && c[1].is_finite()) {
            report.nonfinite.push(i);
            continue;
        }
        for (wall, depth) in [
            (Wall::Left, 1.0 - c[0]),
            (Wall::Right, c[0] - (p.width - 1.0)),
            (Wall::Bottom, 1.0 - c[1]),
            (Wall::Top, c[1] - (p.height - 1.0)),
        ] {
            if depth > tol {
                report.wall_violations.push(WallViolation { i, wall, depth });
            }
        }
    }

    let grid = Grid::build(&p.centers);
    for i in 0..p.centers.len() {
        if report.nonfinite.contains(&i) {
            continue;
        }
        for j in grid.later_neighbors(&p.centers, i) {
            if report.nonfinite.contains(&j) {
                continue;
            }
            let d = dist(p.centers[i], p.centers[j]);
            if d < 2.0 - tol {
                report.pair_violations.push(PairViolation { i, j, distance: d });
            }
        }
    }

    report.ok = !report.count_mismatch
        && report.nonfinite.is_empty()
        && report.pair_violations.is_empty()
        && report.wall_violations.is_empty();
    report
}

/// Summary measurements of a packing's box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Measurements {
    pub width: f64,
    pub height: f64,
    /// `2(W + H)`.
    pub perimeter: f64,
    /// Long side over short side, ≥ 1.
    pub l_over_s: f64,
    /// Covered area fraction `nπ / (W·H)`; approaches `π/(2√3) ≈ 0.9069`
    /// for large hexagonal packings.
    pub density: f64,
}

/// Measures the box: perimeter, aspect ratio and density.
pub fn measure(p: &Packing) -> Measurements {
    let (w, h) = (p.width, p.height);
    Measurements {
        width: w,
        height: h,
        perimeter: 2.0 * (w + h),
        l_over_s: w.max(h) / w.min(h),
        density: p.centers.len() as f64 * PI / (w * h),
    }
}

/// Extracts the contact structure at tolerance `tol`: circle pairs with
/// center distance within `2 + tol` and circles within `tol` of a wall.
/// Monotone in `tol`: a larger tolerance yields a superset of bonds.
pub fn extract_bonds(p: &Packing, tol: f64) -> BondGraph {
    let mut bonds = BondGraph::default();
    let grid = Grid::build(&p.centers);
    for (i, c) in p.centers.iter().enumerate() {
        if !(c[0].is_finite() && c[1].is_finite()) {
            continue;
        }
        for (wall, gap) in [
            (Wall::Left, c[0] - 1.0),
            (Wall::Right, (p.width - 1.0) - c[0]),
            (Wall::Bottom, c[1] - 1.0),
            (Wall::Top, (p.height - 1.0) - c[1]),
        ] {
            if gap <= tol {
                bonds.walls.push((i, wall));
            }
        }
        for j in grid.later_neighbors(&p.centers, i) {
            if dist(p.centers[i], p.centers[j]) <= 2.0 + tol {
                bonds.pairs.push((i, j));
            }
        }
    }
    bonds.pairs.sort_unstable();
    bonds.walls.sort_unstable();
    bonds
}

/// Contact normals of circle `i` under a bond graph: unit vectors pointing
/// from the center toward each touching obstacle.
fn contact_normals(p: &Packing, bonds: &BondGraph, i: usize) -> Vec<[f64; 2]> {
    let mut normals = Vec::new();
    for &(a, b) in &bonds.pairs {
        let j = if a == i {
            b
        } else if b == i {
            a
        } else {
            continue;
        };
        let dx = p.centers[j][0] - p.centers[i][0];
        let dy = p.centers[j][1] - p.centers[i][1];
        let d = (dx * dx + dy * dy).sqrt();
        if d > 0.0 {
            normals.push([dx / d, dy / d]);
        }
    }
    for &(a, wall) in &bonds.walls {
        if a == i {
            normals.push(wall.outward_normal());
        }
    }
    normals
}

/// True when all normals fit strictly inside an open half-plane, i.e. the
/// largest angular gap between consecutive normals exceeds π (with a small
/// slack so that exactly opposed contacts, whose gap is π up to rounding,
/// count as blocking).
fn fits_open_half_plane(normals: &[[f64; 2]]) -> bool {
    let mut angles: Vec<f64> = normals.iter().map(|n| n[1].atan2(n[0])).collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let mut max_gap: f64 = 0.0;
    for k in 0..angles.len() {
        let next = if k + 1 == angles.len() {
            angles[0] + 2.0 * PI
        } else {
            angles[k + 1]
        };
        max_gap = max_gap.max(next - angles[k]);
    }
    max_gap > PI + HALF_PLANE_ANGLE_SLACK
}

/// Indices of rattlers: circles free to move to first order, having fewer
/// than 3 contacts (at bond tolerance `tol`) or all contact normals inside
/// an open half-plane.
pub fn detect_rattlers(p: &Packing, tol: f64) -> Vec<usize> {
    let bonds = extract_bonds(p, tol);
    rattlers_under(p, &bonds)
}

/// Rattler test against an explicit bond graph.
pub fn rattlers_under(p: &Packing, bonds: &BondGraph) -> Vec<usize> {
    (0..p.centers.len())
        .filter(|&i| {
            let normals = contact_normals(p, bonds, i);
            normals.len() < 3 || fits_open_half_plane(&normals)
        })
        .collect()
}

/// First-order jamming report (see [`is_jammed`]).
#[derive(Clone, Debug, Serialize)]
pub struct JamReport {
    pub jammed: bool,
    /// Circles free to move (allowed in a jammed packing).
    pub rattlers: Vec<usize>,
    /// Walls having no contact with any blocked circle; a supported wall
    /// cannot be pushed further inward.
    pub unsupported_walls: Vec<Wall>,
}

/// Tests that a packing is jammed to first order at bond tolerance `tol`:
/// it is feasible-shaped (no overlap check here — run [`check_feasible`]
/// separately), every circle is either blocked by its contacts or a
/// rattler, and each of the four walls rests on at least one blocked
/// circle. Rattlers are permitted; they sit loose inside the rigid frame.
pub fn is_jammed(p: &Packing, tol: f64) -> JamReport {
    let bonds = extract_bonds(p, tol);
    let rattlers = rattlers_under(p, &bonds);
    let unsupported: Vec<Wall> = Wall::ALL
        .into_iter()
        .filter(|w| {
            !bonds
                .walls
                .iter()
                .any(|&(i, wall)| wall == *w && !rattlers.contains(&i))
        })
        .collect();
    JamReport {
        jammed: unsupported.is_empty(),
        rattlers,
        unsupported_walls: unsupported,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restricted::{tuple_to_packing, RnTuple};

    fn two_by_two() -> Packing {
        // Four circles in a 4×4 box, all touching two walls and two
        // neighbors.
        Packing {
            n: 4,
            width: 4.0,
            height: 4.0,
            centers: vec![[1.0, 1.0], [3.0, 1.0], [1.0, 3.0], [3.0, 3.0]],
            bonds: None,
            provenance: Provenance::Constructed,
        }
    }

    #[test]
    fn feasibility_passes_and_reports() {
        let p = two_by_two();
        assert!(check_feasible(&p, 0.0).ok);

        let mut bad = p.clone();
        bad.centers[1] = [2.5, 1.0]; // overlaps circle 0 and nothing else
        let report = check_feasible(&bad, 1e-9);
        assert!(!report.ok);
        assert_eq!(report.pair_violations.len(), 1);
        assert_eq!(
            (report.pair_violations[0].i, report.pair_violations[0].j),
            (0, 1)
        );
        assert!((report.pair_violations[0].distance - 1.5).abs() < 1e-15);

        let mut out = p.clone();
        out.centers[2] = [0.5, 3.0]; // pokes through the left wall
        let report = check_feasible(&out, 1e-9);
        assert_eq!(report.wall_violations.len(), 1);
        assert_eq!(report.wall_violations[0].wall, Wall::Left);
        assert!((report.wall_violations[0].depth - 0.5).abs() < 1e-15);

        let mut nan = p;
        nan.centers[3] = [f64::NAN, 1.0];
        let report = check_feasible(&nan, 1e-9);
        assert!(!report.ok);
        assert_eq!(report.nonfinite, vec![3]);
    }

    #[test]
    fn measurement_values() {
        let m = measure(&two_by_two());
        assert_eq!(m.perimeter, 16.0);
        assert_eq!(m.l_over_s, 1.0);
        assert!((m.density - 4.0 * PI / 16.0).abs() < 1e-15);

        let thin = Packing {
            n: 1,
            width: 2.0,
            height: 4.0,
            centers: vec![[1.0, 2.0]],
            bonds: None,
            provenance: Provenance::Constructed,
        };
        assert_eq!(measure(&thin).l_over_s, 2.0);
    }

    #[test]
    fn bonds_of_square_block() {
        let p = two_by_two();
        let bonds = extract_bonds(&p, 1e-7);
        assert_eq!(bonds.pairs, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(bonds.walls.len(), 8);
        assert!(bonds.walls.contains(&(0, Wall::Left)));
        assert!(bonds.walls.contains(&(0, Wall::Bottom)));
        assert!(bonds.walls.contains(&(3, Wall::Right)));
        assert!(bonds.walls.contains(&(3, Wall::Top)));
        // The diagonal is 2√2 away: not a bond even at loose tolerance.
        assert!(!extract_bonds(&p, 1e-3).pairs.contains(&(0, 3)));
    }

    #[test]
    fn bond_extraction_is_monotone_in_tolerance() {
        let p = tuple_to_packing(&RnTuple::new(3, 5, 2, 0, 0, 0));
        let tight = extract_bonds(&p, 1e-12);
        let loose = extract_bonds(&p, 1e-6);
        for pair in &tight.pairs {
            assert!(loose.pairs.contains(pair));
        }
        for wall in &tight.walls {
            assert!(loose.walls.contains(wall));
        }
    }

    #[test]
    fn hex_packing_contacts() {
        // 13 circles in hexagonal rows: inner circle 6 (center of row 3)
        // touches 6 neighbors; row neighbors are exactly 2 apart.
        let p = tuple_to_packing(&RnTuple::new(3, 5, 2, 0, 0, 0));
        let bonds = extract_bonds(&p, 1e-7);
        assert_eq!(bonds.degree(6), 6);
        assert!(check_feasible(&p, 1e-9).ok);
    }

    #[test]
    fn rattler_detection() {
        let p = two_by_two();
        // All four circles have 4 contacts in a closed half-plane each:
        // blocked.
        assert!(detect_rattlers(&p, 1e-7).is_empty());

        // A fifth circle leaning on the right wall of a widened box. Its
        // nearest neighbors are √5 ≈ 2.236 away, so its only contact is
        // the wall: one contact → rattler.
        let loose = Packing {
            n: 5,
            width: 6.0,
            height: 4.0,
            centers: vec![[1.0, 1.0], [3.0, 1.0], [1.0, 3.0], [3.0, 3.0], [5.0, 2.0]],
            bonds: None,
            provenance: Provenance::Constructed,
        };
        assert_eq!(detect_rattlers(&loose, 1e-7), vec![4]);

        // Three contacts whose normals all point into the right open
        // half-plane leave the circle free to escape leftward; pulling one
        // obstacle around to the left blocks it. Tested with explicit
        // bonds so the geometry is exactly as stated.
        let sq3 = 3.0f64.sqrt();
        let mut shell = Packing {
            n: 4,
            width: 20.0,
            height: 20.0,
            centers: vec![[5.0, 5.0], [7.0, 5.0], [6.0, 5.0 + sq3], [6.0, 5.0 - sq3]],
            bonds: None,
            provenance: Provenance::Constructed,
        };
        let bonds = BondGraph {
            pairs: vec![(0, 1), (0, 2), (0, 3)],
            walls: vec![],
        };
        // Normals from 0: (1,0), (1,√3)/2 at 60°, (1,−√3)/2 at −60°: all
        // inside the open right half-plane.
        assert_eq!(rattlers_under(&shell, &bonds), vec![0, 1, 2, 3]);
        // Move circle 1 to the left of 0: normals now span 180°+120° and
        // no open half-plane contains them.
        shell.centers[1] = [3.0, 5.0];
        let blocked = rattlers_under(&shell, &bonds);
        assert!(!blocked.contains(&0));
    }

    #[test]
    fn jamming_report() {
        let p = two_by_two();
        let jam = is_jammed(&p, 1e-7);
        assert!(jam.jammed);
        assert!(jam.rattlers.is_empty());

        // Oversized box: top wall touches nothing.
        let open_top = Packing {
            n: 2,
            width: 4.0,
            height: 5.0,
            centers: vec![[1.0, 1.0], [3.0, 1.0]],
            bonds: None,
            provenance: Provenance::Constructed,
        };
        let jam = is_jammed(&open_top, 1e-7);
        assert!(!jam.jammed);
        assert!(jam.unsupported_walls.contains(&Wall::Top));
    }
}
