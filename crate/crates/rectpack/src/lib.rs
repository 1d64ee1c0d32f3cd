//! Minimum-perimeter packings of congruent circles in rectangles of variable
//! aspect ratio.
//!
//! Circles have radius 1 throughout; a packing of `n` circles lives in an
//! axis-aligned `W × H` rectangle with all centers in `[1, W−1] × [1, H−1]`
//! and pairwise center distances at least 2. The objective is the perimeter
//! `P = 2(W + H)` with both side lengths free, which favors near-square,
//! nearly hexagonal arrangements.
//!
//! # Modules
//!
//! - [`exact`] — arithmetic in ℤ[√3], the ring in which every candidate
//!   perimeter from the restricted search lives. Comparisons are decided by
//!   integer case analysis, never through floating point.
//! - [`restricted`] — enumeration and exact search of the restricted family
//!   of grid-like packings (hexagonal rows, square rows, boundary-row
//!   defects, interior holes), table generation, and canonical packing
//!   construction.
//! - [`geom`] — floating-point packing geometry: feasibility checking,
//!   measurement, contact (bond) extraction, rattler detection, and a
//!   first-order jamming test.
//! - [`improve`] — local width-reducing modifications of holed grid
//!   packings (the four δ moves), and a damped Newton solver for contact
//!   systems with free rectangle dimensions.
//! - [`compactor`] — stochastic compaction: random starts, shrink-and-relax
//!   sweeps to a jammed state, optional Newton polish, and parallel
//!   multi-restart search with deterministic seeding.
//! - [`verify`] — certificates and sanity bounds: non-regularity
//!   certificates, record monotonicity, candidate sequences, and the
//!   area–perimeter bound on packable point counts with its squareness
//!   consequence.
//! - [`io`] — JSON packing serialization (17-significant-digit, byte
//!   deterministic), SVG rendering, and CSV table output.
//!
//! # Quick start
//!
//! ```
//! use rectpack::restricted::{best_in_rn, Objective};
//!
//! // Exact best grid-like packing of 13 circles by perimeter.
//! let result = best_in_rn(13, Objective::Perimeter);
//! // P = 16 + 8√3: a five-row hexagonal packing in a 6 × (2+4√3) box.
//! assert_eq!(result.value.coeffs(), (16, 8));
//! assert!((result.value.to_f64() - 29.856406460551018).abs() < 1e-12);
//! ```

pub mod compactor;
pub mod exact;
pub mod geom;
pub mod improve;
pub mod io;
pub mod restricted;
pub mod tolerances;
pub mod verify;

pub use exact::Q3;
pub use geom::{BondGraph, Packing, Wall};
pub use restricted::{Objective, RnTuple, SearchResult};
