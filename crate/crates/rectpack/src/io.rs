//! Packing serialization (JSON), SVG rendering, and CSV table output.
//!
//! All three writers are byte-deterministic: the same value always produces
//! the same bytes, so outputs can be diffed and checksummed. Floating-point
//! numbers in packing JSON carry 17 significant digits, which identifies a
//! double uniquely and guarantees exact round-trips.

use crate::geom::{BondGraph, Packing, Provenance};
use crate::restricted::{tuple_perimeter, TableGroup};
use std::fmt::Write as _;
use std::path::Path;

/// I/O and schema errors for packing files.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("file error: {0}")]
    File(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
}

/// A double rendered with 17 significant digits (`d.16 × 10^e`), enough to
/// reconstruct the exact bit pattern on read.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a packing to its canonical JSON text.
pub fn packing_to_json(p: &Packing) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"n\": {},", p.n);
    let _ = writeln!(out, "  \"width\": {},", fmt_f64(p.width));
    let _ = writeln!(out, "  \"height\": {},", fmt_f64(p.height));
    out.push_str("  \"centers\": [\n");
    for (i, c) in p.centers.iter().enumerate() {
        let comma = if i + 1 < p.centers.len() { "," } else { "" };
        let _ = writeln!(out, "    [{}, {}]{}", fmt_f64(c[0]), fmt_f64(c[1]), comma);
    }
    out.push_str("  ],\n");
    if let Some(bonds) = &p.bonds {
        out.push_str("  \"bonds\": {\n    \"pairs\": [");
        for (k, (i, j)) in bonds.pairs.iter().enumerate() {
            let comma = if k + 1 < bonds.pairs.len() { ", " } else { "" };
            let _ = write!(out, "[{i}, {j}]{comma}");
        }
        out.push_str("],\n    \"walls\": [");
        for (k, (i, wall)) in bonds.walls.iter().enumerate() {
            let comma = if k + 1 < bonds.walls.len() { ", " } else { "" };
            let _ = write!(out, "[{i}, \"{wall}\"]{comma}");
        }
        out.push_str("]\n  },\n");
    }
    let provenance = match p.provenance {
        Provenance::Constructed => "constructed",
        Provenance::Improved => "improved",
        Provenance::Compacted => "compacted",
        Provenance::Solved => "solved",
        Provenance::Imported => "imported",
    };
    let _ = writeln!(out, "  \"provenance\": \"{provenance}\"");
    out.push_str("}\n");
    out
}

/// Writes canonical packing JSON to a file.
pub fn write_packing(p: &Packing, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, packing_to_json(p))?;
    Ok(())
}

/// Parses packing JSON, validating the schema and cross-field consistency.
pub fn packing_from_json(text: &str) -> Result<Packing, IoError> {
    let p: Packing = serde_json::from_str(text)?;
    if p.n as usize != p.centers.len() {
        return Err(IoError::Schema {
            path: "$.centers".into(),
            message: format!("{} centers but n = {}", p.centers.len(), p.n),
        });
    }
    if !(p.width.is_finite() && p.height.is_finite()) {
        return Err(IoError::Schema {
            path: "$.width".into(),
            message: "non-finite box dimensions".into(),
        });
    }
    if let Some(bonds) = &p.bonds {
        for &(i, j) in &bonds.pairs {
            if i >= p.centers.len() || j >= p.centers.len() || i >= j {
                return Err(IoError::Schema {
                    path: "$.bonds.pairs".into(),
                    message: format!("invalid pair [{i}, {j}]"),
                });
            }
        }
        for &(i, _) in &bonds.walls {
            if i >= p.centers.len() {
                return Err(IoError::Schema {
                    path: "$.bonds.walls".into(),
                    message: format!("circle index {i} out of range"),
                });
            }
        }
    }
    Ok(p)
}

/// Reads a packing JSON file.
pub fn read_packing(path: &Path) -> Result<Packing, IoError> {
    let text = std::fs::read_to_string(path)?;
    packing_from_json(&text)
}

/// Rendering options for [`render_svg`].
#[derive(Clone, Copy, Debug)]
pub struct RenderOptions {
    /// Pixels per circle radius.
    pub scale: f64,
    /// Margin around the rectangle, in pixels.
    pub margin: f64,
    /// Draw 1-based circle indices.
    pub labels: bool,
    /// Draw contact dots (uses the packing's bonds, or extracts them at
    /// the default bond tolerance).
    pub bonds: bool,
}

impl Default for RenderOptions {
    fn default() -> RenderOptions {
        RenderOptions { scale: 40.0, margin: 20.0, labels: false, bonds: false }
    }
}

/// Pixel coordinate with fixed two-decimal formatting (deterministic).
fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders a packing as a standalone SVG document. Circles are shaded
/// except rattlers, which are drawn hollow; optional black dots mark
/// contacts (on the touching point for pairs and walls) and optional
/// labels number the circles from 1.
pub fn render_svg(p: &Packing, options: &RenderOptions) -> String {
    let s = options.scale;
    let m = options.margin;
    let img_w = p.width * s + 2.0 * m;
    let img_h = p.height * s + 2.0 * m;
    // SVG y grows downward; packing y grows upward.
    let tx = |x: f64| m + x * s;
    let ty = |y: f64| m + (p.height - y) * s;

    let bonds: BondGraph = match (&p.bonds, options.bonds) {
        (Some(b), _) => b.clone(),
        (None, true) => crate::geom::extract_bonds(p, crate::tolerances::DEFAULT_BOND),
        (None, false) => BondGraph::default(),
    };
    let rattlers = crate::geom::rattlers_under(p, &bonds);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        px(img_w),
        px(img_h),
        px(img_w),
        px(img_h)
    );
    let _ = writeln!(
        out,
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" stroke=\"black\" stroke-width=\"2\"/>",
        px(m),
        px(m),
        px(p.width * s),
        px(p.height * s)
    );
    for (i, c) in p.centers.iter().enumerate() {
        let fill = if rattlers.contains(&i) { "none" } else { "#d0d0d0" };
        let _ = writeln!(
            out,
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" stroke=\"black\" stroke-width=\"1.5\"/>",
            px(tx(c[0])),
            px(ty(c[1])),
            px(s),
            fill
        );
    }
    if options.bonds {
        let dot = 0.06 * s;
        for &(i, j) in &bonds.pairs {
            let (a, b) = (p.centers[i], p.centers[j]);
            let _ = writeln!(
                out,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"black\"/>",
                px(tx((a[0] + b[0]) / 2.0)),
                px(ty((a[1] + b[1]) / 2.0)),
                px(dot)
            );
        }
        for &(i, wall) in &bonds.walls {
            let c = p.centers[i];
            let nrm = wall.outward_normal();
            let _ = writeln!(
                out,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"black\"/>",
                px(tx(c[0] + nrm[0])),
                px(ty(c[1] + nrm[1])),
                px(dot)
            );
        }
    }
    if options.labels {
        for (i, c) in p.centers.iter().enumerate() {
            let _ = writeln!(
                out,
                "  <text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"sans-serif\" text-anchor=\"middle\" dominant-baseline=\"central\">{}</text>",
                px(tx(c[0])),
                px(ty(c[1])),
                px(0.45 * s),
                i + 1
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Renders the table produced by [`crate::restricted::make_table`] as CSV
/// with one row per displayed minimizer. The perimeter columns give the
/// exact coefficients (`P = perimeter_x + perimeter_y·√3`) and its double
/// value; the three flags apply to the whole group of the row's `n`.
pub fn write_table_csv(groups: &[TableGroup]) -> String {
    let mut out =
        String::from("n,w,h,hminus,s,sminus,v,perimeter_x,perimeter_y,perimeter_float,regular,dimorphic,hybrid\n");
    for g in groups {
        for t in &g.rows {
            let p = tuple_perimeter(t);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                g.n,
                t.w,
                t.h,
                t.hminus,
                t.s,
                t.sminus,
                t.v,
                p.x,
                p.y,
                p.to_f64(),
                g.regular,
                g.dimorphic,
                g.hybrid
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restricted::{make_table, tuple_to_packing, Objective, RnTuple};

    #[test]
    fn json_round_trip_is_exact() {
        let mut p = tuple_to_packing(&RnTuple::new(3, 5, 2, 0, 0, 0));
        p.bonds = Some(crate::geom::extract_bonds(&p, 1e-7));
        let text = packing_to_json(&p);
        let back = packing_from_json(&text).unwrap();
        assert_eq!(back, p);
        // Bit-exactness of awkward values.
        let q = Packing {
            n: 1,
            width: 2.0 + f64::EPSILON,
            height: 2.0000000001,
            centers: vec![[1.0000000000000002, 1.0]],
            bonds: None,
            provenance: Provenance::Imported,
        };
        let back = packing_from_json(&packing_to_json(&q)).unwrap();
        assert!(back.width.to_bits() == q.width.to_bits());
        assert!(back.centers[0][0].to_bits() == q.centers[0][0].to_bits());
    }

    #[test]
    fn json_is_byte_deterministic() {
        let p = tuple_to_packing(&RnTuple::new(4, 6, 3, 0, 0, 0));
        assert_eq!(packing_to_json(&p), packing_to_json(&p.clone()));
    }

    #[test]
    fn schema_violations_are_reported_with_paths() {
        let err = packing_from_json(r#"{"n": 2, "width": 4.0, "height": 2.0,
            "centers": [[1.0, 1.0]], "provenance": "imported"}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("$.centers"), "{msg}");

        let err = packing_from_json(r#"{"n": 2, "width": 4.0, "height": 2.0,
            "centers": [[1.0, 1.0], [3.0, 1.0]],
            "bonds": {"pairs": [[1, 0]], "walls": []},
            "provenance": "imported"}"#)
            .unwrap_err();
        assert!(err.to_string().contains("$.bonds.pairs"));

        // Malformed JSON and missing fields surface serde's diagnostics.
        assert!(packing_from_json("{").is_err());
        assert!(packing_from_json(r#"{"n": 1}"#).unwrap_err().to_string().contains("missing field"));
    }

    #[test]
    fn svg_rendering_is_deterministic_and_complete() {
        let mut p = tuple_to_packing(&RnTuple::new(3, 3, 1, 0, 0, 1));
        p.bonds = Some(crate::geom::extract_bonds(&p, 1e-7));
        let options = RenderOptions { labels: true, bonds: true, ..RenderOptions::default() };
        let svg = render_svg(&p, &options);
        assert_eq!(svg, render_svg(&p, &options), "must be byte-identical");
        assert_eq!(svg.matches("<circle").count(), 7 + p.bonds.as_ref().unwrap().pairs.len() + p.bonds.as_ref().unwrap().walls.len());
        assert_eq!(svg.matches("<text").count(), 7);
        assert!(svg.contains("viewBox"));
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn table_csv_layout() {
        let csv = write_table_csv(&make_table(1, 3, Objective::Perimeter));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "n,w,h,hminus,s,sminus,v,perimeter_x,perimeter_y,perimeter_float,regular,dimorphic,hybrid"
        );
        assert_eq!(lines[1], "1,1,0,0,1,0,0,8,0,8,true,false,false");
        assert_eq!(lines[2], "2,2,0,0,1,0,0,12,0,12,true,false,false");
        // n = 3: two hex rows, P = 12 + 2√3.
        assert!(lines[3].starts_with("3,2,2,1,0,0,0,12,2,"));
    }
}
