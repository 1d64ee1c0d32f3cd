//! Cross-cutting verification: non-regularity certificates, best-known
//! record bookkeeping, integer sequences, and the asymptotic-squareness
//! bound for large packings.

use crate::exact::{Overflow, Q3};
use crate::geom::{measure, Packing};
use crate::restricted::{best_in_rn, Objective};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// How a record's packing was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Restricted,
    Improved,
    Compacted,
    Solved,
}

impl std::fmt::Display for RecordSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordSource::Restricted => "restricted",
            RecordSource::Improved => "improved",
            RecordSource::Compacted => "compacted",
            RecordSource::Solved => "solved",
        })
    }
}

/// Best-known perimeter for one circle count.
///
/// `exact_value` is set when the record comes from the restricted search
/// (the perimeter is then `exact_value` rounded to a double); `packing` is
/// embedded for sources that cannot be regenerated from a tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub n: u32,
    pub perimeter: f64,
    pub source: RecordSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_value: Option<Q3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packing: Option<Packing>,
}

/// Errors from the record store and record validation.
#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("file error: {0}")]
    File(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent record for n = {n}: stored perimeter {stored} vs {actual} from {what}")]
    Inconsistent { n: u32, stored: f64, actual: f64, what: &'static str },
}

/// Checks a record's internal consistency: the stored perimeter must match
/// the embedded packing's measured perimeter to 10⁻⁹ and the exact value's
/// double rounding when present.
pub fn check_record(r: &Record) -> Result<(), RecordError> {
    if let Some(p) = &r.packing {
        let measured = measure(p).perimeter;
        if (measured - r.perimeter).abs() > crate::tolerances::REFERENCE_MATCH || p.n != r.n {
            return Err(RecordError::Inconsistent {
                n: r.n,
                stored: r.perimeter,
                actual: measured,
                what: "the embedded packing",
            });
        }
    }
    if let Some(q) = &r.exact_value {
        let exact = q.to_f64();
        if (exact - r.perimeter).abs() > crate::tolerances::REFERENCE_MATCH {
            return Err(RecordError::Inconsistent {
                n: r.n,
                stored: r.perimeter,
                actual: exact,
                what: "the exact value",
            });
        }
    }
    Ok(())
}

/// One-JSON-file-per-`n` record database with an `index.csv` summary.
///
/// Merging keeps the smaller perimeter. Files are replaced atomically
/// (write to a temporary name, then rename), so a concurrent reader never
/// sees a torn record; the store expects a single writer.
#[derive(Clone, Debug)]
pub struct RecordStore {
    dir: PathBuf,
}

impl RecordStore {
    /// Opens (creating if needed) a record directory.
    pub fn open(dir: &Path) -> Result<RecordStore, RecordError> {
        std::fs::create_dir_all(dir)?;
        Ok(RecordStore { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, n: u32) -> PathBuf {
        self.dir.join(format!("n{n:05}.json"))
    }

    /// The current record for `n`, if any.
    pub fn get(&self, n: u32) -> Result<Option<Record>, RecordError> {
        let path = self.path_for(n);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Merges a candidate record, keeping whichever perimeter is smaller
    /// (ties keep the incumbent). Returns `true` when the candidate became
    /// the stored record. The candidate is consistency-checked first.
    pub fn merge(&self, candidate: &Record) -> Result<bool, RecordError> {
        check_record(candidate)?;
        if let Some(current) = self.get(candidate.n)? {
            if current.perimeter <= candidate.perimeter {
                return Ok(false);
            }
        }
        self.write_atomic(&self.path_for(candidate.n), &serde_json::to_vec_pretty(candidate)?)?;
        self.write_index()?;
        Ok(true)
    }

    /// All records, ascending in `n`.
    pub fn all(&self) -> Result<Vec<Record>, RecordError> {
        let mut by_n: BTreeMap<u32, Record> = BTreeMap::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
            if !(name.starts_with('n') && name.ends_with(".json")) {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            let record: Record = serde_json::from_str(&text)?;
            by_n.insert(record.n, record);
        }
        Ok(by_n.into_values().collect())
    }

    /// Rewrites `index.csv` (n, perimeter, source) from the record files.
    pub fn write_index(&self) -> Result<(), RecordError> {
        let mut csv = String::from("n,perimeter,source\n");
        for r in self.all()? {
            let _ = writeln!(csv, "{},{},{}", r.n, r.perimeter, r.source);
        }
        self.write_atomic(&self.dir.join("index.csv"), csv.as_bytes())
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), RecordError> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Verdict on whether the optimal packing of `n` circles can have a
/// regular (hole-free grid) pattern.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub n: u32,
    pub regular_possible: bool,
    pub reason: String,
}

/// Tolerance for a record to count as *strictly below* the restricted
/// optimum: far below every genuine gap (the smallest is ≈ 0.004).
const WITNESS_MARGIN: f64 = 1e-6;

/// Decides whether a regular pattern can still be optimal for `n`:
/// impossible when the restricted optimum is attained with holes (a width
/// improvement then exists), or when a known packing beats the restricted
/// optimum by more than 10⁻⁶.
pub fn nonregular_certificate(n: u32, known: &[Record]) -> Certificate {
    let best = best_in_rn(n, Objective::Perimeter);
    if let Some(holed) = best.minimizers.iter().find(|t| t.v >= 1) {
        return Certificate {
            n,
            regular_possible: false,
            reason: format!(
                "the restricted optimum is attained with {} hole(s) by \
                 (w,h,h−,s,s−,v) = ({},{},{},{},{},{}), which admits a width improvement",
                holed.v, holed.w, holed.h, holed.hminus, holed.s, holed.sminus, holed.v
            ),
        };
    }
    let exact = best.value.to_f64();
    let witness = known
        .iter()
        .filter(|r| r.n == n && r.perimeter < exact - WITNESS_MARGIN)
        .min_by(|a, b| a.perimeter.total_cmp(&b.perimeter));
    if let Some(w) = witness {
        return Certificate {
            n,
            regular_possible: false,
            reason: format!(
                "a known {} packing has perimeter {:.12}, below the restricted optimum {:.12} by {:.3e}",
                w.source,
                w.perimeter,
                exact,
                exact - w.perimeter
            ),
        };
    }
    Certificate {
        n,
        regular_possible: true,
        reason: format!(
            "the restricted optimum {} is regular and no known packing beats it",
            best.value
        ),
    }
}

/// Checks that best-known perimeters never decrease when a circle is
/// removed: returns every `n` with `best(n) > best(n+1) + 10⁻⁹` (each is a
/// bug or an improvable record). Only consecutive pairs present in the
/// input are compared.
pub fn records_monotone(records: &[Record]) -> Vec<u32> {
    let mut best: BTreeMap<u32, f64> = BTreeMap::new();
    for r in records {
        let entry = best.entry(r.n).or_insert(f64::INFINITY);
        *entry = entry.min(r.perimeter);
    }
    let mut violations = Vec::new();
    for (&n, &p) in &best {
        if let Some(&next) = best.get(&(n + 1)) {
            if p > next + crate::tolerances::REFERENCE_MATCH {
                violations.push(n);
            }
        }
    }
    violations
}

/// Circle counts `n = k(k+1) + 1` for `k = 3..=k_max`: one more circle
/// than fills a `k × (k+1)` grid, the counts where irregular optima are
/// known or suspected.
pub fn irregular_candidates(k_max: u32) -> Vec<u32> {
    (3..=k_max).map(|k| k * (k + 1) + 1).collect()
}

/// One term of [`square_sequence`]: `a/b` is an alternate continued-
/// fraction convergent to `1/√3` and `n = (a+1)(b+1)/2` is the circle
/// count whose optimal rectangle is an exact square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SquareTerm {
    pub a: u64,
    pub b: u64,
    pub n: u64,
}

/// The circle counts with exactly square optimal rectangles: both
/// sequences obey `x_{k+2} = 4x_{k+1} − x_k` from `a: 1, 3` and `b: 1, 5`.
/// Overflow in the recurrences or the product is detected, not wrapped.
pub fn square_sequence(k_max: u32) -> Result<Vec<SquareTerm>, Overflow> {
    let overflow = Overflow { op: "square_sequence" };
    let mut terms = Vec::new();
    let (mut a0, mut a1, mut b0, mut b1) = (1u64, 3u64, 1u64, 5u64);
    for k in 1..=k_max {
        let (a, b) = (a0, b0);
        let n = a
            .checked_add(1)
            .and_then(|x| x.checked_mul(b.checked_add(1)?))
            .ok_or(overflow)?
            / 2;
        terms.push(SquareTerm { a, b, n });
        if k < k_max {
            let next_a = a1.checked_mul(4).and_then(|x| x.checked_sub(a0)).ok_or(overflow)?;
            let next_b = b1.checked_mul(4).and_then(|x| x.checked_sub(b0)).ok_or(overflow)?;
            (a0, a1) = (a1, next_a);
            (b0, b1) = (b1, next_b);
        }
    }
    Ok(terms)
}

/// The asymptotic-squareness bound for a packing whose rectangle has mean
/// side `m` (in circle radii): the half-difference of the sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OlerEpsilon {
    /// Largest possible `ε = (L − S)/2` compatible with optimality.
    pub epsilon_max: f64,
    /// Resulting bound on the aspect ratio `L/S = (m+ε)/(m−ε)`, or `None`
    /// when `m ≤ ε_max` makes the bound vacuous.
    pub ls_bound: Option<f64>,
}

/// Bounds how far from square an optimal rectangle of mean side `m` can
/// be: `ε ≤ √((√3/2)(2m+1))`, hence `L/S ≤ (m+ε)/(m−ε) → 1` as `m → ∞`.
///
/// The underlying inequality counts unit-separated points; packings of
/// unit circles reduce to it by shrinking each side by the diameter
/// (`m → m + 2` going the other way), which only strengthens the
/// asymptotics. Requires `m > 0`.
pub fn oler_epsilon_bound(m: f64) -> OlerEpsilon {
    assert!(m > 0.0, "mean side must be positive");
    let epsilon_max = ((3.0f64.sqrt() / 2.0) * (2.0 * m + 1.0)).sqrt();
    let ls_bound = (m > epsilon_max).then(|| (m + epsilon_max) / (m - epsilon_max));
    OlerEpsilon { epsilon_max, ls_bound }
}

/// Upper bound on how many unit-separated points fit in a convex region
/// of the given area and perimeter: `(2/√3)·A + P/2 + 1`.
pub fn oler_packing_bound(area: f64, perimeter: f64) -> f64 {
    assert!(area >= 0.0 && perimeter >= 0.0, "area and perimeter must be nonnegative");
    2.0 / 3.0f64.sqrt() * area + perimeter / 2.0 + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restricted::{tuple_perimeter, tuple_to_packing, RnTuple};

    fn restricted_record(n: u32) -> Record {
        let best = best_in_rn(n, Objective::Perimeter);
        Record {
            n,
            perimeter: best.value.to_f64(),
            source: RecordSource::Restricted,
            exact_value: Some(best.value),
            packing: None,
        }
    }

    #[test]
    fn irregular_candidate_counts() {
        assert_eq!(irregular_candidates(7), vec![13, 21, 31, 43, 57]);
        assert_eq!(irregular_candidates(8).last(), Some(&73));
        assert!(irregular_candidates(22).contains(&507));
        assert_eq!(irregular_candidates(22).len(), 20);
        assert!(irregular_candidates(2).is_empty());
    }

    #[test]
    fn square_sequence_terms() {
        let terms = square_sequence(6).unwrap();
        let ns: Vec<u64> = terms.iter().map(|t| t.n).collect();
        assert_eq!(&ns[..4], &[2, 12, 120, 1512]);
        assert_eq!(terms[1], SquareTerm { a: 3, b: 5, n: 12 });
        assert_eq!(terms[3], SquareTerm { a: 41, b: 71, n: 1512 });
        assert_eq!(terms[4], SquareTerm { a: 153, b: 265, n: 20482 });
        // a/b are convergents to 1/√3: error decreasing, and < 3·10⁻⁴ at k=4.
        // Capped at k=12: beyond that the terms still grow fine but the
        // error drops under double-precision noise (and n overflows u64
        // near k=17, which the overflow test covers).
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((41.0 / 71.0 - inv_sqrt3).abs() < 3e-4);
        let errors: Vec<f64> = square_sequence(12)
            .unwrap()
            .iter()
            .map(|t| (t.a as f64 / t.b as f64 - inv_sqrt3).abs())
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn square_sequence_overflow_is_detected() {
        assert!(square_sequence(40).is_err());
        assert!(square_sequence(40).unwrap_err().to_string().contains("square_sequence"));
    }

    #[test]
    fn oler_epsilon_values() {
        let b = oler_epsilon_bound(10.0);
        assert!((b.epsilon_max - 4.264567208929086).abs() < 1e-12);
        let b = oler_epsilon_bound(1000.0);
        assert!((b.epsilon_max - 41.628317681269102).abs() < 1e-9);
        assert!((b.ls_bound.unwrap() - 1.0868730127345823).abs() < 1e-12);
        // Vacuous below the fixed point: ε(1) = √(3√3/2) ≈ 1.61 > 1.
        assert_eq!(oler_epsilon_bound(1.0).ls_bound, None);
        // ε grows, L/S falls, toward 1.
        let (mut last_eps, mut last_ls) = (0.0, f64::INFINITY);
        for m in [100.0, 1000.0, 10_000.0, 100_000.0] {
            let b = oler_epsilon_bound(m);
            assert!(b.epsilon_max > last_eps);
            let ls = b.ls_bound.unwrap();
            assert!(ls < last_ls && ls > 1.0);
            (last_eps, last_ls) = (b.epsilon_max, ls);
        }
    }

    #[test]
    fn oler_packing_bound_values() {
        assert_eq!(oler_packing_bound(0.0, 0.0), 1.0);
        // Side-5 square: (2/√3)·25 + 10 + 1.
        assert!((oler_packing_bound(25.0, 20.0) - 39.867513459481287).abs() < 1e-12);
        // Near-square rectangle m±ε: bound ≈ (2/√3)m² for m = 1000.
        let (m, eps) = (1000.0, 41.623);
        let bound = oler_packing_bound(m * m - eps * eps, 4.0 * m);
        assert!((bound - 2.0 / 3.0f64.sqrt() * 1e6).abs() / 1e6 < 3e-3);
    }

    #[test]
    fn certificates_name_their_witnesses() {
        // Holed restricted minimizer.
        let c = nonregular_certificate(17, &[]);
        assert!(!c.regular_possible);
        assert!(c.reason.contains("(4,5,2,0,0,1)"), "{}", c.reason);
        // Better known packing.
        let witness = Record {
            n: 13,
            perimeter: 29.851847510,
            source: RecordSource::Solved,
            exact_value: None,
            packing: None,
        };
        let c = nonregular_certificate(13, &[witness]);
        assert!(!c.regular_possible);
        assert!(c.reason.contains("solved") && c.reason.contains("29.851847510"), "{}", c.reason);
        // Regular optimum, no witness. P(36) = 2(13 + 2 + 5√3) = 30 + 10√3.
        let c = nonregular_certificate(36, &[]);
        assert!(c.regular_possible);
        assert!(c.reason.contains("30+10√3"), "{}", c.reason);
        // Without the witness, n=13's restricted optimum is hole-free.
        assert!(nonregular_certificate(13, &[]).regular_possible);
    }

    #[test]
    fn monotonicity_detects_swaps() {
        let mut records: Vec<Record> = (1..=12).map(restricted_record).collect();
        assert_eq!(records_monotone(&records), Vec::<u32>::new());
        // Swap the n=5 and n=6 values: n=5 now exceeds n=6.
        let (p5, p6) = (records[4].perimeter, records[5].perimeter);
        records[4].perimeter = p6;
        records[4].exact_value = None;
        records[5].perimeter = p5;
        records[5].exact_value = None;
        assert_eq!(records_monotone(&records), vec![5]);
        // A sub-restricted n=13 witness does not violate against n=14.
        let mut records: Vec<Record> = (12..=14).map(restricted_record).collect();
        records.push(Record {
            n: 13,
            perimeter: 29.851847510,
            source: RecordSource::Compacted,
            exact_value: None,
            packing: None,
        });
        assert_eq!(records_monotone(&records), Vec::<u32>::new());
    }

    #[test]
    fn record_store_merges_by_value() {
        let dir = tempfile::tempdir().unwrap();
        let store = RecordStore::open(dir.path()).unwrap();
        assert_eq!(store.get(7).unwrap(), None);

        let restricted = restricted_record(7);
        assert!(store.merge(&restricted).unwrap());
        assert_eq!(store.get(7).unwrap().unwrap(), restricted);

        // A worse candidate is rejected, a better one replaces.
        let mut worse = restricted.clone();
        worse.perimeter += 1.0;
        worse.exact_value = None;
        worse.source = RecordSource::Compacted;
        assert!(!store.merge(&worse).unwrap());
        let better = Record {
            n: 7,
            perimeter: 22.650622666683908,
            source: RecordSource::Improved,
            exact_value: None,
            packing: None,
        };
        assert!(store.merge(&better).unwrap());
        assert_eq!(store.get(7).unwrap().unwrap().source, RecordSource::Improved);

        // Index lists records ascending with their sources.
        store.merge(&restricted_record(3)).unwrap();
        let index = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
        let lines: Vec<&str> = index.lines().collect();
        assert_eq!(lines[0], "n,perimeter,source");
        assert!(lines[1].starts_with("3,") && lines[1].ends_with(",restricted"));
        assert!(lines[2].starts_with("7,") && lines[2].ends_with(",improved"));
        let written: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(written, better.perimeter);
        assert_eq!(store.all().unwrap().len(), 2);
        // No leftover temporaries from atomic replacement.
        assert!(!dir.path().join("n00007.tmp").exists());
    }

    #[test]
    fn inconsistent_records_are_rejected() {
        let p = tuple_to_packing(&RnTuple::new(2, 0, 0, 2, 0, 0));
        let good = Record {
            n: 4,
            perimeter: tuple_perimeter(&RnTuple::new(2, 0, 0, 2, 0, 0)).to_f64(),
            source: RecordSource::Restricted,
            exact_value: None,
            packing: Some(p.clone()),
        };
        assert!(check_record(&good).is_ok());
        let bad = Record { perimeter: good.perimeter - 0.5, ..good.clone() };
        assert!(matches!(check_record(&bad), Err(RecordError::Inconsistent { .. })));
        let bad_exact = Record {
            exact_value: Some(Q3::new(1, 0)),
            packing: None,
            ..good
        };
        assert!(check_record(&bad_exact).is_err());

        let dir = tempfile::tempdir().unwrap();
        let store = RecordStore::open(dir.path()).unwrap();
        assert!(store.merge(&bad).is_err());
    }
}
