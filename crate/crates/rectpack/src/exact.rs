//! Arithmetic in ℤ[√3], the ring of numbers `x + y·√3` with integer `x, y`.
//!
//! Every rectangle dimension produced by the restricted search has the form
//! `x + y·√3` (hexagonal rows contribute √3 per row gap, square rows and
//! margins contribute integers), so perimeters and areas of candidate
//! packings can be compared exactly. Ties and near-ties are common — tables
//! list every tying minimizer — and the closest competing perimeters differ
//! by amounts far below what naive floating-point evaluation distinguishes
//! at large `n`, so ordering is decided by integer case analysis instead.
//!
//! Coefficients are `i64`. Addition and multiplication detect overflow and
//! report it as an error rather than wrapping. Comparison is total and
//! infallible: it widens internally to 128-bit integers, which cannot
//! overflow (see [`Q3::cmp`]).

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// `⌊√3·2³⁸⁴⌋` in little-endian 64-bit limbs, for the exact fixed-point
/// evaluation in [`Q3::to_f64`]. 384 fractional bits make the rounding
/// decision exact for every coefficient pair: `x + y√3` (when nonzero) is
/// bounded away from zero and from every f64 rounding boundary by more
/// than `2⁻³⁰⁵` (since `|x + y√3| = |x² − 3y²| / |x − y√3| ≥ 1/(|x| + 2|y|)`
/// for integers not both zero), while the truncation error here is at most
/// `|y|·2⁻³⁸⁴ ≤ 2⁻³²¹`.
const SQRT3_LIMBS: [u64; 7] = [
    0xa993_0aae_1222_8f87,
    0x490b_cfd9_5ef1_5dbd,
    0xc720_a648_6e45_a6e2,
    0x25d8_34cc_53da_4798,
    0x2574_2d70_78b8_3b89,
    0xbb67_ae85_84ca_a73b,
    0x0000_0000_0000_0001,
];

/// Fractional bits of [`SQRT3_LIMBS`].
const SQRT3_FRAC_BITS: i32 = 384;

/// An element `x + y·√3` of ℤ[√3].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Q3 {
    /// Rational (integer) part.
    pub x: i64,
    /// Coefficient of √3.
    pub y: i64,
}

/// Overflow of a fixed-width integer range during checked arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("integer overflow in {op}")]
pub struct Overflow {
    /// Which operation overflowed (for ring operations: "add", "sub",
    /// or "mul").
    pub op: &'static str,
}

impl Q3 {
    pub const ZERO: Q3 = Q3 { x: 0, y: 0 };
    pub const ONE: Q3 = Q3 { x: 1, y: 0 };
    /// The generator √3 itself.
    pub const SQRT3: Q3 = Q3 { x: 0, y: 1 };

    pub const fn new(x: i64, y: i64) -> Q3 {
        Q3 { x, y }
    }

    /// Embeds an integer as `x + 0·√3`.
    pub const fn from_int(x: i64) -> Q3 {
        Q3 { x, y: 0 }
    }

    /// Both coefficients as a pair `(x, y)`.
    pub const fn coeffs(self) -> (i64, i64) {
        (self.x, self.y)
    }

    /// Sum, reporting coefficient overflow instead of wrapping.
    pub fn checked_add(self, rhs: Q3) -> Result<Q3, Overflow> {
        match (self.x.checked_add(rhs.x), self.y.checked_add(rhs.y)) {
            (Some(x), Some(y)) => Ok(Q3 { x, y }),
            _ => Err(Overflow { op: "add" }),
        }
    }

    /// Difference, reporting coefficient overflow instead of wrapping.
    pub fn checked_sub(self, rhs: Q3) -> Result<Q3, Overflow> {
        match (self.x.checked_sub(rhs.x), self.y.checked_sub(rhs.y)) {
            (Some(x), Some(y)) => Ok(Q3 { x, y }),
            _ => Err(Overflow { op: "sub" }),
        }
    }

    /// Product `(a + b√3)(c + d√3) = (ac + 3bd) + (ad + bc)√3`, reporting
    /// coefficient overflow instead of wrapping. Intermediate products are
    /// formed in 128 bits, so overflow is detected exactly on the final
    /// coefficients, not on intermediate terms.
    pub fn checked_mul(self, rhs: Q3) -> Result<Q3, Overflow> {
        let (a, b) = (self.x as i128, self.y as i128);
        let (c, d) = (rhs.x as i128, rhs.y as i128);
        let x = a * c + 3 * b * d;
        let y = a * d + b * c;
        match (i64::try_from(x), i64::try_from(y)) {
            (Ok(x), Ok(y)) => Ok(Q3 { x, y }),
            _ => Err(Overflow { op: "mul" }),
        }
    }

    /// Product with a plain integer.
    pub fn checked_mul_int(self, k: i64) -> Result<Q3, Overflow> {
        self.checked_mul(Q3::from_int(k))
    }

    /// The closest `f64` to `x + y·√3`, correctly rounded for every
    /// coefficient pair.
    ///
    /// Evaluated exactly in 448-bit fixed point (`|x|·2³⁸⁴ ± |y|·⌊√3·2³⁸⁴⌋`)
    /// and then rounded once to nearest-even; see [`SQRT3_LIMBS`] for why
    /// the fixed-point precision settles every rounding decision. Plain
    /// double arithmetic would be off by one unit in the last place for
    /// many inputs (already for `16 + 4√3`).
    pub fn to_f64(self) -> f64 {
        if self.y == 0 {
            return self.x as f64;
        }
        // |y|·√3 and |x|, both scaled by 2³⁸⁴.
        let y_sqrt3 = mul_limbs_small(&SQRT3_LIMBS, self.y.unsigned_abs());
        let mut x_abs = [0u64; 8];
        x_abs[6] = self.x.unsigned_abs();
        let (magnitude, negative) = if (self.x >= 0) == (self.y > 0) {
            (add_limbs(&x_abs, &y_sqrt3), self.y < 0)
        } else if cmp_limbs(&x_abs, &y_sqrt3) == Ordering::Greater {
            (sub_limbs(&x_abs, &y_sqrt3), self.x < 0)
        } else {
            (sub_limbs(&y_sqrt3, &x_abs), self.y < 0)
        };
        let m = round_fixed_to_f64(&magnitude);
        if negative {
            -m
        } else {
            m
        }
    }

    /// Sign of the number: -1, 0, or +1. Infallible (see [`Q3::cmp`]).
    pub fn signum(self) -> i32 {
        match self.cmp(&Q3::ZERO) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }
}

impl Ord for Q3 {
    /// Total order of ℤ[√3] as a subring of the reals, decided exactly.
    ///
    /// `a > b` iff `d = dx + dy·√3 > 0` with `dx = a.x − b.x`,
    /// `dy = a.y − b.y` formed in `i128` (differences of `i64` never
    /// overflow there). When the signs of `dx` and `dy` agree the sign of
    /// `d` is immediate; when they differ, `|dx| > √3·|dy|` is decided by
    /// comparing `dx²` with `3·dy²`. `dx²` fits `u128` because
    /// `|dx| ≤ 2⁶⁴ − 1`; if `3·dy²` overflows `u128` it necessarily
    /// exceeds `dx²`, so the comparison never fails. √3 being irrational,
    /// `d = 0` only when `dx = dy = 0`.
    fn cmp(&self, other: &Q3) -> Ordering {
        let dx = self.x as i128 - other.x as i128;
        let dy = self.y as i128 - other.y as i128;
        match (dx.cmp(&0), dy.cmp(&0)) {
            (Ordering::Equal, Ordering::Equal) => Ordering::Equal,
            (Ordering::Greater | Ordering::Equal, Ordering::Greater | Ordering::Equal) => {
                Ordering::Greater
            }
            (Ordering::Less | Ordering::Equal, Ordering::Less | Ordering::Equal) => Ordering::Less,
            (dx_sign, _) => {
                // Signs differ and both are nonzero: compare magnitudes.
                let dx2 = dx.unsigned_abs().pow(2);
                let positive = match dy.unsigned_abs().pow(2).checked_mul(3) {
                    None => false, // 3·dy² > u128::MAX ≥ dx²
                    Some(dy2_3) => dx2 > dy2_3,
                };
                // d > 0 iff the dominant term is the positive one.
                if positive == (dx_sign == Ordering::Greater) {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }
}

impl PartialOrd for Q3 {
    fn partial_cmp(&self, other: &Q3) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::ops::Add for Q3 {
    type Output = Q3;
    fn add(self, rhs: Q3) -> Q3 {
        self.checked_add(rhs).expect("Q3 addition overflow")
    }
}

impl std::ops::Sub for Q3 {
    type Output = Q3;
    fn sub(self, rhs: Q3) -> Q3 {
        self.checked_sub(rhs).expect("Q3 subtraction overflow")
    }
}

impl std::ops::Mul for Q3 {
    type Output = Q3;
    fn mul(self, rhs: Q3) -> Q3 {
        self.checked_mul(rhs).expect("Q3 multiplication overflow")
    }
}

impl std::ops::Neg for Q3 {
    type Output = Q3;
    fn neg(self) -> Q3 {
        Q3::ZERO - self
    }
}

impl fmt::Display for Q3 {
    /// Renders as `x+y√3`, omitting zero parts: `16+4√3`, `12-2√3`, `6`,
    /// `√3`, `-4√3`, `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.x, self.y) {
            (x, 0) => write!(f, "{x}"),
            (0, y) => write!(f, "{}√3", Coeff(y)),
            (x, y) if y < 0 => write!(f, "{x}-{}√3", Coeff(-y)),
            (x, y) => write!(f, "{x}+{}√3", Coeff(y)),
        }
    }
}

/// Helper that prints a √3 coefficient, eliding a unit factor.
struct Coeff(i64);

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            1 => Ok(()),
            -1 => write!(f, "-"),
            k => write!(f, "{k}"),
        }
    }
}

// Little-endian multi-limb helpers for the exact fixed-point evaluation in
// `Q3::to_f64`. All quantities are 448-bit non-negative integers scaled by
// 2³⁸⁴; the widths below never overflow for i64 coefficients (|x|·2³⁸⁴ and
// |y|·√3·2³⁸⁴ both stay under 2⁴⁴⁹⁻¹).

fn mul_limbs_small(a: &[u64; 7], m: u64) -> [u64; 8] {
    let mut out = [0u64; 8];
    let mut carry: u128 = 0;
    for (o, &limb) in out.iter_mut().zip(a.iter()) {
        let p = limb as u128 * m as u128 + carry;
        *o = p as u64;
        carry = p >> 64;
    }
    out[7] = carry as u64;
    out
}

fn add_limbs(a: &[u64; 8], b: &[u64; 8]) -> [u64; 8] {
    let mut out = [0u64; 8];
    let mut carry = 0u64;
    for i in 0..8 {
        let (s1, c1) = a[i].overflowing_add(b[i]);
        let (s2, c2) = s1.overflowing_add(carry);
        out[i] = s2;
        carry = (c1 as u64) + (c2 as u64);
    }
    debug_assert_eq!(carry, 0, "fixed-point sum exceeds 512 bits");
    out
}

/// `a − b`, requiring `a ≥ b`.
fn sub_limbs(a: &[u64; 8], b: &[u64; 8]) -> [u64; 8] {
    let mut out = [0u64; 8];
    let mut borrow = 0u64;
    for i in 0..8 {
        let (d1, b1) = a[i].overflowing_sub(b[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        out[i] = d2;
        borrow = (b1 as u64) + (b2 as u64);
    }
    debug_assert_eq!(borrow, 0, "fixed-point subtraction went negative");
    out
}

fn cmp_limbs(a: &[u64; 8], b: &[u64; 8]) -> Ordering {
    for i in (0..8).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Rounds a non-negative 512-bit fixed-point value (scaled by 2³⁸⁴) to the
/// nearest f64, ties to even. Exact: the 54 leading bits plus a sticky bit
/// determine the result, and the final `mantissa·2^e` multiplication is by
/// a power of two within normal range.
fn round_fixed_to_f64(m: &[u64; 8]) -> f64 {
    let mut bitlen = 0u32;
    for i in (0..8).rev() {
        if m[i] != 0 {
            bitlen = 64 * i as u32 + 64 - m[i].leading_zeros();
            break;
        }
    }
    if bitlen == 0 {
        return 0.0;
    }
    if bitlen <= 54 {
        // Fewer bits than a mantissa: the value is exact in f64.
        return m[0] as f64 * 2f64.powi(-SQRT3_FRAC_BITS);
    }
    let shift = bitlen - 54;
    let limb = (shift / 64) as usize;
    let off = shift % 64;
    // The top 54 bits (quotient incl. round bit) span at most two limbs.
    let mut q = m[limb] >> off;
    if off > 0 && limb + 1 < 8 {
        q |= m[limb + 1] << (64 - off);
    }
    debug_assert!(q >> 54 == 0 || bitlen - shift == 54);
    let sticky = m[..limb].iter().any(|&l| l != 0)
        || (off > 0 && m[limb] & ((1u64 << off) - 1) != 0);
    let mut mantissa = q >> 1;
    if q & 1 == 1 && (sticky || mantissa & 1 == 1) {
        mantissa += 1;
    }
    mantissa as f64 * 2f64.powi(bitlen as i32 - 53 - SQRT3_FRAC_BITS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_and_accessors() {
        let a = Q3::new(16, 4);
        assert_eq!(a.coeffs(), (16, 4));
        assert_eq!(Q3::from_int(-3), Q3::new(-3, 0));
        assert_eq!(Q3::ZERO + Q3::ONE, Q3::ONE);
        assert_eq!(Q3::SQRT3 * Q3::SQRT3, Q3::from_int(3));
    }

    #[test]
    fn ring_operations() {
        // (2 + √3)(2 - √3) = 4 - 3 = 1: the unit norm identity.
        assert_eq!(Q3::new(2, 1) * Q3::new(2, -1), Q3::ONE);
        // (1 + √3)² = 4 + 2√3.
        assert_eq!(Q3::new(1, 1) * Q3::new(1, 1), Q3::new(4, 2));
        assert_eq!(Q3::new(16, 4) + Q3::new(-4, 8), Q3::new(12, 12));
        assert_eq!(Q3::new(16, 4) - Q3::new(-4, 8), Q3::new(20, -4));
        assert_eq!(-Q3::new(16, -4), Q3::new(-16, 4));
        assert_eq!(Q3::new(2, 1).checked_mul_int(12), Ok(Q3::new(24, 12)));
    }

    #[test]
    fn overflow_is_reported() {
        let big = Q3::new(i64::MAX, 0);
        assert_eq!(big.checked_add(Q3::ONE), Err(Overflow { op: "add" }));
        assert_eq!(Q3::new(i64::MIN, 0).checked_sub(Q3::ONE), Err(Overflow { op: "sub" }));
        assert_eq!(big.checked_mul(Q3::new(2, 0)), Err(Overflow { op: "mul" }));
        // 3·b·d pushing past i64 on the rational part.
        assert_eq!(
            Q3::new(0, i64::MAX / 2).checked_mul(Q3::new(0, 2)),
            Err(Overflow { op: "mul" })
        );
        // Large intermediates that cancel back into range are fine.
        assert_eq!(
            Q3::new(i64::MAX, 0).checked_add(Q3::new(i64::MIN, 0)),
            Ok(Q3::from_int(-1))
        );
    }

    #[test]
    fn comparison_case_analysis() {
        // Same-sign fast paths.
        assert!(Q3::new(1, 1) > Q3::ZERO);
        assert!(Q3::new(-1, -1) < Q3::ZERO);
        assert_eq!(Q3::new(7, -2).cmp(&Q3::new(7, -2)), Ordering::Equal);
        // Mixed signs: 16 + 4√3 < 23  (22.928… < 23).
        assert!(Q3::new(16, 4) < Q3::from_int(23));
        // 16 + 4√3 > 22  (22.928… > 22).
        assert!(Q3::new(16, 4) > Q3::from_int(22));
        // 7 vs 4√3 = 6.928…: positive rational part dominates.
        assert!(Q3::new(7, -4) > Q3::ZERO);
        // 6.92 < 7: negative rational part dominates... the other way.
        assert!(Q3::new(-7, 4) < Q3::ZERO);
        // Near-tie decided exactly: 97 + 56√3 vs 194 (Pell-like pair):
        // 56·√3 = 96.9948…, so 97 + 56√3 = 193.9948… < 194.
        assert!(Q3::new(97, 56) < Q3::from_int(194));
        // …and 26 + 15√3 = 51.98… < 52.
        assert!(Q3::new(26, 15) < Q3::from_int(52));
        // Extreme coefficients do not overflow the comparison.
        assert!(Q3::new(i64::MAX, i64::MIN) < Q3::new(i64::MIN, i64::MAX));
        assert!(Q3::new(i64::MAX, -2) > Q3::new(i64::MIN, 2));
    }

    #[test]
    fn closest_double_evaluation() {
        // 16 + 4√3 = 22.92820323027550917…; the nearest double prints as
        // 22.92820323027551 (checked against 200-bit evaluation). Note
        // plain double arithmetic (16.0 + 4.0·√3̃) lands one ulp low.
        assert_eq!(Q3::new(16, 4).to_f64(), 22.92820323027551);
        // 2 + √3 = 3.7320508075688772935…
        assert_eq!(Q3::new(2, 1).to_f64(), 3.7320508075688772);
        assert_eq!(Q3::new(20, 10).to_f64(), 37.32050807568877);
        assert_eq!(Q3::ZERO.to_f64(), 0.0);
        assert_eq!(Q3::new(-5, 0).to_f64(), -5.0);
        // Negative √3 coefficient: 2 − √3 = 0.26794919243112270647…
        assert_eq!(Q3::new(2, -1).to_f64(), 0.2679491924311227);
        // Sign/magnitude case analysis of the fixed-point path.
        assert_eq!(Q3::new(-16, -4).to_f64(), -22.92820323027551);
        assert_eq!(Q3::new(-2, 1).to_f64(), -0.2679491924311227);
        assert_eq!(Q3::new(7, -4).to_f64(), 0.07179676972449082);
        assert_eq!(Q3::new(-7, 4).to_f64(), -0.07179676972449082);
        assert_eq!(Q3::new(0, 1).to_f64(), 1.7320508075688772);
        assert_eq!(Q3::new(0, -1).to_f64(), -1.7320508075688772);
        // A Pell pair (x² − 3y² = 1) cancels catastrophically yet stays
        // correctly rounded: 708158977 − 408855776√3 = 7.0605…e−10.
        assert_eq!(Q3::new(708_158_977, -408_855_776).to_f64(), 7.060561487452556e-10);
        assert_eq!(Q3::new(i64::MAX, 0).to_f64(), 9.223372036854776e18);
    }

    #[test]
    fn display_format() {
        assert_eq!(Q3::new(16, 4).to_string(), "16+4√3");
        assert_eq!(Q3::new(12, -2).to_string(), "12-2√3");
        assert_eq!(Q3::new(6, 0).to_string(), "6");
        assert_eq!(Q3::new(0, 1).to_string(), "√3");
        assert_eq!(Q3::new(0, -1).to_string(), "-√3");
        assert_eq!(Q3::new(0, -4).to_string(), "-4√3");
        assert_eq!(Q3::new(2, 1).to_string(), "2+√3");
        assert_eq!(Q3::ZERO.to_string(), "0");
    }

    #[test]
    fn serde_round_trip() {
        let a = Q3::new(16, 4);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"x":16,"y":4}"#);
        let back: Q3 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
