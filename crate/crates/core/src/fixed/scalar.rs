use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FixedError;

/// Fractional-bit count `s` of the constant-precision grid.
///
/// The grid is `{0} ∪ {±k·2^-s : 1 ≤ k ≤ 2^{2s} − 1}`, so the step is
/// `2^-s` and the largest magnitude is `2^s − 2^-s`. Supported range is
/// `2..=16`, which keeps every product and wide sum inside `i128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision {
    s: u32,
}

impl Precision {
    pub const MIN_BITS: u32 = 2;
    pub const MAX_BITS: u32 = 16;

    pub fn new(s: u32) -> Result<Self, FixedError> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&s) {
            return Err(FixedError::UnsupportedPrecision(s));
        }
        Ok(Self { s })
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.s
    }

    /// Raw numerator of `1.0`.
    #[inline]
    pub fn one_raw(self) -> i64 {
        1i64 << self.s
    }

    /// Largest admissible numerator, `2^{2s} − 1`.
    #[inline]
    pub fn max_raw(self) -> i64 {
        (1i64 << (2 * self.s)) - 1
    }

    /// Number of elements of the grid, `2·(2^{2s} − 1) + 1`.
    pub fn grid_size(self) -> u64 {
        2 * self.max_raw() as u64 + 1
    }

    #[inline]
    pub fn zero(self) -> FixedScalar {
        FixedScalar { raw: 0, precision: self }
    }

    #[inline]
    pub fn one(self) -> FixedScalar {
        FixedScalar { raw: self.one_raw(), precision: self }
    }

    /// Grid step `δ = 2^-s`.
    #[inline]
    pub fn delta(self) -> FixedScalar {
        FixedScalar { raw: 1, precision: self }
    }

    /// Saturation bound `B_s = 2^s − 2^-s`.
    #[inline]
    pub fn max_value(self) -> FixedScalar {
        FixedScalar { raw: self.max_raw(), precision: self }
    }

    /// Builds a grid element from its numerator, rejecting out-of-range values.
    pub fn scalar(self, raw: i64) -> Result<FixedScalar, FixedError> {
        if raw.unsigned_abs() > self.max_raw() as u64 {
            return Err(FixedError::OutOfRange { raw, s: self.s });
        }
        Ok(FixedScalar { raw, precision: self })
    }

    /// Numerator clamped to `±(2^{2s} − 1)`.
    #[inline]
    pub(crate) fn saturate(self, raw: i128) -> FixedScalar {
        let max = self.max_raw() as i128;
        FixedScalar {
            raw: raw.clamp(-max, max) as i64,
            precision: self,
        }
    }

    /// Grid element for a small integer, saturating.
    pub fn from_int(self, v: i64) -> FixedScalar {
        self.saturate((v as i128) << self.s)
    }
}

impl TryFrom<u32> for Precision {
    type Error = FixedError;
    fn try_from(s: u32) -> Result<Self, Self::Error> {
        Precision::new(s)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.s
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={}", self.s)
    }
}

/// An element of the constant-precision grid, stored as `raw · 2^-s`.
///
/// Arithmetic through `+ - *` is the rounded scalar arithmetic: the exact
/// rational result is rounded to the nearest grid point with ties toward
/// the smaller magnitude, saturating at `±B_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedScalar {
    raw: i64,
    precision: Precision,
}

impl FixedScalar {
    #[inline]
    pub fn raw(self) -> i64 {
        self.raw
    }

    #[inline]
    pub fn precision(self) -> Precision {
        self.precision
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.raw == 0
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.raw > 0
    }

    pub fn abs(self) -> Self {
        Self { raw: self.raw.abs(), ..self }
    }

    /// Lossy conversion for display and plotting only.
    pub fn to_f64(self) -> f64 {
        self.raw as f64 / self.precision.one_raw() as f64
    }

    /// Exact value as a reduced fraction, e.g. `"3/16"`, `"-5/4"`, `"2"`.
    pub fn to_fraction_string(self) -> String {
        fraction_string(self.raw as i128, self.precision.bits())
    }

    #[inline]
    fn check(self, other: Self) {
        assert_eq!(
            self.precision, other.precision,
            "mixed-precision arithmetic is not defined"
        );
    }

    /// `[a + b]_s`
    #[inline]
    pub fn add_s(self, other: Self) -> Self {
        self.check(other);
        self.precision.saturate(self.raw as i128 + other.raw as i128)
    }

    /// `[a − b]_s`
    #[inline]
    pub fn sub_s(self, other: Self) -> Self {
        self.check(other);
        self.precision.saturate(self.raw as i128 - other.raw as i128)
    }

    /// `[a · b]_s`, rounding the exact product `k_a·k_b·2^{-2s}`.
    #[inline]
    pub fn mul_s(self, other: Self) -> Self {
        self.check(other);
        let prod = self.raw as i128 * other.raw as i128;
        let k = round_shift(prod, self.precision.bits());
        self.precision.saturate(k)
    }

    #[inline]
    pub fn relu(self) -> Self {
        if self.raw > 0 {
            self
        } else {
            self.precision.zero()
        }
    }

    pub fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.check(lo);
        self.check(hi);
        Self { raw: self.raw.clamp(lo.raw, hi.raw), ..self }
    }
}

impl PartialOrd for FixedScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.precision != other.precision {
            return None;
        }
        Some(self.raw.cmp(&other.raw))
    }
}

impl std::ops::Add for FixedScalar {
    type Output = FixedScalar;
    fn add(self, rhs: Self) -> Self {
        self.add_s(rhs)
    }
}

impl std::ops::Sub for FixedScalar {
    type Output = FixedScalar;
    fn sub(self, rhs: Self) -> Self {
        self.sub_s(rhs)
    }
}

impl std::ops::Mul for FixedScalar {
    type Output = FixedScalar;
    fn mul(self, rhs: Self) -> Self {
        self.mul_s(rhs)
    }
}

impl std::ops::Neg for FixedScalar {
    type Output = FixedScalar;
    fn neg(self) -> Self {
        Self { raw: -self.raw, ..self }
    }
}

impl fmt::Display for FixedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fraction_string())
    }
}

impl Serialize for FixedScalar {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("FixedScalar", 2)?;
        st.serialize_field("value", &self.to_fraction_string())?;
        st.serialize_field("raw", &self.raw)?;
        st.end()
    }
}

/// Nearest integer to `num / den` (`den > 0`), ties toward zero.
#[inline]
pub(crate) fn round_quotient(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let mag = num.unsigned_abs();
    let d = den as u128;
    let (q, r) = (mag / d, mag % d);
    // r < d, so 2r cannot overflow for d < 2^127
    let q = if r > d - r { q + 1 } else { q };
    if num < 0 {
        -(q as i128)
    } else {
        q as i128
    }
}

/// Nearest integer to `v · 2^-shift`, ties toward zero.
#[inline]
pub(crate) fn round_shift(v: i128, shift: u32) -> i128 {
    if shift == 0 {
        return v;
    }
    let mag = v.unsigned_abs();
    let q = mag >> shift;
    let r = mag & ((1u128 << shift) - 1);
    let half = 1u128 << (shift - 1);
    let q = if r > half { q + 1 } else { q };
    if v < 0 {
        -(q as i128)
    } else {
        q as i128
    }
}

pub(crate) fn fraction_string(num: i128, scale: u32) -> String {
    if num == 0 {
        return "0".to_string();
    }
    let tz = num.trailing_zeros().min(scale);
    let n = num >> tz;
    let e = scale - tz;
    if e == 0 {
        n.to_string()
    } else {
        format!("{}/{}", n, 1u128 << e)
    }
}
