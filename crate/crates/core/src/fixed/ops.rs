use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;

use super::certified::{exp_s, round_signed_sqrt, SqrtRatio};
use super::scalar::{fraction_string, round_quotient, round_shift, FixedScalar, Precision};
use super::vector::FixedVector;
use super::FixedError;

/// Exact dyadic value `num · 2^-scale` held by a temporary accumulator.
///
/// Never persisted: callers round it with [`Exact::round`] before the value
/// crosses an operator boundary. Stored in lowest terms so that `==` is
/// value equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exact {
    num: i128,
    scale: u32,
}

impl Exact {
    pub const ZERO: Exact = Exact { num: 0, scale: 0 };

    pub fn new(num: i128, scale: u32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        let tz = num.trailing_zeros().min(scale);
        Self { num: num >> tz, scale: scale - tz }
    }

    pub fn from_scalar(x: FixedScalar) -> Self {
        Self::new(x.raw() as i128, x.precision().bits())
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(v as i128, 0)
    }

    pub fn numerator(self) -> i128 {
        self.num
    }

    pub fn scale(self) -> u32 {
        self.scale
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn is_negative(self) -> bool {
        self.num < 0
    }

    /// Numerator over `2^scale` for any `scale ≥ self.scale()`.
    fn num_at(self, scale: u32) -> i128 {
        debug_assert!(scale >= self.scale);
        self.num << (scale - self.scale)
    }

    /// `[self]_s`
    pub fn round(self, p: Precision) -> FixedScalar {
        let s = p.bits();
        if self.scale >= s {
            p.saturate(round_shift(self.num, self.scale - s))
        } else {
            let shift = s - self.scale;
            let bound = p.max_raw() as i128;
            // saturate before shifting to keep the numerator in range
            if self.num.unsigned_abs() > (bound >> shift) as u128 + 1 {
                p.saturate(self.num.signum() * bound)
            } else {
                p.saturate(self.num << shift)
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / 2f64.powi(self.scale as i32)
    }
}

impl std::ops::Add for Exact {
    type Output = Exact;
    fn add(self, rhs: Self) -> Self {
        let scale = self.scale.max(rhs.scale);
        Exact::new(self.num_at(scale) + rhs.num_at(scale), scale)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fraction_string(self.num, self.scale))
    }
}

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// `[num / den]_s` for an exact rational input.
pub fn round_rational(p: Precision, num: i128, den: i128) -> Result<FixedScalar, FixedError> {
    if den == 0 {
        return Err(FixedError::ZeroDenominator);
    }
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    let s = p.bits();
    if let Some(scaled) = num.checked_mul(1i128 << s) {
        return Ok(p.saturate(round_quotient(scaled, den)));
    }
    let scaled = BigInt::from(num) << s;
    let den = BigInt::from(den);
    let (q, r) = scaled.abs().div_rem(&den);
    let twice_r: BigInt = r * 2;
    let q = if twice_r > den { q + 1 } else { q };
    let q = if scaled.is_negative() { -q } else { q };
    Ok(p.saturate(q.to_i128().unwrap_or(if scaled.is_negative() {
        i128::MIN + 1
    } else {
        i128::MAX
    })))
}

/// `[numerator / sqrt(radicand_num / radicand_den)]_s` with a positive radicand.
///
/// Decided exactly by comparing squares; no tie can be misjudged.
pub fn round_sqrt_quotient(
    p: Precision,
    numerator: Exact,
    radicand_num: Exact,
    radicand_den: u64,
) -> Result<FixedScalar, FixedError> {
    if radicand_num.num <= 0 || radicand_den == 0 {
        return Err(FixedError::ZeroDenominator);
    }
    if numerator.is_zero() {
        return Ok(p.zero());
    }
    // k*² = a² · 2^{2s − 2e₁ + e₂} · den / b
    let a = numerator.num.unsigned_abs();
    let b = radicand_num.num as u128;
    let exp2 = 2 * p.bits() as i64 - 2 * numerator.scale as i64 + radicand_num.scale as i64;
    let mut num = vec![a, a, radicand_den as u128];
    let mut den = vec![b];
    push_pow2(if exp2 >= 0 { &mut num } else { &mut den }, exp2.unsigned_abs());
    Ok(round_signed_sqrt(
        p,
        numerator.is_negative(),
        &SqrtRatio { num, den },
    ))
}

fn push_pow2(factors: &mut Vec<u128>, mut e: u64) {
    while e > 0 {
        let step = e.min(120);
        factors.push(1u128 << step);
        e -= step;
    }
}

/// Left-fold `((x₁ ⊕ x₂) ⊕ x₃) … ⊕ x_m`.
pub fn sum_strict(xs: &[FixedScalar]) -> Result<FixedScalar, FixedError> {
    let (first, rest) = xs.split_first().ok_or(FixedError::EmptyInput("sum_strict"))?;
    Ok(rest.iter().fold(*first, |acc, &x| acc.add_s(x)))
}

/// Exact accumulator sum. The empty sum is zero.
pub fn sum_acc(xs: &[FixedScalar]) -> Exact {
    let Some(first) = xs.first() else {
        return Exact::ZERO;
    };
    let p = first.precision();
    let total: i128 = xs
        .iter()
        .map(|x| {
            assert_eq!(x.precision(), p, "mixed-precision accumulator");
            x.raw() as i128
        })
        .sum();
    Exact::new(total, p.bits())
}

fn check_len(x: &FixedVector, y: &FixedVector) -> Result<(), FixedError> {
    assert_eq!(x.precision(), y.precision(), "mixed-precision vectors");
    if x.len() != y.len() {
        return Err(FixedError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// `sum_s(x₁ ⊗ y₁, …, x_m ⊗ y_m)`; the empty product is zero.
pub fn dot_strict(x: &FixedVector, y: &FixedVector) -> Result<FixedScalar, FixedError> {
    check_len(x, y)?;
    let p = x.precision();
    Ok(x.iter()
        .zip(y.iter())
        .map(|(a, b)| a.mul_s(b))
        .reduce(FixedScalar::add_s)
        .unwrap_or(p.zero()))
}

/// Exact `Σ x_r y_r` on the `2^{-2s}` grid.
pub fn dot_acc(x: &FixedVector, y: &FixedVector) -> Result<Exact, FixedError> {
    check_len(x, y)?;
    let total: i128 = x
        .raw()
        .iter()
        .zip(y.raw())
        .map(|(&a, &b)| a as i128 * b as i128)
        .sum();
    Ok(Exact::new(total, 2 * x.precision().bits()))
}

/// QK-normalized score `[⟨x, y⟩_acc / √m]_s`.
pub fn score_s(x: &FixedVector, y: &FixedVector) -> Result<FixedScalar, FixedError> {
    check_len(x, y)?;
    if x.is_empty() {
        return Err(FixedError::EmptyInput("score_s"));
    }
    let acc = dot_acc(x, y)?;
    round_sqrt_quotient(x.precision(), acc, Exact::from_int(x.len() as i64), 1)
}

fn sum_squares(x: &FixedVector) -> Exact {
    let total: i128 = x.raw().iter().map(|&k| k as i128 * k as i128).sum();
    Exact::new(total, 2 * x.precision().bits())
}

fn normalize_by(x: &FixedVector, divisor: u64) -> Result<FixedVector, FixedError> {
    let p = x.precision();
    let sq = sum_squares(x);
    if sq.is_zero() {
        return Ok(FixedVector::zeros(p, x.len()));
    }
    // rounding is odd, so each distinct magnitude is rounded once
    let mut seen: Vec<(i64, i64)> = Vec::new();
    let mut out = Vec::with_capacity(x.len());
    for &k in x.raw() {
        let mag = k.abs();
        let r = match seen.iter().find(|&&(m, _)| m == mag) {
            Some(&(_, r)) => r,
            None => {
                let r = round_sqrt_quotient(p, Exact::new(mag as i128, p.bits()), sq, divisor)?.raw();
                if seen.len() < 8 {
                    seen.push((mag, r));
                }
                r
            }
        };
        out.push(if k < 0 { -r } else { r });
    }
    Ok(FixedVector::from_raw(p, out).expect("normalized values lie on the grid"))
}

/// `RMSNorm_s`: `[x_r / ρ(x)]_s` with `ρ² = (1/m)·Σ x²`; zero maps to zero.
pub fn rmsnorm_s(x: &FixedVector) -> Result<FixedVector, FixedError> {
    if x.is_empty() {
        return Ok(x.clone());
    }
    normalize_by(x, x.len() as u64)
}

/// ℓ2-normalization `[x_r / ‖x‖₂]_s`; zero maps to zero.
pub fn l2norm_s(x: &FixedVector) -> Result<FixedVector, FixedError> {
    normalize_by(x, 1)
}

/// Rounded softmax: `e_r = [exp z_r]_s`, `D = Σ e_r` exactly, then `[e_r / D]_s`,
/// or the zero vector when `D = 0`.
pub fn softmax_s(z: &FixedVector) -> Result<FixedVector, FixedError> {
    let p = z.precision();
    let exps = z.iter().map(exp_s).collect::<Result<Vec<_>, _>>()?;
    let denom = sum_acc(&exps);
    if denom.is_zero() {
        return Ok(FixedVector::zeros(p, z.len()));
    }
    let d = denom.num_at(p.bits());
    let out = exps
        .iter()
        .map(|e| round_rational(p, e.raw() as i128, d))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FixedVector::from_scalars(p, &out))
}
