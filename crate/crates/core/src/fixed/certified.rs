//! Correctly rounded evaluation of the irrational operations.
//!
//! Quotients by square roots are decided exactly by squaring both sides in
//! integer arithmetic. `exp` and the sigmoid gate are enclosed in a
//! fixed-point interval whose endpoints must round to the same grid point;
//! the working precision doubles until they do, up to [`MAX_WORKING_BITS`].

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::scalar::{FixedScalar, Precision};
use super::FixedError;

pub const INITIAL_WORKING_BITS: u32 = 128;
pub const MAX_WORKING_BITS: u32 = 4096;

/// Nearest integer to `sqrt(num / den)`, ties toward zero. `den > 0`.
pub(crate) fn nearest_sqrt_ratio(num: &BigUint, den: &BigUint) -> BigUint {
    debug_assert!(!den.is_zero());
    let f = (num / den).sqrt();
    // sqrt(num/den) ≥ f + 1/2  ⟺  4·num ≥ (2f + 1)²·den; equality is a tie.
    let two_f1: BigUint = &f * 2u32 + 1u32;
    let lhs: BigUint = num * 4u32;
    let rhs = &two_f1 * &two_f1 * den;
    if lhs > rhs {
        f + 1u32
    } else {
        f
    }
}

fn nearest_sqrt_ratio_u128(num: u128, den: u128) -> Option<u128> {
    let f = (num / den).isqrt();
    let two_f1 = f.checked_mul(2)?.checked_add(1)?;
    let lhs = num.checked_mul(4)?;
    let rhs = two_f1.checked_mul(two_f1)?.checked_mul(den)?;
    Some(if lhs > rhs { f + 1 } else { f })
}

/// A nonnegative real magnitude given as `sqrt(num / den)` with integer factors.
pub(crate) struct SqrtRatio {
    pub num: Vec<u128>,
    pub den: Vec<u128>,
}

fn product_u128(factors: &[u128]) -> Option<u128> {
    factors.iter().try_fold(1u128, |acc, &f| acc.checked_mul(f))
}

fn product_big(factors: &[u128]) -> BigUint {
    factors
        .iter()
        .fold(BigUint::one(), |acc, &f| acc * BigUint::from(f))
}

/// Rounds `sign · sqrt(num/den)` (already expressed in grid units) to the grid.
pub(crate) fn round_signed_sqrt(p: Precision, negative: bool, ratio: &SqrtRatio) -> FixedScalar {
    let mag: u128 = match (product_u128(&ratio.num), product_u128(&ratio.den)) {
        (Some(n), Some(d)) => match nearest_sqrt_ratio_u128(n, d) {
            Some(m) => m,
            None => big_to_u128_saturating(&nearest_sqrt_ratio(
                &BigUint::from(n),
                &BigUint::from(d),
            )),
        },
        _ => big_to_u128_saturating(&nearest_sqrt_ratio(
            &product_big(&ratio.num),
            &product_big(&ratio.den),
        )),
    };
    let mag = mag.min(i128::MAX as u128) as i128;
    p.saturate(if negative { -mag } else { mag })
}

fn big_to_u128_saturating(v: &BigUint) -> u128 {
    v.to_u128().unwrap_or(u128::MAX)
}

/// Closed interval `[lo, hi] · 2^-bits`.
struct Interval {
    lo: BigUint,
    hi: BigUint,
    bits: u32,
}

fn ceil_div(a: &BigUint, b: &BigUint) -> BigUint {
    let (q, r) = a.div_rem(b);
    if r.is_zero() {
        q
    } else {
        q + 1u32
    }
}

/// Encloses `exp(k · 2^-s)` for `k ≥ 0` with at least `bits` fractional bits.
fn exp_nonneg_interval(k: u64, s: u32, bits: u32) -> Interval {
    // Halve the argument r times so that y = k / 2^{s+r} < 1/2.
    let klen = 64 - k.leading_zeros();
    let r = (klen + 1).saturating_sub(s);
    let w = bits + r + 16;
    let one = BigUint::one() << w;
    let y = BigUint::from(k) << (w - s - r);

    let mut term_lo = one.clone();
    let mut term_hi = one.clone();
    let mut sum_lo = one.clone();
    let mut sum_hi = one.clone();
    let mut i: u32 = 1;
    loop {
        let denom = BigUint::from(i) << w;
        term_lo = (&term_lo * &y) / &denom;
        term_hi = ceil_div(&(&term_hi * &y), &denom);
        sum_lo += &term_lo;
        sum_hi += &term_hi;
        if term_hi <= BigUint::one() {
            break;
        }
        i += 1;
    }
    // Tail after the last term is below one ulp because y < 1/2.
    sum_hi += 2u32;

    let mut lo = sum_lo;
    let mut hi = sum_hi;
    for _ in 0..r {
        lo = (&lo * &lo) >> w;
        hi = ceil_div(&(&hi * &hi), &one);
    }
    Interval { lo, hi, bits: w }
}

/// Encloses `exp(raw · 2^-s)`.
fn exp_interval(raw: i64, s: u32, bits: u32) -> Interval {
    let iv = exp_nonneg_interval(raw.unsigned_abs(), s, bits);
    if raw >= 0 {
        return iv;
    }
    let w = iv.bits;
    let num = BigUint::one() << (2 * w);
    Interval {
        lo: &num / &iv.hi,
        hi: ceil_div(&num, &iv.lo),
        bits: w,
    }
}

/// Grid numerator nearest to `num / den` with `num, den ≥ 0`, saturating.
fn round_big_ratio(p: Precision, num: &BigUint, den: &BigUint) -> i64 {
    let scaled = num << p.bits();
    let (q, r) = scaled.div_rem(den);
    let twice_r: BigUint = r * 2u32;
    let q = if &twice_r > den { q + 1u32 } else { q };
    let max = p.max_raw() as u64;
    q.to_u64().map_or(max, |v| v.min(max)) as i64
}

fn settle<F>(p: Precision, what: &'static str, raw: i64, mut enclose: F) -> Result<i64, FixedError>
where
    F: FnMut(u32) -> (i64, i64),
{
    let mut bits = INITIAL_WORKING_BITS;
    while bits <= MAX_WORKING_BITS {
        let (a, b) = enclose(bits);
        if a == b {
            return Ok(a);
        }
        bits *= 2;
    }
    Err(FixedError::AmbiguousRounding {
        op: what,
        input: super::scalar::fraction_string(raw as i128, p.bits()),
    })
}

type Memo = RwLock<HashMap<(u8, u32, i64), i64>>;

fn memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memoized<F>(tag: u8, z: FixedScalar, compute: F) -> Result<FixedScalar, FixedError>
where
    F: FnOnce() -> Result<i64, FixedError>,
{
    let p = z.precision();
    let key = (tag, p.bits(), z.raw());
    if let Some(&raw) = memo().read().expect("memo poisoned").get(&key) {
        return Ok(p.saturate(raw as i128));
    }
    let raw = compute()?;
    memo().write().expect("memo poisoned").insert(key, raw);
    Ok(p.saturate(raw as i128))
}

/// `[exp(z)]_s`, correctly rounded.
pub fn exp_s(z: FixedScalar) -> Result<FixedScalar, FixedError> {
    let p = z.precision();
    let s = p.bits();
    let raw = z.raw();
    if raw == 0 {
        return Ok(p.one());
    }
    // e^{s+1} > 2^s > B_s, and e^{-(s+1)} < 2^{-(s+1)} = half a step.
    let cutoff = (s as i64 + 1) << s;
    if raw >= cutoff {
        return Ok(p.max_value());
    }
    if raw <= -cutoff {
        return Ok(p.zero());
    }
    memoized(0, z, || {
        settle(p, "exp", raw, |bits| {
            let iv = exp_interval(raw, s, bits);
            let den = BigUint::one() << iv.bits;
            (round_big_ratio(p, &iv.lo, &den), round_big_ratio(p, &iv.hi, &den))
        })
    })
}

/// `[1 / (1 + exp(-z))]_s`, correctly rounded.
pub fn sigmoid_s(z: FixedScalar) -> Result<FixedScalar, FixedError> {
    let p = z.precision();
    let s = p.bits();
    let raw = z.raw();
    if raw == 0 {
        return Ok(p.saturate(p.one_raw() as i128 / 2));
    }
    let cutoff = (s as i64 + 1) << s;
    if raw >= cutoff {
        return Ok(p.one());
    }
    if raw <= -cutoff {
        return Ok(p.zero());
    }
    memoized(1, z, || {
        settle(p, "sigmoid", raw, |bits| {
            // σ is decreasing in e^{-z}.
            let iv = exp_interval(-raw, s, bits);
            let one = BigUint::one() << iv.bits;
            let lo = round_big_ratio(p, &one, &(&one + &iv.hi));
            let hi = round_big_ratio(p, &one, &(&one + &iv.lo));
            (lo, hi)
        })
    })
}
