//! Independent oracles for the test suites. Nothing here calls the rounding
//! code under test; everything is derived from exact integer arithmetic.
#![allow(dead_code)]

use hybridsim::fixed::Precision;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn p(s: u32) -> Precision {
    Precision::new(s).unwrap()
}

/// ln 2 truncated to 60 decimal digits, so `LN2_DIGITS / 10^60 < ln 2 < (LN2_DIGITS + 1) / 10^60`.
pub const LN2_DIGITS: &str = "693147180559945309417232121458176568075500134360255254120680";

fn pow10(e: u32) -> BigUint {
    BigUint::from(10u32).pow(e)
}

/// Whether `k / 2^s > (s + 1)·ln 2`, certified against the truncated constant.
pub fn exceeds_half_step_log(k: u64, s: u32) -> bool {
    let lo: BigUint = LN2_DIGITS.parse().unwrap();
    let hi = &lo + 1u32;
    let lhs = BigUint::from(k) * pow10(60);
    let scale = BigUint::from(s + 1) << s;
    if lhs > &hi * &scale {
        true
    } else if lhs < &lo * &scale {
        false
    } else {
        panic!("ln 2 oracle not precise enough for k={k}, s={s}")
    }
}

/// Nearest integer to `√(a / b)`, ties toward zero.
pub fn nearest_sqrt(a: &BigUint, b: &BigUint) -> BigUint {
    let f = (a / b).sqrt();
    // round up iff (f + 1/2)² < a/b, i.e. (2f + 1)² b < 4a
    let twice = &f * 2u32 + 1u32;
    if &twice * &twice * b < a * 4u32 {
        f + 1u32
    } else {
        f
    }
}

/// Grid numerator of `[√(a/b)]_s`.
pub fn round_sqrt_oracle(a: u64, b: u64, s: u32) -> i64 {
    let a = BigUint::from(a) << (2 * s);
    nearest_sqrt(&a, &BigUint::from(b)).to_i64().unwrap()
}

/// Exact partial sum of `e^x`, `x = k / 2^s ≥ 0`, as `(num, den)` plus the
/// numerator of a tail bound over the same denominator.
fn exp_series(k: u64, s: u32, terms: u32) -> (BigUint, BigUint, BigUint) {
    // Σ_{j ≤ N} k^j / (2^{sj} j!) = Σ k^j 2^{s(N−j)} N!/j! / (2^{sN} N!)
    let n = terms;
    let fact = |m: u32| (1..=m).fold(BigUint::one(), |acc, i| acc * i);
    let n_fact = fact(n);
    let den = (BigUint::one() << (s * n)) * &n_fact;
    let mut num = BigUint::zero();
    let mut falling = n_fact.clone();
    for j in 0..=n {
        // N!/j!
        if j > 0 {
            falling /= j;
        }
        num += BigUint::from(k).pow(j) * (BigUint::one() << (s * (n - j))) * &falling;
    }
    // tail ≤ 2·x^{N+1}/(N+1)! once x ≤ (N+2)/2; over `den` that is
    // 2·k^{N+1} / (2^s·(N+1)), rounded up
    let tail = BigUint::from(k).pow(n + 1) * 2u32;
    let tail_num = tail.div_ceil(&(BigUint::from(n + 1) << s));
    (num, den, tail_num)
}

/// Grid numerator of `[e^{k/2^s}]_s`, saturating, certified by a bracketing
/// Taylor sum. Panics if the bracket straddles a rounding midpoint.
pub fn round_exp_oracle(k: i64, s: u32) -> i64 {
    let max = (1i64 << (2 * s)) - 1;
    let a = k.unsigned_abs();
    let terms = (2 * a / (1 << s) + 40) as u32 + 8 * s;
    let (num, den, tail) = exp_series(a, s, terms);
    let (lo_num, lo_den, hi_num, hi_den) = if k >= 0 {
        (num.clone(), den.clone(), &num + &tail, den.clone())
    } else {
        // e^{-x} ∈ [1/(S + tail), 1/S]
        (den.clone(), &num + &tail, den.clone(), num.clone())
    };
    // nearest grid point to 2^s·y, ties toward zero, for y in [lo, hi]
    let pick = |n: &BigUint, d: &BigUint| -> BigUint {
        let scaled = n << s;
        let q = &scaled / d;
        let r = &scaled - &q * d;
        if r * 2u32 > *d {
            q + 1u32
        } else {
            q
        }
    };
    let lo = pick(&lo_num, &lo_den);
    let hi = pick(&hi_num, &hi_den);
    assert_eq!(lo, hi, "exp oracle bracket straddles a midpoint at k={k}, s={s}");
    lo.to_i64().unwrap_or(max).min(max)
}

/// Nearest grid numerator to `num / den`, ties toward zero, saturating.
pub fn round_ratio_oracle(num: i128, den: i128, s: u32) -> i64 {
    let max = (1i128 << (2 * s)) - 1;
    let n = BigInt::from(num) << s;
    let d = BigInt::from(den);
    let neg = n.is_negative() != d.is_negative();
    let (n, d) = (n.abs(), d.abs());
    let q = &n / &d;
    let r = &n - &q * &d;
    let q = if r * 2 > d { q + 1 } else { q };
    let q = q.to_i128().unwrap_or(max).min(max);
    (if neg { -q } else { q }) as i64
}
