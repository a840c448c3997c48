mod common;

use common::{p, round_exp_oracle, round_ratio_oracle, round_sqrt_oracle};
use hybridsim::codes::{interleave_key, interleave_query};
use hybridsim::fixed::*;
use proptest::prelude::*;

fn sc(prec: Precision, raw: i64) -> FixedScalar {
    prec.scalar(raw).unwrap()
}

fn vr(prec: Precision, raw: &[i64]) -> FixedVector {
    FixedVector::from_raw(prec, raw.to_vec()).unwrap()
}

#[test]
fn rounding_examples_at_s2() {
    let s2 = p(2);
    // 0.1875 → 0.25, 0.125 → 0, 0.375 → 0.25, 100 → 3.75
    assert_eq!(round_rational(s2, 3, 16).unwrap().raw(), 1);
    assert_eq!(round_rational(s2, 1, 8).unwrap().raw(), 0);
    assert_eq!(round_rational(s2, 3, 8).unwrap().raw(), 1);
    assert_eq!(round_rational(s2, 100, 1).unwrap(), s2.max_value());
    assert_eq!(round_rational(s2, -100, 1).unwrap().raw(), -15);
}

#[test]
fn scalar_ops_examples_at_s2() {
    let s2 = p(2);
    let b = s2.max_value();
    assert_eq!(b.add_s(b), b);
    assert_eq!(sc(s2, 1).mul_s(sc(s2, 3)).raw(), 1);
    for raw in -15..=15 {
        assert!(sc(s2, raw).sub_s(sc(s2, raw)).is_zero());
    }
}

#[test]
fn strict_sum_examples() {
    let s2 = p(2);
    let q = |r: i64| sc(s2, r);
    assert_eq!(sum_strict(&[q(1), q(1), q(-1)]).unwrap().raw(), 1);
    // hand fold: 3.75 ⊕ 3.75 saturates to 3.75, then ⊕ −3.75 gives 0
    let folded = {
        let a = round_ratio_oracle(15 + 15, 4, 2);
        round_ratio_oracle((a - 15) as i128, 4, 2)
    };
    assert_eq!(folded, 0);
    assert_eq!(sum_strict(&[q(15), q(15), q(-15)]).unwrap().raw(), folded);
    assert_eq!(sum_strict(&[q(7)]).unwrap(), q(7));
    assert!(matches!(sum_strict(&[]), Err(FixedError::EmptyInput(_))));
}

#[test]
fn accumulator_sum_examples() {
    let s2 = p(2);
    assert_eq!(sum_acc(&[s2.delta(); 5]).to_string(), "5/4");
    assert!(sum_acc(&[]).is_zero());
    assert_eq!(sum_acc(&[s2.max_value(); 3]).to_string(), "45/4");
}

#[test]
fn dot_examples() {
    let s2 = p(2);
    assert!(dot_strict(&vr(s2, &[4, 0]), &vr(s2, &[0, 4])).unwrap().is_zero());
    let c = [1, -1, 1, 1, -1, 1];
    let far: Vec<i8> = c.iter().map(|x| -x).collect();
    assert!(dot_acc(&interleave_query(s2, &c), &interleave_key(s2, &c)).unwrap().is_zero());
    assert_eq!(
        dot_acc(&interleave_query(s2, &c), &interleave_key(s2, &far)).unwrap(),
        Exact::from_int(-12)
    );
    assert!(matches!(
        dot_strict(&vr(s2, &[1]), &vr(s2, &[1, 2])),
        Err(FixedError::DimensionMismatch { .. })
    ));
}

#[test]
fn score_examples() {
    let s2 = p(2);
    let c = [1i8, -1, -1, 1, 1];
    assert!(score_s(&interleave_query(s2, &c), &interleave_key(s2, &c)).unwrap().is_zero());
    assert!(score_s(&FixedVector::zeros(s2, 3), &FixedVector::zeros(s2, 3)).unwrap().is_zero());

    // m = 21 (interleaved dimension 42), Δ = 7: score −14/√42
    let m = 21usize;
    let delta = m.div_ceil(3);
    let expected = -round_sqrt_oracle((2 * delta * 2 * delta) as u64, (2 * m) as u64, 2);
    assert_eq!(expected, -9, "oracle: −14/√42 ≈ −2.16 rounds to −2.25");
    assert_eq!(round_exp_oracle(expected, 2), 0);
    let word: Vec<i8> = vec![1; m];
    let mut other = word.clone();
    for x in other.iter_mut().take(delta) {
        *x = -1;
    }
    let z = score_s(&interleave_query(s2, &word), &interleave_key(s2, &other)).unwrap();
    assert_eq!(z.raw(), expected);
    assert!(exp_s(z).unwrap().is_zero());
}

#[test]
fn exp_examples() {
    let s2 = p(2);
    assert_eq!(exp_s(s2.zero()).unwrap(), s2.one());
    let oracle_minus3 = round_exp_oracle(-12, 2);
    let oracle_quarter = round_exp_oracle(1, 2);
    assert_eq!((oracle_minus3, oracle_quarter), (0, 5));
    assert_eq!(exp_s(sc(s2, -12)).unwrap().raw(), oracle_minus3);
    assert_eq!(exp_s(sc(s2, 1)).unwrap().raw(), oracle_quarter);
}

#[test]
fn normalization_examples() {
    let s2 = p(2);
    let pm1 = vr(s2, &[4, -4, 4, 4]);
    assert_eq!(rmsnorm_s(&pm1).unwrap(), pm1);
    assert!(rmsnorm_s(&FixedVector::zeros(s2, 3)).unwrap().is_zero());
    // (0.25, 0): ρ = 0.25/√2, so the first coordinate is [√2]_2
    let sqrt2 = round_sqrt_oracle(2, 1, 2);
    assert_eq!(sqrt2, 6);
    assert_eq!(rmsnorm_s(&vr(s2, &[1, 0])).unwrap().raw(), &[sqrt2, 0]);
    let kappa = round_sqrt_oracle(1, 2, 2);
    assert_eq!(l2norm_s(&vr(s2, &[4, 4])).unwrap().raw(), &[kappa, kappa]);
    assert!(l2norm_s(&FixedVector::zeros(s2, 2)).unwrap().is_zero());
}

#[test]
fn softmax_examples() {
    let s2 = p(2);
    let w = softmax_s(&vr(s2, &[-15, 0, -12])).unwrap();
    assert_eq!(w.raw(), &[0, 4, 0]);
    assert!(softmax_s(&vr(s2, &[-15, -14])).unwrap().is_zero());
    for s in 2..=6 {
        let ps = p(s);
        let half = ps.one_raw() / 2;
        assert_eq!(softmax_s(&vr(ps, &[3, 3])).unwrap().raw(), &[half, half]);
    }
    assert!(softmax_s(&FixedVector::zeros(s2, 0)).unwrap().is_empty());
}

#[test]
fn appendix_identities_all_precisions() {
    for s in 2..=8 {
        let ps = p(s);
        let kappa = round_sqrt_oracle(1, 2, s) as i128;
        let unit = 1i128 << (2 * s);
        let d = 1i64;
        // κ from the library matches the oracle
        let lib_kappa = l2norm_s(&vr(ps, &[1, 1])).unwrap().raw()[0];
        assert_eq!(lib_kappa as i128, kappa, "s={s}");
        assert!(2 * kappa > 1 << s && 4 * kappa <= 3 << s, "1/2 < κ ≤ 3/4 at s={s}");
        for (mult, want) in [(1, d), (2, d), (3, 2 * d)] {
            assert_eq!(round_rational(ps, mult * kappa, unit).unwrap().raw(), want);
            assert_eq!(round_ratio_oracle(mult * kappa, unit, s), want);
        }
        assert_eq!(round_rational(ps, 1, 2 << s).unwrap().raw(), 0);
        assert_eq!(round_rational(ps, 3, 4 << s).unwrap().raw(), 1);
    }
}

fn precision() -> impl Strategy<Value = Precision> {
    (2u32..=8).prop_map(p)
}

fn scalar_in(prec: Precision) -> impl Strategy<Value = FixedScalar> {
    let m = prec.max_raw();
    (-m..=m).prop_map(move |k| prec.scalar(k).unwrap())
}

fn pair() -> impl Strategy<Value = (FixedScalar, FixedScalar)> {
    precision().prop_flat_map(|prec| (scalar_in(prec), scalar_in(prec)))
}

fn vectors(max_len: usize) -> impl Strategy<Value = (FixedVector, FixedVector)> {
    (precision(), 1..=max_len).prop_flat_map(|(prec, len)| {
        let m = prec.max_raw();
        (
            proptest::collection::vec(-m..=m, len),
            proptest::collection::vec(-m..=m, len),
        )
            .prop_map(move |(a, b)| (vr(prec, &a), vr(prec, &b)))
    })
}

proptest! {
    #[test]
    fn ops_match_exact_oracle((a, b) in pair()) {
        let s = a.precision().bits();
        let (ka, kb) = (a.raw() as i128, b.raw() as i128);
        prop_assert_eq!(a.add_s(b).raw(), round_ratio_oracle(ka + kb, 1 << s, s));
        prop_assert_eq!(a.sub_s(b).raw(), round_ratio_oracle(ka - kb, 1 << s, s));
        prop_assert_eq!(a.mul_s(b).raw(), round_ratio_oracle(ka * kb, 1 << (2 * s), s));
    }

    #[test]
    fn results_stay_on_grid((a, b) in pair()) {
        let max = a.precision().max_raw();
        for r in [a.add_s(b), a.sub_s(b), a.mul_s(b)] {
            prop_assert!(r.raw().abs() <= max);
        }
    }

    #[test]
    fn rounding_monotone_and_odd(s in 2u32..=8, x in -100_000i128..100_000, y in -100_000i128..100_000, den in 1i128..5000) {
        let ps = p(s);
        let rx = round_rational(ps, x, den).unwrap().raw();
        let ry = round_rational(ps, y, den).unwrap().raw();
        if x <= y {
            prop_assert!(rx <= ry);
        }
        prop_assert_eq!(round_rational(ps, -x, den).unwrap().raw(), -rx);
        prop_assert_eq!(rx, round_ratio_oracle(x, den, s));
    }

    #[test]
    fn dot_acc_is_exact((x, y) in vectors(24)) {
        let exact: i128 = x.raw().iter().zip(y.raw()).map(|(&a, &b)| a as i128 * b as i128).sum();
        let s = x.precision().bits();
        prop_assert_eq!(dot_acc(&x, &y).unwrap(), Exact::new(exact, 2 * s));
    }

    #[test]
    fn strict_dot_is_left_fold((x, y) in vectors(12)) {
        let s = x.precision().bits();
        let mut acc: Option<i64> = None;
        for (&a, &b) in x.raw().iter().zip(y.raw()) {
            let prod = round_ratio_oracle(a as i128 * b as i128, 1 << (2 * s), s);
            acc = Some(match acc {
                None => prod,
                Some(c) => round_ratio_oracle((c + prod) as i128, 1 << s, s),
            });
        }
        prop_assert_eq!(dot_strict(&x, &y).unwrap().raw(), acc.unwrap());
    }

    #[test]
    fn exp_matches_oracle(s in 2u32..=4, frac in 0.0f64..1.0) {
        let ps = p(s);
        // cover the non-trivial window |z| < s + 1 densely
        let span = ((s as i64 + 1) << s) - 1;
        let k = -span + (frac * (2 * span + 1) as f64) as i64;
        prop_assert_eq!(exp_s(ps.scalar(k).unwrap()).unwrap().raw(), round_exp_oracle(k, s));
    }

    #[test]
    fn rmsnorm_coordinates_match_oracle((x, _) in vectors(8)) {
        let s = x.precision().bits();
        let out = rmsnorm_s(&x).unwrap();
        let sq: u64 = x.raw().iter().map(|&k| (k * k) as u64).sum();
        for (i, &k) in x.raw().iter().enumerate() {
            // x_r / ρ = x_r · √(m / Σx²), so [·]_s = sign · nearest(√(k² m 4^s / sq)) / 2^s
            let want = if sq == 0 {
                0
            } else {
                let mag = round_sqrt_oracle((k * k) as u64 * x.len() as u64, sq, s);
                if k < 0 { -mag } else { mag }
            };
            prop_assert_eq!(out.raw()[i], want);
        }
    }

    #[test]
    fn softmax_in_unit_interval((z, _) in vectors(10)) {
        let out = softmax_s(&z).unwrap();
        let one = z.precision().one_raw();
        prop_assert!(out.raw().iter().all(|&w| (0..=one).contains(&w)));
        let positive: Vec<usize> = z.iter().enumerate()
            .filter(|(_, v)| !exp_s(*v).unwrap().is_zero()).map(|(i, _)| i).collect();
        if positive.len() == 1 {
            let mut onehot = vec![0; z.len()];
            onehot[positive[0]] = one;
            prop_assert_eq!(out.raw(), onehot.as_slice());
        }
    }

    #[test]
    fn deterministic_replay((x, y) in vectors(8)) {
        prop_assert_eq!(score_s(&x, &y).unwrap(), score_s(&x, &y).unwrap());
        prop_assert_eq!(softmax_s(&x).unwrap(), softmax_s(&x).unwrap());
    }
}
