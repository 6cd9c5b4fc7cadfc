use std::cmp::Ordering;

use num_bigint::BigUint;
use proptest::prelude::*;
use treeforce::HyperInt;

fn big(limbs: &[u64]) -> BigUint {
    limbs.iter().rev().fold(BigUint::default(), |acc, &l| (acc << 64u32) + BigUint::from(l))
}

fn to_big(h: &HyperInt) -> BigUint {
    big(&h.to_u64_limbs(1 << 16).expect("fits"))
}

/// Limb vectors below 2^4096, mixing dense and sparse words.
fn limbs() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(
        prop_oneof![any::<u64>(), (0u32..64).prop_map(|b| 1u64 << b), Just(0u64), Just(u64::MAX)],
        0..64,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn arithmetic_matches_bigint(x in limbs(), y in limbs(), m in any::<u32>(), s in 0u64..2048) {
        let (hx, hy) = (HyperInt::from_u64_limbs(&x), HyperInt::from_u64_limbs(&y));
        let (bx, by) = (big(&x), big(&y));
        prop_assert_eq!(to_big(&hx), bx.clone());
        prop_assert_eq!(to_big(&hx.add(&hy)), &bx + &by);
        prop_assert_eq!(hx.cmp(&hy), bx.cmp(&by));
        prop_assert_eq!(hx == hy, bx == by);
        prop_assert_eq!(to_big(&hx.mul_small(m as u64)), &bx * BigUint::from(m));
        prop_assert_eq!(to_big(&hx.shift(&HyperInt::small(s))), &bx << s);
        prop_assert_eq!(to_big(&hx.succ()), &bx + 1u32);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn display_parses_back(x in limbs()) {
        let h = HyperInt::from_u64_limbs(&x);
        let back: HyperInt = h.to_string().parse().unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn powers_of_two(e in 0u64..4000, m in 1u64..4, x in limbs()) {
        let p = HyperInt::pow2(&HyperInt::small(e));
        prop_assert_eq!(to_big(&p), BigUint::from(1u32) << e);
        prop_assert_eq!(p.log2_exact(), Some(HyperInt::small(e)));
        if e * m < 4000 {
            prop_assert_eq!(to_big(&p.pow_of_pow2(m).unwrap()), BigUint::from(1u32) << (e * m));
        }
        let hx = HyperInt::from_u64_limbs(&x);
        let bx = big(&x);
        prop_assert_eq!(to_big(&hx.mul_pow2(&p).unwrap()), (&bx) << e);
        if bx.count_ones() > 1 {
            prop_assert!(hx.log2_exact().is_none());
        }
    }

    /// Towers far past machine range: order of `2^a + 2^b` follows the
    /// exponents, which are compared by the bigint oracle.
    #[test]
    fn tower_order_follows_exponents(a in limbs(), b in limbs(), c in limbs(), d in limbs()) {
        let mut e1 = [big(&a), big(&b)];
        let mut e2 = [big(&c), big(&d)];
        e1.sort_by(|x, y| y.cmp(x));
        e2.sort_by(|x, y| y.cmp(x));
        let h = |e: &[BigUint; 2]| {
            let t = |v: &BigUint| HyperInt::pow2(&HyperInt::from_u64_limbs(&v.to_u64_digits()));
            t(&e[0]).add(&t(&e[1]))
        };
        let (h1, h2) = (h(&e1), h(&e2));
        // The sum of two equal powers carries into the next power.
        let norm = |e: &[BigUint; 2]| -> Vec<BigUint> {
            if e[0] == e[1] { vec![&e[0] + 1u32] } else { e.to_vec() }
        };
        let expected = {
            let (n1, n2) = (norm(&e1), norm(&e2));
            let mut o = Ordering::Equal;
            for (x, y) in n1.iter().zip(&n2) {
                o = x.cmp(y);
                if o != Ordering::Equal { break; }
            }
            if o == Ordering::Equal { n1.len().cmp(&n2.len()) } else { o }
        };
        prop_assert_eq!(h1.cmp(&h2), expected);
    }
}

const FAR: u64 = (1 << 16) + 7;

fn unshift(h: &HyperInt) -> BigUint {
    h.exponents().iter().fold(BigUint::default(), |acc, e| acc + (BigUint::from(1u32) << (e.to_u64().unwrap() - FAR)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3_000))]

    /// Shifted past the limb fast path, the sparse term arithmetic must agree
    /// with the bigint oracle too.
    #[test]
    fn sparse_path_matches_bigint(x in limbs(), y in limbs(), m in any::<u32>(), s in 0u64..512) {
        let far = HyperInt::small(FAR);
        let (hx, hy) = (HyperInt::from_u64_limbs(&x).shift(&far), HyperInt::from_u64_limbs(&y).shift(&far));
        let (bx, by) = (big(&x), big(&y));
        prop_assume!(bx > BigUint::default() && by > BigUint::default());
        prop_assert_eq!(unshift(&hx.add(&hy)), &bx + &by);
        prop_assert_eq!(unshift(&hx.mul_small(m as u64 + 1)), &bx * BigUint::from(m as u64 + 1));
        prop_assert_eq!(unshift(&hx.shift(&HyperInt::small(s))), &bx << s);
        prop_assert_eq!(hx.cmp(&hy), bx.cmp(&by));
    }
}

#[test]
fn rendering_examples() {
    let g = HyperInt::pow2(&HyperInt::pow2(&HyperInt::small(11)));
    assert_eq!(g.to_string(), "2^(2^11)");
    assert_eq!("2^(2^11)".parse::<HyperInt>().unwrap(), g);
    assert_eq!(HyperInt::small(4096).to_string(), "4096");
    let huge = (0..40).fold(HyperInt::small(3), |acc, _| HyperInt::pow2(&acc).add(&acc));
    assert!(huge.brief(80).len() <= 200);
    // 3, 11, 2059 stay in machine range.
    assert_eq!(huge.height(), 38);
}
