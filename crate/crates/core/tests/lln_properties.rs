use bornlab_core::lln::{lln_tail, lln_tail_exact, LlnQuery};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sum over every sequence of length `n`, one at a time.
fn naive_tail(n: u32, delta: f64, p: f64) -> f64 {
    (0u64..1 << n)
        .map(|s| {
            let k = s.count_ones();
            if (k as f64 / n as f64 - p).abs() > delta + 1e-12 {
                p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
            } else {
                0.0
            }
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tail_shrinks_as_delta_grows(n in 1u64..=400, p in 0.0..=1.0f64, d1 in 0.001..0.5f64, d2 in 0.001..0.5f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = lln_tail(&LlnQuery::new(n, lo, p).unwrap()).unwrap();
        let b = lln_tail(&LlnQuery::new(n, hi, p).unwrap()).unwrap();
        prop_assert!(b <= a + 1e-14);
    }

    #[test]
    fn tail_is_symmetric_in_p(n in 1u64..=400, pn in 0i64..=64, dn in 1i64..=32) {
        let (p, delta) = (q(pn, 64), q(dn, 64));
        let one = q(1, 1);
        prop_assert_eq!(lln_tail_exact(n, &delta, &p).unwrap(), lln_tail_exact(n, &delta, &(one - &p)).unwrap());
        let (pf, df) = (pn as f64 / 64.0, dn as f64 / 64.0);
        let a = lln_tail(&LlnQuery::new(n, df, pf).unwrap()).unwrap();
        let b = lln_tail(&LlnQuery::new(n, df, 1.0 - pf).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn exact_float_and_naive_agree(n in 1u32..=16, pn in 0i64..=32, dn in 1i64..=16) {
        let exact = lln_tail_exact(n as u64, &q(dn, 32), &q(pn, 32)).unwrap().to_f64().unwrap();
        let (pf, df) = (pn as f64 / 32.0, dn as f64 / 32.0);
        let float = lln_tail(&LlnQuery::new(n as u64, df, pf).unwrap()).unwrap();
        prop_assert!((exact - float).abs() <= 1e-12);
        prop_assert!((exact - naive_tail(n, df, pf)).abs() <= 1e-12);
    }
}
