use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use xrt_core::abel::{abel_apply, abel_coefficients, abel_coefficients_oracle, chebyshev_coeffs, RadialProfile};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn table_agrees_with_taylor_oracle(k in 0usize..9, n in 0usize..41) {
        let table = abel_coefficients(k, n).unwrap();
        let oracle = abel_coefficients_oracle(k, n).unwrap();
        prop_assert_eq!(BigRational::from_integer(table.get(k, n).clone()), oracle);
    }

    #[test]
    fn chebyshev_parity_and_normalisation(k in 0usize..30, t in 0.0..std::f64::consts::PI) {
        let cheb = chebyshev_coeffs(k).unwrap();
        let row = cheb.row(k);
        for (l, c) in row.iter().enumerate() {
            if (k + l) % 2 == 1 {
                prop_assert!(c.is_zero());
            }
        }
        prop_assert!(row.iter().fold(BigInt::zero(), |a, c| a + c).is_one());
        if k <= 12 {
            prop_assert!((cheb.eval(k, t.cos()) - (k as f64 * t).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn abel_transform_of_zero_and_beyond_support(k in 0usize..8, hi in 0.3..1.0f64, amp in -2.0..2.0f64) {
        let zero = RadialProfile::from_fn((0.0, hi), 33, |_| 0.0).unwrap();
        let z: Vec<f64> = (0..20).map(|i| 1.2 * i as f64 / 19.0).collect();
        prop_assert!(abel_apply(k, &zero, &z).unwrap().values().iter().all(|v| v.norm() == 0.0));
        let g = RadialProfile::from_fn((0.0, hi), 33, |r| amp * (1.0 - r * r / (hi * hi))).unwrap();
        let a = abel_apply(k, &g, &z).unwrap();
        for (zi, v) in z.iter().zip(a.values()) {
            if *zi >= hi {
                prop_assert_eq!(v.norm(), 0.0);
            }
        }
    }

    #[test]
    fn abel_zero_of_constant_is_chord_length(hi in 0.3..1.0f64) {
        let g = RadialProfile::from_fn((0.0, hi), 9, |_| 1.0).unwrap();
        let z: Vec<f64> = (0..10).map(|i| 0.9 * hi * i as f64 / 9.0).collect();
        let a = abel_apply(0, &g, &z).unwrap();
        for (zi, v) in z.iter().zip(a.values()) {
            prop_assert!((v.re - 2.0 * (hi * hi - zi * zi).sqrt()).abs() < 1e-10);
        }
    }
}
