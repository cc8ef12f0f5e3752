use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xrt_core::grid::GridField;
use xrt_core::xray::{normal_operator, xray_adjoint, xray_forward, Sinogram, SinogramGeometry};

fn random_field(n: usize, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridField::from_values(2, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_sinogram(geom: &SinogramGeometry, seed: u64) -> Sinogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sinogram::from_values(geom.clone(), (0..geom.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_pairing_holds(n in (2usize..17).prop_map(|k| 2 * k), half_angles in 2usize..40, seed in any::<u64>()) {
        let geom = SinogramGeometry::for_grid(n, 2 * half_angles).unwrap();
        let f = random_field(n, seed);
        let g = random_sinogram(&geom, seed ^ 1);
        let lhs = xray_forward(&f, &geom).unwrap().dot(&g).unwrap();
        let rhs = f.dot(&xray_adjoint(&g, n).unwrap()).unwrap();
        let scale = f.l2_norm() * g.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn opposite_orientations_agree_exactly(n in (2usize..17).prop_map(|k| 2 * k), half_angles in 2usize..40, seed in any::<u64>()) {
        let geom = SinogramGeometry::for_grid(n, 2 * half_angles).unwrap();
        let g = xray_forward(&random_field(n, seed), &geom).unwrap();
        let (nt, ns) = (geom.n_theta(), geom.n_s());
        for j in 0..nt / 2 {
            for i in 0..ns {
                prop_assert_eq!(g.get(j, i), g.get(j + nt / 2, ns - 1 - i));
            }
        }
    }

    #[test]
    fn normal_operator_is_symmetric_and_nonnegative(n in (2usize..13).prop_map(|k| 2 * k), seed in any::<u64>()) {
        let geom = SinogramGeometry::for_grid(n, 2 * n).unwrap();
        let f = random_field(n, seed);
        let g = random_field(n, seed ^ 2);
        let fng = f.dot(&normal_operator(&g, &geom).unwrap()).unwrap();
        let gnf = g.dot(&normal_operator(&f, &geom).unwrap()).unwrap();
        prop_assert!((fng - gnf).abs() <= 1e-12 * fng.abs().max(1.0));
        prop_assert!(f.dot(&normal_operator(&f, &geom).unwrap()).unwrap() >= 0.0);
    }
}
