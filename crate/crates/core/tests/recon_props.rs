use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xrt_core::grid::{rasterize, GridField, PhantomSpec, Profile, RegionSpec};
use xrt_core::recon::{cgls_solve, spectrum_report, MaskedProblem};
use xrt_core::xray::{lines_meeting_region, xray_forward, LineMask, Sinogram, SinogramGeometry};

fn random_sinogram(geom: &SinogramGeometry, seed: u64) -> Sinogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sinogram::from_values(geom.clone(), (0..geom.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn annulus_problem(n: usize, n_theta: usize, ray_radius: f64, zero_radius: f64) -> MaskedProblem {
    let layer = RegionSpec::annulus(0.5, 0.9);
    let truth = rasterize(
        &PhantomSpec::single(layer.clone(), Profile::RadialBump { amplitude: 1.0 })
            .with(layer.clone(), Profile::CosineMode { k: 2, amplitude: 0.5 }),
        n,
        2,
    )
    .unwrap();
    let geom = SinogramGeometry::for_grid(n, n_theta).unwrap();
    let data = xray_forward(&truth, &geom).unwrap();
    let mask = lines_meeting_region(&geom, n, &RegionSpec::ball(&[0.0, 0.0], ray_radius)).unwrap();
    let zero = RegionSpec::ball(&[0.0, 0.0], zero_radius);
    MaskedProblem::from_regions(n, data, mask, Some(&layer), Some(&zero))
        .unwrap()
        .with_truth(truth)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solutions_respect_cell_constraints(
        cx in -0.3..0.3f64,
        r in 0.2..0.6f64,
        zr in 0.05..0.3f64,
        seed in any::<u64>(),
    ) {
        let n = 16;
        let geom = SinogramGeometry::for_grid(n, 32).unwrap();
        let support = RegionSpec::ball(&[cx, 0.0], r);
        let zero = RegionSpec::ball(&[cx, 0.0], zr);
        let p = MaskedProblem::from_regions(n, random_sinogram(&geom, seed), LineMask::full(geom), Some(&support), Some(&zero)).unwrap();
        let (x, _) = cgls_solve(&p, 200, 1e-12).unwrap();
        for (c, v) in x.values().iter().enumerate() {
            if !p.support()[c] {
                prop_assert_eq!(*v, 0.0);
            }
            prop_assert!(!(p.support()[c] && p.known_zero()[c]));
        }
    }

    #[test]
    fn consistent_data_is_fitted(amp in 0.2..3.0f64, x0 in -0.3..0.3f64) {
        let n = 16;
        let geom = SinogramGeometry::for_grid(n, 32).unwrap();
        let support = RegionSpec::ball(&[x0, 0.0], 0.5);
        let truth = rasterize(&PhantomSpec::single(support.clone(), Profile::RadialBump { amplitude: amp }), n, 2).unwrap();
        let data = xray_forward(&truth, &geom).unwrap();
        let p = MaskedProblem::from_regions(n, data, LineMask::full(geom), Some(&support), None).unwrap();
        let (_, report) = cgls_solve(&p, 2000, 1e-10).unwrap();
        prop_assert!(report.relative_residual <= 1e-8, "{}", report.relative_residual);
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), sigma in 0.0..0.1f64) {
        let p = annulus_problem(16, 32, 0.2, 0.45);
        let a = p.clone().with_noise(sigma, seed).unwrap();
        let b = p.with_noise(sigma, seed).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }
}

#[test]
fn central_ball_problem_is_injective_at_16() {
    let s = spectrum_report(&annulus_problem(16, 96, 0.2, 0.45)).unwrap();
    assert!(s.sigma_min().unwrap() > 0.0, "{:?}", s.singular_values.last());
}

#[test]
fn more_bins_never_lower_sigma_min() {
    let mut last = 0.0;
    for radius in [0.1, 0.3, 0.5, 0.7, 1.0] {
        let s = spectrum_report(&annulus_problem(12, 48, radius, 0.45)).unwrap();
        let sigma = s.sigma_min().unwrap();
        assert!(sigma >= last * (1.0 - 1e-10), "radius {radius}: {sigma} < {last}");
        last = sigma;
    }
}

#[test]
fn zero_data_gives_zero_on_any_mask() {
    let n = 16;
    let geom = SinogramGeometry::for_grid(n, 32).unwrap();
    let mask = lines_meeting_region(&geom, n, &RegionSpec::disc_segment(0.7, 1.2)).unwrap();
    let p = MaskedProblem::from_regions(n, Sinogram::zeros(geom), mask, None, None).unwrap();
    let (x, _) = cgls_solve(&p, 100, 1e-10).unwrap();
    assert_eq!(x, GridField::zeros(2, n).unwrap());
}
