use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xrt_core::grid::{region_mask, GridField, RegionSpec};
use xrt_core::riesz::{potential_derivatives, riesz_potential, RieszOrder};

fn random_field_in(n: usize, region: &RegionSpec, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = region_mask(region, n, 2).unwrap();
    let vals = mask.values().iter().map(|m| m * rng.random_range(-1.0..1.0)).collect();
    GridField::from_values(2, n, vals).unwrap()
}

fn shift(f: &GridField, dx: usize, dy: usize) -> GridField {
    let n = f.n();
    let mut out = GridField::zeros(2, n).unwrap();
    for iy in 0..n - dy {
        for ix in 0..n - dx {
            out.values_mut()[(iy + dy) * n + ix + dx] = f.values()[iy * n + ix];
        }
    }
    out
}

fn order() -> impl Strategy<Value = RieszOrder> {
    prop_oneof![Just(1.0), 0.1..0.95f64, 1.05..1.9f64].prop_map(|a| RieszOrder::new(a, 2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn potential_commutes_with_whole_cell_shifts(ord in order(), dx in 0usize..6, dy in 0usize..6, seed in any::<u64>()) {
        let n = 24;
        let f = random_field_in(n, &RegionSpec::ball(&[-0.4, -0.4], 0.4), seed);
        let shifted_then = riesz_potential(&shift(&f, dx, dy), &ord).unwrap();
        let then_shifted = shift(&riesz_potential(&f, &ord).unwrap(), dx, dy);
        let scale = shifted_then.max_abs();
        for iy in dy..n {
            for ix in dx..n {
                let c = iy * n + ix;
                prop_assert!((shifted_then.values()[c] - then_shifted.values()[c]).abs() <= 1e-11 * scale);
            }
        }
    }

    #[test]
    fn potential_derivatives_are_linear(ord in order(), a in -3.0..3.0f64, b in -3.0..3.0f64, seed in any::<u64>()) {
        let n = 20;
        let support = RegionSpec::ball(&[-0.3, -0.3], 0.4);
        let f = random_field_in(n, &support, seed);
        let g = random_field_in(n, &support, seed ^ 5);
        let x0 = [0.55, 0.45];
        let df = potential_derivatives(&f, &ord, &x0, 3).unwrap();
        let dg = potential_derivatives(&g, &ord, &x0, 3).unwrap();
        let dh = potential_derivatives(&f.lin_comb(a, &g, b).unwrap(), &ord, &x0, 3).unwrap();
        for ((bf, vf), ((bg, vg), (bh, vh))) in df.iter().zip(dg.iter().zip(&dh)) {
            prop_assert!(bf == bg && bg == bh);
            let expect = a * vf + b * vg;
            let scale = (a * vf).abs() + (b * vg).abs();
            prop_assert!((vh - expect).abs() <= 1e-12 * scale.max(1e-300), "{bh:?}: {vh} vs {expect}");
        }
    }
}
