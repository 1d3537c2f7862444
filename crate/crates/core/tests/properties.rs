use cbf_mild::field::{PhysicalField, SpectralField, TorusGrid};
use cbf_mild::ops::{convection, damping, damping_derivative, heat_semigroup, leray_project};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(dim: usize) -> TorusGrid {
    TorusGrid::periodic(dim, if dim == 2 { 16 } else { 8 }).unwrap()
}

fn solenoidal(dim: usize, seed: u64) -> SpectralField {
    let g = SpectralField::random_solenoidal(grid(dim), 3, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    g.scaled(1.0 / g.max_abs())
}

/// Arbitrary real field, not solenoidal.
fn rough(dim: usize, seed: u64) -> SpectralField {
    use rand::Rng;
    let g = grid(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..dim).map(|_| (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    SpectralField::forward(&PhysicalField::new(g, comps).unwrap())
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip(dim in 2usize..=3, seed in any::<u64>()) {
        let f = rough(dim, seed).inverse();
        let back = SpectralField::forward(&f).inverse();
        let scale = f.components().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in f.components().iter().flatten().zip(back.components().iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn lp_norm_is_homogeneous(dim in 2usize..=3, seed in any::<u64>(), c in -50.0f64..50.0, p in 1.0f64..12.0) {
        let u = rough(dim, seed);
        let a = u.scaled(c).lp_norm(p).unwrap();
        let b = c.abs() * u.lp_norm(p).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * b.max(1e-300));
    }

    #[test]
    fn lp_norm_stable_under_refinement(seed in any::<u64>(), p in prop::sample::select(vec![2.0, 4.0, 6.0])) {
        // even integer powers of a band-limited field stay resolved on the fine grid
        let g = TorusGrid::periodic(2, 32).unwrap();
        let u = SpectralField::random_solenoidal(g, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let coarse = u.lp_norm(p).unwrap();
        let fine = u.resampled(64).unwrap().lp_norm(p).unwrap();
        prop_assert!((coarse - fine).abs() <= 1e-12 * coarse);
    }

    #[test]
    fn leray_is_idempotent_and_solenoidal(dim in 2usize..=3, seed in any::<u64>()) {
        let g = rough(dim, seed);
        let once = leray_project(&g);
        prop_assert!(once.sub(&leray_project(&once)).max_abs() <= 1e-13 * g.max_abs());
        prop_assert!(once.divergence_residual() <= 1e-12);
    }

    #[test]
    fn leray_commutes_with_heat(dim in 2usize..=3, seed in any::<u64>(), t in 0.0f64..2.0) {
        let g = rough(dim, seed);
        let a = leray_project(&heat_semigroup(t, &g).unwrap());
        let b = heat_semigroup(t, &leray_project(&g)).unwrap();
        prop_assert!(a.sub(&b).max_abs() <= 1e-13 * g.max_abs());
    }

    #[test]
    fn heat_semigroup_property(dim in 2usize..=3, seed in any::<u64>(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let g = rough(dim, seed);
        let twice = heat_semigroup(s, &heat_semigroup(t, &g).unwrap()).unwrap();
        let once = heat_semigroup(s + t, &g).unwrap();
        prop_assert!(rel(&twice, &once) <= 1e-12);
    }

    #[test]
    fn convection_is_bilinear(dim in 2usize..=3, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (u1, u2, v) = (solenoidal(dim, seed), solenoidal(dim, seed ^ 1), solenoidal(dim, seed ^ 2));
        let lhs = convection(&u1.scaled(a).axpy(b, &u2), &v).unwrap();
        let rhs = convection(&u1, &v).unwrap().scaled(a).axpy(b, &convection(&u2, &v).unwrap());
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-12 * rhs.max_abs().max(1.0));
        let lhs = convection(&v, &u1.scaled(a).axpy(b, &u2)).unwrap();
        let rhs = convection(&v, &u1).unwrap().scaled(a).axpy(b, &convection(&v, &u2).unwrap());
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-12 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn nonlinear_outputs_are_solenoidal_and_real(dim in 2usize..=3, seed in any::<u64>(), r in 1.0f64..5.0) {
        let (u, v) = (solenoidal(dim, seed), solenoidal(dim, seed ^ 7));
        for out in [
            convection(&u, &v).unwrap(),
            damping(&u, r).unwrap(),
            damping_derivative(&u, &v, r).unwrap(),
            leray_project(&rough(dim, seed)),
        ] {
            prop_assert!(out.divergence_residual() <= 1e-12);
            prop_assert!(out.conjugate_symmetry_defect() <= 1e-12);
        }
    }

    #[test]
    fn lp_norms_are_scale_free_for_heat(seed in any::<u64>(), c in 0.01f64..100.0, t in 0.0f64..1.0) {
        let u = solenoidal(2, seed);
        let a = heat_semigroup(t, &u.scaled(c)).unwrap().lp_norm(4.0).unwrap() / u.scaled(c).lp_norm(4.0).unwrap();
        let b = heat_semigroup(t, &u).unwrap().lp_norm(4.0).unwrap() / u.lp_norm(4.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b);
        prop_assert!(a <= 1.0 + 1e-12);
    }
}
