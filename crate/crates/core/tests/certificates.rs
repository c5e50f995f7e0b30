use etsafe::systems::{
    bound_dynamics, certify_barrier_inequality, counterexample_system, lie_rate,
    max_vector_field_norm, norm, scalar_stabilization_demo,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h(x: &[f64]) -> f64 {
    1.0 - x[0] * x[0] - x[1] * x[1]
}

proptest! {
    #[test]
    fn counterexample_rate_identity(
        x0 in -1.5f64..1.5, x1 in -1.5f64..1.5, e0 in -1.0f64..1.0, e1 in -1.0f64..1.0
    ) {
        let (sys, cert) = counterexample_system(1.2).unwrap();
        let (x, e) = ([x0, x1], [e0, e1]);
        let measured = [x0 + e0, x1 + e1];
        let rate = lie_rate(&sys, &cert, &x, &e);
        let expected = -(x0 * x0 + x1 * x1) * h(&measured);
        prop_assert!((rate - expected).abs() <= 1e-14 * (1.0 + expected.abs()));
    }

    #[test]
    fn dynamics_bound_monotone_in_radii(r in 0.1f64..2.0, dr in 0.0f64..1.0, e in 0.0f64..1.0, de in 0.0f64..1.0) {
        let (demo, _) = scalar_stabilization_demo();
        let small = max_vector_field_norm(&demo, r, e, 11).unwrap();
        let large = max_vector_field_norm(&demo, r + dr, e + de, 11).unwrap();
        prop_assert!(large >= small);

        let (sys, _) = counterexample_system(1.2).unwrap();
        let small = max_vector_field_norm(&sys, r, 0.0, 11).unwrap();
        let large = max_vector_field_norm(&sys, r + dr, 0.0, 11).unwrap();
        prop_assert!(large >= small);
    }
}

#[test]
fn issf_inequality_holds_on_ball() {
    let r = 1.2;
    let (sys, cert) = counterexample_system(r).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let rho = r * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = [rho * phi.cos(), rho * phi.sin()];
        let e = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        worst = worst.min(certify_barrier_inequality(&sys, &cert, &x, &e));
    }
    assert!(worst >= -1e-12, "worst residual {worst}");
}

#[test]
fn boundary_rate_is_nonnegative_without_error() {
    let (sys, cert) = counterexample_system(1.2).unwrap();
    for k in 0..64 {
        let phi = k as f64 * std::f64::consts::TAU / 64.0;
        let x = [phi.cos(), phi.sin()];
        assert!(certify_barrier_inequality(&sys, &cert, &x, &[0.0, 0.0]) >= -1e-15);
    }
}

#[test]
fn unit_disk_bound_matches_boundary_speed() {
    let (sys, mut cert) = counterexample_system(1.2).unwrap();
    // |f(x, k(x))| = |x| sqrt(1 + k(x)^2) on the unit disk peaks at 1 on the circle
    let raw = max_vector_field_norm(&sys, 1.0, 0.0, 41).unwrap();
    assert!((raw - 1.0).abs() < 1e-12, "{raw}");
    let f = bound_dynamics(&sys, &mut cert, 1.0, 0.0, 41).unwrap();
    assert!((f - 1.1).abs() < 1e-12);
    assert!(norm(&[0.0, 1.0]) == 1.0);
}
