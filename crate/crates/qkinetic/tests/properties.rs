//! Property tests for the structural invariants that hold for arbitrary
//! inputs: norm monotonicity, the post-collision involution, equilibrium
//! bounds, and cutoff-profile shape.

use proptest::prelude::*;
use qkinetic::collision::post_collision;
use qkinetic::equilibrium::{equilibrium_density, fluctuation_weight, maxwellian};
use qkinetic::field::weighted_sup_norm;
use qkinetic::grid::VelocityGrid;
use qkinetic::linearized::{cutoff_profile, CutoffSpec};
use qkinetic::params::velocity_weight;

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    [-6.0..6.0f64, -6.0..6.0f64, -6.0..6.0f64]
}

fn unit3() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, phi): (f64, f64)| {
        let r = (1.0 - z * z).max(0.0).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    })
}

proptest! {
    #[test]
    fn post_collision_conserves_and_involutes(v in vec3(), u in vec3(), om in unit3()) {
        let (vp, up) = post_collision(v, u, om);
        // Momentum and energy conservation.
        for a in 0..3 {
            prop_assert!((vp[a] + up[a] - v[a] - u[a]).abs() < 1e-12);
        }
        let e0: f64 = v.iter().chain(u.iter()).map(|c| c * c).sum();
        let e1: f64 = vp.iter().chain(up.iter()).map(|c| c * c).sum();
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.max(1.0));
        // Applying the map again with the same direction restores the pair.
        let (v2, u2) = post_collision(vp, up, om);
        for a in 0..3 {
            prop_assert!((v2[a] - v[a]).abs() <= 1e-12);
            prop_assert!((u2[a] - u[a]).abs() <= 1e-12);
        }
    }

    #[test]
    fn equilibrium_sandwich_holds(v in vec3(), delta in 0.0..=1.0f64, rho in 0.1..4.0f64) {
        let mu = equilibrium_density(v, delta, rho);
        let m0 = maxwellian(v);
        prop_assert!(mu > 0.0);
        prop_assert!(mu <= 1.0 / (delta + rho) * (1.0 + 1e-13));
        prop_assert!(mu >= m0 / (rho + 1.0) * (1.0 - 1e-12));
        prop_assert!(mu <= m0 / rho * (1.0 + 1e-12));
        // Weight identity.
        let w = fluctuation_weight(v, delta, rho);
        prop_assert!((w - (mu * (1.0 - delta * mu)).sqrt()).abs() <= 1e-13 * w.max(1e-300));
    }

    #[test]
    fn weighted_norm_monotone(
        vals in proptest::collection::vec(-2.0..2.0f64, 125),
        shrink in 0.0..1.0f64,
        beta in 0.5..8.0f64,
    ) {
        let grid = VelocityGrid::new(2.0, 5).unwrap();
        let smaller: Vec<f64> = vals.iter().map(|v| v * shrink).collect();
        let big = weighted_sup_norm(&vals, 1, &grid, beta).unwrap();
        let small = weighted_sup_norm(&smaller, 1, &grid, beta).unwrap();
        prop_assert!(small <= big * (1.0 + 1e-12));
    }

    #[test]
    fn velocity_weight_at_least_one(v in vec3(), beta in 0.1..10.0f64) {
        prop_assert!(velocity_weight(v, beta) >= 1.0);
    }

    #[test]
    fn cutoff_profile_shape(m in 0.01..3.0f64, tau in 0.0..10.0f64) {
        let spec = CutoffSpec::new(m);
        let c = cutoff_profile(tau, &spec);
        prop_assert!((0.0..=1.0).contains(&c));
        if tau <= m {
            prop_assert_eq!(c, 1.0);
        }
        if tau >= 2.0 * m {
            prop_assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn counter_rng_uniform_and_order_free(seed in any::<u64>(), i in 0u64..1000, j in 0u64..1000) {
        let rng = qkinetic::rng::CounterRng::new(seed);
        let a = rng.u64_at(i);
        let b = rng.u64_at(j);
        let a2 = rng.u64_at(i);
        prop_assert_eq!(a, a2);
        if i != j {
            prop_assert_ne!(a, b);
        }
    }
}
