//! Property-based invariants over randomized inputs: metric axioms of the
//! ground distances, multilinearity of the volume density, translation
//! invariance of the oscillation, linearity of the moment map, and the
//! monotone structure of the singular profile.


use proptest::prelude::*;

use reebflow_core::charts::builtin::{builtin_cylinder, builtin_hopf};
use reebflow_core::charts::{distance, volume_density_from, ChartPoint, TangentVector};
use reebflow_core::lab::RhoProfile;
use reebflow_core::{calculus, metrics};

const TAU: f64 = std::f64::consts::TAU;

fn annulus_point() -> impl Strategy<Value = (f64, f64)> {
    (0.2f64..1.0, 0.0f64..TAU)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cylinder_ground_distance_is_a_metric(
        a in annulus_point(),
        b in annulus_point(),
        c in annulus_point(),
        za in -1.0f64..1.0,
        zb in -1.0f64..1.0,
        zc in -1.0f64..1.0,
    ) {
        let d = |p: &(f64, f64), zp: f64, q: &(f64, f64), zq: f64| {
            distance::cylinder_distance(0.2, false, 2.0, &[p.0, p.1, zp], &[q.0, q.1, zq])
        };
        let dab = d(&a, za, &b, zb);
        let dba = d(&b, zb, &a, za);
        prop_assert!((dab - dba).abs() < 1e-12);
        prop_assert!(d(&a, za, &a, za).abs() < 1e-12);
        let dac = d(&a, za, &c, zc);
        let dcb = d(&c, zc, &b, zb);
        prop_assert!(dab <= dac + dcb + 1e-9, "triangle: {dab} > {dac} + {dcb}");
    }

    #[test]
    fn hopf_ground_distance_is_a_metric(
        pa in (0.05f64..1.5, 0.0f64..TAU, 0.0f64..TAU),
        pb in (0.05f64..1.5, 0.0f64..TAU, 0.0f64..TAU),
        pc in (0.05f64..1.5, 0.0f64..TAU, 0.0f64..TAU),
    ) {
        let d = |p: &(f64, f64, f64), q: &(f64, f64, f64)| {
            distance::hopf_distance(&[p.0, p.1, p.2], &[q.0, q.1, q.2])
        };
        prop_assert!(d(&pa, &pa).abs() < 1e-12);
        prop_assert!((d(&pa, &pb) - d(&pb, &pa)).abs() < 1e-12);
        prop_assert!(d(&pa, &pb) <= d(&pa, &pc) + d(&pc, &pb) + 1e-10);
    }

    #[test]
    fn volume_density_scales_multilinearly(
        r in 0.1f64..0.95,
        theta in 0.0f64..TAU,
        z in -0.9f64..0.9,
        s in 0.2f64..3.0,
    ) {
        // Replacing alpha by s*alpha multiplies nu = alpha ^ dalpha by s^2
        // in dimension three.
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let x = [r, theta, z];
        let alpha = chart.alpha_at(&x);
        let omega = chart.dalpha(&x);
        let base = volume_density_from(&alpha, &omega);
        let scaled = volume_density_from(&(&alpha * s), &(&omega * s));
        prop_assert!((scaled - s * s * base).abs() < 1e-10 * (1.0 + base.abs()));
    }

    #[test]
    fn oscillation_is_translation_invariant_and_monotone(
        values in prop::collection::vec(-10.0f64..10.0, 2..40),
        shift in -5.0f64..5.0,
    ) {
        let osc = metrics::osc_values(&values);
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        prop_assert!((metrics::osc_values(&shifted) - osc).abs() < 1e-12);
        // Adding a sample never decreases the oscillation.
        let mut extended = values.clone();
        extended.push(values[0] + 1.0);
        prop_assert!(metrics::osc_values(&extended) >= osc - 1e-15);
    }

    #[test]
    fn moment_is_linear_in_the_vector(
        r in 0.1f64..0.95,
        theta in 0.0f64..TAU,
        z in -0.9f64..0.9,
        u in prop::array::uniform3(-2.0f64..2.0),
        v in prop::array::uniform3(-2.0f64..2.0),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let at = ChartPoint::new(vec![r, theta, z]);
        let tv = |c: &[f64; 3]| TangentVector { at: at.clone(), components: c.to_vec() };
        let combo: [f64; 3] = std::array::from_fn(|i| a * u[i] + b * v[i]);
        let lhs = calculus::moment(&chart, &tv(&combo));
        let rhs = a * calculus::moment(&chart, &tv(&u)) + b * calculus::moment(&chart, &tv(&v));
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn reeb_pairing_is_one_everywhere(
        eta in 0.05f64..1.5,
        xi1 in 0.0f64..TAU,
        xi2 in 0.0f64..TAU,
    ) {
        let chart = builtin_hopf();
        let v = calculus::reeb(&chart, &ChartPoint::new(vec![eta, xi1, xi2])).unwrap();
        prop_assert!((calculus::moment(&chart, &v) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rho_profile_is_decreasing_and_approximants_interpolate(
        eps in 0.02f64..0.24,
        n in 4usize..40,
        tau in 0.01f64..1.0,
    ) {
        let profile = RhoProfile::new(eps).unwrap();
        let a = profile.approximant(n).unwrap();
        // Decreasing on a pair of ordered samples.
        let tau2 = (tau + 0.05).min(1.0);
        prop_assert!(profile.rho(tau2).unwrap() <= profile.rho(tau).unwrap() + 1e-12);
        // Agreement above the cut; finiteness below.
        if tau >= 1.0 / n as f64 {
            prop_assert!((a.rho_n(tau) - profile.rho(tau).unwrap()).abs() < 1e-12);
        }
        prop_assert!(a.rho_n(0.0).is_finite());
        // The tabulated Hamiltonian is nondecreasing in r and vanishes at 1.
        prop_assert!(a.h(1.0).abs() < 1e-12);
        prop_assert!(a.h(tau) <= a.h(tau2) + 1e-12);
    }

    #[test]
    fn refined_osc_never_below_raw(
        values in prop::collection::vec(-5.0f64..5.0, 24),
    ) {
        // 24 samples as a 4 x 6 periodic grid.
        let raw = metrics::osc_values(&values);
        let refined = metrics::refined_osc(&values, &[4, 6], &[true, true]);
        prop_assert!(refined >= raw - 1e-15);
        // And never more than the largest neighbor gap beyond raw.
        prop_assert!(refined <= raw + 2.0 * 10.0);
    }
}
