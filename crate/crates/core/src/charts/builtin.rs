//! Built-in charts: the flat annular cylinder and the Hopf three-sphere.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{ChartKind, ContactChart};

/// Polar cutoff excising the Hopf-coordinate singularities at
/// `eta = 0, pi/2`.
pub const HOPF_POLAR_CUTOFF: f64 = 1e-3;

/// Default tensor-grid resolution per coordinate.
pub const DEFAULT_QUADRATURE: usize = 64;

fn cylinder_with(r_min: f64, r_max: f64, periodic_z: bool) -> Result<ContactChart> {
    if !(0.0 < r_min && r_min < r_max && r_max <= 1.0) {
        return Err(Error::Domain(format!(
            "cylinder radii must satisfy 0 < r_min < r_max <= 1, got [{r_min}, {r_max}]"
        )));
    }
    let alpha = Arc::new(|x: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[1] = 0.5 * x[0] * x[0];
        out[2] = 1.0;
    });
    let dalpha = Arc::new(|x: &[f64], m: &mut DMatrix<f64>| {
        m.fill(0.0);
        m[(0, 1)] = x[0];
        m[(1, 0)] = -x[0];
    });
    let metric = Arc::new(|x: &[f64]| {
        let mut g = DMatrix::identity(3, 3);
        g[(1, 1)] = x[0] * x[0];
        g
    });
    Ok(ContactChart::from_parts(
        if periodic_z { "cylinder_periodic_z" } else { "cylinder" },
        vec![[r_min, r_max], [0.0, std::f64::consts::TAU], [-1.0, 1.0]],
        vec![false, true, periodic_z],
        ChartKind::Cylinder,
        alpha,
        Some(dalpha),
        metric,
        vec![DEFAULT_QUADRATURE; 3],
    ))
}

/// The cylinder `(r, theta, z) in [r_min, r_max] x [0, 2pi) x [-1, 1]`
/// with `alpha = (r^2/2) dtheta + dz`, analytic `dalpha = r dr ^ dtheta`
/// and the Euclidean metric in cylindrical coordinates.
///
/// The chart is valid away from the axis; `r_min > 0` excises it.
pub fn builtin_cylinder(r_min: f64, r_max: f64) -> Result<ContactChart> {
    cylinder_with(r_min, r_max, false)
}

/// Cylinder variant with `z` identified mod 2, used by experiments whose
/// flows translate `z` for unit time.
pub fn builtin_cylinder_periodic_z(r_min: f64, r_max: f64) -> Result<ContactChart> {
    cylinder_with(r_min, r_max, true)
}

/// The unit three-sphere in Hopf coordinates
/// `(eta, xi1, xi2) in [delta, pi/2 - delta] x [0, 2pi)^2` carrying the
/// standard contact form `alpha = cos^2(eta) dxi1 + sin^2(eta) dxi2`
/// (the restriction of `x1 dy1 - y1 dx1 + x2 dy2 - y2 dx2`) and the round
/// metric. The Reeb flow is the Hopf circle action.
pub fn builtin_hopf() -> ContactChart {
    let delta = HOPF_POLAR_CUTOFF;
    let alpha = Arc::new(|x: &[f64], out: &mut [f64]| {
        let c = x[0].cos();
        let s = x[0].sin();
        out[0] = 0.0;
        out[1] = c * c;
        out[2] = s * s;
    });
    let dalpha = Arc::new(|x: &[f64], m: &mut DMatrix<f64>| {
        let sin2 = (2.0 * x[0]).sin();
        m.fill(0.0);
        m[(0, 1)] = -sin2;
        m[(1, 0)] = sin2;
        m[(0, 2)] = sin2;
        m[(2, 0)] = -sin2;
    });
    let metric = Arc::new(|x: &[f64]| {
        let c = x[0].cos();
        let s = x[0].sin();
        let mut g = DMatrix::identity(3, 3);
        g[(1, 1)] = c * c;
        g[(2, 2)] = s * s;
        g
    });
    ContactChart::from_parts(
        "hopf",
        vec![
            [delta, std::f64::consts::FRAC_PI_2 - delta],
            [0.0, std::f64::consts::TAU],
            [0.0, std::f64::consts::TAU],
        ],
        vec![false, true, true],
        ChartKind::Hopf,
        alpha,
        Some(dalpha),
        metric,
        vec![DEFAULT_QUADRATURE; 3],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_reeb_pairing_is_one() {
        let chart = builtin_hopf();
        // alpha(d/dxi1 + d/dxi2) = cos^2 + sin^2 = 1 at every point.
        for &eta in &[0.1, 0.6, 1.2] {
            let a = chart.alpha_at(&[eta, 0.3, 4.0]);
            assert!((a[1] + a[2] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hopf_density_matches_sin2eta() {
        let chart = builtin_hopf();
        for &eta in &[0.2, 0.7, 1.3] {
            let d = chart.volume_density(&[eta, 1.0, 2.0]);
            // Signed density in (eta, xi1, xi2) order is -sin(2 eta).
            assert!((d + (2.0 * eta).sin()).abs() < 1e-12, "eta={eta}: {d}");
            assert!(chart.measure_density(&[eta, 1.0, 2.0]) > 0.0);
        }
    }

    #[test]
    fn periodic_z_variant_wraps() {
        let chart = builtin_cylinder_periodic_z(0.05, 1.0).unwrap();
        let mut x = [0.5, 0.0, 1.7];
        chart.wrap_into(&mut x);
        assert!((x[2] + 0.3).abs() < 1e-12);
    }
}
