//! Fixed-step classical fourth-order Runge-Kutta integration on box
//! domains with periodic identifications.
//!
//! Deterministic error bounds matter more here than adaptivity: every
//! verification threshold downstream is stated for a fixed step. Escapes
//! from non-periodic domains are hard errors, never clamps, since silently
//! clamped trajectories would corrupt the metric computations.

use crate::error::{Error, Result};

/// The ambient box a trajectory must stay in.
pub trait Space {
    fn dim(&self) -> usize;
    /// Wrap periodic coordinates into the fundamental domain.
    fn wrap(&self, x: &mut [f64]);
    /// First violated non-periodic bound, if any.
    fn violation(&self, x: &[f64]) -> Option<(usize, f64)>;
}

impl Space for crate::charts::ContactChart {
    fn dim(&self) -> usize {
        self.dim
    }

    fn wrap(&self, x: &mut [f64]) {
        self.wrap_into(x);
    }

    fn violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.bounds_violation(x)
    }
}

/// A time-dependent vector field; `&mut self` so implementations can keep
/// scratch buffers across evaluations.
pub trait OdeField {
    fn eval(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
}

impl<F> OdeField for F
where
    F: FnMut(&[f64], f64, &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self(x, t, out)
    }
}

/// Reusable stage buffers for one worker.
pub struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    xt: Vec<f64>,
}

impl Stepper {
    pub fn new(dim: usize) -> Self {
        Stepper {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            xt: vec![0.0; dim],
        }
    }

    /// One classical RK4 step `x <- x + dt * increment`.
    #[inline]
    pub fn step<V: OdeField + ?Sized>(
        &mut self,
        field: &mut V,
        x: &mut [f64],
        t: f64,
        dt: f64,
    ) -> Result<()> {
        let dim = x.len();
        field.eval(x, t, &mut self.k1)?;
        for d in 0..dim {
            self.xt[d] = x[d] + 0.5 * dt * self.k1[d];
        }
        field.eval(&self.xt, t + 0.5 * dt, &mut self.k2)?;
        for d in 0..dim {
            self.xt[d] = x[d] + 0.5 * dt * self.k2[d];
        }
        field.eval(&self.xt, t + 0.5 * dt, &mut self.k3)?;
        for d in 0..dim {
            self.xt[d] = x[d] + dt * self.k3[d];
        }
        field.eval(&self.xt, t + dt, &mut self.k4)?;
        for d in 0..dim {
            x[d] += dt / 6.0 * (self.k1[d] + 2.0 * self.k2[d] + 2.0 * self.k3[d] + self.k4[d]);
        }
        Ok(())
    }
}

/// Integrate `x` from `t0` to `t1` (either direction) with nominal step
/// `h > 0`, wrapping and bounds-checking after every step.
pub fn integrate<V: OdeField + ?Sized, S: Space + ?Sized>(
    field: &mut V,
    space: &S,
    stepper: &mut Stepper,
    x: &mut [f64],
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<()> {
    debug_assert!(h > 0.0);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(());
    }
    let n = (span.abs() / h).ceil().max(1.0) as usize;
    let dt = span / n as f64;
    let mut t = t0;
    for k in 0..n {
        stepper.step(field, x, t, dt)?;
        t = t0 + (k + 1) as f64 * dt;
        space.wrap(x);
        if let Some((coordinate, value)) = space.violation(x) {
            return Err(Error::Escape {
                time: t,
                coordinate,
                value,
            });
        }
    }
    Ok(())
}

/// Integrate from `knots[0]` through every knot, recording the state at
/// each one (including the first).
pub fn integrate_knots<V: OdeField + ?Sized, S: Space + ?Sized>(
    field: &mut V,
    space: &S,
    x0: &[f64],
    knots: &[f64],
    h: f64,
    mut record: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let mut x = x0.to_vec();
    let mut stepper = Stepper::new(x.len());
    record(0, &x);
    for k in 1..knots.len() {
        integrate(field, space, &mut stepper, &mut x, knots[k - 1], knots[k], h)?;
        record(k, &x);
    }
    Ok(())
}

/// A free box (no wrapping, no bounds), useful in tests.
pub struct FreeSpace(pub usize);

impl Space for FreeSpace {
    fn dim(&self) -> usize {
        self.0
    }
    fn wrap(&self, _x: &mut [f64]) {}
    fn violation(&self, _x: &[f64]) -> Option<(usize, f64)> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_harmonic_oscillator_fourth_order() {
        // x'' = -x as a 2d system; exact solution (cos t, -sin t).
        let mut field = |x: &[f64], _t: f64, out: &mut [f64]| -> Result<()> {
            out[0] = x[1];
            out[1] = -x[0];
            Ok(())
        };
        let space = FreeSpace(2);
        let mut err_at = |h: f64| {
            let mut x = vec![1.0, 0.0];
            let mut st = Stepper::new(2);
            integrate(&mut field, &space, &mut st, &mut x, 0.0, 1.0, h).unwrap();
            ((x[0] - 1.0f64.cos()).powi(2) + (x[1] + 1.0f64.sin()).powi(2)).sqrt()
        };
        let e1 = err_at(1e-2);
        let e2 = err_at(5e-3);
        assert!(e1 < 1e-8);
        // Order 4: halving h cuts the error by ~16.
        let ratio = e1 / e2;
        assert!(ratio > 10.0 && ratio < 24.0, "observed order ratio {ratio}");
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let mut field = |x: &[f64], t: f64, out: &mut [f64]| -> Result<()> {
            out[0] = x[0] * t.sin();
            Ok(())
        };
        let space = FreeSpace(1);
        let mut st = Stepper::new(1);
        let mut x = vec![0.8];
        integrate(&mut field, &space, &mut st, &mut x, 0.0, 0.7, 1e-3).unwrap();
        integrate(&mut field, &space, &mut st, &mut x, 0.7, 0.0, 1e-3).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn escape_reports_time_and_coordinate() {
        let chart = crate::charts::builtin::builtin_cylinder(0.05, 1.0).unwrap();
        // Pure z-translation at speed 2: escapes z = 1 from 0.5 at t = 0.25.
        let mut field = |_x: &[f64], _t: f64, out: &mut [f64]| -> Result<()> {
            out.fill(0.0);
            out[2] = 2.0;
            Ok(())
        };
        let mut st = Stepper::new(3);
        let mut x = vec![0.5, 0.0, 0.5];
        let err = integrate(&mut field, &chart, &mut st, &mut x, 0.0, 1.0, 1e-2).unwrap_err();
        match err {
            Error::Escape {
                time, coordinate, ..
            } => {
                assert_eq!(coordinate, 2);
                assert!((time - 0.25).abs() < 2e-2, "escape time {time}");
            }
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn knot_recording_matches_direct_integration() {
        let mut field = |x: &[f64], _t: f64, out: &mut [f64]| -> Result<()> {
            out[0] = -0.3 * x[0];
            Ok(())
        };
        let space = FreeSpace(1);
        let knots = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut rec = vec![vec![]; knots.len()];
        integrate_knots(&mut field, &space, &[2.0], &knots, 1e-3, |k, x| {
            rec[k] = x.to_vec();
        })
        .unwrap();
        for (k, &t) in knots.iter().enumerate() {
            let exact = 2.0 * (-0.3f64 * t).exp();
            assert!((rec[k][0] - exact).abs() < 1e-10);
        }
    }
}
