//! Contact isotopies integrated from generating functions.
//!
//! An [`Isotopy`] is the flow `phi_t` of the time-dependent contact field
//! `gamma(H_t)`, integrated with fixed-step RK4. Inverses run the same
//! field backwards in time rather than root-finding, which matches the
//! closed-form inverse generator `(-H_t) o phi_t` in the strictly contact
//! case. Alpha-preservation is measured, not enforced: the deviation is
//! itself a verification signal.

use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::calculus;
use crate::charts::grid::PointSet;
use crate::charts::{ContactChart, TangentVector};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::ode::{self, OdeField, Stepper};
use crate::tolerances;

/// Whether the isotopy runs its generator forwards or represents the
/// inverse flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverted,
}

/// The velocity field `gamma(H_t)` with per-worker scratch buffers.
pub(crate) struct GeneratorVelocity<'a> {
    chart: &'a ContactChart,
    field: &'a ScalarField,
    fd_steps: Vec<f64>,
    grad: Vec<f64>,
    force_solver: bool,
}

impl<'a> GeneratorVelocity<'a> {
    pub(crate) fn new(chart: &'a ContactChart, field: &'a ScalarField, force_solver: bool) -> Self {
        GeneratorVelocity {
            chart,
            field,
            fd_steps: chart.grad_fd_steps(),
            grad: vec![0.0; chart.dim],
            force_solver,
        }
    }
}

impl OdeField for GeneratorVelocity<'_> {
    #[inline]
    fn eval(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        if self.force_solver {
            let v = calculus::gamma(self.chart, self.field, x, t)?;
            out.copy_from_slice(&v.components);
            return Ok(());
        }
        calculus::gamma_fast_into(
            self.chart,
            self.field,
            &self.fd_steps,
            &mut self.grad,
            x,
            t,
            out,
        )
    }
}

/// Flow maps of a batch of seed points recorded at the time knots,
/// seed-major: `position(seed, knot)`.
#[derive(Debug, Clone)]
pub struct Trajectories {
    pub dim: usize,
    pub knots: Vec<f64>,
    pub n_seeds: usize,
    pub(crate) data: Vec<f64>,
}

impl Trajectories {
    #[inline]
    pub fn position(&self, seed: usize, knot: usize) -> &[f64] {
        let stride = self.knots.len() * self.dim;
        let off = seed * stride + knot * self.dim;
        &self.data[off..off + self.dim]
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum GridKind {
    Quad,
    Osc,
}

type CacheKey = (GridKind, Vec<usize>, Vec<u64>, bool);
type TrajCache = Vec<(CacheKey, Arc<Trajectories>)>;

fn knot_bits(knots: &[f64]) -> Vec<u64> {
    knots.iter().map(|t| t.to_bits()).collect()
}

#[derive(Clone)]
pub struct Isotopy {
    chart: Arc<ContactChart>,
    generator: ScalarField,
    step: f64,
    time_knots: Arc<Vec<f64>>,
    direction: Direction,
    force_solver: bool,
    basic: Arc<OnceLock<bool>>,
    cache: Arc<Mutex<TrajCache>>,
}

/// Integrate the contact isotopy generated by `h` with RK4 step `step`.
pub fn integrate(chart: &Arc<ContactChart>, h: &ScalarField, step: f64) -> Isotopy {
    Isotopy::new(chart.clone(), h.clone(), step)
}

impl Isotopy {
    pub fn new(chart: Arc<ContactChart>, generator: ScalarField, step: f64) -> Self {
        let knots: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
        Isotopy {
            chart,
            generator,
            step,
            time_knots: Arc::new(knots),
            direction: Direction::Forward,
            force_solver: false,
            basic: Arc::new(OnceLock::new()),
            cache: Arc::new(Mutex::new(Vec::new())),
        }
    }

    /// Replace the time grid with `k` uniform segments on [0, 1].
    pub fn with_time_segments(mut self, k: usize) -> Self {
        let k = k.max(1);
        self.time_knots = Arc::new((0..=k).map(|i| i as f64 / k as f64).collect());
        self
    }

    /// Route every velocity evaluation through the kernel-system solver
    /// instead of the chart's closed form (for cross-checks).
    pub fn with_force_solver(mut self, force: bool) -> Self {
        self.force_solver = force;
        self.cache = Arc::new(Mutex::new(Vec::new()));
        self
    }

    pub fn chart(&self) -> &Arc<ContactChart> {
        &self.chart
    }

    pub fn generator(&self) -> &ScalarField {
        &self.generator
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn time_knots(&self) -> &[f64] {
        &self.time_knots
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Whether the generator is basic (strictly contact flow), from the
    /// field's flag or a coarse grid check, decided once.
    pub fn is_strictly_contact(&self) -> bool {
        *self.basic.get_or_init(|| match self.generator.basic_flag() {
            Some(b) => b,
            None => {
                let res = vec![6; self.chart.dim];
                calculus::is_basic(&self.chart, &self.generator, &res, tolerances::BASIC_TOL)
                    .map(|(b, _)| b)
                    .unwrap_or(false)
            }
        })
    }

    /// The inverse isotopy `t -> phi_t^{-1}`. For strictly contact flows
    /// its generator is the closed form `(-H_t) o phi_t` (see
    /// [`Isotopy::eq9_generator`]); otherwise only the numeric reversal is
    /// available and [`Isotopy::closed_form_inverse`] reports `false`.
    pub fn invert(&self) -> Isotopy {
        let mut inv = self.clone();
        inv.direction = match self.direction {
            Direction::Forward => Direction::Inverted,
            Direction::Inverted => Direction::Forward,
        };
        inv.cache = Arc::new(Mutex::new(Vec::new()));
        inv
    }

    /// True when the inverse-generator closed form applies (strictly
    /// contact generator).
    pub fn closed_form_inverse(&self) -> bool {
        self.is_strictly_contact()
    }

    /// The closed-form generator of the inverse isotopy, as a field that
    /// evaluates `-H_t(phi_t(x))` through the flow. `None` when the
    /// generator is not basic.
    pub fn eq9_generator(&self) -> Option<ScalarField> {
        if !self.is_strictly_contact() {
            return None;
        }
        let fwd = match self.direction {
            Direction::Forward => self.clone(),
            Direction::Inverted => self.invert(),
        };
        let name = format!("-({}) o flow", self.generator.name());
        Some(
            ScalarField::new(
                name,
                Arc::new(move |x: &[f64], t: f64| {
                    let y = fwd.point(x, t).expect("inverse generator flow escaped");
                    -fwd.generator.value(&y, t)
                }),
            )
            .with_basic_flag(true),
        )
    }

    /// The time-`t` map applied to `x`.
    pub fn point(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        let mut vel = GeneratorVelocity::new(&self.chart, &self.generator, self.force_solver);
        let mut stepper = Stepper::new(self.chart.dim);
        match self.direction {
            Direction::Forward => {
                ode::integrate(
                    &mut vel,
                    self.chart.as_ref(),
                    &mut stepper,
                    &mut y,
                    0.0,
                    t,
                    self.step,
                )?;
            }
            Direction::Inverted => {
                ode::integrate(
                    &mut vel,
                    self.chart.as_ref(),
                    &mut stepper,
                    &mut y,
                    t,
                    0.0,
                    self.step,
                )?;
            }
        }
        Ok(y)
    }

    /// The inverse of the time-`t` map applied to `x`.
    pub fn point_inverse(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.invert().point(x, t)
    }

    /// Velocity field at `(t, x)`: `gamma(H_t)(x)` for forward isotopies,
    /// a finite-difference evaluation for inverted ones.
    pub fn velocity(&self, t: f64, x: &[f64]) -> Result<TangentVector> {
        match self.direction {
            Direction::Forward => {
                if self.force_solver {
                    calculus::gamma(&self.chart, &self.generator, x, t)
                } else {
                    let mut out = vec![0.0; self.chart.dim];
                    let mut grad = vec![0.0; self.chart.dim];
                    calculus::gamma_fast_into(
                        &self.chart,
                        &self.generator,
                        &self.chart.grad_fd_steps(),
                        &mut grad,
                        x,
                        t,
                        &mut out,
                    )?;
                    Ok(TangentVector {
                        at: crate::charts::ChartPoint::new(x.to_vec()),
                        components: out,
                    })
                }
            }
            Direction::Inverted => self.velocity_fd(t, x),
        }
    }

    /// Velocity by finite differences of the flow map in time (central
    /// stencil inside [0, 1], second-order one-sided at the ends).
    pub fn velocity_fd(&self, t: f64, x: &[f64]) -> Result<TangentVector> {
        let delta = tolerances::VELOCITY_FD_STEP;
        let y = self.point_inverse(x, t)?;
        let dim = self.chart.dim;
        let eval = |s: f64| self.point(&y, s);
        // Periodic-safe coordinate difference a - b.
        let diff = |a: &[f64], b: &[f64], d: usize| {
            let mut v = a[d] - b[d];
            if self.chart.periodic[d] {
                let period = self.chart.extent(d);
                if v > period / 2.0 {
                    v -= period;
                }
                if v < -period / 2.0 {
                    v += period;
                }
            }
            v
        };
        let mut comps = vec![0.0; dim];
        if t >= delta && t + delta <= 1.0 {
            let p = eval(t + delta)?;
            let m = eval(t - delta)?;
            for d in 0..dim {
                comps[d] = diff(&p, &m, d) / (2.0 * delta);
            }
        } else if t < delta {
            let f0 = eval(t)?;
            let f1 = eval(t + delta)?;
            let f2 = eval(t + 2.0 * delta)?;
            for d in 0..dim {
                comps[d] =
                    (4.0 * diff(&f1, &f0, d) - diff(&f2, &f0, d)) / (2.0 * delta);
            }
        } else {
            let f0 = eval(t)?;
            let f1 = eval(t - delta)?;
            let f2 = eval(t - 2.0 * delta)?;
            for d in 0..dim {
                comps[d] =
                    -(4.0 * diff(&f1, &f0, d) - diff(&f2, &f0, d)) / (2.0 * delta);
            }
        }
        Ok(TangentVector {
            at: crate::charts::ChartPoint::new(x.to_vec()),
            components: comps,
        })
    }

    /// `I(phi_dot_t)(x)`: the generator value for forward isotopies, the
    /// closed form `-H_t(phi_t(x))` for inverted strictly contact ones,
    /// and the moment of the FD velocity otherwise.
    pub fn generator_value(&self, x: &[f64], t: f64) -> Result<f64> {
        match self.direction {
            Direction::Forward => Ok(self.generator.value(x, t)),
            Direction::Inverted => {
                if self.is_strictly_contact() {
                    let y = self.invert().point(x, t)?;
                    Ok(-self.generator.value(&y, t))
                } else {
                    let v = self.velocity_fd(t, x)?;
                    Ok(calculus::moment(&self.chart, &v))
                }
            }
        }
    }

    /// Batch flow maps of `seeds` at `knots` (parallel over seeds).
    /// `inverse` applies the inverse of each time-knot map instead.
    pub fn maps_on(&self, seeds: &PointSet, knots: &[f64], inverse: bool) -> Result<Trajectories> {
        let backward = match self.direction {
            Direction::Forward => inverse,
            Direction::Inverted => !inverse,
        };
        let dim = self.chart.dim;
        let n_seeds = seeds.len();
        let stride = knots.len() * dim;
        let mut data = vec![0.0; n_seeds * stride];
        let chart = self.chart.as_ref();
        data.par_chunks_mut(stride)
            .with_min_len(8)
            .enumerate()
            .try_for_each(|(i, chunk)| -> Result<()> {
                let seed = seeds.point(i);
                let mut vel = GeneratorVelocity::new(chart, &self.generator, self.force_solver);
                if !backward {
                    ode::integrate_knots(&mut vel, chart, seed, knots, self.step, |k, x| {
                        chunk[k * dim..(k + 1) * dim].copy_from_slice(x);
                    })?;
                } else {
                    // Each inverse map is its own backward trajectory.
                    let mut stepper = Stepper::new(dim);
                    for (k, &t) in knots.iter().enumerate() {
                        let mut y = seed.to_vec();
                        ode::integrate(&mut vel, chart, &mut stepper, &mut y, t, 0.0, self.step)?;
                        chunk[k * dim..(k + 1) * dim].copy_from_slice(&y);
                    }
                }
                Ok(())
            })?;
        Ok(Trajectories {
            dim,
            knots: knots.to_vec(),
            n_seeds,
            data,
        })
    }

    /// Cached batch maps on a chart grid (quadrature or inclusive).
    pub fn maps_on_grid(
        &self,
        kind: GridKind,
        res: &[usize],
        knots: &[f64],
        inverse: bool,
    ) -> Result<Arc<Trajectories>> {
        let key: CacheKey = (kind, res.to_vec(), knot_bits(knots), inverse);
        {
            let cache = self.cache.lock().unwrap();
            if let Some((_, t)) = cache.iter().find(|(k, _)| *k == key) {
                return Ok(t.clone());
            }
        }
        let points = match kind {
            GridKind::Quad => self.chart.quad_rule(res).nodes.clone(),
            GridKind::Osc => (*self.chart.osc_points(res)).clone(),
        };
        let traj = Arc::new(self.maps_on(&points, knots, inverse)?);
        self.cache.lock().unwrap().push((key, traj.clone()));
        Ok(traj)
    }

    /// Conformal factor `f_{phi_t}(x)` with `phi_t^* alpha = f_{phi_t} alpha`.
    pub fn conformal_factor(&self, t: f64, x: &[f64], method: ConformalMethod) -> Result<f64> {
        match method {
            ConformalMethod::Integral => self.conformal_integral(t, x),
            ConformalMethod::Pullback => self.conformal_pullback(t, x),
        }
    }

    /// `exp( int_0^t (xi . H_s)(phi_s(x)) ds )` by composite Simpson along
    /// the trajectory.
    fn conformal_integral(&self, t: f64, x: &[f64]) -> Result<f64> {
        if t == 0.0 {
            return Ok(1.0);
        }
        // Even number of panels, resolution tied to the flow step.
        let n = ((t / (4.0 * self.step)).ceil() as usize).clamp(2, 400) * 2;
        let knots: Vec<f64> = (0..=n).map(|k| t * k as f64 / n as f64).collect();
        let mut vals = vec![0.0; knots.len()];
        let chart = self.chart.as_ref();
        let mut vel = GeneratorVelocity::new(chart, &self.generator, self.force_solver);
        let mut err: Option<Error> = None;
        ode::integrate_knots(&mut vel, chart, x, &knots, self.step, |k, y| {
            match calculus::xi_derivative(chart, &self.generator, y, knots[k]) {
                Ok(v) => vals[k] = v,
                Err(e) => err = Some(e),
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        let h = t / n as f64;
        let mut simpson = vals[0] + vals[n];
        for (k, v) in vals.iter().enumerate().take(n).skip(1) {
            simpson += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        Ok((simpson * h / 3.0).exp())
    }

    /// Ratio of `(phi_t^* alpha)` to `alpha` on a test vector outside
    /// `ker alpha` (the Reeb direction first, coordinate directions as
    /// fallback), with the pullback from a finite-difference Jacobian.
    fn conformal_pullback(&self, t: f64, x: &[f64]) -> Result<f64> {
        let dim = self.chart.dim;
        let pulled = self.pullback_alpha(t, x)?;
        let alpha = self.chart.alpha_at(x);
        let mut test = vec![0.0; dim];
        calculus::reeb_fast_into(&self.chart, x, &mut test)?;
        let mut denom: f64 = alpha.iter().zip(&test).map(|(a, v)| a * v).sum();
        if denom.abs() < 1e-8 {
            for d in 0..dim {
                if alpha[d].abs() > denom.abs() {
                    test.fill(0.0);
                    test[d] = 1.0;
                    denom = alpha[d];
                }
            }
        }
        let num: f64 = pulled.iter().zip(&test).map(|(a, v)| a * v).sum();
        Ok(num / denom)
    }

    /// `(phi_t^* alpha)_x = J^T alpha_{phi_t(x)}` with the flow Jacobian
    /// `J` from central finite differences.
    pub fn pullback_alpha(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.chart.dim;
        let y = self.point(x, t)?;
        let alpha_y = self.chart.alpha_at(&y);
        let mut out = vec![0.0; dim];
        let mut xp = x.to_vec();
        for d in 0..dim {
            let h = tolerances::JACOBIAN_FD_STEP * self.chart.extent(d).max(1.0);
            xp[d] = x[d] + h;
            let yp = self.point(&xp, t)?;
            xp[d] = x[d] - h;
            let ym = self.point(&xp, t)?;
            xp[d] = x[d];
            let mut acc = 0.0;
            for i in 0..dim {
                let mut dv = yp[i] - ym[i];
                if self.chart.periodic[i] {
                    let period = self.chart.extent(i);
                    if dv > period / 2.0 {
                        dv -= period;
                    }
                    if dv < -period / 2.0 {
                        dv += period;
                    }
                }
                acc += alpha_y[i] * dv / (2.0 * h);
            }
            out[d] = acc;
        }
        Ok(out)
    }

    /// Max over the inclusive grid of `| phi_t^* alpha - alpha |_g`
    /// (covector norm via the inverse metric). Points on non-periodic
    /// boundaries are inset by the Jacobian FD step so the difference
    /// probes stay inside the chart.
    pub fn pullback_alpha_deviation(&self, t: f64, res: &[usize]) -> Result<f64> {
        let pts = self.chart.osc_points(res);
        let chart = self.chart.as_ref();
        pts.coords
            .par_chunks_exact(chart.dim)
            .map(|raw| -> Result<f64> {
                let mut x = raw.to_vec();
                for d in 0..chart.dim {
                    if !chart.periodic[d] {
                        let pad = 2.0 * tolerances::JACOBIAN_FD_STEP * chart.extent(d).max(1.0);
                        let [lo, hi] = chart.domain[d];
                        x[d] = x[d].clamp(lo + pad, hi - pad);
                    }
                }
                let x = &x[..];
                let pulled = self.pullback_alpha(t, x)?;
                let alpha = chart.alpha_at(x);
                let g = chart.metric(x);
                let ginv = g.clone().try_inverse().ok_or_else(|| Error::Degeneracy {
                    context: "metric not invertible".into(),
                    residual: f64::INFINITY,
                })?;
                let diff = nalgebra::DVector::from_iterator(
                    chart.dim,
                    pulled.iter().zip(alpha.iter()).map(|(p, a)| p - a),
                );
                Ok((diff.transpose() * &ginv * &diff)[(0, 0)].max(0.0).sqrt())
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }
}

/// How to evaluate the conformal factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalMethod {
    Integral,
    Pullback,
}

/// Generator of `Phi_H^{-1} o Phi_F`: the closed form
/// `(F_t - H_t) o phi_t` when the flow of `H` is strictly contact, and the
/// conformal-factor weighted form otherwise.
pub fn compose_generators(f: &ScalarField, h: &ScalarField, phi_h: &Isotopy) -> ScalarField {
    let flow = phi_h.clone();
    let diff = ScalarField::sub(f, h);
    let name = format!("({} # bar {})", f.name(), h.name());
    if phi_h.is_strictly_contact() {
        let basic = matches!((f.basic_flag(), h.basic_flag()), (Some(true), Some(true)));
        ScalarField::new(
            name,
            Arc::new(move |x: &[f64], t: f64| {
                let y = flow.point(x, t).expect("composition flow escaped");
                diff.value(&y, t)
            }),
        )
        .with_basic_flag(basic)
    } else {
        ScalarField::new(
            name,
            Arc::new(move |x: &[f64], t: f64| {
                let y = flow.point(x, t).expect("composition flow escaped");
                let conf = flow
                    .conformal_factor(t, &y, ConformalMethod::Integral)
                    .expect("conformal factor");
                conf * diff.value(&y, t)
            }),
        )
    }
}

/// Generator of `Phi_H o Phi_F`: `H_t + F_t o phi_t^{-1}` with `phi`
/// the flow of `H`.
pub fn product_generator(h: &ScalarField, f: &ScalarField, phi_h: &Isotopy) -> ScalarField {
    let flow = phi_h.clone();
    let (hc, fc) = (h.clone(), f.clone());
    let name = format!("({} . {})", h.name(), f.name());
    let basic = matches!((f.basic_flag(), h.basic_flag()), (Some(true), Some(true)));
    let field = ScalarField::new(
        name,
        Arc::new(move |x: &[f64], t: f64| {
            let y = flow.point_inverse(x, t).expect("product flow escaped");
            hc.value(x, t) + fc.value(&y, t)
        }),
    );
    if basic {
        field.with_basic_flag(true)
    } else {
        field
    }
}

/// Spec-named wrapper for [`Isotopy::velocity`].
pub fn velocity(phi: &Isotopy, t: f64, x: &[f64]) -> Result<TangentVector> {
    phi.velocity(t, x)
}

/// Spec-named wrapper for [`Isotopy::invert`].
pub fn invert(phi: &Isotopy) -> Isotopy {
    phi.invert()
}

/// Spec-named wrapper for [`Isotopy::conformal_factor`].
pub fn conformal_factor(phi: &Isotopy, t: f64, x: &[f64], method: ConformalMethod) -> Result<f64> {
    phi.conformal_factor(t, x, method)
}

/// Spec-named wrapper for [`Isotopy::pullback_alpha_deviation`].
pub fn pullback_alpha_deviation(phi: &Isotopy, t: f64, res: &[usize]) -> Result<f64> {
    phi.pullback_alpha_deviation(t, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::builtin::{builtin_cylinder, builtin_cylinder_periodic_z};
    use crate::fields::families;
    use crate::sampling;
    use std::sync::Arc;

    fn cyl() -> Arc<ContactChart> {
        Arc::new(builtin_cylinder(0.05, 1.0).unwrap())
    }

    fn angular() -> ScalarField {
        ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| 0.5 * x[0] * x[0]))
            .with_grad(Arc::new(|x: &[f64], _, out: &mut [f64]| {
                out[0] = x[0];
                out[1] = 0.0;
                out[2] = 0.0;
            }))
            .with_basic_flag(true)
            .with_time_dependence(false)
    }

    #[test]
    fn angular_momentum_flow_is_rotation() {
        let chart = cyl();
        let phi = integrate(&chart, &angular(), 1e-3);
        let x = [0.5, 1.0, -0.2];
        let y = phi.point(&x, 1.0).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-10);
        assert!((y[1] - 2.0).abs() < 1e-10);
        assert!((y[2] + 0.2).abs() < 1e-10);
    }

    #[test]
    fn zero_generator_is_identity() {
        let chart = cyl();
        let phi = integrate(&chart, &ScalarField::zero(), 1e-2);
        let x = [0.3, 2.0, 0.6];
        for &t in &[0.0, 0.4, 1.0] {
            let y = phi.point(&x, t).unwrap();
            for d in 0..3 {
                assert!((y[d] - x[d]).abs() < tolerances::IDENTITY_TOL);
            }
            let v = phi.velocity(t, &x).unwrap();
            assert!(v.components.iter().all(|c| c.abs() < 1e-14));
        }
    }

    #[test]
    fn constant_generator_is_reeb_translation() {
        let chart = cyl();
        let phi = integrate(&chart, &ScalarField::constant(0.3), 1e-3);
        let x = [0.5, 1.0, 0.1];
        for &t in &[0.25, 1.0] {
            let y = phi.point(&x, t).unwrap();
            assert!((y[2] - (0.1 + 0.3 * t)).abs() < 1e-12);
            assert!((y[0] - 0.5).abs() < 1e-13 && (y[1] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn time_zero_map_is_identity() {
        let chart = cyl();
        let mut rng = sampling::rng(2);
        let h = families::cylinder_basic(&mut rng, 0.5);
        let phi = integrate(&chart, &h, 1e-3);
        let x = [0.6, 0.3, -0.4];
        let y = phi.point(&x, 0.0).unwrap();
        for d in 0..3 {
            assert!((y[d] - x[d]).abs() < tolerances::IDENTITY_TOL);
        }
    }

    #[test]
    fn group_property_of_flow_maps() {
        let chart = cyl();
        let mut rng = sampling::rng(6);
        let h = families::cylinder_basic(&mut rng, 0.5);
        let step = 1e-2;
        let phi = integrate(&chart, &h, step);
        let x = [0.5, 2.0, 0.0];
        let direct = phi.point(&x, 1.0).unwrap();
        // Recompute through an intermediate stop at t = 0.4: both paths are
        // RK4 approximations of the same map.
        let mid = phi.point(&x, 0.4).unwrap();
        let mut vel = GeneratorVelocity::new(&chart, &h, false);
        let mut stepper = Stepper::new(3);
        let mut y = mid.clone();
        ode::integrate(&mut vel, chart.as_ref(), &mut stepper, &mut y, 0.4, 1.0, step).unwrap();
        let bound = 10.0 * step.powi(4);
        for d in 0..3 {
            assert!(
                (y[d] - direct[d]).abs() < bound,
                "group property violated in coordinate {d}: {} vs {}",
                y[d],
                direct[d]
            );
        }
    }

    #[test]
    fn velocity_moment_recovers_generator() {
        let chart = cyl();
        let mut rng = sampling::rng(12);
        use rand::Rng;
        let h = families::cylinder_general(&mut rng, 0.6);
        let phi = integrate(&chart, &h, 1e-3);
        for _ in 0..20 {
            let x = [
                rng.random_range(0.15..0.9),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(-0.8..0.8),
            ];
            let t = rng.random_range(0.0..1.0);
            let v = phi.velocity(t, &x).unwrap();
            let m = calculus::moment(&chart, &v);
            assert!((m - h.value(&x, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn velocity_fd_matches_field() {
        let chart = cyl();
        let mut rng = sampling::rng(13);
        let h = families::cylinder_basic(&mut rng, 0.5);
        let phi = integrate(&chart, &h, 1e-3);
        for &t in &[0.0, 0.5, 1.0] {
            let x = [0.55, 1.2, 0.1];
            let direct = phi.velocity(t, &x).unwrap();
            let fd = phi.velocity_fd(t, &x).unwrap();
            for d in 0..3 {
                assert!(
                    (direct.components[d] - fd.components[d]).abs() < 1e-5,
                    "t={t} d={d}: {} vs {}",
                    direct.components[d],
                    fd.components[d]
                );
            }
        }
    }

    #[test]
    fn inverse_of_rotation_rotates_back() {
        let chart = cyl();
        let phi = integrate(&chart, &angular(), 1e-3);
        let inv = phi.invert();
        assert!(inv.closed_form_inverse());
        let x = [0.5, 2.0, 0.3];
        let y = inv.point(&x, 1.0).unwrap();
        assert!((y[1] - 1.0).abs() < 1e-10);
        let back = phi.point(&y, 1.0).unwrap();
        for d in 0..3 {
            assert!((back[d] - x[d]).abs() < 10.0 * phi.step().powi(4));
        }
    }

    #[test]
    fn inverse_generator_closed_form() {
        let chart = cyl();
        // Constant generator: inverse generator is the constant -c.
        let phi = integrate(&chart, &ScalarField::constant(0.4), 1e-3);
        let inv = phi.invert();
        let g = inv.generator_value(&[0.5, 1.0, 0.1], 0.7).unwrap();
        assert!((g + 0.4).abs() < 1e-12);
        let eq9 = phi.eq9_generator().unwrap();
        assert!((eq9.value(&[0.5, 1.0, 0.1], 0.7) + 0.4).abs() < 1e-12);
        // Identity isotopy inverts to itself.
        let id = integrate(&chart, &ScalarField::zero(), 1e-2);
        let idinv = id.invert();
        let x = [0.4, 0.2, -0.5];
        let y = idinv.point(&x, 1.0).unwrap();
        for d in 0..3 {
            assert!((y[d] - x[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_generators_special_cases() {
        let chart = cyl();
        let mut rng = sampling::rng(17);
        let h = families::cylinder_basic(&mut rng, 0.5);
        let phi_h = integrate(&chart, &h, 1e-3);
        // F = H: the composition is the identity, generator 0.
        let zero = compose_generators(&h, &h, &phi_h);
        assert!(zero.value(&[0.5, 1.0, 0.2], 0.5).abs() < 1e-12);
        // H = 0: generator is F itself.
        let f = families::cylinder_basic(&mut rng, 0.5);
        let id = integrate(&chart, &ScalarField::zero(), 1e-2);
        let same = compose_generators(&f, &ScalarField::zero(), &id);
        let x = [0.7, 0.8, 0.0];
        assert!((same.value(&x, 0.3) - f.value(&x, 0.3)).abs() < 1e-12);
    }

    #[test]
    fn composed_generator_matches_composed_flow() {
        // F = r^2/2, H = 1 (both basic): (F # Hbar)_t = r^2/2 - 1, and its
        // flow must equal phi_H^{-1} o phi_F.
        let f = angular();
        let h = ScalarField::constant(1.0);
        // Reeb translation by 1 leaves z = [-1, 1]: use the periodic chart.
        let chart_p = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let phi_h = integrate(&chart_p, &h, 1e-3);
        let composed = compose_generators(&f, &h, &phi_h);
        let x = [0.5, 1.0, 0.2];
        // Closed form: (r^2/2 - 1) o (Reeb translation) = r^2/2 - 1.
        assert!(
            (composed.value(&x, 0.7) - (0.125 - 1.0)).abs() < 1e-10,
            "closed form value"
        );
        let phi_g = integrate(&chart_p, &composed, 2e-3);
        let phi_f = integrate(&chart_p, &f, 1e-3);
        let via_composition = phi_h
            .invert()
            .point(&phi_f.point(&x, 1.0).unwrap(), 1.0)
            .unwrap();
        let via_generator = phi_g.point(&x, 1.0).unwrap();
        for d in 0..3 {
            let mut dv = (via_composition[d] - via_generator[d]).abs();
            if chart_p.periodic[d] {
                let p = chart_p.extent(d);
                dv = dv.min(p - dv);
            }
            assert!(
                dv < 1e-6,
                "coordinate {d}: {via_composition:?} vs {via_generator:?}"
            );
        }
    }

    #[test]
    fn product_generator_special_cases() {
        let chart = cyl();
        let mut rng = sampling::rng(23);
        let h = families::cylinder_basic(&mut rng, 0.4);
        let phi_h = integrate(&chart, &h, 1e-3);
        // F = 0: generator is H.
        let p = product_generator(&h, &ScalarField::zero(), &phi_h);
        let x = [0.6, 0.5, 0.1];
        assert!((p.value(&x, 0.4) - h.value(&x, 0.4)).abs() < 1e-12);
        // Constants add.
        let a = ScalarField::constant(0.2);
        let b = ScalarField::constant(0.1);
        let chart_p = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let phi_a = integrate(&chart_p, &a, 1e-3);
        let sum = product_generator(&a, &b, &phi_a);
        assert!((sum.value(&x, 0.9) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn product_generator_flow_matches_pointwise_composition() {
        let chart = cyl();
        let mut rng = sampling::rng(29);
        let h = families::cylinder_basic(&mut rng, 0.35);
        let f = families::cylinder_basic(&mut rng, 0.35);
        let phi_h = integrate(&chart, &h, 1e-3);
        let phi_f = integrate(&chart, &f, 1e-3);
        let prod = product_generator(&h, &f, &phi_h);
        let phi_prod = integrate(&chart, &prod, 2e-3);
        let x = [0.55, 2.5, 0.2];
        let lhs = phi_prod.point(&x, 1.0).unwrap();
        let rhs = phi_h.point(&phi_f.point(&x, 1.0).unwrap(), 1.0).unwrap();
        for d in 0..3 {
            let mut dv = (lhs[d] - rhs[d]).abs();
            if chart.periodic[d] {
                let p = chart.extent(d);
                dv = dv.min(p - dv);
            }
            assert!(dv < 1e-6, "coordinate {d}");
        }
    }

    #[test]
    fn conformal_factor_basic_is_one() {
        let chart = cyl();
        let mut rng = sampling::rng(31);
        let h = families::cylinder_basic(&mut rng, 0.5);
        let phi = integrate(&chart, &h, 1e-3);
        let f = phi
            .conformal_factor(0.8, &[0.5, 1.0, 0.0], ConformalMethod::Integral)
            .unwrap();
        assert!((f - 1.0).abs() < 1e-9, "{f}");
    }

    #[test]
    fn conformal_factor_height_generator() {
        // H = z: xi.H = 1, so f_{phi_t} = e^t; flow stays inside for t <= 0.5
        // from moderate seeds.
        let chart = cyl();
        let z = ScalarField::new("z", Arc::new(|x: &[f64], _| x[2]))
            .with_grad(Arc::new(|_x: &[f64], _, out: &mut [f64]| {
                out[0] = 0.0;
                out[1] = 0.0;
                out[2] = 1.0;
            }))
            .with_basic_flag(false);
        let phi = integrate(&chart, &z, 1e-3);
        let x = [0.4, 1.0, 0.2];
        for &t in &[0.1, 0.3, 0.5] {
            let fi = phi
                .conformal_factor(t, &x, ConformalMethod::Integral)
                .unwrap();
            assert!(
                (fi - t.exp()).abs() < tolerances::CONFORMAL_EXP_TOL,
                "t={t}: {fi}"
            );
            let fp = phi
                .conformal_factor(t, &x, ConformalMethod::Pullback)
                .unwrap();
            assert!(
                (fi - fp).abs() < tolerances::CONFORMAL_CROSS_TOL,
                "integral {fi} vs pullback {fp}"
            );
        }
    }

    #[test]
    fn conformal_methods_agree_on_random_nonbasic() {
        let chart = cyl();
        let mut rng = sampling::rng(37);
        use rand::Rng;
        for _ in 0..3 {
            let h = families::cylinder_general(&mut rng, 0.3);
            let phi = integrate(&chart, &h, 1e-3);
            let x = [
                rng.random_range(0.35..0.65),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(-0.3..0.3),
            ];
            let t = 0.4;
            let fi = phi
                .conformal_factor(t, &x, ConformalMethod::Integral)
                .unwrap();
            let fp = phi
                .conformal_factor(t, &x, ConformalMethod::Pullback)
                .unwrap();
            assert!(
                (fi - fp).abs() < tolerances::CONFORMAL_CROSS_TOL,
                "integral {fi} vs pullback {fp}"
            );
        }
    }

    #[test]
    fn strictly_contact_flows_preserve_alpha() {
        let chart = cyl();
        let res = [6, 6, 4];
        // Identity: limited only by the FD-quotient roundoff floor eps/h.
        let id = integrate(&chart, &ScalarField::zero(), 1e-3);
        assert!(id.pullback_alpha_deviation(1.0, &res).unwrap() < 1e-10);
        let rot = integrate(&chart, &angular(), 1e-3);
        let dev = rot.pullback_alpha_deviation(1.0, &res).unwrap();
        assert!(dev < 1e-8, "rotation deviation {dev:.3e}");
        // Reeb translation (periodic z so trajectories stay in).
        let chart_p = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let reeb = integrate(&chart_p, &ScalarField::constant(0.5), 1e-3);
        let dev = reeb.pullback_alpha_deviation(1.0, &res).unwrap();
        assert!(dev < 1e-8, "reeb deviation {dev:.3e}");
    }

    #[test]
    fn chain_rule_for_composed_isotopies() {
        // d/dt (phi_t o psi_t) = phi_dot + (phi_t)_* psi_dot, checked by FD.
        let chart = cyl();
        let mut rng = sampling::rng(41);
        let h = families::cylinder_basic(&mut rng, 0.4);
        let f = families::cylinder_basic(&mut rng, 0.4);
        let phi = integrate(&chart, &h, 1e-3);
        let psi = integrate(&chart, &f, 1e-3);
        let y = [0.5, 1.5, 0.0];
        let t = 0.5;
        let delta = 1e-3;
        let comp = |s: f64| phi.point(&psi.point(&y, s).unwrap(), s).unwrap();
        let p = comp(t + delta);
        let m = comp(t - delta);
        let x = comp(t);
        let v1 = phi.velocity(t, &x).unwrap();
        // (phi_t)_* psi_dot at x: Jacobian of phi_t at psi_t(y) applied to
        // psi_dot(psi_t(y)).
        let z = psi.point(&y, t).unwrap();
        let v2 = psi.velocity(t, &z).unwrap();
        let mut push = vec![0.0; 3];
        let mut zp = z.clone();
        for d in 0..3 {
            let hj = 1e-5;
            zp[d] = z[d] + hj;
            let a = phi.point(&zp, t).unwrap();
            zp[d] = z[d] - hj;
            let b = phi.point(&zp, t).unwrap();
            zp[d] = z[d];
            for i in 0..3 {
                push[i] += (a[i] - b[i]) / (2.0 * hj) * v2.components[d];
            }
        }
        for d in 0..3 {
            let fd = (p[d] - m[d]) / (2.0 * delta);
            let expect = v1.components[d] + push[d];
            assert!(
                (fd - expect).abs() < 1e-5,
                "chain rule coordinate {d}: fd {fd} vs {expect}"
            );
        }
    }

    #[test]
    fn pushforward_identity_for_forms() {
        // i_{rho_* X} omega = (rho^{-1})^* ( i_X rho^* omega ) for rho a
        // flow map and omega in {alpha, dalpha}, through FD Jacobians.
        let chart = cyl();
        let mut rng = sampling::rng(43);
        let h = families::cylinder_basic(&mut rng, 0.4);
        let rho = integrate(&chart, &h, 1e-3);
        let t = 1.0;
        let y = [0.5, 0.8, 0.1];
        let x = rho.point_inverse(&y, t).unwrap();
        let xvec = [0.3, -0.2, 0.5];
        let jac = |at: &[f64]| {
            let mut j = nalgebra::DMatrix::zeros(3, 3);
            let mut ap = at.to_vec();
            for d in 0..3 {
                let hj = 1e-5;
                ap[d] = at[d] + hj;
                let a = rho.point(&ap, t).unwrap();
                ap[d] = at[d] - hj;
                let b = rho.point(&ap, t).unwrap();
                ap[d] = at[d];
                for i in 0..3 {
                    let mut dv = a[i] - b[i];
                    if chart.periodic[i] {
                        let per = chart.extent(i);
                        if dv > per / 2.0 {
                            dv -= per;
                        }
                        if dv < -per / 2.0 {
                            dv += per;
                        }
                    }
                    j[(i, d)] = dv / (2.0 * hj);
                }
            }
            j
        };
        let j_at_x = jac(&x);
        let push = &j_at_x * nalgebra::DVector::from_row_slice(&xvec);
        // omega = alpha.
        let alpha_y = chart.alpha_at(&y);
        let lhs_alpha = alpha_y.dot(&push);
        let pulled = rho.pullback_alpha(t, &x).unwrap();
        let rhs_alpha: f64 = pulled.iter().zip(&xvec).map(|(a, v)| a * v).sum();
        assert!(
            (lhs_alpha - rhs_alpha).abs() < 1e-5,
            "alpha case: {lhs_alpha} vs {rhs_alpha}"
        );
        // omega = dalpha.
        let omega_y = chart.dalpha(&y);
        let lhs: nalgebra::DVector<f64> = omega_y.transpose() * &push;
        let xv = nalgebra::DVector::from_row_slice(&xvec);
        let pulled_two_form = j_at_x.transpose() * &omega_y * &j_at_x;
        let inner = pulled_two_form.transpose() * &xv;
        let jinv = j_at_x.clone().try_inverse().unwrap();
        let rhs = jinv.transpose() * inner;
        for d in 0..3 {
            assert!(
                (lhs[d] - rhs[d]).abs() < 1e-5,
                "dalpha case coordinate {d}: {} vs {}",
                lhs[d],
                rhs[d]
            );
        }
    }

    #[test]
    fn batch_maps_match_pointwise() {
        let chart = cyl();
        let mut rng = sampling::rng(47);
        let h = families::cylinder_basic(&mut rng, 0.5);
        let phi = integrate(&chart, &h, 1e-3);
        let seeds = PointSet {
            dim: 3,
            coords: vec![0.4, 0.2, 0.0, 0.7, 3.0, -0.3],
        };
        let knots = [0.0, 0.5, 1.0];
        let traj = phi.maps_on(&seeds, &knots, false).unwrap();
        for s in 0..2 {
            for (k, &t) in knots.iter().enumerate() {
                let direct = phi.point(seeds.point(s), t).unwrap();
                let batch = traj.position(s, k);
                for d in 0..3 {
                    assert!((direct[d] - batch[d]).abs() < 1e-12);
                }
            }
        }
        let inv_traj = phi.maps_on(&seeds, &knots, true).unwrap();
        for s in 0..2 {
            let direct = phi.point_inverse(seeds.point(s), 1.0).unwrap();
            let batch = inv_traj.position(s, 2);
            for d in 0..3 {
                assert!((direct[d] - batch[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn escape_error_propagates_from_batch() {
        let chart = cyl();
        // Strong constant generator escapes z = 1 on the non-periodic chart.
        let phi = integrate(&chart, &ScalarField::constant(3.0), 1e-2);
        let seeds = PointSet {
            dim: 3,
            coords: vec![0.5, 0.0, 0.9],
        };
        let err = phi.maps_on(&seeds, &[0.0, 1.0], false).unwrap_err();
        assert!(matches!(err, Error::Escape { .. }));
    }
}
