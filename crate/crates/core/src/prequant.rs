//! The regular-contact machinery over the Hopf bundle `S^3 -> S^2`.
//!
//! The total space is the Hopf chart with `alpha = cos^2(eta) dxi1 +
//! sin^2(eta) dxi2`; the Reeb flow is the circle action
//! `(xi1, xi2) -> (xi1 + s, xi2 + s)`. Invariant coordinates
//! `theta = 2 eta`, `phi = xi2 - xi1` chart the quotient sphere, carrying
//! `omega = (1/2) sin(theta) dtheta ^ dphi` so that `pi^* omega = dalpha`
//! exactly, and the radius-1/2 round metric, which makes the projection a
//! Riemannian submersion for the round total-space metric.
//!
//! Basic functions upstairs correspond to functions of the base; strictly
//! contact flows project to Hamiltonian flows. The sign convention
//! `omega(X_F, .) = -dF` is frozen here and validated by
//! [`PrequantBundle::verify_correspondence`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;

use crate::calculus;
use crate::charts::builtin::builtin_hopf;
use crate::charts::distance::half_sphere_distance;
use crate::charts::grid::{inclusive_axes, midpoint_axes, tensor_points, PointSet};
use crate::charts::ContactChart;
use crate::error::{Error, Result};
use crate::fields::{GradFn, ScalarField};
use crate::flows::Isotopy;
use crate::metrics::{self, HoferMode, MetricParams};
use crate::ode::{self, OdeField, Space, Stepper};
use crate::report::VerificationReport;
use crate::sampling;
use crate::tolerances;

/// Frozen sign in `omega(X_F, .) = s dF`; validated once by the
/// vector-field correspondence test.
pub const HAMILTONIAN_SIGN: f64 = -1.0;

/// A two-dimensional symplectic chart `omega = w(x) dx0 ^ dx1`.
pub struct SymplecticChart {
    pub name: String,
    pub domain: Vec<[f64; 2]>,
    pub periodic: Vec<bool>,
    pub quadrature: Vec<usize>,
    omega_coeff: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl SymplecticChart {
    /// Coefficient of `omega` relative to `dx0 ^ dx1`.
    pub fn omega(&self, b: &[f64]) -> f64 {
        (self.omega_coeff)(b)
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.domain[d][1] - self.domain[d][0]
    }

    pub fn grad_fd_steps(&self) -> Vec<f64> {
        (0..2)
            .map(|d| tolerances::GRAD_FD_STEP * self.extent(d).max(1.0))
            .collect()
    }

    /// Hamiltonian vector field `X_F` at `(b, t)`: the solution of
    /// `omega(X_F, .) = HAMILTONIAN_SIGN * dF`.
    pub fn hamiltonian_vector_field(
        &self,
        f: &ScalarField,
        b: &[f64],
        t: f64,
    ) -> Result<[f64; 2]> {
        let w = self.omega(b);
        if w.abs() < 1e-14 {
            return Err(Error::Degeneracy {
                context: format!("omega degenerate at {b:?}"),
                residual: w.abs(),
            });
        }
        let mut grad = [0.0; 2];
        f.gradient_into(b, t, &self.grad_fd_steps(), &mut grad);
        // i(X) omega = (-w X1) dx0 + (w X0) dx1 = s dF.
        Ok([
            HAMILTONIAN_SIGN * grad[1] / w,
            -HAMILTONIAN_SIGN * grad[0] / w,
        ])
    }

    /// Midpoint quadrature nodes with area weights `|w| * cell`.
    pub fn quad_nodes(&self, res: &[usize]) -> (PointSet, Vec<f64>) {
        let (axes, cell) = midpoint_axes(&self.domain, res);
        let nodes = tensor_points(&axes);
        let weights = nodes
            .iter()
            .map(|b| self.omega(b).abs() * cell)
            .collect();
        (nodes, weights)
    }

    pub fn osc_points(&self, res: &[usize]) -> PointSet {
        tensor_points(&inclusive_axes(&self.domain, &self.periodic, res))
    }

    /// Integral of `f(., t)` against the area form.
    pub fn integrate(&self, f: &ScalarField, t: f64, res: &[usize]) -> f64 {
        let (nodes, weights) = self.quad_nodes(res);
        nodes
            .iter()
            .zip(&weights)
            .map(|(b, w)| f.value(b, t) * w)
            .sum()
    }

    pub fn area(&self, res: &[usize]) -> f64 {
        let (_, weights) = self.quad_nodes(res);
        weights.iter().sum()
    }

    /// Ground distance on the base (round radius-1/2 sphere for the Hopf
    /// base).
    pub fn d0(&self, p: &[f64], q: &[f64]) -> f64 {
        half_sphere_distance(p, q)
    }
}

impl Space for SymplecticChart {
    fn dim(&self) -> usize {
        2
    }

    fn wrap(&self, x: &mut [f64]) {
        for d in 0..2 {
            if self.periodic[d] {
                let [lo, hi] = self.domain[d];
                let period = hi - lo;
                if x[d] < lo || x[d] >= hi {
                    x[d] = lo + (x[d] - lo).rem_euclid(period);
                }
            }
        }
    }

    fn violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        for d in 0..2 {
            if !self.periodic[d] {
                let [lo, hi] = self.domain[d];
                let tol = 1e-9 * (hi - lo);
                if x[d] < lo - tol || x[d] > hi + tol {
                    return Some((d, x[d]));
                }
            }
        }
        None
    }
}

/// A Hamiltonian function on the base with its normalization state.
#[derive(Clone, Debug)]
pub struct BaseHamiltonianField {
    pub field: ScalarField,
    pub normalized: bool,
}

struct HamiltonianVelocity<'a> {
    chart: &'a SymplecticChart,
    field: &'a ScalarField,
    fd_steps: Vec<f64>,
}

impl OdeField for HamiltonianVelocity<'_> {
    #[inline]
    fn eval(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let w = self.chart.omega(x);
        if w.abs() < 1e-14 {
            return Err(Error::Degeneracy {
                context: "omega degenerate along trajectory".into(),
                residual: w.abs(),
            });
        }
        let mut grad = [0.0; 2];
        self.field.gradient_into(x, t, &self.fd_steps, &mut grad);
        out[0] = HAMILTONIAN_SIGN * grad[1] / w;
        out[1] = -HAMILTONIAN_SIGN * grad[0] / w;
        Ok(())
    }
}

/// The Hamiltonian isotopy of the base generated by `F`.
#[derive(Clone)]
pub struct BaseIsotopy {
    chart: Arc<SymplecticChart>,
    generator: ScalarField,
    step: f64,
}

impl BaseIsotopy {
    pub fn new(chart: Arc<SymplecticChart>, generator: ScalarField, step: f64) -> Self {
        BaseIsotopy {
            chart,
            generator,
            step,
        }
    }

    pub fn generator(&self) -> &ScalarField {
        &self.generator
    }

    pub fn point(&self, b: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut y = b.to_vec();
        let mut vel = HamiltonianVelocity {
            chart: &self.chart,
            field: &self.generator,
            fd_steps: self.chart.grad_fd_steps(),
        };
        let mut stepper = Stepper::new(2);
        ode::integrate(
            &mut vel,
            self.chart.as_ref(),
            &mut stepper,
            &mut y,
            0.0,
            t,
            self.step,
        )?;
        Ok(y)
    }

    pub fn point_inverse(&self, b: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut y = b.to_vec();
        let mut vel = HamiltonianVelocity {
            chart: &self.chart,
            field: &self.generator,
            fd_steps: self.chart.grad_fd_steps(),
        };
        let mut stepper = Stepper::new(2);
        ode::integrate(
            &mut vel,
            self.chart.as_ref(),
            &mut stepper,
            &mut y,
            t,
            0.0,
            self.step,
        )?;
        Ok(y)
    }

    /// Batch maps at the knots; `inverse` applies the inverse maps.
    pub fn maps_on(
        &self,
        seeds: &PointSet,
        knots: &[f64],
        inverse: bool,
    ) -> Result<crate::flows::Trajectories> {
        let stride = knots.len() * 2;
        let mut data = vec![0.0; seeds.len() * stride];
        data.par_chunks_mut(stride)
            .with_min_len(8)
            .enumerate()
            .try_for_each(|(i, chunk)| -> Result<()> {
                let seed = seeds.point(i);
                let mut vel = HamiltonianVelocity {
                    chart: &self.chart,
                    field: &self.generator,
                    fd_steps: self.chart.grad_fd_steps(),
                };
                if !inverse {
                    ode::integrate_knots(&mut vel, self.chart.as_ref(), seed, knots, self.step, |k, x| {
                        chunk[k * 2..k * 2 + 2].copy_from_slice(x);
                    })?;
                } else {
                    let mut stepper = Stepper::new(2);
                    for (k, &t) in knots.iter().enumerate() {
                        let mut y = seed.to_vec();
                        ode::integrate(
                            &mut vel,
                            self.chart.as_ref(),
                            &mut stepper,
                            &mut y,
                            t,
                            0.0,
                            self.step,
                        )?;
                        chunk[k * 2..k * 2 + 2].copy_from_slice(&y);
                    }
                }
                Ok(())
            })?;
        Ok(crate::flows::Trajectories {
            dim: 2,
            knots: knots.to_vec(),
            n_seeds: seeds.len(),
            data,
        })
    }
}

/// The prequantization bundle: Hopf total space over the 2-sphere base.
pub struct PrequantBundle {
    pub total: Arc<ContactChart>,
    pub base: Arc<SymplecticChart>,
}

impl PrequantBundle {
    /// The standard Hopf bundle with matching polar cutoffs.
    pub fn hopf() -> PrequantBundle {
        let total = Arc::new(builtin_hopf());
        let delta = total.domain[0][0];
        let base = Arc::new(SymplecticChart {
            name: "s2_base".into(),
            domain: vec![
                [2.0 * delta, std::f64::consts::PI - 2.0 * delta],
                [0.0, std::f64::consts::TAU],
            ],
            periodic: vec![false, true],
            quadrature: vec![64, 64],
            omega_coeff: Arc::new(|b: &[f64]| 0.5 * b[0].sin()),
        });
        PrequantBundle { total, base }
    }

    /// The bundle projection `pi(eta, xi1, xi2) = (2 eta, xi2 - xi1)`.
    pub fn project(&self, y: &[f64]) -> [f64; 2] {
        let mut phi = (y[2] - y[1]).rem_euclid(std::f64::consts::TAU);
        if phi < 0.0 {
            phi += std::f64::consts::TAU;
        }
        [2.0 * y[0], phi]
    }

    /// The zero-phase local section `sigma(theta, phi) = (theta/2, 0, phi)`.
    pub fn section(&self, b: &[f64]) -> [f64; 3] {
        [0.5 * b[0], 0.0, b[1]]
    }

    /// The circle action `R_s` (Reeb flow for time `s`).
    pub fn circle_action(&self, y: &[f64], s: f64) -> [f64; 3] {
        let tau = std::f64::consts::TAU;
        [y[0], (y[1] + s).rem_euclid(tau), (y[2] + s).rem_euclid(tau)]
    }

    /// Tangent map of the projection (constant in these coordinates).
    pub fn tangent_projection(&self, v: &[f64]) -> [f64; 2] {
        [2.0 * v[0], v[2] - v[1]]
    }

    /// Lift `F` on the base to the basic function `F o pi`.
    pub fn lift_function(&self, f: &ScalarField) -> ScalarField {
        let fe = f.clone();
        let proj = |x: &[f64]| {
            let mut phi = (x[2] - x[1]).rem_euclid(std::f64::consts::TAU);
            if phi < 0.0 {
                phi += std::f64::consts::TAU;
            }
            [2.0 * x[0], phi]
        };
        let name = format!("lift({})", f.name());
        let fg = f.clone();
        let base_steps = self.base.grad_fd_steps();
        let grad: GradFn = Arc::new(move |x: &[f64], t: f64, out: &mut [f64]| {
            let b = proj(x);
            let mut gb = [0.0; 2];
            fg.gradient_into(&b, t, &base_steps, &mut gb);
            // Chain rule through (theta, phi) = (2 eta, xi2 - xi1).
            out[0] = 2.0 * gb[0];
            out[1] = -gb[1];
            out[2] = gb[1];
        });
        ScalarField::new(name, Arc::new(move |x: &[f64], t: f64| fe.value(&proj(x), t)))
            .with_grad(grad)
            .with_basic_flag(true)
            .with_time_dependence(f.is_time_dependent())
    }

    /// Project a basic function to the base through the section:
    /// `F(b) = H(sigma(b))`. Errors when `H` is not basic.
    pub fn project_function(&self, h: &ScalarField) -> Result<BaseHamiltonianField> {
        let res = vec![10; 3];
        let (basic, residual) = calculus::is_basic(&self.total, h, &res, 1e-6)?;
        if !basic {
            return Err(Error::NotBasic {
                context: "project_function".into(),
                residual,
            });
        }
        let hc = h.clone();
        let name = format!("project({})", h.name());
        let field = ScalarField::new(
            name,
            Arc::new(move |b: &[f64], t: f64| hc.value(&[0.5 * b[0], 0.0, b[1]], t)),
        )
        .with_time_dependence(h.is_time_dependent());
        Ok(BaseHamiltonianField {
            field,
            normalized: false,
        })
    }

    /// Subtract the `omega`-mean per time slice.
    pub fn normalize(&self, f: &ScalarField, res: &[usize]) -> BaseHamiltonianField {
        let base = self.base.clone();
        let fc = f.clone();
        let res = res.to_vec();
        let area = base.area(&res);
        let cache: Arc<Mutex<HashMap<u64, f64>>> = Arc::new(Mutex::new(HashMap::new()));
        let autonomous_mean: Arc<OnceLock<f64>> = Arc::new(OnceLock::new());
        let time_dependent = f.is_time_dependent();
        let mean_of = {
            let base = base.clone();
            let fc = fc.clone();
            let res = res.clone();
            move |t: f64| base.integrate(&fc, t, &res) / area
        };
        let name = format!("normalize({})", f.name());
        let fe = f.clone();
        let grad = f.has_analytic_grad().then(|| {
            let fg = f.clone();
            Arc::new(move |b: &[f64], t: f64, out: &mut [f64]| {
                // The subtracted mean is spatially constant.
                fg.gradient_into(b, t, &[0.0; 2], out);
            }) as GradFn
        });
        let field = ScalarField::new(
            name,
            Arc::new(move |b: &[f64], t: f64| {
                let mean = if time_dependent {
                    let key = t.to_bits();
                    if let Some(&m) = cache.lock().unwrap().get(&key) {
                        m
                    } else {
                        let m = mean_of(t);
                        cache.lock().unwrap().insert(key, m);
                        m
                    }
                } else {
                    *autonomous_mean.get_or_init(|| mean_of(0.0))
                };
                fe.value(b, t) - mean
            }),
        )
        .with_time_dependence(time_dependent);
        let field = match grad {
            Some(g) => field.with_grad(g),
            None => field,
        };
        BaseHamiltonianField {
            field,
            normalized: true,
        }
    }

    /// Max over sampled points of `|pi^* omega - dalpha|` entrywise, with
    /// the pullback through the finite-difference Jacobian of `pi` and
    /// `dalpha` by finite differences of `alpha`.
    pub fn pullback_omega_deviation(&self, res: &[usize]) -> f64 {
        let pts = self.total.osc_points(res);
        pts.coords
            .par_chunks_exact(3)
            .map(|y| {
                // FD Jacobian of pi.
                let mut jac = [[0.0f64; 3]; 2];
                let mut yp = y.to_vec();
                for d in 0..3 {
                    let h = 1e-6 * self.total.extent(d).max(1.0);
                    yp[d] = y[d] + h;
                    let bp = self.project_unwrapped(&yp);
                    yp[d] = y[d] - h;
                    let bm = self.project_unwrapped(&yp);
                    yp[d] = y[d];
                    for r in 0..2 {
                        jac[r][d] = (bp[r] - bm[r]) / (2.0 * h);
                    }
                }
                let b = self.project(y);
                let w = self.base.omega(&b);
                let omega_fd = self.total.dalpha_fd(y);
                let mut worst: f64 = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        // (pi^* omega)_{ij} = w (J0i J1j - J0j J1i).
                        let pulled = w * (jac[0][i] * jac[1][j] - jac[0][j] * jac[1][i]);
                        worst = worst.max((pulled - omega_fd[(i, j)]).abs());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    fn project_unwrapped(&self, y: &[f64]) -> [f64; 2] {
        [2.0 * y[0], y[2] - y[1]]
    }

    /// `T pi (gamma(F o pi)) = X_F(pi(y))` at Halton sample points.
    pub fn verify_correspondence(
        &self,
        f: &ScalarField,
        samples: usize,
    ) -> Result<VerificationReport> {
        let h = self.lift_function(f);
        let pts = sampling::halton_box(&self.total.domain, samples, 0.02);
        let mut worst: f64 = 0.0;
        for y in &pts {
            let v = calculus::gamma(&self.total, &h, y, 0.0)?;
            let pushed = self.tangent_projection(&v.components);
            let xf = self.base.hamiltonian_vector_field(f, &self.project(y), 0.0)?;
            for d in 0..2 {
                worst = worst.max((pushed[d] - xf[d]).abs());
            }
        }
        Ok(VerificationReport::residual(
            "T pi (gamma(F o pi)) = X_F",
            worst,
            tolerances::CORRESPONDENCE_TOL,
            format!("n={samples}"),
        ))
    }

    /// Horizontal lift of a base path: the unique path with
    /// `alpha(gamma') = 0` projecting to it. The path is given as a
    /// closure `s -> (theta, phi)` on `[0, 1]`; its velocity is taken by
    /// central finite differences. Returns the lift sampled at `n + 1`
    /// uniform parameters.
    pub fn horizontal_lift(
        &self,
        base_path: &dyn Fn(f64) -> [f64; 2],
        start: &[f64],
        n: usize,
    ) -> Result<Vec<[f64; 3]>> {
        let b0 = base_path(0.0);
        let p0 = self.project(start);
        let dphi = {
            let mut d = (p0[1] - b0[1]).abs() % std::f64::consts::TAU;
            d = d.min(std::f64::consts::TAU - d);
            d
        };
        if (p0[0] - b0[0]).abs() > 1e-9 || dphi > 1e-9 {
            return Err(Error::Domain(format!(
                "horizontal lift start does not project to the path start: {p0:?} vs {b0:?}"
            )));
        }
        // Velocity of the base path, FD in the parameter with phi unwrapped.
        let ds = 1e-6;
        let velocity = move |s: f64| {
            let a = base_path((s - ds).max(0.0));
            let b = base_path((s + ds).min(1.0));
            let span = (s + ds).min(1.0) - (s - ds).max(0.0);
            let mut dphi = b[1] - a[1];
            if dphi > std::f64::consts::PI {
                dphi -= std::f64::consts::TAU;
            }
            if dphi < -std::f64::consts::PI {
                dphi += std::f64::consts::TAU;
            }
            [(b[0] - a[0]) / span, dphi / span]
        };
        let mut field = |x: &[f64], s: f64, out: &mut [f64]| -> Result<()> {
            let v = velocity(s);
            let eta = x[0];
            let (sn, cs) = eta.sin_cos();
            // c1 e1 + c2 e2 with e1 = d_eta, e2 = sin^2 d_xi1 - cos^2 d_xi2.
            let c1 = 0.5 * v[0];
            let c2 = -v[1];
            out[0] = c1;
            out[1] = c2 * sn * sn;
            out[2] = -c2 * cs * cs;
            Ok(())
        };
        let knots: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let mut out = vec![[0.0f64; 3]; n + 1];
        ode::integrate_knots(
            &mut field,
            self.total.as_ref(),
            start,
            &knots,
            1e-3,
            |k, x| out[k] = [x[0], x[1], x[2]],
        )?;
        Ok(out)
    }

    /// `||H|| >= ||F~||_Hofer` in both aggregates, with the base
    /// oscillation sampled on the projection of the total-space grid so
    /// the comparison cannot be broken by sampling bias. Returns the two
    /// margins (L1, Linf).
    pub fn verify_norm_comparison(
        &self,
        h: &ScalarField,
        params: &MetricParams,
    ) -> Result<(VerificationReport, [f64; 2])> {
        let f = self.project_function(h)?;
        let ftilde = self.normalize(&f.field, &self.base.quadrature.clone());
        // Projected total-space grid: matching angular resolutions make the
        // projected points a tensor grid on the base.
        let res = params.osc_res.resolve(3);
        let total_pts = self.total.osc_points(&res);
        let projected = PointSet {
            dim: 2,
            coords: total_pts
                .iter()
                .flat_map(|y| self.project(y))
                .collect(),
        };
        let mut norm_params = params.clone();
        norm_params.normalize_volume = true;
        let lhs_l1 = metrics::contact_norm_aggregate(&self.total, h, HoferMode::L1, &norm_params);
        let lhs_linf =
            metrics::contact_norm_aggregate(&self.total, h, HoferMode::Linf, &norm_params);
        let rhs_l1 = metrics::hofer_norm(&projected, &ftilde.field, HoferMode::L1, params.time_segments);
        let rhs_linf = metrics::hofer_norm(
            &projected,
            &ftilde.field,
            HoferMode::Linf,
            params.time_segments,
        );
        let margins = [lhs_l1 - rhs_l1, lhs_linf - rhs_linf];
        let worst = margins[0].min(margins[1]);
        Ok((
            VerificationReport::lower_bound(
                "|H| >= |F~|_Hofer",
                worst,
                -tolerances::HOFER_COMPARISON_SLACK,
                format!("{res:?}"),
            ),
            margins,
        ))
    }
}

/// One inequality of the bundle comparison lemma.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Measured data for the four inequalities of the comparison lemma.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Lemma51Report {
    pub checks: Vec<InequalityCheck>,
    pub max_generator_gap: f64,
    pub pass: bool,
}

/// Verify, for basic generators `h1 = F1 o pi` and `h2 = F2 o pi`, the
/// four distance inequalities relating contact distances upstairs with
/// Hamiltonian distances downstairs (volume-normalized mode):
///
/// 1. `dbar_M(time-1) <= dbar_B(time-1) + 2 max|H1 - H2|`
/// 2. `sup_t dbar_M   <= sup_t dbar_B   + 2 max|H1 - H2|`
/// 3. `d_cont         <= d_ham          + 3 max|H1 - H2|`
/// 4. `d_cont_inf     <= d_ham_inf      + 3 max|H1 - H2|`
pub fn verify_lemma51(
    bundle: &PrequantBundle,
    f1: &ScalarField,
    f2: &ScalarField,
    step: f64,
    params: &MetricParams,
) -> Result<Lemma51Report> {
    let params = params.clone().normalized();
    let h1 = bundle.lift_function(f1);
    let h2 = bundle.lift_function(f2);
    let phi1 = Isotopy::new(bundle.total.clone(), h1.clone(), step);
    let phi2 = Isotopy::new(bundle.total.clone(), h2.clone(), step);
    let psi1 = BaseIsotopy::new(bundle.base.clone(), f1.clone(), step);
    let psi2 = BaseIsotopy::new(bundle.base.clone(), f2.clone(), step);

    let knots: Vec<f64> = {
        let n = (params.time_segments.max(2) + 1) / 2 * 2;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    };

    // Aligned sup samples: base samples are the projections of the
    // total-space samples.
    let samples_m = metrics::sup_sample_points(&bundle.total, &params);
    let samples_b = PointSet {
        dim: 2,
        coords: samples_m
            .iter()
            .flat_map(|y| bundle.project(y))
            .collect(),
    };

    let dbar_m = metrics::c0_distance_path(&phi1, &phi2, &knots, &samples_m)?;
    let dbar_b = {
        let mut per_knot = vec![0.0f64; knots.len()];
        for inverse in [false, true] {
            let a = psi1.maps_on(&samples_b, &knots, inverse)?;
            let b = psi2.maps_on(&samples_b, &knots, inverse)?;
            for (k, slot) in per_knot.iter_mut().enumerate() {
                let sup = (0..samples_b.len())
                    .map(|s| bundle.base.d0(a.position(s, k), b.position(s, k)))
                    .fold(0.0f64, f64::max);
                *slot = slot.max(sup);
            }
        }
        per_knot
    };
    let dbar_m_sup = dbar_m.iter().fold(0.0f64, |a, &b| a.max(b));
    let dbar_b_sup = dbar_b.iter().fold(0.0f64, |a, &b| a.max(b));

    // max |H1 - H2| over the total-space grid and the time knots.
    let osc_res = params.osc_res.resolve(3);
    let grid = bundle.total.osc_points(&osc_res);
    let diff = ScalarField::sub(&h1, &h2);
    let mut max_gap: f64 = 0.0;
    for &t in &knots {
        let m = grid
            .coords
            .par_chunks_exact(3)
            .map(|y| diff.value(y, t).abs())
            .reduce(|| 0.0, f64::max);
        max_gap = max_gap.max(m);
    }

    // Generator-length parts.
    let dists = metrics::contact_distances(&phi1, &phi2, &params)?;
    let base_osc = bundle.base.osc_points(&params.osc_res.resolve_base());
    let fdiff = ScalarField::sub(f1, f2);
    let hofer_l1 = metrics::hofer_norm(&base_osc, &fdiff, HoferMode::L1, params.time_segments);
    let hofer_linf = metrics::hofer_norm(&base_osc, &fdiff, HoferMode::Linf, params.time_segments);

    let d_cont = dbar_m_sup + dists.d_l1;
    let d_cont_inf = dbar_m_sup + dists.d_linf;
    let d_ham = dbar_b_sup + hofer_l1;
    let d_ham_inf = dbar_b_sup + hofer_linf;

    let slack = tolerances::LEMMA_INEQUALITY_SLACK;
    let mk = |name: &str, lhs: f64, rhs: f64| InequalityCheck {
        name: name.into(),
        lhs,
        rhs,
        margin: rhs - lhs,
        pass: lhs <= rhs + slack,
    };
    let checks = vec![
        mk(
            "dbar_M(1) <= dbar_B(1) + 2 max|dH|",
            dbar_m[knots.len() - 1],
            dbar_b[knots.len() - 1] + 2.0 * max_gap,
        ),
        mk(
            "sup_t dbar_M <= sup_t dbar_B + 2 max|dH|",
            dbar_m_sup,
            dbar_b_sup + 2.0 * max_gap,
        ),
        mk("d_cont <= d_ham + 3 max|dH|", d_cont, d_ham + 3.0 * max_gap),
        mk(
            "d_cont_inf <= d_ham_inf + 3 max|dH|",
            d_cont_inf,
            d_ham_inf + 3.0 * max_gap,
        ),
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(Lemma51Report {
        checks,
        max_generator_gap: max_gap,
        pass,
    })
}

/// Cauchy-transfer data for a lifted sequence.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CauchyTransferReport {
    /// `d_cont_inf` between consecutive lifted isotopies.
    pub consecutive: Vec<f64>,
    /// Decay ratios of the consecutive distances.
    pub ratios: Vec<f64>,
    /// Measured `d_cont_inf / ((11/8) eps1)` per consecutive pair, with
    /// `eps1 = max(8 |dF|_Hofer_inf, 2 dbar_B_inf)`.
    pub budget_ratios: Vec<f64>,
    pub pass: bool,
}

/// For the sequence `F_n = F + 2^{-n} G` (n = 1..=terms), verify that the
/// lifted isotopies are Cauchy upstairs at the measured resolution: the
/// consecutive `d_cont_inf` tail decays geometrically, and each distance
/// fits the epsilon budget transferred from the base.
pub fn verify_cauchy_transfer(
    bundle: &PrequantBundle,
    f: &ScalarField,
    g: &ScalarField,
    terms: usize,
    step: f64,
    params: &MetricParams,
) -> Result<CauchyTransferReport> {
    let params = params.clone().normalized();
    let knots: Vec<f64> = {
        let n = (params.time_segments.max(2) + 1) / 2 * 2;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    };
    let quad_res = &bundle.base.quadrature.clone();
    let fields: Vec<ScalarField> = (1..=terms)
        .map(|n| {
            let fn_base = ScalarField::linear_combination(1.0, f, (0.5f64).powi(n as i32), g);
            bundle.normalize(&fn_base, quad_res).field
        })
        .collect();
    let lifted: Vec<Isotopy> = fields
        .iter()
        .map(|fb| Isotopy::new(bundle.total.clone(), bundle.lift_function(fb), step))
        .collect();
    let base_flows: Vec<BaseIsotopy> = fields
        .iter()
        .map(|fb| BaseIsotopy::new(bundle.base.clone(), fb.clone(), step))
        .collect();

    let samples_m = metrics::sup_sample_points(&bundle.total, &params);
    let samples_b = PointSet {
        dim: 2,
        coords: samples_m
            .iter()
            .flat_map(|y| bundle.project(y))
            .collect(),
    };
    let base_osc = bundle.base.osc_points(&params.osc_res.resolve_base());

    let mut consecutive = Vec::new();
    let mut budget_ratios = Vec::new();
    for n in 0..terms - 1 {
        let (a, b) = (&lifted[n], &lifted[n + 1]);
        let dbar_m = metrics::c0_distance_path(a, b, &knots, &samples_m)?;
        let dbar_m_sup = dbar_m.iter().fold(0.0f64, |x, &y| x.max(y));
        let dists = metrics::contact_distances(a, b, &params)?;
        let d_cont_inf = dbar_m_sup + dists.d_linf;
        consecutive.push(d_cont_inf);

        // Downstairs budget.
        let fdiff = ScalarField::sub(&fields[n], &fields[n + 1]);
        let hofer_inf =
            metrics::hofer_norm(&base_osc, &fdiff, HoferMode::Linf, params.time_segments);
        let mut dbar_b_sup: f64 = 0.0;
        for inverse in [false, true] {
            let ta = base_flows[n].maps_on(&samples_b, &knots, inverse)?;
            let tb = base_flows[n + 1].maps_on(&samples_b, &knots, inverse)?;
            for k in 0..knots.len() {
                for s in 0..samples_b.len() {
                    dbar_b_sup =
                        dbar_b_sup.max(bundle.base.d0(ta.position(s, k), tb.position(s, k)));
                }
            }
        }
        let eps1 = (8.0 * hofer_inf).max(2.0 * dbar_b_sup);
        budget_ratios.push(d_cont_inf / (11.0 / 8.0 * eps1).max(1e-300));
    }
    let ratios: Vec<f64> = consecutive
        .windows(2)
        .map(|w| w[1] / w[0].max(1e-300))
        .collect();
    let tail_ok = ratios
        .iter()
        .all(|r| (tolerances::CAUCHY_RATIO_MIN..=tolerances::CAUCHY_RATIO_MAX).contains(r));
    let budget_ok = budget_ratios.iter().all(|r| *r <= 1.0 + 1e-9);
    Ok(CauchyTransferReport {
        consecutive,
        ratios,
        budget_ratios,
        pass: tail_ok && budget_ok,
    })
}

/// Field families on the base sphere that are safe to flow on the
/// pole-cut chart.
pub mod base_families {
    use super::*;

    /// Smooth window in `theta` vanishing (with derivative) outside
    /// `[band, pi - band]`; fields windowed by it freeze the polar caps,
    /// so no trajectory can reach the chart cutoff.
    pub fn polar_window(band: f64) -> impl Fn(f64) -> (f64, f64) + Copy {
        move |theta: f64| {
            let span = std::f64::consts::PI - 2.0 * band;
            let u = (theta - band) / span;
            if !(0.0..=1.0).contains(&u) {
                return (0.0, 0.0);
            }
            let s = (std::f64::consts::PI * u).sin();
            let w = s * s;
            let dw = std::f64::consts::PI / span * (2.0 * std::f64::consts::PI * u).sin();
            (w, dw)
        }
    }

    /// Zonal part plus windowed angular harmonics: flows stay inside the
    /// chart for any amplitude and time (caps are frozen, and the window
    /// slope vanishes at the band edges).
    pub fn windowed<R: Rng>(rng: &mut R, amplitude: f64, band: f64) -> ScalarField {
        let c0: f64 = rng.random_range(-1.0..1.0);
        let c1: f64 = rng.random_range(-1.0..1.0);
        let b1: f64 = rng.random_range(0.3..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let p1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let b2: f64 = rng.random_range(-0.6..0.6);
        let p2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let win = polar_window(band);
        let s = amplitude;
        let eval = move |x: &[f64], _t: f64| {
            let (th, ph) = (x[0], x[1]);
            let (w, _) = win(th);
            s * (c0 + c1 * th.cos() + w * (b1 * (ph + p1).cos() + b2 * (2.0 * ph + p2).cos()))
        };
        let grad = move |x: &[f64], _t: f64, out: &mut [f64]| {
            let (th, ph) = (x[0], x[1]);
            let (w, dw) = win(th);
            let ripple = b1 * (ph + p1).cos() + b2 * (2.0 * ph + p2).cos();
            out[0] = s * (-c1 * th.sin() + dw * ripple);
            out[1] = s * w * (-b1 * (ph + p1).sin() - 2.0 * b2 * (2.0 * ph + p2).sin());
        };
        ScalarField::new("sphere_windowed", Arc::new(eval))
            .with_grad(Arc::new(grad))
            .with_time_dependence(false)
    }

    /// The height function `cos(theta)` (zonal; its Hamiltonian flow is
    /// the rotation about the polar axis).
    pub fn height() -> ScalarField {
        ScalarField::new("height", Arc::new(|b: &[f64], _| b[0].cos()))
            .with_grad(Arc::new(|b: &[f64], _, out: &mut [f64]| {
                out[0] = -b[0].sin();
                out[1] = 0.0;
            }))
            .with_time_dependence(false)
    }
}
