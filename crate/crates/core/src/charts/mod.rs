//! Chart-based contact manifolds.
//!
//! A [`ContactChart`] is a single coordinate box (with periodic
//! identifications) carrying the contact form `alpha`, its exterior
//! derivative, a Riemannian metric and quadrature descriptors. All built-in
//! manifolds (the flat cylinder of the singular example and the Hopf
//! three-sphere) are full-measure single charts; coordinate singularities
//! are excised by cutoffs.

pub mod builtin;
pub mod distance;
pub mod grid;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::pfaffian;
use crate::tolerances;

use grid::{decode_index, inclusive_axes, midpoint_axes, tensor_points, PointSet};

/// A point in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        ChartPoint { coords }
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(coords: Vec<f64>) -> Self {
        ChartPoint { coords }
    }
}

/// A tangent vector attached to a chart point.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub at: ChartPoint,
    pub components: Vec<f64>,
}

/// A covector value attached to a chart point.
#[derive(Debug, Clone)]
pub struct CovectorValue {
    pub at: ChartPoint,
    pub components: Vec<f64>,
}

type AlphaFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type DalphaFn = Arc<dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync>;
type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChartKind {
    Cylinder,
    Hopf,
    Custom,
}

/// Midpoint quadrature nodes with measure weights `|nu_alpha| * cell`.
pub struct QuadRule {
    pub res: Vec<usize>,
    pub nodes: PointSet,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integrate a vector of node values against the measure weights.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub struct ContactChart {
    pub name: String,
    /// Odd dimension 2n+1.
    pub dim: usize,
    pub domain: Vec<[f64; 2]>,
    pub periodic: Vec<bool>,
    /// Default tensor-grid resolution per coordinate.
    pub quadrature: Vec<usize>,
    pub(crate) kind: ChartKind,
    alpha_fn: AlphaFn,
    dalpha_fn: Option<DalphaFn>,
    metric_fn: MetricFn,
    quad_cache: Mutex<HashMap<Vec<usize>, Arc<QuadRule>>>,
    osc_cache: Mutex<HashMap<Vec<usize>, Arc<PointSet>>>,
    volume_cache: OnceLock<f64>,
    fallback_distance: distance::FallbackDistance,
}

impl std::fmt::Debug for ContactChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContactChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("periodic", &self.periodic)
            .finish()
    }
}

impl ContactChart {
    /// Build a chart from user-supplied coefficient functions. `dalpha`
    /// falls back to central finite differences of `alpha` when absent;
    /// the metric defaults to the identity.
    pub fn new_custom(
        name: impl Into<String>,
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        alpha_fn: AlphaFn,
        dalpha_fn: Option<DalphaFn>,
        metric_fn: Option<MetricFn>,
        quadrature: Vec<usize>,
    ) -> Result<Self> {
        let dim = domain.len();
        if dim % 2 == 0 || dim < 3 {
            return Err(Error::Domain(format!(
                "contact chart dimension must be odd and >= 3, got {dim}"
            )));
        }
        if periodic.len() != dim || quadrature.len() != dim {
            return Err(Error::Domain(
                "periodic/quadrature length must match dimension".into(),
            ));
        }
        for &[lo, hi] in &domain {
            if !(lo < hi) {
                return Err(Error::Domain(format!("empty domain interval [{lo}, {hi}]")));
            }
        }
        Ok(ContactChart {
            name: name.into(),
            dim,
            domain,
            periodic,
            quadrature,
            kind: ChartKind::Custom,
            alpha_fn,
            dalpha_fn,
            metric_fn: metric_fn
                .unwrap_or_else(|| Arc::new(|_x: &[f64]| DMatrix::identity(0, 0))),
            quad_cache: Mutex::new(HashMap::new()),
            osc_cache: Mutex::new(HashMap::new()),
            volume_cache: OnceLock::new(),
            fallback_distance: distance::FallbackDistance::new(),
        })
    }

    pub(crate) fn from_parts(
        name: impl Into<String>,
        domain: Vec<[f64; 2]>,
        periodic: Vec<bool>,
        kind: ChartKind,
        alpha_fn: AlphaFn,
        dalpha_fn: Option<DalphaFn>,
        metric_fn: MetricFn,
        quadrature: Vec<usize>,
    ) -> Self {
        let dim = domain.len();
        ContactChart {
            name: name.into(),
            dim,
            domain,
            periodic,
            quadrature,
            kind,
            alpha_fn,
            dalpha_fn,
            metric_fn,
            quad_cache: Mutex::new(HashMap::new()),
            osc_cache: Mutex::new(HashMap::new()),
            volume_cache: OnceLock::new(),
            fallback_distance: distance::FallbackDistance::new(),
        }
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.domain[d][1] - self.domain[d][0]
    }

    /// Per-coordinate finite-difference steps for scalar gradients.
    pub fn grad_fd_steps(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|d| tolerances::GRAD_FD_STEP * self.extent(d).max(1.0))
            .collect()
    }

    #[inline]
    pub fn alpha_into(&self, x: &[f64], out: &mut [f64]) {
        (self.alpha_fn)(x, out);
    }

    pub fn alpha_at(&self, x: &[f64]) -> DVector<f64> {
        let mut out = vec![0.0; self.dim];
        (self.alpha_fn)(x, &mut out);
        DVector::from_vec(out)
    }

    /// `dalpha` as an antisymmetric matrix, analytic when available.
    pub fn dalpha(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(f) = &self.dalpha_fn {
            let mut m = DMatrix::zeros(self.dim, self.dim);
            f(x, &mut m);
            return m;
        }
        self.dalpha_fd(x)
    }

    /// `dalpha` by central finite differences of `alpha`, regardless of
    /// whether an analytic formula is attached (used for cross-checks).
    pub fn dalpha_fd(&self, x: &[f64]) -> DMatrix<f64> {
        let dim = self.dim;
        let mut d = DMatrix::zeros(dim, dim);
        let mut xp = x.to_vec();
        let mut ap = vec![0.0; dim];
        let mut am = vec![0.0; dim];
        for i in 0..dim {
            let h = tolerances::DALPHA_FD_STEP * self.extent(i).max(1.0);
            xp[i] = x[i] + h;
            (self.alpha_fn)(&xp, &mut ap);
            xp[i] = x[i] - h;
            (self.alpha_fn)(&xp, &mut am);
            xp[i] = x[i];
            for j in 0..dim {
                d[(i, j)] = (ap[j] - am[j]) / (2.0 * h);
            }
        }
        // Omega_ij = d_i alpha_j - d_j alpha_i.
        let mut omega = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                omega[(i, j)] = d[(i, j)] - d[(j, i)];
            }
        }
        omega
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let m = (self.metric_fn)(x);
        if m.nrows() == 0 {
            DMatrix::identity(self.dim, self.dim)
        } else {
            m
        }
    }

    pub fn has_analytic_dalpha(&self) -> bool {
        self.dalpha_fn.is_some()
    }

    /// Wrap periodic coordinates back into the fundamental domain.
    #[inline]
    pub fn wrap_into(&self, x: &mut [f64]) {
        for d in 0..self.dim {
            if self.periodic[d] {
                let [lo, hi] = self.domain[d];
                let period = hi - lo;
                if x[d] < lo || x[d] >= hi {
                    x[d] = lo + (x[d] - lo).rem_euclid(period);
                }
            }
        }
    }

    /// Check the point against non-periodic bounds; returns the first
    /// violated coordinate. A small roundoff margin is allowed.
    #[inline]
    pub fn bounds_violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        for d in 0..self.dim {
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

    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds_violation(x).is_none()
    }

    /// Signed coefficient of `nu_alpha = alpha ^ (dalpha)^n` relative to
    /// `dx^1 ^ ... ^ dx^{2n+1}`. Built-in charts use their closed forms
    /// (the Pfaffian expansion stays available through
    /// [`ContactChart::volume_density_general`] and is cross-checked in
    /// the tests).
    pub fn volume_density(&self, x: &[f64]) -> f64 {
        match self.kind {
            ChartKind::Cylinder => x[0],
            ChartKind::Hopf => -(2.0 * x[0]).sin(),
            ChartKind::Custom => self.volume_density_general(x),
        }
    }

    /// The Pfaffian-expansion evaluation of the `nu_alpha` coefficient.
    pub fn volume_density_general(&self, x: &[f64]) -> f64 {
        let alpha = self.alpha_at(x);
        let omega = self.dalpha(x);
        volume_density_from(&alpha, &omega)
    }

    /// The measure weight `|nu_alpha|` used for integration; the chart is
    /// oriented by its volume form.
    #[inline]
    pub fn measure_density(&self, x: &[f64]) -> f64 {
        self.volume_density(x).abs()
    }

    /// Integrate `values[i] -> f(node_i)` is handled by [`QuadRule`]; this
    /// entry point integrates a closure over a fresh midpoint grid of the
    /// given resolution, streaming and in parallel.
    pub fn integrate_fn<F>(&self, res: &[usize], f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let (axes, cell) = midpoint_axes(&self.domain, res);
        let sizes: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let total: usize = sizes.iter().product();
        let dim = self.dim;
        (0..total)
            .into_par_iter()
            .with_min_len(1024)
            .map(|flat| {
                let mut idx = vec![0usize; dim];
                let mut x = vec![0.0; dim];
                decode_index(flat, &sizes, &mut idx);
                for d in 0..dim {
                    x[d] = axes[d][idx[d]];
                }
                f(&x) * self.measure_density(&x)
            })
            .sum::<f64>()
            * cell
    }

    /// Integral of a scalar field at fixed time against `nu_alpha`, at the
    /// chart's default quadrature resolution.
    pub fn integrate_scalar(&self, f: &ScalarField, t: f64) -> f64 {
        let res = self.quadrature.clone();
        self.integrate_fn(&res, |x| f.value(x, t))
    }

    pub fn integrate_scalar_res(&self, f: &ScalarField, t: f64, res: &[usize]) -> f64 {
        self.integrate_fn(res, |x| f.value(x, t))
    }

    /// Total mass of `nu_alpha` at the default resolution (cached).
    pub fn volume(&self) -> f64 {
        *self
            .volume_cache
            .get_or_init(|| self.integrate_fn(&self.quadrature.clone(), |_| 1.0))
    }

    /// Cached midpoint rule with measure weights.
    pub fn quad_rule(&self, res: &[usize]) -> Arc<QuadRule> {
        {
            let cache = self.quad_cache.lock().unwrap();
            if let Some(r) = cache.get(res) {
                return r.clone();
            }
        }
        let (axes, cell) = midpoint_axes(&self.domain, res);
        let nodes = tensor_points(&axes);
        let weights: Vec<f64> = nodes
            .coords
            .par_chunks_exact(self.dim)
            .with_min_len(1024)
            .map(|x| self.measure_density(x) * cell)
            .collect();
        let rule = Arc::new(QuadRule {
            res: res.to_vec(),
            nodes,
            weights,
        });
        self.quad_cache
            .lock()
            .unwrap()
            .insert(res.to_vec(), rule.clone());
        rule
    }

    /// Cached endpoint-inclusive sampling grid (for oscillation and sup
    /// estimates).
    pub fn osc_points(&self, res: &[usize]) -> Arc<PointSet> {
        {
            let cache = self.osc_cache.lock().unwrap();
            if let Some(p) = cache.get(res) {
                return p.clone();
            }
        }
        let axes = inclusive_axes(&self.domain, &self.periodic, res);
        let pts = Arc::new(tensor_points(&axes));
        self.osc_cache
            .lock()
            .unwrap()
            .insert(res.to_vec(), pts.clone());
        pts
    }

    /// Ground distance `d_0` under the chart metric. Built-in charts use
    /// closed forms; custom charts fall back to a grid shortest path.
    pub fn d0(&self, p: &[f64], q: &[f64]) -> f64 {
        match self.kind {
            ChartKind::Cylinder => distance::cylinder_distance(
                self.domain[0][0],
                self.periodic[2],
                self.extent(2),
                p,
                q,
            ),
            ChartKind::Hopf => distance::hopf_distance(p, q),
            ChartKind::Custom => self.fallback_distance.get(self).distance(p, q),
        }
    }

    /// Minimum of `|nu_alpha|` over the inclusive grid: positive iff the
    /// contact condition holds numerically on the sample.
    pub fn min_volume_density(&self, res: &[usize]) -> f64 {
        let pts = self.osc_points(res);
        pts.coords
            .par_chunks_exact(self.dim)
            .map(|x| self.measure_density(x))
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Maximum antisymmetry defect `max_ij |O_ij + O_ji|` of `dalpha` over
    /// the inclusive grid.
    pub fn max_dalpha_antisymmetry_defect(&self, res: &[usize]) -> f64 {
        let pts = self.osc_points(res);
        pts.coords
            .par_chunks_exact(self.dim)
            .map(|x| {
                let m = self.dalpha(x);
                let mut worst: f64 = 0.0;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Closed-form Reeb field for built-in charts. Returns false when the
    /// chart has none (solver path required).
    #[inline]
    pub(crate) fn reeb_closed_form(&self, _x: &[f64], out: &mut [f64]) -> bool {
        match self.kind {
            ChartKind::Cylinder => {
                out[0] = 0.0;
                out[1] = 0.0;
                out[2] = 1.0;
                true
            }
            ChartKind::Hopf => {
                out[0] = 0.0;
                out[1] = 1.0;
                out[2] = 1.0;
                true
            }
            ChartKind::Custom => false,
        }
    }

    /// Closed-form contact vector field `gamma(f)` for built-in charts,
    /// given the field value and spatial gradient at `x`. Returns false
    /// when the chart has none.
    #[inline]
    pub(crate) fn gamma_closed_form(
        &self,
        x: &[f64],
        f_val: f64,
        grad: &[f64],
        out: &mut [f64],
    ) -> bool {
        match self.kind {
            ChartKind::Cylinder => {
                let r = x[0];
                out[0] = 0.5 * r * grad[2] - grad[1] / r;
                out[1] = grad[0] / r;
                out[2] = f_val - 0.5 * r * grad[0];
                true
            }
            ChartKind::Hopf => {
                let eta = x[0];
                let (s, c) = (eta.sin(), eta.cos());
                let sin2 = 2.0 * s * c;
                out[0] = (grad[1] * s * s - grad[2] * c * c) / sin2;
                out[1] = f_val - 0.5 * grad[0] * s / c;
                out[2] = f_val + 0.5 * grad[0] * c / s;
                true
            }
            ChartKind::Custom => false,
        }
    }
}

/// Pfaffian expansion of the top-form coefficient of `a ^ Omega^n`.
pub fn volume_density_from(alpha: &DVector<f64>, omega: &DMatrix<f64>) -> f64 {
    let dim = alpha.len();
    let n = (dim - 1) / 2;
    let n_fact: f64 = (1..=n).map(|k| k as f64).product();
    let mut acc = 0.0;
    for i in 0..dim {
        if alpha[i] == 0.0 {
            continue;
        }
        let keep: Vec<usize> = (0..dim).filter(|&k| k != i).collect();
        let mut sub = DMatrix::zeros(dim - 1, dim - 1);
        for (r, &kr) in keep.iter().enumerate() {
            for (c, &kc) in keep.iter().enumerate() {
                sub[(r, c)] = omega[(kr, kc)];
            }
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * alpha[i] * pfaffian(&sub);
    }
    n_fact * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::builtin::{builtin_cylinder, builtin_hopf};

    #[test]
    fn cylinder_alpha_at_spec_point() {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let a = chart.alpha_at(&[0.5, 0.0, 0.0]);
        assert!((a[0] - 0.0).abs() < 1e-15);
        assert!((a[1] - 0.125).abs() < 1e-15);
        assert!((a[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cylinder_density_is_r() {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        for &r in &[0.1, 0.5, 0.93] {
            let d = chart.volume_density(&[r, 1.0, 0.3]);
            assert!((d - r).abs() < 1e-12, "density at r={r}: {d}");
        }
    }

    #[test]
    fn closed_form_density_matches_pfaffian_expansion() {
        for chart in [builtin_cylinder(0.05, 1.0).unwrap(), builtin_hopf()] {
            for &frac in &[0.1, 0.45, 0.8] {
                let x: Vec<f64> = chart
                    .domain
                    .iter()
                    .map(|&[lo, hi]| lo + frac * (hi - lo))
                    .collect();
                let fast = chart.volume_density(&x);
                let general = chart.volume_density_general(&x);
                assert!(
                    (fast - general).abs() < 1e-12,
                    "{} at {x:?}: {fast} vs {general}",
                    chart.name
                );
            }
        }
    }

    #[test]
    fn cylinder_dalpha_only_r_theta_block() {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let m = chart.dalpha(&[0.5, 0.2, -0.4]);
        assert!((m[(0, 1)] - 0.5).abs() < 1e-12);
        assert!((m[(1, 0)] + 0.5).abs() < 1e-12);
        for (i, j) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            assert!(m[(i, j)].abs() < 1e-12);
        }
    }

    #[test]
    fn fd_dalpha_matches_analytic() {
        let cyl = builtin_cylinder(0.05, 1.0).unwrap();
        let hopf = builtin_hopf();
        for (chart, pts) in [
            (&cyl, vec![[0.3, 1.0, 0.5], [0.8, 4.0, -0.7]]),
            (&hopf, vec![[0.6, 1.0, 2.0], [1.1, 0.3, 5.5]]),
        ] {
            for p in pts {
                let a = chart.dalpha(&p);
                let f = chart.dalpha_fd(&p);
                let err = (&a - &f).abs().max();
                assert!(err < 1e-7, "{}: fd vs analytic dalpha err {err}", chart.name);
            }
        }
    }

    #[test]
    fn scaling_alpha_scales_density_cubically() {
        // Replacing alpha by 2*alpha multiplies nu = alpha ^ dalpha by 2^{n+1}.
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let x = [0.5, 0.2, 0.1];
        let alpha = chart.alpha_at(&x);
        let omega = chart.dalpha(&x);
        let base = volume_density_from(&alpha, &omega);
        let scaled = volume_density_from(&(&alpha * 2.0), &(&omega * 2.0));
        assert!((scaled - 4.0 * base).abs() < 1e-12);
    }

    #[test]
    fn integrate_constant_gives_volume() {
        // Vol = 2 pi (r_max^2 - r_min^2); approaches 2 pi as r_min -> 0.
        let chart = builtin_cylinder(1e-3, 1.0).unwrap();
        let one = ScalarField::constant(1.0);
        let v = chart.integrate_scalar_res(&one, 0.0, &[64, 16, 8]);
        let exact = std::f64::consts::TAU * (1.0 - 1e-6);
        assert!((v - exact).abs() < 1e-4, "volume {v} vs {exact}");
        assert!((v - std::f64::consts::TAU).abs() < 1e-3);
    }

    #[test]
    fn integrate_zero_is_zero() {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let z = ScalarField::zero();
        assert_eq!(chart.integrate_scalar_res(&z, 0.0, &[8, 8, 8]), 0.0);
    }

    #[test]
    fn integrate_r2_half() {
        // int (r^2/2) r dr dtheta dz over the near-ideal cylinder = pi/2.
        let chart = builtin_cylinder(1e-3, 1.0).unwrap();
        let f = ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| x[0] * x[0] / 2.0));
        let v = chart.integrate_scalar_res(&f, 0.0, &[128, 16, 8]);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-4, "{v}");
    }

    #[test]
    fn quadrature_error_decays_with_resolution() {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        // Smooth non-polynomial integrand.
        let f = ScalarField::new(
            "exp(r) cos(theta)^2",
            Arc::new(|x: &[f64], _| x[0].exp() * x[1].cos().powi(2)),
        );
        // Reference at high resolution.
        let reference = chart.integrate_scalar_res(&f, 0.0, &[256, 64, 4]);
        let coarse = (chart.integrate_scalar_res(&f, 0.0, &[16, 16, 4]) - reference).abs();
        let fine = (chart.integrate_scalar_res(&f, 0.0, &[32, 32, 4]) - reference).abs();
        assert!(
            fine * tolerances::QUADRATURE_DECAY_FACTOR <= coarse,
            "midpoint convergence too slow: coarse {coarse:.3e}, fine {fine:.3e}"
        );
    }

    #[test]
    fn hopf_contact_condition_and_volume() {
        let chart = builtin_hopf();
        let min_density = chart.min_volume_density(&[16, 16, 16]);
        assert!(min_density > 0.0);
        // Vol(nu_alpha) = 4 pi^2 cos(2 delta) for the polar cutoff delta.
        let one = ScalarField::constant(1.0);
        let v = chart.integrate_scalar_res(&one, 0.0, &[64, 8, 8]);
        let delta = chart.domain[0][0];
        let exact = 4.0 * std::f64::consts::PI.powi(2) * (2.0 * delta).cos();
        // Midpoint error along the non-periodic eta axis is O(res^-2).
        assert!((v - exact).abs() / exact < 2e-4, "{v} vs {exact}");
    }

    #[test]
    fn dalpha_antisymmetry_defect_small() {
        for chart in [builtin_cylinder(0.05, 1.0).unwrap(), builtin_hopf()] {
            let defect = chart.max_dalpha_antisymmetry_defect(&[8, 8, 8]);
            assert!(defect < tolerances::DALPHA_ANTISYMMETRY);
        }
    }

    #[test]
    fn wrap_into_periodic_theta() {
        let chart = builtin_cylinder(0.05, 1.0).unwrap();
        let mut x = [0.5, 7.0, 0.0];
        chart.wrap_into(&mut x);
        assert!((x[1] - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
        let mut y = [0.5, -0.5, 0.0];
        chart.wrap_into(&mut y);
        assert!((y[1] - (std::f64::consts::TAU - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn invalid_radii_rejected() {
        assert!(builtin_cylinder(0.0, 1.0).is_err());
        assert!(builtin_cylinder(0.5, 0.4).is_err());
        assert!(builtin_cylinder(0.1, 1.5).is_err());
    }

    #[test]
    fn custom_chart_fd_dalpha_and_fallback_distance() {
        // A skewed copy of the cylinder form, alpha supplied without dalpha.
        let chart = ContactChart::new_custom(
            "custom",
            vec![[0.2, 1.0], [0.0, std::f64::consts::TAU], [-1.0, 1.0]],
            vec![false, true, false],
            Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = 0.0;
                out[1] = 0.5 * x[0] * x[0];
                out[2] = 1.0;
            }),
            None,
            None,
            vec![16, 16, 16],
        )
        .unwrap();
        let d = chart.volume_density(&[0.5, 0.1, 0.0]);
        assert!((d - 0.5).abs() < 1e-7, "fd density {d}");
        // Pure-z displacement under the identity metric, endpoints on grid
        // nodes of the 13-point fallback graph.
        let a = [0.6, 1.0, -0.5];
        let b = [0.6, 1.0, 0.5];
        let dist = chart.d0(&a, &b);
        assert!((dist - 1.0).abs() < 0.02, "grid distance {dist}");
    }
}
