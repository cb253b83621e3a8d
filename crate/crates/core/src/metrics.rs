//! Norms and distances on generators and isotopies.
//!
//! The contact norm of a function is `osc(f) + |c(f)|` with
//! `c(f) = int_M f nu_alpha`; aggregated over time it gives the contact
//! length, and together with the `C^0` distance of the flows it assembles
//! the contact distances `d_cont` and `d_cont^inf`. Oscillations and sup
//! distances are estimated on deterministic grids and low-discrepancy
//! samples; resolution is a parameter, and acceptance thresholds state the
//! resolution they use.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::charts::grid::PointSet;
use crate::charts::{ContactChart, QuadRule};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::flows::{GridKind, Isotopy};
use crate::report::{NormReport, VerificationReport};
use crate::sampling;
use crate::tolerances;

/// Per-coordinate resolution, either uniform or explicit.
#[derive(Debug, Clone)]
pub enum ResSpec {
    Uniform(usize),
    PerCoord(Vec<usize>),
}

impl ResSpec {
    pub fn resolve(&self, dim: usize) -> Vec<usize> {
        match self {
            ResSpec::Uniform(n) => vec![*n; dim],
            ResSpec::PerCoord(v) => {
                assert_eq!(v.len(), dim, "resolution/dimension mismatch");
                v.clone()
            }
        }
    }

    /// Resolution for the 2-dimensional base of a bundle whose total
    /// space uses this spec: the polar resolution and the angular one.
    pub fn resolve_base(&self) -> Vec<usize> {
        match self {
            ResSpec::Uniform(n) => vec![*n; 2],
            ResSpec::PerCoord(v) => vec![v[0], v[1].max(v[2])],
        }
    }
}

/// Estimator knobs shared by the norm and distance computations.
#[derive(Debug, Clone)]
pub struct MetricParams {
    pub quad_res: ResSpec,
    pub osc_res: ResSpec,
    /// Composite-Simpson segments over [0, 1] (rounded up to even).
    pub time_segments: usize,
    /// Low-discrepancy sample count for C0 sup distances.
    pub sup_samples: usize,
    /// Interior margin (fraction of each extent) for sup samples, keeping
    /// flow seeds away from escape boundaries.
    pub sup_margin: f64,
    /// Rescale nu_alpha integrals by 1/Vol(M).
    pub normalize_volume: bool,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            quad_res: ResSpec::Uniform(24),
            osc_res: ResSpec::Uniform(24),
            time_segments: 8,
            sup_samples: 400,
            sup_margin: 0.02,
            normalize_volume: false,
        }
    }
}

impl MetricParams {
    pub fn normalized(mut self) -> Self {
        self.normalize_volume = true;
        self
    }

    fn simpson_knots(&self) -> Vec<f64> {
        let n = (self.time_segments.max(2) + 1) / 2 * 2;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }
}

/// Composite-Simpson weights for uniform knots on [0, 1].
fn simpson_weights(n_knots: usize) -> Vec<f64> {
    let n = n_knots - 1;
    debug_assert!(n >= 2 && n % 2 == 0);
    let h = 1.0 / n as f64;
    (0..=n)
        .map(|k| {
            if k == 0 || k == n {
                h / 3.0
            } else if k % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            }
        })
        .collect()
}

/// Oscillation (max - min) of a value sample.
pub fn osc_values(values: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

/// Peak-value correction of the parabola through three consecutive
/// samples around a discrete maximum; zero when the data is not locally
/// concave.
fn parabola_peak_gain(left: f64, center: f64, right: f64) -> f64 {
    let denom = 2.0 * center - left - right;
    if denom <= 0.0 {
        return 0.0;
    }
    let d = left - right;
    (d * d / (8.0 * denom)).max(0.0)
}

/// Oscillation of values on a tensor grid (axis 0 slowest) with per-axis
/// parabolic refinement at the discrete extrema. The refinement removes
/// the `O(spacing^2)` sampling bias at interior smooth extrema, which the
/// relative-tolerance norm comparisons need; extrema on non-periodic
/// boundaries are left untouched (they are exact there).
pub fn refined_osc(values: &[f64], sizes: &[usize], periodic: &[bool]) -> f64 {
    debug_assert_eq!(values.len(), sizes.iter().product::<usize>());
    let mut argmax = 0;
    let mut argmin = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[argmax] {
            argmax = i;
        }
        if v < values[argmin] {
            argmin = i;
        }
    }
    let neighbor = |flat: usize, axis: usize, off: isize| -> Option<f64> {
        let mut stride = 1usize;
        for d in (axis + 1)..sizes.len() {
            stride *= sizes[d];
        }
        let i = (flat / stride) % sizes[axis];
        let raw = i as isize + off;
        let j = if periodic[axis] {
            raw.rem_euclid(sizes[axis] as isize) as usize
        } else if raw < 0 || raw >= sizes[axis] as isize {
            return None;
        } else {
            raw as usize
        };
        let base = flat - i * stride;
        Some(values[base + j * stride])
    };
    let refine = |flat: usize, sign: f64| -> f64 {
        let mut gain = 0.0;
        for axis in 0..sizes.len() {
            if sizes[axis] < 3 {
                continue;
            }
            if let (Some(l), Some(r)) = (neighbor(flat, axis, -1), neighbor(flat, axis, 1)) {
                gain += parabola_peak_gain(sign * l, sign * values[flat], sign * r);
            }
        }
        gain
    };
    let hi = values[argmax] + refine(argmax, 1.0);
    let lo = values[argmin] - refine(argmin, -1.0);
    (hi - lo).max(0.0)
}

/// Oscillation of `f(., t)` over the endpoint-inclusive grid.
pub fn osc(chart: &ContactChart, f: &ScalarField, t: f64, res: &[usize]) -> f64 {
    let pts = chart.osc_points(res);
    let (lo, hi) = pts
        .coords
        .par_chunks_exact(chart.dim)
        .map(|x| {
            let v = f.value(x, t);
            (v, v)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

/// The contact norm `osc(f) + |c(f)|` at a fixed time.
pub fn contact_norm(
    chart: &ContactChart,
    f: &ScalarField,
    t: f64,
    params: &MetricParams,
) -> NormReport {
    let osc_res = params.osc_res.resolve(chart.dim);
    let quad_res = params.quad_res.resolve(chart.dim);
    let osc_part = osc(chart, f, t, &osc_res);
    let rule = chart.quad_rule(&quad_res);
    let mut c: f64 = rule
        .nodes
        .coords
        .par_chunks_exact(chart.dim)
        .zip(&rule.weights)
        .map(|(x, w)| f.value(x, t) * w)
        .sum();
    if params.normalize_volume {
        c /= rule.total_mass();
    }
    NormReport::new(osc_part, c, quad_res, params.time_segments)
}

/// Generator values `I(phi_dot_t)` of an isotopy on the nodes of a chart
/// grid, one vector per knot. Forward isotopies evaluate the generator
/// directly; inverted strictly contact ones use `-H_t o phi_t` through
/// batched trajectories; inverted non-basic ones fall back to
/// finite-difference velocities.
fn generator_grid_values(
    iso: &Isotopy,
    knots: &[f64],
    kind: GridKind,
    res: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let chart = iso.chart();
    let points: Arc<PointSet> = match kind {
        GridKind::Quad => Arc::new(chart.quad_rule(res).nodes.clone()),
        GridKind::Osc => chart.osc_points(res),
    };
    match iso.direction() {
        crate::flows::Direction::Forward => {
            let h = iso.generator();
            Ok(knots
                .iter()
                .map(|&t| {
                    points
                        .coords
                        .par_chunks_exact(chart.dim)
                        .map(|x| h.value(x, t))
                        .collect()
                })
                .collect())
        }
        crate::flows::Direction::Inverted => {
            if iso.is_strictly_contact() {
                // Forward maps of the underlying flow.
                let traj = iso.maps_on_grid(kind, res, knots, true)?;
                let h = iso.generator();
                Ok((0..knots.len())
                    .map(|k| {
                        (0..traj.n_seeds)
                            .into_par_iter()
                            .map(|s| -h.value(traj.position(s, k), knots[k]))
                            .collect()
                    })
                    .collect())
            } else {
                let mut out = Vec::with_capacity(knots.len());
                for &t in knots {
                    let vals: Result<Vec<f64>> = points
                        .coords
                        .par_chunks_exact(chart.dim)
                        .map(|x| iso.generator_value(x, t))
                        .collect();
                    out.push(vals?);
                }
                Ok(out)
            }
        }
    }
}

/// Per-knot contact norms of the generator difference of two isotopies.
fn generator_difference_norms(
    phi: &Isotopy,
    psi: &Isotopy,
    knots: &[f64],
    params: &MetricParams,
) -> Result<Vec<f64>> {
    let chart = phi.chart();
    let quad_res = params.quad_res.resolve(chart.dim);
    let osc_res = params.osc_res.resolve(chart.dim);
    let rule = chart.quad_rule(&quad_res);
    let mass = rule.total_mass();

    let q_phi = generator_grid_values(phi, knots, GridKind::Quad, &quad_res)?;
    let q_psi = generator_grid_values(psi, knots, GridKind::Quad, &quad_res)?;
    let o_phi = generator_grid_values(phi, knots, GridKind::Osc, &osc_res)?;
    let o_psi = generator_grid_values(psi, knots, GridKind::Osc, &osc_res)?;

    Ok((0..knots.len())
        .map(|k| {
            let osc_part = {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (a, b) in o_phi[k].iter().zip(&o_psi[k]) {
                    let v = a - b;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (hi - lo).max(0.0)
            };
            let mut c: f64 = q_phi[k]
                .iter()
                .zip(&q_psi[k])
                .zip(&rule.weights)
                .map(|((a, b), w)| (a - b) * w)
                .sum();
            if params.normalize_volume {
                c /= mass;
            }
            osc_part + c.abs()
        })
        .collect())
}

/// `D(Phi, Psi)`: time integral of the contact norms of the forward and
/// inverse generator differences.
pub fn distance_l1(phi: &Isotopy, psi: &Isotopy, params: &MetricParams) -> Result<f64> {
    let knots = params.simpson_knots();
    let weights = simpson_weights(knots.len());
    let fwd = generator_difference_norms(phi, psi, &knots, params)?;
    let inv = generator_difference_norms(&phi.invert(), &psi.invert(), &knots, params)?;
    Ok(knots
        .iter()
        .enumerate()
        .map(|(k, _)| weights[k] * (fwd[k] + inv[k]))
        .sum())
}

/// `D_inf(Phi, Psi)`: max over the time grid instead of the integral.
pub fn distance_linf(phi: &Isotopy, psi: &Isotopy, params: &MetricParams) -> Result<f64> {
    let knots = params.simpson_knots();
    let fwd = generator_difference_norms(phi, psi, &knots, params)?;
    let inv = generator_difference_norms(&phi.invert(), &psi.invert(), &knots, params)?;
    Ok(fwd
        .iter()
        .zip(&inv)
        .map(|(a, b)| a + b)
        .fold(0.0f64, f64::max))
}

/// Contact length `l(Phi) = D(Phi, id)`.
pub fn length_l1(phi: &Isotopy, params: &MetricParams) -> Result<f64> {
    let id = Isotopy::new(phi.chart().clone(), ScalarField::zero(), phi.step());
    distance_l1(phi, &id, params)
}

/// Interior low-discrepancy samples used for sup-distance estimation.
pub fn sup_sample_points(chart: &ContactChart, params: &MetricParams) -> PointSet {
    let pts = sampling::halton_box(&chart.domain, params.sup_samples, params.sup_margin);
    PointSet {
        dim: chart.dim,
        coords: pts.into_iter().flatten().collect(),
    }
}

/// `dbar` between the time-`t` maps of two isotopies: the max of the sup
/// distances of the maps and of their inverses over the sample set.
/// Returns the per-knot values.
pub fn c0_distance_path(
    phi: &Isotopy,
    psi: &Isotopy,
    knots: &[f64],
    samples: &PointSet,
) -> Result<Vec<f64>> {
    let chart = phi.chart();
    let mut per_knot = vec![0.0f64; knots.len()];
    for inverse in [false, true] {
        let a = phi.maps_on(samples, knots, inverse)?;
        let b = psi.maps_on(samples, knots, inverse)?;
        for (k, slot) in per_knot.iter_mut().enumerate() {
            let sup = (0..samples.len())
                .into_par_iter()
                .map(|s| chart.d0(a.position(s, k), b.position(s, k)))
                .reduce(|| 0.0, f64::max);
            *slot = slot.max(sup);
        }
    }
    Ok(per_knot)
}

/// `dbar` of the time-one maps.
pub fn c0_distance(phi: &Isotopy, psi: &Isotopy, params: &MetricParams) -> Result<f64> {
    let samples = sup_sample_points(phi.chart(), params);
    Ok(c0_distance_path(phi, psi, &[1.0], &samples)?[0])
}

/// Both contact distances, assembled from shared parts:
/// `d_cont = sup_t dbar + D` and `d_cont_inf = sup_t dbar + D_inf`.
#[derive(Debug, Clone)]
pub struct ContactDistances {
    pub c0_sup: f64,
    pub d_l1: f64,
    pub d_linf: f64,
    pub d_cont: f64,
    pub d_cont_inf: f64,
}

pub fn contact_distances(
    phi: &Isotopy,
    psi: &Isotopy,
    params: &MetricParams,
) -> Result<ContactDistances> {
    let knots = params.simpson_knots();
    let weights = simpson_weights(knots.len());
    let samples = sup_sample_points(phi.chart(), params);
    let c0 = c0_distance_path(phi, psi, &knots, &samples)?;
    let c0_sup = c0.iter().fold(0.0f64, |a, &b| a.max(b));
    let fwd = generator_difference_norms(phi, psi, &knots, params)?;
    let inv = generator_difference_norms(&phi.invert(), &psi.invert(), &knots, params)?;
    let d_l1: f64 = (0..knots.len()).map(|k| weights[k] * (fwd[k] + inv[k])).sum();
    let d_linf = fwd
        .iter()
        .zip(&inv)
        .map(|(a, b)| a + b)
        .fold(0.0f64, f64::max);
    Ok(ContactDistances {
        c0_sup,
        d_l1,
        d_linf,
        d_cont: c0_sup + d_l1,
        d_cont_inf: c0_sup + d_linf,
    })
}

pub fn d_cont(phi: &Isotopy, psi: &Isotopy, params: &MetricParams) -> Result<f64> {
    Ok(contact_distances(phi, psi, params)?.d_cont)
}

pub fn d_cont_inf(phi: &Isotopy, psi: &Isotopy, params: &MetricParams) -> Result<f64> {
    Ok(contact_distances(phi, psi, params)?.d_cont_inf)
}

/// Hofer aggregation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoferMode {
    L1,
    Linf,
}

/// Hofer norm of a Hamiltonian on a sample of the base: time aggregate of
/// the oscillation (no volume term).
pub fn hofer_norm(
    points: &PointSet,
    f: &ScalarField,
    mode: HoferMode,
    time_segments: usize,
) -> f64 {
    let n = (time_segments.max(2) + 1) / 2 * 2;
    let knots: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let weights = simpson_weights(knots.len());
    let oscs: Vec<f64> = knots
        .iter()
        .map(|&t| {
            let vals: Vec<f64> = points
                .coords
                .par_chunks_exact(points.dim)
                .map(|x| f.value(x, t))
                .collect();
            osc_values(&vals)
        })
        .collect();
    match mode {
        HoferMode::L1 => oscs.iter().zip(&weights).map(|(o, w)| o * w).sum(),
        HoferMode::Linf => oscs.iter().fold(0.0f64, |a, &b| a.max(b)),
    }
}

/// Time-aggregated contact norm of a generator: `int (osc + |c|) dt`
/// (`L1`) or `max_t (osc + |c|)` (`Linf`).
pub fn contact_norm_aggregate(
    chart: &ContactChart,
    f: &ScalarField,
    mode: HoferMode,
    params: &MetricParams,
) -> f64 {
    let knots = params.simpson_knots();
    let weights = simpson_weights(knots.len());
    let per_knot: Vec<f64> = knots
        .iter()
        .map(|&t| contact_norm(chart, f, t, params).total)
        .collect();
    match mode {
        HoferMode::L1 => per_knot.iter().zip(&weights).map(|(v, w)| v * w).sum(),
        HoferMode::Linf => per_knot.iter().fold(0.0f64, |a, &b| a.max(b)),
    }
}

/// Verify the norm identity `||F # Hbar|| = ||F - H||` for strictly
/// contact `H`, evaluating the composed side through batched trajectories
/// of the flow of `H`. Both sides use the same grids; the pass criterion
/// is the relative deviation.
pub fn verify_norm_identity(
    chart: &Arc<ContactChart>,
    h: &ScalarField,
    f: &ScalarField,
    phi_h: &Isotopy,
    params: &MetricParams,
) -> Result<VerificationReport> {
    let knots = params.simpson_knots();
    let weights = simpson_weights(knots.len());
    let quad_res = params.quad_res.resolve(chart.dim);
    let osc_res = params.osc_res.resolve(chart.dim);
    let rule = chart.quad_rule(&quad_res);
    let mass = rule.total_mass();
    let diff = ScalarField::sub(f, h);

    // Trajectories of the osc and quadrature grids under the flow of H.
    let osc_traj = phi_h.maps_on_grid(GridKind::Osc, &osc_res, &knots, false)?;
    let quad_traj = phi_h.maps_on_grid(GridKind::Quad, &quad_res, &knots, false)?;
    let osc_pts = chart.osc_points(&osc_res);
    let sizes: Vec<usize> = osc_res.iter().map(|&n| n.max(2)).collect();

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (k, &t) in knots.iter().enumerate() {
        // Composed side: values of (F - H) o phi_t. Both oscillation
        // estimates refine the discrete extrema (the composed values are
        // still smooth functions of the seed grid).
        let composed_osc: Vec<f64> = (0..osc_traj.n_seeds)
            .into_par_iter()
            .map(|s| diff.value(osc_traj.position(s, k), t))
            .collect();
        let composed_c: f64 = (0..quad_traj.n_seeds)
            .into_par_iter()
            .map(|s| diff.value(quad_traj.position(s, k), t) * rule.weights[s])
            .sum();
        // Plain side.
        let plain_osc: Vec<f64> = osc_pts
            .coords
            .par_chunks_exact(chart.dim)
            .map(|x| diff.value(x, t))
            .collect();
        let plain_c: f64 = rule
            .nodes
            .coords
            .par_chunks_exact(chart.dim)
            .zip(&rule.weights)
            .map(|(x, w)| diff.value(x, t) * w)
            .sum();
        let norm = if params.normalize_volume { mass } else { 1.0 };
        lhs += weights[k]
            * (refined_osc(&composed_osc, &sizes, &chart.periodic) + (composed_c / norm).abs());
        rhs += weights[k]
            * (refined_osc(&plain_osc, &sizes, &chart.periodic) + (plain_c / norm).abs());
    }
    let deviation = (lhs - rhs).abs() / rhs.abs().max(1e-12);
    Ok(VerificationReport::residual(
        "norm identity |F#Hbar| = |F-H|",
        deviation,
        tolerances::NORM_IDENTITY_REL_TOL,
        format!("{quad_res:?}/{osc_res:?}"),
    ))
}

/// A compatible metric/endomorphism pair `(g, J)` for a contact chart.
pub struct ContactMetricStructure {
    pub g: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
    pub j: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
}

/// The built-in compatible structures. On the cylinder
/// `g = r (dr^2 + dtheta^2) + alpha (x) alpha`; on the Hopf sphere `g` is
/// the lift of the curvature-compatible base metric plus
/// `alpha (x) alpha` (twice the round metric on `ker alpha`).
pub fn builtin_contact_metric(chart: &ContactChart) -> Result<ContactMetricStructure> {
    match chart.name.as_str() {
        name if name.starts_with("cylinder") => Ok(ContactMetricStructure {
            g: Arc::new(|x: &[f64]| {
                let r = x[0];
                let a = [0.0, 0.5 * r * r, 1.0];
                let mut g = DMatrix::zeros(3, 3);
                g[(0, 0)] = r;
                g[(1, 1)] = r;
                for i in 0..3 {
                    for j in 0..3 {
                        g[(i, j)] += a[i] * a[j];
                    }
                }
                g
            }),
            j: Arc::new(|x: &[f64]| {
                let r = x[0];
                let mut j = DMatrix::zeros(3, 3);
                j[(0, 1)] = 1.0;
                j[(1, 0)] = -1.0;
                j[(2, 0)] = 0.5 * r * r;
                j
            }),
        }),
        "hopf" => Ok(ContactMetricStructure {
            g: Arc::new(|x: &[f64]| {
                let (s, c) = x[0].sin_cos();
                let m2 = (s * c) * (s * c);
                let a = [0.0, c * c, s * s];
                let mut g = DMatrix::zeros(3, 3);
                g[(0, 0)] = 2.0;
                g[(1, 1)] = 2.0 * m2;
                g[(2, 2)] = 2.0 * m2;
                g[(1, 2)] = -2.0 * m2;
                g[(2, 1)] = -2.0 * m2;
                for i in 0..3 {
                    for j in 0..3 {
                        g[(i, j)] += a[i] * a[j];
                    }
                }
                g
            }),
            j: Arc::new(|x: &[f64]| {
                let (s, c) = x[0].sin_cos();
                let m = s * c;
                let mut j = DMatrix::zeros(3, 3);
                j[(1, 0)] = s * s / m;
                j[(2, 0)] = -c * c / m;
                j[(0, 1)] = -m;
                j[(0, 2)] = m;
                j
            }),
        }),
        other => Err(Error::UnsupportedChart(format!(
            "no built-in contact metric structure for chart `{other}`"
        ))),
    }
}

impl ContactMetricStructure {
    /// Max residuals of the four compatibility axioms over the inclusive
    /// grid, probing all coordinate directions:
    /// 1. `J xi = 0`
    /// 2. `J^2 X = -X + alpha(X) xi`
    /// 3. `dalpha(X, Y) = g(X, J Y)`
    /// 4. `g(X, Y) = g(JX, JY) + alpha(X) alpha(Y)`
    pub fn axiom_residuals(&self, chart: &ContactChart, res: &[usize]) -> Result<[f64; 4]> {
        let pts = chart.osc_points(res);
        let dim = chart.dim;
        let worst = pts
            .coords
            .par_chunks_exact(dim)
            .map(|x| -> Result<[f64; 4]> {
                let g = (self.g)(x);
                let j = (self.j)(x);
                let alpha = chart.alpha_at(x);
                let omega = chart.dalpha(x);
                let mut xi = vec![0.0; dim];
                crate::calculus::reeb_fast_into(chart, x, &mut xi)?;
                let xi = nalgebra::DVector::from_vec(xi);
                let mut res = [0.0f64; 4];
                // 1: J xi = 0.
                res[0] = (&j * &xi).amax();
                // 2: J^2 = -I + xi alpha^T on coordinate directions.
                let j2 = &j * &j;
                for col in 0..dim {
                    for row in 0..dim {
                        let expect = -f64::from(row == col) + xi[row] * alpha[col];
                        res[1] = res[1].max((j2[(row, col)] - expect).abs());
                    }
                }
                // 3 and 4 on coordinate pairs.
                let gj = &g * &j;
                for aidx in 0..dim {
                    for bidx in 0..dim {
                        res[2] = res[2].max((omega[(aidx, bidx)] - gj[(aidx, bidx)]).abs());
                        let gjj = (j.column(aidx).transpose() * &g * j.column(bidx))[(0, 0)];
                        let expect = gjj + alpha[aidx] * alpha[bidx];
                        res[3] = res[3].max((g[(aidx, bidx)] - expect).abs());
                    }
                }
                Ok(res)
            })
            .try_reduce(
                || [0.0; 4],
                |a, b| Ok([a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2]), a[3].max(b[3])]),
            )?;
        Ok(worst)
    }
}

/// Right-invariance ingredient: `||H o u^{-1}|| = ||H||` for `u` a
/// strictly contact time-one map, compared through batched trajectories.
pub fn verify_right_invariance(
    chart: &Arc<ContactChart>,
    h: &ScalarField,
    u_flow: &Isotopy,
    params: &MetricParams,
) -> Result<f64> {
    let quad_res = params.quad_res.resolve(chart.dim);
    let osc_res = params.osc_res.resolve(chart.dim);
    let rule = chart.quad_rule(&quad_res);
    let mass = if params.normalize_volume {
        rule.total_mass()
    } else {
        1.0
    };
    // u^{-1} on both grids at t = 1.
    let knots = [1.0];
    let quad_traj = u_flow.maps_on_grid(GridKind::Quad, &quad_res, &knots, true)?;
    let osc_traj = u_flow.maps_on_grid(GridKind::Osc, &osc_res, &knots, true)?;
    let osc_pts = chart.osc_points(&osc_res);
    let sizes: Vec<usize> = osc_res.iter().map(|&n| n.max(2)).collect();
    let t = 0.0;
    let composed_osc: Vec<f64> = (0..osc_traj.n_seeds)
        .into_par_iter()
        .map(|s| h.value(osc_traj.position(s, 0), t))
        .collect();
    let composed_c: f64 = (0..quad_traj.n_seeds)
        .into_par_iter()
        .map(|s| h.value(quad_traj.position(s, 0), t) * rule.weights[s])
        .sum();
    let plain_osc: Vec<f64> = osc_pts
        .coords
        .par_chunks_exact(chart.dim)
        .map(|x| h.value(x, t))
        .collect();
    let plain_c: f64 = rule
        .nodes
        .coords
        .par_chunks_exact(chart.dim)
        .zip(&rule.weights)
        .map(|(x, w)| h.value(x, t) * w)
        .sum();
    let lhs = refined_osc(&composed_osc, &sizes, &chart.periodic) + (composed_c / mass).abs();
    let rhs = refined_osc(&plain_osc, &sizes, &chart.periodic) + (plain_c / mass).abs();
    Ok((lhs - rhs).abs() / rhs.abs().max(1e-12))
}

/// Measure weights and nodes are exposed for callers assembling custom
/// integrals from trajectory values.
pub fn quad_rule_of(chart: &ContactChart, params: &MetricParams) -> Arc<QuadRule> {
    chart.quad_rule(&params.quad_res.resolve(chart.dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::builtin::{builtin_cylinder, builtin_cylinder_periodic_z, builtin_hopf};
    use crate::fields::families;
    use crate::flows;

    fn cyl() -> Arc<ContactChart> {
        Arc::new(builtin_cylinder(0.05, 1.0).unwrap())
    }

    fn params_small() -> MetricParams {
        MetricParams {
            quad_res: ResSpec::PerCoord(vec![32, 16, 8]),
            osc_res: ResSpec::PerCoord(vec![32, 16, 8]),
            time_segments: 4,
            sup_samples: 128,
            sup_margin: 0.02,
            normalize_volume: false,
        }
    }

    #[test]
    fn osc_examples() {
        let chart = cyl();
        let res = [16, 8, 4];
        assert_eq!(osc(&chart, &ScalarField::constant(7.0), 0.0, &res), 0.0);
        // r^2/2 on r in [r_min, 1]: osc = (1 - r_min^2)/2 exactly on the
        // inclusive grid (extrema on the boundary).
        let f = ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| 0.5 * x[0] * x[0]));
        let o = osc(&chart, &f, 0.0, &res);
        assert!((o - 0.5 * (1.0 - 0.05f64.powi(2))).abs() < 1e-14);
        // Translation invariance.
        let g = ScalarField::linear_combination(1.0, &f, 1.0, &ScalarField::constant(3.7));
        assert!((osc(&chart, &g, 0.0, &res) - o).abs() < 1e-14);
    }

    #[test]
    fn refined_osc_removes_quadratic_sampling_bias() {
        // f(u, v) = cos(u) + 0.5 cos(2 v + 0.3) on a coarse periodic grid:
        // true oscillation is 3, the raw grid misses it at O(spacing^2),
        // the refined estimate at O(spacing^3) or better.
        let (nu, nv) = (24usize, 36usize);
        let mut values = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let u = std::f64::consts::TAU * (i as f64 + 0.37) / nu as f64;
            for j in 0..nv {
                let v = std::f64::consts::TAU * (j as f64 + 0.81) / nv as f64;
                values.push(u.cos() + 0.5 * (2.0 * v + 0.3).cos());
            }
        }
        let raw = osc_values(&values);
        let refined = refined_osc(&values, &[nu, nv], &[true, true]);
        assert!((refined - 3.0).abs() < 1e-3, "refined {refined}");
        assert!((refined - 3.0).abs() < 0.12 * (raw - 3.0).abs() + 1e-9);
        // Boundary extrema on non-periodic axes stay exact.
        let line: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(refined_osc(&line, &[10], &[false]), 9.0);
    }

    #[test]
    fn contact_norm_of_angular_momentum() {
        // osc + |c| = (1 - r_min^2)/2 + (pi/2)(1 - r_min^4), near-ideal radii.
        let chart = Arc::new(builtin_cylinder(0.01, 1.0).unwrap());
        let f = ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| 0.5 * x[0] * x[0]));
        let params = MetricParams {
            quad_res: ResSpec::PerCoord(vec![128, 16, 8]),
            osc_res: ResSpec::PerCoord(vec![64, 8, 4]),
            ..Default::default()
        };
        let report = contact_norm(&chart, &f, 0.0, &params);
        let expect = 0.5 + std::f64::consts::FRAC_PI_2;
        assert!(
            (report.total - expect).abs() < 2e-4,
            "norm {} vs {expect}",
            report.total
        );
        assert_eq!(report.total, report.osc_part + report.c_part.abs());
        // Zero field.
        let z = contact_norm(&chart, &ScalarField::zero(), 0.0, &params);
        assert_eq!(z.total, 0.0);
    }

    #[test]
    fn distance_zero_on_diagonal_and_symmetric() {
        let chart = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let mut rng = crate::sampling::rng(3);
        let h = families::cylinder_flow_safe(&mut rng, 0.4, 0.05, 1.0, 2);
        let f = families::cylinder_flow_safe(&mut rng, 0.4, 0.05, 1.0, 2);
        let phi = flows::integrate(&chart, &h, 2e-3);
        let psi = flows::integrate(&chart, &f, 2e-3);
        let params = params_small();
        assert!(distance_l1(&phi, &phi, &params).unwrap().abs() < 1e-12);
        let ab = distance_l1(&phi, &psi, &params).unwrap();
        let ba = distance_l1(&psi, &phi, &params).unwrap();
        assert!((ab - ba).abs() < 1e-10);
        assert!(ab > 0.0);
        // D <= D_inf.
        let dinf = distance_linf(&phi, &psi, &params).unwrap();
        assert!(ab <= dinf + 1e-12, "D {ab} vs D_inf {dinf}");
    }

    #[test]
    fn reeb_translation_length() {
        // l(Phi_c) = 2 |c| Vol(M): generator c forward, -c inverse, osc = 0.
        let chart = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let c = 0.3;
        let phi = flows::integrate(&chart, &ScalarField::constant(c), 1e-3);
        let params = params_small();
        let l = length_l1(&phi, &params).unwrap();
        let vol = chart.quad_rule(&params.quad_res.resolve(3)).total_mass();
        assert!(
            (l - 2.0 * c * vol).abs() < 1e-6,
            "length {l} vs {}",
            2.0 * c * vol
        );
        // Near-ideal radii: Vol = 2 pi, l = 4 pi |c|.
        let ideal = Arc::new(builtin_cylinder_periodic_z(1e-3, 1.0).unwrap());
        let phi = flows::integrate(&ideal, &ScalarField::constant(c), 1e-3);
        let l = length_l1(&phi, &params).unwrap();
        assert!(
            (l - 4.0 * std::f64::consts::PI * c).abs() < 1e-2,
            "length {l}"
        );
    }

    #[test]
    fn c0_distance_of_rotations() {
        // theta-rotations by angles a and b: every point moves along its
        // r-circle; the sup distance is attained at r_max (and is the flat
        // annulus geodesic between the rotated images).
        let chart = cyl();
        let a = 0.4;
        let b = 0.1;
        let rot = |angle: f64| {
            ScalarField::new(
                format!("rot{angle}"),
                Arc::new(move |x: &[f64], _| angle * 0.5 * x[0] * x[0]),
            )
            .with_grad(Arc::new(move |x: &[f64], _, out: &mut [f64]| {
                out[0] = angle * x[0];
                out[1] = 0.0;
                out[2] = 0.0;
            }))
            .with_basic_flag(true)
        };
        let phi = flows::integrate(&chart, &rot(a), 1e-3);
        let psi = flows::integrate(&chart, &rot(b), 1e-3);
        let mut params = params_small();
        params.sup_samples = 600;
        params.sup_margin = 0.0;
        let d = c0_distance(&phi, &psi, &params).unwrap();
        // Independent oracle: same-radius annulus geodesic (chord, since
        // |a-b| is small and the chord clears the core).
        let expect = crate::charts::distance::annulus_distance(0.05, 1.0, a, 1.0, b);
        assert!(
            (d - expect).abs() < 6e-3,
            "c0 distance {d} vs oracle {expect} (sampling slack)"
        );
        // Symmetry and the triangle inequality on the three rotations.
        let chi = flows::integrate(&chart, &rot(0.25), 1e-3);
        let dab = c0_distance(&phi, &psi, &params).unwrap();
        let dba = c0_distance(&psi, &phi, &params).unwrap();
        assert!((dab - dba).abs() < 1e-12);
        let dac = c0_distance(&phi, &chi, &params).unwrap();
        let dcb = c0_distance(&chi, &psi, &params).unwrap();
        assert!(dab <= dac + dcb + 1e-9);
    }

    #[test]
    fn d_cont_dominates_parts() {
        let chart = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let mut rng = crate::sampling::rng(8);
        let h = families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2);
        let f = families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2);
        let phi = flows::integrate(&chart, &h, 2e-3);
        let psi = flows::integrate(&chart, &f, 2e-3);
        let params = params_small();
        let d = contact_distances(&phi, &psi, &params).unwrap();
        assert!(d.d_cont >= d.c0_sup && d.d_cont >= d.d_l1);
        assert!((d.d_cont - (d.c0_sup + d.d_l1)).abs() < 1e-14);
        assert!(d.d_cont_inf >= d.d_cont - 1e-14, "mean <= max aggregation");
        let self_d = contact_distances(&phi, &phi, &params).unwrap();
        assert!(self_d.d_cont.abs() < 1e-12);
    }

    #[test]
    fn hofer_norm_examples() {
        let chart = cyl();
        let pts = chart.osc_points(&[16, 16, 2]);
        let c = ScalarField::constant(5.0);
        assert_eq!(hofer_norm(&pts, &c, HoferMode::L1, 4), 0.0);
        let mut rng = crate::sampling::rng(4);
        let f = families::cylinder_basic(&mut rng, 0.7);
        let l1 = hofer_norm(&pts, &f, HoferMode::L1, 4);
        let linf = hofer_norm(&pts, &f, HoferMode::Linf, 4);
        // Autonomous field: both aggregates equal the oscillation.
        assert!((l1 - linf).abs() < 1e-12);
        assert!(l1 > 0.0);
    }

    #[test]
    fn norm_identity_on_explicit_pair() {
        // F = r^2/2, H = 1: both sides equal |r^2/2 - 1| norms.
        let chart = Arc::new(builtin_cylinder_periodic_z(0.05, 1.0).unwrap());
        let f = ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| 0.5 * x[0] * x[0]))
            .with_grad(Arc::new(|x: &[f64], _, out: &mut [f64]| {
                out[0] = x[0];
                out[1] = 0.0;
                out[2] = 0.0;
            }))
            .with_basic_flag(true);
        let h = ScalarField::constant(1.0);
        let phi_h = flows::integrate(&chart, &h, 1e-3);
        let params = MetricParams {
            quad_res: ResSpec::PerCoord(vec![64, 32, 4]),
            osc_res: ResSpec::PerCoord(vec![64, 32, 4]),
            time_segments: 4,
            ..Default::default()
        };
        let report = verify_norm_identity(&chart, &h, &f, &phi_h, &params).unwrap();
        // The Reeb translation preserves (r, theta), so the deviation is
        // pure roundoff here.
        assert!(report.pass, "deviation {}", report.value);
        assert!(report.value < 1e-10);
    }

    #[test]
    fn contact_metric_axioms_on_builtins() {
        for chart in [cyl(), Arc::new(builtin_hopf())] {
            let cms = builtin_contact_metric(&chart).unwrap();
            let res = chart
                .domain
                .iter()
                .map(|_| 10usize)
                .collect::<Vec<_>>();
            let residuals = cms.axiom_residuals(&chart, &res).unwrap();
            for (i, r) in residuals.iter().enumerate() {
                assert!(
                    *r < 1e-8,
                    "{}: axiom {} residual {r:.3e}",
                    chart.name,
                    i + 1
                );
            }
            // g(xi, xi) = 1 follows from axiom 4 with X = Y = xi.
            let mid: Vec<f64> = chart.domain.iter().map(|&[lo, hi]| 0.5 * (lo + hi)).collect();
            let g = (cms.g)(&mid);
            let mut xi = vec![0.0; 3];
            crate::calculus::reeb_fast_into(&chart, &mid, &mut xi).unwrap();
            let xi = nalgebra::DVector::from_vec(xi);
            let gxx = (xi.transpose() * &g * &xi)[(0, 0)];
            assert!((gxx - 1.0).abs() < 1e-12, "{}: g(xi,xi) = {gxx}", chart.name);
        }
        assert!(builtin_contact_metric(
            &crate::charts::ContactChart::new_custom(
                "other",
                vec![[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
                vec![false, false, false],
                Arc::new(|_: &[f64], out: &mut [f64]| out.fill(1.0)),
                None,
                None,
                vec![8, 8, 8],
            )
            .unwrap()
        )
        .is_err());
    }

    #[test]
    fn right_invariance_under_rotation() {
        // u = time-one theta-rotation (preserves r and z); the oscillation
        // estimate needs the angular grid fine enough to resolve the
        // rotated extrema at the 1e-5 level.
        let chart = cyl();
        let mut rng = crate::sampling::rng(10);
        let h = families::cylinder_flow_safe(&mut rng, 0.5, 0.05, 1.0, 1);
        let u = flows::integrate(
            &chart,
            &ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| 0.5 * x[0] * x[0]))
                .with_grad(Arc::new(|x: &[f64], _, out: &mut [f64]| {
                    out[0] = x[0];
                    out[1] = 0.0;
                    out[2] = 0.0;
                }))
                .with_basic_flag(true),
            2e-3,
        );
        let params = MetricParams {
            quad_res: ResSpec::PerCoord(vec![64, 128, 2]),
            osc_res: ResSpec::PerCoord(vec![24, 1024, 2]),
            ..Default::default()
        };
        let dev = verify_right_invariance(&chart, &h, &u, &params).unwrap();
        assert!(dev < tolerances::NORM_IDENTITY_REL_TOL, "deviation {dev:.3e}");
    }
}
