//! Desk-scale experiments: the singular time-one map built from a
//! radial profile, Cauchy-sequence studies of its smooth approximants,
//! Monte Carlo measure-preservation tests, and uniqueness probes.
//!
//! The profile `rho : (0, 1] -> R_+` is decreasing, vanishes near `r = 1`
//! and equals `tau^{-1/2}` near zero. Its autonomous basic Hamiltonian
//! `H^rho(r) = -int_r^1 s rho(s) ds` generates, away from the axis, the
//! twist `theta -> theta + t rho(r)` with a radial `z`-drift; the
//! theta-displacement diverges as `r -> 0` while `r` and `z` stay
//! bounded, so the time-one map extends continuously but not smoothly.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::charts::builtin::builtin_cylinder_periodic_z;
use crate::charts::ContactChart;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::flows::Isotopy;
use crate::metrics::{self, MetricParams};
use crate::ode::{self, Stepper};
use crate::sampling;
use crate::tolerances;

/// `C^inf` step falling from 1 at `u <= 0` to 0 at `u >= 1`.
fn smooth_step_down(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let sigma = |v: f64| (-1.0 / v).exp();
    sigma(1.0 - u) / (sigma(u) + sigma(1.0 - u))
}

/// The radial profile of the singular example.
#[derive(Clone, Debug)]
pub struct RhoProfile {
    pub eps: f64,
    /// Exponent of the singular tail: `-1/2` for the standard profile,
    /// `-2` for the divergent variant (for which `int s rho(s) ds`
    /// diverges; exposed for exploration only).
    pub exponent: f64,
}

impl RhoProfile {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0 < eps && eps < 0.25) {
            return Err(Error::Domain(format!("eps must lie in (0, 1/4), got {eps}")));
        }
        Ok(RhoProfile {
            eps,
            exponent: -0.5,
        })
    }

    /// The variant whose tail makes `int_0^1 s rho(s) ds` infinite.
    pub fn divergent(eps: f64) -> Result<Self> {
        let mut p = Self::new(eps)?;
        p.exponent = -2.0;
        Ok(p)
    }

    /// `rho(tau) = B(tau) tau^exponent` with a smooth decreasing bump `B`
    /// equal to 1 on `(0, eps]` and 0 on `[1 - eps, 1]`.
    pub fn rho(&self, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Err(Error::Domain(format!("rho is defined on (0, 1], got {tau}")));
        }
        let u = (tau - self.eps) / (1.0 - 2.0 * self.eps);
        Ok(smooth_step_down(u) * tau.powf(self.exponent))
    }

    /// `H^rho(r) = -int_r^1 s rho(s) ds` by adaptive Simpson quadrature.
    pub fn h_rho(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::Domain(format!("h_rho needs r > 0, got {r}")));
        }
        if r >= 1.0 {
            return Ok(0.0);
        }
        let f = |s: f64| s * self.rho(s).unwrap_or(0.0);
        Ok(-adaptive_simpson(&f, r, 1.0, 1e-11, 40))
    }

    /// Closed-form time-one map of the singular field:
    /// `(r, theta, z) -> (r, theta + rho(r), z + H^rho(r) - (r^2/2) rho(r))`.
    pub fn time_one(&self, p: &[f64]) -> Result<[f64; 3]> {
        let r = p[0];
        let rho = self.rho(r)?;
        let h = self.h_rho(r)?;
        Ok([r, p[1] + rho, p[2] + h - 0.5 * r * r * rho])
    }

    /// The smooth approximant agreeing with `rho` on `[1/n, 1]`, constant
    /// on `[0, 1/(2n)]`, blended by a quintic on `[1/(2n), 1/n]` matching
    /// value and two derivatives at the outer junction.
    pub fn approximant(&self, n: usize) -> Result<RhoApproximant> {
        RhoApproximant::build(self.clone(), n)
    }
}

/// Adaptive Simpson with a recursion-depth cap.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson(_f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, m, fa, flm, fm);
        let right = simpson(f, m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(f, a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// A smooth approximant `rho_n` with its tabulated Hamiltonian.
#[derive(Clone)]
pub struct RhoApproximant {
    pub n: usize,
    profile: RhoProfile,
    /// Quintic coefficients on `[1/(2n), 1/n]` in the scaled variable.
    blend: [f64; 6],
    blend_lo: f64,
    blend_hi: f64,
    plateau: f64,
    /// `H(r)` on a uniform table over [0, 1] with Hermite interpolation.
    h_table: Arc<Vec<f64>>,
    table_size: usize,
}

impl RhoApproximant {
    fn build(profile: RhoProfile, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("approximant index must be >= 2".into()));
        }
        let hi = 1.0 / n as f64;
        let lo = 0.5 * hi;
        let delta = hi - lo;
        // Junction data at 1/n: analytic inside the singular tail,
        // finite differences of rho otherwise.
        let (v, d1, d2) = if hi <= profile.eps {
            let p = profile.exponent;
            (
                hi.powf(p),
                p * hi.powf(p - 1.0),
                p * (p - 1.0) * hi.powf(p - 2.0),
            )
        } else {
            let h = 1e-5 * hi;
            let f = |t: f64| profile.rho(t).unwrap();
            (
                f(hi),
                (f(hi + h) - f(hi - h)) / (2.0 * h),
                (f(hi + h) - 2.0 * f(hi) + f(hi - h)) / (h * h),
            )
        };
        // Plateau value keeps the blend roughly monotone.
        let plateau = v - 0.5 * d1 * delta;
        // Quintic Hermite on [0, 1]: (plateau, 0, 0) -> (v, d1*delta, d2*delta^2).
        let (y0, v0, a0) = (plateau, 0.0, 0.0);
        let (y1, v1, a1) = (v, d1 * delta, d2 * delta * delta);
        let aa = y1 - y0 - v0 - 0.5 * a0;
        let bb = v1 - v0 - a0;
        let cc = a1 - a0;
        let c3 = 10.0 * aa - 4.0 * bb + 0.5 * cc;
        let c4 = -15.0 * aa + 7.0 * bb - cc;
        let c5 = 6.0 * aa - 3.0 * bb + 0.5 * cc;
        let blend = [y0, v0, 0.5 * a0, c3, c4, c5];

        let mut approx = RhoApproximant {
            n,
            profile,
            blend,
            blend_lo: lo,
            blend_hi: hi,
            plateau,
            h_table: Arc::new(Vec::new()),
            table_size: 0,
        };
        // Cumulative Simpson table for H(r) = -int_r^1 s rho_n(s) ds.
        let m = 4096;
        let mut table = vec![0.0; m + 1];
        let step = 1.0 / m as f64;
        for i in (0..m).rev() {
            let a = i as f64 * step;
            let b = a + step;
            let mid = a + 0.5 * step;
            let seg = step / 6.0
                * (a * approx.rho_n(a) + 4.0 * mid * approx.rho_n(mid) + b * approx.rho_n(b));
            table[i] = table[i + 1] - seg;
        }
        approx.h_table = Arc::new(table);
        approx.table_size = m;
        Ok(approx)
    }

    /// The smooth profile on `[0, 1]`.
    pub fn rho_n(&self, tau: f64) -> f64 {
        if tau >= self.blend_hi {
            self.profile.rho(tau).unwrap()
        } else if tau <= self.blend_lo {
            self.plateau
        } else {
            let u = (tau - self.blend_lo) / (self.blend_hi - self.blend_lo);
            let [b0, b1, b2, c3, c4, c5] = self.blend;
            b0 + u * (b1 + u * (b2 + u * (c3 + u * (c4 + u * c5))))
        }
    }

    /// `H^{rho_n}(r)` by cubic Hermite interpolation of the table with
    /// exact slopes `H' = r rho_n(r)`.
    pub fn h(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, 1.0);
        let m = self.table_size;
        let step = 1.0 / m as f64;
        let i = ((r / step) as usize).min(m - 1);
        let a = i as f64 * step;
        let u = (r - a) / step;
        let (y0, y1) = (self.h_table[i], self.h_table[i + 1]);
        let d0 = a * self.rho_n(a) * step;
        let d1 = (a + step) * self.rho_n(a + step) * step;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        y0 * h00 + d0 * h10 + y1 * h01 + d1 * h11
    }

    /// The generator as a scalar field (autonomous, basic, analytic
    /// gradient `dH/dr = r rho_n(r)`).
    pub fn generator(&self) -> ScalarField {
        let a = self.clone();
        let g = self.clone();
        ScalarField::new(
            format!("h_rho_{}", self.n),
            Arc::new(move |x: &[f64], _t: f64| a.h(x[0])),
        )
        .with_grad(Arc::new(move |x: &[f64], _t: f64, out: &mut [f64]| {
            out[0] = x[0] * g.rho_n(x[0]);
            out[1] = 0.0;
            out[2] = 0.0;
        }))
        .with_basic_flag(true)
        .with_time_dependence(false)
    }

    /// Closed-form time-one map of the approximant's field.
    pub fn time_one(&self, p: &[f64]) -> [f64; 3] {
        let r = p[0];
        let rho = self.rho_n(r);
        [r, p[1] + rho, p[2] + self.h(r) - 0.5 * r * r * rho]
    }
}

/// Distance table and verdicts for a sequence of isotopies.
#[derive(Debug, Clone, Serialize)]
pub struct SequenceExperiment {
    pub labels: Vec<String>,
    /// Pairwise `d_cont` (symmetric, zero diagonal).
    pub distances: Vec<Vec<f64>>,
    /// `max_{a, b >= i} d(a, b)` per tail index.
    pub tails: Vec<f64>,
    pub cauchy_pass: bool,
    /// `D <= 2 ||dH|| (1 + tol)` envelope verdict.
    pub envelope_pass: bool,
    /// `(r, theta displacement, |z drift|)` rows of the continuity probe.
    pub probe: Vec<(f64, f64, f64)>,
    pub probe_divergence_pass: bool,
}

/// Build the flows of the approximants `rho_n` for `n` in `n_list` on the
/// periodic-`z` cylinder `[1/max(n), 1]`, measure pairwise `d_cont`, the
/// Cauchy behavior of the tail, the generator-difference envelope
/// `D <= 2 ||H_n - H_m||`, and the theta-displacement divergence near the
/// axis.
pub fn rho_cauchy_study(
    profile: &RhoProfile,
    n_list: &[usize],
    step: f64,
    params: &MetricParams,
) -> Result<SequenceExperiment> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("n_list must be strictly increasing".into()));
    }
    let n_max = *n_list.last().unwrap();
    let r_floor = 1.0 / n_max as f64;
    let chart = Arc::new(builtin_cylinder_periodic_z(r_floor, 1.0)?);
    let approximants: Vec<RhoApproximant> = n_list
        .iter()
        .map(|&n| profile.approximant(n))
        .collect::<Result<_>>()?;
    let flows: Vec<Isotopy> = approximants
        .iter()
        .map(|a| Isotopy::new(chart.clone(), a.generator(), step))
        .collect();

    let k = flows.len();
    let mut distances = vec![vec![0.0; k]; k];
    let mut envelope_pass = true;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = metrics::contact_distances(&flows[i], &flows[j], params)?;
            distances[i][j] = d.d_cont;
            distances[j][i] = d.d_cont;
            // Envelope: the generator part never exceeds twice the contact
            // norm of the generator difference (equality for radial
            // autonomous generators).
            let diff = ScalarField::sub(flows[i].generator(), flows[j].generator());
            let norm = metrics::contact_norm(&chart, &diff, 0.0, params).total;
            if d.d_l1 > 2.0 * norm * (1.0 + 1e-6) + 1e-9 {
                envelope_pass = false;
            }
        }
    }
    let tails: Vec<f64> = (0..k - 1)
        .map(|i| {
            let mut worst: f64 = 0.0;
            for a in i..k {
                for b in (a + 1)..k {
                    worst = worst.max(distances[a][b]);
                }
            }
            worst
        })
        .collect();
    let cauchy_pass = tails.windows(2).all(|w| w[1] < w[0]);

    // Continuity probe: theta displacement over shrinking radii versus the
    // bounded z-drift, for the singular profile itself.
    let mut probe = Vec::new();
    let mut r = 0.25;
    while r >= r_floor {
        let rho = profile.rho(r)?;
        let h = profile.h_rho(r)?;
        probe.push((r, rho, (h - 0.5 * r * r * rho).abs()));
        r *= 0.5;
    }
    let probe_divergence_pass = probe.windows(2).all(|w| w[1].1 > w[0].1);

    Ok(SequenceExperiment {
        labels: n_list.iter().map(|n| format!("rho_{n}")).collect(),
        distances,
        tails,
        cauchy_pass,
        envelope_pass,
        probe,
        probe_divergence_pass,
    })
}

/// Monte Carlo measure-preservation report.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub n_samples: usize,
    pub seed: u64,
    /// Fraction of `nu`-samples inside the box.
    pub p_direct: f64,
    /// Fraction whose time-one image lies inside the box.
    pub p_flowed: f64,
    pub ratio: f64,
    /// Binomial standard error of the ratio.
    pub sigma_ratio: f64,
    /// Paired standard error of `p_flowed - p_direct` (tighter).
    pub sigma_paired: f64,
    pub pass: bool,
}

/// Estimate `|phi_1^{-1}(U)|` vs `|U|` under the `nu_alpha` measure by
/// sampling points from `nu_alpha` (rejection from the chart box) and
/// flowing them through the time-one map; pass iff the direct and flowed
/// box probabilities agree within three binomial standard errors.
pub fn measure_preservation_mc(
    phi: &Isotopy,
    box_u: &[[f64; 2]],
    n_samples: usize,
    seed: u64,
) -> Result<McReport> {
    let chart = phi.chart().clone();
    let dim = chart.dim;
    // Density bound for rejection sampling, from a coarse grid.
    let bound = {
        let pts = chart.osc_points(&vec![16; dim]);
        let m = pts
            .coords
            .par_chunks_exact(dim)
            .map(|x| chart.measure_density(x))
            .reduce(|| 0.0, f64::max);
        m * 1.05
    };
    let inside = |x: &[f64]| -> bool {
        (0..dim).all(|d| x[d] >= box_u[d][0] && x[d] <= box_u[d][1])
    };

    let chunk = 8192usize;
    let n_chunks = n_samples.div_ceil(chunk);
    let totals = (0..n_chunks)
        .into_par_iter()
        .map(|ci| -> Result<(u64, u64, u64, usize)> {
            let mut rng = sampling::rng(seed.wrapping_add(ci as u64).wrapping_mul(0x9e3779b9));
            let take = chunk.min(n_samples - ci * chunk);
            let mut x = vec![0.0; dim];
            let mut direct = 0u64;
            let mut flowed = 0u64;
            let mut both = 0u64;
            let mut vel = crate::flows::GeneratorVelocity::new(
                chart.as_ref(),
                phi.generator(),
                false,
            );
            let mut stepper = Stepper::new(dim);
            for _ in 0..take {
                // Rejection-sample from |nu_alpha|.
                loop {
                    for d in 0..dim {
                        x[d] = rng.random_range(chart.domain[d][0]..chart.domain[d][1]);
                    }
                    let dens = chart.measure_density(&x);
                    if rng.random_range(0.0..bound) < dens {
                        break;
                    }
                }
                let a = inside(&x);
                let mut y = x.clone();
                ode::integrate(
                    &mut vel,
                    chart.as_ref(),
                    &mut stepper,
                    &mut y,
                    0.0,
                    1.0,
                    phi.step(),
                )?;
                let b = inside(&y);
                direct += a as u64;
                flowed += b as u64;
                both += (a && b) as u64;
            }
            Ok((direct, flowed, both, take))
        })
        .try_reduce(
            || (0, 0, 0, 0),
            |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3)),
        )?;
    let (direct, flowed, both, n) = totals;
    let n_f = n as f64;
    let p1 = direct as f64 / n_f;
    let p2 = flowed as f64 / n_f;
    let p12 = both as f64 / n_f;
    let var_diff = (p1 + p2 - 2.0 * p12 - (p1 - p2) * (p1 - p2)).max(0.0) / n_f;
    let sigma_paired = var_diff.sqrt();
    let sigma_binomial = (p1 * (1.0 - p1) / n_f).sqrt();
    let ratio = if p1 > 0.0 { p2 / p1 } else { 1.0 };
    let sigma_ratio = if p1 > 0.0 {
        sigma_binomial * (2.0f64).sqrt() / p1
    } else {
        0.0
    };
    let pass = (ratio - 1.0).abs() <= tolerances::MC_SIGMA_FACTOR * sigma_ratio + 1e-12;
    Ok(McReport {
        n_samples: n,
        seed,
        p_direct: p1,
        p_flowed: p2,
        ratio,
        sigma_ratio,
        sigma_paired,
        pass,
    })
}

/// Decay data for a sequence of generators against a constant target.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessProbe {
    /// `sup |H_n - C|` over the grid and time knots.
    pub sup_gaps: Vec<f64>,
    /// `sup_t dbar(Phi_{H_n}, Phi_C)`.
    pub c0_gaps: Vec<f64>,
    pub sup_ratios: Vec<f64>,
    pub c0_ratios: Vec<f64>,
    pub pass: bool,
}

/// Consistency probe for the uniqueness statement: if `||H_n - C|| -> 0`
/// then the flows approach the Reeb rotation at a commensurate measured
/// rate. Pass requires both gap sequences to decay monotonically and the
/// `c0` ratios to stay within a factor two of geometric halving when the
/// generator gaps halve.
pub fn uniqueness_probe(
    chart: &Arc<ContactChart>,
    h_seq: &[ScalarField],
    target: f64,
    step: f64,
    params: &MetricParams,
) -> Result<UniquenessProbe> {
    let reference = Isotopy::new(chart.clone(), ScalarField::constant(target), step);
    let osc_res = params.osc_res.resolve(chart.dim);
    let grid = chart.osc_points(&osc_res);
    let knots: Vec<f64> = {
        let n = (params.time_segments.max(2) + 1) / 2 * 2;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    };
    let samples = metrics::sup_sample_points(chart, params);
    let mut sup_gaps = Vec::new();
    let mut c0_gaps = Vec::new();
    for h in h_seq {
        let mut sup: f64 = 0.0;
        for &t in &knots {
            let m = grid
                .coords
                .par_chunks_exact(chart.dim)
                .map(|x| (h.value(x, t) - target).abs())
                .reduce(|| 0.0, f64::max);
            sup = sup.max(m);
        }
        sup_gaps.push(sup);
        let phi = Isotopy::new(chart.clone(), h.clone(), step);
        let per_knot = metrics::c0_distance_path(&phi, &reference, &knots, &samples)?;
        c0_gaps.push(per_knot.iter().fold(0.0f64, |a, &b| a.max(b)));
    }
    let ratios = |v: &[f64]| -> Vec<f64> {
        v.windows(2).map(|w| w[1] / w[0].max(1e-300)).collect()
    };
    let sup_ratios = ratios(&sup_gaps);
    let c0_ratios = ratios(&c0_gaps);
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let pass = monotone(&sup_gaps)
        && monotone(&c0_gaps)
        && c0_ratios
            .iter()
            .all(|r| (tolerances::CAUCHY_RATIO_MIN..=tolerances::CAUCHY_RATIO_MAX).contains(r));
    Ok(UniquenessProbe {
        sup_gaps,
        c0_gaps,
        sup_ratios,
        c0_ratios,
        pass,
    })
}

/// `F_hat(x, s) = t0 F(x, s t0)`, whose unit-time flow is the time-`t0`
/// flow of `F`. The Hofer norm never increases under this rescaling.
pub fn time_rescale(f: &ScalarField, t0: f64) -> Result<ScalarField> {
    if !(0.0 < t0 && t0 <= 1.0) {
        return Err(Error::Domain(format!("t0 must lie in (0, 1], got {t0}")));
    }
    Ok(f.time_rescale(t0))
}

/// Random `z`-independent generator whose time-one map is tested by the
/// Monte Carlo suite.
pub fn random_mc_generator<R: Rng>(rng: &mut R, r_min: f64, r_max: f64) -> ScalarField {
    crate::fields::families::cylinder_flow_safe(rng, 0.3, r_min, r_max, 2)
}
