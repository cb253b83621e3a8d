//! Named verification suites, one per module, runnable from the CLI and
//! from the acceptance tests. Every threshold comes from [`tolerances`];
//! resolutions and sample counts are pinned here so a run is reproducible
//! from its seed alone.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::calculus;
use crate::charts::builtin::{builtin_cylinder, builtin_cylinder_periodic_z, builtin_hopf};
use crate::charts::grid::PointSet;
use crate::charts::ContactChart;
use crate::error::{Error, Result};
use crate::fields::{families, ScalarField};
use crate::flows::{self, ConformalMethod, Isotopy};
use crate::lab;
use crate::metrics::{self, HoferMode, MetricParams, ResSpec};
use crate::prequant::{self, base_families, PrequantBundle};
use crate::report::VerificationReport;
use crate::sampling;
use crate::tolerances as tol;

pub const SUITE_NAMES: [&str; 6] = ["calculus", "flows", "metrics", "prequant", "lab", "all"];

/// Knobs of a verification run. Defaults reproduce the acceptance
/// configuration; the step can be loosened from the CLI.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub step: f64,
    pub mc_samples: usize,
    pub isomorphism_fields: usize,
    pub explicit_fields: usize,
    pub algebra_pairs: usize,
    pub norm_identity_pairs: usize,
    pub hofer_fields: usize,
    pub lemma_pairs: usize,
    pub cauchy_terms: usize,
    pub correspondence_fields: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            step: tol::FLOW_STEP,
            mc_samples: 1_000_000,
            isomorphism_fields: 20,
            explicit_fields: 10,
            algebra_pairs: 50,
            norm_identity_pairs: 50,
            hofer_fields: 50,
            lemma_pairs: 25,
            cauchy_terms: 6,
            correspondence_fields: 20,
        }
    }
}

impl SuiteConfig {
    /// Reduced sample counts for smoke runs (same thresholds).
    pub fn quick(mut self) -> Self {
        self.mc_samples = 100_000;
        self.isomorphism_fields = 5;
        self.explicit_fields = 3;
        self.algebra_pairs = 8;
        self.norm_identity_pairs = 6;
        self.hofer_fields = 10;
        self.lemma_pairs = 4;
        self.cauchy_terms = 4;
        self.correspondence_fields = 5;
        self
    }
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    match name {
        "calculus" => suite_calculus(cfg),
        "flows" => suite_flows(cfg),
        "metrics" => suite_metrics(cfg),
        "prequant" => suite_prequant(cfg),
        "lab" => suite_lab(cfg),
        "all" => {
            let mut out = Vec::new();
            for s in ["calculus", "flows", "metrics", "prequant", "lab"] {
                out.extend(run_suite(s, cfg)?);
            }
            Ok(out)
        }
        other => Err(Error::Config(format!(
            "unknown suite `{other}` (expected one of {SUITE_NAMES:?})"
        ))),
    }
}

fn cyl() -> Result<Arc<ContactChart>> {
    Ok(Arc::new(builtin_cylinder(0.05, 1.0)?))
}

fn cyl_periodic() -> Result<Arc<ContactChart>> {
    Ok(Arc::new(builtin_cylinder_periodic_z(0.05, 1.0)?))
}

fn hopf() -> Arc<ContactChart> {
    Arc::new(builtin_hopf())
}

fn angular_momentum() -> ScalarField {
    ScalarField::new("r^2/2", Arc::new(|x: &[f64], _| 0.5 * x[0] * x[0]))
        .with_grad(Arc::new(|x: &[f64], _, out: &mut [f64]| {
            out[0] = x[0];
            out[1] = 0.0;
            out[2] = 0.0;
        }))
        .with_basic_flag(true)
        .with_time_dependence(false)
}

fn height_field() -> ScalarField {
    ScalarField::new("z", Arc::new(|x: &[f64], _| x[2]))
        .with_grad(Arc::new(|_x: &[f64], _, out: &mut [f64]| {
            out[0] = 0.0;
            out[1] = 0.0;
            out[2] = 1.0;
        }))
        .with_basic_flag(false)
        .with_time_dependence(false)
}

/// A non-basic field on the Hopf chart: a lifted base function plus a
/// fiber-dependent ripple.
fn hopf_general<R: Rng>(bundle: &PrequantBundle, rng: &mut R, amplitude: f64) -> ScalarField {
    let lifted = bundle.lift_function(&families::sphere_field(rng, amplitude));
    let a: f64 = rng.random_range(0.2..0.5) * amplitude;
    let p: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let ripple = ScalarField::new(
        "fiber ripple",
        Arc::new(move |x: &[f64], _| a * (x[1] + p).sin()),
    )
    .with_grad(Arc::new(move |x: &[f64], _, out: &mut [f64]| {
        out[0] = 0.0;
        out[1] = a * (x[1] + p).cos();
        out[2] = 0.0;
    }))
    .with_basic_flag(false)
    .with_time_dependence(false);
    ScalarField::linear_combination(1.0, &lifted, 1.0, &ripple).with_basic_flag(false)
}

// ---------------------------------------------------------------------
// calculus
// ---------------------------------------------------------------------

fn reeb_axioms(chart: &ContactChart, res: &[usize]) -> Result<(f64, f64, usize)> {
    let pts = chart.osc_points(res);
    let worst = pts
        .coords
        .par_chunks_exact(chart.dim)
        .map(|x| -> Result<(f64, f64)> {
            let (xi, _) = calculus::reeb_solve(chart, x)?;
            let alpha = chart.alpha_at(x);
            let pairing = (alpha.dot(&xi) - 1.0).abs();
            let omega_fd = chart.dalpha_fd(x);
            let mut contraction: f64 = 0.0;
            for j in 0..chart.dim {
                let mut acc = 0.0;
                for i in 0..chart.dim {
                    acc += xi[i] * omega_fd[(i, j)];
                }
                contraction = contraction.max(acc.abs());
            }
            Ok((pairing, contraction))
        })
        .try_reduce(
            || (0.0, 0.0),
            |a, b| Ok((a.0.max(b.0), a.1.max(b.1))),
        )?;
    Ok((worst.0, worst.1, pts.len()))
}

pub fn suite_calculus(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let cylinder = cyl()?;
    let hopf_chart = hopf();
    let bundle = PrequantBundle::hopf();
    let res = [25usize, 20, 20];

    for chart in [&cylinder, &hopf_chart] {
        let started = std::time::Instant::now();
        let (pairing, contraction, n) = reeb_axioms(chart, &res)?;
        let elapsed = started.elapsed().as_secs_f64();
        out.push(
            VerificationReport::residual(
                format!("reeb.alpha_pairing.{}", chart.name),
                pairing,
                tol::REEB_RESIDUAL,
                format!("n={n}"),
            )
            .with_seed(cfg.seed)
            .with_seconds(elapsed),
        );
        out.push(
            VerificationReport::residual(
                format!("reeb.dalpha_contraction_fd.{}", chart.name),
                contraction,
                tol::REEB_RESIDUAL_FD,
                format!("n={n}"),
            )
            .with_seed(cfg.seed)
            .with_seconds(elapsed),
        );
        out.push(VerificationReport::residual(
            format!("dalpha.antisymmetry.{}", chart.name),
            chart.max_dalpha_antisymmetry_defect(&[10, 10, 10]),
            tol::DALPHA_ANTISYMMETRY,
            "10x10x10",
        ));
        out.push(VerificationReport::lower_bound(
            format!("contact_condition.min_density.{}", chart.name),
            chart.min_volume_density(&[10, 10, 10]),
            0.0,
            "10x10x10",
        ));
    }

    // Isomorphism sweep: moment(gamma(f)) = f and L_{gamma(f)} alpha =
    // (xi.f) alpha over random fields and points.
    let iso_started = std::time::Instant::now();
    let mut rng = sampling::rng(cfg.seed);
    let mut worst_roundtrip: f64 = 0.0;
    let mut worst_lie: f64 = 0.0;
    let per_chart = cfg.isomorphism_fields / 2;
    let points_per_field = 500;
    for chart_idx in 0..2 {
        let chart: &Arc<ContactChart> = if chart_idx == 0 { &cylinder } else { &hopf_chart };
        let pts = sampling::halton_box(&chart.domain, points_per_field, 0.03);
        for k in 0..per_chart {
            let field = if chart_idx == 0 {
                match k % 3 {
                    0 => families::cylinder_basic(&mut rng, 1.0),
                    1 => families::cylinder_general(&mut rng, 1.0),
                    _ => families::with_time_profile(
                        &families::cylinder_general(&mut rng, 1.0),
                        0.3,
                    ),
                }
            } else {
                match k % 2 {
                    0 => bundle.lift_function(&families::sphere_field(&mut rng, 1.0)),
                    _ => hopf_general(&bundle, &mut rng, 1.0),
                }
            };
            let t = if field.is_time_dependent() { 0.37 } else { 0.0 };
            for x in &pts {
                let v = calculus::gamma(chart, &field, x, t)?;
                let m = calculus::moment(chart, &v);
                worst_roundtrip = worst_roundtrip.max((m - field.value(x, t)).abs());
                let lie = calculus::lie_derivative_alpha(chart, &field, x, t)?;
                let mu = calculus::xi_derivative(chart, &field, x, t)?;
                let alpha = chart.alpha_at(x);
                for d in 0..chart.dim {
                    worst_lie = worst_lie.max((lie.components[d] - mu * alpha[d]).abs());
                }
            }
        }
    }
    let iso_elapsed = iso_started.elapsed().as_secs_f64();
    out.push(
        VerificationReport::residual(
            "isomorphism.moment_gamma_roundtrip",
            worst_roundtrip,
            tol::ISOMORPHISM_TOL,
            format!("{} fields x {points_per_field} pts", cfg.isomorphism_fields),
        )
        .with_seed(cfg.seed)
        .with_seconds(iso_elapsed),
    );
    out.push(
        VerificationReport::residual(
            "isomorphism.lie_derivative_identity",
            worst_lie,
            tol::ISOMORPHISM_TOL,
            format!("{} fields x {points_per_field} pts", cfg.isomorphism_fields),
        )
        .with_seed(cfg.seed)
        .with_seconds(iso_elapsed),
    );

    // The explicit strictly contact field of a basic function on the
    // cylinder, transcribed independently of the solver.
    let steps = cylinder.grad_fd_steps();
    let mut worst_formula: f64 = 0.0;
    for _ in 0..cfg.explicit_fields {
        let f = families::cylinder_basic(&mut rng, 1.0);
        for _ in 0..100 {
            let x = [
                rng.random_range(0.1..0.95),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(-0.9..0.9),
            ];
            let v = calculus::gamma(&cylinder, &f, &x, 0.0)?;
            let mut g = [0.0; 3];
            f.gradient_into(&x, 0.0, &steps, &mut g);
            let r = x[0];
            let expect = [
                -g[1] / r,
                g[0] / r,
                f.value(&x, 0.0) - 0.5 * r * g[0],
            ];
            for d in 0..3 {
                worst_formula = worst_formula.max((v.components[d] - expect[d]).abs());
            }
        }
    }
    out.push(
        VerificationReport::residual(
            "gamma.explicit_cylinder_field",
            worst_formula,
            tol::CYLINDER_FIELD_TOL,
            format!("{} fields x 100 pts", cfg.explicit_fields),
        )
        .with_seed(cfg.seed),
    );

    // gamma(1) = Reeb.
    let mut worst_unit: f64 = 0.0;
    for chart in [&cylinder, &hopf_chart] {
        let pts = sampling::halton_box(&chart.domain, 50, 0.03);
        for x in &pts {
            let v = calculus::gamma(chart, &ScalarField::constant(1.0), x, 0.0)?;
            let mut xi = vec![0.0; chart.dim];
            calculus::reeb_fast_into(chart, x, &mut xi)?;
            for d in 0..chart.dim {
                worst_unit = worst_unit.max((v.components[d] - xi[d]).abs());
            }
        }
    }
    out.push(VerificationReport::residual(
        "gamma.unit_function_is_reeb",
        worst_unit,
        tol::GAMMA_RESIDUAL,
        "2 charts x 50 pts",
    ));

    // Basic detection in both directions.
    let (is_b, _) = calculus::is_basic(&cylinder, &angular_momentum(), &[8, 8, 8], tol::BASIC_TOL)?;
    let (not_b, residual) = calculus::is_basic(&cylinder, &height_field(), &[8, 8, 8], tol::BASIC_TOL)?;
    out.push(VerificationReport::residual(
        "is_basic.classification",
        if is_b && !not_b && (residual - 1.0).abs() < 1e-6 {
            0.0
        } else {
            1.0
        },
        0.5,
        "8x8x8",
    ));
    Ok(out)
}

// ---------------------------------------------------------------------
// flows
// ---------------------------------------------------------------------

pub fn suite_flows(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let cylinder = cyl()?;
    let cyl_p = cyl_periodic()?;
    let hopf_chart = hopf();
    let bundle = PrequantBundle::hopf();
    let mut rng = sampling::rng(cfg.seed ^ 0xf10);

    // Alpha preservation for the strictly contact test family.
    let dev_res = [6usize, 6, 6];
    let cases: [(&str, Arc<ContactChart>, ScalarField); 3] = [
        ("rotation", cylinder.clone(), angular_momentum()),
        ("reeb_translation", cyl_p.clone(), ScalarField::constant(0.4)),
        (
            "lifted_height",
            hopf_chart.clone(),
            bundle.lift_function(&base_families::height()),
        ),
    ];
    for (name, chart, field) in &cases {
        let phi = Isotopy::new(chart.clone(), field.clone(), cfg.step);
        let dev = phi.pullback_alpha_deviation(1.0, &dev_res)?;
        out.push(
            VerificationReport::residual(
                format!("alpha_preservation.{name}"),
                dev,
                tol::ALPHA_PRESERVATION_TOL,
                format!("step={:.1e}, grid=6x6x6", cfg.step),
            )
            .with_seed(cfg.seed),
        );
    }

    // Identity at t = 0 and the one-step group property.
    let h = families::cylinder_flow_safe(&mut rng, 0.4, 0.05, 1.0, 2);
    let phi = Isotopy::new(cyl_p.clone(), h.clone(), 1e-2);
    let x0 = [0.5, 2.0, 0.0];
    let idgap = phi
        .point(&x0, 0.0)?
        .iter()
        .zip(&x0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    out.push(VerificationReport::residual(
        "flow.identity_at_t0",
        idgap,
        tol::IDENTITY_TOL,
        "1 pt",
    ));
    let direct = phi.point(&x0, 1.0)?;
    let mid = phi.point(&x0, 0.4)?;
    let via = {
        // Continue integrating from the recorded midpoint.
        let mut vel = crate::flows::GeneratorVelocity::new(&cyl_p, &h, false);
        let mut stepper = crate::ode::Stepper::new(3);
        let mut y = mid.clone();
        crate::ode::integrate(&mut vel, cyl_p.as_ref(), &mut stepper, &mut y, 0.4, 1.0, 1e-2)?;
        y
    };
    let group_gap = direct
        .iter()
        .zip(&via)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    out.push(VerificationReport::residual(
        "flow.group_property",
        group_gap,
        10.0 * (1e-2f64).powi(4),
        "step=1e-2",
    ));

    // Generator algebra: compose, product and inverse closed forms versus
    // the finite-difference velocity moment of the composed flows.
    let delta = 5e-4;
    let mut worst = [0.0f64; 3];
    let sample_times = [0.3, 0.7];
    for _ in 0..cfg.algebra_pairs {
        let hgen = families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2);
        let fgen = families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2);
        let phi_h = Isotopy::new(cyl_p.clone(), hgen.clone(), cfg.step);
        let phi_f = Isotopy::new(cyl_p.clone(), fgen.clone(), cfg.step);
        let composed = flows::compose_generators(&fgen, &hgen, &phi_h);
        let product = flows::product_generator(&hgen, &fgen, &phi_h);
        let inverse_gen = phi_h.eq9_generator().expect("basic generator");
        let seeds: Vec<[f64; 3]> = (0..2)
            .map(|_| {
                [
                    rng.random_range(0.2..0.9),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(-0.8..0.8),
                ]
            })
            .collect();
        for y in &seeds {
            for &t in &sample_times {
                // chi = phi_H^{-1} o phi_F.
                let chi = |s: f64| -> Result<Vec<f64>> {
                    phi_h.invert().point(&phi_f.point(y, s)?, s)
                };
                let m = fd_moment(&cyl_p, &chi, t, delta)?;
                let x = chi(t)?;
                worst[0] = worst[0].max((m - composed.value(&x, t)).abs());
                // psi = phi_H o phi_F.
                let psi = |s: f64| -> Result<Vec<f64>> {
                    phi_h.point(&phi_f.point(y, s)?, s)
                };
                let m = fd_moment(&cyl_p, &psi, t, delta)?;
                let x = psi(t)?;
                worst[1] = worst[1].max((m - product.value(&x, t)).abs());
                // The inverse isotopy itself.
                let inv = |s: f64| -> Result<Vec<f64>> { phi_h.invert().point(y, s) };
                let m = fd_moment(&cyl_p, &inv, t, delta)?;
                let x = inv(t)?;
                worst[2] = worst[2].max((m - inverse_gen.value(&x, t)).abs());
            }
        }
    }
    for (i, name) in ["compose", "product", "inverse"].iter().enumerate() {
        out.push(
            VerificationReport::residual(
                format!("generator_algebra.{name}"),
                worst[i],
                tol::GENERATOR_ALGEBRA_TOL,
                format!("{} pairs", cfg.algebra_pairs),
            )
            .with_seed(cfg.seed),
        );
    }

    // Conformal factor: cross-method agreement and the exponential case.
    let mut worst_cross: f64 = 0.0;
    for _ in 0..5 {
        let g = families::cylinder_general(&mut rng, 0.3);
        let phi = Isotopy::new(cylinder.clone(), g, cfg.step);
        let x = [
            rng.random_range(0.35..0.65),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(-0.3..0.3),
        ];
        let fi = phi.conformal_factor(0.4, &x, ConformalMethod::Integral)?;
        let fp = phi.conformal_factor(0.4, &x, ConformalMethod::Pullback)?;
        worst_cross = worst_cross.max((fi - fp).abs());
    }
    out.push(
        VerificationReport::residual(
            "conformal.cross_method",
            worst_cross,
            tol::CONFORMAL_CROSS_TOL,
            "5 fields",
        )
        .with_seed(cfg.seed),
    );
    let phi_z = Isotopy::new(cylinder.clone(), height_field(), cfg.step);
    let mut worst_exp: f64 = 0.0;
    for &t in &[0.1, 0.25, 0.5] {
        let f = phi_z.conformal_factor(t, &[0.4, 1.0, 0.2], ConformalMethod::Integral)?;
        worst_exp = worst_exp.max((f - t.exp()).abs());
    }
    out.push(VerificationReport::residual(
        "conformal.height_exponential",
        worst_exp,
        tol::CONFORMAL_EXP_TOL,
        "t in {0.1, 0.25, 0.5}",
    ));

    // Velocity moment identity.
    let g = families::cylinder_general(&mut rng, 0.5);
    let phi = Isotopy::new(cylinder.clone(), g.clone(), cfg.step);
    let mut worst_moment: f64 = 0.0;
    for _ in 0..50 {
        let x = [
            rng.random_range(0.15..0.9),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(-0.8..0.8),
        ];
        let t = rng.random_range(0.0..1.0);
        let v = phi.velocity(t, &x)?;
        worst_moment = worst_moment.max((calculus::moment(&cylinder, &v) - g.value(&x, t)).abs());
    }
    out.push(VerificationReport::residual(
        "velocity.moment_is_generator",
        worst_moment,
        tol::GAMMA_RESIDUAL,
        "50 pts",
    ));
    Ok(out)
}

/// Fourth-order five-point moment of the velocity of a path of maps.
/// The envelope factors of the flow-safe fields carry large higher time
/// derivatives, so a second-order stencil would be truncation-limited
/// right at the tolerance.
fn fd_moment(
    chart: &Arc<ContactChart>,
    map: &dyn Fn(f64) -> Result<Vec<f64>>,
    t: f64,
    delta: f64,
) -> Result<f64> {
    let p2 = map(t + 2.0 * delta)?;
    let p1 = map(t + delta)?;
    let m1 = map(t - delta)?;
    let m2 = map(t - 2.0 * delta)?;
    let x = map(t)?;
    let mut v = vec![0.0; chart.dim];
    for d in 0..chart.dim {
        let wrap = |mut dv: f64| {
            if chart.periodic[d] {
                let period = chart.extent(d);
                if dv > period / 2.0 {
                    dv -= period;
                }
                if dv < -period / 2.0 {
                    dv += period;
                }
            }
            dv
        };
        let a = wrap(m2[d] - x[d]);
        let b = wrap(m1[d] - x[d]);
        let c = wrap(p1[d] - x[d]);
        let e = wrap(p2[d] - x[d]);
        v[d] = (a - 8.0 * b + 8.0 * c - e) / (12.0 * delta);
    }
    let alpha = chart.alpha_at(&x);
    Ok(alpha.iter().zip(&v).map(|(a, c)| a * c).sum())
}

// ---------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------

pub fn suite_metrics(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let cyl_p = cyl_periodic()?;
    let mut rng = sampling::rng(cfg.seed ^ 0x3e7);

    // Norm identity sweep (the composed side flows the grids, so the
    // resolutions here trade against the integrator step; the refined
    // oscillation estimator removes the quadratic extremum bias).
    let identity_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![192, 192, 2]),
        osc_res: ResSpec::PerCoord(vec![128, 256, 2]),
        time_segments: 4,
        sup_samples: 0,
        sup_margin: 0.0,
        normalize_volume: false,
    };
    let mut worst_identity: f64 = 0.0;
    for _ in 0..cfg.norm_identity_pairs {
        let h = families::cylinder_flow_safe(&mut rng, 0.2, 0.05, 1.0, 1);
        let f = families::cylinder_flow_safe(&mut rng, 0.2, 0.05, 1.0, 1);
        let phi_h = Isotopy::new(cyl_p.clone(), h.clone(), 2e-2);
        let report = metrics::verify_norm_identity(&cyl_p, &h, &f, &phi_h, &identity_params)?;
        worst_identity = worst_identity.max(report.value);
    }
    out.push(
        VerificationReport::residual(
            "norm_identity.relative_deviation",
            worst_identity,
            tol::NORM_IDENTITY_REL_TOL,
            format!("{} pairs, quad 192x192x2, osc 128x256x2", cfg.norm_identity_pairs),
        )
        .with_seed(cfg.seed),
    );

    // Contact-norm value of the angular momentum on the near-ideal
    // cylinder at quadrature resolution 128^3, through the round trip
    // moment(gamma(f)).
    let ideal = Arc::new(builtin_cylinder(0.01, 1.0)?);
    let roundtrip = {
        let chart = ideal.clone();
        let f = angular_momentum();
        let steps = chart.grad_fd_steps();
        ScalarField::new(
            "moment(gamma(r^2/2))",
            Arc::new(move |x: &[f64], t: f64| {
                let mut buf = [0.0; 3];
                let mut outv = [0.0; 3];
                calculus::gamma_fast_into(&chart, &f, &steps, &mut buf, x, t, &mut outv)
                    .expect("contact condition holds");
                let alpha = chart.alpha_at(x);
                alpha.iter().zip(&outv).map(|(a, c)| a * c).sum()
            }),
        )
    };
    let norm_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![128, 128, 128]),
        osc_res: ResSpec::PerCoord(vec![128, 16, 2]),
        ..Default::default()
    };
    let report = metrics::contact_norm(&ideal, &roundtrip, 0.0, &norm_params);
    let expect = 0.5 + std::f64::consts::FRAC_PI_2;
    out.push(VerificationReport::residual(
        "norm_value.angular_momentum",
        (report.total - expect).abs(),
        tol::NORM_VALUE_TOL,
        "quad=128^3",
    ));

    // Reeb translation length l(Phi_c) = 2 |c| Vol.
    let c = 0.3;
    let params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![64, 16, 8]),
        osc_res: ResSpec::PerCoord(vec![64, 16, 8]),
        time_segments: 4,
        sup_samples: 64,
        sup_margin: 0.02,
        normalize_volume: false,
    };
    let phi_c = Isotopy::new(cyl_p.clone(), ScalarField::constant(c), cfg.step);
    let l = metrics::length_l1(&phi_c, &params)?;
    let vol = cyl_p.quad_rule(&params.quad_res.resolve(3)).total_mass();
    out.push(VerificationReport::residual(
        "length.reeb_translation",
        (l - 2.0 * c * vol).abs(),
        1e-6,
        "64x16x8",
    ));

    // Distance axioms and the mean <= max aggregation.
    let h = families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2);
    let f = families::cylinder_flow_safe(&mut rng, 0.3, 0.05, 1.0, 2);
    let phi = Isotopy::new(cyl_p.clone(), h, 2e-3);
    let psi = Isotopy::new(cyl_p.clone(), f, 2e-3);
    let d_self = metrics::distance_l1(&phi, &phi, &params)?;
    let dab = metrics::distance_l1(&phi, &psi, &params)?;
    let dba = metrics::distance_l1(&psi, &phi, &params)?;
    let dinf = metrics::distance_linf(&phi, &psi, &params)?;
    let axiom_residual = d_self.abs().max((dab - dba).abs()).max((dab - dinf).max(0.0));
    out.push(VerificationReport::residual(
        "distance.axioms",
        axiom_residual,
        1e-9,
        "1 pair",
    ));

    // Right invariance of the contact norm under a strictly contact
    // time-one map.
    let invariance_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![64, 128, 2]),
        osc_res: ResSpec::PerCoord(vec![24, 1024, 2]),
        ..Default::default()
    };
    let u = Isotopy::new(cyl()?.clone(), angular_momentum(), 2e-3);
    let mut worst_inv: f64 = 0.0;
    for _ in 0..5 {
        let h = families::cylinder_flow_safe(&mut rng, 0.5, 0.05, 1.0, 1);
        worst_inv = worst_inv.max(metrics::verify_right_invariance(
            &cyl()?,
            &h,
            &u,
            &invariance_params,
        )?);
    }
    out.push(
        VerificationReport::residual(
            "norm.right_invariance",
            worst_inv,
            tol::NORM_IDENTITY_REL_TOL,
            "5 fields, theta=1024",
        )
        .with_seed(cfg.seed),
    );

    // Contact metric structure axioms on both built-in charts.
    for chart in [cyl()?, hopf()] {
        let cms = metrics::builtin_contact_metric(&chart)?;
        let residuals = cms.axiom_residuals(&chart, &[10, 10, 10])?;
        let worst = residuals.iter().fold(0.0f64, |a, &b| a.max(b));
        out.push(VerificationReport::residual(
            format!("contact_metric.axioms.{}", chart.name),
            worst,
            1e-8,
            "1000 pts, 4 axioms",
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// prequant
// ---------------------------------------------------------------------

pub fn suite_prequant(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let bundle = PrequantBundle::hopf();
    let mut rng = sampling::rng(cfg.seed ^ 0x9ea);

    // Bundle invariants.
    out.push(VerificationReport::residual(
        "bundle.pullback_omega_vs_dalpha",
        bundle.pullback_omega_deviation(&[10, 10, 10]),
        tol::BUNDLE_PULLBACK_TOL,
        "1000 pts",
    ));
    let mut worst_section: f64 = 0.0;
    for p in sampling::halton_box(&bundle.base.domain, 100, 0.0) {
        let back = bundle.project(&bundle.section(&p));
        worst_section = worst_section.max((back[0] - p[0]).abs());
        let mut dphi = (back[1] - p[1]).abs() % std::f64::consts::TAU;
        dphi = dphi.min(std::f64::consts::TAU - dphi);
        worst_section = worst_section.max(dphi);
    }
    out.push(VerificationReport::residual(
        "bundle.section_roundtrip",
        worst_section,
        1e-10,
        "100 pts",
    ));

    // Reeb orbits project to points.
    let reeb_flow = Isotopy::new(bundle.total.clone(), ScalarField::constant(1.0), cfg.step);
    let mut worst_fiber: f64 = 0.0;
    for y in sampling::halton_box(&bundle.total.domain, 20, 0.02) {
        let p0 = bundle.project(&y);
        for &t in &[0.4, 1.0] {
            let p = bundle.project(&reeb_flow.point(&y, t)?);
            worst_fiber = worst_fiber.max((p[0] - p0[0]).abs());
            let mut dphi = (p[1] - p0[1]).abs() % std::f64::consts::TAU;
            dphi = dphi.min(std::f64::consts::TAU - dphi);
            worst_fiber = worst_fiber.max(dphi);
        }
    }
    out.push(VerificationReport::residual(
        "bundle.reeb_orbits_project_to_points",
        worst_fiber,
        1e-9,
        "20 orbits",
    ));

    // Lifts are basic; project(lift) is the identity.
    let mut worst_lift: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    for _ in 0..10 {
        let f = families::sphere_field(&mut rng, 0.8);
        let h = bundle.lift_function(&f);
        let (_, residual) = calculus::is_basic(&bundle.total, &h, &[8, 8, 8], tol::BASIC_TOL)?;
        worst_lift = worst_lift.max(residual);
        let back = bundle.project_function(&h)?;
        for p in sampling::halton_box(&bundle.base.domain, 25, 0.0) {
            worst_round = worst_round.max((back.field.value(&p, 0.0) - f.value(&p, 0.0)).abs());
        }
    }
    out.push(
        VerificationReport::residual(
            "lift.xi_derivative_residual",
            worst_lift,
            tol::ISOMORPHISM_TOL,
            "10 fields",
        )
        .with_seed(cfg.seed),
    );
    out.push(VerificationReport::residual(
        "lift.project_roundtrip",
        worst_round,
        1e-10,
        "10 fields x 25 pts",
    ));

    // Normalization.
    let f = families::sphere_field(&mut rng, 0.8);
    let nf = bundle.normalize(&f, &[64, 64]);
    let mean = bundle.base.integrate(&nf.field, 0.0, &[64, 64]);
    out.push(VerificationReport::residual(
        "normalize.zero_mean",
        mean.abs(),
        1e-8,
        "quad=64^2",
    ));

    // Vector-field correspondence.
    let mut worst_corr: f64 = 0.0;
    for _ in 0..cfg.correspondence_fields {
        let f = families::sphere_field(&mut rng, 0.6);
        let report = bundle.verify_correspondence(&f, 60)?;
        worst_corr = worst_corr.max(report.value);
    }
    out.push(
        VerificationReport::residual(
            "correspondence.pushforward_equals_hamiltonian_field",
            worst_corr,
            tol::CORRESPONDENCE_TOL,
            format!("{} fields x 60 pts", cfg.correspondence_fields),
        )
        .with_seed(cfg.seed),
    );

    // Projection intertwines flows; equivariance under the circle action.
    let mut worst_intertwine: f64 = 0.0;
    let mut worst_equiv: f64 = 0.0;
    for _ in 0..5 {
        let f = base_families::windowed(&mut rng, 0.3, 0.3);
        let h = bundle.lift_function(&f);
        let up = Isotopy::new(bundle.total.clone(), h, cfg.step);
        let down = prequant::BaseIsotopy::new(bundle.base.clone(), f.clone(), cfg.step);
        for y in sampling::halton_box(&bundle.total.domain, 8, 0.1) {
            let lhs = bundle.project(&up.point(&y, 1.0)?);
            let rhs = down.point(&bundle.project(&y), 1.0)?;
            worst_intertwine = worst_intertwine.max((lhs[0] - rhs[0]).abs());
            let mut dphi = (lhs[1] - rhs[1]).abs() % std::f64::consts::TAU;
            dphi = dphi.min(std::f64::consts::TAU - dphi);
            worst_intertwine = worst_intertwine.max(dphi);

            let s = rng.random_range(0.0..std::f64::consts::TAU);
            let a = up.point(&bundle.circle_action(&y, s), 1.0)?;
            let b = bundle.circle_action(&up.point(&y, 1.0)?, s);
            for d in 0..3 {
                let mut dv = (a[d] - b[d]).abs();
                if bundle.total.periodic[d] {
                    let per = bundle.total.extent(d);
                    dv = dv.min(per - dv);
                }
                worst_equiv = worst_equiv.max(dv);
            }
        }
    }
    out.push(
        VerificationReport::residual(
            "projection.intertwines_flows",
            worst_intertwine,
            tol::INTERTWINE_TOL,
            "5 fields x 8 pts, t=1",
        )
        .with_seed(cfg.seed),
    );
    out.push(
        VerificationReport::residual(
            "flows.circle_equivariance",
            worst_equiv,
            1e-8,
            "5 fields x 8 pts",
        )
        .with_seed(cfg.seed),
    );

    // Horizontal lift: tangency and holonomy against the enclosed area.
    let start = [0.55, 0.2, 0.9];
    let p0 = bundle.project(&start);
    let circle = move |s: f64| [p0[0], p0[1] + std::f64::consts::TAU * s];
    let n = 512;
    let lift = bundle.horizontal_lift(&circle, &start, n)?;
    let mut offset = 0.0;
    for k in 0..n {
        let mut d = lift[k + 1][1] - lift[k][1];
        if d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        if d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        offset += d;
    }
    let expect = -std::f64::consts::TAU * start[0].sin().powi(2);
    out.push(VerificationReport::residual(
        "horizontal_lift.holonomy_equals_enclosed_area",
        (offset - expect).abs(),
        1e-5,
        format!("n={n}"),
    ));

    // Norm comparison |H| >= |F~|_Hofer.
    let comparison_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![32, 16, 16]),
        osc_res: ResSpec::PerCoord(vec![24, 16, 16]),
        time_segments: 2,
        ..Default::default()
    };
    let mut worst_margin = f64::INFINITY;
    for _ in 0..cfg.hofer_fields {
        let f = families::sphere_field(&mut rng, 0.6);
        let h = bundle.lift_function(&f);
        let (report, _) = bundle.verify_norm_comparison(&h, &comparison_params)?;
        worst_margin = worst_margin.min(report.value);
    }
    out.push(
        VerificationReport::lower_bound(
            "hofer_comparison.min_margin",
            worst_margin,
            -tol::HOFER_COMPARISON_SLACK,
            format!("{} fields", cfg.hofer_fields),
        )
        .with_seed(cfg.seed),
    );

    // The four distance inequalities.
    let lemma_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![16, 12, 12]),
        osc_res: ResSpec::PerCoord(vec![16, 12, 12]),
        time_segments: 4,
        sup_samples: 80,
        sup_margin: 0.05,
        normalize_volume: true,
    };
    let mut worst_overshoot = [f64::NEG_INFINITY; 4];
    let mut min_margin = [f64::INFINITY; 4];
    for _ in 0..cfg.lemma_pairs {
        let f1 = base_families::windowed(&mut rng, 0.25, 0.3);
        let f2 = base_families::windowed(&mut rng, 0.25, 0.3);
        let report = prequant::verify_lemma51(&bundle, &f1, &f2, 5e-3, &lemma_params)?;
        for (i, check) in report.checks.iter().enumerate() {
            worst_overshoot[i] = worst_overshoot[i].max(check.lhs - check.rhs);
            min_margin[i] = min_margin[i].min(check.margin);
        }
    }
    let names = [
        "distance_inequality.c0_time_one",
        "distance_inequality.c0_sup",
        "distance_inequality.d_cont",
        "distance_inequality.d_cont_inf",
    ];
    for i in 0..4 {
        out.push(
            VerificationReport::residual(
                names[i],
                worst_overshoot[i],
                tol::LEMMA_INEQUALITY_SLACK,
                format!("{} pairs, min margin {:.3e}", cfg.lemma_pairs, min_margin[i]),
            )
            .with_seed(cfg.seed),
        );
    }

    // Cauchy transfer for F_n = F + 2^{-n} G.
    let cauchy_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![12, 10, 10]),
        osc_res: ResSpec::PerCoord(vec![12, 10, 10]),
        time_segments: 4,
        sup_samples: 60,
        sup_margin: 0.05,
        normalize_volume: true,
    };
    let f = base_families::windowed(&mut rng, 0.25, 0.3);
    let g = base_families::windowed(&mut rng, 0.25, 0.3);
    let transfer =
        prequant::verify_cauchy_transfer(&bundle, &f, &g, cfg.cauchy_terms, 5e-3, &cauchy_params)?;
    let worst_ratio = transfer
        .ratios
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    let min_ratio = transfer
        .ratios
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    out.push(
        VerificationReport::residual(
            "cauchy_transfer.tail_ratio_max",
            worst_ratio,
            tol::CAUCHY_RATIO_MAX + 1e-12,
            format!("{} terms", cfg.cauchy_terms),
        )
        .with_seed(cfg.seed),
    );
    out.push(
        VerificationReport::lower_bound(
            "cauchy_transfer.tail_ratio_min",
            min_ratio,
            tol::CAUCHY_RATIO_MIN,
            format!("{} terms", cfg.cauchy_terms),
        )
        .with_seed(cfg.seed),
    );
    let worst_budget = transfer
        .budget_ratios
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    out.push(
        VerificationReport::residual(
            "cauchy_transfer.epsilon_budget_ratio",
            worst_budget,
            1.0 + 1e-9,
            format!("{} terms", cfg.cauchy_terms),
        )
        .with_seed(cfg.seed),
    );
    Ok(out)
}

// ---------------------------------------------------------------------
// lab
// ---------------------------------------------------------------------

pub fn suite_lab(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let mut rng = sampling::rng(cfg.seed ^ 0x1ab);
    let cylinder = cyl()?;
    let cyl_p = cyl_periodic()?;
    let box_u = [[0.3, 0.7], [0.5, 2.5], [-0.5, 0.5]];

    // Monte Carlo measure preservation for three strictly contact
    // time-one maps. The integrator step trades against the statistical
    // error, which dominates at 1e6 samples.
    let mc_step = 1e-2;
    let mc_cases: [(&str, Arc<ContactChart>, ScalarField); 3] = [
        ("identity", cylinder.clone(), ScalarField::zero()),
        ("rotation", cylinder.clone(), angular_momentum()),
        (
            "reeb_translation",
            cyl_p.clone(),
            ScalarField::constant(0.37),
        ),
    ];
    for (name, chart, gen) in &mc_cases {
        let phi = Isotopy::new(chart.clone(), gen.clone(), mc_step);
        let started = std::time::Instant::now();
        let report = lab::measure_preservation_mc(&phi, &box_u, cfg.mc_samples, cfg.seed)?;
        out.push(
            VerificationReport::residual(
                format!("measure_preservation.{name}"),
                (report.ratio - 1.0).abs(),
                tol::MC_SIGMA_FACTOR * report.sigma_ratio + 1e-12,
                format!("N={}", report.n_samples),
            )
            .with_seed(cfg.seed)
            .with_seconds(started.elapsed().as_secs_f64()),
        );
    }

    // Singular-profile study.
    let profile = lab::RhoProfile::new(0.1)?;
    let approx = profile.approximant(8)?;
    let chart32 = Arc::new(builtin_cylinder_periodic_z(1.0 / 32.0, 1.0)?);
    let phi8 = Isotopy::new(chart32.clone(), approx.generator(), 1e-2);
    let mut worst_match: f64 = 0.0;
    for _ in 0..200 {
        let x = [
            rng.random_range(1.0 / 32.0..1.0),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(-1.0..1.0),
        ];
        let numeric = phi8.point(&x, 1.0)?;
        let mut closed = approx.time_one(&x);
        closed[1] = closed[1].rem_euclid(std::f64::consts::TAU);
        closed[2] = -1.0 + (closed[2] + 1.0).rem_euclid(2.0);
        for d in 0..3 {
            let mut dv = (numeric[d] - closed[d]).abs();
            if chart32.periodic[d] {
                let per = chart32.extent(d);
                dv = dv.min(per - dv);
            }
            worst_match = worst_match.max(dv);
        }
    }
    out.push(
        VerificationReport::residual(
            "singular_profile.closed_form_vs_numeric",
            worst_match,
            tol::PHI_RHO_TOL,
            "200 pts, n=8",
        )
        .with_seed(cfg.seed),
    );

    let study_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![96, 6, 4]),
        osc_res: ResSpec::PerCoord(vec![192, 4, 4]),
        time_segments: 4,
        sup_samples: 200,
        sup_margin: 0.0,
        normalize_volume: false,
    };
    let study = lab::rho_cauchy_study(&profile, &[4, 8, 16, 32], 1e-2, &study_params)?;
    out.push(VerificationReport::residual(
        "singular_profile.cauchy_tail",
        if study.cauchy_pass { 0.0 } else { 1.0 },
        0.5,
        format!("tails {:?}", study.tails),
    ));
    out.push(VerificationReport::residual(
        "singular_profile.generator_envelope",
        if study.envelope_pass { 0.0 } else { 1.0 },
        0.5,
        "pairs of {4,8,16,32}",
    ));
    out.push(VerificationReport::residual(
        "singular_profile.twist_divergence_recorded",
        if study.probe_divergence_pass { 0.0 } else { 1.0 },
        0.5,
        format!("{} annuli", study.probe.len()),
    ));

    // Uniqueness probe: flows approach the Reeb rotation at the
    // generator rate.
    let bundle = PrequantBundle::hopf();
    let g = base_families::windowed(&mut rng, 0.4, 0.3);
    let target = 0.2;
    let seq: Vec<ScalarField> = (1..=5)
        .map(|n| {
            let gn = bundle.lift_function(&g).scale((0.5f64).powi(n));
            ScalarField::linear_combination(1.0, &ScalarField::constant(target), 1.0, &gn)
                .with_basic_flag(true)
        })
        .collect();
    let probe_params = MetricParams {
        quad_res: ResSpec::PerCoord(vec![12, 12, 12]),
        osc_res: ResSpec::PerCoord(vec![12, 12, 12]),
        time_segments: 2,
        sup_samples: 60,
        sup_margin: 0.05,
        normalize_volume: true,
    };
    let probe = lab::uniqueness_probe(&bundle.total.clone(), &seq, target, 2e-3, &probe_params)?;
    out.push(
        VerificationReport::residual(
            "uniqueness_probe.decay",
            if probe.pass { 0.0 } else { 1.0 },
            0.5,
            format!("c0 ratios {:?}", probe.c0_ratios),
        )
        .with_seed(cfg.seed),
    );

    // Time rescaling never increases the Hofer norm, and reparametrizes
    // the flow.
    let f = families::cylinder_flow_safe(&mut rng, 0.4, 0.05, 1.0, 2);
    let t0 = 0.6;
    let fhat = lab::time_rescale(&f, t0)?;
    let pts = cyl_p.osc_points(&[24, 24, 2]);
    let hofer_f = metrics::hofer_norm(&pts, &f, HoferMode::L1, 4);
    let hofer_fhat = metrics::hofer_norm(&pts, &fhat, HoferMode::L1, 4);
    let phi = Isotopy::new(cyl_p.clone(), f.clone(), cfg.step);
    let phi_hat = Isotopy::new(cyl_p.clone(), fhat, cfg.step);
    let x = [0.5, 1.1, 0.2];
    let a = phi.point(&x, t0)?;
    let b = phi_hat.point(&x, 1.0)?;
    let mut flow_gap: f64 = 0.0;
    for d in 0..3 {
        let mut dv = (a[d] - b[d]).abs();
        if cyl_p.periodic[d] {
            let per = cyl_p.extent(d);
            dv = dv.min(per - dv);
        }
        flow_gap = flow_gap.max(dv);
    }
    out.push(VerificationReport::residual(
        "time_rescale.hofer_monotone_and_flow",
        (hofer_fhat - hofer_f).max(0.0).max(flow_gap),
        1e-6,
        "t0=0.6",
    ));
    Ok(out)
}

/// Sample points helper shared with the CLI.
pub fn halton_points(chart: &ContactChart, count: usize, margin: f64) -> PointSet {
    let pts = sampling::halton_box(&chart.domain, count, margin);
    PointSet {
        dim: chart.dim,
        coords: pts.into_iter().flatten().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_calculus_suite_passes() {
        let cfg = SuiteConfig::default().quick();
        let reports = run_suite("calculus", &cfg).unwrap();
        for r in &reports {
            assert!(r.pass, "{}: value {:.3e} tol {:.1e}", r.check, r.value, r.tolerance);
        }
    }

    #[test]
    fn unknown_suite_is_error() {
        let cfg = SuiteConfig::default();
        assert!(run_suite("nosuch", &cfg).is_err());
    }
}
