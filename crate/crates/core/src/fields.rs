//! Time-dependent scalar fields `H(x, t)` on chart coordinates.
//!
//! A field is an evaluation closure plus an optional analytic spatial
//! gradient and an optional assertion that the field is basic
//! (`xi . H = 0`). Fields without a gradient fall back to central finite
//! differences with chart-scaled steps.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::expr::CompiledExpr;

pub type EvalFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct ScalarField {
    name: String,
    eval: EvalFn,
    grad: Option<GradFn>,
    /// Caller-asserted basic flag; `calculus::is_basic` checks it lazily.
    basic_flag: Option<bool>,
    time_dependent: bool,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, eval: EvalFn) -> Self {
        ScalarField {
            name: name.into(),
            eval,
            grad: None,
            basic_flag: None,
            time_dependent: true,
        }
    }

    pub fn with_grad(mut self, grad: GradFn) -> Self {
        self.grad = Some(grad);
        self
    }

    pub fn with_basic_flag(mut self, basic: bool) -> Self {
        self.basic_flag = Some(basic);
        self
    }

    pub fn with_time_dependence(mut self, dep: bool) -> Self {
        self.time_dependent = dep;
        self
    }

    pub fn constant(c: f64) -> Self {
        ScalarField {
            name: format!("const({c})"),
            eval: Arc::new(move |_, _| c),
            grad: Some(Arc::new(|_, _, out: &mut [f64]| out.fill(0.0))),
            basic_flag: Some(true),
            time_dependent: false,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Build a field from a parsed expression over `coords + [t]`.
    pub fn from_expr(expr: CompiledExpr, dim: usize) -> Self {
        let name = expr.source().to_string();
        ScalarField {
            name,
            eval: Arc::new(move |x: &[f64], t: f64| {
                let mut vals = Vec::with_capacity(dim + 1);
                vals.extend_from_slice(&x[..dim]);
                vals.push(t);
                expr.eval(&vals)
            }),
            grad: None,
            basic_flag: None,
            time_dependent: true,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn basic_flag(&self) -> Option<bool> {
        self.basic_flag
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    #[inline]
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    /// Spatial gradient: analytic if present, otherwise central finite
    /// differences with the per-coordinate steps in `fd_steps`.
    #[inline]
    pub fn gradient_into(&self, x: &[f64], t: f64, fd_steps: &[f64], out: &mut [f64]) {
        if let Some(g) = &self.grad {
            g(x, t, out);
            return;
        }
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = fd_steps[i];
            xp[i] = x[i] + h;
            let fp = (self.eval)(&xp, t);
            xp[i] = x[i] - h;
            let fm = (self.eval)(&xp, t);
            xp[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    /// Pointwise linear combination `a*self + b*other`.
    pub fn linear_combination(a: f64, f: &ScalarField, b: f64, g: &ScalarField) -> ScalarField {
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let grad = match (&f.grad, &g.grad) {
            (Some(fg), Some(gg)) => {
                let (fg, gg) = (fg.clone(), gg.clone());
                Some(Arc::new(move |x: &[f64], t: f64, out: &mut [f64]| {
                    let mut tmp = vec![0.0; out.len()];
                    fg(x, t, out);
                    gg(x, t, &mut tmp);
                    for (o, v) in out.iter_mut().zip(&tmp) {
                        *o = a * *o + b * *v;
                    }
                }) as GradFn)
            }
            _ => None,
        };
        ScalarField {
            name: format!("{a}*{} + {b}*{}", f.name, g.name),
            eval: Arc::new(move |x, t| a * fe(x, t) + b * ge(x, t)),
            grad,
            basic_flag: match (f.basic_flag, g.basic_flag) {
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            time_dependent: f.time_dependent || g.time_dependent,
        }
    }

    pub fn sub(f: &ScalarField, g: &ScalarField) -> ScalarField {
        Self::linear_combination(1.0, f, -1.0, g)
    }

    pub fn scale(&self, a: f64) -> ScalarField {
        Self::linear_combination(a, self, 0.0, &ScalarField::zero())
    }

    /// Rescaled generator `F_hat(x, s) = t0 * F(x, s * t0)`, so that its
    /// unit-time flow equals the time-`t0` flow of `F`.
    pub fn time_rescale(&self, t0: f64) -> ScalarField {
        let eval = self.eval.clone();
        let grad = self.grad.clone();
        ScalarField {
            name: format!("rescale({}, {t0})", self.name),
            eval: Arc::new(move |x, s| t0 * eval(x, s * t0)),
            grad: grad.map(|g| {
                Arc::new(move |x: &[f64], s: f64, out: &mut [f64]| {
                    g(x, s * t0, out);
                    for o in out.iter_mut() {
                        *o *= t0;
                    }
                }) as GradFn
            }),
            basic_flag: self.basic_flag,
            time_dependent: true,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.name)
    }
}

/// Random field families used by the verification sweeps. All families are
/// deterministic functions of the RNG stream and carry analytic gradients.
pub mod families {
    use super::*;

    /// Random basic field on the cylinder chart `(r, theta, z)`:
    /// a radial polynomial plus angular harmonics with radial envelopes,
    /// wavenumbers up to 2. Independent of `z`, hence basic.
    pub fn cylinder_basic<R: Rng>(rng: &mut R, amplitude: f64) -> ScalarField {
        let a0: f64 = rng.random_range(-1.0..1.0);
        let a1: f64 = rng.random_range(-1.0..1.0);
        let a2: f64 = rng.random_range(-1.0..1.0);
        let b1: f64 = rng.random_range(-1.0..1.0);
        let p1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let b2: f64 = rng.random_range(-1.0..1.0);
        let p2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let s = amplitude;
        let eval = move |x: &[f64], _t: f64| {
            let (r, th) = (x[0], x[1]);
            s * (a0 + a1 * r * r / 2.0
                + a2 * r * r * r / 3.0
                + b1 * r * r * (th + p1).cos()
                + b2 * r * r * r * (2.0 * th + p2).cos())
        };
        let grad = move |x: &[f64], _t: f64, out: &mut [f64]| {
            let (r, th) = (x[0], x[1]);
            out[0] = s * (a1 * r
                + a2 * r * r
                + 2.0 * b1 * r * (th + p1).cos()
                + 3.0 * b2 * r * r * (2.0 * th + p2).cos());
            out[1] = s * (-b1 * r * r * (th + p1).sin()
                - 2.0 * b2 * r * r * r * (2.0 * th + p2).sin());
            out[2] = 0.0;
        };
        ScalarField::new("cylinder_basic_random", Arc::new(eval))
            .with_grad(Arc::new(grad))
            .with_basic_flag(true)
            .with_time_dependence(false)
    }

    /// Random basic field on the cylinder with angular wavenumber at most
    /// one and gentle curvature; used where grid oscillation estimates
    /// must resolve the extrema sharply.
    pub fn cylinder_basic_lowfreq<R: Rng>(rng: &mut R, amplitude: f64) -> ScalarField {
        let a0: f64 = rng.random_range(-1.0..1.0);
        let a1: f64 = rng.random_range(-1.0..1.0);
        let b1: f64 = rng.random_range(0.3..1.0);
        let p1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let s = amplitude;
        let eval = move |x: &[f64], _t: f64| {
            let (r, th) = (x[0], x[1]);
            s * (a0 + a1 * r * r / 2.0 + b1 * r * r * (th + p1).cos())
        };
        let grad = move |x: &[f64], _t: f64, out: &mut [f64]| {
            let (r, th) = (x[0], x[1]);
            out[0] = s * (a1 * r + 2.0 * b1 * r * (th + p1).cos());
            out[1] = s * (-b1 * r * r * (th + p1).sin());
            out[2] = 0.0;
        };
        ScalarField::new("cylinder_basic_lowfreq", Arc::new(eval))
            .with_grad(Arc::new(grad))
            .with_basic_flag(true)
            .with_time_dependence(false)
    }

    /// Smooth window vanishing to first order at both ends of `[a, b]`.
    fn radial_window(a: f64, b: f64) -> (impl Fn(f64) -> f64 + Copy, impl Fn(f64) -> f64 + Copy) {
        let span = b - a;
        let w = move |r: f64| {
            let u = ((r - a) / span).clamp(0.0, 1.0);
            let s = (std::f64::consts::PI * u).sin();
            s * s
        };
        let dw = move |r: f64| {
            let u = ((r - a) / span).clamp(0.0, 1.0);
            std::f64::consts::PI / span * (2.0 * std::f64::consts::PI * u).sin()
        };
        (w, dw)
    }

    /// Random basic field whose flow cannot leave the radial band: the
    /// angular terms carry a window vanishing at `r_min` and `r_max`, so
    /// the radial velocity `-f_theta / r` is zero on the boundary circles.
    /// Pair with a periodic-`z` cylinder, since the Reeb component still
    /// translates `z`. `max_wavenumber` is 1 or 2.
    pub fn cylinder_flow_safe<R: Rng>(
        rng: &mut R,
        amplitude: f64,
        r_min: f64,
        r_max: f64,
        max_wavenumber: usize,
    ) -> ScalarField {
        let a0: f64 = rng.random_range(-1.0..1.0);
        let a1: f64 = rng.random_range(-1.0..1.0);
        let b1: f64 = rng.random_range(0.3..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let p1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let (b2, p2): (f64, f64) = if max_wavenumber >= 2 {
            (
                rng.random_range(-0.6..0.6),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        } else {
            (0.0, 0.0)
        };
        let (w, dw) = radial_window(r_min, r_max);
        let s = amplitude;
        let eval = move |x: &[f64], _t: f64| {
            let (r, th) = (x[0], x[1]);
            s * (a0
                + a1 * r * r / 2.0
                + w(r) * (b1 * (th + p1).cos() + b2 * (2.0 * th + p2).cos()))
        };
        let grad = move |x: &[f64], _t: f64, out: &mut [f64]| {
            let (r, th) = (x[0], x[1]);
            let ripple = b1 * (th + p1).cos() + b2 * (2.0 * th + p2).cos();
            out[0] = s * (a1 * r + dw(r) * ripple);
            out[1] = s * w(r) * (-b1 * (th + p1).sin() - 2.0 * b2 * (2.0 * th + p2).sin());
            out[2] = 0.0;
        };
        ScalarField::new("cylinder_flow_safe", Arc::new(eval))
            .with_grad(Arc::new(grad))
            .with_basic_flag(true)
            .with_time_dependence(false)
    }

    /// Random non-basic field on the cylinder (adds `z` dependence).
    pub fn cylinder_general<R: Rng>(rng: &mut R, amplitude: f64) -> ScalarField {
        let base = cylinder_basic(rng, amplitude);
        let c: f64 = rng.random_range(-1.0..1.0) * amplitude;
        let d: f64 = rng.random_range(-1.0..1.0) * amplitude;
        let eval_base = base.eval.clone();
        let grad_base = base.grad.clone().expect("family carries gradients");
        let eval = move |x: &[f64], t: f64| eval_base(x, t) + c * x[2] + d * x[0] * x[2];
        let grad = move |x: &[f64], t: f64, out: &mut [f64]| {
            grad_base(x, t, out);
            out[0] += d * x[2];
            out[2] += c + d * x[0];
        };
        ScalarField::new("cylinder_general_random", Arc::new(eval))
            .with_grad(Arc::new(grad))
            .with_basic_flag(false)
            .with_time_dependence(false)
    }

    /// Random smooth function on the 2-sphere chart `(theta, phi)` built
    /// from low-order spherical harmonics; restricts smoothly across the
    /// poles.
    pub fn sphere_field<R: Rng>(rng: &mut R, amplitude: f64) -> ScalarField {
        let c: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let s = amplitude;
        let eval = move |x: &[f64], _t: f64| {
            let (th, ph) = (x[0], x[1]);
            s * (c[0]
                + c[1] * th.cos()
                + th.sin() * (c[2] * ph.cos() + c[3] * ph.sin())
                + c[4] * th.cos() * th.cos())
        };
        let grad = move |x: &[f64], _t: f64, out: &mut [f64]| {
            let (th, ph) = (x[0], x[1]);
            out[0] = s * (-c[1] * th.sin()
                + th.cos() * (c[2] * ph.cos() + c[3] * ph.sin())
                - 2.0 * c[4] * th.cos() * th.sin());
            out[1] = s * th.sin() * (-c[2] * ph.sin() + c[3] * ph.cos());
        };
        ScalarField::new("sphere_random", Arc::new(eval))
            .with_grad(Arc::new(grad))
            .with_time_dependence(false)
    }

    /// Multiply a field by the time profile `1 + a sin(pi t)`.
    pub fn with_time_profile(f: &ScalarField, a: f64) -> ScalarField {
        let eval = f.eval.clone();
        let grad = f.grad.clone();
        let profile = move |t: f64| 1.0 + a * (std::f64::consts::PI * t).sin();
        ScalarField {
            name: format!("{}*(1+{a} sin(pi t))", f.name),
            eval: Arc::new(move |x, t| profile(t) * eval(x, t)),
            grad: grad.map(|g| {
                Arc::new(move |x: &[f64], t: f64, out: &mut [f64]| {
                    g(x, t, out);
                    let p = 1.0 + a * (std::f64::consts::PI * t).sin();
                    for o in out.iter_mut() {
                        *o *= p;
                    }
                }) as GradFn
            }),
            basic_flag: f.basic_flag,
            time_dependent: true,
        }
    }
}
