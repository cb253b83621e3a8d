//! Run configuration: charts, fields and estimator resolutions loadable
//! from a TOML file.
//!
//! ```toml
//! seed = 42
//! step = 1e-3
//!
//! [chart]
//! builtin = "cylinder"      # or "cylinder_periodic_z" | "hopf"
//! r_min = 0.05
//! r_max = 1.0
//!
//! [fields]
//! h = "r^2/2"
//! f = "(1 - r^2) * cos(theta + t)"
//!
//! [resolution]
//! quad = 32
//! osc = 32
//! time_segments = 8
//! sup_samples = 400
//! ```
//!
//! Custom charts list coordinates, domain, periodic flags and the
//! coefficients of `alpha` as expressions; `dalpha` then comes from
//! central finite differences and the metric defaults to the identity
//! unless `metric_diag` is given.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use crate::charts::builtin::{builtin_cylinder, builtin_cylinder_periodic_z, builtin_hopf};
use crate::charts::ContactChart;
use crate::error::{Error, Result};
use crate::expr::CompiledExpr;
use crate::fields::ScalarField;
use crate::metrics::{MetricParams, ResSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub chart: ChartConfig,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_seed() -> u64 {
    42
}

fn default_step() -> f64 {
    crate::tolerances::FLOW_STEP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub r_min: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub coords: Option<Vec<String>>,
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    #[serde(default)]
    pub alpha: Option<Vec<String>>,
    #[serde(default)]
    pub metric_diag: Option<Vec<String>>,
    #[serde(default)]
    pub quadrature: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    #[serde(default = "default_res")]
    pub quad: usize,
    #[serde(default = "default_res")]
    pub osc: usize,
    #[serde(default = "default_time_segments")]
    pub time_segments: usize,
    #[serde(default = "default_sup_samples")]
    pub sup_samples: usize,
}

fn default_res() -> usize {
    32
}

fn default_time_segments() -> usize {
    8
}

fn default_sup_samples() -> usize {
    400
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        ResolutionConfig {
            quad: default_res(),
            osc: default_res(),
            time_segments: default_time_segments(),
            sup_samples: default_sup_samples(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 0.1) {
            return Err(Error::Config(format!(
                "step must lie in (0, 0.1], got {}",
                self.step
            )));
        }
        for (name, value) in [
            ("quad", self.resolution.quad),
            ("osc", self.resolution.osc),
        ] {
            if value < 8 {
                return Err(Error::Config(format!(
                    "resolution.{name} must be >= 8, got {value}"
                )));
            }
        }
        if let Some(tol) = self.tolerance {
            if tol <= 0.0 {
                return Err(Error::Config(format!("tolerance must be > 0, got {tol}")));
            }
        }
        Ok(())
    }

    /// Coordinate names used by field expressions on the configured chart.
    pub fn coord_names(&self) -> Vec<String> {
        match self.chart.builtin.as_deref() {
            Some("hopf") => vec!["eta".into(), "xi1".into(), "xi2".into()],
            Some(_) => vec!["r".into(), "theta".into(), "z".into()],
            None => self
                .chart
                .coords
                .clone()
                .unwrap_or_else(|| vec!["x1".into(), "x2".into(), "x3".into()]),
        }
    }

    pub fn build_chart(&self) -> Result<Arc<ContactChart>> {
        let c = &self.chart;
        if let Some(builtin) = &c.builtin {
            let r_min = c.r_min.unwrap_or(0.05);
            let r_max = c.r_max.unwrap_or(1.0);
            let mut chart = match builtin.as_str() {
                "cylinder" => builtin_cylinder(r_min, r_max)?,
                "cylinder_periodic_z" => builtin_cylinder_periodic_z(r_min, r_max)?,
                "hopf" => builtin_hopf(),
                other => {
                    return Err(Error::Config(format!(
                        "unknown builtin chart `{other}` (expected cylinder, cylinder_periodic_z or hopf)"
                    )))
                }
            };
            if let Some(q) = &c.quadrature {
                if q.len() != chart.dim {
                    return Err(Error::Config("quadrature length mismatch".into()));
                }
                chart.quadrature = q.clone();
            }
            return Ok(Arc::new(chart));
        }
        // Custom chart from expressions.
        let coords = c
            .coords
            .clone()
            .ok_or_else(|| Error::Config("custom chart needs `coords`".into()))?;
        let domain = c
            .domain
            .clone()
            .ok_or_else(|| Error::Config("custom chart needs `domain`".into()))?;
        let dim = coords.len();
        let periodic = c.periodic.clone().unwrap_or_else(|| vec![false; dim]);
        let alpha_exprs = c
            .alpha
            .clone()
            .ok_or_else(|| Error::Config("custom chart needs `alpha` coefficients".into()))?;
        if alpha_exprs.len() != dim || domain.len() != dim || periodic.len() != dim {
            return Err(Error::Config(
                "coords/domain/periodic/alpha lengths must agree".into(),
            ));
        }
        let compiled: Vec<CompiledExpr> = alpha_exprs
            .iter()
            .map(|e| CompiledExpr::parse(e, &coords))
            .collect::<Result<_>>()?;
        let alpha_fn = Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (i, e) in compiled.iter().enumerate() {
                out[i] = e.eval(x);
            }
        });
        let metric_fn = match &c.metric_diag {
            Some(diag) => {
                if diag.len() != dim {
                    return Err(Error::Config("metric_diag length mismatch".into()));
                }
                let exprs: Vec<CompiledExpr> = diag
                    .iter()
                    .map(|e| CompiledExpr::parse(e, &coords))
                    .collect::<Result<_>>()?;
                Some(Arc::new(move |x: &[f64]| {
                    let mut g = nalgebra::DMatrix::zeros(exprs.len(), exprs.len());
                    for (i, e) in exprs.iter().enumerate() {
                        g[(i, i)] = e.eval(x);
                    }
                    g
                })
                    as Arc<dyn Fn(&[f64]) -> nalgebra::DMatrix<f64> + Send + Sync>)
            }
            None => None,
        };
        let quadrature = c.quadrature.clone().unwrap_or_else(|| vec![32; dim]);
        Ok(Arc::new(ContactChart::new_custom(
            c.name.clone().unwrap_or_else(|| "custom".into()),
            domain,
            periodic,
            alpha_fn,
            None,
            metric_fn,
            quadrature,
        )?))
    }

    /// Compile a named field (or a literal expression) over the chart
    /// coordinates plus `t`.
    pub fn build_field(&self, name_or_expr: &str) -> Result<ScalarField> {
        let src = self
            .fields
            .get(name_or_expr)
            .cloned()
            .unwrap_or_else(|| name_or_expr.to_string());
        let mut vars = self.coord_names();
        let dim = vars.len();
        vars.push("t".into());
        let expr = CompiledExpr::parse(&src, &vars)?;
        Ok(ScalarField::from_expr(expr, dim))
    }

    pub fn metric_params(&self) -> MetricParams {
        MetricParams {
            quad_res: ResSpec::Uniform(self.resolution.quad),
            osc_res: ResSpec::Uniform(self.resolution.osc),
            time_segments: self.resolution.time_segments,
            sup_samples: self.resolution.sup_samples,
            sup_margin: 0.02,
            normalize_volume: false,
        }
    }
}
