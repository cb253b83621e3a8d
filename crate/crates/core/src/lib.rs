//! Numerical toolkit for contact Hamiltonian dynamics on chart-based
//! contact manifolds.
//!
//! The crate provides, at desk scale:
//!
//! - chart representations of contact manifolds (`charts`): the contact
//!   form, its exterior derivative, the induced volume density and
//!   tensor-grid quadrature;
//! - the function/vector-field correspondence (`calculus`): Reeb field,
//!   the moment map `I(X) = alpha(X)` and its inverse `gamma`;
//! - numerically integrated contact isotopies with generator algebra and
//!   conformal factors (`flows`);
//! - oscillation/contact norms, lengths and the contact distances that
//!   define the contact topology (`metrics`);
//! - the prequantization correspondence between strictly contact dynamics
//!   on a circle bundle and Hamiltonian dynamics on its base (`prequant`);
//! - reproducible experiments: singular time-one maps, Cauchy-sequence
//!   studies and Monte Carlo measure-preservation tests (`lab`).
//!
//! Everything is plain `f64` chart arithmetic; there is no symbolic layer.
//! Scalar fields may carry analytic gradients, otherwise central finite
//! differences are used with steps from [`tolerances`].

pub mod calculus;
pub mod charts;
pub mod config;
pub mod error;
pub mod expr;
pub mod fields;
pub mod flows;
pub mod lab;
pub mod linalg;
pub mod metrics;
pub mod ode;
pub mod prequant;
pub mod report;
pub mod sampling;
pub mod suites;
pub mod tolerances;

pub use charts::{ChartPoint, ContactChart, CovectorValue, TangentVector};
pub use error::{Error, Result};
pub use fields::ScalarField;
pub use flows::Isotopy;
pub use metrics::{ContactMetricStructure, MetricParams};
pub use prequant::{BaseHamiltonianField, PrequantBundle};
pub use report::{DistanceReport, NormReport, VerificationReport};
