//! Centralized numerical tolerances and finite-difference steps.
//!
//! Every threshold used by the verification suites lives here so that the
//! acceptance checks and the library agree on one set of numbers. The
//! comments state what limits each value: solver residuals sit near machine
//! precision, finite differences are balanced between truncation and
//! roundoff, grid estimators are resolution-limited.

/// Antisymmetry defect allowed in `dalpha` matrices at sampled points.
pub const DALPHA_ANTISYMMETRY: f64 = 1e-10;

/// Residual of the defining equations `alpha(xi) = 1`, `i(xi) dalpha = 0`
/// for the Reeb solve with analytic inputs.
pub const REEB_RESIDUAL: f64 = 1e-9;

/// Same residual when `dalpha` comes from central finite differences.
pub const REEB_RESIDUAL_FD: f64 = 1e-7;

/// Residual of `alpha(gamma(f)) = f` and of the kernel equation for the
/// contact-field solve with analytic inputs.
pub const GAMMA_RESIDUAL: f64 = 1e-9;

/// Finite-difference-limited residual for `i(Y_f) dalpha = (xi.f) alpha - df`.
pub const GAMMA_RESIDUAL_FD: f64 = 1e-8;

/// `moment(gamma(f)) = f` and the Lie-derivative identity, over sweeps.
pub const ISOMORPHISM_TOL: f64 = 1e-7;

/// Deviation of the solver field from the explicit cylinder formula for
/// basic functions.
pub const CYLINDER_FIELD_TOL: f64 = 1e-7;

/// Default threshold for declaring a function basic (`max |xi.f|`).
pub const BASIC_TOL: f64 = 1e-7;

/// Pullback deviation `phi_t^* alpha - alpha` for strictly contact flows
/// integrated at `FLOW_STEP`.
pub const ALPHA_PRESERVATION_TOL: f64 = 1e-7;

/// Generator-algebra identities (compose/product/inverse) against the
/// finite-difference velocity of the numerically composed flow.
pub const GENERATOR_ALGEBRA_TOL: f64 = 1e-6;

/// Agreement between the integral and pullback conformal-factor methods.
pub const CONFORMAL_CROSS_TOL: f64 = 1e-5;

/// Agreement of the conformal factor with `exp(t)` for the height
/// generator on the cylinder, `t <= 0.5`.
pub const CONFORMAL_EXP_TOL: f64 = 1e-6;

/// Relative deviation in the norm identity `||F # Hbar|| = ||F - H||`.
pub const NORM_IDENTITY_REL_TOL: f64 = 1e-5;

/// Absolute error of the contact-norm value of `r^2/2` on the cylinder at
/// quadrature resolution 128 per coordinate.
pub const NORM_VALUE_TOL: f64 = 1e-4;

/// `pi^* omega = dalpha`, finite-difference limited.
pub const BUNDLE_PULLBACK_TOL: f64 = 1e-7;

/// `T pi (gamma(F o pi)) = X_F` at sampled points.
pub const CORRESPONDENCE_TOL: f64 = 1e-6;

/// `pi o Phi^t = phi^t o pi` at t = 1 with both flows at `FLOW_STEP`.
pub const INTERTWINE_TOL: f64 = 1e-6;

/// Slack for the norm comparison `||H|| >= ||F~||_Hofer`.
pub const HOFER_COMPARISON_SLACK: f64 = 1e-9;

/// Slack for the four distance inequalities of the bundle comparison
/// lemma (sampling error of sup estimates).
pub const LEMMA_INEQUALITY_SLACK: f64 = 1e-6;

/// Geometric-decay ratio window for the Cauchy-transfer tail.
pub const CAUCHY_RATIO_MIN: f64 = 0.25;
pub const CAUCHY_RATIO_MAX: f64 = 1.0;

/// Monte Carlo pass band in standard errors.
pub const MC_SIGMA_FACTOR: f64 = 3.0;

/// Closed-form vs numeric-flow agreement for the singular-profile flows.
pub const PHI_RHO_TOL: f64 = 1e-6;

/// Flow map at t = 0 must return its input.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Default integrator step.
pub const FLOW_STEP: f64 = 1e-3;

/// Central finite-difference step for scalar-field gradients,
/// scaled by the per-coordinate domain extent.
pub const GRAD_FD_STEP: f64 = 1e-6;

/// Central finite-difference step for `dalpha` of user-supplied forms,
/// scaled by the per-coordinate domain extent.
pub const DALPHA_FD_STEP: f64 = 1e-5;

/// Central finite-difference step for flow-map Jacobians.
pub const JACOBIAN_FD_STEP: f64 = 2e-5;

/// Central finite-difference step (in time) for flow velocities.
pub const VELOCITY_FD_STEP: f64 = 1e-3;

/// Default tolerance used by quadrature-convergence assertions: doubling
/// the resolution must shrink the error at least by this factor.
pub const QUADRATURE_DECAY_FACTOR: f64 = 3.0;
