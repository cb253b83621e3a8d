//! The isomorphism between functions and contact vector fields.
//!
//! `I(X) = alpha(X)` identifies contact vector fields with functions; its
//! inverse is `gamma(f) = Y_f + f xi`, where `Y_f` is the unique vector in
//! `ker alpha` with `i(Y_f) dalpha = (xi.f) alpha - df`. The solver here
//! works on any chart; built-in charts also carry closed forms which the
//! tests cross-check against this path.

use nalgebra::{DMatrix, DVector};

use crate::charts::{ChartPoint, ContactChart, CovectorValue, TangentVector};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{kernel_basis, least_squares, solve_square};
use crate::tolerances;

/// Residual tolerance for the Reeb solve, depending on whether `dalpha`
/// is analytic or finite-difference.
fn reeb_tolerance(chart: &ContactChart) -> f64 {
    if chart.has_analytic_dalpha() {
        tolerances::REEB_RESIDUAL
    } else {
        tolerances::REEB_RESIDUAL_FD
    }
}

/// Solve for the Reeb field at `x`: the unique `xi` with `alpha(xi) = 1`
/// and `i(xi) dalpha = 0`, via the stacked least-squares system
/// `[alpha; dalpha] xi = (1, 0, ..., 0)`.
pub fn reeb_solve(chart: &ContactChart, x: &[f64]) -> Result<(DVector<f64>, f64)> {
    let dim = chart.dim;
    let alpha = chart.alpha_at(x);
    let omega = chart.dalpha(x);
    let mut a = DMatrix::zeros(dim + 1, dim);
    for j in 0..dim {
        a[(0, j)] = alpha[j];
    }
    for i in 0..dim {
        for j in 0..dim {
            // Row i of i(xi) dalpha = 0: sum_j omega[j][i] xi_j ... the
            // covector (i_X dalpha)_i = sum_j X_j omega_{j i}.
            a[(1 + i, j)] = omega[(j, i)];
        }
    }
    let mut b = DVector::zeros(dim + 1);
    b[0] = 1.0;
    let (xi, residual) = least_squares(&a, &b, "reeb")?;
    let tol = reeb_tolerance(chart);
    if residual > tol {
        return Err(Error::Degeneracy {
            context: format!("reeb solve at {x:?}"),
            residual,
        });
    }
    Ok((xi, residual))
}

/// The Reeb field at a chart point.
pub fn reeb(chart: &ContactChart, x: &ChartPoint) -> Result<TangentVector> {
    let (xi, _) = reeb_solve(chart, &x.coords)?;
    Ok(TangentVector {
        at: x.clone(),
        components: xi.as_slice().to_vec(),
    })
}

/// Reeb field into a buffer, preferring the chart's closed form.
#[inline]
pub fn reeb_fast_into(chart: &ContactChart, x: &[f64], out: &mut [f64]) -> Result<()> {
    if chart.reeb_closed_form(x, out) {
        return Ok(());
    }
    let (xi, _) = reeb_solve(chart, x)?;
    out.copy_from_slice(xi.as_slice());
    Ok(())
}

/// The moment `I(X) = alpha_x(X)` of a tangent vector.
pub fn moment(chart: &ContactChart, v: &TangentVector) -> f64 {
    let alpha = chart.alpha_at(&v.at.coords);
    alpha
        .iter()
        .zip(&v.components)
        .map(|(a, c)| a * c)
        .sum()
}

/// Directional derivative of `f` along the Reeb field at `(x, t)`.
pub fn xi_derivative(chart: &ContactChart, f: &ScalarField, x: &[f64], t: f64) -> Result<f64> {
    let mut xi = vec![0.0; chart.dim];
    reeb_fast_into(chart, x, &mut xi)?;
    let mut grad = vec![0.0; chart.dim];
    f.gradient_into(x, t, &chart.grad_fd_steps(), &mut grad);
    Ok(grad.iter().zip(&xi).map(|(g, c)| g * c).sum())
}

/// The contact vector field `gamma(f) = Y_f + f xi` at `(x, t)` by the
/// restricted linear solve on `ker alpha`.
///
/// Postconditions (tested): `alpha(gamma(f)) = f` and
/// `i(Y_f) dalpha = (xi.f) alpha - df` to solver tolerance.
pub fn gamma(chart: &ContactChart, f: &ScalarField, x: &[f64], t: f64) -> Result<TangentVector> {
    let dim = chart.dim;
    let alpha = chart.alpha_at(x);
    let omega = chart.dalpha(x);
    let g = chart.metric(x);
    let mut xi = vec![0.0; dim];
    reeb_fast_into(chart, x, &mut xi)?;

    let mut grad = vec![0.0; dim];
    f.gradient_into(x, t, &chart.grad_fd_steps(), &mut grad);
    let xi_f: f64 = grad.iter().zip(&xi).map(|(a, b)| a * b).sum();

    // rhs covector: (xi.f) alpha - df.
    let rhs_cov: DVector<f64> =
        DVector::from_iterator(dim, alpha.iter().zip(&grad).map(|(a, d)| xi_f * a - d));

    // Basis of ker alpha, g-orthonormal, deterministic order.
    let basis = kernel_basis(&alpha, &g);
    let k = basis.len();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for j in 0..k {
        for i in 0..k {
            // dalpha(e_i, e_j) coefficient of Y-component i in equation j.
            a[(j, i)] = (basis[i].transpose() * &omega * &basis[j])[(0, 0)];
        }
        b[j] = rhs_cov.dot(&basis[j]);
    }
    let y = solve_square(&a, &b, "gamma kernel system").map_err(|_| Error::Degeneracy {
        context: format!("dalpha degenerate on ker alpha at {x:?}"),
        residual: f64::INFINITY,
    })?;

    let f_val = f.value(x, t);
    let mut out = vec![0.0; dim];
    for i in 0..k {
        for d in 0..dim {
            out[d] += y[i] * basis[i][d];
        }
    }
    for d in 0..dim {
        out[d] += f_val * xi[d];
    }
    Ok(TangentVector {
        at: ChartPoint::new(x.to_vec()),
        components: out,
    })
}

/// `gamma(f)` into a buffer, preferring the chart's closed form (exact for
/// the built-ins) and falling back to the solver.
#[inline]
pub fn gamma_fast_into(
    chart: &ContactChart,
    f: &ScalarField,
    fd_steps: &[f64],
    grad_buf: &mut [f64],
    x: &[f64],
    t: f64,
    out: &mut [f64],
) -> Result<()> {
    let f_val = f.value(x, t);
    f.gradient_into(x, t, fd_steps, grad_buf);
    if chart.gamma_closed_form(x, f_val, grad_buf, out) {
        return Ok(());
    }
    let v = gamma(chart, f, x, t)?;
    out.copy_from_slice(&v.components);
    Ok(())
}

/// The Lie derivative `L_{gamma(f)} alpha` at `(x, t)` via Cartan's
/// formula `i_X dalpha + d(i_X alpha)` with `i_X alpha = f`.
pub fn lie_derivative_alpha(
    chart: &ContactChart,
    f: &ScalarField,
    x: &[f64],
    t: f64,
) -> Result<CovectorValue> {
    let v = gamma(chart, f, x, t)?;
    let omega = chart.dalpha(x);
    let dim = chart.dim;
    let mut grad = vec![0.0; dim];
    f.gradient_into(x, t, &chart.grad_fd_steps(), &mut grad);
    let mut comps = vec![0.0; dim];
    for j in 0..dim {
        let mut acc = grad[j];
        for i in 0..dim {
            acc += v.components[i] * omega[(i, j)];
        }
        comps[j] = acc;
    }
    Ok(CovectorValue {
        at: ChartPoint::new(x.to_vec()),
        components: comps,
    })
}

/// Sample `|xi . f|` on the inclusive grid (times 0, 1/2, 1 for
/// time-dependent fields); basic iff the maximum stays below `tol`.
pub fn is_basic(
    chart: &ContactChart,
    f: &ScalarField,
    res: &[usize],
    tol: f64,
) -> Result<(bool, f64)> {
    let pts = chart.osc_points(res);
    let times: &[f64] = if f.is_time_dependent() {
        &[0.0, 0.5, 1.0]
    } else {
        &[0.0]
    };
    let mut max_res: f64 = 0.0;
    for x in pts.iter() {
        for &t in times {
            let d = xi_derivative(chart, f, x, t)?.abs();
            if d > max_res {
                max_res = d;
            }
        }
    }
    Ok((max_res < tol, max_res))
}
