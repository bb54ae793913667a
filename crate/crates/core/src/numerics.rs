//! Small shared numerical routines: Newton root finding, golden-section
//! minimization, composite Simpson quadrature and symmetric operator norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default residual tolerance for Newton solves.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
/// Default iteration cap for Newton solves.
pub const MAX_NEWTON_ITERS: usize = 200;

/// Outcome of a converged Newton iteration.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub root: DVector<f64>,
    pub iters: usize,
}

/// Plain Newton iteration for `f(x) = 0` with an explicit Jacobian.
///
/// Convergence is declared when `||f(x)|| <= tol`, checked before each
/// step, so a start point that already solves the system returns with
/// zero iterations and without touching the Jacobian.
pub fn newton_root(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64>,
    x0: &DVector<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<NewtonOutcome> {
    let mut x = x0.clone();
    let mut residual = f(&x);
    for iters in 0..=max_iters {
        let norm = residual.norm();
        if norm <= tol {
            return Ok(NewtonOutcome { root: x, iters });
        }
        if iters == max_iters {
            break;
        }
        let j = jacobian(&x);
        let step = j
            .lu()
            .solve(&residual)
            .ok_or(Error::SingularHessian)?;
        x -= step;
        residual = f(&x);
    }
    Err(Error::NoConvergence {
        iters: max_iters,
        residual: residual.norm(),
    })
}

/// Golden-section minimization of a scalar function on `[a, b]`.
///
/// Returns the abscissa of the minimum to within `tol` together with the
/// function value there. The function is assumed unimodal on the bracket;
/// on flat stretches any minimizer is acceptable.
pub fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let arg = 0.5 * (a + b);
    (arg, f(arg))
}

/// Composite Simpson rule over `[0, length]` with `steps` subintervals.
///
/// An odd `steps` is rounded up to the next even count, which the rule
/// requires. Exact for polynomial integrands up to degree three.
pub fn simpson(f: impl Fn(f64) -> f64, length: f64, steps: usize) -> f64 {
    let n = if steps % 2 == 0 { steps.max(2) } else { steps + 1 };
    let h = length / n as f64;
    let mut acc = f(0.0) + f(length);
    for k in 1..n {
        let coef = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += coef * f(k as f64 * h);
    }
    acc * h / 3.0
}

/// Spectral norm of a symmetric matrix.
///
/// Diagonal matrices are handled exactly (the constant Hessians of the
/// built-in problems fall in this path); otherwise the norm comes from a
/// symmetric eigendecomposition.
pub fn symmetric_operator_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let off_diagonal_zero = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if off_diagonal_zero {
        return (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}
