//! Scalar and set-valued Legendre-Fenchel conjugation, the derivative
//! identities of the conjugate, and the biconjugate check.
//!
//! Everything here assumes the scalarized energy is twice continuously
//! differentiable, strictly convex and superlinear, which is what the
//! built-in registry produces on the base. Under those assumptions the
//! supremum defining the conjugate is attained at the unique stationary
//! point of `p . x - L(x)`, so Newton on the first-order condition
//! replaces grid maximization (the grid route survives only as a test
//! oracle).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::cone::BaseSampling;
use crate::error::{Error, Result};
use crate::halfspace::HalfSpace;
use crate::numerics::{newton_root, MAX_NEWTON_ITERS};
use crate::problem::{ProblemInstance, ScalarizedProblem};

/// A converged conjugate evaluation.
#[derive(Debug, Clone)]
pub struct ConjugateResult {
    /// The conjugate value `L*_zeta(p)`.
    pub value: f64,
    /// The point attaining `sup_x (p . x - L_zeta(x))`.
    pub maximizer: DVector<f64>,
    /// Newton iterations spent on the first-order condition.
    pub newton_iters: usize,
}

/// Legendre-Fenchel conjugate of the scalarized energy at `p`.
///
/// Solves `DL_zeta(x) = p` by Newton from `x0 = p` and evaluates
/// `p . x* - L_zeta(x*)` at the root.
pub fn conjugate_scalar(
    sp: &ScalarizedProblem,
    p: &DVector<f64>,
    tol: f64,
) -> Result<ConjugateResult> {
    let energy = sp.energy();
    let out = newton_root(
        |x| energy.gradient(x) - p,
        |x| energy.hessian(x),
        p,
        tol,
        MAX_NEWTON_ITERS,
    )?;
    let value = p.dot(&out.root) - energy.value(&out.root);
    Ok(ConjugateResult {
        value,
        maximizer: out.root,
        newton_iters: out.iters,
    })
}

/// Set-valued conjugate in direction `zeta`: the half-space
/// `{z : zeta . z >= L*_zeta(p)}`. The parallel half-space structure makes
/// the set-valued conjugate a single scalar conjugate per direction.
///
/// `z_hat` fixes the normalization `zeta . z_hat = 1`; directions off the
/// base are rejected rather than silently rescaled.
pub fn conjugate_halfspace(
    prob: &ProblemInstance,
    zeta: &DVector<f64>,
    p: &DVector<f64>,
    z_hat: &DVector<f64>,
    newton_tol: f64,
) -> Result<HalfSpace> {
    if (zeta.dot(z_hat) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDirection(format!(
            "zeta is not on the base: zeta . z_hat = {}",
            zeta.dot(z_hat)
        )));
    }
    let sp = prob.scalarize(zeta)?;
    let conj = conjugate_scalar(&sp, p, newton_tol)?;
    HalfSpace::new(zeta.clone(), conj.value)
}

/// Gradient and Hessian of the conjugate at `p`:
/// `DL*_zeta(p) = (DL_zeta)^{-1}(p)` and
/// `D2L*_zeta(p) = [D2L_zeta(DL*_zeta(p))]^{-1}`.
pub fn conjugate_derivatives(
    sp: &ScalarizedProblem,
    p: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let grad = conjugate_scalar(sp, p, tol)?.maximizer;
    let hess = sp
        .energy()
        .hessian(&grad)
        .try_inverse()
        .ok_or(Error::SingularHessian)?;
    Ok((grad, hess))
}

/// Residuals of the conjugate identities at one sample point.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRecord {
    pub p: Vec<f64>,
    /// `|L*(p) - (p . DL*(p) - L(DL*(p)))|`.
    pub r1: f64,
    /// `||DL(DL*(p)) - p||`, the genuine Newton convergence residual.
    pub r2: f64,
    /// `||D2L*(p) D2L(DL*(p)) - I||` in the Frobenius norm.
    pub r3: f64,
}

/// Conjugate identity residuals over a sample of momenta.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugateIdentityReport {
    pub records: Vec<IdentityRecord>,
    pub holds: bool,
    pub tolerance: f64,
    pub max_r1: f64,
    pub max_r2: f64,
    pub max_r3: f64,
}

/// Evaluates the three conjugate identities at each sample.
///
/// The value and the gradient come from the same Newton fixed point, so
/// `r1` vanishes up to roundoff whenever the solve converged; the
/// convergence itself is what `r2` measures, and `r3` certifies the
/// Hessian inverse.
pub fn check_conjugate_identities(
    sp: &ScalarizedProblem,
    p_samples: &[DVector<f64>],
    newton_tol: f64,
    tolerance: f64,
) -> Result<ConjugateIdentityReport> {
    let energy = sp.energy();
    let mut records = Vec::with_capacity(p_samples.len());
    for p in p_samples {
        let conj = conjugate_scalar(sp, p, newton_tol)?;
        let (grad, hess) = conjugate_derivatives(sp, p, newton_tol)?;
        let r1 = (conj.value - (p.dot(&grad) - energy.value(&grad))).abs();
        let r2 = (energy.gradient(&grad) - p).norm();
        let r3 = (&hess * energy.hessian(&grad) - DMatrix::identity(p.len(), p.len())).norm();
        records.push(IdentityRecord {
            p: p.iter().copied().collect(),
            r1,
            r2,
            r3,
        });
    }
    let fold_max = |pick: fn(&IdentityRecord) -> f64| {
        records.iter().map(pick).fold(0.0, f64::max)
    };
    let (max_r1, max_r2, max_r3) = (fold_max(|r| r.r1), fold_max(|r| r.r2), fold_max(|r| r.r3));
    Ok(ConjugateIdentityReport {
        holds: max_r1 <= tolerance && max_r2 <= tolerance && max_r3 <= tolerance,
        records,
        tolerance,
        max_r1,
        max_r2,
        max_r3,
    })
}

/// One row of a biconjugate comparison.
#[derive(Debug, Clone, Serialize)]
pub struct BiconjugateRecord {
    pub zeta: Vec<f64>,
    pub p: Vec<f64>,
    /// `L**_zeta(p)` from the double Newton conjugation.
    pub biconjugate: f64,
    /// `L_zeta(p)` evaluated directly.
    pub direct: f64,
    pub error: f64,
}

/// Verdict of the biconjugate check over a base sampling.
#[derive(Debug, Clone, Serialize)]
pub struct BiconjugateReport {
    pub records: Vec<BiconjugateRecord>,
    pub holds: bool,
    pub tolerance: f64,
    pub max_error: f64,
}

/// `L**_zeta(p)` by conjugating the conjugate.
///
/// The outer stationarity condition `DL*(q) = p` is solved by a damped
/// Newton whose residual evaluations each run the inner inverse-gradient
/// solve; nothing is algebraically short-circuited, so the result really
/// exercises both conjugations. The outer Jacobian `D2L*(q)` is the
/// inverse of `D2L` at the inner root, which turns the Newton step into a
/// single matrix-vector product.
fn biconjugate_scalar(sp: &ScalarizedProblem, p: &DVector<f64>, newton_tol: f64) -> Result<f64> {
    let energy = sp.energy();
    let dl_star =
        |q: &DVector<f64>| -> Result<DVector<f64>> { Ok(conjugate_scalar(sp, q, newton_tol)?.maximizer) };
    let mut q = p.clone();
    let mut grad = dl_star(&q)?;
    let mut residual = &grad - p;
    for _ in 0..MAX_NEWTON_ITERS {
        if residual.norm() <= newton_tol {
            let inner = conjugate_scalar(sp, &q, newton_tol)?;
            return Ok(p.dot(&q) - inner.value);
        }
        let step = energy.hessian(&grad) * &residual;
        // Backtrack until the outer residual decreases; a failed inner
        // solve just means the trial step was too bold.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &q - &step * alpha;
            if let Ok(cand_grad) = dl_star(&candidate) {
                let cand_residual = &cand_grad - p;
                if cand_residual.norm() < residual.norm() {
                    q = candidate;
                    grad = cand_grad;
                    residual = cand_residual;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if residual.norm() <= newton_tol {
        let inner = conjugate_scalar(sp, &q, newton_tol)?;
        return Ok(p.dot(&q) - inner.value);
    }
    Err(Error::NoConvergence {
        iters: MAX_NEWTON_ITERS,
        residual: residual.norm(),
    })
}

/// Checks `L**_zeta(p) = L_zeta(p)` for every base direction and sample,
/// which is the sampled representation of the set-valued biconjugate
/// identity: per direction the biconjugate half-space offset must
/// reproduce the direct offset, hence the intersections coincide.
pub fn biconjugate_check(
    prob: &ProblemInstance,
    base: &BaseSampling,
    p_samples: &[DVector<f64>],
    newton_tol: f64,
    tolerance: f64,
) -> Result<BiconjugateReport> {
    if !prob.energy_is_convex() {
        return Err(Error::InvalidArgument(
            "biconjugation requires a convex energy".into(),
        ));
    }
    let per_direction: Vec<Vec<BiconjugateRecord>> = base
        .directions()
        .par_iter()
        .map(|zeta| {
            let sp = prob.scalarize(zeta).map_err(|e| e.at_direction(zeta))?;
            p_samples
                .iter()
                .map(|p| {
                    let biconjugate =
                        biconjugate_scalar(&sp, p, newton_tol).map_err(|e| e.at_direction(zeta))?;
                    let direct = sp.energy().value(p);
                    Ok(BiconjugateRecord {
                        zeta: zeta.iter().copied().collect(),
                        p: p.iter().copied().collect(),
                        biconjugate,
                        direct,
                        error: (biconjugate - direct).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<BiconjugateRecord> = per_direction.into_iter().flatten().collect();
    let max_error = records.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(BiconjugateReport {
        holds: max_error <= tolerance,
        records,
        tolerance,
        max_error,
    })
}
