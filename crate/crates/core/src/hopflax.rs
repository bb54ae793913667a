//! Hopf-Lax value function for the Lagrangian-given problem: per-direction
//! minimizers, the scalarization solution built from linear arcs, the cost
//! functional, and the link back to characteristic curves.
//!
//! For each base direction the scalar Hopf-Lax infimum over anchor points
//! is attained at the stationary point of `w -> t L((x-w)/t) + U0(w)`, and
//! the arc from that anchor to `x` is a straight line. Collecting one arc
//! per direction gives the scalarization solution; its values are the
//! offsets of the set-valued solution.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::cone::BaseSampling;
use crate::error::{Error, Result};
use crate::halfspace::SupportedSet;
use crate::numerics::{golden_section_min, simpson, MAX_NEWTON_ITERS};
use crate::problem::{ProblemInstance, ProblemKind, ScalarizedProblem};

/// A linear admissible arc running from `start` at time zero to `end` at
/// time `t_end`: `y(s) = start + (s / t_end)(end - start)`. These are the
/// only arcs the scalarization solution needs.
#[derive(Debug, Clone)]
pub struct Arc {
    t_end: f64,
    start: DVector<f64>,
    end: DVector<f64>,
}

impl Arc {
    pub fn new(start: DVector<f64>, end: DVector<f64>, t_end: f64) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::DimensionMismatch {
                what: "arc endpoints",
                expected: start.len(),
                got: end.len(),
            });
        }
        if !(t_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "arc needs a positive end time, got {t_end}"
            )));
        }
        Ok(Arc { t_end, start, end })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    pub fn end(&self) -> &DVector<f64> {
        &self.end
    }

    /// Position at time `s`; the endpoint is returned exactly at `s = t_end`.
    pub fn position(&self, s: f64) -> DVector<f64> {
        if s == self.t_end {
            return self.end.clone();
        }
        &self.start + (&self.end - &self.start) * (s / self.t_end)
    }

    /// The constant velocity `(end - start) / t_end`.
    pub fn velocity(&self) -> DVector<f64> {
        (&self.end - &self.start) / self.t_end
    }
}

/// One direction of a scalarization solution.
#[derive(Debug, Clone)]
pub struct DirectionRecord {
    pub zeta: DVector<f64>,
    /// The anchor point `w` minimizing the scalar Hopf-Lax functional.
    pub minimizer: DVector<f64>,
    pub arc: Arc,
    /// `t L_zeta((x - w) / t) + U0_zeta(w)`.
    pub value: f64,
    /// Norm of the first-order condition at the returned minimizer.
    pub foc_residual: f64,
}

/// The sampled scalarization solution: one linear arc per direction and
/// the assembled set-valued value.
#[derive(Debug, Clone)]
pub struct ScalarizationSolution {
    pub records: Vec<DirectionRecord>,
    pub value: SupportedSet,
}

fn require_lagrangian(prob: &ProblemInstance) -> Result<()> {
    match prob.kind() {
        ProblemKind::LagrangianGiven => Ok(()),
        other => Err(Error::WrongProblemKind {
            needed: "lagrangian-given",
            got: other.as_str(),
        }),
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Err(Error::InvalidArgument(
            "the Hopf-Lax minimization needs t > 0".into(),
        ));
    }
    Ok(())
}

/// Newton solve of the stationarity condition
/// `-DL_zeta((x - w) / t) + DU0_zeta(w) = 0`, with a golden-section line
/// search along the Newton direction when the full step fails to reduce
/// the gradient. Returns the minimizer and its first-order residual.
fn minimize_direction(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    let lagrangian = sp.energy();
    let objective = |w: &DVector<f64>| {
        t * lagrangian.value(&((x - w) / t)) + sp.initial(w)
    };
    let gradient = |w: &DVector<f64>| {
        sp.initial_gradient(w) - lagrangian.gradient(&((x - w) / t))
    };
    let mut w = x.clone();
    let mut grad = gradient(&w);
    for _ in 0..MAX_NEWTON_ITERS {
        let norm = grad.norm();
        if norm <= tol {
            return Ok((w, norm));
        }
        let v = (x - &w) / t;
        let jac = lagrangian.hessian(&v) / t + sp.initial_hessian(&w);
        let step = jac.lu().solve(&grad).ok_or(Error::SingularHessian)?;
        let full = &w - &step;
        let full_grad = gradient(&full);
        if full_grad.norm() < norm {
            w = full;
            grad = full_grad;
            continue;
        }
        let (alpha, _) = golden_section_min(
            |a| objective(&(&w - &step * a)),
            0.0,
            1.0,
            1e-12,
        );
        let damped = &w - &step * alpha;
        let damped_grad = gradient(&damped);
        if damped_grad.norm() >= norm {
            return Err(Error::NoConvergence {
                iters: MAX_NEWTON_ITERS,
                residual: norm,
            });
        }
        w = damped;
        grad = damped_grad;
    }
    Err(Error::NoConvergence {
        iters: MAX_NEWTON_ITERS,
        residual: grad.norm(),
    })
}

/// The anchor point `w_zeta` of the scalar Hopf-Lax infimum in direction
/// `zeta`.
pub fn zeta_minimizer(
    prob: &ProblemInstance,
    zeta: &DVector<f64>,
    t: f64,
    x: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    require_lagrangian(prob)?;
    check_time(t)?;
    let sp = prob.scalarize(zeta)?;
    Ok(minimize_direction(&sp, t, x, tol)?.0)
}

fn solve_directions(
    prob: &ProblemInstance,
    base: &BaseSampling,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<Vec<DirectionRecord>> {
    require_lagrangian(prob)?;
    check_time(t)?;
    base.directions()
        .par_iter()
        .map(|zeta| {
            let sp = prob.scalarize(zeta).map_err(|e| e.at_direction(zeta))?;
            let (w, foc_residual) =
                minimize_direction(&sp, t, x, newton_tol).map_err(|e| e.at_direction(zeta))?;
            let value = t * sp.energy().value(&((x - &w) / t)) + sp.initial(&w);
            let arc = Arc::new(w.clone(), x.clone(), t)?;
            Ok(DirectionRecord {
                zeta: zeta.clone(),
                minimizer: w,
                arc,
                value,
                foc_residual,
            })
        })
        .collect()
}

/// The Hopf-Lax value as a supported set: one scalar infimum per base
/// direction.
pub fn hopflax_value(
    prob: &ProblemInstance,
    base: &BaseSampling,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<SupportedSet> {
    let records = solve_directions(prob, base, t, x, newton_tol)?;
    SupportedSet::new(base.clone(), records.into_iter().map(|r| r.value).collect())
}

/// The scalarization solution: the per-direction arcs together with the
/// assembled value.
pub fn scalarization_solution(
    prob: &ProblemInstance,
    base: &BaseSampling,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<ScalarizationSolution> {
    let records = solve_directions(prob, base, t, x, newton_tol)?;
    let value = SupportedSet::new(base.clone(), records.iter().map(|r| r.value).collect())?;
    Ok(ScalarizationSolution { records, value })
}

/// Scalarized action of an arc: the Simpson quadrature of
/// `s -> L_zeta(dy/ds)` over `[0, t_end]` plus the initial cost
/// `U0_zeta(y(0))`. Exact for the constant integrands of linear arcs.
pub fn cost_functional(
    prob: &ProblemInstance,
    arc: &Arc,
    zeta: &DVector<f64>,
    quad_steps: usize,
) -> Result<f64> {
    require_lagrangian(prob)?;
    let sp = prob.scalarize(zeta)?;
    let velocity = arc.velocity();
    let running = simpson(
        |_s| sp.energy().value(&velocity),
        arc.t_end(),
        quad_steps,
    );
    Ok(running + sp.initial(arc.start()))
}

/// Maximal deviation over `s_samples` between the Hopf-Lax arc `y_zeta`
/// and the characteristic curve `X_zeta(s, w_zeta)` of the conjugate
/// Hamiltonian. Both are lines through `w_zeta`; the deviation measures
/// how well the arc velocity matches `DH_zeta(DU0_zeta(w_zeta))`.
pub fn verify_characteristic_link(
    prob: &ProblemInstance,
    zeta: &DVector<f64>,
    t: f64,
    x: &DVector<f64>,
    s_samples: &[f64],
    newton_tol: f64,
) -> Result<f64> {
    require_lagrangian(prob)?;
    check_time(t)?;
    let sp = prob.scalarize(zeta)?;
    let (w, _) = minimize_direction(&sp, t, x, newton_tol)?;
    let arc = Arc::new(w.clone(), x.clone(), t)?;
    let momentum = sp.initial_gradient(&w);
    let characteristic_velocity = sp.hamiltonian_gradient(&momentum);
    let mut deviation = 0.0_f64;
    for &s in s_samples {
        let on_characteristic = &w + &characteristic_velocity * s;
        deviation = deviation.max((arc.position(s) - on_characteristic).norm());
    }
    Ok(deviation)
}
