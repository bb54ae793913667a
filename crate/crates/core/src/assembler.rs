//! Assembly of the set-valued solution from its scalarizations, the
//! support-gap hypothesis check, the pairwise minimality criterion, and
//! finite-difference PDE residuals.
//!
//! One scalar solution per base direction pins one half-space; their
//! intersection is the candidate set-valued solution. The candidate is a
//! genuine solution exactly when every constraint is active, which is
//! what the support-gap report decides.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::{characteristic_closed_form, invert_flow, scalar_solution};
use crate::cone::BaseSampling;
use crate::error::{Error, Result};
use crate::halfspace::{support_of_intersection, HalfSpace, SupportedSet};
use crate::problem::{ProblemInstance, ScalarizedProblem};

/// One row of a support-gap report.
#[derive(Debug, Clone, Serialize)]
pub struct GapRecord {
    /// The sampled direction.
    pub zeta: Vec<f64>,
    /// Scalar solution at this direction (the constraint offset).
    pub constraint: f64,
    /// Support of the assembled intersection at this direction.
    pub support: f64,
    /// `support - constraint`; zero exactly when the constraint is active.
    pub gap: f64,
}

/// Verdict on whether every sampled half-space actively supports the
/// assembled intersection.
#[derive(Debug, Clone, Serialize)]
pub struct SupportGapReport {
    pub records: Vec<GapRecord>,
    pub holds: bool,
    pub tolerance: f64,
    pub max_gap: f64,
}

/// Verdict of the pairwise minimality criterion, with the worst pair.
#[derive(Debug, Clone)]
pub struct PairwiseReport {
    pub holds: bool,
    pub min_slack: f64,
    /// Pair `(zeta, xi)` attaining the minimal slack.
    pub worst_pair: Option<(DVector<f64>, DVector<f64>)>,
    pub tolerance: f64,
}

/// The half-space carried by one scalarization: normal `zeta`, offset
/// `u_zeta(t, x)`.
pub fn solution_halfspace(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<HalfSpace> {
    HalfSpace::new(sp.zeta().clone(), scalar_solution(sp, t, x, newton_tol)?)
}

/// The transported half-space before flow inversion: offset
/// `U0(x) + t(-H(p) + DH(p) . p)` at `p = DU0(x)`. Evaluating it at the
/// characteristic foot point reproduces `solution_halfspace`.
pub fn transported_halfspace(sp: &ScalarizedProblem, t: f64, x: &DVector<f64>) -> Result<HalfSpace> {
    HalfSpace::new(
        sp.zeta().clone(),
        characteristic_closed_form(sp, t, x)?.value,
    )
}

/// Intersection of the per-direction half-spaces over the base sampling.
pub fn assemble_solution(
    prob: &ProblemInstance,
    base: &BaseSampling,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<SupportedSet> {
    let offsets: Vec<f64> = base
        .directions()
        .par_iter()
        .map(|zeta| {
            let sp = prob.scalarize(zeta).map_err(|e| e.at_direction(zeta))?;
            scalar_solution(&sp, t, x, newton_tol).map_err(|e| e.at_direction(zeta))
        })
        .collect::<Result<Vec<_>>>()?;
    SupportedSet::new(base.clone(), offsets)
}

/// The boundary point of the scalarized solution in direction `zeta`:
/// the vector value transported along the characteristic,
/// `U0(Z) + t(-H0(q) + DH0(q) q)` with `q = DU0_zeta(Z)`. Its dot product
/// with `zeta` is the scalar solution.
pub fn solution_support_point(
    prob: &ProblemInstance,
    zeta: &DVector<f64>,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<DVector<f64>> {
    let sp = prob.scalarize(zeta)?;
    let z = invert_flow(&sp, t, x, newton_tol)?;
    let q = sp.initial_gradient(&z);
    let jac = prob.vector_hamiltonian_jacobian(&q);
    Ok(prob.vector_initial(&z) + (&jac * &q - prob.vector_hamiltonian(&q)) * t)
}

/// Support points for every direction of the base, in base order.
pub fn solution_curve(
    prob: &ProblemInstance,
    base: &BaseSampling,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    base.directions()
        .par_iter()
        .map(|zeta| {
            let point = solution_support_point(prob, zeta, t, x, newton_tol)
                .map_err(|e| e.at_direction(zeta))?;
            Ok((zeta.clone(), point))
        })
        .collect()
}

/// Checks whether every constraint of the assembled set is active: the
/// support of the intersection at each sampled direction must not exceed
/// the direction's own offset. Gaps can never be negative beyond
/// roundoff.
pub fn check_support_gaps(set: &SupportedSet, tolerance: f64) -> SupportGapReport {
    let records: Vec<GapRecord> = set
        .base()
        .directions()
        .iter()
        .zip(set.offsets())
        .map(|(zeta, &constraint)| {
            let support = support_of_intersection(set, zeta);
            GapRecord {
                zeta: zeta.iter().copied().collect(),
                constraint,
                support,
                gap: support - constraint,
            }
        })
        .collect();
    let max_gap = records.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    SupportGapReport {
        holds: max_gap <= tolerance,
        records,
        tolerance,
        max_gap,
    }
}

/// Pairwise minimality criterion over the sampled base: for every ordered
/// pair of directions, the value of the `zeta`-scalarized transport along
/// the `xi`-characteristic must not undercut the `zeta`-solution itself.
/// Returns the minimal slack and its attaining pair; a negative slack
/// beyond tolerance certifies that the active-support hypothesis fails.
pub fn check_pairwise_minimality(
    prob: &ProblemInstance,
    base: &BaseSampling,
    t: f64,
    x: &DVector<f64>,
    newton_tol: f64,
    tolerance: f64,
) -> Result<PairwiseReport> {
    let points: Vec<DVector<f64>> = base
        .directions()
        .par_iter()
        .map(|zeta| {
            solution_support_point(prob, zeta, t, x, newton_tol).map_err(|e| e.at_direction(zeta))
        })
        .collect::<Result<Vec<_>>>()?;
    let dirs = base.directions();
    let mut min_slack = f64::INFINITY;
    let mut worst = None;
    for (i, zeta) in dirs.iter().enumerate() {
        let own = zeta.dot(&points[i]);
        for (j, xi) in dirs.iter().enumerate() {
            let slack = zeta.dot(&points[j]) - own;
            if slack < min_slack {
                min_slack = slack;
                worst = Some((zeta.clone(), xi.clone()));
            }
        }
    }
    Ok(PairwiseReport {
        holds: min_slack >= -tolerance,
        min_slack,
        worst_pair: worst,
        tolerance,
    })
}

/// Set-valued time derivative as a half-space: normal `zeta`, offset the
/// central difference quotient of the scalar solution in `t`.
pub fn time_set_derivative(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    h: f64,
    newton_tol: f64,
) -> Result<HalfSpace> {
    check_fd_step(t, h)?;
    let forward = scalar_solution(sp, t + h, x, newton_tol)?;
    let backward = scalar_solution(sp, t - h, x, newton_tol)?;
    HalfSpace::new(sp.zeta().clone(), (forward - backward) / (2.0 * h))
}

/// Set-valued space derivative along `q` as a half-space: normal `zeta`,
/// offset the central difference quotient of the scalar solution along
/// the ray `x + s q`.
pub fn space_set_derivative(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    q: &DVector<f64>,
    h: f64,
    newton_tol: f64,
) -> Result<HalfSpace> {
    check_positive_step(h)?;
    let forward = scalar_solution(sp, t, &(x + q * h), newton_tol)?;
    let backward = scalar_solution(sp, t, &(x - q * h), newton_tol)?;
    HalfSpace::new(sp.zeta().clone(), (forward - backward) / (2.0 * h))
}

fn check_positive_step(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    Ok(())
}

fn check_fd_step(t: f64, h: f64) -> Result<()> {
    check_positive_step(h)?;
    if t - h < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "central difference at t = {t} with step {h} leaves the time domain"
        )));
    }
    Ok(())
}

/// Finite-difference residual of the scalar Hamilton-Jacobi equation,
/// `|du/dt + H(Du)|`, with central differences of step `h` for both the
/// time and the space derivatives. Second-order accurate, so the residual
/// of an exact solution scales like `h^2`.
pub fn hj_residual(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    h: f64,
    newton_tol: f64,
) -> Result<f64> {
    let dt = time_set_derivative(sp, t, x, h, newton_tol)?.offset();
    let n = x.len();
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        grad[i] = space_set_derivative(sp, t, x, &e, h, newton_tol)?.offset();
    }
    Ok((dt + sp.hamiltonian(&grad)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{make_base, Cone};
    use crate::problem::BuiltinParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn problem(name: &str) -> ProblemInstance {
        ProblemInstance::builtin(name, BuiltinParams::default()).unwrap()
    }

    fn base(m: usize) -> BaseSampling {
        make_base(&Cone::orthant(2), &vec2(1.0, 1.0), m).unwrap()
    }

    #[test]
    fn assembly_of_the_linear_example_at_three_directions() {
        let set = assemble_solution(&problem("ex1"), &base(3), 1.0, &vec2(1.0, 2.0), 1e-12).unwrap();
        let offsets = set.offsets();
        assert_relative_eq!(offsets[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(offsets[1], -0.65625, epsilon = 1e-12);
        assert_relative_eq!(offsets[2], -2.25, epsilon = 1e-12);
    }

    #[test]
    fn assembly_of_the_quadratic_example_at_three_directions() {
        let set = assemble_solution(&problem("ex2"), &base(3), 1.0, &vec2(1.0, 0.0), 1e-12).unwrap();
        let offsets = set.offsets();
        assert_relative_eq!(offsets[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(offsets[1], -0.1875, epsilon = 1e-12);
        assert_relative_eq!(offsets[2], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn assembly_at_time_zero_is_the_scalarized_initial_set() {
        let prob = problem("ex2");
        let b = base(5);
        let x = vec2(0.3, -1.2);
        let set = assemble_solution(&prob, &b, 0.0, &x, 1e-12).unwrap();
        for (zeta, offset) in b.directions().iter().zip(set.offsets()) {
            assert_relative_eq!(*offset, zeta.dot(&prob.vector_initial(&x)), epsilon = 1e-14);
        }
    }

    #[test]
    fn halfspace_offsets_match_the_scalar_solutions() {
        let prob = problem("ex1");
        let sp = prob.scalarize(&vec2(0.0, 1.0)).unwrap();
        let h = solution_halfspace(&sp, 1.0, &vec2(1.0, 2.0), 1e-12).unwrap();
        assert_relative_eq!(h.offset(), -2.25, epsilon = 1e-12);
    }

    #[test]
    fn transported_halfspace_at_the_foot_point_recovers_the_solution() {
        for (name, z1) in [("ex1", 0.5), ("ex2", 0.25), ("concave-init", 0.75)] {
            let prob = problem(name);
            let sp = prob.scalarize(&vec2(z1, 1.0 - z1)).unwrap();
            let (t, x) = (0.6, vec2(0.8, -0.9));
            let z = invert_flow(&sp, t, &x, 1e-12).unwrap();
            let via_transport = transported_halfspace(&sp, t, &z).unwrap();
            let direct = solution_halfspace(&sp, t, &x, 1e-12).unwrap();
            assert_relative_eq!(via_transport.offset(), direct.offset(), epsilon = 1e-12);
        }
    }

    #[test]
    fn support_points_reproduce_the_closed_form_curve() {
        let prob = problem("ex1");
        let x = vec2(1.0, 2.0);
        let spots = [
            (1.0, vec2(0.5, -1.25)),
            (0.0, vec2(1.5, -2.25)),
            (0.5, vec2(0.875, -2.1875)),
        ];
        for (z1, expected) in spots {
            let gamma =
                solution_support_point(&prob, &vec2(z1, 1.0 - z1), 1.0, &x, 1e-12).unwrap();
            assert_abs_diff_eq!(gamma, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn support_point_dotted_with_its_direction_is_the_scalar_solution() {
        let prob = problem("ex2");
        let zeta = vec2(0.5, 0.5);
        let x = vec2(1.0, 0.0);
        let gamma = solution_support_point(&prob, &zeta, 1.0, &x, 1e-12).unwrap();
        assert_abs_diff_eq!(gamma, vec2(0.0625, -0.4375), epsilon = 1e-12);
        assert_relative_eq!(zeta.dot(&gamma), -0.1875, epsilon = 1e-12);
    }

    #[test]
    fn support_gaps_vanish_when_the_hypothesis_holds() {
        let set = assemble_solution(&problem("ex1"), &base(3), 1.0, &vec2(1.0, 2.0), 1e-12).unwrap();
        let report = check_support_gaps(&set, 1e-6);
        assert!(report.holds);
        assert!(report.max_gap.abs() <= 1e-12);
        for r in &report.records {
            assert!(r.gap >= -1e-12);
        }
    }

    #[test]
    fn support_gap_detects_the_failing_example() {
        let set = assemble_solution(&problem("ex2"), &base(3), 1.0, &vec2(1.0, 0.0), 1e-12).unwrap();
        let report = check_support_gaps(&set, 1e-6);
        assert!(!report.holds);
        // The middle direction is inactive: the two extreme constraints
        // support the intersection strictly above it.
        assert_relative_eq!(report.records[1].gap, 0.0625, epsilon = 1e-12);
        assert_relative_eq!(report.records[1].support, -0.125, epsilon = 1e-12);
        assert_relative_eq!(report.max_gap, 0.0625, epsilon = 1e-12);
        assert!(report.records[0].gap.abs() <= 1e-12);
        assert!(report.records[2].gap.abs() <= 1e-12);
    }

    #[test]
    fn single_constraint_always_holds() {
        let cone = Cone::orthant(2);
        let b = make_base(&cone, &vec2(1.0, 1.0), 2).unwrap();
        let set = SupportedSet::new(b, vec![1.5, f64::NEG_INFINITY]).unwrap();
        // Only the first constraint is real; its own support is itself.
        let report = check_support_gaps(&set, 1e-6);
        assert!(report.records[0].gap.abs() <= 1e-12);
    }

    // The pairwise criterion is sufficient but not necessary: on the linear
    // example the support gaps all vanish (the intersection really does attain
    // every scalar value), yet the curve point for zeta = (1/2, 1/2) lies
    // strictly outside the half-space of zeta = (1/4, 3/4).  The slack there is
    // exactly -21/1024, reproducible by hand from the closed-form curve.
    #[test]
    fn pairwise_minimality_is_stricter_than_support_gaps_on_the_linear_example() {
        let report = check_pairwise_minimality(
            &problem("ex1"),
            &base(5),
            1.0,
            &vec2(1.0, 2.0),
            1e-12,
            1e-9,
        )
        .unwrap();
        assert!(!report.holds);
        assert_relative_eq!(report.min_slack, -21.0 / 1024.0, epsilon = 1e-12);
        let (zeta, xi) = report.worst_pair.unwrap();
        assert_abs_diff_eq!(zeta, vec2(0.25, 0.75), epsilon = 1e-15);
        assert_abs_diff_eq!(xi, vec2(0.5, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn pairwise_minimality_fails_on_the_quadratic_example() {
        let report = check_pairwise_minimality(
            &problem("ex2"),
            &base(3),
            1.0,
            &vec2(1.0, 0.0),
            1e-12,
            1e-9,
        )
        .unwrap();
        assert!(!report.holds);
        assert_relative_eq!(report.min_slack, -0.25, epsilon = 1e-12);
        let (zeta, xi) = report.worst_pair.unwrap();
        assert_abs_diff_eq!(zeta, vec2(1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(xi, vec2(0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn diagonal_pairs_have_exactly_zero_slack() {
        let prob = problem("ex2");
        let b = base(3);
        let x = vec2(1.0, 0.0);
        let points: Vec<DVector<f64>> = b
            .directions()
            .iter()
            .map(|z| solution_support_point(&prob, z, 1.0, &x, 1e-12).unwrap())
            .collect();
        for (zeta, point) in b.directions().iter().zip(&points) {
            assert_eq!(zeta.dot(point) - zeta.dot(point), 0.0);
        }
    }

    #[test]
    fn derivative_halfspaces_on_the_linear_example() {
        let prob = problem("ex1");
        let sp = prob.scalarize(&vec2(1.0, 0.0)).unwrap();
        let (t, x) = (1.0, vec2(1.0, 2.0));
        let dt = time_set_derivative(&sp, t, &x, 1e-4, 1e-12).unwrap();
        assert_relative_eq!(dt.offset(), -0.5, epsilon = 1e-6);
        let dx = space_set_derivative(&sp, t, &x, &vec2(1.0, 0.0), 1e-4, 1e-12).unwrap();
        assert_relative_eq!(dx.offset(), 1.0, epsilon = 1e-6);
        assert!(time_set_derivative(&sp, 1e-6, &x, 1e-4, 1e-12).is_err());
    }

    #[test]
    fn hj_residual_is_small_on_exact_solutions() {
        let prob = problem("ex1");
        let sp = prob.scalarize(&vec2(1.0, 0.0)).unwrap();
        let r = hj_residual(&sp, 1.0, &vec2(1.0, 2.0), 1e-4, 1e-12).unwrap();
        assert!(r <= 1e-7, "residual {r}");

        let prob = problem("ex2");
        let sp = prob.scalarize(&vec2(0.0, 1.0)).unwrap();
        let r = hj_residual(&sp, 0.5, &vec2(2.0, 1.0), 1e-4, 1e-12).unwrap();
        assert!(r <= 1e-7, "residual {r}");
    }
}
