//! The scalarized characteristic system and its horizon.
//!
//! For a state-independent Hamiltonian the characteristic ODEs decouple:
//! the momentum is constant, positions move along straight lines, and the
//! value is transported affinely. Everything here works with one fixed
//! scalarization; assembling directions back into sets happens one level
//! up.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cone::BaseSampling;
use crate::error::{Error, Result};
use crate::numerics::{golden_section_min, newton_root, symmetric_operator_norm, MAX_NEWTON_ITERS};
use crate::problem::{ProblemInstance, ScalarizedProblem};

/// Characteristic state at one time: position, transported value, and the
/// (constant) momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicState {
    pub position: DVector<f64>,
    pub value: f64,
    pub momentum: DVector<f64>,
    pub time: f64,
}

/// Result of a horizon scan for one scalarization: the first time the
/// characteristic Jacobian loses invertibility on the grid, with the grid
/// parameters recorded since the scan only relaxes the pointwise
/// condition to finitely many states.
#[derive(Debug, Clone)]
pub struct HorizonReport {
    /// First singular time found, `+inf` when none was detected.
    pub t_star: f64,
    /// Grid point at which invertibility fails first.
    pub witness_x: Option<DVector<f64>>,
    pub scanned_points: usize,
    pub t_max: f64,
    pub t_steps: usize,
}

/// Horizon scan over a whole base sampling: the minimum of the
/// per-direction horizons, an estimate from finitely many directions.
#[derive(Debug, Clone)]
pub struct BaseHorizonReport {
    pub t_star: f64,
    pub witness_zeta: Option<DVector<f64>>,
    pub witness_x: Option<DVector<f64>>,
    /// Per-direction horizons, aligned with the base directions.
    pub per_direction: Vec<f64>,
    pub scanned_points: usize,
    pub t_max: f64,
    pub t_steps: usize,
}

/// Closed-form characteristic through `x`: position `x + t DH(p)`, value
/// `U0(x) + t(-H(p) + DH(p) . p)`, momentum `p = DU0(x)`.
pub fn characteristic_closed_form(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
) -> Result<CharacteristicState> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let p = sp.initial_gradient(x);
    let dh = sp.hamiltonian_gradient(&p);
    Ok(CharacteristicState {
        position: x + dh * t,
        value: sp.initial(x) + t * (-sp.hamiltonian(&p) + sp.hamiltonian_gradient(&p).dot(&p)),
        momentum: p,
        time: t,
    })
}

/// Fixed-step fourth-order Runge-Kutta integration of the characteristic
/// system, returning the state after each step. An independent oracle for
/// the closed form: the right-hand sides are constant along trajectories,
/// so both agree to roundoff.
pub fn characteristic_rk4_trajectory(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    steps: usize,
) -> Result<Vec<CharacteristicState>> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("RK4 needs steps >= 1".into()));
    }
    let n = x.len();
    // Stacked state [X; V; P].
    let mut state = DVector::zeros(2 * n + 1);
    state.rows_mut(0, n).copy_from(x);
    state[n] = sp.initial(x);
    state.rows_mut(n + 1, n).copy_from(&sp.initial_gradient(x));

    let rhs = |s: &DVector<f64>| -> DVector<f64> {
        let p = DVector::from(s.rows(n + 1, n));
        let dh = sp.hamiltonian_gradient(&p);
        let mut out = DVector::zeros(2 * n + 1);
        out.rows_mut(0, n).copy_from(&dh);
        out[n] = -sp.hamiltonian(&p) + dh.dot(&p);
        out
    };

    let h = t / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let to_state = |s: &DVector<f64>, time: f64| CharacteristicState {
        position: DVector::from(s.rows(0, n)),
        value: s[n],
        momentum: DVector::from(s.rows(n + 1, n)),
        time,
    };
    samples.push(to_state(&state, 0.0));
    for k in 0..steps {
        let k1 = rhs(&state);
        let k2 = rhs(&(&state + &k1 * (0.5 * h)));
        let k3 = rhs(&(&state + &k2 * (0.5 * h)));
        let k4 = rhs(&(&state + &k3 * h));
        state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        samples.push(to_state(&state, h * (k + 1) as f64));
    }
    Ok(samples)
}

/// Final state of the RK4 integration.
pub fn characteristic_rk4(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    steps: usize,
) -> Result<CharacteristicState> {
    Ok(characteristic_rk4_trajectory(sp, t, x, steps)?
        .pop()
        .expect("trajectory is never empty"))
}

const CONTINUATION_DEPTH: usize = 8;

/// Inverts the characteristic flow: finds `w` with `X(t, w) = x` by
/// Newton on `F(w) = w + t DH(DU0(w)) - x`, Jacobian
/// `I + t D2H(DU0(w)) D2U0(w)`, started at `w = x`. When the plain
/// iteration fails the time is halved and the half-time solution warm
/// starts the full solve (the flow is a perturbation of the identity for
/// small times). A Jacobian that stays singular signals that `t` has
/// crossed the horizon.
pub fn invert_flow(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "flow inversion tolerance must be positive, got {tol}"
        )));
    }
    invert_flow_from(sp, t, x, tol, x.clone(), CONTINUATION_DEPTH)
}

fn invert_flow_from(
    sp: &ScalarizedProblem,
    t: f64,
    x: &DVector<f64>,
    tol: f64,
    start: DVector<f64>,
    budget: usize,
) -> Result<DVector<f64>> {
    let attempt = newton_root(
        |w| w + sp.hamiltonian_gradient(&sp.initial_gradient(w)) * t - x,
        |w| {
            let p = sp.initial_gradient(w);
            DMatrix::identity(x.len(), x.len())
                + sp.hamiltonian_hessian(&p) * sp.initial_hessian(w) * t
        },
        &start,
        tol,
        MAX_NEWTON_ITERS,
    );
    match attempt {
        Ok(outcome) => Ok(outcome.root),
        Err(err) if budget > 0 => {
            let warm = invert_flow_from(sp, 0.5 * t, x, tol, x.clone(), budget - 1)?;
            invert_flow_from(sp, t, x, tol, warm, 0).map_err(|_| classify(err, t))
        }
        Err(err) => Err(classify(err, t)),
    }
}

fn classify(err: Error, t: f64) -> Error {
    match err {
        Error::SingularHessian => Error::HorizonExceeded { t },
        other => other,
    }
}

/// The scalar solution `u(t, x)`: the transported value read off at the
/// characteristic foot point `Z(t, x)`.
pub fn scalar_solution(sp: &ScalarizedProblem, t: f64, x: &DVector<f64>, tol: f64) -> Result<f64> {
    let w = invert_flow(sp, t, x, tol)?;
    Ok(characteristic_closed_form(sp, t, &w)?.value)
}

/// Deterministic hypercube grid with `points_per_axis` samples per axis.
pub fn hypercube_grid(n: usize, lo: f64, hi: f64, points_per_axis: usize) -> Vec<DVector<f64>> {
    assert!(points_per_axis >= 1 && hi >= lo && n >= 1);
    let coords: Vec<f64> = if points_per_axis == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..points_per_axis)
            .map(|i| lo + (hi - lo) * i as f64 / (points_per_axis - 1) as f64)
            .collect()
    };
    let mut grid = Vec::with_capacity(coords.len().pow(n as u32));
    let mut index = vec![0usize; n];
    loop {
        grid.push(DVector::from_iterator(n, index.iter().map(|&i| coords[i])));
        let mut axis = 0;
        loop {
            if axis == n {
                return grid;
            }
            index[axis] += 1;
            if index[axis] < coords.len() {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
    }
}

/// Scans `det(I + t D2H(DU0(x)) D2U0(x))` on a time grid for every grid
/// state. A sign change is refined by bisection; a local minimum of
/// `|det|` that dips below the scale-aware singularity tolerance is
/// refined by golden-section search, which also catches even-order roots
/// where the determinant touches zero without crossing.
pub fn estimate_horizon(
    sp: &ScalarizedProblem,
    x_grid: &[DVector<f64>],
    t_max: f64,
    t_steps: usize,
) -> Result<HorizonReport> {
    if x_grid.is_empty() {
        return Err(Error::InvalidArgument("horizon scan needs a nonempty grid".into()));
    }
    if !(t_max > 0.0) || t_steps == 0 {
        return Err(Error::InvalidParameter(
            "horizon scan needs t_max > 0 and t_steps >= 1".into(),
        ));
    }
    let mut t_star = f64::INFINITY;
    let mut witness = None;
    for x in x_grid {
        let b = sp.hamiltonian_hessian(&sp.initial_gradient(x)) * sp.initial_hessian(x);
        if let Some(root) = first_singular_time(&b, t_max, t_steps) {
            if root < t_star {
                t_star = root;
                witness = Some(x.clone());
            }
        }
    }
    Ok(HorizonReport {
        t_star,
        witness_x: witness,
        scanned_points: x_grid.len(),
        t_max,
        t_steps,
    })
}

fn singularity_tol(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows() as i32;
    1e-10 * (1.0 + m.norm().powi(d))
}

fn first_singular_time(b: &DMatrix<f64>, t_max: f64, t_steps: usize) -> Option<f64> {
    let n = b.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let det_at = |t: f64| (&eye + b * t).determinant();
    let tol_at = |t: f64| singularity_tol(&(&eye + b * t));

    let grid_t = |j: usize| t_max * j as f64 / t_steps as f64;
    let dets: Vec<f64> = (0..=t_steps).map(|j| det_at(grid_t(j))).collect();

    let mut best: Option<f64> = None;
    let mut consider = |candidate: f64| {
        if best.map_or(true, |b| candidate < b) {
            best = Some(candidate);
        }
    };

    for j in 1..=t_steps {
        let (t_prev, t_cur) = (grid_t(j - 1), grid_t(j));
        if dets[j - 1] * dets[j] < 0.0 {
            consider(bisect_root(&det_at, t_prev, t_cur));
            continue;
        }
        if dets[j].abs() <= tol_at(t_cur) {
            // Refine around the grid hit; the true root may sit slightly off.
            let hi = if j < t_steps { grid_t(j + 1) } else { t_cur };
            consider(golden_section_min(|t| det_at(t).abs(), t_prev, hi, 1e-12).0);
            continue;
        }
        // Even-order roots: |det| dips to a local minimum without a sign
        // change or a grid hit below tolerance.
        if j >= 2 && dets[j - 1].abs() < dets[j - 2].abs() && dets[j - 1].abs() <= dets[j].abs() {
            let (arg, val) = golden_section_min(|t| det_at(t).abs(), grid_t(j - 2), t_cur, 1e-12);
            if val <= tol_at(arg) {
                consider(arg);
            }
        }
    }
    best
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Minimum horizon over all sampled base directions. Only an estimate:
/// the infimum over the continuum base can be smaller than the minimum
/// over finitely many directions.
pub fn estimate_horizon_over_base(
    prob: &ProblemInstance,
    base: &BaseSampling,
    x_grid: &[DVector<f64>],
    t_max: f64,
    t_steps: usize,
) -> Result<BaseHorizonReport> {
    let reports: Vec<HorizonReport> = base
        .directions()
        .par_iter()
        .map(|zeta| estimate_horizon(&prob.scalarize(zeta)?, x_grid, t_max, t_steps))
        .collect::<Result<Vec<_>>>()?;
    let mut t_star = f64::INFINITY;
    let mut witness_zeta = None;
    let mut witness_x = None;
    for (zeta, report) in base.directions().iter().zip(&reports) {
        if report.t_star < t_star {
            t_star = report.t_star;
            witness_zeta = Some(zeta.clone());
            witness_x = report.witness_x.clone();
        }
    }
    Ok(BaseHorizonReport {
        t_star,
        witness_zeta,
        witness_x,
        per_direction: reports.iter().map(|r| r.t_star).collect(),
        scanned_points: x_grid.len(),
        t_max,
        t_steps,
    })
}

/// Conservative horizon lower bound `1 / (M1 M2)` from the uniform
/// derivative bounds: `M1` bounds the initial Hessian over the state
/// grid, `M2` bounds the Hamiltonian Hessian over momentum samples no
/// larger than the initial gradients reach. `+inf` when either bound
/// vanishes (linear data never develops a crossing).
pub fn horizon_lower_bound(
    prob: &ProblemInstance,
    base: &BaseSampling,
    x_grid: &[DVector<f64>],
    p_grid: &[DVector<f64>],
) -> Result<f64> {
    if x_grid.is_empty() || p_grid.is_empty() {
        return Err(Error::InvalidArgument("horizon bound needs nonempty grids".into()));
    }
    let mut m0: f64 = 0.0;
    let mut m1: f64 = 0.0;
    for zeta in base.directions() {
        let sp = prob.scalarize(zeta)?;
        for x in x_grid {
            m0 = m0.max(sp.initial_gradient(x).norm());
            m1 = m1.max(symmetric_operator_norm(&sp.initial_hessian(x)));
        }
    }
    let mut m2: f64 = 0.0;
    for zeta in base.directions() {
        let sp = prob.scalarize(zeta)?;
        let mut in_range = false;
        for p in p_grid {
            if p.norm() <= m0 {
                in_range = true;
                m2 = m2.max(symmetric_operator_norm(&sp.hamiltonian_hessian(p)));
            }
        }
        if !in_range {
            // The momentum range collapsed below the grid resolution;
            // the origin is always admissible.
            m2 = m2.max(symmetric_operator_norm(
                &sp.hamiltonian_hessian(&DVector::zeros(prob.dim_state())),
            ));
        }
    }
    if m1 == 0.0 || m2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (m1 * m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::BuiltinParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn scalarized(name: &str, z1: f64) -> ScalarizedProblem {
        ProblemInstance::builtin(name, BuiltinParams::default())
            .unwrap()
            .scalarize(&vec2(z1, 1.0 - z1))
            .unwrap()
    }

    #[test]
    fn closed_form_on_the_linear_initial_condition() {
        let sp = scalarized("ex1", 1.0);
        let state = characteristic_closed_form(&sp, 1.0, &vec2(0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(state.position, vec2(1.0, 2.0), epsilon = 1e-15);
        assert_relative_eq!(state.value, 0.5);
        assert_abs_diff_eq!(state.momentum, vec2(1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn closed_form_at_time_zero_is_the_initial_condition() {
        let sp = scalarized("ex2", 0.5);
        let x = vec2(0.4, -1.7);
        let state = characteristic_closed_form(&sp, 0.0, &x).unwrap();
        assert_abs_diff_eq!(state.position, x, epsilon = 1e-15);
        assert_relative_eq!(state.value, sp.initial(&x));
        assert_abs_diff_eq!(state.momentum, sp.initial_gradient(&x), epsilon = 1e-15);
        assert!(characteristic_closed_form(&sp, -0.1, &x).is_err());
    }

    #[test]
    fn closed_form_position_for_the_shifted_quadratic() {
        let sp = scalarized("ex2", 0.5);
        let state = characteristic_closed_form(&sp, 1.0, &vec2(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(state.position, vec2(2.5, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rk4_reproduces_the_closed_form() {
        let sp = scalarized("ex1", 1.0);
        let x = vec2(0.0, 2.0);
        let direct = characteristic_closed_form(&sp, 1.0, &x).unwrap();
        let integrated = characteristic_rk4(&sp, 1.0, &x, 100).unwrap();
        assert_abs_diff_eq!(integrated.position, direct.position, epsilon = 1e-10);
        assert_relative_eq!(integrated.value, direct.value, epsilon = 1e-10);
    }

    #[test]
    fn rk4_step_count_is_irrelevant_for_constant_right_hand_sides() {
        let sp = scalarized("ex2", 0.25);
        let x = vec2(-0.3, 1.1);
        let one = characteristic_rk4(&sp, 1.5, &x, 1).unwrap();
        let many = characteristic_rk4(&sp, 1.5, &x, 1000).unwrap();
        assert_abs_diff_eq!(one.position, many.position, epsilon = 1e-12);
        assert_abs_diff_eq!(one.value, many.value, epsilon = 1e-12);
    }

    #[test]
    fn momentum_stays_constant_along_the_integration() {
        let sp = scalarized("ex2", 0.0);
        let x = vec2(1.0, 0.0);
        let trajectory = characteristic_rk4_trajectory(&sp, 2.0, &x, 50).unwrap();
        for state in &trajectory {
            assert_abs_diff_eq!(state.momentum, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn flow_inversion_on_the_worked_examples() {
        let sp = scalarized("ex1", 1.0);
        let z = invert_flow(&sp, 1.0, &vec2(1.0, 2.0), 1e-12).unwrap();
        assert_abs_diff_eq!(z, vec2(0.0, 2.0), epsilon = 1e-12);

        let sp = scalarized("ex2", 0.5);
        let z = invert_flow(&sp, 1.0, &vec2(1.0, 0.0), 1e-12).unwrap();
        assert_abs_diff_eq!(z, vec2(0.25, 0.0), epsilon = 1e-12);

        let z = invert_flow(&sp, 0.0, &vec2(0.7, -0.2), 1e-12).unwrap();
        assert_abs_diff_eq!(z, vec2(0.7, -0.2), epsilon = 1e-15);
    }

    #[test]
    fn flow_roundtrip_holds_below_the_horizon() {
        for (name, z1, t) in [("ex1", 0.25, 2.0), ("ex2", 0.75, 5.0), ("concave-init", 0.5, 0.8)] {
            let sp = scalarized(name, z1);
            let x = vec2(0.9, -1.3);
            let w = invert_flow(&sp, t, &x, 1e-12).unwrap();
            let forward = characteristic_closed_form(&sp, t, &w).unwrap();
            assert_abs_diff_eq!(forward.position, x, epsilon = 1e-9);
        }
    }

    #[test]
    fn scalar_solution_spot_values() {
        let sp = scalarized("ex1", 1.0);
        assert_relative_eq!(
            scalar_solution(&sp, 1.0, &vec2(1.0, 2.0), 1e-12).unwrap(),
            0.5
        );
        let sp = scalarized("ex2", 0.5);
        assert_relative_eq!(
            scalar_solution(&sp, 1.0, &vec2(1.0, 0.0), 1e-12).unwrap(),
            -0.1875
        );
        let x = vec2(-0.8, 0.45);
        assert_relative_eq!(
            scalar_solution(&sp, 0.0, &x, 1e-12).unwrap(),
            sp.initial(&x)
        );
    }

    #[test]
    fn horizon_is_infinite_for_the_worked_examples() {
        let grid = hypercube_grid(2, -2.0, 2.0, 5);
        for (name, z1) in [("ex1", 0.5), ("ex2", 0.25)] {
            let sp = scalarized(name, z1);
            let report = estimate_horizon(&sp, &grid, 100.0, 1000).unwrap();
            assert_eq!(report.t_star, f64::INFINITY);
            assert!(report.witness_x.is_none());
        }
    }

    #[test]
    fn concave_initial_data_crosses_at_time_one() {
        let grid = hypercube_grid(2, -2.0, 2.0, 5);
        let sp = scalarized("concave-init", 0.5);
        let report = estimate_horizon(&sp, &grid, 100.0, 1000).unwrap();
        assert_relative_eq!(report.t_star, 1.0, epsilon = 1e-6);
        assert!(report.witness_x.is_some());
    }

    #[test]
    fn even_order_roots_are_found_without_a_grid_hit() {
        // With t_steps chosen so that no scan point lands on the root of
        // det = (1 - t)^2, only the local-minimum refinement can see it.
        let grid = vec![vec2(0.3, -0.6)];
        let sp = scalarized("concave-init", 0.5);
        let report = estimate_horizon(&sp, &grid, 100.0, 777).unwrap();
        assert_relative_eq!(report.t_star, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn base_scan_takes_the_minimum_over_directions() {
        let prob = ProblemInstance::builtin("concave-init", BuiltinParams::default()).unwrap();
        let cone = crate::cone::Cone::orthant(2);
        let base = crate::cone::make_base(&cone, &vec2(1.0, 1.0), 5).unwrap();
        let grid = hypercube_grid(2, -2.0, 2.0, 3);
        let report = estimate_horizon_over_base(&prob, &base, &grid, 100.0, 1000).unwrap();
        assert_relative_eq!(report.t_star, 1.0, epsilon = 1e-6);
        assert_eq!(report.per_direction.len(), 5);
        assert!(report.witness_zeta.is_some());
    }

    #[test]
    fn horizon_bound_spot_values() {
        let cone = crate::cone::Cone::orthant(2);
        let base = crate::cone::make_base(&cone, &vec2(1.0, 1.0), 5).unwrap();
        let x_grid = hypercube_grid(2, -2.0, 2.0, 5);
        let p_grid = hypercube_grid(2, -2.0, 2.0, 5);

        let ex1 = ProblemInstance::builtin("ex1", BuiltinParams::default()).unwrap();
        assert_eq!(
            horizon_lower_bound(&ex1, &base, &x_grid, &p_grid).unwrap(),
            f64::INFINITY
        );

        let concave = ProblemInstance::builtin("concave-init", BuiltinParams::default()).unwrap();
        assert_eq!(horizon_lower_bound(&concave, &base, &x_grid, &p_grid).unwrap(), 1.0);

        let ex2 = ProblemInstance::builtin("ex2", BuiltinParams::default()).unwrap();
        assert_eq!(horizon_lower_bound(&ex2, &base, &x_grid, &p_grid).unwrap(), 1.0);
    }

    #[test]
    fn hypercube_grid_is_lexicographic_and_complete() {
        let grid = hypercube_grid(2, -1.0, 1.0, 3);
        assert_eq!(grid.len(), 9);
        assert_abs_diff_eq!(grid[0], vec2(-1.0, -1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(grid[1], vec2(0.0, -1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(grid[8], vec2(1.0, 1.0), epsilon = 1e-15);
    }
}
