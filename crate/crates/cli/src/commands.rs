//! Command implementations. Each command loads its inputs from a
//! validated [`RunConfig`], calls the library, and writes artifacts under
//! the output directory. Artifacts are always written before a failed
//! check is reported, so a nonzero exit still leaves the data behind.

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use svhj_core::{
    assemble_solution, check_conjugate_identities, check_support_gaps, estimate_horizon_over_base,
    horizon_lower_bound, hypercube_grid, scalarization_solution, solution_curve, Error,
    SupportGapReport,
};

use crate::config::RunConfig;
use crate::export::{write_csv, write_json};

/// Residual threshold for the conjugate identity sweep. The check
/// certifies exact identities, so the threshold is pinned rather than
/// configurable.
const FENCHEL_TOL: f64 = 1e-8;

/// Error carrying the process exit code. One code per failure family so
/// scripts can tell a bad config from a failed check.
#[derive(Debug)]
pub enum CliError {
    Internal(String),
    Config(String),
    Horizon(String),
    CheckFailed(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Internal(_) => "internal",
            CliError::Config(_) => "config",
            CliError::Horizon(_) => "horizon",
            CliError::CheckFailed(_) => "check-failed",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Horizon(_) => 3,
            CliError::CheckFailed(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Internal(m)
            | CliError::Config(m)
            | CliError::Horizon(m)
            | CliError::CheckFailed(m)
            | CliError::Io(m) => m,
        }
    }
}

fn constructor(e: &Error) -> fn(String) -> CliError {
    match e {
        Error::HorizonExceeded { .. } => CliError::Horizon,
        Error::NoConvergence { .. } | Error::SingularHessian => CliError::Internal,
        Error::AtDirection { source, .. } => constructor(source),
        _ => CliError::Config,
    }
}

/// Maps a library error to an exit-code family, keeping the full message
/// (including any direction tag) intact.
fn core_err(e: Error) -> CliError {
    constructor(&e)(e.to_string())
}

fn io_err(message: String) -> CliError {
    CliError::Io(message)
}

/// Emits gamma_zeta(t, x) over the sampled base as `curve.csv`.
pub fn cmd_curve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prob = cfg.problem_instance().map_err(core_err)?;
    let base = cfg.base().map_err(core_err)?;
    let curve =
        solution_curve(&prob, &base, cfg.t, &cfg.x, cfg.newton_tol).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = curve
        .iter()
        .map(|(zeta, gamma)| vec![zeta[0], gamma[0], gamma[1]])
        .collect();
    write_csv(&out.join("curve.csv"), &["zeta1", "gamma1", "gamma2"], &rows).map_err(io_err)
}

/// Emits the assembled half-space family as `halfspaces.csv` together
/// with the boundary polyline of their intersection as `boundary.csv`.
pub fn cmd_halfspaces(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prob = cfg.problem_instance().map_err(core_err)?;
    let base = cfg.base().map_err(core_err)?;
    let set = assemble_solution(&prob, &base, cfg.t, &cfg.x, cfg.newton_tol).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = set
        .base()
        .directions()
        .iter()
        .zip(set.offsets())
        .map(|(zeta, &offset)| vec![zeta[0], offset])
        .collect();
    write_csv(&out.join("halfspaces.csv"), &["zeta1", "offset"], &rows).map_err(io_err)?;
    let vertices = set.boundary_vertices().map_err(core_err)?;
    let rows: Vec<Vec<f64>> = vertices.iter().map(|v| vec![v[0], v[1]]).collect();
    write_csv(&out.join("boundary.csv"), &["z1", "z2"], &rows).map_err(io_err)
}

#[derive(Serialize)]
struct HypUDocument {
    problem: String,
    t: f64,
    x: Vec<f64>,
    m: usize,
    report: SupportGapReport,
}

/// Runs the support-gap hypothesis check and writes `hypu.json`. A
/// negative verdict is reported through the exit code after the report
/// is on disk.
pub fn cmd_check_hypu(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prob = cfg.problem_instance().map_err(core_err)?;
    let base = cfg.base().map_err(core_err)?;
    let set = assemble_solution(&prob, &base, cfg.t, &cfg.x, cfg.newton_tol).map_err(core_err)?;
    let report = check_support_gaps(&set, cfg.hyp_u_tol);
    let document = HypUDocument {
        problem: cfg.problem.clone(),
        t: cfg.t,
        x: cfg.x.iter().copied().collect(),
        m: cfg.m,
        report,
    };
    write_json(&out.join("hypu.json"), &document).map_err(io_err)?;
    if document.report.holds {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "hypothesis check fails on '{}': max support gap {:e} exceeds tolerance {:e}",
            cfg.problem, document.report.max_gap, cfg.hyp_u_tol
        )))
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Serialize)]
struct TstarDocument {
    problem: String,
    t_max: f64,
    t_steps: usize,
    /// `null` encodes an infinite horizon within the scanned window.
    t_star: Option<f64>,
    witness_zeta: Option<Vec<f64>>,
    witness_x: Option<Vec<f64>>,
    horizon_bound: Option<f64>,
    per_direction: Vec<Option<f64>>,
}

/// Scans the existence horizon over a state grid and writes `tstar.json`.
pub fn cmd_tstar(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prob = cfg.problem_instance().map_err(core_err)?;
    let base = cfg.base().map_err(core_err)?;
    let n = prob.dim_state();
    let x_grid = hypercube_grid(n, cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
    let p_grid = hypercube_grid(n, cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
    let report = estimate_horizon_over_base(&prob, &base, &x_grid, cfg.t_max, cfg.t_steps)
        .map_err(core_err)?;
    let bound = horizon_lower_bound(&prob, &base, &x_grid, &p_grid).map_err(core_err)?;
    let document = TstarDocument {
        problem: cfg.problem.clone(),
        t_max: cfg.t_max,
        t_steps: cfg.t_steps,
        t_star: finite(report.t_star),
        witness_zeta: report.witness_zeta.map(|v| v.iter().copied().collect()),
        witness_x: report.witness_x.map(|v| v.iter().copied().collect()),
        horizon_bound: finite(bound),
        per_direction: report.per_direction.iter().map(|&t| finite(t)).collect(),
    };
    write_json(&out.join("tstar.json"), &document).map_err(io_err)
}

/// Sweeps the conjugate identities over the base and a momentum grid,
/// writing one residual row per (direction, momentum) to `fenchel.csv`.
///
/// The momentum grid takes the midpoints {-1.5, -0.5, 0.5, 1.5} per axis:
/// it straddles the unit scale without touching the origin, where a
/// non-strictly-convex energy can lose second-order differentiability.
pub fn cmd_fenchel_check(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prob = cfg.problem_instance().map_err(core_err)?;
    let base = cfg.base().map_err(core_err)?;
    let p_grid = hypercube_grid(prob.dim_state(), -1.5, 1.5, 4);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(base.directions().len() * p_grid.len());
    let mut worst = 0.0f64;
    for zeta in base.directions() {
        let sp = prob.scalarize(zeta).map_err(core_err)?;
        let report = check_conjugate_identities(&sp, &p_grid, cfg.newton_tol, FENCHEL_TOL)
            .map_err(|e| core_err(e.at_direction(zeta)))?;
        for record in &report.records {
            rows.push(vec![
                zeta[0],
                record.p[0],
                record.p[1],
                record.r1,
                record.r2,
                record.r3,
            ]);
        }
        worst = worst.max(report.max_r1).max(report.max_r2).max(report.max_r3);
    }
    write_csv(
        &out.join("fenchel.csv"),
        &["zeta1", "p1", "p2", "r1", "r2", "r3"],
        &rows,
    )
    .map_err(io_err)?;
    if worst <= FENCHEL_TOL {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "conjugate identities fail on '{}': worst residual {worst:e} exceeds {FENCHEL_TOL:e}",
            cfg.problem
        )))
    }
}

/// Solves the Hopf-Lax minimization per direction and writes the anchor
/// points, values, and first-order residuals to `hopflax.csv`.
pub fn cmd_hopflax(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let prob = cfg.problem_instance().map_err(core_err)?;
    let base = cfg.base().map_err(core_err)?;
    let solution =
        scalarization_solution(&prob, &base, cfg.t, &cfg.x, cfg.newton_tol).map_err(core_err)?;
    let rows: Vec<Vec<f64>> = solution
        .records
        .iter()
        .map(|r| {
            vec![
                r.zeta[0],
                r.minimizer[0],
                r.minimizer[1],
                r.value,
                r.foc_residual,
            ]
        })
        .collect();
    write_csv(
        &out.join("hopflax.csv"),
        &["zeta1", "w1", "w2", "value", "foc_residual"],
        &rows,
    )
    .map_err(io_err)
}

fn pinned(problem: &str, t: f64, x: Vec<f64>, m: usize) -> RunConfig {
    RunConfig {
        problem: problem.into(),
        p0: None,
        t,
        x: DVector::from_vec(x),
        m,
        z_hat: DVector::from_vec(vec![1.0, 1.0]),
        newton_tol: 1e-10,
        hyp_u_tol: 1e-6,
        fd_step: 1e-4,
        t_max: 100.0,
        t_steps: 1000,
        grid_lo: -2.0,
        grid_hi: 2.0,
        grid_points: 5,
    }
}

/// Runs a pinned reproduction bundle. The bundles fix their own
/// parameters so two runs always produce the same artifacts; a config
/// file passed alongside is validated but does not alter them.
pub fn cmd_example(name: &str, out: &Path) -> Result<(), CliError> {
    match name {
        "ex1" => {
            let cfg = pinned("ex1", 1.0, vec![1.0, 2.0], 41);
            cmd_curve(&cfg, out)?;
            cmd_halfspaces(&cfg, out)?;
            let mut hypu = cfg;
            hypu.m = 101;
            cmd_check_hypu(&hypu, out)
        }
        "ex2" => {
            let cfg = pinned("ex2", 1.0, vec![1.0, 0.0], 3);
            cmd_halfspaces(&cfg, out)?;
            cmd_check_hypu(&cfg, out)
        }
        other => Err(CliError::Config(format!(
            "unknown example '{other}'; available: ex1, ex2"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text).unwrap()
    }

    #[test]
    fn curve_writes_one_row_per_direction() {
        let dir = tempfile::tempdir().unwrap();
        cmd_curve(&cfg(r#"{"problem":"ex1","m":2}"#), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "zeta1,gamma1,gamma2");
    }

    #[test]
    fn hypu_failure_still_writes_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_check_hypu(
            &cfg(r#"{"problem":"ex2","t":1,"x":[1,0],"m":3}"#),
            dir.path(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let text = std::fs::read_to_string(dir.path().join("hypu.json")).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["report"]["holds"], serde_json::Value::Bool(false));
    }

    #[test]
    fn hopflax_rejects_hamiltonian_given_problems_as_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_hopflax(&cfg(r#"{"problem":"ex1"}"#), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("lagrangian"), "{}", err.message());
    }

    #[test]
    fn tstar_encodes_infinite_horizons_as_null() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = cfg(r#"{"problem":"ex1","m":3}"#);
        config.t_max = 5.0;
        config.t_steps = 50;
        config.grid_points = 3;
        cmd_tstar(&config, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("tstar.json")).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["t_star"], serde_json::Value::Null);
        assert_eq!(doc["horizon_bound"], serde_json::Value::Null);
    }

    #[test]
    fn tstar_reports_the_blowup_of_the_concave_initial_condition() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = cfg(r#"{"problem":"concave-init","m":3}"#);
        config.t_max = 5.0;
        config.t_steps = 50;
        config.grid_points = 3;
        cmd_tstar(&config, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("tstar.json")).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let t_star = doc["t_star"].as_f64().unwrap();
        assert!((t_star - 1.0).abs() <= 1e-6, "t_star = {t_star}");
        assert_eq!(doc["horizon_bound"].as_f64().unwrap(), 1.0);
    }

    #[test]
    fn fenchel_check_passes_on_the_builtin_problems() {
        for name in ["ex1", "quad-lagrangian"] {
            let dir = tempfile::tempdir().unwrap();
            let config = cfg(&format!(r#"{{"problem":"{name}","m":5}}"#));
            cmd_fenchel_check(&config, dir.path()).unwrap();
            let text = std::fs::read_to_string(dir.path().join("fenchel.csv")).unwrap();
            assert_eq!(text.lines().count(), 1 + 5 * 16);
        }
    }

    #[test]
    fn direction_tags_survive_the_error_mapping() {
        let tagged = Error::SingularHessian.at_direction(&DVector::from_vec(vec![0.5, 0.5]));
        let mapped = core_err(tagged);
        assert_eq!(mapped.exit_code(), 1);
        assert!(mapped.message().contains("0.5"), "{}", mapped.message());
        assert!(
            mapped.message().contains("singular Hessian"),
            "{}",
            mapped.message()
        );
    }

    #[test]
    fn example_bundles_write_their_artifact_sets() {
        let dir = tempfile::tempdir().unwrap();
        cmd_example("ex1", dir.path()).unwrap();
        for artifact in ["curve.csv", "halfspaces.csv", "boundary.csv", "hypu.json"] {
            assert!(dir.path().join(artifact).exists(), "missing {artifact}");
        }

        let dir = tempfile::tempdir().unwrap();
        let err = cmd_example("ex2", dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        for artifact in ["halfspaces.csv", "boundary.csv", "hypu.json"] {
            assert!(dir.path().join(artifact).exists(), "missing {artifact}");
        }
    }
}
