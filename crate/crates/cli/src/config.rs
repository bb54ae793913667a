//! Run configuration: strict JSON parsing, defaults, and validation that
//! reports every problem at once.

use std::path::Path;

use nalgebra::DVector;
use serde::Deserialize;
use svhj_core::{make_base, BaseSampling, BuiltinParams, Cone, ProblemInstance};

/// Raw shape of the configuration file. Every field is optional so that
/// defaults can be filled in after parsing; unknown keys are fatal.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<String>,
    params: Option<RawParams>,
    t: Option<f64>,
    x: Option<Vec<f64>>,
    m: Option<usize>,
    z_hat: Option<Vec<f64>>,
    tolerances: Option<RawTolerances>,
    t_max: Option<f64>,
    t_steps: Option<usize>,
    grid: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p0: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    newton: Option<f64>,
    hyp_u: Option<f64>,
    fd_step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lo: Option<f64>,
    hi: Option<f64>,
    points: Option<usize>,
}

/// Validated run configuration with all defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    pub p0: Option<DVector<f64>>,
    pub t: f64,
    pub x: DVector<f64>,
    pub m: usize,
    pub z_hat: DVector<f64>,
    pub newton_tol: f64,
    pub hyp_u_tol: f64,
    pub fd_step: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
}

impl RunConfig {
    /// Parses and validates a configuration. All validation issues are
    /// collected and reported together.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
        let mut issues: Vec<String> = Vec::new();

        let problem = match raw.problem {
            Some(name) => name,
            None => {
                issues.push("missing required field: problem".into());
                String::new()
            }
        };
        let p0 = raw
            .params
            .and_then(|p| p.p0)
            .map(|v| DVector::from_vec(v));
        let t = raw.t.unwrap_or(1.0);
        let x = DVector::from_vec(raw.x.unwrap_or_else(|| vec![1.0, 2.0]));
        let m = raw.m.unwrap_or(41);
        let z_hat = DVector::from_vec(raw.z_hat.unwrap_or_else(|| vec![1.0, 1.0]));
        let tol = raw.tolerances.unwrap_or(RawTolerances {
            newton: None,
            hyp_u: None,
            fd_step: None,
        });
        let newton_tol = tol.newton.unwrap_or(1e-10);
        let hyp_u_tol = tol.hyp_u.unwrap_or(1e-6);
        let fd_step = tol.fd_step.unwrap_or(1e-4);
        let t_max = raw.t_max.unwrap_or(100.0);
        let t_steps = raw.t_steps.unwrap_or(1000);
        let grid = raw.grid.unwrap_or(RawGrid {
            lo: None,
            hi: None,
            points: None,
        });
        let grid_lo = grid.lo.unwrap_or(-2.0);
        let grid_hi = grid.hi.unwrap_or(2.0);
        let grid_points = grid.points.unwrap_or(5);

        let config = RunConfig {
            problem,
            p0,
            t,
            x,
            m,
            z_hat,
            newton_tol,
            hyp_u_tol,
            fd_step,
            t_max,
            t_steps,
            grid_lo,
            grid_hi,
            grid_points,
        };

        if config.m < 2 {
            issues.push(format!("m must be at least 2, got {}", config.m));
        }
        if !(config.t >= 0.0) {
            issues.push(format!("t must be nonnegative, got {}", config.t));
        }
        for (name, value) in [
            ("tolerances.newton", config.newton_tol),
            ("tolerances.hyp_u", config.hyp_u_tol),
            ("tolerances.fd_step", config.fd_step),
        ] {
            if !(value > 0.0) {
                issues.push(format!("{name} must be positive, got {value}"));
            }
        }
        if !(config.t_max > 0.0) {
            issues.push(format!("t_max must be positive, got {}", config.t_max));
        }
        if config.t_steps < 2 {
            issues.push(format!("t_steps must be at least 2, got {}", config.t_steps));
        }
        if config.grid_points < 2 {
            issues.push(format!(
                "grid.points must be at least 2, got {}",
                config.grid_points
            ));
        }
        if !(config.grid_lo < config.grid_hi) {
            issues.push(format!(
                "grid.lo must be below grid.hi, got [{}, {}]",
                config.grid_lo, config.grid_hi
            ));
        }
        if !config.problem.is_empty() {
            if let Err(e) = config.problem_instance() {
                issues.push(e.to_string());
            }
        }
        if let Err(e) = config.base() {
            issues.push(e.to_string());
        }
        if issues.is_empty() {
            Ok(config)
        } else {
            Err(issues.join("; "))
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn problem_instance(&self) -> svhj_core::Result<ProblemInstance> {
        ProblemInstance::builtin(
            &self.problem,
            BuiltinParams {
                p0: self.p0.clone(),
            },
        )
    }

    pub fn base(&self) -> svhj_core::Result<BaseSampling> {
        make_base(&Cone::orthant(self.z_hat.len()), &self.z_hat, self.m)
    }
}
