//! Built-in problem instances and their scalarizations.
//!
//! Every instance carries vector-valued data `H0` (or `L0`) and `U0` whose
//! inf-extension `H(p, zeta) = H0(p) + C` makes the scalarized Hamiltonian
//! a plain dot product, `H_zeta(p) = zeta . H0(p)`. The registry is closed:
//! four instances exercise every code path (linear and quadratic initial
//! data, quadratic and quartic energies, a Lagrangian-given problem, and a
//! concave initial condition that forces a finite horizon).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{newton_root, DEFAULT_NEWTON_TOL, MAX_NEWTON_ITERS};

/// Whether the instance hands us the Hamiltonian directly or a Lagrangian
/// whose conjugate becomes the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    HamiltonianGiven,
    LagrangianGiven,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::HamiltonianGiven => "hamiltonian-given",
            ProblemKind::LagrangianGiven => "lagrangian-given",
        }
    }
}

/// Optional parameters accepted by `ProblemInstance::builtin`.
#[derive(Debug, Clone, Default)]
pub struct BuiltinParams {
    /// Velocity shift of the second energy component of "ex2".
    pub p0: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
enum Registry {
    Ex1,
    Ex2 { p0: DVector<f64> },
    QuadLagrangian,
    ConcaveInit,
}

/// A twice continuously differentiable scalar field with analytic
/// gradient and Hessian. The closed set of shapes below covers every
/// scalarization the registry can produce.
#[derive(Debug, Clone)]
pub enum ScalarField {
    /// `g . x`.
    LinearForm { gradient: DVector<f64> },
    /// `(a/2) ||p||^2 + b . p + c`.
    Quadratic {
        quad: f64,
        linear: DVector<f64>,
        constant: f64,
    },
    /// `(c2/2) ||p||^2 + (c4/4) ||p||^4`.
    QuadQuartic { c2: f64, c4: f64 },
    /// The Fenchel conjugate of a strictly convex superlinear field,
    /// evaluated through Newton on the gradient equation.
    LegendreTransform(Box<ScalarField>),
}

impl ScalarField {
    pub fn value(&self, p: &DVector<f64>) -> f64 {
        match self {
            ScalarField::LinearForm { gradient } => gradient.dot(p),
            ScalarField::Quadratic {
                quad,
                linear,
                constant,
            } => 0.5 * quad * p.norm_squared() + linear.dot(p) + constant,
            ScalarField::QuadQuartic { c2, c4 } => {
                let r2 = p.norm_squared();
                0.5 * c2 * r2 + 0.25 * c4 * r2 * r2
            }
            ScalarField::LegendreTransform(inner) => {
                let v = inner.gradient_inverse(p);
                p.dot(&v) - inner.value(&v)
            }
        }
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        match self {
            ScalarField::LinearForm { gradient } => gradient.clone(),
            ScalarField::Quadratic { quad, linear, .. } => p * *quad + linear,
            ScalarField::QuadQuartic { c2, c4 } => p * (c2 + c4 * p.norm_squared()),
            ScalarField::LegendreTransform(inner) => inner.gradient_inverse(p),
        }
    }

    pub fn hessian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = p.len();
        match self {
            ScalarField::LinearForm { .. } => DMatrix::zeros(n, n),
            ScalarField::Quadratic { quad, .. } => DMatrix::identity(n, n) * *quad,
            ScalarField::QuadQuartic { c2, c4 } => {
                let mut h = DMatrix::identity(n, n) * (c2 + c4 * p.norm_squared());
                h += (p * p.transpose()) * (2.0 * c4);
                h
            }
            ScalarField::LegendreTransform(inner) => {
                let v = inner.gradient_inverse(p);
                inner
                    .hessian(&v)
                    .try_inverse()
                    .expect("conjugate Hessian: energy Hessian is singular at the maximizer")
            }
        }
    }

    /// Solves `gradient(v) = p` by Newton from `v0 = p`.
    ///
    /// Panics when the solve fails; for the strictly convex superlinear
    /// energies in the registry the iteration converges globally, so a
    /// failure indicates a misuse of `LegendreTransform`.
    fn gradient_inverse(&self, p: &DVector<f64>) -> DVector<f64> {
        newton_root(
            |v| self.gradient(v) - p,
            |v| self.hessian(v),
            p,
            DEFAULT_NEWTON_TOL,
            MAX_NEWTON_ITERS,
        )
        .map(|o| o.root)
        .expect("gradient inversion failed on a registry energy")
    }
}

/// One registered problem: dimensions, kind, and the vector-valued data
/// behind every scalarization.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    name: &'static str,
    kind: ProblemKind,
    registry: Registry,
}

/// Scalarized data for one fixed direction: the energy (Hamiltonian or
/// Lagrangian as given), the Hamiltonian that drives the characteristic
/// system, and the initial condition, each with analytic derivatives.
#[derive(Debug, Clone)]
pub struct ScalarizedProblem {
    zeta: DVector<f64>,
    kind: ProblemKind,
    energy: ScalarField,
    hamiltonian: ScalarField,
    initial: ScalarField,
}

impl ProblemInstance {
    pub fn builtin(name: &str, params: BuiltinParams) -> Result<Self> {
        let registry = match name {
            "ex1" => {
                reject_p0(name, &params)?;
                Registry::Ex1
            }
            "ex2" => {
                let p0 = match params.p0 {
                    Some(p0) => {
                        if p0.len() != 2 {
                            return Err(Error::DimensionMismatch {
                                what: "parameter p0",
                                expected: 2,
                                got: p0.len(),
                            });
                        }
                        if !p0.iter().all(|v| v.is_finite()) {
                            return Err(Error::InvalidParameter("p0 must be finite".into()));
                        }
                        p0
                    }
                    None => DVector::from_vec(vec![1.0, 0.0]),
                };
                Registry::Ex2 { p0 }
            }
            "quad-lagrangian" => {
                reject_p0(name, &params)?;
                Registry::QuadLagrangian
            }
            "concave-init" => {
                reject_p0(name, &params)?;
                Registry::ConcaveInit
            }
            other => return Err(Error::UnknownProblem(other.into())),
        };
        let (name, kind) = match registry {
            Registry::Ex1 => ("ex1", ProblemKind::HamiltonianGiven),
            Registry::Ex2 { .. } => ("ex2", ProblemKind::HamiltonianGiven),
            Registry::QuadLagrangian => ("quad-lagrangian", ProblemKind::LagrangianGiven),
            Registry::ConcaveInit => ("concave-init", ProblemKind::HamiltonianGiven),
        };
        Ok(Self {
            name,
            kind,
            registry,
        })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// State dimension n.
    pub fn dim_state(&self) -> usize {
        2
    }

    /// Value dimension d.
    pub fn dim_value(&self) -> usize {
        2
    }

    /// Every registered energy is convex per component, so set-valued
    /// biconjugation is admissible for the whole registry. The guard is
    /// kept explicit because the biconjugate theorem needs it.
    pub fn energy_is_convex(&self) -> bool {
        true
    }

    /// Vector initial condition `U0(x)`.
    pub fn vector_initial(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.registry {
            Registry::Ex1 | Registry::QuadLagrangian => DVector::from_vec(vec![x[0], -x[1]]),
            Registry::Ex2 { .. } => {
                let half = 0.5 * x.norm_squared();
                DVector::from_vec(vec![half, half])
            }
            Registry::ConcaveInit => {
                let half = -0.5 * x.norm_squared();
                DVector::from_vec(vec![half, half])
            }
        }
    }

    /// Vector energy `H0(p)` (or `L0(p)` for Lagrangian-given instances).
    pub fn vector_energy(&self, p: &DVector<f64>) -> DVector<f64> {
        match &self.registry {
            Registry::Ex1 => {
                let r2 = p.norm_squared();
                DVector::from_vec(vec![0.5 * r2, 0.25 * r2 * r2])
            }
            Registry::Ex2 { p0 } => {
                let shifted = p + p0;
                DVector::from_vec(vec![0.5 * p.norm_squared(), 0.5 * shifted.norm_squared()])
            }
            Registry::QuadLagrangian | Registry::ConcaveInit => {
                let half = 0.5 * p.norm_squared();
                DVector::from_vec(vec![half, half])
            }
        }
    }

    /// Vector Hamiltonian `H0(p)`: the energy itself when the Hamiltonian
    /// is given, the componentwise conjugate for the Lagrangian-given
    /// instance (whose components are self-conjugate quadratics).
    pub fn vector_hamiltonian(&self, p: &DVector<f64>) -> DVector<f64> {
        match &self.registry {
            Registry::QuadLagrangian => {
                let half = 0.5 * p.norm_squared();
                DVector::from_vec(vec![half, half])
            }
            _ => self.vector_energy(p),
        }
    }

    /// Jacobian of the vector Hamiltonian, one component gradient per row.
    pub fn vector_hamiltonian_jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = p.len();
        let rows: Vec<DVector<f64>> = match &self.registry {
            Registry::Ex1 => vec![p.clone(), p * p.norm_squared()],
            Registry::Ex2 { p0 } => vec![p.clone(), p + p0],
            Registry::QuadLagrangian | Registry::ConcaveInit => vec![p.clone(), p.clone()],
        };
        DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c])
    }

    /// Scalarizes the instance along a dual-cone direction: all pieces are
    /// dot products of the vector data with `zeta`, with analytic
    /// derivatives; for Lagrangian-given instances the Hamiltonian is the
    /// Fenchel conjugate of the scalarized Lagrangian.
    pub fn scalarize(&self, zeta: &DVector<f64>) -> Result<ScalarizedProblem> {
        if zeta.len() != self.dim_value() {
            return Err(Error::DimensionMismatch {
                what: "scalarization direction",
                expected: self.dim_value(),
                got: zeta.len(),
            });
        }
        if zeta.norm() == 0.0 || zeta.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDirection(format!(
                "scalarization direction must be a nonzero element of the dual cone, got {:?}",
                zeta.as_slice()
            )));
        }
        let weight = zeta.sum();
        let energy = match &self.registry {
            Registry::Ex1 => ScalarField::QuadQuartic {
                c2: zeta[0],
                c4: zeta[1],
            },
            Registry::Ex2 { p0 } => ScalarField::Quadratic {
                quad: weight,
                linear: p0 * zeta[1],
                constant: 0.5 * zeta[1] * p0.norm_squared(),
            },
            Registry::QuadLagrangian | Registry::ConcaveInit => ScalarField::Quadratic {
                quad: weight,
                linear: DVector::zeros(2),
                constant: 0.0,
            },
        };
        let initial = match &self.registry {
            Registry::Ex1 | Registry::QuadLagrangian => ScalarField::LinearForm {
                gradient: DVector::from_vec(vec![zeta[0], -zeta[1]]),
            },
            Registry::Ex2 { .. } => ScalarField::Quadratic {
                quad: weight,
                linear: DVector::zeros(2),
                constant: 0.0,
            },
            Registry::ConcaveInit => ScalarField::Quadratic {
                quad: -weight,
                linear: DVector::zeros(2),
                constant: 0.0,
            },
        };
        let hamiltonian = match self.kind {
            ProblemKind::HamiltonianGiven => energy.clone(),
            ProblemKind::LagrangianGiven => ScalarField::LegendreTransform(Box::new(energy.clone())),
        };
        Ok(ScalarizedProblem {
            zeta: zeta.clone(),
            kind: self.kind,
            energy,
            hamiltonian,
            initial,
        })
    }
}

fn reject_p0(name: &str, params: &BuiltinParams) -> Result<()> {
    if params.p0.is_some() {
        return Err(Error::InvalidParameter(format!(
            "problem {name} takes no p0 parameter"
        )));
    }
    Ok(())
}

impl ScalarizedProblem {
    pub fn zeta(&self) -> &DVector<f64> {
        &self.zeta
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// The scalarized energy exactly as registered: the Hamiltonian for
    /// Hamiltonian-given problems, the Lagrangian otherwise. This is what
    /// Fenchel conjugation and the Hopf-Lax formula act on.
    pub fn energy(&self) -> &ScalarField {
        &self.energy
    }

    /// The field driving the characteristic system (the conjugate of the
    /// energy for Lagrangian-given problems).
    pub fn hamiltonian_field(&self) -> &ScalarField {
        &self.hamiltonian
    }

    pub fn initial_field(&self) -> &ScalarField {
        &self.initial
    }

    pub fn hamiltonian(&self, p: &DVector<f64>) -> f64 {
        self.hamiltonian.value(p)
    }

    pub fn hamiltonian_gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        self.hamiltonian.gradient(p)
    }

    pub fn hamiltonian_hessian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        self.hamiltonian.hessian(p)
    }

    pub fn initial(&self, x: &DVector<f64>) -> f64 {
        self.initial.value(x)
    }

    pub fn initial_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.initial.gradient(x)
    }

    pub fn initial_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.initial.hessian(x)
    }
}
