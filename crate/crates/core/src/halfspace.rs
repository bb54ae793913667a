//! Half-spaces, finitely supported sets and their lattice arithmetic.
//!
//! The values of a set-valued solution live in the complete lattice of
//! closed convex sets satisfying `A = cl co (A + C)`, ordered by reverse
//! inclusion. Computationally every set is carried as an intersection of
//! upper half-spaces `{z : zeta_i . z >= c_i}` whose normals come from a
//! base sampling of the dual cone; the offset in direction `zeta` is the
//! scalarization `inf {zeta . z : z in A}`. Offsets are extended reals:
//! `+inf` marks the empty set, `-inf` the whole space.

use nalgebra::DVector;

use crate::cone::{BaseSampling, Cone};
use crate::error::{Error, Result};

/// Relative tolerance used to decide whether two directions are parallel.
const PARALLEL_TOL: f64 = 1e-10;
/// Tolerance on multiplier signs in the conic-combination search.
const MULTIPLIER_TOL: f64 = 1e-11;

/// Anything that can report `inf {zeta . z : z in self}`.
pub trait SetScalarization {
    /// Infimum of `zeta . z` over the set; `+inf` for the empty set,
    /// `-inf` when the linear form is unbounded below on the set.
    fn scalarization(&self, zeta: &DVector<f64>) -> f64;
}

/// Upper half-space `{z : normal . z >= offset}` with extended offset.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: DVector<f64>,
    offset: f64,
}

impl HalfSpace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Result<Self> {
        if normal.norm() == 0.0 || !normal.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidDirection(
                "half-space normal must be nonzero and finite".into(),
            ));
        }
        if offset.is_nan() {
            return Err(Error::InvalidArgument("half-space offset is NaN".into()));
        }
        Ok(Self { normal, offset })
    }

    /// The homogeneous half-space `H+(zeta) = {z : zeta . z >= 0}`.
    pub fn homogeneous(normal: DVector<f64>) -> Result<Self> {
        Self::new(normal, 0.0)
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Empty set marker (`offset = +inf`).
    pub fn is_empty_set(&self) -> bool {
        self.offset == f64::INFINITY
    }

    /// Whole-space marker (`offset = -inf`).
    pub fn is_whole_space(&self) -> bool {
        self.offset == f64::NEG_INFINITY
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        if self.is_empty_set() {
            return false;
        }
        if self.is_whole_space() {
            return true;
        }
        self.normal.dot(z) >= self.offset - tol
    }

    /// Minkowski sum with another half-space.
    ///
    /// Parallel normals add their offsets (after rescaling to this
    /// half-space's normal); independent normals sum to the whole space.
    pub fn minkowski_add(&self, other: &HalfSpace) -> HalfSpace {
        if self.is_empty_set() || other.is_empty_set() {
            return HalfSpace {
                normal: self.normal.clone(),
                offset: f64::INFINITY,
            };
        }
        if self.is_whole_space() || other.is_whole_space() {
            return HalfSpace {
                normal: self.normal.clone(),
                offset: f64::NEG_INFINITY,
            };
        }
        match positive_parallel_factor(&other.normal, &self.normal) {
            Some(mu) => HalfSpace {
                normal: self.normal.clone(),
                offset: self.offset + other.offset / mu,
            },
            None => HalfSpace {
                normal: self.normal.clone(),
                offset: f64::NEG_INFINITY,
            },
        }
    }

    /// Scales the set by `t >= 0`.
    ///
    /// For `t > 0` the offset scales linearly. `t = 0` collapses the
    /// translate part and leaves the recession half-space `H+(normal)`,
    /// the closure convention of the lattice; an empty set stays empty.
    pub fn scale(&self, t: f64) -> Result<HalfSpace> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "half-space scaling needs t >= 0, got {t}"
            )));
        }
        let offset = if self.is_empty_set() {
            f64::INFINITY
        } else if t == 0.0 {
            0.0
        } else {
            self.offset * t
        };
        Ok(HalfSpace {
            normal: self.normal.clone(),
            offset,
        })
    }

    /// Translates the set by the vector `v`.
    pub fn translate(&self, v: &DVector<f64>) -> Result<HalfSpace> {
        if v.len() != self.normal.len() {
            return Err(Error::DimensionMismatch {
                what: "translation vector",
                expected: self.normal.len(),
                got: v.len(),
            });
        }
        let offset = if self.offset.is_finite() {
            self.offset + self.normal.dot(v)
        } else {
            self.offset
        };
        Ok(HalfSpace {
            normal: self.normal.clone(),
            offset,
        })
    }
}

impl SetScalarization for HalfSpace {
    fn scalarization(&self, zeta: &DVector<f64>) -> f64 {
        if self.is_empty_set() {
            return f64::INFINITY;
        }
        if zeta.norm() == 0.0 {
            return 0.0;
        }
        if self.is_whole_space() {
            return f64::NEG_INFINITY;
        }
        match positive_parallel_factor(zeta, &self.normal) {
            Some(lambda) => lambda * self.offset,
            None => f64::NEG_INFINITY,
        }
    }
}

/// A translated ordering cone `apex + C`, the natural carrier for
/// inf-extension values `H(p, zeta) = H0(p) + C`.
#[derive(Debug, Clone)]
pub struct TranslatedCone {
    apex: DVector<f64>,
    cone: Cone,
}

impl TranslatedCone {
    pub fn new(apex: DVector<f64>, cone: Cone) -> Result<Self> {
        if apex.len() != cone.dim() {
            return Err(Error::DimensionMismatch {
                what: "cone apex",
                expected: cone.dim(),
                got: apex.len(),
            });
        }
        Ok(Self { apex, cone })
    }
}

impl SetScalarization for TranslatedCone {
    fn scalarization(&self, zeta: &DVector<f64>) -> f64 {
        if self.cone.contains_dual(zeta) {
            self.apex.dot(zeta)
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Intersection of the half-spaces `{z : zeta_i . z >= c_i}` over a base
/// sampling. This is the finite representation of every assembled
/// set-valued quantity in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportedSet {
    base: BaseSampling,
    offsets: Vec<f64>,
}

impl SupportedSet {
    pub fn new(base: BaseSampling, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != base.len() {
            return Err(Error::DimensionMismatch {
                what: "offset list",
                expected: base.len(),
                got: offsets.len(),
            });
        }
        if offsets.iter().any(|c| c.is_nan()) {
            return Err(Error::InvalidArgument("offset list contains NaN".into()));
        }
        Ok(Self { base, offsets })
    }

    pub fn base(&self) -> &BaseSampling {
        &self.base
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn halfspace(&self, i: usize) -> HalfSpace {
        HalfSpace {
            normal: self.base.directions()[i].clone(),
            offset: self.offsets[i],
        }
    }

    /// Feasible vertices of the two-dimensional intersection, ordered by
    /// the first coordinate. Together with the two extreme constraint
    /// rays these trace the boundary polyline.
    pub fn boundary_vertices(&self) -> Result<Vec<DVector<f64>>> {
        let dirs = self.base.directions();
        if dirs.is_empty() || dirs[0].len() != 2 {
            return Err(Error::InvalidArgument(
                "boundary vertices are only defined in dimension 2".into(),
            ));
        }
        if self.offsets.iter().any(|c| *c == f64::INFINITY) {
            return Err(Error::InvalidArgument(
                "the intersection is empty; it has no boundary".into(),
            ));
        }
        let feasibility_tol = 1e-9;
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                if !self.offsets[i].is_finite() || !self.offsets[j].is_finite() {
                    continue;
                }
                let Some((v0, v1)) = solve2(
                    dirs[i][0],
                    dirs[i][1],
                    dirs[j][0],
                    dirs[j][1],
                    self.offsets[i],
                    self.offsets[j],
                ) else {
                    continue;
                };
                let v = DVector::from_vec(vec![v0, v1]);
                let feasible = (0..dirs.len()).all(|k| {
                    !self.offsets[k].is_finite() || dirs[k].dot(&v) >= self.offsets[k] - feasibility_tol
                });
                if feasible && !vertices.iter().any(|w| (w - &v).amax() <= 1e-9) {
                    vertices.push(v);
                }
            }
        }
        vertices.sort_by(|a, b| {
            a[0].partial_cmp(&b[0])
                .unwrap()
                .then(b[1].partial_cmp(&a[1]).unwrap())
        });
        Ok(vertices)
    }
}

impl SetScalarization for SupportedSet {
    fn scalarization(&self, zeta: &DVector<f64>) -> f64 {
        support_of_intersection(self, zeta)
    }
}

/// The half-space `S_(eta,zeta)(x) = (eta . x) z_hat + H+(zeta)`, i.e.
/// `{z : zeta . z >= eta . x}`. Additive and positively homogeneous in
/// `x`; requires `zeta . z_hat = 1` so that the offset is attained.
pub fn linear_halfspace(
    eta: &DVector<f64>,
    zeta: &DVector<f64>,
    x: &DVector<f64>,
    z_hat: &DVector<f64>,
) -> Result<HalfSpace> {
    if eta.len() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "linear form",
            expected: x.len(),
            got: eta.len(),
        });
    }
    if (zeta.dot(z_hat) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDirection(format!(
            "zeta is not on the base: zeta . z_hat = {}",
            zeta.dot(z_hat)
        )));
    }
    HalfSpace::new(zeta.clone(), eta.dot(x))
}

/// The `zeta`-difference `A -_zeta B = {z : z + B subset A + H+(zeta)}`,
/// always a half-space with normal `zeta`:
/// `{z : zeta . z >= inf_A zeta . a - inf_B zeta . b}`.
///
/// Degenerate scalarizations follow the lattice conventions: the result
/// is the whole space when `inf_A = -inf` or `B` is empty, and the empty
/// set when `A` is empty (with `B` nonempty) or `inf_B = -inf`.
pub fn zeta_difference(
    a: &dyn SetScalarization,
    b: &dyn SetScalarization,
    zeta: &DVector<f64>,
    cone: &Cone,
) -> Result<HalfSpace> {
    if zeta.norm() == 0.0 {
        return Err(Error::InvalidDirection(
            "zeta-difference needs a nonzero direction".into(),
        ));
    }
    if !cone.contains_dual(zeta) {
        return Err(Error::InvalidDirection(
            "zeta-difference direction must lie in the dual cone".into(),
        ));
    }
    let inf_a = a.scalarization(zeta);
    let inf_b = b.scalarization(zeta);
    let offset = if inf_a == f64::NEG_INFINITY || inf_b == f64::INFINITY {
        f64::NEG_INFINITY
    } else if inf_a == f64::INFINITY || inf_b == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        inf_a - inf_b
    };
    HalfSpace::new(zeta.clone(), offset)
}

/// Support value `inf {zeta . z : z in set}` of a half-space intersection.
///
/// Solved through the dual program: the value is the maximum of
/// `sum lambda_i c_i` over nonnegative multipliers with
/// `sum lambda_i zeta_i = zeta`, attained on a linearly independent
/// subset of at most `d` constraint normals. Directions outside the cone
/// spanned by the normals give `-inf` (the form is unbounded below);
/// an empty intersection gives `+inf`.
pub fn support_of_intersection(set: &SupportedSet, zeta: &DVector<f64>) -> f64 {
    if set.offsets().iter().any(|c| *c == f64::INFINITY) {
        return f64::INFINITY;
    }
    if zeta.norm() == 0.0 {
        return 0.0;
    }
    let mut dirs: Vec<&DVector<f64>> = Vec::new();
    let mut offs: Vec<f64> = Vec::new();
    for (d, c) in set.base().directions().iter().zip(set.offsets()) {
        if c.is_finite() {
            dirs.push(d);
            offs.push(*c);
        }
    }
    if dirs.is_empty() {
        return f64::NEG_INFINITY;
    }
    let owned: Vec<DVector<f64>> = dirs.iter().map(|d| (*d).clone()).collect();
    conic_combination_value(&owned, &offs, zeta)
}

/// Maximum of `sum lambda_i c_i` over nonnegative `lambda` with
/// `sum lambda_i dirs_i = target`; `-inf` when the target is not a conic
/// combination of the directions. Shared by the support solver and dual
/// cone membership.
pub(crate) fn conic_combination_value(
    dirs: &[DVector<f64>],
    offsets: &[f64],
    target: &DVector<f64>,
) -> f64 {
    let d = target.len();
    let residual_tol = PARALLEL_TOL * (1.0 + target.norm());
    let mut best = f64::NEG_INFINITY;

    // Single directions: target parallel to dirs[i] with a nonnegative factor.
    for (dir, c) in dirs.iter().zip(offsets) {
        let lambda = dir.dot(target) / dir.norm_squared();
        if lambda >= -MULTIPLIER_TOL && (dir * lambda - target).norm() <= residual_tol {
            best = best.max(lambda.max(0.0) * c);
        }
    }
    if d >= 2 && dirs.len() >= 2 {
        if d == 2 {
            for i in 0..dirs.len() {
                for j in (i + 1)..dirs.len() {
                    let Some((li, lj)) = solve2(
                        dirs[i][0],
                        dirs[j][0],
                        dirs[i][1],
                        dirs[j][1],
                        target[0],
                        target[1],
                    ) else {
                        continue;
                    };
                    if li >= -MULTIPLIER_TOL && lj >= -MULTIPLIER_TOL {
                        best = best.max(li * offsets[i] + lj * offsets[j]);
                    }
                }
            }
        } else {
            let mut indices = Vec::new();
            best = best.max(subset_search(dirs, offsets, target, 0, &mut indices, residual_tol));
        }
    }
    best
}

/// Recursive enumeration of constraint subsets of size 2..=d for
/// dimensions above two, solved in the least-squares sense and accepted
/// when the residual vanishes and all multipliers are nonnegative.
fn subset_search(
    dirs: &[DVector<f64>],
    offsets: &[f64],
    target: &DVector<f64>,
    start: usize,
    chosen: &mut Vec<usize>,
    residual_tol: f64,
) -> f64 {
    let d = target.len();
    let mut best = f64::NEG_INFINITY;
    if chosen.len() >= 2 {
        let g = nalgebra::DMatrix::from_fn(d, chosen.len(), |r, c| dirs[chosen[c]][r]);
        let svd = g.clone().svd(true, true);
        if let Ok(lambda) = svd.solve(target, 1e-12) {
            let residual = (&g * &lambda - target).norm();
            if residual <= residual_tol && lambda.iter().all(|l| *l >= -MULTIPLIER_TOL) {
                let value: f64 = lambda
                    .iter()
                    .zip(chosen.iter())
                    .map(|(l, i)| l.max(0.0) * offsets[*i])
                    .sum();
                best = best.max(value);
            }
        }
    }
    if chosen.len() == d {
        return best;
    }
    for i in start..dirs.len() {
        chosen.push(i);
        best = best.max(subset_search(dirs, offsets, target, i + 1, chosen, residual_tol));
        chosen.pop();
    }
    best
}

/// Solves the 2x2 system `[[a, b], [c, d]] v = (e, f)` by Cramer's rule,
/// with a scale-aware singularity cutoff.
fn solve2(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Option<(f64, f64)> {
    let det = a * d - b * c;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some(((e * d - b * f) / det, (a * f - e * c) / det))
}

/// Positive factor `mu` with `v = mu * w` when the two directions are
/// positively parallel; `None` otherwise.
fn positive_parallel_factor(v: &DVector<f64>, w: &DVector<f64>) -> Option<f64> {
    let mu = v.dot(w) / w.norm_squared();
    if mu <= 0.0 {
        return None;
    }
    if (w * mu - v).norm() <= PARALLEL_TOL * (1.0 + v.norm()) {
        Some(mu)
    } else {
        None
    }
}
