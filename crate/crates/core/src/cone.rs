//! Ordering cones and deterministic sampling of their dual-cone base.
//!
//! A cone `C` in value space `R^d` is described by a finite generator set
//! of its dual cone `C+ = {zeta : zeta . z >= 0 for all z in C}`. The base
//! of the dual cone with respect to a reference direction `z_hat` in the
//! interior of `C` is the slice
//!
//! `B+(z_hat) = {zeta in C+ : zeta . z_hat = 1}`.
//!
//! All set-valued computations in this crate work with a finite sample of
//! that base; the sample is fully determined by the cone, `z_hat` and the
//! requested direction count, so repeated runs reproduce it bit for bit.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

/// Closed convex ordering cone, represented by generators of its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    dim: usize,
    dual_generators: Vec<DVector<f64>>,
}

impl Cone {
    /// Builds a cone from the generators of its dual cone.
    ///
    /// Every generator must be a nonzero finite vector of length `dim` and
    /// at least one generator is required; geometric non-degeneracy (the
    /// cone being neither empty nor all of `R^d`) is enforced later, when
    /// a base is requested, since it amounts to the existence of a valid
    /// reference direction.
    pub fn new(dim: usize, dual_generators: Vec<DVector<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCone("dimension must be positive".into()));
        }
        if dual_generators.is_empty() {
            return Err(Error::InvalidCone(
                "at least one dual generator is required".into(),
            ));
        }
        for (i, g) in dual_generators.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "dual generator",
                    expected: dim,
                    got: g.len(),
                });
            }
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidCone(format!(
                    "dual generator {i} has non-finite entries"
                )));
            }
            if g.norm() == 0.0 {
                return Err(Error::InvalidCone(format!("dual generator {i} is zero")));
            }
        }
        Ok(Self {
            dim,
            dual_generators,
        })
    }

    /// The nonnegative orthant `R^d_+`, whose dual is generated by the
    /// standard basis. This is the ordering cone of every built-in
    /// problem (with `d = 2`).
    pub fn orthant(dim: usize) -> Self {
        let generators = (0..dim)
            .map(|i| {
                let mut e = DVector::zeros(dim);
                e[i] = 1.0;
                e
            })
            .collect();
        Self::new(dim, generators).expect("orthant generators are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dual_generators(&self) -> &[DVector<f64>] {
        &self.dual_generators
    }

    /// Whether `zeta` lies in the dual cone spanned by the generators.
    ///
    /// Membership is decided by searching for nonnegative coordinates of
    /// `zeta` over linearly independent generator subsets, the same
    /// enumeration used by the support solver in [`crate::halfspace`].
    pub fn contains_dual(&self, zeta: &DVector<f64>) -> bool {
        if zeta.len() != self.dim {
            return false;
        }
        if zeta.norm() == 0.0 {
            return true;
        }
        crate::halfspace::conic_combination_value(
            &self.dual_generators,
            &vec![0.0; self.dual_generators.len()],
            zeta,
        )
        .is_finite()
    }
}

/// A finite, deterministic sample of the dual-cone base `B+(z_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSampling {
    z_hat: DVector<f64>,
    directions: Vec<DVector<f64>>,
}

impl BaseSampling {
    pub fn z_hat(&self) -> &DVector<f64> {
        &self.z_hat
    }

    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Sampling parameters echoed into reports for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct BaseSpec {
    pub z_hat: Vec<f64>,
    pub directions: usize,
}

impl From<&BaseSampling> for BaseSpec {
    fn from(base: &BaseSampling) -> Self {
        BaseSpec {
            z_hat: base.z_hat.iter().copied().collect(),
            directions: base.len(),
        }
    }
}

/// Samples `m` directions from the base `B+(z_hat)` of the dual cone.
///
/// Each dual generator is scaled onto the base plane `zeta . z_hat = 1`;
/// the remaining slots are filled with convex combinations of the scaled
/// generators. For the two-generator case (every built-in cone) the
/// combination parameter runs over the uniform grid `k / (m - 1)`, so the
/// pure generators are always the first and last direction. With more
/// generators a fixed simplex lattice of weights is used, vertices first.
///
/// Errors when `z_hat` fails to satisfy `g . z_hat > 0` for some dual
/// generator `g` (that is, `z_hat` is not interior to the cone), when `m`
/// cannot cover all generators, or when two directions coincide.
pub fn make_base(cone: &Cone, z_hat: &DVector<f64>, m: usize) -> Result<BaseSampling> {
    if z_hat.len() != cone.dim() {
        return Err(Error::DimensionMismatch {
            what: "z_hat",
            expected: cone.dim(),
            got: z_hat.len(),
        });
    }
    let mut scaled = Vec::with_capacity(cone.dual_generators().len());
    for (i, g) in cone.dual_generators().iter().enumerate() {
        let product = g.dot(z_hat);
        if product <= 0.0 {
            return Err(Error::InvalidBase(format!(
                "z_hat is not interior to the cone: generator {i} gives g . z_hat = {product}"
            )));
        }
        scaled.push(g / product);
    }
    for i in 0..scaled.len() {
        for j in (i + 1)..scaled.len() {
            if (&scaled[i] - &scaled[j]).amax() <= 1e-12 {
                return Err(Error::InvalidBase(format!(
                    "dual generators {i} and {j} scale to the same base direction"
                )));
            }
        }
    }
    let k = scaled.len();
    if m < k {
        return Err(Error::InvalidBase(format!(
            "m = {m} cannot include all {k} generator directions"
        )));
    }
    let directions = match k {
        1 => {
            if m != 1 {
                return Err(Error::InvalidBase(
                    "a single-generator dual cone has a one-point base".into(),
                ));
            }
            scaled
        }
        2 => {
            if m < 2 {
                return Err(Error::InvalidBase("m must be at least 2".into()));
            }
            (0..m)
                .map(|j| {
                    let lambda = j as f64 / (m - 1) as f64;
                    &scaled[0] * (1.0 - lambda) + &scaled[1] * lambda
                })
                .collect()
        }
        _ => simplex_lattice_directions(&scaled, m)?,
    };
    Ok(BaseSampling {
        z_hat: z_hat.clone(),
        directions,
    })
}

/// Deterministic fill pattern for three or more generators: the smallest
/// simplex lattice whose size reaches `m`, enumerated with the pure
/// vertices first and remaining weight vectors in lexicographic order.
fn simplex_lattice_directions(scaled: &[DVector<f64>], m: usize) -> Result<Vec<DVector<f64>>> {
    let k = scaled.len();
    let mut resolution = 1usize;
    while lattice_size(resolution, k) < m {
        resolution += 1;
    }
    let mut compositions = Vec::new();
    enumerate_compositions(resolution, k, &mut Vec::new(), &mut compositions);
    // Vertices (all weight on one generator) first, preserving generator order.
    compositions.sort_by_key(|c| {
        let vertex = c.iter().filter(|&&w| w > 0).count() == 1;
        let vertex_index = c.iter().position(|&w| w > 0).unwrap_or(0);
        (if vertex { 0 } else { 1 }, if vertex { vertex_index } else { 0 })
    });
    let mut directions: Vec<DVector<f64>> = Vec::with_capacity(m);
    for c in compositions.into_iter().take(m) {
        let mut dir = DVector::zeros(scaled[0].len());
        for (w, g) in c.iter().zip(scaled) {
            dir += g * (*w as f64 / resolution as f64);
        }
        if directions.iter().any(|d| (d - &dir).amax() <= 1e-12) {
            return Err(Error::InvalidBase(
                "lattice fill produced duplicate base directions".into(),
            ));
        }
        directions.push(dir);
    }
    Ok(directions)
}

fn lattice_size(resolution: usize, k: usize) -> usize {
    // C(resolution + k - 1, k - 1)
    let mut n = 1usize;
    for i in 0..(k - 1) {
        n = n * (resolution + i + 1) / (i + 1);
    }
    n
}

fn enumerate_compositions(
    remaining: usize,
    slots: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if slots == 1 {
        let mut c = prefix.clone();
        c.push(remaining);
        out.push(c);
        return;
    }
    for w in (0..=remaining).rev() {
        prefix.push(w);
        enumerate_compositions(remaining - w, slots - 1, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn orthant_base_m3_is_the_expected_triple() {
        let cone = Cone::orthant(2);
        let base = make_base(&cone, &vec2(1.0, 1.0), 3).unwrap();
        let dirs = base.directions();
        assert_eq!(dirs.len(), 3);
        assert_eq!(dirs[0], vec2(1.0, 0.0));
        assert_eq!(dirs[1], vec2(0.5, 0.5));
        assert_eq!(dirs[2], vec2(0.0, 1.0));
    }

    #[test]
    fn base_directions_sit_on_the_base_plane() {
        let cone = Cone::orthant(2);
        let z_hat = vec2(2.0, 1.0);
        let base = make_base(&cone, &z_hat, 7).unwrap();
        for dir in base.directions() {
            assert_relative_eq!(dir.dot(&z_hat), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn boundary_z_hat_is_rejected() {
        let cone = Cone::orthant(2);
        let err = make_base(&cone, &vec2(2.0, 0.0), 3).unwrap_err();
        assert!(matches!(err, Error::InvalidBase(_)), "{err}");
    }

    #[test]
    fn endpoints_are_always_included() {
        let cone = Cone::orthant(2);
        for m in [2usize, 5, 41, 101] {
            let base = make_base(&cone, &vec2(1.0, 1.0), m).unwrap();
            assert_eq!(base.directions()[0], vec2(1.0, 0.0));
            assert_eq!(base.directions()[m - 1], vec2(0.0, 1.0));
        }
    }

    #[test]
    fn directions_are_pairwise_distinct() {
        let cone = Cone::orthant(2);
        let base = make_base(&cone, &vec2(1.0, 1.0), 41).unwrap();
        for i in 0..base.len() {
            for j in (i + 1)..base.len() {
                assert!((&base.directions()[i] - &base.directions()[j]).amax() > 1e-12);
            }
        }
    }

    #[test]
    fn too_small_m_is_rejected() {
        let cone = Cone::orthant(2);
        assert!(make_base(&cone, &vec2(1.0, 1.0), 1).is_err());
    }

    #[test]
    fn zero_generator_is_rejected() {
        let err = Cone::new(2, vec![vec2(0.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::InvalidCone(_)));
    }

    #[test]
    fn duplicate_generators_are_rejected_at_base_construction() {
        let cone = Cone::new(2, vec![vec2(1.0, 0.0), vec2(2.0, 0.0)]).unwrap();
        let err = make_base(&cone, &vec2(1.0, 1.0), 3).unwrap_err();
        assert!(matches!(err, Error::InvalidBase(_)));
    }

    #[test]
    fn three_generator_cone_keeps_vertices_first() {
        let gens = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        ];
        let cone = Cone::new(3, gens).unwrap();
        let z_hat = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let base = make_base(&cone, &z_hat, 5).unwrap();
        assert_eq!(base.len(), 5);
        for i in 0..3 {
            let mut e = DVector::zeros(3);
            e[i] = 1.0;
            assert_eq!(base.directions()[i], e);
        }
        for dir in base.directions() {
            assert_relative_eq!(dir.dot(&z_hat), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthant_dual_membership() {
        let cone = Cone::orthant(2);
        assert!(cone.contains_dual(&vec2(0.3, 0.7)));
        assert!(cone.contains_dual(&vec2(0.0, 1.0)));
        assert!(!cone.contains_dual(&vec2(-0.1, 1.0)));
    }
}
