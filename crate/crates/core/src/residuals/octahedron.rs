//! Octahedra inscribed in an axis-scaled sphere.
//!
//! Unknowns are six points of the unit sphere stored as 18 ambient
//! coordinates; the system appends the six unit-norm constraints to the 11
//! edge-equality rows, leaving a one-dimensional zero set.

use nalgebra::{DMatrix, DVector};

use super::{ResidualSystem, SystemKind};
use crate::curve::{EmbeddedSphere, Point};
use crate::error::{PegError, Result};

/// Minimal spherical distance between two vertices.
pub const FAT_DIAGONAL_GUARD: f64 = 0.05;

/// Vertex labels `2k, 2k+1` are opposite; every other pair is an edge.
pub fn octahedron_edges() -> [(usize, usize); 12] {
    let mut out = [(0, 0); 12];
    let mut k = 0;
    for i in 0..6 {
        for j in i + 1..6 {
            if j != (i ^ 1) {
                out[k] = (i, j);
                k += 1;
            }
        }
    }
    out
}

/// Orthonormal basis of the complement of `(1, ..., 1)` in R^12, one row per
/// coordinate: `h_k = (1, ..., 1, -k, 0, ...) / sqrt(k (k + 1))`.
fn edge_basis() -> [[f64; 12]; 11] {
    let mut h = [[0.0; 12]; 11];
    for (r, row) in h.iter_mut().enumerate() {
        let k = (r + 1) as f64;
        let s = (k * (k + 1.0)).sqrt();
        for v in row.iter_mut().take(r + 1) {
            *v = 1.0 / s;
        }
        row[r + 1] = -k / s;
    }
    h
}

fn project(lengths: &[f64; 12]) -> [f64; 11] {
    edge_basis().map(|row| row.iter().zip(lengths).map(|(a, b)| a * b).sum())
}

/// Smallest spherical distance between two of the six points.
pub fn min_separation(q: &[Point]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let c = q[i].normalize().dot(&q[j].normalize()).clamp(-1.0, 1.0);
            m = m.min(c.acos());
        }
    }
    m
}

/// Edge lengths of the image octahedron, projected to the complement of the
/// constant vector. Zero iff all twelve edges are equal. The points are
/// normalized before use.
pub fn octahedron_residual(sphere: &EmbeddedSphere, q: &[Point; 6]) -> Result<[f64; 11]> {
    let sep = min_separation(q);
    if sep <= FAT_DIAGONAL_GUARD {
        return Err(PegError::FatDiagonal {
            min_separation: sep,
        });
    }
    let p: Vec<Point> = q.iter().map(|v| sphere.eval(&v.normalize())).collect();
    let lengths = octahedron_edges().map(|(i, j)| (p[i] - p[j]).norm());
    Ok(project(&lengths))
}

/// A label permutation preserving the three antipodal pairs; `perm[i]` is
/// the new label of vertex `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    pub perm: [usize; 6],
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement {
            perm: [0, 1, 2, 3, 4, 5],
        }
    }

    /// Relabel a configuration: vertex `i` moves to slot `perm[i]`.
    pub fn apply<T: Copy>(&self, q: &[T; 6]) -> [T; 6] {
        let mut out = *q;
        for i in 0..6 {
            out[self.perm[i]] = q[i];
        }
        out
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            perm: other.perm.map(|i| self.perm[i]),
        }
    }
}

/// The 48 label symmetries of the octahedron: permutations of the three
/// antipodal pairs combined with swaps inside each pair.
pub fn octahedral_group() -> Vec<GroupElement> {
    const PAIR_PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::with_capacity(48);
    for sigma in PAIR_PERMS {
        for flips in 0..8usize {
            let mut perm = [0; 6];
            for (i, slot) in perm.iter_mut().enumerate() {
                let (pair, side) = (i / 2, i % 2);
                *slot = 2 * sigma[pair] + (side ^ ((flips >> pair) & 1));
            }
            out.push(GroupElement { perm });
        }
    }
    out
}

/// Six unit vectors in R^3 with equal octahedron edges on the image sphere.
pub struct OctahedronSystem {
    sphere: EmbeddedSphere,
    guard: f64,
}

impl OctahedronSystem {
    pub fn new(sphere: EmbeddedSphere) -> Self {
        OctahedronSystem {
            sphere,
            guard: FAT_DIAGONAL_GUARD,
        }
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn sphere(&self) -> &EmbeddedSphere {
        &self.sphere
    }

    pub fn points(u: &[f64]) -> [Point; 6] {
        std::array::from_fn(|i| Point::new(u[3 * i], u[3 * i + 1], u[3 * i + 2]))
    }

    pub fn coords(q: &[Point; 6]) -> Vec<f64> {
        q.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    /// The twelve edge lengths of the image octahedron.
    pub fn edge_lengths(&self, u: &[f64]) -> [f64; 12] {
        let q = Self::points(u);
        let p = q.map(|v| self.sphere.eval(&v));
        octahedron_edges().map(|(i, j)| (p[i] - p[j]).norm())
    }
}

impl ResidualSystem for OctahedronSystem {
    fn kind(&self) -> SystemKind {
        SystemKind::Octahedron {
            scale: self.sphere.scale,
        }
    }
    fn domain_dim(&self) -> usize {
        18
    }
    fn codomain_dim(&self) -> usize {
        17
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        let mut r = DVector::zeros(17);
        for (k, v) in project(&self.edge_lengths(u)).iter().enumerate() {
            r[k] = *v;
        }
        for (i, q) in Self::points(u).iter().enumerate() {
            r[11 + i] = 0.5 * (q.norm_squared() - 1.0);
        }
        r
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let q = Self::points(u);
        let s = Point::from(self.sphere.scale);
        let p = q.map(|v| self.sphere.eval(&v));
        let mut dl = DMatrix::zeros(12, 18);
        for (e, (i, j)) in octahedron_edges().iter().enumerate() {
            let d = p[*i] - p[*j];
            let n = d.norm();
            if n == 0.0 {
                continue;
            }
            let g = d.component_mul(&s) / n;
            for c in 0..3 {
                dl[(e, 3 * i + c)] += g[c];
                dl[(e, 3 * j + c)] -= g[c];
            }
        }
        let basis = edge_basis();
        let h = DMatrix::from_fn(11, 12, |r, c| basis[r][c]);
        let mut j = DMatrix::zeros(17, 18);
        j.rows_mut(0, 11).copy_from(&(h * dl));
        for (i, v) in q.iter().enumerate() {
            for c in 0..3 {
                j[(11 + i, 3 * i + c)] = v[c];
            }
        }
        j
    }
    /// Margin to the fat-diagonal guard.
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        min_separation(&Self::points(u)) - self.guard
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residuals::test_support::jacobian_defect;
    use nalgebra::{Rotation3, Vector3};
    use proptest::prelude::*;
    use std::collections::HashSet;
    use std::f64::consts::TAU;

    fn round() -> EmbeddedSphere {
        EmbeddedSphere::new([1.0, 1.0, 1.0]).unwrap()
    }

    fn axes() -> [Point; 6] {
        [
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
        ]
    }

    /// Regular octahedron with a 3-fold axis along z: faces at `z = +-1/sqrt 6`,
    /// vertices at radius `1/sqrt 3`. It lies on the sphere scaled by 1/2 in z.
    fn flattened_solution(phase: f64) -> [Point; 6] {
        let r = 1.0 / 3f64.sqrt();
        let h = 1.0 / 6f64.sqrt();
        let top = |k: f64| {
            let a = phase + TAU * k / 3.0;
            Vector3::new(r * a.cos(), r * a.sin(), h / 0.5)
        };
        let t = [top(0.0), top(1.0), top(2.0)];
        [t[0], -t[0], t[1], -t[1], t[2], -t[2]]
    }

    #[test]
    fn edge_pattern() {
        let e = octahedron_edges();
        assert_eq!(e.len(), 12);
        assert!(!e.contains(&(0, 1)) && !e.contains(&(2, 3)) && !e.contains(&(4, 5)));
        let h = edge_basis();
        for a in 0..11 {
            assert!(h[a].iter().sum::<f64>().abs() < 1e-15);
            for b in 0..11 {
                let dot: f64 = h[a].iter().zip(&h[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn regular_octahedron_on_round_sphere() {
        let r = octahedron_residual(&round(), &axes()).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-15));
        let rot = Rotation3::from_euler_angles(0.4, -1.1, 2.3);
        let q = axes().map(|v| rot * v);
        let r = octahedron_residual(&round(), &q).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn flattened_sphere_solution() {
        let sphere = EmbeddedSphere::new([1.0, 1.0, 0.5]).unwrap();
        let q = flattened_solution(0.3);
        for v in &q {
            assert!((v.norm() - 1.0).abs() < 1e-15);
            assert!(v.z.abs() > 0.5);
        }
        let sys = OctahedronSystem::new(sphere);
        let u = OctahedronSystem::coords(&q);
        assert!(sys.residual(&u).amax() < 1e-14);
        for l in sys.edge_lengths(&u) {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fat_diagonal_is_rejected() {
        let mut q = axes();
        q[2] = Vector3::new(1.0, 0.01, 0.0).normalize();
        assert!(matches!(
            octahedron_residual(&round(), &q),
            Err(PegError::FatDiagonal { .. })
        ));
    }

    #[test]
    fn group_has_48_distinct_elements() {
        let g = octahedral_group();
        let set: HashSet<_> = g.iter().map(|e| e.perm).collect();
        assert_eq!(set.len(), 48);
        for a in &g {
            for b in &g {
                assert!(set.contains(&a.compose(b).perm));
            }
            let q = axes();
            let composed = a.compose(&g[7]).apply(&q);
            assert_eq!(composed, a.apply(&g[7].apply(&q)));
        }
    }

    #[test]
    fn three_fold_relabeling_rotates_the_flattened_solution() {
        let q = flattened_solution(0.1);
        let rotated = flattened_solution(0.1 + TAU / 3.0);
        let cycle = GroupElement {
            perm: [4, 5, 0, 1, 2, 3],
        };
        let moved = cycle.apply(&q);
        for i in 0..6 {
            assert!((moved[i] - rotated[i]).norm() < 1e-14);
        }
    }

    fn unit() -> impl Strategy<Value = Point> {
        (0.0..TAU, -1.0..1.0f64).prop_map(|(a, z)| {
            let r = (1.0 - z * z).sqrt();
            Vector3::new(r * a.cos(), r * a.sin(), z)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn residual_norm_is_group_invariant(q in prop::array::uniform6(unit()), g in 0usize..48) {
            let sphere = EmbeddedSphere::new([1.0, 0.8, 0.5]).unwrap();
            prop_assume!(min_separation(&q) > FAT_DIAGONAL_GUARD);
            let a = octahedron_residual(&sphere, &q).unwrap();
            let b = octahedron_residual(&sphere, &octahedral_group()[g].apply(&q)).unwrap();
            let n = |r: &[f64; 11]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n(&a) - n(&b)).abs() < 1e-12);
        }

        #[test]
        fn jacobian_matches_differences(q in prop::array::uniform6(unit())) {
            let sys = OctahedronSystem::new(EmbeddedSphere::new([1.0, 1.0, 0.5]).unwrap());
            prop_assume!(min_separation(&q) > FAT_DIAGONAL_GUARD);
            prop_assert!(jacobian_defect(&sys, &OctahedronSystem::coords(&q)) < 1e-5);
        }
    }
}
