//! Equilateral quadrilaterals on space curves and their planarity.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::quad::{QuadSystem, QuadTarget};
use super::{chart_vertices, ResidualSystem, SystemKind};
use crate::curve::{ClosedCurve, Point};
use crate::error::{PegError, Result};
use crate::polygon::PolygonParam;

/// Triangles thinner than this (in height over the shared diagonal) have no
/// well-defined dihedral angle.
const DEGENERATE_HEIGHT: f64 = 1e-12;

/// `(e12 - e23, e23 - e34, e34 - e41)` for chord lengths of a space curve.
pub fn rhombus3d_residual(curve: &ClosedCurve, p: &PolygonParam) -> [f64; 3] {
    let f = super::quad::edge_diag_map(curve, p);
    [f[0] - f[1], f[1] - f[2], f[2] - f[3]]
}

fn points(curve: &ClosedCurve, p: &PolygonParam) -> Vec<Point> {
    p.vertices().iter().map(|x| curve.eval_at(*x)).collect()
}

/// Dihedral angle in `[0, 2 pi)` along the diagonal `x1 x3` between the
/// triangles `(x1, x2, x3)` and `(x1, x3, x4)`. A planar convex rhombus has
/// angle `pi`.
pub fn planarity_angle(curve: &ClosedCurve, p: &PolygonParam) -> Result<f64> {
    dihedral(&points(curve, p))
}

fn dihedral(v: &[Point]) -> Result<f64> {
    let axis = v[2] - v[0];
    let len = axis.norm();
    if len < DEGENERATE_HEIGHT {
        return Err(PegError::Degenerate(
            "diagonal x1 x3 has zero length".into(),
        ));
    }
    let a = axis / len;
    let perp = |w: Point| w - a * a.dot(&w);
    let (n1, n2) = (perp(v[1] - v[0]), perp(v[3] - v[0]));
    if n1.norm() < DEGENERATE_HEIGHT * len || n2.norm() < DEGENERATE_HEIGHT * len {
        return Err(PegError::Degenerate(
            "a triangle of the rhombus is flat".into(),
        ));
    }
    let angle = a.dot(&n1.cross(&n2)).atan2(n1.dot(&n2));
    Ok(if angle < 0.0 { angle + TAU } else { angle })
}

/// Normalized triple product of the first three edge vectors; zero iff the
/// four points are coplanar.
pub fn coplanarity(curve: &ClosedCurve, p: &PolygonParam) -> f64 {
    triple(&points(curve, p))
}

fn triple(v: &[Point]) -> f64 {
    let (e1, e2, e3) = (v[1] - v[0], v[2] - v[1], v[3] - v[2]);
    let denom = e1.norm() * e2.norm() * e3.norm();
    if denom == 0.0 {
        return 0.0;
    }
    e1.cross(&e2).dot(&e3) / denom
}

/// The rhombus family of a space curve, with planarity diagnostics.
pub struct Rhombus3dSystem<'a> {
    curve: &'a ClosedCurve,
    inner: QuadSystem<'a>,
}

impl<'a> Rhombus3dSystem<'a> {
    pub fn new(curve: &'a ClosedCurve) -> Self {
        Rhombus3dSystem {
            curve,
            inner: QuadSystem::new(curve, QuadTarget::Rhombus),
        }
    }

    pub fn curve(&self) -> &'a ClosedCurve {
        self.curve
    }

    /// Triple product at a chart point (event function of the planarity search).
    pub fn coplanarity_at(&self, u: &[f64]) -> f64 {
        let v: Vec<_> = chart_vertices(u)
            .iter()
            .map(|&t| self.curve.eval(t))
            .collect();
        triple(&v)
    }

    pub fn angle_at(&self, u: &[f64]) -> Result<f64> {
        let v: Vec<_> = chart_vertices(u)
            .iter()
            .map(|&t| self.curve.eval(t))
            .collect();
        dihedral(&v)
    }

    /// Largest distance between two of the four points.
    pub fn diameter_at(&self, u: &[f64]) -> f64 {
        let v: Vec<_> = chart_vertices(u)
            .iter()
            .map(|&t| self.curve.eval(t))
            .collect();
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }
}

impl ResidualSystem for Rhombus3dSystem<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::Rhombus3d
    }
    fn domain_dim(&self) -> usize {
        4
    }
    fn codomain_dim(&self) -> usize {
        3
    }
    fn symmetry_order(&self) -> usize {
        4
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        self.inner.residual(u)
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        self.inner.jacobian(u)
    }
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        self.inner.boundary_distance(u)
    }
    fn periodic(&self) -> Vec<usize> {
        vec![0]
    }
    fn act(&self, u: &[f64]) -> Vec<f64> {
        self.inner.act(u)
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        self.inner.winding_coordinate(u)
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        self.inner.polygon(u)
    }
}
