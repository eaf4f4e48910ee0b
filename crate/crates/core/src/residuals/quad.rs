//! Quadrilateral test maps: squares, rectangles, parallelograms and special
//! quadrilaterals.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    chart_boundary_distance, chart_vertices, eval_rows, pn_act, pn_winding, vertex_to_chart,
    DistanceRow, ResidualSystem, SystemKind,
};
use crate::curve::{wrap_unit, CirclePoint, ClosedCurve};
use crate::error::{PegError, Result};
use crate::field::Metric;
use crate::polygon::PolygonParam;

/// Width of the band around `a = b` in which a special quadrilateral is
/// flagged as degenerate.
pub const TIE_TOL: f64 = 1e-9;

/// Vertex index pairs of `(e12, e23, e34, e41, d13, d24)`.
const EDGE_DIAG: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)];

/// Four edges and two diagonals, `(e12, e23, e34, e41, d13, d24)`.
pub fn edge_diag_map(metric: &dyn Metric, p: &PolygonParam) -> [f64; 6] {
    assert_eq!(p.n(), 4, "edge_diag_map needs a quadrilateral");
    let v = p.vertices();
    EDGE_DIAG.map(|(i, j)| metric.dist(v[i].value(), v[j].value()))
}

pub fn square_residual(metric: &dyn Metric, p: &PolygonParam) -> [f64; 4] {
    let f = edge_diag_map(metric, p);
    [f[0] - f[1], f[1] - f[2], f[2] - f[3], f[4] - f[5]]
}

pub fn rectangle_residual(metric: &dyn Metric, p: &PolygonParam) -> [f64; 3] {
    let f = edge_diag_map(metric, p);
    [f[0] - f[2], f[1] - f[3], f[4] - f[5]]
}

/// Diagonal midpoint offset (two coordinates) and the aspect-ratio row
/// `(e12 + e34) - r (e23 + e41)`.
pub fn parallelogram_residual(curve: &ClosedCurve, p: &PolygonParam, r: f64) -> [f64; 3] {
    let v: Vec<_> = p.vertices().iter().map(|x| curve.eval_at(*x)).collect();
    let mid = (v[0] + v[2]) - (v[1] + v[3]);
    let e = |i: usize, j: usize| (v[i] - v[j]).norm();
    [mid.x, mid.y, (e(0, 1) + e(2, 3)) - r * (e(1, 2) + e(3, 0))]
}

/// Which quotient of the edge/diagonal map a [`QuadSystem`] solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadTarget {
    /// `(e12-e23, e23-e34, e34-e41, d13-d24)`, isolated zeros.
    Square,
    /// `(e12-e34, e23-e41, d13-d24)`, one-dimensional.
    Rectangle,
    /// `(e12-e23, e23-e34, e34-e41)`, the rhombus family.
    Rhombus,
    /// `(e12-e23, e23-e34, d13-d24)`, the special-quadrilateral set on all of `P_4`.
    SpecialQuad,
}

impl QuadTarget {
    fn rows(self) -> Vec<DistanceRow> {
        let d = |a: (usize, usize), b: (usize, usize)| vec![(a.0, a.1, 1.0), (b.0, b.1, -1.0)];
        let [e12, e23, e34, e41, d13, d24] = EDGE_DIAG;
        match self {
            QuadTarget::Square => vec![d(e12, e23), d(e23, e34), d(e34, e41), d(d13, d24)],
            QuadTarget::Rectangle => vec![d(e12, e34), d(e23, e41), d(d13, d24)],
            QuadTarget::Rhombus => vec![d(e12, e23), d(e23, e34), d(e34, e41)],
            QuadTarget::SpecialQuad => vec![d(e12, e23), d(e23, e34), d(d13, d24)],
        }
    }

    fn symmetry_order(self) -> usize {
        match self {
            QuadTarget::SpecialQuad => 1,
            _ => 4,
        }
    }
}

/// A distance-only quadrilateral system on the `P_4` chart.
pub struct QuadSystem<'a> {
    metric: &'a dyn Metric,
    target: QuadTarget,
    rows: Vec<DistanceRow>,
}

impl<'a> QuadSystem<'a> {
    pub fn new(metric: &'a dyn Metric, target: QuadTarget) -> Self {
        QuadSystem {
            metric,
            target,
            rows: target.rows(),
        }
    }

    pub fn square(metric: &'a dyn Metric) -> Self {
        Self::new(metric, QuadTarget::Square)
    }

    pub fn rectangle(metric: &'a dyn Metric) -> Self {
        Self::new(metric, QuadTarget::Rectangle)
    }

    pub fn rhombus(metric: &'a dyn Metric) -> Self {
        Self::new(metric, QuadTarget::Rhombus)
    }

    pub fn target(&self) -> QuadTarget {
        self.target
    }

    pub fn metric(&self) -> &'a dyn Metric {
        self.metric
    }
}

impl ResidualSystem for QuadSystem<'_> {
    fn kind(&self) -> SystemKind {
        match self.target {
            QuadTarget::Square => SystemKind::Square,
            QuadTarget::Rectangle => SystemKind::Rectangle,
            QuadTarget::Rhombus => SystemKind::EdgeRatio {
                ratios: vec![1.0; 3],
            },
            QuadTarget::SpecialQuad => SystemKind::SpecialQuad { size: None },
        }
    }
    fn domain_dim(&self) -> usize {
        4
    }
    fn codomain_dim(&self) -> usize {
        self.rows.len()
    }
    fn symmetry_order(&self) -> usize {
        self.target.symmetry_order()
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        eval_rows(self.metric, &chart_vertices(u), &self.rows, false).0
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        vertex_to_chart(&eval_rows(self.metric, &chart_vertices(u), &self.rows, true).1)
    }
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        chart_boundary_distance(u)
    }
    fn periodic(&self) -> Vec<usize> {
        vec![0]
    }
    fn act(&self, u: &[f64]) -> Vec<f64> {
        pn_act(u, 1)
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        pn_winding(u)
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        Some(PolygonParam::from_chart(u))
    }
}

/// Parallelograms of aspect ratio `r` on a planar curve.
pub struct ParallelogramSystem<'a> {
    curve: &'a ClosedCurve,
    ratio: f64,
}

impl<'a> ParallelogramSystem<'a> {
    pub fn new(curve: &'a ClosedCurve, ratio: f64) -> Result<Self> {
        if curve.dim() != 2 {
            return Err(PegError::InvalidInput(
                "parallelogram system needs a planar curve".into(),
            ));
        }
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(PegError::InvalidInput(format!(
                "aspect ratio must be positive, got {ratio}"
            )));
        }
        Ok(ParallelogramSystem { curve, ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `(e12 + e34) / (e23 + e41)` at a chart point.
    pub fn aspect(&self, u: &[f64]) -> f64 {
        let v: Vec<_> = chart_vertices(u)
            .iter()
            .map(|&t| self.curve.eval(t))
            .collect();
        let e = |i: usize, j: usize| (v[i] - v[j]).norm();
        (e(0, 1) + e(2, 3)) / (e(1, 2) + e(3, 0))
    }
}

impl ResidualSystem for ParallelogramSystem<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::Parallelogram { ratio: self.ratio }
    }
    fn domain_dim(&self) -> usize {
        4
    }
    fn codomain_dim(&self) -> usize {
        3
    }
    fn symmetry_order(&self) -> usize {
        if self.ratio == 1.0 {
            4
        } else {
            2
        }
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        let v: Vec<_> = chart_vertices(u)
            .iter()
            .map(|&t| self.curve.eval(t))
            .collect();
        let mid = (v[0] + v[2]) - (v[1] + v[3]);
        let e = |i: usize, j: usize| (v[i] - v[j]).norm();
        DVector::from_row_slice(&[
            mid.x,
            mid.y,
            (e(0, 1) + e(2, 3)) - self.ratio * (e(1, 2) + e(3, 0)),
        ])
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let t = chart_vertices(u);
        let v: Vec<_> = t.iter().map(|&s| self.curve.eval(s)).collect();
        let dv: Vec<_> = t.iter().map(|&s| self.curve.derivative(s)).collect();
        let mut jv = DMatrix::zeros(3, 4);
        for (i, sign) in [(0, 1.0), (1, -1.0), (2, 1.0), (3, -1.0)] {
            jv[(0, i)] = sign * dv[i].x;
            jv[(1, i)] = sign * dv[i].y;
        }
        for (i, j, c) in [
            (0, 1, 1.0),
            (2, 3, 1.0),
            (1, 2, -self.ratio),
            (3, 0, -self.ratio),
        ] {
            let d = v[i] - v[j];
            let n = d.norm();
            if n > 0.0 {
                let unit = d / n;
                jv[(2, i)] += c * unit.dot(&dv[i]);
                jv[(2, j)] -= c * unit.dot(&dv[j]);
            }
        }
        vertex_to_chart(&jv)
    }
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        chart_boundary_distance(u)
    }
    fn periodic(&self) -> Vec<usize> {
        vec![0]
    }
    fn act(&self, u: &[f64]) -> Vec<f64> {
        pn_act(u, 4 / self.symmetry_order())
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        pn_winding(u)
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        Some(PolygonParam::from_chart(u))
    }
}

/// A loop `t -> (y1(t), y4(t))` in the space of distinct point pairs, with
/// `y1(t) = t + sum_k c_k sin(2 pi k t) / (2 pi k)` and
/// `y4(t) = t + epsilon + sum_k c'_k sin(2 pi k t) / (2 pi k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicePath {
    pub epsilon: f64,
    #[serde(default)]
    pub first: Vec<f64>,
    #[serde(default)]
    pub last: Vec<f64>,
}

impl SlicePath {
    /// The standard path `(id, id + epsilon)`.
    pub fn standard(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, Vec::new(), Vec::new())
    }

    /// Rejects paths that are not monotone or leave the open pair space.
    pub fn new(epsilon: f64, first: Vec<f64>, last: Vec<f64>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(PegError::InvalidInput(format!(
                "size must lie in (0, 1), got {epsilon}"
            )));
        }
        let total = |c: &[f64]| c.iter().map(|x| x.abs()).sum::<f64>();
        if total(&first) >= 1.0 || total(&last) >= 1.0 {
            return Err(PegError::InvalidInput("path is not monotone".into()));
        }
        let path = SlicePath {
            epsilon,
            first,
            last,
        };
        let bad = (0..1000)
            .map(|i| path.size(i as f64 / 1000.0))
            .any(|s| s <= 0.0 || s >= 1.0);
        if bad {
            return Err(PegError::InvalidInput(
                "path leaves the space of distinct pairs".into(),
            ));
        }
        Ok(path)
    }

    fn wobble(c: &[f64], t: f64) -> (f64, f64) {
        c.iter().enumerate().fold((0.0, 0.0), |(v, d), (i, a)| {
            let w = TAU * (i + 1) as f64;
            let (s, co) = (w * t).sin_cos();
            (v + a * s / w, d + a * co)
        })
    }

    /// Lifted `(y1(t), y4(t))` and their derivatives.
    pub fn eval(&self, t: f64) -> (f64, f64, f64, f64) {
        let (w1, d1) = Self::wobble(&self.first, t);
        let (w4, d4) = Self::wobble(&self.last, t);
        (t + w1, t + self.epsilon + w4, 1.0 + d1, 1.0 + d4)
    }

    /// Lifted size `y4(t) - y1(t)`.
    pub fn size(&self, t: f64) -> f64 {
        let (a, b, _, _) = self.eval(t);
        b - a
    }
}

/// Classifier data of a special-quadrilateral candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialQuadFlags {
    /// The common edge length `e12`.
    pub a: f64,
    /// The closing edge `e41`.
    pub b: f64,
    /// `x4 - x1` as an arc in `[0, 1)`.
    pub size: f64,
    /// `a >= b` (ties included).
    pub is_special: bool,
    /// `|a - b|` within [`TIE_TOL`].
    pub tie_degenerate: bool,
}

impl SpecialQuadFlags {
    pub fn classify(a: f64, b: f64, size: f64) -> Self {
        SpecialQuadFlags {
            a,
            b,
            size,
            is_special: a >= b - TIE_TOL,
            tie_degenerate: (a - b).abs() <= TIE_TOL,
        }
    }
}

/// Residual of the special-quadrilateral slice at `(y1(t), x2, x3, y4(t))`.
/// The four points must be in counter-clockwise order.
pub fn special_quad_residual(
    metric: &dyn Metric,
    t: CirclePoint,
    x2: CirclePoint,
    x3: CirclePoint,
    path: &SlicePath,
) -> Result<([f64; 3], SpecialQuadFlags)> {
    let (y1, y4, _, _) = path.eval(t.value());
    let (y1, y4) = (CirclePoint::new(y1), CirclePoint::new(y4));
    let p = PolygonParam::from_vertices(&[y1, x2, x3, y4]).map_err(|_| {
        PegError::InvalidInput("slice vertices are not in counter-clockwise order".into())
    })?;
    if (x2 - y1) + (x3 - x2) + (y4 - x3) >= 1.0 - 1e-12 {
        return Err(PegError::InvalidInput(
            "slice vertices are not in counter-clockwise order".into(),
        ));
    }
    let f = edge_diag_map(metric, &p);
    let flags = SpecialQuadFlags::classify(f[0], f[3], y4 - y1);
    Ok(([f[0] - f[1], f[1] - f[2], f[4] - f[5]], flags))
}

/// The special-quadrilateral system restricted to the slice `P_4(y)`.
///
/// Chart `(t, s1, s2)`: vertices `(y1(t), y1(t)+s1, y1(t)+s1+s2, y4(t))`.
pub struct SpecialQuadSystem<'a> {
    metric: &'a dyn Metric,
    path: SlicePath,
    rows: Vec<DistanceRow>,
}

impl<'a> SpecialQuadSystem<'a> {
    pub fn new(metric: &'a dyn Metric, path: SlicePath) -> Self {
        SpecialQuadSystem {
            metric,
            path,
            rows: QuadTarget::SpecialQuad.rows(),
        }
    }

    pub fn path(&self) -> &SlicePath {
        &self.path
    }

    fn vertices(&self, u: &[f64]) -> [f64; 4] {
        let (y1, y4, _, _) = self.path.eval(u[0]);
        [y1, y1 + u[1], y1 + u[1] + u[2], y4]
    }

    /// Chart coordinates of four vertices, when they lie on the slice.
    pub fn chart_of(&self, t: f64, x2: f64, x3: f64) -> [f64; 3] {
        let (y1, _, _, _) = self.path.eval(t);
        let s1 = wrap_unit(x2 - y1);
        [t, s1, wrap_unit(x3 - y1) - s1]
    }

    pub fn flags(&self, u: &[f64]) -> SpecialQuadFlags {
        let v = self.vertices(u);
        SpecialQuadFlags::classify(
            self.metric.dist(v[0], v[1]),
            self.metric.dist(v[3], v[0]),
            wrap_unit(v[3] - v[0]),
        )
    }
}

impl ResidualSystem for SpecialQuadSystem<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::SpecialQuad {
            size: Some(self.path.epsilon),
        }
    }
    fn domain_dim(&self) -> usize {
        3
    }
    fn codomain_dim(&self) -> usize {
        3
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        eval_rows(self.metric, &self.vertices(u), &self.rows, false).0
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let (_, _, d1, d4) = self.path.eval(u[0]);
        let jv = eval_rows(self.metric, &self.vertices(u), &self.rows, true).1;
        let mut dv = DMatrix::zeros(4, 3);
        dv[(0, 0)] = d1;
        dv[(1, 0)] = d1;
        dv[(1, 1)] = 1.0;
        dv[(2, 0)] = d1;
        dv[(2, 1)] = 1.0;
        dv[(2, 2)] = 1.0;
        dv[(3, 0)] = d4;
        jv * dv
    }
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        let size = self.path.size(u[0]);
        u[1].min(u[2]).min(size - u[1] - u[2])
    }
    fn periodic(&self) -> Vec<usize> {
        vec![0]
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        Some(u[0])
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        let v = self.vertices(u);
        PolygonParam::from_vertices(&v.map(CirclePoint::new)).ok()
    }
}

/// Largest deviation of the six normalized edge/diagonal ratios from those of
/// a target shape; a polygon is `eps`-close to the target when this is `<= eps`.
pub fn shape_deviation(f: &[f64; 6], target: &[f64; 6]) -> f64 {
    let fm = f.iter().cloned().fold(0.0, f64::max);
    let tm = target.iter().cloned().fold(0.0, f64::max);
    if fm == 0.0 || tm == 0.0 {
        return f64::INFINITY;
    }
    f.iter()
        .zip(target)
        .map(|(a, b)| (a / fm - b / tm).abs())
        .fold(0.0, f64::max)
}

/// Angle in `[0, pi]` between the two diagonals of a planar quadrilateral.
pub fn diagonal_angle(curve: &ClosedCurve, p: &PolygonParam) -> f64 {
    let v: Vec<Vector3<f64>> = p.vertices().iter().map(|x| curve.eval_at(*x)).collect();
    let (a, b) = (v[2] - v[0], v[3] - v[1]);
    let c = a.dot(&b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}
