//! Edge-ratio polygons and triangles.

use nalgebra::{DMatrix, DVector};

use super::{
    chart_boundary_distance, chart_vertices, eval_rows, pn_act, pn_winding, vertex_to_chart,
    DistanceRow, ResidualSystem, SystemKind,
};
use crate::curve::CirclePoint;
use crate::error::{PegError, Result};
use crate::field::Metric;
use crate::polygon::PolygonParam;

/// Relative tolerance when comparing ratio vectors for cyclic symmetry.
const RATIO_MATCH_TOL: f64 = 1e-12;

/// `n`-gons with edges `e_i = rho_i * e_n`.
pub struct EdgeRatioSystem<'a> {
    metric: &'a dyn Metric,
    ratios: Vec<f64>,
    rows: Vec<DistanceRow>,
    order: usize,
}

impl<'a> EdgeRatioSystem<'a> {
    /// Rejects ratio vectors violating the polygon inequality: each of
    /// `rho_1, ..., rho_{n-1}, 1` must be smaller than the sum of the others.
    pub fn new(metric: &'a dyn Metric, ratios: Vec<f64>) -> Result<Self> {
        let n = ratios.len() + 1;
        if n < 3 {
            return Err(PegError::InvalidInput("need at least two ratios".into()));
        }
        if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(PegError::InvalidInput("ratios must be positive".into()));
        }
        let mut full = ratios.clone();
        full.push(1.0);
        let total: f64 = full.iter().sum();
        if full.iter().any(|r| *r >= total - r) {
            return Err(PegError::PolygonInequality);
        }
        let rows = (0..n - 1)
            .map(|i| vec![(i, i + 1, 1.0), (n - 1, 0, -ratios[i])])
            .collect();
        let period = (1..=n)
            .find(|k| {
                n.is_multiple_of(*k)
                    && (0..n)
                        .all(|i| (full[i] - full[(i + k) % n]).abs() <= RATIO_MATCH_TOL * full[i])
            })
            .unwrap_or(n);
        Ok(EdgeRatioSystem {
            metric,
            ratios,
            rows,
            order: n / period,
        })
    }

    /// All edges equal.
    pub fn regular(metric: &'a dyn Metric, n: usize) -> Result<Self> {
        Self::new(metric, vec![1.0; n.saturating_sub(1)])
    }

    pub fn n(&self) -> usize {
        self.ratios.len() + 1
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn metric(&self) -> &'a dyn Metric {
        self.metric
    }

    /// Edge lengths `e_1, ..., e_n` at a chart point.
    pub fn edges(&self, u: &[f64]) -> Vec<f64> {
        let v = chart_vertices(u);
        let n = v.len();
        (0..n)
            .map(|i| self.metric.dist(v[i], v[(i + 1) % n]))
            .collect()
    }
}

impl ResidualSystem for EdgeRatioSystem<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::EdgeRatio {
            ratios: self.ratios.clone(),
        }
    }
    fn domain_dim(&self) -> usize {
        self.n()
    }
    fn codomain_dim(&self) -> usize {
        self.n() - 1
    }
    fn symmetry_order(&self) -> usize {
        self.order
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
        pn_act(u, self.n() / self.order)
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        pn_winding(u)
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        Some(PolygonParam::from_chart(u))
    }
}

/// `(d(x,y) - d(y,z), d(y,z) - d(z,x))`.
pub fn triangle_residual(
    metric: &dyn Metric,
    x: CirclePoint,
    y: CirclePoint,
    z: CirclePoint,
) -> [f64; 2] {
    let (a, b, c) = (
        metric.dist(x.value(), y.value()),
        metric.dist(y.value(), z.value()),
        metric.dist(z.value(), x.value()),
    );
    [a - b, b - c]
}

/// Equilateral triangles of a distance function, on the `P_3` chart.
pub struct TriangleSystem<'a> {
    metric: &'a dyn Metric,
    rows: Vec<DistanceRow>,
}

impl<'a> TriangleSystem<'a> {
    pub fn new(metric: &'a dyn Metric) -> Self {
        TriangleSystem {
            metric,
            rows: vec![
                vec![(0, 1, 1.0), (1, 2, -1.0)],
                vec![(1, 2, 1.0), (2, 0, -1.0)],
            ],
        }
    }

    pub fn metric(&self) -> &'a dyn Metric {
        self.metric
    }
}

impl ResidualSystem for TriangleSystem<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::Triangle
    }
    fn domain_dim(&self) -> usize {
        3
    }
    fn codomain_dim(&self) -> usize {
        2
    }
    fn symmetry_order(&self) -> usize {
        3
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

/// The three isosceles defects `(d(x,y) - d(y,z), d(y,z) - d(z,x), d(z,x) - d(x,y))`
/// of a triangle under a second distance function.
pub fn isosceles_defects(metric: &dyn Metric, u: &[f64]) -> [f64; 3] {
    let v = chart_vertices(u);
    let (a, b, c) = (
        metric.dist(v[0], v[1]),
        metric.dist(v[1], v[2]),
        metric.dist(v[2], v[0]),
    );
    [a - b, b - c, c - a]
}
