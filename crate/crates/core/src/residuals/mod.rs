//! Test maps as residual systems.
//!
//! Each system maps chart coordinates to a residual vector whose zero set is
//! the polygon family of interest. Systems on `P_n` use the chart
//! `(x, t_0, ..., t_{n-2})` with a lifted (unreduced) base coordinate.

mod ngon;
mod octahedron;
mod quad;
mod rhombus;

pub use ngon::{isosceles_defects, triangle_residual, EdgeRatioSystem, TriangleSystem};
pub use octahedron::{
    min_separation, octahedral_group, octahedron_edges, octahedron_residual, GroupElement,
    OctahedronSystem, FAT_DIAGONAL_GUARD,
};
pub use quad::{
    diagonal_angle, edge_diag_map, parallelogram_residual, rectangle_residual, shape_deviation,
    special_quad_residual, square_residual, ParallelogramSystem, QuadSystem, QuadTarget, SlicePath,
    SpecialQuadFlags, SpecialQuadSystem, TIE_TOL,
};
pub use rhombus::{coplanarity, planarity_angle, rhombus3d_residual, Rhombus3dSystem};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::Metric;
use crate::polygon::{chart_shift, chart_star_base, PolygonParam};

/// Step of the central-difference Jacobian.
pub const FD_STEP: f64 = 1e-6;

/// Descriptor of a residual system, used in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    Square,
    EdgeRatio {
        ratios: Vec<f64>,
    },
    SpecialQuad {
        size: Option<f64>,
    },
    Parallelogram {
        ratio: f64,
    },
    Rectangle,
    Triangle,
    TwoMetric,
    Rhombus3d,
    Octahedron {
        scale: [f64; 3],
    },
    Augmented {
        base: Box<SystemKind>,
        extra: Vec<String>,
    },
    Perturbed {
        base: Box<SystemKind>,
        delta: f64,
    },
}

/// A smooth residual map on chart coordinates.
pub trait ResidualSystem: Sync {
    fn kind(&self) -> SystemKind;

    /// Number of chart coordinates.
    fn domain_dim(&self) -> usize;

    fn codomain_dim(&self) -> usize;

    /// Order of the cyclic group acting on the zero set; 1 if none.
    fn symmetry_order(&self) -> usize {
        1
    }

    fn residual(&self, u: &[f64]) -> DVector<f64>;

    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        fd_jacobian(self, u, FD_STEP)
    }

    /// Distance to the boundary of the domain; `inf` for domains without one.
    fn boundary_distance(&self, _u: &[f64]) -> f64 {
        f64::INFINITY
    }

    /// Indices of coordinates that are periodic with period 1.
    fn periodic(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Generator of the cyclic symmetry, acting on lifted chart coordinates.
    fn act(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    /// Lifted coordinate whose degree around a closed branch is the winding
    /// number; `None` when winding is not defined.
    fn winding_coordinate(&self, _u: &[f64]) -> Option<f64> {
        None
    }

    /// Chart point as a polygon, for systems living on `P_n`.
    fn polygon(&self, _u: &[f64]) -> Option<PolygonParam> {
        None
    }
}

/// Central differences of `sys.residual`.
pub fn fd_jacobian<S: ResidualSystem + ?Sized>(sys: &S, u: &[f64], h: f64) -> DMatrix<f64> {
    let m = sys.codomain_dim();
    let n = u.len();
    let mut j = DMatrix::zeros(m, n);
    let mut v = u.to_vec();
    for c in 0..n {
        v[c] = u[c] + h;
        let fp = sys.residual(&v);
        v[c] = u[c] - h;
        let fm = sys.residual(&v);
        v[c] = u[c];
        j.set_column(c, &((fp - fm) / (2.0 * h)));
    }
    j
}

/// One residual row: `sum coeff * d(v_i, v_j)`.
pub(crate) type DistanceRow = Vec<(usize, usize, f64)>;

/// Evaluate distance rows at lifted vertex parameters, returning the values
/// and the Jacobian with respect to the vertex parameters.
pub(crate) fn eval_rows(
    metric: &dyn Metric,
    verts: &[f64],
    rows: &[DistanceRow],
    want_jacobian: bool,
) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = DVector::zeros(rows.len());
    let mut jv = if want_jacobian {
        DMatrix::zeros(rows.len(), verts.len())
    } else {
        DMatrix::zeros(0, 0)
    };
    for (k, row) in rows.iter().enumerate() {
        for &(i, j, c) in row {
            if want_jacobian {
                let (d, gi, gj) = metric.dist_grad(verts[i], verts[j]);
                r[k] += c * d;
                jv[(k, i)] += c * gi;
                jv[(k, j)] += c * gj;
            } else {
                r[k] += c * metric.dist(verts[i], verts[j]);
            }
        }
    }
    (r, jv)
}

/// Lifted vertex parameters of a `P_n` chart point.
pub(crate) fn chart_vertices(u: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    let mut acc = u[0];
    out.push(acc);
    for t in &u[1..] {
        acc += t;
        out.push(acc);
    }
    out
}

/// Chain rule from vertex parameters to the `P_n` chart:
/// `dv_i/dx = 1`, `dv_i/dt_j = [j < i]`.
pub(crate) fn vertex_to_chart(jv: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = jv.shape();
    let mut j = DMatrix::zeros(m, n);
    for r in 0..m {
        let mut suffix = 0.0;
        for i in (1..n).rev() {
            suffix += jv[(r, i)];
            j[(r, i)] = suffix;
        }
        j[(r, 0)] = suffix + jv[(r, 0)];
    }
    j
}

/// `min(t_0, ..., t_{n-1})` of a `P_n` chart point.
pub(crate) fn chart_boundary_distance(u: &[f64]) -> f64 {
    let last = 1.0 - u[1..].iter().sum::<f64>();
    u[1..].iter().cloned().fold(last, f64::min)
}

/// Shared `P_n` plumbing for systems acting by `shift^step`.
pub(crate) fn pn_act(u: &[f64], step: usize) -> Vec<f64> {
    (0..step).fold(u.to_vec(), |v, _| chart_shift(&v))
}

pub(crate) fn pn_winding(u: &[f64]) -> Option<f64> {
    Some(chart_star_base(u))
}

pub type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// A labelled scalar function appended to a residual system.
pub struct ExtraRow<'a> {
    pub name: String,
    pub func: ScalarFn<'a>,
}

impl<'a> ExtraRow<'a> {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        ExtraRow {
            name: name.into(),
            func: Box::new(func),
        }
    }
}

/// A system with extra scalar equations appended (phase conditions, event
/// functions promoted to equations). Extra rows use central differences.
pub struct Augmented<'a> {
    pub base: &'a dyn ResidualSystem,
    pub extra: Vec<ExtraRow<'a>>,
}

impl<'a> Augmented<'a> {
    pub fn new(base: &'a dyn ResidualSystem, extra: Vec<ExtraRow<'a>>) -> Self {
        Augmented { base, extra }
    }
}

impl ResidualSystem for Augmented<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::Augmented {
            base: Box::new(self.base.kind()),
            extra: self.extra.iter().map(|e| e.name.clone()).collect(),
        }
    }
    fn domain_dim(&self) -> usize {
        self.base.domain_dim()
    }
    fn codomain_dim(&self) -> usize {
        self.base.codomain_dim() + self.extra.len()
    }
    fn symmetry_order(&self) -> usize {
        1
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        let r = self.base.residual(u);
        let mut out = DVector::zeros(self.codomain_dim());
        out.rows_mut(0, r.len()).copy_from(&r);
        for (k, e) in self.extra.iter().enumerate() {
            out[r.len() + k] = (e.func)(u);
        }
        out
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let jb = self.base.jacobian(u);
        let m = jb.nrows();
        let mut j = DMatrix::zeros(self.codomain_dim(), u.len());
        j.rows_mut(0, m).copy_from(&jb);
        let mut v = u.to_vec();
        for (k, e) in self.extra.iter().enumerate() {
            for c in 0..u.len() {
                v[c] = u[c] + FD_STEP;
                let fp = (e.func)(&v);
                v[c] = u[c] - FD_STEP;
                let fm = (e.func)(&v);
                v[c] = u[c];
                j[(m + k, c)] = (fp - fm) / (2.0 * FD_STEP);
            }
        }
        j
    }
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        self.base.boundary_distance(u)
    }
    fn periodic(&self) -> Vec<usize> {
        self.base.periodic()
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        self.base.winding_coordinate(u)
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        self.base.polygon(u)
    }
}

/// Deterministic smooth perturbation `F + delta * b(u) * eta(u)`, where `b` is
/// the boundary distance (capped at 1) and `eta` a seeded trigonometric field.
/// Used only where the unperturbed Jacobian is rank-deficient along a branch.
pub struct Perturbed<'a> {
    pub base: &'a dyn ResidualSystem,
    pub delta: f64,
    /// Per output row: `(amplitude, frequency vector, phase)`.
    modes: Vec<(f64, Vec<f64>, f64)>,
}

impl<'a> Perturbed<'a> {
    pub fn new(base: &'a dyn ResidualSystem, delta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_7a11);
        let modes = (0..base.codomain_dim())
            .map(|_| {
                let freq = (0..base.domain_dim())
                    .map(|_| rng.gen_range(-2i32..=2) as f64)
                    .collect();
                (
                    rng.gen_range(0.5..1.0),
                    freq,
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Perturbed { base, delta, modes }
    }

    fn weight(&self, u: &[f64]) -> f64 {
        self.base.boundary_distance(u).min(1.0)
    }

    fn eta(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.modes.len(),
            self.modes.iter().map(|(a, f, ph)| {
                let arg: f64 = f.iter().zip(u).map(|(fi, ui)| fi * ui).sum();
                a * (std::f64::consts::TAU * arg + ph).sin()
            }),
        )
    }
}

impl ResidualSystem for Perturbed<'_> {
    fn kind(&self) -> SystemKind {
        SystemKind::Perturbed {
            base: Box::new(self.base.kind()),
            delta: self.delta,
        }
    }
    fn domain_dim(&self) -> usize {
        self.base.domain_dim()
    }
    fn codomain_dim(&self) -> usize {
        self.base.codomain_dim()
    }
    fn symmetry_order(&self) -> usize {
        1
    }
    fn residual(&self, u: &[f64]) -> DVector<f64> {
        self.base.residual(u) + self.eta(u) * (self.delta * self.weight(u))
    }
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        self.base.jacobian(u) + perturbation_jacobian(self, u)
    }
    fn boundary_distance(&self, u: &[f64]) -> f64 {
        self.base.boundary_distance(u)
    }
    fn periodic(&self) -> Vec<usize> {
        self.base.periodic()
    }
    fn winding_coordinate(&self, u: &[f64]) -> Option<f64> {
        self.base.winding_coordinate(u)
    }
    fn polygon(&self, u: &[f64]) -> Option<PolygonParam> {
        self.base.polygon(u)
    }
}

fn perturbation_jacobian(p: &Perturbed<'_>, u: &[f64]) -> DMatrix<f64> {
    let m = p.codomain_dim();
    let mut j = DMatrix::zeros(m, u.len());
    let mut v = u.to_vec();
    for c in 0..u.len() {
        v[c] = u[c] + FD_STEP;
        let fp = p.eta(&v) * (p.delta * p.weight(&v));
        v[c] = u[c] - FD_STEP;
        let fm = p.eta(&v) * (p.delta * p.weight(&v));
        v[c] = u[c];
        j.set_column(c, &((fp - fm) / (2.0 * FD_STEP)));
    }
    j
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Max relative deviation between the analytic and finite-difference Jacobians.
    pub fn jacobian_defect(sys: &dyn ResidualSystem, u: &[f64]) -> f64 {
        let a = sys.jacobian(u);
        let n = fd_jacobian(sys, u, FD_STEP);
        let scale = a.abs().max().max(1.0);
        (a - n).abs().max() / scale
    }
}
