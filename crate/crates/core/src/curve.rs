//! Closed curves in the plane or in space, embedded spheres, and the circle
//! parameter they are evaluated at.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PegError, Result};

/// Points are always stored in R^3; planar curves keep `z = 0`.
pub type Point = Vector3<f64>;

/// Step used for secant derivatives of non-smooth representations.
pub const SECANT_STEP: f64 = 1e-6;

/// Number of polygonization points used by the self-intersection diagnostic.
pub const DIAGNOSTIC_SAMPLES: usize = 512;

/// Reduce a real number to its representative in `[0, 1)`.
pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `v` modulo 1 in `[-1/2, 1/2)`.
pub fn wrap_centered(v: f64) -> f64 {
    let r = wrap_unit(v + 0.5) - 0.5;
    if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// A point of the circle R/Z, stored as its representative in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(v: f64) -> Self {
        CirclePoint(wrap_unit(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Normalized length of the counter-clockwise arc from `self` to `other`.
    pub fn arc_to(self, other: CirclePoint) -> f64 {
        wrap_unit(other.0 - self.0)
    }

    /// Length of the shorter arc between the two points, in `[0, 1/2]`.
    pub fn distance(self, other: CirclePoint) -> f64 {
        let a = self.arc_to(other);
        a.min(1.0 - a)
    }
}

impl Add<f64> for CirclePoint {
    type Output = CirclePoint;
    fn add(self, t: f64) -> CirclePoint {
        CirclePoint::new(self.0 + t)
    }
}

/// `y - x` is the arc length from `x` to `y`, in `[0, 1)`.
impl Sub for CirclePoint {
    type Output = f64;
    fn sub(self, rhs: CirclePoint) -> f64 {
        rhs.arc_to(self)
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Trigonometric polynomial curve: `c + sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierCurve {
    pub constant: Point,
    /// `cos[k-1]` multiplies `cos(2 pi k t)`.
    pub cos: Vec<Point>,
    pub sin: Vec<Point>,
}

impl FourierCurve {
    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn eval(&self, t: f64) -> Point {
        let (s1, c1) = (TAU * t).sin_cos();
        let (mut ck, mut sk) = (c1, s1);
        let mut p = self.constant;
        for k in 0..self.degree() {
            if let Some(a) = self.cos.get(k) {
                p += a * ck;
            }
            if let Some(b) = self.sin.get(k) {
                p += b * sk;
            }
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        p
    }

    fn eval_with_derivative(&self, t: f64) -> (Point, Point) {
        let (s1, c1) = (TAU * t).sin_cos();
        let (mut ck, mut sk) = (c1, s1);
        let mut p = self.constant;
        let mut d = Point::zeros();
        for k in 0..self.degree() {
            let w = TAU * (k + 1) as f64;
            if let Some(a) = self.cos.get(k) {
                p += a * ck;
                d -= a * (w * sk);
            }
            if let Some(b) = self.sin.get(k) {
                p += b * sk;
                d += b * (w * ck);
            }
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        (p, d)
    }

    fn derivative(&self, t: f64) -> Point {
        let (s1, c1) = (TAU * t).sin_cos();
        let (mut ck, mut sk) = (c1, s1);
        let mut d = Point::zeros();
        for k in 0..self.degree() {
            let w = TAU * (k + 1) as f64;
            if let Some(a) = self.cos.get(k) {
                d -= a * (w * sk);
            }
            if let Some(b) = self.sin.get(k) {
                d += b * (w * ck);
            }
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        d
    }
}

/// Closed polygon evaluated at constant speed along its perimeter.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<Point>,
    /// Normalized cumulative perimeter, `cumulative[0] = 0`, last entry `1`.
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(PegError::InvalidInput(
                "a polyline needs at least 3 vertices".into(),
            ));
        }
        let n = vertices.len();
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        let mut total = 0.0;
        for i in 0..n {
            let len = (vertices[(i + 1) % n] - vertices[i]).norm();
            if len == 0.0 {
                return Err(PegError::InvalidInput(format!(
                    "polyline vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
            total += len;
            cumulative.push(total);
        }
        for c in &mut cumulative {
            *c /= total;
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Polyline {
            vertices,
            cumulative,
        })
    }

    fn eval(&self, t: f64) -> Point {
        let s = wrap_unit(t);
        let n = self.vertices.len();
        let i = self
            .cumulative
            .partition_point(|&c| c <= s)
            .saturating_sub(1)
            .min(n - 1);
        let span = self.cumulative[i + 1] - self.cumulative[i];
        let lambda = (s - self.cumulative[i]) / span;
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % n];
        a + (b - a) * lambda
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveRepr {
    Fourier(FourierCurve),
    Polyline(Polyline),
}

/// A closed curve `S^1 -> R^d`, `d` in {2, 3}. Injectivity is not enforced;
/// see [`ClosedCurve::self_intersections`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedCurve {
    dim: usize,
    repr: CurveRepr,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(PegError::InvalidInput(format!(
            "ambient dimension must be 2 or 3, got {dim}"
        )))
    }
}

fn flatten(p: &mut Point, dim: usize) {
    if dim == 2 {
        p.z = 0.0;
    }
}

impl ClosedCurve {
    pub fn fourier(dim: usize, constant: Point, cos: Vec<Point>, sin: Vec<Point>) -> Result<Self> {
        check_dim(dim)?;
        let mut f = FourierCurve { constant, cos, sin };
        flatten(&mut f.constant, dim);
        f.cos
            .iter_mut()
            .chain(f.sin.iter_mut())
            .for_each(|p| flatten(p, dim));
        if f.cos.iter().chain(f.sin.iter()).all(|p| p.norm() == 0.0) {
            return Err(PegError::InvalidInput("constant Fourier curve".into()));
        }
        Ok(ClosedCurve {
            dim,
            repr: CurveRepr::Fourier(f),
        })
    }

    pub fn polyline(dim: usize, mut vertices: Vec<Point>) -> Result<Self> {
        check_dim(dim)?;
        vertices.iter_mut().for_each(|p| flatten(p, dim));
        Ok(ClosedCurve {
            dim,
            repr: CurveRepr::Polyline(Polyline::new(vertices)?),
        })
    }

    /// Circle of the given radius, `t = 0` at `(r, 0)`.
    pub fn circle(radius: f64) -> Result<Self> {
        Self::ellipse(radius, radius)
    }

    /// Ellipse `(a cos 2 pi t, b sin 2 pi t)`.
    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(PegError::InvalidInput(
                "ellipse semi-axes must be positive".into(),
            ));
        }
        Self::fourier(
            2,
            Point::zeros(),
            vec![Point::new(a, 0.0, 0.0)],
            vec![Point::new(0.0, b, 0.0)],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &CurveRepr {
        &self.repr
    }

    /// Fourier curves are smooth; polylines are only piecewise linear.
    pub fn is_smooth(&self) -> bool {
        matches!(self.repr, CurveRepr::Fourier(_))
    }

    pub fn eval(&self, t: f64) -> Point {
        let t = wrap_unit(t);
        match &self.repr {
            CurveRepr::Fourier(f) => f.eval(t),
            CurveRepr::Polyline(p) => p.eval(t),
        }
    }

    pub fn eval_at(&self, t: CirclePoint) -> Point {
        self.eval(t.value())
    }

    /// The point as a `dim`-length coordinate vector.
    pub fn coords(&self, t: f64) -> Vec<f64> {
        let p = self.eval(t);
        p.as_slice()[..self.dim].to_vec()
    }

    /// Velocity with respect to the circle parameter. Polylines use a central
    /// secant with step [`SECANT_STEP`].
    pub fn derivative(&self, t: f64) -> Point {
        let t = wrap_unit(t);
        match &self.repr {
            CurveRepr::Fourier(f) => f.derivative(t),
            CurveRepr::Polyline(p) => {
                (p.eval(t + SECANT_STEP) - p.eval(t - SECANT_STEP)) / (2.0 * SECANT_STEP)
            }
        }
    }

    /// Point and velocity in one pass.
    pub fn eval_with_derivative(&self, t: f64) -> (Point, Point) {
        match &self.repr {
            CurveRepr::Fourier(f) => f.eval_with_derivative(wrap_unit(t)),
            CurveRepr::Polyline(_) => (self.eval(t), self.derivative(t)),
        }
    }

    /// Euclidean distance between the points at parameters `s` and `t`.
    pub fn chord(&self, s: f64, t: f64) -> f64 {
        (self.eval(s) - self.eval(t)).norm()
    }

    pub fn sample(&self, count: usize) -> Vec<Point> {
        (0..count)
            .map(|i| self.eval(i as f64 / count as f64))
            .collect()
    }

    /// Shoelace area of a fine polygonization of the xy-projection.
    pub fn signed_area(&self) -> f64 {
        let pts = self.sample(4 * DIAGNOSTIC_SAMPLES);
        let n = pts.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    /// Same trace, opposite direction: `t -> -t`.
    pub fn reversed(&self) -> ClosedCurve {
        let repr = match &self.repr {
            CurveRepr::Fourier(f) => CurveRepr::Fourier(FourierCurve {
                constant: f.constant,
                cos: f.cos.clone(),
                sin: f.sin.iter().map(|b| -b).collect(),
            }),
            CurveRepr::Polyline(p) => {
                let mut v = p.vertices.clone();
                v.reverse();
                v.rotate_right(1);
                CurveRepr::Polyline(Polyline::new(v).expect("reversal keeps a valid polyline"))
            }
        };
        ClosedCurve {
            dim: self.dim,
            repr,
        }
    }

    /// Apply `p -> m p + shift`, producing a curve in R^3.
    pub fn transformed(&self, m: &Matrix3<f64>, shift: Point) -> ClosedCurve {
        let repr = match &self.repr {
            CurveRepr::Fourier(f) => CurveRepr::Fourier(FourierCurve {
                constant: m * f.constant + shift,
                cos: f.cos.iter().map(|a| m * a).collect(),
                sin: f.sin.iter().map(|b| m * b).collect(),
            }),
            CurveRepr::Polyline(p) => CurveRepr::Polyline(
                Polyline::new(p.vertices.iter().map(|v| m * v + shift).collect())
                    .expect("affine image of a polyline"),
            ),
        };
        ClosedCurve { dim: 3, repr }
    }

    /// The same curve regarded as a space curve.
    pub fn to_space(&self) -> ClosedCurve {
        ClosedCurve {
            dim: 3,
            repr: self.repr.clone(),
        }
    }

    /// Pairs of non-adjacent segments of a [`DIAGNOSTIC_SAMPLES`]-point
    /// polygonization that intersect (planar) or come within `1e-9` (space).
    pub fn self_intersections(&self) -> Vec<(usize, usize)> {
        let pts = self.sample(DIAGNOSTIC_SAMPLES);
        let n = pts.len();
        let mut hits = Vec::new();
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (pts[i], pts[(i + 1) % n]);
                let (c, d) = (pts[j], pts[(j + 1) % n]);
                let crosses = if self.dim == 2 {
                    segments_cross_2d(a, b, c, d)
                } else {
                    segment_distance(a, b, c, d) < 1e-9
                };
                if crosses {
                    hits.push((i, j));
                }
            }
        }
        hits
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross_2d(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Minimum distance between segments `ab` and `cd`.
pub fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let u = b - a;
    let v = d - c;
    let w = a - c;
    let (uu, uv, vv, uw, vw) = (u.dot(&u), u.dot(&v), v.dot(&v), u.dot(&w), v.dot(&w));
    let den = uu * vv - uv * uv;
    let mut s = if den > 1e-300 {
        ((uv * vw - vv * uw) / den).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = if vv > 0.0 {
        ((uv * s + vw) / vv).clamp(0.0, 1.0)
    } else {
        0.0
    };
    if uu > 0.0 {
        s = ((uv * t - uw) / uu).clamp(0.0, 1.0);
    }
    if vv > 0.0 {
        t = ((uv * s + vw) / vv).clamp(0.0, 1.0);
    }
    (a + u * s - (c + v * t)).norm()
}

/// The unit sphere scaled coordinatewise by `(lx, ly, lz)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSphere {
    pub scale: [f64; 3],
}

impl EmbeddedSphere {
    pub fn new(scale: [f64; 3]) -> Result<Self> {
        if scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            Ok(EmbeddedSphere { scale })
        } else {
            Err(PegError::InvalidInput(
                "sphere scales must be positive".into(),
            ))
        }
    }

    /// Image of a unit vector `q`.
    pub fn eval(&self, q: &Point) -> Point {
        Point::new(
            self.scale[0] * q.x,
            self.scale[1] * q.y,
            self.scale[2] * q.z,
        )
    }

    pub fn is_round(&self) -> bool {
        self.scale[0] == self.scale[1] && self.scale[1] == self.scale[2]
    }
}
