//! Named test objects: curves, spheres and distance fields.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{ClosedCurve, EmbeddedSphere, Point};
use crate::error::{PegError, Result};
use crate::field::DistanceField;

/// Inventory accepted by [`corpus`], with a one-line description each.
pub const INVENTORY: &[(&str, &str)] = &[
    ("circle", "circle of radius `radius` (default 1)"),
    ("ellipse", "ellipse with semi-axes `a`, `b` (default 2, 1)"),
    (
        "fourier-random",
        "radial Fourier perturbation of the unit circle: `degree` (default 4), `amp` (default 0.3), `seed`",
    ),
    ("spiral", "closed spiral band polyline with a cusp in the middle: `turns` (default 2)"),
    ("cusp", "cardioid with one cusp (piecewise C^1 image)"),
    ("trefoil", "standard Fourier trefoil knot in R^3"),
    ("tilted-circle", "unit circle rotated by `tilt` radians (default 0.7) about the x-axis"),
    ("scaled-sphere", "unit sphere scaled by `lx`, `ly`, `lz` (default 1, 1, 0.5)"),
    (
        "synthetic-field",
        "random symmetric distance field: `degree` (default 3), `amp` (default 0.6), `seed`",
    ),
];

/// Optional parameters for corpus entries; unset values take the defaults
/// listed in [`INVENTORY`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lz: Option<f64>,
}

impl CorpusParams {
    pub fn seeded(seed: u64) -> Self {
        CorpusParams {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CorpusItem {
    Curve(ClosedCurve),
    Sphere(EmbeddedSphere),
    Field(DistanceField),
}

impl CorpusItem {
    pub fn into_curve(self) -> Result<ClosedCurve> {
        match self {
            CorpusItem::Curve(c) => Ok(c),
            _ => Err(PegError::InvalidInput("corpus entry is not a curve".into())),
        }
    }
}

/// Look up a corpus entry. Deterministic in `(name, params)`.
pub fn corpus(name: &str, p: &CorpusParams) -> Result<CorpusItem> {
    Ok(match name {
        "circle" => CorpusItem::Curve(ClosedCurve::circle(p.radius.unwrap_or(1.0))?),
        "ellipse" => CorpusItem::Curve(ClosedCurve::ellipse(
            p.a.unwrap_or(2.0),
            p.b.unwrap_or(1.0),
        )?),
        "fourier-random" => CorpusItem::Curve(fourier_random(
            p.degree.unwrap_or(4),
            p.amp.unwrap_or(0.3),
            p.seed,
        )?),
        "spiral" => CorpusItem::Curve(spiral(p.turns.unwrap_or(2.0))?),
        "cusp" => CorpusItem::Curve(cardioid()?),
        "trefoil" => CorpusItem::Curve(trefoil()?),
        "tilted-circle" => CorpusItem::Curve(tilted_circle(p.tilt.unwrap_or(0.7))?),
        "scaled-sphere" => CorpusItem::Sphere(EmbeddedSphere::new([
            p.lx.unwrap_or(1.0),
            p.ly.unwrap_or(1.0),
            p.lz.unwrap_or(0.5),
        ])?),
        "synthetic-field" => CorpusItem::Field(DistanceField::random_synthetic(
            p.degree.unwrap_or(3),
            p.amp.unwrap_or(0.6),
            p.seed,
        )?),
        other => return Err(PegError::UnknownCorpus(other.to_string())),
    })
}

/// `r(theta) (cos theta, sin theta)` with
/// `r = 1 + sum_{k=1}^{degree-1} alpha_k cos k theta + beta_k sin k theta`,
/// coefficients drawn and rescaled so that `sum |alpha_k| + |beta_k| = amp`.
/// The curve is star-shaped, hence embedded, whenever `amp < 1`, and its
/// Cartesian Fourier degree is at most `degree`.
pub fn fourier_random(degree: u32, amp: f64, seed: u64) -> Result<ClosedCurve> {
    if degree < 1 || !(0.0..1.0).contains(&amp) {
        return Err(PegError::InvalidInput(
            "fourier-random needs degree >= 1 and 0 <= amp < 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radial = (degree - 1) as usize;
    let mut alpha: Vec<f64> = (0..radial).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut beta: Vec<f64> = (0..radial).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let total: f64 = alpha.iter().chain(beta.iter()).map(|c| c.abs()).sum();
    if total > 0.0 {
        alpha
            .iter_mut()
            .chain(beta.iter_mut())
            .for_each(|c| *c *= amp / total);
    }
    // harmonic index 0..=degree; x and y components as (cos, sin) coefficients
    let h = degree as usize + 1;
    let mut xc = vec![0.0; h];
    let mut xs = vec![0.0; h];
    let mut yc = vec![0.0; h];
    let mut ys = vec![0.0; h];
    xc[1] += 1.0;
    ys[1] += 1.0;
    for k in 1..=radial {
        let (a, b) = (alpha[k - 1], beta[k - 1]);
        // a cos k * cos = a/2 (cos(k+1) + cos(k-1)), b sin k * cos = b/2 (sin(k+1) + sin(k-1))
        xc[k + 1] += 0.5 * a;
        xc[k - 1] += 0.5 * a;
        xs[k + 1] += 0.5 * b;
        xs[k - 1] += 0.5 * b;
        // a cos k * sin = a/2 (sin(k+1) - sin(k-1)), b sin k * sin = b/2 (cos(k-1) - cos(k+1))
        ys[k + 1] += 0.5 * a;
        ys[k - 1] -= 0.5 * a;
        yc[k - 1] += 0.5 * b;
        yc[k + 1] -= 0.5 * b;
    }
    // sin(0) terms vanish; cos(0) terms are the constant
    let constant = Point::new(xc[0], yc[0], 0.0);
    let cos = (1..h).map(|k| Point::new(xc[k], yc[k], 0.0)).collect();
    let sin = (1..h).map(|k| Point::new(xs[k], ys[k], 0.0)).collect();
    ClosedCurve::fourier(2, constant, cos, sin)
}

/// Closed band around the Archimedean spiral `r = 0.3 + 0.35 theta / 2 pi`.
/// The half-width grows linearly from 0 to 0.08 over the first 3 radians, so
/// the two strands meet in a cusp in the middle; the outer end is a round cap.
/// Parameter 0 is the cusp.
pub fn spiral(turns: f64) -> Result<ClosedCurve> {
    if !(turns > 0.25 && turns <= 6.0) {
        return Err(PegError::InvalidInput(
            "spiral turns must lie in (0.25, 6]".into(),
        ));
    }
    let (r0, pitch, w, taper) = (0.3, 0.35, 0.08, 3.0);
    let theta_max = TAU * turns;
    let centre = |th: f64| -> (Point, Point) {
        let r = r0 + pitch * th / TAU;
        let dir = Point::new(th.cos(), th.sin(), 0.0);
        (dir * r, dir)
    };
    let width = |th: f64| w * (th / taper).min(1.0);
    let per_turn = 160.0;
    let m = (per_turn * turns).ceil() as usize;
    let cap = 24;
    let mut pts = Vec::with_capacity(2 * m + cap);
    for i in 0..=m {
        let th = theta_max * i as f64 / m as f64;
        let (c, d) = centre(th);
        pts.push(c + d * width(th));
    }
    // outer end cap: rotate the outward normal through the forward direction
    let (c_end, d_end) = centre(theta_max);
    let fwd = Point::new(-theta_max.sin(), theta_max.cos(), 0.0);
    for i in 1..cap {
        let a = PI * i as f64 / cap as f64;
        pts.push(c_end + (d_end * a.cos() + fwd * a.sin()) * width(theta_max));
    }
    // back along the inner strand; the cusp at theta = 0 is the first vertex
    for i in (1..m).rev() {
        let th = theta_max * i as f64 / m as f64;
        let (c, d) = centre(th);
        pts.push(c - d * width(th));
    }
    ClosedCurve::polyline(2, pts)
}

/// `(2 cos t - cos 2t, 2 sin t - sin 2t)`: a cardioid whose cusp sits at `t = 0`.
pub fn cardioid() -> Result<ClosedCurve> {
    ClosedCurve::fourier(
        2,
        Point::zeros(),
        vec![Point::new(2.0, 0.0, 0.0), Point::new(-1.0, 0.0, 0.0)],
        vec![Point::new(0.0, 2.0, 0.0), Point::new(0.0, -1.0, 0.0)],
    )
}

/// `(sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t)`.
pub fn trefoil() -> Result<ClosedCurve> {
    ClosedCurve::fourier(
        3,
        Point::zeros(),
        vec![
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, -2.0, 0.0),
            Point::zeros(),
        ],
        vec![
            Point::new(1.0, 0.0, 0.0),
            Point::new(2.0, 0.0, 0.0),
            Point::new(0.0, 0.0, -1.0),
        ],
    )
}

pub fn tilted_circle(tilt: f64) -> Result<ClosedCurve> {
    let rot: Matrix3<f64> = Rotation3::from_axis_angle(&Vector3::x_axis(), tilt).into_inner();
    Ok(ClosedCurve::circle(1.0)?.transformed(&rot, Point::new(0.0, 0.0, 0.3)))
}
