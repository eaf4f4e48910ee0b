//! The polygon parameter space `P_n = S^1 x simplex^{n-1}`.
//!
//! A polygon is a base point plus the `n` arc gaps between consecutive
//! vertices. The solvers work in the chart `(x, t_0, ..., t_{n-2})` with the
//! last gap implied; see [`PolygonParam::chart`].

use serde::{Deserialize, Serialize};

use crate::curve::{wrap_centered, wrap_unit, CirclePoint};
use crate::error::{PegError, Result};

/// Gap vectors within this distance of summing to 1 are renormalized.
pub const GAP_SUM_TOL: f64 = 1e-9;

fn checked_gaps(mut gaps: Vec<f64>) -> Result<Vec<f64>> {
    if gaps.iter().any(|&g| !g.is_finite() || g < 0.0) {
        return Err(PegError::InvalidInput(format!(
            "gaps must be nonnegative: {gaps:?}"
        )));
    }
    let sum: f64 = gaps.iter().sum();
    if (sum - 1.0).abs() > GAP_SUM_TOL {
        return Err(PegError::GapSum { sum });
    }
    gaps.iter_mut().for_each(|g| *g /= sum);
    Ok(gaps)
}

/// A point of `P_n`: `n` counter-clockwise points on the circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonParam {
    pub base: CirclePoint,
    pub gaps: Vec<f64>,
}

/// `P_n` in star coordinates, where the cyclic relabeling is a rigid
/// rotation by `1/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarParam {
    pub star_base: CirclePoint,
    pub gaps: Vec<f64>,
}

/// `sum_{k=1}^{n-1} (n-k)/n * t_{k-1}`.
fn star_offset(gaps: &[f64]) -> f64 {
    let n = gaps.len() as f64;
    gaps[..gaps.len() - 1]
        .iter()
        .enumerate()
        .map(|(i, t)| (n - (i + 1) as f64) / n * t)
        .sum()
}

impl PolygonParam {
    pub fn new(base: f64, gaps: Vec<f64>) -> Result<Self> {
        if gaps.len() < 3 {
            return Err(PegError::InvalidInput("polygons need n >= 3".into()));
        }
        Ok(PolygonParam {
            base: CirclePoint::new(base),
            gaps: checked_gaps(gaps)?,
        })
    }

    /// Evenly spaced polygon starting at `base`.
    pub fn regular(n: usize, base: f64) -> Self {
        PolygonParam {
            base: CirclePoint::new(base),
            gaps: vec![1.0 / n as f64; n],
        }
    }

    pub fn n(&self) -> usize {
        self.gaps.len()
    }

    /// `(x, x + t_0, x + t_0 + t_1, ...)`.
    pub fn vertices(&self) -> Vec<CirclePoint> {
        let mut acc = self.base.value();
        let mut out = Vec::with_capacity(self.n());
        for (i, t) in self.gaps.iter().enumerate() {
            out.push(CirclePoint::new(acc));
            if i + 1 < self.n() {
                acc += t;
            }
        }
        out
    }

    /// Bracket coordinates: right inverse of [`PolygonParam::vertices`].
    pub fn from_vertices(xs: &[CirclePoint]) -> Result<Self> {
        if xs.len() < 3 {
            return Err(PegError::InvalidInput("polygons need n >= 3".into()));
        }
        let mut gaps: Vec<f64> = xs.windows(2).map(|w| w[0].arc_to(w[1])).collect();
        let used: f64 = gaps.iter().sum();
        let last = 1.0 - used;
        if last < -GAP_SUM_TOL {
            return Err(PegError::InconsistentVertices { total: used });
        }
        gaps.push(last.max(0.0));
        Ok(PolygonParam { base: xs[0], gaps })
    }

    /// Relabel the vertices cyclically: `(x + t_0; t_1, ..., t_{n-1}, t_0)`.
    pub fn cyclic_shift(&self) -> Self {
        let mut gaps = self.gaps.clone();
        gaps.rotate_left(1);
        PolygonParam {
            base: self.base + self.gaps[0],
            gaps,
        }
    }

    pub fn shifted(&self, times: usize) -> Self {
        (0..times % self.n()).fold(self.clone(), |p, _| p.cyclic_shift())
    }

    pub fn to_star(&self) -> StarParam {
        StarParam {
            star_base: self.base + star_offset(&self.gaps),
            gaps: self.gaps.clone(),
        }
    }

    pub fn from_star(s: &StarParam) -> Self {
        PolygonParam {
            base: s.star_base + (-star_offset(&s.gaps)),
            gaps: s.gaps.clone(),
        }
    }

    /// `min_i t_i`; zero exactly on the boundary of `P_n`.
    pub fn boundary_distance(&self) -> f64 {
        self.gaps.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_interior(&self) -> bool {
        self.boundary_distance() > 0.0
    }

    /// Chart coordinates `(x, t_0, ..., t_{n-2})`.
    pub fn chart(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.n());
        u.push(self.base.value());
        u.extend_from_slice(&self.gaps[..self.n() - 1]);
        u
    }

    /// Inverse of [`PolygonParam::chart`]; the base is reduced mod 1 and the
    /// last gap is `1 - sum`. No sign checks: chart points may lie outside `P_n`.
    pub fn from_chart(u: &[f64]) -> Self {
        let mut gaps = u[1..].to_vec();
        gaps.push(1.0 - u[1..].iter().sum::<f64>());
        PolygonParam {
            base: CirclePoint::new(u[0]),
            gaps,
        }
    }

    /// Orbit representative with the smallest star base, i.e. the unique
    /// member whose star base lies in `[0, 1/n)`.
    pub fn canonical(&self) -> Self {
        (0..self.n())
            .map(|j| self.shifted(j))
            .min_by(|a, b| {
                a.to_star()
                    .star_base
                    .value()
                    .total_cmp(&b.to_star().star_base.value())
            })
            .expect("n >= 3")
    }

    /// Sup distance with the base measured along the circle.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut d = self.base.distance(other.base);
        for (a, b) in self.gaps.iter().zip(&other.gaps) {
            d = d.max((a - b).abs());
        }
        d
    }

    /// Distance between the cyclic orbits of two polygons.
    pub fn orbit_distance(&self, other: &Self) -> f64 {
        (0..self.n())
            .map(|j| self.shifted(j).distance(other))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Chart-level cyclic shift acting on lifted coordinates (the base is not
/// reduced mod 1, so winding information survives).
pub fn chart_shift(u: &[f64]) -> Vec<f64> {
    let last = 1.0 - u[1..].iter().sum::<f64>();
    let mut v = Vec::with_capacity(u.len());
    v.push(u[0] + u[1]);
    v.extend_from_slice(&u[2..]);
    v.push(last);
    v
}

/// Star base of a chart point, lifted (not reduced mod 1).
pub fn chart_star_base(u: &[f64]) -> f64 {
    let mut gaps = u[1..].to_vec();
    gaps.push(1.0 - u[1..].iter().sum::<f64>());
    u[0] + star_offset(&gaps)
}

/// Difference `a - b` of chart points with the periodic coordinate reduced.
pub fn chart_diff(a: &[f64], b: &[f64], periodic: &[usize]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            if periodic.contains(&i) {
                wrap_centered(x - y)
            } else {
                x - y
            }
        })
        .collect()
}

/// Reduce the periodic coordinates of a chart point into `[0, 1)`.
pub fn chart_wrap(u: &[f64], periodic: &[usize]) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(i, &x)| {
            if periodic.contains(&i) {
                wrap_unit(x)
            } else {
                x
            }
        })
        .collect()
}
