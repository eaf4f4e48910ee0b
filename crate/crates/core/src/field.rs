//! Symmetric distance functions on the circle.
//!
//! Every residual on the polygon space only consumes pairwise distances, so
//! the solvers run on a [`Metric`]: either the chord length of a curve or an
//! abstract [`DistanceField`].

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{wrap_unit, ClosedCurve, SECANT_STEP};
use crate::error::{PegError, Result};

/// Grid resolution of the symmetry/definiteness diagnostic.
pub const DIAGNOSTIC_GRID: usize = 200;

/// A distance on S^1 together with its partial derivatives.
pub trait Metric: Sync + Send {
    fn dist(&self, s: f64, t: f64) -> f64;

    /// `(d, dd/ds, dd/dt)`.
    fn dist_grad(&self, s: f64, t: f64) -> (f64, f64, f64);
}

impl Metric for ClosedCurve {
    fn dist(&self, s: f64, t: f64) -> f64 {
        self.chord(s, t)
    }

    fn dist_grad(&self, s: f64, t: f64) -> (f64, f64, f64) {
        let diff = self.eval(s) - self.eval(t);
        let d = diff.norm();
        if d == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let u = diff / d;
        (d, u.dot(&self.derivative(s)), -u.dot(&self.derivative(t)))
    }
}

/// One term `a cos(2 pi (j u + k v)) + b sin(2 pi (j u + k v))` of the
/// modulation, with `u = x - y` and `v = x + y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub j: i32,
    pub k: i32,
    pub a: f64,
    pub b: f64,
}

/// `d(x, y) = |sin(pi (x - y))| * m(x, y)` with `m` the symmetrized
/// `1 + sum of terms`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticField {
    pub terms: Vec<TrigTerm>,
}

impl SyntheticField {
    /// Symmetrize the modulation: `(m(x,y) + m(y,x)) / 2` maps each term
    /// `(j, k)` to the pair `(j, k)`, `(-j, k)` with halved coefficients.
    fn symmetrized(terms: &[TrigTerm]) -> Vec<TrigTerm> {
        let mut out = Vec::with_capacity(2 * terms.len());
        for t in terms {
            if t.j == 0 {
                out.push(*t);
            } else {
                out.push(TrigTerm {
                    a: 0.5 * t.a,
                    b: 0.5 * t.b,
                    ..*t
                });
                out.push(TrigTerm {
                    j: -t.j,
                    a: 0.5 * t.a,
                    b: 0.5 * t.b,
                    ..*t
                });
            }
        }
        out
    }

    /// Modulation and its partials with respect to `x` and `y`.
    fn modulation(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (u, v) = (x - y, x + y);
        let (mut m, mut mx, mut my) = (1.0, 0.0, 0.0);
        for t in &self.terms {
            let phase = TAU * (t.j as f64 * u + t.k as f64 * v);
            let (s, c) = phase.sin_cos();
            m += t.a * c + t.b * s;
            // d(phase)/dx = 2 pi (j + k), d(phase)/dy = 2 pi (k - j)
            let dp = -t.a * s + t.b * c;
            mx += dp * TAU * (t.j + t.k) as f64;
            my += dp * TAU * (t.k - t.j) as f64;
        }
        (m, mx, my)
    }

    /// Evaluate with `x <= y` after wrapping, so that symmetry is bit-exact.
    fn eval_ordered(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (s, c) = (PI * (x - y)).sin_cos();
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let base = s.abs();
        let (m, mx, my) = self.modulation(x, y);
        let db = sign * PI * c;
        (base * m, db * m + base * mx, -db * m + base * my)
    }

    fn value_grad(&self, s: f64, t: f64) -> (f64, f64, f64) {
        let (x, y) = (wrap_unit(s), wrap_unit(t));
        if x <= y {
            self.eval_ordered(x, y)
        } else {
            let (d, gy, gx) = self.eval_ordered(y, x);
            (d, gx, gy)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Chordal(ClosedCurve),
    Synthetic(SyntheticField),
}

/// A continuous, symmetric, positive definite function on S^1 x S^1.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    source: FieldSource,
}

impl DistanceField {
    /// Pull back the Euclidean metric along a curve.
    pub fn from_curve(curve: ClosedCurve) -> Self {
        DistanceField {
            source: FieldSource::Chordal(curve),
        }
    }

    /// Build a synthetic field from raw (unsymmetrized) terms. Rejected when
    /// the field is not positive off the diagonal on the diagnostic grid.
    pub fn synthetic(terms: &[TrigTerm]) -> Result<Self> {
        let field = DistanceField {
            source: FieldSource::Synthetic(SyntheticField {
                terms: SyntheticField::symmetrized(terms),
            }),
        };
        let min = field.min_off_diagonal(DIAGNOSTIC_GRID);
        if min <= 0.0 {
            return Err(PegError::NotPositive { min });
        }
        Ok(field)
    }

    /// Field with symmetrized modulation already stored (used when reading files).
    pub fn from_symmetric_terms(terms: Vec<TrigTerm>) -> Result<Self> {
        let field = DistanceField {
            source: FieldSource::Synthetic(SyntheticField { terms }),
        };
        let min = field.min_off_diagonal(DIAGNOSTIC_GRID);
        if min <= 0.0 {
            return Err(PegError::NotPositive { min });
        }
        Ok(field)
    }

    /// Random modulation of the given degree; coefficients are drawn so that
    /// the total absolute modulation is at most `amp < 1`.
    pub fn random_synthetic(degree: u32, amp: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&amp) {
            return Err(PegError::InvalidInput(
                "synthetic amplitude must lie in [0, 1)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = degree as i32;
        let mut terms = Vec::new();
        for j in 0..=d {
            for k in -d..=d {
                if j == 0 && k <= 0 {
                    continue;
                }
                terms.push(TrigTerm {
                    j,
                    k,
                    a: rng.gen_range(-1.0..1.0),
                    b: rng.gen_range(-1.0..1.0),
                });
            }
        }
        let total: f64 = terms.iter().map(|t| t.a.abs() + t.b.abs()).sum();
        if total > 0.0 {
            for t in &mut terms {
                t.a *= amp / total;
                t.b *= amp / total;
            }
        }
        Self::synthetic(&terms)
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    pub fn curve(&self) -> Option<&ClosedCurve> {
        match &self.source {
            FieldSource::Chordal(c) => Some(c),
            FieldSource::Synthetic(_) => None,
        }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.dist(s, t)
    }

    /// Smallest value over the off-diagonal points of an `n x n` grid.
    pub fn min_off_diagonal(&self, n: usize) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    min = min.min(self.dist(i as f64 / n as f64, j as f64 / n as f64));
                }
            }
        }
        min
    }

    /// Largest `|d(x,y) - d(y,x)|` and `|d(x,x)|` over an `n x n` grid.
    pub fn symmetry_defect(&self, n: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            worst = worst.max(self.dist(x, x).abs());
            for j in 0..n {
                let y = j as f64 / n as f64;
                worst = worst.max((self.dist(x, y) - self.dist(y, x)).abs());
            }
        }
        worst
    }
}

impl Metric for DistanceField {
    fn dist(&self, s: f64, t: f64) -> f64 {
        match &self.source {
            FieldSource::Chordal(c) => c.chord(s, t),
            FieldSource::Synthetic(f) => f.value_grad(s, t).0,
        }
    }

    fn dist_grad(&self, s: f64, t: f64) -> (f64, f64, f64) {
        match &self.source {
            FieldSource::Chordal(c) => c.dist_grad(s, t),
            FieldSource::Synthetic(f) => f.value_grad(s, t),
        }
    }
}

/// Secant version of [`Metric::dist_grad`], for cross-checks.
pub fn secant_grad(metric: &dyn Metric, s: f64, t: f64) -> (f64, f64) {
    let h = SECANT_STEP;
    (
        (metric.dist(s + h, t) - metric.dist(s - h, t)) / (2.0 * h),
        (metric.dist(s, t + h) - metric.dist(s, t - h)) / (2.0 * h),
    )
}
