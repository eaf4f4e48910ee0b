//! JSON description of curves, spheres and distance fields.
//!
//! ```json
//! {"kind": "fourier", "dim": 2, "constant": [0, 0], "cos": [[2, 0]], "sin": [[0, 1]]}
//! {"kind": "polyline", "dim": 3, "vertices": [[1, 0, 0], [0, 1, 0], [-1, 0, 0.5]]}
//! {"kind": "ellipse", "a": 2, "b": 1}
//! {"kind": "corpus", "name": "fourier-random", "params": {"degree": 4, "amp": 0.3}, "seed": 7}
//! ```
//!
//! Every object may carry a `seed`, used by corpus entries and as the default
//! seed of randomized searches.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{corpus, CorpusItem, CorpusParams};
use crate::curve::{ClosedCurve, CurveRepr, EmbeddedSphere, Point};
use crate::error::{PegError, Result};
use crate::field::{DistanceField, FieldSource, TrigTerm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    /// `constant + sum_k cos[k-1] cos(2 pi k t) + sin[k-1] sin(2 pi k t)`,
    /// each vector of length `dim`.
    Fourier {
        dim: usize,
        constant: Vec<f64>,
        cos: Vec<Vec<f64>>,
        sin: Vec<Vec<f64>>,
    },
    /// Closed polygon traversed at constant speed.
    Polyline {
        dim: usize,
        vertices: Vec<Vec<f64>>,
    },
    Circle {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Unit sphere scaled along the axes.
    Sphere {
        scale: [f64; 3],
    },
    /// Synthetic distance field; `terms` are symmetrized on loading unless
    /// `symmetrized` is set.
    Field {
        terms: Vec<TrigTerm>,
        #[serde(default)]
        symmetrized: bool,
    },
    /// Named corpus entry.
    Corpus {
        name: String,
        #[serde(default)]
        params: CorpusParams,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub seed: u64,
}

fn point(v: &[f64], dim: usize) -> Result<Point> {
    if v.len() != dim {
        return Err(PegError::InvalidInput(format!(
            "expected {dim} coordinates, got {}",
            v.len()
        )));
    }
    let mut p = Point::zeros();
    p.as_mut_slice()[..dim].copy_from_slice(v);
    Ok(p)
}

fn coords(p: &Point, dim: usize) -> Vec<f64> {
    p.as_slice()[..dim].to_vec()
}

impl CurveFile {
    pub fn new(shape: Shape) -> Self {
        CurveFile { shape, seed: 0 }
    }

    pub fn corpus(name: &str, params: CorpusParams) -> Self {
        let seed = params.seed;
        CurveFile {
            shape: Shape::Corpus {
                name: name.to_string(),
                params,
            },
            seed,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PegError::InvalidInput(format!("curve file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PegError::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Explicit description of a curve (Fourier coefficients or vertices).
    pub fn from_curve(curve: &ClosedCurve) -> Self {
        let dim = curve.dim();
        let shape = match curve.repr() {
            CurveRepr::Fourier(f) => Shape::Fourier {
                dim,
                constant: coords(&f.constant, dim),
                cos: f.cos.iter().map(|p| coords(p, dim)).collect(),
                sin: f.sin.iter().map(|p| coords(p, dim)).collect(),
            },
            CurveRepr::Polyline(p) => Shape::Polyline {
                dim,
                vertices: p.vertices.iter().map(|v| coords(v, dim)).collect(),
            },
        };
        CurveFile::new(shape)
    }

    /// Explicit description of any corpus object.
    pub fn from_item(item: &CorpusItem) -> Self {
        match item {
            CorpusItem::Curve(c) => Self::from_curve(c),
            CorpusItem::Sphere(s) => CurveFile::new(Shape::Sphere { scale: s.scale }),
            CorpusItem::Field(f) => match f.source() {
                FieldSource::Chordal(c) => Self::from_curve(c),
                FieldSource::Synthetic(s) => CurveFile::new(Shape::Field {
                    terms: s.terms.clone(),
                    symmetrized: true,
                }),
            },
        }
    }

    pub fn build(&self) -> Result<CorpusItem> {
        Ok(match &self.shape {
            Shape::Fourier {
                dim,
                constant,
                cos,
                sin,
            } => {
                let pts =
                    |v: &[Vec<f64>]| v.iter().map(|p| point(p, *dim)).collect::<Result<Vec<_>>>();
                CorpusItem::Curve(ClosedCurve::fourier(
                    *dim,
                    point(constant, *dim)?,
                    pts(cos)?,
                    pts(sin)?,
                )?)
            }
            Shape::Polyline { dim, vertices } => CorpusItem::Curve(ClosedCurve::polyline(
                *dim,
                vertices
                    .iter()
                    .map(|p| point(p, *dim))
                    .collect::<Result<Vec<_>>>()?,
            )?),
            Shape::Circle { radius } => CorpusItem::Curve(ClosedCurve::circle(*radius)?),
            Shape::Ellipse { a, b } => CorpusItem::Curve(ClosedCurve::ellipse(*a, *b)?),
            Shape::Sphere { scale } => CorpusItem::Sphere(EmbeddedSphere::new(*scale)?),
            Shape::Field { terms, symmetrized } => CorpusItem::Field(if *symmetrized {
                DistanceField::from_symmetric_terms(terms.clone())?
            } else {
                DistanceField::synthetic(terms)?
            }),
            Shape::Corpus { name, params } => {
                let mut p = params.clone();
                if p.seed == 0 {
                    p.seed = self.seed;
                }
                corpus(name, &p)?
            }
        })
    }

    pub fn build_curve(&self) -> Result<ClosedCurve> {
        self.build()?.into_curve()
    }
}
