//! Numerical search for inscribed squares, rectangles, equilateral polygons
//! and octahedra on closed curves and spheres.
//!
//! Polygons inscribed in a curve are points of `P_n = S^1 x simplex`; each
//! search is a residual system on that space, solved either at isolated
//! points (Newton) or along one-dimensional families (continuation).

pub mod continuation;
pub mod corpus;
pub mod counting;
pub mod curve;
pub mod curve_file;
pub mod error;
pub mod field;
pub mod polygon;
pub mod residuals;

pub use continuation::{Branch, Event, EventKind, TraceSettings};
pub use corpus::{corpus, CorpusItem, CorpusParams};
pub use counting::{CountReport, OrbitData, SliceGrid, SquareGrid};
pub use curve::{CirclePoint, ClosedCurve, CurveRepr, EmbeddedSphere, Point};
pub use curve_file::{CurveFile, Shape};
pub use error::{PegError, Result};
pub use field::{DistanceField, Metric, TrigTerm};
pub use polygon::{PolygonParam, StarParam};
pub use residuals::{ResidualSystem, SystemKind};
