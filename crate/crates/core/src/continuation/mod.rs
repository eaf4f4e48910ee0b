//! Solvers for residual systems: Gauss–Newton correction, pseudo-arclength
//! tracing of one-dimensional zero sets, and the searches built on them.

mod finders;
mod newton;
mod trace;

pub(crate) use finders::compositions;
pub use finders::{
    find_all_branches, find_equilateral_triangle, find_octahedra, find_planar_rhombus,
    find_rectangle, find_square, find_two_metric_triangle, multistart_squares, trace_special_path,
    FoundRectangle, FoundRhombus, FoundSquare, FoundTriangle, OctahedronReport, RectangleSource,
    SpecialPath, SquareHit, TwoMetricTriangle, FAMILY_CONDITION, ORBIT_TOL,
};
pub use newton::{newton, refine, MAX_NEWTON_ITERATIONS};
pub use trace::{isotropy, on_branch, trace_branch, winding_number, EventFn};

use serde::{Deserialize, Serialize};

use crate::error::{PegError, Result};
use crate::polygon::PolygonParam;
use crate::residuals::SystemKind;

/// Predictor-corrector settings shared by all tracing operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSettings {
    pub corrector_tol: f64,
    pub step_init: f64,
    pub step_max: f64,
    pub closure_tol: f64,
    pub boundary_floor: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        TraceSettings {
            corrector_tol: 1e-10,
            step_init: 1e-3,
            step_max: 1e-2,
            closure_tol: 1e-6,
            boundary_floor: 1e-4,
            max_steps: 200_000,
            seed: 0,
        }
    }
}

impl TraceSettings {
    pub fn with_seed(seed: u64) -> Self {
        TraceSettings {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.corrector_tol,
            self.step_init,
            self.step_max,
            self.closure_tol,
            self.boundary_floor,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.max_steps == 0 {
            return Err(PegError::InvalidInput(
                "trace settings must be positive".into(),
            ));
        }
        if self.corrector_tol >= self.closure_tol {
            return Err(PegError::InvalidInput(
                "corrector_tol must be smaller than closure_tol".into(),
            ));
        }
        if self.step_init > self.step_max {
            return Err(PegError::InvalidInput("step_init exceeds step_max".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    DiagonalSwap,
    AspectRatioHit,
    Planarity,
    IsoscelesHit,
    BoundaryApproach,
    SquareOnBranch,
}

/// A located zero of an event function along a branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Chart coordinates of the located point (lifted).
    pub location: Vec<f64>,
    /// Indices of the two samples bracketing the sign change.
    pub bracket: [usize; 2],
    /// Event function value at `location`.
    pub value: f64,
}

/// A traced component of a one-dimensional zero set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub system: SystemKind,
    /// Lifted chart coordinates; for closed branches the last sample is the
    /// lift of the first one.
    pub samples: Vec<Vec<f64>>,
    pub closed: bool,
    pub winding: Option<i64>,
    pub isotropy_order: usize,
    pub events: Vec<Event>,
    pub arclength: f64,
    /// The phase was pinned because the zero set is invariant under rotation.
    pub pinned: bool,
    /// The residual was perturbed to restore transversality.
    pub perturbed: bool,
}

impl Branch {
    /// Samples as polygons (for systems on `P_n`).
    pub fn polygons(&self) -> Vec<PolygonParam> {
        self.samples
            .iter()
            .map(|u| PolygonParam::from_chart(u))
            .collect()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}
