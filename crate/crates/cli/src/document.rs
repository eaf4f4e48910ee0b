//! The result document written by every command.

use std::collections::BTreeMap;

use pegfinder_core::counting::CountReport;
use pegfinder_core::{Branch, CurveFile, EventKind, PolygonParam, SystemKind, TraceSettings};
use serde::{Deserialize, Serialize};

/// Branches are decimated to at most this many samples.
pub const MAX_BRANCH_POINTS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NumericalFailure,
}

/// An inscribed polygon (or a point configuration on a sphere).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonRecord {
    pub label: String,
    /// Vertex parameters in `[0, 1)`, counter-clockwise; empty off curves.
    pub parameters: Vec<f64>,
    /// Vertex positions, when the input has a geometric realization.
    pub points: Vec<Vec<f64>>,
    /// Norm of the defining residual, when one applies.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub label: String,
    pub system: SystemKind,
    pub closed: bool,
    pub winding: Option<i64>,
    pub isotropy_order: usize,
    pub pinned: bool,
    pub perturbed: bool,
    pub arclength: f64,
    /// Samples before decimation.
    pub sample_count: usize,
    /// Decimated chart samples.
    pub samples: Vec<Vec<f64>>,
    /// Vertex parameters of each kept sample, for branches in `P_n`.
    pub vertex_parameters: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Index into `branches`.
    pub branch: usize,
    pub kind: EventKind,
    pub location: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub command: Vec<String>,
    pub input: Option<CurveFile>,
    pub settings: TraceSettings,
    pub status: Status,
    pub diagnostics: Vec<String>,
    pub polygons: Vec<PolygonRecord>,
    pub branches: Vec<BranchRecord>,
    pub events: Vec<EventRecord>,
    pub counts: Vec<CountReport>,
    pub verdicts: Vec<Verdict>,
    pub metrics: BTreeMap<String, f64>,
    /// Seconds; only recorded with `--timing`.
    pub wall_time_s: Option<f64>,
}

/// Indices of at most `max` evenly spaced samples, first and last included.
pub fn decimate(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..max)
        .map(|j| ((j as f64) * (len - 1) as f64 / (max - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

fn on_polygon_space(system: &SystemKind) -> bool {
    match system {
        SystemKind::Octahedron { .. } => false,
        SystemKind::SpecialQuad { size: Some(_) } => false,
        SystemKind::Augmented { base, .. } | SystemKind::Perturbed { base, .. } => {
            on_polygon_space(base)
        }
        _ => true,
    }
}

impl ResultDocument {
    pub fn new(command: Vec<String>, input: Option<CurveFile>, settings: TraceSettings) -> Self {
        ResultDocument {
            tool: "pegfinder".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            input,
            settings,
            status: Status::Ok,
            diagnostics: Vec::new(),
            polygons: Vec::new(),
            branches: Vec::new(),
            events: Vec::new(),
            counts: Vec::new(),
            verdicts: Vec::new(),
            metrics: BTreeMap::new(),
            wall_time_s: None,
        }
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.status = Status::NumericalFailure;
        self.diagnostics.push(message.into());
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn verdict(&mut self, name: &str, holds: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            holds,
            detail: detail.into(),
        });
    }

    pub fn polygon(
        &mut self,
        label: &str,
        p: &PolygonParam,
        points: Vec<Vec<f64>>,
        residual: Option<f64>,
    ) {
        self.polygons.push(PolygonRecord {
            label: label.to_string(),
            parameters: p.vertices().iter().map(|v| v.value()).collect(),
            points,
            residual,
        });
    }

    /// Add a branch (decimated) and its events; returns its index.
    pub fn branch(&mut self, label: &str, b: &Branch) -> usize {
        let index = self.branches.len();
        let keep = decimate(b.samples.len(), MAX_BRANCH_POINTS);
        let samples: Vec<Vec<f64>> = keep.iter().map(|&i| b.samples[i].clone()).collect();
        let vertex_parameters = on_polygon_space(&b.system).then(|| {
            samples
                .iter()
                .map(|u| {
                    PolygonParam::from_chart(u)
                        .vertices()
                        .iter()
                        .map(|v| v.value())
                        .collect()
                })
                .collect()
        });
        self.branches.push(BranchRecord {
            label: label.to_string(),
            system: b.system.clone(),
            closed: b.closed,
            winding: b.winding,
            isotropy_order: b.isotropy_order,
            pinned: b.pinned,
            perturbed: b.perturbed,
            arclength: b.arclength,
            sample_count: b.samples.len(),
            samples,
            vertex_parameters,
        });
        for e in &b.events {
            self.events.push(EventRecord {
                branch: index,
                kind: e.kind,
                location: e.location.clone(),
                value: e.value,
            });
        }
        index
    }
}
