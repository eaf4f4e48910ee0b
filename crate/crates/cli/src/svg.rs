//! Deterministic SVG figures: the curve (or sphere outline), found polygons,
//! traced families and annotated events.

use std::f64::consts::TAU;
use std::fmt::Write;

use pegfinder_core::residuals::octahedron_edges;
use pegfinder_core::{CorpusItem, EventKind, Point, PolygonParam};

use crate::document::ResultDocument;
use crate::run::input_shape;

pub const SIZE: f64 = 800.0;
pub const MARGIN: f64 = 0.05 * SIZE;
const CURVE_SAMPLES: usize = 720;
const SNAPSHOTS: usize = 9;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf",
];

/// Orthographic view: which coordinates go to the horizontal and vertical axes.
#[derive(Clone, Copy)]
struct View {
    axes: (usize, usize),
    x0: f64,
    y0: f64,
    width: f64,
    height: f64,
}

struct Frame {
    view: View,
    scale: f64,
    cx: f64,
    cy: f64,
}

impl Frame {
    fn fit(view: View, pts: &[Point]) -> Frame {
        let (i, j) = view.axes;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in pts {
            for (k, a) in [i, j].into_iter().enumerate() {
                lo[k] = lo[k].min(p[a]);
                hi[k] = hi[k].max(p[a]);
            }
        }
        if !lo[0].is_finite() {
            lo = [-1.0; 2];
            hi = [1.0; 2];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        let scale = (view.width.min(view.height)) / span;
        Frame {
            view,
            scale,
            cx: 0.5 * (lo[0] + hi[0]),
            cy: 0.5 * (lo[1] + hi[1]),
        }
    }

    fn map(&self, p: &Point) -> (f64, f64) {
        let (i, j) = self.view.axes;
        let v = &self.view;
        (
            v.x0 + 0.5 * v.width + (p[i] - self.cx) * self.scale,
            v.y0 + 0.5 * v.height - (p[j] - self.cy) * self.scale,
        )
    }

    fn path(&self, pts: &[Point], close: bool) -> String {
        let mut d = String::new();
        for (k, p) in pts.iter().enumerate() {
            let (x, y) = self.map(p);
            let _ = write!(d, "{}{x:.2} {y:.2} ", if k == 0 { "M" } else { "L" });
        }
        if close {
            d.push('Z');
        }
        d.trim_end().to_string()
    }
}

fn views(planar: bool) -> Vec<View> {
    let inner = SIZE - 2.0 * MARGIN;
    if planar {
        vec![View {
            axes: (0, 1),
            x0: MARGIN,
            y0: MARGIN,
            width: inner,
            height: inner,
        }]
    } else {
        let w = 0.5 * (inner - MARGIN);
        vec![
            View {
                axes: (0, 1),
                x0: MARGIN,
                y0: MARGIN,
                width: w,
                height: inner,
            },
            View {
                axes: (0, 2),
                x0: 2.0 * MARGIN + w,
                y0: MARGIN,
                width: w,
                height: inner,
            },
        ]
    }
}

/// Position of a parameter on the input (the unit circle for abstract fields).
fn locate(item: Option<&CorpusItem>, t: f64) -> Point {
    let curve = match item {
        Some(CorpusItem::Curve(c)) => Some(c),
        Some(CorpusItem::Field(f)) => f.curve(),
        _ => None,
    };
    match curve {
        Some(c) => c.eval(t),
        None => Point::new((TAU * t).cos(), (TAU * t).sin(), 0.0),
    }
}

fn vec_point(v: &[f64]) -> Point {
    Point::new(
        v.first().copied().unwrap_or(0.0),
        v.get(1).copied().unwrap_or(0.0),
        v.get(2).copied().unwrap_or(0.0),
    )
}

pub fn render_svg(doc: &ResultDocument) -> String {
    let item = input_shape(doc);
    let item = item.as_ref();
    let (outline, planar, sphere): (Vec<Point>, bool, bool) = match item {
        Some(CorpusItem::Curve(c)) => (c.sample(CURVE_SAMPLES), c.dim() == 2, false),
        Some(CorpusItem::Sphere(s)) => {
            let [a, b, c] = s.scale;
            let pts = (0..CURVE_SAMPLES)
                .flat_map(|k| {
                    let (sn, cs) = (TAU * k as f64 / CURVE_SAMPLES as f64).sin_cos();
                    [
                        Point::new(a * cs, b * sn, 0.0),
                        Point::new(a * cs, 0.0, c * sn),
                    ]
                })
                .collect();
            (pts, false, true)
        }
        _ => (Vec::new(), true, false),
    };
    let outline = if outline.is_empty() {
        (0..CURVE_SAMPLES)
            .map(|k| locate(item, k as f64 / CURVE_SAMPLES as f64))
            .collect()
    } else {
        outline
    };

    let mut all = outline.clone();
    for p in &doc.polygons {
        all.extend(p.points.iter().map(|v| vec_point(v)));
    }

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let title = doc.command.join(" ");
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="14">{}</text>"#,
        0.6 * MARGIN,
        escape(&title)
    );

    for view in views(planar) {
        let frame = Frame::fit(view, &all);
        if sphere {
            let ring: Vec<Point> = if view.axes.1 == 1 {
                outline.iter().step_by(2).copied().collect()
            } else {
                outline.iter().skip(1).step_by(2).copied().collect()
            };
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                frame.path(&ring, true)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                frame.path(&outline, true)
            );
        }

        for b in &doc.branches {
            if let Some(params) = &b.vertex_parameters {
                let n = params.first().map_or(0, Vec::len);
                for k in 0..n {
                    let pts: Vec<Point> = params.iter().map(|v| locate(item, v[k])).collect();
                    let _ = writeln!(
                        out,
                        r#"<path d="{}" fill="none" stroke="{}" stroke-width="1" stroke-opacity="0.6"/>"#,
                        frame.path(&pts, false),
                        PALETTE[k % PALETTE.len()]
                    );
                }
                for i in snapshots(params.len()) {
                    let verts: Vec<Point> = params[i].iter().map(|t| locate(item, *t)).collect();
                    let _ = writeln!(
                        out,
                        r#"<path d="{}" fill="none" stroke="silver" stroke-width="0.8"/>"#,
                        frame.path(&verts, true)
                    );
                }
            } else if b.samples.first().is_some_and(|u| u.len() == 18) {
                let scale = match item {
                    Some(CorpusItem::Sphere(s)) => s.scale,
                    _ => [1.0; 3],
                };
                for k in 0..6 {
                    let pts: Vec<Point> = b
                        .samples
                        .iter()
                        .map(|u| {
                            let q = vec_point(&u[3 * k..3 * k + 3]);
                            Point::new(scale[0] * q.x, scale[1] * q.y, scale[2] * q.z)
                        })
                        .collect();
                    let _ = writeln!(
                        out,
                        r#"<path d="{}" fill="none" stroke="{}" stroke-width="0.8" stroke-opacity="0.5"/>"#,
                        frame.path(&pts, b.closed),
                        PALETTE[k]
                    );
                }
            }
        }

        for e in annotated(doc) {
            let verts: Vec<Point> = PolygonParam::from_chart(&e.location)
                .vertices()
                .iter()
                .map(|v| locate(item, v.value()))
                .collect();
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="gray" stroke-width="1" stroke-dasharray="4 3"/>"#,
                frame.path(&verts, true)
            );
            let (x, y) = frame.map(&verts[0]);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="gray">{}</text>"#,
                x + 6.0,
                y - 6.0,
                escape(
                    &serde_json::to_value(e.kind)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default()
                )
            );
        }

        for p in doc
            .polygons
            .iter()
            .take(if sphere { 1 } else { usize::MAX })
        {
            let verts: Vec<Point> = if p.points.is_empty() {
                p.parameters.iter().map(|t| locate(item, *t)).collect()
            } else {
                p.points.iter().map(|v| vec_point(v)).collect()
            };
            if verts.len() == 6 && sphere {
                for (i, j) in octahedron_edges() {
                    let _ = writeln!(
                        out,
                        r#"<path d="{}" fill="none" stroke="crimson" stroke-width="2"/>"#,
                        frame.path(&[verts[i], verts[j]], false)
                    );
                }
            } else {
                let _ = writeln!(
                    out,
                    r#"<path d="{}" fill="crimson" fill-opacity="0.08" stroke="crimson" stroke-width="2"/>"#,
                    frame.path(&verts, true)
                );
            }
            for v in &verts {
                let (x, y) = frame.map(v);
                let _ = writeln!(
                    out,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="crimson"/>"#
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Indices of the snapshot polygons drawn along a branch.
fn snapshots(len: usize) -> Vec<usize> {
    if len < 2 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..SNAPSHOTS)
        .map(|j| j * (len - 1) / (SNAPSHOTS - 1))
        .collect();
    idx.dedup();
    idx
}

/// Events worth drawing: the first of each kind on each branch of `P_n`.
fn annotated(doc: &ResultDocument) -> Vec<&crate::document::EventRecord> {
    let mut seen = Vec::new();
    doc.events
        .iter()
        .filter(|e| e.kind != EventKind::BoundaryApproach)
        .filter(|e| {
            doc.branches
                .get(e.branch)
                .is_some_and(|b| b.vertex_parameters.is_some())
        })
        .filter(|e| {
            let key = (e.branch, e.kind);
            let fresh = !seen.contains(&key);
            seen.push(key);
            fresh
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
