//! Searches for inscribed shapes built on the corrector and the tracer.

use nalgebra::{Matrix4, Quaternion, UnitQuaternion, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newton::{newton, refine, MAX_NEWTON_ITERATIONS};
use super::trace::{on_branch, trace_branch, EventFn};
use super::{Branch, EventKind, TraceSettings};
use crate::curve::{wrap_centered, ClosedCurve, EmbeddedSphere, Point};
use crate::error::{PegError, Result};
use crate::field::Metric;
use crate::polygon::{chart_diff, chart_star_base, PolygonParam};
use crate::residuals::{
    chart_vertices, isosceles_defects, octahedral_group, Augmented, ExtraRow, OctahedronSystem,
    ParallelogramSystem, QuadSystem, QuadTarget, ResidualSystem, Rhombus3dSystem, TriangleSystem,
};

/// Solutions closer than this (sup norm, periodic base) are the same.
const SAME_POINT: f64 = 1e-6;

/// Orbits closer than this after canonicalization are the same.
pub const ORBIT_TOL: f64 = 1e-5;

/// Jacobian condition number above which a zero is not isolated.
pub const FAMILY_CONDITION: f64 = 1e10;

/// Event functions whose largest value along a branch is below this vanish
/// identically there.
const IDENTICALLY_ZERO: f64 = 1e-9;

/// Acceptance tolerance of polished solutions.
const ACCEPT: f64 = 1e-8;

/// Smallest rhombus diameter accepted at a planarity event.
const MIN_RHOMBUS_DIAMETER: f64 = 1e-3;

/// Smallest largest-pairwise arc distance of a non-degenerate triangle.
const MIN_TRIANGLE_SPREAD: f64 = 1e-3;

/// Number of random starts for the octahedron search.
const OCTAHEDRON_SEEDS: usize = 64;

/// Positive compositions of `total` into `parts` parts, most balanced first.
pub(crate) fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 1..=total.saturating_sub(parts - 1) {
            prefix.push(c);
            rec(parts - 1, total - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if total >= parts && parts >= 1 {
        rec(parts, total, &mut Vec::new(), &mut out);
    }
    let mean = total as f64 / parts as f64;
    let spread = |c: &Vec<usize>| c.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>();
    out.sort_by(|a, b| spread(a).total_cmp(&spread(b)));
    out
}

/// Composition resolution of the slice multistart on `P_n`.
fn slice_resolution(n: usize) -> usize {
    match n {
        3 => 60,
        4 => 32,
        5 => 20,
        _ => 16,
    }
}

/// Chart point with the given gaps (all but the last) and star base `s0`.
fn chart_with_star_base(gaps: &[f64], s0: f64) -> Vec<f64> {
    let mut u = Vec::with_capacity(gaps.len() + 1);
    u.push(0.0);
    u.extend_from_slice(gaps);
    u[0] = s0 - chart_star_base(&u);
    u
}

/// Seeds on the slice `{star base = s0}` of the `P_n` chart.
fn slice_seeds(n: usize, m: usize, s0: f64) -> Vec<Vec<f64>> {
    compositions(n, m)
        .iter()
        .map(|c| {
            let gaps: Vec<f64> = c[..n - 1].iter().map(|&k| k as f64 / m as f64).collect();
            chart_with_star_base(&gaps, s0)
        })
        .collect()
}

fn sup_dist(a: &[f64], b: &[f64], periodic: &[usize]) -> f64 {
    chart_diff(a, b, periodic)
        .iter()
        .fold(0.0, |m, x| m.max(x.abs()))
}

/// Zeros of a `P_n` system on the star-base slice, deduplicated, in seed order.
fn slice_solutions(sys: &dyn ResidualSystem, s: &TraceSettings, m: usize) -> Vec<Vec<f64>> {
    let n = sys.domain_dim();
    let s0 = 0.0;
    let slice = Augmented::new(
        sys,
        vec![ExtraRow::new("star_base", move |u: &[f64]| {
            wrap_centered(chart_star_base(u) - s0)
        })],
    );
    let found: Vec<Option<Vec<f64>>> = slice_seeds(n, m, s0)
        .par_iter()
        .map(|seed| {
            newton(
                &slice,
                seed,
                s.corrector_tol,
                s.boundary_floor,
                MAX_NEWTON_ITERATIONS,
            )
            .ok()
        })
        .collect();
    let periodic = sys.periodic();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for u in found.into_iter().flatten() {
        if !out.iter().any(|v| sup_dist(&u, v, &periodic) < SAME_POINT) {
            out.push(u);
        }
    }
    out
}

/// Trace every branch met by the slice multistart, stopping early once
/// `stop` accepts a branch.
fn scan_branches(
    sys: &dyn ResidualSystem,
    s: &TraceSettings,
    events: &[EventFn<'_>],
    stop: &mut dyn FnMut(&Branch) -> bool,
) -> Result<Vec<Branch>> {
    let m = slice_resolution(sys.domain_dim());
    let mut branches: Vec<Branch> = Vec::new();
    for u in slice_solutions(sys, s, m) {
        if branches.iter().any(|b| on_branch(sys, b, &u, s)) {
            continue;
        }
        let branch = trace_branch(sys, &u, s, events)?;
        let done = stop(&branch);
        branches.push(branch);
        if done {
            break;
        }
    }
    Ok(branches)
}

/// All branches of a one-dimensional `P_n` system that cross the slice
/// `{star base = 0}`. Every branch with nonzero winding crosses it.
pub fn find_all_branches(
    sys: &dyn ResidualSystem,
    s: &TraceSettings,
    events: &[EventFn<'_>],
) -> Result<Vec<Branch>> {
    s.validate()?;
    scan_branches(sys, s, events, &mut |_| false)
}

/// First closed branch invariant under the full cyclic symmetry.
fn invariant_branch(
    sys: &dyn ResidualSystem,
    s: &TraceSettings,
    events: &[EventFn<'_>],
) -> Result<Branch> {
    s.validate()?;
    let n = sys.symmetry_order();
    let full = |b: &Branch| b.closed && b.isotropy_order == n;
    let mut branches = scan_branches(sys, s, events, &mut |b| full(b))?;
    match branches.iter().position(full) {
        Some(i) => Ok(branches.swap_remove(i)),
        None => {
            let seen: Vec<String> = branches
                .iter()
                .map(|b| format!("closed={} isotropy={}", b.closed, b.isotropy_order))
                .collect();
            Err(PegError::NotFound(format!(
                "no Z_{n}-invariant branch among {} traced: [{}]",
                branches.len(),
                seen.join(", ")
            )))
        }
    }
}

/// Maximum absolute value of an event function over the samples.
fn max_abs(branch: &Branch, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    branch
        .samples
        .iter()
        .map(|u| f(u).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// squares

/// One square orbit found by the multistart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareHit {
    /// Canonical representative (minimal star base).
    pub polygon: PolygonParam,
    /// Condition number of the square Jacobian at the zero.
    pub condition: f64,
    /// Number of seeds that converged to this orbit.
    pub multiplicity: usize,
}

impl SquareHit {
    pub fn isolated(&self) -> bool {
        self.condition <= FAMILY_CONDITION
    }
}

const SQUARE_NEWTON_ITERATIONS: usize = 30;
const SQUARE_MAX_STEP: f64 = 0.05;
const SQUARE_MIN_GAP: f64 = 1e-6;

/// Square residual and chart Jacobian on stack matrices.
fn square_eval(curve: &ClosedCurve, u: &[f64; 4]) -> (Vector4<f64>, Matrix4<f64>) {
    let v = [
        u[0],
        u[0] + u[1],
        u[0] + u[1] + u[2],
        u[0] + u[1] + u[2] + u[3],
    ];
    let pd = v.map(|t| curve.eval_with_derivative(t));
    let p = pd.map(|x| x.0);
    let d = pd.map(|x| x.1);
    let pair = |i: usize, j: usize| -> (f64, f64, f64) {
        let diff = p[i] - p[j];
        let len = diff.norm();
        if len == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let unit = diff / len;
        (len, unit.dot(&d[i]), -unit.dot(&d[j]))
    };
    let e = [
        pair(0, 1),
        pair(1, 2),
        pair(2, 3),
        pair(3, 0),
        pair(0, 2),
        pair(1, 3),
    ];
    let idx = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)];
    let rows = [(0, 1), (1, 2), (2, 3), (4, 5)];
    let mut r = Vector4::zeros();
    let mut jv = Matrix4::zeros();
    for (k, &(a, b)) in rows.iter().enumerate() {
        r[k] = e[a].0 - e[b].0;
        for (pi, sign) in [(a, 1.0), (b, -1.0)] {
            let (i, j) = idx[pi];
            jv[(k, i)] += sign * e[pi].1;
            jv[(k, j)] += sign * e[pi].2;
        }
    }
    let mut j = Matrix4::zeros();
    for k in 0..4 {
        j[(k, 3)] = jv[(k, 3)];
        j[(k, 2)] = j[(k, 3)] + jv[(k, 2)];
        j[(k, 1)] = j[(k, 2)] + jv[(k, 1)];
        j[(k, 0)] = j[(k, 1)] + jv[(k, 0)];
    }
    (r, j)
}

fn square_gaps_ok(u: &[f64; 4]) -> bool {
    let last = 1.0 - u[1] - u[2] - u[3];
    u[1] > 0.0 && u[2] > 0.0 && u[3] > 0.0 && last > 0.0
}

/// Jacobian condition number of the square system at a chart point.
fn square_condition(curve: &ClosedCurve, u: &[f64]) -> f64 {
    let (_, j) = square_eval(curve, &[u[0], u[1], u[2], u[3]]);
    let sv = j.singular_values();
    let cond = sv.max() / sv.min();
    if cond.is_finite() {
        cond
    } else {
        f64::INFINITY
    }
}

/// Newton on the square system from one chart seed.
fn square_newton(curve: &ClosedCurve, seed: &[f64]) -> Option<[f64; 4]> {
    let mut u = [seed[0], seed[1], seed[2], seed[3]];
    let mut prev = f64::INFINITY;
    for _ in 0..SQUARE_NEWTON_ITERATIONS {
        let (r, j) = square_eval(curve, &u);
        let nr = r.amax();
        if !nr.is_finite() || nr > 4.0 * prev {
            return None;
        }
        if nr < 1e-13 {
            break;
        }
        prev = nr;
        let step = j.lu().solve(&r)?;
        let len = step.norm();
        let scale = if len > SQUARE_MAX_STEP {
            SQUARE_MAX_STEP / len
        } else {
            1.0
        };
        for i in 0..4 {
            u[i] -= scale * step[i];
        }
        if !square_gaps_ok(&u) {
            return None;
        }
        if len < 1e-15 {
            break;
        }
    }
    let (r, _) = square_eval(curve, &u);
    let min_gap = u[1].min(u[2]).min(u[3]).min(1.0 - u[1] - u[2] - u[3]);
    (r.amax() <= 1e-11 && min_gap >= SQUARE_MIN_GAP).then_some(u)
}

/// Cluster canonical polygons into orbits (tolerance [`ORBIT_TOL`]).
pub(crate) fn cluster_orbits(mut hits: Vec<(PolygonParam, f64)>) -> Vec<SquareHit> {
    let key = |p: &PolygonParam| p.to_star().star_base.value();
    hits.sort_by(|a, b| key(&a.0).total_cmp(&key(&b.0)));
    let n = hits.first().map_or(4, |h| h.0.n()) as f64;
    let period = 1.0 / n;
    let mut out: Vec<SquareHit> = Vec::new();
    for (p, cond) in hits {
        let k = key(&p);
        let mut found = None;
        for (i, h) in out.iter().enumerate().rev() {
            if k - key(&h.polygon) > 2.0 * ORBIT_TOL {
                break;
            }
            if h.polygon.orbit_distance(&p) < ORBIT_TOL {
                found = Some(i);
                break;
            }
        }
        if found.is_none() && k > period - 2.0 * ORBIT_TOL {
            found = out
                .iter()
                .take_while(|h| key(&h.polygon) < 2.0 * ORBIT_TOL)
                .position(|h| h.polygon.orbit_distance(&p) < ORBIT_TOL);
        }
        match found {
            Some(i) => {
                out[i].multiplicity += 1;
                out[i].condition = out[i].condition.max(cond);
            }
            None => out.push(SquareHit {
                polygon: p,
                condition: cond,
                multiplicity: 1,
            }),
        }
    }
    out
}

/// Multistart Newton on the square system from `bases x compositions(parts)`
/// seeds: star bases spread over `[0, 1/4)` and gap vectors from the
/// compositions of `parts` into four parts. Returns the square orbits found.
pub fn multistart_squares(curve: &ClosedCurve, bases: usize, parts: usize) -> Vec<SquareHit> {
    let comps = compositions(4, parts);
    let seeds: Vec<Vec<f64>> = (0..bases)
        .flat_map(|b| {
            let s0 = (b as f64 + 0.5) / (4.0 * bases as f64);
            comps.iter().map(move |c| {
                let gaps: Vec<f64> = c[..3].iter().map(|&k| k as f64 / parts as f64).collect();
                chart_with_star_base(&gaps, s0)
            })
        })
        .collect();
    let found: Vec<Option<[f64; 4]>> = seeds
        .par_iter()
        .map(|seed| square_newton(curve, seed))
        .collect();
    let hits = found
        .into_iter()
        .flatten()
        .map(|u| (PolygonParam::from_chart(&u).canonical(), 0.0))
        .collect();
    let mut orbits = cluster_orbits(hits);
    for h in &mut orbits {
        h.condition = square_condition(curve, &h.polygon.chart());
    }
    orbits
}

/// Seeds of the cross-checking multistart in [`find_square`].
const CHECK_BASES: usize = 24;
const CHECK_PARTS: usize = 24;

/// Result of [`find_square`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoundSquare {
    /// Canonical representative.
    pub polygon: PolygonParam,
    pub residual: f64,
    /// The curve carries a continuum of squares (every invariant rhombus is a square).
    pub family: bool,
    /// The invariant rhombus branch the square was read off.
    pub rhombus_branch: Branch,
    /// Square orbits of the cross-checking multistart.
    pub multistart: Vec<SquareHit>,
    /// Orbit distance from the square to the nearest multistart square;
    /// `None` for families.
    pub agreement: Option<f64>,
}

impl FoundSquare {
    pub fn cross_checked(&self) -> bool {
        self.agreement.is_some_and(|d| d < 1e-6)
    }
}

/// `d13 - d24` at a `P_4` chart point.
fn diagonal_difference(metric: &dyn Metric, u: &[f64]) -> f64 {
    let v = chart_vertices(u);
    metric.dist(v[0], v[2]) - metric.dist(v[1], v[3])
}

/// A square read off the Z_4-invariant rhombus family: along it the short
/// diagonal turns into the long one, and the crossing is a square.
pub fn find_square(curve: &ClosedCurve, s: &TraceSettings) -> Result<FoundSquare> {
    let rhombus = QuadSystem::rhombus(curve);
    let swap = EventFn::new(EventKind::DiagonalSwap, |u: &[f64]| {
        diagonal_difference(curve, u)
    });
    let branch = invariant_branch(&rhombus, s, std::slice::from_ref(&swap))?;
    let square = QuadSystem::square(curve);
    let family = max_abs(&branch, &|u| diagonal_difference(curve, u)) < IDENTICALLY_ZERO;

    let mut found = None;
    if family {
        found = refine(&square, &branch.samples[0], s).ok();
    } else {
        for ev in branch.events_of(EventKind::DiagonalSwap) {
            if let Ok(u) = refine(&square, &ev.location, s) {
                found = Some(u);
                break;
            }
        }
    }
    let u = found.ok_or_else(|| {
        PegError::NotFound(format!(
            "{} diagonal swap events on the invariant rhombus branch, none polished to a square",
            branch.events_of(EventKind::DiagonalSwap).count()
        ))
    })?;
    let polygon = PolygonParam::from_chart(&u).canonical();
    let residual = square.residual(&u).norm();
    let multistart = multistart_squares(curve, CHECK_BASES, CHECK_PARTS);
    let agreement = if family {
        None
    } else {
        Some(
            multistart
                .iter()
                .map(|h| h.polygon.orbit_distance(&polygon))
                .fold(f64::INFINITY, f64::min),
        )
    };
    Ok(FoundSquare {
        polygon,
        residual,
        family,
        rhombus_branch: branch,
        multistart,
        agreement,
    })
}

// ---------------------------------------------------------------------------
// rectangles

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectangleSource {
    /// The square itself (ratio 1).
    Square,
    /// Aspect-ratio event on a rectangle branch through a square.
    BranchEvent,
    /// Direct multistart Newton on the parallelogram system.
    Multistart,
}

/// Result of [`find_rectangle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoundRectangle {
    pub polygon: PolygonParam,
    /// Chart coordinates of the solution (base not reduced).
    pub chart: Vec<f64>,
    pub ratio: f64,
    pub aspect: f64,
    /// Norm of the parallelogram residual.
    pub residual: f64,
    /// `|d13 - d24|`.
    pub diagonal_defect: f64,
    pub source: RectangleSource,
    pub branch: Option<Branch>,
}

fn polish_rectangle(
    curve: &ClosedCurve,
    par: &ParallelogramSystem<'_>,
    start: &[f64],
    s: &TraceSettings,
) -> Option<Vec<f64>> {
    let sys = Augmented::new(
        par,
        vec![ExtraRow::new("d13-d24", |u: &[f64]| {
            diagonal_difference(curve, u)
        })],
    );
    let u = refine(&sys, start, s).ok()?;
    let ok = par.residual(&u).norm() < ACCEPT
        && (par.aspect(&u) - par.ratio()).abs() < ACCEPT
        && diagonal_difference(curve, &u).abs() < ACCEPT;
    ok.then_some(u)
}

/// A rectangle of aspect ratio `r = (e12 + e34) / (e23 + e41)`.
///
/// Follows rectangle branches through the curve's squares until the aspect
/// ratio crosses `r`, then falls back to a direct multistart.
pub fn find_rectangle(curve: &ClosedCurve, r: f64, s: &TraceSettings) -> Result<FoundRectangle> {
    let par = ParallelogramSystem::new(curve, r)?;
    let found = find_square(curve, s)?;
    let build = |u: Vec<f64>, source, branch| {
        let aspect = par.aspect(&u);
        FoundRectangle {
            polygon: PolygonParam::from_chart(&u),
            residual: par.residual(&u).norm(),
            diagonal_defect: diagonal_difference(curve, &u).abs(),
            chart: u,
            ratio: r,
            aspect,
            source,
            branch,
        }
    };
    let first = found.polygon.chart();
    if (par.aspect(&first) - r).abs() < ACCEPT {
        if let Some(u) = polish_rectangle(curve, &par, &first, s) {
            return Ok(build(u, RectangleSource::Square, None));
        }
    }

    let mut starts = vec![first];
    starts.extend(found.multistart.iter().map(|h| h.polygon.chart()));
    let rect = QuadSystem::rectangle(curve);
    let hit = EventFn::new(EventKind::AspectRatioHit, |u: &[f64]| par.aspect(u) - r);
    let mut traced: Vec<Branch> = Vec::new();
    for start in starts {
        if traced.iter().any(|b| on_branch(&rect, b, &start, s)) {
            continue;
        }
        let Ok(branch) = trace_branch(&rect, &start, s, std::slice::from_ref(&hit)) else {
            continue;
        };
        let polished = branch
            .events_of(EventKind::AspectRatioHit)
            .find_map(|ev| polish_rectangle(curve, &par, &ev.location, s));
        if let Some(u) = polished {
            return Ok(build(u, RectangleSource::BranchEvent, Some(branch)));
        }
        traced.push(branch);
    }

    let comps = compositions(4, 16);
    let seeds: Vec<Vec<f64>> = (0..8)
        .flat_map(|b| {
            let s0 = (b as f64 + 0.5) / 16.0;
            comps.iter().map(move |c| {
                let gaps: Vec<f64> = c[..3].iter().map(|&k| k as f64 / 16.0).collect();
                chart_with_star_base(&gaps, s0)
            })
        })
        .collect();
    let polished: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|seed| polish_rectangle(curve, &par, seed, s))
        .collect();
    match polished.into_iter().flatten().next() {
        Some(u) => Ok(build(u, RectangleSource::Multistart, None)),
        None => Err(PegError::NotFound(format!(
            "no rectangle of aspect ratio {r}: {} rectangle branches traced without a hit, multistart failed",
            traced.len()
        ))),
    }
}

// ---------------------------------------------------------------------------
// triangles

/// Result of [`find_equilateral_triangle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoundTriangle {
    pub polygon: PolygonParam,
    pub residual: f64,
    /// Seeds tried before the first success.
    pub seeds_tried: usize,
}

/// Largest circular distance between two of the vertices.
fn spread(p: &PolygonParam) -> f64 {
    let v = p.vertices();
    let mut m: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            m = m.max(v[i].distance(v[j]));
        }
    }
    m
}

/// An equilateral triangle `d(x,y) = d(y,z) = d(z,x)` of a distance
/// function, away from the diagonal.
pub fn find_equilateral_triangle(metric: &dyn Metric, s: &TraceSettings) -> Result<FoundTriangle> {
    s.validate()?;
    let tri = TriangleSystem::new(metric);
    let slice = Augmented::new(
        &tri,
        vec![ExtraRow::new("star_base", |u: &[f64]| {
            wrap_centered(chart_star_base(u))
        })],
    );
    let seeds = slice_seeds(3, slice_resolution(3), 0.0);
    for (i, seed) in seeds.iter().enumerate() {
        let Ok(u) = newton(
            &slice,
            seed,
            s.corrector_tol,
            s.boundary_floor,
            MAX_NEWTON_ITERATIONS,
        ) else {
            continue;
        };
        let polygon = PolygonParam::from_chart(&u);
        let residual = tri.residual(&u).norm();
        if residual < ACCEPT && spread(&polygon) > MIN_TRIANGLE_SPREAD {
            return Ok(FoundTriangle {
                polygon,
                residual,
                seeds_tried: i + 1,
            });
        }
    }
    Err(PegError::NotFound(format!(
        "multistart exhausted {} seeds without an equilateral triangle",
        seeds.len()
    )))
}

/// Result of [`find_two_metric_triangle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoMetricTriangle {
    pub polygon: PolygonParam,
    /// Equilateral residual under the first distance.
    pub equilateral_residual: f64,
    /// Smallest isosceles defect under the second distance.
    pub isosceles_residual: f64,
    /// Which defect vanishes: 0 for `d(x,y) = d(y,z)`, 1 for `d(y,z) = d(z,x)`,
    /// 2 for `d(z,x) = d(x,y)`.
    pub isosceles_index: usize,
    pub branch: Branch,
}

/// A triangle that is equilateral for `d1` and isosceles for `d2`, found on
/// the Z_3-invariant family of `d1`-equilateral triangles, along which the
/// three `d2`-defects permute cyclically.
pub fn find_two_metric_triangle(
    d1: &dyn Metric,
    d2: &dyn Metric,
    s: &TraceSettings,
) -> Result<TwoMetricTriangle> {
    let tri = TriangleSystem::new(d1);
    let events: Vec<EventFn<'_>> = (0..3)
        .map(|k| {
            EventFn::new(EventKind::IsoscelesHit, move |u: &[f64]| {
                isosceles_defects(d2, u)[k]
            })
        })
        .collect();
    let branch = invariant_branch(&tri, s, &events)?;
    let best = |u: &[f64]| {
        let d = isosceles_defects(d2, u);
        (0..3)
            .min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()))
            .map(|k| (k, d[k].abs()))
    };
    let finish = |u: Vec<f64>, branch: Branch| -> Option<TwoMetricTriangle> {
        let (k, defect) = best(&u)?;
        let eq = tri.residual(&u).norm();
        (eq < ACCEPT && defect < ACCEPT).then(|| TwoMetricTriangle {
            polygon: PolygonParam::from_chart(&u),
            equilateral_residual: eq,
            isosceles_residual: defect,
            isosceles_index: k,
            branch,
        })
    };
    let identically_zero =
        (0..3).any(|k| max_abs(&branch, &|u| isosceles_defects(d2, u)[k]) < IDENTICALLY_ZERO);
    if identically_zero {
        let u = branch.samples[0].clone();
        return finish(u, branch.clone())
            .ok_or_else(|| PegError::NotFound("degenerate isosceles family".into()));
    }
    for ev in branch.events_of(EventKind::IsoscelesHit) {
        let Some((k, _)) = best(&ev.location) else {
            continue;
        };
        let sys = Augmented::new(
            &tri,
            vec![ExtraRow::new("isosceles", move |u: &[f64]| {
                isosceles_defects(d2, u)[k]
            })],
        );
        if let Ok(u) = refine(&sys, &ev.location, s) {
            if let Some(found) = finish(u, branch.clone()) {
                return Ok(found);
            }
        }
    }
    Err(PegError::NotFound(format!(
        "{} isosceles events on the invariant equilateral branch ({} samples), none polished",
        branch.events_of(EventKind::IsoscelesHit).count(),
        branch.samples.len()
    )))
}

// ---------------------------------------------------------------------------
// rhombi on space curves

/// Result of [`find_planar_rhombus`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoundRhombus {
    pub polygon: PolygonParam,
    /// Equal-edge residual norm.
    pub residual: f64,
    /// Normalized triple product of the edge vectors.
    pub coplanarity: f64,
    /// Dihedral angle along the diagonal `x1 x3`, in `[0, 2 pi)`.
    pub angle: f64,
    pub diameter: f64,
    pub branch: Branch,
}

/// A planar rhombus on a space curve: the triple product of the edges changes
/// sign under the cyclic relabeling, so it vanishes somewhere on the
/// Z_4-invariant rhombus family.
pub fn find_planar_rhombus(knot: &ClosedCurve, s: &TraceSettings) -> Result<FoundRhombus> {
    let sys = Rhombus3dSystem::new(knot);
    let planar = EventFn::new(EventKind::Planarity, |u: &[f64]| sys.coplanarity_at(u));
    let branch = invariant_branch(&sys, s, std::slice::from_ref(&planar))?;
    let accept = |u: &[f64]| -> Option<(f64, f64)> {
        let diameter = sys.diameter_at(u);
        let angle = sys.angle_at(u).ok()?;
        let flat = angle.min(std::f64::consts::TAU - angle);
        (diameter >= MIN_RHOMBUS_DIAMETER && flat > 1e-3).then_some((angle, diameter))
    };
    let build = |u: &[f64], branch: Branch| -> Option<FoundRhombus> {
        let (angle, diameter) = accept(u)?;
        let residual = sys.residual(u).norm();
        let coplanarity = sys.coplanarity_at(u);
        (residual < ACCEPT && coplanarity.abs() < 1e-6).then(|| FoundRhombus {
            polygon: PolygonParam::from_chart(u),
            residual,
            coplanarity,
            angle,
            diameter,
            branch,
        })
    };
    if max_abs(&branch, &|u| sys.coplanarity_at(u)) < IDENTICALLY_ZERO {
        for u in &branch.samples {
            if let Some(found) = build(u, branch.clone()) {
                return Ok(found);
            }
        }
    }
    let promoted = Augmented::new(
        &sys,
        vec![ExtraRow::new("coplanarity", |u: &[f64]| {
            sys.coplanarity_at(u)
        })],
    );
    for ev in branch.events_of(EventKind::Planarity) {
        if accept(&ev.location).is_none() {
            continue;
        }
        if let Ok(u) = refine(&promoted, &ev.location, s) {
            if let Some(found) = build(&u, branch.clone()) {
                return Ok(found);
            }
        }
    }
    Err(PegError::NotFound(format!(
        "{} planarity events on the invariant rhombus branch, none acceptable",
        branch.events_of(EventKind::Planarity).count()
    )))
}

// ---------------------------------------------------------------------------
// octahedra

/// Result of [`find_octahedra`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OctahedronReport {
    /// Distinct solution circles (labeled octahedra).
    pub components: Vec<Branch>,
    /// Number of orbits of the relabeling group on the components.
    pub group_orbits: usize,
    /// Every relabeling maps every component onto a found component.
    pub equivariant: bool,
    /// Largest spread `max - min` of the twelve image edge lengths over all
    /// samples of all components.
    pub max_edge_defect: f64,
    /// Components added by closing the set under the group.
    pub added_by_closure: usize,
    pub seeds: usize,
    pub failed_seeds: usize,
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            return UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
        }
    }
}

fn find_component(
    sys: &OctahedronSystem,
    comps: &[Branch],
    u: &[f64],
    s: &TraceSettings,
) -> Option<usize> {
    comps.iter().position(|b| on_branch(sys, b, u, s))
}

/// Equal-edge octahedra inscribed in a non-round axis-scaled sphere. The
/// solution set is a union of circles; components are collected from random
/// starts and closed under the 48 relabelings of the octahedron.
pub fn find_octahedra(sphere: &EmbeddedSphere, s: &TraceSettings) -> Result<OctahedronReport> {
    s.validate()?;
    if sphere.is_round() {
        return Err(PegError::SolutionFamily(
            "round sphere: rotations act on the solutions, which form a 3-dimensional set".into(),
        ));
    }
    let sys = OctahedronSystem::new(*sphere);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let axes = [
        Point::x(),
        -Point::x(),
        Point::y(),
        -Point::y(),
        Point::z(),
        -Point::z(),
    ];
    let seeds: Vec<Vec<f64>> = (0..OCTAHEDRON_SEEDS)
        .map(|_| {
            let rot = random_rotation(&mut rng);
            OctahedronSystem::coords(&axes.map(|a| rot * a))
        })
        .collect();
    let solved: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|u| {
            newton(
                &sys,
                u,
                s.corrector_tol,
                s.boundary_floor,
                MAX_NEWTON_ITERATIONS,
            )
            .ok()
        })
        .collect();
    let failed_seeds = solved.iter().filter(|u| u.is_none()).count();

    let mut comps: Vec<Branch> = Vec::new();
    for u in solved.into_iter().flatten() {
        if find_component(&sys, &comps, &u, s).is_none() {
            comps.push(trace_branch(&sys, &u, s, &[])?);
        }
    }

    let group = octahedral_group();
    let image = |g: &crate::residuals::GroupElement, u: &[f64]| {
        OctahedronSystem::coords(&g.apply(&OctahedronSystem::points(u)))
    };
    let found = comps.len();
    let mut i = 0;
    while i < comps.len() {
        for g in &group {
            let v = image(g, &comps[i].samples[0]);
            if find_component(&sys, &comps, &v, s).is_none() {
                let v = refine(&sys, &v, s)?;
                comps.push(trace_branch(&sys, &v, s, &[])?);
            }
        }
        i += 1;
    }

    // orbits of the group on the components, by union-find
    let mut parent: Vec<usize> = (0..comps.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut equivariant = true;
    for i in 0..comps.len() {
        for g in &group {
            match find_component(&sys, &comps, &image(g, &comps[i].samples[0]), s) {
                Some(j) => {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    parent[a] = b;
                }
                None => equivariant = false,
            }
        }
    }
    let group_orbits = (0..comps.len())
        .filter(|&i| root(&mut parent, i) == i)
        .count();
    let max_edge_defect = comps
        .iter()
        .flat_map(|b| b.samples.iter())
        .map(|u| {
            let e = sys.edge_lengths(u);
            let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(OctahedronReport {
        added_by_closure: comps.len() - found,
        components: comps,
        group_orbits,
        equivariant,
        max_edge_defect,
        seeds: OCTAHEDRON_SEEDS,
        failed_seeds,
    })
}

// ---------------------------------------------------------------------------
// special quadrilaterals on all of P_4

/// Result of [`trace_special_path`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialPath {
    pub branch: Branch,
    /// `x4 - x1` along the branch.
    pub sizes: Vec<f64>,
    pub min_size: f64,
    pub max_size: f64,
}

fn quad_size(u: &[f64]) -> f64 {
    u[1] + u[2] + u[3]
}

/// The component of the special-quadrilateral set through a quadrilateral of
/// size 1/2 that sweeps the widest range of sizes.
pub fn trace_special_path(metric: &dyn Metric, s: &TraceSettings) -> Result<SpecialPath> {
    s.validate()?;
    let sys = QuadSystem::new(metric, QuadTarget::SpecialQuad);
    let slice = Augmented::new(
        &sys,
        vec![ExtraRow::new("size", |u: &[f64]| quad_size(u) - 0.5)],
    );
    let parts = 24;
    let comps = compositions(3, parts);
    let seeds: Vec<Vec<f64>> = (0..32)
        .flat_map(|b| {
            let x = b as f64 / 32.0;
            comps.iter().map(move |c| {
                let mut u = vec![x];
                u.extend(c.iter().map(|&k| 0.5 * k as f64 / parts as f64));
                u
            })
        })
        .collect();
    let solved: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|u| {
            newton(
                &slice,
                u,
                s.corrector_tol,
                s.boundary_floor,
                MAX_NEWTON_ITERATIONS,
            )
            .ok()
        })
        .collect();
    let periodic = sys.periodic();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for u in solved.into_iter().flatten() {
        if !starts
            .iter()
            .any(|v| sup_dist(&u, v, &periodic) < SAME_POINT)
        {
            starts.push(u);
        }
    }
    let mut best: Option<SpecialPath> = None;
    let mut traced: Vec<Branch> = Vec::new();
    for u in starts {
        if traced.iter().any(|b| on_branch(&sys, b, &u, s)) {
            continue;
        }
        let Ok(branch) = trace_branch(&sys, &u, s, &[]) else {
            continue;
        };
        let sizes: Vec<f64> = branch.samples.iter().map(|u| quad_size(u)).collect();
        let min_size = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_size = sizes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let wider = best
            .as_ref()
            .is_none_or(|b| max_size - min_size > b.max_size - b.min_size);
        if wider {
            best = Some(SpecialPath {
                branch: branch.clone(),
                sizes,
                min_size,
                max_size,
            });
        }
        traced.push(branch);
    }
    best.ok_or_else(|| PegError::NotFound("no special quadrilateral of size 1/2".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::field::DistanceField;
    use crate::polygon::chart_wrap;
    use crate::residuals::square_residual;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn compositions_count_and_order() {
        let c = compositions(4, 8);
        assert_eq!(c.len(), 35);
        assert_eq!(c[0], vec![2, 2, 2, 2]);
        assert!(c
            .iter()
            .all(|x| x.iter().sum::<usize>() == 8 && x.iter().all(|&k| k > 0)));
    }

    #[test]
    fn slice_seeds_lie_on_the_slice() {
        for u in slice_seeds(5, 10, 0.3) {
            assert_abs_diff_eq!(chart_star_base(&u), 0.3, epsilon = 1e-14);
        }
    }

    #[test]
    fn ellipse_square_by_rhombus_family() {
        let e = ClosedCurve::ellipse(2.0, 1.0).unwrap();
        let f = find_square(&e, &TraceSettings::default()).unwrap();
        assert!(!f.family);
        assert!(f.residual < 1e-8);
        assert!(f.cross_checked(), "{:?}", f.agreement);
        let th = 2f64.atan() / TAU;
        let want = [th, 0.5 - th, 0.5 + th, 1.0 - th];
        let mut got: Vec<f64> = f.polygon.vertices().iter().map(|v| v.value()).collect();
        got.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
        assert_eq!(f.multistart.len(), 1);
    }

    #[test]
    fn circle_square_is_a_family() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let f = find_square(&c, &TraceSettings::default()).unwrap();
        assert!(f.family);
        for g in &f.polygon.gaps {
            assert_abs_diff_eq!(*g, 0.25, epsilon = 1e-9);
        }
        assert!(f.multistart.iter().all(|h| !h.isolated()));
    }

    #[test]
    fn multistart_square_on_random_curve_is_a_zero() {
        let c = corpus::fourier_random(4, 0.3, 11).unwrap();
        let hits = multistart_squares(&c, 8, 12);
        assert!(!hits.is_empty());
        for h in &hits {
            assert!(square_residual(&c, &h.polygon)
                .iter()
                .all(|r| r.abs() < 1e-10));
            let star = h.polygon.to_star().star_base.value();
            assert!((0.0..0.25 + 1e-12).contains(&star));
        }
    }

    #[test]
    fn circle_rectangle_ratio_two() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let f = find_rectangle(&c, 2.0, &TraceSettings::default()).unwrap();
        assert_eq!(f.source, RectangleSource::BranchEvent);
        assert_abs_diff_eq!(f.polygon.gaps[0], 2f64.atan() / PI, epsilon = 1e-8);
        assert!(f.residual < 1e-8);
        let sq = find_rectangle(&c, 1.0, &TraceSettings::default()).unwrap();
        assert_eq!(sq.source, RectangleSource::Square);
    }

    #[test]
    fn ellipse_rectangle_ratio_two() {
        let e = ClosedCurve::ellipse(2.0, 1.0).unwrap();
        let f = find_rectangle(&e, 2.0, &TraceSettings::default()).unwrap();
        assert!(f.residual < 1e-8 && (f.aspect - 2.0).abs() < 1e-8);
        assert!(f.diagonal_defect < 1e-8);
    }

    #[test]
    fn circle_triangle_is_regular() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let t = find_equilateral_triangle(&c, &TraceSettings::default()).unwrap();
        for g in &t.polygon.gaps {
            assert_abs_diff_eq!(*g, 1.0 / 3.0, epsilon = 1e-9);
        }
        assert_eq!(t.seeds_tried, 1);
    }

    #[test]
    fn synthetic_field_triangle() {
        let f = DistanceField::random_synthetic(3, 0.3, 4).unwrap();
        let t = find_equilateral_triangle(&f, &TraceSettings::default()).unwrap();
        assert!(t.residual < 1e-8);
        assert!(spread(&t.polygon) > 1e-3);
    }

    #[test]
    fn two_metric_triangle_on_circle_family() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let terms = [crate::field::TrigTerm {
            j: 0,
            k: 1,
            a: 0.1,
            b: 0.0,
        }];
        let d2 = DistanceField::synthetic(&terms).unwrap();
        let t = find_two_metric_triangle(&c, &d2, &TraceSettings::default()).unwrap();
        assert!(t.equilateral_residual < 1e-8 && t.isosceles_residual < 1e-8);
        assert!(t.branch.closed && t.branch.isotropy_order == 3);
        let same = find_two_metric_triangle(&c, &c, &TraceSettings::default()).unwrap();
        assert!(same.isosceles_residual < 1e-8);
    }

    #[test]
    fn trefoil_planar_rhombus() {
        let k = corpus::trefoil().unwrap();
        let f = find_planar_rhombus(&k, &TraceSettings::default()).unwrap();
        assert!(f.residual < 1e-8 && f.coplanarity.abs() < 1e-6);
        assert!(f.diameter > 1e-3);
    }

    #[test]
    fn tilted_circle_rhombus_needs_no_event() {
        let k = corpus::tilted_circle(0.7).unwrap();
        let f = find_planar_rhombus(&k, &TraceSettings::default()).unwrap();
        assert!(f.coplanarity.abs() < 1e-12);
        assert_abs_diff_eq!(f.angle, PI, epsilon = 1e-6);
    }

    #[test]
    fn round_sphere_is_rejected() {
        let s = EmbeddedSphere::new([1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            find_octahedra(&s, &TraceSettings::default()),
            Err(PegError::SolutionFamily(_))
        ));
    }

    #[test]
    fn all_branches_of_circle_triangles() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = TriangleSystem::new(&c);
        let b = find_all_branches(&sys, &TraceSettings::default(), &[]).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].winding.map(i64::abs), Some(1));
        let w = chart_wrap(&b[0].samples[0], &[0]);
        assert!(w[0] < 1.0);
    }

    #[test]
    fn spiral_special_path_sweeps_all_sizes() {
        let c = crate::corpus::spiral(2.0).unwrap();
        let p = trace_special_path(&c, &TraceSettings::default()).unwrap();
        assert!(!p.branch.closed);
        assert!(p.min_size < 0.01, "min size {}", p.min_size);
        assert!(p.max_size > 0.99, "max size {}", p.max_size);
    }
}
