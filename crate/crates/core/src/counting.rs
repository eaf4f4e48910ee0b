//! Parity statements as finite counts over deduplicated solution orbits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{
    find_square, multistart_squares, newton, on_branch, trace_branch, Branch, EventFn, EventKind,
    TraceSettings, MAX_NEWTON_ITERATIONS, ORBIT_TOL,
};
use crate::curve::{wrap_unit, CirclePoint, ClosedCurve};
use crate::error::{PegError, Result};
use crate::field::Metric;
use crate::polygon::PolygonParam;
use crate::residuals::{
    chart_vertices, QuadSystem, ResidualSystem, SlicePath, SpecialQuadFlags, SpecialQuadSystem,
    SystemKind,
};

/// Residual bound of a reported special quadrilateral.
const SPECIAL_RESIDUAL: f64 = 1e-10;

/// Event values below this count as exact zeros when counting sign changes.
const ZERO_VALUE: f64 = 1e-12;

/// Seed grid of the square multistart: `bases` star bases in `[0, 1/4)` times
/// the compositions of `parts` into four gaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareGrid {
    pub bases: usize,
    pub parts: usize,
}

impl Default for SquareGrid {
    /// 64 x 4495 = 287680 seeds.
    fn default() -> Self {
        SquareGrid {
            bases: 64,
            parts: 32,
        }
    }
}

impl SquareGrid {
    pub fn seeds(&self) -> usize {
        let p = self.parts;
        if p < 4 {
            return 0;
        }
        self.bases * (p - 1) * (p - 2) * (p - 3) / 6
    }

    /// Twice as many star bases and gap steps.
    pub fn doubled(&self) -> Self {
        SquareGrid {
            bases: 2 * self.bases,
            parts: 2 * self.parts,
        }
    }
}

/// Seed grid of the special-quadrilateral slice search: `t_steps` values of
/// the slice parameter times the compositions of `parts` into three gaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceGrid {
    pub t_steps: usize,
    pub parts: usize,
}

impl Default for SliceGrid {
    fn default() -> Self {
        SliceGrid {
            t_steps: 128,
            parts: 24,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case")]
pub enum Resolution {
    Squares(SquareGrid),
    Slice(SliceGrid),
}

/// One solution orbit of a count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitData {
    /// Canonical representative.
    pub polygon: PolygonParam,
    /// Number of points of `P_n` in the orbit.
    pub orbit_size: usize,
    /// Order of the stabilizer in the cyclic group.
    pub isotropy: usize,
    /// Jacobian condition number at the representative.
    pub condition: f64,
    /// Seeds that converged into this orbit.
    pub multiplicity: usize,
    /// Classifier data of special quadrilaterals.
    pub flags: Option<SpecialQuadFlags>,
}

/// Outcome of a count: orbits, their sizes, and the parity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub system: SystemKind,
    /// Sum of the orbit sizes.
    pub total: usize,
    pub orbit_count: usize,
    /// `orbit_count mod 2`.
    pub parity: usize,
    /// Parity is unreliable (a solution sits at a classifier tie).
    pub degenerate: bool,
    pub orbits: Vec<OrbitData>,
    /// Solutions before classification (equal to `orbit_count` for squares).
    pub unfiltered: usize,
    pub resolution: Resolution,
    pub seeds: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl CountReport {
    fn new(
        system: SystemKind,
        orbits: Vec<OrbitData>,
        unfiltered: usize,
        resolution: Resolution,
        seeds: usize,
        seed: u64,
    ) -> Self {
        let degenerate = orbits
            .iter()
            .any(|o| o.flags.is_some_and(|f| f.tie_degenerate));
        CountReport {
            system,
            total: orbits.iter().map(|o| o.orbit_size).sum(),
            orbit_count: orbits.len(),
            parity: orbits.len() % 2,
            degenerate,
            orbits,
            unfiltered,
            resolution,
            seeds,
            seed,
            warnings: Vec::new(),
        }
    }

    pub fn is_odd(&self) -> bool {
        self.parity == 1
    }
}

/// Square orbits of a smooth curve by multistart Newton. Curves whose
/// squares are not isolated (the circle) are rejected.
pub fn count_squares(curve: &ClosedCurve, grid: SquareGrid, seed: u64) -> Result<CountReport> {
    if grid.bases == 0 || grid.parts < 4 {
        return Err(PegError::InvalidInput(
            "square grid needs bases >= 1 and parts >= 4".into(),
        ));
    }
    let hits = multistart_squares(curve, grid.bases, grid.parts);
    let singular = hits.iter().filter(|h| !h.isolated()).count();
    if singular > 0 {
        return Err(PegError::SolutionFamily(format!(
            "{singular} of {} square orbits have Jacobian condition above 1e10",
            hits.len()
        )));
    }
    let orbits: Vec<OrbitData> = hits
        .into_iter()
        .map(|h| OrbitData {
            polygon: h.polygon,
            orbit_size: 4,
            isotropy: 1,
            condition: h.condition,
            multiplicity: h.multiplicity,
            flags: None,
        })
        .collect();
    let n = orbits.len();
    let mut report = CountReport::new(
        SystemKind::Square,
        orbits,
        n,
        Resolution::Squares(grid),
        grid.seeds(),
        seed,
    );
    if !curve.is_smooth() {
        report
            .warnings
            .push("curve is not smooth; Jacobians use secant differences".into());
    }
    Ok(report)
}

/// Special quadrilaterals `(a, a, a, b)`, `a >= b`, with equal diagonals on
/// the slice `x1 = y1(t)`, `x4 = y4(t)` of the given path.
pub fn count_special_quads(
    metric: &dyn Metric,
    path: SlicePath,
    grid: SliceGrid,
    s: &TraceSettings,
) -> Result<CountReport> {
    s.validate()?;
    if grid.t_steps == 0 || grid.parts < 3 {
        return Err(PegError::InvalidInput(
            "slice grid needs t_steps >= 1 and parts >= 3".into(),
        ));
    }
    let sys = SpecialQuadSystem::new(metric, path.clone());
    let comps = crate::continuation::compositions(3, grid.parts);
    let seeds: Vec<[f64; 3]> = (0..grid.t_steps)
        .flat_map(|i| {
            let t = (i as f64 + 0.5) / grid.t_steps as f64;
            let size = path.size(t);
            comps.iter().map(move |c| {
                let k = grid.parts as f64;
                [t, size * c[0] as f64 / k, size * c[1] as f64 / k]
            })
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

    let mut solutions: Vec<Vec<f64>> = Vec::new();
    for mut u in solved.into_iter().flatten() {
        u[0] = wrap_unit(u[0]);
        let same = |v: &Vec<f64>| {
            let dt = (u[0] - v[0]).abs();
            dt.min(1.0 - dt)
                .max((u[1] - v[1]).abs())
                .max((u[2] - v[2]).abs())
                < ORBIT_TOL
        };
        if sys.residual(&u).norm() < SPECIAL_RESIDUAL && !solutions.iter().any(same) {
            solutions.push(u);
        }
    }
    solutions.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let unfiltered = solutions.len();
    let orbits: Vec<OrbitData> = solutions
        .iter()
        .filter_map(|u| {
            let flags = sys.flags(u);
            if !flags.is_special {
                return None;
            }
            let j = sys.jacobian(u);
            let sv = j.singular_values();
            Some(OrbitData {
                polygon: sys.polygon(u)?,
                orbit_size: 1,
                isotropy: 1,
                condition: sv.max() / sv.min(),
                multiplicity: 1,
                flags: Some(flags),
            })
        })
        .collect();
    let seeds = seeds.len();
    let mut report = CountReport::new(
        SystemKind::SpecialQuad {
            size: Some(path.epsilon),
        },
        orbits,
        unfiltered,
        Resolution::Slice(grid),
        seeds,
        s.seed,
    );
    if report.degenerate {
        report
            .warnings
            .push("a special quadrilateral sits at the a = b tie; parity unreliable".into());
    }
    Ok(report)
}

/// Consistency of a special-quadrilateral count with the existence of a
/// square: an even count forces a square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareVerdict {
    pub parity_even: bool,
    pub parity_reliable: bool,
    /// Result of the square search, run only when the parity is even.
    pub square_found: Option<bool>,
    pub consistent: bool,
}

pub fn square_verdict(
    curve: &ClosedCurve,
    report: &CountReport,
    s: &TraceSettings,
) -> SquareVerdict {
    let parity_even = report.parity == 0;
    let square_found = parity_even.then(|| find_square(curve, s).is_ok());
    SquareVerdict {
        parity_even,
        parity_reliable: !report.degenerate,
        square_found,
        consistent: !parity_even || square_found == Some(true),
    }
}

/// One component of the rectangle family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleComponent {
    pub branch: Branch,
    pub closed: bool,
    pub isotropy: usize,
    /// Labeled squares lying on the component.
    pub squares: usize,
    /// Sign changes of `e12 - e23` around a closed component, or along an open one.
    pub square_events: usize,
}

/// Desk-scale bookkeeping of the rectangle components through the squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleReport {
    pub squares: CountReport,
    pub components: Vec<RectangleComponent>,
    /// Labeled squares (four per orbit).
    pub total_squares: usize,
    /// Every closed component carries an even number of squares.
    pub closed_even: bool,
    /// Squares on closed components with trivial isotropy, mod 8.
    pub trivial_isotropy_mod8: usize,
    /// Squares on closed fully invariant components, mod 8.
    pub full_isotropy_mod8: usize,
    pub open_components: usize,
    pub warnings: Vec<String>,
}

fn edge_difference(metric: &dyn Metric, u: &[f64]) -> f64 {
    let v = chart_vertices(u);
    metric.dist(v[0], v[1]) - metric.dist(v[1], v[2])
}

/// Sign changes of `values`, skipping exact zeros; cyclic for closed loops
/// (whose last sample repeats the first).
fn sign_changes(values: &[f64], closed: bool) -> usize {
    let vals = if closed {
        &values[..values.len() - 1]
    } else {
        values
    };
    let signs: Vec<bool> = vals
        .iter()
        .filter(|v| v.abs() > ZERO_VALUE)
        .map(|v| *v > 0.0)
        .collect();
    if signs.is_empty() {
        return 0;
    }
    let mut count = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if closed && signs[0] != signs[signs.len() - 1] {
        count += 1;
    }
    count
}

/// Rectangle components through every labeled square, with isotropy and
/// square counts. Open components are reported but excluded from the parity
/// bookkeeping.
pub fn classify_rectangle_components(
    curve: &ClosedCurve,
    grid: SquareGrid,
    s: &TraceSettings,
) -> Result<RectangleReport> {
    if curve.dim() != 2 {
        return Err(PegError::InvalidInput(
            "rectangle components need a planar curve".into(),
        ));
    }
    let squares = count_squares(curve, grid, s.seed)?;
    let labeled: Vec<Vec<f64>> = squares
        .orbits
        .iter()
        .flat_map(|o| (0..4).map(|j| o.polygon.shifted(j).chart()))
        .collect();
    let rect = QuadSystem::rectangle(curve);
    let event = EventFn::new(EventKind::SquareOnBranch, |u: &[f64]| {
        edge_difference(curve, u)
    });
    let mut components: Vec<RectangleComponent> = Vec::new();
    for q in &labeled {
        if components.iter().any(|c| on_branch(&rect, &c.branch, q, s)) {
            continue;
        }
        let branch = trace_branch(&rect, q, s, std::slice::from_ref(&event))?;
        let on = labeled
            .iter()
            .filter(|p| on_branch(&rect, &branch, p, s))
            .count();
        let values: Vec<f64> = branch
            .samples
            .iter()
            .map(|u| edge_difference(curve, u))
            .collect();
        components.push(RectangleComponent {
            closed: branch.closed,
            isotropy: branch.isotropy_order,
            squares: on,
            square_events: sign_changes(&values, branch.closed),
            branch,
        });
    }
    let closed: Vec<&RectangleComponent> = components.iter().filter(|c| c.closed).collect();
    let open_components = components.len() - closed.len();
    let mut warnings = Vec::new();
    if open_components > 0 {
        warnings.push(format!(
            "{open_components} rectangle components reach the boundary without closing; excluded from parity bookkeeping"
        ));
    }
    let sum_mod8 = |k: usize| {
        closed
            .iter()
            .filter(|c| c.isotropy == k)
            .map(|c| c.squares)
            .sum::<usize>()
            % 8
    };
    Ok(RectangleReport {
        total_squares: labeled.len(),
        closed_even: closed
            .iter()
            .all(|c| c.squares % 2 == 0 && c.square_events % 2 == 0),
        trivial_isotropy_mod8: sum_mod8(1),
        full_isotropy_mod8: sum_mod8(4),
        open_components,
        squares,
        components,
        warnings,
    })
}

/// Do the vertices, taken in the given order, span a quadrilateral with the
/// same orientation as the curve?
pub fn orientation_check(curve: &ClosedCurve, vertices: &[CirclePoint]) -> bool {
    let pts: Vec<_> = vertices.iter().map(|v| curve.eval_at(*v)).collect();
    let n = pts.len();
    let area: f64 = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    area * curve.signed_area().signum() > 0.0
}
