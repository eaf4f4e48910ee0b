//! Command execution: builds the result document for a parsed command line.

use std::time::Instant;

use clap::Parser;
use pegfinder_core::continuation::{
    find_all_branches, find_equilateral_triangle, find_octahedra, find_planar_rhombus,
    find_rectangle, find_square, find_two_metric_triangle, trace_special_path,
};
use pegfinder_core::corpus::INVENTORY;
use pegfinder_core::counting::{
    classify_rectangle_components, count_special_quads, count_squares, orientation_check,
    square_verdict, SliceGrid, SquareGrid,
};
use pegfinder_core::residuals::{square_residual, OctahedronSystem, SlicePath};
use pegfinder_core::{
    ClosedCurve, CorpusItem, CorpusParams, CurveFile, Metric, PegError, PolygonParam, TraceSettings,
};

use crate::args::{Cli, Command, Common};
use crate::document::ResultDocument;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// What a command produced: the document (absent for listings and usage
/// errors), text for the terminal and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub document: Option<ResultDocument>,
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn usage(message: impl Into<String>) -> Self {
        Outcome {
            document: None,
            text: message.into(),
            code: EXIT_USAGE,
        }
    }
}

/// Errors caused by the request rather than by the numerics.
fn is_usage(e: &PegError) -> bool {
    matches!(
        e,
        PegError::InvalidInput(_)
            | PegError::UnknownCorpus(_)
            | PegError::PolygonInequality
            | PegError::NotPositive { .. }
            | PegError::GapSum { .. }
            | PegError::InconsistentVertices { .. }
    )
}

/// Parse `argv` (program name first) and run.
pub fn run_args<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    match Cli::try_parse_from(&argv) {
        Ok(cli) => run(&cli, argv.get(1..).unwrap_or_default().to_vec()),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            Outcome {
                document: None,
                text: e.render().to_string(),
                code,
            }
        }
    }
}

fn corpus_params(c: &Common) -> CorpusParams {
    CorpusParams {
        radius: c.radius,
        a: c.a,
        b: c.b,
        degree: c.degree,
        amp: c.amp,
        seed: c.seed.unwrap_or(0),
        turns: c.turns,
        tilt: c.tilt,
        ..Default::default()
    }
}

/// The input description: `--curve`, `--corpus`, or the command's default.
fn input_file(cli: &Cli) -> Result<Option<CurveFile>, PegError> {
    let c = &cli.common;
    if let Some(path) = &c.curve {
        let mut f = CurveFile::load(path)?;
        if let Some(seed) = c.seed {
            f.seed = seed;
        }
        return Ok(Some(f));
    }
    let mut params = corpus_params(c);
    let default = match &cli.command {
        Command::CorpusList => return Ok(None),
        Command::KnotRhombus => Some("trefoil"),
        Command::Octahedra {
            lambda_x,
            lambda_y,
            lambda_z,
        } => {
            params.lx = Some(*lambda_x);
            params.ly = Some(*lambda_y);
            params.lz = *lambda_z;
            Some("scaled-sphere")
        }
        _ => None,
    };
    match c.corpus.as_deref().or(default) {
        Some(name) => Ok(Some(CurveFile::corpus(name, params))),
        None => Err(PegError::InvalidInput(format!(
            "{} needs --curve FILE or --corpus NAME",
            cli.command.name()
        ))),
    }
}

fn settings(cli: &Cli, input: Option<&CurveFile>) -> TraceSettings {
    let seed = cli.common.seed.or(input.map(|f| f.seed)).unwrap_or(0);
    let mut s = TraceSettings::with_seed(seed);
    if let Some(tol) = cli.common.tol {
        s.corrector_tol = tol;
    }
    s
}

pub fn run(cli: &Cli, command: Vec<String>) -> Outcome {
    let start = Instant::now();
    if let Command::CorpusList = cli.command {
        return corpus_list(command);
    }
    let input = match input_file(cli) {
        Ok(f) => f,
        Err(e) => return Outcome::usage(format!("error: {e}")),
    };
    let s = settings(cli, input.as_ref());
    if let Err(e) = s.validate() {
        return Outcome::usage(format!("error: {e}"));
    }
    let item = match input.as_ref().map(CurveFile::build).transpose() {
        Ok(item) => item.expect("every command but corpus-list has an input"),
        Err(e) => return Outcome::usage(format!("error: {e}")),
    };
    let mut doc = ResultDocument::new(command, input, s.clone());
    let result = dispatch(cli, &item, &s, &mut doc);
    if cli.common.timing {
        doc.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let code = match result {
        Ok(()) => EXIT_OK,
        Err(e) if is_usage(&e) => return Outcome::usage(format!("error: {e}")),
        Err(e) => {
            doc.fail(e.to_string());
            EXIT_NUMERICAL
        }
    };
    Outcome {
        text: summary(cli.command.name(), &doc),
        document: Some(doc),
        code,
    }
}

fn corpus_list(command: Vec<String>) -> Outcome {
    let text: String = INVENTORY
        .iter()
        .map(|(name, desc)| format!("{name:<16} {desc}\n"))
        .collect();
    let mut doc = ResultDocument::new(command, None, TraceSettings::default());
    doc.diagnostics = INVENTORY.iter().map(|(n, d)| format!("{n}: {d}")).collect();
    Outcome {
        document: Some(doc),
        text,
        code: EXIT_OK,
    }
}

fn need_curve(item: &CorpusItem) -> Result<&ClosedCurve, PegError> {
    match item {
        CorpusItem::Curve(c) => Ok(c),
        _ => Err(PegError::InvalidInput("this command needs a curve".into())),
    }
}

fn need_metric(item: &CorpusItem) -> Result<&dyn Metric, PegError> {
    match item {
        CorpusItem::Curve(c) => Ok(c),
        CorpusItem::Field(f) => Ok(f),
        CorpusItem::Sphere(_) => Err(PegError::InvalidInput(
            "this command needs a curve or a distance field".into(),
        )),
    }
}

fn points(item: &CorpusItem, p: &PolygonParam) -> Vec<Vec<f64>> {
    match item {
        CorpusItem::Curve(c) => p.vertices().iter().map(|v| c.coords(v.value())).collect(),
        CorpusItem::Field(f) => match f.curve() {
            Some(c) => p.vertices().iter().map(|v| c.coords(v.value())).collect(),
            None => Vec::new(),
        },
        CorpusItem::Sphere(_) => Vec::new(),
    }
}

fn dispatch(
    cli: &Cli,
    item: &CorpusItem,
    s: &TraceSettings,
    doc: &mut ResultDocument,
) -> Result<(), PegError> {
    match &cli.command {
        Command::FindSquare => {
            let curve = need_curve(item)?;
            let f = find_square(curve, s)?;
            doc.polygon(
                "square",
                &f.polygon,
                points(item, &f.polygon),
                Some(f.residual),
            );
            doc.branch("rhombus family", &f.rhombus_branch);
            doc.metric("residual", f.residual);
            doc.metric("square_orbits", f.multistart.len() as f64);
            if let Some(a) = f.agreement {
                doc.metric("multistart_agreement", a);
            }
            doc.verdict(
                "isolated",
                !f.family,
                if f.family {
                    "the curve carries a continuum of squares"
                } else {
                    "square orbits are isolated"
                },
            );
            doc.verdict(
                "cross_checked",
                f.cross_checked(),
                "square from the diagonal swap agrees with multistart Newton within 1e-6",
            );
            if curve.dim() == 2 {
                doc.verdict(
                    "orientation",
                    orientation_check(curve, &f.polygon.vertices()),
                    "square vertices in curve order are labeled counter-clockwise",
                );
            }
        }
        Command::FindRect { ratio } => {
            let curve = need_curve(item)?;
            let f = find_rectangle(curve, *ratio, s)?;
            doc.polygon(
                "rectangle",
                &f.polygon,
                points(item, &f.polygon),
                Some(f.residual),
            );
            if let Some(b) = &f.branch {
                doc.branch("rectangle family", b);
            }
            doc.metric("ratio", f.ratio);
            doc.metric("aspect", f.aspect);
            doc.metric("residual", f.residual);
            doc.metric("diagonal_defect", f.diagonal_defect);
            doc.metric("first_gap", f.chart[1]);
            doc.verdict("source", true, format!("{:?}", f.source));
        }
        Command::FindNgon { n, ratios } => {
            let metric = need_metric(item)?;
            let ratios = ratios
                .clone()
                .unwrap_or_else(|| vec![1.0; n.saturating_sub(1)]);
            if ratios.len() + 1 != *n {
                return Err(PegError::InvalidInput(format!(
                    "--ratios needs n - 1 = {} values, got {}",
                    n.saturating_sub(1),
                    ratios.len()
                )));
            }
            let sys = pegfinder_core::residuals::EdgeRatioSystem::new(metric, ratios)?;
            let branches = find_all_branches(&sys, s, &[])?;
            let mut sum = 0i64;
            let mut invariant = 0;
            for (i, b) in branches.iter().enumerate() {
                doc.branch(&format!("branch {i}"), b);
                sum += b.winding.unwrap_or(0);
                if b.closed && b.isotropy_order == *n {
                    invariant += 1;
                }
            }
            doc.metric("branches", branches.len() as f64);
            doc.metric("winding_sum", sum as f64);
            doc.metric("invariant_branches", invariant as f64);
            doc.verdict(
                "winding_sum_unit",
                sum.abs() == 1,
                format!("sum of branch windings = {sum}"),
            );
            doc.verdict(
                "invariant_branch",
                invariant > 0,
                format!("{invariant} closed branches with isotropy order {n}"),
            );
        }
        Command::CountSpecial {
            size,
            t_steps,
            parts,
        } => {
            let metric = need_metric(item)?;
            let path = SlicePath::standard(*size)?;
            let grid = SliceGrid {
                t_steps: *t_steps,
                parts: *parts,
            };
            let report = count_special_quads(metric, path, grid, s)?;
            for (i, o) in report.orbits.iter().enumerate() {
                doc.polygon(
                    &format!("special {i}"),
                    &o.polygon,
                    points(item, &o.polygon),
                    None,
                );
            }
            doc.metric("count", report.orbit_count as f64);
            doc.metric("parity", report.parity as f64);
            doc.metric("slice_solutions", report.unfiltered as f64);
            doc.diagnostics.extend(report.warnings.iter().cloned());
            if let CorpusItem::Curve(curve) = item {
                let v = square_verdict(curve, &report, s);
                doc.verdict(
                    "even_parity_implies_square",
                    v.consistent,
                    format!(
                        "parity {}, reliable {}, square found {:?}",
                        if v.parity_even { "even" } else { "odd" },
                        v.parity_reliable,
                        v.square_found
                    ),
                );
            }
            doc.counts.push(report);
        }
        Command::CountSquares { bases, parts } => {
            let curve = need_curve(item)?;
            let report = count_squares(
                curve,
                SquareGrid {
                    bases: *bases,
                    parts: *parts,
                },
                s.seed,
            )?;
            for (i, o) in report.orbits.iter().enumerate() {
                let r = square_residual(curve, &o.polygon);
                let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                doc.polygon(
                    &format!("square {i}"),
                    &o.polygon,
                    points(item, &o.polygon),
                    Some(norm),
                );
            }
            doc.metric("orbits", report.orbit_count as f64);
            doc.metric("parity", report.parity as f64);
            doc.verdict(
                "odd",
                report.is_odd(),
                format!("{} square orbits", report.orbit_count),
            );
            doc.diagnostics.extend(report.warnings.iter().cloned());
            doc.counts.push(report);
        }
        Command::RectangleComponents { bases, parts } => {
            let curve = need_curve(item)?;
            let r = classify_rectangle_components(
                curve,
                SquareGrid {
                    bases: *bases,
                    parts: *parts,
                },
                s,
            )?;
            for (i, c) in r.components.iter().enumerate() {
                doc.branch(&format!("component {i} ({} squares)", c.squares), &c.branch);
            }
            doc.metric("total_squares", r.total_squares as f64);
            doc.metric("open_components", r.open_components as f64);
            doc.metric(
                "trivial_isotropy_squares_mod8",
                r.trivial_isotropy_mod8 as f64,
            );
            doc.metric("full_isotropy_squares_mod8", r.full_isotropy_mod8 as f64);
            doc.verdict(
                "closed_components_even",
                r.closed_even,
                "every closed component carries an even number of squares",
            );
            doc.verdict(
                "total_4_mod_8",
                r.total_squares % 8 == 4,
                format!("{} labeled squares", r.total_squares),
            );
            doc.diagnostics.extend(r.warnings.iter().cloned());
            doc.counts.push(r.squares);
        }
        Command::SpecialPath => {
            let metric = need_metric(item)?;
            let p = trace_special_path(metric, s)?;
            doc.branch("special quadrilaterals", &p.branch);
            doc.metric("min_size", p.min_size);
            doc.metric("max_size", p.max_size);
        }
        Command::Triangle { field2 } => {
            let metric = need_metric(item)?;
            match field2 {
                None => {
                    let t = find_equilateral_triangle(metric, s)?;
                    doc.polygon(
                        "equilateral",
                        &t.polygon,
                        points(item, &t.polygon),
                        Some(t.residual),
                    );
                    doc.metric("residual", t.residual);
                    doc.metric("seeds_tried", t.seeds_tried as f64);
                }
                Some(path) => {
                    let other = CurveFile::load(path)?.build()?;
                    let d2 = need_metric(&other)?;
                    let t = find_two_metric_triangle(metric, d2, s)?;
                    doc.polygon(
                        "triangle",
                        &t.polygon,
                        points(item, &t.polygon),
                        Some(t.equilateral_residual),
                    );
                    doc.branch("equilateral family", &t.branch);
                    doc.metric("equilateral_residual", t.equilateral_residual);
                    doc.metric("isosceles_residual", t.isosceles_residual);
                    doc.metric("isosceles_apex", t.isosceles_index as f64);
                }
            }
        }
        Command::KnotRhombus => {
            let curve = need_curve(item)?;
            let r = find_planar_rhombus(curve, s)?;
            doc.polygon(
                "rhombus",
                &r.polygon,
                points(item, &r.polygon),
                Some(r.residual),
            );
            doc.branch("rhombus family", &r.branch);
            doc.metric("residual", r.residual);
            doc.metric("coplanarity", r.coplanarity);
            doc.metric("angle", r.angle);
            doc.metric("diameter", r.diameter);
        }
        Command::Octahedra { .. } => {
            let CorpusItem::Sphere(sphere) = item else {
                return Err(PegError::InvalidInput("octahedra needs a sphere".into()));
            };
            let r = find_octahedra(sphere, s)?;
            let sys = OctahedronSystem::new(*sphere);
            for (i, b) in r.components.iter().enumerate() {
                doc.branch(&format!("circle {i}"), b);
                let q = OctahedronSystem::points(&b.samples[0]);
                doc.polygons.push(crate::document::PolygonRecord {
                    label: format!("octahedron {i}"),
                    parameters: Vec::new(),
                    points: q
                        .iter()
                        .map(|p| sphere.eval(p).as_slice().to_vec())
                        .collect(),
                    residual: Some(edge_spread(&sys, b)),
                });
            }
            doc.metric("components", r.components.len() as f64);
            doc.metric("group_orbits", r.group_orbits as f64);
            doc.metric("max_edge_defect", r.max_edge_defect);
            doc.metric("added_by_closure", r.added_by_closure as f64);
            doc.metric("failed_seeds", r.failed_seeds as f64);
            doc.verdict(
                "equivariant",
                r.equivariant,
                "the 48 relabelings permute the found circles",
            );
            doc.verdict(
                "sixteen_circles",
                r.components.len() == 16,
                format!(
                    "{} circles in {} group orbits",
                    r.components.len(),
                    r.group_orbits
                ),
            );
        }
        Command::CorpusList => unreachable!("handled before dispatch"),
    }
    Ok(())
}

/// Spread `max - min` of the twelve image edge lengths at the first sample.
fn edge_spread(sys: &OctahedronSystem, b: &pegfinder_core::Branch) -> f64 {
    let e = sys.edge_lengths(&b.samples[0]);
    let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    hi - lo
}

fn summary(name: &str, doc: &ResultDocument) -> String {
    let mut out = String::new();
    let status = match doc.status {
        crate::document::Status::Ok => "ok",
        crate::document::Status::NumericalFailure => "numerical failure",
    };
    out.push_str(&format!("{name}: {status}\n"));
    for p in &doc.polygons {
        let params: Vec<String> = p.parameters.iter().map(|v| format!("{v:.9}")).collect();
        out.push_str(&format!("  {}: [{}]\n", p.label, params.join(", ")));
    }
    for b in &doc.branches {
        out.push_str(&format!(
            "  {}: {} samples, closed {}, winding {:?}, isotropy {}\n",
            b.label, b.sample_count, b.closed, b.winding, b.isotropy_order
        ));
    }
    for (k, v) in &doc.metrics {
        out.push_str(&format!("  {k} = {v}\n"));
    }
    for v in &doc.verdicts {
        out.push_str(&format!(
            "  [{}] {}: {}\n",
            if v.holds { "yes" } else { "no" },
            v.name,
            v.detail
        ));
    }
    for d in &doc.diagnostics {
        out.push_str(&format!("  note: {d}\n"));
    }
    out
}

/// Shape of the input, for rendering.
pub fn input_shape(doc: &ResultDocument) -> Option<CorpusItem> {
    doc.input.as_ref().and_then(|f| f.build().ok())
}
