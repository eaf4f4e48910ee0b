//! End-to-end behavior of the `pegfinder` binary and its result documents.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pegfinder_cli::document::ResultDocument;
use pegfinder_cli::{json, run_args, Status, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, THREADS_VAR};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pegfinder"))
}

fn pegfinder(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn document(args: &[&str]) -> (ResultDocument, i32) {
    let argv: Vec<&str> = std::iter::once("pegfinder")
        .chain(args.iter().copied())
        .collect();
    let outcome = run_args(argv);
    (
        outcome.document.expect("command produces a document"),
        outcome.code,
    )
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compare stdout of a run byte for byte with a stored file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, args: &[&str]) {
    let out = pegfinder(args);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &out.stdout).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        expected == out.stdout,
        "{name} differs from the stored output; rerun with UPDATE_GOLDEN=1 after checking the change"
    );
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/result-schema.json");
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

#[test]
fn golden_ellipse_square() {
    check_golden(
        "find-square-ellipse.json",
        &["find-square", "--corpus", "ellipse", "--json", "-"],
    );
}

#[test]
fn golden_circle_rectangle() {
    check_golden(
        "find-rect-circle.json",
        &[
            "find-rect",
            "--ratio",
            "2",
            "--corpus",
            "circle",
            "--json",
            "-",
        ],
    );
}

#[test]
fn golden_circle_special_quads() {
    check_golden(
        "count-special-circle.json",
        &[
            "count-special",
            "--size",
            "0.1",
            "--corpus",
            "circle",
            "--t-steps",
            "32",
            "--parts",
            "12",
            "--json",
            "-",
        ],
    );
}

#[test]
fn documents_round_trip_and_match_the_schema() {
    let validator = schema();
    let runs: [&[&str]; 6] = [
        &["find-square", "--corpus", "ellipse"],
        &["find-ngon", "--n", "3", "--corpus", "ellipse"],
        &[
            "count-squares",
            "--corpus",
            "fourier-random",
            "--seed",
            "3",
            "--bases",
            "8",
            "--parts",
            "12",
        ],
        &["triangle", "--corpus", "synthetic-field", "--seed", "4"],
        &["knot-rhombus"],
        &["corpus-list"],
    ];
    for args in runs {
        let (doc, _) = document(args);
        let text = json::to_string(&doc).unwrap();
        let back: ResultDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc, "{args:?}");
        assert_eq!(json::to_string(&back).unwrap(), text, "{args:?}");
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let errors: Vec<String> = validator
            .iter_errors(&value)
            .map(|e| format!("{e} at {}", e.instance_path()))
            .collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
    }
}

#[test]
fn curve_files_drive_commands() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ellipse.json");
    std::fs::write(&file, r#"{"kind": "ellipse", "a": 2.0, "b": 1.0}"#).unwrap();
    let (from_file, code) = document(&["find-square", "--curve", file.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let (from_corpus, _) = document(&["find-square", "--corpus", "ellipse"]);
    assert_eq!(
        from_file.polygons[0].parameters,
        from_corpus.polygons[0].parameters
    );
}

#[test]
fn documented_curve_files_load() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/curve-file.md");
    let text = std::fs::read_to_string(path).unwrap();
    let blocks: Vec<&str> = text
        .split("```json")
        .skip(1)
        .map(|b| b.split("```").next().unwrap())
        .collect();
    assert!(blocks.len() >= 5);
    for b in blocks {
        let file = pegfinder_core::CurveFile::parse(b).unwrap_or_else(|e| panic!("{b}: {e}"));
        file.build().unwrap_or_else(|e| panic!("{b}: {e}"));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(
        pegfinder(&["find-square", "--corpus", "ellipse"])
            .status
            .code(),
        Some(EXIT_OK)
    );
    assert_eq!(pegfinder(&["--help"]).status.code(), Some(EXIT_OK));
    // Missing input, unknown names, bad flags and invalid shapes are usage errors.
    for args in [
        &["find-square"][..],
        &["find-square", "--corpus", "no-such-curve"],
        &["find-square", "--corpus", "ellipse", "--bogus"],
        &["find-rect", "--corpus", "circle"],
        &["find-square", "--corpus", "ellipse", "--a", "-1"],
        &[
            "find-ngon",
            "--n",
            "4",
            "--ratios",
            "1,1",
            "--corpus",
            "circle",
        ],
        &["octahedra", "--lambda-z", "0"],
        &["find-square", "--curve", "/nonexistent/curve.json"],
    ] {
        let out = pegfinder(args);
        assert_eq!(out.status.code(), Some(EXIT_USAGE), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    // Every chord of the circle bounds a square: counting cannot isolate them.
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("out.json");
    let out = pegfinder(&[
        "count-squares",
        "--corpus",
        "circle",
        "--bases",
        "8",
        "--parts",
        "12",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_NUMERICAL));
    let doc: ResultDocument =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(doc.status, Status::NumericalFailure);
    assert!(!doc.diagnostics.is_empty());
}

#[test]
fn json_to_stdout_replaces_the_summary() {
    let out = pegfinder(&[
        "find-rect",
        "--ratio",
        "2",
        "--corpus",
        "circle",
        "--json",
        "-",
    ]);
    let doc: ResultDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.tool, "pegfinder");
    let out = pegfinder(&["find-rect", "--ratio", "2", "--corpus", "circle"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("find-rect: ok"));
}

#[test]
fn timing_is_opt_in() {
    let (doc, _) = document(&["find-rect", "--ratio", "2", "--corpus", "circle"]);
    assert!(doc.wall_time_s.is_none());
    let (doc, _) = document(&[
        "find-rect",
        "--ratio",
        "2",
        "--corpus",
        "circle",
        "--timing",
    ]);
    assert!(doc.wall_time_s.is_some_and(|t| t >= 0.0));
}

fn svg_of(args: &[&str]) -> String {
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("{}.svg", args.join("_")));
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.extend(["--svg", &p]);
    let out = pegfinder(&full);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::read_to_string(path).unwrap()
}

fn count(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

#[test]
fn svg_figures() {
    let args = ["find-square", "--corpus", "ellipse"];
    let first = svg_of(&args);
    assert_eq!(first, svg_of(&args), "figures are deterministic");
    assert!(first.starts_with("<?xml"));
    assert!(first.contains(r#"version="1.1""#));
    assert!(first.trim_end().ends_with("</svg>"));
    // One marker per square vertex.
    assert_eq!(count(&first, r#"r="4" fill="crimson""#), 4);
    assert!(first.contains("diagonal_swap"));

    // Space curves get an xy and an xz view, so each rhombus vertex appears twice.
    let knot = svg_of(&["knot-rhombus"]);
    assert_eq!(count(&knot, r#"r="4" fill="crimson""#), 8);

    // Octahedra: twelve edges per view for the first component.
    let octa = svg_of(&["octahedra", "--lambda-z", "0.8"]);
    assert!(count(&octa, r#"stroke="crimson" stroke-width="2""#) >= 24);
}

#[test]
fn ngon_windings_sum_to_one() {
    let (doc, code) = document(&[
        "find-ngon",
        "--n",
        "5",
        "--ratios",
        "1,1,1,1",
        "--corpus",
        "fourier-random",
        "--seed",
        "7",
    ]);
    assert_eq!(code, EXIT_OK);
    let sum: i64 = doc.branches.iter().map(|b| b.winding.unwrap_or(0)).sum();
    assert_eq!(sum.abs(), 1);
    assert_eq!(doc.metrics["winding_sum"], sum as f64);
}

#[test]
fn thread_cap_is_respected() {
    let mut outputs = Vec::new();
    for cap in ["1", "2", "0", "many"] {
        let out = bin()
            .env(THREADS_VAR, cap)
            .args([
                "count-squares",
                "--corpus",
                "ellipse",
                "--bases",
                "8",
                "--parts",
                "12",
                "--json",
                "-",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(EXIT_OK), "{cap}");
        outputs.push(out.stdout);
    }
    assert!(
        outputs.windows(2).all(|w| w[0] == w[1]),
        "results do not depend on the worker count"
    );
}

#[test]
fn spiral_path_figure() {
    let svg = svg_of(&["special-path", "--corpus", "spiral"]);
    // Four vertex trails plus snapshot quadrilaterals over the spiral band.
    assert_eq!(count(&svg, r#"stroke-opacity="0.6""#), 4);
    assert!(count(&svg, r#"stroke="silver""#) >= 2);
}
