//! Command-line front end: argument parsing, result documents, JSON and SVG
//! output.

pub mod args;
pub mod document;
pub mod json;
pub mod run;
pub mod svg;

use std::io::Write;
use std::path::Path;

pub use document::{ResultDocument, Status};
pub use run::{run_args, Outcome, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "PEGFINDER_THREADS";

/// Size the global worker pool from `PEGFINDER_THREADS` (never above the
/// number of available cores).
pub fn init_threads() {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .map_or(available, |n| n.min(available));
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build_global();
}

fn write_to(path: &Path, text: &str) -> std::io::Result<()> {
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes())
    } else {
        std::fs::write(path, text)
    }
}

/// Run a command line and write the requested files; returns the exit code.
pub fn main_with(argv: Vec<String>) -> i32 {
    let outcome = run_args(argv.clone());
    let parsed = <args::Cli as clap::Parser>::try_parse_from(&argv).ok();
    let Some(doc) = &outcome.document else {
        if outcome.code == EXIT_OK {
            print!("{}", outcome.text);
        } else {
            eprint!("{}", outcome.text);
            if !outcome.text.ends_with('\n') {
                eprintln!();
            }
        }
        return outcome.code;
    };
    let common = parsed.as_ref().map(|c| &c.common);
    let json_target = common.and_then(|c| c.json.clone());
    if json_target.as_deref() != Some(Path::new("-")) {
        print!("{}", outcome.text);
    }
    if let Some(path) = json_target {
        let text = match json::to_string(doc) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot serialize result: {e}");
                return EXIT_NUMERICAL;
            }
        };
        if let Err(e) = write_to(&path, &text) {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    if let Some(path) = common.and_then(|c| c.svg.clone()) {
        if doc.input.is_some() {
            if let Err(e) = write_to(&path, &svg::render_svg(doc)) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
    }
    outcome.code
}
