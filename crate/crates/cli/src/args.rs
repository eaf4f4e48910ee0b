//! Command-line definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "pegfinder",
    version,
    about = "Inscribed squares, rectangles, polygons and octahedra"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Curve, sphere or field description (JSON).
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "corpus")]
    pub curve: Option<PathBuf>,
    /// Named corpus entry (see `corpus-list`).
    #[arg(long, global = true, value_name = "NAME")]
    pub corpus: Option<String>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub b: Option<f64>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub degree: Option<u32>,
    #[arg(long, global = true)]
    pub amp: Option<f64>,
    #[arg(long, global = true)]
    pub turns: Option<f64>,
    #[arg(long, global = true)]
    pub tilt: Option<f64>,
    /// Seed for corpus entries and randomized searches.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Newton corrector tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the result document here (`-` for stdout).
    #[arg(long, global = true, value_name = "OUT.json")]
    pub json: Option<PathBuf>,
    /// Write a figure here.
    #[arg(long, global = true, value_name = "OUT.svg")]
    pub svg: Option<PathBuf>,
    /// Record the wall time in the result document.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Inscribed square via the rhombus family, cross-checked by multistart Newton.
    FindSquare,
    /// Inscribed rectangle of the given aspect ratio.
    FindRect {
        #[arg(long)]
        ratio: f64,
    },
    /// Branches of inscribed n-gons with prescribed edge ratios.
    FindNgon {
        #[arg(long)]
        n: usize,
        /// Ratios e_k / e_n for k = 1..n-1 (default: all 1).
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Count special quadrilaterals of a given size along the standard slice.
    CountSpecial {
        #[arg(long)]
        size: f64,
        #[arg(long, default_value_t = 128)]
        t_steps: usize,
        #[arg(long, default_value_t = 24)]
        parts: usize,
    },
    /// Count square orbits by multistart Newton.
    CountSquares {
        #[arg(long, default_value_t = 64)]
        bases: usize,
        #[arg(long, default_value_t = 32)]
        parts: usize,
    },
    /// Rectangle components through the squares, with isotropy and square counts.
    RectangleComponents {
        #[arg(long, default_value_t = 24)]
        bases: usize,
        #[arg(long, default_value_t = 24)]
        parts: usize,
    },
    /// Special quadrilaterals through size 1/2, traced over all sizes.
    SpecialPath,
    /// Equilateral triangle for a metric, or one that is equilateral for the
    /// input metric and isosceles for a second one.
    Triangle {
        #[arg(long, value_name = "FILE")]
        field2: Option<PathBuf>,
    },
    /// Planar rhombus inscribed in a space curve (default: trefoil).
    KnotRhombus,
    /// Equal-edge octahedra on an axis-scaled sphere.
    Octahedra {
        #[arg(long, default_value_t = 1.0)]
        lambda_x: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_y: f64,
        #[arg(long)]
        lambda_z: Option<f64>,
    },
    /// List the corpus inventory.
    CorpusList,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FindSquare => "find-square",
            Command::FindRect { .. } => "find-rect",
            Command::FindNgon { .. } => "find-ngon",
            Command::CountSpecial { .. } => "count-special",
            Command::CountSquares { .. } => "count-squares",
            Command::RectangleComponents { .. } => "rectangle-components",
            Command::SpecialPath => "special-path",
            Command::Triangle { .. } => "triangle",
            Command::KnotRhombus => "knot-rhombus",
            Command::Octahedra { .. } => "octahedra",
            Command::CorpusList => "corpus-list",
        }
    }
}
