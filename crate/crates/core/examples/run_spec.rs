//! Drives a small scenario-suite experiment from a JSON run spec and lists
//! the files it wrote.

use fmcw_track::runspec::{run, RunSpec};
use std::path::Path;

const SPEC: &str = r#"{
  "experiment": "scenario-suite",
  "seed": 3,
  "suite": { "scenarios": ["1T_AB", "empty_room"] },
  "pipelines": [
    { "kind": "RA" },
    { "kind": "RD", "cfar": { "kind": "CA", "training_cells": 8, "guard_cells": 2 } }
  ]
}"#;

fn main() -> fmcw_track::Result<()> {
    let mut spec = RunSpec::from_json(SPEC, Path::new("inline"))?;
    spec.output_dir = std::env::temp_dir().join("fmcw-track-suite");
    let summary = run(&spec)?;
    println!("{} (config {})", summary.dir.display(), &summary.config_hash[..12]);
    for f in &summary.files {
        println!("  {f}");
    }
    print!("{}", std::fs::read_to_string(summary.dir.join("metrics.csv"))?);
    Ok(())
}
