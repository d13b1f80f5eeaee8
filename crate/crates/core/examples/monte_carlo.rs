// Small range sweep over independent seeds with boxplot output.

use std::path::Path;

use auvnet::engine::{boxplot_csv, range_sweep, ScenarioConfig, SweepPoint};

pub fn run_example() -> Result<Vec<SweepPoint>, Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::load(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/scenario_960m.json"
    )))?;
    Ok(range_sweep(&cfg, &[500.0, 1000.0, 1500.0], 20, 1)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let points = run_example()?;
    print!("{}", boxplot_csv(&points));
    for p in &points {
        println!(
            "range {} m: {} of {} runs incomplete",
            p.range_m, p.summary.incomplete, p.summary.runs
        );
    }
    Ok(())
}
