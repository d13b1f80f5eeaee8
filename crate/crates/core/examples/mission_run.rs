// Runs the 960 m fixture scenario end to end and prints the outcome.

use std::path::Path;

use auvnet::engine::{analyze_timeline, run, RunOutput, ScenarioConfig};

pub fn run_example() -> Result<RunOutput, Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::load(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/scenario_960m.json"
    )))?;
    Ok(run(&cfg)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = run_example()?;
    let m = &out.metrics;
    println!("baseline:  {}/{} received", m.baseline.received, m.baseline.sent);
    println!("optimized: {}/{} received", m.optimized.received, m.optimized.sent);
    println!(
        "optimal depth: {:?} m, mean delay {:?} s",
        m.optimal_depth_m, m.mean_delay_s
    );
    print!("{}", analyze_timeline(&out.events).to_text());
    Ok(())
}
