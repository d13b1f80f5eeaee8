// Reconstructs a recorded trial from its event log.

use auvnet::engine::{analyze_log_text, TimelineReport};

pub fn run_example() -> Result<TimelineReport, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/trial4_log.jsonl"))?;
    Ok(analyze_log_text(&text))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    print!("{}", run_example()?.to_text());
    Ok(())
}
