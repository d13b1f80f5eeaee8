// Packet success probability against range for a follower at its start
// depth and at the duct axis.

use std::path::Path;

use auvnet::channel::NodePose;
use auvnet::engine::ScenarioConfig;

/// (range, success probability at 24 m, success probability on the axis)
pub type Row = (f64, f64, f64);

pub fn run_example() -> Result<Vec<Row>, Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::load(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/scenario_960m.json"
    )))?;
    let world = cfg.build()?;
    let axis = world.ssp.minimum().0;
    let leader = NodePose {
        x_m: 0.0,
        y_m: 0.0,
        depth_m: axis,
        heading_deg: 90.0,
    };
    let mut rows = Vec::new();
    for range in [250.0, 500.0, 1000.0, 1500.0, 2000.0] {
        let at = |depth_m| NodePose {
            x_m: range,
            y_m: 0.0,
            depth_m,
            heading_deg: 270.0,
        };
        let off_axis = world.channel.evaluate(&at(24.0), &leader)?.p_success;
        let on_axis = world.channel.evaluate(&at(axis), &leader)?.p_success;
        rows.push((range, off_axis, on_axis));
    }
    Ok(rows)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("range_m  p(24 m)  p(axis)");
    for (r, off, on) in run_example()? {
        println!("{r:>7}  {off:>7.3}  {on:>7.3}");
    }
    Ok(())
}
