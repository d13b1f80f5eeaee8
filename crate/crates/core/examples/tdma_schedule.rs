// Prints the slot calendar of the fixture scenario and the earliest start
// for a data packet requested at a few instants.

use std::path::Path;

use auvnet::engine::ScenarioConfig;
use auvnet::netstack::tdma_next_tx_start;

/// (node, ready time, transmit time)
pub type Row = (u8, f64, f64);

pub fn run_example() -> Result<Vec<Row>, Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::load(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/scenario_960m.json"
    )))?;
    let world = cfg.build()?;
    let airtime =
        (cfg.mission.packet_payload_bytes + cfg.modem.header_overhead_bytes) as f64 * 8.0 / cfg.modem.bitrate_bps;
    world.tdma.validate(airtime)?;
    let mut rows = Vec::new();
    for &addr in world.tdma.slot_of.keys() {
        for now in [0.0, 2.0, 4.9] {
            rows.push((addr, now, tdma_next_tx_start(now, addr, &world.tdma, airtime)?));
        }
    }
    Ok(rows)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (addr, now, start) in run_example()? {
        println!("node {addr}: ready at {now:>4.1} s -> transmit at {start:>5.2} s");
    }
    Ok(())
}
