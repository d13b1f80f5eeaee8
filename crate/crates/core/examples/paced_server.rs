// Serves a fast-paced run on a local port; a console client waits for the
// first baseline packet, sends the operator trigger and reads until done.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::thread;
use std::time::Duration;

use auvnet::cli::serve::serve_session;
use auvnet::engine::{RunOutput, ScenarioConfig};
use auvnet::mission::BuoyMode;

pub struct SessionReport {
    pub frames: Vec<String>,
    pub output: RunOutput,
}

pub fn run_example() -> Result<SessionReport, Box<dyn std::error::Error>> {
    let mut cfg = ScenarioConfig::load(Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/scenario_960m.json"
    )))?;
    cfg.mission.buoy_mode = BuoyMode::Manual;
    cfg.mission.burst_count = 10;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;

    let client = thread::spawn(move || -> std::io::Result<Vec<String>> {
        let mut stream = loop {
            match TcpStream::connect(addr) {
                Ok(s) => break s,
                Err(_) => thread::sleep(Duration::from_millis(5)),
            }
        };
        let mut writer = stream.try_clone()?;
        let mut frames = Vec::new();
        let mut triggered = false;
        for line in BufReader::new(&mut stream).lines() {
            let line = line?;
            if !triggered && line.contains("\"pkt_tx\"") {
                writer.write_all(b"{\"k\":\"trigger\"}\n")?;
                triggered = true;
            }
            let done = line.contains("\"k\":\"done\"");
            frames.push(line);
            if done {
                break;
            }
        }
        Ok(frames)
    });

    let output = serve_session(&cfg, 500.0, listener).map_err(|e| format!("{e:?}"))?;
    let frames = client.join().map_err(|_| "client thread panicked")??;
    Ok(SessionReport { frames, output })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = run_example()?;
    println!("client saw {} frames", r.frames.len());
    let m = &r.output.metrics;
    println!(
        "baseline {}/{}  optimized {}/{}",
        m.baseline.received, m.baseline.sent, m.optimized.received, m.optimized.sent
    );
    Ok(())
}
