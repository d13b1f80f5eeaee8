//! Line-delimited JSON control channel over TCP for paced runs.
//!
//! Server → client: `{"k":"telemetry","event":…}`, `{"k":"vehicle",…}`,
//! `{"k":"warn","msg":…}`, `{"k":"done"}`. Client → server:
//! `{"k":"trigger"}`. Every client receives every frame.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::Value;

use crate::engine::{paced_run, ConfigError, ControlChannel, ControlCommand, RunOutput, ScenarioConfig, Telemetry};

#[derive(Debug)]
pub enum ServeError {
    Config(ConfigError),
    Io(String),
}

/// One writer per client, shared by the broadcaster and that client's reader
/// so whole lines never interleave.
type Writer = Arc<Mutex<TcpStream>>;
type Clients = Arc<Mutex<Vec<Writer>>>;

fn send_line(writer: &Writer, line: &str) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(line.len() + 1);
    buf.extend_from_slice(line.as_bytes());
    buf.push(b'\n');
    writer.lock().expect("client writer").write_all(&buf)
}

/// Interprets one client line; returns a warning for anything unusable.
pub fn parse_client_line(line: &str) -> Result<ControlCommand, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("unreadable frame: {e}"))?;
    match v.get("k").and_then(Value::as_str) {
        Some("trigger") => Ok(ControlCommand::OperatorTrigger),
        Some(other) => Err(format!("unknown kind `{other}` ignored")),
        None => Err("frame without `k` ignored".to_owned()),
    }
}

fn client_reader(stream: TcpStream, writer: Writer, commands: Sender<ControlCommand>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        match parse_client_line(&line) {
            Ok(cmd) => {
                if commands.send(cmd).is_err() {
                    break;
                }
            }
            Err(msg) => {
                let _ = send_line(&writer, &Telemetry::Warn(msg).to_json_line());
            }
        }
    }
}

/// Runs `cfg` paced at `pace` while serving clients on `listener` until the
/// run completes. Client disconnects never stall the run.
pub fn serve_session(cfg: &ScenarioConfig, pace: f64, listener: TcpListener) -> Result<RunOutput, ServeError> {
    cfg.validate().map_err(ServeError::Config)?;
    listener
        .set_nonblocking(true)
        .map_err(|e| ServeError::Io(e.to_string()))?;
    let clients: Clients = Arc::new(Mutex::new(Vec::new()));
    let stop = Arc::new(AtomicBool::new(false));
    let (cmd_tx, cmd_rx) = mpsc::channel();
    let (tel_tx, tel_rx) = mpsc::channel::<Telemetry>();

    let acceptor = {
        let clients = Arc::clone(&clients);
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        log::info!("console connected from {peer}");
                        let _ = stream.set_nonblocking(false);
                        let _ = stream.set_nodelay(true);
                        let Ok(w) = stream.try_clone() else { continue };
                        let writer: Writer = Arc::new(Mutex::new(w));
                        clients.lock().expect("client list").push(Arc::clone(&writer));
                        let commands = cmd_tx.clone();
                        thread::spawn(move || client_reader(stream, writer, commands));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        thread::sleep(Duration::from_millis(10));
                    }
                }
            }
        })
    };

    let broadcaster = {
        let clients = Arc::clone(&clients);
        thread::spawn(move || {
            for frame in tel_rx {
                let line = frame.to_json_line();
                let mut list = clients.lock().expect("client list");
                list.retain_mut(|c| send_line(c, &line).is_ok());
            }
        })
    };

    let result = paced_run(
        cfg,
        pace,
        ControlChannel {
            commands: cmd_rx,
            telemetry: tel_tx,
        },
    );
    let _ = broadcaster.join();
    stop.store(true, Ordering::Relaxed);
    let _ = acceptor.join();
    for c in clients.lock().expect("client list").iter() {
        let _ = c.lock().expect("client writer").shutdown(std::net::Shutdown::Both);
    }
    result.map_err(ServeError::Config)
}
