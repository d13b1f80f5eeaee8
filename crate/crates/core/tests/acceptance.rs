//! Acceptance criteria 1 to 8. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use auvnet::channel::SoundSpeedProfile;
use auvnet::engine::{analyze_timeline, range_sweep, run, EventKind, ScenarioConfig};
use auvnet::msgcodec::{
    decode_payload, deframe, encode_value, encode_values, flatten, frame, Field, FieldValue, MessageSchema,
    MessageValue, Packet,
};
use auvnet::vehicle::{optimal_depth, CtdCast};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scenario() -> ScenarioConfig {
    ScenarioConfig::load(&fixture("scenario_960m.json")).expect("fixture scenario")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---- 1: codec conformance ----

fn random_schema(rng: &mut ChaCha8Rng, depth: u32) -> MessageSchema {
    let leaf = depth >= 3 || rng.random_bool(0.6);
    if leaf {
        return match rng.random_range(0..7) {
            0 => MessageSchema::UInt,
            1 => MessageSchema::Int,
            2 => MessageSchema::Bool,
            3 => MessageSchema::Float32,
            4 => MessageSchema::Float64,
            5 => MessageSchema::Text,
            _ => MessageSchema::Bytes,
        };
    }
    if rng.random_bool(0.5) {
        let n = rng.random_range(1..4);
        MessageSchema::Struct(
            (0..n)
                .map(|i| Field::new(format!("f{i}"), random_schema(rng, depth + 1)))
                .collect(),
        )
    } else {
        MessageSchema::Sequence(Box::new(random_schema(rng, depth + 1)))
    }
}

fn random_value(rng: &mut ChaCha8Rng, schema: &MessageSchema) -> MessageValue {
    match schema {
        MessageSchema::UInt => MessageValue::UInt(match rng.random_range(0..3) {
            0 => rng.random_range(0..24),
            1 => rng.random_range(0..70_000),
            _ => rng.random(),
        }),
        MessageSchema::Int => MessageValue::Int(match rng.random_range(0..3) {
            0 => rng.random_range(-30..30),
            1 => rng.random_range(-70_000..70_000),
            _ => rng.random(),
        }),
        MessageSchema::Bool => MessageValue::Bool(rng.random()),
        MessageSchema::Float32 => MessageValue::Float32(match rng.random_range(0..3) {
            0 => rng.random_range(-8..8) as f32 * 0.5,
            1 => f32::INFINITY,
            _ => rng.random_range(-1e6f32..1e6),
        }),
        MessageSchema::Float64 => MessageValue::Float64(match rng.random_range(0..3) {
            0 => rng.random_range(-8..8) as f64 * 0.25,
            1 => f64::NEG_INFINITY,
            _ => rng.random_range(-1e12..1e12),
        }),
        MessageSchema::Text => {
            let n = rng.random_range(0..12);
            MessageValue::Text((0..n).map(|_| rng.random_range('a'..='z')).collect())
        }
        MessageSchema::Bytes => {
            let n = rng.random_range(0..12);
            MessageValue::Bytes((0..n).map(|_| rng.random()).collect())
        }
        MessageSchema::Struct(fields) => {
            MessageValue::Struct(fields.iter().map(|f| random_value(rng, &f.schema)).collect())
        }
        MessageSchema::Sequence(el) => {
            let n = rng.random_range(0..4);
            MessageValue::Sequence((0..n).map(|_| random_value(rng, el)).collect())
        }
    }
}

fn criterion_1() -> Outcome {
    let fixtures: [(FieldValue, &[u8]); 5] = [
        (FieldValue::UInt(10), &[0x0A]),
        (FieldValue::Text("abc".into()), &[0x63, 0x61, 0x62, 0x63]),
        (FieldValue::int(-5), &[0x24]),
        (FieldValue::Float(1.5), &[0xF9, 0x3E, 0x00]),
        (FieldValue::Bool(true), &[0xF5]),
    ];
    let exact = fixtures.iter().filter(|(v, bytes)| encode_value(v) == *bytes).count();

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut ok, mut total) = (0, 0);
    while total < 10_000 {
        let schema = random_schema(&mut rng, 0);
        let msg = random_value(&mut rng, &schema);
        let payload = encode_values(&flatten(&msg, &schema).expect("generated value matches schema"));
        if payload.len() > 255 {
            continue;
        }
        total += 1;
        let wire = frame(&Packet::publish(rng.random_range(1..=255), payload)).expect("fits a frame");
        let out = deframe(&wire);
        if out.skipped == 0
            && out.packets.len() == 1
            && decode_payload(&out.packets[0], &schema).ok().as_ref() == Some(&msg)
        {
            ok += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        exact == 5 && ok == total && elapsed < 5.0,
        format!("fixtures {exact}/5 byte-exact, round trips {ok}/{total} lossless in {elapsed:.2} s (limit 5 s)"),
    )
}

// ---- 2: framing resilience ----

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut intact_total, mut recovered_total) = (0usize, 0usize);
    let panics = std::panic::catch_unwind(move || {
        for _ in 0..10_000 {
            // Frames with junk between them; track each frame's byte range.
            let mut stream = Vec::new();
            let mut frames: Vec<(Vec<u8>, usize, bool)> = Vec::new();
            for _ in 0..rng.random_range(1..8) {
                for _ in 0..rng.random_range(0..6) {
                    stream.push(rng.random());
                }
                let len = rng.random_range(0..48);
                let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
                let bytes = frame(&Packet::publish(rng.random_range(0..=255), payload)).unwrap();
                frames.push((bytes.clone(), stream.len(), true));
                stream.extend(bytes);
            }
            for _ in 0..rng.random_range(1..4) {
                if stream.is_empty() {
                    break;
                }
                match rng.random_range(0..3) {
                    0 => {
                        let at = rng.random_range(0..stream.len());
                        stream[at] ^= 1 << rng.random_range(0..8);
                        for f in frames.iter_mut() {
                            if at >= f.1 && at < f.1 + f.0.len() {
                                f.2 = false;
                            }
                        }
                    }
                    1 => {
                        let cut = rng.random_range(0..stream.len());
                        stream.truncate(cut);
                        for f in frames.iter_mut() {
                            if f.1 + f.0.len() > cut {
                                f.2 = false;
                            }
                        }
                    }
                    _ => {
                        let at = rng.random_range(0..=stream.len());
                        let n = rng.random_range(1..5);
                        let junk: Vec<u8> = (0..n).map(|_| rng.random()).collect();
                        stream.splice(at..at, junk);
                        for f in frames.iter_mut() {
                            if at > f.1 && at < f.1 + f.0.len() {
                                f.2 = false;
                            } else if at <= f.1 {
                                f.1 += n;
                            }
                        }
                    }
                }
            }
            let out = deframe(&stream);
            let mut remaining: Vec<Vec<u8>> = out.packets.iter().map(|p| frame(p).unwrap()).collect();
            for (bytes, _, intact) in &frames {
                if !intact {
                    continue;
                }
                intact_total += 1;
                if let Some(i) = remaining.iter().position(|r| r == bytes) {
                    remaining.swap_remove(i);
                    recovered_total += 1;
                }
            }
        }
        (intact_total, recovered_total)
    });
    match panics {
        Ok((intact, recovered)) => {
            let rate = recovered as f64 / intact as f64;
            outcome(
                rate >= 0.99,
                format!("10000 corrupted streams, no panic, recovered {recovered}/{intact} intact frames ({:.2}%, need >= 99%)", rate * 100.0),
            )
        }
        Err(_) => outcome(false, "deframer panicked".into()),
    }
}

// ---- 3: TDMA collision freedom ----

fn criterion_3() -> Outcome {
    let mut cfg = scenario();
    cfg.duration_s = 7200.0;
    cfg.mission.burst_count = 650;
    cfg.mission.buoy_timeout_s = 4000.0;
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let mut tx = out.transmissions.clone();
    tx.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut overlaps = 0;
    for (i, a) in tx.iter().enumerate() {
        for b in &tx[i + 1..] {
            if b.start >= a.end {
                break;
            }
            if a.node != b.node {
                overlaps += 1;
            }
        }
    }
    let nodes: std::collections::BTreeSet<u8> = tx.iter().map(|t| t.node).collect();
    let last = tx.last().map_or(0.0, |t| t.end);
    outcome(
        overlaps == 0 && nodes.len() == 3 && last >= 6000.0,
        format!(
            "{} transmissions from {} nodes over {:.0} s, last ends at {last:.0} s, {overlaps} cross-node overlaps",
            tx.len(),
            nodes.len(),
            out.metrics.end_time_s
        ),
    )
}

// ---- 4: optimal depth recovery ----

fn criterion_4() -> Outcome {
    let ssp = SoundSpeedProfile::load(&fixture("ssp_afternoon.csv")).expect("fixture SSP");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noiseless = optimal_depth(&CtdCast::descend(&ssp, 0.0, 40.0, 0.0, 0.5, &mut rng)).expect("cast");
    let within = (0..1000)
        .filter(|_| {
            let d = optimal_depth(&CtdCast::descend(&ssp, 0.0, 40.0, 0.05, 0.5, &mut rng)).expect("cast");
            (d - 13.74).abs() <= 2.0
        })
        .count();
    outcome(
        (noiseless - 13.74).abs() <= 0.5 && within >= 950,
        format!("noiseless {noiseless:.2} m (13.74 +/- 0.5), noisy {within}/1000 within +/- 2 m (need 950)"),
    )
}

// ---- 5: timeline and delay ----

fn criterion_5() -> Outcome {
    let out = match run(&scenario()) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let report = analyze_timeline(&out.events);
    let tx = |phase: &str| {
        out.events
            .iter()
            .filter(|e| e.ev == EventKind::PktTx && e.detail_str("phase") == Some(phase))
            .count()
    };
    let (base_tx, opt_tx) = (tx("baseline"), tx("optimized"));
    let delay = out.metrics.mean_delay_s.unwrap_or(f64::NAN);
    let span = report.phases.get("baseline").and_then(|p| p.span_s).unwrap_or(f64::NAN);
    let pass = out.metrics.completion
        && report.causal_order
        && (delay - 1.50).abs() <= 0.05
        && base_tx == 100
        && opt_tx == 100
        && (span - 510.0).abs() <= 10.0;
    outcome(
        pass,
        format!(
            "causal order {}, mean delay {delay:.3} s (1.50 +/- 0.05), pkt_tx {base_tx}/{opt_tx}, baseline span {span:.1} s (510 +/- 10)",
            if report.causal_order { "ok" } else { "broken" }
        ),
    )
}

// ---- 6: PER trend ----

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let points = match range_sweep(&scenario(), &[500.0, 1000.0, 1500.0, 2000.0], 100, 1) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let med = |i: usize, optimized: bool| {
        let d = if optimized {
            &points[i].summary.optimized
        } else {
            &points[i].summary.baseline
        };
        d.summary.map_or(f64::NAN, |s| s.median)
    };
    let reduction = |i: usize| {
        let b = med(i, false);
        if b > 0.0 {
            (b - med(i, true)) / b
        } else {
            f64::NAN
        }
    };
    let pass = elapsed < 60.0
        && med(0, false) < 0.02
        && (1..4).all(|i| med(i, true) < med(i, false))
        && reduction(1) >= 0.5
        && reduction(3) >= 0.5;
    let mut detail = format!("{elapsed:.1} s (limit 60 s);");
    for (i, p) in points.iter().enumerate() {
        detail.push_str(&format!(
            " {} m: base {:.3} (n={}) opt {:.3} (n={});",
            p.range_m,
            med(i, false),
            p.summary.baseline.samples.len(),
            med(i, true),
            p.summary.optimized.samples.len()
        ));
    }
    detail.push_str(&format!(
        " reduction 1000 m {:.0}%, 2000 m {:.0}%; optimized n counts only runs whose reposition command arrived",
        reduction(1) * 100.0,
        reduction(3) * 100.0
    ));
    outcome(pass, detail)
}

// ---- 7: determinism ----

fn events_digest(dir: &Path) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_auvnet"))
        .args(["run", "--seed", "42", "--scenario"])
        .arg(fixture("scenario_960m.json"))
        .arg("--out")
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let bytes = std::fs::read(dir.join("events.jsonl")).map_err(|e| e.to_string())?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let a = events_digest(&tmp.path().join("a"));
    let b = events_digest(&tmp.path().join("b"));
    match (a, b) {
        (Ok(a), Ok(b)) => outcome(a == b, format!("sha256 {a} vs {b}")),
        (a, b) => outcome(false, format!("run failed: {a:?} {b:?}")),
    }
}

// ---- 8: log analysis oracle ----

fn criterion_8() -> Outcome {
    let o = Command::new(env!("CARGO_BIN_EXE_auvnet"))
        .args(["analyze", "--format", "json", "--log"])
        .arg(fixture("trial4_log.jsonl"))
        .output()
        .expect("spawn auvnet");
    let v: serde_json::Value = match serde_json::from_slice(&o.stdout) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("unparseable analyze output: {e}")),
    };
    let base = v["phases"]["baseline"]["per"].as_f64();
    let opt = v["phases"]["optimized"]["per"].as_f64();
    outcome(
        o.status.success() && base == Some(0.91) && opt == Some(0.85),
        format!("baseline PER {base:?} (0.91), optimized PER {opt:?} (0.85)"),
    )
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let criteria: [Check; 8] = [
        ("codec conformance", criterion_1),
        ("framing resilience", criterion_2),
        ("TDMA collision freedom", criterion_3),
        ("optimal depth recovery", criterion_4),
        ("timeline and delay", criterion_5),
        ("PER trend", criterion_6),
        ("determinism", criterion_7),
        ("log analysis oracle", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
