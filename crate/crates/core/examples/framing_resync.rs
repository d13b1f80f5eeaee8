// Recovers frames from a byte stream that has garbage between and inside
// frames.

use auvnet::msgcodec::{deframe, frame, Packet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct ResyncReport {
    pub sent: usize,
    pub recovered: usize,
    pub skipped_bytes: usize,
}

pub fn run_example() -> Result<ResyncReport, Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut stream = Vec::new();
    let mut sent = Vec::new();
    for id in 0..50u8 {
        let junk: Vec<u8> = (0..rng.random_range(0..6)).map(|_| rng.random()).collect();
        stream.extend(junk);
        let payload: Vec<u8> = (0..rng.random_range(0..40)).map(|_| rng.random()).collect();
        let p = Packet::publish(id % 4, payload);
        stream.extend(frame(&p)?);
        sent.push(p);
    }
    let out = deframe(&stream);
    let recovered = sent.iter().filter(|p| out.packets.contains(p)).count();
    Ok(ResyncReport {
        sent: sent.len(),
        recovered,
        skipped_bytes: out.skipped,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = run_example()?;
    println!(
        "recovered {}/{} frames, skipped {} junk bytes",
        r.recovered, r.sent, r.skipped_bytes
    );
    Ok(())
}
