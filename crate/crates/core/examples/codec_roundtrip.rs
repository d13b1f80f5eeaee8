// Encodes the three mission messages into wire frames and decodes them back.

use auvnet::mission::{message_defs, MissionMessage};

pub type Encoded = (MissionMessage, Vec<u8>);

pub fn run_example() -> Result<Vec<Encoded>, Box<dyn std::error::Error>> {
    let defs = message_defs(64);
    let messages = [
        MissionMessage::Trigger { run_id: 1 },
        MissionMessage::reposition(13.74),
        defs.data_message(0)?,
    ];
    let mut out = Vec::new();
    for msg in messages {
        let bytes = defs.encode(&msg)?;
        let (decoded, errors, skipped) = defs.decode(&bytes);
        if !errors.is_empty() || skipped != 0 || decoded != [msg.clone()] {
            return Err(format!("round trip failed for {msg:?}").into());
        }
        out.push((msg, bytes));
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (msg, bytes) in run_example()? {
        let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02X}")).collect();
        println!("{:<3} bytes {:?}\n    {}", bytes.len(), msg, hex.join(" "));
    }
    Ok(())
}
