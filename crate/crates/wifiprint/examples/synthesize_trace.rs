//! Generate a synthetic 802.11 trace from the preset profile library and
//! show what ended up on the air.
//!
//! ```bash
//! cargo run --example synthesize_trace
//! ```

use std::collections::BTreeMap;

use wifiprint::synthgen::{profile_library, ChannelModel, DeviceProfile};
use wifiprint::trace::DeviceId;

fn main() {
    let presets = profile_library();
    println!("preset library:");
    for p in &presets {
        println!("  {:<20} {}", p.name, p.summary);
    }

    // one device per preset, re-addressed sequentially
    let profiles: Vec<DeviceProfile> = presets
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.profile
                .clone()
                .with_id(DeviceId::new([0x02, 0, 0, 0, 0, i as u8 + 1]))
        })
        .collect();

    let channel = ChannelModel::default();
    let duration_us = 2_000_000;
    let trace = wifiprint::synthgen::generate(&profiles, &channel, duration_us, 42);

    println!(
        "\ngenerated {} frames over {} ms (seed 42, run again for the identical trace)",
        trace.len(),
        duration_us / 1000
    );

    let mut per_sender: BTreeMap<String, usize> = BTreeMap::new();
    for f in trace.frames() {
        let key = match f.sender {
            Some(id) => id.to_string(),
            None => "(ack/cts)".to_string(),
        };
        *per_sender.entry(key).or_default() += 1;
    }
    println!("\nframes per transmitter:");
    for (sender, n) in per_sender {
        println!("  {sender:<18} {n}");
    }
}
