//! Learn a reference database from the first half of a trace, then match
//! every device seen in the second half against it.
//!
//! ```bash
//! cargo run --example match_candidates
//! ```

use wifiprint::evaluator::{split_trace, window_candidates, EvaluationConfig, ReferenceDatabase};
use wifiprint::features::ParameterKind;
use wifiprint::matcher::{identify, Threshold};
use wifiprint::signature::BinningScheme;
use wifiprint::synthgen::{preset, ChannelModel, DeviceProfile};
use wifiprint::trace::DeviceId;

fn main() {
    let mac = |n: u8| DeviceId::new([0x02, 0, 0, 0, 0, n]);
    let profiles: Vec<DeviceProfile> = [
        ("backoff-standard", 1),
        ("rts-handshake", 2),
        ("rate-switcher", 3),
        ("service-heavy", 4),
    ]
    .into_iter()
    .map(|(name, n)| preset(name).expect("library preset").with_id(mac(n)))
    .collect();

    let trace = wifiprint::synthgen::generate(&profiles, &ChannelModel::default(), 8_000_000, 2024);

    let cfg = EvaluationConfig {
        ref_duration_us: 4_000_000,
        window_us: 2_000_000,
        min_obs: 50,
        sweep: vec![],
    };
    let (reference, windows) = split_trace(&trace, &cfg).expect("trace longer than reference");

    let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
    let db = ReferenceDatabase::build(&reference, &scheme, cfg.min_obs).expect("learning");
    println!(
        "reference database: {} devices (from the first 4 s)",
        db.len()
    );

    let threshold = Threshold::new(0.5).expect("in range");
    let candidates = window_candidates(&windows, &db, cfg.min_obs).expect("matching");
    for cand in &candidates {
        println!("\nwindow {} candidate {}:", cand.window, cand.device);
        for (reference, sim) in &cand.sims.entries {
            let marker = if *reference == cand.device {
                "  <- itself"
            } else {
                ""
            };
            println!("  vs {reference}: {sim:.4}{marker}");
        }
        match identify(&cand.sims, threshold) {
            Some(id) => println!("  identified as {id}"),
            None => println!("  unknown (best similarity below {})", threshold.value()),
        }
    }
}
