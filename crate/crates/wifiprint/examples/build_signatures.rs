//! Extract inter-arrival samples from a synthetic trace and build a
//! device signature, printing the histogram structure that makes the
//! device recognizable.
//!
//! ```bash
//! cargo run --example build_signatures
//! ```

use wifiprint::features::{extract_samples, ParameterKind};
use wifiprint::signature::{build_signature, BinningScheme};
use wifiprint::synthgen::{BackoffModel, ChannelModel, DeviceProfile, RatePolicy, Service};
use wifiprint::trace::DeviceId;

fn main() {
    // a host whose only traffic is one periodic broadcast service, the
    // cleanest case: every gap between its frames equals the period
    let device = DeviceProfile {
        id: DeviceId::new([0x02, 0, 0, 0, 0, 0x42]),
        backoff: BackoffModel::fixed_slot(28, 9, 0),
        rts_threshold: None,
        rate_policy: RatePolicy::Fixed(24.0),
        services: vec![Service {
            period_us: 950,
            jitter_us: 0,
            size: 300,
            broadcast: true,
        }],
        null_frame_period_us: None,
        data_size_distribution: None,
    };
    let trace = wifiprint::synthgen::generate(
        std::slice::from_ref(&device),
        &ChannelModel::default(),
        5_000_000,
        7,
    );
    println!("trace: {} frames from {}", trace.len(), device.id);

    let kind = ParameterKind::InterArrivalTime;
    let extraction = extract_samples(&trace, kind);
    println!(
        "extracted {} {} samples ({} skipped: first frame has no predecessor)",
        extraction.total_samples(),
        kind,
        extraction.skips.total(),
    );

    let scheme = BinningScheme::default_for(kind);
    let sets = extraction.sets_for(device.id);
    let signature = build_signature(&sets, &scheme, 50)
        .expect("sets share one device and kind")
        .expect("enough observations");

    println!(
        "signature built from {} observations; frame types and weights:",
        signature.built_from
    );
    for (ftype, entry) in &signature.entries {
        println!(
            "  {ftype}: weight {:.3}, {} samples",
            entry.weight, entry.count
        );
    }

    // show the populated neighborhood of the histogram
    let data_entry = signature
        .entries
        .values()
        .next()
        .expect("at least one frame type");
    let freqs = data_entry.hist.frequencies();
    let edges = scheme.edges();
    println!(
        "\npopulated bins ({}, {} µs wide):",
        kind,
        edges[1] - edges[0]
    );
    for (j, f) in freqs.iter().enumerate() {
        if *f > 0.005 {
            let label = if j + 1 < edges.len() {
                format!("[{:>6}, {:>6})", edges[j], edges[j + 1])
            } else {
                format!("[{:>6},   inf)", edges[j])
            };
            println!(
                "  bin {j:>4} {label} {:5.1}% {}",
                f * 100.0,
                "#".repeat((f * 60.0) as usize)
            );
        }
    }
    let peak = data_entry.hist.mode_bin().expect("non-empty");
    println!("\ndominant peak in bin {peak}, the bin containing the 950 us service period");
}
