//! Run the full evaluation methodology over a synthetic trace: split into
//! reference and detection windows, sweep thresholds, report TPR/FPR,
//! identification ratio and AUC.
//!
//! ```bash
//! cargo run --example evaluate_accuracy
//! ```

use wifiprint::evaluator::{evaluate, report_csv, EvaluationConfig};
use wifiprint::features::ParameterKind;
use wifiprint::signature::BinningScheme;
use wifiprint::synthgen::{profile_library, ChannelModel, DeviceProfile};
use wifiprint::trace::DeviceId;

fn main() {
    let profiles: Vec<DeviceProfile> = profile_library()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.profile
                .clone()
                .with_id(DeviceId::new([0x02, 0, 0, 0, 0, i as u8 + 1]))
        })
        .collect();
    let trace = wifiprint::synthgen::generate(&profiles, &ChannelModel::default(), 10_000_000, 99);
    println!("trace: {} frames, {} devices", trace.len(), profiles.len());

    let cfg = EvaluationConfig {
        ref_duration_us: 4_000_000,
        window_us: 2_000_000,
        min_obs: 50,
        sweep: (0..=20).map(|i| i as f64 / 20.0).collect(),
    };
    let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
    let report = evaluate(&trace, &cfg, &scheme).expect("evaluation");

    println!(
        "windows={} candidates={} known={}",
        report.windows, report.candidates, report.known_candidates
    );
    println!("\n{}", report_csv(&report));
    println!("AUC = {:.4}", report.auc);
    for target in [0.01, 0.1] {
        if let Some(p) = report.point_nearest_id_fpr(target) {
            println!(
                "operating point near id_fpr {target}: T={:.2} id_ratio={:.3} id_fpr={:.3}",
                p.threshold, p.id_ratio, p.id_fpr
            );
        }
    }
}
