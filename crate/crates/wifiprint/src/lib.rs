//! Passive 802.11 device fingerprinting from monitor-mode captures.
//!
//! The pipeline turns wireless traces into per-device, per-frame-type
//! histogram signatures over five network parameters (transmission rate,
//! frame size, medium access time, transmission time, frame inter-arrival
//! time), matches candidate devices against a reference database with
//! weighted cosine similarity, and evaluates similarity/identification
//! accuracy across threshold sweeps.
//!
//! # Pipeline
//!
//! ```text
//! pcap (radiotap/Prism) --ingest--> CanonicalTrace --features--> SampleSets
//!      --signature--> DeviceSignature --matcher--> SimilarityVector
//!      --evaluator--> TPR/FPR/AUC + identification report
//! ```
//!
//! Synthetic traces with controllable device behaviors (backoff
//! implementations, RTS/CTS thresholds, rate switching, periodic network
//! services, power-save null frames) come from [`synthgen`], so the whole
//! pipeline can be exercised without hardware.
//!
//! See the `examples/` directory for one runnable program per capability:
//!
//! ```bash
//! cargo run --example synthesize_trace
//! cargo run --example build_signatures
//! cargo run --example match_candidates
//! cargo run --example evaluate_accuracy
//! cargo run --example convert_pcap
//! ```
//!
//! The same operations are reachable through the thin `wifiprint` binary
//! (`convert`, `learn`, `match`, `evaluate`, `synth`, `dump` subcommands).

pub mod cli;
pub mod evaluator;
pub mod features;
pub mod ingest;
pub mod matcher;
pub mod signature;
pub mod synthgen;
pub mod trace;

pub use evaluator::{EvaluationConfig, EvaluationReport, ReferenceDatabase};
pub use features::{ParameterKind, SampleSet};
pub use matcher::{SimilarityVector, Threshold};
pub use signature::{BinningScheme, DeviceSignature, Histogram};
pub use trace::{CanonicalTrace, DeviceId, FrameRecord, FrameTypeKey};
