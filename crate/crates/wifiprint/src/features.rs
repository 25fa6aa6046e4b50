//! The five per-frame network parameters and their attribution to
//! per-(device, frame type) sample sets.
//!
//! For each frame with a known sender, one value is computed according to
//! the selected [`ParameterKind`] and appended to the sample set of that
//! (sender, frame type) pair. Frames with an unknown sender (ACK, CTS)
//! contribute no samples but still act as the predecessor for the timing
//! parameters: the inter-arrival time of a data frame following an ACK is
//! measured from the end of that ACK.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{CanonicalTrace, DeviceId, FrameTypeKey};

/// The network parameters observable passively from radiotap/Prism
/// metadata, each with a fixed unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    /// Transmission rate of the frame, Mbps.
    Rate,
    /// On-air frame size, bytes.
    FrameSize,
    /// Idle gap between the previous frame's end and this frame's start, µs.
    MediumAccessTime,
    /// Time to transmit the frame (size·8/rate), µs.
    TransmissionTime,
    /// Gap between end of receptions of consecutive frames, µs.
    InterArrivalTime,
}

impl ParameterKind {
    pub const ALL: [ParameterKind; 5] = [
        ParameterKind::Rate,
        ParameterKind::FrameSize,
        ParameterKind::MediumAccessTime,
        ParameterKind::TransmissionTime,
        ParameterKind::InterArrivalTime,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParameterKind::Rate => "rate",
            ParameterKind::FrameSize => "frame_size",
            ParameterKind::MediumAccessTime => "medium_access_time",
            ParameterKind::TransmissionTime => "transmission_time",
            ParameterKind::InterArrivalTime => "inter_arrival_time",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            ParameterKind::Rate => "Mbps",
            ParameterKind::FrameSize => "bytes",
            _ => "us",
        }
    }
}

impl fmt::Display for ParameterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParameterKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParameterKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| FeatureError::UnknownParameter(s.to_string()))
    }
}

/// The multiset of parameter values observed for one (device, frame type).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub device: DeviceId,
    pub ftype: FrameTypeKey,
    pub kind: ParameterKind,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Frames with a sender that produced no sample, tallied by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipTally {
    /// First frame of the trace: no predecessor for timing parameters.
    pub no_predecessor: u64,
    /// Frame carried no rate and the parameter needs one.
    pub no_rate: u64,
}

impl SkipTally {
    pub fn total(&self) -> u64 {
        self.no_predecessor + self.no_rate
    }
}

/// Result of extracting one parameter kind over a whole trace.
///
/// Conservation holds per construction: every frame with a sender either
/// contributed exactly one value to `sets` or is tallied once in `skips`.
#[derive(Debug, Clone)]
pub struct SampleExtraction {
    pub kind: ParameterKind,
    pub sets: BTreeMap<(DeviceId, FrameTypeKey), SampleSet>,
    pub skips: SkipTally,
    pub frames_with_sender: u64,
}

impl SampleExtraction {
    pub fn total_samples(&self) -> u64 {
        self.sets.values().map(|s| s.values.len() as u64).sum()
    }

    /// Sample sets belonging to one device.
    pub fn sets_for(&self, device: DeviceId) -> Vec<&SampleSet> {
        self.sets
            .iter()
            .filter(|((d, _), _)| *d == device)
            .map(|(_, s)| s)
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown parameter kind: {0:?} (expected one of rate, frame_size, medium_access_time, transmission_time, inter_arrival_time)")]
    UnknownParameter(String),
    #[error("transmission duration requires rate > 0, got {0}")]
    NonPositiveRate(f64),
}

/// Time to transmit `size` bytes at `rate` Mbps, in microseconds.
///
/// Exact rational size·8/rate carried as a double; binning happens later.
pub fn transmission_duration(size: u32, rate: f64) -> Result<f64, FeatureError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(FeatureError::NonPositiveRate(rate));
    }
    Ok(size as f64 * 8.0 / rate)
}

/// Whole microseconds needed to transmit `size` bytes at `rate` Mbps,
/// rounded up.
///
/// The arithmetic runs on integers in half-Mbps units (802.11 rates are
/// multiples of 0.5 Mbps), so results are exact: no rounding error even
/// when size·8/rate is a whole number.
pub fn tx_duration_us(size: u32, rate_mbps: f64) -> u64 {
    let half_mbps = (rate_mbps * 2.0).round().max(1.0) as u64;
    let bits_x2 = size as u64 * 16;
    bits_x2.div_ceil(half_mbps)
}

/// Computes `kind` for every frame of `trace` and groups the values into
/// per-(sender, frame type) sample sets.
///
/// Rules per kind, for frame `i` with predecessor `i-1` (any sender):
/// - rate: the frame's rate (skip if absent);
/// - frame_size: the frame's size;
/// - transmission_time: size·8/rate µs (skip if rate absent);
/// - inter_arrival_time: t_end(i) − t_end(i−1) (skip the first frame);
/// - medium_access_time: start(i) − t_end(i−1) = inter_arrival − transmission
///   (skip first frame or missing rate; negative values clamp to 0).
pub fn extract_samples(trace: &CanonicalTrace, kind: ParameterKind) -> SampleExtraction {
    let mut sets: BTreeMap<(DeviceId, FrameTypeKey), SampleSet> = BTreeMap::new();
    let mut skips = SkipTally::default();
    let mut frames_with_sender = 0u64;

    let mut prev_end: Option<u64> = None;
    for frame in trace.frames() {
        let sample = match frame.sender {
            Some(sender) => {
                frames_with_sender += 1;
                match compute_value(kind, frame.size, frame.rate_mbps, frame.t_end_us, prev_end) {
                    Ok(value) => Some((sender, value)),
                    Err(skip) => {
                        match skip {
                            SkipReason::NoPredecessor => skips.no_predecessor += 1,
                            SkipReason::NoRate => skips.no_rate += 1,
                        }
                        None
                    }
                }
            }
            // Null-sender frames contribute nothing but remain predecessors.
            None => None,
        };
        if let Some((sender, value)) = sample {
            sets.entry((sender, frame.ftype))
                .or_insert_with(|| SampleSet {
                    device: sender,
                    ftype: frame.ftype,
                    kind,
                    values: Vec::new(),
                })
                .values
                .push(value);
        }
        prev_end = Some(frame.t_end_us);
    }

    SampleExtraction {
        kind,
        sets,
        skips,
        frames_with_sender,
    }
}

enum SkipReason {
    NoPredecessor,
    NoRate,
}

fn compute_value(
    kind: ParameterKind,
    size: u32,
    rate: Option<f64>,
    t_end: u64,
    prev_end: Option<u64>,
) -> Result<f64, SkipReason> {
    match kind {
        ParameterKind::Rate => rate.ok_or(SkipReason::NoRate),
        ParameterKind::FrameSize => Ok(size as f64),
        ParameterKind::TransmissionTime => {
            let r = rate.ok_or(SkipReason::NoRate)?;
            Ok(size as f64 * 8.0 / r)
        }
        ParameterKind::InterArrivalTime => {
            let prev = prev_end.ok_or(SkipReason::NoPredecessor)?;
            Ok((t_end - prev) as f64)
        }
        ParameterKind::MediumAccessTime => {
            let prev = prev_end.ok_or(SkipReason::NoPredecessor)?;
            let r = rate.ok_or(SkipReason::NoRate)?;
            let inter = (t_end - prev) as f64;
            let tt = size as f64 * 8.0 / r;
            // capture jitter or overlapping receptions clamp to zero
            Ok((inter - tt).max(0.0))
        }
    }
}
