//! Deterministic synthetic 802.11 trace generation.
//!
//! The generator runs an event-driven, single-channel simulation with a
//! simplified MAC: devices are scheduled FIFO on the channel and there are
//! no collisions or retransmissions by default (an optional collision mode
//! duplicates frames with the retry flag set). Its job is controllable,
//! distinguishable timing structure, not protocol fidelity: backoff
//! implementations, RTS/CTS thresholds, rate switching, periodic network
//! services, and power-save null frames are all per-device knobs.
//!
//! Randomness comes from a single ChaCha20 stream seeded from the scenario
//! seed, and events are processed in a fixed order, so identical inputs
//! produce bit-identical traces on every platform.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{CanonicalTrace, DeviceId, FrameRecord, FrameTypeKey};

/// On-air size of an RTS frame, bytes.
pub const RTS_SIZE: u32 = 20;
/// On-air size of a data-null (power save) frame, bytes.
pub const NULL_FRAME_SIZE: u32 = 28;

/// Inter-frame spacing and control-frame parameters of the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub sifs_us: u64,
    pub difs_us: u64,
    pub slot_us: u64,
    /// Size of ACK and CTS frames, bytes.
    pub ack_size: u32,
    /// Rate of control frames (RTS/CTS/ACK), Mbps.
    pub ack_rate_mbps: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            sifs_us: 10,
            difs_us: 28,
            slot_us: 9,
            ack_size: 14,
            ack_rate_mbps: 24.0,
        }
    }
}

/// How a device waits for the medium before transmitting.
///
/// The wait is DIFS plus a sampled backoff: slot k waits k whole slots.
/// `extra_pre_slot` models implementations that add one small extra slot
/// before the standard ones; when set, `slot_weights[0]` is the weight of
/// that half-slot wait and the remaining weights cover slots 0..cw_slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackoffModel {
    pub difs_us: u64,
    pub slot_us: u64,
    pub cw_slots: u32,
    #[serde(default)]
    pub extra_pre_slot: bool,
    pub slot_weights: Vec<f64>,
}

impl BackoffModel {
    /// Uniform draw over the standard contention window.
    pub fn uniform(difs_us: u64, slot_us: u64, cw_slots: u32) -> Self {
        BackoffModel {
            difs_us,
            slot_us,
            cw_slots,
            extra_pre_slot: false,
            slot_weights: vec![1.0 / cw_slots as f64; cw_slots as usize],
        }
    }

    /// Always waits exactly DIFS plus `slot` slots.
    pub fn fixed_slot(difs_us: u64, slot_us: u64, slot: u32) -> Self {
        let mut weights = vec![0.0; slot as usize + 1];
        weights[slot as usize] = 1.0;
        BackoffModel {
            difs_us,
            slot_us,
            cw_slots: slot + 1,
            extra_pre_slot: false,
            slot_weights: weights,
        }
    }

    fn option_count(&self) -> usize {
        self.cw_slots as usize + usize::from(self.extra_pre_slot)
    }

    /// Wait after the medium went idle for option index `i`.
    fn wait_us(&self, i: usize) -> u64 {
        if self.extra_pre_slot {
            if i == 0 {
                return self.difs_us + (self.slot_us / 2).max(1);
            }
            return self.difs_us + (i as u64 - 1) * self.slot_us;
        }
        self.difs_us + i as u64 * self.slot_us
    }
}

/// Rate selection for a device's own frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatePolicy {
    /// Every frame at one rate, Mbps.
    Fixed(f64),
    /// Weighted rate set with a per-frame probability of re-drawing.
    Switching {
        /// (rate Mbps, weight) pairs.
        rates: Vec<(f64, f64)>,
        switch_prob: f64,
    },
}

/// A periodic traffic source (OS service, discovery protocol, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub period_us: u64,
    #[serde(default)]
    pub jitter_us: u64,
    pub size: u32,
    #[serde(default)]
    pub broadcast: bool,
}

/// Frame sizes for the bulk data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeDistribution {
    Fixed(u32),
    /// (size, weight) pairs.
    Weighted(Vec<(u32, f64)>),
}

/// Full behavioral description of one simulated device.
///
/// When `data_size_distribution` is set the device is a saturated sender:
/// it always has the next data frame queued, so its timing is governed
/// entirely by medium access (like a host pushing a continuous UDP
/// stream). `rts_threshold` in [0, 2347] switches frames larger than the
/// threshold to the RTS/CTS reservation handshake.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub id: DeviceId,
    pub backoff: BackoffModel,
    pub rts_threshold: Option<u32>,
    pub rate_policy: RatePolicy,
    pub services: Vec<Service>,
    pub null_frame_period_us: Option<u64>,
    pub data_size_distribution: Option<SizeDistribution>,
}

impl DeviceProfile {
    pub fn with_id(mut self, id: DeviceId) -> Self {
        self.id = id;
        self
    }
}

/// Everything needed for one reproducible generation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub channel: ChannelModel,
    pub duration_us: u64,
    pub seed: u64,
    /// Probability of duplicating a data frame with the retry flag set.
    pub collision_prob: f64,
    pub devices: Vec<DeviceProfile>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{0}: unknown preset (see profile_library)")]
    UnknownPreset(String),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Scenario JSON
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct ScenarioDoc {
    #[serde(default)]
    channel: ChannelModel,
    duration_us: u64,
    seed: u64,
    #[serde(default)]
    collision_prob: f64,
    devices: Vec<ScenarioDeviceDoc>,
}

#[derive(Deserialize)]
struct ScenarioDeviceDoc {
    mac: DeviceId,
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    profile: Option<ProfileDoc>,
}

#[derive(Serialize, Deserialize)]
struct ProfileDoc {
    backoff: BackoffModel,
    #[serde(default)]
    rts_threshold: Option<u32>,
    rate_policy: RatePolicy,
    #[serde(default)]
    services: Vec<Service>,
    #[serde(default)]
    null_frame_period_us: Option<u64>,
    #[serde(default)]
    data_size_distribution: Option<SizeDistribution>,
}

impl ProfileDoc {
    fn into_profile(self, id: DeviceId) -> DeviceProfile {
        DeviceProfile {
            id,
            backoff: self.backoff,
            rts_threshold: self.rts_threshold,
            rate_policy: self.rate_policy,
            services: self.services,
            null_frame_period_us: self.null_frame_period_us,
            data_size_distribution: self.data_size_distribution,
        }
    }
}

impl Scenario {
    /// Parses and validates a scenario document; errors carry the JSON
    /// path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de)
            .map_err(|e| ScenarioError::Json(format!("{}: {}", e.path(), e.inner())))?;

        let mut devices = Vec::with_capacity(doc.devices.len());
        let library = profile_library();
        for (i, dev) in doc.devices.into_iter().enumerate() {
            let path = format!("devices[{i}]");
            let profile = match (dev.preset, dev.profile) {
                (Some(name), None) => {
                    let preset = library.iter().find(|p| p.name == name).ok_or_else(|| {
                        ScenarioError::UnknownPreset(format!("{path}.preset={name}"))
                    })?;
                    preset.profile.clone().with_id(dev.mac)
                }
                (None, Some(doc)) => doc.into_profile(dev.mac),
                (Some(_), Some(_)) => {
                    return Err(invalid(path, "give either `preset` or `profile`, not both"))
                }
                (None, None) => return Err(invalid(path, "needs a `preset` or a `profile`")),
            };
            devices.push(profile);
        }

        let scenario = Scenario {
            channel: doc.channel,
            duration_us: doc.duration_us,
            seed: doc.seed,
            collision_prob: doc.collision_prob,
            devices,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Semantic validation beyond JSON shape.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.duration_us == 0 {
            return Err(invalid("duration_us", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.collision_prob) {
            return Err(invalid("collision_prob", "must be in [0, 1]"));
        }
        if self.channel.sifs_us >= self.channel.difs_us {
            return Err(invalid("channel", "SIFS must be shorter than DIFS"));
        }
        let ack_rate = self.channel.ack_rate_mbps;
        if !(ack_rate.is_finite() && ack_rate > 0.0) || self.channel.ack_size == 0 {
            return Err(invalid(
                "channel",
                "control frames need a positive size and rate",
            ));
        }
        if self.devices.is_empty() {
            return Err(invalid("devices", "at least one device required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, dev) in self.devices.iter().enumerate() {
            let path = format!("devices[{i}]");
            if !seen.insert(dev.id) {
                return Err(invalid(format!("{path}.mac"), "duplicate device address"));
            }
            validate_profile(dev, &path)?;
        }
        Ok(())
    }

    /// Runs the simulation described by this scenario.
    pub fn generate(&self) -> CanonicalTrace {
        let engine = Engine::new(
            &self.devices,
            &self.channel,
            self.duration_us,
            self.seed,
            self.collision_prob,
        );
        engine.run()
    }
}

fn validate_profile(dev: &DeviceProfile, path: &str) -> Result<(), ScenarioError> {
    let b = &dev.backoff;
    if b.slot_us == 0 {
        return Err(invalid(
            format!("{path}.backoff.slot_us"),
            "must be positive",
        ));
    }
    if b.cw_slots == 0 {
        return Err(invalid(
            format!("{path}.backoff.cw_slots"),
            "must be positive",
        ));
    }
    if b.slot_weights.len() != b.option_count() {
        return Err(invalid(
            format!("{path}.backoff.slot_weights"),
            format!(
                "expected {} weights (cw_slots{}), got {}",
                b.option_count(),
                if b.extra_pre_slot {
                    " plus the pre-slot"
                } else {
                    ""
                },
                b.slot_weights.len()
            ),
        ));
    }
    if b.slot_weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(invalid(
            format!("{path}.backoff.slot_weights"),
            "weights must be finite and non-negative",
        ));
    }
    let sum: f64 = b.slot_weights.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(invalid(
            format!("{path}.backoff.slot_weights"),
            format!("weights must sum to 1 (got {sum})"),
        ));
    }
    if let Some(t) = dev.rts_threshold {
        if t > 2347 {
            return Err(invalid(
                format!("{path}.rts_threshold"),
                "must be between 0 and 2347 bytes",
            ));
        }
    }
    match &dev.rate_policy {
        RatePolicy::Fixed(r) => {
            if !(r.is_finite() && *r > 0.0) {
                return Err(invalid(
                    format!("{path}.rate_policy"),
                    "rate must be positive",
                ));
            }
        }
        RatePolicy::Switching { rates, switch_prob } => {
            if rates.is_empty() {
                return Err(invalid(
                    format!("{path}.rate_policy.rates"),
                    "must not be empty",
                ));
            }
            for (r, w) in rates {
                if !(r.is_finite() && *r > 0.0) || !(w.is_finite() && *w >= 0.0) {
                    return Err(invalid(
                        format!("{path}.rate_policy.rates"),
                        "rates must be positive, weights non-negative",
                    ));
                }
            }
            if rates.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
                return Err(invalid(
                    format!("{path}.rate_policy.rates"),
                    "weights sum to zero",
                ));
            }
            if !(0.0..=1.0).contains(switch_prob) {
                return Err(invalid(
                    format!("{path}.rate_policy.switch_prob"),
                    "must be in [0, 1]",
                ));
            }
        }
    }
    for (j, svc) in dev.services.iter().enumerate() {
        let spath = format!("{path}.services[{j}]");
        if svc.period_us == 0 {
            return Err(invalid(format!("{spath}.period_us"), "must be positive"));
        }
        if svc.size == 0 {
            return Err(invalid(format!("{spath}.size"), "must be positive"));
        }
    }
    if dev.null_frame_period_us == Some(0) {
        return Err(invalid(
            format!("{path}.null_frame_period_us"),
            "must be positive",
        ));
    }
    match &dev.data_size_distribution {
        Some(SizeDistribution::Fixed(0)) => {
            return Err(invalid(
                format!("{path}.data_size_distribution"),
                "size must be positive",
            ));
        }
        Some(SizeDistribution::Weighted(pairs)) => {
            if pairs.is_empty() || pairs.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
                return Err(invalid(
                    format!("{path}.data_size_distribution"),
                    "needs sizes with positive total weight",
                ));
            }
            if pairs
                .iter()
                .any(|(s, w)| *s == 0 || !w.is_finite() || *w < 0.0)
            {
                return Err(invalid(
                    format!("{path}.data_size_distribution"),
                    "sizes must be positive, weights non-negative",
                ));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Generates a trace with the default (collision-free) channel behavior.
///
/// Identical (profiles, channel, duration, seed) produce a bit-identical
/// trace.
pub fn generate(
    profiles: &[DeviceProfile],
    channel: &ChannelModel,
    duration_us: u64,
    seed: u64,
) -> CanonicalTrace {
    Engine::new(profiles, channel, duration_us, seed, 0.0).run()
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

use crate::features::tx_duration_us;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SourceKind {
    Service(usize),
    Null,
    Data,
}

/// Pending frames ordered by (arrival, enqueue sequence): FIFO service.
type PendingKey = (u64, u64, usize, SourceKind);

struct DevState {
    rate: f64,
    next_service_tick: Vec<u64>,
    next_null_tick: u64,
}

struct Engine<'a> {
    profiles: &'a [DeviceProfile],
    channel: &'a ChannelModel,
    duration_us: u64,
    collision_prob: f64,
    rng: ChaCha20Rng,
    heap: BinaryHeap<Reverse<PendingKey>>,
    seq: u64,
    free_at: u64,
    states: Vec<DevState>,
    frames: Vec<FrameRecord>,
}

impl<'a> Engine<'a> {
    fn new(
        profiles: &'a [DeviceProfile],
        channel: &'a ChannelModel,
        duration_us: u64,
        seed: u64,
        collision_prob: f64,
    ) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let states = profiles
            .iter()
            .map(|p| DevState {
                rate: initial_rate(&p.rate_policy, &mut rng),
                next_service_tick: vec![1; p.services.len()],
                next_null_tick: 1,
            })
            .collect();
        let mut engine = Engine {
            profiles,
            channel,
            duration_us,
            collision_prob,
            rng,
            heap: BinaryHeap::new(),
            seq: 0,
            free_at: 0,
            states,
            frames: Vec::new(),
        };
        for (dev, profile) in profiles.iter().enumerate() {
            for svc in 0..profile.services.len() {
                engine.schedule_service(dev, svc);
            }
            if profile.null_frame_period_us.is_some() {
                engine.schedule_null(dev);
            }
            if profile.data_size_distribution.is_some() {
                engine.push(0, dev, SourceKind::Data);
            }
        }
        engine
    }

    fn push(&mut self, arrival: u64, dev: usize, source: SourceKind) {
        self.seq += 1;
        self.heap.push(Reverse((arrival, self.seq, dev, source)));
    }

    fn schedule_service(&mut self, dev: usize, svc: usize) {
        let service = &self.profiles[dev].services[svc];
        if service.period_us == 0 {
            return;
        }
        let tick = self.states[dev].next_service_tick[svc];
        let nominal = tick.checked_mul(service.period_us);
        let Some(nominal) = nominal.filter(|&n| n <= self.duration_us) else {
            return;
        };
        self.states[dev].next_service_tick[svc] = tick + 1;
        let arrival = if service.jitter_us > 0 {
            let j = service.jitter_us as i64;
            nominal.saturating_add_signed(self.rng.gen_range(-j..=j))
        } else {
            nominal
        };
        self.push(arrival, dev, SourceKind::Service(svc));
    }

    fn schedule_null(&mut self, dev: usize) {
        let Some(period) = self.profiles[dev].null_frame_period_us.filter(|&p| p > 0) else {
            return;
        };
        let tick = self.states[dev].next_null_tick;
        let Some(nominal) = tick.checked_mul(period).filter(|&n| n <= self.duration_us) else {
            return;
        };
        self.states[dev].next_null_tick = tick + 1;
        self.push(nominal, dev, SourceKind::Null);
    }

    fn run(mut self) -> CanonicalTrace {
        while let Some(Reverse((arrival, _, dev, source))) = self.heap.pop() {
            // keep periodic sources one instance ahead
            match source {
                SourceKind::Service(svc) => self.schedule_service(dev, svc),
                SourceKind::Null => self.schedule_null(dev),
                SourceKind::Data => {}
            }

            let profile = &self.profiles[dev];
            let (size, ftype, broadcast) = match source {
                SourceKind::Service(svc) => {
                    let s = &profile.services[svc];
                    (s.size, FrameTypeKey::DATA, s.broadcast)
                }
                SourceKind::Null => (NULL_FRAME_SIZE, FrameTypeKey::NULL_DATA, false),
                SourceKind::Data => {
                    let dist = profile
                        .data_size_distribution
                        .as_ref()
                        .expect("data source scheduled only when configured");
                    (draw_size(dist, &mut self.rng), FrameTypeKey::DATA, false)
                }
            };

            let completed = self.transmit(dev, arrival, size, ftype, broadcast, false);
            if self.collision_prob > 0.0 && completed && self.rng.gen::<f64>() < self.collision_prob
            {
                // collision mode: the frame is sent again with retry set
                self.transmit(dev, self.free_at, size, ftype, broadcast, true);
            }
            if source == SourceKind::Data && completed {
                self.push(self.free_at, dev, SourceKind::Data);
            }
        }
        CanonicalTrace::new(0, self.frames).expect("generated frames are ordered and valid")
    }

    /// Transmits one frame (with its reservation/ack companions) and
    /// advances the channel. Returns false when the exchange no longer
    /// fits in the simulated duration; nothing is recorded then.
    fn transmit(
        &mut self,
        dev: usize,
        arrival: u64,
        size: u32,
        ftype: FrameTypeKey,
        broadcast: bool,
        retry: bool,
    ) -> bool {
        let profile = &self.profiles[dev];
        let rate = next_rate(&profile.rate_policy, &mut self.states[dev], &mut self.rng);
        let wait = self.draw_backoff(&profile.backoff);
        let contention = arrival.max(self.free_at);

        let use_rts = !broadcast && matches!(profile.rts_threshold, Some(t) if size > t);

        let ack_dur = tx_duration_us(self.channel.ack_size, self.channel.ack_rate_mbps);
        let data_dur = tx_duration_us(size, rate);
        let sifs = self.channel.sifs_us;
        let sender = profile.id;

        let mut pending: Vec<FrameRecord> = Vec::with_capacity(4);
        let end = if use_rts {
            let rts_end = contention + wait + tx_duration_us(RTS_SIZE, self.channel.ack_rate_mbps);
            let cts_end = rts_end + sifs + ack_dur;
            let data_end = cts_end + sifs + data_dur;
            let ack_end = data_end + sifs + ack_dur;
            if ack_end > self.duration_us {
                return false;
            }
            pending.push(self.control_frame(rts_end, RTS_SIZE, FrameTypeKey::RTS, Some(sender)));
            pending.push(self.control_frame(
                cts_end,
                self.channel.ack_size,
                FrameTypeKey::CTS,
                None,
            ));
            pending.push(FrameRecord {
                t_end_us: data_end,
                size,
                rate_mbps: Some(rate),
                ftype,
                sender: Some(sender),
                retry,
                fcs_ok: true,
            });
            pending.push(self.control_frame(
                ack_end,
                self.channel.ack_size,
                FrameTypeKey::ACK,
                None,
            ));
            ack_end
        } else {
            let data_end = contention + wait + data_dur;
            let last = if broadcast {
                data_end
            } else {
                data_end + sifs + ack_dur
            };
            if last > self.duration_us {
                return false;
            }
            pending.push(FrameRecord {
                t_end_us: data_end,
                size,
                rate_mbps: Some(rate),
                ftype,
                sender: Some(sender),
                retry,
                fcs_ok: true,
            });
            if !broadcast {
                pending.push(self.control_frame(
                    last,
                    self.channel.ack_size,
                    FrameTypeKey::ACK,
                    None,
                ));
            }
            last
        };
        self.frames.extend(pending);
        self.free_at = end;
        true
    }

    fn control_frame(
        &self,
        t_end_us: u64,
        size: u32,
        ftype: FrameTypeKey,
        sender: Option<DeviceId>,
    ) -> FrameRecord {
        FrameRecord {
            t_end_us,
            size,
            rate_mbps: Some(self.channel.ack_rate_mbps),
            ftype,
            sender,
            retry: false,
            fcs_ok: true,
        }
    }

    fn draw_backoff(&mut self, b: &BackoffModel) -> u64 {
        let total: f64 = b.slot_weights.iter().sum();
        if total <= 0.0 {
            return b.wait_us(0);
        }
        let mut u = self.rng.gen::<f64>() * total;
        for (i, &w) in b.slot_weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                return b.wait_us(i);
            }
        }
        b.wait_us(b.slot_weights.len() - 1)
    }
}

fn initial_rate(policy: &RatePolicy, rng: &mut ChaCha20Rng) -> f64 {
    match policy {
        RatePolicy::Fixed(r) => *r,
        RatePolicy::Switching { rates, .. } => draw_rate(rates, rng),
    }
}

fn next_rate(policy: &RatePolicy, state: &mut DevState, rng: &mut ChaCha20Rng) -> f64 {
    if let RatePolicy::Switching { rates, switch_prob } = policy {
        if rng.gen::<f64>() < *switch_prob {
            state.rate = draw_rate(rates, rng);
        }
    }
    state.rate
}

fn draw_rate(rates: &[(f64, f64)], rng: &mut ChaCha20Rng) -> f64 {
    let total: f64 = rates.iter().map(|(_, w)| w).sum();
    let mut u = rng.gen::<f64>() * total;
    for &(r, w) in rates {
        u -= w;
        if u < 0.0 {
            return r;
        }
    }
    rates.last().expect("validated non-empty").0
}

fn draw_size(dist: &SizeDistribution, rng: &mut ChaCha20Rng) -> u32 {
    match dist {
        SizeDistribution::Fixed(s) => *s,
        SizeDistribution::Weighted(pairs) => {
            let total: f64 = pairs.iter().map(|(_, w)| w).sum();
            let mut u = rng.gen::<f64>() * total;
            for &(s, w) in pairs {
                u -= w;
                if u < 0.0 {
                    return s;
                }
            }
            pairs.last().expect("validated non-empty").0
        }
    }
}

// ---------------------------------------------------------------------------
// Preset profiles
// ---------------------------------------------------------------------------

/// A named library profile.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub profile: DeviceProfile,
}

fn preset_mac(n: u8) -> DeviceId {
    DeviceId::new([0x02, 0x00, 0x00, 0x00, 0x00, n])
}

/// Preset profiles spanning the behavioral axes the generator models:
/// backoff variants, RTS on/off, rate switching, service-heavy hosts and
/// power-save cards.
pub fn profile_library() -> Vec<Preset> {
    let saturated_1188_54 = DeviceProfile {
        id: preset_mac(1),
        backoff: BackoffModel::uniform(28, 9, 16),
        rts_threshold: None,
        rate_policy: RatePolicy::Fixed(54.0),
        services: vec![],
        null_frame_period_us: None,
        // 1188·8/54 = 176 µs exactly, keeping timing arithmetic integral
        data_size_distribution: Some(SizeDistribution::Fixed(1188)),
    };

    let mut extra_slot_weights = vec![0.85 / 16.0; 17];
    extra_slot_weights[0] = 0.15;

    vec![
        Preset {
            name: "backoff-standard",
            summary: "saturated sender, uniform 16-slot backoff, no RTS",
            profile: saturated_1188_54.clone(),
        },
        Preset {
            name: "backoff-extra-slot",
            summary: "like backoff-standard but adds one small pre-slot before the 16 standard slots",
            profile: DeviceProfile {
                id: preset_mac(2),
                backoff: BackoffModel {
                    difs_us: 28,
                    slot_us: 9,
                    cw_slots: 16,
                    extra_pre_slot: true,
                    slot_weights: extra_slot_weights,
                },
                ..saturated_1188_54.clone()
            },
        },
        Preset {
            name: "rts-handshake",
            summary: "saturated sender of 2400-byte frames with RTS threshold 2000: every frame reserves the medium",
            profile: DeviceProfile {
                id: preset_mac(3),
                rts_threshold: Some(2000),
                rate_policy: RatePolicy::Fixed(24.0),
                // 2400·8/24 = 800 µs exactly
                data_size_distribution: Some(SizeDistribution::Fixed(2400)),
                ..saturated_1188_54.clone()
            },
        },
        Preset {
            name: "rts-disabled",
            summary: "same traffic as rts-handshake with virtual carrier sensing off",
            profile: DeviceProfile {
                id: preset_mac(4),
                rts_threshold: None,
                rate_policy: RatePolicy::Fixed(24.0),
                data_size_distribution: Some(SizeDistribution::Fixed(2400)),
                ..saturated_1188_54.clone()
            },
        },
        Preset {
            name: "rate-switcher",
            summary: "re-draws its transmission rate with probability 0.3 per frame",
            profile: DeviceProfile {
                id: preset_mac(5),
                rate_policy: RatePolicy::Switching {
                    rates: vec![(54.0, 0.4), (36.0, 0.2), (24.0, 0.2), (11.0, 0.1), (5.5, 0.1)],
                    switch_prob: 0.3,
                },
                data_size_distribution: Some(SizeDistribution::Fixed(1152)),
                ..saturated_1188_54.clone()
            },
        },
        Preset {
            name: "service-heavy",
            summary: "no bulk data; two periodic broadcast services at 950 us and 1200 us",
            profile: DeviceProfile {
                id: preset_mac(6),
                backoff: BackoffModel::fixed_slot(28, 9, 0),
                rts_threshold: None,
                rate_policy: RatePolicy::Fixed(24.0),
                services: vec![
                    Service {
                        period_us: 950,
                        jitter_us: 0,
                        size: 300,
                        broadcast: true,
                    },
                    Service {
                        period_us: 1200,
                        jitter_us: 0,
                        size: 420,
                        broadcast: true,
                    },
                ],
                null_frame_period_us: None,
                data_size_distribution: None,
            },
        },
        Preset {
            name: "null-beacon",
            summary: "power-save card emitting a data-null frame every 100 ms",
            profile: DeviceProfile {
                id: preset_mac(7),
                backoff: BackoffModel::uniform(28, 9, 16),
                rts_threshold: None,
                rate_policy: RatePolicy::Fixed(11.0),
                services: vec![],
                null_frame_period_us: Some(100_000),
                data_size_distribution: None,
            },
        },
    ]
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<DeviceProfile> {
    profile_library()
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_samples, ParameterKind};
    use crate::signature::BinningScheme;
    use crate::trace::to_canonical_string;

    fn mac(n: u8) -> DeviceId {
        DeviceId::new([2, 0, 0, 0, 0, n])
    }

    fn quiet_service_device(period_us: u64) -> DeviceProfile {
        DeviceProfile {
            id: mac(1),
            backoff: BackoffModel::fixed_slot(28, 9, 0),
            rts_threshold: None,
            rate_policy: RatePolicy::Fixed(24.0),
            services: vec![Service {
                period_us,
                jitter_us: 0,
                size: 300,
                broadcast: true,
            }],
            null_frame_period_us: None,
            data_size_distribution: None,
        }
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let presets = profile_library();
        let profiles: Vec<DeviceProfile> = presets.iter().map(|p| p.profile.clone()).collect();
        let channel = ChannelModel::default();
        let a = generate(&profiles, &channel, 2_000_000, 42);
        let b = generate(&profiles, &channel, 2_000_000, 42);
        assert_eq!(to_canonical_string(&a), to_canonical_string(&b));
        let c = generate(&profiles, &channel, 2_000_000, 43);
        assert_ne!(to_canonical_string(&a), to_canonical_string(&c));
    }

    #[test]
    fn periodic_service_puts_dominant_peak_in_its_period_bin() {
        let profiles = vec![quiet_service_device(950)];
        let trace = generate(&profiles, &ChannelModel::default(), 5_000_000, 7);
        assert!(trace.len() > 1000);
        let ex = extract_samples(&trace, ParameterKind::InterArrivalTime);
        let set = &ex.sets[&(mac(1), FrameTypeKey::DATA)];
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let hist = crate::signature::Histogram::from_values(&scheme, &set.values).unwrap();
        let peak = hist.mode_bin().unwrap();
        assert_eq!(peak, scheme.bin_index(950.0).unwrap());
        // with a deterministic backoff every gap is exactly the period
        let dominant = hist.counts()[peak] as f64 / hist.total() as f64;
        assert!(dominant > 0.99, "dominant share {dominant}");
    }

    #[test]
    fn rts_threshold_controls_handshake() {
        let below = DeviceProfile {
            rts_threshold: Some(2000),
            data_size_distribution: Some(SizeDistribution::Fixed(1500)),
            services: vec![],
            ..quiet_service_device(1000)
        };
        let trace = generate(&[below], &ChannelModel::default(), 500_000, 1);
        assert!(trace.frames().iter().all(|f| f.ftype != FrameTypeKey::RTS));
        assert!(trace.frames().iter().any(|f| f.ftype == FrameTypeKey::DATA));

        let above = DeviceProfile {
            rts_threshold: Some(2000),
            data_size_distribution: Some(SizeDistribution::Fixed(2400)),
            services: vec![],
            ..quiet_service_device(1000)
        };
        let trace = generate(&[above], &ChannelModel::default(), 500_000, 1);
        let frames = trace.frames();
        let channel = ChannelModel::default();
        // every data frame is preceded by RTS then CTS, and follows the
        // CTS by exactly SIFS plus its own transmission time
        let mut data_seen = 0;
        for (i, f) in frames.iter().enumerate() {
            if f.ftype != FrameTypeKey::DATA {
                continue;
            }
            data_seen += 1;
            let cts = &frames[i - 1];
            let rts = &frames[i - 2];
            assert_eq!(cts.ftype, FrameTypeKey::CTS);
            assert_eq!(cts.sender, None);
            assert_eq!(rts.ftype, FrameTypeKey::RTS);
            assert_eq!(rts.sender, f.sender);
            let tt = tx_duration_us(f.size, f.rate_mbps.unwrap());
            assert_eq!(f.t_end_us - cts.t_end_us, channel.sifs_us + tt);
        }
        assert!(data_seen > 50);
    }

    #[test]
    fn saturated_sender_measured_access_is_difs_plus_slots() {
        let profile = DeviceProfile {
            id: mac(1),
            backoff: BackoffModel::uniform(28, 9, 16),
            rts_threshold: None,
            rate_policy: RatePolicy::Fixed(54.0),
            services: vec![],
            null_frame_period_us: None,
            data_size_distribution: Some(SizeDistribution::Fixed(1188)),
        };
        let trace = generate(&[profile], &ChannelModel::default(), 1_000_000, 3);
        let ex = extract_samples(&trace, ParameterKind::MediumAccessTime);
        let set = &ex.sets[&(mac(1), FrameTypeKey::DATA)];
        assert!(set.len() > 100);
        for &m in &set.values {
            let m = m as u64;
            assert!(m >= 28, "access wait {m} below DIFS");
            assert_eq!((m - 28) % 9, 0, "access wait {m} is not DIFS + n slots");
            assert!((m - 28) / 9 < 16);
        }
    }

    #[test]
    fn no_two_frames_overlap_on_the_channel() {
        let presets = profile_library();
        let profiles: Vec<DeviceProfile> = presets.iter().map(|p| p.profile.clone()).collect();
        let trace = generate(&profiles, &ChannelModel::default(), 1_000_000, 5);
        let frames = trace.frames();
        for w in frames.windows(2) {
            let start = w[1].t_end_us - tx_duration_us(w[1].size, w[1].rate_mbps.unwrap());
            assert!(
                start >= w[0].t_end_us,
                "frame starting {start} overlaps previous ending {}",
                w[0].t_end_us
            );
        }
    }

    #[test]
    fn collision_mode_sets_retry_flags() {
        let scenario = Scenario {
            channel: ChannelModel::default(),
            duration_us: 1_000_000,
            seed: 11,
            collision_prob: 0.3,
            devices: vec![preset("backoff-standard").unwrap()],
        };
        let trace = scenario.generate();
        assert!(trace.frames().iter().any(|f| f.retry));
        // default mode never sets retry
        let clean = Scenario {
            collision_prob: 0.0,
            ..scenario
        }
        .generate();
        assert!(clean.frames().iter().all(|f| !f.retry));
    }

    #[test]
    fn presets_cover_the_behavior_axes() {
        let lib = profile_library();
        assert!(lib.len() >= 6);
        let by_name = |n: &str| preset(n).unwrap();
        assert!(by_name("backoff-extra-slot").backoff.extra_pre_slot);
        match by_name("rate-switcher").rate_policy {
            RatePolicy::Switching { switch_prob, .. } => assert_eq!(switch_prob, 0.3),
            _ => panic!("rate-switcher must switch rates"),
        }
        assert_eq!(by_name("null-beacon").null_frame_period_us, Some(100_000));
        assert_eq!(by_name("rts-handshake").rts_threshold, Some(2000));
        assert!(by_name("rts-disabled").rts_threshold.is_none());
        assert_eq!(by_name("service-heavy").services.len(), 2);
        // all preset ids are distinct
        let macs: std::collections::BTreeSet<_> = lib.iter().map(|p| p.profile.id).collect();
        assert_eq!(macs.len(), lib.len());
    }

    #[test]
    fn scenario_json_round_trip_and_validation() {
        let json = r#"{
            "duration_us": 100000,
            "seed": 9,
            "devices": [
                {"mac": "02:00:00:00:00:01", "preset": "backoff-standard"},
                {"mac": "02:00:00:00:00:02", "profile": {
                    "backoff": {"difs_us": 28, "slot_us": 9, "cw_slots": 2, "slot_weights": [0.5, 0.5]},
                    "rate_policy": {"fixed": 54.0},
                    "services": [{"period_us": 950, "size": 300, "broadcast": true}]
                }}
            ]
        }"#;
        let scenario = Scenario::from_json(json).unwrap();
        assert_eq!(scenario.devices.len(), 2);
        assert_eq!(scenario.channel, ChannelModel::default());
        let t1 = scenario.generate();
        let t2 = scenario.generate();
        assert_eq!(to_canonical_string(&t1), to_canonical_string(&t2));

        // invalid: weights do not sum to one, path names the field
        let bad = json.replace("[0.5, 0.5]", "[0.5, 0.2]");
        match Scenario::from_json(&bad) {
            Err(ScenarioError::Invalid { path, .. }) => {
                assert_eq!(path, "devices[1].backoff.slot_weights")
            }
            other => panic!("expected invalid-weights error, got {other:?}"),
        }
        // invalid: zero duration
        let bad = json.replace("\"duration_us\": 100000", "\"duration_us\": 0");
        assert!(Scenario::from_json(&bad).is_err());
        // invalid: unknown preset
        let bad = json.replace("backoff-standard", "no-such-preset");
        assert!(matches!(
            Scenario::from_json(&bad),
            Err(ScenarioError::UnknownPreset(_))
        ));
        // invalid: duplicate mac
        let bad = json.replace("02:00:00:00:00:02", "02:00:00:00:00:01");
        assert!(Scenario::from_json(&bad).is_err());
    }

    #[test]
    fn tx_duration_is_exact_for_divisible_sizes() {
        assert_eq!(tx_duration_us(1188, 54.0), 176);
        assert_eq!(tx_duration_us(2400, 24.0), 800);
        assert_eq!(tx_duration_us(1500, 54.0), 223); // ceil(222.22)
        assert_eq!(tx_duration_us(14, 24.0), 5); // ceil(4.67)
        assert_eq!(tx_duration_us(300, 5.5), 437); // ceil(436.36)
    }
}
