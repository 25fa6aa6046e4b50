//! Device signatures: per-frame-type normalized histograms plus
//! frame-type weights.
//!
//! A signature is the set of (weight, histogram) pairs over the frame
//! types a device emitted. Histograms are percentage-frequency
//! distributions over a [`BinningScheme`]; the weight of a frame type is
//! its share of the device's total observations, so the frame-type mix is
//! itself part of the fingerprint.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::features::{ParameterKind, SampleSet};
use crate::trace::{DeviceId, FrameTypeKey};

/// Bin boundaries for one parameter kind.
///
/// `edges` (strictly increasing) define `edges.len() - 1` half-open
/// regular bins `[e_j, e_{j+1})` plus one overflow bin for values at or
/// beyond the last edge; values below the first edge land in bin 0. The
/// `scheme_id` is a stable hash of (kind, edges): histograms built under
/// different schemes are never comparable, and the id travels with every
/// persisted signature so mismatches are rejected instead of silently
/// wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningScheme {
    kind: ParameterKind,
    edges: Vec<f64>,
    scheme_id: u64,
}

impl BinningScheme {
    pub fn new(kind: ParameterKind, edges: Vec<f64>) -> Result<Self, SignatureError> {
        if edges.len() < 2 {
            return Err(SignatureError::TooFewEdges(edges.len()));
        }
        for w in edges.windows(2) {
            if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
                return Err(SignatureError::EdgesNotIncreasing(w[0], w[1]));
            }
        }
        let scheme_id = hash_scheme(kind, &edges);
        Ok(BinningScheme {
            kind,
            edges,
            scheme_id,
        })
    }

    /// The default scheme for a parameter kind.
    ///
    /// - rate: one categorical bin per 802.11 rate
    ///   {1, 2, 5.5, 6, 9, 11, 12, 18, 24, 36, 48, 54} Mbps, plus overflow;
    /// - frame_size: 16-byte bins over [0, 2352), plus overflow;
    /// - inter_arrival_time / medium_access_time: 10 µs bins over
    ///   [0, 10 000 µs), plus overflow;
    /// - transmission_time: 20 µs bins over [0, 20 000 µs), plus overflow.
    pub fn default_for(kind: ParameterKind) -> BinningScheme {
        let edges = match kind {
            ParameterKind::Rate => {
                // midpoints between consecutive nominal rates
                const RATES: [f64; 12] = [
                    1.0, 2.0, 5.5, 6.0, 9.0, 11.0, 12.0, 18.0, 24.0, 36.0, 48.0, 54.0,
                ];
                let mut edges = Vec::with_capacity(RATES.len() + 1);
                edges.push(0.5);
                for w in RATES.windows(2) {
                    edges.push((w[0] + w[1]) / 2.0);
                }
                edges.push(57.0);
                edges
            }
            ParameterKind::FrameSize => uniform_edges(0.0, 2352.0, 16.0),
            ParameterKind::InterArrivalTime | ParameterKind::MediumAccessTime => {
                uniform_edges(0.0, 10_000.0, 10.0)
            }
            ParameterKind::TransmissionTime => uniform_edges(0.0, 20_000.0, 20.0),
        };
        BinningScheme::new(kind, edges).expect("default edges are valid")
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn scheme_id(&self) -> u64 {
        self.scheme_id
    }

    /// Number of bins, including the overflow bin.
    pub fn bin_count(&self) -> usize {
        self.edges.len()
    }

    /// Maps a value to its bin index in `[0, bin_count)`.
    pub fn bin_index(&self, value: f64) -> Result<usize, SignatureError> {
        if value.is_nan() {
            return Err(SignatureError::NanValue);
        }
        if value < self.edges[0] {
            return Ok(0);
        }
        let last = *self.edges.last().expect("at least two edges");
        if value >= last {
            return Ok(self.edges.len() - 1);
        }
        // index of the last edge <= value
        Ok(self.edges.partition_point(|&e| e <= value) - 1)
    }
}

fn uniform_edges(start: f64, end: f64, width: f64) -> Vec<f64> {
    let n = ((end - start) / width).round() as usize;
    (0..=n).map(|i| start + width * i as f64).collect()
}

// FNV-1a over the kind name and the little-endian bit patterns of the
// edges; stable across platforms and runs.
fn hash_scheme(kind: ParameterKind, edges: &[f64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(kind.name().as_bytes());
    for e in edges {
        eat(&e.to_bits().to_le_bytes());
    }
    h
}

/// Per-bin observation counts for one (device, frame type) sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    scheme_id: u64,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    /// Bins a slice of values under a scheme.
    pub fn from_values(scheme: &BinningScheme, values: &[f64]) -> Result<Self, SignatureError> {
        let mut counts = vec![0u64; scheme.bin_count()];
        for &v in values {
            counts[scheme.bin_index(v)?] += 1;
        }
        Ok(Histogram {
            scheme_id: scheme.scheme_id(),
            counts,
            total: values.len() as u64,
        })
    }

    /// Rebuilds a histogram from persisted counts.
    pub fn from_counts(scheme_id: u64, counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Histogram {
            scheme_id,
            counts,
            total,
        }
    }

    pub fn scheme_id(&self) -> u64 {
        self.scheme_id
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// The percentage-frequency distribution: counts normalized by total.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let t = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// Adds another histogram's counts into this one (same scheme only).
    pub fn merge(&mut self, other: &Histogram) -> Result<(), SignatureError> {
        if self.scheme_id != other.scheme_id || self.counts.len() != other.counts.len() {
            return Err(SignatureError::SchemeMismatch {
                left: self.scheme_id,
                right: other.scheme_id,
            });
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
        Ok(())
    }

    /// Bin index holding the most observations (first on ties).
    pub fn mode_bin(&self) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        let (idx, _) = self
            .counts
            .iter()
            .enumerate()
            .max_by_key(|&(i, c)| (c, std::cmp::Reverse(i)))?;
        Some(idx)
    }
}

/// One frame type's contribution to a device signature.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureEntry {
    /// Share of the device's observations carried by this frame type.
    pub weight: f64,
    pub hist: Histogram,
    pub count: u64,
}

/// A device's fingerprint for one parameter kind: per frame type, a
/// weight and a normalized histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSignature {
    pub device: DeviceId,
    pub kind: ParameterKind,
    pub entries: BTreeMap<FrameTypeKey, SignatureEntry>,
    /// Total number of samples the signature was built from.
    pub built_from: u64,
}

impl DeviceSignature {
    pub fn entry(&self, ftype: FrameTypeKey) -> Option<&SignatureEntry> {
        self.entries.get(&ftype)
    }

    pub fn frame_types(&self) -> impl Iterator<Item = FrameTypeKey> + '_ {
        self.entries.keys().copied()
    }
}

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("a binning scheme needs at least 2 edges, got {0}")]
    TooFewEdges(usize),
    #[error("bin edges must be finite and strictly increasing ({0} then {1})")]
    EdgesNotIncreasing(f64, f64),
    #[error("cannot bin NaN")]
    NanValue,
    #[error("histograms built under different schemes ({left:#x} vs {right:#x})")]
    SchemeMismatch { left: u64, right: u64 },
    #[error("sample sets mix devices ({0} and {1})")]
    MixedDevices(DeviceId, DeviceId),
    #[error("sample sets mix parameter kinds ({0} and {1})")]
    MixedKinds(ParameterKind, ParameterKind),
    #[error("scheme is for {scheme} but samples are {samples}")]
    KindMismatch {
        scheme: ParameterKind,
        samples: ParameterKind,
    },
}

/// Builds a device signature from that device's sample sets.
///
/// Returns `None` when the device's total observation count is below
/// `min_obs`: too little traffic to fingerprint. Frame types with at
/// least one sample each get a histogram; their weights are
/// `count_ftype / total` and sum to 1.
pub fn build_signature(
    sets: &[&SampleSet],
    scheme: &BinningScheme,
    min_obs: u64,
) -> Result<Option<DeviceSignature>, SignatureError> {
    let Some(first) = sets.first() else {
        return Ok(None);
    };
    let device = first.device;
    let kind = first.kind;
    for s in sets {
        if s.device != device {
            return Err(SignatureError::MixedDevices(device, s.device));
        }
        if s.kind != kind {
            return Err(SignatureError::MixedKinds(kind, s.kind));
        }
    }
    if scheme.kind() != kind {
        return Err(SignatureError::KindMismatch {
            scheme: scheme.kind(),
            samples: kind,
        });
    }

    let total: u64 = sets.iter().map(|s| s.values.len() as u64).sum();
    if total < min_obs {
        return Ok(None);
    }

    let mut entries = BTreeMap::new();
    for s in sets {
        if s.values.is_empty() {
            continue;
        }
        let hist = Histogram::from_values(scheme, &s.values)?;
        let count = hist.total();
        match entries.entry(s.ftype) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(SignatureEntry {
                    weight: 0.0,
                    hist,
                    count,
                });
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let entry = e.get_mut();
                entry.hist.merge(&hist)?;
                entry.count += count;
            }
        }
    }
    for entry in entries.values_mut() {
        entry.weight = entry.count as f64 / total as f64;
    }

    Ok(Some(DeviceSignature {
        device,
        kind,
        entries,
        built_from: total,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mac(last: u8) -> DeviceId {
        DeviceId::new([2, 0, 0, 0, 0, last])
    }

    fn set(ftype: FrameTypeKey, values: Vec<f64>) -> SampleSet {
        SampleSet {
            device: mac(1),
            ftype,
            kind: ParameterKind::InterArrivalTime,
            values,
        }
    }

    fn scheme_010_20() -> BinningScheme {
        BinningScheme::new(ParameterKind::InterArrivalTime, vec![0.0, 10.0, 20.0]).unwrap()
    }

    #[test]
    fn bin_index_boundaries() {
        let s = scheme_010_20();
        assert_eq!(s.bin_count(), 3);
        assert_eq!(s.bin_index(10.0).unwrap(), 1); // half-open boundary
        assert_eq!(s.bin_index(-3.0).unwrap(), 0); // underflow
        assert_eq!(s.bin_index(10_000.0).unwrap(), 2); // overflow
        assert_eq!(s.bin_index(0.0).unwrap(), 0);
        assert_eq!(s.bin_index(19.999).unwrap(), 1);
        assert_eq!(s.bin_index(20.0).unwrap(), 2);
        assert!(s.bin_index(f64::NAN).is_err());
    }

    #[test]
    fn scheme_validation() {
        assert!(BinningScheme::new(ParameterKind::Rate, vec![1.0]).is_err());
        assert!(BinningScheme::new(ParameterKind::Rate, vec![1.0, 1.0]).is_err());
        assert!(BinningScheme::new(ParameterKind::Rate, vec![2.0, 1.0]).is_err());
        assert!(BinningScheme::new(ParameterKind::Rate, vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn scheme_id_is_deterministic_and_discriminating() {
        let a = scheme_010_20();
        let b = scheme_010_20();
        assert_eq!(a.scheme_id(), b.scheme_id());
        let c = BinningScheme::new(ParameterKind::InterArrivalTime, vec![0.0, 10.0, 21.0]).unwrap();
        assert_ne!(a.scheme_id(), c.scheme_id());
        let d = BinningScheme::new(ParameterKind::MediumAccessTime, vec![0.0, 10.0, 20.0]).unwrap();
        assert_ne!(a.scheme_id(), d.scheme_id());
    }

    #[test]
    fn default_scheme_shapes() {
        let fs = BinningScheme::default_for(ParameterKind::FrameSize);
        // 147 regular bins of width 16 over [0, 2352) plus overflow
        assert_eq!(fs.bin_count(), 148);
        let ia = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        assert_eq!(ia.bin_count(), 1001);
        let tt = BinningScheme::default_for(ParameterKind::TransmissionTime);
        assert_eq!(tt.bin_count(), 1001);
        // each nominal rate lands in its own bin
        let rate = BinningScheme::default_for(ParameterKind::Rate);
        let rates = [
            1.0, 2.0, 5.5, 6.0, 9.0, 11.0, 12.0, 18.0, 24.0, 36.0, 48.0, 54.0,
        ];
        let bins: Vec<usize> = rates.iter().map(|&r| rate.bin_index(r).unwrap()).collect();
        let mut uniq = bins.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), rates.len());
        assert_eq!(rate.bin_index(5.5).unwrap(), 2);
        // widely separated service periods resolve to far-apart bins
        assert!(ia.bin_index(1200.0).unwrap() - ia.bin_index(950.0).unwrap() >= 20);
    }

    #[test]
    fn histogram_invariants() {
        let s = scheme_010_20();
        let h = Histogram::from_values(&s, &[1.0, 5.0, 15.0, 100.0]).unwrap();
        assert_eq!(h.counts(), &[2, 1, 1]);
        assert_eq!(h.total(), 4);
        let freqs = h.frequencies();
        assert!((freqs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(freqs.iter().all(|&f| (0.0..=1.0).contains(&f)));
    }

    #[test]
    fn min_obs_gate() {
        let s = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let values49: Vec<f64> = (0..49).map(|i| i as f64).collect();
        let values50: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let s49 = set(FrameTypeKey::DATA, values49);
        let s50 = set(FrameTypeKey::DATA, values50);
        assert!(build_signature(&[&s49], &s, 50).unwrap().is_none());
        assert!(build_signature(&[&s50], &s, 50).unwrap().is_some());
    }

    #[test]
    fn weights_follow_frame_type_mix() {
        let s = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let data = set(FrameTypeKey::DATA, (0..80).map(|i| i as f64).collect());
        let rts = set(FrameTypeKey::RTS, (0..20).map(|i| i as f64).collect());
        let sig = build_signature(&[&data, &rts], &s, 50).unwrap().unwrap();
        assert_eq!(sig.built_from, 100);
        let w_data = sig.entry(FrameTypeKey::DATA).unwrap().weight;
        let w_rts = sig.entry(FrameTypeKey::RTS).unwrap().weight;
        assert!((w_data - 0.8).abs() < 1e-12);
        assert!((w_rts - 0.2).abs() < 1e-12);
        assert!((w_data + w_rts - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_values_fill_one_bin() {
        let s = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let values = vec![42.0; 100];
        let ss = set(FrameTypeKey::DATA, values);
        let sig = build_signature(&[&ss], &s, 50).unwrap().unwrap();
        let hist = &sig.entry(FrameTypeKey::DATA).unwrap().hist;
        let freqs = hist.frequencies();
        let bin = s.bin_index(42.0).unwrap();
        assert_eq!(freqs[bin], 1.0);
        assert_eq!(freqs.iter().filter(|&&f| f > 0.0).count(), 1);
    }

    #[test]
    fn mixed_devices_or_kinds_rejected() {
        let s = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let a = set(FrameTypeKey::DATA, vec![1.0]);
        let mut b = set(FrameTypeKey::DATA, vec![1.0]);
        b.device = mac(2);
        assert!(matches!(
            build_signature(&[&a, &b], &s, 1),
            Err(SignatureError::MixedDevices(..))
        ));
        let mut c = set(FrameTypeKey::RTS, vec![1.0]);
        c.kind = ParameterKind::Rate;
        assert!(matches!(
            build_signature(&[&a, &c], &s, 1),
            Err(SignatureError::MixedKinds(..))
        ));
        let wrong = BinningScheme::default_for(ParameterKind::Rate);
        assert!(matches!(
            build_signature(&[&a], &wrong, 1),
            Err(SignatureError::KindMismatch { .. })
        ));
    }

    proptest! {
        // binning is permutation-invariant
        #[test]
        fn permutation_invariance(mut values in proptest::collection::vec(-100.0f64..30_000.0, 1..200)) {
            let s = BinningScheme::default_for(ParameterKind::InterArrivalTime);
            let h1 = Histogram::from_values(&s, &values).unwrap();
            values.reverse();
            let h2 = Histogram::from_values(&s, &values).unwrap();
            prop_assert_eq!(h1, h2);
        }

        // binning then summing equals merging then binning
        #[test]
        fn additivity(a in proptest::collection::vec(0.0f64..30_000.0, 0..100),
                      b in proptest::collection::vec(0.0f64..30_000.0, 0..100)) {
            let s = BinningScheme::default_for(ParameterKind::InterArrivalTime);
            let mut ha = Histogram::from_values(&s, &a).unwrap();
            let hb = Histogram::from_values(&s, &b).unwrap();
            ha.merge(&hb).unwrap();
            let mut joined = a.clone();
            joined.extend_from_slice(&b);
            let hj = Histogram::from_values(&s, &joined).unwrap();
            prop_assert_eq!(ha, hj);
        }
    }
}
