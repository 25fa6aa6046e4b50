//! Learning/detection methodology: trace splitting, reference-database
//! construction, threshold sweeps, and accuracy metrics.
//!
//! A trace is split into a reference segment (the learning phase) and
//! consecutive detection windows. Every device with enough observations
//! in a window becomes a candidate whose ground-truth identity is its
//! source address; sweeping the decision threshold yields the similarity
//! test's TPR/FPR curve (and its AUC) and the identification test's
//! ratio/FPR.

use std::collections::btree_map;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_samples, ParameterKind};
use crate::matcher::{self, MatchError, Threshold};
use crate::signature::{
    build_signature, BinningScheme, DeviceSignature, Histogram, SignatureError,
};
use crate::trace::{CanonicalTrace, DeviceId, FrameTypeKey, TraceError};

/// Immutable collection of reference signatures sharing one parameter
/// kind and binning scheme.
#[derive(Debug, Clone)]
pub struct ReferenceDatabase {
    scheme: BinningScheme,
    signatures: BTreeMap<DeviceId, DeviceSignature>,
}

impl ReferenceDatabase {
    /// Learning phase: builds one signature per device in the trace that
    /// meets the observation floor. Devices below it are omitted. An
    /// empty result is legal (the caller may warn).
    pub fn build(
        trace: &CanonicalTrace,
        scheme: &BinningScheme,
        min_obs: u64,
    ) -> Result<Self, EvalError> {
        let extraction = extract_samples(trace, scheme.kind());
        let mut signatures = BTreeMap::new();
        for device in trace.devices() {
            let sets = extraction.sets_for(device);
            if let Some(sig) = build_signature(&sets, scheme, min_obs)? {
                signatures.insert(device, sig);
            }
        }
        Ok(ReferenceDatabase {
            scheme: scheme.clone(),
            signatures,
        })
    }

    pub fn from_signatures(
        scheme: BinningScheme,
        sigs: Vec<DeviceSignature>,
    ) -> Result<Self, EvalError> {
        let mut signatures = BTreeMap::new();
        for sig in sigs {
            if sig.kind != scheme.kind() {
                return Err(EvalError::Signature(SignatureError::KindMismatch {
                    scheme: scheme.kind(),
                    samples: sig.kind,
                }));
            }
            signatures.insert(sig.device, sig);
        }
        Ok(ReferenceDatabase { scheme, signatures })
    }

    pub fn kind(&self) -> ParameterKind {
        self.scheme.kind()
    }

    pub fn scheme(&self) -> &BinningScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn contains(&self, id: DeviceId) -> bool {
        self.signatures.contains_key(&id)
    }

    pub fn get(&self, id: DeviceId) -> Option<&DeviceSignature> {
        self.signatures.get(&id)
    }

    pub fn iter(&self) -> btree_map::Iter<'_, DeviceId, DeviceSignature> {
        self.signatures.iter()
    }

    pub fn device_ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.signatures.keys().copied()
    }

    /// Serializes to the versioned JSON document. Counts are the source
    /// of truth; frequencies and weights are recomputed on load.
    pub fn to_json(&self) -> String {
        let doc = DbDocument {
            version: DB_VERSION,
            kind: self.kind(),
            scheme: SchemeDoc {
                edges: self.scheme.edges().to_vec(),
            },
            devices: self
                .signatures
                .values()
                .map(|sig| DeviceDoc {
                    mac: sig.device,
                    entries: sig
                        .entries
                        .iter()
                        .map(|(ftype, e)| EntryDoc {
                            ftype: *ftype,
                            weight: e.weight,
                            counts: e.hist.counts().to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("database document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let doc: DbDocument =
            serde_json::from_str(text).map_err(|e| EvalError::DbFormat(e.to_string()))?;
        if doc.version != DB_VERSION {
            return Err(EvalError::DbFormat(format!(
                "unsupported database version {} (expected {})",
                doc.version, DB_VERSION
            )));
        }
        let scheme = BinningScheme::new(doc.kind, doc.scheme.edges)?;
        let mut signatures = BTreeMap::new();
        for dev in doc.devices {
            let mut entries = BTreeMap::new();
            let mut built_from = 0u64;
            for entry in dev.entries {
                if entry.counts.len() != scheme.bin_count() {
                    return Err(EvalError::DbFormat(format!(
                        "device {} entry {}: {} bins, scheme has {}",
                        dev.mac,
                        entry.ftype,
                        entry.counts.len(),
                        scheme.bin_count()
                    )));
                }
                let hist = Histogram::from_counts(scheme.scheme_id(), entry.counts);
                let count = hist.total();
                built_from += count;
                entries.insert(
                    entry.ftype,
                    crate::signature::SignatureEntry {
                        weight: 0.0,
                        hist,
                        count,
                    },
                );
            }
            for e in entries.values_mut() {
                e.weight = e.count as f64 / built_from as f64;
            }
            signatures.insert(
                dev.mac,
                DeviceSignature {
                    device: dev.mac,
                    kind: doc.kind,
                    entries,
                    built_from,
                },
            );
        }
        Ok(ReferenceDatabase { scheme, signatures })
    }
}

const DB_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DbDocument {
    version: u32,
    kind: ParameterKind,
    scheme: SchemeDoc,
    devices: Vec<DeviceDoc>,
}

#[derive(Serialize, Deserialize)]
struct SchemeDoc {
    edges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DeviceDoc {
    mac: DeviceId,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    ftype: FrameTypeKey,
    weight: f64,
    counts: Vec<u64>,
}

/// Parameters of one evaluation run.
#[derive(Debug, Clone)]
pub struct EvaluationConfig {
    /// Length of the learning segment at the start of the trace, µs.
    pub ref_duration_us: u64,
    /// Detection window length, µs.
    pub window_us: u64,
    /// Minimum observations per signature (training and candidate).
    pub min_obs: u64,
    /// Thresholds to sweep, each in [0, 1].
    pub sweep: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            ref_duration_us: 3_600_000_000, // 1 hour
            window_us: 300_000_000,         // 5 minutes
            min_obs: 50,
            sweep: default_sweep(),
        }
    }
}

/// 1001 evenly spaced thresholds over [0, 1].
pub fn default_sweep() -> Vec<f64> {
    (0..=1000).map(|i| i as f64 / 1000.0).collect()
}

/// Accuracy metrics at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    /// Similarity test: fraction of known candidates whose returned set
    /// contains their own device.
    pub tpr: f64,
    /// Similarity test: fraction of returned references that are not the
    /// candidate's own device.
    pub fpr: f64,
    /// Identification test: fraction of known candidates identified as
    /// themselves.
    pub id_ratio: f64,
    /// Identification test: fraction of all candidates identified as a
    /// different reference device.
    pub id_fpr: f64,
}

/// Outcome of an evaluation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub points: Vec<CurvePoint>,
    /// Trapezoidal area under the (FPR, TPR) polyline.
    pub auc: f64,
    pub windows: usize,
    pub candidates: usize,
    pub known_candidates: usize,
}

impl EvaluationReport {
    /// The sweep point whose identification FPR is closest to `target`
    /// (first such point in sweep order on ties).
    pub fn point_nearest_id_fpr(&self, target: f64) -> Option<&CurvePoint> {
        self.points.iter().min_by(|a, b| {
            (a.id_fpr - target)
                .abs()
                .partial_cmp(&(b.id_fpr - target).abs())
                .expect("ratios are finite")
        })
    }

    /// Best identification ratio among sweep points with id_fpr at or
    /// below `cap`.
    pub fn best_id_ratio_with_fpr_at_most(&self, cap: f64) -> Option<&CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.id_fpr <= cap)
            .max_by(|a, b| {
                a.id_ratio
                    .partial_cmp(&b.id_ratio)
                    .expect("ratios are finite")
            })
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("reference database format error: {0}")]
    DbFormat(String),
    #[error("trace spans {actual} us which does not exceed the reference duration {requested} us")]
    TraceTooShort { requested: u64, actual: u64 },
    #[error("detection window must be positive")]
    ZeroWindow,
    #[error("reference database is empty; nothing to match against")]
    EmptyDatabase,
    #[error("threshold sweep value {0} outside [0, 1]")]
    BadSweep(f64),
    #[error("evaluation report format error: {0}")]
    ReportFormat(String),
}

/// Splits a trace into the learning segment and consecutive detection
/// windows.
///
/// The reference segment holds frames whose end of reception falls within
/// `ref_duration` of the first frame; the remainder is tiled into
/// half-open windows of `window_us`, the final partial window kept.
/// Windows with no frames stay in the list so window indexes correspond
/// to wall-clock positions.
pub fn split_trace(
    trace: &CanonicalTrace,
    cfg: &EvaluationConfig,
) -> Result<(CanonicalTrace, Vec<CanonicalTrace>), EvalError> {
    if cfg.window_us == 0 {
        return Err(EvalError::ZeroWindow);
    }
    let start = trace.start_us().unwrap_or(0);
    let end = trace.end_us().unwrap_or(0);
    let cutoff = start + cfg.ref_duration_us;
    if trace.is_empty() || end < cutoff {
        return Err(EvalError::TraceTooShort {
            requested: cfg.ref_duration_us,
            actual: end.saturating_sub(start),
        });
    }

    let mut reference = Vec::new();
    let mut validation = Vec::new();
    for f in trace.frames() {
        if f.t_end_us < cutoff {
            reference.push(f.clone());
        } else {
            validation.push(f.clone());
        }
    }
    if validation.is_empty() {
        return Err(EvalError::TraceTooShort {
            requested: cfg.ref_duration_us,
            actual: end.saturating_sub(start),
        });
    }

    let origin = trace.origin_us();
    let windows = tile_windows(origin, cutoff, validation, cfg.window_us)?;
    let reference = CanonicalTrace::new(origin, reference)?;
    Ok((reference, windows))
}

/// Tiles frames into consecutive half-open windows of `window_us`
/// starting at the first frame (the final partial window kept). Empty
/// windows stay in the list so indexes track wall-clock position.
pub fn partition_windows(
    trace: &CanonicalTrace,
    window_us: u64,
) -> Result<Vec<CanonicalTrace>, EvalError> {
    if window_us == 0 {
        return Err(EvalError::ZeroWindow);
    }
    let Some(start) = trace.start_us() else {
        return Ok(Vec::new());
    };
    tile_windows(trace.origin_us(), start, trace.frames().to_vec(), window_us)
}

fn tile_windows(
    origin: i64,
    start: u64,
    frames: Vec<crate::trace::FrameRecord>,
    window_us: u64,
) -> Result<Vec<CanonicalTrace>, EvalError> {
    let last = frames.last().expect("non-empty").t_end_us;
    let n_windows = ((last - start) / window_us) as usize + 1;
    let mut windows: Vec<Vec<crate::trace::FrameRecord>> = vec![Vec::new(); n_windows];
    for f in frames {
        let idx = ((f.t_end_us - start) / window_us) as usize;
        windows[idx].push(f);
    }
    windows
        .into_iter()
        .map(|frames| CanonicalTrace::new(origin, frames).map_err(EvalError::from))
        .collect()
}

/// Convenience alias for the learning phase.
pub fn build_reference_db(
    reference_trace: &CanonicalTrace,
    scheme: &BinningScheme,
    min_obs: u64,
) -> Result<ReferenceDatabase, EvalError> {
    ReferenceDatabase::build(reference_trace, scheme, min_obs)
}

/// One candidate observed in one window, with its similarity vector.
#[derive(Debug, Clone)]
pub struct WindowCandidate {
    pub window: usize,
    pub device: DeviceId,
    pub sims: matcher::SimilarityVector,
    pub known: bool,
}

/// Builds candidate signatures per window and matches each against the
/// reference database. Shared by evaluation and the match command.
pub fn window_candidates(
    windows: &[CanonicalTrace],
    refdb: &ReferenceDatabase,
    min_obs: u64,
) -> Result<Vec<WindowCandidate>, EvalError> {
    let mut out = Vec::new();
    for (w, window) in windows.iter().enumerate() {
        let extraction = extract_samples(window, refdb.kind());
        for device in window.devices() {
            let sets = extraction.sets_for(device);
            let Some(sig) = build_signature(&sets, refdb.scheme(), min_obs)? else {
                continue;
            };
            let sims = matcher::match_candidate(&sig, refdb)?;
            out.push(WindowCandidate {
                window: w,
                device,
                sims,
                known: refdb.contains(device),
            });
        }
    }
    Ok(out)
}

/// Runs the full methodology over one trace: split, learn, window sweep.
pub fn evaluate(
    trace: &CanonicalTrace,
    cfg: &EvaluationConfig,
    scheme: &BinningScheme,
) -> Result<EvaluationReport, EvalError> {
    for &t in &cfg.sweep {
        if !(0.0..=1.0).contains(&t) {
            return Err(EvalError::BadSweep(t));
        }
    }
    let (reference, windows) = split_trace(trace, cfg)?;
    let refdb = ReferenceDatabase::build(&reference, scheme, cfg.min_obs)?;
    if refdb.is_empty() {
        return Err(EvalError::EmptyDatabase);
    }
    let candidates = window_candidates(&windows, &refdb, cfg.min_obs)?;
    Ok(evaluate_candidates(&candidates, &cfg.sweep, windows.len()))
}

/// Aggregates sweep metrics over precomputed (window, candidate) pairs.
pub fn evaluate_candidates(
    candidates: &[WindowCandidate],
    sweep: &[f64],
    windows: usize,
) -> EvaluationReport {
    let known_candidates = candidates.iter().filter(|c| c.known).count();
    let mut points = Vec::with_capacity(sweep.len());
    for &t in sweep {
        let threshold = Threshold::new(t).expect("sweep validated");
        let mut tp = 0usize; // known candidates whose set contains themselves
        let mut returned = 0usize; // total returned references
        let mut wrong_returned = 0usize; // returned references that are not the candidate
        let mut id_correct = 0usize;
        let mut id_wrong = 0usize;
        for cand in candidates {
            let set = matcher::similarity_set(&cand.sims, threshold);
            returned += set.len();
            let contains_self = set.contains(&cand.device);
            wrong_returned += set.len() - usize::from(contains_self);
            if cand.known && contains_self {
                tp += 1;
            }
            match matcher::identify(&cand.sims, threshold) {
                Some(id) if id == cand.device => id_correct += 1,
                Some(_) => id_wrong += 1,
                None => {}
            }
        }
        points.push(CurvePoint {
            threshold: t,
            tpr: ratio(tp, known_candidates),
            fpr: ratio(wrong_returned, returned),
            id_ratio: ratio(id_correct, known_candidates),
            id_fpr: ratio(id_wrong, candidates.len()),
        });
    }
    let auc = curve_auc(&points);
    EvaluationReport {
        points,
        auc,
        windows,
        candidates: candidates.len(),
        known_candidates,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Trapezoidal area under the (FPR, TPR) polyline: points sorted by FPR
/// then TPR, with (0,0) prepended and (1,1) appended.
pub fn curve_auc(points: &[CurvePoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    xy.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
    let mut curve = Vec::with_capacity(xy.len() + 2);
    curve.push((0.0, 0.0));
    curve.extend(xy);
    curve.push((1.0, 1.0));
    let mut auc = 0.0;
    for w in curve.windows(2) {
        let (x1, y1) = w[0];
        let (x2, y2) = w[1];
        auc += (x2 - x1) * (y1 + y2) / 2.0;
    }
    auc
}

const REPORT_HEADER: &str = "T,tpr,fpr,id_ratio,id_fpr";

/// Renders the report as CSV: a header, one row per threshold, and a
/// final `AUC` summary row.
pub fn report_csv(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.threshold, p.tpr, p.fpr, p.id_ratio, p.id_fpr
        ));
    }
    out.push_str(&format!("AUC,{},,,\n", report.auc));
    out
}

/// Parses [`report_csv`] output back into curve points and the AUC.
pub fn parse_report_csv(text: &str) -> Result<(Vec<CurvePoint>, f64), EvalError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REPORT_HEADER => {}
        other => {
            return Err(EvalError::ReportFormat(format!(
                "bad header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut points = Vec::new();
    let mut auc = None;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "AUC" {
            let v = fields
                .get(1)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| EvalError::ReportFormat(format!("bad AUC row: {line:?}")))?;
            auc = Some(v);
            continue;
        }
        if fields.len() != 5 {
            return Err(EvalError::ReportFormat(format!("bad row: {line:?}")));
        }
        let parse = |i: usize| -> Result<f64, EvalError> {
            fields[i]
                .parse()
                .map_err(|_| EvalError::ReportFormat(format!("bad number in row: {line:?}")))
        };
        points.push(CurvePoint {
            threshold: parse(0)?,
            tpr: parse(1)?,
            fpr: parse(2)?,
            id_ratio: parse(3)?,
            id_fpr: parse(4)?,
        });
    }
    let auc = auc.ok_or_else(|| EvalError::ReportFormat("missing AUC row".into()))?;
    Ok((points, auc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SampleSet;
    use crate::trace::FrameRecord;
    use proptest::prelude::*;

    fn mac(last: u8) -> DeviceId {
        DeviceId::new([2, 0, 0, 0, 0, last])
    }

    fn data_frame(t: u64, sender: Option<DeviceId>) -> FrameRecord {
        FrameRecord {
            t_end_us: t,
            size: 100,
            rate_mbps: Some(54.0),
            ftype: FrameTypeKey::DATA,
            sender,
            retry: false,
            fcs_ok: true,
        }
    }

    /// Periodic per-device traffic: device d sends every `period(d)` µs.
    fn periodic_trace(n_devices: u8, duration_us: u64) -> CanonicalTrace {
        let mut frames = Vec::new();
        for d in 0..n_devices {
            let period = 1_000 + 100 * d as u64;
            let mut t = period;
            while t < duration_us {
                frames.push(data_frame(t, Some(mac(d))));
                t += period;
            }
        }
        frames.sort_by_key(|f| f.t_end_us);
        CanonicalTrace::new(0, frames).unwrap()
    }

    fn small_cfg() -> EvaluationConfig {
        EvaluationConfig {
            ref_duration_us: 1_000_000,
            window_us: 500_000,
            min_obs: 50,
            sweep: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    #[test]
    fn split_counts_windows() {
        // 7-hour trace, 1-hour reference, 5-minute windows -> 72 windows
        let mut frames = Vec::new();
        let hour = 3_600_000_000u64;
        let mut t = 0;
        while t < 7 * hour {
            frames.push(data_frame(t, Some(mac(1))));
            t += 60_000_000; // one frame a minute
        }
        let trace = CanonicalTrace::new(0, frames).unwrap();
        let cfg = EvaluationConfig {
            ref_duration_us: hour,
            window_us: 300_000_000,
            ..EvaluationConfig::default()
        };
        let (reference, windows) = split_trace(&trace, &cfg).unwrap();
        assert_eq!(windows.len(), 72);
        assert_eq!(reference.len(), 60);
        assert!(windows.iter().all(|w| w.len() == 5));

        // 1-hour trace, 20-minute reference, 5-minute windows -> 8 windows
        let mut frames = Vec::new();
        let mut t = 0;
        while t < hour {
            frames.push(data_frame(t, Some(mac(1))));
            t += 60_000_000;
        }
        let trace = CanonicalTrace::new(0, frames).unwrap();
        let cfg = EvaluationConfig {
            ref_duration_us: 20 * 60_000_000,
            window_us: 300_000_000,
            ..EvaluationConfig::default()
        };
        let (_, windows) = split_trace(&trace, &cfg).unwrap();
        assert_eq!(windows.len(), 8);
    }

    #[test]
    fn split_relative_to_first_frame() {
        // trace that starts late on its clock still splits sensibly
        let frames = vec![
            data_frame(5_000_000, Some(mac(1))),
            data_frame(5_400_000, Some(mac(1))),
            data_frame(6_800_000, Some(mac(1))),
        ];
        let trace = CanonicalTrace::new(0, frames).unwrap();
        let cfg = EvaluationConfig {
            ref_duration_us: 1_000_000,
            window_us: 500_000,
            ..small_cfg()
        };
        let (reference, windows) = split_trace(&trace, &cfg).unwrap();
        assert_eq!(reference.len(), 2);
        assert_eq!(windows.len(), 2); // [6.0s, 6.5s) empty, [6.5s, 7.0s) holds one
        assert_eq!(windows[0].len(), 0);
        assert_eq!(windows[1].len(), 1);
    }

    #[test]
    fn zero_window_is_rejected() {
        let trace = periodic_trace(1, 3_000_000);
        let cfg = EvaluationConfig {
            window_us: 0,
            ..small_cfg()
        };
        assert!(matches!(
            split_trace(&trace, &cfg),
            Err(EvalError::ZeroWindow)
        ));
        assert!(matches!(
            partition_windows(&trace, 0),
            Err(EvalError::ZeroWindow)
        ));
    }

    #[test]
    fn split_rejects_short_trace() {
        let trace = periodic_trace(1, 500_000);
        assert!(matches!(
            split_trace(&trace, &small_cfg()),
            Err(EvalError::TraceTooShort { .. })
        ));
        // exactly the reference duration: empty validation set
        let frames = vec![
            data_frame(0, Some(mac(1))),
            data_frame(999_999, Some(mac(1))),
        ];
        let trace = CanonicalTrace::new(0, frames).unwrap();
        assert!(matches!(
            split_trace(&trace, &small_cfg()),
            Err(EvalError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn reference_db_gates_on_min_obs() {
        let trace = periodic_trace(2, 2_000_000);
        let scheme = BinningScheme::default_for(ParameterKind::FrameSize);
        // each device has ~1800/2000 frames over 2 s; raise the floor.
        let db = ReferenceDatabase::build(&trace, &scheme, 1_000_000).unwrap();
        assert!(db.is_empty());
        let db = ReferenceDatabase::build(&trace, &scheme, 50).unwrap();
        assert_eq!(db.len(), 2);
    }

    #[test]
    fn reference_db_json_round_trips_and_is_deterministic() {
        let trace = periodic_trace(3, 3_000_000);
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let db = ReferenceDatabase::build(&trace, &scheme, 50).unwrap();
        let json1 = db.to_json();
        let db2 = ReferenceDatabase::build(&trace, &scheme, 50).unwrap();
        assert_eq!(
            json1,
            db2.to_json(),
            "same trace builds byte-identical JSON"
        );

        let loaded = ReferenceDatabase::from_json(&json1).unwrap();
        assert_eq!(loaded.len(), db.len());
        assert_eq!(loaded.scheme().scheme_id(), db.scheme().scheme_id());
        for (id, sig) in db.iter() {
            let l = loaded.get(*id).unwrap();
            assert_eq!(l.built_from, sig.built_from);
            for (ftype, e) in &sig.entries {
                let le = l.entry(*ftype).unwrap();
                assert_eq!(le.hist.counts(), e.hist.counts());
                assert!((le.weight - e.weight).abs() < 1e-12);
            }
        }
        assert_eq!(loaded.to_json(), json1);
    }

    #[test]
    fn from_json_rejects_bad_documents() {
        assert!(ReferenceDatabase::from_json("{").is_err());
        assert!(ReferenceDatabase::from_json("{\"version\":9}").is_err());
    }

    #[test]
    fn two_device_hand_instance() {
        // refs r1, r2; candidate c1 (r1's device) with sims (0.9, 0.6);
        // candidate c2 (r2's device) with sims (0.5, 0.55); T = 0.5.
        // Enumerated by hand with the strict comparison:
        //   c1 returns {r1, r2} (both > 0.5), c2 returns {r2} (0.5 is not
        //   > 0.5): TPR = 2/2, wrong returned = c1's r2 -> FPR = 1/3;
        //   both identify as themselves -> id_ratio = 1, id_fpr = 0.
        let sims = |cand: DeviceId, s1: f64, s2: f64| matcher::SimilarityVector {
            candidate: cand,
            entries: vec![(mac(1), s1), (mac(2), s2)],
        };
        let candidates = vec![
            WindowCandidate {
                window: 0,
                device: mac(1),
                sims: sims(mac(1), 0.9, 0.6),
                known: true,
            },
            WindowCandidate {
                window: 0,
                device: mac(2),
                sims: sims(mac(2), 0.5, 0.55),
                known: true,
            },
        ];
        let report = evaluate_candidates(&candidates, &[0.5], 1);
        let p = report.points[0];
        assert_eq!(p.tpr, 1.0);
        assert!((p.fpr - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p.id_ratio, 1.0);
        assert_eq!(p.id_fpr, 0.0);
    }

    #[test]
    fn unknown_candidate_counts_only_in_id_fpr_denominator() {
        let sims = |cand: DeviceId, s1: f64| matcher::SimilarityVector {
            candidate: cand,
            entries: vec![(mac(1), s1)],
        };
        let candidates = vec![
            WindowCandidate {
                window: 0,
                device: mac(1),
                sims: sims(mac(1), 0.9),
                known: true,
            },
            // unknown device misidentified as r1
            WindowCandidate {
                window: 0,
                device: mac(9),
                sims: sims(mac(9), 0.8),
                known: false,
            },
        ];
        let report = evaluate_candidates(&candidates, &[0.5], 1);
        let p = report.points[0];
        assert_eq!(p.tpr, 1.0); // 1 of 1 known
        assert_eq!(p.id_ratio, 1.0); // 1 of 1 known
        assert_eq!(p.id_fpr, 0.5); // 1 of 2 candidates identified wrongly
                                   // returned: {r1} and {r1}; the unknown's r1 is a wrong return
        assert_eq!(p.fpr, 0.5);
    }

    #[test]
    fn evaluate_self_consistency_on_periodic_trace() {
        let trace = periodic_trace(3, 4_000_000);
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let cfg = EvaluationConfig {
            ref_duration_us: 2_000_000,
            window_us: 1_000_000,
            min_obs: 50,
            sweep: vec![0.0, 0.5, 0.9, 1.0],
        };
        let report = evaluate(&trace, &cfg, &scheme).unwrap();
        assert_eq!(report.windows, 2);
        assert!(report.candidates > 0);
        // ratios bounded, TPR non-increasing in T
        for w in report.points.windows(2) {
            assert!(w[0].tpr >= w[1].tpr);
        }
        for p in &report.points {
            for v in [p.tpr, p.fpr, p.id_ratio, p.id_fpr] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert!((0.0..=1.0).contains(&report.auc));
        // sweep containing only T=1.0 returns empty sets: TPR = FPR = 0
        let strict = evaluate(
            &trace,
            &EvaluationConfig {
                sweep: vec![1.0],
                ..cfg
            },
            &scheme,
        )
        .unwrap();
        assert_eq!(strict.points[0].tpr, 0.0);
        assert_eq!(strict.points[0].fpr, 0.0);
    }

    #[test]
    fn evaluate_rejects_empty_db() {
        let trace = periodic_trace(1, 3_000_000);
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let cfg = EvaluationConfig {
            ref_duration_us: 1_000_000,
            window_us: 500_000,
            min_obs: 1_000_000,
            sweep: vec![0.5],
        };
        assert!(matches!(
            evaluate(&trace, &cfg, &scheme),
            Err(EvalError::EmptyDatabase)
        ));
    }

    #[test]
    fn evaluate_is_deterministic() {
        let trace = periodic_trace(3, 4_000_000);
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let cfg = EvaluationConfig {
            ref_duration_us: 2_000_000,
            window_us: 1_000_000,
            min_obs: 50,
            sweep: (0..=10).map(|i| i as f64 / 10.0).collect(),
        };
        let a = evaluate(&trace, &cfg, &scheme).unwrap();
        let b = evaluate(&trace, &cfg, &scheme).unwrap();
        assert_eq!(a, b);
        assert_eq!(report_csv(&a), report_csv(&b));
    }

    #[test]
    fn degenerate_single_device_has_full_tpr_below_one() {
        // one perfectly periodic device: per-window histograms are
        // identical to the reference, so TPR is 1 at every swept T < 1
        let trace = periodic_trace(1, 4_000_000);
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let cfg = EvaluationConfig {
            ref_duration_us: 2_000_000,
            window_us: 1_000_000,
            min_obs: 50,
            sweep: (0..=10).map(|i| i as f64 / 10.0).collect(),
        };
        let report = evaluate(&trace, &cfg, &scheme).unwrap();
        for p in &report.points {
            if p.threshold < 1.0 {
                assert_eq!(p.tpr, 1.0, "TPR at T={}", p.threshold);
                assert_eq!(p.fpr, 0.0);
            } else {
                assert_eq!(p.tpr, 0.0, "strict comparison empties the set at T=1");
            }
        }
    }

    #[test]
    fn auc_of_perfect_curve() {
        let points = vec![CurvePoint {
            threshold: 0.5,
            tpr: 1.0,
            fpr: 0.0,
            id_ratio: 1.0,
            id_fpr: 0.0,
        }];
        assert_eq!(curve_auc(&points), 1.0);
        assert_eq!(curve_auc(&[]), 0.5); // just the diagonal anchors
    }

    #[test]
    fn report_csv_shape() {
        let report = EvaluationReport {
            points: vec![CurvePoint {
                threshold: 0.5,
                tpr: 1.0,
                fpr: 0.25,
                id_ratio: 0.75,
                id_fpr: 0.1,
            }],
            auc: 0.875,
            windows: 2,
            candidates: 4,
            known_candidates: 4,
        };
        let csv = report_csv(&report);
        assert_eq!(
            csv,
            "T,tpr,fpr,id_ratio,id_fpr\n0.5,1,0.25,0.75,0.1\nAUC,0.875,,,\n"
        );
        // empty sweep: header and AUC row only
        let empty = EvaluationReport {
            points: vec![],
            auc: 0.5,
            windows: 0,
            candidates: 0,
            known_candidates: 0,
        };
        assert_eq!(
            report_csv(&empty),
            "T,tpr,fpr,id_ratio,id_fpr\nAUC,0.5,,,\n"
        );
    }

    fn make_sample_db() -> ReferenceDatabase {
        let scheme = BinningScheme::default_for(ParameterKind::InterArrivalTime);
        let set = SampleSet {
            device: mac(1),
            ftype: FrameTypeKey::DATA,
            kind: ParameterKind::InterArrivalTime,
            values: vec![100.0; 60],
        };
        let sig = build_signature(&[&set], &scheme, 50).unwrap().unwrap();
        ReferenceDatabase::from_signatures(scheme, vec![sig]).unwrap()
    }

    #[test]
    fn window_candidates_marks_known() {
        let db = make_sample_db();
        let window = periodic_trace(2, 1_000_000);
        let candidates = window_candidates(&[window], &db, 50).unwrap();
        assert_eq!(candidates.len(), 2);
        // periodic_trace devices are mac(0) and mac(1); only mac(1) is a reference
        assert!(candidates.iter().any(|c| c.device == mac(1) && c.known));
        assert!(candidates.iter().any(|c| c.device == mac(0) && !c.known));
    }

    proptest! {
        #[test]
        fn report_csv_round_trips(
            rows in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 0..20),
            auc in 0.0f64..=1.0
        ) {
            let points: Vec<CurvePoint> = rows
                .iter()
                .map(|&(t, tpr, fpr, id_ratio, id_fpr)| CurvePoint { threshold: t, tpr, fpr, id_ratio, id_fpr })
                .collect();
            let report = EvaluationReport {
                points: points.clone(),
                auc,
                windows: 0,
                candidates: 0,
                known_candidates: 0,
            };
            let (parsed, parsed_auc) = parse_report_csv(&report_csv(&report)).unwrap();
            prop_assert_eq!(parsed, points);
            prop_assert_eq!(parsed_auc, auc);
        }
    }
}
