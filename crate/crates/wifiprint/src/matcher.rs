//! Matching candidate signatures against a reference database.
//!
//! The similarity of a candidate against one reference is the sum, over
//! the candidate's frame types that the reference also has, of the
//! reference's frame-type weight times the cosine similarity of the two
//! frequency histograms. Frame types absent from either side contribute
//! nothing, so a candidate covering only part of a reference's traffic
//! mix can score at most the covered weight.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::evaluator::ReferenceDatabase;
use crate::signature::{DeviceSignature, Histogram};
use crate::trace::DeviceId;

/// A similarity decision threshold in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(t: f64) -> Result<Self, MatchError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(MatchError::ThresholdOutOfRange(t));
        }
        Ok(Threshold(t))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// One candidate's similarities against every reference device, ordered
/// by reference id.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityVector {
    pub candidate: DeviceId,
    pub entries: Vec<(DeviceId, f64)>,
}

impl SimilarityVector {
    pub fn similarity_to(&self, reference: DeviceId) -> Option<f64> {
        self.entries
            .iter()
            .find(|(id, _)| *id == reference)
            .map(|(_, sim)| *sim)
    }
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("threshold must be in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
    #[error("histograms are not comparable: schemes {left:#x} vs {right:#x}")]
    SchemeMismatch { left: u64, right: u64 },
    #[error("cosine similarity of an empty histogram is undefined")]
    EmptyHistogram,
    #[error("signature kind {candidate} does not match reference database kind {reference}")]
    KindMismatch {
        candidate: crate::features::ParameterKind,
        reference: crate::features::ParameterKind,
    },
}

/// Cosine similarity of two frequency histograms, in [0, 1].
///
/// 1 when the distributions are identical in shape, 0 when their supports
/// are disjoint. Both histograms must be built under the same scheme and
/// hold at least one observation.
pub fn cosine_similarity(h_c: &Histogram, h_r: &Histogram) -> Result<f64, MatchError> {
    if h_c.scheme_id() != h_r.scheme_id() {
        return Err(MatchError::SchemeMismatch {
            left: h_c.scheme_id(),
            right: h_r.scheme_id(),
        });
    }
    if h_c.total() == 0 || h_r.total() == 0 {
        return Err(MatchError::EmptyHistogram);
    }
    let fc = h_c.frequencies();
    let fr = h_r.frequencies();
    let mut dot = 0.0;
    let mut nc = 0.0;
    let mut nr = 0.0;
    for (a, b) in fc.iter().zip(&fr) {
        dot += a * b;
        nc += a * a;
        nr += b * b;
    }
    // totals are nonzero, so both norms are strictly positive
    let sim = dot / (nc.sqrt() * nr.sqrt());
    Ok(sim.clamp(0.0, 1.0))
}

/// Matches one candidate signature against every reference in the
/// database, returning the vector of similarities.
///
/// For each reference r, sim is the sum over the candidate's frame types
/// also present in r of weight_r(ftype) * cosine(hist_c(ftype), hist_r(ftype)).
pub fn match_candidate(
    sig_c: &DeviceSignature,
    refdb: &ReferenceDatabase,
) -> Result<SimilarityVector, MatchError> {
    if sig_c.kind != refdb.kind() {
        return Err(MatchError::KindMismatch {
            candidate: sig_c.kind,
            reference: refdb.kind(),
        });
    }
    let mut entries = Vec::with_capacity(refdb.len());
    for (id, sig_r) in refdb.iter() {
        let mut sim = 0.0;
        for (ftype, entry_c) in &sig_c.entries {
            let Some(entry_r) = sig_r.entry(*ftype) else {
                continue; // reference never sent this frame type
            };
            sim += entry_r.weight * cosine_similarity(&entry_c.hist, &entry_r.hist)?;
        }
        entries.push((*id, sim.clamp(0.0, 1.0)));
    }
    Ok(SimilarityVector {
        candidate: sig_c.device,
        entries,
    })
}

/// References whose similarity strictly exceeds the threshold.
pub fn similarity_set(v: &SimilarityVector, t: Threshold) -> BTreeSet<DeviceId> {
    v.entries
        .iter()
        .filter(|(_, sim)| *sim > t.value())
        .map(|(id, _)| *id)
        .collect()
}

/// The best-matching reference, or `None` when even the best similarity
/// does not exceed the threshold ("unknown device").
///
/// Ties break to the lexicographically smallest reference id, so the
/// result does not depend on reference ordering.
pub fn identify(v: &SimilarityVector, t: Threshold) -> Option<DeviceId> {
    let mut best: Option<(DeviceId, f64)> = None;
    for &(id, sim) in &v.entries {
        let better = match best {
            None => true,
            Some((bid, bsim)) => sim > bsim || (sim == bsim && id < bid),
        };
        if better {
            best = Some((id, sim));
        }
    }
    match best {
        Some((id, sim)) if sim > t.value() => Some(id),
        _ => None,
    }
}
