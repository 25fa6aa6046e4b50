//! Domain types for frames, devices, and the canonical trace format.
//!
//! A [`CanonicalTrace`] is the common currency of the crate: the ingest
//! decoder produces one, the synthetic generator produces one, and feature
//! extraction consumes one. Traces round-trip losslessly through the text
//! format described at [`write_canonical`].

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A 48-bit hardware address identifying a wireless device.
///
/// Rendering is canonical lowercase colon-hex (`aa:bb:cc:dd:ee:ff`), and
/// `parse ∘ render` is the identity. Ordering is byte-lexicographic, which
/// coincides with ordering of the rendered strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId([u8; 6]);

impl DeviceId {
    pub fn new(octets: [u8; 6]) -> Self {
        DeviceId(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl FromStr for DeviceId {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut octets = [0u8; 6];
        let mut parts = s.split(':');
        for octet in octets.iter_mut() {
            let part = parts.next().ok_or_else(|| bad_mac(s))?;
            if part.len() != 2 {
                return Err(bad_mac(s));
            }
            *octet = u8::from_str_radix(part, 16).map_err(|_| bad_mac(s))?;
        }
        if parts.next().is_some() {
            return Err(bad_mac(s));
        }
        Ok(DeviceId(octets))
    }
}

impl Serialize for DeviceId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeviceId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn bad_mac(s: &str) -> TraceError {
    TraceError::InvalidMac(s.to_string())
}

/// The three 802.11 frame classes from the frame-control field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameKind {
    Management,
    Control,
    Data,
}

impl FrameKind {
    /// Short word used in the canonical trace format.
    pub fn word(&self) -> &'static str {
        match self {
            FrameKind::Management => "mgmt",
            FrameKind::Control => "ctrl",
            FrameKind::Data => "data",
        }
    }

    pub fn from_word(w: &str) -> Option<FrameKind> {
        match w {
            "mgmt" => Some(FrameKind::Management),
            "ctrl" => Some(FrameKind::Control),
            "data" => Some(FrameKind::Data),
            _ => None,
        }
    }
}

/// An 802.11 frame type: class plus 4-bit subtype.
///
/// Unknown (reserved) pairs are representable; [`FrameTypeKey::is_assigned`]
/// reports whether the pair is assigned by the frame-control encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameTypeKey {
    pub kind: FrameKind,
    pub subtype: u8,
}

impl FrameTypeKey {
    pub const DATA: FrameTypeKey = FrameTypeKey::new(FrameKind::Data, 0);
    pub const QOS_DATA: FrameTypeKey = FrameTypeKey::new(FrameKind::Data, 8);
    pub const NULL_DATA: FrameTypeKey = FrameTypeKey::new(FrameKind::Data, 4);
    pub const BEACON: FrameTypeKey = FrameTypeKey::new(FrameKind::Management, 8);
    pub const PROBE_REQUEST: FrameTypeKey = FrameTypeKey::new(FrameKind::Management, 4);
    pub const BLOCK_ACK_REQ: FrameTypeKey = FrameTypeKey::new(FrameKind::Control, 8);
    pub const BLOCK_ACK: FrameTypeKey = FrameTypeKey::new(FrameKind::Control, 9);
    pub const PS_POLL: FrameTypeKey = FrameTypeKey::new(FrameKind::Control, 10);
    pub const RTS: FrameTypeKey = FrameTypeKey::new(FrameKind::Control, 11);
    pub const CTS: FrameTypeKey = FrameTypeKey::new(FrameKind::Control, 12);
    pub const ACK: FrameTypeKey = FrameTypeKey::new(FrameKind::Control, 13);

    pub const fn new(kind: FrameKind, subtype: u8) -> Self {
        FrameTypeKey { kind, subtype }
    }

    /// Whether the (type, subtype) pair is assigned in the 802.11
    /// frame-control encoding (reserved pairs return false).
    pub fn is_assigned(&self) -> bool {
        match self.kind {
            FrameKind::Management => !matches!(self.subtype, 7 | 15),
            FrameKind::Control => self.subtype >= 7,
            FrameKind::Data => self.subtype != 13,
        }
    }
}

impl fmt::Display for FrameTypeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind.word(), self.subtype)
    }
}

impl FromStr for FrameTypeKey {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TraceError::InvalidFrameType(s.to_string());
        let (word, sub) = s.split_once('/').ok_or_else(err)?;
        let kind = FrameKind::from_word(word).ok_or_else(err)?;
        let subtype: u8 = sub.parse().map_err(|_| err())?;
        if subtype > 15 {
            return Err(err());
        }
        Ok(FrameTypeKey { kind, subtype })
    }
}

impl Serialize for FrameTypeKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FrameTypeKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One captured 802.11 frame.
///
/// `t_end_us` is the end-of-reception instant in microseconds relative to
/// the trace origin. `rate_mbps` is optional because not every capture
/// setup reports it; parameters that need the rate skip such frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub t_end_us: u64,
    pub size: u32,
    pub rate_mbps: Option<f64>,
    pub ftype: FrameTypeKey,
    pub sender: Option<DeviceId>,
    pub retry: bool,
    pub fcs_ok: bool,
}

/// An ordered sequence of frames captured on one channel.
///
/// `origin_us` is the absolute capture start (unix epoch microseconds);
/// frame times are relative to it. Reception times are non-decreasing:
/// equal microsecond timestamps are legal and preserve capture order, so a
/// zero inter-arrival is a legitimate sample in the lowest bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTrace {
    origin_us: i64,
    frames: Vec<FrameRecord>,
}

impl CanonicalTrace {
    /// Builds a trace, validating per-frame invariants and time ordering.
    pub fn new(origin_us: i64, frames: Vec<FrameRecord>) -> Result<Self, TraceError> {
        let mut prev: Option<u64> = None;
        for (i, f) in frames.iter().enumerate() {
            validate_frame(f).map_err(|field| TraceError::InvalidFrame { index: i, field })?;
            if let Some(p) = prev {
                if f.t_end_us < p {
                    return Err(TraceError::Order {
                        line: i + 2, // 1-based, after the header line
                        prev: p,
                        cur: f.t_end_us,
                    });
                }
            }
            prev = Some(f.t_end_us);
        }
        Ok(CanonicalTrace { origin_us, frames })
    }

    pub fn origin_us(&self) -> i64 {
        self.origin_us
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// End-of-reception of the first frame, if any.
    pub fn start_us(&self) -> Option<u64> {
        self.frames.first().map(|f| f.t_end_us)
    }

    /// End-of-reception of the last frame, if any.
    pub fn end_us(&self) -> Option<u64> {
        self.frames.last().map(|f| f.t_end_us)
    }

    /// Distinct senders appearing in the trace.
    pub fn devices(&self) -> BTreeSet<DeviceId> {
        self.frames.iter().filter_map(|f| f.sender).collect()
    }
}

fn validate_frame(f: &FrameRecord) -> Result<(), &'static str> {
    if f.size < 1 {
        return Err("size");
    }
    match f.rate_mbps {
        Some(r) if !(r.is_finite() && r > 0.0) => Err("rate"),
        _ => Ok(()),
    }
}

/// Errors from trace construction and canonical-format parsing.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid MAC address: {0:?}")]
    InvalidMac(String),
    #[error("invalid frame type: {0:?}")]
    InvalidFrameType(String),
    #[error("frame {index}: invalid {field}")]
    InvalidFrame { index: usize, field: &'static str },
    #[error("line {line}: reception time decreases ({cur} after {prev})")]
    Order { line: usize, prev: u64, cur: u64 },
    #[error("line {line}: missing or invalid header (expected `{expected}`)")]
    Header { line: usize, expected: &'static str },
    #[error("line {line}: field `{field}`: invalid value {value:?}")]
    Field {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const HEADER_PREFIX: &str = "#wifiprint-trace v1 origin=";

/// Parses the canonical text format produced by [`write_canonical`].
///
/// Invalid lines are reported with their line number and field name;
/// decreasing reception times are an order error.
pub fn parse_canonical<R: BufRead>(reader: R) -> Result<CanonicalTrace, TraceError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(TraceError::Header {
            line: 1,
            expected: HEADER_PREFIX,
        })?
        .map_err(TraceError::Io)?;
    let origin_str = header
        .strip_prefix(HEADER_PREFIX)
        .ok_or(TraceError::Header {
            line: 1,
            expected: HEADER_PREFIX,
        })?;
    let origin_us: i64 = origin_str.trim().parse().map_err(|_| TraceError::Field {
        line: 1,
        field: "origin",
        value: origin_str.to_string(),
    })?;

    let mut frames = Vec::new();
    let mut prev_t: Option<u64> = None;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(TraceError::Io)?;
        if line.is_empty() {
            continue;
        }
        let frame = parse_frame_line(&line, line_no)?;
        if let Some(p) = prev_t {
            if frame.t_end_us < p {
                return Err(TraceError::Order {
                    line: line_no,
                    prev: p,
                    cur: frame.t_end_us,
                });
            }
        }
        prev_t = Some(frame.t_end_us);
        frames.push(frame);
    }
    // Ordering already checked line by line; per-frame fields checked below.
    CanonicalTrace::new(origin_us, frames)
}

fn parse_frame_line(line: &str, line_no: usize) -> Result<FrameRecord, TraceError> {
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.len() != 8 {
        return Err(TraceError::FieldCount {
            line: line_no,
            expected: 8,
            found: fields.len(),
        });
    }
    let field_err = |field: &'static str, value: &str| TraceError::Field {
        line: line_no,
        field,
        value: value.to_string(),
    };

    let t_end_us: u64 = fields[0]
        .parse()
        .map_err(|_| field_err("t_end_us", fields[0]))?;
    let size: u32 = fields[1]
        .parse()
        .map_err(|_| field_err("size_bytes", fields[1]))?;
    if size < 1 {
        return Err(field_err("size_bytes", fields[1]));
    }
    let rate_mbps = if fields[2] == "-" {
        None
    } else {
        let r: f64 = fields[2]
            .parse()
            .map_err(|_| field_err("rate_mbps", fields[2]))?;
        if !(r.is_finite() && r > 0.0) {
            return Err(field_err("rate_mbps", fields[2]));
        }
        Some(r)
    };
    let kind = FrameKind::from_word(fields[3]).ok_or_else(|| field_err("type_word", fields[3]))?;
    let subtype: u8 = fields[4]
        .parse()
        .map_err(|_| field_err("subtype", fields[4]))?;
    if subtype > 15 {
        return Err(field_err("subtype", fields[4]));
    }
    let sender = if fields[5] == "-" {
        None
    } else {
        Some(
            fields[5]
                .parse::<DeviceId>()
                .map_err(|_| field_err("sender_mac", fields[5]))?,
        )
    };
    let retry = match fields[6] {
        "0" => false,
        "1" => true,
        v => return Err(field_err("retry", v)),
    };
    let fcs_ok = match fields[7] {
        "0" => false,
        "1" => true,
        v => return Err(field_err("fcs_ok", v)),
    };

    Ok(FrameRecord {
        t_end_us,
        size,
        rate_mbps,
        ftype: FrameTypeKey { kind, subtype },
        sender,
        retry,
        fcs_ok,
    })
}

/// Writes the canonical trace format.
///
/// UTF-8 text: a header line `#wifiprint-trace v1 origin=<unix-epoch-µs>`
/// followed by one frame per line with space-separated fields
/// `t_end_us size_bytes rate_mbps|- type_word subtype sender_mac|- retry fcs_ok`.
/// Parsing the output recovers the trace exactly.
pub fn write_canonical<W: Write>(trace: &CanonicalTrace, mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "{}{}", HEADER_PREFIX, trace.origin_us)?;
    for f in &trace.frames {
        write!(writer, "{} {} ", f.t_end_us, f.size)?;
        match f.rate_mbps {
            Some(r) => write!(writer, "{}", r)?,
            None => write!(writer, "-")?,
        }
        write!(writer, " {} {} ", f.ftype.kind.word(), f.ftype.subtype)?;
        match f.sender {
            Some(s) => write!(writer, "{}", s)?,
            None => write!(writer, "-")?,
        }
        writeln!(
            writer,
            " {} {}",
            if f.retry { 1 } else { 0 },
            if f.fcs_ok { 1 } else { 0 }
        )?;
    }
    Ok(())
}

/// Writes a trace to a string (infallible convenience for tests and tools).
pub fn to_canonical_string(trace: &CanonicalTrace) -> String {
    let mut buf = Vec::new();
    write_canonical(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("canonical format is UTF-8")
}
