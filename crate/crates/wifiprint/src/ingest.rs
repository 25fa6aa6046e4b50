//! Decoding pcap captures with radiotap or Prism link headers into
//! canonical traces.
//!
//! Only the metadata the fingerprinting pipeline needs is read from the
//! link headers: the TSFT timestamp (start of reception of the first MPDU
//! bit), the transmission rate, and the bad-FCS indicator. Every frame's
//! end-of-reception instant is normalized from those: TSFT plus the
//! transmission duration when both are known, falling back to TSFT alone
//! and finally to the pcap record timestamp.
//!
//! Truncated or undecodable records are skipped with a counter, never
//! aborting the rest of the file. Frames flagged with a bad FCS are
//! excluded by default (their corrupted headers would attribute samples
//! to phantom addresses); [`IngestOptions::keep_bad_fcs`] keeps them,
//! marked `fcs_ok=0`.

use std::io::Read;

use thiserror::Error;

use crate::features::tx_duration_us;
use crate::trace::{CanonicalTrace, DeviceId, FrameKind, FrameRecord, FrameTypeKey};

/// Link-layer metadata extracted from a radiotap or Prism header.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RadioMeta {
    /// Start of reception of the first MPDU bit, µs (radiotap TSFT or
    /// Prism mactime).
    pub tsft_us: Option<u64>,
    /// Transmission rate, Mbps (decoded exactly from 500-kbps units).
    pub rate_mbps: Option<f64>,
    /// Frame failed its FCS check.
    pub bad_fcs: bool,
}

/// Per-file decode accounting. Input records are conserved:
/// total records = decoded + skipped_bad_fcs + skipped_truncated +
/// skipped_out_of_order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeCounters {
    /// Frames emitted into the trace.
    pub decoded: u64,
    /// Frames dropped for a failed FCS check (zero with keep_bad_fcs).
    pub skipped_bad_fcs: u64,
    /// Records too short or malformed to decode.
    pub skipped_truncated: u64,
    /// Frames whose normalized end-of-reception moved backwards.
    pub skipped_out_of_order: u64,
    /// Frames kept with an absent sender because the MAC header was too
    /// short for its type's transmitter field.
    pub short_mac_headers: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Keep frames that failed the FCS check (marked `fcs_ok=0`).
    pub keep_bad_fcs: bool,
}

/// A decoded capture: the trace plus its accounting.
#[derive(Debug, Clone)]
pub struct PcapDecode {
    pub trace: CanonicalTrace,
    pub counters: DecodeCounters,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("not a pcap file (magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported pcap link type {0} (expected 127 radiotap or 119 Prism)")]
    UnsupportedLinkType(u32),
    #[error("pcap record at index {index} claims {claimed} bytes; file is corrupt")]
    CorruptRecord { index: u64, claimed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const LINKTYPE_RADIOTAP: u32 = 127;
const LINKTYPE_PRISM: u32 = 119;
const MAX_RECORD_LEN: u32 = 1 << 26;

#[derive(Clone, Copy)]
struct PcapFormat {
    big_endian: bool,
    nanosecond: bool,
}

/// Reads a classic pcap capture into a canonical trace.
///
/// Accepts the four classic magics (both byte orders, µs and ns
/// timestamps) and link types 127 (radiotap) and 119 (Prism). Nanosecond
/// timestamps are truncated to microseconds.
pub fn read_pcap<R: Read>(
    mut reader: R,
    options: &IngestOptions,
) -> Result<PcapDecode, IngestError> {
    let mut header = [0u8; 24];
    reader.read_exact(&mut header).map_err(|_| {
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&header[..4]);
        IngestError::BadMagic(magic)
    })?;
    let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
    let format = match magic {
        [0xd4, 0xc3, 0xb2, 0xa1] => PcapFormat {
            big_endian: false,
            nanosecond: false,
        },
        [0xa1, 0xb2, 0xc3, 0xd4] => PcapFormat {
            big_endian: true,
            nanosecond: false,
        },
        [0x4d, 0x3c, 0xb2, 0xa1] => PcapFormat {
            big_endian: false,
            nanosecond: true,
        },
        [0xa1, 0xb2, 0x3c, 0x4d] => PcapFormat {
            big_endian: true,
            nanosecond: true,
        },
        other => return Err(IngestError::BadMagic(other)),
    };
    let read_u32 = |b: &[u8]| -> u32 {
        let arr: [u8; 4] = b.try_into().expect("4 bytes");
        if format.big_endian {
            u32::from_be_bytes(arr)
        } else {
            u32::from_le_bytes(arr)
        }
    };
    let link_type = read_u32(&header[20..24]);
    if link_type != LINKTYPE_RADIOTAP && link_type != LINKTYPE_PRISM {
        return Err(IngestError::UnsupportedLinkType(link_type));
    }

    let mut counters = DecodeCounters::default();
    let mut frames: Vec<FrameRecord> = Vec::new();
    let mut base_epoch_us: Option<u64> = None;
    let mut origin_us: Option<i64> = None;
    let mut last_t_end: Option<u64> = None;
    let mut record_index = 0u64;
    let mut record_header = [0u8; 16];
    let mut body = Vec::new();

    loop {
        match read_exact_or_eof(&mut reader, &mut record_header)? {
            ReadOutcome::Eof => break,
            ReadOutcome::Partial => {
                counters.skipped_truncated += 1;
                break;
            }
            ReadOutcome::Full => {}
        }
        record_index += 1;
        let ts_sec = read_u32(&record_header[0..4]) as u64;
        let ts_frac = read_u32(&record_header[4..8]) as u64;
        let incl_len = read_u32(&record_header[8..12]);
        let orig_len = read_u32(&record_header[12..16]);
        if incl_len > MAX_RECORD_LEN {
            return Err(IngestError::CorruptRecord {
                index: record_index,
                claimed: incl_len,
            });
        }
        body.resize(incl_len as usize, 0);
        match read_exact_or_eof(&mut reader, &mut body)? {
            ReadOutcome::Eof | ReadOutcome::Partial if incl_len > 0 => {
                counters.skipped_truncated += 1;
                break;
            }
            _ => {}
        }
        let epoch_us = ts_sec * 1_000_000
            + if format.nanosecond {
                ts_frac / 1_000
            } else {
                ts_frac
            };
        let base = *base_epoch_us.get_or_insert(epoch_us);

        let parsed = match link_type {
            LINKTYPE_RADIOTAP => parse_radiotap(&body),
            _ => parse_prism(&body, format.big_endian),
        };
        let Some((meta, link_len)) = parsed else {
            counters.skipped_truncated += 1;
            continue;
        };
        // On-air MPDU size: the original frame minus the link header.
        let size = orig_len.saturating_sub(link_len as u32);
        let mpdu = &body[link_len.min(body.len())..];
        if size < 1 || mpdu.len() < 2 {
            counters.skipped_truncated += 1;
            continue;
        }
        let fc0 = mpdu[0];
        let kind = match (fc0 >> 2) & 0x3 {
            0 => FrameKind::Management,
            1 => FrameKind::Control,
            2 => FrameKind::Data,
            _ => {
                counters.skipped_truncated += 1;
                continue;
            }
        };
        let ftype = FrameTypeKey::new(kind, (fc0 >> 4) & 0xf);
        let retry = mpdu[1] & 0x08 != 0;

        if meta.bad_fcs && !options.keep_bad_fcs {
            counters.skipped_bad_fcs += 1;
            continue;
        }

        let sender = extract_transmitter(mpdu);
        if sender.is_none() && wants_transmitter(ftype) {
            counters.short_mac_headers += 1;
        }

        let rel_ts = epoch_us.saturating_sub(base);
        let t_end_us = end_of_reception(meta.tsft_us, rel_ts, size, meta.rate_mbps);
        if epoch_us < base || last_t_end.is_some_and(|last| t_end_us < last) {
            counters.skipped_out_of_order += 1;
            continue;
        }
        last_t_end = Some(t_end_us);
        // Anchor the origin so that origin + t_end is absolute epoch time
        // at the first emitted frame.
        origin_us.get_or_insert(epoch_us as i64 - t_end_us as i64);

        frames.push(FrameRecord {
            t_end_us,
            size,
            rate_mbps: meta.rate_mbps,
            ftype,
            sender,
            retry,
            fcs_ok: !meta.bad_fcs,
        });
        counters.decoded += 1;
    }

    let trace = CanonicalTrace::new(origin_us.unwrap_or(0), frames)
        .expect("decoder emits ordered, valid frames");
    Ok(PcapDecode { trace, counters })
}

enum ReadOutcome {
    Full,
    Partial,
    Eof,
}

fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> std::io::Result<ReadOutcome> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => {
                return Ok(if filled == 0 {
                    ReadOutcome::Eof
                } else {
                    ReadOutcome::Partial
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(ReadOutcome::Full)
}

/// Normalizes a frame's end-of-reception instant, µs.
///
/// TSFT marks the start of reception, so with a known rate the end is
/// TSFT plus the transmission time (rounded up to whole µs); without a
/// rate the TSFT itself is the best available instant. Without TSFT the
/// pcap record timestamp is used and treated as end of reception.
pub fn end_of_reception(
    tsft_us: Option<u64>,
    pcap_ts_us: u64,
    size: u32,
    rate: Option<f64>,
) -> u64 {
    match (tsft_us, rate) {
        (Some(t), Some(r)) => t + tx_duration_us(size, r),
        (Some(t), None) => t,
        (None, _) => pcap_ts_us,
    }
}

/// Whether this frame type's MAC header defines a transmitter address.
fn wants_transmitter(ftype: FrameTypeKey) -> bool {
    match ftype.kind {
        FrameKind::Management | FrameKind::Data => true,
        // BAR, Block-ACK, PS-Poll, RTS
        FrameKind::Control => matches!(ftype.subtype, 8..=11),
    }
}

/// Extracts the transmitter address (Address 2) from an 802.11 MAC
/// header, for the types that define one: all data and management frames
/// plus the RTS, PS-Poll, Block-ACK and Block-ACK-Req control frames.
/// ACK and CTS frames carry no transmitter, so the sender stays unknown.
pub fn extract_transmitter(header: &[u8]) -> Option<DeviceId> {
    if header.len() < 2 {
        return None;
    }
    let fc0 = header[0];
    let kind = (fc0 >> 2) & 0x3;
    let subtype = (fc0 >> 4) & 0xf;
    let has_addr2 = match kind {
        0 | 2 => true,
        // BAR, Block-ACK, PS-Poll, RTS
        1 => matches!(subtype, 8..=11),
        _ => false,
    };
    if !has_addr2 || header.len() < 16 {
        return None;
    }
    Some(DeviceId::new(header[10..16].try_into().expect("6 bytes")))
}

// Radiotap presence bits consumed by the pipeline.
const RT_TSFT: u32 = 0;
const RT_FLAGS: u32 = 1;
const RT_RATE: u32 = 2;
const RT_EXT: u32 = 31;
const RT_FLAG_BADFCS: u8 = 0x40;

/// Parses the radiotap fields the pipeline consumes (TSFT, Flags, Rate).
///
/// Little-endian throughout; the presence bitmap chains while bit 31 is
/// set; fields sit at their natural alignment relative to the header
/// start. Returns the metadata and the total header length, or `None`
/// when the header is truncated or malformed.
pub fn parse_radiotap(bytes: &[u8]) -> Option<(RadioMeta, usize)> {
    if bytes.len() < 8 || bytes[0] != 0 {
        return None;
    }
    let header_len = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
    if header_len < 8 || header_len > bytes.len() {
        return None;
    }
    let mut presence = Vec::new();
    let mut offset = 4;
    loop {
        if offset + 4 > header_len {
            return None;
        }
        let word = u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"));
        offset += 4;
        presence.push(word);
        if word & (1 << RT_EXT) == 0 {
            break;
        }
    }
    let present = |bit: u32| presence[0] & (1 << bit) != 0;

    let mut meta = RadioMeta::default();
    if present(RT_TSFT) {
        offset = align_to(offset, 8);
        if offset + 8 > header_len {
            return None;
        }
        let raw = u64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
        meta.tsft_us = Some(raw);
        offset += 8;
    }
    if present(RT_FLAGS) {
        if offset + 1 > header_len {
            return None;
        }
        meta.bad_fcs = bytes[offset] & RT_FLAG_BADFCS != 0;
        offset += 1;
    }
    if present(RT_RATE) {
        if offset + 1 > header_len {
            return None;
        }
        // 500 kbps units, decoded exactly; 0 means the driver did not know
        if bytes[offset] > 0 {
            meta.rate_mbps = Some(bytes[offset] as f64 / 2.0);
        }
    }
    Some((meta, header_len))
}

fn align_to(offset: usize, align: usize) -> usize {
    offset.div_ceil(align) * align
}

// Prism (wlan-ng) DID codes for the fields the pipeline reads.
const PRISM_DID_MACTIME: u32 = 0x2041;
const PRISM_DID_RATE: u32 = 0x8041;
const PRISM_STATUS_SUPPLIED: u16 = 0;

/// Parses a Prism monitoring header: a thin adapter reading only mactime
/// (µs timestamp) and rate. Prism headers carry no FCS indicator.
pub fn parse_prism(bytes: &[u8], big_endian: bool) -> Option<(RadioMeta, usize)> {
    let u32_at = |off: usize| -> Option<u32> {
        let arr: [u8; 4] = bytes.get(off..off + 4)?.try_into().ok()?;
        Some(if big_endian {
            u32::from_be_bytes(arr)
        } else {
            u32::from_le_bytes(arr)
        })
    };
    let u16_at = |off: usize| -> Option<u16> {
        let arr: [u8; 2] = bytes.get(off..off + 2)?.try_into().ok()?;
        Some(if big_endian {
            u16::from_be_bytes(arr)
        } else {
            u16::from_le_bytes(arr)
        })
    };

    let msg_len = u32_at(4)? as usize;
    // msgcode(4) + msglen(4) + devname(16), then 12-byte DID items
    if msg_len < 24 || msg_len > bytes.len() {
        return None;
    }
    let mut meta = RadioMeta::default();
    let mut offset = 24;
    while offset + 12 <= msg_len {
        let did = u32_at(offset)?;
        let status = u16_at(offset + 4)?;
        let len = u16_at(offset + 6)?;
        let data = u32_at(offset + 8)?;
        if status == PRISM_STATUS_SUPPLIED && len == 4 {
            match did {
                PRISM_DID_MACTIME => meta.tsft_us = Some(data as u64),
                PRISM_DID_RATE if data > 0 => meta.rate_mbps = Some(data as f64 / 2.0),
                _ => {}
            }
        }
        offset += 12;
    }
    Some((meta, msg_len))
}

#[cfg(test)]
pub mod testutil {
    //! Hand-assembled capture fixtures shared by unit, integration and
    //! acceptance tests.

    /// Builds a classic little-endian µs pcap file from raw records.
    pub fn pcap_file(link_type: u32, records: &[(u32, u32, Vec<u8>)]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&0xa1b2c3d4u32.to_le_bytes()); // magic, LE µs
        out.extend_from_slice(&2u16.to_le_bytes()); // major
        out.extend_from_slice(&4u16.to_le_bytes()); // minor
        out.extend_from_slice(&0i32.to_le_bytes()); // thiszone
        out.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
        out.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
        out.extend_from_slice(&link_type.to_le_bytes());
        for (ts_sec, ts_usec, body) in records {
            out.extend_from_slice(&ts_sec.to_le_bytes());
            out.extend_from_slice(&ts_usec.to_le_bytes());
            out.extend_from_slice(&(body.len() as u32).to_le_bytes());
            out.extend_from_slice(&(body.len() as u32).to_le_bytes());
            out.extend_from_slice(body);
        }
        out
    }

    /// Radiotap header with TSFT + Flags + Rate present.
    ///
    /// Layout (hand-checked against the radiotap alignment rules):
    /// version 0, pad, len=18, presence 0x0000_0007, then TSFT aligned to
    /// 8 (offset 8), Flags at 16, Rate at 17.
    pub fn radiotap_header(tsft_us: u64, flags: u8, rate_half_mbps: u8) -> Vec<u8> {
        let mut h = vec![0u8, 0];
        h.extend_from_slice(&18u16.to_le_bytes());
        h.extend_from_slice(&0x0000_0007u32.to_le_bytes());
        h.extend_from_slice(&tsft_us.to_le_bytes());
        h.push(flags);
        h.push(rate_half_mbps);
        h
    }

    /// Minimal 802.11 data-frame MAC header (24 bytes) plus `payload`
    /// bytes of zeros; Address 2 (transmitter) set to `addr2`.
    pub fn data_mpdu(addr2: [u8; 6], total_size: usize) -> Vec<u8> {
        assert!(total_size >= 24);
        let mut m = vec![0u8; total_size];
        m[0] = 0x08; // type data, subtype 0
        m[10..16].copy_from_slice(&addr2);
        m
    }

    /// 10-byte ACK frame (FC + duration + receiver address).
    pub fn ack_mpdu() -> Vec<u8> {
        let mut m = vec![0u8; 10];
        m[0] = 0xd4; // type control, subtype 13
        m[4..10].copy_from_slice(&[0xff; 6]);
        m
    }

    /// 16-byte RTS frame (receiver + transmitter addresses).
    pub fn rts_mpdu(ta: [u8; 6]) -> Vec<u8> {
        let mut m = vec![0u8; 16];
        m[0] = 0xb4; // type control, subtype 11
        m[10..16].copy_from_slice(&ta);
        m
    }

    /// Prism header (144 bytes, wlan-ng layout) with mactime and rate.
    pub fn prism_header(mactime_us: u32, rate_half_mbps: u32) -> Vec<u8> {
        let mut h = Vec::with_capacity(144);
        h.extend_from_slice(&0x0041u32.to_le_bytes()); // msgcode
        h.extend_from_slice(&144u32.to_le_bytes()); // msglen
        h.extend_from_slice(&[0u8; 16]); // devname
        let dids: [(u32, u32); 10] = [
            (0x1041, 0),              // hosttime
            (0x2041, mactime_us),     // mactime
            (0x3041, 6),              // channel
            (0x4041, 0),              // rssi
            (0x5041, 0),              // sq
            (0x6041, 0),              // signal
            (0x7041, 0),              // noise
            (0x8041, rate_half_mbps), // rate
            (0x9041, 0),              // istx
            (0xA041, 0),              // frmlen
        ];
        for (did, data) in dids {
            h.extend_from_slice(&did.to_le_bytes());
            h.extend_from_slice(&0u16.to_le_bytes()); // status: supplied
            h.extend_from_slice(&4u16.to_le_bytes()); // len
            h.extend_from_slice(&data.to_le_bytes());
        }
        assert_eq!(h.len(), 144);
        h
    }
}
