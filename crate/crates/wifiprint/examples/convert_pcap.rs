//! Decode a monitor-mode pcap capture into the canonical trace format.
//!
//! Pass a capture file (link type 127 radiotap or 119 Prism), or run with
//! no arguments to decode a tiny capture assembled in memory:
//!
//! ```bash
//! cargo run --example convert_pcap [capture.pcap]
//! ```

use std::io::Write;

use wifiprint::ingest::{read_pcap, IngestOptions};
use wifiprint::trace::write_canonical;

fn main() {
    let decode = match std::env::args().nth(1) {
        Some(path) => {
            let file = std::fs::File::open(&path).expect("open capture");
            read_pcap(std::io::BufReader::new(file), &IngestOptions::default())
                .expect("decode capture")
        }
        None => {
            let bytes = demo_capture();
            println!(
                "(no file given; decoding a {}-byte in-memory capture)\n",
                bytes.len()
            );
            read_pcap(bytes.as_slice(), &IngestOptions::default()).expect("decode demo capture")
        }
    };

    let c = decode.counters;
    eprintln!(
        "decoded={} skipped_bad_fcs={} skipped_truncated={} skipped_out_of_order={}",
        c.decoded, c.skipped_bad_fcs, c.skipped_truncated, c.skipped_out_of_order
    );
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    write_canonical(&decode.trace, &mut out).expect("write trace");
    out.flush().expect("flush");
}

/// A two-frame radiotap capture: a 1500-byte data frame at 54 Mbps and
/// the ACK answering it.
fn demo_capture() -> Vec<u8> {
    let mut out = Vec::new();
    // classic pcap global header: little-endian, µs, link type 127
    out.extend_from_slice(&0xa1b2c3d4u32.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&65535u32.to_le_bytes());
    out.extend_from_slice(&127u32.to_le_bytes());

    // radiotap header: TSFT + Flags + Rate present, 18 bytes total
    let radiotap = |tsft: u64, rate_half_mbps: u8| {
        let mut h = vec![0u8, 0];
        h.extend_from_slice(&18u16.to_le_bytes());
        h.extend_from_slice(&0x7u32.to_le_bytes());
        h.extend_from_slice(&tsft.to_le_bytes());
        h.push(0); // flags: FCS ok
        h.push(rate_half_mbps);
        h
    };

    // data frame from aa:bb:cc:dd:ee:01
    let mut data = vec![0u8; 1500];
    data[0] = 0x08;
    data[10..16].copy_from_slice(&[0xaa, 0xbb, 0xcc, 0xdd, 0xee, 0x01]);
    // ACK: no transmitter address at all
    let mut ack = vec![0u8; 10];
    ack[0] = 0xd4;
    ack[4..10].copy_from_slice(&[0xaa; 6]);

    for (ts_usec, body) in [
        (0u32, [radiotap(1000, 108), data].concat()),
        (300, [radiotap(1250, 48), ack].concat()),
    ] {
        out.extend_from_slice(&1u32.to_le_bytes()); // ts_sec
        out.extend_from_slice(&ts_usec.to_le_bytes());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
    }
    out
}
