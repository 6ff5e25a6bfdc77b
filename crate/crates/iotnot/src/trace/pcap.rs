//! Classic pcap reader. Handles both byte orders and both timestamp
//! resolutions; only Ethernet (link type 1) captures are accepted.

use super::IngestError;
use crate::types::Timestamp;
use std::path::Path;

/// One captured frame: timestamp, original on-wire length, captured bytes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RawFrame {
    pub ts: Timestamp,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

impl RawFrame {
    /// Best estimate of the on-wire length: the snaplen may clip `data`, and
    /// some writers record orig_len smaller than what they captured.
    pub fn frame_len(&self) -> u32 {
        self.orig_len.max(self.data.len() as u32)
    }
}

const MAGIC_US: u32 = 0xa1b2_c3d4;
const MAGIC_US_SWAPPED: u32 = 0xd4c3_b2a1;
const MAGIC_NS: u32 = 0xa1b2_3c4d;
const MAGIC_NS_SWAPPED: u32 = 0x4d3c_b2a1;

fn read_u32(bytes: &[u8], off: usize, big_endian: bool) -> u32 {
    let b: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
    if big_endian {
        u32::from_be_bytes(b)
    } else {
        u32::from_le_bytes(b)
    }
}

/// Parses an in-memory pcap file into frames, in capture order.
pub fn parse_pcap(bytes: &[u8]) -> Result<Vec<RawFrame>, IngestError> {
    if bytes.len() < 4 {
        return Err(IngestError::TruncatedHeader);
    }
    let magic_le = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let (big_endian, nanos) = match magic_le {
        MAGIC_US => (false, false),
        MAGIC_US_SWAPPED => (true, false),
        MAGIC_NS => (false, true),
        MAGIC_NS_SWAPPED => (true, true),
        other => return Err(IngestError::BadMagic(other)),
    };
    if bytes.len() < 24 {
        return Err(IngestError::TruncatedHeader);
    }
    let network = read_u32(bytes, 20, big_endian);
    if network != 1 {
        return Err(IngestError::UnsupportedLinkType(network));
    }

    let mut frames = Vec::new();
    let mut off = 24;
    let mut index = 0usize;
    while off < bytes.len() {
        if bytes.len() - off < 16 {
            return Err(IngestError::TruncatedRecord { index });
        }
        let ts_sec = read_u32(bytes, off, big_endian);
        let ts_frac = read_u32(bytes, off + 4, big_endian);
        let incl_len = read_u32(bytes, off + 8, big_endian) as usize;
        let orig_len = read_u32(bytes, off + 12, big_endian);
        off += 16;
        if bytes.len() - off < incl_len {
            return Err(IngestError::TruncatedRecord { index });
        }
        let micros = if nanos {
            // Sub-microsecond part rounds half-up.
            (ts_frac as i64 + 500) / 1000
        } else {
            ts_frac as i64
        };
        frames.push(RawFrame {
            ts: Timestamp::from_micros(ts_sec as i64 * 1_000_000 + micros),
            orig_len,
            data: bytes[off..off + incl_len].to_vec(),
        });
        off += incl_len;
        index += 1;
    }
    Ok(frames)
}

/// Reads and parses a pcap file from disk.
pub fn read_pcap(path: impl AsRef<Path>) -> Result<Vec<RawFrame>, IngestError> {
    let bytes = std::fs::read(path)?;
    parse_pcap(&bytes)
}
