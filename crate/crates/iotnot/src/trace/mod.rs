//! Capture ingestion: pcap parsing, frame decoding, the normalized packet
//! record schema, JSONL event logs, device manifests, and per-device demux.

pub mod decode;
pub mod demux;
pub mod event_log;
pub mod manifest;
pub mod pcap;
pub mod record;

pub use decode::{decode_frame, DecodedFrame};
pub use demux::{demux_by_device, group_by_device, DeviceTrace};
pub use event_log::{read_event_log, write_event_log};
pub use manifest::{read_manifest, Manifest, ManifestEntry};
pub use pcap::{parse_pcap, read_pcap, RawFrame};
pub use record::{
    Direction, DnsPart, DhcpPart, HttpUaPart, IpPart, PacketRecord, TcpPart, Transport, UdpPart,
};

use thiserror::Error;

/// Errors raised while ingesting captures, event logs, or manifests.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// The file does not start with a recognized pcap magic number.
    #[error("not a pcap file: unrecognized magic {0:#010x}")]
    BadMagic(u32),
    /// The capture's link type is not Ethernet.
    #[error("unsupported link type {0} (only Ethernet captures are supported)")]
    UnsupportedLinkType(u32),
    /// The file ends inside the global header.
    #[error("truncated pcap global header")]
    TruncatedHeader,
    /// A record header or body extends past the end of the file.
    #[error("truncated pcap record at index {index}")]
    TruncatedRecord { index: usize },
    /// A line of an event log failed to parse or validate.
    #[error("event log line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("manifest header must be exactly \"mac,name,label\"")]
    ManifestHeader,
    #[error("manifest line {line}: {reason}")]
    ManifestRow { line: usize, reason: String },
    #[error("manifest lists MAC {0} more than once")]
    DuplicateMac(crate::types::MacAddr),
    #[error("manifest contains no devices")]
    EmptyManifest,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
