//! Per-slot traffic features: the canonical feature list, slot slicing,
//! extraction from packet records, and the feature-table CSV format.

pub mod extract;
pub mod lls;
pub mod slots;

pub use extract::{extract_features, extract_trace};
pub use slots::{slice_slots, slot_start_of, SlotConfig};

use crate::trace::IngestError;
use crate::types::{Label, MacAddr, Timestamp};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

/// Number of traffic features in [`FeatureId::ALL`].
pub const FEATURE_COUNT: usize = 22;

/// Every per-slot traffic feature, in canonical order. The order is part of
/// the on-disk contract: feature CSV columns, model vectors, and tie-breaking
/// in selection all follow it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    PktCount,
    BandwidthBytes,
    AvgPktLen,
    AvgInterleave,
    StdInterleave,
    NRemoteIps,
    AvgTtl,
    AvgIpHdrLen,
    MaxIpHdrLen,
    MinIpHdrLen,
    NUniqueIpHdrLen,
    NPorts,
    TcpUdpRatio,
    NRemoteEndpoints,
    MaxTcpWindow,
    MeanTcpWindow,
    MinTcpWindow,
    NUniqueTcpWindow,
    TcptsLlsError,
    NUniqueDns,
    NDns,
    AvgUaLen,
}

impl FeatureId {
    pub const ALL: [FeatureId; FEATURE_COUNT] = [
        FeatureId::PktCount,
        FeatureId::BandwidthBytes,
        FeatureId::AvgPktLen,
        FeatureId::AvgInterleave,
        FeatureId::StdInterleave,
        FeatureId::NRemoteIps,
        FeatureId::AvgTtl,
        FeatureId::AvgIpHdrLen,
        FeatureId::MaxIpHdrLen,
        FeatureId::MinIpHdrLen,
        FeatureId::NUniqueIpHdrLen,
        FeatureId::NPorts,
        FeatureId::TcpUdpRatio,
        FeatureId::NRemoteEndpoints,
        FeatureId::MaxTcpWindow,
        FeatureId::MeanTcpWindow,
        FeatureId::MinTcpWindow,
        FeatureId::NUniqueTcpWindow,
        FeatureId::TcptsLlsError,
        FeatureId::NUniqueDns,
        FeatureId::NDns,
        FeatureId::AvgUaLen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::PktCount => "pkt_count",
            FeatureId::BandwidthBytes => "bandwidth_bytes",
            FeatureId::AvgPktLen => "avg_pkt_len",
            FeatureId::AvgInterleave => "avg_interleave",
            FeatureId::StdInterleave => "std_interleave",
            FeatureId::NRemoteIps => "n_remote_ips",
            FeatureId::AvgTtl => "avg_ttl",
            FeatureId::AvgIpHdrLen => "avg_ip_hdr_len",
            FeatureId::MaxIpHdrLen => "max_ip_hdr_len",
            FeatureId::MinIpHdrLen => "min_ip_hdr_len",
            FeatureId::NUniqueIpHdrLen => "n_unique_ip_hdr_len",
            FeatureId::NPorts => "n_ports",
            FeatureId::TcpUdpRatio => "tcp_udp_ratio",
            FeatureId::NRemoteEndpoints => "n_remote_endpoints",
            FeatureId::MaxTcpWindow => "max_tcp_window",
            FeatureId::MeanTcpWindow => "mean_tcp_window",
            FeatureId::MinTcpWindow => "min_tcp_window",
            FeatureId::NUniqueTcpWindow => "n_unique_tcp_window",
            FeatureId::TcptsLlsError => "tcpts_lls_error",
            FeatureId::NUniqueDns => "n_unique_dns",
            FeatureId::NDns => "n_dns",
            FeatureId::AvgUaLen => "avg_ua_len",
        }
    }

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        FeatureId::ALL.iter().position(|f| *f == self).unwrap()
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown feature name {0:?}")]
pub struct UnknownFeature(pub String);

impl FromStr for FeatureId {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureId::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFeature(s.to_string()))
    }
}

/// One device-slot's feature vector. `values` follows [`FeatureId::ALL`];
/// `None` means the feature was undefined in that slot (no underlying data).
#[derive(Clone, PartialEq, Debug)]
pub struct SlotFeatures {
    pub device_key: MacAddr,
    pub slot_start: Timestamp,
    /// Slot width in seconds.
    pub width: u32,
    pub values: [Option<f64>; FEATURE_COUNT],
}

impl SlotFeatures {
    pub fn get(&self, id: FeatureId) -> Option<f64> {
        self.values[id.index()]
    }

    pub fn set(&mut self, id: FeatureId, value: Option<f64>) {
        self.values[id.index()] = value;
    }
}

/// A slot joined with its device's ground-truth label, for training.
#[derive(Clone, PartialEq, Debug)]
pub struct LabeledSlot {
    pub slot: SlotFeatures,
    pub label: Label,
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that round-trips the exact f64.
    format!("{v}")
}

/// Writes a feature table as CSV: `device_key,slot_start,width` followed by
/// the 22 feature columns in canonical order. Undefined values are empty.
pub fn write_features_csv<W: Write>(w: W, rows: &[SlotFeatures]) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["device_key".to_string(), "slot_start".into(), "width".into()];
    header.extend(FeatureId::ALL.iter().map(|f| f.name().to_string()));
    out.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.device_key.to_string(),
            fmt_f64(row.slot_start.seconds()),
            row.width.to_string(),
        ];
        rec.extend(
            row.values
                .iter()
                .map(|v| v.map(fmt_f64).unwrap_or_default()),
        );
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a feature table written by [`write_features_csv`], validating the
/// header and every field.
pub fn read_features_csv<R: Read>(r: R) -> Result<Vec<SlotFeatures>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut rows = reader.records();

    let schema_err = |line: usize, reason: String| IngestError::Schema { line, reason };

    let header = rows
        .next()
        .ok_or_else(|| schema_err(1, "missing feature CSV header".into()))??;
    let expected: Vec<&str> = ["device_key", "slot_start", "width"]
        .into_iter()
        .chain(FeatureId::ALL.iter().map(|f| f.name()))
        .collect();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != *b) {
        return Err(schema_err(1, "feature CSV header does not match the canonical columns".into()));
    }

    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row?;
        if row.len() != expected.len() {
            return Err(schema_err(
                line,
                format!("expected {} fields, found {}", expected.len(), row.len()),
            ));
        }
        let device_key: MacAddr = row[0]
            .parse()
            .map_err(|e: crate::types::MacParseError| schema_err(line, e.to_string()))?;
        let slot_start_secs: f64 = row[1]
            .parse()
            .map_err(|_| schema_err(line, format!("bad slot_start {:?}", &row[1])))?;
        let width: u32 = row[2]
            .parse()
            .map_err(|_| schema_err(line, format!("bad width {:?}", &row[2])))?;
        let mut values = [None; FEATURE_COUNT];
        for (k, field) in row.iter().skip(3).enumerate() {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                schema_err(line, format!("bad value {:?} for {}", field, FeatureId::ALL[k]))
            })?;
            if !v.is_finite() {
                return Err(schema_err(line, format!("non-finite value for {}", FeatureId::ALL[k])));
            }
            values[k] = Some(v);
        }
        out.push(SlotFeatures {
            device_key,
            slot_start: Timestamp::from_seconds(slot_start_secs),
            width,
            values,
        });
    }
    Ok(out)
}
