//! Attributes decoded frames to monitored devices and groups records into
//! per-device traces.

use super::decode::decode_frame;
use super::manifest::Manifest;
use super::pcap::RawFrame;
use super::record::{Direction, PacketRecord};
use super::IngestError;
use crate::types::{Label, MacAddr};
use std::collections::BTreeMap;

/// All records for one device, sorted by timestamp (capture order on ties).
#[derive(Clone, PartialEq, Debug)]
pub struct DeviceTrace {
    pub device_key: MacAddr,
    pub label: Label,
    pub records: Vec<PacketRecord>,
}

/// Turns captured frames into per-device records. A frame sent by a monitored
/// device yields an `Outgoing` record for it; a frame addressed to a
/// (different) monitored device yields an `Incoming` record for that device,
/// so one frame produces at most two records. Unmonitored endpoints and
/// frames too short to carry Ethernet are dropped.
pub fn demux_by_device(
    frames: &[RawFrame],
    manifest: &Manifest,
) -> Result<Vec<PacketRecord>, IngestError> {
    if manifest.is_empty() {
        return Err(IngestError::EmptyManifest);
    }
    let mut records = Vec::new();
    for frame in frames {
        let Some(decoded) = decode_frame(frame) else {
            continue;
        };
        let (src, dst) = (decoded.src_mac, decoded.dst_mac);
        let src_monitored = manifest.contains(src);
        let dst_monitored = dst != src && manifest.contains(dst);
        if src_monitored && dst_monitored {
            records.push(decoded.clone().into_record(src, Direction::Outgoing));
            records.push(decoded.into_record(dst, Direction::Incoming));
        } else if src_monitored {
            records.push(decoded.into_record(src, Direction::Outgoing));
        } else if dst_monitored {
            records.push(decoded.into_record(dst, Direction::Incoming));
        }
    }
    Ok(records)
}

/// Groups records by device (ascending MAC) and stably sorts each trace by
/// timestamp, so equal timestamps keep their input order. Records for devices
/// absent from the manifest are dropped.
pub fn group_by_device(
    records: &[PacketRecord],
    manifest: &Manifest,
) -> Result<Vec<DeviceTrace>, IngestError> {
    if manifest.is_empty() {
        return Err(IngestError::EmptyManifest);
    }
    let mut by_device: BTreeMap<MacAddr, Vec<PacketRecord>> = BTreeMap::new();
    for rec in records {
        if manifest.contains(rec.device_key) {
            by_device.entry(rec.device_key).or_default().push(rec.clone());
        }
    }
    Ok(by_device
        .into_iter()
        .map(|(device_key, mut records)| {
            records.sort_by_key(|r| r.timestamp);
            let label = manifest.label_of(device_key).unwrap();
            DeviceTrace { device_key, label, records }
        })
        .collect())
}
