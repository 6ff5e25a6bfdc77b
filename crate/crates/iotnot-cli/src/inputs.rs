//! Shared input plumbing: captures or event logs into timestamp-sorted
//! records, manifests, and output files, with every failure mapped to a
//! one-line error.

use crate::{CliError, InputArgs};
use iotnot::trace::{demux_by_device, read_event_log, read_manifest, read_pcap, Manifest, PacketRecord, RawFrame};
use iotnot::types::MacAddr;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

pub fn data_err(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {err}", path.display()))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    read_manifest(BufReader::new(file)).map_err(|e| data_err(path, e))
}

/// Reads the selected input into globally timestamp-sorted records. Pcap
/// frames need a manifest to be attributed to monitored devices; event-log
/// records already carry the device key, so there the manifest (when given)
/// only filters out unmonitored devices.
pub fn load_records(
    input: &InputArgs,
    manifest: Option<&Manifest>,
) -> Result<Vec<PacketRecord>, CliError> {
    let mut records = if let Some(path) = &input.events {
        let file = File::open(path).map_err(|e| data_err(path, e))?;
        let mut records = read_event_log(BufReader::new(file)).map_err(|e| data_err(path, e))?;
        if let Some(manifest) = manifest {
            records.retain(|r| manifest.contains(r.device_key));
        }
        records
    } else {
        let manifest = manifest.ok_or_else(|| {
            CliError::Usage("--pcap input needs --manifest to attribute frames to devices".into())
        })?;
        let mut frames: Vec<RawFrame> = Vec::new();
        for path in &input.pcap {
            frames.extend(read_pcap(path).map_err(|e| data_err(path, e))?);
        }
        demux_by_device(&frames, manifest).map_err(|e| CliError::Data(e.to_string()))?
    };
    // Stable, so same-microsecond records keep their input order.
    records.sort_by_key(|r| r.timestamp.micros());
    Ok(records)
}

/// Splits globally sorted records into per-device runs, keyed in MAC order.
pub fn group_records(records: Vec<PacketRecord>) -> BTreeMap<MacAddr, Vec<PacketRecord>> {
    let mut map: BTreeMap<MacAddr, Vec<PacketRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.device_key).or_default().push(r);
    }
    map
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| data_err(path, e))
}
