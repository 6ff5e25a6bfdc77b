//! Device manifest: a CSV mapping each monitored MAC to a human-readable
//! name and its ground-truth class. Header is exactly `mac,name,label`;
//! labels are `IoT` or `NoT` (case-insensitive), names are free strings.

use super::IngestError;
use crate::types::{Label, MacAddr};
use std::collections::BTreeMap;
use std::io::Read;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ManifestEntry {
    pub mac: MacAddr,
    pub name: String,
    pub label: Label,
}

/// Parsed manifest, preserving file order, with O(log n) label lookup.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
    by_mac: BTreeMap<MacAddr, Label>,
}

impl Manifest {
    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn label_of(&self, mac: MacAddr) -> Option<Label> {
        self.by_mac.get(&mac).copied()
    }

    pub fn contains(&self, mac: MacAddr) -> bool {
        self.by_mac.contains_key(&mac)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Device keys in file order.
    pub fn macs(&self) -> impl Iterator<Item = MacAddr> + '_ {
        self.entries.iter().map(|e| e.mac)
    }
}

pub fn read_manifest<R: Read>(r: R) -> Result<Manifest, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut rows = reader.records();

    let header = rows.next().ok_or(IngestError::ManifestHeader)??;
    if header.len() != 3 || &header[0] != "mac" || &header[1] != "name" || &header[2] != "label" {
        return Err(IngestError::ManifestHeader);
    }

    let mut manifest = Manifest::default();
    for (i, row) in rows.enumerate() {
        let line = i + 2; // 1-based, after the header line
        let row = row?;
        if row.len() != 3 {
            return Err(IngestError::ManifestRow {
                line,
                reason: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let mac: MacAddr = row[0].trim().parse().map_err(|e: crate::types::MacParseError| {
            IngestError::ManifestRow { line, reason: e.to_string() }
        })?;
        let name = row[1].trim().to_string();
        let label: Label = row[2].trim().parse().map_err(|e: crate::types::LabelParseError| {
            IngestError::ManifestRow { line, reason: e.to_string() }
        })?;
        if manifest.by_mac.insert(mac, label).is_some() {
            return Err(IngestError::DuplicateMac(mac));
        }
        manifest.entries.push(ManifestEntry { mac, name, label });
    }
    if manifest.entries.is_empty() {
        return Err(IngestError::EmptyManifest);
    }
    Ok(manifest)
}
