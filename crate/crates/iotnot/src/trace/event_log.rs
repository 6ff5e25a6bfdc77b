//! JSONL event logs: one validated `PacketRecord` per line. This is the
//! interchange format between capture extraction and everything downstream.

use super::record::PacketRecord;
use super::IngestError;
use std::io::{BufRead, Write};

pub fn write_event_log<W: Write>(mut w: W, records: &[PacketRecord]) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads and validates an event log. Any malformed or schema-violating line
/// fails the whole read with its 1-based line number.
pub fn read_event_log<R: BufRead>(r: R) -> Result<Vec<PacketRecord>, IngestError> {
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let rec: PacketRecord = serde_json::from_str(&line).map_err(|e| IngestError::Schema {
            line: n,
            reason: e.to_string(),
        })?;
        rec.validate().map_err(|reason| IngestError::Schema { line: n, reason })?;
        records.push(rec);
    }
    Ok(records)
}
