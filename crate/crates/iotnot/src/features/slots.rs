//! Cutting a device trace into fixed-width, epoch-aligned time slots.

use crate::trace::record::PacketRecord;
use crate::types::Timestamp;
use std::num::NonZeroU32;

/// Slot width configuration, in whole seconds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SlotConfig {
    pub width_secs: NonZeroU32,
}

impl SlotConfig {
    pub fn new(width_secs: u32) -> Option<Self> {
        NonZeroU32::new(width_secs).map(|width_secs| SlotConfig { width_secs })
    }
}

/// Start of the slot containing `ts`: slots are aligned to multiples of the
/// width since the epoch, so every capture slices identically.
pub fn slot_start_of(ts: Timestamp, width_secs: NonZeroU32) -> Timestamp {
    let w = width_secs.get() as i64 * 1_000_000;
    Timestamp::from_micros(ts.micros().div_euclid(w) * w)
}

/// Splits timestamp-sorted records into non-empty slots, in time order.
/// Slots with no records simply do not appear.
pub fn slice_slots(
    records: &[PacketRecord],
    width_secs: NonZeroU32,
) -> Vec<(Timestamp, &[PacketRecord])> {
    debug_assert!(
        records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp),
        "slice_slots requires timestamp-sorted records"
    );
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let start = slot_start_of(records[i].timestamp, width_secs);
        let mut j = i + 1;
        while j < records.len() && slot_start_of(records[j].timestamp, width_secs) == start {
            j += 1;
        }
        out.push((start, &records[i..j]));
        i = j;
    }
    out
}
