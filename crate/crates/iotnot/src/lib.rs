//! Decides, from short windows of LAN traffic, whether each device on a
//! network is a single-purpose appliance (IoT) or a general-purpose machine
//! (NoT).
//!
//! The pipeline: capture files or packet-event logs are demultiplexed into
//! per-device traces ([`trace`]), traces are cut into fixed-width time slots
//! and summarized into feature vectors ([`features`]), and verdicts come from
//! a regularized linear classifier over standardized features ([`linear`]),
//! a decision tree over DHCP-derived labels ([`dhcp`]), or a weighted vote
//! that combines both across several slot widths ([`unified`]). Feature
//! subsets are chosen by greedy forward selection under device-level
//! cross-validation ([`selection`]); [`eval`] computes the usual confusion
//! metrics plus per-device success rates.
//!
//! All training and selection routines are deterministic functions of their
//! inputs and configured seeds.

pub mod dhcp;
pub mod eval;
pub mod features;
pub mod linear;
pub mod persist;
pub mod selection;
pub mod trace;
pub mod types;
pub mod unified;
