//! Test-only support crate: byte-level frame builders, a pcap writer, and
//! seeded synthetic corpora for exercising the classification pipeline.

pub mod corpus;
pub mod frames;

pub use corpus::{
    dhcp_examples, dhcp_part_for, dhcp_record, dhcp_rule, traffic_corpus, TrafficCorpus,
    TrafficProfile, IOT_PROFILE, NOT_PROFILE,
};
