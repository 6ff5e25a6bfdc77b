//! Computes the per-slot feature vector from a slot's packet records.
//!
//! Conventions, applied uniformly: statistics describe the device's own
//! (outgoing) traffic, except the remote-endpoint counts which consider both
//! directions; a feature whose underlying record set is empty is undefined
//! (`None`) rather than zero, so imputation can distinguish "no evidence"
//! from "observed zero". The DNS counters are the one deliberate exception:
//! a device that sends transport traffic but no DNS queries really did make
//! zero queries.

use super::lls::lls_rmse;
use super::slots::slice_slots;
use super::{FeatureId, SlotFeatures, FEATURE_COUNT};
use crate::trace::demux::DeviceTrace;
use crate::trace::record::{Direction, PacketRecord};
use crate::types::{MacAddr, Timestamp};
use std::collections::BTreeSet;
use std::net::IpAddr;
use std::num::NonZeroU32;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Summarizes one slot's records into the canonical feature vector.
pub fn extract_features(
    device_key: MacAddr,
    slot_start: Timestamp,
    width: u32,
    records: &[PacketRecord],
) -> SlotFeatures {
    let mut out = SlotFeatures {
        device_key,
        slot_start,
        width,
        values: [None; FEATURE_COUNT],
    };
    let outgoing: Vec<&PacketRecord> = records
        .iter()
        .filter(|r| r.direction == Direction::Outgoing)
        .collect();

    if !outgoing.is_empty() {
        let lens: Vec<f64> = outgoing.iter().map(|r| r.frame_len as f64).collect();
        out.set(FeatureId::PktCount, Some(outgoing.len() as f64));
        out.set(FeatureId::BandwidthBytes, Some(lens.iter().sum()));
        out.set(FeatureId::AvgPktLen, Some(mean(&lens)));
    }

    if outgoing.len() >= 2 {
        let gaps: Vec<f64> = outgoing
            .windows(2)
            .map(|w| (w[1].timestamp.micros() - w[0].timestamp.micros()) as f64 / 1e6)
            .collect();
        let avg = mean(&gaps);
        let var = gaps.iter().map(|g| (g - avg) * (g - avg)).sum::<f64>() / gaps.len() as f64;
        out.set(FeatureId::AvgInterleave, Some(avg));
        out.set(FeatureId::StdInterleave, Some(var.sqrt()));
    }

    let remote_ips: BTreeSet<IpAddr> = records.iter().filter_map(|r| r.remote_ip()).collect();
    if !remote_ips.is_empty() {
        out.set(FeatureId::NRemoteIps, Some(remote_ips.len() as f64));
    }

    let out_ip: Vec<_> = outgoing.iter().filter_map(|r| r.ip.as_ref()).collect();
    if !out_ip.is_empty() {
        let ttls: Vec<f64> = out_ip.iter().map(|ip| ip.ttl as f64).collect();
        out.set(FeatureId::AvgTtl, Some(mean(&ttls)));
        let hdrs: Vec<f64> = out_ip.iter().map(|ip| ip.header_len as f64).collect();
        out.set(FeatureId::AvgIpHdrLen, Some(mean(&hdrs)));
        out.set(FeatureId::MaxIpHdrLen, hdrs.iter().copied().reduce(f64::max));
        out.set(FeatureId::MinIpHdrLen, hdrs.iter().copied().reduce(f64::min));
        let unique: BTreeSet<u8> = out_ip.iter().map(|ip| ip.header_len).collect();
        out.set(FeatureId::NUniqueIpHdrLen, Some(unique.len() as f64));
    }

    let out_ports: BTreeSet<u16> = outgoing.iter().filter_map(|r| r.remote_port()).collect();
    if !out_ports.is_empty() {
        out.set(FeatureId::NPorts, Some(out_ports.len() as f64));
    }

    let n_tcp = outgoing.iter().filter(|r| r.is_tcp()).count();
    let n_udp = outgoing.iter().filter(|r| r.is_udp()).count();
    let has_out_transport = n_tcp + n_udp > 0;
    if has_out_transport {
        out.set(
            FeatureId::TcpUdpRatio,
            Some((n_tcp as f64 + 1.0) / (n_udp as f64 + 1.0)),
        );
    }

    let endpoints: BTreeSet<(IpAddr, u16)> = records
        .iter()
        .filter_map(|r| Some((r.remote_ip()?, r.remote_port()?)))
        .collect();
    if !endpoints.is_empty() {
        out.set(FeatureId::NRemoteEndpoints, Some(endpoints.len() as f64));
    }

    let windows: Vec<u16> = outgoing
        .iter()
        .filter_map(|r| r.tcp.as_ref())
        .map(|t| t.window_size)
        .collect();
    if !windows.is_empty() {
        let ws: Vec<f64> = windows.iter().map(|w| *w as f64).collect();
        out.set(FeatureId::MaxTcpWindow, ws.iter().copied().reduce(f64::max));
        out.set(FeatureId::MeanTcpWindow, Some(mean(&ws)));
        out.set(FeatureId::MinTcpWindow, ws.iter().copied().reduce(f64::min));
        let unique: BTreeSet<u16> = windows.iter().copied().collect();
        out.set(FeatureId::NUniqueTcpWindow, Some(unique.len() as f64));
    }

    let ts_samples: Vec<(f64, f64)> = outgoing
        .iter()
        .filter_map(|r| Some((r.timestamp.seconds(), r.tcp.as_ref()?.ts_val? as f64)))
        .collect();
    out.set(FeatureId::TcptsLlsError, lls_rmse(&ts_samples));

    if has_out_transport {
        let queries = outgoing
            .iter()
            .filter(|r| r.dns.as_ref().is_some_and(|d| d.is_query));
        let mut n_dns = 0usize;
        let mut names: BTreeSet<String> = BTreeSet::new();
        for rec in queries {
            n_dns += 1;
            for q in &rec.dns.as_ref().unwrap().qnames {
                names.insert(q.to_lowercase());
            }
        }
        out.set(FeatureId::NDns, Some(n_dns as f64));
        out.set(FeatureId::NUniqueDns, Some(names.len() as f64));
    }

    let ua_lens: Vec<f64> = outgoing
        .iter()
        .filter_map(|r| r.http_ua.as_ref())
        .map(|h| h.length as f64)
        .collect();
    if !ua_lens.is_empty() {
        out.set(FeatureId::AvgUaLen, Some(mean(&ua_lens)));
    }

    out
}

/// Slices a device trace into slots and extracts features for each.
pub fn extract_trace(trace: &DeviceTrace, width_secs: NonZeroU32) -> Vec<SlotFeatures> {
    slice_slots(&trace.records, width_secs)
        .into_iter()
        .map(|(start, records)| {
            extract_features(trace.device_key, start, width_secs.get(), records)
        })
        .collect()
}
