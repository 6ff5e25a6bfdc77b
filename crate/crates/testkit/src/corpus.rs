//! Seeded synthetic corpora: a two-class traffic population whose separating
//! signals are the maximum TCP window and the number of unique DNS names, and
//! a DHCP fingerprint population labeled by a fixed boolean rule.

use iotnot::features::{extract_trace, LabeledSlot};
use iotnot::trace::{DeviceTrace, DhcpPart, Direction, DnsPart, IpPart, PacketRecord, TcpPart, Transport, UdpPart};
use iotnot::types::{Label, MacAddr, Timestamp};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::net::{IpAddr, Ipv4Addr};
use std::num::NonZeroU32;

/// Per-class draw ranges for the slot-level signals. A fraction `noise` of
/// draws is replaced by a draw from the union of both classes' ranges, so
/// every signal carries label noise but remains informative.
#[derive(Clone, Copy, Debug)]
pub struct TrafficProfile {
    /// Advertised TCP window for every segment in a slot.
    pub window: (u16, u16),
    /// Unique DNS names queried per slot.
    pub dns_names: (u32, u32),
    /// Distinct contacted hosts per slot, excluding the resolver.
    pub remote_ips: (u32, u32),
}

pub const IOT_PROFILE: TrafficProfile = TrafficProfile {
    window: (1024, 16384),
    dns_names: (1, 5),
    remote_ips: (1, 5),
};

pub const NOT_PROFILE: TrafficProfile = TrafficProfile {
    window: (32768, 65535),
    dns_names: (15, 25),
    remote_ips: (20, 39),
};

pub struct TrafficCorpus {
    /// One trace per device, labeled; records sorted by timestamp.
    pub traces: Vec<DeviceTrace>,
    /// `(mac, display name)` per device, aligned with `traces`.
    pub names: Vec<(MacAddr, String)>,
}

impl TrafficCorpus {
    /// Manifest CSV covering every generated device.
    pub fn manifest_csv(&self) -> String {
        let mut out = String::from("mac,name,label\n");
        for (trace, (mac, name)) in self.traces.iter().zip(&self.names) {
            out.push_str(&format!("{mac},{name},{}\n", trace.label));
        }
        out
    }

    /// All records across devices, globally timestamp-sorted (stable).
    pub fn all_records(&self) -> Vec<PacketRecord> {
        let mut records: Vec<PacketRecord> =
            self.traces.iter().flat_map(|t| t.records.iter().cloned()).collect();
        records.sort_by_key(|r| r.timestamp.micros());
        records
    }

    /// Feature vectors for every non-empty device slot, joined with labels.
    pub fn labeled_slots(&self, width_secs: u32) -> Vec<LabeledSlot> {
        let width = NonZeroU32::new(width_secs).expect("slot width must be positive");
        self.traces
            .iter()
            .flat_map(|trace| {
                extract_trace(trace, width)
                    .into_iter()
                    .map(|slot| LabeledSlot { slot, label: trace.label })
            })
            .collect()
    }
}

fn device_mac(label: Label, index: usize) -> MacAddr {
    let class = match label {
        Label::IoT => 1,
        Label::NoT => 2,
    };
    MacAddr([0x02, 0, 0, 0, class, index as u8])
}

fn pick(rng: &mut ChaCha8Rng, range: (u32, u32), union: (u32, u32), noise: f64) -> u32 {
    if rng.gen_bool(noise) {
        rng.gen_range(union.0..=union.1)
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

/// Generates `n_iot + n_not` devices with `slots_per_device` busy slots each.
/// Slot signals are drawn from the class profile, except that each draw is
/// independently replaced with probability `noise` by a union-range draw.
/// Frame lengths and timings are class-independent, so only the profiled
/// signals separate the classes.
pub fn traffic_corpus(
    seed: u64,
    n_iot: usize,
    n_not: usize,
    slots_per_device: usize,
    width_secs: u32,
    noise: f64,
) -> TrafficCorpus {
    assert!(n_iot <= 256 && n_not <= 256, "one MAC byte indexes devices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width_micros = width_secs as i64 * 1_000_000;
    let resolver = IpAddr::V4(Ipv4Addr::new(8, 8, 8, 8));
    let union_window = (IOT_PROFILE.window.0 as u32, NOT_PROFILE.window.1 as u32);
    let union_dns = (IOT_PROFILE.dns_names.0, NOT_PROFILE.dns_names.1);
    let union_ips = (IOT_PROFILE.remote_ips.0, NOT_PROFILE.remote_ips.1);

    let mut traces = Vec::new();
    let mut names = Vec::new();
    let devices = (0..n_iot)
        .map(|i| (Label::IoT, i))
        .chain((0..n_not).map(|i| (Label::NoT, i)));
    for (label, index) in devices {
        let mac = device_mac(label, index);
        let profile = match label {
            Label::IoT => IOT_PROFILE,
            Label::NoT => NOT_PROFILE,
        };
        let local = IpAddr::V4(Ipv4Addr::new(192, 168, index as u8, 10));
        let mut records = Vec::new();
        for slot in 0..slots_per_device {
            let slot_base = slot as i64 * width_micros;
            let window = pick(
                &mut rng,
                (profile.window.0 as u32, profile.window.1 as u32),
                union_window,
                noise,
            ) as u16;
            let n_names = pick(&mut rng, profile.dns_names, union_dns, noise);
            let n_ips = pick(&mut rng, profile.remote_ips, union_ips, noise);

            let at = |rng: &mut ChaCha8Rng| {
                Timestamp::from_micros(slot_base + rng.gen_range(0..width_micros))
            };
            for j in 0..n_ips {
                let peer = IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1 + j as u8));
                for k in 0..2u32 {
                    let ts = at(&mut rng);
                    records.push(PacketRecord {
                        timestamp: ts,
                        device_key: mac,
                        direction: Direction::Outgoing,
                        frame_len: rng.gen_range(60..=1500),
                        ip: Some(IpPart {
                            version: 4,
                            ttl: 64,
                            header_len: 20,
                            src_addr: local,
                            dst_addr: peer,
                            transport: Transport::Tcp,
                        }),
                        tcp: Some(TcpPart {
                            src_port: 40000 + (j * 2 + k) as u16,
                            dst_port: 443,
                            window_size: window,
                            ts_val: Some((ts.micros() / 1000) as u32),
                        }),
                        udp: None,
                        dns: None,
                        dhcp: None,
                        http_ua: None,
                    });
                }
            }
            // The total query count is drawn from one class-independent range
            // (always at least the largest possible name count), and names are
            // assigned round-robin. Unique-name and total-query columns are
            // then decorrelated: only the former separates the classes.
            let n_queries = rng.gen_range(26..=40u32);
            for k in 0..n_queries {
                let name_idx = k % n_names;
                let qname = format!("svc-{name_idx}.dev-{index}.example");
                records.push(PacketRecord {
                    timestamp: at(&mut rng),
                    device_key: mac,
                    direction: Direction::Outgoing,
                    frame_len: rng.gen_range(70..=300),
                    ip: Some(IpPart {
                        version: 4,
                        ttl: 64,
                        header_len: 20,
                        src_addr: local,
                        dst_addr: resolver,
                        transport: Transport::Udp,
                    }),
                    tcp: None,
                    udp: Some(UdpPart { src_port: 50000 + name_idx as u16, dst_port: 53 }),
                    dns: Some(DnsPart { is_query: true, qnames: vec![qname] }),
                    dhcp: None,
                    http_ua: None,
                });
            }
        }
        records.sort_by_key(|r| r.timestamp.micros());
        let name = match label {
            Label::IoT => format!("cam-{index}"),
            Label::NoT => format!("laptop-{index}"),
        };
        names.push((mac, name));
        traces.push(DeviceTrace { device_key: mac, label, records });
    }
    TrafficCorpus { traces, names }
}

/// Ground-truth rule for the DHCP corpus: a device is IoT when it requests
/// the hostname option (code 12); otherwise it is NoT when it requests the
/// domain-name option (code 15) or runs dhcpcd, and IoT when it does neither.
pub fn dhcp_rule(labels: &BTreeSet<String>) -> Label {
    if labels.contains("prl:12") {
        Label::IoT
    } else if labels.contains("prl:15") || labels.contains("dhcpcd") {
        Label::NoT
    } else {
        Label::IoT
    }
}

const DHCP_NOISE_POOL: [&str; 10] = [
    "android", "samsung", "espressif", "msft", "udhcp", "linux", "prl:1", "prl:3", "msg:1",
    "maxsz:1472",
];

/// DHCP fingerprints labeled by [`dhcp_rule`]. Each of the three rule inputs
/// is present independently with probability 1/2; every pool token is added
/// as an irrelevant noise label with probability 1/10.
pub fn dhcp_examples(seed: u64, n_rows: usize) -> Vec<(BTreeSet<String>, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_rows)
        .map(|_| {
            let mut labels = BTreeSet::new();
            for token in ["prl:12", "prl:15", "dhcpcd"] {
                if rng.gen_bool(0.5) {
                    labels.insert(token.to_string());
                }
            }
            for token in DHCP_NOISE_POOL {
                if rng.gen_bool(0.1) {
                    labels.insert(token.to_string());
                }
            }
            let label = dhcp_rule(&labels);
            (labels, label)
        })
        .collect()
}

/// Builds a DHCP packet part whose extracted fingerprint is exactly `labels`:
/// `prl:N`/`msg:N`/`maxsz:N` map to the corresponding options and the
/// remaining word tokens become hostname fragments.
pub fn dhcp_part_for(labels: &BTreeSet<String>) -> DhcpPart {
    let mut part = DhcpPart::default();
    let mut words = Vec::new();
    for label in labels {
        if let Some(code) = label.strip_prefix("prl:") {
            part.prl
                .get_or_insert_with(Vec::new)
                .push(code.parse().expect("prl code"));
        } else if let Some(mt) = label.strip_prefix("msg:") {
            part.message_type = Some(mt.parse().expect("message type"));
        } else if let Some(sz) = label.strip_prefix("maxsz:") {
            part.max_size = Some(sz.parse().expect("max size"));
        } else {
            words.push(label.as_str());
        }
    }
    if !words.is_empty() {
        part.hostname = Some(words.join("-"));
    }
    part
}

/// One outgoing DHCP request record carrying `part`.
pub fn dhcp_record(mac: MacAddr, ts: Timestamp, part: DhcpPart) -> PacketRecord {
    PacketRecord {
        timestamp: ts,
        device_key: mac,
        direction: Direction::Outgoing,
        frame_len: 342,
        ip: Some(IpPart {
            version: 4,
            ttl: 64,
            header_len: 20,
            src_addr: IpAddr::V4(Ipv4Addr::UNSPECIFIED),
            dst_addr: IpAddr::V4(Ipv4Addr::BROADCAST),
            transport: Transport::Udp,
        }),
        tcp: None,
        udp: Some(UdpPart { src_port: 68, dst_port: 67 }),
        dns: None,
        dhcp: Some(part),
        http_ua: None,
    }
}
