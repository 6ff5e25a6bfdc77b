//! The normalized per-packet record produced by decoding and consumed by
//! feature extraction. One JSON object per line in event logs; keys are the
//! field names below and absent optional parts are omitted entirely.

use crate::types::{MacAddr, Timestamp};
use serde::{Deserialize, Serialize};
use std::net::IpAddr;

/// Which way the packet crossed the device boundary.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// Transport protocol carried by the IP layer. Anything that is not TCP or
/// UDP keeps its raw protocol number so the record stays lossless.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Transport {
    #[serde(rename = "TCP")]
    Tcp,
    #[serde(rename = "UDP")]
    Udp,
    Other(u8),
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpPart {
    pub version: u8,
    /// IPv4 TTL or IPv6 hop limit.
    pub ttl: u8,
    /// IP header length in bytes (IHL*4 for v4, fixed 40 for v6).
    pub header_len: u8,
    pub src_addr: IpAddr,
    pub dst_addr: IpAddr,
    pub transport: Transport,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcpPart {
    pub src_port: u16,
    pub dst_port: u16,
    /// Raw advertised window field; no window scaling applied.
    pub window_size: u16,
    /// TSval from the timestamps option, when present.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ts_val: Option<u32>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UdpPart {
    pub src_port: u16,
    pub dst_port: u16,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnsPart {
    pub is_query: bool,
    /// Question names, lowercased, labels joined with '.'; no trailing dot,
    /// so the root name is "".
    pub qnames: Vec<String>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DhcpPart {
    /// Option 12.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hostname: Option<String>,
    /// Option 60, vendor class identifier.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vci: Option<String>,
    /// Option 55, parameter request list.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prl: Option<Vec<u8>>,
    /// Option 57, maximum DHCP message size.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_size: Option<u16>,
    /// Option 53, DHCP message type.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message_type: Option<u8>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpUaPart {
    /// Byte length of the User-Agent header value after trimming spaces.
    pub length: u32,
}

/// One decoded packet attributed to one device. Upper-layer parts are absent
/// whenever the corresponding bytes were missing or malformed.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketRecord {
    pub timestamp: Timestamp,
    pub device_key: MacAddr,
    pub direction: Direction,
    /// On-the-wire frame length (the larger of original and captured length).
    pub frame_len: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ip: Option<IpPart>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tcp: Option<TcpPart>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub udp: Option<UdpPart>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dns: Option<DnsPart>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dhcp: Option<DhcpPart>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub http_ua: Option<HttpUaPart>,
}

impl PacketRecord {
    /// Structural invariants every record must satisfy, decoded or deserialized.
    pub fn validate(&self) -> Result<(), String> {
        if self.frame_len < 14 {
            return Err(format!("frame_len {} below Ethernet minimum", self.frame_len));
        }
        if self.tcp.is_some() && self.udp.is_some() {
            return Err("record carries both TCP and UDP".into());
        }
        if let Some(ip) = &self.ip {
            if ip.version != 4 && ip.version != 6 {
                return Err(format!("ip version {} is not 4 or 6", ip.version));
            }
            if self.tcp.is_some() && ip.transport != Transport::Tcp {
                return Err("TCP part but IP transport is not TCP".into());
            }
            if self.udp.is_some() && ip.transport != Transport::Udp {
                return Err("UDP part but IP transport is not UDP".into());
            }
        } else if self.tcp.is_some() || self.udp.is_some() {
            return Err("transport part without IP part".into());
        }
        if let Some(udp) = &self.udp {
            if self.dns.is_some() && udp.src_port != 53 && udp.dst_port != 53 {
                return Err("DNS part on a flow not involving port 53".into());
            }
            let bootp = |p: u16| p == 67 || p == 68;
            if self.dhcp.is_some() && !(bootp(udp.src_port) && bootp(udp.dst_port)) {
                return Err("DHCP part on a flow not between ports 67/68".into());
            }
        } else if self.dns.is_some() || self.dhcp.is_some() {
            return Err("DNS/DHCP part without UDP part".into());
        }
        if self.http_ua.is_some() && self.tcp.is_none() {
            return Err("HTTP part without TCP part".into());
        }
        Ok(())
    }

    /// TCP-shaped traffic: an explicit TCP part, or an IP header that named
    /// TCP even though the segment itself was clipped or malformed.
    pub fn is_tcp(&self) -> bool {
        self.tcp.is_some()
            || self
                .ip
                .as_ref()
                .is_some_and(|ip| ip.transport == Transport::Tcp)
    }

    pub fn is_udp(&self) -> bool {
        self.udp.is_some()
            || self
                .ip
                .as_ref()
                .is_some_and(|ip| ip.transport == Transport::Udp)
    }

    /// The non-device end of the conversation at the IP layer.
    pub fn remote_ip(&self) -> Option<IpAddr> {
        let ip = self.ip.as_ref()?;
        Some(match self.direction {
            Direction::Outgoing => ip.dst_addr,
            Direction::Incoming => ip.src_addr,
        })
    }

    /// The non-device end's transport port, from whichever part is present.
    pub fn remote_port(&self) -> Option<u16> {
        let (src, dst) = if let Some(t) = &self.tcp {
            (t.src_port, t.dst_port)
        } else if let Some(u) = &self.udp {
            (u.src_port, u.dst_port)
        } else {
            return None;
        };
        Some(match self.direction {
            Direction::Outgoing => dst,
            Direction::Incoming => src,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_record() -> PacketRecord {
        PacketRecord {
            timestamp: Timestamp::from_secs_micros(1000, 0),
            device_key: "02:00:00:00:00:01".parse().unwrap(),
            direction: Direction::Outgoing,
            frame_len: 60,
            ip: None,
            tcp: None,
            udp: None,
            dns: None,
            dhcp: None,
            http_ua: None,
        }
    }

    fn with_udp(mut rec: PacketRecord, src_port: u16, dst_port: u16) -> PacketRecord {
        rec.ip = Some(IpPart {
            version: 4,
            ttl: 64,
            header_len: 20,
            src_addr: "10.0.0.2".parse().unwrap(),
            dst_addr: "8.8.8.8".parse().unwrap(),
            transport: Transport::Udp,
        });
        rec.udp = Some(UdpPart { src_port, dst_port });
        rec
    }

    #[test]
    fn minimal_record_validates_and_round_trips() {
        let rec = base_record();
        rec.validate().unwrap();
        let json = serde_json::to_string(&rec).unwrap();
        assert!(!json.contains("\"ip\""), "absent parts must be omitted: {json}");
        assert!(json.contains("\"timestamp\""));
        assert!(json.contains("\"device_key\""));
        let back: PacketRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn transport_serializes_as_protocol_names() {
        assert_eq!(serde_json::to_string(&Transport::Tcp).unwrap(), "\"TCP\"");
        assert_eq!(serde_json::to_string(&Transport::Udp).unwrap(), "\"UDP\"");
        let other = serde_json::to_string(&Transport::Other(41)).unwrap();
        assert_eq!(other, "{\"Other\":41}");
        assert_eq!(serde_json::from_str::<Transport>(&other).unwrap(), Transport::Other(41));
    }

    #[test]
    fn validate_rejects_contradictory_layers() {
        let mut rec = base_record();
        rec.frame_len = 10;
        assert!(rec.validate().is_err());

        let mut rec = with_udp(base_record(), 5000, 80);
        rec.dns = Some(DnsPart { is_query: true, qnames: vec![] });
        assert!(rec.validate().is_err(), "DNS requires port 53");

        let mut rec = with_udp(base_record(), 68, 67);
        rec.dhcp = Some(DhcpPart::default());
        rec.validate().unwrap();
        rec.udp = Some(UdpPart { src_port: 68, dst_port: 53 });
        assert!(rec.validate().is_err(), "DHCP requires ports 67/68");

        let mut rec = base_record();
        rec.tcp = Some(TcpPart { src_port: 1, dst_port: 2, window_size: 3, ts_val: None });
        assert!(rec.validate().is_err(), "TCP without IP");

        let mut rec = base_record();
        rec.http_ua = Some(HttpUaPart { length: 1 });
        assert!(rec.validate().is_err(), "HTTP without TCP");
    }

    #[test]
    fn transport_flags_fall_back_to_ip_protocol() {
        let mut rec = base_record();
        rec.ip = Some(IpPart {
            version: 4,
            ttl: 64,
            header_len: 20,
            src_addr: "10.0.0.2".parse().unwrap(),
            dst_addr: "1.2.3.4".parse().unwrap(),
            transport: Transport::Tcp,
        });
        assert!(rec.is_tcp(), "clipped TCP still counts as TCP");
        assert!(!rec.is_udp());
        assert_eq!(rec.remote_port(), None, "no port without a transport part");
    }

    #[test]
    fn remote_endpoint_follows_direction() {
        let mut rec = with_udp(base_record(), 5000, 53);
        assert_eq!(rec.remote_ip().unwrap().to_string(), "8.8.8.8");
        assert_eq!(rec.remote_port(), Some(53));
        rec.direction = Direction::Incoming;
        assert_eq!(rec.remote_ip().unwrap().to_string(), "10.0.0.2");
        assert_eq!(rec.remote_port(), Some(5000));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{"timestamp":1.0,"device_key":"02:00:00:00:00:01",
            "direction":"Outgoing","frame_len":60,"bogus":1}"#;
        assert!(serde_json::from_str::<PacketRecord>(json).is_err());
    }

    #[test]
    fn direction_rejects_unknown_variants() {
        let json = r#"{"timestamp":1.0,"device_key":"02:00:00:00:00:01",
            "direction":"sideways","frame_len":60}"#;
        assert!(serde_json::from_str::<PacketRecord>(json).is_err());
    }
}
