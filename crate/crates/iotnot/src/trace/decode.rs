//! Frame decoding: Ethernet (with one optional VLAN tag), IPv4/IPv6, TCP/UDP,
//! and the application-layer fields the features need (DNS questions, DHCP
//! options, HTTP User-Agent). Malformed bytes never abort a frame; they just
//! leave the corresponding part absent.

use super::pcap::RawFrame;
use super::record::{
    DhcpPart, Direction, DnsPart, HttpUaPart, IpPart, PacketRecord, TcpPart, Transport, UdpPart,
};
use crate::types::{MacAddr, Timestamp};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

/// A decoded frame before device attribution. `demux` turns this into one
/// `PacketRecord` per monitored device it touches.
#[derive(Clone, PartialEq, Debug)]
pub struct DecodedFrame {
    pub timestamp: Timestamp,
    pub frame_len: u32,
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub ip: Option<IpPart>,
    pub tcp: Option<TcpPart>,
    pub udp: Option<UdpPart>,
    pub dns: Option<DnsPart>,
    pub dhcp: Option<DhcpPart>,
    pub http_ua: Option<HttpUaPart>,
}

impl DecodedFrame {
    pub fn into_record(self, device_key: MacAddr, direction: Direction) -> PacketRecord {
        PacketRecord {
            timestamp: self.timestamp,
            device_key,
            direction,
            frame_len: self.frame_len,
            ip: self.ip,
            tcp: self.tcp,
            udp: self.udp,
            dns: self.dns,
            dhcp: self.dhcp,
            http_ua: self.http_ua,
        }
    }
}

fn be16(b: &[u8], off: usize) -> u16 {
    u16::from_be_bytes([b[off], b[off + 1]])
}

fn proto_to_transport(proto: u8) -> Transport {
    match proto {
        6 => Transport::Tcp,
        17 => Transport::Udp,
        other => Transport::Other(other),
    }
}

fn decode_ipv4(buf: &[u8]) -> Option<(IpPart, &[u8])> {
    if buf.len() < 20 || buf[0] >> 4 != 4 {
        return None;
    }
    let header_len = ((buf[0] & 0x0f) as usize) * 4;
    if header_len < 20 || header_len > buf.len() {
        return None;
    }
    // total_len bounds the payload below the captured bytes so Ethernet
    // padding never leaks into upper layers.
    let total_len = be16(buf, 2) as usize;
    let end = total_len.min(buf.len());
    let payload = if end > header_len { &buf[header_len..end] } else { &[] };
    let part = IpPart {
        version: 4,
        ttl: buf[8],
        header_len: header_len as u8,
        src_addr: IpAddr::V4(Ipv4Addr::new(buf[12], buf[13], buf[14], buf[15])),
        dst_addr: IpAddr::V4(Ipv4Addr::new(buf[16], buf[17], buf[18], buf[19])),
        transport: proto_to_transport(buf[9]),
    };
    Some((part, payload))
}

fn decode_ipv6(buf: &[u8]) -> Option<(IpPart, &[u8])> {
    if buf.len() < 40 || buf[0] >> 4 != 6 {
        return None;
    }
    let payload_len = be16(buf, 4) as usize;
    let end = (40 + payload_len).min(buf.len());
    let part = IpPart {
        version: 6,
        ttl: buf[7],
        header_len: 40,
        src_addr: IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&buf[8..24]).unwrap())),
        dst_addr: IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&buf[24..40]).unwrap())),
        // Extension header chains are not followed; only a directly named
        // transport is recognized.
        transport: proto_to_transport(buf[6]),
    };
    Some((part, &buf[40..end]))
}

fn decode_tcp(buf: &[u8]) -> Option<(TcpPart, &[u8])> {
    if buf.len() < 20 {
        return None;
    }
    let data_offset = ((buf[12] >> 4) as usize) * 4;
    if data_offset < 20 || data_offset > buf.len() {
        return None;
    }
    let mut ts_val = None;
    let opts = &buf[20..data_offset];
    let mut pos = 0;
    while pos < opts.len() {
        match opts[pos] {
            0 => break,
            1 => pos += 1,
            kind => {
                if pos + 1 >= opts.len() {
                    break;
                }
                let olen = opts[pos + 1] as usize;
                if olen < 2 || pos + olen > opts.len() {
                    break;
                }
                if kind == 8 && olen == 10 {
                    ts_val = Some(u32::from_be_bytes(opts[pos + 2..pos + 6].try_into().unwrap()));
                }
                pos += olen;
            }
        }
    }
    let part = TcpPart {
        src_port: be16(buf, 0),
        dst_port: be16(buf, 2),
        window_size: be16(buf, 14),
        ts_val,
    };
    Some((part, &buf[data_offset..]))
}

fn decode_udp(buf: &[u8]) -> Option<(UdpPart, &[u8])> {
    if buf.len() < 8 {
        return None;
    }
    let length = be16(buf, 4) as usize;
    let end = length.min(buf.len());
    let payload = if end > 8 { &buf[8..end] } else { &[] };
    let part = UdpPart {
        src_port: be16(buf, 0),
        dst_port: be16(buf, 2),
    };
    Some((part, payload))
}

/// Reads one (possibly compressed) DNS name. Returns the lowercased dotted
/// name (root is "") and the offset just past its in-place encoding.
fn parse_name(msg: &[u8], start: usize) -> Option<(String, usize)> {
    let mut labels: Vec<String> = Vec::new();
    let mut pos = start;
    let mut resume: Option<usize> = None;
    let mut jumps = 0u32;
    let mut wire_len = 0usize;
    loop {
        let b = *msg.get(pos)?;
        if b == 0 {
            return Some((labels.join("."), resume.unwrap_or(pos + 1)));
        }
        match b & 0xC0 {
            0xC0 => {
                let lo = *msg.get(pos + 1)?;
                if resume.is_none() {
                    resume = Some(pos + 2);
                }
                jumps += 1;
                if jumps > 8 {
                    return None;
                }
                pos = (((b & 0x3F) as usize) << 8) | lo as usize;
            }
            0x00 => {
                let len = b as usize;
                wire_len += len + 1;
                if wire_len > 255 {
                    return None;
                }
                let bytes = msg.get(pos + 1..pos + 1 + len)?;
                labels.push(String::from_utf8_lossy(bytes).to_lowercase());
                pos += 1 + len;
            }
            _ => return None,
        }
    }
}

fn parse_dns(msg: &[u8]) -> Option<DnsPart> {
    if msg.len() < 12 {
        return None;
    }
    let is_query = be16(msg, 2) & 0x8000 == 0;
    let qdcount = (be16(msg, 4) as usize).min(32);
    let mut qnames = Vec::with_capacity(qdcount);
    let mut pos = 12;
    for _ in 0..qdcount {
        let (name, next) = parse_name(msg, pos)?;
        // qtype + qclass follow every question name.
        if next + 4 > msg.len() {
            return None;
        }
        pos = next + 4;
        qnames.push(name);
    }
    Some(DnsPart { is_query, qnames })
}

fn lossy_nul_trimmed(v: &[u8]) -> String {
    String::from_utf8_lossy(v).trim_end_matches('\0').to_string()
}

fn parse_dhcp(buf: &[u8]) -> Option<DhcpPart> {
    if buf.len() < 240 || buf[236..240] != [0x63, 0x82, 0x53, 0x63] {
        return None;
    }
    let mut part = DhcpPart::default();
    let mut pos = 240;
    while pos < buf.len() {
        match buf[pos] {
            0 => pos += 1,
            255 => break,
            code => {
                if pos + 1 >= buf.len() {
                    break;
                }
                let olen = buf[pos + 1] as usize;
                if pos + 2 + olen > buf.len() {
                    break;
                }
                let val = &buf[pos + 2..pos + 2 + olen];
                match code {
                    12 => part.hostname = Some(lossy_nul_trimmed(val)),
                    60 => part.vci = Some(lossy_nul_trimmed(val)),
                    55 => part.prl = Some(val.to_vec()),
                    57 if olen == 2 => part.max_size = Some(be16(val, 0)),
                    53 if olen == 1 => part.message_type = Some(val[0]),
                    _ => {}
                }
                pos += 2 + olen;
            }
        }
    }
    Some(part)
}

const HTTP_METHODS: [&[u8]; 7] = [
    b"GET ", b"POST ", b"PUT ", b"HEAD ", b"DELETE ", b"OPTIONS ", b"PATCH ",
];

fn parse_http_ua(buf: &[u8]) -> Option<HttpUaPart> {
    if !HTTP_METHODS.iter().any(|m| buf.starts_with(m)) {
        return None;
    }
    let mut rest = buf;
    let mut first = true;
    // Only complete CRLF-terminated lines count; a clipped tail is ignored.
    while let Some(eol) = rest.windows(2).position(|w| w == b"\r\n") {
        let line = &rest[..eol];
        rest = &rest[eol + 2..];
        if first {
            first = false;
            continue;
        }
        if line.is_empty() {
            break;
        }
        let Some(colon) = line.iter().position(|&b| b == b':') else {
            continue;
        };
        if line[..colon].eq_ignore_ascii_case(b"user-agent") {
            let value = line[colon + 1..].trim_ascii();
            return Some(HttpUaPart { length: value.len() as u32 });
        }
    }
    None
}

/// Decodes one captured frame. Returns `None` only when the frame is too
/// short to carry an Ethernet header; anything after that degrades gracefully
/// to absent parts.
pub fn decode_frame(frame: &RawFrame) -> Option<DecodedFrame> {
    let data = frame.data.as_slice();
    if data.len() < 14 {
        return None;
    }
    let dst_mac = MacAddr(data[0..6].try_into().unwrap());
    let src_mac = MacAddr(data[6..12].try_into().unwrap());
    let mut ethertype = u16::from_be_bytes([data[12], data[13]]);
    let mut l3: &[u8] = &data[14..];
    if ethertype == 0x8100 {
        // One 802.1Q tag: 2 bytes TCI, then the real ethertype.
        if l3.len() >= 4 {
            ethertype = u16::from_be_bytes([l3[2], l3[3]]);
            l3 = &l3[4..];
        } else {
            ethertype = 0;
            l3 = &[];
        }
    }
    let mut out = DecodedFrame {
        timestamp: frame.ts,
        frame_len: frame.frame_len(),
        src_mac,
        dst_mac,
        ip: None,
        tcp: None,
        udp: None,
        dns: None,
        dhcp: None,
        http_ua: None,
    };
    let decoded_ip = match ethertype {
        0x0800 => decode_ipv4(l3),
        0x86DD => decode_ipv6(l3),
        _ => None,
    };
    let Some((ip, l4)) = decoded_ip else {
        return Some(out);
    };
    match ip.transport {
        Transport::Tcp => {
            if let Some((tcp, payload)) = decode_tcp(l4) {
                out.http_ua = parse_http_ua(payload);
                out.tcp = Some(tcp);
            }
        }
        Transport::Udp => {
            if let Some((udp, payload)) = decode_udp(l4) {
                if udp.src_port == 53 || udp.dst_port == 53 {
                    out.dns = parse_dns(payload);
                }
                let bootp = |p: u16| p == 67 || p == 68;
                if bootp(udp.src_port) && bootp(udp.dst_port) {
                    out.dhcp = parse_dhcp(payload);
                }
                out.udp = Some(udp);
            }
        }
        Transport::Other(_) => {}
    }
    out.ip = Some(ip);
    Some(out)
}
