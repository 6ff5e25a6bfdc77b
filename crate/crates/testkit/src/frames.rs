//! Byte-level builders for Ethernet frames and a classic pcap writer, so
//! tests can fabricate captures without canned fixtures.

use std::io::Write;
use std::path::Path;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_IPV6: u16 = 0x86DD;
pub const ETHERTYPE_ARP: u16 = 0x0806;

/// Ethernet II frame: destination, source, ethertype, payload.
pub fn eth(dst: [u8; 6], src: [u8; 6], ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + payload.len());
    f.extend_from_slice(&dst);
    f.extend_from_slice(&src);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(payload);
    f
}

/// Same frame with one 802.1Q tag inserted before the real ethertype.
pub fn vlan_eth(dst: [u8; 6], src: [u8; 6], vlan_id: u16, ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut inner = Vec::with_capacity(4 + payload.len());
    inner.extend_from_slice(&(vlan_id & 0x0fff).to_be_bytes());
    inner.extend_from_slice(&ethertype.to_be_bytes());
    inner.extend_from_slice(payload);
    eth(dst, src, 0x8100, &inner)
}

/// IPv4 packet with `extra_option_words` 32-bit words of no-op header options
/// (0 gives the plain 20-byte header). total_len covers header plus payload.
pub fn ipv4_opts(
    src: [u8; 4],
    dst: [u8; 4],
    proto: u8,
    ttl: u8,
    extra_option_words: u8,
    payload: &[u8],
) -> Vec<u8> {
    let ihl = 5 + extra_option_words as usize;
    assert!(ihl <= 15, "IPv4 IHL caps at 15 words");
    let header_len = ihl * 4;
    let total = (header_len + payload.len()) as u16;
    let mut p = Vec::with_capacity(header_len + payload.len());
    p.push(0x40 | ihl as u8);
    p.push(0);
    p.extend_from_slice(&total.to_be_bytes());
    p.extend_from_slice(&[0, 0, 0x40, 0, ttl, proto, 0, 0]);
    p.extend_from_slice(&src);
    p.extend_from_slice(&dst);
    p.resize(header_len, 1); // option kind 1 = NOP
    p.extend_from_slice(payload);
    p
}

pub fn ipv4(src: [u8; 4], dst: [u8; 4], proto: u8, ttl: u8, payload: &[u8]) -> Vec<u8> {
    ipv4_opts(src, dst, proto, ttl, 0, payload)
}

pub fn ipv6(src: [u8; 16], dst: [u8; 16], next_header: u8, hop_limit: u8, payload: &[u8]) -> Vec<u8> {
    let mut p = Vec::with_capacity(40 + payload.len());
    p.extend_from_slice(&[0x60, 0, 0, 0]);
    p.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    p.push(next_header);
    p.push(hop_limit);
    p.extend_from_slice(&src);
    p.extend_from_slice(&dst);
    p.extend_from_slice(payload);
    p
}

pub fn udp(src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
    let mut p = Vec::with_capacity(8 + payload.len());
    p.extend_from_slice(&src_port.to_be_bytes());
    p.extend_from_slice(&dst_port.to_be_bytes());
    p.extend_from_slice(&(8 + payload.len() as u16).to_be_bytes());
    p.extend_from_slice(&[0, 0]);
    p.extend_from_slice(payload);
    p
}

/// TCP segment; a timestamps option (kind 8) is emitted when `ts_val` is set,
/// padded with NOPs to keep the header on a word boundary.
pub fn tcp(src_port: u16, dst_port: u16, window: u16, ts_val: Option<u32>, payload: &[u8]) -> Vec<u8> {
    let mut options = Vec::new();
    if let Some(ts) = ts_val {
        options.extend_from_slice(&[1, 1, 8, 10]); // NOP NOP TS(len 10)
        options.extend_from_slice(&ts.to_be_bytes());
        options.extend_from_slice(&0u32.to_be_bytes()); // TSecr
    }
    debug_assert_eq!(options.len() % 4, 0);
    let offset_words = 5 + options.len() / 4;
    let mut p = Vec::with_capacity(20 + options.len() + payload.len());
    p.extend_from_slice(&src_port.to_be_bytes());
    p.extend_from_slice(&dst_port.to_be_bytes());
    p.extend_from_slice(&[0u8; 8]); // seq + ack
    p.push((offset_words as u8) << 4);
    p.push(0x18); // PSH|ACK
    p.extend_from_slice(&window.to_be_bytes());
    p.extend_from_slice(&[0u8; 4]); // checksum + urgent
    p.extend_from_slice(&options);
    p.extend_from_slice(payload);
    p
}

/// DNS query message asking for each name once (IN A).
pub fn dns_query(qnames: &[&str]) -> Vec<u8> {
    dns_message(qnames, true)
}

/// DNS response carrying the same question section and no answers; enough
/// for parsers that only read questions.
pub fn dns_response(qnames: &[&str]) -> Vec<u8> {
    dns_message(qnames, false)
}

fn dns_message(qnames: &[&str], is_query: bool) -> Vec<u8> {
    let mut m = vec![0u8; 12];
    m[1] = 0x42; // arbitrary id
    if !is_query {
        m[2] = 0x80; // QR
    }
    m[4..6].copy_from_slice(&(qnames.len() as u16).to_be_bytes());
    for name in qnames {
        for label in name.split('.').filter(|l| !l.is_empty()) {
            assert!(label.len() <= 63);
            m.push(label.len() as u8);
            m.extend_from_slice(label.as_bytes());
        }
        m.push(0);
        m.extend_from_slice(&[0, 1, 0, 1]); // qtype A, qclass IN
    }
    m
}

/// BOOTP/DHCP payload (fixed 236-byte preamble, magic cookie, options).
pub fn dhcp_payload(
    hostname: Option<&str>,
    vci: Option<&str>,
    prl: Option<&[u8]>,
    max_size: Option<u16>,
    message_type: Option<u8>,
) -> Vec<u8> {
    let mut p = vec![0u8; 236];
    p[0] = 1; // BOOTREQUEST
    p[1] = 1; // htype ethernet
    p[2] = 6; // hlen
    p.extend_from_slice(&[0x63, 0x82, 0x53, 0x63]);
    let mut opt = |code: u8, val: &[u8]| {
        p.push(code);
        p.push(val.len() as u8);
        p.extend_from_slice(val);
    };
    if let Some(mt) = message_type {
        opt(53, &[mt]);
    }
    if let Some(h) = hostname {
        opt(12, h.as_bytes());
    }
    if let Some(v) = vci {
        opt(60, v.as_bytes());
    }
    if let Some(list) = prl {
        opt(55, list);
    }
    if let Some(sz) = max_size {
        opt(57, &sz.to_be_bytes());
    }
    p.push(255);
    p
}

/// Minimal HTTP/1.1 GET request; the User-Agent header is emitted when given.
pub fn http_get(user_agent: Option<&str>) -> Vec<u8> {
    let mut req = String::from("GET / HTTP/1.1\r\nHost: example.test\r\n");
    if let Some(ua) = user_agent {
        req.push_str("User-Agent: ");
        req.push_str(ua);
        req.push_str("\r\n");
    }
    req.push_str("\r\n");
    req.into_bytes()
}

/// Serializes frames into a classic little-endian pcap capture
/// (microsecond timestamps, Ethernet link type). Frames are
/// `(timestamp_micros, bytes)` pairs written in the given order.
pub fn pcap_bytes(frames: &[(i64, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&0xa1b2_c3d4u32.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // thiszone
    out.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
    out.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
    out.extend_from_slice(&1u32.to_le_bytes()); // Ethernet
    for (micros, data) in frames {
        assert!(*micros >= 0, "pcap timestamps are unsigned");
        out.extend_from_slice(&((micros / 1_000_000) as u32).to_le_bytes());
        out.extend_from_slice(&((micros % 1_000_000) as u32).to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
    }
    out
}

pub fn write_pcap(path: impl AsRef<Path>, frames: &[(i64, Vec<u8>)]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&pcap_bytes(frames))
}
