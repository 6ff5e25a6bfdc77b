//! Shared primitive types: device keys, capture timestamps, class labels.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Hardware (MAC) address. The canonical device key throughout the pipeline;
/// printed lowercase, colon-separated.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid MAC address {0:?}")]
pub struct MacParseError(pub String);

impl FromStr for MacAddr {
    type Err = MacParseError;

    /// Accepts colon- or dash-separated hex octets; case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut n = 0;
        for part in s.split([':', '-']) {
            if n == 6 || part.len() != 2 {
                return Err(MacParseError(s.to_string()));
            }
            out[n] = u8::from_str_radix(part, 16).map_err(|_| MacParseError(s.to_string()))?;
            n += 1;
        }
        if n != 6 {
            return Err(MacParseError(s.to_string()));
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Capture timestamp, held as whole microseconds since the epoch so values
/// survive serialization round trips exactly. Serialized as decimal seconds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Timestamp {
    micros: i64,
}

impl Timestamp {
    pub fn from_micros(micros: i64) -> Self {
        Timestamp { micros }
    }

    pub fn from_secs_micros(secs: i64, micros: u32) -> Self {
        Timestamp {
            micros: secs * 1_000_000 + micros as i64,
        }
    }

    /// Nearest-microsecond conversion; halves round up.
    pub fn from_seconds(seconds: f64) -> Self {
        Timestamp {
            micros: (seconds * 1e6).round() as i64,
        }
    }

    pub fn micros(self) -> i64 {
        self.micros
    }

    pub fn seconds(self) -> f64 {
        self.micros as f64 / 1e6
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.seconds())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let seconds = f64::deserialize(deserializer)?;
        if !seconds.is_finite() {
            return Err(serde::de::Error::custom("timestamp must be finite"));
        }
        Ok(Timestamp::from_seconds(seconds))
    }
}

/// Ground-truth device class: single-purpose appliance (IoT) or
/// general-purpose machine (NoT).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Label {
    IoT,
    NoT,
}

impl Label {
    /// Signed target used by the linear classifier: IoT is the positive class.
    pub fn y(self) -> f64 {
        match self {
            Label::IoT => 1.0,
            Label::NoT => -1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::IoT => "IoT",
            Label::NoT => "NoT",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid label {0:?} (expected IoT or NoT)")]
pub struct LabelParseError(pub String);

impl FromStr for Label {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iot" => Ok(Label::IoT),
            "not" => Ok(Label::NoT),
            _ => Err(LabelParseError(s.to_string())),
        }
    }
}

/// A classifier's answer for one slot, window, or device. `Abstain` means the
/// classifier had nothing to go on (empty slot, no DHCP traffic seen).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Verdict {
    IoT,
    NoT,
    Abstain,
}

impl Verdict {
    pub fn as_label(self) -> Option<Label> {
        match self {
            Verdict::IoT => Some(Label::IoT),
            Verdict::NoT => Some(Label::NoT),
            Verdict::Abstain => None,
        }
    }
}

impl From<Label> for Verdict {
    fn from(label: Label) -> Self {
        match label {
            Label::IoT => Verdict::IoT,
            Label::NoT => Verdict::NoT,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::IoT => "IoT",
            Verdict::NoT => "NoT",
            Verdict::Abstain => "Abstain",
        })
    }
}

impl FromStr for Verdict {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iot" => Ok(Verdict::IoT),
            "not" => Ok(Verdict::NoT),
            "abstain" => Ok(Verdict::Abstain),
            _ => Err(LabelParseError(s.to_string())),
        }
    }
}
