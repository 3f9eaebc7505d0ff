//! Datagram layout, little-endian throughout:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `VPB1`                  |
//! | 4      | 1    | version (1)                   |
//! | 5      | 1    | flags (0)                     |
//! | 6      | 1    | channel_count                 |
//! | 7      | 1    | samples_per_channel           |
//! | 8      | 4    | seq                           |
//! | 12     | 4    | sample_rate_hz                |
//! | 16     | 8    | timestamp_us                  |
//! | 24     | 2·c·s| i16 samples, channel-major    |
//! | end−4  | 4    | CRC-32 (IEEE) of bytes before |

use crate::error::{Error, Result};
use crate::plate::ACTUATOR_COUNT;

use super::wave::SAMPLE_RATE_HZ;

pub const MAGIC: [u8; 4] = *b"VPB1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;
pub const CRC_LEN: usize = 4;
pub const SAMPLES_PER_PACKET: u8 = 25;
/// Time covered by one packet at the default rate.
pub const PACKET_PERIOD_US: u64 = 2500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrivePacket {
    pub seq: u32,
    pub sample_rate_hz: u32,
    pub timestamp_us: u64,
    pub channel_count: u8,
    pub samples_per_channel: u8,
    /// `channel_count × samples_per_channel`, channel-major.
    pub payload: Vec<i16>,
}

impl DrivePacket {
    /// Five channels of 25 samples at 10 kHz, stamped `seq · 2500 µs`.
    pub fn new(seq: u32, payload: Vec<i16>) -> Self {
        Self {
            seq,
            sample_rate_hz: SAMPLE_RATE_HZ,
            timestamp_us: u64::from(seq) * PACKET_PERIOD_US,
            channel_count: ACTUATOR_COUNT as u8,
            samples_per_channel: SAMPLES_PER_PACKET,
            payload,
        }
    }

    pub fn encoded_len(&self) -> usize {
        wire_len(self.channel_count, self.samples_per_channel)
    }

    pub fn channel(&self, index: usize) -> &[i16] {
        let n = usize::from(self.samples_per_channel);
        &self.payload[index * n..(index + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_count == 0 || self.samples_per_channel == 0 {
            return Err(Error::MalformedPacket("empty channel layout".into()));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::MalformedPacket("zero sample rate".into()));
        }
        let need = usize::from(self.channel_count) * usize::from(self.samples_per_channel);
        if self.payload.len() != need {
            return Err(Error::MalformedPacket(format!(
                "payload holds {} samples, layout needs {need}",
                self.payload.len()
            )));
        }
        Ok(())
    }
}

fn wire_len(channels: u8, samples: u8) -> usize {
    HEADER_LEN + 2 * usize::from(channels) * usize::from(samples) + CRC_LEN
}

pub fn encode_packet(p: &DrivePacket) -> Result<Vec<u8>> {
    p.validate()?;
    let mut out = Vec::with_capacity(p.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(0);
    out.push(p.channel_count);
    out.push(p.samples_per_channel);
    out.extend_from_slice(&p.seq.to_le_bytes());
    out.extend_from_slice(&p.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&p.timestamp_us.to_le_bytes());
    for s in &p.payload {
        out.extend_from_slice(&s.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Checks run in order: length, magic, version, size, CRC, then field
/// semantics.
pub fn decode_packet(bytes: &[u8]) -> Result<DrivePacket> {
    let min = HEADER_LEN + CRC_LEN;
    if bytes.len() < min {
        return Err(Error::Truncated {
            got: bytes.len(),
            need: min,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(Error::BadVersion(bytes[4]));
    }
    let (channel_count, samples_per_channel) = (bytes[6], bytes[7]);
    let need = wire_len(channel_count, samples_per_channel);
    if bytes.len() < need {
        return Err(Error::Truncated {
            got: bytes.len(),
            need,
        });
    }
    if bytes.len() > need {
        return Err(Error::MalformedPacket(format!(
            "{} trailing bytes after CRC",
            bytes.len() - need
        )));
    }
    let body = &bytes[..need - CRC_LEN];
    let stored = u32::from_le_bytes(bytes[need - CRC_LEN..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::BadCrc { stored, computed });
    }
    if bytes[5] != 0 {
        return Err(Error::MalformedPacket(format!("unknown flags {:#04x}", bytes[5])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let packet = DrivePacket {
        seq: u32_at(8),
        sample_rate_hz: u32_at(12),
        timestamp_us: u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")),
        channel_count,
        samples_per_channel,
        payload: body[HEADER_LEN..]
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect(),
    };
    packet.validate()?;
    Ok(packet)
}
