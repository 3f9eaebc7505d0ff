//! UDP sender and receiver for the five-channel sample stream.
//!
//! Packet `k` carries samples `25k .. 25k + 25` of every channel and is sent
//! at `k · 2.5 ms` after the start of the session. The receiver keeps a
//! bounded seq-ordered buffer, estimates each channel's phasor from the
//! longest gap-free run of packets, and ends the session once the stream
//! has been idle for a while.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pattern::ActuatorPhasor;
use crate::plate::ACTUATOR_COUNT;

use super::packet::{decode_packet, encode_packet, DrivePacket, PACKET_PERIOD_US, SAMPLES_PER_PACKET};
use super::phasor::{estimate_phasor, integer_period_window};
use super::wave::{dequantize, Waveform, FULL_SCALE, SAMPLE_RATE_HZ};

const MAX_DATAGRAM: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub frequency: f64,
    /// Seconds of signal to send.
    pub duration: f64,
    /// Probability that an interior packet is deliberately not sent.
    pub loss_rate: f64,
    pub loss_seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            frequency: 160.0,
            duration: 1.0,
            loss_rate: 0.0,
            loss_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SendStats {
    /// Packets in the session, sent or not.
    pub packets: u64,
    pub sent: u64,
    pub injected_losses: u64,
    pub last_seq: u32,
}

/// Scales `p` down so no amplitude exceeds `peak`; returns the factor used.
pub fn fit_full_scale(p: &ActuatorPhasor, peak: f64) -> (ActuatorPhasor, f64) {
    let max = p.amplitude.iter().fold(0.0f64, |a, &b| a.max(b));
    if max <= peak {
        return (*p, 1.0);
    }
    let factor = peak / max;
    let mut out = *p;
    for a in &mut out.amplitude {
        *a *= factor;
    }
    (out, factor)
}

/// Sends `phasors` as sine drives to `endpoint` in real time.
///
/// Loss injection never drops the first or last packet, so the receiver can
/// see the full seq range and count every injected gap.
pub fn stream(phasors: &ActuatorPhasor, cfg: &StreamConfig, endpoint: SocketAddr) -> Result<SendStats> {
    phasors.validate()?;
    if let Some(i) = phasors.amplitude.iter().position(|&a| a > FULL_SCALE) {
        return Err(Error::Config(format!(
            "actuator {} amplitude {} exceeds the {FULL_SCALE} full scale",
            i + 1,
            phasors.amplitude[i]
        )));
    }
    if !(cfg.duration.is_finite() && cfg.duration > 0.0) {
        return Err(Error::Config(format!("stream duration must be positive, got {}", cfg.duration)));
    }
    if !(0.0..1.0).contains(&cfg.loss_rate) {
        return Err(Error::Config(format!("loss rate must lie in [0, 1), got {}", cfg.loss_rate)));
    }
    let rate = f64::from(SAMPLE_RATE_HZ);
    let spc = usize::from(SAMPLES_PER_PACKET);
    let mut waves = Vec::with_capacity(ACTUATOR_COUNT);
    for slot in 0..ACTUATOR_COUNT {
        waves.push(Waveform::sine(cfg.frequency, phasors.amplitude[slot], phasors.phase_deg[slot], rate)?);
    }
    let packets = (cfg.duration * rate / spc as f64).ceil().max(1.0) as u64;
    if packets > u64::from(u32::MAX) {
        return Err(Error::Config("stream too long for a 32-bit sequence number".into()));
    }

    let bind: SocketAddr = if endpoint.is_ipv4() {
        "0.0.0.0:0".parse().expect("literal address")
    } else {
        "[::]:0".parse().expect("literal address")
    };
    let socket = UdpSocket::bind(bind).map_err(Error::Socket)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.loss_seed);
    let mut stats = SendStats {
        packets,
        sent: 0,
        injected_losses: 0,
        last_seq: (packets - 1) as u32,
    };
    let start = Instant::now();
    for k in 0..packets {
        let drop = rng.random::<f64>() < cfg.loss_rate;
        if drop && k != 0 && k + 1 != packets {
            stats.injected_losses += 1;
            continue;
        }
        let first = k * spc as u64;
        let mut payload = Vec::with_capacity(ACTUATOR_COUNT * spc);
        for w in &waves {
            payload.extend((first..first + spc as u64).map(|i| w.sample(i)));
        }
        let bytes = encode_packet(&DrivePacket::new(k as u32, payload))?;
        let due = start + Duration::from_micros(k * PACKET_PERIOD_US);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
        socket.send_to(&bytes, endpoint).map_err(Error::Socket)?;
        stats.sent += 1;
    }
    Ok(stats)
}

/// What happened to one pushed packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Stored,
    Duplicate,
    /// Older than everything the buffer can still hold.
    Late,
    /// Layout or rate differs from the session's first packet.
    Foreign,
}

/// Seq-ordered packet store with drop-oldest overflow.
#[derive(Debug, Clone)]
pub struct Reassembler {
    capacity: usize,
    buf: BTreeMap<u32, DrivePacket>,
    layout: Option<(u8, u8, u32)>,
    floor: Option<u32>,
    min_seq: Option<u32>,
    max_seq: Option<u32>,
    pub unique: u64,
    pub duplicates: u64,
    pub late: u64,
    pub foreign: u64,
    pub evicted: u64,
}

impl Reassembler {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            buf: BTreeMap::new(),
            layout: None,
            floor: None,
            min_seq: None,
            max_seq: None,
            unique: 0,
            duplicates: 0,
            late: 0,
            foreign: 0,
            evicted: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.unique == 0
    }

    pub fn push(&mut self, p: DrivePacket) -> PushOutcome {
        let layout = (p.channel_count, p.samples_per_channel, p.sample_rate_hz);
        if usize::from(p.channel_count) != ACTUATOR_COUNT || *self.layout.get_or_insert(layout) != layout {
            self.foreign += 1;
            return PushOutcome::Foreign;
        }
        if self.buf.contains_key(&p.seq) {
            self.duplicates += 1;
            return PushOutcome::Duplicate;
        }
        let full_and_older = self.buf.len() >= self.capacity && self.buf.keys().next().is_some_and(|&k| p.seq < k);
        if self.floor.is_some_and(|f| p.seq < f) || full_and_older {
            self.late += 1;
            return PushOutcome::Late;
        }
        self.min_seq = Some(self.min_seq.map_or(p.seq, |m| m.min(p.seq)));
        self.max_seq = Some(self.max_seq.map_or(p.seq, |m| m.max(p.seq)));
        self.unique += 1;
        self.buf.insert(p.seq, p);
        if self.buf.len() > self.capacity {
            if let Some((seq, _)) = self.buf.pop_first() {
                self.floor = Some(seq + 1);
                self.evicted += 1;
            }
        }
        PushOutcome::Stored
    }

    /// Missing seqs between the lowest and highest stored.
    pub fn gaps(&self) -> u64 {
        match (self.min_seq, self.max_seq) {
            (Some(lo), Some(hi)) => u64::from(hi - lo) + 1 - self.unique,
            _ => 0,
        }
    }

    /// Longest run of consecutive seqs still in the buffer (earliest on ties).
    pub fn longest_run(&self) -> Vec<&DrivePacket> {
        let mut best: Vec<&DrivePacket> = Vec::new();
        let mut cur: Vec<&DrivePacket> = Vec::new();
        for p in self.buf.values() {
            if cur.last().is_some_and(|q| q.seq.checked_add(1) != Some(p.seq)) {
                if cur.len() > best.len() {
                    best = std::mem::take(&mut cur);
                }
                cur.clear();
            }
            cur.push(p);
        }
        if cur.len() > best.len() {
            best = cur;
        }
        best
    }

    /// Per-channel phasors relative to sample 0 of the session, and the
    /// window length used.
    pub fn estimate(&self, f: f64) -> Result<(ActuatorPhasor, usize)> {
        let run = self.longest_run();
        let Some(first) = run.first() else {
            return Err(Error::WindowNotIntegerPeriods { samples: 0 });
        };
        let rate = f64::from(first.sample_rate_hz);
        let spc = usize::from(first.samples_per_channel);
        let available = run.len() * spc;
        let n = integer_period_window(available, f, rate).ok_or(Error::WindowNotIntegerPeriods { samples: available })?;
        let start_sample = u128::from(first.timestamp_us) * u128::from(first.sample_rate_hz) / 1_000_000;
        let offset_deg = 360.0 * (f * start_sample as f64 / rate).rem_euclid(1.0);
        let mut out = ActuatorPhasor::zero();
        for slot in 0..ACTUATOR_COUNT {
            let values: Vec<f64> = run
                .iter()
                .flat_map(|p| p.channel(slot).iter().map(|&s| dequantize(s)))
                .take(n)
                .collect();
            let (a, phase) = estimate_phasor(&values, f, rate)?;
            if a == 0.0 {
                continue;
            }
            let p = (phase - offset_deg).rem_euclid(360.0);
            out.amplitude[slot] = a;
            out.phase_deg[slot] = if p >= 360.0 { 0.0 } else { p };
        }
        Ok((out, n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiveConfig {
    pub frequency: f64,
    /// How long to wait for the first packet.
    pub timeout: Duration,
    /// Session ends after this long without a datagram.
    pub idle: Duration,
    /// Reassembly buffer size in packets.
    pub capacity: usize,
}

impl Default for ReceiveConfig {
    fn default() -> Self {
        Self {
            frequency: 160.0,
            timeout: Duration::from_secs(5),
            idle: Duration::from_millis(250),
            capacity: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiveReport {
    pub estimates: ActuatorPhasor,
    pub packets_received: u64,
    pub gaps: u64,
    pub duplicates: u64,
    pub late: u64,
    pub malformed: u64,
    pub evicted: u64,
    pub window_samples: usize,
}

/// Runs one receive session on `socket`.
pub fn receive(socket: &UdpSocket, cfg: &ReceiveConfig) -> Result<ReceiveReport> {
    if cfg.timeout.is_zero() || cfg.idle.is_zero() {
        return Err(Error::Config("receiver timeouts must be non-zero".into()));
    }
    let mut asm = Reassembler::new(cfg.capacity);
    let mut malformed = 0u64;
    let mut buf = [0u8; MAX_DATAGRAM];
    let start = Instant::now();
    loop {
        let wait = if asm.is_empty() {
            match cfg.timeout.checked_sub(start.elapsed()) {
                Some(w) if !w.is_zero() => w,
                _ => return Err(Error::ReceiverTimeout(cfg.timeout)),
            }
        } else {
            cfg.idle
        };
        socket.set_read_timeout(Some(wait)).map_err(Error::Socket)?;
        match socket.recv(&mut buf) {
            Ok(n) => match decode_packet(&buf[..n]) {
                Ok(p) => {
                    asm.push(p);
                }
                Err(_) => malformed += 1,
            },
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if asm.is_empty() {
                    return Err(Error::ReceiverTimeout(cfg.timeout));
                }
                break;
            }
            Err(e) => return Err(Error::Socket(e)),
        }
    }
    let (estimates, window_samples) = asm.estimate(cfg.frequency)?;
    Ok(ReceiveReport {
        estimates,
        packets_received: asm.unique,
        gaps: asm.gaps(),
        duplicates: asm.duplicates,
        late: asm.late,
        malformed: malformed + asm.foreign,
        evicted: asm.evicted,
        window_samples,
    })
}

/// Binds `addr` and runs one receive session.
pub fn receive_on(addr: SocketAddr, cfg: &ReceiveConfig) -> Result<ReceiveReport> {
    let socket = UdpSocket::bind(addr).map_err(Error::Socket)?;
    receive(&socket, cfg)
}
