use std::io;

use thiserror::Error;

/// Errors produced by the simulation, optimisation and drive-link layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid plate or layout configuration: {0}")]
    InvalidSpec(String),

    #[error(
        "mode ({m}, {n}) at {natural_freq:.3} Hz is within the resonance guard of the {drive_freq} Hz drive"
    )]
    Resonance {
        m: u32,
        n: u32,
        natural_freq: f64,
        drive_freq: f64,
    },

    #[error("point ({x}, {y}) m lies outside the plate")]
    OutOfDomain { x: f64, y: f64 },

    #[error("actuator index {0} out of range (expected 1..=5)")]
    BadActuator(usize),

    #[error("the plate model only supports sinusoidal drive, got {0}")]
    UnsupportedWaveShape(&'static str),

    #[error("wave frequency {wave} Hz does not match basis frequency {basis} Hz")]
    FrequencyMismatch { wave: f64, basis: f64 },

    #[error("gain k({actuator}, {phase}) = {value} outside [0, {max}]")]
    GainOutOfRange {
        actuator: usize,
        phase: usize,
        value: f64,
        max: f64,
    },

    #[error("pattern series has no frames")]
    EmptySeries,

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("image {nx}x{ny} is smaller than the {window}-pixel SSIM window")]
    ImageTooSmall { nx: usize, ny: usize, window: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("duty cycle {0} outside (0, 1)")]
    InvalidDuty(f64),

    #[error("sample rate {rate} Hz is not above twice the {freq} Hz wave frequency")]
    SampleRateTooLow { rate: f64, freq: f64 },

    #[error("window of {samples} samples does not hold an integer number of periods")]
    WindowNotIntegerPeriods { samples: usize },

    #[error("bad packet magic")]
    BadMagic,

    #[error("unsupported packet version {0}")]
    BadVersion(u8),

    #[error("packet CRC mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    BadCrc { stored: u32, computed: u32 },

    #[error("packet truncated: {got} bytes, need {need}")]
    Truncated { got: usize, need: usize },

    #[error("malformed packet: {0}")]
    MalformedPacket(String),

    #[error("socket error: {0}")]
    Socket(#[source] io::Error),

    #[error("receiver timed out after {0:?} without a complete period")]
    ReceiverTimeout(std::time::Duration),

    #[error("lookup table fingerprint {stored} does not match configuration {current}")]
    FingerprintMismatch { stored: String, current: String },

    #[error("lookup table parse error at line {line}: {msg}")]
    LutParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
