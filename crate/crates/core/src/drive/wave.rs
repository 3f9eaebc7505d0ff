//! Per-channel drive waveforms, quantised to i16.
//!
//! Full scale is 10 unit amplitudes (the gain ceiling): `i16::MAX` is +10.

use crate::error::{Error, Result};
use crate::plate::WaveShape;
use crate::trig::sin_pi;

/// Per-channel sample rate of the link.
pub const SAMPLE_RATE_HZ: u32 = 10_000;
/// Amplitude represented by `i16::MAX`.
pub const FULL_SCALE: f64 = 10.0;

const LSB: f64 = FULL_SCALE / i16::MAX as f64;

/// Saturating conversion from unit amplitudes to counts.
pub fn quantize(v: f64) -> i16 {
    (v / LSB).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn dequantize(s: i16) -> f64 {
    f64::from(s) * LSB
}

/// One quantised channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSamples {
    pub samples: Vec<i16>,
    pub sample_rate: f64,
}

impl WaveSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_units(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| dequantize(s)).collect()
    }
}

/// A validated periodic drive signal that can be sampled at any index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveform {
    pub shape: WaveShape,
    pub frequency: f64,
    pub amplitude: f64,
    pub phase_deg: f64,
    /// High fraction for square, rise fraction for ramp.
    pub duty: f64,
    pub sample_rate: f64,
}

impl Waveform {
    pub fn new(
        shape: WaveShape,
        frequency: f64,
        amplitude: f64,
        phase_deg: f64,
        duty: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::Config(format!("wave frequency must be positive, got {frequency}")));
        }
        if !(duty > 0.0 && duty < 1.0) {
            return Err(Error::InvalidDuty(duty));
        }
        // negated so NaN rates are rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(sample_rate > 2.0 * frequency) {
            return Err(Error::SampleRateTooLow {
                rate: sample_rate,
                freq: frequency,
            });
        }
        if !(amplitude.is_finite() && phase_deg.is_finite()) {
            return Err(Error::Config("wave amplitude and phase must be finite".into()));
        }
        Ok(Self {
            shape,
            frequency,
            amplitude,
            phase_deg,
            duty,
            sample_rate,
        })
    }

    pub fn sine(frequency: f64, amplitude: f64, phase_deg: f64, sample_rate: f64) -> Result<Self> {
        Self::new(WaveShape::Sine, frequency, amplitude, phase_deg, 0.5, sample_rate)
    }

    /// Position within the period, in [0, 1).
    fn cycle(&self, index: u64) -> f64 {
        let c = (self.frequency * index as f64 / self.sample_rate + self.phase_deg / 360.0).rem_euclid(1.0);
        if c >= 1.0 {
            0.0
        } else {
            c
        }
    }

    /// Analog value at sample `index`.
    pub fn value(&self, index: u64) -> f64 {
        let c = self.cycle(index);
        let a = self.amplitude;
        match self.shape {
            WaveShape::Sine => a * sin_pi(2.0 * c),
            WaveShape::Square => {
                if c < self.duty {
                    a
                } else {
                    -a
                }
            }
            // zero-crossing rising at c = 0 like the sine
            WaveShape::Triangle => {
                if c < 0.25 {
                    a * 4.0 * c
                } else if c < 0.75 {
                    a * (2.0 - 4.0 * c)
                } else {
                    a * (4.0 * c - 4.0)
                }
            }
            // −A → +A over the duty fraction, then back down
            WaveShape::Ramp => {
                if c < self.duty {
                    a * (2.0 * c / self.duty - 1.0)
                } else {
                    a * (1.0 - 2.0 * (c - self.duty) / (1.0 - self.duty))
                }
            }
        }
    }

    pub fn sample(&self, index: u64) -> i16 {
        quantize(self.value(index))
    }

    /// `n` samples starting at absolute index `start`.
    pub fn synth(&self, start: u64, n: usize) -> WaveSamples {
        WaveSamples {
            samples: (start..start + n as u64).map(|i| self.sample(i)).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// `n` samples of the named shape from t = 0.
pub fn synth_wave(
    shape: WaveShape,
    frequency: f64,
    amplitude: f64,
    phase_deg: f64,
    duty: f64,
    sample_rate: f64,
    n: usize,
) -> Result<WaveSamples> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    Ok(Waveform::new(shape, frequency, amplitude, phase_deg, duty, sample_rate)?.synth(0, n))
}
