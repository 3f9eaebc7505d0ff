//! Single-bin DFT at the drive frequency.
//!
//! Over a window holding a whole number `k` of periods, every harmonic of
//! `f` lands on its own bin, so the projection onto bin `k` returns the
//! fundamental alone.

use crate::error::{Error, Result};
use crate::trig::sin_pi_ratio;

use super::wave::WaveSamples;

const PERIOD_TOLERANCE: f64 = 1e-9;

/// Whole periods of `f` in `n` samples at `rate`, if the count is integral.
pub fn whole_periods(n: usize, f: f64, rate: f64) -> Option<u64> {
    let cycles = n as f64 * f / rate;
    let k = cycles.round();
    if k >= 1.0 && (cycles - k).abs() <= PERIOD_TOLERANCE * cycles.max(1.0) {
        Some(k as u64)
    } else {
        None
    }
}

/// Longest prefix length `≤ n` that holds a whole number of periods.
pub fn integer_period_window(n: usize, f: f64, rate: f64) -> Option<usize> {
    (1..=n).rev().find(|&m| whole_periods(m, f, rate).is_some())
}

/// `(A, phase_deg)` of `A·sin(2πf·t + phase)` in `values`, with `t = 0` at
/// the first value. Phase is in [0, 360); a zero fundamental reports 0.
pub fn estimate_phasor(values: &[f64], f: f64, rate: f64) -> Result<(f64, f64)> {
    let n = values.len();
    let k = whole_periods(n, f, rate).ok_or(Error::WindowNotIntegerPeriods { samples: n })?;
    if 2 * k >= n as u64 {
        return Err(Error::SampleRateTooLow { rate, freq: f });
    }
    let (n64, k) = (n as u64, k % n as u64);
    let (mut c, mut s) = (0.0, 0.0);
    for (i, &x) in values.iter().enumerate() {
        let r = (k * i as u64) % n64;
        // cos(2πr/n) = sin(π(4r + n)/(2n))
        c += x * sin_pi_ratio(4 * r + n64, 2 * n64);
        s += x * sin_pi_ratio(2 * r, n64);
    }
    // A·sin(θ + φ) projects to (A/2·sinφ, A/2·cosφ) per sample on (cos θ, sin θ)
    let amplitude = 2.0 * c.hypot(s) / n as f64;
    if amplitude == 0.0 {
        return Ok((0.0, 0.0));
    }
    let phase = c.atan2(s).to_degrees().rem_euclid(360.0);
    Ok((amplitude, if phase >= 360.0 { 0.0 } else { phase }))
}

/// Fundamental amplitude (unit amplitudes) and phase of a quantised channel.
pub fn extract_channel_phasor(samples: &WaveSamples, f: f64) -> Result<(f64, f64)> {
    estimate_phasor(&samples.to_units(), f, samples.sample_rate)
}
