//! Superposition of actuator patterns and reduction to RMS energy images.
//!
//! Two routes produce an energy image from a gain spectrum:
//!
//! * time domain: [`superpose`] builds the displacement frames over one
//!   period and [`rms_energy`] takes the per-pixel RMS;
//! * phasor domain: [`phasor_energy`] folds the spectrum into one complex
//!   amplitude per actuator and takes `|Σ zᵢ·Cᵢ| / √2` per pixel.
//!
//! Every pixel oscillates at the drive frequency only, so both routes agree
//! whenever the period is sampled uniformly with at least three samples.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plate::{
    actuator_slot, check_samples, drive_factor, sample_cos_sin, sample_phases, ModalBasis,
    PatternSeries, PlateSpec, Point, ACTUATOR_COUNT,
};
use crate::trig::{cis_deg, cos_sin_deg};

/// Phase resolution of the gain spectrum: one entry per degree.
pub const PHASE_STEPS: usize = 360;

/// Upper bound on any gain, in unit amplitudes.
pub const GAIN_MAX: f64 = 10.0;

/// Non-negative gain for each actuator at each integer phase.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSpectrum {
    k: Vec<f64>,
}

impl GainSpectrum {
    pub fn zeros() -> Self {
        Self {
            k: vec![0.0; ACTUATOR_COUNT * PHASE_STEPS],
        }
    }

    /// Every entry drawn uniformly from `[0, max)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max: f64) -> Self {
        let k = (0..ACTUATOR_COUNT * PHASE_STEPS)
            .map(|_| rng.random::<f64>() * max)
            .collect();
        Self { k }
    }

    /// Builds from a row-major `5 × 360` slice.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != ACTUATOR_COUNT * PHASE_STEPS {
            return Err(Error::Config(format!(
                "gain spectrum needs {} entries, got {}",
                ACTUATOR_COUNT * PHASE_STEPS,
                values.len()
            )));
        }
        let g = Self { k: values };
        g.validate()?;
        Ok(g)
    }

    /// Gain of actuator `actuator` (1-based) at `phase` degrees.
    pub fn get(&self, actuator: usize, phase: usize) -> f64 {
        self.k[(actuator - 1) * PHASE_STEPS + phase]
    }

    pub fn set(&mut self, actuator: usize, phase: usize, value: f64) {
        self.k[(actuator - 1) * PHASE_STEPS + phase] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.k
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.k
    }

    /// Gains of one actuator slot (0-based) across all phases.
    pub fn row(&self, slot: usize) -> &[f64] {
        &self.k[slot * PHASE_STEPS..(slot + 1) * PHASE_STEPS]
    }

    pub fn validate(&self) -> Result<()> {
        for (idx, &v) in self.k.iter().enumerate() {
            if !(0.0..=GAIN_MAX).contains(&v) {
                return Err(Error::GainOutOfRange {
                    actuator: idx / PHASE_STEPS + 1,
                    phase: idx % PHASE_STEPS,
                    value: v,
                    max: GAIN_MAX,
                });
            }
        }
        Ok(())
    }

    /// Entry-wise `alpha·self + beta·other`, unchecked.
    pub fn combine(&self, alpha: f64, other: &GainSpectrum, beta: f64) -> GainSpectrum {
        GainSpectrum {
            k: self.k.iter().zip(&other.k).map(|(a, b)| alpha * a + beta * b).collect(),
        }
    }

    /// Rotates every actuator's spectrum by `offset` degrees.
    pub fn rotate_phases(&self, offset: usize) -> GainSpectrum {
        let mut out = GainSpectrum::zeros();
        for slot in 0..ACTUATOR_COUNT {
            for j in 0..PHASE_STEPS {
                out.k[slot * PHASE_STEPS + (j + offset) % PHASE_STEPS] = self.k[slot * PHASE_STEPS + j];
            }
        }
        out
    }
}

/// Per-actuator amplitude and phase after folding a gain spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorPhasor {
    pub amplitude: [f64; ACTUATOR_COUNT],
    /// Degrees in `[0, 360)`.
    pub phase_deg: [f64; ACTUATOR_COUNT],
}

impl ActuatorPhasor {
    pub fn zero() -> Self {
        Self {
            amplitude: [0.0; ACTUATOR_COUNT],
            phase_deg: [0.0; ACTUATOR_COUNT],
        }
    }

    pub fn from_complex(z: &[Complex64; ACTUATOR_COUNT]) -> Self {
        let mut out = Self::zero();
        for (slot, zi) in z.iter().enumerate() {
            let amp = zi.norm();
            if amp == 0.0 {
                continue;
            }
            out.amplitude[slot] = amp;
            out.phase_deg[slot] = normalize_deg(zi.im.atan2(zi.re).to_degrees());
        }
        out
    }

    pub fn to_complex(&self) -> [Complex64; ACTUATOR_COUNT] {
        std::array::from_fn(|slot| self.amplitude[slot] * cis_deg(self.phase_deg[slot]))
    }

    pub fn validate(&self) -> Result<()> {
        for slot in 0..ACTUATOR_COUNT {
            let a = self.amplitude[slot];
            let p = self.phase_deg[slot];
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("actuator {} amplitude {a} is invalid", slot + 1)));
            }
            if !(0.0..360.0).contains(&p) {
                return Err(Error::Config(format!("actuator {} phase {p} outside [0, 360)", slot + 1)));
            }
        }
        Ok(())
    }

    /// A gain spectrum whose collapse equals `self`.
    ///
    /// The phasor `A·e^{jφ}` with `d ≤ φ < d+1` is split across the bracketing
    /// integer phases, and each part is spread over a symmetric run of
    /// `2r + 1` degrees (`Σ_{|l|≤r} cos l°` times the per-entry gain) so that
    /// large amplitudes still respect the gain ceiling.
    pub fn to_gain_spectrum(&self) -> Result<GainSpectrum> {
        self.validate()?;
        let mut gains = GainSpectrum::zeros();
        for slot in 0..ACTUATOR_COUNT {
            let amp = self.amplitude[slot];
            if amp == 0.0 {
                continue;
            }
            let phi = self.phase_deg[slot];
            let d = phi.floor();
            let frac = phi - d;
            let sin1 = cos_sin_deg(1.0).1;
            let lo = amp * cos_sin_deg(1.0 - frac).1 / sin1;
            let hi = amp * cos_sin_deg(frac).1 / sin1;
            let mut spread = None;
            for r in 0..=89usize {
                let sum: f64 = (-(r as i64)..=r as i64).map(|l| cos_sin_deg(l as f64).0).sum();
                if (lo + hi) / sum <= GAIN_MAX {
                    spread = Some((r, sum));
                    break;
                }
            }
            let (r, sum) = spread.ok_or_else(|| {
                Error::Config(format!(
                    "actuator {} amplitude {amp} cannot be expressed within the gain ceiling",
                    slot + 1
                ))
            })?;
            let base = d as i64;
            for l in -(r as i64)..=r as i64 {
                let j0 = (base + l).rem_euclid(PHASE_STEPS as i64) as usize;
                let j1 = (base + 1 + l).rem_euclid(PHASE_STEPS as i64) as usize;
                gains.k[slot * PHASE_STEPS + j0] += lo / sum;
                gains.k[slot * PHASE_STEPS + j1] += hi / sum;
            }
        }
        Ok(gains)
    }
}

fn normalize_deg(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Per-pixel RMS displacement over one period, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyImage {
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `nx` columns.
    pub values: Vec<f64>,
    /// [`PlateSpec::fingerprint`] of the generating plate; 0 when synthetic.
    pub spec_hash: u64,
    /// Drive frequency in Hz; 0 when synthetic.
    pub drive_frequency: f64,
}

impl EnergyImage {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), nx * ny, "image buffer does not match {nx}x{ny}");
        Self {
            nx,
            ny,
            values,
            spec_hash: 0,
            drive_frequency: 0.0,
        }
    }

    fn tagged(spec: &PlateSpec, freq: f64, values: Vec<f64>) -> Self {
        Self {
            nx: spec.grid_nx,
            ny: spec.grid_ny,
            values,
            spec_hash: spec.fingerprint(),
            drive_frequency: freq,
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, &v| m.max(v))
    }

    /// First pixel holding the maximum, as `(ix, iy)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.nx, best / self.nx)
    }

    /// Returns the image scaled by `c`.
    pub fn scaled(&self, c: f64) -> EnergyImage {
        EnergyImage {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

/// Frame-wise sum `Σ_{i,j} k(i,j)·P(i, A=1, φ=j)`.
///
/// Each frame is `Σᵢ cᵢ(θ)·Cᵢ(x, y)` with the scalar weight
/// `cᵢ(θ) = Σⱼ k(i,j)·sin(θ + j°)` summed directly over the 360 phases.
pub fn superpose(basis: &ModalBasis, gains: &GainSpectrum, samples_per_period: usize) -> Result<PatternSeries> {
    gains.validate()?;
    check_samples(samples_per_period)?;
    let spec = basis.spec();
    let fields = basis.fields();
    let npix = spec.pixel_count();

    let frames = (0..samples_per_period)
        .map(|s| {
            let mut weights = [0.0; ACTUATOR_COUNT];
            for (slot, w) in weights.iter_mut().enumerate() {
                *w = gains
                    .row(slot)
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| k * drive_factor(s, samples_per_period, j as f64))
                    .sum();
            }
            let mut frame = vec![0.0; npix];
            for (slot, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (out, c) in frame.iter_mut().zip(&fields[slot]) {
                    *out += w * c;
                }
            }
            frame
        })
        .collect();

    Ok(PatternSeries {
        nx: spec.grid_nx,
        ny: spec.grid_ny,
        sample_phases: sample_phases(samples_per_period),
        frames,
    })
}

/// `E = √((1/S)·Σₛ wₛ²)` per pixel.
pub fn rms_energy(series: &PatternSeries) -> Result<EnergyImage> {
    if series.frames.is_empty() {
        return Err(Error::EmptySeries);
    }
    let npix = series.nx * series.ny;
    let mut acc = vec![0.0; npix];
    for frame in &series.frames {
        for (a, w) in acc.iter_mut().zip(frame) {
            *a += w * w;
        }
    }
    let inv = 1.0 / series.frames.len() as f64;
    for a in &mut acc {
        *a = (*a * inv).sqrt();
    }
    Ok(EnergyImage::new(series.nx, series.ny, acc))
}

/// Sum of unit phasors weighted by the spectrum, one per actuator.
pub(crate) fn spectrum_phasors(gains: &GainSpectrum) -> [Complex64; ACTUATOR_COUNT] {
    let table = unit_phasor_table();
    let mut z = [Complex64::new(0.0, 0.0); ACTUATOR_COUNT];
    for (slot, zi) in z.iter_mut().enumerate() {
        for (k, u) in gains.row(slot).iter().zip(table.iter()) {
            *zi += *k * *u;
        }
    }
    z
}

/// `e^{j·d°}` for `d` in `0..360`.
pub(crate) fn unit_phasor_table() -> &'static [Complex64; PHASE_STEPS] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[Complex64; PHASE_STEPS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Complex64::new(0.0, 0.0); PHASE_STEPS];
        for (d, slot) in t.iter_mut().enumerate() {
            *slot = cis_deg(d as f64);
        }
        t
    })
}

/// `|Σᵢ zᵢ·Cᵢ| / √2` per pixel, written into `out`.
pub(crate) fn phasor_energy_into(basis: &ModalBasis, z: &[Complex64; ACTUATOR_COUNT], out: &mut [f64]) {
    let fields = basis.fields();
    combine_fields(fields.iter().map(Vec::as_slice).zip(z.iter().copied()), out);
}

fn combine_fields<'a>(terms: impl Iterator<Item = (&'a [f64], Complex64)> + Clone, out: &mut [f64]) {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for (p, o) in out.iter_mut().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for (field, z) in terms.clone() {
            let c = field[p];
            re += z.re * c;
            im += z.im * c;
        }
        *o = (re * re + im * im).sqrt() * inv_sqrt2;
    }
}

/// Energy image from the phasor fast path.
pub fn phasor_energy(basis: &ModalBasis, gains: &GainSpectrum) -> Result<EnergyImage> {
    gains.validate()?;
    let z = spectrum_phasors(gains);
    Ok(phasor_energy_of(basis, &z))
}

/// Energy image for per-actuator complex amplitudes.
pub fn phasor_energy_of(basis: &ModalBasis, z: &[Complex64; ACTUATOR_COUNT]) -> EnergyImage {
    let spec = basis.spec();
    let mut values = vec![0.0; spec.pixel_count()];
    phasor_energy_into(basis, z, &mut values);
    EnergyImage::tagged(spec, basis.drive_frequency(), values)
}

/// Energy image of a collapsed per-actuator drive.
pub fn actuator_phasor_energy(basis: &ModalBasis, phasors: &ActuatorPhasor) -> Result<EnergyImage> {
    phasors.validate()?;
    Ok(phasor_energy_of(basis, &phasors.to_complex()))
}

/// Folds each actuator's 360 gains into a single amplitude and phase.
pub fn collapse_gains(gains: &GainSpectrum) -> Result<ActuatorPhasor> {
    gains.validate()?;
    Ok(ActuatorPhasor::from_complex(&spectrum_phasors(gains)))
}

/// Energy image of a virtual unit-amplitude, zero-phase source at `target`.
pub fn target_energy(basis: &ModalBasis, target: Point) -> Result<EnergyImage> {
    let field = basis.point_source_field(target)?;
    let spec = basis.spec();
    let mut values = vec![0.0; spec.pixel_count()];
    combine_fields(std::iter::once((field.as_slice(), Complex64::new(1.0, 0.0))), &mut values);
    Ok(EnergyImage::tagged(spec, basis.drive_frequency(), values))
}

/// Energy image of one actuator driven at amplitude `a` and `phase_deg`.
pub fn single_actuator_energy(basis: &ModalBasis, actuator: usize, a: f64, phase_deg: f64) -> Result<EnergyImage> {
    let slot = actuator_slot(actuator)?;
    let mut z = [Complex64::new(0.0, 0.0); ACTUATOR_COUNT];
    z[slot] = a * cis_deg(phase_deg);
    Ok(phasor_energy_of(basis, &z))
}

/// Frames of the time-domain route for arbitrary complex drives, used by the
/// drive-link loop to cross-check phasor images.
pub fn phasor_series(basis: &ModalBasis, z: &[Complex64; ACTUATOR_COUNT], samples: usize) -> Result<PatternSeries> {
    check_samples(samples)?;
    let spec = basis.spec();
    let fields = basis.fields();
    let frames = (0..samples)
        .map(|s| {
            let (ct, st) = sample_cos_sin(s, samples);
            let mut frame = vec![0.0; spec.pixel_count()];
            for (slot, zi) in z.iter().enumerate() {
                // Im(e^{jθ}·z) = A·sin(θ + φ)
                let w = st * zi.re + ct * zi.im;
                for (o, c) in frame.iter_mut().zip(&fields[slot]) {
                    *o += w * c;
                }
            }
            frame
        })
        .collect();
    Ok(PatternSeries {
        nx: spec.grid_nx,
        ny: spec.grid_ny,
        sample_phases: sample_phases(samples),
        frames,
    })
}
