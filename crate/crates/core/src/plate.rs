//! Steady-state response of a simply supported Kirchhoff plate under point
//! harmonic loads.
//!
//! The displacement is expanded over the normalised eigenfunctions
//!
//! ```text
//! φ_mn(x, y) = 2/√(a·b·ρ·h) · sin(mπx/a) · sin(nπy/b)
//! ```
//!
//! and for a load `A·sin(2πft + φ)` applied at `(x₀, y₀)` every modal
//! coordinate oscillates at the drive frequency with amplitude
//! `φ_mn(x₀, y₀)·A / (D·λ_mn² − ρh·(2πf)²)`. No damping is modelled, so modes
//! too close to the drive frequency are rejected instead of blowing up.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::trig::{cos_sin_deg, sin_pi, sin_pi_ratio};

/// Number of coil actuators on the board.
pub const ACTUATOR_COUNT: usize = 5;

/// Relative guard on the modal denominator, measured against the inertial
/// term `ρh·(2πf)²`.
pub const RESONANCE_GUARD_EPSILON: f64 = 1e-3;

/// Modes with natural frequency up to this multiple of the drive frequency
/// are kept. See the convergence tests in this module for the sweep that
/// fixes the value.
pub const DEFAULT_TRUNCATION_MULTIPLE: f64 = 2000.0;

pub const DEFAULT_DRIVE_FREQUENCY: f64 = 160.0;
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 64;

/// A location on the plate in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_mm(x_mm: f64, y_mm: f64) -> Self {
        Self::new(x_mm / 1e3, y_mm / 1e3)
    }

    pub fn to_mm(self) -> (f64, f64) {
        (self.x * 1e3, self.y * 1e3)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Geometry, material and pixel grid of the vibration board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    /// Extent along x (m).
    pub width: f64,
    /// Extent along y (m).
    pub length: f64,
    pub thickness: f64,
    pub youngs_modulus: f64,
    pub poisson: f64,
    pub density: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
}

impl Default for PlateSpec {
    /// 71.5 × 146.7 mm PMMA board; the thickness puts the 160 Hz bending
    /// wavelength at about 187 mm.
    fn default() -> Self {
        Self {
            width: 71.5e-3,
            length: 146.7e-3,
            thickness: 1.75e-3,
            youngs_modulus: 3.2e9,
            poisson: 0.35,
            density: 1190.0,
            grid_nx: 179,
            grid_ny: 367,
        }
    }
}

impl PlateSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width", self.width),
            ("length", self.length),
            ("thickness", self.thickness),
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::InvalidSpec(format!(
                "poisson ratio must lie in (0, 0.5), got {}",
                self.poisson
            )));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid must be at least 2x2, got {}x{}",
                self.grid_nx, self.grid_ny
            )));
        }
        let d = self.flexural_rigidity();
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidSpec(format!("flexural rigidity {d} is not positive")));
        }
        Ok(())
    }

    /// `D = E·h³ / (12·(1 − ν²))`.
    pub fn flexural_rigidity(&self) -> f64 {
        self.youngs_modulus * self.thickness.powi(3) / (12.0 * (1.0 - self.poisson * self.poisson))
    }

    /// Mass per unit area `ρ·h`.
    pub fn areal_density(&self) -> f64 {
        self.density * self.thickness
    }

    /// Free bending wavelength `2π·(D / (ρh·ω²))^{1/4}` at `freq` Hz.
    pub fn bending_wavelength(&self, freq: f64) -> f64 {
        let omega = 2.0 * PI * freq;
        2.0 * PI * (self.flexural_rigidity() / (self.areal_density() * omega * omega)).powf(0.25)
    }

    /// Eigenvalue `λ_mn = (mπ/a)² + (nπ/b)²`.
    pub fn eigenvalue(&self, m: u32, n: u32) -> f64 {
        let km = f64::from(m) * PI / self.width;
        let kn = f64::from(n) * PI / self.length;
        km * km + kn * kn
    }

    /// Natural frequency (Hz) for eigenvalue `lambda`.
    pub fn natural_frequency(&self, lambda: f64) -> f64 {
        (self.flexural_rigidity() / self.areal_density()).sqrt() * lambda / (2.0 * PI)
    }

    /// Eigenfunction scale `2/√(a·b·ρ·h)`.
    pub fn norm_scale(&self) -> f64 {
        2.0 / (self.width * self.length * self.areal_density()).sqrt()
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.length).contains(&p.y)
    }

    pub fn strictly_contains(&self, p: Point) -> bool {
        p.x > 0.0 && p.x < self.width && p.y > 0.0 && p.y < self.length
    }

    pub fn pixel_count(&self) -> usize {
        self.grid_nx * self.grid_ny
    }

    /// Physical location of pixel `(ix, iy)`; the corner pixels sit on the
    /// plate corners.
    pub fn pixel_position(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.width * ix as f64 / (self.grid_nx - 1) as f64,
            self.length * iy as f64 / (self.grid_ny - 1) as f64,
        )
    }

    /// Pixel closest to `p`, clamped to the grid.
    pub fn nearest_pixel(&self, p: Point) -> (usize, usize) {
        let fx = (p.x / self.width * (self.grid_nx - 1) as f64).round();
        let fy = (p.y / self.length * (self.grid_ny - 1) as f64).round();
        (
            fx.clamp(0.0, (self.grid_nx - 1) as f64) as usize,
            fy.clamp(0.0, (self.grid_ny - 1) as f64) as usize,
        )
    }

    /// Stable 64-bit digest of every field, used to tag energy images.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        for v in [
            self.width,
            self.length,
            self.thickness,
            self.youngs_modulus,
            self.poisson,
            self.density,
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.grid_nx as u64).to_le_bytes());
        h.update((self.grid_ny as u64).to_le_bytes());
        let digest = h.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(word)
    }
}

/// Positions of the five actuators, in actuator order 1..=5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLayout {
    pub positions: [Point; ACTUATOR_COUNT],
}

impl ActuatorLayout {
    /// Quincunx: actuator 3 in the centre, the others inset from the corners
    /// (1 and 2 along y = inset, 4 and 5 along y = b − inset).
    pub fn quincunx(spec: &PlateSpec, inset: f64) -> Self {
        let (a, b) = (spec.width, spec.length);
        Self {
            positions: [
                Point::new(inset, inset),
                Point::new(a - inset, inset),
                Point::new(a / 2.0, b / 2.0),
                Point::new(inset, b - inset),
                Point::new(a - inset, b - inset),
            ],
        }
    }

    pub fn default_for(spec: &PlateSpec) -> Self {
        Self::quincunx(spec, 15e-3)
    }

    pub fn validate(&self, spec: &PlateSpec) -> Result<()> {
        for (i, p) in self.positions.iter().enumerate() {
            if !spec.strictly_contains(*p) {
                return Err(Error::InvalidSpec(format!(
                    "actuator {} at ({}, {}) m is not strictly inside the plate",
                    i + 1,
                    p.x,
                    p.y
                )));
            }
        }
        Ok(())
    }

    /// Position of actuator `index` (1-based).
    pub fn position(&self, index: usize) -> Result<Point> {
        actuator_slot(index).map(|i| self.positions[i])
    }
}

/// Map a 1-based actuator index to a slot.
pub(crate) fn actuator_slot(index: usize) -> Result<usize> {
    if (1..=ACTUATOR_COUNT).contains(&index) {
        Ok(index - 1)
    } else {
        Err(Error::BadActuator(index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveShape {
    Sine,
    Triangle,
    Square,
    Ramp,
}

impl WaveShape {
    pub fn name(self) -> &'static str {
        match self {
            WaveShape::Sine => "sine",
            WaveShape::Triangle => "triangle",
            WaveShape::Square => "square",
            WaveShape::Ramp => "ramp",
        }
    }
}

impl std::str::FromStr for WaveShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sine" => Ok(WaveShape::Sine),
            "triangle" => Ok(WaveShape::Triangle),
            "square" => Ok(WaveShape::Square),
            "ramp" => Ok(WaveShape::Ramp),
            other => Err(Error::Config(format!("unknown wave shape '{other}'"))),
        }
    }
}

/// Drive applied to one actuator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveWave {
    pub shape: WaveShape,
    pub frequency: f64,
    pub amplitude: f64,
    /// Integer degrees in `0..360`.
    pub phase_deg: u16,
    pub duty: f64,
}

impl DriveWave {
    pub fn sine(frequency: f64, amplitude: f64, phase_deg: u16) -> Self {
        Self {
            shape: WaveShape::Sine,
            frequency,
            amplitude,
            phase_deg,
            duty: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::Config(format!("frequency must be positive, got {}", self.frequency)));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::Config(format!("amplitude must be non-negative, got {}", self.amplitude)));
        }
        if self.phase_deg >= 360 {
            return Err(Error::Config(format!("phase must be below 360 degrees, got {}", self.phase_deg)));
        }
        Ok(())
    }
}

/// One retained plate mode at a given drive frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEntry {
    pub m: u32,
    pub n: u32,
    pub lambda: f64,
    pub norm_scale: f64,
    pub natural_freq: f64,
    /// `D·λ² − ρh·(2πf)²`.
    pub response_denominator: f64,
}

/// Normalised eigenfunction `φ_mn(x, y)`.
pub fn eigenfunction(spec: &PlateSpec, m: u32, n: u32, x: f64, y: f64) -> Result<f64> {
    if !spec.contains(Point::new(x, y)) {
        return Err(Error::OutOfDomain { x, y });
    }
    if m == 0 || n == 0 {
        return Err(Error::Config(format!("modal indices must be positive, got ({m}, {n})")));
    }
    Ok(eigen_unchecked(spec, spec.norm_scale(), m, n, Point::new(x, y)))
}

fn eigen_unchecked(spec: &PlateSpec, scale: f64, m: u32, n: u32, p: Point) -> f64 {
    scale * sin_pi(f64::from(m) * (p.x / spec.width)) * sin_pi(f64::from(n) * (p.y / spec.length))
}

/// Truncated modal basis for one plate, actuator layout and drive frequency.
///
/// Alongside the mode list it caches each actuator's unit-amplitude,
/// zero-phase displacement field `C_i(x, y)` on the pixel grid. Without
/// damping these fields are real; a drive with phase `φ` contributes
/// `A·sin(θ + φ)·C_i` at time phase `θ`.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    spec: PlateSpec,
    layout: ActuatorLayout,
    drive_frequency: f64,
    truncation_multiple: f64,
    modes: Vec<ModeEntry>,
    per_actuator_coeffs: Vec<[f64; ACTUATOR_COUNT]>,

    max_n: usize,
    /// `sin(mπx_p/a)`, indexed `[m-1][p]`.
    x_table: Vec<Vec<f64>>,
    /// `sin(nπy_q/b)`, indexed `[n-1][q]`.
    y_table: Vec<Vec<f64>>,
    fields: [Vec<f64>; ACTUATOR_COUNT],
}

impl ModalBasis {
    pub fn build(
        spec: &PlateSpec,
        layout: &ActuatorLayout,
        drive_frequency: f64,
        truncation_multiple: f64,
    ) -> Result<Self> {
        spec.validate()?;
        layout.validate(spec)?;
        if !(drive_frequency.is_finite() && drive_frequency > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "drive frequency must be positive, got {drive_frequency}"
            )));
        }
        if !(truncation_multiple.is_finite() && truncation_multiple >= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "truncation multiple must be at least 1, got {truncation_multiple}"
            )));
        }

        let modes = enumerate_modes(spec, drive_frequency, truncation_multiple)?;
        let scale = spec.norm_scale();
        let per_actuator_coeffs = modes
            .iter()
            .map(|mode| {
                let mut row = [0.0; ACTUATOR_COUNT];
                for (slot, p) in layout.positions.iter().enumerate() {
                    row[slot] = eigen_unchecked(spec, scale, mode.m, mode.n, *p);
                }
                row
            })
            .collect();

        let max_m = modes.iter().map(|e| e.m as usize).max().unwrap_or(0);
        let max_n = modes.iter().map(|e| e.n as usize).max().unwrap_or(0);
        let x_table = sine_table(max_m, spec.grid_nx);
        let y_table = sine_table(max_n, spec.grid_ny);

        let mut basis = Self {
            spec: spec.clone(),
            layout: layout.clone(),
            drive_frequency,
            truncation_multiple,
            modes,
            per_actuator_coeffs,

            max_n,
            x_table,
            y_table,
            fields: Default::default(),
        };
        let fields: Vec<Vec<f64>> = (0..ACTUATOR_COUNT)
            .map(|slot| {
                let amps: Vec<f64> = basis
                    .per_actuator_coeffs
                    .iter()
                    .zip(&basis.modes)
                    .map(|(row, mode)| row[slot] / mode.response_denominator)
                    .collect();
                basis.synthesize_field(&amps)
            })
            .collect();
        for (slot, f) in fields.into_iter().enumerate() {
            basis.fields[slot] = f;
        }
        Ok(basis)
    }

    pub fn spec(&self) -> &PlateSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ActuatorLayout {
        &self.layout
    }

    pub fn drive_frequency(&self) -> f64 {
        self.drive_frequency
    }

    pub fn truncation_multiple(&self) -> f64 {
        self.truncation_multiple
    }

    /// Retained modes, sorted by `(m, n)`.
    pub fn modes(&self) -> &[ModeEntry] {
        &self.modes
    }

    /// `φ_mn(x₀ᵢ, y₀ᵢ)` for the mode at `mode_index`, by actuator slot.
    pub fn actuator_coefficients(&self, mode_index: usize) -> &[f64; ACTUATOR_COUNT] {
        &self.per_actuator_coeffs[mode_index]
    }

    /// Unit-amplitude, zero-phase response field of actuator `index`
    /// (1-based), row-major with `grid_nx` columns.
    pub fn actuator_field(&self, index: usize) -> Result<&[f64]> {
        actuator_slot(index).map(|slot| self.fields[slot].as_slice())
    }

    pub(crate) fn fields(&self) -> &[Vec<f64>; ACTUATOR_COUNT] {
        &self.fields
    }

    fn mode_index(&self, mode: &ModeEntry) -> Option<usize> {
        self.modes
            .binary_search_by(|e| (e.m, e.n).cmp(&(mode.m, mode.n)))
            .ok()
    }

    /// Unit-amplitude, zero-phase response field of a virtual point source
    /// at `p`.
    pub fn point_source_field(&self, p: Point) -> Result<Vec<f64>> {
        if !self.spec.strictly_contains(p) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y });
        }
        let scale = self.spec.norm_scale();
        let amps: Vec<f64> = self
            .modes
            .iter()
            .map(|mode| eigen_unchecked(&self.spec, scale, mode.m, mode.n, p) / mode.response_denominator)
            .collect();
        Ok(self.synthesize_field(&amps))
    }

    /// `Σ_mn amp_mn · φ_mn(x, y)` on the grid.
    ///
    /// The sum is separable: for each `n` the `m` terms are first folded into
    /// a row over x, then rows are combined over y. The accumulation order is
    /// fixed, so results do not depend on threading.
    fn synthesize_field(&self, amps: &[f64]) -> Vec<f64> {
        let nx = self.spec.grid_nx;
        let ny = self.spec.grid_ny;
        let scale = self.spec.norm_scale();

        let mut rows = vec![vec![0.0; nx]; self.max_n];
        for (mode, amp) in self.modes.iter().zip(amps) {
            let w = amp * scale;
            if w == 0.0 {
                continue;
            }
            let xs = &self.x_table[mode.m as usize - 1];
            let row = &mut rows[mode.n as usize - 1];
            for (r, s) in row.iter_mut().zip(xs) {
                *r += w * s;
            }
        }

        let mut field = vec![0.0; nx * ny];
        for (n_idx, row) in rows.iter().enumerate() {
            let ys = &self.y_table[n_idx];
            for (q, out) in field.chunks_exact_mut(nx).enumerate() {
                let sy = ys[q];
                if sy == 0.0 {
                    continue;
                }
                for (o, r) in out.iter_mut().zip(row) {
                    *o += sy * r;
                }
            }
        }
        field
    }
}

fn sine_table(max_index: usize, points: usize) -> Vec<Vec<f64>> {
    let den = (points - 1) as u64;
    (1..=max_index as u64)
        .map(|k| (0..points as u64).map(|p| sin_pi_ratio(k * p, den)).collect())
        .collect()
}

fn enumerate_modes(spec: &PlateSpec, f: f64, multiple: f64) -> Result<Vec<ModeEntry>> {
    let limit = multiple * f;
    let d = spec.flexural_rigidity();
    let rho_h = spec.areal_density();
    let omega = 2.0 * PI * f;
    let inertia = rho_h * omega * omega;
    let scale = spec.norm_scale();

    let mut modes = Vec::new();
    let mut m = 1u32;
    while spec.natural_frequency(spec.eigenvalue(m, 1)) <= limit {
        let mut n = 1u32;
        loop {
            let lambda = spec.eigenvalue(m, n);
            let natural_freq = spec.natural_frequency(lambda);
            if natural_freq > limit {
                break;
            }
            let response_denominator = d * lambda * lambda - inertia;
            if response_denominator.abs() <= RESONANCE_GUARD_EPSILON * inertia {
                return Err(Error::Resonance {
                    m,
                    n,
                    natural_freq,
                    drive_freq: f,
                });
            }
            modes.push(ModeEntry {
                m,
                n,
                lambda,
                norm_scale: scale,
                natural_freq,
                response_denominator,
            });
            n += 1;
        }
        m += 1;
    }
    Ok(modes)
}

/// Modal coordinate amplitude `Ω₀·A / (D·λ² − ρh·(2πf)²)` for one actuator.
pub fn modal_response_amplitude(
    basis: &ModalBasis,
    mode: &ModeEntry,
    actuator: usize,
    amplitude: f64,
) -> Result<f64> {
    let slot = actuator_slot(actuator)?;
    let idx = basis
        .mode_index(mode)
        .ok_or_else(|| Error::Config(format!("mode ({}, {}) is not in the basis", mode.m, mode.n)))?;
    let entry = &basis.modes[idx];
    let inertia = basis.spec.areal_density() * (2.0 * PI * basis.drive_frequency).powi(2);
    if entry.response_denominator.abs() <= RESONANCE_GUARD_EPSILON * inertia {
        return Err(Error::Resonance {
            m: entry.m,
            n: entry.n,
            natural_freq: entry.natural_freq,
            drive_freq: basis.drive_frequency,
        });
    }
    Ok(basis.per_actuator_coeffs[idx][slot] * amplitude / entry.response_denominator)
}

/// Time-sampled displacement field over one drive period.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSeries {
    pub nx: usize,
    pub ny: usize,
    /// Phase `θ_s = 2πs/S` of each frame, in radians.
    pub sample_phases: Vec<f64>,
    /// Row-major frames, `nx` columns by `ny` rows, in meters.
    pub frames: Vec<Vec<f64>>,
}

impl PatternSeries {
    pub fn zeros(nx: usize, ny: usize, samples: usize) -> Self {
        Self {
            nx,
            ny,
            sample_phases: sample_phases(samples),
            frames: vec![vec![0.0; nx * ny]; samples],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn value(&self, frame: usize, ix: usize, iy: usize) -> f64 {
        self.frames[frame][iy * self.nx + ix]
    }
}

pub(crate) fn sample_phases(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|s| 2.0 * PI * s as f64 / samples as f64)
        .collect()
}

/// `(cos θ_s, sin θ_s)` for sample `s` of `samples`.
pub(crate) fn sample_cos_sin(s: usize, samples: usize) -> (f64, f64) {
    cos_sin_deg(360.0 * s as f64 / samples as f64)
}

/// `sin(θ_s + φ)` via the angle-sum identity, so that a 180° phase offset
/// flips the sign exactly.
pub(crate) fn drive_factor(s: usize, samples: usize, phase_deg: f64) -> f64 {
    let (ct, st) = sample_cos_sin(s, samples);
    let (cp, sp) = cos_sin_deg(phase_deg);
    st * cp + ct * sp
}

pub(crate) fn check_samples(samples: usize) -> Result<()> {
    if samples < 3 {
        return Err(Error::Config(format!(
            "at least 3 samples per period are required, got {samples}"
        )));
    }
    Ok(())
}

/// Displacement frames over one period for a single driven actuator.
pub fn single_actuator_pattern(
    basis: &ModalBasis,
    actuator: usize,
    wave: &DriveWave,
    samples_per_period: usize,
) -> Result<PatternSeries> {
    let slot = actuator_slot(actuator)?;
    wave.validate()?;
    if wave.shape != WaveShape::Sine {
        return Err(Error::UnsupportedWaveShape(wave.shape.name()));
    }
    if wave.frequency != basis.drive_frequency {
        return Err(Error::FrequencyMismatch {
            wave: wave.frequency,
            basis: basis.drive_frequency,
        });
    }
    check_samples(samples_per_period)?;

    let field = &basis.fields[slot];
    let frames = (0..samples_per_period)
        .map(|s| {
            let factor = wave.amplitude * drive_factor(s, samples_per_period, f64::from(wave.phase_deg));
            field.iter().map(|c| factor * c).collect()
        })
        .collect();
    Ok(PatternSeries {
        nx: basis.spec.grid_nx,
        ny: basis.spec.grid_ny,
        sample_phases: sample_phases(samples_per_period),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> PlateSpec {
        PlateSpec {
            grid_nx: 37,
            grid_ny: 75,
            ..PlateSpec::default()
        }
    }

    fn basis_with(spec: &PlateSpec, multiple: f64) -> ModalBasis {
        ModalBasis::build(spec, &ActuatorLayout::default_for(spec), 160.0, multiple).unwrap()
    }

    #[test]
    fn flexural_rigidity_formula() {
        let s = PlateSpec::default();
        let d = 3.2e9 * 1.75e-3f64.powi(3) / (12.0 * (1.0 - 0.35 * 0.35));
        assert_eq!(s.flexural_rigidity(), d);
        s.validate().unwrap();
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = PlateSpec {
            poisson: 0.5,
            ..PlateSpec::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
        let bad = PlateSpec {
            grid_nx: 1,
            ..PlateSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlateSpec {
            thickness: -1.0,
            ..PlateSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pixel_mapping_corners() {
        let s = PlateSpec::default();
        assert_eq!(s.pixel_position(0, 0), Point::new(0.0, 0.0));
        let far = s.pixel_position(s.grid_nx - 1, s.grid_ny - 1);
        assert_eq!(far, Point::new(s.width, s.length));
        assert_eq!(s.nearest_pixel(Point::new(s.width / 2.0, s.length / 2.0)), (89, 183));
    }

    #[test]
    fn eigenfunction_examples() {
        let s = PlateSpec::default();
        let (a, b) = (s.width, s.length);
        let peak = 2.0 / (a * b * s.density * s.thickness).sqrt();
        assert_eq!(eigenfunction(&s, 1, 1, a / 2.0, b / 2.0).unwrap(), peak);
        for &(m, n) in &[(1, 1), (2, 3), (7, 5)] {
            for k in 0..=10 {
                let y = b * k as f64 / 10.0;
                assert_eq!(eigenfunction(&s, m, n, 0.0, y).unwrap(), 0.0);
                assert_eq!(eigenfunction(&s, m, n, a, y).unwrap(), 0.0);
            }
        }
        for k in 0..=10 {
            let y = b * k as f64 / 10.0;
            assert_eq!(eigenfunction(&s, 2, 1, a / 2.0, y).unwrap(), 0.0);
        }
        assert!(matches!(
            eigenfunction(&s, 1, 1, a + 1e-3, 0.0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(eigenfunction(&s, 1, 1, 0.01, -1e-6).is_err());
    }

    #[test]
    fn truncation_keeps_exactly_the_modes_below_the_limit() {
        let s = PlateSpec::default();
        let basis = basis_with(&s, 10.0);
        let limit = 1600.0;
        assert!(!basis.modes().is_empty());
        for e in basis.modes() {
            assert!(e.natural_freq <= limit);
        }
        // brute-force enumeration over a generous box
        let mut expected = Vec::new();
        for m in 1..60 {
            for n in 1..60 {
                if s.natural_frequency(s.eigenvalue(m, n)) <= limit {
                    expected.push((m, n));
                }
            }
        }
        let got: Vec<_> = basis.modes().iter().map(|e| (e.m, e.n)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn mode_entry_fields_are_consistent() {
        let s = PlateSpec::default();
        let basis = basis_with(&s, 10.0);
        let d = s.flexural_rigidity();
        let rho_h = s.areal_density();
        for e in basis.modes() {
            let lambda = (e.m as f64 * PI / s.width).powi(2) + (e.n as f64 * PI / s.length).powi(2);
            assert!((e.lambda - lambda).abs() <= 1e-12 * lambda);
            let fnat = (d / rho_h).sqrt() * lambda / (2.0 * PI);
            assert!((e.natural_freq - fnat).abs() <= 1e-12 * fnat);
            assert_eq!(e.norm_scale, s.norm_scale());
        }
    }

    #[test]
    fn drive_at_natural_frequency_is_rejected() {
        let s = small_spec();
        let f11 = s.natural_frequency(s.eigenvalue(1, 1));
        let err = ModalBasis::build(&s, &ActuatorLayout::default_for(&s), f11, 10.0).unwrap_err();
        assert!(matches!(err, Error::Resonance { m: 1, n: 1, .. }));
        let f23 = s.natural_frequency(s.eigenvalue(2, 3));
        let err = ModalBasis::build(&s, &ActuatorLayout::default_for(&s), f23 * (1.0 + 1e-5), 10.0)
            .unwrap_err();
        assert!(matches!(err, Error::Resonance { m: 2, n: 3, .. }));
    }

    #[test]
    fn build_rejects_bad_arguments() {
        let s = small_spec();
        let l = ActuatorLayout::default_for(&s);
        assert!(ModalBasis::build(&s, &l, 0.0, 10.0).is_err());
        assert!(ModalBasis::build(&s, &l, 160.0, 0.5).is_err());
        let mut outside = l.clone();
        outside.positions[0] = Point::new(0.0, 0.01);
        assert!(matches!(
            ModalBasis::build(&s, &outside, 160.0, 10.0),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn modal_amplitude_matches_scalar_oracle() {
        let s = PlateSpec::default();
        let basis = basis_with(&s, 10.0);
        let mode = basis.modes()[0];
        assert_eq!((mode.m, mode.n), (1, 1));
        // hand evaluation of the modal formula, independent of the basis cache
        let a = 71.5e-3f64;
        let b = 146.7e-3f64;
        let h = 1.75e-3f64;
        let rho = 1190.0f64;
        let d = 3.2e9 * h * h * h / (12.0 * (1.0 - 0.35 * 0.35));
        let lambda = (PI / a).powi(2) + (PI / b).powi(2);
        let omega = 2.0 * PI * 160.0;
        // actuator 1 at (15 mm, 15 mm)
        let phi0 = 2.0 / (a * b * rho * h).sqrt() * (PI * 15e-3 / a).sin() * (PI * 15e-3 / b).sin();
        let expected = phi0 / (d * lambda * lambda - rho * h * omega * omega);
        let got = modal_response_amplitude(&basis, &mode, 1, 1.0).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12, "{got} vs {expected}");

        let center = 2.0 / (a * b * rho * h).sqrt() / (d * lambda * lambda - rho * h * omega * omega);
        let got = modal_response_amplitude(&basis, &mode, 3, 1.0).unwrap();
        assert!(((got - center) / center).abs() < 1e-12);
    }

    #[test]
    fn modal_amplitude_zero_cases() {
        let s = PlateSpec::default();
        let basis = basis_with(&s, 10.0);
        for mode in basis.modes() {
            for act in 1..=5 {
                assert_eq!(modal_response_amplitude(&basis, mode, act, 0.0).unwrap(), 0.0);
            }
            if mode.m == 2 {
                assert_eq!(modal_response_amplitude(&basis, mode, 3, 1.0).unwrap(), 0.0);
            }
        }
        assert!(matches!(
            modal_response_amplitude(&basis, &basis.modes()[0], 6, 1.0),
            Err(Error::BadActuator(6))
        ));
    }

    #[test]
    fn pattern_rejects_wrong_drive() {
        let s = small_spec();
        let basis = basis_with(&s, 10.0);
        let mut wave = DriveWave::sine(160.0, 1.0, 0);
        wave.shape = WaveShape::Square;
        assert!(matches!(
            single_actuator_pattern(&basis, 1, &wave, 16),
            Err(Error::UnsupportedWaveShape("square"))
        ));
        let wave = DriveWave::sine(161.0, 1.0, 0);
        assert!(matches!(
            single_actuator_pattern(&basis, 1, &wave, 16),
            Err(Error::FrequencyMismatch { .. })
        ));
        let wave = DriveWave::sine(160.0, 1.0, 0);
        assert!(single_actuator_pattern(&basis, 1, &wave, 2).is_err());
    }

    #[test]
    fn zero_amplitude_gives_zero_frames() {
        let s = small_spec();
        let basis = basis_with(&s, 50.0);
        let series = single_actuator_pattern(&basis, 2, &DriveWave::sine(160.0, 0.0, 77), 16).unwrap();
        assert_eq!(series.len(), 16);
        assert!(series.frames.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn frames_vanish_on_edges() {
        let s = small_spec();
        let basis = basis_with(&s, 200.0);
        for act in 1..=5 {
            let series = single_actuator_pattern(&basis, act, &DriveWave::sine(160.0, 1.0, 33), 8).unwrap();
            for frame in &series.frames {
                for ix in 0..s.grid_nx {
                    assert_eq!(frame[ix], 0.0);
                    assert_eq!(frame[(s.grid_ny - 1) * s.grid_nx + ix], 0.0);
                }
                for iy in 0..s.grid_ny {
                    assert_eq!(frame[iy * s.grid_nx], 0.0);
                    assert_eq!(frame[iy * s.grid_nx + s.grid_nx - 1], 0.0);
                }
            }
        }
    }

    #[test]
    fn center_actuator_is_mirror_symmetric() {
        let s = small_spec();
        let basis = basis_with(&s, 200.0);
        let series = single_actuator_pattern(&basis, 3, &DriveWave::sine(160.0, 1.0, 0), 8).unwrap();
        let (nx, ny) = (s.grid_nx, s.grid_ny);
        for frame in &series.frames {
            let peak = frame.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for iy in 0..ny {
                for ix in 0..nx {
                    let v = frame[iy * nx + ix];
                    let mx = frame[iy * nx + (nx - 1 - ix)];
                    let my = frame[(ny - 1 - iy) * nx + ix];
                    assert!((v - mx).abs() <= 1e-12 * peak);
                    assert!((v - my).abs() <= 1e-12 * peak);
                }
            }
        }
    }

    #[test]
    fn half_turn_phase_negates_frames() {
        let s = small_spec();
        let basis = basis_with(&s, 50.0);
        for phase in [0u16, 17, 90, 179] {
            let p = single_actuator_pattern(&basis, 1, &DriveWave::sine(160.0, 1.3, phase), 12).unwrap();
            let q = single_actuator_pattern(&basis, 1, &DriveWave::sine(160.0, 1.3, phase + 180), 12).unwrap();
            for (fa, fb) in p.frames.iter().zip(&q.frames) {
                for (x, y) in fa.iter().zip(fb) {
                    assert_eq!(*x, -*y);
                }
            }
        }
    }

    #[test]
    fn point_source_at_center_equals_actuator_three() {
        let s = small_spec();
        let basis = basis_with(&s, 50.0);
        let c = basis.point_source_field(basis.layout().positions[2]).unwrap();
        assert_eq!(c.as_slice(), basis.actuator_field(3).unwrap());
        assert!(basis.point_source_field(Point::new(0.0, 0.05)).is_err());
    }

    #[test]
    fn separable_synthesis_matches_direct_sum() {
        let s = PlateSpec {
            grid_nx: 13,
            grid_ny: 21,
            ..PlateSpec::default()
        };
        let basis = basis_with(&s, 100.0);
        let field = basis.actuator_field(1).unwrap();
        let src = basis.layout().positions[0];
        let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for iy in 0..s.grid_ny {
            for ix in 0..s.grid_nx {
                let p = s.pixel_position(ix, iy);
                let direct: f64 = basis
                    .modes()
                    .iter()
                    .map(|e| {
                        let at_src = eigenfunction(&s, e.m, e.n, src.x, src.y).unwrap();
                        let here = eigenfunction(&s, e.m, e.n, p.x, p.y).unwrap();
                        here * at_src / e.response_denominator
                    })
                    .sum();
                assert!((field[iy * s.grid_nx + ix] - direct).abs() <= 1e-11 * peak);
            }
        }
    }

    #[test]
    fn bending_wavelength_default() {
        let lw = PlateSpec::default().bending_wavelength(160.0);
        assert!((lw - 0.187).abs() / 0.187 < 0.02, "{lw}");
    }
}
