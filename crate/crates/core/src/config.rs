//! Run configuration as read from TOML, in millimetres.
//!
//! Every field is optional in the file; missing ones take the library
//! defaults. The resolved form is what gets echoed into output artifacts.
//!
//! ```toml
//! output_dir = "out"
//!
//! [plate]
//! width_mm = 71.5
//! grid_nx = 179
//!
//! [actuators]
//! inset_mm = 15.0
//! # positions_mm = [[15, 15], [56.5, 15], [35.75, 73.35], [15, 131.7], [56.5, 131.7]]
//!
//! [drive]
//! frequency_hz = 160.0
//!
//! [ssim]
//! window = 11
//! window_kind = "gaussian"
//!
//! [anneal]
//! iterations = 10000
//! seed = 0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anneal::AnnealConfig;
use crate::error::{Error, Result};
use crate::plate::{
    ActuatorLayout, ModalBasis, PlateSpec, Point, ACTUATOR_COUNT, DEFAULT_DRIVE_FREQUENCY,
    DEFAULT_SAMPLES_PER_PERIOD, DEFAULT_TRUNCATION_MULTIPLE,
};
use crate::ssim::{SsimParams, WindowKind};

/// Grid and iteration budget used by `--fast`.
pub const FAST_GRID: (usize, usize) = (90, 184);
pub const FAST_ITERATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateConfig {
    pub width_mm: f64,
    pub length_mm: f64,
    pub thickness_mm: f64,
    pub youngs_modulus_pa: f64,
    pub poisson: f64,
    pub density_kg_m3: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
}

impl Default for PlateConfig {
    fn default() -> Self {
        let s = PlateSpec::default();
        Self {
            width_mm: 71.5,
            length_mm: 146.7,
            thickness_mm: 1.75,
            youngs_modulus_pa: s.youngs_modulus,
            poisson: s.poisson,
            density_kg_m3: s.density,
            grid_nx: s.grid_nx,
            grid_ny: s.grid_ny,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorConfig {
    /// Corner inset of the quincunx layout; ignored when positions are given.
    pub inset_mm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions_mm: Option<Vec<[f64; 2]>>,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        Self {
            inset_mm: 15.0,
            positions_mm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub frequency_hz: f64,
    /// Modes up to this multiple of the drive frequency are kept.
    pub truncation_multiple: f64,
    pub samples_per_period: usize,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            frequency_hz: DEFAULT_DRIVE_FREQUENCY,
            truncation_multiple: DEFAULT_TRUNCATION_MULTIPLE,
            samples_per_period: DEFAULT_SAMPLES_PER_PERIOD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimConfig {
    pub window: usize,
    /// "gaussian" or "uniform".
    pub window_kind: String,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        let p = SsimParams::default();
        let sigma = match p.kind {
            WindowKind::Gaussian { sigma } => sigma,
            WindowKind::Uniform => 1.5,
        };
        Self {
            window: p.window,
            window_kind: "gaussian".into(),
            sigma,
            k1: p.k1,
            k2: p.k2,
            dynamic_range: p.dynamic_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: String,
    pub plate: PlateConfig,
    pub actuators: ActuatorConfig,
    pub drive: DriveConfig,
    pub ssim: SsimConfig,
    pub anneal: AnnealConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: "out".into(),
            plate: PlateConfig::default(),
            actuators: ActuatorConfig::default(),
            drive: DriveConfig::default(),
            ssim: SsimConfig::default(),
            anneal: AnnealConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Desk-scale grid and iteration budget.
    pub fn apply_fast(&mut self) {
        self.plate.grid_nx = FAST_GRID.0;
        self.plate.grid_ny = FAST_GRID.1;
        self.anneal.iterations = FAST_ITERATIONS;
    }

    pub fn plate_spec(&self) -> PlateSpec {
        let p = &self.plate;
        PlateSpec {
            width: p.width_mm / 1e3,
            length: p.length_mm / 1e3,
            thickness: p.thickness_mm / 1e3,
            youngs_modulus: p.youngs_modulus_pa,
            poisson: p.poisson,
            density: p.density_kg_m3,
            grid_nx: p.grid_nx,
            grid_ny: p.grid_ny,
        }
    }

    pub fn layout(&self) -> Result<ActuatorLayout> {
        let spec = self.plate_spec();
        let layout = match &self.actuators.positions_mm {
            None => ActuatorLayout::quincunx(&spec, self.actuators.inset_mm / 1e3),
            Some(list) => {
                if list.len() != ACTUATOR_COUNT {
                    return Err(Error::Config(format!(
                        "actuators.positions_mm needs {ACTUATOR_COUNT} entries, got {}",
                        list.len()
                    )));
                }
                let mut positions = [Point::new(0.0, 0.0); ACTUATOR_COUNT];
                for (slot, [x, y]) in positions.iter_mut().zip(list) {
                    *slot = Point::from_mm(*x, *y);
                }
                ActuatorLayout { positions }
            }
        };
        layout.validate(&spec)?;
        Ok(layout)
    }

    pub fn ssim_params(&self) -> Result<SsimParams> {
        let s = &self.ssim;
        let kind = match s.window_kind.as_str() {
            "gaussian" => WindowKind::Gaussian { sigma: s.sigma },
            "uniform" => WindowKind::Uniform,
            other => return Err(Error::Config(format!("unknown SSIM window kind '{other}'"))),
        };
        let params = SsimParams {
            window: s.window,
            kind,
            k1: s.k1,
            k2: s.k2,
            dynamic_range: s.dynamic_range,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks everything that can be checked without building the basis.
    pub fn validate(&self) -> Result<()> {
        self.plate_spec().validate()?;
        self.layout()?;
        self.ssim_params()?;
        self.anneal.validate()?;
        let d = &self.drive;
        if !(d.frequency_hz.is_finite() && d.frequency_hz > 0.0) {
            return Err(Error::Config(format!("drive frequency must be positive, got {}", d.frequency_hz)));
        }
        if !(d.truncation_multiple.is_finite() && d.truncation_multiple >= 1.0) {
            return Err(Error::Config(format!(
                "truncation_multiple must be at least 1, got {}",
                d.truncation_multiple
            )));
        }
        if d.samples_per_period < 3 {
            return Err(Error::Config("samples_per_period must be at least 3".into()));
        }
        if self.anneal.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must not exceed {}", i64::MAX)));
        }
        Ok(())
    }

    pub fn build_basis(&self) -> Result<ModalBasis> {
        self.validate()?;
        ModalBasis::build(
            &self.plate_spec(),
            &self.layout()?,
            self.drive.frequency_hz,
            self.drive.truncation_multiple,
        )
    }

    /// Hex SHA-256 (first 16 bytes) of everything except the output directory.
    pub fn fingerprint(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir.clear();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest[..16].iter().map(|b| format!("{b:02x}")).collect())
    }
}
