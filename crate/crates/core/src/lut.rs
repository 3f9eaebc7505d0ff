//! Precomputed drive table: target point → actuator phasors.
//!
//! Text format, one target per row:
//!
//! ```text
//! VFLUT1
//! fingerprint <hex>
//! # x_mm y_mm a1 phi1_deg a2 phi2_deg a3 phi3_deg a4 phi4_deg a5 phi5_deg ssim
//! 17.875 36.675 3.1 12 ...
//! ```
//!
//! Numbers use shortest round-trip formatting, so a table survives a
//! write/read cycle bit for bit.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::anneal::{anneal, AnnealConfig};
use crate::error::{Error, Result};
use crate::pattern::ActuatorPhasor;
use crate::plate::{ModalBasis, PlateSpec, Point, ACTUATOR_COUNT};
use crate::ssim::SsimParams;

pub const LUT_MAGIC: &str = "VFLUT1";

#[derive(Debug, Clone, PartialEq)]
pub struct LutEntry {
    pub x_mm: f64,
    pub y_mm: f64,
    pub phasors: ActuatorPhasor,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lut {
    pub fingerprint: String,
    pub entries: Vec<LutEntry>,
}

/// `nx × ny` targets at the centres of an even partition of the plate,
/// x varying fastest.
pub fn cell_centre_grid(spec: &PlateSpec, nx: usize, ny: usize) -> Result<Vec<Point>> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(format!("target grid must be at least 1x1, got {nx}x{ny}")));
    }
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Point::new(
                spec.width * (i as f64 + 0.5) / nx as f64,
                spec.length * (j as f64 + 0.5) / ny as f64,
            ));
        }
    }
    Ok(out)
}

/// Runs one independent search per target (in parallel) with
/// `seed_i = cfg.seed + i`.
pub fn build_lut(
    basis: &ModalBasis,
    targets: &[Point],
    metric: &SsimParams,
    cfg: &AnnealConfig,
    fingerprint: &str,
) -> Result<Lut> {
    cfg.validate()?;
    for t in targets {
        if !basis.spec().strictly_contains(*t) {
            return Err(Error::OutOfDomain { x: t.x, y: t.y });
        }
    }
    let entries = targets
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let cfg_i = AnnealConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            let r = anneal(basis, t, metric, &cfg_i)?;
            let (x_mm, y_mm) = t.to_mm();
            Ok(LutEntry {
                x_mm,
                y_mm,
                phasors: r.best_phasors,
                ssim: r.best_ssim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lut {
        fingerprint: fingerprint.to_string(),
        entries,
    })
}

impl LutEntry {
    pub fn target(&self) -> Point {
        Point::from_mm(self.x_mm, self.y_mm)
    }
}

impl Lut {
    /// Nearest entry to a point given in millimetres, with its distance in
    /// millimetres. Ties go to the earlier entry.
    pub fn query(&self, x_mm: f64, y_mm: f64) -> Option<(&LutEntry, f64)> {
        let mut best: Option<(&LutEntry, f64)> = None;
        for e in &self.entries {
            let d = (e.x_mm - x_mm).hypot(e.y_mm - y_mm);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e, d));
            }
        }
        best
    }

    pub fn check_fingerprint(&self, current: &str) -> Result<()> {
        if self.fingerprint != current {
            return Err(Error::FingerprintMismatch {
                stored: self.fingerprint.clone(),
                current: current.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{LUT_MAGIC}\nfingerprint {}\n# x_mm y_mm", self.fingerprint);
        for i in 1..=ACTUATOR_COUNT {
            let _ = write!(out, " a{i} phi{i}_deg");
        }
        out.push_str(" ssim\n");
        for e in &self.entries {
            let _ = write!(out, "{} {}", e.x_mm, e.y_mm);
            for i in 0..ACTUATOR_COUNT {
                let _ = write!(out, " {} {}", e.phasors.amplitude[i], e.phasors.phase_deg[i]);
            }
            let _ = writeln!(out, " {}", e.ssim);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::LutParse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == LUT_MAGIC => {}
            _ => return Err(err(1, "missing VFLUT1 magic")),
        }
        let fingerprint = match lines.next() {
            Some((_, l)) => l
                .trim()
                .strip_prefix("fingerprint ")
                .map(|f| f.trim().to_string())
                .ok_or_else(|| err(2, "missing fingerprint line"))?,
            None => return Err(err(2, "missing fingerprint line")),
        };
        let mut entries = Vec::new();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(n, &e.to_string())))
                .collect::<Result<_>>()?;
            if fields.len() != 3 + 2 * ACTUATOR_COUNT {
                return Err(err(n, &format!("expected {} columns, got {}", 3 + 2 * ACTUATOR_COUNT, fields.len())));
            }
            let mut phasors = ActuatorPhasor::zero();
            for i in 0..ACTUATOR_COUNT {
                phasors.amplitude[i] = fields[2 + 2 * i];
                phasors.phase_deg[i] = fields[3 + 2 * i];
            }
            entries.push(LutEntry {
                x_mm: fields[0],
                y_mm: fields[1],
                phasors,
                ssim: fields[2 + 2 * ACTUATOR_COUNT],
            });
        }
        Ok(Lut { fingerprint, entries })
    }
}
