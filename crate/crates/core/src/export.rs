//! Image and table writers.
//!
//! Energy images go out as 16-bit binary PGM (`P5`, big-endian samples,
//! maxval 65535) scaled by the image maximum. The physical maximum is kept
//! in a header comment so the absolute scale can be recovered:
//!
//! ```text
//! P5
//! # vibrofocus max=<f64>
//! <width> <height>
//! 65535
//! ```
//!
//! Row 0 of the file is the plate row at y = 0.

use std::fmt::Write as _;
use std::io::{self, BufRead, Read};

use crate::error::{Error, Result};
use crate::pattern::EnergyImage;

const MAXVAL: f64 = 65535.0;

/// Encodes an energy image as PGM bytes.
pub fn encode_pgm(image: &EnergyImage) -> Vec<u8> {
    encode_pgm_with(image, &[])
}

/// As [`encode_pgm`], with extra comment lines after the `max=` line.
pub fn encode_pgm_with(image: &EnergyImage, extra: &[String]) -> Vec<u8> {
    let peak = image.max();
    let samples = image.values.iter().map(|&v| scale_unit(v, peak));
    let mut comments = vec![format!("vibrofocus max={peak}")];
    comments.extend_from_slice(extra);
    pgm_bytes(image.nx, image.ny, &comments, samples)
}

/// Encodes a signed field (e.g. one displacement frame), mapping `-m..m` to
/// `0..65535` where `m` is `scale` or the largest magnitude. With `m = 0`
/// every sample is 0.
pub fn encode_signed_pgm(nx: usize, ny: usize, values: &[f64], scale: Option<f64>) -> Vec<u8> {
    let m = scale.unwrap_or_else(|| values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let samples = values
        .iter()
        .map(|&v| if m > 0.0 { quantize(0.5 + 0.5 * v / m) } else { 0 });
    pgm_bytes(nx, ny, &[format!("vibrofocus signed scale={m}")], samples)
}

/// Two images next to each other, each scaled by its own maximum, with a
/// `gap`-pixel black separator.
pub fn encode_side_by_side_pgm(left: &EnergyImage, right: &EnergyImage, gap: usize) -> Result<Vec<u8>> {
    if left.ny != right.ny {
        return Err(Error::DimensionMismatch(left.nx, left.ny, right.nx, right.ny));
    }
    let (lp, rp) = (left.max(), right.max());
    let width = left.nx + gap + right.nx;
    let mut samples = Vec::with_capacity(width * left.ny);
    for y in 0..left.ny {
        samples.extend((0..left.nx).map(|x| scale_unit(left.get(x, y), lp)));
        samples.extend(std::iter::repeat_n(0u16, gap));
        samples.extend((0..right.nx).map(|x| scale_unit(right.get(x, y), rp)));
    }
    Ok(pgm_bytes(
        width,
        left.ny,
        &[format!("vibrofocus left max={lp}"), format!("vibrofocus right max={rp}")],
        samples.into_iter(),
    ))
}

fn scale_unit(v: f64, peak: f64) -> u16 {
    if peak > 0.0 {
        quantize(v / peak)
    } else {
        0
    }
}

fn quantize(unit: f64) -> u16 {
    (unit.clamp(0.0, 1.0) * MAXVAL).round() as u16
}

fn pgm_bytes(nx: usize, ny: usize, comments: &[String], samples: impl Iterator<Item = u16>) -> Vec<u8> {
    let mut header = String::from("P5\n");
    for c in comments {
        let _ = writeln!(header, "# {c}");
    }
    let _ = write!(header, "{nx} {ny}\n65535\n");
    let mut out = header.into_bytes();
    out.reserve(2 * nx * ny);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// A decoded 16-bit PGM.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub comments: Vec<String>,
    pub samples: Vec<u16>,
}

impl Pgm {
    /// Value of the `max=` header comment, if any.
    pub fn recorded_max(&self) -> Option<f64> {
        self.comments
            .iter()
            .find_map(|c| c.strip_prefix("vibrofocus max="))
            .and_then(|v| v.trim().parse().ok())
    }

    /// Reconstructs an energy image using the recorded maximum.
    pub fn to_energy(&self) -> Option<EnergyImage> {
        let peak = self.recorded_max()?;
        let scale = peak / f64::from(self.maxval);
        Some(EnergyImage::new(
            self.width,
            self.height,
            self.samples.iter().map(|&s| f64::from(s) * scale).collect(),
        ))
    }
}

/// Decodes a binary PGM with maxval up to 65535.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    let bad = |m: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, m.to_string()));
    let mut cursor = io::Cursor::new(bytes);
    let mut tokens = Vec::new();
    let mut comments = Vec::new();
    let mut line = String::new();
    while tokens.len() < 4 {
        line.clear();
        if cursor.read_line(&mut line)? == 0 {
            return Err(bad("PGM header ended early"));
        }
        let content = line.trim_end_matches('\n');
        if let Some(c) = content.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        tokens.extend(content.split_whitespace().map(str::to_string));
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM header number"));
    let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(bad("PGM maxval out of range"));
    }
    let mut raw = Vec::new();
    cursor.read_to_end(&mut raw)?;
    let wide = maxval > 255;
    let need = width * height * if wide { 2 } else { 1 };
    if raw.len() != need {
        return Err(bad("PGM raster size mismatch"));
    }
    let samples = if wide {
        raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raw.iter().map(|&b| u16::from(b)).collect()
    };
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        comments,
        samples,
    })
}

/// Row-major CSV, one plate row per line, shortest round-trip formatting.
pub fn image_csv(image: &EnergyImage) -> String {
    let mut out = String::with_capacity(image.values.len() * 24);
    for row in image.values.chunks_exact(image.nx) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_image_csv(text: &str) -> Result<EnergyImage> {
    let mut values = Vec::new();
    let mut nx = None;
    let mut ny = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Config(format!("CSV line {}: {e}", i + 1)))?;
        match nx {
            None => nx = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(Error::Config(format!("CSV line {} has {} columns, expected {n}", i + 1, row.len())))
            }
            _ => {}
        }
        values.extend(row);
        ny += 1;
    }
    let nx = nx.ok_or_else(|| Error::Config("empty CSV image".into()))?;
    Ok(EnergyImage::new(nx, ny, values))
}
