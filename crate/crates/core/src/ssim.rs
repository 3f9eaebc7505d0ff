//! Windowed structural similarity between energy images.
//!
//! Both images are first divided by their own maximum, so the score compares
//! shape rather than absolute energy. Local statistics are taken over every
//! window position that fits entirely inside the image (no padding) and the
//! per-window scores are averaged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::EnergyImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowKind {
    Uniform,
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Odd window side length in pixels.
    pub window: usize,
    pub kind: WindowKind,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range after normalisation.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            kind: WindowKind::Gaussian { sigma: 1.5 },
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("SSIM window must be odd and >= 3, got {}", self.window)));
        }
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(Error::Config("SSIM constants must be positive".into()));
        }
        if let WindowKind::Gaussian { sigma } = self.kind {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::Config(format!("Gaussian sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Normalised 1-D weights; the 2-D window is their outer product.
    pub fn weights(&self) -> Vec<f64> {
        let half = (self.window / 2) as f64;
        let raw: Vec<f64> = match self.kind {
            WindowKind::Uniform => vec![1.0; self.window],
            WindowKind::Gaussian { sigma } => (0..self.window)
                .map(|i| {
                    let d = i as f64 - half;
                    (-(d * d) / (2.0 * sigma * sigma)).exp()
                })
                .collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Mean SSIM of `a` against `b`.
///
/// Two all-zero images score exactly 1 through the stabilising constants.
pub fn ssim(a: &EnergyImage, b: &EnergyImage, params: &SsimParams) -> Result<f64> {
    let reference = SsimReference::new(b, params)?;
    if (a.nx, a.ny) != (b.nx, b.ny) {
        return Err(Error::DimensionMismatch(a.nx, a.ny, b.nx, b.ny));
    }
    let mut scratch = reference.scratch();
    Ok(reference.score(&a.values, &mut scratch))
}

/// Precomputed statistics of a fixed comparison image.
///
/// Used by the optimiser, which scores many candidates against one target.
/// Scoring through a reference gives bit-identical results to [`ssim`].
#[derive(Debug, Clone)]
pub struct SsimReference {
    nx: usize,
    ny: usize,
    weights: Vec<f64>,
    c1: f64,
    c2: f64,
    /// Normalised reference pixels.
    norm: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// Reusable buffers for [`SsimReference::score`].
#[derive(Debug, Clone)]
pub struct SsimScratch {
    norm: Vec<f64>,
    sq: Vec<f64>,
    cross: Vec<f64>,
    h_mean: Vec<f64>,
    h_sq: Vec<f64>,
    h_cross: Vec<f64>,
    mean: Vec<f64>,
    second: Vec<f64>,
    cross_out: Vec<f64>,
}

impl SsimReference {
    pub fn new(image: &EnergyImage, params: &SsimParams) -> Result<Self> {
        params.validate()?;
        let w = params.window;
        if image.nx < w || image.ny < w {
            return Err(Error::ImageTooSmall {
                nx: image.nx,
                ny: image.ny,
                window: w,
            });
        }
        let weights = params.weights();
        let norm = normalized(&image.values);
        let sq: Vec<f64> = norm.iter().map(|v| v * v).collect();
        let (ox, oy) = (image.nx - w + 1, image.ny - w + 1);
        let mut h = vec![0.0; ox * image.ny];
        let mut mean = vec![0.0; ox * oy];
        let mut second = vec![0.0; ox * oy];
        blur_valid(&norm, image.nx, image.ny, &weights, &mut h, &mut mean);
        blur_valid(&sq, image.nx, image.ny, &weights, &mut h, &mut second);
        let var = second.iter().zip(&mean).map(|(s, m)| s - m * m).collect();
        Ok(Self {
            nx: image.nx,
            ny: image.ny,
            weights,
            c1: params.c1(),
            c2: params.c2(),
            norm,
            mean,
            var,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn scratch(&self) -> SsimScratch {
        let w = self.weights.len();
        let (ox, oy) = (self.nx - w + 1, self.ny - w + 1);
        let n = self.nx * self.ny;
        SsimScratch {
            norm: vec![0.0; n],
            sq: vec![0.0; n],
            cross: vec![0.0; n],
            h_mean: vec![0.0; ox * self.ny],
            h_sq: vec![0.0; ox * self.ny],
            h_cross: vec![0.0; ox * self.ny],
            mean: vec![0.0; ox * oy],
            second: vec![0.0; ox * oy],
            cross_out: vec![0.0; ox * oy],
        }
    }

    /// SSIM of raw (unnormalised) `values` against the reference.
    ///
    /// `values` must have the reference's pixel count.
    pub fn score(&self, values: &[f64], s: &mut SsimScratch) -> f64 {
        assert_eq!(values.len(), self.nx * self.ny, "candidate size mismatch");
        let peak = values.iter().fold(0.0f64, |m, &v| m.max(v));
        if peak > 0.0 {
            for (n, v) in s.norm.iter_mut().zip(values) {
                *n = v / peak;
            }
        } else {
            s.norm.iter_mut().for_each(|n| *n = 0.0);
        }
        for ((sq, cr), (n, r)) in s.sq.iter_mut().zip(s.cross.iter_mut()).zip(s.norm.iter().zip(&self.norm)) {
            *sq = n * n;
            *cr = n * r;
        }
        blur_valid(&s.norm, self.nx, self.ny, &self.weights, &mut s.h_mean, &mut s.mean);
        blur_valid(&s.sq, self.nx, self.ny, &self.weights, &mut s.h_sq, &mut s.second);
        blur_valid(&s.cross, self.nx, self.ny, &self.weights, &mut s.h_cross, &mut s.cross_out);

        let (c1, c2) = (self.c1, self.c2);
        let mut total = 0.0;
        for i in 0..s.mean.len() {
            let ma = s.mean[i];
            let mb = self.mean[i];
            let va = s.second[i] - ma * ma;
            let vb = self.var[i];
            let cov = s.cross_out[i] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total / s.mean.len() as f64
    }
}

fn normalized(values: &[f64]) -> Vec<f64> {
    let peak = values.iter().fold(0.0f64, |m, &v| m.max(v));
    if peak > 0.0 {
        values.iter().map(|v| v / peak).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Separable weighted sum over every fully contained window.
fn blur_valid(src: &[f64], nx: usize, ny: usize, w: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    let k = w.len();
    let ox = nx - k + 1;
    let oy = ny - k + 1;
    for y in 0..ny {
        let row = &src[y * nx..(y + 1) * nx];
        let dst = &mut tmp[y * ox..(y + 1) * ox];
        for (x, d) in dst.iter_mut().enumerate() {
            *d = row[x..x + k].iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }
    for (y, dst) in out.chunks_exact_mut(ox).enumerate().take(oy) {
        dst.iter_mut().for_each(|d| *d = 0.0);
        for (t, wt) in w.iter().enumerate() {
            let src_row = &tmp[(y + t) * ox..(y + t + 1) * ox];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += wt * s;
            }
        }
    }
}
