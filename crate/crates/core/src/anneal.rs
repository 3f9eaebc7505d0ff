//! Stochastic search for the gain spectrum whose energy image best matches a
//! single-point target.
//!
//! Each step perturbs a handful of gain entries, scores the new energy image
//! with SSIM against the target, and keeps the move if it improves the
//! score. Regressions are accepted with probability `1 − ssim_current`, so a
//! poor current state wanders freely and a good one mostly stays put.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{
    phasor_energy_into, spectrum_phasors, target_energy, ActuatorPhasor, EnergyImage, GainSpectrum,
    GAIN_MAX, PHASE_STEPS,
};
use crate::plate::{ModalBasis, Point, ACTUATOR_COUNT};
use crate::ssim::{SsimParams, SsimReference, SsimScratch};
use crate::trig::cis_deg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptRule {
    /// Keep improvements; keep regressions when `u < 1 − ssim_current`.
    Prose,
    /// Accept when the score drops or when `1 − ssim_current < u`, as the
    /// algorithm listing prints it. Kept for comparison runs.
    Literal,
}

impl std::str::FromStr for AcceptRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prose" => Ok(AcceptRule::Prose),
            "literal" => Ok(AcceptRule::Literal),
            other => Err(Error::Config(format!("unknown accept rule '{other}'"))),
        }
    }
}

/// Which variables the search moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSpace {
    /// The full 5 × 360 gain matrix.
    Spectrum,
    /// One amplitude and one phase per actuator.
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub iterations: usize,
    pub perturb_count: usize,
    pub perturb_scale: f64,
    pub seed: u64,
    pub gain_max: f64,
    pub accept_rule: AcceptRule,
    pub search_space: SearchSpace,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            perturb_count: 8,
            perturb_scale: 0.5,
            seed: 0,
            gain_max: GAIN_MAX,
            accept_rule: AcceptRule::Prose,
            search_space: SearchSpace::Spectrum,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.gain_max > 0.0 && self.gain_max <= GAIN_MAX) {
            return Err(Error::Config(format!(
                "gain_max must lie in (0, {GAIN_MAX}], got {}",
                self.gain_max
            )));
        }
        let entries = match self.search_space {
            SearchSpace::Spectrum => ACTUATOR_COUNT * PHASE_STEPS,
            SearchSpace::Compact => 2 * ACTUATOR_COUNT,
        };
        if !(1..=entries).contains(&self.perturb_count) {
            return Err(Error::Config(format!(
                "perturb_count must lie in 1..={entries}, got {}",
                self.perturb_count
            )));
        }
        if !(self.perturb_scale > 0.0 && self.perturb_scale <= self.gain_max) {
            return Err(Error::Config(format!(
                "perturb_scale must lie in (0, gain_max], got {}",
                self.perturb_scale
            )));
        }
        Ok(())
    }
}

/// One step of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub current: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoupleResult {
    pub target: Point,
    pub best_gains: GainSpectrum,
    pub best_phasors: ActuatorPhasor,
    pub best_ssim: f64,
    /// Step 0 is the random start.
    pub trajectory: Vec<TrajectoryPoint>,
}

/// Acceptance test for a candidate score.
pub fn accept(ssim_candidate: f64, ssim_current: f64, u: f64, rule: AcceptRule) -> bool {
    match rule {
        AcceptRule::Prose => ssim_candidate > ssim_current || u < 1.0 - ssim_current,
        AcceptRule::Literal => ssim_candidate < ssim_current || 1.0 - ssim_current < u,
    }
}

/// Moves exactly `cfg.perturb_count` distinct entries by a uniform offset in
/// `[−scale, scale]`, clamped to `[0, gain_max]`.
pub fn perturb<R: Rng + ?Sized>(gains: &GainSpectrum, cfg: &AnnealConfig, rng: &mut R) -> GainSpectrum {
    let mut out = gains.clone();
    perturb_in_place(out.values_mut(), cfg, rng);
    out
}

fn perturb_in_place<R: Rng + ?Sized>(values: &mut [f64], cfg: &AnnealConfig, rng: &mut R) {
    let picks = sample(rng, values.len(), cfg.perturb_count);
    for idx in picks.iter() {
        let delta = (rng.random::<f64>() * 2.0 - 1.0) * cfg.perturb_scale;
        values[idx] = (values[idx] + delta).clamp(0.0, cfg.gain_max);
    }
}

/// Candidate evaluation shared by every step: phasor energy then SSIM.
pub struct Objective<'a> {
    basis: &'a ModalBasis,
    reference: SsimReference,
    scratch: SsimScratch,
    image: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(basis: &'a ModalBasis, target: &EnergyImage, metric: &SsimParams) -> Result<Self> {
        let reference = SsimReference::new(target, metric)?;
        let scratch = reference.scratch();
        Ok(Self {
            basis,
            reference,
            scratch,
            image: vec![0.0; basis.spec().pixel_count()],
        })
    }

    pub fn score_phasors(&mut self, z: &[Complex64; ACTUATOR_COUNT]) -> f64 {
        phasor_energy_into(self.basis, z, &mut self.image);
        self.reference.score(&self.image, &mut self.scratch)
    }

    pub fn score_gains(&mut self, gains: &GainSpectrum) -> f64 {
        self.score_phasors(&spectrum_phasors(gains))
    }
}

/// Runs the search for `target`.
pub fn anneal(basis: &ModalBasis, target: Point, metric: &SsimParams, cfg: &AnnealConfig) -> Result<DecoupleResult> {
    cfg.validate()?;
    let target_image = target_energy(basis, target)?;
    let mut objective = Objective::new(basis, &target_image, metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    match cfg.search_space {
        SearchSpace::Spectrum => anneal_spectrum(&mut objective, target, cfg, &mut rng),
        SearchSpace::Compact => anneal_compact(&mut objective, target, cfg, &mut rng),
    }
}

fn anneal_spectrum(
    objective: &mut Objective<'_>,
    target: Point,
    cfg: &AnnealConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DecoupleResult> {
    let mut current = GainSpectrum::random(rng, cfg.gain_max);
    let mut current_score = objective.score_gains(&current);
    let mut best = current.clone();
    let mut best_score = current_score;
    let mut trajectory = Vec::with_capacity(cfg.iterations + 1);
    trajectory.push(TrajectoryPoint {
        step: 0,
        current: current_score,
        best: best_score,
    });

    let mut candidate = current.clone();
    for step in 1..=cfg.iterations {
        candidate.values_mut().copy_from_slice(current.values());
        perturb_in_place(candidate.values_mut(), cfg, rng);
        let score = objective.score_gains(&candidate);
        let u: f64 = rng.random();
        if accept(score, current_score, u, cfg.accept_rule) {
            std::mem::swap(&mut current, &mut candidate);
            current_score = score;
            if current_score > best_score {
                best_score = current_score;
                best.values_mut().copy_from_slice(current.values());
            }
        }
        trajectory.push(TrajectoryPoint {
            step,
            current: current_score,
            best: best_score,
        });
    }

    let best_phasors = ActuatorPhasor::from_complex(&spectrum_phasors(&best));
    Ok(DecoupleResult {
        target,
        best_gains: best,
        best_phasors,
        best_ssim: best_score,
        trajectory,
    })
}

/// Compact variant: the state is `[A₁..A₅, φ₁..φ₅]` with amplitudes capped
/// at the total gain an actuator row could reach.
fn anneal_compact(
    objective: &mut Objective<'_>,
    target: Point,
    cfg: &AnnealConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DecoupleResult> {
    let amp_cap = cfg.gain_max * 57.0;
    let to_z = |state: &[f64; 2 * ACTUATOR_COUNT]| {
        let mut z = [Complex64::new(0.0, 0.0); ACTUATOR_COUNT];
        for slot in 0..ACTUATOR_COUNT {
            z[slot] = state[slot] * cis_deg(state[ACTUATOR_COUNT + slot]);
        }
        z
    };
    let mut current = [0.0; 2 * ACTUATOR_COUNT];
    for slot in 0..ACTUATOR_COUNT {
        current[slot] = rng.random::<f64>() * cfg.gain_max;
        current[ACTUATOR_COUNT + slot] = rng.random::<f64>() * 360.0;
    }
    let mut current_score = objective.score_phasors(&to_z(&current));
    let mut best = current;
    let mut best_score = current_score;
    let mut trajectory = vec![TrajectoryPoint {
        step: 0,
        current: current_score,
        best: best_score,
    }];

    for step in 1..=cfg.iterations {
        let mut candidate = current;
        let picks = sample(rng, candidate.len(), cfg.perturb_count);
        for idx in picks.iter() {
            let r = rng.random::<f64>() * 2.0 - 1.0;
            if idx < ACTUATOR_COUNT {
                candidate[idx] = (candidate[idx] + r * cfg.perturb_scale).clamp(0.0, amp_cap);
            } else {
                // phase moves scale with the amplitude step: scale 0.5 ≈ 18°
                candidate[idx] = (candidate[idx] + r * cfg.perturb_scale * 36.0).rem_euclid(360.0);
            }
        }
        let score = objective.score_phasors(&to_z(&candidate));
        let u: f64 = rng.random();
        if accept(score, current_score, u, cfg.accept_rule) {
            current = candidate;
            current_score = score;
            if current_score > best_score {
                best_score = current_score;
                best = current;
            }
        }
        trajectory.push(TrajectoryPoint {
            step,
            current: current_score,
            best: best_score,
        });
    }

    let mut phasors = ActuatorPhasor::zero();
    for slot in 0..ACTUATOR_COUNT {
        if best[slot] > 0.0 {
            phasors.amplitude[slot] = best[slot];
            phasors.phase_deg[slot] = best[ACTUATOR_COUNT + slot];
        }
    }
    // report the score of the spectrum actually returned; it differs from
    // the compact state's score only by rounding
    let best_gains = phasors.to_gain_spectrum()?;
    let best_ssim = objective.score_gains(&best_gains);
    Ok(DecoupleResult {
        target,
        best_phasors: ActuatorPhasor::from_complex(&spectrum_phasors(&best_gains)),
        best_gains,
        best_ssim,
        trajectory,
    })
}
