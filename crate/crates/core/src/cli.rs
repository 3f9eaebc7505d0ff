//! Command-line front end.
//!
//! Each command computes all of its artifacts in memory and only then
//! writes them, so a failing command leaves no files behind.

use std::fmt::Write as _;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, AcceptRule, SearchSpace};
use crate::config::RunConfig;
use crate::drive::link::{fit_full_scale, receive_on};
use crate::drive::wave::FULL_SCALE;
use crate::drive::{board_sim, stream, ReceiveConfig, StreamConfig};
use crate::error::{Error, Result};
use crate::export::{encode_pgm_with, encode_side_by_side_pgm, encode_signed_pgm, image_csv, parse_image_csv};
use crate::lut::{build_lut, cell_centre_grid, Lut};
use crate::pattern::{actuator_phasor_energy, rms_energy, target_energy, ActuatorPhasor};
use crate::plate::{single_actuator_pattern, DriveWave, Point, ACTUATOR_COUNT};
use crate::ssim::ssim;

pub const CONFIG_ENV: &str = "VIBROFOCUS_CONFIG";
const DECOUPLE_FORMAT: &str = "vibrofocus-decouple";

#[derive(Debug, Parser)]
#[command(name = "vibrofocus", version, about = "Vibration focusing on a five-actuator plate")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration (lengths in mm).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Overrides the annealing seed (and the loss-injection seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// 90x184 grid and 2000 iterations.
    #[arg(long, global = true)]
    pub fast: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Displacement frames and energy image for one driven actuator.
    Simulate {
        /// Actuator index, 1 to 5.
        #[arg(long)]
        actuator: usize,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Integer degrees.
        #[arg(long, default_value_t = 0)]
        phase: u16,
    },
    /// Energy image of a per-actuator drive.
    Energy {
        #[command(flatten)]
        drive: DriveSource,
    },
    /// Search a gain spectrum that focuses energy at a target point.
    Decouple {
        /// Target as `x,y` in mm.
        #[arg(long, value_parser = parse_point)]
        target: (f64, f64),
        /// Optimise one amplitude and phase per actuator.
        #[arg(long)]
        compact: bool,
        /// `prose` or `literal`; overrides the config.
        #[arg(long, value_parser = AcceptRule::from_str)]
        accept_rule: Option<AcceptRule>,
    },
    /// Build or query a target lookup table.
    Lut {
        #[command(subcommand)]
        action: LutAction,
    },
    /// Send a drive to a board over UDP.
    Stream {
        #[command(flatten)]
        drive: DriveSource,
        /// Board address as `host:port`.
        #[arg(long)]
        endpoint: String,
        /// Seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Fraction of packets deliberately dropped (test mode).
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        /// Largest channel amplitude after scaling into the sample range.
        #[arg(long, default_value_t = 0.9 * FULL_SCALE)]
        peak: f64,
    },
    /// Receive a stream and render what the board would show.
    Board {
        #[arg(long, default_value = "127.0.0.1:47000")]
        bind: String,
        /// Seconds to wait for the first packet.
        #[arg(long, default_value_t = 5.0)]
        timeout: f64,
        /// Seconds of silence that end the session.
        #[arg(long, default_value_t = 0.25)]
        idle: f64,
        /// Energy CSV to compare the rendered image against.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Render an energy CSV or a target image to PGM.
    Render {
        /// Energy CSV to re-export.
        #[arg(long, conflicts_with = "target", required_unless_present = "target")]
        csv: Option<PathBuf>,
        /// Target as `x,y` in mm.
        #[arg(long, value_parser = parse_point)]
        target: Option<(f64, f64)>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LutAction {
    Build {
        /// Target grid `NXxNY` of cell centres.
        #[arg(long, value_parser = parse_grid, default_value = "2x2")]
        grid: (usize, usize),
    },
    Query {
        #[arg(long)]
        lut: PathBuf,
        /// Point as `x,y` in mm.
        #[arg(long, value_parser = parse_point)]
        point: (f64, f64),
    },
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct DriveSource {
    /// `A1@phi1,...,A5@phi5`, phases in degrees.
    #[arg(long, value_parser = parse_phasors)]
    pub phasors: Option<ActuatorPhasor>,
    /// Decoupling result file to take the phasors from.
    #[arg(long)]
    pub result: Option<PathBuf>,
}

pub fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y but got '{s}'"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad x '{x}': {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad y '{y}': {e}"))?;
    Ok((x, y))
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("expected NXxNY but got '{s}'"))?;
    let a = a.trim().parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
    Ok((a, b))
}

pub fn parse_phasors(s: &str) -> std::result::Result<ActuatorPhasor, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != ACTUATOR_COUNT {
        return Err(format!("expected {ACTUATOR_COUNT} comma-separated A@phi pairs"));
    }
    let mut p = ActuatorPhasor::zero();
    for (i, part) in parts.iter().enumerate() {
        let (a, ph) = part.split_once('@').ok_or_else(|| format!("expected A@phi, got '{part}'"))?;
        p.amplitude[i] = a.trim().parse().map_err(|e| format!("bad amplitude '{a}': {e}"))?;
        let ph: f64 = ph.trim().parse().map_err(|e| format!("bad phase '{ph}': {e}"))?;
        p.phase_deg[i] = ph.rem_euclid(360.0);
    }
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

/// Decoupling result as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoupleFile {
    pub format: String,
    pub version: u32,
    pub target_mm: [f64; 2],
    pub best_ssim: f64,
    pub start_ssim: f64,
    pub steps: usize,
    pub phasors: ActuatorPhasor,
    pub config: RunConfig,
}

impl DecoupleFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: DecoupleFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if f.format != DECOUPLE_FORMAT || f.version != 1 {
            return Err(Error::Config(format!("{} is not a version 1 decoupling result", path.display())));
        }
        Ok(f)
    }
}

/// Files to write plus text for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub artifacts: Vec<(PathBuf, Vec<u8>)>,
    pub stdout: String,
}

impl Outcome {
    fn add(&mut self, name: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.artifacts.push((name.into(), bytes.into()));
    }

    pub fn write(&self) -> Result<()> {
        for (name, bytes) in &self.artifacts {
            let path = self.out_dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        Ok(())
    }
}

/// Config file (if any) plus flag overrides.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.fast {
        cfg.apply_fast();
    }
    if let Some(seed) = common.seed {
        cfg.anneal.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Computes the artifacts of a command without touching the filesystem
/// (apart from reading inputs and, for `stream`/`board`, the network).
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let mut cfg = resolve_config(&cli.common)?;
    if let Command::Decouple {
        compact, accept_rule, ..
    } = &cli.command
    {
        if *compact {
            cfg.anneal.search_space = SearchSpace::Compact;
        }
        if let Some(rule) = accept_rule {
            cfg.anneal.accept_rule = *rule;
        }
        cfg.validate()?;
    }
    let mut out = Outcome {
        out_dir: PathBuf::from(&cfg.output_dir),
        ..Outcome::default()
    };
    let echo = cfg.to_toml()?;
    let tag = vec![format!("vibrofocus config={}", cfg.fingerprint()?)];
    match &cli.command {
        Command::Simulate {
            actuator,
            amplitude,
            phase,
        } => {
            let basis = cfg.build_basis()?;
            let wave = DriveWave::sine(cfg.drive.frequency_hz, *amplitude, *phase);
            let series = single_actuator_pattern(&basis, *actuator, &wave, cfg.drive.samples_per_period)?;
            let energy = rms_energy(&series)?;
            let scale = series
                .frames
                .iter()
                .flatten()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            for (s, frame) in series.frames.iter().enumerate() {
                out.add(
                    format!("frames/frame_{s:03}.pgm"),
                    encode_signed_pgm(series.nx, series.ny, frame, Some(scale)),
                );
            }
            out.add("energy.pgm", encode_pgm_with(&energy, &tag));
            out.add("energy.csv", image_csv(&energy));
            let (ix, iy) = energy.argmax();
            let _ = writeln!(
                out.stdout,
                "actuator {actuator}: {} frames, energy max {} at pixel ({ix}, {iy})",
                series.len(),
                energy.max()
            );
        }
        Command::Energy { drive } => {
            let phasors = drive_phasors(drive)?;
            let basis = cfg.build_basis()?;
            let energy = actuator_phasor_energy(&basis, &phasors)?;
            out.add("energy.pgm", encode_pgm_with(&energy, &tag));
            out.add("energy.csv", image_csv(&energy));
            let (ix, iy) = energy.argmax();
            let _ = writeln!(out.stdout, "energy max {} at pixel ({ix}, {iy})", energy.max());
        }
        Command::Decouple { target, .. } => decouple(&cfg, *target, &tag, &mut out)?,
        Command::Lut { action } => match action {
            LutAction::Build { grid } => {
                let basis = cfg.build_basis()?;
                let targets = cell_centre_grid(basis.spec(), grid.0, grid.1)?;
                let lut = build_lut(&basis, &targets, &cfg.ssim_params()?, &cfg.anneal, &cfg.fingerprint()?)?;
                for e in &lut.entries {
                    let _ = writeln!(out.stdout, "({}, {}) mm: ssim {}", e.x_mm, e.y_mm, e.ssim);
                }
                out.add("lut.vflut", lut.to_text());
            }
            LutAction::Query { lut, point } => {
                let text = std::fs::read_to_string(lut)?;
                let table = Lut::from_text(&text)?;
                table.check_fingerprint(&cfg.fingerprint()?)?;
                let (e, d) = table
                    .query(point.0, point.1)
                    .ok_or_else(|| Error::Config("lookup table has no entries".into()))?;
                #[derive(Serialize)]
                struct Hit<'a> {
                    query_mm: [f64; 2],
                    target_mm: [f64; 2],
                    distance_mm: f64,
                    ssim: f64,
                    phasors: &'a ActuatorPhasor,
                }
                let hit = Hit {
                    query_mm: [point.0, point.1],
                    target_mm: [e.x_mm, e.y_mm],
                    distance_mm: d,
                    ssim: e.ssim,
                    phasors: &e.phasors,
                };
                out.stdout = toml::to_string(&hit).map_err(|e| Error::Config(e.to_string()))?;
                return Ok(out);
            }
        },
        Command::Stream {
            drive,
            endpoint,
            duration,
            loss,
            peak,
        } => {
            let phasors = drive_phasors(drive)?;
            if !(*peak > 0.0 && *peak <= FULL_SCALE) {
                return Err(Error::Config(format!("peak must lie in (0, {FULL_SCALE}]")));
            }
            let (scaled, factor) = fit_full_scale(&phasors, *peak);
            let scfg = StreamConfig {
                frequency: cfg.drive.frequency_hz,
                duration: *duration,
                loss_rate: *loss,
                loss_seed: cfg.anneal.seed,
            };
            let stats = stream(&scaled, &scfg, resolve_endpoint(endpoint)?)?;
            #[derive(Serialize)]
            struct StreamFile<'a> {
                scale_factor: f64,
                stats: &'a crate::drive::SendStats,
                phasors: &'a ActuatorPhasor,
            }
            let text = toml::to_string(&StreamFile {
                scale_factor: factor,
                stats: &stats,
                phasors: &scaled,
            })
            .map_err(|e| Error::Config(e.to_string()))?;
            let _ = write!(out.stdout, "{text}");
            out.add("stream.toml", text);
        }
        Command::Board {
            bind,
            timeout,
            idle,
            compare,
        } => {
            let basis = cfg.build_basis()?;
            let reference = match compare {
                Some(p) => Some(parse_image_csv(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            let rcfg = ReceiveConfig {
                frequency: cfg.drive.frequency_hz,
                timeout: seconds(*timeout)?,
                idle: seconds(*idle)?,
                ..ReceiveConfig::default()
            };
            let report = receive_on(resolve_endpoint(bind)?, &rcfg)?;
            let image = board_sim(&report.estimates, &basis)?;
            let mut text = toml::to_string(&report).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(r) = &reference {
                let score = ssim(&image, r, &cfg.ssim_params()?)?;
                text = format!("ssim_vs_reference = {score}\n{text}");
            }
            let _ = write!(out.stdout, "{text}");
            out.add("board.toml", text);
            out.add("board.pgm", encode_pgm_with(&image, &tag));
            out.add("board.csv", image_csv(&image));
        }
        Command::Render { csv, target } => {
            let image = match (csv, target) {
                (Some(p), _) => parse_image_csv(&std::fs::read_to_string(p)?)?,
                (None, Some((x, y))) => {
                    let basis = cfg.build_basis()?;
                    let t = target_energy(&basis, Point::from_mm(*x, *y))?;
                    out.add("target.csv", image_csv(&t));
                    t
                }
                (None, None) => return Err(Error::Config("render needs --csv or --target".into())),
            };
            let name = if csv.is_some() { "render.pgm" } else { "target.pgm" };
            out.add(name, encode_pgm_with(&image, &tag));
            let _ = writeln!(out.stdout, "{}x{} image, max {}", image.nx, image.ny, image.max());
        }
    }
    out.add("config.toml", echo);
    Ok(out)
}

fn decouple(cfg: &RunConfig, target: (f64, f64), tag: &[String], out: &mut Outcome) -> Result<()> {
    let spec = cfg.plate_spec();
    let point = Point::from_mm(target.0, target.1);
    if !spec.strictly_contains(point) {
        return Err(Error::OutOfDomain { x: point.x, y: point.y });
    }
    let basis = cfg.build_basis()?;
    let metric = cfg.ssim_params()?;
    let started = Instant::now();
    let result = anneal(&basis, point, &metric, &cfg.anneal)?;
    let elapsed = started.elapsed();
    let composite = actuator_phasor_energy(&basis, &result.best_phasors)?;
    let target_img = target_energy(&basis, point)?;

    let file = DecoupleFile {
        format: DECOUPLE_FORMAT.into(),
        version: 1,
        target_mm: [target.0, target.1],
        best_ssim: result.best_ssim,
        start_ssim: result.trajectory.first().map_or(f64::NAN, |t| t.current),
        steps: result.trajectory.len() - 1,
        phasors: result.best_phasors,
        config: cfg.clone(),
    };
    out.add(
        "decouple.toml",
        toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))?,
    );
    let mut traj = String::from("step,current,best\n");
    for t in &result.trajectory {
        let _ = writeln!(traj, "{},{},{}", t.step, t.current, t.best);
    }
    out.add("trajectory.csv", traj);
    let mut gains = String::new();
    for slot in 0..ACTUATOR_COUNT {
        let row: Vec<String> = result.best_gains.row(slot).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(gains, "{}", row.join(","));
    }
    out.add("gains.csv", gains);
    out.add("composite.pgm", encode_pgm_with(&composite, tag));
    out.add("composite.csv", image_csv(&composite));
    out.add("target.pgm", encode_pgm_with(&target_img, tag));
    out.add("side_by_side.pgm", encode_side_by_side_pgm(&composite, &target_img, 4)?);

    let (cx, cy) = composite.argmax();
    let (tx, ty) = spec.nearest_pixel(point);
    let _ = writeln!(
        out.stdout,
        "target ({}, {}) mm -> pixel ({tx}, {ty}); best ssim {} (start {}); composite max at pixel ({cx}, {cy}); {:.1} s",
        target.0,
        target.1,
        result.best_ssim,
        file.start_ssim,
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn drive_phasors(src: &DriveSource) -> Result<ActuatorPhasor> {
    match (&src.phasors, &src.result) {
        (Some(p), _) => Ok(*p),
        (None, Some(path)) => Ok(DecoupleFile::load(path)?.phasors),
        (None, None) => Err(Error::Config("a drive needs --phasors or --result".into())),
    }
}

fn resolve_endpoint(s: &str) -> Result<SocketAddr> {
    s.to_socket_addrs()
        .map_err(Error::Socket)?
        .next()
        .ok_or_else(|| Error::Config(format!("endpoint '{s}' did not resolve")))
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).map_err(|_| Error::Config(format!("bad duration {s} s")))
}

/// Runs a parsed command end to end: compute, write, print.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let outcome = execute(cli)?;
    outcome.write()?;
    print!("{}", outcome.stdout);
    Ok(outcome)
}
