//! Monte-Carlo experiment runner: synthesis, noise, STFT, PWD, MUSIC and
//! error statistics for every condition of a configuration.

use std::collections::HashMap;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;
use shmotion_core::motion::{direction_of, unit_vector, EulerAngles, FramePose, Trajectory};
use shmotion_core::music::{
    doa_error_angle, effective_rank, error_stats, music_spectrum, pick_peaks, smoothed_covariance,
    MusicGrid,
};
use shmotion_core::pwd::{
    combined_matrix, frame_transforms, pwd_compensated, pwd_enhanced, pwd_stationary,
    CompensatedOperator, EnhancedOperator, PwdEstimate, StationaryOperator, Stacking,
};
use shmotion_core::sim::{
    add_noise, MotionMode, MotionSpec, NoiseBand, NoiseSpec, SourceSpec, Synthesizer,
};
use shmotion_core::spectral::{stft, time_align, StftFrames, StftParams};
use shmotion_core::steering::{
    equiangular_13, near_uniform, near_uniform_directions, ArrayGeometry, RigidSphere,
    SteeringMatrix, SteeringModel, SteeringSet,
};
use shmotion_core::linalg::singular_values;

use crate::config::{
    ExperimentConfig, Layout, MethodConfig, MotionKind, NoiseBandConfig, SourceKindConfig,
    SpectraOutput,
};
use crate::error::{Error, Issue, Result};
use crate::formats;

pub const SCHEMA_VERSION: u32 = 1;

/// Analytic or tabulated steering.
#[derive(Debug, Clone)]
pub enum Model {
    Sphere(RigidSphere),
    Tabulated(SteeringSet),
}

impl SteeringModel for Model {
    fn mic_count(&self) -> usize {
        match self {
            Self::Sphere(m) => m.mic_count(),
            Self::Tabulated(m) => m.mic_count(),
        }
    }

    fn wavenumber(&self, freq_hz: f64) -> f64 {
        match self {
            Self::Sphere(m) => m.wavenumber(freq_hz),
            Self::Tabulated(m) => m.wavenumber(freq_hz),
        }
    }

    fn steering(&self, freq_hz: f64, order: u32) -> shmotion_core::Result<SteeringMatrix> {
        match self {
            Self::Sphere(m) => m.steering(freq_hz, order),
            Self::Tabulated(m) => m.steering(freq_hz, order),
        }
    }
}

/// A validated configuration with its files loaded.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub params: StftParams,
    pub bins: Vec<usize>,
    pub model: Model,
    /// Needed for synthesis; absent when only a steering file is given.
    pub geometry: Option<ArrayGeometry>,
    /// Trajectory file contents in their stored convention.
    pub trajectory: Option<Trajectory>,
    /// Source directions `(theta, phi)` in radians relative to the array at
    /// frame 0.
    pub directions: Vec<(f64, f64)>,
    /// Carrier frequency after optional bin snapping.
    pub carrier: f64,
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.check()?;
        let params = config.stft_params()?;
        let bins = config.analysis_bins(&params);
        let mut issues = Vec::new();
        let c = config.speed_of_sound;
        let a = &config.array;
        let geometry = match a.layout {
            Layout::NearUniform => Some(near_uniform(a.count.unwrap_or(0), a.radius.unwrap_or(0.0))?),
            Layout::Equiangular13 => Some(equiangular_13(a.radius.unwrap_or(0.0))?),
            Layout::File => match &a.geometry_file {
                Some(f) => Some(formats::load_geometry(&config.resolve(f))?),
                None => None,
            },
        };
        let model = match &a.steering_file {
            Some(f) => {
                let mut set = formats::load_steering(&config.resolve(f))?;
                if set.fs != config.fs {
                    issues.push(Issue::new(
                        "array.steering_file",
                        format!("sampled at fs = {} Hz but the experiment uses {} Hz", set.fs, config.fs),
                    ));
                }
                if let Some(g) = &geometry {
                    if g.len() != set.mic_count {
                        issues.push(Issue::new(
                            "array.steering_file",
                            format!("{} microphones but the geometry has {}", set.mic_count, g.len()),
                        ));
                    }
                }
                let need = config
                    .erank
                    .as_ref()
                    .map_or(config.estimator.order, |e| e.order.max(config.estimator.order));
                if set.order < need {
                    issues.push(Issue::new(
                        "array.steering_file",
                        format!("order {} is below the required order {need}", set.order),
                    ));
                }
                set.speed_of_sound = c;
                Model::Tabulated(set)
            }
            None => Model::Sphere(RigidSphere {
                geometry: geometry.clone().expect("validated layout has a geometry"),
                speed_of_sound: c,
            }),
        };
        let trajectory = match (&config.motion.mode, &config.motion.trajectory_file) {
            (MotionKind::TrajectoryFile, Some(f)) => {
                let t = formats::load_trajectory(&config.resolve(f))?;
                if t.len() < config.estimator.frames {
                    issues.push(Issue::new(
                        "motion.trajectory_file",
                        format!("{} poses for {} analysed frames", t.len(), config.estimator.frames),
                    ));
                }
                Some(t)
            }
            _ => None,
        };
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        let directions = match (&config.source.directions_deg, config.source.direction_table) {
            (Some(d), _) => d.iter().map(|[t, p]| (t.to_radians(), p.to_radians())).collect(),
            (None, Some(n)) => {
                let table = near_uniform_directions(n)?;
                let count = config.source.direction_count.unwrap_or(n);
                (0..count).map(|k| table[k * n / count]).collect()
            }
            (None, None) => Vec::new(),
        };
        let carrier = if config.source.snap_to_bin {
            params.bin_frequency(params.nearest_bin(config.source.frequency))
        } else {
            config.source.frequency
        };
        Ok(Self {
            config,
            params,
            bins,
            model,
            geometry,
            trajectory,
            directions,
            carrier,
        })
    }

    /// Motion conditions in configuration order.
    pub fn motion_cases(&self) -> Vec<MotionCase> {
        match self.config.motion.mode {
            MotionKind::TrajectoryFile => vec![MotionCase::File],
            MotionKind::Static => vec![MotionCase::Rotate(0.0)],
            MotionKind::RotateZ => self
                .config
                .motion
                .angular_velocity
                .iter()
                .map(|&w| MotionCase::Rotate(w))
                .collect(),
        }
    }

    /// Simulator motion, analysis trajectory and reference orientation.
    pub fn motion_setup(&self, case: MotionCase) -> Result<MotionSetup> {
        let frames = self.config.estimator.frames;
        let p = &self.params;
        let times: Vec<f64> = (0..frames).map(|i| p.frame_center_time(i)).collect();
        let interval = self.config.motion.update_interval;
        match case {
            MotionCase::Rotate(w) => {
                let mode = if w == 0.0 {
                    MotionMode::Static
                } else {
                    MotionMode::RotateZ { rate_deg_s: w }
                };
                let sim = MotionSpec {
                    mode,
                    update_interval: interval,
                };
                let q_ref = sim.pose_at(times[0]).rotation.to_matrix();
                let span = (frames.saturating_sub(1) * p.hop) as f64 / p.fs;
                Ok(MotionSetup {
                    trajectory: Trajectory::rotate_z(w.to_radians(), &times)?,
                    sim,
                    q_ref,
                    angular_velocity: Some(w),
                    half_angle_deg: Some(w.abs() * span / 2.0),
                })
            }
            MotionCase::File => {
                let traj = self
                    .trajectory
                    .clone()
                    .ok_or_else(|| Error::Validation(vec![Issue::new("motion.trajectory_file", "not loaded")]))?;
                let abs = traj.to_absolute();
                let half_hop = p.hop as f64 / (2.0 * p.fs);
                let pose_times: Vec<f64> = (0..abs.len())
                    .map(|i| if i == 0 { 0.0 } else { p.frame_center_time(i) - half_hop })
                    .collect();
                Ok(MotionSetup {
                    sim: MotionSpec {
                        mode: MotionMode::Poses {
                            times: pose_times,
                            poses: abs.poses().to_vec(),
                        },
                        update_interval: interval,
                    },
                    trajectory: traj,
                    q_ref: Matrix3::identity(),
                    angular_velocity: None,
                    half_angle_deg: None,
                })
            }
        }
    }

    /// Source waveform variants in configuration order.
    pub fn source_variants(&self) -> Vec<SourceVariant> {
        let s = &self.config.source;
        let mut out = Vec::new();
        for &kind in &s.kind {
            match kind {
                SourceKindConfig::Tone | SourceKindConfig::Wideband => out.push(SourceVariant {
                    kind,
                    am_level_db: None,
                    fm_deviation_hz: None,
                }),
                SourceKindConfig::AmTone => out.extend(s.am_level.iter().map(|&l| SourceVariant {
                    kind,
                    am_level_db: Some(l),
                    fm_deviation_hz: None,
                })),
                SourceKindConfig::FmTone => out.extend(s.fm_deviation.iter().map(|&d| SourceVariant {
                    kind,
                    am_level_db: None,
                    fm_deviation_hz: Some(d),
                })),
            }
        }
        out
    }

    /// Sets of simultaneously active directions, one per scenario.
    pub fn scenarios(&self) -> Vec<Vec<usize>> {
        let n = self.directions.len();
        if self.config.source.simultaneous {
            vec![(0..n).collect()]
        } else {
            (0..n).map(|d| vec![d]).collect()
        }
    }

    /// Source specs in world coordinates for one scenario.
    pub fn sources(&self, variant: &SourceVariant, scenario: &[usize], q_ref: &Matrix3<f64>) -> Vec<SourceSpec> {
        let s = &self.config.source;
        scenario
            .iter()
            .map(|&d| {
                let (t, p) = self.directions[d];
                let world = direction_of(&(q_ref * unit_vector(t, p)));
                let mut spec = match variant.kind {
                    SourceKindConfig::Tone => SourceSpec::tone(self.carrier, world),
                    SourceKindConfig::AmTone => {
                        SourceSpec::am_tone(self.carrier, variant.am_level_db.unwrap_or(0.0), s.mod_rate, world)
                    }
                    SourceKindConfig::FmTone => {
                        SourceSpec::fm_tone(self.carrier, variant.fm_deviation_hz.unwrap_or(0.0), s.mod_rate, world)
                    }
                    SourceKindConfig::Wideband => SourceSpec::wideband(waveform_seed(self.config.seed, d), world),
                };
                spec.amplitude = s.amplitude;
                spec
            })
            .collect()
    }

    /// Samples spanning the analysed frames.
    pub fn signal_len(&self) -> usize {
        self.params.samples_for_frames(self.config.estimator.frames)
    }

    pub fn synthesizer(&self) -> Result<Synthesizer> {
        let g = self.geometry.clone().ok_or_else(|| {
            Error::Validation(vec![Issue::new(
                "array.geometry_file",
                "synthesis needs the microphone geometry",
            )])
        })?;
        Ok(Synthesizer::new(g, self.config.fs, self.config.speed_of_sound)?)
    }

    fn noise_band(&self) -> NoiseBand {
        match self.config.noise.band {
            NoiseBandConfig::Wideband => NoiseBand::Wideband,
            NoiseBandConfig::Narrowband => NoiseBand::Narrowband {
                params: self.params,
                bin: self.params.nearest_bin(self.carrier),
            },
        }
    }

    /// Estimator variants `(method, I)` in configuration order.
    pub fn estimator_variants(&self) -> Vec<(MethodConfig, Option<usize>)> {
        let e = &self.config.estimator;
        let mut out = Vec::new();
        for &m in &e.method {
            if m == MethodConfig::Enhanced {
                out.extend(e.stack.iter().map(|&i| (m, Some(i))));
            } else {
                out.push((m, None));
            }
        }
        out
    }

    /// `(I, J)` for a stacking size.
    pub fn stacking(&self, i: usize) -> Result<Stacking> {
        let e = &self.config.estimator;
        let j = e.estimates.unwrap_or(e.frames / i.max(1));
        if i == 0 || j == 0 || i * j > e.frames {
            return Err(Error::Validation(vec![Issue::new(
                "estimator.stack",
                format!("I·J = {i}·{j} exceeds the {} frames", e.frames),
            )]));
        }
        Ok(Stacking {
            frames_per_block: i,
            blocks: j,
        })
    }

    pub fn operator(&self, method: MethodConfig, stack: Option<usize>, traj: &Trajectory) -> Result<Operator> {
        let e = &self.config.estimator;
        let m = &self.model;
        Ok(match method {
            MethodConfig::None => Operator::Stationary(StationaryOperator::new(m, &self.params, &self.bins, e.order)?),
            MethodConfig::Compensated => Operator::Compensated(CompensatedOperator::new(
                m,
                &self.params,
                &self.bins,
                e.order,
                traj,
                e.frames,
            )?),
            MethodConfig::Enhanced => Operator::Enhanced(EnhancedOperator::new(
                m,
                &self.params,
                &self.bins,
                e.order,
                traj,
                self.stacking(stack.unwrap_or(1))?,
                e.sv_threshold,
            )?),
        })
    }

    /// Stacked system `A` over frames `0..frames` at `freq`.
    pub fn stacked_matrix(&self, traj: &Trajectory, frames: usize, freq: f64, order: u32) -> Result<shmotion_core::CMatrix> {
        let ws = frame_transforms(traj, frames, self.model.wavenumber(freq), order)?;
        let vs = ws
            .iter()
            .map(|w| self.model.steering(freq, w.output_order).map(|s| s.matrix))
            .collect::<shmotion_core::Result<Vec<_>>>()?;
        Ok(combined_matrix(&vs, &ws, frames)?)
    }
}

/// Derived seed for a wideband source waveform.
fn waveform_seed(seed: u64, direction: usize) -> u64 {
    seed ^ (direction as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionCase {
    /// Rotation about +z in deg/s; 0 is a static array.
    Rotate(f64),
    File,
}

#[derive(Debug, Clone)]
pub struct MotionSetup {
    pub sim: MotionSpec,
    pub trajectory: Trajectory,
    /// Array orientation at the centre of frame 0.
    pub q_ref: Matrix3<f64>,
    pub angular_velocity: Option<f64>,
    /// Rotation over the analysed frames, halved.
    pub half_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceVariant {
    pub kind: SourceKindConfig,
    pub am_level_db: Option<f64>,
    pub fm_deviation_hz: Option<f64>,
}

pub enum Operator {
    Stationary(StationaryOperator),
    Compensated(CompensatedOperator),
    Enhanced(EnhancedOperator),
}

impl Operator {
    /// PWD estimate; `aligned` caches the phase-aligned frames.
    pub fn apply(&self, frames: &StftFrames, aligned: &mut Option<StftFrames>) -> Result<PwdEstimate> {
        Ok(match self {
            Self::Stationary(op) => pwd_stationary(frames, op)?,
            Self::Compensated(op) => pwd_compensated(frames, op)?,
            Self::Enhanced(op) => {
                if aligned.is_none() {
                    *aligned = Some(time_align(frames, 0)?);
                }
                pwd_enhanced(aligned.as_ref().expect("set above"), op)?
            }
        })
    }
}

/// DoA estimates and MUSIC values of one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub estimates: Vec<(f64, f64)>,
    pub peak_values: Vec<f64>,
    pub shortfall: bool,
    pub spectrum: Vec<f64>,
}

/// PWD, smoothed covariance, MUSIC and peak picking.
pub fn analyse(
    op: &Operator,
    frames: &StftFrames,
    aligned: &mut Option<StftFrames>,
    grid: &MusicGrid,
    sources: usize,
    whiten: bool,
) -> Result<Analysis> {
    let pwd = op.apply(frames, aligned)?;
    let q = smoothed_covariance(&pwd)?;
    let spec = music_spectrum(&q, sources, grid, whiten)?;
    let peaks = pick_peaks(&spec, sources)?;
    Ok(Analysis {
        estimates: peaks.estimates,
        peak_values: peaks.values,
        shortfall: peaks.shortfall,
        spectrum: spec.values,
    })
}

/// Greedy nearest matching of estimates to true directions; returns the
/// great-circle error of each matched pair, in truth order.
pub fn match_errors(estimates: &[(f64, f64)], truth: &[(f64, f64)]) -> Vec<f64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (ei, e) in estimates.iter().enumerate() {
            pairs.push((doa_error_angle(*e, *t), ti, ei));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; truth.len()];
    let mut used_e = vec![false; estimates.len()];
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (err, ti, ei) in pairs {
        if !used_t[ti] && !used_e[ei] {
            used_t[ti] = true;
            used_e[ei] = true;
            out.push((ti, err));
        }
    }
    out.sort_by_key(|p| p.0);
    out.into_iter().map(|p| p.1).collect()
}

fn deg(d: (f64, f64)) -> [f64; 2] {
    [d.0.to_degrees(), d.1.to_degrees()]
}

/// Outcome of one noise realization under one condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scenario: usize,
    pub trial: usize,
    pub truth_deg: Vec<[f64; 2]>,
    pub estimates_deg: Vec<[f64; 2]>,
    pub errors_deg: Vec<f64>,
    /// Mean over matched sources.
    pub error_deg: Option<f64>,
    pub shortfall: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: usize,
    pub angular_velocity_deg_s: Option<f64>,
    pub source: SourceVariant,
    /// `None` when noise is disabled.
    pub snr_db: Option<f64>,
    pub method: MethodConfig,
    pub stack: Option<usize>,
    /// Estimates per covariance (`J` for enhanced, frames otherwise).
    pub estimates: usize,
    pub half_angle_deg: Option<f64>,
    /// Effective rank of the first stacked system at the first analysed bin.
    pub effective_rank: Option<f64>,
    /// Singular values above the threshold in that system.
    pub significant_singular_values: Option<usize>,
    pub mean_error_deg: Option<f64>,
    pub std_error_deg: Option<f64>,
    pub completed: usize,
    pub failed: usize,
    pub shortfalls: usize,
    pub trials: Vec<TrialRecord>,
    /// MUSIC values of scenario 0, trial 0, in grid order.
    #[serde(skip)]
    pub spectrum: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub directions_deg: Vec<[f64; 2]>,
    pub scenarios: Vec<Vec<usize>>,
    pub bins: Vec<usize>,
    pub frequencies_hz: Vec<f64>,
    pub carrier_hz: f64,
    pub grid_resolution_deg: f64,
    pub conditions: Vec<ConditionResult>,
    /// Grid points `(theta, phi)` in degrees for the spectra.
    #[serde(skip)]
    pub grid_deg: Vec<[f64; 2]>,
    pub config: ExperimentConfig,
}

struct Local {
    snr: f64,
    method: MethodConfig,
    stack: Option<usize>,
    op_key: (MethodConfig, Option<usize>),
}

/// Runs every condition of the experiment.
pub fn run_experiment(setup: &Setup) -> Result<RunResult> {
    let cfg = &setup.config;
    let e = &cfg.estimator;
    let grid = MusicGrid::new(e.order, e.grid_resolution)?;
    let synth = setup.synthesizer()?;
    let scenarios = setup.scenarios();
    let variants = setup.source_variants();
    let estimators = setup.estimator_variants();
    let trials = cfg.trials;
    let n = setup.signal_len();
    let duration = n as f64 / cfg.fs;
    let band = setup.noise_band();
    let keep_spectrum = e.spectra == SpectraOutput::First;
    let mut conditions = Vec::new();

    for case in setup.motion_cases() {
        let ms = setup.motion_setup(case)?;
        let ops: Vec<((MethodConfig, Option<usize>), Operator)> = estimators
            .par_iter()
            .map(|&(m, i)| setup.operator(m, i, &ms.trajectory).map(|op| ((m, i), op)))
            .collect::<Result<_>>()?;
        let ops: HashMap<_, _> = ops.into_iter().collect();
        let ranks: HashMap<usize, (f64, usize)> = estimators
            .iter()
            .filter_map(|&(_, i)| i)
            .map(|i| {
                let a = setup.stacked_matrix(
                    &ms.trajectory,
                    i,
                    setup.params.bin_frequency(setup.bins[0]),
                    e.order,
                )?;
                let sv = singular_values(&a);
                let top = sv.iter().copied().fold(0.0, f64::max);
                let sig = sv.iter().filter(|&&s| s > e.sv_threshold * top).count();
                Ok((i, (effective_rank(&a)?, sig)))
            })
            .collect::<Result<_>>()?;

        for variant in &variants {
            let clean: Vec<Vec<Vec<f64>>> = scenarios
                .par_iter()
                .map(|sc| {
                    let srcs = setup.sources(variant, sc, &ms.q_ref);
                    synth.run(&ms.sim, &srcs, duration).map_err(Error::from)
                })
                .collect::<Result<_>>()?;

            let locals: Vec<Local> = cfg
                .noise
                .snr
                .iter()
                .flat_map(|&snr| {
                    estimators.iter().map(move |&(method, stack)| Local {
                        snr,
                        method,
                        stack,
                        op_key: (method, stack),
                    })
                })
                .collect();

            let jobs: Vec<(usize, usize)> = (0..scenarios.len())
                .flat_map(|s| (0..trials).map(move |t| (s, t)))
                .collect();
            let outcomes: Vec<Vec<std::result::Result<Analysis, String>>> = jobs
                .par_iter()
                .map(|&(s, t)| {
                    let mut out = Vec::with_capacity(locals.len());
                    let mut cached: Option<(f64, std::result::Result<StftFrames, String>, Option<StftFrames>)> = None;
                    for l in &locals {
                        if cached.as_ref().is_none_or(|c| c.0 != l.snr) {
                            let spec = NoiseSpec {
                                snr_db: l.snr,
                                band,
                                seed: cfg.seed,
                                stream: (s * trials + t) as u64,
                            };
                            let frames = add_noise(&clean[s], &spec, &clean[s])
                                .and_then(|x| stft(&x, &setup.params))
                                .map_err(|e| e.to_string());
                            cached = Some((l.snr, frames, None));
                        }
                        let (_, frames, aligned) = cached.as_mut().expect("set above");
                        let r = match frames {
                            Ok(f) => analyse(&ops[&l.op_key], f, aligned, &grid, e.sources, e.whiten)
                                .map_err(|e| e.to_string()),
                            Err(msg) => Err(msg.clone()),
                        };
                        out.push(r);
                    }
                    out
                })
                .collect();

            for (li, l) in locals.iter().enumerate() {
                let mut records = Vec::with_capacity(jobs.len());
                let mut spectrum = None;
                for (ji, &(s, t)) in jobs.iter().enumerate() {
                    let truth: Vec<(f64, f64)> = scenarios[s].iter().map(|&d| setup.directions[d]).collect();
                    let rec = match &outcomes[ji][li] {
                        Ok(a) => {
                            if keep_spectrum && s == 0 && t == 0 {
                                spectrum = Some(a.spectrum.clone());
                            }
                            let errors = match_errors(&a.estimates, &truth);
                            let error = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
                            TrialRecord {
                                scenario: s,
                                trial: t,
                                truth_deg: truth.iter().map(|&d| deg(d)).collect(),
                                estimates_deg: a.estimates.iter().map(|&d| deg(d)).collect(),
                                errors_deg: errors,
                                error_deg: error,
                                shortfall: a.shortfall,
                                failure: None,
                            }
                        }
                        Err(msg) => TrialRecord {
                            scenario: s,
                            trial: t,
                            truth_deg: truth.iter().map(|&d| deg(d)).collect(),
                            estimates_deg: Vec::new(),
                            errors_deg: Vec::new(),
                            error_deg: None,
                            shortfall: false,
                            failure: Some(msg.clone()),
                        },
                    };
                    records.push(rec);
                }
                let errs: Vec<f64> = records.iter().filter_map(|r| r.error_deg).collect();
                let stats = error_stats(&errs).ok();
                let rank = l.stack.and_then(|i| ranks.get(&i).copied());
                conditions.push(ConditionResult {
                    id: conditions.len(),
                    angular_velocity_deg_s: ms.angular_velocity,
                    source: *variant,
                    snr_db: l.snr.is_finite().then_some(l.snr),
                    method: l.method,
                    stack: l.stack,
                    estimates: match l.stack {
                        Some(i) => setup.stacking(i)?.blocks,
                        None => e.frames,
                    },
                    half_angle_deg: ms.half_angle_deg,
                    effective_rank: rank.map(|r| r.0),
                    significant_singular_values: rank.map(|r| r.1),
                    mean_error_deg: stats.map(|s| s.0),
                    std_error_deg: stats.map(|s| s.1),
                    completed: records.iter().filter(|r| r.failure.is_none()).count(),
                    failed: records.iter().filter(|r| r.failure.is_some()).count(),
                    shortfalls: records.iter().filter(|r| r.shortfall).count(),
                    trials: records,
                    spectrum,
                });
            }
        }
    }

    Ok(RunResult {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        trials,
        directions_deg: setup.directions.iter().map(|&d| deg(d)).collect(),
        scenarios,
        bins: setup.bins.clone(),
        frequencies_hz: setup.bins.iter().map(|&b| setup.params.bin_frequency(b)).collect(),
        carrier_hz: setup.carrier,
        grid_resolution_deg: e.grid_resolution,
        conditions,
        grid_deg: grid.points().iter().map(|&p| deg(p)).collect(),
        config: cfg.clone(),
    })
}

/// One analysis of recorded audio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub method: MethodConfig,
    pub stack: Option<usize>,
    pub estimates_deg: Vec<[f64; 2]>,
    pub peak_values: Vec<f64>,
    pub shortfall: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub schema_version: u32,
    pub name: String,
    pub frames: usize,
    pub bins: Vec<usize>,
    pub frequencies_hz: Vec<f64>,
    pub results: Vec<EstimateRecord>,
}

/// Runs every configured estimator on recorded audio. `trajectory`
/// overrides the configured motion.
pub fn estimate_audio(
    setup: &Setup,
    audio: &formats::Audio,
    trajectory: Option<&Trajectory>,
) -> Result<EstimateResult> {
    let cfg = &setup.config;
    let e = &cfg.estimator;
    let mut issues = Vec::new();
    if audio.fs != cfg.fs {
        issues.push(Issue::new("fs", format!("audio is sampled at {} Hz", audio.fs)));
    }
    let m = setup.model.mic_count();
    if audio.channels.len() != m {
        issues.push(Issue::new(
            "array",
            format!("audio has {} channels but the array has {m} microphones", audio.channels.len()),
        ));
    }
    let available = audio.channels.first().map_or(0, |c| setup.params.frame_count(c.len()));
    if available < e.frames {
        issues.push(Issue::new(
            "estimator.frames",
            format!("audio holds {available} frames, {} requested", e.frames),
        ));
    }
    if let Some(t) = trajectory {
        if t.len() < e.frames {
            issues.push(Issue::new(
                "estimator.frames",
                format!("trajectory has {} poses, {} requested", t.len(), e.frames),
            ));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    let traj = match trajectory {
        Some(t) => t.clone(),
        None => {
            let case = setup.motion_cases()[0];
            setup.motion_setup(case)?.trajectory
        }
    };
    let frames = stft(&audio.channels, &setup.params)?.slice(0, e.frames)?;
    let grid = MusicGrid::new(e.order, e.grid_resolution)?;
    let mut aligned = None;
    let mut results = Vec::new();
    for (method, stack) in setup.estimator_variants() {
        let op = setup.operator(method, stack, &traj)?;
        let a = analyse(&op, &frames, &mut aligned, &grid, e.sources, e.whiten)?;
        results.push(EstimateRecord {
            method,
            stack,
            estimates_deg: a.estimates.iter().map(|&d| deg(d)).collect(),
            peak_values: a.peak_values,
            shortfall: a.shortfall,
        });
    }
    Ok(EstimateResult {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        frames: e.frames,
        bins: setup.bins.clone(),
        frequencies_hz: setup.bins.iter().map(|&b| setup.params.bin_frequency(b)).collect(),
        results,
    })
}

/// Synthesized signals for one motion case and scenario.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub motion_index: usize,
    pub scenario: usize,
    pub angular_velocity_deg_s: Option<f64>,
    pub snr_db: Option<f64>,
    pub truth_deg: Vec<[f64; 2]>,
    pub audio: formats::Audio,
    pub trajectory: Trajectory,
}

/// Mic signals of the first source variant at the first SNR (trial 0) for
/// every motion case and scenario.
pub fn synthesize(setup: &Setup) -> Result<Vec<SynthOutput>> {
    let cfg = &setup.config;
    let synth = setup.synthesizer()?;
    let variant = setup.source_variants()[0];
    let snr = cfg.noise.snr[0];
    let duration = setup.signal_len() as f64 / cfg.fs;
    let mut out = Vec::new();
    for (mi, case) in setup.motion_cases().into_iter().enumerate() {
        let ms = setup.motion_setup(case)?;
        for (s, sc) in setup.scenarios().iter().enumerate() {
            let srcs = setup.sources(&variant, sc, &ms.q_ref);
            let clean = synth.run(&ms.sim, &srcs, duration)?;
            let spec = NoiseSpec {
                snr_db: snr,
                band: setup.noise_band(),
                seed: cfg.seed,
                stream: (s * cfg.trials) as u64,
            };
            let noisy = add_noise(&clean, &spec, &clean)?;
            out.push(SynthOutput {
                motion_index: mi,
                scenario: s,
                angular_velocity_deg_s: ms.angular_velocity,
                snr_db: snr.is_finite().then_some(snr),
                truth_deg: sc.iter().map(|&d| deg(setup.directions[d])).collect(),
                audio: formats::Audio {
                    fs: cfg.fs,
                    channels: noisy,
                },
                trajectory: ms.trajectory.clone(),
            });
        }
    }
    Ok(out)
}

/// Rotation about +z by `deg` degrees combined with a translation.
pub fn step_pose(rotation_deg: f64, r: f64, dir: (f64, f64)) -> Result<FramePose> {
    Ok(FramePose {
        rotation: EulerAngles::about_z(rotation_deg.to_radians()),
        translation: shmotion_core::motion::TranslationVec::new(r, dir.0, dir.1)?,
    })
}
