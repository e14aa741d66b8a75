//! Moving rigid-sphere array simulator.
//!
//! Every microphone signal is the source filtered by the rigid-sphere
//! frequency response for the current source direction in the array frame.
//! The response depends on the mic and source directions only through the
//! angle `γ` between them:
//!
//! `H(f, γ) = Σ_n b_n(kr) (2n+1)/(4π) P_n(cos γ)`
//!
//! so each order `n` is realized once as a 512-tap FIR `g_n` and a mic's
//! filter in a block is `Σ_n P_n(cos γ) g_n`. Filters switch hard at every
//! update block. The FIR latency is removed, so output sample `t` is aligned
//! with source time `t`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::motion::{unit_vector, EulerAngles, FramePose};
use crate::sh::legendre_all;
use crate::spectral::{overlap_save, stft, StftParams};
use crate::steering::{mode_strength_all, ArrayGeometry};
use crate::{Error, Result, SPEED_OF_SOUND};

/// FIR length of the per-order filters.
pub const FIR_LEN: usize = 512;
/// Circular shift that makes the filters causal.
const FIR_DELAY: usize = FIR_LEN / 2;
/// Half-width of the fractional-delay interpolator.
const INTERP_HALF: usize = 32;
/// Default filter update interval in seconds.
pub const DEFAULT_UPDATE_INTERVAL: f64 = 1e-3;
/// Band of the wideband speech proxy in Hz.
pub const WIDEBAND_BAND: (f64, f64) = (300.0, 3400.0);
const WIDEBAND_TAPS: usize = 257;

/// Source waveform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Tone,
    AmTone,
    FmTone,
    Wideband,
}

/// Far-field source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// Carrier frequency in Hz (unused for wideband).
    pub frequency: f64,
    /// Peak-to-trough envelope ratio in dB.
    pub am_level_db: f64,
    /// Peak frequency deviation in Hz.
    pub fm_deviation: f64,
    /// Modulation rate in Hz.
    pub mod_rate: f64,
    /// Arrival direction `(theta, phi)` in radians, reference frame.
    pub direction: (f64, f64),
    pub amplitude: f64,
    /// Seed of the wideband waveform.
    pub seed: u64,
}

impl SourceSpec {
    pub fn tone(frequency: f64, direction: (f64, f64)) -> Self {
        Self {
            kind: SourceKind::Tone,
            frequency,
            am_level_db: 0.0,
            fm_deviation: 0.0,
            mod_rate: 0.0,
            direction,
            amplitude: 1.0,
            seed: 0,
        }
    }

    pub fn am_tone(frequency: f64, level_db: f64, mod_rate: f64, direction: (f64, f64)) -> Self {
        Self {
            kind: SourceKind::AmTone,
            am_level_db: level_db,
            mod_rate,
            ..Self::tone(frequency, direction)
        }
    }

    pub fn fm_tone(frequency: f64, deviation: f64, mod_rate: f64, direction: (f64, f64)) -> Self {
        Self {
            kind: SourceKind::FmTone,
            fm_deviation: deviation,
            mod_rate,
            ..Self::tone(frequency, direction)
        }
    }

    pub fn wideband(seed: u64, direction: (f64, f64)) -> Self {
        Self {
            kind: SourceKind::Wideband,
            seed,
            ..Self::tone(0.0, direction)
        }
    }

    /// Highest frequency the waveform contains.
    pub fn max_frequency(&self) -> f64 {
        match self.kind {
            SourceKind::Tone | SourceKind::AmTone => self.frequency + self.mod_rate_if_am(),
            SourceKind::FmTone => self.frequency + self.fm_deviation.abs(),
            SourceKind::Wideband => WIDEBAND_BAND.1,
        }
    }

    fn mod_rate_if_am(&self) -> f64 {
        if self.kind == SourceKind::AmTone {
            self.mod_rate
        } else {
            0.0
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let (theta, phi) = self.direction;
        if !(theta.is_finite() && phi.is_finite()) || !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParameter(alloc::format!(
                "source direction ({theta}, {phi}) is not valid"
            )));
        }
        if !(self.mod_rate >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter(
                "modulation rate must be non-negative and amplitude finite".into(),
            ));
        }
        if self.kind == SourceKind::AmTone && !self.am_level_db.is_finite() {
            return Err(Error::InvalidParameter("AM level must be finite".into()));
        }
        let f = self.max_frequency();
        if !(f < fs / 2.0) {
            return Err(Error::Aliasing { freq: f, fs });
        }
        Ok(())
    }
}

/// Samples of `spec` over `duration` seconds starting at time 0.
pub fn make_source(spec: &SourceSpec, duration: f64, fs: f64) -> Result<Vec<f64>> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    spec.validate(fs)?;
    Ok(source_samples(spec, 0.0, libm::round(duration * fs) as usize, fs))
}

fn source_samples(spec: &SourceSpec, start: f64, n: usize, fs: f64) -> Vec<f64> {
    let a = spec.amplitude;
    let f = spec.frequency;
    let fm = spec.mod_rate;
    let time = |i: usize| start + i as f64 / fs;
    match spec.kind {
        SourceKind::Tone => (0..n).map(|i| a * libm::sin(2.0 * PI * f * time(i))).collect(),
        SourceKind::AmTone => {
            let rho = libm::pow(10.0, spec.am_level_db / 20.0);
            let mu = (rho - 1.0) / (rho + 1.0);
            (0..n)
                .map(|i| {
                    let t = time(i);
                    a * (1.0 + mu * libm::sin(2.0 * PI * fm * t)) * libm::sin(2.0 * PI * f * t)
                })
                .collect()
        }
        SourceKind::FmTone => (0..n)
            .map(|i| {
                let t = time(i);
                let excursion = if fm > 0.0 {
                    spec.fm_deviation / fm * (1.0 - libm::cos(2.0 * PI * fm * t))
                } else {
                    0.0
                };
                a * libm::sin(2.0 * PI * f * t + excursion)
            })
            .collect(),
        SourceKind::Wideband => wideband(spec.seed, n, fs, a),
    }
}

/// Gaussian noise band-limited to [`WIDEBAND_BAND`] with RMS `amplitude`.
fn wideband(seed: u64, n: usize, fs: f64, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n + WIDEBAND_TAPS)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let h = bandpass(WIDEBAND_BAND.0 / fs, WIDEBAND_BAND.1 / fs, WIDEBAND_TAPS);
    let gain = libm::sqrt(h.iter().map(|v| v * v).sum::<f64>());
    let y = overlap_save(&white, &h);
    y[WIDEBAND_TAPS..].iter().map(|v| v * amplitude / gain).collect()
}

/// Blackman-windowed ideal band-pass, cut-offs in cycles per sample.
fn bandpass(lo: f64, hi: f64, taps: usize) -> Vec<f64> {
    let c = (taps - 1) as f64 / 2.0;
    (0..taps)
        .map(|t| {
            let x = t as f64 - c;
            let w = 0.42 - 0.5 * libm::cos(2.0 * PI * t as f64 / (taps - 1) as f64)
                + 0.08 * libm::cos(4.0 * PI * t as f64 / (taps - 1) as f64);
            w * (2.0 * hi * sinc(2.0 * hi * x) - 2.0 * lo * sinc(2.0 * lo * x))
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        libm::sin(PI * x) / (PI * x)
    }
}

/// How the array moves.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionMode {
    Static,
    /// Rotation about +z at a constant rate in deg/s.
    RotateZ { rate_deg_s: f64 },
    /// Absolute poses held from each time (seconds) until the next one.
    Poses { times: Vec<f64>, poses: Vec<FramePose> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec {
    pub mode: MotionMode,
    /// Filter update interval in seconds.
    pub update_interval: f64,
}

impl MotionSpec {
    pub fn stationary() -> Self {
        Self {
            mode: MotionMode::Static,
            update_interval: DEFAULT_UPDATE_INTERVAL,
        }
    }

    pub fn rotate_z(rate_deg_s: f64) -> Self {
        Self {
            mode: MotionMode::RotateZ { rate_deg_s },
            update_interval: DEFAULT_UPDATE_INTERVAL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.update_interval > 0.0) || !self.update_interval.is_finite() {
            return Err(Error::InvalidParameter(
                "filter update interval must be positive".into(),
            ));
        }
        match &self.mode {
            MotionMode::Static => Ok(()),
            MotionMode::RotateZ { rate_deg_s } if rate_deg_s.is_finite() => Ok(()),
            MotionMode::RotateZ { .. } => {
                Err(Error::InvalidParameter("angular velocity must be finite".into()))
            }
            MotionMode::Poses { times, poses } => {
                if times.is_empty() || times.len() != poses.len() {
                    return Err(Error::Config(alloc::format!(
                        "{} pose times for {} poses",
                        times.len(),
                        poses.len()
                    )));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
                    return Err(Error::Config("pose times must increase strictly".into()));
                }
                Ok(())
            }
        }
    }

    /// Array orientation and centre position at time `t`.
    pub fn pose_at(&self, t: f64) -> FramePose {
        match &self.mode {
            MotionMode::Static => FramePose::identity(),
            MotionMode::RotateZ { rate_deg_s } => {
                FramePose::rotation_only(EulerAngles::about_z(rate_deg_s.to_radians() * t))
            }
            MotionMode::Poses { times, poses } => {
                let i = times.partition_point(|&s| s <= t).saturating_sub(1);
                poses[i]
            }
        }
    }

    /// Samples per filter update block.
    pub fn block_len(&self, fs: f64) -> usize {
        (libm::round(self.update_interval * fs) as usize).max(1)
    }

    /// Number of filter updates for `samples` output samples.
    pub fn update_count(&self, samples: usize, fs: f64) -> usize {
        samples.div_ceil(self.block_len(fs))
    }

    /// Time at which each block's filter is evaluated (the block centre).
    pub fn block_times(&self, samples: usize, fs: f64) -> Vec<f64> {
        let b = self.block_len(fs);
        (0..self.update_count(samples, fs))
            .map(|i| (i as f64 + 0.5) * b as f64 / fs)
            .collect()
    }
}

/// Rigid-sphere array signal generator with the per-order FIRs cached.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    geometry: ArrayGeometry,
    fs: f64,
    speed_of_sound: f64,
    basis: Vec<Vec<f64>>,
}

impl Synthesizer {
    pub fn new(geometry: ArrayGeometry, fs: f64, speed_of_sound: f64) -> Result<Self> {
        if !(fs > 0.0) || !(speed_of_sound > 0.0) {
            return Err(Error::InvalidParameter(
                "sampling rate and speed of sound must be positive".into(),
            ));
        }
        let x_max = PI * fs * geometry.radius / speed_of_sound;
        let n_max = libm::ceil(x_max) as u32 + 12;
        let basis = order_filters(n_max, fs, geometry.radius, speed_of_sound);
        Ok(Self {
            geometry,
            fs,
            speed_of_sound,
            basis,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Highest SH order of the filter expansion.
    pub fn order(&self) -> u32 {
        self.basis.len() as u32 - 1
    }

    /// Mic signals `[mic][sample]` for `duration` seconds.
    pub fn run(&self, motion: &MotionSpec, sources: &[SourceSpec], duration: f64) -> Result<Vec<Vec<f64>>> {
        if !(duration > 0.0) {
            return Err(Error::InvalidParameter("duration must be positive".into()));
        }
        motion.validate()?;
        for s in sources {
            s.validate(self.fs)?;
        }
        let n = libm::round(duration * self.fs) as usize;
        let mut out = vec![vec![0.0; n]; self.geometry.len()];
        for s in sources {
            self.add_source(&mut out, motion, s, n);
        }
        Ok(out)
    }

    fn add_source(&self, out: &mut [Vec<f64>], motion: &MotionSpec, src: &SourceSpec, n: usize) {
        let fs = self.fs;
        let omega = unit_vector(src.direction.0, src.direction.1);
        let times = motion.block_times(n, fs);
        let states: Vec<(Matrix3<f64>, f64)> = times
            .iter()
            .map(|&t| {
                let p = motion.pose_at(t);
                let advance = omega.dot(&p.translation.to_cartesian()) / self.speed_of_sound * fs;
                (p.rotation.to_matrix(), advance)
            })
            .collect();
        let translating = states.iter().any(|s| s.1 != 0.0);
        let max_adv = states.iter().map(|s| libm::ceil(s.1.abs()) as usize).max().unwrap_or(0);
        let pad = FIR_LEN + INTERP_HALF + max_adv;
        let x = source_samples(src, -(pad as f64) / fs, n + 2 * pad, fs);
        let u: Vec<Vec<f64>> = self.basis.iter().map(|g| overlap_save(&x, g)).collect();
        let mics: Vec<Vector3<f64>> = self
            .geometry
            .mics
            .iter()
            .map(|&(t, p)| unit_vector(t, p))
            .collect();
        let block = motion.block_len(fs);
        let n_max = self.order();
        for (b, (q, advance)) in states.iter().enumerate() {
            let local = q.transpose() * omega;
            let weights: Vec<Vec<f64>> = mics
                .iter()
                .map(|m| legendre_all(n_max, m.dot(&local).clamp(-1.0, 1.0)))
                .collect();
            let (shift, kernel) = if translating {
                let whole = libm::floor(*advance);
                (whole as isize, Some(interpolator(advance - whole)))
            } else {
                (0, None)
            };
            let start = b * block;
            let end = (start + block).min(n);
            for t in start..end {
                let idx = (t + pad + FIR_DELAY) as isize + shift;
                let sample = |un: &Vec<f64>| match &kernel {
                    None => un[idx as usize],
                    Some(k) => k
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * un[(idx + j as isize - INTERP_HALF as isize + 1) as usize])
                        .sum(),
                };
                let vals: Vec<f64> = u.iter().map(sample).collect();
                for (y, w) in out.iter_mut().zip(weights.iter()) {
                    y[t] += w.iter().zip(vals.iter()).map(|(a, v)| a * v).sum::<f64>();
                }
            }
        }
    }
}

/// Blackman-windowed sinc weights for reading a signal `frac ∈ [0, 1)`
/// samples after an integer index, applied at offsets `1 − INTERP_HALF ..= INTERP_HALF`.
fn interpolator(frac: f64) -> Vec<f64> {
    let half = INTERP_HALF as f64;
    (0..2 * INTERP_HALF)
        .map(|j| {
            let x = j as f64 + 1.0 - half - frac;
            let w = 0.42 + 0.5 * libm::cos(PI * x / half) + 0.08 * libm::cos(2.0 * PI * x / half);
            w * sinc(x)
        })
        .collect()
}

/// Causal FIRs `g_n` for `b_n(kr)(2n+1)/(4π)`, shifted by `FIR_DELAY` and
/// tapered with half-Hamming tails over the outer quarters.
fn order_filters(n_max: u32, fs: f64, radius: f64, c: f64) -> Vec<Vec<f64>> {
    let len = FIR_LEN;
    let half = len / 2;
    let mut spectra = vec![vec![num_complex::Complex64::new(0.0, 0.0); half + 1]; n_max as usize + 1];
    for k in 0..=half {
        let x = 2.0 * PI * (k as f64 * fs / len as f64) * radius / c;
        let (b, _) = mode_strength_all(n_max, x);
        for (n, spec) in spectra.iter_mut().enumerate() {
            let mut h = b[n] * ((2 * n + 1) as f64 / (4.0 * PI));
            if k == half {
                h.im = 0.0;
            }
            spec[k] = h;
        }
    }
    let cos: Vec<f64> = (0..len).map(|t| libm::cos(2.0 * PI * t as f64 / len as f64)).collect();
    let sin: Vec<f64> = (0..len).map(|t| libm::sin(2.0 * PI * t as f64 / len as f64)).collect();
    let quarter = len / 4;
    let taper = |t: usize| {
        let d = t.min(len - 1 - t);
        if d >= quarter {
            1.0
        } else {
            0.54 - 0.46 * libm::cos(PI * d as f64 / quarter as f64)
        }
    };
    spectra
        .iter()
        .map(|spec| {
            let raw: Vec<f64> = (0..len)
                .map(|t| {
                    let mut acc = spec[0].re + spec[half].re * if t % 2 == 0 { 1.0 } else { -1.0 };
                    for (k, h) in spec.iter().enumerate().take(half).skip(1) {
                        let i = (k * t) % len;
                        acc += 2.0 * (h.re * cos[i] - h.im * sin[i]);
                    }
                    acc / len as f64
                })
                .collect();
            (0..len)
                .map(|t| raw[(t + len - FIR_DELAY) % len] * taper(t))
                .collect()
        })
        .collect()
}

/// [`Synthesizer::run`] with the default speed of sound.
pub fn synth_moving_array(
    geom: &ArrayGeometry,
    motion: &MotionSpec,
    sources: &[SourceSpec],
    duration: f64,
    fs: f64,
) -> Result<Vec<Vec<f64>>> {
    Synthesizer::new(geom.clone(), fs, SPEED_OF_SOUND)?.run(motion, sources, duration)
}

/// Band in which the SNR is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseBand {
    /// Full-band power.
    Wideband,
    /// Power in one STFT bin, averaged over frames.
    Narrowband { params: StftParams, bin: usize },
}

/// White Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// `+∞` disables the noise.
    pub snr_db: f64,
    pub band: NoiseBand,
    pub seed: u64,
    /// Counter-based stream, one per trial.
    pub stream: u64,
}

/// `signals` plus independent per-mic Gaussian noise scaled so that the
/// array-averaged signal power of `reference` over the realized noise
/// power equals the requested SNR.
pub fn add_noise(signals: &[Vec<f64>], spec: &NoiseSpec, reference: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if spec.snr_db == f64::INFINITY {
        return Ok(signals.to_vec());
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidParameter("SNR must be finite or +inf".into()));
    }
    let noise = unit_noise(signals, spec.seed, spec.stream);
    let (ps, pn) = match spec.band {
        NoiseBand::Wideband => (mean_power(reference), mean_power(&noise)),
        NoiseBand::Narrowband { params, bin } => {
            (bin_power(reference, &params, bin)?, bin_power(&noise, &params, bin)?)
        }
    };
    if !(ps > 0.0) {
        return Err(Error::UndefinedSnr);
    }
    let scale = libm::sqrt(ps / (pn * libm::pow(10.0, spec.snr_db / 10.0)));
    Ok(signals
        .iter()
        .zip(noise.iter())
        .map(|(s, v)| s.iter().zip(v.iter()).map(|(a, b)| a + scale * b).collect())
        .collect())
}

/// Unit-variance Gaussian noise shaped like `signals`, drawn mic by mic
/// from ChaCha8 stream `stream` of `seed`.
pub fn unit_noise(signals: &[Vec<f64>], seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    signals
        .iter()
        .map(|s| s.iter().map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Mean square over all samples of all channels.
pub fn mean_power(signals: &[Vec<f64>]) -> f64 {
    let count: usize = signals.iter().map(Vec::len).sum();
    if count == 0 {
        return 0.0;
    }
    signals.iter().flatten().map(|v| v * v).sum::<f64>() / count as f64
}

/// Mean `|X(bin)|²` over frames and channels.
pub fn bin_power(signals: &[Vec<f64>], params: &StftParams, bin: usize) -> Result<f64> {
    if bin >= params.stored_bins() {
        return Err(Error::InvalidParameter(alloc::format!("bin {bin} is out of range")));
    }
    let f = stft(signals, params)?;
    let mut acc = 0.0;
    for i in 0..f.frame_count() {
        for m in 0..f.mic_count() {
            acc += f.get(i, m, bin).norm_sqr();
        }
    }
    Ok(acc / (f.frame_count() * f.mic_count()) as f64)
}
