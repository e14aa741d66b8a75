//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use shmotion_core::sh::coeff_count;
use shmotion_core::spectral::{StftParams, Window};
use shmotion_core::steering::NEAR_UNIFORM_SIZES;

use crate::error::{Error, Issue, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default = "d_fs")]
    pub fs: f64,
    #[serde(default = "d_c")]
    pub speed_of_sound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub array: ArrayConfig,
    #[serde(default)]
    pub motion: MotionConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erank: Option<ErankConfig>,
    /// Directory that relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "near_uniform")]
    NearUniform,
    #[serde(rename = "equiangular_13")]
    Equiangular13,
    #[serde(rename = "file")]
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Geometry CSV, used when `layout = "file"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_file: Option<String>,
    /// Imported steering matrices used by the estimators instead of the
    /// analytic rigid-sphere model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steering_file: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Static,
    RotateZ,
    TrajectoryFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub mode: MotionKind,
    /// Angular velocities in deg/s; one condition each.
    #[serde(default = "d_velocity", deserialize_with = "sweep")]
    pub angular_velocity: Vec<f64>,
    /// Filter update interval of the simulator in seconds.
    #[serde(default = "d_update")]
    pub update_interval: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<String>,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            mode: MotionKind::Static,
            angular_velocity: d_velocity(),
            update_interval: d_update(),
            trajectory_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKindConfig {
    Tone,
    AmTone,
    FmTone,
    Wideband,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Waveform families; one condition per kind and modulation value.
    #[serde(default = "d_kind", deserialize_with = "one_or_many")]
    pub kind: Vec<SourceKindConfig>,
    #[serde(default = "d_frequency")]
    pub frequency: f64,
    /// Move tonal carriers to the centre of the nearest STFT bin.
    #[serde(default = "d_true")]
    pub snap_to_bin: bool,
    /// AM peak-to-trough levels in dB (for `am_tone`).
    #[serde(default, deserialize_with = "sweep")]
    pub am_level: Vec<f64>,
    /// FM deviations in Hz (for `fm_tone`).
    #[serde(default, deserialize_with = "sweep")]
    pub fm_deviation: Vec<f64>,
    #[serde(default = "d_mod_rate")]
    pub mod_rate: f64,
    #[serde(default = "d_one")]
    pub amplitude: f64,
    /// Explicit `[theta, phi]` directions in degrees, relative to the array
    /// at the reference frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions_deg: Option<Vec<[f64; 2]>>,
    /// Size of the near-uniform direction table to draw from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_table: Option<usize>,
    /// Number of evenly spaced table entries to use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_count: Option<usize>,
    /// All directions sound at once instead of one per scenario.
    #[serde(default)]
    pub simultaneous: bool,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            kind: d_kind(),
            frequency: d_frequency(),
            snap_to_bin: true,
            am_level: Vec::new(),
            fm_deviation: Vec::new(),
            mod_rate: d_mod_rate(),
            amplitude: 1.0,
            directions_deg: Some(vec![[90.0, 0.0]]),
            direction_table: None,
            direction_count: None,
            simultaneous: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseBandConfig {
    Wideband,
    Narrowband,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// SNR values in dB; `inf` disables noise.
    #[serde(default = "d_snr", deserialize_with = "sweep")]
    pub snr: Vec<f64>,
    #[serde(default = "d_band")]
    pub band: NoiseBandConfig,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            snr: d_snr(),
            band: d_band(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowConfig {
    Rectangular,
    Hamming,
    Hann,
}

impl From<WindowConfig> for Window {
    fn from(w: WindowConfig) -> Self {
        match w {
            WindowConfig::Rectangular => Window::Rectangular,
            WindowConfig::Hamming => Window::Hamming,
            WindowConfig::Hann => Window::Hann,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    #[serde(default = "d_frame_len")]
    pub frame_len: usize,
    #[serde(default = "d_hop")]
    pub hop: usize,
    #[serde(default = "d_window")]
    pub window: WindowConfig,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: d_frame_len(),
            hop: d_hop(),
            window: d_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    /// Stationary-array model applied regardless of motion.
    None,
    Compensated,
    Enhanced,
}

impl MethodConfig {
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Compensated => "compensated",
            Self::Enhanced => "enhanced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectraOutput {
    None,
    /// Spectrum of the first trial of the first direction per condition.
    First,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "d_method", deserialize_with = "one_or_many")]
    pub method: Vec<MethodConfig>,
    #[serde(default = "d_order")]
    pub order: u32,
    /// STFT frames per DoA estimate.
    #[serde(default = "d_frames")]
    pub frames: usize,
    /// Frames per stacked system `I` (enhanced method).
    #[serde(default = "d_stack", deserialize_with = "one_or_many")]
    pub stack: Vec<usize>,
    /// Stacked estimates per covariance `J`; defaults to `⌊frames / I⌋`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<usize>,
    #[serde(default = "d_threshold")]
    pub sv_threshold: f64,
    /// Analysed band `[low, high]` in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_range: Option<[f64; 2]>,
    /// Single analysed frequency in Hz (nearest bin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    /// Number of sources `S`.
    #[serde(default = "d_sources")]
    pub sources: usize,
    #[serde(default = "d_grid")]
    pub grid_resolution: f64,
    #[serde(default)]
    pub whiten: bool,
    #[serde(default = "d_spectra")]
    pub spectra: SpectraOutput,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: d_method(),
            order: d_order(),
            frames: d_frames(),
            stack: d_stack(),
            estimates: None,
            sv_threshold: d_threshold(),
            freq_range: None,
            frequency: None,
            sources: d_sources(),
            grid_resolution: d_grid(),
            whiten: false,
            spectra: d_spectra(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErankMotion {
    Rotation,
    Translation,
    /// Rotation followed by translation.
    Combined,
}

/// Effective-rank sweep of the stacked system for a fixed per-frame step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErankConfig {
    pub order: u32,
    /// Stacked frames `I`; frame `i` is displaced by `i` steps.
    #[serde(default = "d_erank_frames")]
    pub frames: usize,
    #[serde(deserialize_with = "sweep")]
    pub frequencies: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub motion: Vec<ErankMotion>,
    /// Rotation step about +z in degrees.
    #[serde(default = "d_zero", deserialize_with = "sweep")]
    pub rotation_deg: Vec<f64>,
    /// Translation step in metres.
    #[serde(default = "d_zero", deserialize_with = "sweep")]
    pub translation: Vec<f64>,
    #[serde(default = "d_translation_dir")]
    pub translation_direction_deg: [f64; 2],
}

fn d_seed() -> u64 {
    1
}
fn d_trials() -> usize {
    20
}
fn d_fs() -> f64 {
    10_000.0
}
fn d_c() -> f64 {
    shmotion_core::SPEED_OF_SOUND
}
fn d_velocity() -> Vec<f64> {
    vec![0.0]
}
fn d_update() -> f64 {
    shmotion_core::sim::DEFAULT_UPDATE_INTERVAL
}
fn d_kind() -> Vec<SourceKindConfig> {
    vec![SourceKindConfig::Tone]
}
fn d_frequency() -> f64 {
    3100.0
}
fn d_true() -> bool {
    true
}
fn d_mod_rate() -> f64 {
    3.0
}
fn d_one() -> f64 {
    1.0
}
fn d_snr() -> Vec<f64> {
    vec![f64::INFINITY]
}
fn d_band() -> NoiseBandConfig {
    NoiseBandConfig::Wideband
}
fn d_frame_len() -> usize {
    256
}
fn d_hop() -> usize {
    128
}
fn d_window() -> WindowConfig {
    WindowConfig::Hamming
}
fn d_method() -> Vec<MethodConfig> {
    vec![MethodConfig::Compensated]
}
fn d_order() -> u32 {
    3
}
fn d_frames() -> usize {
    60
}
fn d_stack() -> Vec<usize> {
    vec![1]
}
fn d_threshold() -> f64 {
    shmotion_core::pwd::DEFAULT_SV_THRESHOLD
}
fn d_sources() -> usize {
    1
}
fn d_grid() -> f64 {
    shmotion_core::music::DEFAULT_GRID_DEG
}
fn d_spectra() -> SpectraOutput {
    SpectraOutput::First
}
fn d_erank_frames() -> usize {
    2
}
fn d_zero() -> Vec<f64> {
    vec![0.0]
}
fn d_translation_dir() -> [f64; 2] {
    [90.0, 90.0]
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// A number, a list, or an inclusive `{ start, stop, step }` range.
fn sweep<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Range {
        start: f64,
        stop: f64,
        step: f64,
    }
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Sweep {
        One(f64),
        Many(Vec<f64>),
        Range(Range),
    }
    match Sweep::deserialize(d)? {
        Sweep::One(v) => Ok(vec![v]),
        Sweep::Many(v) => Ok(v),
        Sweep::Range(r) => {
            if !(r.step > 0.0) || !(r.stop >= r.start) {
                return Err(serde::de::Error::custom("range needs step > 0 and stop >= start"));
            }
            let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| r.start + i as f64 * r.step).collect())
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text without validating it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check()?;
        Ok(cfg)
    }

    /// The configuration with every default written out.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Resolves a path from the configuration against [`Self::base_dir`].
    pub fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn stft_params(&self) -> shmotion_core::Result<StftParams> {
        StftParams::new(self.stft.frame_len, self.stft.hop, self.stft.window.into(), self.fs)
    }

    /// `Ok` or every problem found.
    pub fn check(&self) -> Result<()> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// Field-level and cross-field validation.
    pub fn validate(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: String| out.push(Issue::new(path, msg));
        if self.schema_version != SCHEMA_VERSION {
            bad("schema_version", format!("must be {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if self.name.trim().is_empty() {
            bad("name", "must not be empty".into());
        }
        if self.trials == 0 {
            bad("trials", "must be at least 1".into());
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            bad("fs", format!("must be positive, got {}", self.fs));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            bad("speed_of_sound", "must be positive".into());
        }
        self.validate_array(&mut bad);
        self.validate_motion(&mut bad);
        let stft_ok = self.validate_stft(&mut bad);
        self.validate_source(&mut bad);
        for (i, s) in self.noise.snr.iter().enumerate() {
            if s.is_nan() || *s == f64::NEG_INFINITY {
                bad(&format!("noise.snr[{i}]"), "must be finite or +inf".into());
            }
        }
        if self.noise.snr.is_empty() {
            bad("noise.snr", "must list at least one value".into());
        }
        self.validate_estimator(&mut bad, stft_ok);
        if let Some(e) = &self.erank {
            validate_erank(e, self.fs, &mut bad);
        }
        out
    }

    fn validate_array(&self, bad: &mut impl FnMut(&str, String)) {
        let a = &self.array;
        let radius_ok = |bad: &mut dyn FnMut(&str, String)| match a.radius {
            Some(r) if r > 0.0 && r.is_finite() => {}
            Some(r) => bad("array.radius", format!("must be positive, got {r}")),
            None => bad("array.radius", "is required for this layout".into()),
        };
        match a.layout {
            Layout::NearUniform => {
                radius_ok(bad);
                match a.count {
                    Some(c) if NEAR_UNIFORM_SIZES.contains(&c) => {}
                    Some(c) => bad(
                        "array.count",
                        format!("{c} is not a supported size {NEAR_UNIFORM_SIZES:?}"),
                    ),
                    None => bad("array.count", "is required for near_uniform".into()),
                }
            }
            Layout::Equiangular13 => radius_ok(bad),
            Layout::File => {
                if a.geometry_file.is_none() && a.steering_file.is_none() {
                    bad("array", "layout \"file\" needs geometry_file or steering_file".into());
                }
            }
        }
    }

    fn validate_motion(&self, bad: &mut impl FnMut(&str, String)) {
        let m = &self.motion;
        if !(m.update_interval > 0.0 && m.update_interval.is_finite()) {
            bad("motion.update_interval", "must be positive".into());
        }
        if m.angular_velocity.is_empty() {
            bad("motion.angular_velocity", "must list at least one value".into());
        }
        for (i, w) in m.angular_velocity.iter().enumerate() {
            if !w.is_finite() {
                bad(&format!("motion.angular_velocity[{i}]"), "must be finite".into());
            }
        }
        match m.mode {
            MotionKind::TrajectoryFile if m.trajectory_file.is_none() => {
                bad("motion.trajectory_file", "is required for mode trajectory_file".into())
            }
            MotionKind::Static if m.angular_velocity.iter().any(|&w| w != 0.0) => bad(
                "motion.angular_velocity",
                "must be 0 for a static array".into(),
            ),
            _ => {}
        }
    }

    fn validate_stft(&self, bad: &mut impl FnMut(&str, String)) -> bool {
        let s = &self.stft;
        let before = (s.frame_len < 2, s.hop == 0 || s.hop > s.frame_len);
        if before.0 {
            bad("stft.frame_len", "must be at least 2".into());
        }
        if before.1 {
            bad("stft.hop", format!("must lie in 1..={}", s.frame_len));
        }
        !before.0 && !before.1 && self.fs > 0.0
    }

    fn validate_source(&self, bad: &mut impl FnMut(&str, String)) {
        let s = &self.source;
        let nyq = self.fs / 2.0;
        if s.kind.is_empty() {
            bad("source.kind", "must list at least one kind".into());
        }
        let tonal = s.kind.iter().any(|k| *k != SourceKindConfig::Wideband);
        if tonal && !(s.frequency > 0.0 && s.frequency < nyq) {
            bad("source.frequency", format!("must lie in (0, {nyq}) Hz"));
        }
        if s.kind.contains(&SourceKindConfig::Wideband)
            && shmotion_core::sim::WIDEBAND_BAND.1 >= nyq
        {
            bad("source.kind", format!("wideband source needs fs > {} Hz", 2.0 * shmotion_core::sim::WIDEBAND_BAND.1));
        }
        if s.kind.contains(&SourceKindConfig::AmTone) && s.am_level.is_empty() {
            bad("source.am_level", "is required for am_tone".into());
        }
        for (i, l) in s.am_level.iter().enumerate() {
            if !(l.is_finite() && *l >= 0.0) {
                bad(&format!("source.am_level[{i}]"), "must be finite and non-negative".into());
            }
        }
        if s.kind.contains(&SourceKindConfig::FmTone) && s.fm_deviation.is_empty() {
            bad("source.fm_deviation", "is required for fm_tone".into());
        }
        for (i, d) in s.fm_deviation.iter().enumerate() {
            if !(d.is_finite() && *d >= 0.0) {
                bad(&format!("source.fm_deviation[{i}]"), "must be finite and non-negative".into());
            } else if s.kind.contains(&SourceKindConfig::FmTone) && s.frequency + d >= nyq {
                bad(&format!("source.fm_deviation[{i}]"), "carrier plus deviation reaches fs/2".into());
            }
        }
        if !(s.mod_rate >= 0.0 && s.mod_rate.is_finite()) {
            bad("source.mod_rate", "must be non-negative".into());
        }
        if !(s.amplitude > 0.0 && s.amplitude.is_finite()) {
            bad("source.amplitude", "must be positive".into());
        }
        match (&s.directions_deg, s.direction_table) {
            (Some(_), Some(_)) => bad(
                "source",
                "give either directions_deg or direction_table, not both".into(),
            ),
            (None, None) => bad("source.directions_deg", "no source directions given".into()),
            (Some(dirs), None) => {
                if dirs.is_empty() {
                    bad("source.directions_deg", "must not be empty".into());
                }
                for (i, [t, p]) in dirs.iter().enumerate() {
                    if !(0.0..=180.0).contains(t) || !p.is_finite() {
                        bad(&format!("source.directions_deg[{i}]"), "theta must lie in [0, 180]".into());
                    }
                }
            }
            (None, Some(n)) => {
                if !NEAR_UNIFORM_SIZES.contains(&n) {
                    bad("source.direction_table", format!("{n} is not a supported size {NEAR_UNIFORM_SIZES:?}"));
                }
                if let Some(c) = s.direction_count {
                    if c == 0 || c > n {
                        bad("source.direction_count", format!("must lie in 1..={n}"));
                    }
                }
            }
        }
    }

    fn validate_estimator(&self, bad: &mut impl FnMut(&str, String), stft_ok: bool) {
        let e = &self.estimator;
        if e.method.is_empty() {
            bad("estimator.method", "must list at least one method".into());
        }
        let dim = coeff_count(e.order);
        if e.sources == 0 || e.sources >= dim {
            bad("estimator.sources", format!("S must lie in 1..{dim} for order {}", e.order));
        }
        if self.source.simultaneous && e.sources > self.direction_count() {
            bad("estimator.sources", "exceeds the number of simultaneous sources".into());
        }
        if e.frames == 0 {
            bad("estimator.frames", "must be at least 1".into());
        }
        if !(0.0..1.0).contains(&e.sv_threshold) {
            bad("estimator.sv_threshold", "must lie in [0, 1)".into());
        }
        let steps = 180.0 / e.grid_resolution;
        if !(e.grid_resolution > 0.0) || (steps - steps.round()).abs() > 1e-9 || steps < 2.0 {
            bad("estimator.grid_resolution", "must divide 180 degrees".into());
        }
        if e.method.contains(&MethodConfig::Enhanced) {
            if e.stack.is_empty() {
                bad("estimator.stack", "must list at least one value".into());
            }
            for (i, &s) in e.stack.iter().enumerate() {
                let j = e.estimates.unwrap_or(e.frames.checked_div(s).unwrap_or(0));
                if s == 0 {
                    bad(&format!("estimator.stack[{i}]"), "must be at least 1".into());
                } else if j == 0 || s * j > e.frames {
                    bad(
                        &format!("estimator.stack[{i}]"),
                        format!("I·J = {s}·{j} exceeds the {} available frames", e.frames),
                    );
                }
            }
        }
        match (e.freq_range, e.frequency) {
            (Some(_), Some(_)) => bad("estimator", "give either freq_range or frequency, not both".into()),
            (None, None) if self.source.kind.contains(&SourceKindConfig::Wideband) => {
                bad("estimator.freq_range", "is required for a wideband source".into())
            }
            _ => {}
        }
        if stft_ok {
            if let Ok(p) = self.stft_params() {
                if self.analysis_bins(&p).is_empty() {
                    bad("estimator.freq_range", "selects no STFT bin inside (0, fs/2)".into());
                }
            }
        }
    }

    /// Number of source directions.
    pub fn direction_count(&self) -> usize {
        match (&self.source.directions_deg, self.source.direction_table) {
            (Some(d), _) => d.len(),
            (None, Some(n)) => self.source.direction_count.unwrap_or(n),
            _ => 0,
        }
    }

    /// STFT bins analysed by the estimators.
    pub fn analysis_bins(&self, params: &StftParams) -> Vec<usize> {
        let nyq_bin = params.frame_len / 2;
        let bins = match (self.estimator.freq_range, self.estimator.frequency) {
            (Some([lo, hi]), _) => params.bins_in_range(lo, hi),
            (None, Some(f)) => vec![params.nearest_bin(f)],
            (None, None) => vec![params.nearest_bin(self.source.frequency)],
        };
        bins.into_iter().filter(|&b| b > 0 && b < nyq_bin).collect()
    }
}

fn validate_erank(e: &ErankConfig, fs: f64, bad: &mut impl FnMut(&str, String)) {
    if e.frames == 0 {
        bad("erank.frames", "must be at least 1".into());
    }
    if e.frequencies.is_empty() {
        bad("erank.frequencies", "must list at least one value".into());
    }
    for (i, f) in e.frequencies.iter().enumerate() {
        if !(*f > 0.0 && *f < fs / 2.0) {
            bad(&format!("erank.frequencies[{i}]"), "must lie in (0, fs/2)".into());
        }
    }
    if e.motion.is_empty() {
        bad("erank.motion", "must list at least one motion".into());
    }
    for (i, r) in e.translation.iter().enumerate() {
        if !(*r >= 0.0 && r.is_finite()) {
            bad(&format!("erank.translation[{i}]"), "must be non-negative".into());
        }
    }
    for (i, a) in e.rotation_deg.iter().enumerate() {
        if !a.is_finite() {
            bad(&format!("erank.rotation_deg[{i}]"), "must be finite".into());
        }
    }
    let [t, _] = e.translation_direction_deg;
    if !(0.0..=180.0).contains(&t) {
        bad("erank.translation_direction_deg", "theta must lie in [0, 180]".into());
    }
}
