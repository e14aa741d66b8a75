//! Effective-rank analysis of stacked steering systems.

use rayon::prelude::*;
use serde::Serialize;
use shmotion_core::linalg::singular_values;
use shmotion_core::motion::{FramePose, PoseConvention, Trajectory};
use shmotion_core::music::effective_rank;

use crate::config::{ErankMotion, MethodConfig};
use crate::error::{Error, Issue, Result};
use crate::experiment::{step_pose, Setup};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErankRecord {
    pub motion: String,
    pub frequency_hz: f64,
    /// Per-frame rotation step about +z.
    pub rotation_deg: Option<f64>,
    /// Per-frame translation step.
    pub translation_m: Option<f64>,
    pub angular_velocity_deg_s: Option<f64>,
    /// Stacked frames `I`.
    pub frames: usize,
    pub order: u32,
    pub effective_rank: f64,
    /// Singular values above the configured fraction of the largest.
    pub significant_singular_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErankResult {
    pub schema_version: u32,
    pub name: String,
    pub sv_threshold: f64,
    pub records: Vec<ErankRecord>,
}

struct Job {
    motion: &'static str,
    freq: f64,
    rotation: Option<f64>,
    translation: Option<f64>,
    velocity: Option<f64>,
    frames: usize,
    order: u32,
    traj: Trajectory,
}

/// Frame `i` displaced by `i` steps.
fn stepped(frames: usize, rotation_deg: f64, r: f64, dir: (f64, f64)) -> Result<Trajectory> {
    let poses = (0..frames)
        .map(|i| step_pose(i as f64 * rotation_deg, i as f64 * r, dir))
        .collect::<Result<Vec<FramePose>>>()?;
    Ok(Trajectory::new(poses, PoseConvention::Absolute)?)
}

/// The `[erank]` sweep, or the stacked systems of the enhanced estimator.
pub fn erank_sweep(setup: &Setup) -> Result<ErankResult> {
    let cfg = &setup.config;
    let threshold = cfg.estimator.sv_threshold;
    let mut jobs = Vec::new();
    if let Some(e) = &cfg.erank {
        let [t, p] = e.translation_direction_deg;
        let dir = (t.to_radians(), p.to_radians());
        for &motion in &e.motion {
            let steps: Vec<(Option<f64>, Option<f64>)> = match motion {
                ErankMotion::Rotation => e.rotation_deg.iter().map(|&a| (Some(a), None)).collect(),
                ErankMotion::Translation => e.translation.iter().map(|&r| (None, Some(r))).collect(),
                ErankMotion::Combined => e
                    .rotation_deg
                    .iter()
                    .flat_map(|&a| e.translation.iter().map(move |&r| (Some(a), Some(r))))
                    .collect(),
            };
            let label = match motion {
                ErankMotion::Rotation => "rotation",
                ErankMotion::Translation => "translation",
                ErankMotion::Combined => "combined",
            };
            for &f in &e.frequencies {
                for &(a, r) in &steps {
                    jobs.push(Job {
                        motion: label,
                        freq: f,
                        rotation: a,
                        translation: r,
                        velocity: None,
                        frames: e.frames,
                        order: e.order,
                        traj: stepped(e.frames, a.unwrap_or(0.0), r.unwrap_or(0.0), dir)?,
                    });
                }
            }
        }
    } else if cfg.estimator.method.contains(&MethodConfig::Enhanced) {
        let freq = setup.params.bin_frequency(setup.bins[0]);
        for case in setup.motion_cases() {
            let ms = setup.motion_setup(case)?;
            for &i in &cfg.estimator.stack {
                jobs.push(Job {
                    motion: if ms.angular_velocity.is_some() { "rotate_z" } else { "trajectory" },
                    freq,
                    rotation: None,
                    translation: None,
                    velocity: ms.angular_velocity,
                    frames: i,
                    order: cfg.estimator.order,
                    traj: ms.trajectory.clone(),
                });
            }
        }
    } else {
        return Err(Error::Validation(vec![Issue::new(
            "erank",
            "needs an [erank] section or the enhanced estimator",
        )]));
    }
    let records = jobs
        .par_iter()
        .map(|j| {
            let a = setup.stacked_matrix(&j.traj, j.frames, j.freq, j.order)?;
            let sv = singular_values(&a);
            let top = sv.iter().copied().fold(0.0, f64::max);
            Ok(ErankRecord {
                motion: j.motion.to_string(),
                frequency_hz: j.freq,
                rotation_deg: j.rotation,
                translation_m: j.translation,
                angular_velocity_deg_s: j.velocity,
                frames: j.frames,
                order: j.order,
                effective_rank: effective_rank(&a)?,
                significant_singular_values: sv.iter().filter(|&&s| s > threshold * top).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErankResult {
        schema_version: crate::experiment::SCHEMA_VERSION,
        name: cfg.name.clone(),
        sv_threshold: threshold,
        records,
    })
}
