//! Plane-wave decomposition estimators.
//!
//! * stationary: `â(i, ω) = V(ω)^† p(i, ω)`;
//! * compensated: `â(i, ω) = [V(ω) W_i(ω)]^† p(i, ω)`, referring every frame
//!   to the reference pose;
//! * enhanced: `â_j(ω) = A_j(ω)^† p̃_j(ω)` where `A_j` stacks `V W_i` over the
//!   `I` frames of block `j` and `p̃_j` stacks the phase-aligned pressures.
//!
//! Operators hold the pseudo-inverses so they can be reused for every noise
//! realization of an experiment.

use alloc::vec::Vec;

use crate::linalg::{pinv, pinv_relative, CMatrix, CVector, PseudoInverse};
use crate::motion::{compose_transform, MotionTransform, Trajectory};
use crate::sh::coeff_count;
use crate::spectral::{StftFrames, StftParams};
use crate::steering::SteeringModel;
use crate::{Error, Result};

/// Default relative singular-value threshold of the enhanced estimator.
pub const DEFAULT_SV_THRESHOLD: f64 = 1.0 / 3.0;

/// Which estimator produced a [`PwdEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Stationary,
    Compensated,
    Enhanced,
}

/// PWD estimates per analysed bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PwdEstimate {
    pub method: Method,
    pub order: u32,
    pub bins: Vec<usize>,
    /// `coeffs[b][j]` is estimate `j` at `bins[b]`.
    pub coeffs: Vec<Vec<CVector>>,
    /// Mean of `P P^H` over the estimates at each bin, `P` the applied
    /// inverse; proportional to the noise covariance for white sensor noise.
    pub noise_covariance: Vec<CMatrix>,
    /// Smallest numerical rank among the inverted systems.
    pub min_rank: usize,
}

impl PwdEstimate {
    /// True when some inverted system had fewer independent equations than
    /// unknowns.
    pub fn rank_deficient(&self) -> bool {
        self.min_rank < coeff_count(self.order)
    }

    pub fn estimate_count(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }
}

fn mean_outer(ps: &[&PseudoInverse]) -> CMatrix {
    let dim = ps[0].matrix.nrows();
    let mut acc = CMatrix::zeros(dim, dim);
    for p in ps {
        acc += &p.matrix * p.matrix.adjoint();
    }
    acc / num_complex::Complex64::new(ps.len() as f64, 0.0)
}

/// `V(ω)^†` for each analysed bin.
#[derive(Debug, Clone)]
pub struct StationaryOperator {
    order: u32,
    bins: Vec<usize>,
    inverses: Vec<PseudoInverse>,
}

impl StationaryOperator {
    pub fn new(
        model: &dyn SteeringModel,
        params: &StftParams,
        bins: &[usize],
        order: u32,
    ) -> Result<Self> {
        check_bins(bins)?;
        let inverses = bins
            .iter()
            .map(|&b| Ok(pinv(&model.steering(params.bin_frequency(b), order)?.matrix)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            order,
            bins: bins.to_vec(),
            inverses,
        })
    }

    pub fn inverse(&self, bin_index: usize) -> &PseudoInverse {
        &self.inverses[bin_index]
    }
}

fn check_bins(bins: &[usize]) -> Result<()> {
    if bins.is_empty() {
        Err(Error::Config("no frequency bins selected".into()))
    } else {
        Ok(())
    }
}

fn check_mics(frames: &StftFrames, rows: usize) -> Result<()> {
    if frames.mic_count() != rows {
        return Err(Error::Config(alloc::format!(
            "{} audio channels but the steering model has {rows} microphones",
            frames.mic_count()
        )));
    }
    Ok(())
}

/// Per-frame least-squares or minimum-norm PWD with a fixed steering matrix.
pub fn pwd_stationary(frames: &StftFrames, op: &StationaryOperator) -> Result<PwdEstimate> {
    check_mics(frames, op.inverses[0].matrix.ncols())?;
    let mut coeffs = Vec::with_capacity(op.bins.len());
    let mut noise = Vec::with_capacity(op.bins.len());
    for (bi, &b) in op.bins.iter().enumerate() {
        let p = &op.inverses[bi];
        coeffs.push(
            (0..frames.frame_count())
                .map(|i| &p.matrix * frames.snapshot(i, b))
                .collect(),
        );
        noise.push(mean_outer(&[p]));
    }
    Ok(PwdEstimate {
        method: Method::Stationary,
        order: op.order,
        bins: op.bins.clone(),
        coeffs,
        noise_covariance: noise,
        min_rank: op.inverses.iter().map(|p| p.rank).min().unwrap_or(0),
    })
}

/// Motion transforms `W_i(ω)` for frames `0..frames` at one wavenumber.
pub fn frame_transforms(
    traj: &Trajectory,
    frames: usize,
    k: f64,
    order: u32,
) -> Result<Vec<MotionTransform>> {
    if traj.len() < frames {
        return Err(Error::Config(alloc::format!(
            "trajectory has {} poses but {frames} frames are analysed",
            traj.len()
        )));
    }
    (0..frames)
        .map(|i| compose_transform(traj, i, k, order, None))
        .collect()
}

/// `[V W_i]^†` for every frame and analysed bin.
#[derive(Debug, Clone)]
pub struct CompensatedOperator {
    order: u32,
    bins: Vec<usize>,
    /// `inverses[b][i]`.
    inverses: Vec<Vec<PseudoInverse>>,
}

impl CompensatedOperator {
    pub fn new(
        model: &dyn SteeringModel,
        params: &StftParams,
        bins: &[usize],
        order: u32,
        traj: &Trajectory,
        frames: usize,
    ) -> Result<Self> {
        check_bins(bins)?;
        let mut inverses = Vec::with_capacity(bins.len());
        for &b in bins {
            let f = params.bin_frequency(b);
            let ws = frame_transforms(traj, frames, model.wavenumber(f), order)?;
            let mut per_frame = Vec::with_capacity(frames);
            for w in &ws {
                let v = model.steering(f, w.output_order)?;
                per_frame.push(pinv(&product(&v.matrix, w)?));
            }
            inverses.push(per_frame);
        }
        Ok(Self {
            order,
            bins: bins.to_vec(),
            inverses,
        })
    }

    pub fn inverse(&self, bin_index: usize, frame: usize) -> &PseudoInverse {
        &self.inverses[bin_index][frame]
    }

    pub fn frame_count(&self) -> usize {
        self.inverses.first().map_or(0, Vec::len)
    }
}

fn product(v: &CMatrix, w: &MotionTransform) -> Result<CMatrix> {
    if v.ncols() != w.matrix.nrows() {
        return Err(Error::Config(alloc::format!(
            "steering has {} columns but the motion transform has {} rows",
            v.ncols(),
            w.matrix.nrows()
        )));
    }
    Ok(v * &w.matrix)
}

/// Motion-compensated per-frame PWD referred to the reference pose.
pub fn pwd_compensated(frames: &StftFrames, op: &CompensatedOperator) -> Result<PwdEstimate> {
    let count = op.frame_count();
    if frames.frame_count() < count {
        return Err(Error::InsufficientData(alloc::format!(
            "operator covers {count} frames, input has {}",
            frames.frame_count()
        )));
    }
    check_mics(frames, op.inverses[0][0].matrix.ncols())?;
    let mut coeffs = Vec::with_capacity(op.bins.len());
    let mut noise = Vec::with_capacity(op.bins.len());
    for (bi, &b) in op.bins.iter().enumerate() {
        let ps = &op.inverses[bi];
        coeffs.push(
            (0..count)
                .map(|i| &ps[i].matrix * frames.snapshot(i, b))
                .collect(),
        );
        let refs: Vec<&PseudoInverse> = ps.iter().collect();
        noise.push(mean_outer(&refs));
    }
    Ok(PwdEstimate {
        method: Method::Compensated,
        order: op.order,
        bins: op.bins.clone(),
        coeffs,
        noise_covariance: noise,
        min_rank: op
            .inverses
            .iter()
            .flatten()
            .map(|p| p.rank)
            .min()
            .unwrap_or(0),
    })
}

/// Row-stacks `V_i W_i` for the first `frames` pairs.
pub fn combined_matrix(vs: &[CMatrix], ws: &[MotionTransform], frames: usize) -> Result<CMatrix> {
    if frames == 0 || vs.len() < frames || ws.len() < frames {
        return Err(Error::Config(alloc::format!(
            "need {frames} steering matrices and transforms, got {} and {}",
            vs.len(),
            ws.len()
        )));
    }
    let order = ws[0].input_order;
    let cols = coeff_count(order);
    let mut blocks = Vec::with_capacity(frames);
    for i in 0..frames {
        if ws[i].input_order != order {
            return Err(Error::Config(alloc::format!(
                "transform {i} has input order {}, expected {order}",
                ws[i].input_order
            )));
        }
        blocks.push(product(&vs[i], &ws[i])?);
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut a = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in &blocks {
        a.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    Ok(a)
}

/// Layout of the enhancement method: `blocks` consecutive groups of
/// `frames_per_block` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stacking {
    pub frames_per_block: usize,
    pub blocks: usize,
}

impl Stacking {
    /// `I` frames per block and `J = ⌊total/I⌋` blocks.
    pub fn covering(total: usize, frames_per_block: usize) -> Result<Self> {
        if frames_per_block == 0 || frames_per_block > total {
            return Err(Error::Config(alloc::format!(
                "cannot stack {frames_per_block} of {total} frames"
            )));
        }
        Ok(Self {
            frames_per_block,
            blocks: total / frames_per_block,
        })
    }

    pub fn total_frames(&self) -> usize {
        self.frames_per_block * self.blocks
    }
}

/// Truncated pseudo-inverses of the stacked systems `A_j(ω)`.
#[derive(Debug, Clone)]
pub struct EnhancedOperator {
    order: u32,
    bins: Vec<usize>,
    stacking: Stacking,
    threshold: f64,
    /// `inverses[b][j]`.
    inverses: Vec<Vec<PseudoInverse>>,
}

impl EnhancedOperator {
    /// Builds `A_j` from transforms relative to frame 0, so every block's
    /// estimate refers to the same pose.
    pub fn new(
        model: &dyn SteeringModel,
        params: &StftParams,
        bins: &[usize],
        order: u32,
        traj: &Trajectory,
        stacking: Stacking,
        threshold: f64,
    ) -> Result<Self> {
        check_bins(bins)?;
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::Config(alloc::format!(
                "singular-value threshold must lie in [0, 1), got {threshold}"
            )));
        }
        let total = stacking.total_frames();
        let mut inverses = Vec::with_capacity(bins.len());
        for &b in bins {
            let f = params.bin_frequency(b);
            let ws = frame_transforms(traj, total, model.wavenumber(f), order)?;
            let vs = ws
                .iter()
                .map(|w| model.steering(f, w.output_order).map(|s| s.matrix))
                .collect::<Result<Vec<_>>>()?;
            let mut per_block = Vec::with_capacity(stacking.blocks);
            for j in 0..stacking.blocks {
                let lo = j * stacking.frames_per_block;
                let hi = lo + stacking.frames_per_block;
                let a = combined_matrix(&vs[lo..hi], &ws[lo..hi], stacking.frames_per_block)?;
                let p = pinv_relative(&a, threshold);
                if p.rank == 0 {
                    return Err(Error::DegenerateSystem);
                }
                per_block.push(p);
            }
            inverses.push(per_block);
        }
        Ok(Self {
            order,
            bins: bins.to_vec(),
            stacking,
            threshold,
            inverses,
        })
    }

    pub fn inverse(&self, bin_index: usize, block: usize) -> &PseudoInverse {
        &self.inverses[bin_index][block]
    }

    pub fn stacking(&self) -> Stacking {
        self.stacking
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// One PWD estimate per block from phase-aligned frames.
pub fn pwd_enhanced(aligned: &StftFrames, op: &EnhancedOperator) -> Result<PwdEstimate> {
    let st = op.stacking;
    if aligned.frame_count() < st.total_frames() {
        return Err(Error::InsufficientData(alloc::format!(
            "stacking needs {} frames, input has {}",
            st.total_frames(),
            aligned.frame_count()
        )));
    }
    let m = aligned.mic_count();
    check_mics(aligned, op.inverses[0][0].matrix.ncols() / st.frames_per_block)?;
    let mut coeffs = Vec::with_capacity(op.bins.len());
    let mut noise = Vec::with_capacity(op.bins.len());
    for (bi, &b) in op.bins.iter().enumerate() {
        let mut per_bin = Vec::with_capacity(st.blocks);
        for j in 0..st.blocks {
            let mut stacked = CVector::zeros(m * st.frames_per_block);
            for f in 0..st.frames_per_block {
                let p = aligned.snapshot(j * st.frames_per_block + f, b);
                stacked.rows_mut(f * m, m).copy_from(&p);
            }
            per_bin.push(&op.inverses[bi][j].matrix * stacked);
        }
        coeffs.push(per_bin);
        let refs: Vec<&PseudoInverse> = op.inverses[bi].iter().collect();
        noise.push(mean_outer(&refs));
    }
    Ok(PwdEstimate {
        method: Method::Enhanced,
        order: op.order,
        bins: op.bins.clone(),
        coeffs,
        noise_covariance: noise,
        min_rank: op
            .inverses
            .iter()
            .flatten()
            .map(|p| p.rank)
            .min()
            .unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_error;
    use crate::motion::{rotation_matrix, EulerAngles};
    use crate::sh::ShVector;
    use crate::spectral::{time_align, Window};
    use crate::steering::{near_uniform, RigidSphere};
    use alloc::vec;
    use core::f64::consts::PI;
    use num_complex::Complex64;

    fn model(m: usize) -> RigidSphere {
        RigidSphere {
            geometry: near_uniform(m, 0.06).unwrap(),
            speed_of_sound: crate::SPEED_OF_SOUND,
        }
    }

    fn params() -> StftParams {
        StftParams::new(256, 128, Window::Hamming, 10_000.0).unwrap()
    }

    fn cosine(a: &CVector, b: &CVector) -> f64 {
        a.dotc(b).norm() / (a.norm() * b.norm())
    }

    /// Frames whose snapshots are `V_i a` at one bin (only that bin is set).
    fn synthetic_frames(snapshots: &[CVector], bin: usize) -> StftFrames {
        let p = params();
        let m = snapshots[0].len();
        let mut f = StftFrames::zeros(p, m, snapshots.len());
        for (i, snap) in snapshots.iter().enumerate() {
            for (mic, &v) in snap.iter().enumerate() {
                f.set(i, mic, bin, v);
            }
        }
        f
    }

    #[test]
    fn stationary_recovers_noiseless_coefficients() {
        let md = model(24);
        let p = params();
        let bin = 60;
        let op = StationaryOperator::new(&md, &p, &[bin], 3).unwrap();
        let v = md.steering(p.bin_frequency(bin), 3).unwrap().matrix;
        let a = ShVector::plane_wave(3, 1.0, 2.0).into_coeffs();
        let frames = synthetic_frames(&[&v * &a, CVector::zeros(24)], bin);
        let est = pwd_stationary(&frames, &op).unwrap();
        assert!(relative_error(&est.coeffs[0][0], &a) < 1e-9);
        assert!(est.coeffs[0][1].norm() == 0.0);
        assert!(!est.rank_deficient());
    }

    #[test]
    fn stationary_plane_wave_shape() {
        // simulated pressure from a high-order field still yields â ∝ conj(Y)
        let md = model(24);
        let p = params();
        let bin = 60;
        let op = StationaryOperator::new(&md, &p, &[bin], 3).unwrap();
        let v_hi = md.steering(p.bin_frequency(bin), 20).unwrap().matrix;
        let a_hi = ShVector::plane_wave(20, 0.7, -1.0).into_coeffs();
        let frames = synthetic_frames(&[&v_hi * a_hi], bin);
        let est = pwd_stationary(&frames, &op).unwrap();
        let want = ShVector::plane_wave(3, 0.7, -1.0).into_coeffs();
        assert!(cosine(&est.coeffs[0][0], &want) > 0.999);
    }

    fn rotating(frames: usize, rate: f64) -> Trajectory {
        let p = params();
        let times: Vec<f64> = (0..frames).map(|i| p.frame_center_time(i)).collect();
        Trajectory::rotate_z(rate, &times).unwrap()
    }

    #[test]
    fn compensation_identity_and_rotation() {
        let md = model(24);
        let p = params();
        let bin = 55;
        let f = p.bin_frequency(bin);
        let v = md.steering(f, 3).unwrap().matrix;
        let a = ShVector::plane_wave(3, 1.2, 0.3).into_coeffs();

        let still = Trajectory::stationary(3);
        let snaps = vec![&v * &a; 3];
        let frames = synthetic_frames(&snaps, bin);
        let s = pwd_stationary(&frames, &StationaryOperator::new(&md, &p, &[bin], 3).unwrap()).unwrap();
        let c = pwd_compensated(
            &frames,
            &CompensatedOperator::new(&md, &p, &[bin], 3, &still, 3).unwrap(),
        )
        .unwrap();
        for i in 0..3 {
            assert!(relative_error(&c.coeffs[0][i], &s.coeffs[0][i]) < 1e-12);
        }

        let traj = rotating(6, PI);
        let ws = frame_transforms(&traj, 6, md.wavenumber(f), 3).unwrap();
        let snaps: Vec<CVector> = ws.iter().map(|w| &v * &w.matrix * &a).collect();
        let frames = synthetic_frames(&snaps, bin);
        let op = CompensatedOperator::new(&md, &p, &[bin], 3, &traj, 6).unwrap();
        let c = pwd_compensated(&frames, &op).unwrap();
        for i in 0..6 {
            assert!(relative_error(&c.coeffs[0][i], &a) < 1e-6);
        }
    }

    #[test]
    fn rotation_preserves_error_power() {
        let md = model(24);
        let v = md.steering(2000.0, 3).unwrap().matrix;
        let r = rotation_matrix(3, EulerAngles::new(0.3, 1.1, -0.4).unwrap()).matrix;
        let p1 = pinv(&v).matrix;
        let p2 = pinv(&(&v * r)).matrix;
        let t1 = (&p1 * p1.adjoint()).trace().re;
        let t2 = (&p2 * p2.adjoint()).trace().re;
        assert!((t1 - t2).abs() < 1e-9 * t1.abs());
    }

    #[test]
    fn combined_matrix_contract() {
        let md = model(4);
        let v = md.steering(3000.0, 4).unwrap().matrix;
        let ident = MotionTransform::identity(4);
        let a1 = combined_matrix(core::slice::from_ref(&v), core::slice::from_ref(&ident), 1).unwrap();
        assert_eq!(a1, v);
        let a3 = combined_matrix(&vec![v.clone(); 3], &vec![ident; 3], 3).unwrap();
        assert_eq!(a3.shape(), (12, 25));
        assert_eq!(a3.rows(8, 4).into_owned(), v);
        let wrong = MotionTransform::identity(3);
        assert!(combined_matrix(&[v], &[wrong], 1).is_err());
    }

    #[test]
    fn enhanced_single_frame_matches_stationary() {
        let md = model(24);
        let p = params();
        let bin = 50;
        let v = md.steering(p.bin_frequency(bin), 3).unwrap().matrix;
        let a = ShVector::plane_wave(3, 2.0, 1.0).into_coeffs();
        let frames = synthetic_frames(&[&v * &a], bin);
        let still = Trajectory::stationary(1);
        let st = Stacking::covering(1, 1).unwrap();
        let e = pwd_enhanced(
            &time_align(&frames, 0).unwrap(),
            &EnhancedOperator::new(&md, &p, &[bin], 3, &still, st, 0.0).unwrap(),
        )
        .unwrap();
        let s = pwd_stationary(&frames, &StationaryOperator::new(&md, &p, &[bin], 3).unwrap()).unwrap();
        assert!(relative_error(&e.coeffs[0][0], &s.coeffs[0][0]) < 1e-12);
    }

    #[test]
    fn enhanced_rotating_tone_recovers_plane_wave() {
        let md = model(4);
        let p = params();
        let bin = p.nearest_bin(3100.0);
        let f = p.bin_frequency(bin);
        let traj = rotating(90, PI);
        // a field limited to the estimator order; higher orders alias on 4 mics
        let v_hi = md.steering(f, 4).unwrap().matrix;
        let (ts, ps) = (1.3, 0.8);
        let snaps: Vec<CVector> = traj
            .poses()
            .iter()
            .enumerate()
            .map(|(i, pose)| {
                // plane wave seen from the turned array, then the tone phase advance
                let rot = rotation_matrix(4, pose.rotation.inverse()).matrix;
                let phase = Complex64::from_polar(1.0, 2.0 * PI * 128.0 * bin as f64 * i as f64 / 256.0);
                &v_hi * rot * ShVector::plane_wave(4, ts, ps).into_coeffs() * phase
            })
            .collect();
        let frames = synthetic_frames(&snaps, bin);
        let st = Stacking::covering(90, 90).unwrap();
        let op = EnhancedOperator::new(&md, &p, &[bin], 4, &traj, st, 0.0).unwrap();
        let e = pwd_enhanced(&time_align(&frames, 0).unwrap(), &op).unwrap();
        let want = ShVector::plane_wave(4, ts, ps).into_coeffs();
        assert!(cosine(&e.coeffs[0][0], &want) > 0.99, "{}", cosine(&e.coeffs[0][0], &want));
    }

    #[test]
    fn threshold_semantics() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = Complex64::new(1.0, 0.0);
        a[(1, 1)] = Complex64::new(0.5, 0.0);
        a[(2, 2)] = Complex64::new(0.3, 0.0);
        assert_eq!(pinv_relative(&a, DEFAULT_SV_THRESHOLD).rank, 2);
        assert_eq!(Stacking::covering(180, 45).unwrap().blocks, 4);
        assert!(Stacking::covering(10, 11).is_err());
    }
}
