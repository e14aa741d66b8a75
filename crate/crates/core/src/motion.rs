//! SH-domain rotation, translation and composed motion operators.
//!
//! A plane wave arriving from direction `Ω` has PWD coefficients
//! `a_nm = conj(Y_n^m(Ω))`. Under this convention:
//!
//! * [`rotation_matrix`]`(N, (α, β, γ))` maps `a(Ω)` to `a(QΩ)` where
//!   `Q = Rz(α)·Ry(β)·Rz(γ)`;
//! * [`translation_matrix`] re-expands the field about an origin displaced by
//!   `d`, which multiplies every plane-wave component by `e^{i k Ω·d}`
//!   (time dependence `e^{+iωt}`).
//!
//! A [`FramePose`] describes the physical array: its orientation `Q_i` and the
//! position of its centre, both in the reference (frame 0) coordinates. The
//! field seen by the array is `W_i a` with `W_i = T(Q_i⁻¹ d_i) · R(Q_i⁻¹)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::sh::{coeff_count, sph_bessel_j_all, sph_harm_all, wigner_3j, wigner_d_block, ShVector};
use crate::{Error, Result};

/// Extra Bessel orders kept beyond `⌈k r⌉` in translation sums.
pub const DEFAULT_Q_MARGIN: u32 = 4;

fn wrap_angle(a: f64) -> f64 {
    let mut w = libm::remainder(a, 2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// zyz Euler angles in radians, each wrapped into `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerAngles {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidParameter("Euler angles must be finite".into()));
        }
        Ok(Self {
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
            gamma: wrap_angle(gamma),
        })
    }

    pub const fn identity() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    /// Rotation about +z by `alpha`.
    pub fn about_z(alpha: f64) -> Self {
        Self {
            alpha: wrap_angle(alpha),
            beta: 0.0,
            gamma: 0.0,
        }
    }

    /// Angles of the inverse rotation, `(−γ, −β, −α)`.
    pub fn inverse(self) -> Self {
        Self {
            alpha: wrap_angle(-self.gamma),
            beta: wrap_angle(-self.beta),
            gamma: wrap_angle(-self.alpha),
        }
    }

    pub fn is_identity(self) -> bool {
        self.to_matrix() == Matrix3::identity()
    }

    /// `Rz(α)·Ry(β)·Rz(γ)`.
    pub fn to_matrix(self) -> Matrix3<f64> {
        rot_z(self.alpha) * rot_y(self.beta) * rot_z(self.gamma)
    }

    /// zyz angles of a proper rotation matrix, with `β ∈ [0, π]`.
    pub fn from_matrix(r: &Matrix3<f64>) -> Self {
        let cb = r[(2, 2)].clamp(-1.0, 1.0);
        let sb = libm::hypot(r[(0, 2)], r[(1, 2)]);
        let beta = libm::atan2(sb, cb);
        let (alpha, gamma) = if sb > 1e-12 {
            (
                libm::atan2(r[(1, 2)], r[(0, 2)]),
                libm::atan2(r[(2, 1)], -r[(2, 0)]),
            )
        } else if cb > 0.0 {
            (libm::atan2(r[(1, 0)], r[(0, 0)]), 0.0)
        } else {
            (libm::atan2(-r[(1, 0)], -r[(0, 0)]), 0.0)
        };
        Self {
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
            gamma: wrap_angle(gamma),
        }
    }
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(a), libm::cos(a));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = (libm::sin(b), libm::cos(b));
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Unit vector for polar angle `theta` and azimuth `phi`.
pub fn unit_vector(theta: f64, phi: f64) -> Vector3<f64> {
    let st = libm::sin(theta);
    Vector3::new(st * libm::cos(phi), st * libm::sin(phi), libm::cos(theta))
}

/// `(theta, phi)` of a nonzero vector, `phi ∈ (−π, π]`.
pub fn direction_of(v: &Vector3<f64>) -> (f64, f64) {
    let r = v.norm();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    (
        libm::acos((v.z / r).clamp(-1.0, 1.0)),
        libm::atan2(v.y, v.x),
    )
}

/// Translation in spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationVec {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl TranslationVec {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && theta.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidParameter("translation must be finite".into()));
        }
        if r < 0.0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "translation distance must be non-negative, got {r}"
            )));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParameter(alloc::format!(
                "translation elevation must lie in [0, π], got {theta}"
            )));
        }
        Ok(Self { r, theta, phi })
    }

    pub const fn zero() -> Self {
        Self {
            r: 0.0,
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn to_cartesian(self) -> Vector3<f64> {
        unit_vector(self.theta, self.phi) * self.r
    }

    pub fn from_cartesian(v: &Vector3<f64>) -> Self {
        let (theta, phi) = direction_of(v);
        Self {
            r: v.norm(),
            theta,
            phi,
        }
    }
}

/// Array pose for one STFT frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePose {
    pub rotation: EulerAngles,
    pub translation: TranslationVec,
}

impl FramePose {
    pub const fn identity() -> Self {
        Self {
            rotation: EulerAngles::identity(),
            translation: TranslationVec::zero(),
        }
    }

    pub fn rotation_only(rotation: EulerAngles) -> Self {
        Self {
            rotation,
            translation: TranslationVec::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation.is_identity() && self.translation.r == 0.0
    }
}

/// How the poses of a [`Trajectory`] are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseConvention {
    /// Orientation and position relative to frame 0.
    Absolute,
    /// Change from the previous frame, expressed in the previous frame's
    /// body coordinates.
    Delta,
}

/// Per-frame array poses; frame 0 is the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<FramePose>,
    convention: PoseConvention,
}

impl Trajectory {
    pub fn new(poses: Vec<FramePose>, convention: PoseConvention) -> Result<Self> {
        match poses.first() {
            None => Err(Error::InsufficientData("trajectory has no poses".into())),
            Some(p) if !p.is_identity() => Err(Error::InvalidParameter(
                "the first trajectory pose must be the identity".into(),
            )),
            Some(_) => Ok(Self { poses, convention }),
        }
    }

    /// `frames` poses of a stationary array.
    pub fn stationary(frames: usize) -> Self {
        Self {
            poses: alloc::vec![FramePose::identity(); frames.max(1)],
            convention: PoseConvention::Absolute,
        }
    }

    /// Rotation about +z at `rate` rad/s with frame `i` sampled at
    /// `times[i] − times[0]` seconds.
    pub fn rotate_z(rate: f64, times: &[f64]) -> Result<Self> {
        let t0 = *times
            .first()
            .ok_or_else(|| Error::InsufficientData("no frame times".into()))?;
        let poses = times
            .iter()
            .map(|&t| FramePose::rotation_only(EulerAngles::about_z(rate * (t - t0))))
            .collect();
        Self::new(poses, PoseConvention::Absolute)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[FramePose] {
        &self.poses
    }

    pub fn convention(&self) -> PoseConvention {
        self.convention
    }

    /// Orientation matrices and positions relative to frame 0.
    fn absolute_states(&self, upto: usize) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
        let mut out = Vec::with_capacity(upto + 1);
        match self.convention {
            PoseConvention::Absolute => {
                for p in &self.poses[..=upto] {
                    out.push((p.rotation.to_matrix(), p.translation.to_cartesian()));
                }
            }
            PoseConvention::Delta => {
                let mut q = Matrix3::identity();
                let mut d = Vector3::zeros();
                for p in &self.poses[..=upto] {
                    d += q * p.translation.to_cartesian();
                    q *= p.rotation.to_matrix();
                    out.push((q, d));
                }
            }
        }
        out
    }

    /// Equivalent trajectory with [`PoseConvention::Absolute`] poses.
    pub fn to_absolute(&self) -> Self {
        let poses = self
            .absolute_states(self.poses.len() - 1)
            .into_iter()
            .map(|(q, d)| FramePose {
                rotation: EulerAngles::from_matrix(&q),
                translation: TranslationVec::from_cartesian(&d),
            })
            .collect();
        Self {
            poses,
            convention: PoseConvention::Absolute,
        }
    }
}

/// A linear map between SH coefficient vectors of possibly different order.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTransform {
    pub matrix: CMatrix,
    pub input_order: u32,
    pub output_order: u32,
    /// Set when an intermediate order was cut at the configured cap.
    pub truncated: bool,
}

impl MotionTransform {
    pub fn identity(order: u32) -> Self {
        let d = coeff_count(order);
        Self {
            matrix: CMatrix::identity(d, d),
            input_order: order,
            output_order: order,
            truncated: false,
        }
    }

    /// `self · rhs`; `rhs` acts first.
    pub fn then_after(&self, rhs: &MotionTransform) -> Result<Self> {
        if self.input_order != rhs.output_order {
            return Err(Error::InvalidParameter(alloc::format!(
                "cannot compose order {} output with order {} input",
                rhs.output_order,
                self.input_order
            )));
        }
        Ok(Self {
            matrix: &self.matrix * &rhs.matrix,
            input_order: rhs.input_order,
            output_order: self.output_order,
            truncated: self.truncated || rhs.truncated,
        })
    }

    pub fn apply(&self, a: &ShVector) -> Result<ShVector> {
        if a.order() != self.input_order {
            return Err(Error::InvalidParameter(alloc::format!(
                "transform expects order {}, got {}",
                self.input_order,
                a.order()
            )));
        }
        ShVector::new(self.output_order, &self.matrix * a.coeffs())
    }

    /// Keeps only output rows of order `≤ order`.
    pub fn truncate_output(&self, order: u32) -> Self {
        if order >= self.output_order {
            return self.clone();
        }
        Self {
            matrix: self.matrix.rows(0, coeff_count(order)).into_owned(),
            input_order: self.input_order,
            output_order: order,
            truncated: true,
        }
    }
}

/// Block-diagonal Wigner-D rotation matrix of order `n_max`.
pub fn rotation_matrix(n_max: u32, angles: EulerAngles) -> MotionTransform {
    let dim = coeff_count(n_max);
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..=n_max {
        let block = wigner_d_block(n, angles.beta);
        let w = 2 * n as usize + 1;
        let base = (n * n) as usize;
        let ni = n as i32;
        for r in 0..w {
            let m1 = r as i32 - ni;
            for c in 0..w {
                let m2 = c as i32 - ni;
                let phase = -(m1 as f64) * angles.alpha - (m2 as f64) * angles.gamma;
                m[(base + r, base + c)] = Complex64::from_polar(block[r * w + c], phase);
            }
        }
    }
    MotionTransform {
        matrix: m,
        input_order: n_max,
        output_order: n_max,
        truncated: false,
    }
}

/// Translation coupling coefficient
/// `4π i^{n'+q−n} (−1)^m √((2n+1)(2n'+1)(2q+1)/4π) (n n' q; 0 0 0)(n n' q; m −m' m'−m)`.
pub fn translation_coeff(np: i32, mp: i32, n: i32, m: i32, q: i32) -> Result<Complex64> {
    if (m - mp).abs() > q {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let w0 = wigner_3j(n, np, q, 0, 0, 0)?;
    if w0 == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let wm = wigner_3j(n, np, q, m, -mp, mp - m)?;
    if wm == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mag = 4.0
        * PI
        * libm::sqrt(((2 * n + 1) * (2 * np + 1) * (2 * q + 1)) as f64 / (4.0 * PI))
        * w0
        * wm;
    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(i_pow(np + q - n) * (sign * mag))
}

fn i_pow(p: i32) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Default output order `N + ⌈k r⌉`.
pub fn default_output_order(n_in: u32, k: f64, r: f64) -> u32 {
    n_in + libm::ceil(k * r) as u32
}

/// Default Bessel-order cap `⌈k r⌉ + DEFAULT_Q_MARGIN`.
pub fn default_q_cap(k: f64, r: f64) -> u32 {
    libm::ceil(k * r) as u32 + DEFAULT_Q_MARGIN
}

/// Translation matrix with the default Bessel-order cap.
///
/// `n_out = None` selects [`default_output_order`].
pub fn translation_matrix(
    n_in: u32,
    k: f64,
    t: &TranslationVec,
    n_out: Option<u32>,
) -> Result<MotionTransform> {
    let n_out = n_out.unwrap_or_else(|| default_output_order(n_in, k, t.r));
    translation_matrix_with_cap(n_in, k, t, n_out, default_q_cap(k, t.r))
}

/// Translation matrix summing Bessel orders `q ≤ q_cap`.
pub fn translation_matrix_with_cap(
    n_in: u32,
    k: f64,
    t: &TranslationVec,
    n_out: u32,
    q_cap: u32,
) -> Result<MotionTransform> {
    if n_out < n_in {
        return Err(Error::InvalidTruncation { n_in, n_out });
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "wavenumber must be finite and non-negative, got {k}"
        )));
    }
    let rows = coeff_count(n_out);
    let cols = coeff_count(n_in);
    let mut mat = CMatrix::zeros(rows, cols);
    let kr = k * t.r;
    if kr == 0.0 {
        for i in 0..cols {
            mat[(i, i)] = Complex64::new(1.0, 0.0);
        }
        return Ok(MotionTransform {
            matrix: mat,
            input_order: n_in,
            output_order: n_out,
            truncated: false,
        });
    }
    let q_top = q_cap.min(n_in + n_out);
    let jq = sph_bessel_j_all(q_top, kr);
    let yq = sph_harm_all(q_top, t.theta, t.phi);
    for np in 0..=n_out as i32 {
        for mp in -np..=np {
            let row = (np * np + np + mp) as usize;
            for n in 0..=n_in as i32 {
                let phase = i_pow(n - np);
                for m in -n..=n {
                    let col = (n * n + n + m) as usize;
                    let q_lo = (n - np).abs().max((m - mp).abs());
                    let q_hi = (n + np).min(q_top as i32);
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut q = q_lo;
                    if (n + np + q) % 2 != 0 {
                        q += 1;
                    }
                    while q <= q_hi {
                        let c = translation_coeff(np, mp, n, m, q)?;
                        let y = yq[(q * q + q + (m - mp)) as usize];
                        acc += c * y * jq[q as usize];
                        q += 2;
                    }
                    mat[(row, col)] = acc * phase;
                }
            }
        }
    }
    Ok(MotionTransform {
        matrix: mat,
        input_order: n_in,
        output_order: n_out,
        truncated: false,
    })
}

/// First-order translation `j_0(kr)·Ĩ + j_1(kr)·C` with output order `n_in + 1`.
pub fn small_translation_matrix(n_in: u32, k: f64, t: &TranslationVec) -> Result<MotionTransform> {
    let kr = k * t.r;
    if !(kr < 1.0) {
        return Err(Error::NotApplicable(kr));
    }
    translation_matrix_with_cap(n_in, k, t, n_in + 1, 1)
}

/// Default intermediate order cap `N + ⌈k r_total⌉ + 2`.
pub fn default_order_cap(n_in: u32, k: f64, r_total: f64) -> u32 {
    n_in + libm::ceil(k * r_total) as u32 + 2
}

/// `W_i = T_i · R_i` for one frame of a trajectory.
///
/// Absolute poses use one translation about the frame-0 centre. Delta poses
/// chain one translation factor per step (first-order when `k·r' < 1`, full
/// otherwise), each expressed in frame `i` body coordinates. Output orders
/// above `n_cap` (default [`default_order_cap`]) are cut and flagged.
pub fn compose_transform(
    traj: &Trajectory,
    frame: usize,
    k: f64,
    n_in: u32,
    n_cap: Option<u32>,
) -> Result<MotionTransform> {
    if frame >= traj.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "frame {frame} is outside a trajectory of {} poses",
            traj.len()
        )));
    }
    let states = traj.absolute_states(frame);
    let (q_i, d_i) = states[frame];
    let q_inv = q_i.transpose();
    let rot = rotation_matrix(n_in, EulerAngles::from_matrix(&q_inv));

    match traj.convention() {
        PoseConvention::Absolute => {
            let t = TranslationVec::from_cartesian(&(q_inv * d_i));
            if t.r == 0.0 {
                return Ok(rot);
            }
            let cap = n_cap.unwrap_or_else(|| default_order_cap(n_in, k, t.r)).max(n_in);
            let wanted = default_output_order(n_in, k, t.r);
            let tm = translation_matrix(n_in, k, &t, Some(wanted.min(cap)))?;
            let mut w = tm.then_after(&rot)?;
            w.truncated = wanted > cap;
            Ok(w)
        }
        PoseConvention::Delta => {
            let path: f64 = states.windows(2).map(|s| (s[1].1 - s[0].1).norm()).sum();
            if path == 0.0 {
                return Ok(rot);
            }
            let cap = n_cap.unwrap_or_else(|| default_order_cap(n_in, k, path)).max(n_in);
            let mut acc = MotionTransform::identity(n_in);
            for s in states.windows(2) {
                let step = s[1].1 - s[0].1;
                if step.norm() == 0.0 {
                    continue;
                }
                let u = TranslationVec::from_cartesian(&(q_inv * step));
                let order = acc.output_order;
                let factor = if k * u.r < 1.0 {
                    small_translation_matrix(order, k, &u)?
                } else {
                    translation_matrix(order, k, &u, None)?
                };
                let factor = if factor.output_order > cap {
                    factor.truncate_output(cap)
                } else {
                    factor
                };
                acc = factor.then_after(&acc)?;
            }
            acc.then_after(&rot)
        }
    }
}

/// Memoized rotation and translation matrices for one worker.
///
/// Keys are the exact bit patterns of the arguments, so repeated poses and
/// wavenumbers reuse earlier results.
#[derive(Debug, Default, Clone)]
pub struct TransformCache {
    rotations: BTreeMap<(u32, [u64; 3]), MotionTransform>,
    translations: BTreeMap<(u32, u32, [u64; 4]), MotionTransform>,
}

impl TransformCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rotation(&mut self, n_max: u32, angles: EulerAngles) -> &MotionTransform {
        let key = (
            n_max,
            [angles.alpha.to_bits(), angles.beta.to_bits(), angles.gamma.to_bits()],
        );
        self.rotations
            .entry(key)
            .or_insert_with(|| rotation_matrix(n_max, angles))
    }

    pub fn translation(
        &mut self,
        n_in: u32,
        k: f64,
        t: &TranslationVec,
        n_out: u32,
    ) -> Result<&MotionTransform> {
        let key = (
            n_in,
            n_out,
            [k.to_bits(), t.r.to_bits(), t.theta.to_bits(), t.phi.to_bits()],
        );
        if let alloc::collections::btree_map::Entry::Vacant(e) = self.translations.entry(key) {
            let m = translation_matrix(n_in, k, t, Some(n_out))?;
            e.insert(m);
        }
        Ok(&self.translations[&key])
    }

    pub fn len(&self) -> usize {
        self.rotations.len() + self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
