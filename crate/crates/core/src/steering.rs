//! Array geometries and SH-domain steering matrices.
//!
//! A unit plane wave arriving from `Ω` produces the pressure
//! `p_q = Σ_nm b_n(k a) Y_n^m(mic_q) conj(Y_n^m(Ω))` on a rigid sphere of
//! radius `a`, so the steering matrix has entries `b_n(k a) Y_n^m(mic_q)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::motion::{direction_of, unit_vector, EulerAngles};
use crate::sh::{coeff_count, sph_bessel_derivatives, sph_bessel_j_all, sph_bessel_y_all, sph_harm_all};
use crate::{wavenumber, Error, Result};

/// Microphones on the surface of a rigid sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub radius: f64,
    /// `(theta, phi)` of each microphone in radians.
    pub mics: Vec<(f64, f64)>,
    pub label: String,
}

impl ArrayGeometry {
    pub fn new(radius: f64, mics: Vec<(f64, f64)>, label: impl Into<String>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "array radius must be positive, got {radius}"
            )));
        }
        if mics.is_empty() {
            return Err(Error::InvalidParameter("array has no microphones".into()));
        }
        for (i, &(t, p)) in mics.iter().enumerate() {
            if !(0.0..=PI).contains(&t) || !p.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "microphone {i} has invalid direction ({t}, {p})"
                )));
            }
        }
        Ok(Self {
            radius,
            mics,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.mics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mics.is_empty()
    }

    /// The same array turned by `Q(angles)`.
    pub fn rotated(&self, angles: EulerAngles) -> Self {
        let q = angles.to_matrix();
        Self {
            radius: self.radius,
            mics: self
                .mics
                .iter()
                .map(|&(t, p)| direction_of(&(q * unit_vector(t, p))))
                .collect(),
            label: self.label.clone(),
        }
    }
}

/// Steering matrix `V(ω)` of shape `M × (N+1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    pub k: f64,
    pub order: u32,
    pub matrix: CMatrix,
    /// Lowest order whose mode strength underflowed and was set to zero.
    pub underflow_order: Option<u32>,
}

impl SteeringMatrix {
    pub fn mic_count(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Rigid-sphere mode strengths `b_0(x) ..= b_{n_max}(x)` and the first order
/// that underflowed, if any.
///
/// `b_n(x) = 4π i^n (j_n(x) − j_n'(x)/h_n'(x) · h_n(x)) = 4π i^{n−1} / (x² h_n'(x))`
/// with `h_n = j_n − i y_n`.
pub fn mode_strength_all(n_max: u32, x: f64) -> (Vec<Complex64>, Option<u32>) {
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); n_max as usize + 1];
    if x == 0.0 {
        out[0] = Complex64::new(4.0 * PI, 0.0);
        return (out, None);
    }
    let j = sph_bessel_j_all(n_max + 1, x);
    let y = sph_bessel_y_all(n_max + 1, x);
    let dj = sph_bessel_derivatives(&j, x);
    let dy = sph_bessel_derivatives(&y, x);
    let mut underflow = None;
    for n in 0..=n_max as usize {
        let dh = Complex64::new(dj[n], -dy[n]);
        let scale = dh.re.abs().max(dh.im.abs());
        let b = if dh.re.is_finite() && dh.im.is_finite() && scale > 0.0 {
            let u = dh / scale;
            let inv = u.conj() / (u.norm_sqr() * scale);
            i_pow(n as i32 - 1) * inv * (4.0 * PI / (x * x))
        } else {
            Complex64::new(0.0, 0.0)
        };
        if b == Complex64::new(0.0, 0.0) && underflow.is_none() {
            underflow = Some(n as u32);
        }
        out[n] = b;
    }
    (out, underflow)
}

/// Single rigid-sphere mode strength `b_n(x)`.
pub fn mode_strength(n: u32, x: f64) -> Complex64 {
    mode_strength_all(n, x).0[n as usize]
}

fn i_pow(p: i32) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Steering matrix of ideal pressure microphones flush with a rigid sphere.
pub fn rigid_sphere_steering(geom: &ArrayGeometry, k: f64, order: u32) -> Result<SteeringMatrix> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let (b, underflow_order) = mode_strength_all(order, k * geom.radius);
    let dim = coeff_count(order);
    let mut v = CMatrix::zeros(geom.len(), dim);
    for (q, &(t, p)) in geom.mics.iter().enumerate() {
        let y = sph_harm_all(order, t, p);
        for (n, bn) in b.iter().enumerate().take(order as usize + 1) {
            for idx in n * n..(n + 1) * (n + 1) {
                v[(q, idx)] = bn * y[idx];
            }
        }
    }
    Ok(SteeringMatrix {
        k,
        order,
        matrix: v,
        underflow_order,
    })
}

/// 13-microphone equiangular array: one mic at the north pole plus rings at
/// `θ ∈ {45°, 90°, 135°}` with azimuths `{0°, 90°, 180°, 270°}`.
pub fn equiangular_13(radius: f64) -> Result<ArrayGeometry> {
    let mut mics = alloc::vec![(0.0, 0.0)];
    for ring in 1..=3 {
        for az in 0..4 {
            mics.push((ring as f64 * PI / 4.0, az as f64 * PI / 2.0));
        }
    }
    ArrayGeometry::new(radius, mics, "equiangular-13")
}

/// Point counts with an embedded near-uniform table.
pub const NEAR_UNIFORM_SIZES: [usize; 5] = [4, 12, 20, 24, 32];

/// Directions `(theta, phi)` of an embedded near-uniform point set.
///
/// 4: tetrahedron turned by zyz angles (10°, 25°, 40°); 12: icosahedron;
/// 20: dodecahedron; 24: snub cube; 32: icosahedron plus its dual
/// dodecahedron.
pub fn near_uniform_directions(count: usize) -> Result<Vec<(f64, f64)>> {
    let table: &[[f64; 3]] = match count {
        4 => &TETRAHEDRON,
        12 => &ICOSAHEDRON,
        20 => &DODECAHEDRON,
        24 => &SNUB_CUBE,
        32 => &ICOSA_DODECA,
        other => return Err(Error::UnsupportedGeometry(other)),
    };
    Ok(table
        .iter()
        .map(|&[x, y, z]| direction_of(&nalgebra::Vector3::new(x, y, z)))
        .map(|(t, p)| (t, if p < 0.0 { p + 2.0 * PI } else { p }))
        .collect())
}

/// Near-uniform array of `count` microphones.
pub fn near_uniform(count: usize, radius: f64) -> Result<ArrayGeometry> {
    let mics = near_uniform_directions(count)?;
    ArrayGeometry::new(radius, mics, alloc::format!("near-uniform-{count}"))
}

/// Anything that yields a steering matrix for a frequency and SH order.
pub trait SteeringModel {
    fn mic_count(&self) -> usize;
    fn wavenumber(&self, freq_hz: f64) -> f64;
    fn steering(&self, freq_hz: f64, order: u32) -> Result<SteeringMatrix>;
}

/// Analytic rigid-sphere steering for a fixed geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidSphere {
    pub geometry: ArrayGeometry,
    pub speed_of_sound: f64,
}

impl SteeringModel for RigidSphere {
    fn mic_count(&self) -> usize {
        self.geometry.len()
    }

    fn wavenumber(&self, freq_hz: f64) -> f64 {
        wavenumber(freq_hz, self.speed_of_sound)
    }

    fn steering(&self, freq_hz: f64, order: u32) -> Result<SteeringMatrix> {
        rigid_sphere_steering(&self.geometry, wavenumber(freq_hz, self.speed_of_sound), order)
    }
}

/// Tabulated steering matrices on a frequency grid, e.g. imported from a
/// measurement or a numerical simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSet {
    pub mic_count: usize,
    pub order: u32,
    pub radius: f64,
    pub fs: f64,
    pub speed_of_sound: f64,
    pub freqs: Vec<f64>,
    pub matrices: Vec<CMatrix>,
}

impl SteeringSet {
    /// Validates shapes, grid ordering and finiteness.
    pub fn new(
        mic_count: usize,
        order: u32,
        radius: f64,
        fs: f64,
        freqs: Vec<f64>,
        matrices: Vec<CMatrix>,
    ) -> Result<Self> {
        if freqs.len() != matrices.len() {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} frequencies but {} matrices",
                freqs.len(),
                matrices.len()
            )));
        }
        if freqs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("frequency grid is not strictly increasing".into()));
        }
        let cols = coeff_count(order);
        for (i, m) in matrices.iter().enumerate() {
            if m.shape() != (mic_count, cols) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "matrix {i} has shape {:?}, expected ({mic_count}, {cols})",
                    m.shape()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "matrix {i} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            mic_count,
            order,
            radius,
            fs,
            speed_of_sound: crate::SPEED_OF_SOUND,
            freqs,
            matrices,
        })
    }

    /// Samples an analytic model on a frequency grid.
    pub fn from_model(
        model: &RigidSphere,
        order: u32,
        fs: f64,
        freqs: Vec<f64>,
    ) -> Result<Self> {
        let matrices = freqs
            .iter()
            .map(|&f| model.steering(f, order).map(|s| s.matrix))
            .collect::<Result<Vec<_>>>()?;
        let mut set = Self::new(model.mic_count(), order, model.geometry.radius, fs, freqs, matrices)?;
        set.speed_of_sound = model.speed_of_sound;
        Ok(set)
    }

    fn index_of(&self, freq_hz: f64) -> Result<usize> {
        let tol = 1e-9 * freq_hz.abs().max(1.0);
        self.freqs
            .iter()
            .position(|&f| (f - freq_hz).abs() <= tol)
            .ok_or_else(|| {
                Error::InvalidParameter(alloc::format!("no steering matrix at {freq_hz} Hz"))
            })
    }
}

impl SteeringModel for SteeringSet {
    fn mic_count(&self) -> usize {
        self.mic_count
    }

    fn wavenumber(&self, freq_hz: f64) -> f64 {
        wavenumber(freq_hz, self.speed_of_sound)
    }

    fn steering(&self, freq_hz: f64, order: u32) -> Result<SteeringMatrix> {
        if order > self.order {
            return Err(Error::InvalidParameter(alloc::format!(
                "steering set has order {}, requested {order}",
                self.order
            )));
        }
        let m = &self.matrices[self.index_of(freq_hz)?];
        Ok(SteeringMatrix {
            k: self.wavenumber(freq_hz),
            order,
            matrix: m.columns(0, coeff_count(order)).into_owned(),
            underflow_order: None,
        })
    }
}

const TETRAHEDRON: [[f64; 3]; 4] = [
    [0.16256344430937494, 0.8546017313689731, 0.4931825294101835],
    [0.4980471937810327, 0.015558997767491645, -0.8670103288631051],
    [-0.9786309490704777, -0.10029888031521526, -0.17950376076542274],
    [0.31802031098007005, -0.7698618488212494, 0.5533315602183444],
];

const ICOSAHEDRON: [[f64; 3]; 12] = [
    [0.0, -0.5257311121191336, -0.85065080835204],
    [-0.5257311121191336, -0.85065080835204, 0.0],
    [-0.85065080835204, 0.0, -0.5257311121191336],
    [0.0, -0.5257311121191336, 0.85065080835204],
    [-0.5257311121191336, 0.85065080835204, 0.0],
    [0.85065080835204, 0.0, -0.5257311121191336],
    [0.0, 0.5257311121191336, -0.85065080835204],
    [0.5257311121191336, -0.85065080835204, 0.0],
    [-0.85065080835204, 0.0, 0.5257311121191336],
    [0.0, 0.5257311121191336, 0.85065080835204],
    [0.5257311121191336, 0.85065080835204, 0.0],
    [0.85065080835204, 0.0, 0.5257311121191336],
];

const DODECAHEDRON: [[f64; 3]; 20] = [
    [-0.5773502691896258, -0.5773502691896258, -0.5773502691896258],
    [-0.5773502691896258, -0.5773502691896258, 0.5773502691896258],
    [-0.5773502691896258, 0.5773502691896258, -0.5773502691896258],
    [-0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [0.5773502691896258, -0.5773502691896258, -0.5773502691896258],
    [0.5773502691896258, -0.5773502691896258, 0.5773502691896258],
    [0.5773502691896258, 0.5773502691896258, -0.5773502691896258],
    [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [0.0, -0.35682208977308993, -0.9341723589627158],
    [-0.35682208977308993, -0.9341723589627158, 0.0],
    [-0.9341723589627158, 0.0, -0.35682208977308993],
    [0.0, -0.35682208977308993, 0.9341723589627158],
    [-0.35682208977308993, 0.9341723589627158, 0.0],
    [0.9341723589627158, 0.0, -0.35682208977308993],
    [0.0, 0.35682208977308993, -0.9341723589627158],
    [0.35682208977308993, -0.9341723589627158, 0.0],
    [-0.9341723589627158, 0.0, 0.35682208977308993],
    [0.0, 0.35682208977308993, 0.9341723589627158],
    [0.35682208977308993, 0.9341723589627158, 0.0],
    [0.9341723589627158, 0.0, 0.35682208977308993],
];

const SNUB_CUBE: [[f64; 3]; 24] = [
    [-0.4623206278176563, -0.2513586456853625, -0.8503402074073109],
    [-0.4623206278176563, 0.2513586456853625, 0.8503402074073109],
    [0.4623206278176563, -0.2513586456853625, 0.8503402074073109],
    [0.4623206278176563, 0.2513586456853625, -0.8503402074073109],
    [-0.2513586456853625, -0.8503402074073109, -0.4623206278176563],
    [-0.2513586456853625, 0.8503402074073109, 0.4623206278176563],
    [0.2513586456853625, -0.8503402074073109, 0.4623206278176563],
    [0.2513586456853625, 0.8503402074073109, -0.4623206278176563],
    [-0.850340207407311, -0.4623206278176564, -0.25135864568536254],
    [-0.850340207407311, 0.4623206278176564, 0.25135864568536254],
    [0.850340207407311, -0.4623206278176564, 0.25135864568536254],
    [0.850340207407311, 0.4623206278176564, -0.25135864568536254],
    [-0.4623206278176564, -0.850340207407311, 0.25135864568536254],
    [-0.4623206278176564, 0.850340207407311, -0.25135864568536254],
    [0.4623206278176564, -0.850340207407311, -0.25135864568536254],
    [0.4623206278176564, 0.850340207407311, 0.25135864568536254],
    [-0.8503402074073109, -0.2513586456853625, 0.4623206278176563],
    [-0.8503402074073109, 0.2513586456853625, -0.4623206278176563],
    [0.8503402074073109, -0.2513586456853625, -0.4623206278176563],
    [0.8503402074073109, 0.2513586456853625, 0.4623206278176563],
    [-0.2513586456853625, -0.4623206278176563, 0.8503402074073109],
    [-0.2513586456853625, 0.4623206278176563, -0.8503402074073109],
    [0.2513586456853625, -0.4623206278176563, -0.8503402074073109],
    [0.2513586456853625, 0.4623206278176563, 0.8503402074073109],
];

const ICOSA_DODECA: [[f64; 3]; 32] = [
    [0.0, -0.85065080835204, -0.5257311121191336],
    [-0.85065080835204, -0.5257311121191336, 0.0],
    [-0.5257311121191336, 0.0, -0.85065080835204],
    [0.0, -0.85065080835204, 0.5257311121191336],
    [-0.85065080835204, 0.5257311121191336, 0.0],
    [0.5257311121191336, 0.0, -0.85065080835204],
    [0.0, 0.85065080835204, -0.5257311121191336],
    [0.85065080835204, -0.5257311121191336, 0.0],
    [-0.5257311121191336, 0.0, 0.85065080835204],
    [0.0, 0.85065080835204, 0.5257311121191336],
    [0.85065080835204, 0.5257311121191336, 0.0],
    [0.5257311121191336, 0.0, 0.85065080835204],
    [-0.5773502691896258, -0.5773502691896258, -0.5773502691896258],
    [-0.5773502691896258, -0.5773502691896258, 0.5773502691896258],
    [-0.5773502691896258, 0.5773502691896258, -0.5773502691896258],
    [-0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [0.5773502691896258, -0.5773502691896258, -0.5773502691896258],
    [0.5773502691896258, -0.5773502691896258, 0.5773502691896258],
    [0.5773502691896258, 0.5773502691896258, -0.5773502691896258],
    [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [0.0, -0.35682208977308993, -0.9341723589627158],
    [-0.35682208977308993, -0.9341723589627158, 0.0],
    [-0.9341723589627158, 0.0, -0.35682208977308993],
    [0.0, -0.35682208977308993, 0.9341723589627158],
    [-0.35682208977308993, 0.9341723589627158, 0.0],
    [0.9341723589627158, 0.0, -0.35682208977308993],
    [0.0, 0.35682208977308993, -0.9341723589627158],
    [0.35682208977308993, -0.9341723589627158, 0.0],
    [-0.9341723589627158, 0.0, 0.35682208977308993],
    [0.0, 0.35682208977308993, 0.9341723589627158],
    [0.35682208977308993, 0.9341723589627158, 0.0],
    [0.9341723589627158, 0.0, 0.35682208977308993],
];
