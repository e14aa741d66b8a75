//! Spherical harmonics, spherical Bessel functions and Wigner symbols.
//!
//! Conventions shared by the whole crate:
//!
//! * complex orthonormal harmonics with the Condon–Shortley phase,
//!   `Y_n^{-m} = (-1)^m conj(Y_n^m)`;
//! * coefficient vectors are ordered by the linear index `n² + n + m`;
//! * `θ` is the polar angle (elevation measured from +z) and `φ` the azimuth.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::CVector;
use crate::{Error, Result};

/// An `(n, m)` pair with `|m| ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShIndex {
    pub n: u32,
    pub m: i32,
}

impl ShIndex {
    pub fn new(n: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > n {
            return Err(Error::InvalidDegree { n: n as i32, m });
        }
        Ok(Self { n, m })
    }

    /// Linear position `n² + n + m`.
    pub fn linear(self) -> usize {
        let n = self.n as i64;
        (n * n + n + self.m as i64) as usize
    }

    pub fn from_linear(idx: usize) -> Self {
        let n = libm::sqrt(idx as f64) as usize;
        // guard against rounding in sqrt for large perfect squares
        let n = if (n + 1) * (n + 1) <= idx {
            n + 1
        } else if n * n > idx {
            n - 1
        } else {
            n
        };
        Self {
            n: n as u32,
            m: (idx as i64 - (n * n + n) as i64) as i32,
        }
    }
}

/// Number of coefficients `(N+1)²` of an order-`N` expansion.
pub const fn coeff_count(order: u32) -> usize {
    let k = order as usize + 1;
    k * k
}

/// All indices up to `order` in linear order.
pub fn indices(order: u32) -> impl Iterator<Item = ShIndex> {
    (0..=order).flat_map(|n| (-(n as i32)..=n as i32).map(move |m| ShIndex { n, m }))
}

/// Linear index `n² + n + m`.
pub fn acn_index(n: i32, m: i32) -> Result<usize> {
    if n < 0 {
        return Err(Error::InvalidOrder(n));
    }
    Ok(ShIndex::new(n as u32, m)?.linear())
}

/// Coefficient vector of an order-`N` expansion in linear order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShVector {
    order: u32,
    coeffs: CVector,
}

impl ShVector {
    pub fn new(order: u32, coeffs: CVector) -> Result<Self> {
        if coeffs.len() != coeff_count(order) {
            return Err(Error::InvalidParameter(alloc::format!(
                "order {order} needs {} coefficients, got {}",
                coeff_count(order),
                coeffs.len()
            )));
        }
        Ok(Self { order, coeffs })
    }

    pub fn zeros(order: u32) -> Self {
        Self {
            order,
            coeffs: CVector::zeros(coeff_count(order)),
        }
    }

    /// PWD coefficients of a unit-amplitude plane wave arriving from
    /// `(theta, phi)`: `a_nm = conj(Y_n^m(θ, φ))`.
    pub fn plane_wave(order: u32, theta: f64, phi: f64) -> Self {
        let y = sph_harm_all(order, theta, phi);
        Self {
            order,
            coeffs: CVector::from_iterator(y.len(), y.into_iter().map(|v| v.conj())),
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &CVector {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> CVector {
        self.coeffs
    }

    pub fn get(&self, n: u32, m: i32) -> Option<Complex64> {
        let idx = ShIndex::new(n, m).ok()?.linear();
        self.coeffs.get(idx).copied()
    }

    /// Drops every coefficient above `order` (no-op if already lower).
    pub fn truncated(&self, order: u32) -> Self {
        let order = order.min(self.order);
        Self {
            order,
            coeffs: self.coeffs.rows(0, coeff_count(order)).into_owned(),
        }
    }
}

/// Complex spherical harmonic `Y_n^m(θ, φ)`.
pub fn sph_harm(n: i32, m: i32, theta: f64, phi: f64) -> Result<Complex64> {
    if n < 0 {
        return Err(Error::InvalidOrder(n));
    }
    let idx = ShIndex::new(n as u32, m)?;
    let am = m.unsigned_abs();
    let p = normalized_legendre_column(n as u32, am, libm::cos(theta), libm::sin(theta));
    let pos = Complex64::from_polar(p[n as usize - am as usize], am as f64 * phi);
    Ok(if idx.m >= 0 {
        pos
    } else if am.is_multiple_of(2) {
        pos.conj()
    } else {
        -pos.conj()
    })
}

/// All `Y_n^m(θ, φ)` for `n ≤ order`, in linear order.
pub fn sph_harm_all(order: u32, theta: f64, phi: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); coeff_count(order)];
    let (x, s) = (libm::cos(theta), libm::sin(theta));
    for am in 0..=order {
        let col = normalized_legendre_column(order, am, x, s);
        let phase = Complex64::from_polar(1.0, am as f64 * phi);
        for n in am..=order {
            let pos = phase * col[(n - am) as usize];
            let n_i = n as usize;
            out[n_i * n_i + n_i + am as usize] = pos;
            if am > 0 {
                let neg = if am % 2 == 0 { pos.conj() } else { -pos.conj() };
                out[n_i * n_i + n_i - am as usize] = neg;
            }
        }
    }
    out
}

/// `P̄_n^m(x)` for `n = m..=n_max` (orthonormal, Condon–Shortley phase),
/// where `P̄` already carries `sqrt((2n+1)/(4π)·(n−m)!/(n+m)!)`.
fn normalized_legendre_column(n_max: u32, m: u32, x: f64, s: f64) -> Vec<f64> {
    let mut pmm = 1.0 / libm::sqrt(4.0 * PI);
    for k in 1..=m {
        let k = k as f64;
        pmm *= -libm::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
    }
    let mut col = Vec::with_capacity((n_max - m + 1) as usize);
    col.push(pmm);
    if n_max == m {
        return col;
    }
    let mf = m as f64;
    col.push(libm::sqrt(2.0 * mf + 3.0) * x * pmm);
    for n in (m + 2)..=n_max {
        let nf = n as f64;
        let a = libm::sqrt((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf));
        let nm1 = nf - 1.0;
        let a_prev = libm::sqrt((4.0 * nm1 * nm1 - 1.0) / (nm1 * nm1 - mf * mf));
        let k = (n - m) as usize;
        let next = a * (x * col[k - 1] - col[k - 2] / a_prev);
        col.push(next);
    }
    col
}

/// Legendre polynomials `P_0(x) ..= P_{n_max}(x)`.
pub fn legendre_all(n_max: u32, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n_max as usize + 1);
    p.push(1.0);
    if n_max >= 1 {
        p.push(x);
    }
    for n in 1..n_max as usize {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

/// Spherical Bessel function of the first kind `j_q(x)`, `x ≥ 0`.
pub fn sph_bessel_j(q: u32, x: f64) -> f64 {
    sph_bessel_j_all(q, x)[q as usize]
}

/// `j_0(x) ..= j_{n_max}(x)`.
///
/// Power series below `x = 1`, Miller's downward recurrence above.
pub fn sph_bessel_j_all(n_max: u32, x: f64) -> Vec<f64> {
    let len = n_max as usize + 1;
    if x == 0.0 {
        let mut out = vec![0.0; len];
        out[0] = 1.0;
        return out;
    }
    if x < 1.0 {
        return (0..=n_max).map(|n| bessel_j_series(n, x)).collect();
    }

    let start = len + libm::ceil(x) as usize + 30;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for n in (1..=start).rev() {
        vals[n - 1] = (2.0 * n as f64 + 1.0) / x * vals[n] - vals[n + 1];
        if libm::fabs(vals[n - 1]) > 1e250 {
            for v in vals[n - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let j0 = libm::sin(x) / x;
    let j1 = libm::sin(x) / (x * x) - libm::cos(x) / x;
    let scale = if libm::fabs(j0) >= libm::fabs(j1) {
        j0 / vals[0]
    } else {
        j1 / vals[1]
    };
    vals.truncate(len);
    for v in vals.iter_mut() {
        *v *= scale;
    }
    vals
}

fn bessel_j_series(n: u32, x: f64) -> f64 {
    // x^n / (2n+1)!! · Σ_k (−x²/2)^k / (k! · Π_{i=1..k} (2n+2i+1))
    let mut lead = 1.0;
    for i in 1..=n {
        lead *= x / (2.0 * i as f64 + 1.0);
    }
    let half_x2 = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= half_x2 / (kf * (2.0 * n as f64 + 2.0 * kf + 1.0));
        sum += term;
        if libm::fabs(term) < 1e-18 * libm::fabs(sum) {
            break;
        }
    }
    lead * sum
}

/// Spherical Bessel function of the second kind `y_0(x) ..= y_{n_max}(x)`,
/// `x > 0`, by upward recurrence (the stable direction for `y`).
pub fn sph_bessel_y_all(n_max: u32, x: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(n_max as usize + 1);
    let (s, c) = (libm::sin(x), libm::cos(x));
    y.push(-c / x);
    if n_max >= 1 {
        y.push(-c / (x * x) - s / x);
    }
    for n in 1..n_max as usize {
        let next = (2.0 * n as f64 + 1.0) / x * y[n] - y[n - 1];
        y.push(next);
    }
    y
}

/// Derivatives `f_n'(x)` from values `f_0..=f_N` using
/// `f_n' = f_{n−1} − (n+1)/x · f_n` and `f_0' = −f_1`.
///
/// The last derivative needs `f_{N+1}` for `n = 0` only, so callers pass one
/// extra order when they need `f_0'` with `N = 0`.
pub fn sph_bessel_derivatives(values: &[f64], x: f64) -> Vec<f64> {
    let mut d = Vec::with_capacity(values.len());
    for n in 0..values.len() {
        if n == 0 {
            d.push(if values.len() > 1 { -values[1] } else { f64::NAN });
        } else {
            d.push(values[n - 1] - (n as f64 + 1.0) / x * values[n]);
        }
    }
    d
}

/// `ln(n!)`.
pub fn ln_factorial(n: u32) -> f64 {
    const EXACT: [f64; 21] = {
        let mut t = [1.0f64; 21];
        let mut i = 1;
        while i < 21 {
            t[i] = t[i - 1] * i as f64;
            i += 1;
        }
        t
    };
    if (n as usize) < EXACT.len() {
        libm::log(EXACT[n as usize])
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

fn ln_fact_i(n: i32) -> f64 {
    debug_assert!(n >= 0);
    ln_factorial(n as u32)
}

/// Wigner 3j symbol via Racah's single-sum formula in log space.
pub fn wigner_3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> Result<f64> {
    for j in [j1, j2, j3] {
        if j < 0 {
            return Err(Error::InvalidOrder(j));
        }
    }
    for (j, m) in [(j1, m1), (j2, m2), (j3, m3)] {
        if m.abs() > j {
            return Err(Error::InvalidDegree { n: j, m });
        }
    }
    if m1 + m2 + m3 != 0 || j3 < (j1 - j2).abs() || j3 > j1 + j2 {
        return Ok(0.0);
    }
    if m1 == 0 && m2 == 0 && m3 == 0 && (j1 + j2 + j3) % 2 != 0 {
        return Ok(0.0);
    }

    let ln_pref = 0.5
        * (ln_fact_i(j1 + j2 - j3) + ln_fact_i(j1 - j2 + j3) + ln_fact_i(-j1 + j2 + j3)
            - ln_fact_i(j1 + j2 + j3 + 1)
            + ln_fact_i(j1 + m1)
            + ln_fact_i(j1 - m1)
            + ln_fact_i(j2 + m2)
            + ln_fact_i(j2 - m2)
            + ln_fact_i(j3 + m3)
            + ln_fact_i(j3 - m3));

    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = ln_fact_i(k)
            + ln_fact_i(j3 - j2 + k + m1)
            + ln_fact_i(j3 - j1 + k - m2)
            + ln_fact_i(j1 + j2 - j3 - k)
            + ln_fact_i(j1 - k - m1)
            + ln_fact_i(j2 - k + m2);
        let term = libm::exp(ln_pref - ln_den);
        sum += if k % 2 == 0 { term } else { -term };
    }
    let sign = if (j1 - j2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(sign * sum)
}

fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Jacobi polynomial `P_s^{(a,b)}(x)` by the three-term recurrence.
fn jacobi(s: u32, a: u32, b: u32, x: f64) -> f64 {
    let (a, b) = (a as f64, b as f64);
    let p0 = 1.0;
    if s == 0 {
        return p0;
    }
    let p1 = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    let (mut prev, mut cur) = (p0, p1);
    for k in 2..=s {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let lhs = 2.0 * k * (k + a + b) * (c - 2.0);
        let next = ((c - 1.0) * (c * (c - 2.0) * x + a * a - b * b) * cur
            - 2.0 * (k + a - 1.0) * (k + b - 1.0) * c * prev)
            / lhs;
        prev = cur;
        cur = next;
    }
    cur
}

/// Real Wigner small-d function `d^n_{m1,m2}(β)`.
///
/// Jacobi-polynomial form with `μ = |m1−m2|`, `ν = |m1+m2|` and Jacobi
/// degree `s = n − (μ+ν)/2`.
pub fn wigner_d(n: i32, m1: i32, m2: i32, beta: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidOrder(n));
    }
    for m in [m1, m2] {
        if m.abs() > n {
            return Err(Error::InvalidDegree { n, m });
        }
    }
    Ok(wigner_d_unchecked(n as u32, m1, m2, beta))
}

fn wigner_d_unchecked(n: u32, m1: i32, m2: i32, beta: f64) -> f64 {
    let mu = (m1 - m2).unsigned_abs();
    let nu = (m1 + m2).unsigned_abs();
    let s = n - (mu + nu) / 2;
    let eta = if m2 >= m1 || (m1 - m2) % 2 == 0 { 1.0 } else { -1.0 };
    let ln_ratio = 0.5
        * (ln_factorial(s) + ln_factorial(s + mu + nu)
            - ln_factorial(s + mu)
            - ln_factorial(s + nu));
    let half = 0.5 * beta;
    eta * libm::exp(ln_ratio)
        * powi(libm::sin(half), mu)
        * powi(libm::cos(half), nu)
        * jacobi(s, mu, nu, libm::cos(beta))
}

/// Complex Wigner-D function `e^{−i m1 α} d^n_{m1,m2}(β) e^{−i m2 γ}`.
pub fn wigner_big_d(n: i32, m1: i32, m2: i32, alpha: f64, beta: f64, gamma: f64) -> Result<Complex64> {
    let d = wigner_d(n, m1, m2, beta)?;
    Ok(Complex64::from_polar(d, -(m1 as f64) * alpha - (m2 as f64) * gamma))
}

/// The `(2n+1)×(2n+1)` block `d^n(β)`, row-major with rows `m1 = −n..=n`
/// and columns `m2 = −n..=n`.
pub fn wigner_d_block(n: u32, beta: f64) -> Vec<f64> {
    let dim = 2 * n as usize + 1;
    let ni = n as i32;
    let mut out = vec![0.0; dim * dim];
    for (r, m1) in (-ni..=ni).enumerate() {
        for (c, m2) in (-ni..=ni).enumerate() {
            out[r * dim + c] = wigner_d_unchecked(n, m1, m2, beta);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn acn_examples() {
        assert_eq!(acn_index(0, 0).unwrap(), 0);
        assert_eq!(acn_index(1, -1).unwrap(), 1);
        assert_eq!(acn_index(2, 2).unwrap(), 8);
        assert_eq!(
            acn_index(1, 2).unwrap_err(),
            Error::InvalidDegree { n: 1, m: 2 }
        );
    }

    #[test]
    fn acn_is_enumeration_order() {
        for (pos, idx) in indices(9).enumerate() {
            assert_eq!(idx.linear(), pos);
            assert_eq!(ShIndex::from_linear(pos), idx);
        }
        assert_eq!(indices(9).count(), coeff_count(9));
    }

    #[test]
    fn harmonic_reference_values() {
        let y00 = sph_harm(0, 0, 1.1, -2.3).unwrap();
        assert_abs_diff_eq!(y00.re, 1.0 / libm::sqrt(4.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(y00.im, 0.0, epsilon = 1e-15);
        let y10 = sph_harm(1, 0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(y10.re, libm::sqrt(3.0 / (4.0 * PI)), epsilon = 1e-15);
        assert!(sph_harm(2, 3, 0.1, 0.1).is_err());
    }

    #[test]
    fn harmonic_closed_forms_low_order() {
        // Y_1^1 = −sqrt(3/8π) sinθ e^{iφ}; Y_2^1 = −sqrt(15/8π) sinθ cosθ e^{iφ};
        // Y_2^2 = sqrt(15/32π) sin²θ e^{2iφ}
        let (t, p) = (0.7, 1.9);
        let e1 = Complex64::from_polar(1.0, p);
        let e2 = Complex64::from_polar(1.0, 2.0 * p);
        let y11 = -e1 * libm::sqrt(3.0 / (8.0 * PI)) * libm::sin(t);
        let y21 = -e1 * libm::sqrt(15.0 / (8.0 * PI)) * libm::sin(t) * libm::cos(t);
        let y22 = e2 * libm::sqrt(15.0 / (32.0 * PI)) * libm::sin(t) * libm::sin(t);
        assert!((sph_harm(1, 1, t, p).unwrap() - y11).norm() < 1e-14);
        assert!((sph_harm(2, 1, t, p).unwrap() - y21).norm() < 1e-14);
        assert!((sph_harm(2, 2, t, p).unwrap() - y22).norm() < 1e-14);
        // Y_1^{-1} = +sqrt(3/8π) sinθ e^{−iφ}
        let y1m1 = e1.conj() * libm::sqrt(3.0 / (8.0 * PI)) * libm::sin(t);
        assert!((sph_harm(1, -1, t, p).unwrap() - y1m1).norm() < 1e-14);
    }

    #[test]
    fn batch_matches_single() {
        let (t, p) = (2.2, -0.4);
        let all = sph_harm_all(7, t, p);
        for idx in indices(7) {
            let single = sph_harm(idx.n as i32, idx.m, t, p).unwrap();
            assert!((all[idx.linear()] - single).norm() < 1e-14);
        }
    }

    #[test]
    fn bessel_reference_values() {
        assert_eq!(sph_bessel_j(0, 0.0), 1.0);
        assert_eq!(sph_bessel_j(1, 0.0), 0.0);
        assert_abs_diff_eq!(sph_bessel_j(0, 1.0), libm::sin(1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(sph_bessel_j(0, 1.0), 0.841471, epsilon = 1e-6);
    }

    #[test]
    fn bessel_matches_closed_forms() {
        for &x in &[0.01, 0.3, 0.99, 1.0, 2.5, 7.0, 19.3, 40.0] {
            let j = sph_bessel_j_all(3, x);
            let (s, c) = (libm::sin(x), libm::cos(x));
            let j0 = s / x;
            let j1 = s / (x * x) - c / x;
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            assert_abs_diff_eq!(j[0], j0, epsilon = 1e-14);
            if x < 0.1 {
                // closed forms cancel catastrophically here; use the leading terms
                let x2 = x * x;
                let j1s = x / 3.0 - x * x2 / 30.0 + x * x2 * x2 / 840.0;
                let j2s = x2 / 15.0 - x2 * x2 / 210.0 + x2 * x2 * x2 / 7560.0;
                assert!((j[1] - j1s).abs() < 1e-13 * x);
                assert!((j[2] - j2s).abs() < 1e-13 * x2);
            } else {
                assert_abs_diff_eq!(j[1], j1, epsilon = 1e-13);
                assert_abs_diff_eq!(j[2], j2, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn bessel_cross_product_identity() {
        // j_n y_{n−1} − j_{n−1} y_n = 1/x²
        for &x in &[0.5, 1.5, 3.3, 9.0] {
            let j = sph_bessel_j_all(12, x);
            let y = sph_bessel_y_all(12, x);
            for n in 1..=12 {
                let w = j[n] * y[n - 1] - j[n - 1] * y[n];
                assert!((w * x * x - 1.0).abs() < 1e-9, "n={n} x={x} w={w}");
            }
        }
    }

    #[test]
    fn bessel_series_and_recurrence_agree_at_switch() {
        let below = sph_bessel_j_all(20, 1.0 - 1e-12);
        let above = sph_bessel_j_all(20, 1.0);
        for n in 0..=20 {
            let scale = above[n].abs().max(1e-300);
            assert!((below[n] - above[n]).abs() / scale < 1e-9, "n={n}");
        }
    }

    #[test]
    fn legendre_low_orders() {
        let x = 0.37;
        let p = legendre_all(3, x);
        assert_abs_diff_eq!(p[2], 0.5 * (3.0 * x * x - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p[3], 0.5 * (5.0 * x * x * x - 3.0 * x), epsilon = 1e-15);
    }

    #[test]
    fn three_j_examples() {
        assert_eq!(wigner_3j(1, 1, 1, 1, 1, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(wigner_3j(0, 0, 0, 0, 0, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            wigner_3j(1, 1, 0, 1, -1, 0).unwrap(),
            1.0 / libm::sqrt(3.0),
            epsilon = 1e-15
        );
        assert_eq!(wigner_3j(-1, 1, 0, 0, 0, 0), Err(Error::InvalidOrder(-1)));
    }

    #[test]
    fn small_d_examples() {
        for n in 0..6 {
            for m in -n..=n {
                assert_abs_diff_eq!(wigner_d(n, m, m, 0.0).unwrap(), 1.0, epsilon = 1e-14);
            }
        }
        for &b in &[0.0, 0.3, 1.7, 3.1] {
            assert_abs_diff_eq!(wigner_d(1, 0, 0, b).unwrap(), libm::cos(b), epsilon = 1e-15);
            // d^1_{1,0} = −sinβ/√2
            assert_abs_diff_eq!(
                wigner_d(1, 1, 0, b).unwrap(),
                -libm::sin(b) / libm::sqrt(2.0),
                epsilon = 1e-15
            );
            // d^1_{1,1} = (1+cosβ)/2, d^1_{1,−1} = (1−cosβ)/2
            assert_abs_diff_eq!(
                wigner_d(1, 1, 1, b).unwrap(),
                0.5 * (1.0 + libm::cos(b)),
                epsilon = 1e-15
            );
            assert_abs_diff_eq!(
                wigner_d(1, 1, -1, b).unwrap(),
                0.5 * (1.0 - libm::cos(b)),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn big_d_examples() {
        for n in 0..5 {
            for m1 in -n..=n {
                for m2 in -n..=n {
                    let v = wigner_big_d(n, m1, m2, 0.0, 0.0, 0.0).unwrap();
                    let want = if m1 == m2 { 1.0 } else { 0.0 };
                    assert!((v - Complex64::new(want, 0.0)).norm() < 1e-14);
                    let a = 0.83;
                    let v = wigner_big_d(n, m1, m2, a, 0.0, 0.0).unwrap();
                    let want = if m1 == m2 {
                        Complex64::from_polar(1.0, -(m1 as f64) * a)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    assert!((v - want).norm() < 1e-14);
                }
            }
        }
    }
}
