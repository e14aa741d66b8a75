//! Covariance estimation, frequency smoothing, SH-MUSIC, peak picking and
//! error metrics.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{hermitian_eigen, singular_values, CMatrix};
use crate::motion::unit_vector;
use crate::pwd::PwdEstimate;
use crate::sh::{coeff_count, sph_harm_all};
use crate::{Error, Result};

/// Default MUSIC grid resolution in degrees.
pub const DEFAULT_GRID_DEG: f64 = 2.0;

/// `Q(ω) = (1/J) Σ_j â_j â_j^H` at one analysed bin.
pub fn covariance(pwd: &PwdEstimate, bin_index: usize) -> Result<CMatrix> {
    let est = pwd.coeffs.get(bin_index).ok_or_else(|| {
        Error::InvalidParameter(alloc::format!("no estimates for bin index {bin_index}"))
    })?;
    if est.is_empty() {
        return Err(Error::InsufficientData("no PWD estimates at this bin".into()));
    }
    let dim = est[0].len();
    let mut q = CMatrix::zeros(dim, dim);
    for a in est {
        q += a * a.adjoint();
    }
    Ok(q / Complex64::new(est.len() as f64, 0.0))
}

/// Frequency-averaged covariance `Q̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCovariance {
    pub matrix: CMatrix,
    pub bins: Vec<usize>,
    pub frame_count: usize,
    /// Averaged theoretical noise covariance, when known.
    pub noise: Option<CMatrix>,
}

/// Arithmetic mean of per-bin covariances.
pub fn freq_smooth(qs: &[CMatrix], bins: &[usize], frame_count: usize) -> Result<SmoothedCovariance> {
    if qs.is_empty() || bins.is_empty() {
        return Err(Error::Config("frequency smoothing needs at least one bin".into()));
    }
    if qs.len() != bins.len() {
        return Err(Error::Config(alloc::format!(
            "{} covariances for {} bins",
            qs.len(),
            bins.len()
        )));
    }
    Ok(SmoothedCovariance {
        matrix: mean(qs),
        bins: bins.to_vec(),
        frame_count,
        noise: None,
    })
}

fn mean(ms: &[CMatrix]) -> CMatrix {
    let mut acc = CMatrix::zeros(ms[0].nrows(), ms[0].ncols());
    for m in ms {
        acc += m;
    }
    acc / Complex64::new(ms.len() as f64, 0.0)
}

/// Covariance of every analysed bin, smoothed uniformly, with the averaged
/// noise covariance attached.
pub fn smoothed_covariance(pwd: &PwdEstimate) -> Result<SmoothedCovariance> {
    let qs = (0..pwd.bins.len())
        .map(|b| covariance(pwd, b))
        .collect::<Result<Vec<_>>>()?;
    let mut s = freq_smooth(&qs, &pwd.bins, pwd.estimate_count())?;
    if !pwd.noise_covariance.is_empty() {
        s.noise = Some(mean(&pwd.noise_covariance));
    }
    Ok(s)
}

/// Equiangular direction grid with single points at the poles and the
/// SH direction vectors `y = conj(Y(θ, φ))` cached per point.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicGrid {
    resolution_deg: f64,
    rows: usize,
    cols: usize,
    points: Vec<(f64, f64)>,
    order: u32,
    directions: CMatrix,
}

impl MusicGrid {
    /// `resolution_deg` must divide 180.
    pub fn new(order: u32, resolution_deg: f64) -> Result<Self> {
        let steps = 180.0 / resolution_deg;
        if !(resolution_deg > 0.0) || (steps - libm::round(steps)).abs() > 1e-9 || steps < 2.0 {
            return Err(Error::Config(alloc::format!(
                "grid resolution {resolution_deg}° must divide 180° into at least two steps"
            )));
        }
        let steps = libm::round(steps) as usize;
        let rows = steps + 1;
        let cols = 2 * steps;
        let step = PI / steps as f64;
        let mut points = Vec::with_capacity(2 + (rows - 2) * cols);
        points.push((0.0, 0.0));
        for k in 1..rows - 1 {
            for j in 0..cols {
                points.push((k as f64 * step, j as f64 * step));
            }
        }
        points.push((PI, 0.0));
        let dim = coeff_count(order);
        let mut directions = CMatrix::zeros(dim, points.len());
        for (g, &(t, p)) in points.iter().enumerate() {
            for (i, y) in sph_harm_all(order, t, p).into_iter().enumerate() {
                directions[(i, g)] = y.conj();
            }
        }
        Ok(Self {
            resolution_deg,
            rows,
            cols,
            points,
            order,
            directions,
        })
    }

    pub fn resolution_deg(&self) -> f64 {
        self.resolution_deg
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Largest angular distance from any direction to its nearest grid
    /// point, in degrees (half the diagonal of an equatorial cell).
    pub fn cell_radius_deg(&self) -> f64 {
        self.resolution_deg * core::f64::consts::FRAC_1_SQRT_2
    }

    fn row_col(&self, idx: usize) -> (usize, usize) {
        if idx == 0 {
            (0, 0)
        } else if idx == self.points.len() - 1 {
            (self.rows - 1, 0)
        } else {
            (1 + (idx - 1) / self.cols, (idx - 1) % self.cols)
        }
    }

    fn index(&self, row: usize, col: usize) -> usize {
        if row == 0 {
            0
        } else if row == self.rows - 1 {
            self.points.len() - 1
        } else {
            1 + (row - 1) * self.cols + col % self.cols
        }
    }

    /// Distinct 8-neighbours, with azimuth wrap-around; a pole borders
    /// every point of the adjacent ring.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let (row, col) = self.row_col(idx);
        let mut out = Vec::with_capacity(8);
        if row == 0 || row == self.rows - 1 {
            let ring = if row == 0 { 1 } else { self.rows - 2 };
            if ring == 0 || ring == self.rows - 1 {
                out.push(self.index(ring, 0));
            } else {
                out.extend((0..self.cols).map(|c| self.index(ring, c)));
            }
            return out;
        }
        for r in [row - 1, row, row + 1] {
            for dc in [self.cols - 1, 0, 1] {
                let c = (col + dc) % self.cols;
                let n = self.index(r, c);
                if n != idx && !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }
}

/// MUSIC pseudo-spectrum on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicSpectrum<'g> {
    pub grid: &'g MusicGrid,
    pub values: Vec<f64>,
    pub sources: usize,
}

impl<'g> MusicSpectrum<'g> {
    pub fn from_values(grid: &'g MusicGrid, values: Vec<f64>, sources: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            sources,
        })
    }

    /// Grid point with the largest value (smallest index on ties).
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        self.grid.points[best]
    }
}

/// `N^{-1/2}` scaled so that `N` has unit trace.
fn inverse_sqrt(noise: &CMatrix) -> CMatrix {
    let tr = noise.trace().re;
    let (vals, vecs) = hermitian_eigen(&(noise / Complex64::new(tr, 0.0)));
    let top = vals.last().copied().unwrap_or(1.0);
    let floor = top * 1e-12;
    let dim = noise.nrows();
    let mut d = CMatrix::zeros(dim, dim);
    for (i, &l) in vals.iter().enumerate() {
        d[(i, i)] = Complex64::new(1.0 / libm::sqrt(l.max(floor)), 0.0);
    }
    &vecs * d * vecs.adjoint()
}

/// `P(θ, φ) = 1 / ‖E_n^H y(θ, φ)‖²` with `E_n` spanning the eigenvectors of
/// the `(N+1)² − S` smallest eigenvalues.
///
/// Eigenvalues tied with the largest noise eigenvalue (relative tolerance
/// `1e−9`) join the noise subspace, so the result never depends on the
/// basis chosen inside a degenerate block. With `whiten`, `Q̃` and `y` are
/// first multiplied by `N^{-1/2}` of the attached noise covariance.
pub fn music_spectrum<'g>(
    qs: &SmoothedCovariance,
    sources: usize,
    grid: &'g MusicGrid,
    whiten: bool,
) -> Result<MusicSpectrum<'g>> {
    let dim = qs.matrix.nrows();
    if sources >= dim {
        return Err(Error::InvalidSourceCount { sources, dim });
    }
    if grid.directions.nrows() != dim {
        return Err(Error::Config(alloc::format!(
            "grid is built for order {} but the covariance has dimension {dim}",
            grid.order
        )));
    }
    let w = if whiten {
        let noise = qs.noise.as_ref().ok_or_else(|| {
            Error::Config("whitening requested without a noise covariance".into())
        })?;
        Some(inverse_sqrt(noise))
    } else {
        None
    };
    let q = match &w {
        Some(w) => w * &qs.matrix * w,
        None => qs.matrix.clone(),
    };
    let (vals, vecs) = hermitian_eigen(&q);
    let top = vals.last().copied().unwrap_or(0.0).abs();
    let boundary = vals[dim - sources - 1];
    let tol = 1e-9 * top.max(f64::MIN_POSITIVE);
    let noise_dim = vals.iter().filter(|&&l| l <= boundary + tol).count();
    let en = vecs.columns(0, noise_dim);
    let proj = match &w {
        Some(w) => en.adjoint() * w,
        None => en.adjoint().into_owned(),
    };
    let b = proj * &grid.directions;
    let values = b
        .column_iter()
        .map(|c| 1.0 / c.norm_squared().max(1e-300))
        .collect();
    Ok(MusicSpectrum {
        grid,
        values,
        sources,
    })
}

/// Picked directions of arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaResult {
    /// `(theta, phi)` in radians, strongest first.
    pub estimates: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    /// Fewer local maxima than requested sources were found.
    pub shortfall: bool,
}

/// The `S` largest local maxima (value at least every 8-neighbour and
/// strictly above one), ordered by value and then grid index. Values within
/// `1e−12` of the spectrum maximum are compared as equal.
pub fn pick_peaks(spec: &MusicSpectrum<'_>, sources: usize) -> Result<DoaResult> {
    if sources == 0 {
        return Err(Error::InvalidParameter("at least one source must be requested".into()));
    }
    let v = &spec.values;
    let tol = 1e-12 * v.iter().copied().fold(0.0, f64::max);
    let mut peaks: Vec<usize> = (0..v.len())
        .filter(|&i| {
            let nb = spec.grid.neighbors(i);
            nb.iter().all(|&n| v[i] >= v[n] - tol) && nb.iter().any(|&n| v[i] > v[n] + tol)
        })
        .collect();
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let shortfall = peaks.len() < sources;
    peaks.truncate(sources);
    Ok(DoaResult {
        estimates: peaks.iter().map(|&i| spec.grid.points[i]).collect(),
        values: peaks.iter().map(|&i| v[i]).collect(),
        shortfall,
    })
}

/// `exp(−Σ p_i ln p_i)` with `p_i = σ_i / Σσ`.
pub fn effective_rank(a: &CMatrix) -> Result<f64> {
    let sv = singular_values(a);
    let total: f64 = sv.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedRank);
    }
    let h: f64 = sv
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * libm::log(p))
        .sum();
    Ok(libm::exp(h))
}

/// Great-circle angle between two directions `(theta, phi)` in radians,
/// returned in degrees.
pub fn doa_error_angle(est: (f64, f64), truth: (f64, f64)) -> f64 {
    let c = unit_vector(est.0, est.1).dot(&unit_vector(truth.0, truth.1));
    libm::acos(c.clamp(-1.0, 1.0)).to_degrees()
}

/// Sample mean and sample standard deviation (`n − 1` denominator; zero for
/// a single value).
pub fn error_stats(errors: &[f64]) -> Result<(f64, f64)> {
    if errors.is_empty() {
        return Err(Error::InsufficientData("no error values".into()));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    if errors.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, libm::sqrt(var)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{direction_of, rotation_matrix, EulerAngles};
    use crate::pwd::Method;
    use crate::sh::ShVector;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn estimate(vectors: Vec<crate::CVector>, order: u32) -> PwdEstimate {
        PwdEstimate {
            method: Method::Stationary,
            order,
            bins: vec![1],
            coeffs: vec![vectors],
            noise_covariance: vec![],
            min_rank: coeff_count(order),
        }
    }

    #[test]
    fn covariance_contract() {
        let a = ShVector::plane_wave(2, 0.5, 0.5).into_coeffs();
        let one = covariance(&estimate(vec![a.clone()], 2), 0).unwrap();
        assert_eq!(crate::linalg::singular_values(&one).iter().filter(|&&s| s > 1e-12).count(), 1);
        let three = covariance(&estimate(vec![a.clone(); 3], 2), 0).unwrap();
        assert!(crate::linalg::frobenius(&(&three - &one)) < 1e-15);
        let b = a.map(|z| z * 2.0);
        let q = covariance(&estimate(vec![a.clone(), b.clone()], 2), 0).unwrap();
        assert_abs_diff_eq!(q.trace().re, 0.5 * (a.norm_squared() + b.norm_squared()), epsilon = 1e-12);
        assert!(matches!(covariance(&estimate(vec![], 2), 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn smoothing_contract() {
        let q = CMatrix::identity(4, 4);
        let s = freq_smooth(core::slice::from_ref(&q), &[3], 1).unwrap();
        assert_eq!(s.matrix, q);
        let s = freq_smooth(&[q.clone(), q.clone()], &[3, 4], 1).unwrap();
        assert_eq!(s.matrix, q);
        assert!(matches!(freq_smooth(&[], &[], 1), Err(Error::Config(_))));
    }

    fn smoothed(q: CMatrix) -> SmoothedCovariance {
        freq_smooth(&[q], &[1], 1).unwrap()
    }

    #[test]
    fn single_plane_wave_peak() {
        let grid = MusicGrid::new(3, 2.0).unwrap();
        let src = (1.0, 2.5);
        let a = ShVector::plane_wave(3, src.0, src.1).into_coeffs();
        let spec = music_spectrum(&smoothed(&a * a.adjoint()), 1, &grid, false).unwrap();
        assert!(spec.values.iter().all(|v| v.is_finite()));
        let best = spec.argmax();
        assert!(doa_error_angle(best, src) <= grid.cell_radius_deg() + 1e-9);
        let peaks = pick_peaks(&spec, 1).unwrap();
        assert_eq!(peaks.estimates[0], best);
    }

    #[test]
    fn isotropic_covariance_is_flat() {
        let grid = MusicGrid::new(3, 5.0).unwrap();
        let spec = music_spectrum(&smoothed(CMatrix::identity(16, 16)), 1, &grid, false).unwrap();
        let max = spec.values.iter().copied().fold(f64::MIN, f64::max);
        let min = spec.values.iter().copied().fold(f64::MAX, f64::min);
        assert!(max / min < 1.0 + 1e-6);
        let peaks = pick_peaks(&spec, 1).unwrap();
        assert!(peaks.shortfall);
        assert!(music_spectrum(&smoothed(CMatrix::identity(16, 16)), 16, &grid, false).is_err());
    }

    #[test]
    fn rotated_field_rotates_argmax() {
        let grid = MusicGrid::new(3, 2.0).unwrap();
        let src = (1.2, 0.6);
        let angles = EulerAngles::new(0.0, 0.5, 0.9).unwrap();
        let a = ShVector::plane_wave(3, src.0, src.1);
        let rotated = rotation_matrix(3, angles).apply(&a).unwrap().into_coeffs();
        let noise = CMatrix::identity(16, 16) * Complex64::new(1e-3, 0.0);
        let spec = music_spectrum(&smoothed(&rotated * rotated.adjoint() + noise), 1, &grid, false).unwrap();
        let want = direction_of(&(angles.to_matrix() * unit_vector(src.0, src.1)));
        assert!(doa_error_angle(spec.argmax(), want) <= grid.cell_radius_deg() + 1e-9);
    }

    #[test]
    fn scaling_leaves_argmax() {
        let grid = MusicGrid::new(2, 4.0).unwrap();
        let a = ShVector::plane_wave(2, 2.0, -1.0).into_coeffs();
        let q = &a * a.adjoint() + CMatrix::identity(9, 9) * Complex64::new(0.1, 0.0);
        let s1 = music_spectrum(&smoothed(q.clone()), 1, &grid, false).unwrap();
        let s2 = music_spectrum(&smoothed(q * Complex64::new(37.0, 0.0)), 1, &grid, false).unwrap();
        assert_eq!(s1.argmax(), s2.argmax());
    }

    #[test]
    fn whitening_with_white_noise_is_neutral() {
        let grid = MusicGrid::new(2, 4.0).unwrap();
        let a = ShVector::plane_wave(2, 0.7, 1.0).into_coeffs();
        let mut s = smoothed(&a * a.adjoint() + CMatrix::identity(9, 9) * Complex64::new(0.2, 0.0));
        s.noise = Some(CMatrix::identity(9, 9) * Complex64::new(3.0, 0.0));
        let w = music_spectrum(&s, 1, &grid, true).unwrap();
        let p = music_spectrum(&s, 1, &grid, false).unwrap();
        assert_eq!(w.argmax(), p.argmax());
    }

    #[test]
    fn peak_picking_rules() {
        let grid = MusicGrid::new(1, 10.0).unwrap();
        let n = grid.len();
        let mut vals = vec![1.0; n];
        // antipodal equal peaks: north pole and south pole
        vals[0] = 5.0;
        vals[n - 1] = 5.0;
        let spec = MusicSpectrum::from_values(&grid, vals, 2).unwrap();
        let peaks = pick_peaks(&spec, 2).unwrap();
        assert_eq!(peaks.estimates, vec![(0.0, 0.0), (PI, 0.0)]);
        assert!(!peaks.shortfall);
        let one = pick_peaks(&spec, 1).unwrap();
        assert_eq!(one.estimates, vec![(0.0, 0.0)]);
        let flat = MusicSpectrum::from_values(&grid, vec![2.0; n], 1).unwrap();
        let r = pick_peaks(&flat, 1).unwrap();
        assert!(r.shortfall && r.estimates.is_empty());
        // azimuth wraps: a peak at φ = 0 borders φ = 350°
        let mut vals = vec![1.0; n];
        let (row, col_last) = (5usize, grid.cols - 1);
        vals[grid.index(row, 0)] = 3.0;
        vals[grid.index(row, col_last)] = 4.0;
        let spec = MusicSpectrum::from_values(&grid, vals, 1).unwrap();
        let r = pick_peaks(&spec, 2).unwrap();
        assert_eq!(r.estimates.len(), 1);
        assert!(r.shortfall);
    }

    #[test]
    fn grid_layout() {
        let g = MusicGrid::new(2, 2.0).unwrap();
        assert_eq!(g.len(), 2 + 89 * 180);
        assert_eq!(g.neighbors(0).len(), 180);
        assert_eq!(g.neighbors(1).len(), 6);
        assert_eq!(g.neighbors(1 + 180 * 10 + 5).len(), 8);
        assert!(MusicGrid::new(2, 7.0).is_err());
    }

    #[test]
    fn effective_rank_examples() {
        assert_abs_diff_eq!(effective_rank(&CMatrix::identity(5, 5)).unwrap(), 5.0, epsilon = 1e-12);
        let a = ShVector::plane_wave(2, 0.3, 0.3).into_coeffs();
        assert_abs_diff_eq!(effective_rank(&(&a * a.adjoint())).unwrap(), 1.0, epsilon = 1e-9);
        assert_eq!(effective_rank(&CMatrix::zeros(3, 3)), Err(Error::UndefinedRank));
    }

    #[test]
    fn error_angle_examples() {
        let d = PI / 180.0;
        assert_abs_diff_eq!(doa_error_angle((0.4, 1.0), (0.4, 1.0)), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(doa_error_angle((0.0, 0.0), (PI, 0.0)), 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(doa_error_angle((90.0 * d, 0.0), (90.0 * d, 90.0 * d)), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn error_stats_examples() {
        assert_eq!(error_stats(&[5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
        let (m, s) = error_stats(&[0.0, 10.0]).unwrap();
        assert_eq!(m, 5.0);
        assert_abs_diff_eq!(s, 50f64.sqrt(), epsilon = 1e-12);
        assert_eq!(error_stats(&[3.0; 60]).unwrap().1, 0.0);
        assert!(error_stats(&[]).is_err());
    }
}
