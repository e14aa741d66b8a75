//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Moore–Penrose pseudo-inverse together with the spectrum it was built from.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: CMatrix,
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    /// Number of singular values that were inverted.
    pub rank: usize,
    /// Inversion cut-off actually applied (absolute).
    pub cutoff: f64,
}

impl PseudoInverse {
    /// Ratio of the largest to the smallest inverted singular value.
    pub fn condition(&self) -> f64 {
        if self.rank == 0 {
            return f64::INFINITY;
        }
        self.singular_values[0] / self.singular_values[self.rank - 1]
    }
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Pseudo-inverse with the conventional numerical-rank tolerance
/// `max(rows, cols) · ε · σ_max`.
pub fn pinv(a: &CMatrix) -> PseudoInverse {
    pinv_with(a, |smax| a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax)
}

/// Pseudo-inverse inverting only singular values strictly greater than
/// `fraction · σ_max` and above the [`pinv`] tolerance.
pub fn pinv_relative(a: &CMatrix, fraction: f64) -> PseudoInverse {
    let floor = a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    pinv_with(a, |smax| fraction.max(floor) * smax)
}

fn pinv_with(a: &CMatrix, cutoff: impl Fn(f64) -> f64) -> PseudoInverse {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return PseudoInverse {
            matrix: CMatrix::zeros(n, m),
            singular_values: Vec::new(),
            rank: 0,
            cutoff: 0.0,
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;

    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let cut = cutoff(smax);
    let mut out = CMatrix::zeros(n, m);
    let mut rank = 0;
    for (idx, &s) in sv.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            let inv = 1.0 / s;
            // out += v_i · (1/σ_i) · u_i^H
            let v_col = v_t.row(idx).adjoint();
            let u_col = u.column(idx);
            for c in 0..m {
                let uc = u_col[c].conj() * inv;
                for r in 0..n {
                    out[(r, c)] += v_col[r] * uc;
                }
            }
        }
    }
    let mut values: Vec<f64> = sv.iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    PseudoInverse {
        matrix: out,
        singular_values: values,
        rank,
        cutoff: cut,
    }
}

/// Frobenius norm.
pub fn frobenius<R: Dim, C: Dim, S: RawStorage<Complex64, R, C>>(a: &Matrix<Complex64, R, C, S>) -> f64 {
    libm::sqrt(a.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending (stable with respect to the solver's output order).
pub fn hermitian_eigen(q: &CMatrix) -> (Vec<f64>, CMatrix) {
    let dim = q.nrows();
    // Symmetrize to remove round-off asymmetry before the solver.
    let sym = (q + q.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `‖a‖_F` of `a − b` divided by `‖b‖_F`.
pub fn relative_error<R: Dim, C: Dim, S1, S2>(
    a: &Matrix<Complex64, R, C, S1>,
    b: &Matrix<Complex64, R, C, S2>,
) -> f64
where
    S1: RawStorage<Complex64, R, C>,
    S2: RawStorage<Complex64, R, C>,
{
    let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    libm::sqrt(diff) / frobenius(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(m: usize, n: usize, seed: u64) -> CMatrix {
        let mut state = seed;
        CMatrix::from_fn(m, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            Complex64::new(a, b)
        })
    }

    #[test]
    fn penrose_conditions_hold() {
        for (m, n) in [(6, 4), (4, 9), (5, 5)] {
            let a = sample(m, n, (m * 31 + n) as u64);
            let p = pinv(&a).matrix;
            assert!(relative_error(&(&p * &a * &p), &p) < 1e-9);
            assert!(relative_error(&(&a * &p * &a), &a) < 1e-9);
            let ap = &a * &p;
            assert!(relative_error(&ap.adjoint(), &ap) < 1e-9);
            let pa = &p * &a;
            assert!(relative_error(&pa.adjoint(), &pa) < 1e-9);
        }
    }

    #[test]
    fn relative_threshold_counts() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(alloc::vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.3, 0.0),
        ]));
        assert_eq!(pinv_relative(&a, 1.0 / 3.0).rank, 2);
        assert_eq!(pinv_relative(&a, 0.0).rank, 3);
    }

    #[test]
    fn eigenvalues_ascending() {
        let a = sample(5, 5, 3);
        let h = &a * a.adjoint();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let recon = &vecs
            * CMatrix::from_diagonal(&CVector::from_iterator(
                5,
                vals.iter().map(|&v| Complex64::new(v, 0.0)),
            ))
            * vecs.adjoint();
        assert!(relative_error(&recon, &h) < 1e-10);
    }
}
