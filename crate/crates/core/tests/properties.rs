use std::f64::consts::PI;

use proptest::prelude::*;

use shmotion_core::linalg::{frobenius, pinv, singular_values};
use shmotion_core::motion::{rotation_matrix, unit_vector, EulerAngles};
use shmotion_core::music::{effective_rank, music_spectrum, MusicGrid, SmoothedCovariance};
use shmotion_core::sh::{coeff_count, legendre_all, sph_harm, wigner_3j};
use shmotion_core::spectral::{time_align, time_unalign, StftFrames, StftParams, Window};
use shmotion_core::{CMatrix, Complex64};

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn polar() -> impl Strategy<Value = f64> {
    0.0..=PI
}

fn euler() -> impl Strategy<Value = EulerAngles> {
    (angle(), polar(), angle()).prop_map(|(a, b, c)| EulerAngles::new(a, b, c).unwrap())
}

fn cmatrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        CMatrix::from_iterator(rows, cols, v.into_iter().map(|(re, im)| Complex64::new(re, im)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn addition_theorem(n in 0u32..8, t1 in polar(), p1 in angle(), t2 in polar(), p2 in angle()) {
        let ni = n as i32;
        let sum: Complex64 = (-ni..=ni)
            .map(|m| sph_harm(ni, m, t1, p1).unwrap() * sph_harm(ni, m, t2, p2).unwrap().conj())
            .sum();
        let cos = unit_vector(t1, p1).dot(&unit_vector(t2, p2));
        let want = (2 * n + 1) as f64 / (4.0 * PI) * legendre_all(n, cos)[n as usize];
        prop_assert!((sum - Complex64::new(want, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn three_j_symmetries(j1 in 0i32..6, j2 in 0i32..6, j3 in 0i32..6, m1 in -5i32..=5, m2 in -5i32..=5) {
        let m3 = -m1 - m2;
        prop_assume!(m1.abs() <= j1 && m2.abs() <= j2 && m3.abs() <= j3);
        let w = wigner_3j(j1, j2, j3, m1, m2, m3).unwrap();
        let cyclic = wigner_3j(j2, j3, j1, m2, m3, m1).unwrap();
        prop_assert!((w - cyclic).abs() < 1e-13);
        let parity = if (j1 + j2 + j3) % 2 == 0 { 1.0 } else { -1.0 };
        let swapped = wigner_3j(j2, j1, j3, m2, m1, m3).unwrap();
        prop_assert!((w - parity * swapped).abs() < 1e-13);
        let flipped = wigner_3j(j1, j2, j3, -m1, -m2, -m3).unwrap();
        prop_assert!((w - parity * flipped).abs() < 1e-13);
    }

    #[test]
    fn rotation_inverse_and_composition(a in euler(), b in euler(), n in 0u32..7) {
        let ra = rotation_matrix(n, a).matrix;
        let dim = coeff_count(n);
        let back = &rotation_matrix(n, a.inverse()).matrix * &ra;
        prop_assert!(frobenius(&(back - CMatrix::identity(dim, dim))) < 1e-10);
        let ab = EulerAngles::from_matrix(&(a.to_matrix() * b.to_matrix()));
        let composed = &ra * &rotation_matrix(n, b).matrix;
        prop_assert!(frobenius(&(rotation_matrix(n, ab).matrix - composed)) < 1e-9);
    }

    #[test]
    fn pinv_penrose_conditions(a in cmatrix(4, 9)) {
        let p = pinv(&a).matrix;
        let scale = frobenius(&a).max(1.0);
        prop_assert!(frobenius(&(&a * &p * &a - &a)) < 1e-10 * scale);
        prop_assert!(frobenius(&(&p * &a * &p - &p)) < 1e-10 * frobenius(&p).max(1.0));
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!(frobenius(&(&ap - ap.adjoint())) < 1e-10);
        prop_assert!(frobenius(&(&pa - pa.adjoint())) < 1e-10);
    }

    #[test]
    fn effective_rank_bounds_and_invariances(a in cmatrix(5, 7), s in 0.01..100.0f64, r in euler()) {
        let e = effective_rank(&a).unwrap();
        prop_assert!((1.0 - 1e-12..=5.0 + 1e-12).contains(&e));
        let scaled = effective_rank(&(&a * Complex64::new(0.0, s))).unwrap();
        prop_assert!((e - scaled).abs() < 1e-9);
        // unitary mixing of the 4 columns of an order-1 block leaves the spectrum alone
        let u = rotation_matrix(1, r).matrix;
        let mut rotated = a.clone();
        let block = a.columns(0, 4) * &u;
        rotated.columns_mut(0, 4).copy_from(&block);
        prop_assert!((e - effective_rank(&rotated).unwrap()).abs() < 1e-9);
        let sv = singular_values(&a);
        prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn align_then_unalign_is_identity(vals in prop::collection::vec(-1.0..1.0f64, 2 * 3 * 2 * 33), reference in 0usize..3) {
        let params = StftParams::new(64, 32, Window::Hann, 8000.0).unwrap();
        let mut f = StftFrames::zeros(params, 2, 3);
        let mut it = vals.chunks(2);
        for i in 0..3 {
            for m in 0..2 {
                for b in 0..33 {
                    let c = it.next().unwrap();
                    f.set(i, m, b, Complex64::new(c[0], c[1]));
                }
            }
        }
        let round = time_unalign(&time_align(&f, reference).unwrap(), reference).unwrap();
        for i in 0..3 {
            for m in 0..2 {
                for b in 0..33 {
                    prop_assert!((round.get(i, m, b) - f.get(i, m, b)).norm() < 1e-14);
                }
            }
            let aligned = time_align(&f, reference).unwrap();
            if i == reference {
                prop_assert_eq!(aligned.spectrum(i, 0), f.spectrum(i, 0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn music_is_scale_invariant(q in cmatrix(9, 9), s in 0.001..1000.0f64) {
        let grid = MusicGrid::new(2, 10.0).unwrap();
        let herm = &q * q.adjoint();
        let cov = |m: CMatrix| SmoothedCovariance { matrix: m, bins: vec![1], frame_count: 1, noise: None };
        let a = music_spectrum(&cov(herm.clone()), 2, &grid, false).unwrap();
        let b = music_spectrum(&cov(herm * Complex64::new(s, 0.0)), 2, &grid, false).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs());
        }
    }
}
