//! Global-phase canonicalization of unitaries.
//!
//! Two unitaries that differ by `e^{iθ}` map to the same special unitary:
//! first divide by the principal `N`-th root of the determinant, then pick
//! the `N`-th root of unity that moves the argument of the first nonzero
//! entry into `[0, 2π/N)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryMatrix, C64};

/// Magnitude below which an entry counts as zero when locating the anchor entry.
pub const NONZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalUnitary {
    pub matrix: UnitaryMatrix,
    /// Phase `φ` with `input = e^{iφ} · matrix`.
    pub source_phase: f64,
}

/// Row-major first entry with modulus above `tol`.
pub fn first_nonzero_index(m: &ComplexMatrix, tol: f64) -> Result<(usize, usize)> {
    m.as_slice()
        .iter()
        .position(|z| z.norm() > tol)
        .map(|k| (k / m.cols(), k % m.cols()))
        .ok_or(Error::Degenerate(tol))
}

/// Fold an angle into the window `[0, 2π/N)` by whole multiples of `2π/N`.
/// Returns the folded angle and the multiple removed.
fn fold_into_window(arg: f64, n: usize) -> (f64, i64) {
    let width = 2.0 * PI / n as f64;
    let k = (arg / width).floor();
    let mut folded = arg - k * width;
    let mut k = k as i64;
    // floor can land one step off when arg sits on a window edge
    if folded >= width {
        folded -= width;
        k += 1;
    } else if folded < 0.0 {
        folded += width;
        k -= 1;
    }
    (folded, k)
}

pub fn canonicalize(u: &UnitaryMatrix) -> CanonicalUnitary {
    let n = u.dim();
    let det = u
        .matrix()
        .determinant()
        .expect("unitary matrices are square");
    let det_phase = det.arg() / n as f64;
    let special = u.matrix().scale(C64::from_polar(1.0, -det_phase));

    let (r, col) = first_nonzero_index(&special, NONZERO_TOL)
        .expect("unitary rows always contain an entry of modulus >= 1/sqrt(N)");
    let (_, k) = fold_into_window(special[(r, col)].arg(), n);
    let root_phase = 2.0 * PI * k as f64 / n as f64;
    let matrix = special.scale(C64::from_polar(1.0, -root_phase));

    CanonicalUnitary {
        matrix: UnitaryMatrix::from_trusted(matrix),
        source_phase: det_phase + root_phase,
    }
}

/// Row-major interleaved `[Re u00, Im u00, Re u01, ...]`, length `2N²`.
pub fn feature_vector(c: &CanonicalUnitary) -> Vec<f64> {
    c.matrix
        .matrix()
        .as_slice()
        .iter()
        .flat_map(|z| [z.re, z.im])
        .collect()
}

/// Inverse of [`feature_vector`] for an `N×N` matrix.
pub fn matrix_from_features(features: &[f64]) -> Result<UnitaryMatrix> {
    if features.len() % 2 != 0 {
        return Err(Error::Dimension("odd feature length".into()));
    }
    let entries = features.len() / 2;
    let n = (entries as f64).sqrt().round() as usize;
    if n * n != entries {
        return Err(Error::Dimension(format!("{entries} entries is not a square count")));
    }
    let data = features.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
    UnitaryMatrix::new(ComplexMatrix::new(n, n, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_unitary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli_z() -> UnitaryMatrix {
        UnitaryMatrix::new(ComplexMatrix::from_diagonal(&[c(1., 0.), c(-1., 0.)])).unwrap()
    }

    /// Brute force: scan every SU(N) candidate `ω^k · V` and keep the one
    /// whose anchor argument lies in `[0, 2π/N)`.
    fn exhaustive_canonical(u: &UnitaryMatrix) -> ComplexMatrix {
        let n = u.dim();
        let det = u.matrix().determinant().unwrap();
        let v = u.matrix().scale(C64::from_polar(1.0, -det.arg() / n as f64));
        let (r, col) = first_nonzero_index(&v, NONZERO_TOL).unwrap();
        let width = 2.0 * PI / n as f64;
        let mut best: Option<(f64, ComplexMatrix)> = None;
        for k in 0..n {
            let cand = v.scale(C64::from_polar(1.0, -width * k as f64));
            let mut a = cand[(r, col)].arg();
            if a < 0.0 {
                a += 2.0 * PI;
            }
            if best.as_ref().is_none_or(|(b, _)| a < *b) {
                best = Some((a, cand));
            }
        }
        let (a, m) = best.unwrap();
        assert!(a < width + 1e-12);
        m
    }

    #[test]
    fn identity_is_canonical() {
        for n in 1..=3 {
            let id = UnitaryMatrix::identity(n);
            let cu = canonicalize(&id);
            assert!(cu.matrix.matrix().max_abs_diff(id.matrix()).unwrap() < 1e-14);
        }
    }

    #[test]
    fn global_phase_removed() {
        let u = UnitaryMatrix::identity(1).with_phase(PI / 7.0);
        let cu = canonicalize(&u);
        assert!(cu.matrix.matrix().max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-14);
        assert!((cu.source_phase - PI / 7.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_z_maps_to_diag_i_minus_i() {
        let cu = canonicalize(&pauli_z());
        let expected = ComplexMatrix::from_diagonal(&[c(0., 1.), c(0., -1.)]);
        assert!(cu.matrix.matrix().max_abs_diff(&expected).unwrap() < 1e-14);
        assert!(cu.matrix.matrix().max_abs_diff(&exhaustive_canonical(&pauli_z())).unwrap() < 1e-14);
    }

    #[test]
    fn first_nonzero_examples() {
        assert_eq!(first_nonzero_index(&ComplexMatrix::identity(4), NONZERO_TOL).unwrap(), (0, 0));
        let x = crate::linalg::tests::pauli_x();
        assert_eq!(first_nonzero_index(&x, NONZERO_TOL).unwrap(), (0, 1));
        let anti = ComplexMatrix::from_fn(4, 4, |i, j| if i + j == 3 { c(1., 0.) } else { c(0., 0.) });
        assert_eq!(first_nonzero_index(&anti, NONZERO_TOL).unwrap(), (0, 3));
        assert!(matches!(
            first_nonzero_index(&ComplexMatrix::zeros(2, 2), NONZERO_TOL),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn invariants_on_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in 0..300u64 {
            let n = 1 + (s as usize % 3);
            let u = random_unitary(n, s).unwrap();
            let cu = canonicalize(&u);
            let theta: f64 = rng.random_range(-10.0..10.0);
            let cv = canonicalize(&u.with_phase(theta));
            assert!(cu.matrix.matrix().max_abs_diff(cv.matrix.matrix()).unwrap() <= 1e-10);

            let det = cu.matrix.matrix().determinant().unwrap();
            assert!((det - 1.0).norm() <= 1e-9);

            let (r, col) = first_nonzero_index(cu.matrix.matrix(), NONZERO_TOL).unwrap();
            let a = cu.matrix[(r, col)].arg();
            assert!(a >= 0.0 && a < 2.0 * PI / u.dim() as f64);

            let again = canonicalize(&cu.matrix);
            assert!(again.matrix.matrix().max_abs_diff(cu.matrix.matrix()).unwrap() <= 1e-12);

            let brute = exhaustive_canonical(&u);
            assert!(cu.matrix.matrix().max_abs_diff(&brute).unwrap() <= 1e-12);

            let back = u.matrix().max_abs_diff(&cu.matrix.with_phase(cu.source_phase).into_matrix());
            assert!(back.unwrap() < 1e-12);
        }
    }

    #[test]
    fn features_layout_and_invariance() {
        let f = feature_vector(&canonicalize(&UnitaryMatrix::identity(1)));
        assert_eq!(f, vec![1., 0., 0., 0., 0., 0., 1., 0.]);
        let u = random_unitary(3, 42).unwrap();
        let a = feature_vector(&canonicalize(&u));
        let b = feature_vector(&canonicalize(&u.with_phase(2.5)));
        assert_eq!(a.len(), 128);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-10));
        let back = matrix_from_features(&a).unwrap();
        assert!(back.matrix().max_abs_diff(canonicalize(&u).matrix.matrix()).unwrap() == 0.0);
    }
}
