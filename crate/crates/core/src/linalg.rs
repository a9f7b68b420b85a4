//! Dense complex matrices, unitary metrics and Haar sampling.
//!
//! Storage is row-major. For an `n`-qubit operator, qubit 0 is the most
//! significant bit of the basis index (big-endian), so qubit `q` lives at
//! bit position `n - 1 - q`.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Max-entry tolerance on `U†U − I` accepted by [`UnitaryMatrix::new`].
pub const UNITARITY_TOL: f64 = 1e-10;

/// Largest register handled by the dense routines.
pub const MAX_QUBITS: usize = 8;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must have positive shape".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::Dimension("trace of a non-square matrix".into()));
        }
        Ok((0..self.rows).map(|i| self.data[i * self.cols + i]).sum())
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_same_shape(rhs)?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_same_shape(rhs)?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// Largest entrywise modulus of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> Result<f64> {
        self.check_same_shape(rhs)?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `Tr(A^H B)` without forming the product.
    pub fn inner(&self, rhs: &ComplexMatrix) -> Result<C64> {
        self.check_same_shape(rhs)?;
        Ok(self.data.iter().zip(&rhs.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn determinant(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::Dimension("determinant of a non-square matrix".into()));
        }
        Ok(self.to_nalgebra().determinant())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> ComplexMatrix {
        ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    fn check_same_shape(&self, rhs: &ComplexMatrix) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "shape {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }

    // In-place application of embedded gates. `n_qubits` is the register
    // width, `dim == 1 << n_qubits`.

    /// `self ← (I ⊗ g ⊗ I) · self`, with `g` acting on `qubit`.
    pub(crate) fn apply_1q_left(&mut self, n_qubits: usize, qubit: usize, g: &[[C64; 2]; 2]) {
        let stride = 1usize << (n_qubits - 1 - qubit);
        let cols = self.cols;
        for base in 0..self.rows {
            if base & stride != 0 {
                continue;
            }
            let r0 = base * cols;
            let r1 = (base | stride) * cols;
            for j in 0..cols {
                let a = self.data[r0 + j];
                let b = self.data[r1 + j];
                self.data[r0 + j] = g[0][0] * a + g[0][1] * b;
                self.data[r1 + j] = g[1][0] * a + g[1][1] * b;
            }
        }
    }

    /// `self ← self · (I ⊗ g ⊗ I)`.
    pub(crate) fn apply_1q_right(&mut self, n_qubits: usize, qubit: usize, g: &[[C64; 2]; 2]) {
        let stride = 1usize << (n_qubits - 1 - qubit);
        let cols = self.cols;
        for i in 0..self.rows {
            let row = &mut self.data[i * cols..(i + 1) * cols];
            for j0 in 0..cols {
                if j0 & stride != 0 {
                    continue;
                }
                let j1 = j0 | stride;
                let a = row[j0];
                let b = row[j1];
                row[j0] = a * g[0][0] + b * g[1][0];
                row[j1] = a * g[0][1] + b * g[1][1];
            }
        }
    }

    /// `self ← CNOT · self` (row permutation).
    pub(crate) fn apply_cnot_left(&mut self, n_qubits: usize, control: usize, target: usize) {
        let cbit = 1usize << (n_qubits - 1 - control);
        let tbit = 1usize << (n_qubits - 1 - target);
        let cols = self.cols;
        for i in 0..self.rows {
            if i & cbit != 0 && i & tbit == 0 {
                let k = i | tbit;
                for j in 0..cols {
                    self.data.swap(i * cols + j, k * cols + j);
                }
            }
        }
    }

    /// `self ← self · CNOT` (column permutation).
    pub(crate) fn apply_cnot_right(&mut self, n_qubits: usize, control: usize, target: usize) {
        let cbit = 1usize << (n_qubits - 1 - control);
        let tbit = 1usize << (n_qubits - 1 - target);
        let cols = self.cols;
        for i in 0..self.rows {
            let row = &mut self.data[i * cols..(i + 1) * cols];
            for j in 0..cols {
                if j & cbit != 0 && j & tbit == 0 {
                    row.swap(j, j | tbit);
                }
            }
        }
    }

    /// The 2x2 block `R[a][b] = Σ_r M[(r,a),(r,b)]` obtained by tracing out
    /// every qubit but `qubit`. `Tr(M · (I ⊗ e ⊗ I)) = Σ_ab R[a][b]·e[b][a]`.
    pub(crate) fn partial_trace_to(&self, n_qubits: usize, qubit: usize) -> [[C64; 2]; 2] {
        let stride = 1usize << (n_qubits - 1 - qubit);
        let cols = self.cols;
        let mut r = [[C64::new(0.0, 0.0); 2]; 2];
        for base in 0..self.rows {
            if base & stride != 0 {
                continue;
            }
            let i1 = base | stride;
            r[0][0] += self.data[base * cols + base];
            r[0][1] += self.data[base * cols + i1];
            r[1][0] += self.data[i1 * cols + base];
            r[1][1] += self.data[i1 * cols + i1];
        }
        r
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A `2ⁿ × 2ⁿ` matrix whose unitarity was checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl UnitaryMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("unitary must be square".into()));
        }
        let dim = matrix.rows();
        if !dim.is_power_of_two() {
            return Err(Error::Dimension(format!("dimension {dim} is not a power of two")));
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    /// Skips the unitarity check. Callers guarantee the matrix is a product
    /// of unitaries.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square() && matrix.rows().is_power_of_two());
        Self {
            n_qubits: matrix.rows().trailing_zeros() as usize,
            matrix,
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::from_trusted(ComplexMatrix::identity(1 << n_qubits))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        Self::from_trusted(self.matrix.adjoint())
    }

    pub fn mul(&self, rhs: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        Ok(Self::from_trusted(self.matrix.matmul(&rhs.matrix)?))
    }

    /// Multiply by a unit-modulus scalar `e^{iα}`.
    pub fn with_phase(&self, alpha: f64) -> UnitaryMatrix {
        Self::from_trusted(self.matrix.scale(C64::from_polar(1.0, alpha)))
    }
}

impl Index<(usize, usize)> for UnitaryMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.matrix[idx]
    }
}

/// `max |(U†U − I)_ij|`.
pub fn unitarity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += m[(k, i)].conj() * m[(k, j)];
            }
            if i == j {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// `Tr(A†A)`, the squared Frobenius norm.
pub fn hs_norm_sq(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("Hilbert-Schmidt norm of a non-square matrix".into()));
    }
    Ok(a.as_slice().iter().map(|z| z.norm_sqr()).sum())
}

/// `sqrt(Tr(A†A))`.
pub fn hs_norm(a: &ComplexMatrix) -> Result<f64> {
    hs_norm_sq(a).map(f64::sqrt)
}

/// `1 − |Tr(U†V)|/N`, zero exactly when `V = e^{iφ}U`.
pub fn phase_invariant_distance(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!("{} vs {}", u.dim(), v.dim())));
    }
    let overlap = u.matrix().inner(v.matrix())?.norm() / u.dim() as f64;
    Ok((1.0 - overlap).max(0.0))
}

/// `min_φ ‖U − e^{iφ}V‖_F / sqrt(2N)`, which equals `sqrt(1 − |Tr(U†V)|/N)`.
///
/// A metric that is invariant under embedding into a wider register and
/// subadditive under composition: `d(AB, A'B') ≤ d(A, A') + d(B, B')`.
/// Block error bounds are summed in this metric. Evaluated through the
/// Frobenius form so it stays accurate near zero.
pub fn hs_distance(u: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension(format!("{} vs {}", u.dim(), v.dim())));
    }
    let overlap = v.matrix().inner(u.matrix())?;
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    let sq: f64 = u
        .matrix()
        .as_slice()
        .iter()
        .zip(v.matrix().as_slice())
        .map(|(a, b)| (a - phase * b).norm_sqr())
        .sum();
    Ok((sq / (2.0 * u.dim() as f64)).sqrt())
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Haar-distributed unitary on `n_qubits`, deterministic per seed.
///
/// QR of a complex Ginibre matrix, with the phases of `R`'s diagonal pushed
/// back into `Q`.
pub fn random_unitary(n_qubits: usize, rng_seed: u64) -> Result<UnitaryMatrix> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(haar_unitary(1 << n_qubits, &mut rng))
}

pub(crate) fn haar_unitary(dim: usize, rng: &mut impl rand::Rng) -> UnitaryMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    UnitaryMatrix::from_trusted(ComplexMatrix::from_nalgebra(&q))
}

/// `⌈(4ⁿ − 3n − 1)/4⌉`, the CNOT count sufficient for any `n`-qubit unitary.
pub fn max_cnots(n_qubits: u32) -> u64 {
    assert!(n_qubits >= 1 && n_qubits < 32, "n_qubits out of range");
    let n = n_qubits as u64;
    let numerator = 4u64.pow(n_qubits) - 3 * n - 1;
    numerator.div_ceil(4)
}

// Matrix text format: "R C" header, then R lines of C entries "re+imj".

fn format_entry(z: C64, out: &mut String) {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    let _ = write!(out, "{:.16e}{}{:.16e}j", z.re, sign, z.im.abs());
}

pub fn write_matrix_text(m: &ComplexMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(' ');
            }
            format_entry(m[(i, j)], &mut out);
        }
        out.push('\n');
    }
    out
}

fn parse_entry(tok: &str, line: usize, column: usize) -> Result<C64> {
    let err = |message: String| Error::Parse {
        line,
        column,
        message,
    };
    let body = tok
        .strip_suffix('j')
        .ok_or_else(|| err(format!("entry `{tok}` must end in `j`")))?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(|| err(format!("entry `{tok}` has no imaginary part")))?;
    let re: f64 = body[..split]
        .parse()
        .map_err(|_| err(format!("bad real part in `{tok}`")))?;
    let im: f64 = body[split..]
        .parse()
        .map_err(|_| err(format!("bad imaginary part in `{tok}`")))?;
    Ok(C64::new(re, im))
}

pub fn parse_matrix_text(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "empty matrix file".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: hline + 1,
            column: 1,
            message: "header must be two integers".into(),
        })?;
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: hline + 1,
            column: 1,
            message: "header must be two integers".into(),
        });
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut data = Vec::with_capacity(rows * cols);
    for (lno, line) in lines {
        let mut count = 0;
        for tok in line.split_whitespace() {
            let column = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
            data.push(parse_entry(tok, lno + 1, column)?);
            count += 1;
        }
        if count != cols {
            return Err(Error::Parse {
                line: lno + 1,
                column: 1,
                message: format!("expected {cols} entries, found {count}"),
            });
        }
    }
    ComplexMatrix::new(rows, cols, data)
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    parse_matrix_text(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &ComplexMatrix) -> Result<()> {
    std::fs::write(path, write_matrix_text(m))?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::new(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
    }

    #[test]
    fn hs_norm_examples() {
        assert_eq!(hs_norm(&ComplexMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!((hs_norm(&ComplexMatrix::identity(4)).unwrap() - 2.0).abs() < 1e-15);
        let d = pauli_x().sub(&ComplexMatrix::identity(2)).unwrap();
        assert!((hs_norm(&d).unwrap() - 2.0).abs() < 1e-15);
        assert!(hs_norm(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn distance_examples() {
        let u = random_unitary(2, 3).unwrap();
        assert!(phase_invariant_distance(&u, &u).unwrap() < 1e-15);
        assert!(phase_invariant_distance(&u, &u.with_phase(1.234)).unwrap() < 1e-12);
        let x = UnitaryMatrix::new(pauli_x()).unwrap();
        let i2 = UnitaryMatrix::identity(1);
        assert!((phase_invariant_distance(&i2, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(phase_invariant_distance(&i2, &UnitaryMatrix::identity(2)).is_err());
    }

    #[test]
    fn kron_examples() {
        let i4 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2));
        assert_eq!(i4, ComplexMatrix::identity(4));
        let d = ComplexMatrix::from_diagonal(&[c(1., 0.), c(2., 0.)]);
        let expected =
            ComplexMatrix::from_diagonal(&[c(1., 0.), c(1., 0.), c(2., 0.), c(2., 0.)]);
        assert_eq!(kron(&d, &ComplexMatrix::identity(2)), expected);
        let xx = kron(&pauli_x(), &pauli_x());
        assert_eq!(xx[(0, 3)], c(1., 0.));
        assert_eq!(xx[(0, 0)], c(0., 0.));
    }

    #[test]
    fn unitary_constructor_rejects() {
        let m = ComplexMatrix::from_diagonal(&[c(1., 0.), c(2., 0.)]);
        assert!(matches!(UnitaryMatrix::new(m), Err(Error::NotUnitary { .. })));
        assert!(UnitaryMatrix::new(ComplexMatrix::identity(3)).is_err());
        assert!(matches!(
            ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.)]),
            Err(Error::NonFinite)
        ));
        assert!(ComplexMatrix::new(2, 2, vec![c(1., 0.)]).is_err());
    }

    #[test]
    fn random_unitary_is_unitary_and_deterministic() {
        for seed in 0..1000 {
            let n = 1 + (seed as usize % 3);
            let u = random_unitary(n, seed).unwrap();
            UnitaryMatrix::new(u.matrix().clone()).unwrap();
        }
        let a = random_unitary(3, 99).unwrap();
        let b = random_unitary(3, 99).unwrap();
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        assert!(random_unitary(0, 1).is_err());
        assert!(random_unitary(9, 1).is_err());
    }

    #[test]
    fn haar_second_moment() {
        // E|Tr U|² = 1 for Haar U(N), any N.
        let samples = 1000;
        let mean: f64 = (0..samples)
            .map(|s| random_unitary(1, 10_000 + s).unwrap().matrix().trace().unwrap().norm_sqr())
            .sum::<f64>()
            / samples as f64;
        assert!((mean - 1.0).abs() <= 0.15, "mean |Tr U|^2 = {mean}");
    }

    #[test]
    fn max_cnot_bound() {
        assert_eq!(max_cnots(1), 0);
        assert_eq!(max_cnots(2), 3);
        assert_eq!(max_cnots(3), 14);
        assert_eq!(max_cnots(4), 61);
    }

    #[test]
    fn matrix_text_round_trip() {
        let u = random_unitary(2, 5).unwrap();
        let text = write_matrix_text(u.matrix());
        assert!(text.starts_with("4 4\n"));
        let back = parse_matrix_text(&text).unwrap();
        assert_eq!(&back, u.matrix());
        assert!(parse_matrix_text("2 2\n1+0j 0+0j\n0+0j\n").is_err());
        let m = parse_matrix_text("1 1\n-1.5e-3-2E+2j\n").unwrap();
        assert_eq!(m[(0, 0)], c(-1.5e-3, -200.0));
    }

    fn arb_matrix() -> impl Strategy<Value = ComplexMatrix> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, cl)| {
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), r * cl).prop_map(
                move |v| ComplexMatrix::new(r, cl, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap(),
            )
        })
    }

    proptest! {
        #[test]
        fn hs_norm_matches_entry_sum(m in arb_matrix()) {
            prop_assume!(m.is_square());
            let direct: f64 = m.as_slice().iter().map(|z| z.norm_sqr()).sum();
            let n = hs_norm(&m).unwrap();
            prop_assert!((n * n - direct).abs() <= 1e-12 * direct.max(1.0));
        }

        #[test]
        fn distance_symmetric_and_unitarily_invariant(s1 in 0u64..10_000, s2 in 0u64..10_000, s3 in 0u64..10_000, alpha in -10.0f64..10.0) {
            let u = random_unitary(2, s1).unwrap();
            let v = random_unitary(2, s2).unwrap();
            let w = random_unitary(2, s3).unwrap();
            let d = phase_invariant_distance(&u, &v).unwrap();
            prop_assert!((d - phase_invariant_distance(&v, &u).unwrap()).abs() < 1e-12);
            let dl = phase_invariant_distance(&w.mul(&u).unwrap(), &w.mul(&v).unwrap()).unwrap();
            let dr = phase_invariant_distance(&u.mul(&w).unwrap(), &v.mul(&w).unwrap()).unwrap();
            prop_assert!((d - dl).abs() < 1e-12);
            prop_assert!((d - dr).abs() < 1e-12);
            prop_assert!(phase_invariant_distance(&u, &u.with_phase(alpha)).unwrap() <= 1e-12);
        }

        #[test]
        fn hs_distance_is_subadditive(s1 in 0u64..10_000, s2 in 0u64..10_000, s3 in 0u64..10_000, s4 in 0u64..10_000) {
            let (a, a2) = (random_unitary(2, s1).unwrap(), random_unitary(2, s2).unwrap());
            let (b, b2) = (random_unitary(2, s3).unwrap(), random_unitary(2, s4).unwrap());
            let lhs = hs_distance(&a.mul(&b).unwrap(), &a2.mul(&b2).unwrap()).unwrap();
            let rhs = hs_distance(&a, &a2).unwrap() + hs_distance(&b, &b2).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn hs_distance_squares_to_cost(s1 in 0u64..10_000, s2 in 0u64..10_000, alpha in -3.0f64..3.0) {
            let (u, v) = (random_unitary(2, s1).unwrap(), random_unitary(2, s2).unwrap());
            let d = hs_distance(&u, &v).unwrap();
            prop_assert!((d * d - phase_invariant_distance(&u, &v).unwrap()).abs() < 1e-12);
            prop_assert!(hs_distance(&u, &u.with_phase(alpha)).unwrap() < 1e-14);
        }
    }
}
