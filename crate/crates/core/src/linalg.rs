//! Dense complex matrices and exact permanent kernels.

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub use num_complex::Complex64;

use crate::combinat::Permutation;
use crate::error::{invalid, Error, Result};

/// Largest size accepted by the naive `O(n!·n)` permanent.
pub const NAIVE_MAX_N: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!("{} entries do not fill a {rows}x{cols} matrix", data.len())));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(invalid("ragged rows"));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// Builds a matrix from separate real and imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        if re.len() != im.len() || re.iter().zip(im).any(|(a, b)| a.len() != b.len()) {
            return Err(invalid("real and imaginary parts differ in shape"));
        }
        Self::from_rows(
            re.iter().zip(im).map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect()).collect(),
        )
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
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

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn real_parts(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|z| z.re).collect()).collect()
    }

    pub fn imag_parts(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|z| z.im).collect()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.cols, |i, j| (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()))
    }

    /// Row `i` replaced by row `perm[i]`.
    pub fn permute_rows(&self, perm: &Permutation) -> Result<Self> {
        if perm.len() != self.rows {
            return Err(invalid("row permutation size does not match matrix"));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| self[(perm[i], j)]))
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// `max |(U U†)_{ij} - δ_ij|`.
    pub fn unitarity_residual(&self) -> f64 {
        match self.matmul(&self.adjoint()) {
            Ok(p) => p.max_abs_diff(&Self::identity(self.rows)),
            Err(_) => f64::INFINITY,
        }
    }

    /// Entrywise `|M_ij|²`, row-major.
    pub fn abs_squared(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {}", self.row(i).iter().map(|z| format!("{z:.6}")).join(", "))?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixParts {
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixParts { real: self.real_parts(), imag: self.imag_parts() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let parts = MatrixParts::deserialize(d)?;
        ComplexMatrix::from_parts(&parts.real, &parts.imag).map_err(serde::de::Error::custom)
    }
}

/// Permanent algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermanentMethod {
    Naive,
    Ryser,
    Glynn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PermanentResult {
    pub value: Complex64,
    pub method: PermanentMethod,
    pub n: usize,
}

impl PermanentResult {
    pub fn compute(m: &ComplexMatrix, method: PermanentMethod) -> Result<Self> {
        Ok(PermanentResult { value: permanent(m, method)?, method, n: m.rows() })
    }
}

/// Ring operations the permanent kernels need.
trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    const ZERO: Self;
    const ONE: Self;
    fn scale(self, f: f64) -> Self;
}

impl Scalar for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;

    fn scale(self, f: f64) -> f64 {
        self * f
    }
}

impl Scalar for Complex64 {
    const ZERO: Complex64 = ZERO;
    const ONE: Complex64 = ONE;

    fn scale(self, f: f64) -> Complex64 {
        self * f
    }
}

fn naive_kernel<T: Scalar>(n: usize, a: &[T]) -> T {
    let mut total = T::ZERO;
    for p in (0..n).permutations(n) {
        let mut prod = T::ONE;
        for (i, &c) in p.iter().enumerate() {
            prod = prod * a[i * n + c];
        }
        total = total + prod;
    }
    total
}

/// Ryser's inclusion-exclusion formula with Gray-code subset order:
/// `perm(A) = (-1)^n Σ_S (-1)^|S| Π_i Σ_{j∈S} a_ij`.
fn ryser_kernel<T: Scalar>(n: usize, a: &[T]) -> T {
    if n == 0 {
        return T::ONE;
    }
    let mut row_sums = vec![T::ZERO; n];
    let mut in_set = vec![false; n];
    let mut total = T::ZERO;
    let mut odd = false;
    for step in 1u64..(1u64 << n) {
        let col = step.trailing_zeros() as usize;
        if in_set[col] {
            for i in 0..n {
                row_sums[i] = row_sums[i] - a[i * n + col];
            }
        } else {
            for i in 0..n {
                row_sums[i] = row_sums[i] + a[i * n + col];
            }
        }
        in_set[col] = !in_set[col];
        odd = !odd;
        let prod = row_sums.iter().fold(T::ONE, |p, &s| p * s);
        total = if odd { total - prod } else { total + prod };
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Glynn's formula with Gray-code sign order:
/// `perm(A) = 2^{1-n} Σ_δ (Π_k δ_k) Π_j Σ_i δ_i a_ij`, `δ_0 = +1`.
fn glynn_kernel<T: Scalar>(n: usize, a: &[T]) -> T {
    if n == 0 {
        return T::ONE;
    }
    let mut col_sums: Vec<T> = (0..n).map(|j| (0..n).fold(T::ZERO, |s, i| s + a[i * n + j])).collect();
    let mut negative = vec![false; n];
    let mut sign_odd = false;
    let mut total = col_sums.iter().fold(T::ONE, |p, &s| p * s);
    for step in 1u64..(1u64 << (n - 1)) {
        let row = step.trailing_zeros() as usize + 1;
        let delta = if negative[row] { 2.0 } else { -2.0 };
        for j in 0..n {
            col_sums[j] = col_sums[j] + a[row * n + j].scale(delta);
        }
        negative[row] = !negative[row];
        sign_odd = !sign_odd;
        let prod = col_sums.iter().fold(T::ONE, |p, &s| p * s);
        total = if sign_odd { total - prod } else { total + prod };
    }
    total.scale(0.5f64.powi(n as i32 - 1))
}

fn check_square(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(format!("permanent needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if m.rows() >= 63 {
        return Err(invalid("matrix too large for exact permanent"));
    }
    Ok(())
}

/// Permanent of a square complex matrix. The 0×0 permanent is 1.
pub fn permanent(m: &ComplexMatrix, method: PermanentMethod) -> Result<Complex64> {
    check_square(m)?;
    let n = m.rows();
    Ok(match method {
        PermanentMethod::Naive => {
            if n > NAIVE_MAX_N {
                return Err(invalid(format!("naive permanent limited to n <= {NAIVE_MAX_N}")));
            }
            naive_kernel(n, m.as_slice())
        }
        PermanentMethod::Ryser => ryser_kernel(n, m.as_slice()),
        PermanentMethod::Glynn => glynn_kernel(n, m.as_slice()),
    })
}

/// Ryser permanent of a real square matrix given row-major.
pub fn permanent_real(n: usize, a: &[f64]) -> Result<f64> {
    if a.len() != n * n {
        return Err(invalid("real permanent: entry count is not n²"));
    }
    Ok(ryser_kernel(n, a))
}

/// Matrix with entries `M_{i,c} · conj(M_{τ(i),c})`.
pub fn hadamard_matrix(m: &ComplexMatrix, tau: &Permutation) -> Result<ComplexMatrix> {
    if !m.is_square() || tau.len() != m.rows() {
        return Err(invalid(format!("permutation of {} does not match {}x{} matrix", tau.len(), m.rows(), m.cols())));
    }
    Ok(ComplexMatrix::from_fn(m.rows(), m.cols(), |i, c| m[(i, c)] * m[(tau[i], c)].conj()))
}

/// `Perm(M ∘ M*_τ)` evaluated as one Ryser permanent.
pub fn hadamard_perm(m: &ComplexMatrix, tau: &Permutation) -> Result<Complex64> {
    let a = hadamard_matrix(m, tau)?;
    Ok(ryser_kernel(a.rows(), a.as_slice()))
}

/// `Perm(M ∘ M*_τ)` by Laplace expansion over the rows moved by `τ`.
///
/// With `P` the `j` moved rows and `F` the fixed rows,
/// `Perm(M∘M*_τ) = Σ_ρ Perm(M_{P,ρ} ∘ M*_{τ(P),ρ}) · Perm(|M_{F,ρ̄}|²)`
/// over all `j`-subsets `ρ` of columns, in lexicographic subset order. Only
/// the first factor is complex, and its size is `j`.
pub fn laplace_split_perm(m: &ComplexMatrix, tau: &Permutation) -> Result<Complex64> {
    if !m.is_square() || tau.len() != m.rows() {
        return Err(invalid("permutation size does not match matrix"));
    }
    let abs_sq = m.abs_squared();
    laplace_split_with(m, &abs_sq, tau)
}

/// As [`laplace_split_perm`] with `|M|²` precomputed.
pub(crate) fn laplace_split_with(m: &ComplexMatrix, abs_sq: &[f64], tau: &Permutation) -> Result<Complex64> {
    let n = m.rows();
    let moved = tau.moved_points();
    let fixed = tau.fixed_points();
    let j = moved.len();
    let mut complex_block = vec![ZERO; j * j];
    let mut real_block = vec![0.0; (n - j) * (n - j)];
    let mut total = ZERO;
    let mut in_rho = vec![false; n];
    for rho in (0..n).combinations(j) {
        in_rho.iter_mut().for_each(|b| *b = false);
        for &c in &rho {
            in_rho[c] = true;
        }
        for (a, &p) in moved.iter().enumerate() {
            for (b, &c) in rho.iter().enumerate() {
                complex_block[a * j + b] = m[(p, c)] * m[(tau[p], c)].conj();
            }
        }
        let complement = (0..n).filter(|&c| !in_rho[c]);
        for (b, c) in complement.enumerate() {
            for (a, &f) in fixed.iter().enumerate() {
                real_block[a * (n - j) + b] = abs_sq[f * n + c];
            }
        }
        let classical = ryser_kernel(n - j, &real_block);
        if classical == 0.0 {
            continue;
        }
        total += ryser_kernel(j, &complex_block) * classical;
    }
    Ok(total)
}

/// Rows `input_modes`, columns `output_modes` of `u`. Repeated indices
/// duplicate rows or columns.
pub fn submatrix(u: &ComplexMatrix, input_modes: &[usize], output_modes: &[usize]) -> Result<ComplexMatrix> {
    if let Some(&i) = input_modes.iter().find(|&&i| i >= u.rows()) {
        return Err(invalid(format!("input mode {i} out of range for {} rows", u.rows())));
    }
    if let Some(&j) = output_modes.iter().find(|&&j| j >= u.cols()) {
        return Err(invalid(format!("output mode {j} out of range for {} columns", u.cols())));
    }
    Ok(ComplexMatrix::from_fn(input_modes.len(), output_modes.len(), |a, b| u[(input_modes[a], output_modes[b])]))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("eigenvalues need a square matrix".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(m.to_nalgebra());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
