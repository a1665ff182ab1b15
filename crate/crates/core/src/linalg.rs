//! Dense complex matrix substrate.
//!
//! Matrices are stored row-major. Composite systems are ordered with the
//! first subsystem outermost, so `tensor_product(a, b)` places `a` on the
//! slow index and a [`DimensionProfile`] lists subsystems left to right.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on `max |m - m†|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues down to this floor are clipped to zero by [`psd_sqrt`].
pub const PSD_FLOOR: f64 = -1e-10;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries. Rejects a length mismatch and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = c(d, 0.0);
        }
        m
    }

    /// `v v†` for a column vector `v`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(c(factor, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |m - m†|`, or infinity for a non-square matrix.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `Tr(self · rhs)` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Complex64 {
        assert!(self.cols == rhs.rows && self.rows == rhs.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * rhs[(k, i)];
            }
        }
        acc
    }

    /// Max-entry distance between two equally shaped matrices.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "elementwise operation on mismatched shapes"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for the checked form.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Ordered subsystem dimensions of a composite system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionProfile(Vec<usize>);

impl DimensionProfile {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::DimensionMismatch("empty dimension profile".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dimension {d} is below 2"
            )));
        }
        Ok(Self(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Side length of the full matrix.
    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Profile of the listed subsystems, in ascending index order.
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        let keep = normalize_index_set(keep, self.len())?;
        Self::new(keep.iter().map(|&k| self.0[k]).collect())
    }

    pub fn check_matrix(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.total() {
            return Err(Error::DimensionMismatch(format!(
                "profile {:?} (side {}) does not fit a {}x{} matrix",
                self.0,
                self.total(),
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }
}

fn normalize_index_set(set: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.len() != set.len() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem index set {set:?} has duplicates"
        )));
    }
    if let Some(&k) = v.iter().find(|&&k| k >= n) {
        return Err(Error::DimensionMismatch(format!(
            "subsystem index {k} out of range for {n} subsystems"
        )));
    }
    Ok(v)
}

/// Kronecker product, `a` outermost.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Offsets into the full index for every assignment of the listed
/// subsystems, enumerated with the first listed subsystem outermost.
fn offsets(profile: &DimensionProfile, subsystems: &[usize]) -> Vec<usize> {
    let strides = profile.strides();
    let mut out = vec![0usize];
    for &k in subsystems {
        let d = profile.0[k];
        let stride = strides[k];
        out = out
            .iter()
            .flat_map(|&base| (0..d).map(move |v| base + v * stride))
            .collect();
    }
    out
}

/// Traces out every subsystem not listed in `keep`. Kept subsystems stay in
/// their original order; an empty `keep` yields the 1x1 full trace.
pub fn partial_trace(
    m: &ComplexMatrix,
    profile: &DimensionProfile,
    keep: &[usize],
) -> Result<ComplexMatrix> {
    profile.check_matrix(m)?;
    let keep = normalize_index_set(keep, profile.len())?;
    let traced: Vec<usize> = (0..profile.len()).filter(|k| !keep.contains(k)).collect();
    let kept_off = offsets(profile, &keep);
    let traced_off = offsets(profile, &traced);
    let n = kept_off.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for (i, &oi) in kept_off.iter().enumerate() {
        for (j, &oj) in kept_off.iter().enumerate() {
            out[(i, j)] = traced_off.iter().map(|&t| m[(oi + t, oj + t)]).sum();
        }
    }
    Ok(out)
}

/// Lifts `op`, acting on the listed subsystems (in the listed order), to the
/// full space as `op ⊗ 𝟙_rest`.
pub fn embed_operator(
    op: &ComplexMatrix,
    acting: &[usize],
    profile: &DimensionProfile,
) -> Result<ComplexMatrix> {
    let sorted = normalize_index_set(acting, profile.len())?;
    let local: usize = acting.iter().map(|&k| profile.0[k]).product();
    if !op.is_square() || op.rows() != local {
        return Err(Error::DimensionMismatch(format!(
            "operator of side {} does not act on subsystems {acting:?} of {:?}",
            op.rows(),
            profile.0
        )));
    }
    let rest: Vec<usize> = (0..profile.len()).filter(|k| !sorted.contains(k)).collect();
    let act_off = offsets(profile, acting);
    let rest_off = offsets(profile, &rest);
    let mut out = ComplexMatrix::zeros(profile.total(), profile.total());
    for (a, &oa) in act_off.iter().enumerate() {
        for (b, &ob) in act_off.iter().enumerate() {
            let x = op[(a, b)];
            if x == ZERO {
                continue;
            }
            for &r in &rest_off {
                out[(oa + r, ob + r)] = x;
            }
        }
    }
    Ok(out)
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V diag(f(λ)) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (0..n).map(|k| v[(i, k)] * fv[k] * v[(j, k)].conj()).sum();
            }
        }
        out
    }
}

fn ensure_hermitian(m: &ComplexMatrix, what: &str) -> Result<()> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::ContractViolation(format!(
            "{what} is not Hermitian (max |m - m†| = {dev:e})"
        )));
    }
    Ok(())
}

/// Eigen-decomposes a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    ensure_hermitian(m, "eigen-decomposition input")?;
    let n = m.rows();
    let eig = m.hermitian_part().to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = eig.eigenvectors[(i, k)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    if let Some(&min) = eig.values.first() {
        if min < PSD_FLOOR {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(eig.map_spectrum(|l| c(l.max(0.0).sqrt(), 0.0)))
}

/// Singular values, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// `exp(-i · angle · h)` for Hermitian `h`.
pub fn unitary_from_generator(h: &ComplexMatrix, angle: f64) -> Result<ComplexMatrix> {
    ensure_hermitian(h, "generator")?;
    let eig = hermitian_eig(h)?;
    Ok(eig.map_spectrum(|l| Complex64::from_polar(1.0, -angle * l)))
}

/// `u · m · u†`.
pub fn conjugate(u: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    &(u * m) * &u.dagger()
}
