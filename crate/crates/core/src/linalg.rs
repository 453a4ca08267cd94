//! Dense complex linear algebra.
//!
//! Every operator, state and ket in this crate is a [`CMatrix`]: a dense,
//! row-major complex matrix (kets are `D × 1` columns). The sizes involved are
//! small (at most `2^12` by default), so identities are checked by full matrix
//! comparison in the max-norm of the entrywise difference.
//!
//! Hermitian eigendecomposition is delegated to `nalgebra`; everything else is
//! implemented here.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra as na;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use num_complex::Complex64;

/// Default entrywise comparison tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default tolerance on `‖A − A†‖_max` accepted as hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Absolute tolerance for grouping degenerate eigenvalues.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Default ceiling on matrix dimensions (`2^12`).
pub const DEFAULT_MAX_DIM: usize = 4096;

static MAX_DIM: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_DIM);

/// Current dimension ceiling for constructed operators.
pub fn max_dim() -> usize {
    MAX_DIM.load(Ordering::Relaxed)
}

/// Sets the dimension ceiling. Meant to be called once at startup.
pub fn set_max_dim(dim: usize) {
    MAX_DIM.store(dim.max(1), Ordering::Relaxed);
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    let max = max_dim();
    if dim > max {
        return Err(Error::SizeLimit {
            requested: dim,
            max,
        });
    }
    Ok(())
}

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Imaginary unit.
pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `e^{2πi k / n}`.
pub fn root_of_unity(n: usize, k: i64) -> Complex64 {
    let k = k.rem_euclid(n as i64);
    // exact values where the angle lands on an axis
    match (4 * k).checked_rem(n as i64) {
        Some(0) => match 4 * k / n as i64 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        },
        _ => Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64),
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Square matrix from nested rows. Panics on ragged input; intended for literals.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| real(x)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn real_diag(values: &[f64]) -> Self {
        let v: Vec<Complex64> = values.iter().map(|&x| real(x)).collect();
        Self::diag(&v)
    }

    /// Column vector.
    pub fn column(entries: Vec<Complex64>) -> Self {
        let rows = entries.len();
        CMatrix {
            rows,
            cols: 1,
            data: entries,
        }
    }

    /// Computational basis ket `|index⟩` of the given dimension.
    pub fn basis_ket(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim, 1);
        v.data[index] = ONE;
        v
    }

    /// `|v⟩⟨w|` for column vectors `v`, `w`.
    pub fn outer(v: &CMatrix, w: &CMatrix) -> Self {
        assert!(v.is_column() && w.is_column(), "outer product needs columns");
        let mut m = Self::zeros(v.rows, w.rows);
        for i in 0..v.rows {
            let vi = v.data[i];
            if vi == ZERO {
                continue;
            }
            for j in 0..w.rows {
                m.data[i * w.rows + j] = vi * w.data[j].conj();
            }
        }
        m
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &CMatrix) -> Self {
        Self::outer(v, v)
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

    #[inline]
    pub fn is_column(&self) -> bool {
        self.cols == 1
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(real(s))
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, s: Complex64, other: &CMatrix) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Matrix product, checking shapes.
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, p);
        for i in 0..n {
            let row = &mut out.data[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^k` for square matrices (`k = 0` gives the identity).
    pub fn pow(&self, k: u32) -> CMatrix {
        assert!(self.is_square(), "power of non-square matrix");
        let mut acc = Self::identity(self.rows);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &CMatrix) -> CMatrix {
        &(self * other) - &(other * self)
    }

    /// Largest entry modulus, `‖A‖_max`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖self − other‖_max`. Panics on shape mismatch.
    pub fn max_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &CMatrix, tol: f64) -> bool {
        self.shape() == other.shape() && self.max_diff(other) <= tol
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `‖U·U† − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self * &self.dagger()).max_diff(&Self::identity(self.rows))
    }

    /// `Tr(self†·other)`; `⟨self|other⟩` for column vectors. Panics on a shape mismatch.
    pub fn inner(&self, other: &CMatrix) -> Complex64 {
        assert_eq!(self.shape(), other.shape(), "inner product of different shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Column `j` as a column vector.
    pub fn col(&self, j: usize) -> CMatrix {
        CMatrix::column((0..self.rows).map(|i| self.data[i * self.cols + j]).collect())
    }

    /// Restriction `P·A·P` of a square matrix to the range of the projector `P`.
    pub fn sandwich(&self, p: &CMatrix) -> CMatrix {
        &(p * self) * p
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            Some(k) => Err(Error::NonFinite {
                row: k / self.cols,
                col: k % self.cols,
            }),
            None => Ok(()),
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
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

impl Mul for &CMatrix {
    type Output = CMatrix;
    /// Panics on shape mismatch; use [`CMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<Complex64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: Complex64) -> CMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: f64) -> CMatrix {
        self.scale_real(rhs)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.add_scaled(ONE, rhs);
    }
}

/// Kronecker product; block `(i, j)` of the result is `a[i, j] · b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .ok_or(Error::SizeLimit { requested: usize::MAX, max: max_dim() })?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .ok_or(Error::SizeLimit { requested: usize::MAX, max: max_dim() })?;
    check_dim(rows.max(cols))?;
    let mut out = CMatrix::zeros(rows, cols);
    for ai in 0..a.rows {
        for aj in 0..a.cols {
            let s = a[(ai, aj)];
            if s == ZERO {
                continue;
            }
            for bi in 0..b.rows {
                let dst = (ai * b.rows + bi) * cols + aj * b.cols;
                let src = bi * b.cols;
                for bj in 0..b.cols {
                    out.data[dst + bj] = s * b.data[src + bj];
                }
            }
        }
    }
    Ok(out)
}

/// `m^{⊗k}`.
pub fn kron_power(m: &CMatrix, k: usize) -> Result<CMatrix> {
    let mut acc = CMatrix::identity(1);
    for _ in 0..k {
        acc = kron(&acc, m)?;
    }
    Ok(acc)
}

/// Conjugate transpose.
/// `Tr(A·B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    if a.cols != b.rows || a.rows != b.cols {
        return Err(Error::DimensionMismatch(format!(
            "Tr(A·B) with A {}x{} and B {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut acc = ZERO;
    for i in 0..a.rows {
        for k in 0..a.cols {
            acc += a.data[i * a.cols + k] * b.data[k * b.cols + i];
        }
    }
    Ok(acc)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.dagger()
}

/// Spectral decomposition of a hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Rebuilds `V·f(Λ)·V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * &self.vectors.dagger()
    }

    /// Groups eigenvalues within `tol` of each other; returns `(mean value, count)`.
    pub fn grouped(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut groups: Vec<(f64, usize, f64)> = Vec::new();
        for &v in &self.values {
            match groups.last_mut() {
                Some((sum, count, first)) if (v - *first).abs() <= tol => {
                    *sum += v;
                    *count += 1;
                }
                _ => groups.push((v, 1, v)),
            }
        }
        groups
            .into_iter()
            .map(|(sum, count, _)| (sum / count as f64, count))
            .collect()
    }
}

/// Eigendecomposition of a hermitian matrix with the default hermiticity tolerance.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEigen> {
    hermitian_eig_with_tol(a, HERMITICITY_TOL)
}

pub fn hermitian_eig_with_tol(a: &CMatrix, herm_tol: f64) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    a.check_finite()?;
    let dev = a.hermiticity_residual();
    if dev > herm_tol {
        return Err(Error::NotHermitian(dev));
    }
    let n = a.rows;
    // symmetrize so round-off in the input cannot bias the solver
    let m = na::DMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let eig = na::SymmetricEigen::try_new(m, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::Numerical(format!("hermitian eigensolver did not converge for n = {n}")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, j)] = eig.eigenvectors[(i, k)];
        }
    }

    let out = HermitianEigen { values, vectors };
    let scale = a.max_abs().max(1.0);
    let residual = (&(a * &out.vectors) - &(&out.vectors * &CMatrix::real_diag(&out.values))).max_abs();
    if residual > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "eigen residual {residual:e} exceeds 1e-9·‖A‖_max = {:e} (n = {n})",
            1e-9 * scale
        )));
    }
    Ok(out)
}

/// Partial trace of a `2^n`-dimensional operator over the qubit factor
/// `traced_factor` (1-based; factor 1 is the leftmost tensor factor).
pub fn partial_trace(a: &CMatrix, n_factors: usize, traced_factor: usize) -> Result<CMatrix> {
    if n_factors == 0 || n_factors >= usize::BITS as usize {
        return Err(Error::InvalidArgument(format!("bad factor count {n_factors}")));
    }
    let dim = 1usize << n_factors;
    if a.rows != dim || a.cols != dim {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over {n_factors} qubits needs {dim}x{dim}, got {}x{}",
            a.rows, a.cols
        )));
    }
    if traced_factor == 0 || traced_factor > n_factors {
        return Err(Error::InvalidArgument(format!(
            "traced factor {traced_factor} outside 1..={n_factors}"
        )));
    }
    let shift = n_factors - traced_factor;
    let low_mask = (1usize << shift) - 1;
    let insert = |r: usize, b: usize| ((r & !low_mask) << 1) | (b << shift) | (r & low_mask);
    let half = dim / 2;
    let mut out = CMatrix::zeros(half, half);
    for r in 0..half {
        for c in 0..half {
            out[(r, c)] = a[(insert(r, 0), insert(c, 0))] + a[(insert(r, 1), insert(c, 1))];
        }
    }
    Ok(out)
}

/// `exp(−i·t·h)` for hermitian `h`, via the spectral decomposition.
pub fn mat_exp_hermitian_generator(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(h)?;
    Ok(eig.map_spectrum(|x| Complex64::from_polar(1.0, -t * x)))
}

/// Serialized matrix: `{"rows", "cols", "data": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let data = raw.data.iter().map(|&[re, im]| c64(re, im)).collect();
        CMatrix::from_vec(raw.rows, raw.cols, data).map_err(serde::de::Error::custom)
    }
}
