//! Small dense complex linear algebra.
//!
//! Everything here works on row-major `dim × dim` matrices. Hilbert spaces in
//! this crate never exceed 81 dimensions (a vectorised two-qutrit density
//! matrix), so plain dense storage is all we need.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const UNITARITY_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;

/// Largest dimension accepted by [`Operator::kron`] (16 qubits).
pub const MAX_DIM: usize = 1 << 16;

/// Computational-subspace indices of the two-qutrit basis
/// `|00⟩,|01⟩,|02⟩,|10⟩,|11⟩,|12⟩,|20⟩,|21⟩,|22⟩`.
pub const COMPUTATIONAL_INDICES: [usize; 4] = [0, 1, 3, 4];

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A square complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = cr(1.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| cr(x)).collect();
        Self::from_diag(&d)
    }

    /// Builds a matrix from row-major entries. Panics if `entries.len()` is not a square.
    pub fn from_row_major(dim: usize, entries: Vec<C64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim²");
        Self { dim, data: entries }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "rows must be square");
            data.extend_from_slice(r);
        }
        Self { dim, data }
    }

    /// `|i⟩⟨j|` in a `dim`-dimensional space.
    pub fn outer_basis(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(i, j)] = cr(1.0);
        m
    }

    /// `|ψ⟩⟨φ|`.
    pub fn outer(psi: &[C64], phi: &[C64]) -> Self {
        let dim = psi.len();
        assert_eq!(dim, phi.len());
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = psi[i] * phi[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: C64, other: &Operator) {
        assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product. Zero entries of `self` are skipped, which makes
    /// products with sparse left factors (Hamiltonians, collapse operators)
    /// proportionally cheaper.
    pub fn matmul(&self, rhs: &Operator) -> Operator {
        let mut out = Operator::zeros(self.dim);
        self.matmul_into(rhs, &mut out);
        out
    }

    /// Writes `self · rhs` into `out` (overwriting it).
    pub fn matmul_into(&self, rhs: &Operator, out: &mut Operator) {
        let n = self.dim;
        assert_eq!(n, rhs.dim, "dimension mismatch in matmul");
        assert_eq!(n, out.dim);
        out.data.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm distance `max |a_ij − b_ij|`.
    pub fn max_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_one(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let g = self.adjoint().matmul(self);
        g.max_diff(&Operator::identity(self.dim)) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_diff(&self.adjoint()) <= tol
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Operator) -> Result<Operator> {
        let dim = self
            .dim
            .checked_mul(rhs.dim)
            .filter(|&d| d <= MAX_DIM)
            .ok_or(Error::Capacity {
                requested: self.dim.saturating_mul(rhs.dim),
                max: MAX_DIM,
            })?;
        let (n, m) = (self.dim, rhs.dim);
        let mut out = Operator::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out.data[(i * m + k) * dim + j * m + l] = a * rhs.data[k * m + l];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Principal submatrix on `indices` (rows and columns in that order).
    pub fn submatrix(&self, indices: &[usize]) -> Operator {
        let k = indices.len();
        let mut out = Operator::zeros(k);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    /// Places `self` as the block on `indices` of a `dim`-dimensional zero matrix.
    pub fn embed_block(&self, dim: usize, indices: &[usize]) -> Operator {
        assert_eq!(indices.len(), self.dim);
        let mut out = Operator::zeros(dim);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                out[(i, j)] = self[(a, b)];
            }
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues
    /// and the matching orthonormal eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Operator) {
        let eig = self.to_nalgebra().symmetric_eigen();
        let n = self.dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = Operator::zeros(n);
        for (col, &k) in order.iter().enumerate() {
            for row in 0..n {
                vectors[(row, col)] = eig.eigenvectors[(row, k)];
            }
        }
        (values, vectors)
    }

    /// `f(A)` for Hermitian `A` via its spectral decomposition.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Operator {
        let (vals, vecs) = self.hermitian_eigen();
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for k in 0..n {
            let fk = f(vals[k]);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = vecs[(i, k)] * fk;
                for j in 0..n {
                    out.data[i * n + j] += vik * vecs[(j, k)].conj();
                }
            }
        }
        out
    }

    /// `exp(scale · self)` by scaling and squaring with a Taylor kernel.
    ///
    /// The argument is halved until its 1-norm is at most 1/2, after which a
    /// Taylor series is summed until the next term falls below machine
    /// precision relative to the partial sum.
    pub fn expm(&self, scale: C64) -> Result<Operator> {
        if !self.is_finite() || !scale.re.is_finite() || !scale.im.is_finite() {
            return Err(Error::NonFinite("expm argument"));
        }
        let a = self.scale(scale);
        let norm = a.norm_one();
        let mut squarings = 0u32;
        if norm > 0.5 {
            squarings = (norm / 0.5).log2().ceil() as u32;
        }
        let a = a.scale_real(0.5f64.powi(squarings as i32));

        let n = self.dim;
        let mut sum = Operator::identity(n);
        let mut term = Operator::identity(n);
        let mut next = Operator::zeros(n);
        for k in 1..=40 {
            a.matmul_into(&term, &mut next);
            std::mem::swap(&mut term, &mut next);
            let inv_k = 1.0 / k as f64;
            term.data.iter_mut().for_each(|z| *z *= inv_k);
            sum.axpy(cr(1.0), &term);
            if term.max_abs() <= 1e-17 * sum.max_abs().max(1.0) {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        Ok(sum)
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim);
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `a ⊗ b`.
pub fn kron_compose(a: &Operator, b: &Operator) -> Result<Operator> {
    a.kron(b)
}

/// `exp(scale · m)`.
pub fn expm(m: &Operator, scale: C64) -> Result<Operator> {
    m.expm(scale)
}

/// Places a single-site operator on `site` of a `sites`-site register with
/// `levels` levels per site; site 0 is the most significant digit.
pub fn embed(op: &Operator, site: usize, sites: usize, levels: usize) -> Result<Operator> {
    if op.dim() != levels {
        return Err(Error::Dimension {
            expected: levels,
            found: op.dim(),
        });
    }
    if site >= sites {
        return Err(Error::SiteOutOfRange { site, sites });
    }
    let mut out = Operator::identity(1);
    for s in 0..sites {
        let factor = if s == site {
            op.clone()
        } else {
            Operator::identity(levels)
        };
        out = out.kron(&factor)?;
    }
    Ok(out)
}

/// Restricts a two-qutrit operator to rows/columns `{|00⟩,|01⟩,|10⟩,|11⟩}`.
/// No renormalisation is applied, so leakage shows up as missing column norm.
pub fn project_computational(u9: &Operator) -> Result<Operator> {
    if u9.dim() != 9 {
        return Err(Error::Dimension {
            expected: 9,
            found: u9.dim(),
        });
    }
    Ok(u9.submatrix(&COMPUTATIONAL_INDICES))
}

/// Index bookkeeping for a register of identical sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisConvention {
    pub levels: usize,
    pub sites: usize,
}

impl BasisConvention {
    pub const TWO_QUTRITS: BasisConvention = BasisConvention {
        levels: 3,
        sites: 2,
    };

    pub fn dim(&self) -> usize {
        self.levels.pow(self.sites as u32)
    }

    /// Flat index of the product state with the given per-site levels.
    pub fn index(&self, digits: &[usize]) -> usize {
        assert_eq!(digits.len(), self.sites);
        digits.iter().fold(0, |acc, &d| {
            assert!(d < self.levels);
            acc * self.levels + d
        })
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.sites];
        for slot in d.iter_mut().rev() {
            *slot = index % self.levels;
            index /= self.levels;
        }
        d
    }

    /// Indices whose every site is in `{0, 1}`.
    pub fn computational_indices(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.digits(i).iter().all(|&d| d < 2))
            .collect()
    }
}

/// A density matrix that has passed the validity checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(op: Operator) -> Result<Self> {
        if !op.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        if !op.is_hermitian(HERMITICITY_TOL) {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr - cr(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let (vals, _) = op.hermitian_eigen();
        if vals[0] < -TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {}",
                vals[0]
            )));
        }
        Ok(Self(op))
    }

    /// Wraps an operator without validation (integrator output).
    pub fn new_unchecked(op: Operator) -> Self {
        Self(op)
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        Self::new(Operator::outer(psi, psi))
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        Self(Operator::outer_basis(dim, i, i))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(Operator::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.hermitian_eigen().0[0]
    }
}
