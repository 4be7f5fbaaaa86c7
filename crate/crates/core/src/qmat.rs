//! Dense complex linear algebra and entropy primitives.
//!
//! [`ComplexMatrix`] is a thin wrapper over a column-major
//! `nalgebra::DMatrix<Complex64>`; all indexing is `(row, col)`. Tensor
//! products use the usual block ordering, so the factor listed first is the
//! most significant digit of a composite index.

use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QcapError, Result};

pub type C64 = Complex64;

pub const DEFAULT_DIM_CAP: usize = 4096;

/// Hermiticity tolerance for tagged matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in `[-EIGEN_CLIP, 0)` are treated as zero.
pub const EIGEN_CLIP: f64 = 1e-10;

static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

/// Current global dimension cap.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

/// Overrides the global dimension cap (the CLI wires `QCAP_DIM_CAP` here).
pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}

/// Fails with [`QcapError::DimensionTooLarge`] if `dim` exceeds the cap.
pub fn check_dim(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        Err(QcapError::DimensionTooLarge { dim, cap })
    } else {
        Ok(())
    }
}

/// Product of dimensions, checked against overflow and the global cap.
pub fn checked_dim_product(dims: &[usize]) -> Result<usize> {
    let cap = dim_cap();
    let mut acc = 1usize;
    for &d in dims {
        acc = acc
            .checked_mul(d)
            .ok_or(QcapError::DimensionTooLarge { dim: usize::MAX, cap })?;
    }
    check_dim(acc)?;
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(QcapError::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(ComplexMatrix(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// `|psi><phi|`.
    pub fn outer(psi: &[C64], phi: &[C64]) -> Self {
        Self::from_fn(psi.len(), phi.len(), |i, j| psi[i] * phi[j].conj())
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Self {
        ComplexMatrix(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Matrix-vector product.
    pub fn apply_to(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols(), "vector length must match column count");
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from `M = M†` (infinite for non-square input).
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut err = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Largest entrywise deviation of `M†M` from the identity.
    pub fn isometry_error(&self) -> f64 {
        let gram = self.0.adjoint() * &self.0;
        let n = gram.nrows();
        let mut err = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        err
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.isometry_error() <= tol
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Kronecker product `a ⊗ b`: `(a⊗b)[i*rb + k, j*cb + l] = a[i,j] b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = checked_dim_product(&[a.rows(), b.rows()])?;
    let cols = checked_dim_product(&[a.cols(), b.cols()])?;
    let (rb, cb) = (b.rows(), b.cols());
    Ok(ComplexMatrix::from_fn(rows, cols, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)]))
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Splits a composite index into per-factor digits (first factor most significant).
pub fn split_index(mut idx: usize, dims: &[usize], digits: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        digits[k] = idx % dims[k];
        idx /= dims[k];
    }
}

/// Joins per-factor digits into a composite index.
pub fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

fn validate_factors(m: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    if !m.is_square() {
        return Err(QcapError::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(QcapError::ShapeMismatch("factor dimensions must be positive".into()));
    }
    let prod = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    if prod != Some(m.rows()) {
        return Err(QcapError::ShapeMismatch(format!(
            "factor dimensions {dims:?} do not multiply to {}",
            m.rows()
        )));
    }
    Ok(())
}

/// Traces out every factor not listed in `keep`; kept factors stay in their
/// original relative order.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    validate_factors(m, dims)?;
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.is_empty() || keep_sorted.len() != keep.len() {
        return Err(QcapError::ShapeMismatch(
            "keep must be a nonempty set of distinct factor indices".into(),
        ));
    }
    if *keep_sorted.last().unwrap() >= dims.len() {
        return Err(QcapError::ShapeMismatch(format!(
            "factor index out of range for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced_total: usize = traced_dims.iter().product();

    // groups[t] lists (kept index, full index) pairs sharing traced index t
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kept_total); traced_total];
    let mut digits = vec![0usize; dims.len()];
    let mut kd = vec![0usize; kept_dims.len()];
    let mut td = vec![0usize; traced_dims.len()];
    for full in 0..m.rows() {
        split_index(full, dims, &mut digits);
        for (slot, &f) in kd.iter_mut().zip(&keep_sorted) {
            *slot = digits[f];
        }
        for (slot, &f) in td.iter_mut().zip(&traced) {
            *slot = digits[f];
        }
        groups[join_index(&td, &traced_dims)].push((join_index(&kd, &kept_dims), full));
    }
    let mut out = ComplexMatrix::zeros(kept_total, kept_total);
    for group in &groups {
        for &(ki, ri) in group {
            for &(kj, rj) in group {
                out[(ki, kj)] += m[(ri, rj)];
            }
        }
    }
    Ok(out)
}

/// Reorders tensor factors: factor `i` of the result is factor `perm[i]` of `m`.
pub fn permute_subsystems(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix> {
    validate_factors(m, dims)?;
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() || perm.iter().any(|&p| p >= dims.len() || std::mem::replace(&mut seen[p], true)) {
        return Err(QcapError::ShapeMismatch(format!("{perm:?} is not a permutation of {} factors", dims.len())));
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let n = m.rows();
    let mut map = vec![0usize; n];
    let mut digits = vec![0usize; dims.len()];
    let mut new_digits = vec![0usize; dims.len()];
    for (old, slot) in map.iter_mut().enumerate() {
        split_index(old, dims, &mut digits);
        for (i, &p) in perm.iter().enumerate() {
            new_digits[i] = digits[p];
        }
        *slot = join_index(&new_digits, &new_dims);
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = self.vectors.as_dmatrix();
        let n = v.nrows();
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, k)] *= s;
            }
        }
        ComplexMatrix(scaled * v.adjoint())
    }
}

/// Hermitian eigendecomposition; the input is symmetrized first.
pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(QcapError::ShapeMismatch("eigh needs a square matrix".into()));
    }
    let eig = m.hermitian_part().0.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(m.rows(), m.rows(), |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &DMatrix<C64>) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Entropy in bits of a spectrum, after clipping eigenvalues in
/// `[-EIGEN_CLIP, 0)` to zero and renormalizing to unit sum.
pub fn entropy_of_spectrum(values: &[f64]) -> Result<f64> {
    let mut clipped = Vec::with_capacity(values.len());
    for &v in values {
        if v < -EIGEN_CLIP {
            return Err(QcapError::NotPositiveSemidefinite(v));
        }
        clipped.push(v.max(0.0));
    }
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(QcapError::NotDensityMatrix("zero trace".into()));
    }
    Ok(clipped
        .iter()
        .map(|&v| v / total)
        .filter(|&v| v > 0.0)
        .map(|v| -v * v.log2())
        .sum())
}

/// Unit-trace positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates hermiticity (1e-12), unit trace (1e-10) and positivity (-1e-10).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let herm = matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(QcapError::NotDensityMatrix(format!("hermiticity error {herm:e}")));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(QcapError::NotDensityMatrix(format!("trace {tr}")));
        }
        let matrix = matrix.hermitian_part();
        let min = eigvalsh(matrix.as_dmatrix()).first().copied().unwrap_or(0.0);
        if min < -EIGEN_CLIP {
            return Err(QcapError::NotPositiveSemidefinite(min));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Wraps a matrix that is a density matrix by construction (channel
    /// outputs, normalized Gram matrices). Only the Hermitian part is kept.
    pub fn new_unchecked(matrix: ComplexMatrix) -> Self {
        DensityMatrix { matrix: matrix.hermitian_part() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    /// `|psi><psi|` for a unit vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(QcapError::NotDensityMatrix(format!("state vector norm {norm}")));
        }
        Ok(DensityMatrix { matrix: ComplexMatrix::outer(psi, psi) })
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_diagonal(probs))
    }

    /// `G G† / tr(G G†)`.
    pub fn from_factor(g: &ComplexMatrix) -> Self {
        let gram = g * &g.adjoint();
        let t = gram.trace().re;
        DensityMatrix::new_unchecked(gram.scale_real(1.0 / t))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(self.matrix.as_dmatrix())
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix { matrix: kron(&self.matrix, &other.matrix)? })
    }

    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
        Ok(DensityMatrix::new_unchecked(partial_trace(&self.matrix, dims, keep)?))
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        if u.cols() != self.dim() {
            return Err(QcapError::ShapeMismatch("conjugation dimension".into()));
        }
        Ok(DensityMatrix::new_unchecked(&(u * &self.matrix) * &u.adjoint()))
    }
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues())
}

/// `<psi|rho|psi>` for a unit vector `psi`.
pub fn fidelity_with_pure(psi: &[C64], rho: &DensityMatrix) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(QcapError::ShapeMismatch(format!(
            "state of length {} against a {}-dimensional density matrix",
            psi.len(),
            rho.dim()
        )));
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > TRACE_TOL {
        return Err(QcapError::InvalidParameter(format!("state vector norm {norm}")));
    }
    let rho_psi = rho.matrix().apply_to(psi);
    Ok(psi.iter().zip(&rho_psi).map(|(a, b)| a.conj() * b).sum::<C64>().re)
}

/// Computational basis vector `|index>`.
pub fn ket(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[index] = C64::new(1.0, 0.0);
    v
}

/// `|Φ_d> = Σ_i |ii> / √d`.
pub fn max_entangled(dim: usize) -> Vec<C64> {
    let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
    let mut v = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        v[i * dim + i] = amp;
    }
    v
}

/// Random matrices and states.
pub mod random {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::{ComplexMatrix, DensityMatrix, C64};

    /// Matrix with i.i.d. standard complex Gaussian entries.
    pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
    }

    /// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
    pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
        let qr = ginibre(dim, dim, rng).into_dmatrix().qr();
        let (mut q, r) = qr.unpack();
        for k in 0..dim {
            let d = r[(k, k)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
            for i in 0..dim {
                q[(i, k)] *= phase;
            }
        }
        ComplexMatrix::from_dmatrix(q)
    }

    /// Uniformly random unit vector.
    pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
        let g = ginibre(dim, 1, rng);
        let norm = g.frobenius_norm();
        (0..dim).map(|i| g[(i, 0)] / norm).collect()
    }

    /// Full-rank density matrix from the Ginibre-induced (Hilbert–Schmidt) measure.
    pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
        DensityMatrix::from_factor(&ginibre(dim, dim, rng))
    }

    /// Random Hermitian matrix (GUE-like).
    pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
        ginibre(dim, dim, rng).hermitian_part()
    }
}

#[cfg(test)]
mod tests {
    use super::random::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2).unwrap(), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_of_basis_projectors() {
        let p0 = ComplexMatrix::outer(&ket(2, 0), &ket(2, 0));
        let p1 = ComplexMatrix::outer(&ket(2, 1), &ket(2, 1));
        let k = kron(&p0, &p1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i, j) == (1, 1) { c(1.0) } else { c(0.0) };
                assert_eq!(k[(i, j)], expected);
            }
        }
    }

    #[test]
    fn kron_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ginibre(2, 3, &mut rng);
        let b = ginibre(3, 2, &mut rng);
        let k = kron(&a, &b).unwrap();
        assert_eq!((k.rows(), k.cols()), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_rejects_oversized_result() {
        let a = ComplexMatrix::zeros(100, 1);
        let b = ComplexMatrix::zeros(50, 1);
        assert!(matches!(kron(&a, &b), Err(QcapError::DimensionTooLarge { dim: 5000, .. })));
    }

    #[test]
    fn marginal_of_max_entangled_is_maximally_mixed() {
        let phi = DensityMatrix::pure(&max_entangled(2)).unwrap();
        let red = partial_trace(phi.matrix(), &[2, 2], &[0]).unwrap();
        assert!(red.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density_matrix(3, &mut rng);
        let sigma = random_density_matrix(2, &mut rng);
        let joint = rho.kron(&sigma).unwrap();
        let red = partial_trace(joint.matrix(), &[3, 2], &[0]).unwrap();
        assert!(red.max_abs_diff(rho.matrix()) < 1e-12);
        let red = partial_trace(joint.matrix(), &[3, 2], &[1]).unwrap();
        assert!(red.max_abs_diff(sigma.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dims = [2usize, 3, 2];
        let m = random_hermitian(12, &mut rng);
        let red = partial_trace(&m, &dims, &[0, 2]).unwrap();
        // oracle: out[(a c),(a' c')] = Σ_b m[(a b c),(a' b c')]
        for a in 0..2 {
            for cc in 0..2 {
                for a2 in 0..2 {
                    for c2 in 0..2 {
                        let mut acc = c(0.0);
                        for b in 0..3 {
                            acc += m[(a * 6 + b * 2 + cc, a2 * 6 + b * 2 + c2)];
                        }
                        assert!((red[(a * 2 + cc, a2 * 2 + c2)] - acc).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_shape_errors() {
        let m = ComplexMatrix::identity(6);
        assert!(matches!(partial_trace(&m, &[2, 2], &[0]), Err(QcapError::ShapeMismatch(_))));
        assert!(matches!(partial_trace(&m, &[2, 3], &[]), Err(QcapError::ShapeMismatch(_))));
        assert!(matches!(partial_trace(&m, &[2, 3], &[2]), Err(QcapError::ShapeMismatch(_))));
    }

    #[test]
    fn entropy_examples() {
        let pure = DensityMatrix::pure(&ket(2, 0)).unwrap();
        assert_eq!(von_neumann_entropy(&pure).unwrap(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((von_neumann_entropy(&mixed).unwrap() - 2.0).abs() < 1e-12);
        let d = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        let h = -0.25 * 0.25f64.log2() - 0.75 * 0.75f64.log2();
        assert!((von_neumann_entropy(&d).unwrap() - h).abs() < 1e-12);
        assert!((h - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn entropy_rejects_negative_spectrum() {
        assert!(matches!(
            entropy_of_spectrum(&[1.1, -0.1]),
            Err(QcapError::NotPositiveSemidefinite(_))
        ));
        // tiny negative values are clipped
        assert!(entropy_of_spectrum(&[1.0, -1e-12]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.5, -0.5]).is_err());
        let mut m = ComplexMatrix::identity(2).scale_real(0.5);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let phi = max_entangled(2);
        let rho = DensityMatrix::pure(&phi).unwrap();
        assert!((fidelity_with_pure(&phi, &rho).unwrap() - 1.0).abs() < 1e-15);
        let half = DensityMatrix::maximally_mixed(2);
        assert!((fidelity_with_pure(&ket(2, 0), &half).unwrap() - 0.5).abs() < 1e-15);
        let quarter = DensityMatrix::maximally_mixed(4);
        assert!((fidelity_with_pure(&phi, &quarter).unwrap() - 0.25).abs() < 1e-15);
        assert!(fidelity_with_pure(&ket(3, 0), &half).is_err());
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..6 {
            assert!(haar_unitary(d, &mut rng).is_unitary(1e-12));
        }
    }

    #[test]
    fn permute_subsystems_swaps_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_density_matrix(2, &mut rng);
        let b = random_density_matrix(3, &mut rng);
        let ab = a.kron(&b).unwrap();
        let ba = b.kron(&a).unwrap();
        let swapped = permute_subsystems(ab.matrix(), &[2, 3], &[1, 0]).unwrap();
        assert!(swapped.max_abs_diff(ba.matrix()) < 1e-15);
    }
}
