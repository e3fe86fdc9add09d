//! Dense complex linear algebra used by the float backend.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Shared numerical thresholds.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Negative eigenvalues above `-eig_clamp` are clamped to zero before a square root.
    pub eig_clamp: f64,
    /// Singular/eigen values at or below this are treated as zero (ranks, ranges).
    pub rank_cutoff: f64,
    /// Increment size at which an infinite operator series is considered converged.
    pub series_stop: f64,
    /// Hard cap on the degree of any infinite operator series.
    pub degree_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eig_clamp: 1e-10, rank_cutoff: 1e-10, series_stop: 1e-13, degree_cap: 64 }
    }
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(r, cols)
}

pub fn from_real(m: &DMatrix<f64>) -> CMatrix {
    m.map(c)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

fn to_faer(m: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(σ) V*`, singular values descending.
pub fn svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (r, c) = (m.nrows(), m.ncols());
    let k = r.min(c);
    if k == 0 {
        return (zeros(r, 0), vec![], zeros(c, 0));
    }
    let d = to_faer(m).thin_svd().expect("SVD converges");
    let (u, s, v) = (d.U(), d.S().column_vector(), d.V());
    let values = (0..k).map(|i| s[i].re).collect();
    (CMatrix::from_fn(r, k, |i, j| u[(i, j)]), values, CMatrix::from_fn(c, k, |i, j| v[(i, j)]))
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    svd(m).1
}

/// Rotates each column so that its largest-magnitude entry is real and positive.
pub fn canonical_phase(m: &mut CMatrix) {
    for j in 0..m.ncols() {
        let mut best = 0;
        let mut best_norm = -1.0;
        for i in 0..m.nrows() {
            let n = m[(i, j)].norm();
            if n > best_norm + 1e-12 {
                best = i;
                best_norm = n;
            }
        }
        if best_norm > 0.0 {
            let phase = m[(best, j)].conj() / best_norm;
            for i in 0..m.nrows() {
                m[(i, j)] *= phase;
            }
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues descending,
/// eigenvectors as columns with canonical phases.
///
/// Uses faer's self-adjoint solver; nalgebra's symmetric eigensolvers (real and
/// complex) return wrong eigenpairs on some clustered spectra.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], zeros(0, 0));
    }
    let sym = faer::Mat::<Complex64>::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let evd = sym.self_adjoint_eigen(faer::Side::Lower).expect("self-adjoint eigendecomposition converges");
    let (s, u) = (evd.S().column_vector(), evd.U());
    // faer sorts ascending
    let values = (0..n).rev().map(|j| s[j].re).collect();
    let mut vecs = CMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    canonical_phase(&mut vecs);
    (values, vecs)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.last().copied().unwrap_or(f64::INFINITY)
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(m);
    if let Some(&lo) = vals.last() {
        if lo < -tol.eig_clamp {
            return Err(Error::NotContraction { min_eigenvalue: lo });
        }
    }
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = vals[j].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * vecs.adjoint())
}

/// Orthonormal basis of the range of a PSD matrix (eigenvalues above the cutoff).
pub fn psd_range(m: &CMatrix, cutoff: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff).collect();
    select_columns(&vecs, &keep)
}

/// Orthonormal basis of the range of an arbitrary matrix (singular values above the cutoff).
pub fn range_basis(m: &CMatrix, cutoff: f64) -> CMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return zeros(m.nrows(), 0);
    }
    let (u, sv, _) = svd(m);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > cutoff).collect();
    let mut out = select_columns(&u, &keep);
    canonical_phase(&mut out);
    out
}

/// `Σ_{λ>cutoff} λ^{-1/2} v v*` for a PSD matrix `Σ λ v v*`: the pseudo-inverse
/// of its square root, with the cutoff applied to the squared spectrum.
pub fn psd_inv_sqrt(m: &CMatrix, cutoff: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = if vals[j] > cutoff { 1.0 / vals[j].sqrt() } else { 0.0 };
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// Orthonormal basis of the orthogonal complement of the span of orthonormal columns `q`.
pub fn complement_basis(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let proj = identity(n) - q * q.adjoint();
    psd_range(&proj, 0.5)
}

pub fn select_columns(m: &CMatrix, cols: &[usize]) -> CMatrix {
    let mut out = zeros(m.nrows(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}

pub fn select_rows(m: &CMatrix, rows: &[usize]) -> CMatrix {
    let mut out = zeros(rows.len(), m.ncols());
    for (j, &i) in rows.iter().enumerate() {
        out.set_row(j, &m.row(i));
    }
    out
}

/// Principal submatrix on the given index set.
pub fn principal(m: &CMatrix, idx: &[usize]) -> CMatrix {
    let mut out = zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(a, b)] = m[(i, j)];
        }
    }
    out
}

/// Moore–Penrose pseudo-inverse of a Hermitian PSD matrix.
pub fn psd_pinv(m: &CMatrix, cutoff: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = if vals[j] > cutoff { 1.0 / vals[j] } else { 0.0 };
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// `‖Q*Q − I‖` for a candidate orthonormal column set.
pub fn orthonormality_residual(q: &CMatrix) -> f64 {
    max_abs(&(q.adjoint() * q - identity(q.ncols())))
}

/// Unitary factor of the polar decomposition (`X Y*` from the SVD).
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let (u, _, v) = svd(m);
    u * v.adjoint()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Stacks blocks vertically.
pub fn vstack(blocks: &[CMatrix]) -> CMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut k = 0;
    for b in blocks {
        out.view_mut((0, k), (rows, b.ncols())).copy_from(b);
        k += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn herm(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        &a * a.adjoint()
    }

    #[test]
    fn complex_eigen_with_repeated_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CMatrix::from_fn(5, 5, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let u = polar_unitary(&a);
        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.5), c(0.5), c(0.5), c(0.0)]));
        let h = &u * d * u.adjoint();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(orthonormality_residual(&vecs) < 1e-13);
        for (v, e) in vals.iter().zip([1.0, 0.5, 0.5, 0.5, 0.0]) {
            assert!((v - e).abs() < 1e-13);
        }
        let r = psd_sqrt(&h, &Tolerances::default()).unwrap();
        assert!(max_abs(&(&r * &r - &h)) < 1e-13);
    }

    /// The spectrum of `I − T̃*T̃` for a compression that nalgebra's solvers got wrong.
    #[test]
    fn clustered_spectra() {
        let spectrum = [1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 1.0 / 3.0];
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CMatrix::from_fn(8, 8, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let u = polar_unitary(&a);
            let h = &u * CMatrix::from_diagonal(&DVector::from_iterator(8, spectrum.iter().map(|&x| c(x)))) * u.adjoint();
            let (vals, vecs) = hermitian_eigen(&h);
            let d = CMatrix::from_diagonal(&DVector::from_iterator(8, vals.iter().map(|&x| c(x))));
            assert!(max_abs(&(&h * &vecs - &vecs * d)) < 1e-13, "seed {seed}");
            let (uu, sv, v) = svd(&h);
            let d = CMatrix::from_diagonal(&DVector::from_iterator(8, sv.iter().map(|&x| c(x))));
            assert!(max_abs(&(uu * d * v.adjoint() - &h)) < 1e-13, "seed {seed}");
        }
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let m = herm(5, 7);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let mut d = zeros(5, 5);
        for i in 0..5 {
            d[(i, i)] = c(vals[i]);
        }
        let back = &vecs * d * vecs.adjoint();
        assert!(max_abs(&(back - &m)) < 1e-12);
        assert!(orthonormality_residual(&vecs) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = herm(4, 3);
        let r = psd_sqrt(&m, &Tolerances::default()).unwrap();
        assert!(max_abs(&(&r * &r - &m)) < 1e-12);
        assert!(max_abs(&(&r - r.adjoint())) < 1e-12);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let m = from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-6]));
        assert!(psd_sqrt(&m, &Tolerances::default()).is_err());
        let m = from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]));
        let r = psd_sqrt(&m, &Tolerances::default()).unwrap();
        assert_eq!(r[(1, 1)], c(0.0));
    }

    #[test]
    fn range_and_complement() {
        let m = from_real(&DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]));
        let q = range_basis(&m, 1e-10);
        assert_eq!(q.ncols(), 1);
        let k = complement_basis(&q);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(q.adjoint() * &k)) < 1e-12);
    }

    #[test]
    fn canonical_phase_fixes_sign() {
        let mut m = from_real(&DMatrix::from_row_slice(2, 1, &[0.0, -1.0]));
        canonical_phase(&mut m);
        assert_eq!(m[(1, 0)], c(1.0));
    }
}
