//! Truncated model spaces `H_N ⊂ H_k` in the orthonormal monomial basis
//! `e(α) = √(a_α) z^α`, the model tuples `T_N`, and the quadratic-form
//! certificate used to rule out characteristic functions through `k_n`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{b_series, lift_to_multiindex, KernelSeries};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::multiindex::{GradedBasis, MultiIndex};
use crate::rational::{self, qf, Rational};
use crate::tuple::OperatorTuple;

/// `span{e(α) : |α| ≤ N}` inside `H_k`.
#[derive(Clone, Debug)]
pub struct ModelSpace {
    basis: GradedBasis,
    /// `√(a_α)` per basis element, i.e. `1/‖z^α‖`.
    sqrt_a: Vec<f64>,
    shifts: Vec<CMatrix>,
}

impl ModelSpace {
    pub fn new(k: &KernelSeries, n_max: usize) -> Result<Self> {
        if n_max > k.truncation() {
            return Err(Error::BeyondTruncation { requested: n_max, truncation: k.truncation() });
        }
        let d = k.dim();
        let basis = GradedBasis::new(d, n_max);
        let sqrt_a = basis
            .indices()
            .iter()
            .map(|alpha| lift_to_multiindex(k.coeffs(), alpha).map(|a| rational::to_f64(&a).sqrt()))
            .collect::<Result<Vec<_>>>()?;
        let len = basis.len();
        let mut shifts = vec![linalg::zeros(len, len); d];
        for (col, alpha) in basis.indices().iter().enumerate() {
            if alpha.degree() == n_max {
                continue;
            }
            for (i, m) in shifts.iter_mut().enumerate() {
                let row = basis.position(&alpha.bump(i)).expect("degree below cap");
                // ‖z^{α+e_i}‖ / ‖z^α‖
                m[(row, col)] = c(sqrt_a[col] / sqrt_a[row]);
            }
        }
        Ok(Self { basis, sqrt_a, shifts })
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn max_degree(&self) -> usize {
        self.basis.max_degree()
    }

    pub fn sqrt_a(&self) -> &[f64] {
        &self.sqrt_a
    }

    /// Truncated `M_{z_i}` (degree-`N` monomials are sent to zero).
    pub fn shift(&self, i: usize) -> &CMatrix {
        &self.shifts[i]
    }

    pub fn shifts(&self) -> &[CMatrix] {
        &self.shifts
    }

    /// `M_{z_i} ⊗ I_r`.
    pub fn shift_tensor(&self, i: usize, r: usize) -> CMatrix {
        linalg::kron(&self.shifts[i], &linalg::identity(r))
    }

    /// Coordinates of the truncated kernel function `k_w = Σ a_α conj(w^α) z^α`.
    pub fn kernel_vector(&self, w: &[Complex64]) -> CVector {
        CVector::from_iterator(
            self.len(),
            self.basis.indices().iter().zip(&self.sqrt_a).map(|(alpha, s)| alpha.monomial(w).conj() * s),
        )
    }

    pub fn unit_vector(&self, alpha: &MultiIndex) -> Result<CVector> {
        let pos = self
            .basis
            .position(alpha)
            .ok_or_else(|| Error::InvalidInput(format!("{alpha:?} is outside the truncated space")))?;
        let mut v = CVector::zeros(self.len());
        v[pos] = c(1.0);
        Ok(v)
    }

    /// Indices of basis elements whose degree lies in `lo..=hi`.
    pub fn degree_range(&self, lo: usize, hi: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| (lo..=hi).contains(&self.basis.indices()[i].degree())).collect()
    }
}

/// `T_N = P_{H_N} M_z|_{H_N}` in the orthonormal monomial basis.
pub fn model_tuple(k: &KernelSeries, n_max: usize) -> Result<OperatorTuple> {
    let space = ModelSpace::new(k, n_max)?;
    OperatorTuple::new(space.shifts.clone(), Some(space.basis.indices().to_vec()))
}

/// The window `span{e(α) : N+1 ≤ |α| ≤ W}` of the invariant subspace
/// `M_N = span{z^α : |α| ≥ N+1}` of `H_k`.
#[derive(Clone, Debug)]
pub struct QuadraticWindow {
    pub indices: Vec<MultiIndex>,
    /// `Q = I − Σ_{α≠0} b_α^(l) B^α (B^α)*` on the window, `B = M_z|_{M_N}`.
    pub form: CMatrix,
}

impl QuadraticWindow {
    pub fn evaluate(&self, v: &CVector) -> Result<f64> {
        if v.len() != self.indices.len() {
            return Err(Error::InvalidInput(format!(
                "vector has {} coordinates, window has {}",
                v.len(),
                self.indices.len()
            )));
        }
        Ok((v.adjoint() * &self.form * v)[(0, 0)].re)
    }

    pub fn unit_vector(&self, alpha: &MultiIndex) -> Result<CVector> {
        let pos = self
            .indices
            .iter()
            .position(|a| a == alpha)
            .ok_or_else(|| Error::InvalidInput(format!("{alpha:?} is outside the window")))?;
        let mut v = CVector::zeros(self.indices.len());
        v[pos] = c(1.0);
        Ok(v)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.form)
    }
}

/// Builds the form of the associated restriction of `M_z^(k)` to `M_N`,
/// truncated to degrees `≤ window`. Only adjoints enter the form and they lower
/// degree, so the truncation is exact on the window.
pub fn quadratic_window(k: &KernelSeries, l: &KernelSeries, n: usize, window: usize) -> Result<QuadraticWindow> {
    if window <= n {
        return Err(Error::WindowTooSmall(format!("window degree {window} must exceed N = {n}")));
    }
    if l.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: l.dim() });
    }
    let space = ModelSpace::new(k, window)?;
    let idx = space.degree_range(n + 1, window);
    let adj: Vec<CMatrix> = space.shifts().iter().map(|m| linalg::principal(&m.adjoint(), &idx)).collect();
    let b = b_series(l).to_f64();
    let len = idx.len();
    let depth = window - n;
    if depth > l.truncation() {
        return Err(Error::BeyondTruncation { requested: depth, truncation: l.truncation() });
    }
    let mut form = linalg::identity(len);
    let mut term = linalg::identity(len);
    for bj in b.iter().take(depth + 1).skip(1) {
        term = adj.iter().fold(linalg::zeros(len, len), |acc, ci| acc + ci.adjoint() * &term * ci);
        form -= &term * c(*bj);
    }
    let indices = idx.iter().map(|&i| space.basis().indices()[i].clone()).collect();
    Ok(QuadraticWindow { indices, form })
}

/// `⟨Q v, v⟩` for each test vector (window coordinates).
pub fn quadratic_form_certificate(
    k: &KernelSeries,
    l: &KernelSeries,
    n: usize,
    window: usize,
    test_vectors: &[CVector],
) -> Result<Vec<f64>> {
    let w = quadratic_window(k, l, n, window)?;
    test_vectors.iter().map(|v| w.evaluate(v)).collect()
}

/// `1 − n (N+2)/(N+m+1)`: the value of the form at `e((N+2,0,…,0))` for
/// `k = k_m`, `l = k_n`.
pub fn impossibility_closed_form(m: u32, n: u32, big_n: usize) -> Rational {
    let big_n = big_n as i64;
    Rational::from_integer(1.into()) - qf(n as i64 * (big_n + 2), big_n + m as i64 + 1)
}
