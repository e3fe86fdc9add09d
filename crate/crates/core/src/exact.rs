//! Exact rational backend for tuples given in a basis with a diagonal Gram
//! matrix.
//!
//! Model tuples are irrational in an orthonormal basis (entries are square
//! roots of coefficient ratios) but integral in the monomial basis `z^α`,
//! whose Gram matrix is `diag(1/a_α)`. Adjoints are taken with respect to the
//! Gram matrix, `A† = W⁻¹ Aᵀ W`, so every squared identity (`Δ²`, `Γ²`,
//! purity, `Π*Π`) stays rational.

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::kernel::{b_series, KernelSeries};
use crate::linalg::{self, CMatrix};
use crate::multiindex::{GradedBasis, MultiIndex};
use crate::rational::{self, qmatrix_identity, qmatrix_is_zero, qmatrix_zero, QMatrix, Rational};
use crate::tuple::OperatorTuple;

#[derive(Clone, Debug)]
pub struct ExactTuple {
    mats: Vec<QMatrix>,
    /// Diagonal of the Gram matrix of the basis.
    weights: Vec<Rational>,
    labels: Option<Vec<MultiIndex>>,
    nilpotency: Option<usize>,
}

impl ExactTuple {
    pub fn new(mats: Vec<QMatrix>, weights: Vec<Rational>, labels: Option<Vec<MultiIndex>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidInput("tuple needs d >= 1 operators".into()));
        }
        let n = weights.len();
        if weights.iter().any(|w| *w <= Rational::zero()) {
            return Err(Error::InvalidInput("basis weights must be positive".into()));
        }
        for m in &mats {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
            }
        }
        for i in 0..mats.len() {
            for j in i + 1..mats.len() {
                if !qmatrix_is_zero(&(&mats[i] * &mats[j] - &mats[j] * &mats[i])) {
                    return Err(Error::NotCommuting(f64::NAN));
                }
            }
        }
        let mut t = Self { mats, weights, labels, nilpotency: None };
        t.nilpotency = t.detect_nilpotency();
        Ok(t)
    }

    /// Monomial-basis model of `(M_{z_1},…,M_{z_d})` compressed to `H_N`.
    pub fn model(k: &KernelSeries, n_max: usize) -> Result<Self> {
        if n_max > k.truncation() {
            return Err(Error::BeyondTruncation { requested: n_max, truncation: k.truncation() });
        }
        let d = k.dim();
        let basis = GradedBasis::new(d, n_max);
        let len = basis.len();
        let mut weights = Vec::with_capacity(len);
        for alpha in basis.indices() {
            let a = crate::kernel::lift_to_multiindex(k.coeffs(), alpha)?;
            weights.push(Rational::one() / a);
        }
        let mut mats = vec![qmatrix_zero(len, len); d];
        for (col, alpha) in basis.indices().iter().enumerate() {
            if alpha.degree() == n_max {
                continue;
            }
            for (i, m) in mats.iter_mut().enumerate() {
                let row = basis.position(&alpha.bump(i)).expect("degree below cap");
                m[(row, col)] = Rational::one();
            }
        }
        Self::new(mats, weights, Some(basis.indices().to_vec()))
    }

    pub fn dim(&self) -> usize {
        self.mats.len()
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn mats(&self) -> &[QMatrix] {
        &self.mats
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[MultiIndex]> {
        self.labels.as_deref()
    }

    pub fn nilpotency(&self) -> Option<usize> {
        self.nilpotency
    }

    /// `A† = W⁻¹ Aᵀ W`.
    pub fn adjoint(&self, a: &QMatrix) -> QMatrix {
        let n = self.size();
        QMatrix::from_fn(n, n, |i, j| &a[(j, i)] * &self.weights[j] / &self.weights[i])
    }

    pub fn identity(&self) -> QMatrix {
        qmatrix_identity(self.size())
    }

    /// `σ(X) = Σ_i T_i X T_i†`.
    pub fn sigma(&self, x: &QMatrix) -> QMatrix {
        let mut acc = qmatrix_zero(self.size(), self.size());
        for t in &self.mats {
            acc += t * x * self.adjoint(t);
        }
        acc
    }

    fn detect_nilpotency(&self) -> Option<usize> {
        let mut x = self.identity();
        for p in 0..=self.size() + 1 {
            if qmatrix_is_zero(&x) {
                return Some(p);
            }
            x = self.sigma(&x);
        }
        None
    }

    /// `Σ_{|α|≥start} c_{|α|} binom(|α|,α) T^α X (T^α)†`, exact for nilpotent tuples.
    pub fn lifted_sum(&self, coeffs: &[Rational], start: usize, x: &QMatrix) -> Result<QMatrix> {
        let p = self.nilpotency.ok_or_else(|| Error::ExactUnavailable("tuple is not nilpotent".into()))?;
        if p > coeffs.len() {
            return Err(Error::BeyondTruncation { requested: p - 1, truncation: coeffs.len() - 1 });
        }
        let mut acc = qmatrix_zero(self.size(), self.size());
        let mut term = x.clone();
        for j in 0..p {
            if j > 0 {
                term = self.sigma(&term);
            }
            if j >= start && !coeffs[j].is_zero() {
                acc += rational::qmatrix_scale(&term, &coeffs[j]);
            }
        }
        Ok(acc)
    }

    /// `I − Σ_{α≠0} b_α T^α (T^α)†` for the `b`-series of `kernel`.
    pub fn defect_sq(&self, kernel: &KernelSeries) -> Result<QMatrix> {
        let b = b_series(kernel);
        Ok(self.identity() - self.lifted_sum(b.coeffs(), 1, &self.identity())?)
    }

    /// `Σ_α a_α T^α Δ² (T^α)†`; the identity exactly when the tuple is pure.
    pub fn purity_sum(&self, kernel: &KernelSeries, delta_sq: &QMatrix) -> Result<QMatrix> {
        self.lifted_sum(kernel.coeffs(), 0, delta_sq)
    }

    /// Orthogonal projection onto the first basis vector (the constants for a model).
    pub fn e0(&self) -> QMatrix {
        let mut m = qmatrix_zero(self.size(), self.size());
        m[(0, 0)] = Rational::one();
        m
    }

    /// The same tuple in the orthonormal basis `x_i / √w_i`.
    pub fn to_float(&self) -> Result<OperatorTuple> {
        let s: Vec<f64> = self.weights.iter().map(|w| rational::to_f64(w).sqrt()).collect();
        let mats = self.mats.iter().map(|m| to_orthonormal(m, &s)).collect();
        OperatorTuple::new(mats, self.labels.clone())
    }

    /// An operator given in this basis, expressed in the orthonormal basis.
    pub fn operator_to_float(&self, a: &QMatrix) -> CMatrix {
        let s: Vec<f64> = self.weights.iter().map(|w| rational::to_f64(w).sqrt()).collect();
        to_orthonormal(a, &s)
    }
}

fn to_orthonormal(m: &QMatrix, s: &[f64]) -> CMatrix {
    let f: DMatrix<f64> = rational::qmatrix_to_f64(m);
    linalg::from_real(&DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] * s[i] / s[j]))
}
