//! Commuting operator tuples on finite-dimensional Hilbert spaces (float
//! backend), their defect operators, purity and the operator series
//! `c_w(T) = Σ c_α conj(w^α) T^α`.
//!
//! Sums over multi-indices of the form `Σ_{|α|=j} binom(j,α) T^α X (T^α)*` are
//! computed as `σ^j(X)` with `σ(X) = Σ_i T_i X T_i*`; for commuting tuples the
//! two agree term by term. Likewise
//! `Σ_{|α|=j} binom(j,α) conj(w^α) T^α = (Σ_i conj(w_i) T_i)^j`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{b_series, KernelSeries};
use crate::linalg::{self, c, max_abs, CMatrix, Tolerances};
use crate::multiindex::{enumerate_degree, MultiIndex};

/// `σ^j(I)` counts as zero when below this multiple of `(Σ‖T_i‖²)^j`.
const NILPOTENT_TOL: f64 = 1e-12;

/// A commuting `d`-tuple of `n × n` complex matrices in an orthonormal basis.
pub struct OperatorTuple {
    mats: Vec<CMatrix>,
    labels: Option<Vec<MultiIndex>>,
    nilpotency: Option<usize>,
    powers: RwLock<HashMap<MultiIndex, Arc<CMatrix>>>,
}

impl Clone for OperatorTuple {
    fn clone(&self) -> Self {
        Self {
            mats: self.mats.clone(),
            labels: self.labels.clone(),
            nilpotency: self.nilpotency,
            powers: RwLock::new(HashMap::new()),
        }
    }
}

impl std::fmt::Debug for OperatorTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorTuple")
            .field("d", &self.mats.len())
            .field("n", &self.size())
            .field("nilpotency", &self.nilpotency)
            .finish()
    }
}

impl OperatorTuple {
    pub fn new(mats: Vec<CMatrix>, labels: Option<Vec<MultiIndex>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidInput("tuple needs d >= 1 operators".into()));
        }
        let n = mats[0].nrows();
        for m in &mats {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: l.len() });
            }
        }
        let scale = mats.iter().map(max_abs).fold(0.0, f64::max).max(1.0);
        let residual = commutation_residual(&mats);
        if residual > 1e-12 * scale * scale {
            return Err(Error::NotCommuting(residual));
        }
        let nilpotency = detect_nilpotency(&mats);
        Ok(Self { mats, labels, nilpotency, powers: RwLock::new(HashMap::new()) })
    }

    pub fn dim(&self) -> usize {
        self.mats.len()
    }

    /// Size `n` of the underlying space.
    pub fn size(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn get(&self, i: usize) -> &CMatrix {
        &self.mats[i]
    }

    pub fn labels(&self) -> Option<&[MultiIndex]> {
        self.labels.as_deref()
    }

    /// Smallest `p` with `T^α = 0` for every `|α| = p`; `None` if not nilpotent.
    pub fn nilpotency(&self) -> Option<usize> {
        self.nilpotency
    }

    /// `T^α`, memoized by the graded recursion `T^{α+e_i} = T_i T^α`.
    pub fn apply_power(&self, alpha: &MultiIndex) -> Arc<CMatrix> {
        assert_eq!(alpha.dim(), self.dim(), "multi-index dimension");
        if let Some(m) = self.powers.read().expect("power cache poisoned").get(alpha) {
            return m.clone();
        }
        let value = match (0..alpha.dim()).find(|&i| alpha.entries()[i] > 0) {
            None => linalg::identity(self.size()),
            Some(i) => {
                let mut lower = alpha.entries().to_vec();
                lower[i] -= 1;
                let lower = MultiIndex::new(lower).expect("dimension >= 1");
                &self.mats[i] * &*self.apply_power(&lower)
            }
        };
        let value = Arc::new(value);
        self.powers.write().expect("power cache poisoned").insert(alpha.clone(), value.clone());
        value
    }

    /// `σ(X) = Σ_i T_i X T_i*`.
    pub fn sigma(&self, x: &CMatrix) -> CMatrix {
        self.mats.iter().fold(linalg::zeros(x.nrows(), x.ncols()), |acc, t| acc + t * x * t.adjoint())
    }

    /// `Σ_{j ≥ start} c_j σ^j(X)`, i.e. `Σ_{|α|≥start} c_α T^α X (T^α)*`.
    pub fn orbit_sum(&self, coeffs: &[f64], start: usize, x: &CMatrix, tol: &Tolerances) -> Result<SeriesSum> {
        let mut term = x.clone();
        for _ in 0..start {
            term = self.sigma(&term);
        }
        accumulate(self.nilpotency, coeffs, start, term, |t| self.sigma(t), tol)
    }

    /// Same sum, enumerating multi-indices and memoized powers one by one.
    pub fn orbit_sum_by_index(&self, coeffs: &[f64], start: usize, x: &CMatrix) -> Result<CMatrix> {
        let p = self.nilpotency.ok_or_else(|| Error::InvalidInput("enumeration route needs a nilpotent tuple".into()))?;
        let mut acc = linalg::zeros(x.nrows(), x.ncols());
        for j in start..p {
            let cj = *coeffs.get(j).ok_or(Error::BeyondTruncation { requested: j, truncation: coeffs.len() - 1 })?;
            for alpha in enumerate_degree(self.dim(), j) {
                let w = cj * alpha.multinomial_f64()?;
                let ta = self.apply_power(&alpha);
                acc += &*ta * x * ta.adjoint() * c(w);
            }
        }
        Ok(acc)
    }

    /// `c_w(T) = Σ_α c_α conj(w^α) T^α`.
    pub fn operator_series(&self, coeffs: &[f64], w: &[Complex64], tol: &Tolerances) -> Result<CMatrix> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: w.len() });
        }
        let r = crate::kernel::norm(w);
        if r >= 1.0 {
            return Err(Error::OutsideBall(r));
        }
        let x = self.mats.iter().zip(w).fold(linalg::zeros(self.size(), self.size()), |acc, (t, wi)| acc + t * wi.conj());
        let sum = accumulate(self.nilpotency, coeffs, 0, linalg::identity(self.size()), |m| &x * m, tol)?;
        Ok(sum.value)
    }

    pub fn is_model(&self) -> bool {
        self.labels.is_some()
    }
}

/// Result of summing an operator series.
#[derive(Clone, Debug)]
pub struct SeriesSum {
    pub value: CMatrix,
    /// Highest degree included.
    pub degree_used: usize,
    /// Norm of each added term, by degree.
    pub increments: Vec<f64>,
    /// The sum is finite (nilpotent tuple or finitely supported coefficients).
    pub exact: bool,
}

fn accumulate(
    nilpotency: Option<usize>,
    coeffs: &[f64],
    start: usize,
    first_term: CMatrix,
    step: impl Fn(&CMatrix) -> CMatrix,
    tol: &Tolerances,
) -> Result<SeriesSum> {
    let last = coeffs.len() - 1;
    // trailing zeros mean the coefficients are finitely supported, not just truncated
    let last_nonzero = coeffs.iter().rposition(|&x| x != 0.0).unwrap_or(0);
    let (limit, exact) = match nilpotency {
        Some(0) => (None, true),
        Some(p) if last_nonzero < last => (Some((p - 1).min(last_nonzero)), true),
        Some(p) if p - 1 > last => return Err(Error::BeyondTruncation { requested: p - 1, truncation: last }),
        Some(p) => (Some(p - 1), true),
        None if last_nonzero < last => (Some(last_nonzero), true),
        None => (Some(tol.degree_cap.min(last)), false),
    };
    let n = first_term.nrows();
    let m = first_term.ncols();
    let mut value = linalg::zeros(n, m);
    let mut increments = Vec::new();
    let mut term = first_term;
    let mut degree_used = start;
    if let Some(limit) = limit {
        for j in start..=limit {
            if j > start {
                term = step(&term);
            }
            let inc = &term * c(coeffs[j]);
            increments.push(max_abs(&inc));
            value += inc;
            degree_used = j;
            if !exact && j > start && increments[increments.len() - 1] < tol.series_stop && max_abs(&term) < tol.series_stop {
                break;
            }
        }
    }
    if !exact {
        let last_inc = increments.last().copied().unwrap_or(0.0);
        if last_inc >= tol.series_stop {
            return Err(Error::NoConvergence { cap: degree_used, increment: last_inc });
        }
    }
    Ok(SeriesSum { value, degree_used, increments, exact })
}

pub fn commutation_residual(mats: &[CMatrix]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..mats.len() {
        for j in i + 1..mats.len() {
            worst = worst.max(max_abs(&(&mats[i] * &mats[j] - &mats[j] * &mats[i])));
        }
    }
    worst
}

fn detect_nilpotency(mats: &[CMatrix]) -> Option<usize> {
    let n = mats[0].nrows();
    let scale: f64 = mats.iter().map(|t| linalg::op_norm(t).powi(2)).sum();
    let mut x = linalg::identity(n);
    let mut bound = 1.0;
    for p in 0..=n + 1 {
        if max_abs(&x) <= NILPOTENT_TOL * bound {
            return Some(p);
        }
        x = mats.iter().fold(linalg::zeros(n, n), |acc, t| acc + t * &x * t.adjoint());
        bound *= scale;
    }
    None
}

/// `Δ_T`, `Γ_T` and their squares.
#[derive(Clone, Debug)]
pub struct DefectData {
    pub delta_sq: CMatrix,
    pub delta: CMatrix,
    pub gamma_sq: CMatrix,
    pub gamma: CMatrix,
    /// Orthonormal basis (columns) of `Ran Δ`.
    pub ran_delta: CMatrix,
    /// `Δ` as a map `H → Ran Δ` in the `ran_delta` coordinates.
    pub delta_coords: CMatrix,
    pub degree_used: usize,
    pub increments: Vec<f64>,
    pub exact: bool,
    pub purity_residual: f64,
}

impl DefectData {
    pub fn rank(&self) -> usize {
        self.ran_delta.ncols()
    }
}

/// `I − Σ_{α≠0} b_α T^α (T^α)*` for the `b`-series of `kernel`.
pub fn defect_square(t: &OperatorTuple, kernel: &KernelSeries, tol: &Tolerances) -> Result<SeriesSum> {
    let b = b_series(kernel).to_f64();
    let n = t.size();
    let mut s = t.orbit_sum(&b, 1, &linalg::identity(n), tol)?;
    s.value = linalg::identity(n) - s.value;
    Ok(s)
}

/// Defect data for `T` with respect to `k` (for `Δ`) and `s` (for `Γ`).
pub fn defect_data(t: &OperatorTuple, k: &KernelSeries, s: &KernelSeries, tol: &Tolerances) -> Result<DefectData> {
    for ker in [k, s] {
        if ker.dim() != t.dim() {
            return Err(Error::DimensionMismatch { expected: t.dim(), found: ker.dim() });
        }
    }
    let dk = defect_square(t, k, tol)?;
    let min_k = linalg::min_eigenvalue(&dk.value);
    if min_k < -tol.eig_clamp {
        return Err(Error::NotContraction { min_eigenvalue: min_k });
    }
    let delta = linalg::psd_sqrt(&dk.value, tol)?;
    let ds = defect_square(t, s, tol)?;
    let min_s = linalg::min_eigenvalue(&ds.value);
    if min_s < -tol.eig_clamp {
        return Err(Error::NotContraction { min_eigenvalue: min_s });
    }
    let gamma = linalg::psd_sqrt(&ds.value, tol)?;
    let ran_delta = linalg::psd_range(&dk.value, tol.rank_cutoff);
    let delta_coords = ran_delta.adjoint() * &delta;
    let purity = purity_sum(t, k, &dk.value, tol)?;
    let purity_residual = max_abs(&(linalg::identity(t.size()) - &purity.value));
    Ok(DefectData {
        delta_sq: dk.value,
        delta,
        gamma_sq: ds.value,
        gamma,
        ran_delta,
        delta_coords,
        degree_used: dk.degree_used.max(ds.degree_used),
        increments: dk.increments,
        exact: dk.exact && ds.exact,
        purity_residual,
    })
}

fn purity_sum(t: &OperatorTuple, k: &KernelSeries, delta_sq: &CMatrix, tol: &Tolerances) -> Result<SeriesSum> {
    t.orbit_sum(&k.a_f64(), 0, delta_sq, tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct PurityReport {
    /// `‖I − Σ_{|α|≤D} a_α T^α Δ² (T^α)*‖` for `D = 0, 1, …`.
    pub residual_by_degree: Vec<f64>,
    pub residual: f64,
    /// The sum is exhausted (nilpotent tuple), so `residual` is the limit.
    pub exact: bool,
    pub pure: bool,
}

/// Purity is a verdict, not an error: non-convergence is reported as not pure.
pub fn purity_check(t: &OperatorTuple, k: &KernelSeries, defect: &DefectData, tol: &Tolerances) -> PurityReport {
    let a = k.a_f64();
    let n = t.size();
    let cap = match t.nilpotency() {
        Some(p) => p.saturating_sub(1).min(a.len() - 1),
        None => tol.degree_cap.min(a.len() - 1),
    };
    let mut partial = linalg::zeros(n, n);
    let mut term = defect.delta_sq.clone();
    let mut residual_by_degree = Vec::with_capacity(cap + 1);
    for j in 0..=cap {
        if j > 0 {
            term = t.sigma(&term);
        }
        partial += &term * c(a[j]);
        residual_by_degree.push(max_abs(&(linalg::identity(n) - &partial)));
    }
    let residual = *residual_by_degree.last().expect("at least degree 0");
    let exact = t.nilpotency().is_some();
    PurityReport { residual_by_degree, residual, exact, pure: residual <= 1e-8 }
}

/// Compression `P* T_i P` to the span of the orthonormal columns of `p`.
#[derive(Clone, Debug)]
pub struct Compression {
    pub tuple: OperatorTuple,
    /// `max_i ‖(I − PP*) T_i* P‖`; zero for co-invariant subspaces.
    pub coinvariance_residual: f64,
}

pub fn compress(t: &OperatorTuple, p: &CMatrix) -> Result<Compression> {
    if p.nrows() != t.size() {
        return Err(Error::DimensionMismatch { expected: t.size(), found: p.nrows() });
    }
    let ortho = linalg::orthonormality_residual(p);
    if ortho > 1e-10 {
        return Err(Error::NotOrthonormal(ortho));
    }
    let proj_perp = linalg::identity(t.size()) - p * p.adjoint();
    let mut worst = 0.0f64;
    let mut mats = Vec::with_capacity(t.dim());
    for ti in t.mats() {
        worst = worst.max(max_abs(&(&proj_perp * ti.adjoint() * p)));
        mats.push(p.adjoint() * ti * p);
    }
    Ok(Compression { tuple: OperatorTuple::new(mats, None)?, coinvariance_residual: worst })
}

/// Orthonormal basis of the smallest co-invariant subspace containing `seeds`:
/// the span of all `(T^α)* v`.
pub fn coinvariant_hull(t: &OperatorTuple, seeds: &CMatrix, tol: &Tolerances) -> CMatrix {
    let mut basis = linalg::range_basis(seeds, tol.rank_cutoff);
    loop {
        let mut blocks = vec![basis.clone()];
        for ti in t.mats() {
            blocks.push(ti.adjoint() * &basis);
        }
        let next = linalg::range_basis(&linalg::hstack(&blocks), 1e-8);
        if next.ncols() == basis.ncols() {
            return next;
        }
        basis = next;
    }
}
