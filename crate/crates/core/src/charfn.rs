//! Characteristic function of a pure `1/k`-contraction through a CNP factor
//! `s` of `k = s·g`.
//!
//! Coordinates:
//! - `H̃ = ⊕_{α∈I} H` with `I = {α : 1 ≤ |α| ≤ C, b_α^(s) ≠ 0}`; row `i·n + h`.
//! - `E = ⊕_{α∈J} Ran Δ` with `J = {α : |α| ≤ C, a_α^(g) ≠ 0}`; row `j·r + δ`.
//! - the domain `D_T̃ ⊕ Ĥ` has the columns of `dt_basis` first, then `hhat_basis`.
//!
//! `C` is the index window. When `T` is nilpotent of order `p` and `C ≥ p − 1`,
//! every omitted summand of `H̃` and `E` lies in `Ker T̃` respectively in `Ĥ` and
//! acts on the constants through a scalar power series in `⟨z, w⟩`; those
//! contributions are added back analytically wherever `θ(z)θ(w)*` is needed.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dilation::DilationData;
use crate::error::{Error, Result};
use crate::kernel::{b_series, eval_series, inner, lift_to_multiindex, KernelFactorization, KernelSeries, RealSeries};
use crate::linalg::{self, c, max_abs, CMatrix, Tolerances};
use crate::model::ModelSpace;
use crate::multiindex::{enumerate_up_to_degree, MultiIndex};
use crate::rational::{self, QMatrix, Rational};
use crate::tuple::{defect_data, DefectData, OperatorTuple};

/// Threshold on `‖ΠΓ⁺Γ − Π‖`.
pub const U_TOL: f64 = 1e-8;
/// Largest domain dimension accepted by the coincidence test.
pub const COINCIDENCE_MAX_DIM: usize = 40;

#[derive(Clone, Copy, Debug, Default, Serialize, serde::Deserialize)]
pub struct CharFnCaps {
    /// Index window `C`; defaults to `max(p − 1, 1)` for nilpotent tuples.
    pub index_window: Option<usize>,
    /// Degree cut for `k_z(T)*` when `T` is not nilpotent.
    pub beta_degree: Option<usize>,
}

const NON_NILPOTENT_WINDOW: usize = 8;

#[derive(Clone, Debug)]
pub struct CharFnData {
    pub factorization: KernelFactorization,
    pub tuple: OperatorTuple,
    pub defect: DefectData,
    pub window: usize,
    pub beta_degree: usize,
    pub index_set: Vec<MultiIndex>,
    pub sqrt_b: Vec<f64>,
    pub e_index_set: Vec<MultiIndex>,
    pub sqrt_g: Vec<f64>,
    /// `H → E`.
    pub pi: CMatrix,
    /// `Π Γ⁺`, which is `u` on `Ran Γ`.
    pub u: CMatrix,
    pub u_residual: f64,
    /// `H̃ → H`.
    pub ttilde: CMatrix,
    pub dt: CMatrix,
    pub dt_basis: CMatrix,
    pub hhat_basis: CMatrix,
    /// `D_T̃ ⊕ Ĥ → H̃`.
    pub b: CMatrix,
    /// `D_T̃ ⊕ Ĥ → E`.
    pub d: CMatrix,
    /// Taylor coefficients `θ_γ : D_T̃ ⊕ Ĥ → Ran Δ`, graded order.
    pub theta: Vec<(MultiIndex, CMatrix)>,
    /// Omitted summands are exactly accounted for (nilpotent, `C ≥ p − 1`).
    pub exact: bool,
    /// `g` and the `b`-series of `s` vanish beyond `C`, so nothing is omitted at all.
    pub tail_free: bool,
    series: SeriesCache,
}

/// `f64` images of the scalar series, evaluated at every sample point.
#[derive(Clone, Debug)]
struct SeriesCache {
    k: Vec<f64>,
    s: Vec<f64>,
    g: Vec<f64>,
    b_s: Vec<f64>,
}

impl CharFnData {
    pub fn n(&self) -> usize {
        self.tuple.size()
    }

    /// `dim Ran Δ`.
    pub fn rank(&self) -> usize {
        self.defect.rank()
    }

    /// `dim (D_T̃ ⊕ Ĥ)` on the window.
    pub fn domain_dim(&self) -> usize {
        self.dt_basis.ncols() + self.hhat_basis.ncols()
    }

    pub fn theta_degree(&self) -> usize {
        self.theta.iter().map(|(g, _)| g.degree()).max().unwrap_or(0)
    }

    pub fn theta_coefficient(&self, gamma: &MultiIndex) -> Option<&CMatrix> {
        self.theta.iter().find(|(g, _)| g == gamma).map(|(_, m)| m)
    }

    /// `k_z(T)* = Σ a_α z^α (T^α)*`.
    fn k_z_adjoint(&self, z: &[Complex64], tol: &Tolerances) -> Result<CMatrix> {
        Ok(self.tuple.operator_series(&self.series.k, z, tol)?.adjoint())
    }

    /// `θ(z)` through the defining formula and through the Taylor coefficients.
    pub fn theta_eval(&self, z: &[Complex64], tol: &Tolerances) -> Result<ThetaValue> {
        check_point(z, self.tuple.dim())?;
        let r = self.rank();
        let p = self.domain_dim();
        let mut direct = linalg::zeros(r, p);
        for (j, alpha) in self.e_index_set.iter().enumerate() {
            direct += self.d.rows(j * r, r) * (alpha.monomial(z) * self.sqrt_g[j]);
        }
        let n = self.n();
        let mut zb = linalg::zeros(n, p);
        for (i, alpha) in self.index_set.iter().enumerate() {
            zb += self.b.rows(i * n, n) * (alpha.monomial(z) * self.sqrt_b[i]);
        }
        direct += &self.defect.delta_coords * self.k_z_adjoint(z, tol)? * zb;
        let taylor = self.theta.iter().fold(linalg::zeros(r, p), |acc, (g, m)| acc + m * g.monomial(z));
        let difference = max_abs(&(&direct - &taylor));
        if difference > 1e-10 {
            return Err(Error::Disagreement { what: "θ(z) formula against Taylor sum".into(), difference });
        }
        Ok(ThetaValue { value: taylor, direct, difference })
    }

    /// `θ(z)` and `Δ k_z(T)*`, the per-point ingredients of the two-point identities.
    pub fn point(&self, z: &[Complex64], tol: &Tolerances) -> Result<PointData> {
        let theta = self.theta_eval(z, tol)?.value;
        let dk = &self.defect.delta_coords * self.k_z_adjoint(z, tol)?;
        Ok(PointData { z: z.to_vec(), theta, dk })
    }

    /// `θ(z)θ(w)*` including the summands outside the index window.
    pub fn theta_outer(&self, z: &[Complex64], w: &[Complex64], tol: &Tolerances) -> Result<CMatrix> {
        Ok(self.theta_outer_at(&self.point(z, tol)?, &self.point(w, tol)?))
    }

    pub fn theta_outer_at(&self, z: &PointData, w: &PointData) -> CMatrix {
        let t = inner(&z.z, &w.z);
        let g_tail = tail_sum(&self.series.g, self.window, t);
        let b_tail = tail_sum(&self.series.b_s, self.window, t);
        &z.theta * w.theta.adjoint() + linalg::identity(self.rank()) * g_tail + &z.dk * w.dk.adjoint() * b_tail
    }

    /// `‖s(z,w) θ(z)θ(w)* − k(z,w) I + Δ k_z(T)* k_w(T) Δ‖`.
    pub fn lemma1_residual_at(&self, z: &[Complex64], w: &[Complex64], tol: &Tolerances) -> Result<f64> {
        let (pz, pw) = (self.point(z, tol)?, self.point(w, tol)?);
        let lhs = self.theta_outer_at(&pz, &pw) * eval_series(&self.series.s, inner(z, w));
        Ok(max_abs(&(lhs - self.lemma1_rhs_at(&pz, &pw))))
    }

    /// `k(z,w) I − Δ k_z(T)* k_w(T) Δ`, which is also `⟨(I − VV*) k_w ⊗ ·, k_z ⊗ ·⟩`.
    pub fn lemma1_rhs(&self, z: &[Complex64], w: &[Complex64], tol: &Tolerances) -> Result<CMatrix> {
        Ok(self.lemma1_rhs_at(&self.point(z, tol)?, &self.point(w, tol)?))
    }

    pub fn lemma1_rhs_at(&self, z: &PointData, w: &PointData) -> CMatrix {
        linalg::identity(self.rank()) * eval_series(&self.series.k, inner(&z.z, &w.z)) - &z.dk * w.dk.adjoint()
    }

    pub fn lemma1_residual(&self, samples: &[(Vec<Complex64>, Vec<Complex64>)], tol: &Tolerances) -> Result<f64> {
        let mut worst = 0.0f64;
        for (z, w) in samples {
            worst = worst.max(self.lemma1_residual_at(z, w, tol)?);
        }
        Ok(worst)
    }

    /// `s(z, w)`.
    pub fn s_value(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        eval_series(&self.series.s, inner(z, w))
    }

    /// `‖g_z(T)* − k_z(T)*(I − Z T̃*)‖`.
    pub fn i4_residual(&self, z: &[Complex64], tol: &Tolerances) -> Result<f64> {
        check_point(z, self.tuple.dim())?;
        let n = self.n();
        let mut zt = linalg::zeros(n, n);
        for (i, alpha) in self.index_set.iter().enumerate() {
            zt += self.tuple.apply_power(alpha).adjoint() * (alpha.monomial(z) * self.sqrt_b[i] * self.sqrt_b[i]);
        }
        let gz = self.tuple.operator_series(&self.series.g, z, tol)?.adjoint();
        let rhs = self.k_z_adjoint(z, tol)? * (linalg::identity(n) - zt);
        Ok(max_abs(&(gz - rhs)))
    }

    /// `(Σ_{α≠0} b_α |z^α|², 1 − 1/s(z,z))`; the first is `‖Z(z)‖²`.
    pub fn z_norm_sq(&self, z: &[Complex64]) -> (f64, f64) {
        let t = inner(z, z);
        let lhs = eval_series(&self.series.b_s, t).re;
        let s = self.s_value(z, z).re;
        (lhs, 1.0 - 1.0 / s)
    }

    pub fn block_report(&self) -> BlockReport {
        let nt = self.ttilde.ncols();
        let ne = self.pi.nrows();
        let relation_tt = max_abs(&(self.ttilde.adjoint() * &self.ttilde + &self.b * self.b.adjoint() - linalg::identity(nt)));
        let relation_pt = max_abs(&(&self.pi * &self.ttilde + &self.d * self.b.adjoint()));
        let relation_pp = max_abs(&(&self.pi * self.pi.adjoint() + &self.d * self.d.adjoint() - linalg::identity(ne)));
        let u = linalg::vstack(&[
            linalg::hstack(&[self.ttilde.adjoint(), self.b.clone()]),
            linalg::hstack(&[self.pi.clone(), self.d.clone()]),
        ]);
        let square = u.nrows() == u.ncols();
        let unitary_left = max_abs(&(u.adjoint() * &u - linalg::identity(u.ncols())));
        let unitary_right = max_abs(&(&u * u.adjoint() - linalg::identity(u.nrows())));
        let n = self.n();
        let gamma_identity =
            max_abs(&(&self.ttilde * self.ttilde.adjoint() - (linalg::identity(n) - &self.defect.gamma_sq)));
        let defect_identity = max_abs(&(&self.ttilde * &self.dt - &self.defect.gamma * &self.ttilde));
        let pi_star_pi = max_abs(&(self.pi.adjoint() * &self.pi - &self.defect.gamma_sq));
        BlockReport {
            relation_tt,
            relation_pt,
            relation_pp,
            unitary_left,
            unitary_right,
            square,
            gamma_identity,
            defect_identity,
            pi_star_pi,
            u_residual: self.u_residual,
        }
    }

    /// Serializable view of the Taylor coefficients.
    pub fn theta_dump(&self) -> Vec<CoefficientDump> {
        self.theta.iter().map(|(g, m)| CoefficientDump::new(g, m)).collect()
    }
}

fn check_point(z: &[Complex64], d: usize) -> Result<()> {
    if z.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: z.len() });
    }
    let r = crate::kernel::norm(z);
    if r >= 1.0 {
        return Err(Error::OutsideBall(r));
    }
    Ok(())
}

/// `Σ_{n>C} c_n t^n` over the stored coefficients.
fn tail_sum(c: &[f64], window: usize, t: Complex64) -> Complex64 {
    if c.len() <= window + 1 {
        return Complex64::new(0.0, 0.0);
    }
    eval_series(&c[window + 1..], t) * t.powu(window as u32 + 1)
}

#[derive(Clone, Debug)]
pub struct PointData {
    pub z: Vec<Complex64>,
    pub theta: CMatrix,
    /// `Δ k_z(T)*` in `Ran Δ` coordinates.
    pub dk: CMatrix,
}

#[derive(Clone, Debug)]
pub struct ThetaValue {
    pub value: CMatrix,
    pub direct: CMatrix,
    pub difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReport {
    /// `‖T̃*T̃ + BB* − I‖`.
    pub relation_tt: f64,
    /// `‖ΠT̃ + DB*‖`.
    pub relation_pt: f64,
    /// `‖ΠΠ* + DD* − I‖`.
    pub relation_pp: f64,
    pub unitary_left: f64,
    pub unitary_right: f64,
    pub square: bool,
    /// `‖T̃T̃* − (I − Γ²)‖`.
    pub gamma_identity: f64,
    /// `‖T̃ D_T̃ − Γ T̃‖`.
    pub defect_identity: f64,
    /// `‖Π*Π − Γ²‖`.
    pub pi_star_pi: f64,
    pub u_residual: f64,
}

impl BlockReport {
    pub fn max_relation(&self) -> f64 {
        self.relation_tt.max(self.relation_pt).max(self.relation_pp)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientDump {
    pub gamma: MultiIndex,
    pub rows: usize,
    pub cols: usize,
    /// Row-major real parts.
    pub re: Vec<f64>,
    /// Row-major imaginary parts.
    pub im: Vec<f64>,
}

impl CoefficientDump {
    pub fn new(gamma: &MultiIndex, m: &CMatrix) -> Self {
        let mut re = Vec::with_capacity(m.len());
        let mut im = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { gamma: gamma.clone(), rows: m.nrows(), cols: m.ncols(), re, im }
    }
}

fn lifted_f64(c: &[Rational], alpha: &MultiIndex) -> Result<f64> {
    Ok(rational::to_f64(&lift_to_multiindex(c, alpha)?))
}

/// Builds every block of the construction for `T` and `k = s·g`.
pub fn build_charfn(
    t: &OperatorTuple,
    factorization: &KernelFactorization,
    caps: CharFnCaps,
    tol: &Tolerances,
) -> Result<CharFnData> {
    let k = factorization.k();
    let s = factorization.s();
    if k.dim() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: k.dim() });
    }
    let defect = defect_data(t, k, s, tol)?;
    let purity = crate::tuple::purity_check(t, k, &defect, tol);
    if purity.residual > crate::dilation::PURITY_TOL {
        return Err(Error::NotPure { residual: purity.residual });
    }
    let d = t.dim();
    let n = t.size();
    let r = defect.rank();
    let nilpotency = t.nilpotency();
    let window = caps.index_window.unwrap_or(match nilpotency {
        Some(p) => p.saturating_sub(1).max(1),
        None => NON_NILPOTENT_WINDOW,
    });
    let beta_degree = match nilpotency {
        Some(p) => p.saturating_sub(1),
        None => caps.beta_degree.unwrap_or(window),
    };
    let exact = matches!(nilpotency, Some(p) if window + 1 >= p);
    let trunc = factorization.truncation();
    if window > trunc || beta_degree > trunc {
        return Err(Error::BeyondTruncation { requested: window.max(beta_degree), truncation: trunc });
    }

    let b_s: RealSeries = b_series(s);
    let g = factorization.g();
    let all = enumerate_up_to_degree(d, window);
    let mut index_set = Vec::new();
    let mut sqrt_b = Vec::new();
    let mut e_index_set = Vec::new();
    let mut sqrt_g = Vec::new();
    for alpha in &all {
        if !alpha.is_zero() {
            let b = lifted_f64(b_s.coeffs(), alpha)?;
            if b != 0.0 {
                index_set.push(alpha.clone());
                sqrt_b.push(b.sqrt());
            }
        }
        let ga = lifted_f64(g.coeffs(), alpha)?;
        if ga != 0.0 {
            e_index_set.push(alpha.clone());
            sqrt_g.push(ga.sqrt());
        }
    }

    // Π: H → E
    let mut pi = linalg::zeros(r * e_index_set.len(), n);
    for (j, alpha) in e_index_set.iter().enumerate() {
        let block = &defect.delta_coords * t.apply_power(alpha).adjoint() * c(sqrt_g[j]);
        pi.view_mut((j * r, 0), (r, n)).copy_from(&block);
    }
    let gamma_pinv = linalg::psd_inv_sqrt(&defect.gamma_sq, tol.rank_cutoff);
    let u = &pi * &gamma_pinv;
    let u_residual = max_abs(&(&u * &defect.gamma - &pi));
    if u_residual > U_TOL {
        return Err(Error::UIllDefined(u_residual));
    }

    // T̃: H̃ → H
    let blocks: Vec<CMatrix> =
        index_set.iter().zip(&sqrt_b).map(|(alpha, sb)| &*t.apply_power(alpha) * c(*sb)).collect();
    let ttilde = if blocks.is_empty() { linalg::zeros(n, 0) } else { linalg::hstack(&blocks) };
    let nt = ttilde.ncols();
    let dt_sq = linalg::identity(nt) - ttilde.adjoint() * &ttilde;
    let lo = linalg::min_eigenvalue(&dt_sq);
    if nt > 0 && lo < -tol.eig_clamp {
        return Err(Error::TtildeNotContraction(lo));
    }
    let dt = if nt > 0 { linalg::psd_sqrt(&dt_sq, tol)? } else { linalg::zeros(0, 0) };
    let dt_basis = if nt > 0 { linalg::psd_range(&dt_sq, tol.rank_cutoff) } else { linalg::zeros(0, 0) };

    let ran_pi = linalg::range_basis(&pi, tol.rank_cutoff);
    let hhat_basis = linalg::complement_basis(&ran_pi);
    let m = dt_basis.ncols();
    let h = hhat_basis.ncols();
    let ne = pi.nrows();

    let mut b = linalg::zeros(nt, m + h);
    if m > 0 {
        b.view_mut((0, 0), (nt, m)).copy_from(&(&dt * &dt_basis));
    }
    let mut dmat = linalg::zeros(ne, m + h);
    if m > 0 {
        dmat.view_mut((0, 0), (ne, m)).copy_from(&(-(&u * &ttilde * &dt_basis)));
    }
    if h > 0 {
        dmat.view_mut((0, m), (ne, h)).copy_from(&(-&hhat_basis));
    }

    // Taylor coefficients
    let a_k = k.coeffs();
    let mut theta: BTreeMap<usize, CMatrix> = BTreeMap::new();
    let top = enumerate_up_to_degree(d, window + beta_degree);
    let pos = |gamma: &MultiIndex| top.iter().position(|x| x == gamma).expect("degree within bound");
    for (j, alpha) in e_index_set.iter().enumerate() {
        let entry = theta.entry(pos(alpha)).or_insert_with(|| linalg::zeros(r, m + h));
        *entry += dmat.rows(j * r, r) * c(sqrt_g[j]);
    }
    let betas = enumerate_up_to_degree(d, beta_degree);
    let left: Vec<CMatrix> = betas
        .iter()
        .map(|beta| Ok(&defect.delta_coords * t.apply_power(beta).adjoint() * c(lifted_f64(a_k, beta)?)))
        .collect::<Result<_>>()?;
    for (i, alpha) in index_set.iter().enumerate() {
        let b_alpha = b.rows(i * n, n) * c(sqrt_b[i]);
        for (beta, l) in betas.iter().zip(&left) {
            let gamma = alpha.add(beta)?;
            let entry = theta.entry(pos(&gamma)).or_insert_with(|| linalg::zeros(r, m + h));
            *entry += l * &b_alpha;
        }
    }
    let theta = theta.into_iter().map(|(p, mat)| (top[p].clone(), mat)).collect();
    let vanishes = |c: &[Rational]| c.iter().skip(window + 1).all(num_traits::Zero::is_zero);
    let tail_free = vanishes(g.coeffs()) && vanishes(b_s.coeffs());

    Ok(CharFnData {
        factorization: factorization.clone(),
        tuple: t.clone(),
        defect,
        window,
        beta_degree,
        index_set,
        sqrt_b,
        e_index_set,
        sqrt_g,
        pi,
        u,
        u_residual,
        ttilde,
        dt,
        dt_basis,
        hhat_basis,
        b,
        d: dmat,
        theta,
        exact,
        tail_free,
        series: SeriesCache { k: k.a_f64(), s: s.a_f64(), g: g.to_f64(), b_s: b_s.to_f64() },
    })
}

/// Matrix of `M_θ : H_s ⊗ (D_T̃ ⊕ Ĥ) → H_k ⊗ Ran Δ` on truncated spaces.
/// Column `pos_s(β)·p + x`, row `pos_k(μ)·r + j`; `e_s(β) ⊗ x ↦ Σ_γ √(a^s_β / a^k_{β+γ}) θ_γ x` at `e_k(β+γ)`.
#[derive(Clone, Debug)]
pub struct MultiplierMatrix {
    pub m: CMatrix,
    pub source_degree: usize,
    pub target_degree: usize,
    /// Squared Frobenius mass of entries cut off by the target truncation.
    pub discarded_mass: f64,
    /// No column loses mass to the target truncation.
    pub exact: bool,
    /// Degrees on which `VV* + M_θ M_θ*` is computed without truncation error.
    pub restricted_degree: usize,
}

pub fn build_multiplier(cfn: &CharFnData, source_degree: usize, target_degree: usize) -> Result<MultiplierMatrix> {
    let k = cfn.factorization.k();
    let s = cfn.factorization.s();
    let src = ModelSpace::new(s, source_degree)?;
    let tgt = ModelSpace::new(k, target_degree)?;
    let r = cfn.rank();
    let p = cfn.domain_dim();
    let mut m = linalg::zeros(tgt.len() * r, src.len() * p);
    let mut discarded_mass = 0.0;
    for (bp, beta) in src.basis().indices().iter().enumerate() {
        let sa = src.sqrt_a()[bp];
        for (gamma, th) in &cfn.theta {
            let mu = beta.add(gamma)?;
            let block = th * c(sa);
            match tgt.basis().position(&mu) {
                Some(mp) => {
                    let scaled = block * c(1.0 / tgt.sqrt_a()[mp]);
                    m.view_mut((mp * r, bp * p), (r, p)).copy_from(&scaled);
                }
                None => {
                    let ak = lifted_f64(k.coeffs(), &mu).unwrap_or(f64::INFINITY);
                    discarded_mass += block.norm_squared() / ak;
                }
            }
        }
    }
    let exact = target_degree >= source_degree + cfn.theta_degree();
    let mut restricted_degree = source_degree.min(target_degree);
    if !cfn.tail_free {
        restricted_degree = restricted_degree.min(cfn.window);
    }
    Ok(MultiplierMatrix { m, source_degree, target_degree, discarded_mass, exact, restricted_degree })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationResidual {
    /// `‖VV* + M_θM_θ* − I‖` on degrees `≤ restricted_degree`.
    pub restricted: f64,
    pub restricted_degree: usize,
    /// The same on all degrees both truncations share.
    pub unrestricted: f64,
}

fn leading(m: &CMatrix, rows: usize) -> CMatrix {
    m.rows(0, rows.min(m.nrows())).into_owned()
}

pub fn factorization_residual(dil: &DilationData, mult: &MultiplierMatrix) -> Result<FactorizationResidual> {
    let r = dil.rank;
    let rdeg = mult.restricted_degree.min(dil.target_degree);
    let rows_r = dil.space.basis().len_up_to(rdeg) * r;
    let common = dil.target_degree.min(mult.target_degree);
    let rows_c = dil.space.basis().len_up_to(common) * r;
    let block = |rows: usize| {
        let v = leading(&dil.v, rows);
        let m = leading(&mult.m, rows);
        max_abs(&(&v * v.adjoint() + &m * m.adjoint() - linalg::identity(rows)))
    };
    Ok(FactorizationResidual { restricted: block(rows_r), restricted_degree: rdeg, unrestricted: block(rows_c) })
}

/// Exact variant: rounds every entry of `V` and `M_θ` to a nearby small rational
/// and evaluates the restricted residual in rational arithmetic.
pub fn factorization_residual_exact(dil: &DilationData, mult: &MultiplierMatrix, max_den: i64) -> Result<Rational> {
    let r = dil.rank;
    let rdeg = mult.restricted_degree.min(dil.target_degree);
    let rows = dil.space.basis().len_up_to(rdeg) * r;
    let (vr, vi) = rationalize_matrix(&leading(&dil.v, rows), max_den)?;
    let (mr, mi) = rationalize_matrix(&leading(&mult.m, rows), max_den)?;
    // (A + iB)(A + iB)* = (AAᵀ + BBᵀ) + i(BAᵀ − ABᵀ)
    let gram = |a: &QMatrix, b: &QMatrix| (a * a.transpose() + b * b.transpose(), b * a.transpose() - a * b.transpose());
    let (v_re, v_im) = gram(&vr, &vi);
    let (m_re, m_im) = gram(&mr, &mi);
    let re = v_re + m_re - rational::qmatrix_identity(rows);
    let im = v_im + m_im;
    let worst = re.iter().chain(im.iter()).map(num_traits::Signed::abs).max().unwrap_or_else(|| rational::q(0));
    Ok(worst)
}

fn rationalize_matrix(m: &CMatrix, max_den: i64) -> Result<(QMatrix, QMatrix)> {
    let conv = |x: f64| {
        rational::rationalize(x, max_den, 1e-12)
            .ok_or_else(|| Error::ExactUnavailable(format!("entry {x} has no small rational form")))
    };
    let mut re = rational::qmatrix_zero(m.nrows(), m.ncols());
    let mut im = rational::qmatrix_zero(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            re[(i, j)] = conv(m[(i, j)].re)?;
            im[(i, j)] = conv(m[(i, j)].im)?;
        }
    }
    Ok((re, im))
}

/// The `k`-inner part of `θ`: the unit eigenspace of `G = Σ_γ θ_γ*θ_γ ‖z^γ‖²`.
#[derive(Clone, Debug, Serialize)]
pub struct KInner {
    pub dim: usize,
    pub max_eigenvalue: f64,
    /// `max |⟨(M_z^α ⊗ I)θx, θy⟩|` over `1 ≤ |α| ≤ check_degree`, `x, y` in the basis.
    pub shift_orthogonality: f64,
    /// `max |‖M_θ x‖² − 1|` over the basis.
    pub isometry: f64,
    pub check_degree: usize,
    #[serde(skip)]
    pub basis: CMatrix,
}

pub const K_INNER_TOL: f64 = 1e-9;

pub fn k_inner_subspace(cfn: &CharFnData, check_degree: usize) -> Result<KInner> {
    k_inner_from(cfn.factorization.k(), &cfn.theta, cfn.domain_dim(), check_degree)
}

/// Same computation for an arbitrary coefficient list.
pub fn k_inner_from(k: &KernelSeries, theta: &[(MultiIndex, CMatrix)], p: usize, check_degree: usize) -> Result<KInner> {
    let inv_a = |g: &MultiIndex| -> Result<f64> { Ok(1.0 / lifted_f64(k.coeffs(), g)?) };
    let mut g = linalg::zeros(p, p);
    for (gamma, th) in theta {
        g += th.adjoint() * th * c(inv_a(gamma)?);
    }
    let (vals, vecs) = linalg::hermitian_eigen(&g);
    let max_eigenvalue = vals.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| (vals[i] - 1.0).abs() <= K_INNER_TOL).collect();
    if keep.is_empty() {
        return Err(Error::EmptyKInner(max_eigenvalue));
    }
    let basis = linalg::select_columns(&vecs, &keep);
    let isometry = keep.iter().map(|&i| (vals[i] - 1.0).abs()).fold(0.0, f64::max);
    let d = theta.first().map_or(1, |(gm, _)| gm.dim());
    let lookup: BTreeMap<&MultiIndex, &CMatrix> = theta.iter().map(|(gm, m)| (gm, m)).collect();
    let mut worst = 0.0f64;
    for deg in 1..=check_degree {
        for alpha in crate::multiindex::enumerate_degree(d, deg) {
            let mut s = linalg::zeros(p, p);
            for (gamma, th) in theta {
                let shifted = gamma.add(&alpha)?;
                if let Some(th2) = lookup.get(&shifted) {
                    s += th2.adjoint() * th * c(inv_a(&shifted)?);
                }
            }
            worst = worst.max(max_abs(&(basis.adjoint() * s * &basis)));
        }
    }
    Ok(KInner { dim: keep.len(), max_eigenvalue, shift_orthogonality: worst, isometry, check_degree, basis })
}

/// Grows the index window from its default, one step at a time up to
/// `max_window`, until the unit eigenspace of `G` is non-trivial. With a
/// nilpotent tuple and `C ≥ p − 1` the window columns are exact columns of `θ`,
/// so a unit eigenvector found in any window lies in the full `k`-inner part.
pub fn find_k_inner(
    t: &OperatorTuple,
    f: &KernelFactorization,
    check_degree: usize,
    max_window: usize,
    tol: &Tolerances,
) -> Result<(CharFnData, KInner)> {
    let mut cfn = build_charfn(t, f, CharFnCaps::default(), tol)?;
    loop {
        match k_inner_subspace(&cfn, check_degree) {
            Ok(ki) => return Ok((cfn, ki)),
            Err(Error::EmptyKInner(top)) if cfn.window >= max_window => return Err(Error::EmptyKInner(top)),
            Err(Error::EmptyKInner(_)) => {
                let caps = CharFnCaps { index_window: Some(cfn.window + 1), beta_degree: Some(cfn.beta_degree) };
                cfn = build_charfn(t, f, caps, tol)?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Gram comparison of `s_{i,w} ⊗ θ_i(w)*η` for two factorizations of the same `k`.
#[derive(Clone, Debug, Serialize)]
pub struct Alignment {
    pub gram_residual: f64,
    /// Distance of either Gram matrix from `⟨(I − VV*) k_w ⊗ η, k_z ⊗ ξ⟩`.
    pub reference_residual: f64,
    pub samples: usize,
    /// Rank of the common Gram matrix.
    pub rank: usize,
    /// `Q Λ^{-1/2}` from `G = QΛQ*`: `F_i · frame` are orthonormal frames of the
    /// two sampled spans and `V_m` sends one to the other.
    #[serde(skip)]
    pub frame: CMatrix,
}

pub const GRAM_TOL: f64 = 1e-8;

pub fn align_factorizations(
    cfn1: &CharFnData,
    cfn2: &CharFnData,
    samples: &[Vec<Complex64>],
    tol: &Tolerances,
) -> Result<Alignment> {
    let same_t = cfn1.n() == cfn2.n()
        && cfn1.tuple.dim() == cfn2.tuple.dim()
        && cfn1.tuple.mats().iter().zip(cfn2.tuple.mats()).all(|(a, b)| max_abs(&(a - b)) <= 1e-12)
        && cfn1.factorization.k().coeffs()[..] == cfn2.factorization.k().coeffs()[..];
    if !same_t {
        return Err(Error::InvalidInput("alignment needs the same tuple and the same kernel k".into()));
    }
    let r = cfn1.rank();
    let ns = samples.len();
    let mut g1 = linalg::zeros(ns * r, ns * r);
    let mut g2 = linalg::zeros(ns * r, ns * r);
    let mut reference = linalg::zeros(ns * r, ns * r);
    let p1 = samples.iter().map(|z| cfn1.point(z, tol)).collect::<Result<Vec<_>>>()?;
    let p2 = samples.iter().map(|z| cfn2.point(z, tol)).collect::<Result<Vec<_>>>()?;
    for a in 0..ns {
        for b in 0..ns {
            let (z, w) = (&samples[a], &samples[b]);
            let s1 = cfn1.s_value(z, w);
            let s2 = cfn2.s_value(z, w);
            g1.view_mut((a * r, b * r), (r, r)).copy_from(&(cfn1.theta_outer_at(&p1[a], &p1[b]) * s1));
            g2.view_mut((a * r, b * r), (r, r)).copy_from(&(cfn2.theta_outer_at(&p2[a], &p2[b]) * s2));
            reference.view_mut((a * r, b * r), (r, r)).copy_from(&cfn1.lemma1_rhs_at(&p1[a], &p1[b]));
        }
    }
    let gram_residual = max_abs(&(&g1 - &g2));
    let reference_residual = max_abs(&(&g1 - &reference)).max(max_abs(&(&g2 - &reference)));
    if gram_residual > GRAM_TOL {
        return Err(Error::GramMismatch(gram_residual));
    }
    let common = (&g1 + &g2) * c(0.5);
    let (vals, vecs) = linalg::hermitian_eigen(&common);
    let scale = vals.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-10 * scale).collect();
    let mut frame = linalg::select_columns(&vecs, &keep);
    for (j, &i) in keep.iter().enumerate() {
        let f = 1.0 / vals[i].sqrt();
        for x in frame.column_mut(j).iter_mut() {
            *x *= f;
        }
    }
    Ok(Alignment { gram_residual, reference_residual, samples: ns, rank: keep.len(), frame })
}

/// `𝕋_i = P_{Ran V}(M_{z_i} ⊗ I)|_{Ran V}` in the frame given by `V`.
#[derive(Clone, Debug)]
pub struct FunctionalModel {
    pub tuple: OperatorTuple,
    /// `‖(M_{z_i} ⊗ I)*V − V T_i*‖`.
    pub intertwining: Vec<f64>,
    /// `‖V*(M_{z_i} ⊗ I)V − T_i‖`.
    pub equivalence: Vec<f64>,
    /// `‖V* M_θ‖` on the shared rows.
    pub range_orthogonality: f64,
}

impl FunctionalModel {
    pub fn max_residual(&self) -> f64 {
        self.intertwining.iter().chain(&self.equivalence).fold(self.range_orthogonality, |a, &b| a.max(b))
    }
}

pub fn functional_model(t: &OperatorTuple, dil: &DilationData, mult: &MultiplierMatrix) -> Result<FunctionalModel> {
    let v = &dil.v;
    let mut mats = Vec::with_capacity(t.dim());
    let mut intertwining = Vec::with_capacity(t.dim());
    let mut equivalence = Vec::with_capacity(t.dim());
    for i in 0..t.dim() {
        let shift = dil.space.shift_tensor(i, dil.rank);
        let ti = v.adjoint() * &shift * v;
        intertwining.push(max_abs(&(shift.adjoint() * v - v * t.get(i).adjoint())));
        equivalence.push(max_abs(&(&ti - t.get(i))));
        mats.push(ti);
    }
    let rows = v.nrows().min(mult.m.nrows());
    let range_orthogonality = max_abs(&(leading(v, rows).adjoint() * leading(&mult.m, rows)));
    Ok(FunctionalModel { tuple: OperatorTuple::new(mats, None)?, intertwining, equivalence, range_orthogonality })
}

/// Decision for `θ'_γ = U_2 θ_γ U_1` with constant unitaries.
#[derive(Clone, Debug, Serialize)]
pub struct Coincidence {
    pub coincide: bool,
    /// `max_γ ‖θ'_γ − U_2 θ_γ U_1‖` for the best candidate pair found.
    pub residual: f64,
    pub dimensions_match: bool,
    /// Dimension of the space of intertwiners `(X, Y)` with `θ'_γ X = Y θ_γ`, `θ'_γ* Y = X θ_γ*`.
    pub intertwiner_dim: usize,
    #[serde(skip)]
    pub u1: Option<CMatrix>,
    #[serde(skip)]
    pub u2: Option<CMatrix>,
}

pub const COINCIDENCE_TOL: f64 = 1e-8;

const INTERTWINER_DRAWS: usize = 8;

fn padded(m: &CMatrix, rows: usize, cols: usize) -> CMatrix {
    let mut out = linalg::zeros(rows, cols);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Aligned coefficient lists over the union of supports, zero-padded to common sizes.
fn aligned(a: &[(MultiIndex, CMatrix)], b: &[(MultiIndex, CMatrix)]) -> (Vec<CMatrix>, Vec<CMatrix>, usize, usize) {
    let rows = a.iter().chain(b).map(|(_, m)| m.nrows()).max().unwrap_or(0);
    let cols = a.iter().chain(b).map(|(_, m)| m.ncols()).max().unwrap_or(0);
    let mut keys: Vec<&MultiIndex> = a.iter().chain(b).map(|(g, _)| g).collect();
    keys.sort_by(|x, y| x.degree().cmp(&y.degree()).then_with(|| y.entries().cmp(x.entries())));
    keys.dedup();
    let find = |list: &[(MultiIndex, CMatrix)], g: &MultiIndex| {
        list.iter().find(|(h, _)| h == g).map_or_else(|| linalg::zeros(rows, cols), |(_, m)| padded(m, rows, cols))
    };
    let xs = keys.iter().map(|g| find(a, g)).collect();
    let ys = keys.iter().map(|g| find(b, g)).collect();
    (xs, ys, rows, cols)
}

fn misfit(a: &[CMatrix], b: &[CMatrix], u1: &CMatrix, u2: &CMatrix) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_abs(&(y - u2 * x * u1))).fold(0.0, f64::max)
}

/// Coincidence of two characteristic functions, decided on Taylor coefficients.
///
/// Intertwiners of the two coefficient families form a linear space closed
/// under adjoints; the families are unitarily equivalent iff it contains an
/// invertible pair, whose polar parts are then the unitaries. A few generic
/// (seeded) elements of the null space are tried and the best kept. When none
/// is invertible, the reported residual comes from aligning the eigenbases of
/// `Σ θ_γ*θ_γ` and `Σ θ_γθ_γ*`.
pub fn coincidence(a: &CharFnData, b: &CharFnData, seed: u64) -> Result<Coincidence> {
    coincidence_of(&a.theta, &b.theta, seed)
}

pub fn coincidence_of(a: &[(MultiIndex, CMatrix)], b: &[(MultiIndex, CMatrix)], seed: u64) -> Result<Coincidence> {
    let dims = |l: &[(MultiIndex, CMatrix)]| l.first().map_or((0, 0), |(_, m)| (m.nrows(), m.ncols()));
    let dimensions_match = dims(a) == dims(b);
    let (xs, ys, r, p) = aligned(a, b);
    if p > COINCIDENCE_MAX_DIM || r > COINCIDENCE_MAX_DIM {
        return Err(Error::InvalidInput(format!(
            "coincidence test supports dimensions up to {COINCIDENCE_MAX_DIM}, got {r}×{p}"
        )));
    }
    let (found, intertwiner_dim) = if dimensions_match { invertible_intertwiner(&xs, &ys, r, p, seed) } else { (None, 0) };
    if let Some((u1, u2)) = found {
        let residual = misfit(&xs, &ys, &u1, &u2);
        return Ok(Coincidence {
            coincide: residual <= COINCIDENCE_TOL,
            residual,
            dimensions_match,
            intertwiner_dim,
            u1: Some(u1),
            u2: Some(u2),
        });
    }
    let gram_basis = |list: &[CMatrix], left: bool| {
        let g = list.iter().fold(linalg::zeros(if left { p } else { r }, if left { p } else { r }), |acc, m| {
            if left { acc + m.adjoint() * m } else { acc + m * m.adjoint() }
        });
        linalg::hermitian_eigen(&g).1
    };
    let (qa1, qb1) = (gram_basis(&xs, true), gram_basis(&ys, true));
    let (qa2, qb2) = (gram_basis(&xs, false), gram_basis(&ys, false));
    let u1 = &qa1 * qb1.adjoint();
    let u2 = &qb2 * qa2.adjoint();
    let residual = misfit(&xs, &ys, &u1, &u2);
    Ok(Coincidence { coincide: false, residual, dimensions_match, intertwiner_dim, u1: None, u2: None })
}

type UnitaryPair = (CMatrix, CMatrix);

fn invertible_intertwiner(xs: &[CMatrix], ys: &[CMatrix], r: usize, p: usize, seed: u64) -> (Option<UnitaryPair>, usize) {
    // unknowns: vec(X) (p×p) then vec(Y) (r×r), column-major
    let nx = p * p;
    let ny = r * r;
    let unknowns = nx + ny;
    let rows_per = 2 * r * p;
    let mut l = linalg::zeros(rows_per * xs.len(), unknowns);
    let ip = linalg::identity(p);
    let ir = linalg::identity(r);
    for (g, (a, a2)) in xs.iter().zip(ys).enumerate() {
        let base = g * rows_per;
        // θ' X − Y θ = 0
        l.view_mut((base, 0), (r * p, nx)).copy_from(&linalg::kron(&ip, a2));
        l.view_mut((base, nx), (r * p, ny)).copy_from(&(-linalg::kron(&a.transpose(), &ir)));
        // θ'* Y − X θ* = 0
        l.view_mut((base + r * p, nx), (p * r, ny)).copy_from(&linalg::kron(&ir, &a2.adjoint()));
        l.view_mut((base + r * p, 0), (p * r, nx)).copy_from(&(-linalg::kron(&a.conjugate(), &ip)));
    }
    let normal = l.adjoint() * &l;
    let (vals, vecs) = linalg::hermitian_eigen(&normal);
    let scale = vals.first().copied().unwrap_or(0.0).max(1.0);
    // eigenvalues of L*L are squared singular values; this keeps σ ≲ 1e-6·‖L‖
    let null: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= 1e-12 * scale).collect();
    if null.is_empty() {
        return (None, 0);
    }
    let smallest = |m: &CMatrix| {
        let sv = linalg::singular_values(m);
        match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    };
    // an unlucky draw can be nearly singular, which spoils its polar parts
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, UnitaryPair)> = None;
    for _ in 0..INTERTWINER_DRAWS {
        let mut combo = linalg::zeros(unknowns, 1);
        for &i in &null {
            let w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            combo += vecs.column(i) * w;
        }
        let x = CMatrix::from_column_slice(p, p, &combo.as_slice()[..nx]);
        let y = CMatrix::from_column_slice(r, r, &combo.as_slice()[nx..]);
        if smallest(&x) < 1e-6 || smallest(&y) < 1e-6 {
            continue;
        }
        // θ' = Y θ X⁻¹ with X = (U_1)* |X|-type polar part
        let u1 = linalg::polar_unitary(&x).adjoint();
        let u2 = linalg::polar_unitary(&y);
        let m = misfit(xs, ys, &u1, &u2);
        if best.as_ref().is_none_or(|(b, _)| m < *b) {
            best = Some((m, (u1, u2)));
        }
        if m <= COINCIDENCE_TOL {
            break;
        }
    }
    (best.map(|(_, pair)| pair), null.len())
}

/// Conjugates every operator of a tuple by a unitary: `W T_i W*`.
pub fn conjugate_tuple(t: &OperatorTuple, w: &CMatrix) -> Result<OperatorTuple> {
    OperatorTuple::new(t.mats().iter().map(|m| w * m * w.adjoint()).collect(), None)
}

/// Seeded Haar-like random unitary (QR of a complex Gaussian-ish matrix).
pub fn random_unitary(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    linalg::polar_unitary(&a)
}

/// Seeded points in the ball of radius `radius`.
pub fn sample_points(d: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<Complex64> =
                (0..d).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let nv = crate::kernel::norm(&v).max(1e-12);
            let target = radius * rng.gen_range(0.0..1.0f64).powf(1.0 / (2.0 * d as f64));
            v.into_iter().map(|x| x * (target / nv)).collect()
        })
        .collect()
}

/// Builds defect data, `θ`, `V` and `M_θ` for one configuration.
pub struct Construction {
    pub cfn: CharFnData,
    pub dilation: DilationData,
    pub multiplier: MultiplierMatrix,
}

/// Convenience wrapper with the degree choices used throughout: the dilation
/// and the multiplier share the target degree `window + p` and sources run to it.
pub fn construct(t: &OperatorTuple, f: &KernelFactorization, caps: CharFnCaps, tol: &Tolerances) -> Result<Construction> {
    let cfn = build_charfn(t, f, caps, tol)?;
    let target = cfn.window + t.nilpotency().unwrap_or(cfn.window);
    let target = target.min(f.truncation());
    let dilation = crate::dilation::build_dilation(t, f.k(), &cfn.defect, target, tol)?;
    let multiplier = build_multiplier(&cfn, target, target)?;
    Ok(Construction { cfn, dilation, multiplier })
}
