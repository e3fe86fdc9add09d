//! The dilation isometry `V_T : H → H_k ⊗ Ran Δ`,
//! `h ↦ Σ_α a_α z^α ⊗ Δ (T^α)* h`, its intertwining relations and the
//! associated tuple on `Ker V_T*`.
//!
//! Target coordinates: row `pos(α)·r + j` is `e(α) ⊗ δ_j`, where `e(α)` is the
//! orthonormal monomial basis of the truncated `H_k` and `δ_j` the columns of
//! `DefectData::ran_delta`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{b_series, KernelSeries};
use crate::linalg::{self, c, max_abs, CMatrix, CVector, Tolerances};
use crate::model::ModelSpace;
use crate::tuple::{purity_check, DefectData, OperatorTuple};

/// Purity residual above which `V_T` is refused.
pub const PURITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DilationData {
    pub v: CMatrix,
    pub space: ModelSpace,
    /// `dim Ran Δ`.
    pub rank: usize,
    pub target_degree: usize,
    /// Nilpotent tuple and `target_degree ≥ nilpotency − 1`: nothing is cut off.
    pub exact: bool,
}

impl DilationData {
    /// `V*(M_{z_i} ⊗ I)` on the truncated target.
    fn lifted_shift(&self, i: usize) -> CMatrix {
        self.space.shift_tensor(i, self.rank)
    }

    pub fn isometry_residual(&self) -> f64 {
        max_abs(&(self.v.adjoint() * &self.v - linalg::identity(self.v.ncols())))
    }

    /// `‖V*(M_{z_i} ⊗ I) − T_i V*‖` for each coordinate.
    pub fn intertwining_residual(&self, t: &OperatorTuple) -> Vec<f64> {
        let vs = self.v.adjoint();
        (0..t.dim()).map(|i| max_abs(&(&vs * self.lifted_shift(i) - t.get(i) * &vs))).collect()
    }

    /// Row indices of target basis elements with degree `≤ deg`.
    pub fn rows_up_to(&self, deg: usize) -> Vec<usize> {
        let r = self.rank;
        self.space.degree_range(0, deg).into_iter().flat_map(|p| (0..r).map(move |j| p * r + j)).collect()
    }
}

/// Builds `V_T` into `H_k ⊗ Ran Δ` truncated at `target_degree`.
pub fn build_dilation(
    t: &OperatorTuple,
    k: &KernelSeries,
    defect: &DefectData,
    target_degree: usize,
    tol: &Tolerances,
) -> Result<DilationData> {
    let purity = purity_check(t, k, defect, tol);
    if purity.residual > PURITY_TOL {
        return Err(Error::NotPure { residual: purity.residual });
    }
    let space = ModelSpace::new(k, target_degree)?;
    let r = defect.rank();
    let n = t.size();
    let mut v = linalg::zeros(space.len() * r, n);
    for (p, alpha) in space.basis().indices().iter().enumerate() {
        let block = &defect.delta_coords * t.apply_power(alpha).adjoint() * c(space.sqrt_a()[p]);
        v.view_mut((p * r, 0), (r, n)).copy_from(&block);
    }
    let exact = matches!(t.nilpotency(), Some(p) if target_degree + 1 >= p);
    Ok(DilationData { v, space, rank: r, target_degree, exact })
}

/// Both sides of `V*(k_w ⊗ ξ) = k_w(T) Δ ξ`, `ξ` in `Ran Δ` coordinates.
#[derive(Clone, Debug)]
pub struct KernelAction {
    pub value: CVector,
    pub via_dilation: CVector,
    pub difference: f64,
}

pub fn kernel_vector_action(
    dil: &DilationData,
    t: &OperatorTuple,
    k: &KernelSeries,
    defect: &DefectData,
    w: &[Complex64],
    xi: &CVector,
    tol: &Tolerances,
) -> Result<KernelAction> {
    if xi.len() != dil.rank {
        return Err(Error::DimensionMismatch { expected: dil.rank, found: xi.len() });
    }
    let kw = dil.space.kernel_vector(w);
    let target = linalg::kron(&CMatrix::from_column_slice(kw.len(), 1, kw.as_slice()), &CMatrix::from_column_slice(xi.len(), 1, xi.as_slice()));
    let via_dilation: CVector = (dil.v.adjoint() * target).column(0).into_owned();
    let kw_t = t.operator_series(&k.a_f64(), w, tol)?;
    let value: CVector = kw_t * &defect.delta * &defect.ran_delta * xi;
    let difference = (&value - &via_dilation).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if difference > 1e-10 {
        return Err(Error::Disagreement { what: "V*(k_w ⊗ ξ) against k_w(T) Δ ξ".into(), difference });
    }
    Ok(KernelAction { value, via_dilation, difference })
}

/// Window certificate for `B_T` being a `1/l`-contraction.
#[derive(Clone, Debug, Serialize)]
pub struct AssociatedCertificate {
    pub window_degree: usize,
    /// `dim (Ker V* ∩ window)`.
    pub kernel_dim: usize,
    pub min_eigenvalue: f64,
    /// Non-negative form on the window. Supporting evidence only; a negative
    /// minimum rules out a characteristic function through `l`.
    pub holds: bool,
    #[serde(skip)]
    pub kernel_basis: CMatrix,
    #[serde(skip)]
    pub form: CMatrix,
}

impl AssociatedCertificate {
    /// `⟨Q x, x⟩` for `x` given in target coordinates (projected onto the window of `Ker V*`).
    pub fn evaluate(&self, x: &CVector) -> f64 {
        let y = self.kernel_basis.adjoint() * x;
        (y.adjoint() * &self.form * y)[(0, 0)].re
    }
}

/// Evaluates `I − Σ_{α≠0} b_α^(l) B^α (B^α)*` on `Ker V* ∩ {degree ≤ W}`,
/// `B = (M_z ⊗ I)|_{Ker V*}`. `Ran V` is co-invariant and `B*` lowers degree, so
/// with `W ≥ nilpotency` the window form is exact.
pub fn associated_tuple_test(dil: &DilationData, l: &KernelSeries, tol: &Tolerances) -> Result<AssociatedCertificate> {
    if !dil.exact {
        return Err(Error::WindowTooSmall(format!(
            "target degree {} does not contain Ran V",
            dil.target_degree
        )));
    }
    let ran_v = linalg::range_basis(&dil.v, tol.rank_cutoff);
    let kernel_basis = linalg::complement_basis(&ran_v);
    let kdim = kernel_basis.ncols();
    if kdim == 0 {
        return Err(Error::WindowTooSmall(format!("no part of Ker V* below degree {}", dil.target_degree)));
    }
    let adj: Vec<CMatrix> =
        (0..dil.space.dim()).map(|i| kernel_basis.adjoint() * dil.lifted_shift(i).adjoint() * &kernel_basis).collect();
    let b = b_series(l).to_f64();
    let depth = dil.target_degree.min(b.len() - 1);
    let mut form = linalg::identity(kdim);
    let mut term = linalg::identity(kdim);
    for bj in b.iter().take(depth + 1).skip(1) {
        term = adj.iter().fold(linalg::zeros(kdim, kdim), |acc, ci| acc + ci.adjoint() * &term * ci);
        form -= &term * c(*bj);
    }
    let min_eigenvalue = linalg::min_eigenvalue(&form);
    Ok(AssociatedCertificate {
        window_degree: dil.target_degree,
        kernel_dim: kdim,
        min_eigenvalue,
        holds: min_eigenvalue >= -tol.eig_clamp,
        kernel_basis,
        form,
    })
}
