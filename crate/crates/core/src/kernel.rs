//! One-variable coefficient calculus for unitarily invariant kernels
//! `k(z,w) = Σ a_n ⟨z,w⟩^n` on the unit ball.
//!
//! Coefficients are stored as exact rationals. Every identity between
//! coefficient sequences (reciprocals, quotients, Cauchy products) is
//! therefore exact; floating point only enters through [`KernelSeries::a_f64`]
//! and the pointwise evaluators.

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::rational::{self, qf, to_f64, Rational};

/// Default series truncation order.
pub const DEFAULT_TRUNCATION: usize = 32;

/// Default tolerance for coefficient signs in float mode.
pub const DEFAULT_SIGN_TOL: f64 = 1e-12;

/// A (possibly signed) coefficient sequence `c_0, …, c_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSeries {
    c: Vec<Rational>,
}

impl RealSeries {
    pub fn new(c: Vec<Rational>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidInput("series needs at least one coefficient".into()));
        }
        Ok(Self { c })
    }

    /// `(1, 0, 0, …)` up to `n`.
    pub fn unit(n: usize) -> Self {
        let mut c = vec![Rational::zero(); n + 1];
        c[0] = Rational::one();
        Self { c }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.c
    }

    pub fn truncation(&self) -> usize {
        self.c.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<&Rational> {
        self.c.get(n)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.c.iter().map(to_f64).collect()
    }

    pub fn truncate(&self, n: usize) -> Self {
        Self { c: self.c[..=n.min(self.truncation())].to_vec() }
    }

    /// First index with a negative coefficient.
    pub fn first_negative(&self) -> Option<usize> {
        self.c.iter().position(Signed::is_negative)
    }

    /// Indices `n ≥ 1` with non-zero coefficient.
    pub fn support_from_one(&self) -> Vec<usize> {
        (1..self.c.len()).filter(|&n| !self.c[n].is_zero()).collect()
    }
}

/// Coefficients `a_0 = 1, a_n > 0` of a unitarily invariant kernel on `B_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSeries {
    a: Vec<Rational>,
    d: usize,
    label: String,
    /// Radius of convergence 1 is assumed for CNP factors; recorded, not verified.
    radius_one_assumed: bool,
}

impl KernelSeries {
    pub fn new(a: Vec<Rational>, d: usize, label: impl Into<String>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension d must be >= 1".into()));
        }
        if a.is_empty() || !a[0].is_one() {
            return Err(Error::KernelInvariant("a_0 must equal 1".into()));
        }
        if let Some(n) = a.iter().position(|x| !x.is_positive()) {
            return Err(Error::KernelInvariant(format!("a_{n} must be strictly positive")));
        }
        Ok(Self { a, d, label: label.into(), radius_one_assumed: true })
    }

    /// Generalized Bergman kernel `(1 − ⟨z,w⟩)^{-m}`: `a_n = binom(n+m−1, n)`.
    pub fn bergman(m: u32, d: usize, truncation: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("Bergman exponent m must be >= 1".into()));
        }
        let mut a = Vec::with_capacity(truncation + 1);
        let mut cur = Rational::one();
        a.push(cur.clone());
        for n in 1..=truncation {
            // binom(n+m-1, n) = binom(n+m-2, n-1) * (n+m-1)/n
            cur *= qf((n + m as usize - 1) as i64, n as i64);
            a.push(cur.clone());
        }
        let label = if m == 1 { "drury-arveson".to_string() } else { format!("bergman-m{m}") };
        Self::new(a, d, label)
    }

    /// Drury–Arveson (Szegő when `d = 1`).
    pub fn drury_arveson(d: usize, truncation: usize) -> Self {
        Self::bergman(1, d, truncation).expect("m = 1 is valid")
    }

    /// Dirichlet-type kernel `a_n = 1/(n+1)`.
    pub fn dirichlet(d: usize, truncation: usize) -> Self {
        let a = (0..=truncation).map(|n| qf(1, n as i64 + 1)).collect();
        Self::new(a, d, "dirichlet").expect("Dirichlet coefficients are positive")
    }

    /// `k(z,w) = s(z,w)·g(z,w)` where both factors are kernels.
    pub fn product(s: &KernelSeries, g: &KernelSeries) -> Result<Self> {
        if s.d != g.d {
            return Err(Error::DimensionMismatch { expected: s.d, found: g.d });
        }
        let c = cauchy_product(s.coeffs(), g.coeffs());
        Self::new(c, s.d, format!("{}*{}", s.label, g.label))
    }

    pub fn from_real(c: &RealSeries, d: usize, label: impl Into<String>) -> Result<Self> {
        Self::new(c.coeffs().to_vec(), d, label)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.a
    }

    pub fn a(&self, n: usize) -> Option<&Rational> {
        self.a.get(n)
    }

    pub fn a_f64(&self) -> Vec<f64> {
        self.a.iter().map(to_f64).collect()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn truncation(&self) -> usize {
        self.a.len() - 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn radius_one_assumed(&self) -> bool {
        self.radius_one_assumed
    }

    pub fn as_real(&self) -> RealSeries {
        RealSeries { c: self.a.clone() }
    }

    pub fn truncate(&self, n: usize) -> Self {
        Self { a: self.a[..=n.min(self.truncation())].to_vec(), ..self.clone() }
    }

    pub fn with_dim(&self, d: usize) -> Self {
        Self { d, ..self.clone() }
    }
}

/// Coefficientwise convolution, truncated to the shorter input.
pub fn cauchy_product(p: &[Rational], r: &[Rational]) -> Vec<Rational> {
    let n = p.len().min(r.len());
    (0..n)
        .map(|k| (0..=k).fold(Rational::zero(), |acc, i| acc + &p[k - i] * &r[i]))
        .collect()
}

/// `Σ_{n≥1} b_n t^n = 1 − 1/Σ a_n t^n`, via the reciprocal recurrence.
/// Index 0 of the returned series is 0.
pub fn b_series(k: &KernelSeries) -> RealSeries {
    let a = k.coeffs();
    let mut c = vec![Rational::one()];
    for n in 1..a.len() {
        let s = (1..=n).fold(Rational::zero(), |acc, i| acc + &a[i] * &c[n - i]);
        c.push(-s);
    }
    let mut b: Vec<Rational> = c.into_iter().map(|x| -x).collect();
    b[0] = Rational::zero();
    RealSeries { c: b }
}

/// The same recurrence carried out in `f64`.
pub fn b_series_f64(k: &KernelSeries) -> Vec<f64> {
    let a = k.a_f64();
    let mut c = vec![1.0];
    for n in 1..a.len() {
        let s: f64 = (1..=n).map(|i| a[i] * c[n - i]).sum();
        c.push(-s);
    }
    let mut b: Vec<f64> = c.into_iter().map(|x| -x).collect();
    b[0] = 0.0;
    b
}

/// Scalar backend for sign decisions.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum ScalarMode {
    #[default]
    Exact,
    Float { tol: f64 },
}


#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignCertificate {
    pub holds_up_to: usize,
    pub first_negative: Option<usize>,
}

impl SignCertificate {
    pub fn holds(&self) -> bool {
        self.first_negative.is_none()
    }
}

/// CNP test: `b_n ≥ 0` for `1 ≤ n ≤ N`.
pub fn is_cnp(k: &KernelSeries, mode: ScalarMode) -> SignCertificate {
    let first_negative = match mode {
        ScalarMode::Exact => b_series(k).first_negative(),
        ScalarMode::Float { tol } => b_series_f64(k).iter().position(|&b| b < -tol),
    };
    SignCertificate { holds_up_to: k.truncation(), first_negative }
}

/// `q` with `l * q = k` up to the common truncation.
pub fn quotient(k: &[Rational], l: &[Rational]) -> Result<RealSeries> {
    if l.is_empty() || !l[0].is_one() {
        return Err(Error::KernelInvariant("divisor must have l_0 = 1".into()));
    }
    let n = k.len().min(l.len());
    let mut qs: Vec<Rational> = Vec::with_capacity(n);
    for m in 0..n {
        let s = (0..m).fold(Rational::zero(), |acc, i| acc + &qs[i] * &l[m - i]);
        qs.push(&k[m] - s);
    }
    RealSeries::new(qs)
}

/// `k/l` has non-negative coefficients: the operational test for
/// "`M_z^(k)` is a `1/l`-contraction".
pub fn is_positive_quotient(k: &KernelSeries, l: &KernelSeries) -> Result<SignCertificate> {
    let qs = quotient(k.coeffs(), l.coeffs())?;
    Ok(SignCertificate { holds_up_to: qs.truncation(), first_negative: qs.first_negative() })
}

/// `k = s·g` with `s` CNP and `g` a positive kernel.
#[derive(Clone, Debug)]
pub struct KernelFactorization {
    k: KernelSeries,
    s: KernelSeries,
    g: RealSeries,
}

impl KernelFactorization {
    pub fn k(&self) -> &KernelSeries {
        &self.k
    }

    pub fn s(&self) -> &KernelSeries {
        &self.s
    }

    pub fn g(&self) -> &RealSeries {
        &self.g
    }

    pub fn truncation(&self) -> usize {
        self.g.truncation()
    }
}

pub fn factorize_with_cnp(k: &KernelSeries, s: &KernelSeries) -> Result<KernelFactorization> {
    if k.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: s.dim() });
    }
    if let Some(index) = is_cnp(s, ScalarMode::Exact).first_negative {
        return Err(Error::NotCnp { index });
    }
    let g = quotient(k.coeffs(), s.coeffs())?;
    if let Some(index) = g.first_negative() {
        return Err(Error::NotAFactorization { index, value: rational::format(&g.c[index]) });
    }
    let n = g.truncation();
    for i in 0..=n {
        if s.coeffs()[i] > k.coeffs()[i] || g.c[i] > k.coeffs()[i] {
            return Err(Error::KernelInvariant(format!(
                "factor coefficient exceeds a_{i}^(k); inconsistent factorization"
            )));
        }
    }
    Ok(KernelFactorization { k: k.truncate(n), s: s.truncate(n), g })
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub truncation: usize,
    /// `max_{n<N} a_n / a_{n+1}` (boundedness of the coordinate multipliers).
    pub ratio_sup: String,
    pub ratio_sup_f64: f64,
    /// `sup |Σ_{0<|α|≤D, α≤β} b_α a_{β−α}/a_β|` over `|β| ≤ N`, `D ≤ |β|`:
    /// the norm of the intermediate partial sums of the `b`-weighted series.
    pub partial_sum_bound: f64,
    /// Minimum over `|β| ≤ N` and `D ≤ |β|` of the diagonal of `I −` partial sum.
    pub diagonal_min: f64,
    /// Full sums equal the projection onto constants at every degree `≤ N`.
    pub limit_is_e0: bool,
    pub verdict: String,
}

/// Truncation-level admissibility certificate. Never a global claim.
///
/// The diagonal value of the degree-`D` partial sum at a monomial of degree
/// `n` depends only on `n`, because
/// `Σ_{α≤β, |α|=j} binom(j,α) binom(n−j, β−α) = binom(n, β)`.
pub fn admissibility_report(k: &KernelSeries) -> AdmissibilityReport {
    let a = k.coeffs();
    let b = b_series(k);
    let n_max = k.truncation();
    let mut ratio_sup = Rational::zero();
    for n in 0..n_max {
        let r = &a[n] / &a[n + 1];
        if r > ratio_sup {
            ratio_sup = r;
        }
    }
    let mut partial_sum_bound = 0.0f64;
    let mut diagonal_min = f64::INFINITY;
    let mut limit_is_e0 = true;
    for n in 0..=n_max {
        let mut partial = Rational::zero();
        diagonal_min = diagonal_min.min(1.0);
        for j in 1..=n {
            partial += &b.c[j] * &a[n - j] / &a[n];
            let p = to_f64(&partial);
            partial_sum_bound = partial_sum_bound.max(p.abs());
            diagonal_min = diagonal_min.min(1.0 - p);
        }
        let full = Rational::one() - &partial;
        let expected = if n == 0 { Rational::one() } else { Rational::zero() };
        if full != expected {
            limit_is_e0 = false;
        }
    }
    let certified = limit_is_e0 && partial_sum_bound.is_finite();
    AdmissibilityReport {
        truncation: n_max,
        ratio_sup: rational::format(&ratio_sup),
        ratio_sup_f64: to_f64(&ratio_sup),
        partial_sum_bound,
        diagonal_min,
        limit_is_e0,
        verdict: if certified {
            format!("certified up to N = {n_max}")
        } else {
            format!("not certified at N = {n_max}")
        },
    }
}

/// `⟨z, w⟩ = Σ z_i conj(w_i)`.
pub fn inner(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    /// Heuristic geometric bound on the discarded tail; 0 when truncated
    /// semantics are requested.
    pub tail_bound: f64,
}

/// Partial sum `Σ_{n≤N} a_n ⟨z,w⟩^n` with a geometric tail estimate.
pub fn evaluate(k: &KernelSeries, z: &[Complex64], w: &[Complex64], truncated: bool) -> Result<Evaluation> {
    for p in [z, w] {
        if p.len() != k.dim() {
            return Err(Error::DimensionMismatch { expected: k.dim(), found: p.len() });
        }
        let r = norm(p);
        if r >= 1.0 {
            return Err(Error::OutsideBall(r));
        }
    }
    let t = inner(z, w);
    let a = k.a_f64();
    let value = eval_series(&a, t);
    let tail_bound = if truncated { 0.0 } else { tail_estimate(&a, t.norm()) };
    Ok(Evaluation { value, tail_bound })
}

/// Horner evaluation of `Σ c_n t^n`.
pub fn eval_series(c: &[f64], t: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::zero(), |acc, &x| acc * t + x)
}

/// `a_N |t|^{N+1} ρ / (1 − ρ|t|)` with `ρ` the largest forward ratio over the
/// last half of the stored coefficients.
fn tail_estimate(a: &[f64], t_abs: f64) -> f64 {
    let n = a.len() - 1;
    if n == 0 {
        return if t_abs < 1.0 { a[0] * t_abs / (1.0 - t_abs) } else { f64::INFINITY };
    }
    let rho = (n / 2..n).map(|i| a[i + 1] / a[i]).fold(0.0f64, f64::max).max(1e-300);
    let q = rho * t_abs;
    if q >= 1.0 {
        return f64::INFINITY;
    }
    a[n] * t_abs.powi(n as i32 + 1) * rho / (1.0 - q)
}

/// `c_{|α|} · binom(|α|, α)`.
pub fn lift_to_multiindex(c: &[Rational], alpha: &MultiIndex) -> Result<Rational> {
    let n = alpha.degree();
    let cn = c.get(n).ok_or(Error::BeyondTruncation { requested: n, truncation: c.len() - 1 })?;
    Ok(cn * rational::from_biguint(&alpha.multinomial()))
}

/// Lift of `c` at `α − γ`, zero when the difference leaves `Z^d_+`.
pub fn lift_at_difference(c: &[Rational], alpha: &MultiIndex, gamma: &MultiIndex) -> Result<Rational> {
    match alpha.subtract(gamma)? {
        Some(diff) => lift_to_multiindex(c, &diff),
        None => Ok(Rational::zero()),
    }
}

/// On-disk kernel description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Bergman {
        m: u32,
        d: usize,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    Dirichlet {
        d: usize,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    Szego {
        d: usize,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    Coeffs {
        a: Vec<String>,
        d: usize,
    },
    /// Pointwise product of the listed kernels.
    Product {
        factors: Vec<KernelSpec>,
    },
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

impl KernelSpec {
    pub fn build(&self) -> Result<KernelSeries> {
        match self {
            KernelSpec::Bergman { m, d, truncation } => KernelSeries::bergman(*m, *d, *truncation),
            KernelSpec::Dirichlet { d, truncation } => Ok(KernelSeries::dirichlet(*d, *truncation)),
            KernelSpec::Szego { d, truncation } => Ok(KernelSeries::drury_arveson(*d, *truncation)),
            KernelSpec::Coeffs { a, d } => {
                let a = a.iter().map(|s| rational::parse(s)).collect::<Result<Vec<_>>>()?;
                KernelSeries::new(a, *d, "coeffs")
            }
            KernelSpec::Product { factors } => {
                let mut it = factors.iter();
                let first = it.next().ok_or_else(|| Error::InvalidInput("product needs at least one factor".into()))?;
                it.try_fold(first.build()?, |acc, f| KernelSeries::product(&acc, &f.build()?))
            }
        }
    }

    /// Replaces the truncation order where the kind carries one; explicit
    /// coefficient lists are cut (never extended).
    pub fn with_truncation(&self, n: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            KernelSpec::Bergman { truncation, .. }
            | KernelSpec::Dirichlet { truncation, .. }
            | KernelSpec::Szego { truncation, .. } => *truncation = n,
            KernelSpec::Coeffs { a, .. } => a.truncate(n + 1),
            KernelSpec::Product { factors } => {
                for f in factors.iter_mut() {
                    *f = f.with_truncation(n);
                }
            }
        }
        out
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("kernel spec: {e}")))
    }
}

impl KernelSeries {
    /// Coefficients as a `coeffs` spec, exact across the wire.
    pub fn to_spec(&self) -> KernelSpec {
        KernelSpec::Coeffs { a: self.a.iter().map(rational::format).collect(), d: self.d }
    }
}

/// `(−1)^{n+1} binom(m, n)` for `1 ≤ n ≤ m`, else 0.
pub fn bergman_b_closed_form(m: u32, n: usize) -> Rational {
    if n == 0 || n > m as usize {
        return Rational::zero();
    }
    let mut binom = Rational::one();
    for i in 0..n {
        binom *= qf(m as i64 - i as i64, i as i64 + 1);
    }
    if n % 2 == 1 {
        binom
    } else {
        -binom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn qs(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(n, d)| qf(n, d)).collect()
    }

    /// Independent oracle: long division of `1 − 1/A(t)` computed as
    /// `(A(t) − 1)/A(t)` by schoolbook division, coefficient by coefficient.
    fn b_by_long_division(a: &[Rational]) -> Vec<Rational> {
        let mut num: Vec<Rational> = a.to_vec();
        num[0] = Rational::zero();
        let mut out = vec![Rational::zero(); a.len()];
        for n in 0..a.len() {
            let coef = num[n].clone() / &a[0];
            for i in 0..a.len() - n {
                num[n + i] = &num[n + i] - &coef * &a[i];
            }
            out[n] = coef;
        }
        out
    }

    #[test]
    fn b_series_examples() {
        let sz = KernelSeries::drury_arveson(1, 10);
        let b = b_series(&sz);
        assert_eq!(b.coeffs()[1], q(1));
        assert!(b.coeffs()[2..].iter().all(Zero::is_zero));

        let k2 = KernelSeries::bergman(2, 1, 10).unwrap();
        let b = b_series(&k2);
        assert_eq!(b.coeffs()[1], q(2));
        assert_eq!(b.coeffs()[2], q(-1));
        assert!(b.coeffs()[3..].iter().all(Zero::is_zero));

        let dir = KernelSeries::dirichlet(1, 12);
        let b = b_series(&dir);
        let oracle = b_by_long_division(dir.coeffs());
        assert_eq!(b.coeffs(), &oracle[..]);
        assert_eq!(b.coeffs()[1], qf(1, 2));
        assert_eq!(b.coeffs()[2], qf(1, 12));
    }

    #[test]
    fn float_b_series_tracks_exact() {
        let dir = KernelSeries::dirichlet(1, 30);
        let exact = b_series(&dir).to_f64();
        let float = b_series_f64(&dir);
        for (e, f) in exact.iter().zip(&float) {
            assert!((e - f).abs() < 1e-14);
        }
    }

    #[test]
    fn cnp_examples() {
        assert!(is_cnp(&KernelSeries::drury_arveson(3, 40), ScalarMode::Exact).holds());
        let c = is_cnp(&KernelSeries::bergman(2, 1, 20).unwrap(), ScalarMode::Exact);
        assert_eq!(c.first_negative, Some(2));
        assert!(is_cnp(&KernelSeries::dirichlet(1, 50), ScalarMode::Exact).holds());
        let c = is_cnp(&KernelSeries::dirichlet(1, 50), ScalarMode::Float { tol: DEFAULT_SIGN_TOL });
        assert!(c.holds());
        assert_eq!(c.holds_up_to, 50);
    }

    #[test]
    fn cauchy_product_examples() {
        let sz = KernelSeries::drury_arveson(1, 8);
        let p = cauchy_product(sz.coeffs(), sz.coeffs());
        assert_eq!(p, KernelSeries::bergman(2, 1, 8).unwrap().coeffs());
        let k3 = KernelSeries::bergman(3, 1, 8).unwrap();
        assert_eq!(cauchy_product(k3.coeffs(), RealSeries::unit(8).coeffs()), k3.coeffs());
        // truncates to the shorter input
        assert_eq!(cauchy_product(sz.coeffs(), &sz.coeffs()[..4]).len(), 4);
    }

    #[test]
    fn quotient_examples() {
        let k1 = KernelSeries::drury_arveson(1, 8);
        let k2 = KernelSeries::bergman(2, 1, 8).unwrap();
        let k3 = KernelSeries::bergman(3, 1, 8).unwrap();
        let qv = quotient(k2.coeffs(), k1.coeffs()).unwrap();
        assert!(qv.coeffs().iter().all(|x| *x == q(1)));
        assert_eq!(quotient(k3.coeffs(), k3.coeffs()).unwrap(), RealSeries::unit(8));
        let qv = quotient(k1.coeffs(), k2.coeffs()).unwrap();
        assert_eq!(&qv.coeffs()[..3], &qs(&[(1, 1), (-1, 1), (0, 1)])[..]);
        assert!(qv.coeffs()[2..].iter().all(Zero::is_zero));

        let c = is_positive_quotient(&k3, &k1).unwrap();
        assert!(c.holds());
        let qv = quotient(k3.coeffs(), k1.coeffs()).unwrap();
        for (n, x) in qv.coeffs().iter().enumerate() {
            assert_eq!(*x, q(n as i64 + 1));
        }
        assert!(is_positive_quotient(&k2, &k2).unwrap().holds());
        assert_eq!(is_positive_quotient(&k1, &k2).unwrap().first_negative, Some(1));
    }

    #[test]
    fn factorization_examples() {
        let k2 = KernelSeries::bergman(2, 2, 10).unwrap();
        let da = KernelSeries::drury_arveson(2, 10);
        let f = factorize_with_cnp(&k2, &da).unwrap();
        assert!(f.g().coeffs().iter().all(|x| *x == q(1)));

        let dir = KernelSeries::dirichlet(1, 10);
        let dd = KernelSeries::product(&dir, &dir).unwrap();
        let f = factorize_with_cnp(&dd, &dir).unwrap();
        assert_eq!(f.g().coeffs(), dir.coeffs());

        let k1 = KernelSeries::drury_arveson(1, 10);
        let k2 = KernelSeries::bergman(2, 1, 10).unwrap();
        assert!(matches!(factorize_with_cnp(&k1, &k2), Err(Error::NotCnp { index: 2 })));
        // bypassing the CNP gate, the quotient itself is negative
        assert_eq!(quotient(k1.coeffs(), k2.coeffs()).unwrap().first_negative(), Some(1));
    }

    #[test]
    fn admissibility_examples() {
        let r = admissibility_report(&KernelSeries::drury_arveson(1, 20));
        assert_eq!(r.ratio_sup, "1/1");
        assert!(r.limit_is_e0);

        let r = admissibility_report(&KernelSeries::bergman(2, 1, 20).unwrap());
        assert_eq!(r.ratio_sup, "20/21");
        assert!(r.ratio_sup_f64 < 1.0);
        assert!(r.limit_is_e0);

        let r = admissibility_report(&KernelSeries::dirichlet(1, 20));
        assert_eq!(r.ratio_sup, "2/1");
        assert!(r.verdict.starts_with("certified"));
    }

    #[test]
    fn evaluate_examples() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let sz = KernelSeries::drury_arveson(2, 32);
        let e = evaluate(&sz, &[c(0.0), c(0.0)], &[c(0.0), c(0.0)], false).unwrap();
        assert_eq!(e.value, c(1.0));

        let k2 = KernelSeries::bergman(2, 1, 32).unwrap();
        let e = evaluate(&k2, &[c(0.5)], &[c(0.5)], false).unwrap();
        assert!((e.value - c(16.0 / 9.0)).norm() <= e.tail_bound + 1e-15);
        assert!(e.tail_bound < 1e-15);

        let dir = KernelSeries::dirichlet(1, 30);
        let e = evaluate(&dir, &[c(0.5)], &[c(0.5)], false).unwrap();
        let t: f64 = 0.25;
        assert!((e.value.re - (-(1.0 - t).ln() / t)).abs() <= 1e-10);

        assert!(matches!(evaluate(&dir, &[c(1.0)], &[c(0.0)], false), Err(Error::OutsideBall(_))));
    }

    #[test]
    fn lift_examples() {
        let sz = KernelSeries::drury_arveson(2, 4);
        let a11 = MultiIndex::new(vec![1, 1]).unwrap();
        assert_eq!(lift_to_multiindex(sz.coeffs(), &a11).unwrap(), q(2));
        let b = b_series(&KernelSeries::bergman(2, 2, 4).unwrap());
        assert_eq!(lift_to_multiindex(b.coeffs(), &a11).unwrap(), q(-2));
        assert_eq!(lift_to_multiindex(sz.coeffs(), &MultiIndex::zero(2)).unwrap(), q(1));
        let deep = MultiIndex::new(vec![3, 3]).unwrap();
        assert!(matches!(lift_to_multiindex(sz.coeffs(), &deep), Err(Error::BeyondTruncation { .. })));
    }

    #[test]
    fn bergman_constructor_matches_sigma() {
        // σ_m(α) = (m+|α|−1)!/(α!(m−1)!)
        let k3 = KernelSeries::bergman(3, 2, 6).unwrap();
        let alpha = MultiIndex::new(vec![2, 1]).unwrap();
        assert_eq!(lift_to_multiindex(k3.coeffs(), &alpha).unwrap(), q(30));
        let k2 = KernelSeries::bergman(2, 1, 6).unwrap();
        for n in 0..=6 {
            assert_eq!(k2.coeffs()[n], q(n as i64 + 1));
        }
        assert!(KernelSeries::bergman(1, 1, 6).unwrap().coeffs().iter().all(|x| *x == q(1)));
        assert!(KernelSeries::bergman(0, 1, 6).is_err());
    }

    #[test]
    fn constructor_rejects_bad_coefficients() {
        assert!(KernelSeries::new(vec![q(2), q(1)], 1, "x").is_err());
        assert!(KernelSeries::new(vec![q(1), q(0)], 1, "x").is_err());
        assert!(KernelSeries::new(vec![q(1), q(1)], 0, "x").is_err());
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = KernelSpec::from_json(r#"{"kind":"bergman","m":2,"d":1,"truncation":8}"#).unwrap();
        assert_eq!(spec.build().unwrap(), KernelSeries::bergman(2, 1, 8).unwrap());
        let spec = KernelSpec::from_json(r#"{"kind":"coeffs","a":["1","1/2","1/3"],"d":1}"#).unwrap();
        let k = spec.build().unwrap();
        assert_eq!(k.coeffs(), KernelSeries::dirichlet(1, 2).coeffs());
        let back = KernelSpec::from_json(&serde_json::to_string(&k.to_spec()).unwrap()).unwrap();
        assert_eq!(back.build().unwrap().coeffs(), k.coeffs());
        assert!(KernelSpec::from_json(r#"{"kind":"nope"}"#).is_err());
        let spec = KernelSpec::from_json(r#"{"kind":"szego","d":2}"#).unwrap();
        assert_eq!(spec.build().unwrap().truncation(), DEFAULT_TRUNCATION);
        let spec = KernelSpec::from_json(
            r#"{"kind":"product","factors":[{"kind":"szego","d":1},{"kind":"dirichlet","d":1}]}"#,
        )
        .unwrap()
        .with_truncation(10);
        let expected = KernelSeries::product(&KernelSeries::drury_arveson(1, 10), &KernelSeries::dirichlet(1, 10)).unwrap();
        assert_eq!(spec.build().unwrap().coeffs(), expected.coeffs());
        assert!(KernelSpec::from_json(r#"{"kind":"product","factors":[]}"#).unwrap().build().is_err());
    }
}
