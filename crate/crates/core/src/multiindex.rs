//! Multi-indices over `Z^d_+` and the graded monomial basis.
//!
//! Every basis in this crate is ordered the same way: by total degree first,
//! and within a degree lexicographically with the first coordinate most
//! significant, descending (so `(1,0)` precedes `(0,1)`). Model operators are
//! block lower triangular by degree in this order.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-index `α = (α_1, …, α_d)` of non-negative integers.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("multi-index needs dimension d >= 1".into()));
        }
        Ok(Self(entries))
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// The unit multi-index `e_i`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0; d];
        v[i] = 1;
        Self(v)
    }

    /// `(n, 0, …, 0)`.
    pub fn first_axis(d: usize, n: u32) -> Self {
        let mut v = vec![0; d];
        v[0] = n;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// `|α|`.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `α + e_i`.
    pub fn bump(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] += 1;
        Self(v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    /// Componentwise difference; `Ok(None)` when the result leaves `Z^d_+`
    /// (coefficients indexed there are zero by convention).
    pub fn subtract(&self, other: &Self) -> Result<Option<Self>> {
        self.check_dim(other)?;
        let mut out = Vec::with_capacity(self.0.len());
        for (&a, &b) in self.0.iter().zip(&other.0) {
            if b > a {
                return Ok(None);
            }
            out.push(a - b);
        }
        Ok(Some(Self(out)))
    }

    /// `γ ≤ α` componentwise.
    pub fn dominates(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// `|α|! / (α_1! ⋯ α_d!)`, exact.
    pub fn multinomial(&self) -> BigUint {
        // product of binomials avoids the large intermediate factorials
        let mut acc = BigUint::one();
        let mut running = 0u64;
        for &a in &self.0 {
            for j in 1..=u64::from(a) {
                running += 1;
                acc *= running;
                acc /= j;
            }
        }
        acc
    }

    /// Multinomial in `f64`; fails when the value exceeds the exactly
    /// representable integer range.
    pub fn multinomial_f64(&self) -> Result<f64> {
        let m = self.multinomial();
        if m.bits() > 53 {
            return Err(Error::Overflow(format!("multinomial of {self:?} exceeds 2^53")));
        }
        Ok(m.to_f64().expect("bounded by 2^53"))
    }

    /// `z^α` for a complex point.
    pub fn monomial(&self, z: &[num_complex::Complex64]) -> num_complex::Complex64 {
        self.0
            .iter()
            .zip(z)
            .fold(num_complex::Complex64::new(1.0, 0.0), |acc, (&a, zi)| acc * zi.powu(a))
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.0.len() != other.0.len() {
            return Err(Error::DimensionMismatch { expected: self.0.len(), found: other.0.len() });
        }
        Ok(())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of degree exactly `n`, descending lexicographic.
pub fn enumerate_degree(d: usize, n: usize) -> Vec<MultiIndex> {
    fn rec(d: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == d - 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            rec(d, remaining - a, prefix, out);
            prefix.pop();
        }
    }
    assert!(d >= 1, "dimension must be at least 1");
    let mut out = Vec::new();
    rec(d, n as u32, &mut Vec::with_capacity(d), &mut out);
    out
}

/// All multi-indices with `|α| ≤ n` in graded order.
pub fn enumerate_up_to_degree(d: usize, n: usize) -> Vec<MultiIndex> {
    (0..=n).flat_map(|k| enumerate_degree(d, k)).collect()
}

/// `binom(n + d, d)`: the number of monomials of degree at most `n`.
pub fn count_up_to_degree(d: usize, n: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=d as u128 {
        c = c * (n as u128 + i) / i;
    }
    c as usize
}

/// A graded monomial basis with constant-time index lookup.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    d: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

impl GradedBasis {
    pub fn new(d: usize, max_degree: usize) -> Self {
        let indices = enumerate_up_to_degree(d, max_degree);
        let position = indices.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        Self { d, max_degree, indices, position }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    /// Number of basis elements of degree at most `n`.
    pub fn len_up_to(&self, n: usize) -> usize {
        count_up_to_degree(self.d, n.min(self.max_degree))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_up_to_degree(1, 2), vec![mi(&[0]), mi(&[1]), mi(&[2])]);
        assert_eq!(enumerate_up_to_degree(2, 1), vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])]);
        assert_eq!(enumerate_up_to_degree(2, 3).len(), 10);
    }

    #[test]
    fn enumeration_counts_and_distinctness() {
        for d in 1..=4 {
            for n in 0..=6 {
                let all = enumerate_up_to_degree(d, n);
                assert_eq!(all.len(), count_up_to_degree(d, n));
                let set: std::collections::HashSet<_> = all.iter().collect();
                assert_eq!(set.len(), all.len());
                assert!(all.iter().all(|a| a.degree() <= n));
                assert!(all.windows(2).all(|w| w[0].degree() <= w[1].degree()));
            }
        }
    }

    #[test]
    fn multinomial_examples() {
        assert_eq!(mi(&[2, 1]).multinomial(), BigUint::from(3u32));
        assert_eq!(mi(&[0, 0, 0]).multinomial(), BigUint::from(1u32));
        assert_eq!(mi(&[2, 2]).multinomial(), BigUint::from(6u32));
        assert_eq!(mi(&[1, 1, 1]).multinomial(), BigUint::from(6u32));
    }

    #[test]
    fn multinomial_float_overflow_is_signalled() {
        assert_eq!(mi(&[3, 2]).multinomial_f64().unwrap(), 10.0);
        assert!(matches!(mi(&[40, 40]).multinomial_f64(), Err(Error::Overflow(_))));
        // exact mode keeps going
        assert!(mi(&[40, 40]).multinomial().bits() > 53);
    }

    #[test]
    fn subtract_examples() {
        assert_eq!(mi(&[2, 1]).subtract(&mi(&[1, 0])).unwrap(), Some(mi(&[1, 1])));
        assert_eq!(mi(&[1, 0]).subtract(&mi(&[0, 1])).unwrap(), None);
        assert_eq!(mi(&[3]).subtract(&mi(&[3])).unwrap(), Some(mi(&[0])));
        assert!(mi(&[1]).subtract(&mi(&[1, 0])).is_err());
    }

    #[test]
    fn empty_multiindex_rejected() {
        assert!(MultiIndex::new(vec![]).is_err());
    }

    #[test]
    fn basis_lookup() {
        let b = GradedBasis::new(2, 3);
        for (i, a) in b.indices().iter().enumerate() {
            assert_eq!(b.position(a), Some(i));
        }
        assert_eq!(b.len_up_to(1), 3);
        assert_eq!(b.position(&mi(&[4, 0])), None);
    }
}
