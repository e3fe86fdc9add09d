//! Exact rational scalars and dense rational matrices.

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;
pub type QMatrix = DMatrix<Rational>;

pub fn q(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn qf(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_biguint(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

pub fn to_f64(x: &Rational) -> f64 {
    // numerator and denominator can individually overflow f64 while the ratio is fine
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000) as usize;
            let n = (x.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (x.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            n / d
        }
    }
}

/// Parses `"p/q"` or `"p"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Always `"p/q"`, reduced, with `q ≥ 1`.
pub fn format(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Nearest rational with denominator at most `max_den` (continued fractions),
/// provided it lies within `tol` of `x`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= tol {
            return Some(qf(h1, k1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 != 0 && (h1 as f64 / k1 as f64 - x).abs() <= tol {
        Some(qf(h1, k1))
    } else {
        None
    }
}

pub fn qmatrix_zero(r: usize, c: usize) -> QMatrix {
    QMatrix::from_element(r, c, Rational::zero())
}

pub fn qmatrix_identity(n: usize) -> QMatrix {
    let mut m = qmatrix_zero(n, n);
    for i in 0..n {
        m[(i, i)] = Rational::one();
    }
    m
}

pub fn qmatrix_is_zero(m: &QMatrix) -> bool {
    m.iter().all(Zero::is_zero)
}

pub fn qmatrix_scale(m: &QMatrix, s: &Rational) -> QMatrix {
    m.map(|x| x * s)
}

pub fn qmatrix_to_f64(m: &QMatrix) -> DMatrix<f64> {
    m.map(|x| to_f64(&x))
}

/// Largest absolute entry, as `f64`.
pub fn qmatrix_max_abs(m: &QMatrix) -> f64 {
    m.iter().map(|x| to_f64(&x.abs())).fold(0.0, f64::max)
}
