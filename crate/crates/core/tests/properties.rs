use charfn_core::charfn::{
    build_charfn, coincidence, conjugate_tuple, construct, factorization_residual, random_unitary, sample_points,
    CharFnCaps,
};
use charfn_core::kernel::{b_series, cauchy_product, factorize_with_cnp, KernelSeries};
use charfn_core::linalg::{max_abs, CMatrix, Tolerances};
use charfn_core::model::model_tuple;
use charfn_core::multiindex::{enumerate_degree, MultiIndex};
use charfn_core::tuple::{coinvariant_hull, compress};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn rationals(v: &[u32]) -> Vec<BigRational> {
    std::iter::once(BigRational::one()).chain(v.iter().map(|&x| BigRational::from_integer(x.into()))).collect()
}

fn seeds(n: usize, cols: usize, vals: &[(f64, f64)]) -> CMatrix {
    CMatrix::from_fn(n, cols, |i, j| {
        let (re, im) = vals[(i * cols + j) % vals.len()];
        Complex64::new(re, im)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degree_count(d in 1usize..5, n in 0usize..8) {
        let all = enumerate_degree(d, n);
        prop_assert_eq!(all.len() as u64, binom((n + d - 1) as u64, (d - 1) as u64));
        prop_assert!(all.iter().all(|a| a.degree() == n && a.dim() == d));
    }

    #[test]
    fn add_subtract_roundtrip(a in prop::collection::vec(0u32..6, 3), b in prop::collection::vec(0u32..6, 3)) {
        let x = MultiIndex::new(a).unwrap();
        let y = MultiIndex::new(b).unwrap();
        let s = x.add(&y).unwrap();
        prop_assert_eq!(s.subtract(&y).unwrap(), Some(x.clone()));
        prop_assert_eq!(s.degree(), x.degree() + y.degree());
    }

    #[test]
    fn quotient_recovers_factor(g in prop::collection::vec(1u32..6, 12)) {
        let da = KernelSeries::drury_arveson(1, 12);
        let gk = KernelSeries::new(rationals(&g), 1, "g").unwrap();
        let k = KernelSeries::product(&da, &gk).unwrap();
        let f = factorize_with_cnp(&k, &da).unwrap();
        prop_assert_eq!(f.g().coeffs(), gk.coeffs());
    }

    #[test]
    fn b_series_inverts(a in prop::collection::vec(1u32..6, 10)) {
        let k = KernelSeries::new(rationals(&a), 1, "k").unwrap();
        let b = b_series(&k);
        let one_minus_b: Vec<BigRational> =
            b.coeffs().iter().enumerate().map(|(n, x)| if n == 0 { BigRational::one() } else { -x.clone() }).collect();
        let prod = cauchy_product(&one_minus_b, k.coeffs());
        prop_assert!(prod[0].is_one());
        prop_assert!(prod[1..].iter().all(Zero::is_zero));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Compressions of a model tuple to co-invariant subspaces are again pure,
    /// so every identity of the construction has to hold for them.
    #[test]
    fn coinvariant_compressions(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6), cols in 1usize..3, seed in 0u64..1000) {
        let tol = Tolerances::default();
        let k = KernelSeries::bergman(2, 2, 24).unwrap();
        let da = KernelSeries::drury_arveson(2, 24);
        let f = factorize_with_cnp(&k, &da).unwrap();
        let t = model_tuple(&k, 2).unwrap();
        let basis = coinvariant_hull(&t, &seeds(t.size(), cols, &vals), &tol);
        prop_assume!(basis.ncols() > 0);
        let c = compress(&t, &basis).unwrap();
        prop_assert!(c.coinvariance_residual < 1e-10);
        let con = construct(&c.tuple, &f, CharFnCaps::default(), &tol).unwrap();
        let rep = con.cfn.block_report();
        prop_assert!(rep.max_relation() < 1e-9, "{:?}", rep);
        let pts = sample_points(2, 6, 0.6, seed);
        for pair in pts.chunks(2) {
            prop_assert!(con.cfn.lemma1_residual_at(&pair[0], &pair[1], &tol).unwrap() < 1e-8);
        }
        prop_assert!(factorization_residual(&con.dilation, &con.multiplier).unwrap().restricted < 1e-8);
    }

    /// `θ(z)θ(w)*` with its analytic tail does not depend on the index window.
    #[test]
    fn window_stability(seed in 0u64..1000, extra in 1usize..4) {
        let tol = Tolerances::default();
        let da = KernelSeries::drury_arveson(1, 32);
        let dir = KernelSeries::dirichlet(1, 32);
        let k = KernelSeries::product(&da, &dir).unwrap();
        let f = factorize_with_cnp(&k, &dir).unwrap();
        let t = model_tuple(&k, 2).unwrap();
        let a = build_charfn(&t, &f, CharFnCaps::default(), &tol).unwrap();
        let b = build_charfn(&t, &f, CharFnCaps { index_window: Some(a.window + extra), beta_degree: None }, &tol).unwrap();
        let pts = sample_points(1, 2, 0.6, seed);
        let oa = a.theta_outer(&pts[0], &pts[1], &tol).unwrap();
        let ob = b.theta_outer(&pts[0], &pts[1], &tol).unwrap();
        prop_assert!(max_abs(&(oa - ob)) < 1e-12);
    }

    #[test]
    fn conjugates_coincide(seed in 0u64..1000) {
        let tol = Tolerances::default();
        let k = KernelSeries::bergman(3, 1, 24).unwrap();
        let da = KernelSeries::drury_arveson(1, 24);
        let f = factorize_with_cnp(&k, &da).unwrap();
        let t = model_tuple(&k, 2).unwrap();
        let tw = conjugate_tuple(&t, &random_unitary(t.size(), seed)).unwrap();
        let a = build_charfn(&t, &f, CharFnCaps::default(), &tol).unwrap();
        let b = build_charfn(&tw, &f, CharFnCaps::default(), &tol).unwrap();
        let co = coincidence(&a, &b, seed).unwrap();
        prop_assert!(co.coincide, "{:?}", co);
    }
}
