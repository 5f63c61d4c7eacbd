mod common;

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use structcs_core::bounds::{
    concentration_exponent, corollary_bound, lemma2_probability, lemma3_probability,
    theorem1_bound, BoundParams,
};
use structcs_core::dependency::{
    dependency_report, equitable_coloring, lemma1_bound, verify_lemma1, SupportSet,
};
use structcs_core::deterministic::{integer_gram, integer_matrix, PolySpec};
use structcs_core::experiment::wilson_interval;
use structcs_core::fast::{dense_matvec, LinearOperator, StructuredOperator};
use structcs_core::matrix::{build_structured, BlockStructureSpec, DistKind, MatrixKind};
use structcs_core::recovery::{basis_pursuit, RecoveryStatus};
use structcs_core::rip::{
    delta_exhaustive, delta_for_support, delta_for_support_svd, delta_monte_carlo,
};
use structcs_core::rng::rng_from_seed;
use structcs_core::Error;

fn dist() -> impl Strategy<Value = DistKind> {
    prop_oneof![
        Just(DistKind::Gaussian),
        Just(DistKind::Bernoulli),
        Just(DistKind::SparseTernary)
    ]
}

/// Small Toeplitz or circulant block specs.
fn block_spec(
    max_k: usize,
    max_l: usize,
    max_de: usize,
) -> impl Strategy<Value = BlockStructureSpec> {
    (
        1..=max_k,
        1..=max_l,
        1..=max_de,
        1..=max_de,
        dist(),
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(k, l, d, e, dist, seed, circ)| {
            if circ {
                BlockStructureSpec::circulant_block(k, l, d, e, dist, seed)
            } else {
                BlockStructureSpec::toeplitz_block(k, l, d, e, dist, seed)
            }
        })
}

fn support_of(cols: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::sample::subsequence((0..cols).collect::<Vec<_>>(), 1..=max_len.min(cols))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entries_sharing_a_label_are_bit_equal(spec in block_spec(8, 8, 4)) {
        let m = build_structured(&spec).unwrap();
        let mut seen: std::collections::HashMap<usize, u64> = Default::default();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let bits = m.entries()[(i, j)].to_bits();
                let prev = *seen.entry(m.var_id()[(i, j)]).or_insert(bits);
                prop_assert_eq!(prev, bits);
            }
        }
        // every block row of a circulant already shows all k generators
        let blocks = match spec.kind {
            MatrixKind::ToeplitzBlock => spec.k + spec.l - 1,
            _ => spec.k,
        };
        prop_assert_eq!(seen.len(), blocks * spec.d * spec.e);
    }

    #[test]
    fn same_spec_same_matrix(spec in block_spec(6, 6, 3)) {
        let a = build_structured(&spec).unwrap();
        let b = build_structured(&spec).unwrap();
        prop_assert_eq!(a.entries(), b.entries());
        prop_assert_eq!(a.var_id(), b.var_id());
    }

    #[test]
    fn fast_product_matches_dense(spec in block_spec(24, 12, 4), seed in any::<u64>()) {
        let m = build_structured(&spec).unwrap();
        let op = StructuredOperator::new(&spec, &m.blocks()).unwrap();
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..m.ncols()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let y: Vec<f64> = (0..m.nrows()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        prop_assert!(common::rel_err(&op.apply(&x), &dense_matvec(&m, &x).unwrap()) <= 1e-10);
        let adj = m.entries().tr_mul(&DVector::from_column_slice(&y));
        prop_assert!(common::rel_err(&op.apply_adjoint(&y), adj.as_slice()) <= 1e-10);
    }

    #[test]
    fn fast_product_is_linear_with_exact_adjoint(
        spec in block_spec(16, 8, 3),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let m = build_structured(&spec).unwrap();
        let op = StructuredOperator::new(&spec, &m.blocks()).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect() };
        let (x1, x2, y) = (draw(m.ncols()), draw(m.ncols()), draw(m.nrows()));
        let combo: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| a * u + b * v).collect();
        let lhs = op.apply(&combo);
        let rhs: Vec<f64> = op.apply(&x1).iter().zip(op.apply(&x2)).map(|(u, v)| a * u + b * v).collect();
        let scale = 1.0 + rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (u, v) in lhs.iter().zip(&rhs) {
            prop_assert!((u - v).abs() <= 1e-10 * scale);
        }
        // <A x, y> = <x, A^T y>
        let left = common::dot(&op.apply(&x1), &y);
        let right = common::dot(&x1, &op.apply_adjoint(&y));
        prop_assert!((left - right).abs() <= 1e-10 * (1.0 + left.abs()));
    }

    #[test]
    fn dependency_is_symmetric_and_within_bound(
        (spec, t) in block_spec(10, 8, 2)
            .prop_filter("toeplitz only", |s| s.kind == MatrixKind::ToeplitzBlock)
            .prop_flat_map(|s| { let cols = s.big_n(); (Just(s), support_of(cols, 5)) })
    ) {
        let m = build_structured(&spec).unwrap();
        let t = SupportSet::new(t, m.ncols()).unwrap();
        let r = verify_lemma1(&m, &t).unwrap();
        for (i, deps) in r.per_row.iter().enumerate() {
            prop_assert!(!deps.contains(&i));
            for &j in deps {
                prop_assert!(r.per_row[j].contains(&i));
            }
        }
        prop_assert_eq!(r.bound, Some(lemma1_bound(t.len(), spec.l).0));
        prop_assert!(r.pass);
    }

    #[test]
    fn circulant_dependency_within_bound_when_l_at_most_k(
        (spec, t) in block_spec(10, 10, 2)
            .prop_filter("circulant, l <= k", |s| s.kind == MatrixKind::CirculantBlock && s.l <= s.k)
            .prop_flat_map(|s| { let cols = s.big_n(); (Just(s), support_of(cols, 4)) })
    ) {
        let m = build_structured(&spec).unwrap();
        let t = SupportSet::new(t, m.ncols()).unwrap();
        prop_assert!(verify_lemma1(&m, &t).unwrap().pass);
    }

    #[test]
    fn returned_colorings_are_valid(
        (spec, t) in block_spec(10, 12, 2)
            .prop_flat_map(|s| { let cols = s.big_n(); (Just(s), support_of(cols, 3)) })
    ) {
        let m = build_structured(&spec).unwrap();
        let t = SupportSet::new(t, m.ncols()).unwrap();
        match equitable_coloring(&m, &t) {
            Ok(c) => {
                let graph = dependency_report(&m, &t).unwrap().per_row;
                prop_assert!(c.verify(&graph).is_ok());
                prop_assert_eq!(c.q, t.pair_count() + 1);
            }
            // failure must be detected and reported, never returned as a partition
            Err(Error::ColoringFailure(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delta_is_monotone_in_order(rows in 4usize..12, cols in 4usize..12, seed in any::<u64>()) {
        let m = build_structured(&BlockStructureSpec::iid(rows, cols, DistKind::Gaussian, seed)).unwrap();
        let mut prev = 0.0;
        for order in 1..=cols.min(4) {
            let d = delta_exhaustive(&m, order).unwrap().delta;
            prop_assert!(d >= prev - 1e-12);
            prev = d;
        }
    }

    #[test]
    fn monte_carlo_never_exceeds_exhaustive(
        spec in block_spec(8, 6, 2),
        order in 1usize..4,
        seed in any::<u64>(),
    ) {
        let m = build_structured(&spec).unwrap();
        prop_assume!(order <= m.ncols() && order <= m.nrows());
        let ex = delta_exhaustive(&m, order).unwrap();
        let mc = delta_monte_carlo(&m, order, 40, seed).unwrap();
        prop_assert!(mc.delta <= ex.delta + 1e-12);
    }

    #[test]
    fn eigen_and_singular_value_routes_agree(
        (spec, t) in block_spec(8, 8, 3)
            .prop_flat_map(|s| { let cols = s.big_n(); (Just(s), support_of(cols, 6)) })
    ) {
        let m = build_structured(&spec).unwrap();
        prop_assume!(t.len() <= m.nrows());
        let t = SupportSet::new(t, m.ncols()).unwrap();
        let a = delta_for_support(&m, &t).unwrap();
        let b = delta_for_support_svd(&m, &t).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn worst_support_satisfies_the_isometry_sandwich(
        rows in 6usize..16,
        cols in 6usize..14,
        order in 1usize..4,
        seed in any::<u64>(),
    ) {
        let m = build_structured(&BlockStructureSpec::iid(rows, cols, DistKind::Bernoulli, seed)).unwrap();
        let est = delta_exhaustive(&m, order).unwrap();
        let sub = m.entries().select_columns(est.worst_support.indices());
        let mut rng = rng_from_seed(seed ^ 0xabcd);
        for _ in 0..1000 {
            let z = DVector::from_fn(order, |_, _| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
            let zz = z.norm_squared();
            let mz = (&sub * &z).norm_squared();
            prop_assert!(mz <= (1.0 + est.delta) * zz * (1.0 + 1e-12));
            prop_assert!(mz >= (1.0 - est.delta) * zz * (1.0 - 1e-12) - 1e-300);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn probabilities_are_clamped_and_monotone_in_n(
        n in 1usize..100_000,
        dn in 1usize..10_000,
        m in 1usize..20,
        l in 1usize..2000,
        delta in 0.01f64..0.99,
        c0 in 1e-4f64..1.0,
    ) {
        for (lo, hi) in [
            (lemma2_probability(n, m, delta, l, c0), lemma2_probability(n + dn, m, delta, l, c0)),
            (lemma3_probability(n, m, delta, c0), lemma3_probability(n + dn, m, delta, c0)),
        ] {
            prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
            prop_assert!(hi >= lo);
        }
        prop_assert!(concentration_exponent((n + dn) as f64, m as f64, delta, c0) > concentration_exponent(n as f64, m as f64, delta, c0));
        let p = BoundParams { c0, c2: c0 / 20.0, delta, m, big_n: m + 1000, n, l, d: (n / l).max(1) };
        let a = theorem1_bound(&p).unwrap();
        let b = theorem1_bound(&BoundParams { n: n + dn, ..p }).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.prob_lower));
        prop_assert!(b.prob_lower >= a.prob_lower);
    }

    #[test]
    fn corollary_matches_theorem_on_the_product(
        l1 in 1usize..40,
        l2 in 1usize..40,
        m in 1usize..10,
        n in 1usize..100_000,
        delta in 0.05f64..0.95,
    ) {
        let p = BoundParams::with_defaults(delta, m, 10 * m + 5, n, l1 * l2);
        prop_assert_eq!(corollary_bound(&p, l1, l2).unwrap(), theorem1_bound(&p).unwrap());
    }

    #[test]
    fn wilson_interval_contains_the_fraction(trials in 1usize..5000, frac in 0.0f64..=1.0) {
        let s = ((trials as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(s, trials);
        let p = s as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn deterministic_columns_and_inner_products(
        (p, r) in prop_oneof![Just((3usize, 1usize)), Just((5, 1)), Just((5, 2)), Just((7, 1)), Just((7, 2))],
        t in 1usize..4,
        s in 1usize..4,
    ) {
        let total = p.pow(r as u32 + 1);
        let spec = PolySpec { p, r, t, s, l: total / t };
        let bits = integer_matrix(&spec).unwrap();
        for j in 0..bits.ncols() {
            let ones: u32 = bits.column(j).iter().map(|&b| u32::from(b)).sum();
            prop_assert_eq!(ones as usize, s * p);
        }
        let g = integer_gram(&spec).unwrap();
        for i in 0..g.nrows() {
            prop_assert_eq!(g[(i, i)] as usize, s * p);
            for j in 0..i {
                prop_assert!(g[(i, j)] as usize <= s * r);
            }
        }
    }

    #[test]
    fn basis_pursuit_is_feasible_and_scale_equivariant(
        rows in 8usize..20,
        extra in 4usize..20,
        seed in any::<u64>(),
        alpha in 0.01f64..100.0,
    ) {
        let cols = rows + extra;
        let a: DMatrix<f64> =
            build_structured(&BlockStructureSpec::iid(rows, cols, DistKind::Gaussian, seed)).unwrap().entries().clone();
        let mut rng = rng_from_seed(seed ^ 17);
        let y: Vec<f64> = (0..rows).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let tol = 1e-9;
        let r1 = basis_pursuit(&a, &y, tol, 100_000).unwrap();
        prop_assert_eq!(r1.status, RecoveryStatus::Converged);
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // feasibility rechecked from scratch
        let res: f64 = LinearOperator::apply(&a, &r1.estimate).iter().zip(&y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(res <= tol * ynorm);
        let ys: Vec<f64> = y.iter().map(|v| alpha * v).collect();
        let r2 = basis_pursuit(&a, &ys, tol, 100_000).unwrap();
        let o1: f64 = r1.estimate.iter().map(|v| v.abs()).sum();
        let o2: f64 = r2.estimate.iter().map(|v| v.abs()).sum();
        prop_assert!((o2 - alpha * o1).abs() <= 1e-6 * alpha * o1, "{o2} vs {}", alpha * o1);
    }
}

#[test]
fn label_sets_are_disjoint_between_toeplitz_diagonals() {
    // every distinct label lives on exactly one block diagonal
    let spec = BlockStructureSpec::toeplitz_block(5, 4, 2, 3, DistKind::Gaussian, 1);
    let m = build_structured(&spec).unwrap();
    let mut diag_of: std::collections::HashMap<usize, HashSet<isize>> = Default::default();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let diag = (i / spec.d) as isize - (j / spec.e) as isize;
            diag_of.entry(m.var_id()[(i, j)]).or_default().insert(diag);
        }
    }
    assert!(diag_of.values().all(|d| d.len() == 1));
}
