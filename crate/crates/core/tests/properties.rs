//! Randomised invariants across the catalog.

use greedy_approx::basis::Basis;
use greedy_approx::budget::Budget;
use greedy_approx::catalog::{make_basis, padding, CatalogId};
use greedy_approx::errors::{error_profile, rho_m, SigmaOptions};
use greedy_approx::sets::IndexSet;
use greedy_approx::spaces::{check_p_triangle, eval_norm, geometry_constants, verify_convexity_lemma, Field};
use greedy_approx::tga::{greedy_ordering, greedy_sets, greedy_sum, mth_threshold, project};
use num_complex::Complex64;
use proptest::prelude::*;

const IDS: [&str; 5] = [
    "canonical:1:4",
    "canonical:2:4",
    "weighted:1:4:1,0.5,0.25,0.125",
    "summing:4",
    "perturbed:4:0.5",
];

fn basis(i: usize) -> Basis {
    make_basis(&IDS[i].parse::<CatalogId>().unwrap(), Field::Real).unwrap()
}

/// Coefficients mixing small integers (to force ties) and floats.
fn coeff() -> impl Strategy<Value = f64> {
    prop_oneof![(-3i32..=3).prop_map(f64::from), -3.0..3.0f64]
}

fn vec4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(coeff(), 4)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_triangle_holds(i in 0..IDS.len(), f in vec4(), g in vec4()) {
        let b = basis(i);
        prop_assert!(check_p_triangle(b.space(), &f, &g).unwrap() >= -1e-9);
    }

    #[test]
    fn norm_is_homogeneous(i in 0..IDS.len(), f in vec4(), t in -5.0..5.0f64) {
        let b = basis(i);
        let s = b.space();
        let tf: Vec<f64> = f.iter().map(|x| t * x).collect();
        let n = eval_norm(s, &f).unwrap();
        prop_assert!((eval_norm(s, &tf).unwrap() - t.abs() * n).abs() <= 1e-9 * n.max(1.0));
    }

    #[test]
    fn convexity_lemma_holds(i in 0..IDS.len(), k in 1usize..=5, seed in prop::collection::vec(coeff(), 25)) {
        let b = basis(i);
        let vectors: Vec<Vec<f64>> = (0..k).map(|j| seed[4 * j..4 * j + 4].to_vec()).collect();
        let coeffs: Vec<f64> = seed[20..20 + k].iter().map(|c| c / 3.0).collect();
        let check = verify_convexity_lemma(b.space(), &vectors, &coeffs).unwrap();
        prop_assert!(check.holds(1e-9), "{check:?}");
    }

    #[test]
    fn synthesis_round_trip(i in 0..IDS.len(), f in vec4()) {
        let b = basis(i);
        let back = b.synthesize(&b.coeffs(&f)).unwrap();
        for (x, y) in back.iter().zip(&f) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn disjoint_coefficients_add(i in 0..IDS.len(), c in vec4(), mask in 0u64..16) {
        let b = basis(i);
        let a = IndexSet::from_bits(mask);
        let f = b.combine(&c, a);
        let g = b.combine(&c, a.complement(4));
        let sum: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
        let cs = b.coeffs(&sum);
        for j in 0..4 {
            prop_assert!((cs[j] - c[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn ordering_is_scale_invariant(i in 0..IDS.len(), f in vec4(), t in prop_oneof![-4.0..-0.1f64, 0.1..4.0f64]) {
        let b = basis(i);
        let tf: Vec<f64> = f.iter().map(|x| t * x).collect();
        prop_assert_eq!(greedy_ordering(&b, &f).unwrap(), greedy_ordering(&b, &tf).unwrap());
        for m in 0..=4 {
            prop_assert_eq!(greedy_sets(&b, &f, m).unwrap(), greedy_sets(&b, &tf, m).unwrap());
        }
    }

    #[test]
    fn threshold_is_shared_by_greedy_sets(i in 0..IDS.len(), f in vec4(), m in 1usize..=4) {
        let b = basis(i);
        let c = b.coeffs(&f);
        let alpha = mth_threshold(&b, &f, m).unwrap();
        let fam = greedy_sets(&b, &f, m).unwrap();
        let prefix = greedy_ordering(&b, &f).unwrap().prefix(m);
        prop_assert!(fam.sets.contains(&prefix));
        let prefix_residual = b.norm(&sub(&f, &project(&b, &f, prefix).unwrap()));
        prop_assert!((b.norm(&sub(&f, &greedy_sum(&b, &f, m).unwrap())) - prefix_residual).abs() <= 1e-12);
        for set in &fam.sets {
            prop_assert_eq!(set.len(), m);
            let mn = set.iter().map(|j| c[j].abs()).fold(f64::INFINITY, f64::min);
            prop_assert!((mn - alpha).abs() <= 1e-9 * alpha.max(1.0));
        }
    }

    #[test]
    fn full_greedy_sum_recovers_f(i in 0..IDS.len(), f in vec4()) {
        let b = basis(i);
        let g = greedy_sum(&b, &f, 4).unwrap();
        for (x, y) in g.iter().zip(&f) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn error_chain_and_monotonicity(i in 0..IDS.len(), f in vec4()) {
        let b = basis(i);
        let p = error_profile(&b, &f, &SigmaOptions::default(), &Budget::default().meter()).unwrap();
        let tol = 1e-9 * b.norm(&f).max(1.0);
        for r in &p.rows {
            prop_assert!(r.sigma.value <= r.best_projection.value + tol);
            if let (Some(rho), Some(vr)) = (&r.rho, &r.varrho) {
                prop_assert!(r.sigma.value <= rho.value + tol);
                prop_assert!(rho.value <= vr.value + tol);
                prop_assert_eq!(rho.witness.set.len(), r.m);
                prop_assert!((rho.witness.alpha.unwrap() - mth_threshold(&b, &f, r.m).unwrap()).abs() <= 1e-12);
            }
        }
        for w in p.rows.windows(2) {
            prop_assert!(w[1].sigma.value <= w[0].sigma.value + tol);
            prop_assert!(w[1].best_projection.value <= w[0].best_projection.value + tol);
        }
    }

    #[test]
    fn padding_makes_a_unique_greedy_set(f in prop::collection::vec(coeff(), 5), g in prop::collection::vec(coeff(), 5), mask in 1u64..32) {
        let set = IndexSet::from_bits(mask);
        // f supported off the set, g on it.
        let mut c = vec![0.0; 5];
        for j in 0..5 {
            c[j] = if set.contains(j) { g[j] } else { f[j] };
        }
        if let Some((h, a0, t0)) = padding(&c, set) {
            let b = make_basis(&"canonical:2:5".parse::<CatalogId>().unwrap(), Field::Real).unwrap();
            let fam = greedy_sets(&b, &h, a0.len()).unwrap();
            prop_assert_eq!(fam.sets, vec![a0]);
            prop_assert!((mth_threshold(&b, &h, a0.len()).unwrap() - t0).abs() <= 1e-12);
        }
    }
}

#[test]
fn geometry_constants_monotone() {
    let mut prev = f64::INFINITY;
    for k in 1..=10 {
        let p = k as f64 / 10.0;
        let a = geometry_constants(p, Field::Real).unwrap().a_p;
        assert!(a <= prev + 1e-15);
        prev = a;
    }
    assert!((prev - 1.0).abs() < 1e-15);
}

#[test]
fn complex_round_trip() {
    let b = make_basis(&"perturbed:3:0.5:1".parse::<CatalogId>().unwrap(), Field::Complex { net_order: 4 }).unwrap();
    let f = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25), Complex64::new(-1.0, 0.0)];
    let back = b.synthesize(&b.coeffs(&f)).unwrap();
    for (x, y) in back.iter().zip(&f) {
        assert!((x - y).norm() <= 1e-10);
    }
}

/// The constant-coefficient error is not monotone in `m`: forcing a common
/// modulus on more coordinates can cost more than it removes.
#[test]
fn rho_can_increase_with_m() {
    let b = make_basis(&"summing:4".parse::<CatalogId>().unwrap(), Field::Real).unwrap();
    let f = b.synthesize(&[4.0, 3.0, 2.0, 1.0]).unwrap();
    let r2 = rho_m(&b, &f, 2).unwrap().value;
    let r3 = rho_m(&b, &f, 3).unwrap().value;
    assert!((r2 - 5.0).abs() < 1e-9 && (r3 - 6.0).abs() < 1e-9, "{r2} {r3}");
}
