//! Constant estimators checked against hand-computed values.

use greedy_approx::basis::Basis;
use greedy_approx::catalog::{generate_corpus, make_basis, CatalogId, CorpusSpec};
use greedy_approx::constants::{
    eta_p, estimate_democracy, estimate_slc, estimate_with, ConstantName, Corpus, EstimatorOptions, Families, Witness,
};
use greedy_approx::sets::IndexSet;
use greedy_approx::spaces::Field;

fn basis(id: &str) -> Basis {
    make_basis(&id.parse::<CatalogId>().unwrap(), Field::Real).unwrap()
}

fn small_spec() -> CorpusSpec {
    let mut spec = CorpusSpec::default();
    spec.random.count = 60;
    spec
}

fn opts(rows: bool) -> EstimatorOptions {
    EstimatorOptions {
        collect_rows: rows,
        ..EstimatorOptions::default()
    }
}

#[test]
fn canonical_l2_estimates_are_one() {
    let b = basis("canonical:2:4");
    let corpus = generate_corpus::<f64>(&b, &small_spec()).unwrap();
    let set = estimate_with(&b, &corpus, Families::all(), &opts(false)).unwrap();
    assert_eq!(set.estimates.len(), ConstantName::ALL.len());
    for e in &set.estimates {
        assert!((e.value - 1.0).abs() < 1e-9, "{} = {}", e.name, e.value);
    }
    assert!(set.violations.is_empty());
}

#[test]
fn canonical_l1_unconditional_and_positive_cone() {
    let b = basis("canonical:1:4");
    let corpus = generate_corpus::<f64>(&b, &small_spec()).unwrap();
    let set = estimate_with(&b, &corpus, Families::all(), &opts(false)).unwrap();
    for name in [ConstantName::K, ConstantName::Cplus, ConstantName::Cq] {
        assert!((set.value(name).unwrap() - 1.0).abs() < 1e-9);
    }
}

/// Weighted ℓ1 norm of coefficients, computed directly.
fn weighted_l1(w: &[f64], c: &[f64]) -> f64 {
    w.iter().zip(c).map(|(w, c)| w * c.abs()).sum()
}

#[test]
fn weighted_democracy_is_eight() {
    let w = [1.0, 0.5, 0.25, 0.125];
    // Oracle: all pairs of subsets with |A| ≤ |B|, both nonempty.
    let mut best: f64 = 0.0;
    for a in 1u32..16 {
        for bb in 1u32..16 {
            if a.count_ones() > bb.count_ones() {
                continue;
            }
            let ind = |s: u32| (0..4).map(|i| f64::from((s >> i) & 1)).collect::<Vec<_>>();
            best = best.max(weighted_l1(&w, &ind(a)) / weighted_l1(&w, &ind(bb)));
        }
    }
    assert_eq!(best, 8.0);
    let b = basis("weighted:1:4:1,0.5,0.25,0.125");
    let d = estimate_democracy::<f64>(&b, false).unwrap();
    assert!((d.value - best).abs() < 1e-12);
    match d.witness.as_ref().unwrap() {
        Witness::Democracy { a, b: bb } => {
            assert_eq!(a.indices, IndexSet::singleton(0));
            assert_eq!(bb.indices, IndexSet::singleton(3));
        }
        other => panic!("unexpected witness {other:?}"),
    }
    let ds = estimate_democracy::<f64>(&b, true).unwrap();
    assert!(ds.value >= d.value - 1e-12);
    let corpus = Corpus::new("zero", vec![vec![0.0; 4]]);
    let delta = estimate_slc(&b, &corpus).unwrap();
    assert!(delta.value >= 8.0 - 1e-12);
}

#[test]
fn greedy_ratios_at_m_two() {
    let b = basis("canonical:2:4");
    let corpus = Corpus::new("one", vec![vec![4.0, 3.0, 2.0, 1.0]]);
    let families = Families {
        greedy: true,
        ..Families::default()
    };
    let set = estimate_with(&b, &corpus, families, &opts(true)).unwrap();
    let row = set.rows.iter().find(|r| r.m == 2).unwrap();
    let five = 5f64.sqrt();
    assert!((row.residual - five).abs() < 1e-12);
    assert!((row.ratio_g.unwrap() - 1.0).abs() < 1e-9);
    assert!((row.ratio_pg.unwrap() - five / 6f64.sqrt()).abs() < 1e-9);
    for r in &set.rows {
        if let (Some(u), Some(pg), Some(g)) = (r.ratio_pgu, r.ratio_pg, r.ratio_g) {
            assert!(u <= pg + 1e-12 && pg <= g + 1e-12);
        }
        if r.m == 4 {
            assert_eq!(r.residual, 0.0);
        }
    }
}

#[test]
fn truncation_example() {
    let b = basis("canonical:1:4");
    let w = Witness::Truncation {
        f: vec![4.0, 3.0, 2.0, 1.0],
        m: 2,
        set: IndexSet::from_indices([0, 1]),
    };
    assert!((w.ratio(&b) - 0.6).abs() < 1e-12);
    let ind = Witness::Truncation {
        f: vec![1.0, -1.0, 0.0, 1.0],
        m: 3,
        set: IndexSet::from_indices([0, 1, 3]),
    };
    assert!((ind.ratio(&b) - 1.0).abs() < 1e-12);
}

#[test]
fn ordering_filter() {
    let s = |v: &[usize]| IndexSet::from_indices(v.iter().copied());
    assert!(s(&[0, 1]).precedes(s(&[2, 3])));
    assert!(!s(&[0, 2]).precedes(s(&[1, 3])));
    assert!(s(&[]).precedes(s(&[0])));
}

#[test]
fn conditional_bases_exceed_one() {
    let b = basis("summing:4");
    let corpus = generate_corpus::<f64>(&b, &small_spec()).unwrap();
    let set = estimate_with(&b, &corpus, Families::all(), &opts(false)).unwrap();
    for name in [ConstantName::K, ConstantName::Cq, ConstantName::Cplus] {
        assert!(set.value(name).unwrap() > 1.0 + 1e-6, "{name}");
    }
}

#[test]
fn witnesses_reproduce_values() {
    for id in ["summing:4", "perturbed:4:0.5", "weighted:1:4:1,0.5,0.25,0.125"] {
        let b = basis(id);
        let corpus = generate_corpus::<f64>(&b, &small_spec()).unwrap();
        let set = estimate_with(&b, &corpus, Families::all(), &opts(false)).unwrap();
        for e in &set.estimates {
            let r = e.reevaluate(&b).unwrap();
            assert!((r - e.value).abs() <= 1e-9 * e.value.max(1.0), "{id} {}: {r} vs {}", e.name, e.value);
        }
    }
}

#[test]
fn scaling_invariance() {
    let b = basis("perturbed:4:0.5");
    let corpus = generate_corpus::<f64>(&b, &small_spec()).unwrap();
    let base = estimate_with(&b, &corpus, Families::all(), &opts(false)).unwrap();
    let scaled = estimate_with(&b, &corpus.scaled(3.7), Families::all(), &opts(false)).unwrap();
    for e in &base.estimates {
        let v = scaled.value(e.name).unwrap();
        assert!((v - e.value).abs() < 1e-9 * e.value.max(1.0), "{}: {} vs {v}", e.name, e.value);
    }
}

#[test]
fn eta_is_below_a_dense_grid() {
    for &(p, u) in &[(1.0, 1.0), (0.5, 2.0), (0.8, 1.3), (1.0, 10.0)] {
        let a_p = (2f64.powf(p) - 1.0).powf(-1.0 / p);
        let obj = |t: f64| {
            (1.0 - t.powf(p)).powf(-1.0 / p) * (1.0 - (1.0 + t / (a_p * u)).powf(-p)).powf(-1.0 / p)
        };
        let eta = eta_p(p, u).unwrap();
        let grid_min = (1..1000).map(|i| obj(i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        assert!(eta <= grid_min + 1e-12, "p={p} u={u}");
        assert!(eta >= grid_min * (1.0 - 1e-4), "p={p} u={u}");
    }
    assert!(eta_p(1.0, 10.0).unwrap() > eta_p(1.0, 1.0).unwrap());
    assert!((eta_p(1.0, 1.0).unwrap() - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9);
}

#[test]
fn empty_corpus_is_rejected() {
    let b = basis("canonical:2:3");
    let corpus: Corpus<f64> = Corpus::new("e", Vec::new());
    assert!(estimate_with(&b, &corpus, Families::all(), &opts(false)).is_err());
    let demo = Families {
        democracy: true,
        ..Families::default()
    };
    assert!(estimate_with(&b, &corpus, demo, &opts(false)).is_ok());
}
