//! Thresholding Greedy Algorithm: greedy ordering with the index tie rule,
//! greedy sums `G_m`, coordinate projections `P_A`, and the exhaustive
//! family of greedy sets of a given cardinality.

use serde::Serialize;

use crate::basis::Basis;
use crate::scalar::Scalar;
use crate::sets::IndexSet;
use crate::spaces::ZERO_TOL;
use crate::{Error, Result};

/// Relative tolerance under which coefficient magnitudes count as tied when
/// enumerating greedy sets.
pub const TIE_REL_TOL: f64 = 1e-9;

/// Permutation `π` of `{0..dim}`: decreasing magnitude, ties by index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GreedyOrdering {
    pi: Vec<usize>,
}

impl GreedyOrdering {
    pub fn from_coeffs<S: Scalar>(coeffs: &[S]) -> Self {
        let mags: Vec<f64> = coeffs.iter().map(|c| c.modulus()).collect();
        let mut pi: Vec<usize> = (0..coeffs.len()).collect();
        pi.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
        GreedyOrdering { pi }
    }

    /// 0-based indices in greedy order.
    pub fn as_slice(&self) -> &[usize] {
        &self.pi
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.pi.iter().map(|i| i + 1).collect()
    }

    /// The first `m` indices of the ordering.
    pub fn prefix(&self, m: usize) -> IndexSet {
        IndexSet::from_indices(self.pi[..m].iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GreedySetFamily {
    pub m: usize,
    pub sets: Vec<IndexSet>,
}

fn check_m(m: usize, dim: usize, min: usize) -> Result<()> {
    if m < min || m > dim {
        return Err(Error::input(format!("m = {m} outside {min}..={dim}")));
    }
    Ok(())
}

pub fn greedy_ordering<S: Scalar>(basis: &Basis, f: &[S]) -> Result<GreedyOrdering> {
    Ok(GreedyOrdering::from_coeffs(&basis.coefficients(f)?))
}

/// `G_m(f) = Σ_{i≤m} x*_{π(i)}(f) x_{π(i)}`.
pub fn greedy_sum<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<Vec<S>> {
    check_m(m, basis.dim(), 0)?;
    let c = basis.coefficients(f)?;
    let set = GreedyOrdering::from_coeffs(&c).prefix(m);
    Ok(basis.combine(&c, set))
}

/// `P_A(f) = Σ_{n∈A} x_n^*(f) x_n`.
pub fn project<S: Scalar>(basis: &Basis, f: &[S], set: IndexSet) -> Result<Vec<S>> {
    if let Some(i) = set.max_index() {
        if i >= basis.dim() {
            return Err(Error::IndexOutOfRange {
                index: i + 1,
                dim: basis.dim(),
            });
        }
    }
    let c = basis.coefficients(f)?;
    Ok(basis.combine(&c, set))
}

/// Every greedy set of cardinality `m`.
pub fn greedy_sets<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<GreedySetFamily> {
    check_m(m, basis.dim(), 0)?;
    Ok(greedy_sets_from_coeffs(&basis.coefficients(f)?, m))
}

/// The `m`-th largest coefficient magnitude, `1 ≤ m ≤ dim`.
pub fn mth_threshold<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<f64> {
    check_m(m, basis.dim(), 1)?;
    Ok(threshold_from_coeffs(&basis.coefficients(f)?, m))
}

pub fn threshold_from_coeffs<S: Scalar>(coeffs: &[S], m: usize) -> f64 {
    debug_assert!(m >= 1 && m <= coeffs.len());
    let mut mags: Vec<f64> = coeffs.iter().map(|c| c.modulus()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[m - 1]
}

/// Greedy sets from coefficients. Magnitudes within [`TIE_REL_TOL`] of the
/// threshold (or below [`ZERO_TOL`] when the threshold is zero) are tied,
/// and every choice among the tied indices is returned, in lexicographic
/// order.
pub fn greedy_sets_from_coeffs<S: Scalar>(coeffs: &[S], m: usize) -> GreedySetFamily {
    let n = coeffs.len();
    if m == 0 {
        return GreedySetFamily {
            m,
            sets: vec![IndexSet::EMPTY],
        };
    }
    let t = threshold_from_coeffs(coeffs, m);
    let (lo, hi) = if t <= ZERO_TOL {
        (0.0, ZERO_TOL)
    } else {
        (t * (1.0 - TIE_REL_TOL), t * (1.0 + TIE_REL_TOL))
    };
    let mut above = IndexSet::EMPTY;
    let mut ties = IndexSet::EMPTY;
    for (i, c) in coeffs.iter().enumerate().take(n) {
        let r = c.modulus();
        if r > hi {
            above.insert(i);
        } else if r >= lo {
            ties.insert(i);
        }
    }
    let need = m - above.len();
    let sets = ties
        .subsets_of_size(need)
        .into_iter()
        .map(|c| above.union(c))
        .collect();
    GreedySetFamily { m, sets }
}
