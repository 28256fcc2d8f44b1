//! Empirical lower bounds for the greedy-type constants, each with a
//! witness that reproduces its ratio, plus the closed-form bound formulas
//! and the ledger comparing the two.

pub mod formulas;
pub mod ledger;
mod pass;

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, SignPattern};
use crate::budget::Budget;
use crate::errors::{ErrorWitness, SigmaOptions};
use crate::scalar::Scalar;
use crate::sets::IndexSet;
use crate::spaces::ZERO_TOL;
use crate::{Error, Result};

pub use formulas::{eta_objective, eta_p, k1, k2, net_size_for_spacing, sign_net, sign_net_for_spacing, SignNet};
pub use ledger::{bound_ledger, BoundLedger, LedgerContext, LedgerEntry, Status};
pub use pass::{ChainViolation, ElementRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstantName {
    K,
    D,
    Ds,
    Delta,
    Cq,
    Cg,
    Cag,
    Cpg,
    Cpgu,
    GammaT,
    Cdis,
    Cend,
    Cend2,
    Cplus,
}

impl ConstantName {
    pub const ALL: [ConstantName; 14] = [
        ConstantName::K,
        ConstantName::D,
        ConstantName::Ds,
        ConstantName::Delta,
        ConstantName::Cq,
        ConstantName::Cg,
        ConstantName::Cag,
        ConstantName::Cpg,
        ConstantName::Cpgu,
        ConstantName::GammaT,
        ConstantName::Cdis,
        ConstantName::Cend,
        ConstantName::Cend2,
        ConstantName::Cplus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstantName::K => "K",
            ConstantName::D => "D",
            ConstantName::Ds => "Ds",
            ConstantName::Delta => "Delta",
            ConstantName::Cq => "Cq",
            ConstantName::Cg => "Cg",
            ConstantName::Cag => "Cag",
            ConstantName::Cpg => "Cpg",
            ConstantName::Cpgu => "Cpgu",
            ConstantName::GammaT => "GammaT",
            ConstantName::Cdis => "Cdis",
            ConstantName::Cend => "Cend",
            ConstantName::Cend2 => "Cend2",
            ConstantName::Cplus => "Cplus",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for ConstantName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The data needed to recompute an estimate's ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", bound = "S: Scalar")]
pub enum Witness<S> {
    /// `‖P_set f‖ / ‖f‖`.
    Projection { f: Vec<S>, set: IndexSet },
    /// `‖1_a‖ / ‖1_b‖`.
    Democracy { a: SignPattern<S>, b: SignPattern<S> },
    /// `‖f + 1_a‖ / ‖f + 1_b‖`.
    Slc {
        f: Vec<S>,
        a: SignPattern<S>,
        b: SignPattern<S>,
    },
    /// `‖f − P_set f‖ / ‖f − candidate‖`, or `/ ‖f‖` without a candidate.
    Greedy {
        f: Vec<S>,
        m: usize,
        set: IndexSet,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        denominator: Option<ErrorWitness<S>>,
    },
    /// `min_{n∈set} |x_n^*(f)| · ‖1_{sgn f, set}‖ / ‖f‖`.
    Truncation { f: Vec<S>, m: usize, set: IndexSet },
    /// `‖f − P_set f‖ / ‖f − a 1_b‖`.
    Thag {
        f: Vec<S>,
        m: usize,
        set: IndexSet,
        b: SignPattern<S>,
        a: f64,
    },
}

fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// `sgn(z)` with `sgn(0) = 1`, so the result is always unimodular.
pub(crate) fn unimodular_sign<S: Scalar>(z: S) -> S {
    if z.modulus() > 0.0 {
        z.sign()
    } else {
        S::from_real(1.0)
    }
}

impl<S: Scalar> Witness<S> {
    /// Recomputes the witnessed ratio from scratch.
    pub fn ratio(&self, basis: &Basis) -> f64 {
        let n = |v: &[S]| basis.norm(v);
        let proj = |f: &[S], set: IndexSet| basis.combine(&basis.coeffs(f), set);
        match self {
            Witness::Projection { f, set } => n(&proj(f, *set)) / n(f),
            Witness::Democracy { a, b } => {
                n(&basis.signed_indicator(a.indices, &a.values)) / n(&basis.signed_indicator(b.indices, &b.values))
            }
            Witness::Slc { f, a, b } => {
                let fa = add(f, &basis.signed_indicator(a.indices, &a.values));
                let fb = add(f, &basis.signed_indicator(b.indices, &b.values));
                n(&fa) / n(&fb)
            }
            Witness::Greedy {
                f,
                set,
                denominator,
                ..
            } => {
                let num = n(&sub(f, &proj(f, *set)));
                let den = match denominator {
                    Some(w) => w.distance(basis, f),
                    None => n(f),
                };
                num / den
            }
            Witness::Truncation { f, set, .. } => {
                let c = basis.coeffs(f);
                let alpha = set.iter().map(|j| c[j].modulus()).fold(f64::INFINITY, f64::min);
                let signs: Vec<S> = set.iter().map(|j| unimodular_sign(c[j])).collect();
                alpha * n(&basis.signed_indicator(*set, &signs)) / n(f)
            }
            Witness::Thag { f, set, b, a, .. } => {
                let num = n(&sub(f, &proj(f, *set)));
                let ind = basis.signed_indicator(b.indices, &b.values);
                let g: Vec<S> = f.iter().zip(&ind).map(|(&x, &y)| x - y.scale(*a)).collect();
                num / n(&g)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct ConstantEstimate<S> {
    pub name: ConstantName,
    pub value: f64,
    pub witness: Option<Witness<S>>,
    pub corpus_id: String,
    /// Always true: a maximum over a finite search is a lower bound.
    pub is_lower_bound: bool,
    /// Ratios skipped because the denominator vanished while the numerator
    /// did not.
    pub infeasible: u64,
    pub evaluations: u64,
}

impl<S: Scalar> ConstantEstimate<S> {
    pub fn reevaluate(&self, basis: &Basis) -> Option<f64> {
        self.witness.as_ref().map(|w| w.ratio(basis))
    }
}

/// Elements in ambient coordinates together with an identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Corpus<S> {
    pub id: String,
    pub elements: Vec<Vec<S>>,
}

impl<S: Scalar> Corpus<S> {
    pub fn new(id: impl Into<String>, elements: Vec<Vec<S>>) -> Self {
        Corpus {
            id: id.into(),
            elements,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Every element multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Corpus {
            id: self.id.clone(),
            elements: self.elements.iter().map(|f| f.iter().map(|v| v.scale(t)).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorOptions {
    pub sigma: SigmaOptions,
    pub budget: Budget,
    pub threads: usize,
    /// Multiples of the threshold tried for the free coefficient in the
    /// disjoint-set variant before refinement.
    pub a_grid: Vec<f64>,
    pub collect_rows: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            sigma: SigmaOptions::default(),
            budget: Budget::from_env(),
            threads: 1,
            a_grid: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            collect_rows: false,
        }
    }
}

/// Which constants a pass computes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Families {
    /// `K` and `Cplus`.
    pub projections: bool,
    /// `Cq`, `Cg`, `Cag`, `Cpg`, `Cpgu`.
    pub greedy: bool,
    pub truncation: bool,
    /// `Cdis`, `Cend`, `Cend2`.
    pub thag: bool,
    pub slc: bool,
    /// `D` and `Ds`.
    pub democracy: bool,
}

impl Families {
    pub fn all() -> Self {
        Families {
            projections: true,
            greedy: true,
            truncation: true,
            thag: true,
            slc: true,
            democracy: true,
        }
    }

    fn names(self) -> Vec<ConstantName> {
        use ConstantName::*;
        let mut out = Vec::new();
        if self.projections {
            out.push(K);
        }
        if self.democracy {
            out.extend([D, Ds]);
        }
        if self.slc {
            out.push(Delta);
        }
        if self.greedy {
            out.extend([Cq, Cg, Cag, Cpg, Cpgu]);
        }
        if self.truncation {
            out.push(GammaT);
        }
        if self.thag {
            out.extend([Cdis, Cend, Cend2]);
        }
        if self.projections {
            out.push(Cplus);
        }
        out
    }
}

/// The output of a corpus pass.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct EstimateSet<S> {
    pub estimates: Vec<ConstantEstimate<S>>,
    pub violations: Vec<ChainViolation>,
    #[serde(skip)]
    pub rows: Vec<ElementRow>,
    pub evaluations: u64,
}

impl<S: Scalar> EstimateSet<S> {
    pub fn get(&self, name: ConstantName) -> Option<&ConstantEstimate<S>> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: ConstantName) -> Option<f64> {
        self.get(name).map(|e| e.value)
    }

    /// Folds in a pass over further elements, numbered from `offset`. A
    /// value replaces the current one only when strictly larger, so the
    /// result equals a single pass over the concatenated corpus.
    pub fn merge(&mut self, other: EstimateSet<S>, offset: usize) {
        for theirs in other.estimates {
            match self.estimates.iter_mut().find(|e| e.name == theirs.name) {
                Some(mine) => {
                    mine.infeasible += theirs.infeasible;
                    if theirs.witness.is_some() && (theirs.value > mine.value || mine.witness.is_none()) {
                        mine.value = theirs.value;
                        mine.witness = theirs.witness;
                    }
                }
                None => self.estimates.push(theirs),
            }
        }
        self.violations.extend(other.violations.into_iter().map(|mut v| {
            v.element += offset;
            v
        }));
        self.rows.extend(other.rows.into_iter().map(|mut r| {
            r.element += offset;
            r
        }));
        self.evaluations += other.evaluations;
        for e in &mut self.estimates {
            e.evaluations = self.evaluations;
        }
    }
}

/// Runs the requested estimators in one pass over `corpus`.
pub fn estimate_with<S: Scalar>(
    basis: &Basis,
    corpus: &Corpus<S>,
    families: Families,
    opts: &EstimatorOptions,
) -> Result<EstimateSet<S>> {
    let needs_corpus = families.projections || families.greedy || families.truncation || families.thag;
    if needs_corpus && corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    crate::errors::check_search_dim(basis)?;
    let acc = pass::run(basis, corpus, families, opts)?;
    Ok(acc.finish(&corpus.id, families.names()))
}

fn single<S: Scalar>(basis: &Basis, corpus: &Corpus<S>, families: Families, name: ConstantName) -> Result<ConstantEstimate<S>> {
    let set = estimate_with(basis, corpus, families, &EstimatorOptions::default())?;
    Ok(set.get(name).cloned().expect("requested family"))
}

/// `K̂ = max ‖P_A f‖/‖f‖` over the corpus and all `A`.
pub fn estimate_unconditionality<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    let fam = Families {
        projections: true,
        ..Families::default()
    };
    single(basis, corpus, fam, ConstantName::K)
}

/// `D̂` (or `D̂_s` with sign patterns) over all pairs `|A| ≤ |B|`.
pub fn estimate_democracy<S: Scalar>(basis: &Basis, superdemocratic: bool) -> Result<ConstantEstimate<S>> {
    let fam = Families {
        democracy: true,
        ..Families::default()
    };
    let name = if superdemocratic { ConstantName::Ds } else { ConstantName::D };
    single(basis, &Corpus::new("none", Vec::new()), fam, name)
}

/// `Δ̂` over the corpus elements scaled to unit maximal coefficient, plus
/// `f = 0`.
pub fn estimate_slc<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    let fam = Families {
        slc: true,
        ..Families::default()
    };
    single(basis, corpus, fam, ConstantName::Delta)
}

/// `Ĉ_q = max ‖f − P_A f‖/‖f‖` over greedy sets.
pub fn estimate_quasi_greedy<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    Ok(estimate_greedy_family(basis, corpus)?.cq)
}

/// The five greedy-set estimates of one shared pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyFamily<S> {
    pub cq: ConstantEstimate<S>,
    pub cg: ConstantEstimate<S>,
    pub cag: ConstantEstimate<S>,
    pub cpg: ConstantEstimate<S>,
    pub cpgu: ConstantEstimate<S>,
}

pub fn estimate_greedy_family<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<GreedyFamily<S>> {
    let fam = Families {
        greedy: true,
        ..Families::default()
    };
    let set = estimate_with(basis, corpus, fam, &EstimatorOptions::default())?;
    let take = |n| set.get(n).cloned().expect("greedy family");
    Ok(GreedyFamily {
        cq: take(ConstantName::Cq),
        cg: take(ConstantName::Cg),
        cag: take(ConstantName::Cag),
        cpg: take(ConstantName::Cpg),
        cpgu: take(ConstantName::Cpgu),
    })
}

pub fn estimate_greedy<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    Ok(estimate_greedy_family(basis, corpus)?.cg)
}

pub fn estimate_almost_greedy<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    Ok(estimate_greedy_family(basis, corpus)?.cag)
}

pub fn estimate_rgpcc<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    Ok(estimate_greedy_family(basis, corpus)?.cpg)
}

pub fn estimate_urgpcc<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    Ok(estimate_greedy_family(basis, corpus)?.cpgu)
}

/// `Γ̂_t = max α_m(f) ‖1_{sgn f, A}‖/‖f‖` over greedy sets `A`.
pub fn estimate_truncation<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    let fam = Families {
        truncation: true,
        ..Families::default()
    };
    single(basis, corpus, fam, ConstantName::GammaT)
}

/// `(Ĉ_dis, Ĉ_end, Ĉ_end2)`.
pub fn estimate_thag_variants<S: Scalar>(
    basis: &Basis,
    corpus: &Corpus<S>,
) -> Result<(ConstantEstimate<S>, ConstantEstimate<S>, ConstantEstimate<S>)> {
    let fam = Families {
        thag: true,
        ..Families::default()
    };
    let set = estimate_with(basis, corpus, fam, &EstimatorOptions::default())?;
    let take = |n| set.get(n).cloned().expect("thag family");
    Ok((take(ConstantName::Cdis), take(ConstantName::Cend), take(ConstantName::Cend2)))
}

/// `Ĉ₊ = max ‖P_B F‖/‖F‖` over `B` with `F − P_B F` having nonnegative
/// real coefficients.
pub fn estimate_positive_cone<S: Scalar>(basis: &Basis, corpus: &Corpus<S>) -> Result<ConstantEstimate<S>> {
    let fam = Families {
        projections: true,
        ..Families::default()
    };
    single(basis, corpus, fam, ConstantName::Cplus)
}

/// `ratio = num/den` with the vanishing-denominator rule: `None` when both
/// vanish, `Err(())` (infeasible) when only the denominator does.
pub(crate) fn guarded_ratio(num: f64, den: f64) -> std::result::Result<Option<f64>, ()> {
    if den < ZERO_TOL {
        if num < ZERO_TOL {
            Ok(None)
        } else {
            Err(())
        }
    } else {
        Ok(Some(num / den))
    }
}
