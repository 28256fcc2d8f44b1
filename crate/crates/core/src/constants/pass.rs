//! The shared corpus pass. Every element is processed independently with
//! its own budget meter; results are merged in corpus order, and a later
//! candidate replaces the current maximum only when strictly larger.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    guarded_ratio, unimodular_sign, ConstantEstimate, ConstantName, Corpus, EstimateSet, EstimatorOptions, Families,
    Witness,
};
use crate::basis::{Basis, SignPattern};
use crate::budget::Meter;
use crate::errors::{profile_rows, ErrorWitness, Problem, ProfileRow};
use crate::optimize::golden_section;
use crate::scalar::Scalar;
use crate::sets::IndexSet;
use crate::spaces::{for_each_sign_tuple, ZERO_TOL};
use crate::tga::{greedy_sets_from_coeffs, threshold_from_coeffs};
use crate::{Error, Result};

/// Slack for the per-element error chain, scaled by `max(1, ‖f‖)`.
const CHAIN_TOL: f64 = 1e-9;

/// One `(f, m)` line of the optional table.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ElementRow {
    pub element: usize,
    pub m: usize,
    /// `‖f − G_m f‖`.
    pub residual: f64,
    pub sigma: f64,
    pub rho: f64,
    pub varrho: f64,
    pub best_projection: f64,
    pub ratio_q: Option<f64>,
    pub ratio_g: Option<f64>,
    pub ratio_ag: Option<f64>,
    pub ratio_pg: Option<f64>,
    pub ratio_pgu: Option<f64>,
}

/// A pointwise error inequality that failed on one element.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainViolation {
    pub element: usize,
    pub m: usize,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
struct Slot<S> {
    value: f64,
    witness: Option<Witness<S>>,
    infeasible: u64,
}

impl<S> Default for Slot<S> {
    fn default() -> Self {
        Slot {
            value: 0.0,
            witness: None,
            infeasible: 0,
        }
    }
}

pub(crate) struct Accumulator<S> {
    slots: Vec<Slot<S>>,
    rows: Vec<ElementRow>,
    violations: Vec<ChainViolation>,
    evaluations: u64,
}

impl<S: Scalar> Accumulator<S> {
    fn new() -> Self {
        Accumulator {
            slots: (0..ConstantName::ALL.len()).map(|_| Slot::default()).collect(),
            rows: Vec::new(),
            violations: Vec::new(),
            evaluations: 0,
        }
    }

    #[inline]
    fn offer(&mut self, name: ConstantName, value: f64, witness: impl FnOnce() -> Witness<S>) {
        let slot = &mut self.slots[name.index()];
        if value > slot.value || slot.witness.is_none() {
            slot.value = value;
            slot.witness = Some(witness());
        }
    }

    /// Offers `num/den` with the vanishing-denominator rule.
    #[inline]
    fn offer_ratio(&mut self, name: ConstantName, num: f64, den: f64, witness: impl FnOnce() -> Witness<S>) {
        match guarded_ratio(num, den) {
            Ok(Some(r)) => self.offer(name, r, witness),
            Ok(None) => {}
            Err(()) => self.slots[name.index()].infeasible += 1,
        }
    }

    fn merge(&mut self, other: Accumulator<S>) {
        for (mine, theirs) in self.slots.iter_mut().zip(other.slots) {
            mine.infeasible += theirs.infeasible;
            if let Some(w) = theirs.witness {
                if theirs.value > mine.value || mine.witness.is_none() {
                    mine.value = theirs.value;
                    mine.witness = Some(w);
                }
            }
        }
        self.rows.extend(other.rows);
        self.violations.extend(other.violations);
        self.evaluations += other.evaluations;
    }

    pub(crate) fn finish(self, corpus_id: &str, names: Vec<ConstantName>) -> EstimateSet<S> {
        let evaluations = self.evaluations;
        let estimates = names
            .into_iter()
            .map(|name| {
                let slot = &self.slots[name.index()];
                ConstantEstimate {
                    name,
                    value: slot.value,
                    witness: slot.witness.clone(),
                    corpus_id: corpus_id.to_string(),
                    is_lower_bound: true,
                    infeasible: slot.infeasible,
                    evaluations,
                }
            })
            .collect();
        EstimateSet {
            estimates,
            violations: self.violations,
            rows: self.rows,
            evaluations,
        }
    }
}

fn net_of<S: Scalar>(basis: &Basis) -> Vec<S> {
    S::unit_net(basis.space().field().sign_count())
}

fn pow_u64(base: usize, exp: usize) -> u64 {
    (base as u64).saturating_pow(exp as u32)
}

/// `Σ_{U ⊆ free} |net|^{|U|} = (1 + |net|)^{|free|}`.
fn signed_subset_count(free: usize, net: usize) -> u64 {
    pow_u64(net + 1, free)
}

pub(crate) fn run<S: Scalar>(
    basis: &Basis,
    corpus: &Corpus<S>,
    families: Families,
    opts: &EstimatorOptions,
) -> Result<Accumulator<S>> {
    let mut acc = global_pass(basis, families, opts)?;
    let per_element = families.projections || families.greedy || families.truncation || families.thag || families.slc;
    if !per_element || corpus.is_empty() {
        return Ok(acc);
    }
    let work = |(i, f): (usize, &Vec<S>)| element_pass(basis, i, f, families, opts);
    let results: Vec<Result<Accumulator<S>>> = if opts.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::input(format!("thread pool: {e}")))?;
        pool.install(|| corpus.elements.par_iter().enumerate().map(work).collect())
    } else {
        corpus.elements.iter().enumerate().map(work).collect()
    };
    for r in results {
        acc.merge(r?);
    }
    Ok(acc)
}

/// Corpus-independent work: `D`, `D_s`, and the `f = 0` member of the
/// SLC search.
fn global_pass<S: Scalar>(basis: &Basis, families: Families, opts: &EstimatorOptions) -> Result<Accumulator<S>> {
    let mut acc = Accumulator::new();
    let meter = opts.budget.meter();
    if families.democracy {
        democracy(basis, &meter, &mut acc)?;
    }
    if families.slc {
        let zero = vec![S::zero(); basis.dim()];
        slc_element(basis, &zero, &meter, &mut acc)?;
    }
    acc.evaluations += meter.used();
    Ok(acc)
}

/// For every cardinality, the largest and smallest indicator norms, with
/// `ε ≡ 1` for `D` and all net signs for `D_s`. Since the pairs are not
/// required to be disjoint, the maximum over `|A| ≤ |B|` is a maximum of
/// `hi(k)/lo(l)` over `k ≤ l`.
fn democracy<S: Scalar>(basis: &Basis, meter: &Meter, acc: &mut Accumulator<S>) -> Result<()> {
    let n = basis.dim();
    let net: Vec<S> = net_of(basis);
    let one = [S::from_real(1.0)];
    meter.reserve((1u64 << n).saturating_add(signed_subset_count(n, net.len())))?;
    for (name, signs) in [(ConstantName::D, &one[..]), (ConstantName::Ds, &net[..])] {
        let mut hi: Vec<Option<(f64, SignPattern<S>)>> = vec![None; n + 1];
        let mut lo: Vec<Option<(f64, SignPattern<S>)>> = vec![None; n + 1];
        let mut evals = 0u64;
        for k in 1..=n {
            for set in IndexSet::full(n).subsets_of_size(k) {
                for_each_sign_tuple(signs, k, |eps| {
                    let v = basis.norm(&basis.signed_indicator(set, eps));
                    evals += 1;
                    if hi[k].as_ref().is_none_or(|h| v > h.0) {
                        hi[k] = Some((v, SignPattern::new_unchecked(set, eps.to_vec())));
                    }
                    if lo[k].as_ref().is_none_or(|l| v < l.0) {
                        lo[k] = Some((v, SignPattern::new_unchecked(set, eps.to_vec())));
                    }
                });
            }
        }
        meter.charge(evals)?;
        for k in 1..=n {
            for l in k..=n {
                let (Some((h, a)), Some((d, b))) = (&hi[k], &lo[l]) else { continue };
                acc.offer_ratio(name, *h, *d, || Witness::Democracy { a: a.clone(), b: b.clone() });
            }
        }
    }
    Ok(())
}

/// SLC ratios for one element, scaled to unit largest coefficient. Every
/// subset `U` of the free indices gets the largest and smallest value of
/// `‖f + 1_{ε,U}‖` over signs; disjoint pairs `|A| ≤ |B|` are then formed
/// from those tables.
fn slc_element<S: Scalar>(basis: &Basis, f: &[S], meter: &Meter, acc: &mut Accumulator<S>) -> Result<()> {
    let n = basis.dim();
    let c = basis.coeffs(f);
    let top = c.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
    let g: Vec<S> = if top > ZERO_TOL {
        f.iter().map(|v| v.scale(1.0 / top)).collect()
    } else {
        vec![S::zero(); n]
    };
    let support = crate::basis::support_of(&c);
    let free = support.complement(n);
    let net: Vec<S> = net_of(basis);
    meter.reserve(signed_subset_count(free.len(), net.len()))?;
    let size = 1usize << n;
    let mut hi: Vec<Option<(f64, Vec<S>)>> = vec![None; size];
    let mut lo: Vec<Option<(f64, Vec<S>)>> = vec![None; size];
    let mut evals = 0u64;
    let mut buf = vec![S::zero(); n];
    for u in free.subsets() {
        for_each_sign_tuple(&net, u.len(), |eps| {
            let ind = basis.signed_indicator(u, eps);
            for ((o, &x), &y) in buf.iter_mut().zip(&g).zip(&ind) {
                *o = x + y;
            }
            let v = basis.norm(&buf);
            evals += 1;
            let k = u.bits() as usize;
            if hi[k].as_ref().is_none_or(|h| v > h.0) {
                hi[k] = Some((v, eps.to_vec()));
            }
            if lo[k].as_ref().is_none_or(|l| v < l.0) {
                lo[k] = Some((v, eps.to_vec()));
            }
        });
    }
    meter.charge(evals)?;
    for a in free.subsets() {
        let Some((h, ea)) = &hi[a.bits() as usize] else { continue };
        for b in free.minus(a).subsets() {
            if b.len() < a.len() {
                continue;
            }
            let Some((d, eb)) = &lo[b.bits() as usize] else { continue };
            acc.offer_ratio(ConstantName::Delta, *h, *d, || Witness::Slc {
                f: g.clone(),
                a: SignPattern::new_unchecked(a, ea.clone()),
                b: SignPattern::new_unchecked(b, eb.clone()),
            });
        }
    }
    Ok(())
}

fn element_pass<S: Scalar>(
    basis: &Basis,
    index: usize,
    f: &[S],
    families: Families,
    opts: &EstimatorOptions,
) -> Result<Accumulator<S>> {
    let mut acc = Accumulator::new();
    let meter = opts.budget.meter();
    let pb = Problem::new(basis, f)?;
    if pb.norm_f < ZERO_TOL {
        return Ok(acc);
    }
    if families.projections {
        projections(&pb, &meter, &mut acc)?;
    }
    if families.slc {
        slc_element(basis, f, &meter, &mut acc)?;
    }
    if families.greedy {
        greedy_family(&pb, index, opts, &meter, &mut acc)?;
    }
    if families.truncation {
        truncation(&pb, &mut acc);
    }
    if families.thag {
        thag(&pb, &opts.a_grid, &meter, &mut acc)?;
    }
    acc.evaluations += meter.used();
    Ok(acc)
}

/// `K` over every subset and `C₊` over subsets containing every index whose
/// coefficient is not a nonnegative real.
fn projections<S: Scalar>(pb: &Problem<S>, meter: &Meter, acc: &mut Accumulator<S>) -> Result<()> {
    let n = pb.dim();
    meter.reserve(1u64 << n)?;
    let forced = IndexSet::from_indices((0..n).filter(|&j| !pb.c[j].is_nonneg_real(ZERO_TOL)));
    for set in IndexSet::all_subsets(n) {
        let v = pb.basis.norm(&pb.basis.combine(&pb.c, set)) / pb.norm_f;
        acc.offer(ConstantName::K, v, || Witness::Projection {
            f: pb.f.to_vec(),
            set,
        });
        if forced.is_subset(set) {
            acc.offer(ConstantName::Cplus, v, || Witness::Projection {
                f: pb.f.to_vec(),
                set,
            });
        }
    }
    meter.charge(1u64 << n)
}

fn residual_after<S: Scalar>(pb: &Problem<S>, set: IndexSet) -> f64 {
    let p = pb.basis.combine(&pb.c, set);
    let r: Vec<S> = pb.f.iter().zip(&p).map(|(&x, &y)| x - y).collect();
    pb.basis.norm(&r)
}

/// `ρ_0 = ϱ_0 = ‖f‖`: the only polynomial with zero terms is `0`.
fn zero_term_witness<S: Scalar>() -> ErrorWitness<S> {
    ErrorWitness {
        set: IndexSet::EMPTY,
        coeffs: Vec::new(),
        eps: None,
        alpha: None,
    }
}

fn check_chain<S: Scalar>(index: usize, rows: &[ProfileRow<S>], norm_f: f64, out: &mut Vec<ChainViolation>) {
    let tol = CHAIN_TOL * norm_f.max(1.0);
    let mut push = |m: usize, check: &str, lhs: f64, rhs: f64| {
        if lhs > rhs + tol {
            out.push(ChainViolation {
                element: index,
                m,
                check: check.to_string(),
                lhs,
                rhs,
            });
        }
    };
    for (i, row) in rows.iter().enumerate() {
        let m = row.m;
        push(m, "sigma<=bestProjection", row.sigma.value, row.best_projection.value);
        if let (Some(rho), Some(varrho)) = (&row.rho, &row.varrho) {
            push(m, "sigma<=rho", row.sigma.value, rho.value);
            push(m, "rho<=varrho", rho.value, varrho.value);
        }
        if i > 0 {
            let prev = &rows[i - 1];
            push(m, "sigma monotone", row.sigma.value, prev.sigma.value);
            push(m, "bestProjection monotone", row.best_projection.value, prev.best_projection.value);
        }
    }
}

/// `C_q`, `C_g`, `C_ag`, `C_pg`, `C_pgu` over every greedy set.
fn greedy_family<S: Scalar>(
    pb: &Problem<S>,
    index: usize,
    opts: &EstimatorOptions,
    meter: &Meter,
    acc: &mut Accumulator<S>,
) -> Result<()> {
    let rows = profile_rows(pb, &opts.sigma, meter)?;
    check_chain(index, &rows, pb.norm_f, &mut acc.violations);
    let zero = zero_term_witness::<S>();
    for row in &rows {
        let m = row.m;
        let rho_w = row.rho.as_ref().map_or(&zero, |r| &r.witness);
        let varrho_w = row.varrho.as_ref().map_or(&zero, |r| &r.witness);
        let dens: [(ConstantName, Option<&ErrorWitness<S>>); 5] = [
            (ConstantName::Cq, None),
            (ConstantName::Cg, Some(&row.sigma.witness)),
            (ConstantName::Cag, Some(&row.best_projection.witness)),
            (ConstantName::Cpg, Some(rho_w)),
            (ConstantName::Cpgu, Some(varrho_w)),
        ];
        let den_values: Vec<f64> = dens
            .iter()
            .map(|(_, w)| w.map_or(pb.norm_f, |w| w.distance(pb.basis, pb.f)))
            .collect();
        let mut ratios = [None; 5];
        for set in &row.greedy_sets.sets {
            let num = residual_after(pb, *set);
            for (k, ((name, w), &den)) in dens.iter().zip(&den_values).enumerate() {
                if let Ok(Some(r)) = guarded_ratio(num, den) {
                    if ratios[k].is_none_or(|x: f64| r > x) {
                        ratios[k] = Some(r);
                    }
                }
                acc.offer_ratio(*name, num, den, || Witness::Greedy {
                    f: pb.f.to_vec(),
                    m,
                    set: *set,
                    denominator: w.cloned(),
                });
            }
        }
        if opts.collect_rows {
            acc.rows.push(ElementRow {
                element: index,
                m,
                residual: row.residual,
                sigma: row.sigma.value,
                rho: row.rho.as_ref().map_or(pb.norm_f, |r| r.value),
                varrho: row.varrho.as_ref().map_or(pb.norm_f, |r| r.value),
                best_projection: row.best_projection.value,
                ratio_q: ratios[0],
                ratio_g: ratios[1],
                ratio_ag: ratios[2],
                ratio_pg: ratios[3],
                ratio_pgu: ratios[4],
            });
        }
    }
    Ok(())
}

/// `Γ_t`: smallest coefficient modulus on a greedy set times the norm of
/// the sign indicator of that set, over `‖f‖`.
fn truncation<S: Scalar>(pb: &Problem<S>, acc: &mut Accumulator<S>) {
    let n = pb.dim();
    for m in 1..=n {
        for set in greedy_sets_from_coeffs(&pb.c, m).sets {
            let alpha = set.iter().map(|j| pb.c[j].modulus()).fold(f64::INFINITY, f64::min);
            let signs: Vec<S> = set.iter().map(|j| unimodular_sign(pb.c[j])).collect();
            let v = alpha * pb.basis.norm(&pb.basis.signed_indicator(set, &signs)) / pb.norm_f;
            acc.offer(ConstantName::GammaT, v, || Witness::Truncation {
                f: pb.f.to_vec(),
                m,
                set,
            });
        }
    }
}

/// `‖f − a 1_{ε,B}‖` evaluated into `buf`.
#[inline]
fn shifted_norm<S: Scalar>(basis: &Basis, f: &[S], ind: &[S], a: f64, buf: &mut [S]) -> f64 {
    for ((o, &x), &y) in buf.iter_mut().zip(f).zip(ind) {
        *o = x - y.scale(a);
    }
    basis.norm(buf)
}

/// Smallest `‖f − a 1_{ε,B}‖` over `a ≥ 0`: a grid of threshold multiples,
/// then golden section between the neighbours of the best grid point.
fn minimise_shift<S: Scalar>(basis: &Basis, f: &[S], ind: &[S], alpha: f64, grid: &[f64], buf: &mut [S]) -> (f64, f64, u64) {
    let mut best = (f64::INFINITY, 0.0);
    let mut best_i = 0;
    for (i, &t) in grid.iter().enumerate() {
        let a = t * alpha;
        let v = shifted_norm(basis, f, ind, a, buf);
        if v < best.0 {
            best = (v, a);
            best_i = i;
        }
    }
    let lo = if best_i == 0 { grid[0] } else { grid[best_i - 1] } * alpha;
    let hi = if best_i + 1 < grid.len() {
        grid[best_i + 1] * alpha
    } else {
        2.0 * grid[best_i] * alpha
    };
    let mut evals = grid.len() as u64;
    if hi > lo {
        let m = golden_section(|a| shifted_norm(basis, f, ind, a, buf), lo, hi, 1e-10 * alpha.max(1e-12));
        evals += m.evaluations;
        if m.value < best.0 {
            best = (m.value, m.x);
        }
    }
    (best.0, best.1, evals)
}

/// `C_dis`, `C_end`, `C_end2` over every greedy set `A`. For `C_dis` the
/// sets `B ⊆ Aᶜ` have `|B| ≤ |A|` and the free coefficient is searched; for
/// `C_end` and `C_end2` the sets lie wholly on one side of `A` and the
/// coefficient is the threshold.
fn thag<S: Scalar>(pb: &Problem<S>, grid: &[f64], meter: &Meter, acc: &mut Accumulator<S>) -> Result<()> {
    let n = pb.dim();
    let basis = pb.basis;
    let net: Vec<S> = net_of(basis);
    let one = S::from_real(1.0);
    let mut buf = vec![S::zero(); n];
    // m = 0: A = B = ∅ and the ratio is 1.
    for name in [ConstantName::Cdis, ConstantName::Cend, ConstantName::Cend2] {
        acc.offer(name, 1.0, || Witness::Thag {
            f: pb.f.to_vec(),
            m: 0,
            set: IndexSet::EMPTY,
            b: SignPattern::new_unchecked(IndexSet::EMPTY, Vec::new()),
            a: 0.0,
        });
    }
    for m in 1..=n {
        let alpha = threshold_from_coeffs(&pb.c, m);
        for set in greedy_sets_from_coeffs(&pb.c, m).sets {
            let num = residual_after(pb, set);
            if num <= ZERO_TOL {
                continue;
            }
            let rest = set.complement(n);
            let candidates: u64 = rest
                .subsets()
                .filter(|b| b.len() <= m)
                .map(|b| pow_u64(net.len(), b.len()))
                .sum();
            meter.reserve(candidates.saturating_mul(grid.len() as u64 + 60))?;
            let mut evals = 0u64;
            for b in rest.subsets() {
                if b.len() > m {
                    continue;
                }
                let ordered = set.precedes(b) || b.precedes(set);
                for_each_sign_tuple(&net, b.len(), |eps| {
                    let ind = basis.signed_indicator(b, eps);
                    let (den, a, e) = minimise_shift(basis, pb.f, &ind, alpha, grid, &mut buf);
                    evals += e;
                    let pattern = || SignPattern::new_unchecked(b, eps.to_vec());
                    acc.offer_ratio(ConstantName::Cdis, num, den, || Witness::Thag {
                        f: pb.f.to_vec(),
                        m,
                        set,
                        b: pattern(),
                        a,
                    });
                    if ordered {
                        let den = shifted_norm(basis, pb.f, &ind, alpha, &mut buf);
                        evals += 1;
                        let thag = || Witness::Thag {
                            f: pb.f.to_vec(),
                            m,
                            set,
                            b: pattern(),
                            a: alpha,
                        };
                        acc.offer_ratio(ConstantName::Cend, num, den, thag);
                        if b.len() == m && eps.iter().all(|&e| e == one) {
                            acc.offer_ratio(ConstantName::Cend2, num, den, thag);
                        }
                    }
                });
            }
            meter.charge(evals)?;
        }
    }
    Ok(())
}
