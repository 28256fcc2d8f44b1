//! Evaluates the closed-form bounds at the empirical estimates.
//!
//! Estimates are lower bounds of the true constants, so an inequality
//! between two of them is only guaranteed when the search itself forces it:
//! pointwise denominator nesting, or a corpus closed under the relevant
//! proof construction. Those entries are asserted. The rest are reported
//! with their status, except on bases whose constants are all known to be
//! 1, where every entry is asserted.

use serde::{Deserialize, Serialize};

use super::formulas::{eta_p, k2};
use super::{ConstantEstimate, ConstantName};
use crate::scalar::Scalar;
use crate::spaces::{geometry_constants, Field};

/// Default slack for `Holds`.
pub const LEDGER_TOL: f64 = 1e-9;
/// Slack for entries guaranteed by corpus closure, absorbing the `1 + 1e-6`
/// factors used to build the closure vectors.
pub const CLOSURE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerEntry {
    pub id: String,
    pub lhs_name: String,
    pub lhs_value: Option<f64>,
    pub rhs_formula_id: String,
    pub rhs_value: Option<f64>,
    pub status: Status,
    pub asserted: bool,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundLedger {
    pub entries: Vec<LedgerEntry>,
}

impl BoundLedger {
    pub fn get(&self, id: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Asserted entries that do not hold.
    pub fn failures(&self) -> Vec<&LedgerEntry> {
        self.entries
            .iter()
            .filter(|e| e.asserted && e.status == Status::Violated)
            .collect()
    }

    pub fn asserted_hold(&self) -> bool {
        self.failures().is_empty()
    }
}

/// What the ledger may assume about the estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerContext {
    pub p: f64,
    pub field: Field,
    /// Every constant of the basis equals 1.
    pub exact: bool,
    /// The corpus contains the unconditionality and SLC padding vectors.
    pub closed_projections: bool,
    /// The corpus contains the positive/negative splits (real field).
    pub closed_positive_cone: bool,
}

struct Builder<'a, S> {
    estimates: &'a [ConstantEstimate<S>],
    ctx: LedgerContext,
    entries: Vec<LedgerEntry>,
}

impl<S: Scalar> Builder<'_, S> {
    fn value(&self, name: ConstantName) -> Option<f64> {
        self.estimates.iter().find(|e| e.name == name).map(|e| e.value)
    }

    fn push(&mut self, id: &str, lhs: (&str, Option<f64>), formula: &str, rhs: Option<f64>, asserted: bool, tol: f64) {
        let status = match (lhs.1, rhs) {
            (Some(l), Some(r)) if l.is_finite() && !r.is_nan() => {
                if l <= r + tol {
                    Status::Holds
                } else {
                    Status::Violated
                }
            }
            _ => Status::NotApplicable,
        };
        self.entries.push(LedgerEntry {
            id: id.to_string(),
            lhs_name: lhs.0.to_string(),
            lhs_value: lhs.1,
            rhs_formula_id: formula.to_string(),
            rhs_value: rhs,
            status,
            asserted: asserted || self.ctx.exact,
            tolerance: tol,
        });
    }

    fn chain(&mut self, id: &str, lhs: ConstantName, rhs: ConstantName) {
        let (l, r) = (self.value(lhs), self.value(rhs));
        self.push(id, (lhs.as_str(), l), rhs.as_str(), r, true, LEDGER_TOL);
    }
}

/// Every bound, evaluated at `estimates`.
pub fn bound_ledger<S: Scalar>(estimates: &[ConstantEstimate<S>], ctx: &LedgerContext) -> BoundLedger {
    use ConstantName::*;
    let mut b = Builder {
        estimates,
        ctx: *ctx,
        entries: Vec::new(),
    };
    let p = ctx.p;
    let complex = ctx.field.is_complex();
    let geom = geometry_constants(p, ctx.field).ok();
    let a_p = geom.map(|g| g.a_p);
    let b_p = geom.map(|g| g.b_p);
    let v = |n| b.value(n);
    let (k, d, ds, delta) = (v(K), v(D), v(Ds), v(Delta));
    let (cq, cg, cpg, cpgu) = (v(Cq), v(Cg), v(Cpg), v(Cpgu));
    let (gamma, cdis, cplus) = (v(GammaT), v(Cdis), v(Cplus));

    b.chain("chain-pgu-pg", Cpgu, Cpg);
    b.chain("chain-pg-g", Cpg, Cg);
    b.chain("chain-q-ag", Cq, Cag);
    b.chain("chain-ag-g", Cag, Cg);
    b.chain("chain-d-ds", D, Ds);
    b.chain("chain-end-dis", Cend, Cdis);
    b.chain("chain-end2-end", Cend2, Cend);
    b.chain("chain-q-dis", Cq, Cdis);

    let closed = ctx.closed_projections;
    b.push("closure-k-pg", ("K", k), "Cpg", cpg, closed, CLOSURE_TOL);
    b.push("closure-delta-pg", ("Delta", delta), "Cpg", cpg, closed, CLOSURE_TOL);

    let k2_of = |c: Option<f64>| c.and_then(|c| k2(c, p).ok());
    if complex {
        b.push("positive-cone-k", ("K", k), "K2(Cplus,p)", k2_of(cplus), false, LEDGER_TOL);
    } else {
        let rhs = cplus.map(|c| c * c);
        b.push("positive-cone-k", ("K", k), "Cplus^2", rhs, ctx.closed_positive_cone, CLOSURE_TOL);
    }

    let rhs = a_p.zip(cpg).map(|(a, c)| a * a * c * c);
    b.push("greedy-pg", ("Cg", cg), "A_p^2*Cpg^2", rhs, false, LEDGER_TOL);
    // Greedy bound from unconditionality and democracy constants.
    let remark = |kk: f64, dd: f64| -> Option<f64> {
        let (a, bb) = (a_p?, b_p?);
        let inner = (bb.powf(p)).min(a.powf(p) * kk.powf(p));
        Some(kk * (1.0 + a.powf(p) * dd.powf(p) * inner).powf(1.0 / p))
    };
    if complex {
        let rhs = cpgu.and_then(|c| remark(k2_of(Some(c))?, c * c));
        b.push("greedy-pgu", ("Cg", cg), "K2(Cpgu,p)*(1+A_p^p*Cpgu^2p*min{B_p^p,A_p^p*K2^p})^(1/p)", rhs, false, LEDGER_TOL);
        b.push("pgu-k", ("K", k), "K2(Cpgu,p)", k2_of(cpgu), false, LEDGER_TOL);
    } else {
        let rhs = cpgu.and_then(|c| remark(c * c, c * c));
        b.push("greedy-pgu", ("Cg", cg), "Cpgu^2*(1+A_p^p*Cpgu^2p*min{B_p^p,A_p^p*Cpgu^2p})^(1/p)", rhs, false, LEDGER_TOL);
        b.push("pgu-k", ("K", k), "Cpgu^2", cpgu.map(|c| c * c), false, LEDGER_TOL);
    }
    b.push("pgu-d", ("D", d), "Cpgu^2", cpgu.map(|c| c * c), false, LEDGER_TOL);

    let rhs = a_p.zip(delta).zip(k).map(|((a, dl), kk)| a * a * dl * kk);
    b.push("greedy-slc-k", ("Cg", cg), "A_p^2*Delta*K", rhs, false, LEDGER_TOL);
    let rhs = k.zip(d).and_then(|(kk, dd)| remark(kk, dd));
    b.push("greedy-k-d", ("Cg", cg), "K*(1+A_p^p*D^p*min{B_p^p,A_p^p*K^p})^(1/p)", rhs, false, LEDGER_TOL);
    let lhs = delta.zip(k).map(|(dl, kk)| dl.max(kk));
    b.push("slc-k-g", ("max{Delta,K}", lhs), "Cg", cg, false, LEDGER_TOL);

    let rhs = cq.and_then(|c| Some(c * c * eta_p(p, c).ok()?));
    b.push("truncation-q", ("GammaT", gamma), "Cq^2*eta_p(Cq)", rhs, false, LEDGER_TOL);
    let rhs = cq
        .zip(ds)
        .zip(gamma)
        .map(|((c, s), g)| c * (1.0 + 2f64.powf(p) * s.powf(p) * g.powf(p)).powf(1.0 / p));
    b.push("disjoint-q", ("Cdis", cdis), "Cq*(1+2^p*Ds^p*GammaT^p)^(1/p)", rhs, false, LEDGER_TOL);

    BoundLedger { entries: b.entries }
}
