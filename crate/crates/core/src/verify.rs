//! Full runs: corpus generation, closure, estimation, witness-driven
//! closure rounds and the ledger, collected into a JSON report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::basis::Basis;
use crate::catalog::{close_corpus, covering_vectors, generate_corpus, make_basis, new_elements, CatalogId, CorpusSpec};
use crate::constants::{
    bound_ledger, estimate_with, BoundLedger, ChainViolation, ConstantEstimate, ConstantName, Corpus, ElementRow,
    EstimateSet, EstimatorOptions, Families, LedgerContext, Status,
};
use crate::scalar::Scalar;
use crate::spaces::{Field, NormSpec};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Numeric slack used when diffing reports.
pub const DIFF_TOL: f64 = 1e-9;

/// Editorial readings recorded in every report.
pub const READINGS: [&str; 6] = [
    "truncation: the constant is evaluated as min over the greedy set of |coefficient| times the sign-indicator norm, over the element norm",
    "complex greedy bound: the free constant is evaluated as K2(Cpgu, p) from the positive-cone construction",
    "complex unconditionality under URGPCC: K is compared with K2(Cpgu, p)",
    "SLC: elements are scaled to unit largest coefficient before the search, and f = 0 is included",
    "real URGPCC greedy bound: the leading factor is Cpgu^2 (democracy and unconditionality constants both bounded by Cpgu^2)",
    "constant coefficient errors with m = 0 equal the element norm",
];

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub estimator: EstimatorOptions,
    pub families: Families,
    /// Rounds of witness-driven closure after the first pass.
    pub closure_rounds: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            estimator: EstimatorOptions::default(),
            families: Families::all(),
            closure_rounds: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BasisDescriptor {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub dim: usize,
    pub field: Field,
    pub norm: NormSpec,
    pub p: f64,
    /// Row-major basis matrix.
    pub matrix: Vec<f64>,
}

impl BasisDescriptor {
    pub fn new(basis: &Basis, id: Option<&CatalogId>) -> Self {
        let n = basis.dim();
        let x = basis.matrix();
        BasisDescriptor {
            id: id.map(|i| i.to_string()),
            dim: n,
            field: basis.space().field(),
            norm: basis.space().norm_spec().clone(),
            p: basis.space().p(),
            matrix: (0..n).flat_map(|i| (0..n).map(move |j| x[(i, j)])).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusStats {
    pub id: String,
    pub generated: usize,
    pub closure_added: usize,
    pub round_added: usize,
    pub total: usize,
    pub closure_rounds: usize,
}

/// A stage that stopped early.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageError {
    pub stage: String,
    pub message: String,
    pub budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct RunReport<S> {
    pub schema_version: u32,
    pub seed: u64,
    pub config: CorpusSpec,
    pub basis: BasisDescriptor,
    pub corpus: CorpusStats,
    pub estimates: Vec<ConstantEstimate<S>>,
    pub ledger: BoundLedger,
    pub violations: Vec<ChainViolation>,
    pub observations: Vec<String>,
    pub readings: Vec<String>,
    pub errors: Vec<StageError>,
    pub evaluations: u64,
    #[serde(skip)]
    pub rows: Vec<ElementRow>,
}

impl<S: Scalar> RunReport<S> {
    pub fn value(&self, name: ConstantName) -> Option<f64> {
        self.estimates.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn budget_exceeded(&self) -> bool {
        self.errors.iter().any(|e| e.budget)
    }

    /// No stage failed, no pointwise violation, every asserted entry holds.
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.violations.is_empty() && self.ledger.asserted_hold()
    }

    /// One line per `(f, m)` with the errors and ratios, 17 significant
    /// digits.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("element,m,residual,sigma,rho,varrho,bestProjection,ratioQ,ratioG,ratioAg,ratioPg,ratioPgu\n");
        let num = |v: f64| format!("{v:.16e}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.element,
                r.m,
                num(r.residual),
                num(r.sigma),
                num(r.rho),
                num(r.varrho),
                num(r.best_projection),
                opt(r.ratio_q),
                opt(r.ratio_g),
                opt(r.ratio_ag),
                opt(r.ratio_pg),
                opt(r.ratio_pgu)
            );
        }
        out
    }

    /// The estimate table as CSV.
    pub fn estimates_csv(&self) -> String {
        let mut out = String::from("name,value,infeasible\n");
        for e in &self.estimates {
            let _ = writeln!(out, "{},{:.16e},{}", e.name, e.value, e.infeasible);
        }
        out
    }
}

fn stage_error(stage: &str, e: &Error) -> StageError {
    StageError {
        stage: stage.to_string(),
        message: e.to_string(),
        budget: e.is_budget(),
    }
}

fn observations<S: Scalar>(est: &[ConstantEstimate<S>], exact: bool) -> Vec<String> {
    let v = |n: ConstantName| est.iter().find(|e| e.name == n).map(|e| e.value);
    let mut out = Vec::new();
    let above = |x: Option<f64>| x.is_some_and(|x| x > 1.0 + 1e-6);
    if above(v(ConstantName::D)) {
        out.push(format!("not democratic: D >= {:.6}", v(ConstantName::D).unwrap()));
    }
    if above(v(ConstantName::K)) {
        out.push(format!("conditional: K >= {:.6}", v(ConstantName::K).unwrap()));
    }
    if above(v(ConstantName::Cq)) {
        out.push(format!("quasi-greedy constant exceeds 1: Cq >= {:.6}", v(ConstantName::Cq).unwrap()));
    }
    if !exact {
        out.push("greedy bound entries informational".to_string());
    }
    out
}

fn closure_entries(ledger: &BoundLedger) -> Vec<ConstantName> {
    let mut out = Vec::new();
    for (id, name) in [
        ("closure-k-pg", ConstantName::K),
        ("closure-delta-pg", ConstantName::Delta),
        ("positive-cone-k", ConstantName::K),
    ] {
        if let Some(e) = ledger.get(id) {
            if e.asserted && e.status == Status::Violated && !out.contains(&name) {
                out.push(name);
            }
        }
    }
    out
}

/// Generates, closes and searches the corpus for `basis`, then evaluates
/// the ledger. Failures are recorded in the report rather than returned.
pub fn run_verification<S: Scalar>(
    basis: &Basis,
    id: Option<&CatalogId>,
    spec: &CorpusSpec,
    opts: &VerifyOptions,
) -> RunReport<S> {
    let exact = id.is_some_and(|i| i.is_exact());
    let field = basis.space().field();
    let ctx = LedgerContext {
        p: basis.space().p(),
        field,
        exact,
        closed_projections: spec.closure.lemma41,
        closed_positive_cone: spec.closure.lemma32_real && !field.is_complex(),
    };
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        seed: spec.seed,
        config: spec.clone(),
        basis: BasisDescriptor::new(basis, id),
        corpus: CorpusStats::default(),
        estimates: Vec::new(),
        ledger: BoundLedger::default(),
        violations: Vec::new(),
        observations: Vec::new(),
        readings: READINGS.iter().map(|s| s.to_string()).collect(),
        errors: Vec::new(),
        evaluations: 0,
        rows: Vec::new(),
    };

    let corpus: Corpus<S> = match generate_corpus(basis, spec) {
        Ok(c) => c,
        Err(e) => {
            report.errors.push(stage_error("generate", &e));
            return report;
        }
    };
    report.corpus.id = corpus.id.clone();
    report.corpus.generated = corpus.len();
    let mut corpus = match close_corpus(basis, &corpus, spec) {
        Ok(c) => c,
        Err(e) => {
            report.errors.push(stage_error("closure", &e));
            corpus
        }
    };
    report.corpus.closure_added = corpus.len() - report.corpus.generated;

    let mut set: EstimateSet<S> = match estimate_with(basis, &corpus, opts.families, &opts.estimator) {
        Ok(s) => s,
        Err(e) => {
            report.errors.push(stage_error("estimate", &e));
            report.corpus.total = corpus.len();
            return report;
        }
    };
    let mut ledger = bound_ledger(&set.estimates, &ctx);

    for _ in 0..opts.closure_rounds {
        let targets = closure_entries(&ledger);
        if targets.is_empty() {
            break;
        }
        let mut candidates = Vec::new();
        for name in targets {
            if let Some(w) = set.get(name).and_then(|e| e.witness.as_ref()) {
                candidates.extend(covering_vectors(basis, w, spec.closure));
            }
        }
        let fresh = new_elements(basis, &corpus, candidates);
        if fresh.is_empty() {
            break;
        }
        let offset = corpus.len();
        let chunk = Corpus::new(corpus.id.clone(), fresh);
        match estimate_with(basis, &chunk, opts.families, &opts.estimator) {
            Ok(s) => set.merge(s, offset),
            Err(e) => {
                report.errors.push(stage_error("closure round", &e));
                break;
            }
        }
        corpus.elements.extend(chunk.elements);
        report.corpus.round_added += chunk_len(&corpus, offset);
        report.corpus.closure_rounds += 1;
        ledger = bound_ledger(&set.estimates, &ctx);
    }

    report.corpus.total = corpus.len();
    report.observations = observations(&set.estimates, exact);
    report.evaluations = set.evaluations;
    report.violations = set.violations;
    report.rows = set.rows;
    report.estimates = set.estimates;
    report.ledger = ledger;
    report
}

fn chunk_len<S>(corpus: &Corpus<S>, offset: usize) -> usize {
    corpus.elements.len() - offset
}

/// Reports for a list of bases, each under its own field.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogReport {
    pub schema_version: u32,
    pub seed: u64,
    pub passed: bool,
    pub runs: Vec<Value>,
    /// `(label, rows csv, estimates csv)` per run.
    #[serde(skip)]
    pub tables: Vec<(String, String, String)>,
}

/// Runs every `(id, field)` pair, real or complex as the field requires.
pub fn run_catalog(bases: &[(CatalogId, Field)], spec: &CorpusSpec, opts: &VerifyOptions) -> Result<CatalogReport> {
    let mut runs = Vec::new();
    let mut tables = Vec::new();
    let mut passed = true;
    for (id, field) in bases {
        let basis = make_basis(id, *field)?;
        let label = id.to_string().replace([':', ','], "_");
        let value = if field.is_complex() {
            let r = run_verification::<Complex64>(&basis, Some(id), spec, opts);
            passed &= r.passed();
            tables.push((label, r.rows_csv(), r.estimates_csv()));
            to_value(&r)?
        } else {
            let r = run_verification::<f64>(&basis, Some(id), spec, opts);
            passed &= r.passed();
            tables.push((label, r.rows_csv(), r.estimates_csv()));
            to_value(&r)?
        };
        runs.push(value);
    }
    Ok(CatalogReport {
        schema_version: SCHEMA_VERSION,
        seed: spec.seed,
        passed,
        runs,
        tables,
    })
}

pub fn to_value<T: Serialize>(t: &T) -> Result<Value> {
    serde_json::to_value(t).map_err(|source| Error::Json {
        context: "serialising report".into(),
        source,
    })
}

/// A field that differs between two reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Difference {
    pub path: String,
    pub left: Value,
    pub right: Value,
}

/// Fields of two reports that differ, numbers compared with [`DIFF_TOL`].
pub fn compare_reports(a: &Value, b: &Value) -> Result<Vec<Difference>> {
    let va = a.get("schemaVersion");
    let vb = b.get("schemaVersion");
    if va.is_none() || va != vb {
        return Err(Error::Schema(format!(
            "schema versions differ or are missing: {} vs {}",
            va.map_or("none".into(), |v| v.to_string()),
            vb.map_or("none".into(), |v| v.to_string())
        )));
    }
    let mut out = Vec::new();
    diff(String::new(), a, b, &mut out);
    Ok(out)
}

fn diff(path: String, a: &Value, b: &Value, out: &mut Vec<Difference>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            let scale = x.abs().max(y.abs()).max(1.0);
            if !((x - y).abs() <= DIFF_TOL * scale) {
                out.push(Difference {
                    path,
                    left: a.clone(),
                    right: b.clone(),
                });
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            let keys: BTreeMap<&String, ()> = x.keys().chain(y.keys()).map(|k| (k, ())).collect();
            for k in keys.keys() {
                let p = format!("{path}/{k}");
                match (x.get(*k), y.get(*k)) {
                    (Some(l), Some(r)) => diff(p, l, r, out),
                    (l, r) => out.push(Difference {
                        path: p,
                        left: l.cloned().unwrap_or(Value::Null),
                        right: r.cloned().unwrap_or(Value::Null),
                    }),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (l, r)) in x.iter().zip(y).enumerate() {
                diff(format!("{path}/{i}"), l, r, out);
            }
        }
        _ => {
            if a != b {
                out.push(Difference {
                    path,
                    left: a.clone(),
                    right: b.clone(),
                });
            }
        }
    }
}
