//! Built-in bases, corpus generation, and the closure operators that add
//! the vectors used in the padding and splitting arguments.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::{build_basis, support_of, Basis};
use crate::constants::{unimodular_sign, Corpus, Witness};
use crate::scalar::Scalar;
use crate::sets::IndexSet;
use crate::spaces::{for_each_sign_tuple, Field, NormSpec, Space, ZERO_TOL};
use crate::tga::{greedy_sets_from_coeffs, threshold_from_coeffs};
use crate::{Error, Result};

/// Largest corpus accepted.
pub const CORPUS_CAP: usize = 100_000;
/// Largest catalog dimension.
pub const MAX_CATALOG_DIM: usize = 16;
/// Grid enumeration covers every support while `levels^dim` stays below
/// this; otherwise supports are limited to [`GRID_SPARSE_SUPPORT`].
const GRID_FULL_LIMIT: usize = 5000;
const GRID_SPARSE_SUPPORT: usize = 3;
/// Strict-dominance factor for perturbed indicators and padding.
pub const TIE_BREAK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum CatalogId {
    Canonical { q: f64, n: usize },
    Weighted { q: f64, weights: Vec<f64> },
    Summing { n: usize },
    Perturbed { n: usize, off: f64, q: f64 },
}

impl CatalogId {
    pub fn dim(&self) -> usize {
        match self {
            CatalogId::Canonical { n, .. } | CatalogId::Summing { n } | CatalogId::Perturbed { n, .. } => *n,
            CatalogId::Weighted { weights, .. } => weights.len(),
        }
    }

    /// Bases whose constants are all exactly 1.
    pub fn is_exact(&self) -> bool {
        matches!(self, CatalogId::Canonical { .. })
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogId::Canonical { q, n } => write!(f, "canonical:{q}:{n}"),
            CatalogId::Weighted { q, weights } => {
                let w: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                write!(f, "weighted:{q}:{}:{}", weights.len(), w.join(","))
            }
            CatalogId::Summing { n } => write!(f, "summing:{n}"),
            CatalogId::Perturbed { n, off, q } => write!(f, "perturbed:{n}:{off}:{q}"),
        }
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::input(format!("invalid {what} '{s}' in basis id")))
}

impl FromStr for CatalogId {
    type Err = Error;

    /// `canonical:q:n`, `weighted:q:n:w1,...,wn`, `summing:n`,
    /// `perturbed:n:off[:q]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let id = match parts.as_slice() {
            ["canonical", q, n] => CatalogId::Canonical {
                q: parse_num(q, "q")?,
                n: parse_num(n, "dimension")?,
            },
            ["weighted", q, n, w] => {
                let weights: Vec<f64> = w.split(',').map(|x| parse_num(x, "weight")).collect::<Result<_>>()?;
                let n: usize = parse_num(n, "dimension")?;
                if weights.len() != n {
                    return Err(Error::input(format!("weighted basis: {} weights for dimension {n}", weights.len())));
                }
                CatalogId::Weighted {
                    q: parse_num(q, "q")?,
                    weights,
                }
            }
            ["summing", n] => CatalogId::Summing {
                n: parse_num(n, "dimension")?,
            },
            ["perturbed", n, off] => CatalogId::Perturbed {
                n: parse_num(n, "dimension")?,
                off: parse_num(off, "offset")?,
                q: 2.0,
            },
            ["perturbed", n, off, q] => CatalogId::Perturbed {
                n: parse_num(n, "dimension")?,
                off: parse_num(off, "offset")?,
                q: parse_num(q, "q")?,
            },
            _ => return Err(Error::input(format!("unknown basis id '{s}'"))),
        };
        let n = id.dim();
        if n == 0 || n > MAX_CATALOG_DIM {
            return Err(Error::input(format!("catalog dimension must lie in 1..={MAX_CATALOG_DIM}, got {n}")));
        }
        if let CatalogId::Perturbed { off, .. } = id {
            if !off.is_finite() {
                return Err(Error::input("perturbation must be finite"));
            }
        }
        Ok(id)
    }
}

impl Serialize for CatalogId {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CatalogId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn make_basis(id: &CatalogId, field: Field) -> Result<Basis> {
    let n = id.dim();
    let (norm, x) = match id {
        CatalogId::Canonical { q, .. } => (NormSpec::lq(*q, n), DMatrix::identity(n, n)),
        CatalogId::Weighted { q, weights } => (
            NormSpec::WeightedLq {
                q: *q,
                weights: weights.clone(),
            },
            DMatrix::identity(n, n),
        ),
        CatalogId::Summing { .. } => (
            NormSpec::lq(1.0, n),
            DMatrix::from_fn(n, n, |i, j| if i <= j { 1.0 } else { 0.0 }),
        ),
        CatalogId::Perturbed { off, q, .. } => (
            NormSpec::lq(*q, n),
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else if j == i + 1 {
                    *off
                } else {
                    0.0
                }
            }),
        ),
    };
    build_basis(Space::new(n, field, norm)?, x)
}

/// The bases of a full catalog run, with their fields.
pub fn default_catalog() -> Vec<(CatalogId, Field)> {
    let ids = [
        ("canonical:1:4", Field::Real),
        ("canonical:2:4", Field::Real),
        ("weighted:1:4:1,0.5,0.25,0.125", Field::Real),
        ("summing:4", Field::Real),
        ("perturbed:4:0.5", Field::Real),
        ("canonical:2:3", Field::Complex { net_order: 4 }),
    ];
    ids.iter()
        .map(|(s, f)| (s.parse().expect("built-in id"), *f))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GridSpec {
    pub enabled: bool,
    /// Real coefficient levels. For complex fields the nonzero moduli are
    /// combined with every net phase.
    pub levels: Vec<f64>,
    /// Most nonzero coefficients per vector; automatic when absent.
    pub max_support: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            enabled: true,
            levels: vec![0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0],
            max_support: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RandomSpec {
    pub count: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    /// Probability that a coefficient is zero.
    pub sparsity: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            count: 200,
            min_magnitude: 0.05,
            max_magnitude: 2.5,
            sparsity: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct StructuredSpec {
    pub indicators: bool,
    pub perturbed_indicators: bool,
    /// Largest set size used in perturbed indicators.
    pub max_set: usize,
}

impl Default for StructuredSpec {
    fn default() -> Self {
        StructuredSpec {
            indicators: true,
            perturbed_indicators: true,
            max_set: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ClosureFlags {
    pub lemma41: bool,
    pub lemma42: bool,
    pub lemma32_real: bool,
    pub thag_proof: bool,
}

impl Default for ClosureFlags {
    fn default() -> Self {
        ClosureFlags {
            lemma41: true,
            lemma42: true,
            lemma32_real: true,
            thag_proof: true,
        }
    }
}

impl ClosureFlags {
    pub fn none() -> Self {
        ClosureFlags {
            lemma41: false,
            lemma42: false,
            lemma32_real: false,
            thag_proof: false,
        }
    }

    pub fn any(self) -> bool {
        self.lemma41 || self.lemma42 || self.lemma32_real || self.thag_proof
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub grid: GridSpec,
    pub random: RandomSpec,
    pub structured: StructuredSpec,
    pub closure: ClosureFlags,
    /// Most vectors added by one closure pass.
    pub closure_additions: usize,
    /// Elements ranked per family when choosing what to close.
    pub closure_top: usize,
    pub cap: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 7,
            grid: GridSpec::default(),
            random: RandomSpec::default(),
            structured: StructuredSpec::default(),
            closure: ClosureFlags::default(),
            closure_additions: 300,
            closure_top: 40,
            cap: CORPUS_CAP,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let r = &self.random;
        if !(r.min_magnitude >= 0.0 && r.max_magnitude >= r.min_magnitude && r.max_magnitude.is_finite()) {
            return Err(Error::input("random magnitudes must satisfy 0 <= min <= max < inf"));
        }
        if !(0.0..1.0).contains(&r.sparsity) {
            return Err(Error::input("random sparsity must lie in [0, 1)"));
        }
        if self.grid.levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::input("grid levels must be finite"));
        }
        if self.cap > CORPUS_CAP {
            return Err(Error::input(format!("corpus cap {} exceeds {CORPUS_CAP}", self.cap)));
        }
        Ok(())
    }
}

/// Deduplicating collector of coefficient vectors in insertion order.
struct Collector<S> {
    seen: HashSet<Vec<u64>>,
    coeffs: Vec<Vec<S>>,
    cap: usize,
}

fn key<S: Scalar>(c: &[S]) -> Vec<u64> {
    // Normalise -0.0 so that it matches 0.0.
    c.iter()
        .flat_map(|v| [(v.re() + 0.0).to_bits(), (v.im() + 0.0).to_bits()])
        .collect()
}

impl<S: Scalar> Collector<S> {
    fn new(cap: usize) -> Self {
        Collector {
            seen: HashSet::new(),
            coeffs: Vec::new(),
            cap,
        }
    }

    fn seed_with(&mut self, existing: &[Vec<S>]) {
        for c in existing {
            self.seen.insert(key(c));
        }
    }

    fn push(&mut self, c: Vec<S>) -> Result<bool> {
        if c.iter().all(|v| v.modulus() <= ZERO_TOL) {
            return Ok(false);
        }
        if !self.seen.insert(key(&c)) {
            return Ok(false);
        }
        self.coeffs.push(c);
        if self.seen.len() > self.cap {
            return Err(Error::CorpusCap {
                size: self.seen.len(),
                cap: self.cap,
            });
        }
        Ok(true)
    }
}

fn scalar_levels<S: Scalar>(levels: &[f64], net: &[S]) -> Vec<S> {
    let mut out: Vec<S> = Vec::new();
    let mut push = |v: S| {
        if !out.contains(&v) {
            out.push(v);
        }
    };
    if S::IS_COMPLEX {
        push(S::zero());
        for l in levels {
            let r = l.abs();
            if r > 0.0 {
                for &w in net {
                    push(w.scale(r));
                }
            }
        }
    } else {
        for &l in levels {
            push(S::from_real(l + 0.0));
        }
    }
    out
}

fn grid_vectors<S: Scalar>(n: usize, levels: &[S], max_support: usize, out: &mut Collector<S>) -> Result<()> {
    fn rec<S: Scalar>(
        pos: usize,
        nonzero: usize,
        cur: &mut Vec<S>,
        levels: &[S],
        max_support: usize,
        out: &mut Collector<S>,
    ) -> Result<()> {
        if pos == cur.len() {
            out.push(cur.clone())?;
            return Ok(());
        }
        for &l in levels {
            let nz = nonzero + usize::from(l.modulus() > 0.0);
            if nz > max_support {
                continue;
            }
            cur[pos] = l;
            rec(pos + 1, nz, cur, levels, max_support, out)?;
        }
        cur[pos] = S::zero();
        Ok(())
    }
    let mut cur = vec![S::zero(); n];
    rec(0, 0, &mut cur, levels, max_support, out)
}

/// Builds the corpus described by `spec`: grid vectors, seeded random
/// vectors, indicators and perturbed indicators, in that order and without
/// duplicates. Elements are returned in ambient coordinates.
pub fn generate_corpus<S: Scalar>(basis: &Basis, spec: &CorpusSpec) -> Result<Corpus<S>> {
    spec.validate()?;
    let n = basis.dim();
    let net: Vec<S> = S::unit_net(basis.space().field().sign_count());
    let mut out = Collector::new(spec.cap);

    if spec.grid.enabled && !spec.grid.levels.is_empty() {
        let levels = scalar_levels(&spec.grid.levels, &net);
        let full = (levels.len() as f64).powi(n as i32) <= GRID_FULL_LIMIT as f64;
        let max_support = spec
            .grid
            .max_support
            .unwrap_or(if full { n } else { GRID_SPARSE_SUPPORT })
            .min(n);
        grid_vectors(n, &levels, max_support, &mut out)?;
    }

    let r = &spec.random;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..r.count {
        let c: Vec<S> = (0..n)
            .map(|_| {
                let zero = rng.gen::<f64>() < r.sparsity;
                let mag = if r.max_magnitude > r.min_magnitude {
                    rng.gen_range(r.min_magnitude..r.max_magnitude)
                } else {
                    r.min_magnitude
                };
                let phase = net[rng.gen_range(0..net.len())];
                if zero {
                    S::zero()
                } else {
                    phase.scale(mag)
                }
            })
            .collect();
        out.push(c)?;
    }

    if spec.structured.indicators {
        for set in IndexSet::all_subsets(n).skip(1) {
            for_each_sign_tuple(&net, set.len(), |eps| {
                let _ = out.push(scatter(n, set, eps));
            });
            if out.seen.len() > out.cap {
                return Err(Error::CorpusCap {
                    size: out.seen.len(),
                    cap: out.cap,
                });
            }
        }
    }

    if spec.structured.perturbed_indicators {
        perturbed_indicators(n, &net, spec.structured.max_set, &mut out)?;
    }

    let elements = out
        .coeffs
        .iter()
        .map(|c| basis.combine(c, IndexSet::full(n)))
        .collect();
    Ok(Corpus::new(corpus_id(basis, spec), elements))
}

fn corpus_id(basis: &Basis, spec: &CorpusSpec) -> String {
    format!("seed{}-dim{}", spec.seed, basis.dim())
}

/// Coefficient vector with `values` on `set` in ascending order.
fn scatter<S: Scalar>(n: usize, set: IndexSet, values: &[S]) -> Vec<S> {
    let mut c = vec![S::zero(); n];
    for (j, &v) in set.iter().zip(values) {
        c[j] = v;
    }
    c
}

/// `f + 1_{ε,A} + (1 + 1e-6) 1_{η,B}` with `f ∈ {0, ½ 1_C}`, `C` the rest.
fn perturbed_indicators<S: Scalar>(n: usize, net: &[S], max_set: usize, out: &mut Collector<S>) -> Result<()> {
    let full = IndexSet::full(n);
    for a in full.subsets() {
        if a.is_empty() || a.len() > max_set {
            continue;
        }
        for b in full.minus(a).subsets() {
            if b.len() < a.len() || b.len() > max_set {
                continue;
            }
            let rest = full.minus(a.union(b));
            let mut err = Ok(());
            for_each_sign_tuple(net, a.len(), |eps| {
                for_each_sign_tuple(net, b.len(), |eta| {
                    let mut c = scatter(n, a, eps);
                    for (j, &e) in b.iter().zip(eta) {
                        c[j] = e.scale(1.0 + TIE_BREAK);
                    }
                    if err.is_ok() {
                        err = out.push(c.clone()).map(|_| ());
                    }
                    if !rest.is_empty() && err.is_ok() {
                        for j in rest.iter() {
                            c[j] = S::from_real(0.5);
                        }
                        err = out.push(c).map(|_| ());
                    }
                });
            });
            err?;
        }
    }
    Ok(())
}

/// `h = F + t₀ 1_{ε,A₀}` for the split `F = P_S F + g`, `g = P_{Sᶜ} F`:
/// `A₀ = supp g ∪ {n₀}` with `n₀` the smallest index outside `supp F`,
/// `ε = sgn g` on `supp g` and `1` at `n₀`, and
/// `t₀ = 1 + max|g| + max|P_S F|`. `A₀` is then the only greedy set of its
/// size, with threshold `t₀`, and `h − P_{A₀} h = P_S F`. `None` when `F`
/// has full support.
pub fn padding<S: Scalar>(coeffs: &[S], set: IndexSet) -> Option<(Vec<S>, IndexSet, f64)> {
    let n = coeffs.len();
    let support = support_of(coeffs);
    let n0 = support.complement(n).min_index()?;
    let g_support = support.minus(set);
    let max_on = |s: IndexSet| s.iter().map(|j| coeffs[j].modulus()).fold(0.0f64, f64::max);
    let t0 = 1.0 + max_on(g_support) + max_on(set.intersection(support));
    let mut h: Vec<S> = coeffs.to_vec();
    for j in g_support.iter() {
        h[j] += unimodular_sign(coeffs[j]).scale(t0);
    }
    h[n0] = S::from_real(t0);
    let mut a0 = g_support;
    a0.insert(n0);
    Some((h, a0, t0))
}

/// Real field: with `F = f + g₁ − g₂`, `f = P_S F` and `g₁, g₂ ≥ 0`, the
/// vectors `f + g₁` and `−F`.
pub fn split_partners<S: Scalar>(coeffs: &[S], set: IndexSet) -> Vec<Vec<S>> {
    let mut plus: Vec<S> = coeffs.to_vec();
    for (j, v) in plus.iter_mut().enumerate() {
        if !set.contains(j) && v.re() < 0.0 {
            *v = S::zero();
        }
    }
    let neg: Vec<S> = coeffs.iter().map(|&v| -v).collect();
    vec![plus, neg]
}

/// `f + 1_{ε,A} + 1_{η,B}` and the same with `B` scaled by `1 + 1e-6`.
pub fn slc_tuples<S: Scalar>(f_coeffs: &[S], a: IndexSet, eps: &[S], b: IndexSet, eta: &[S]) -> Vec<Vec<S>> {
    let mut out = Vec::new();
    for scale in [1.0, 1.0 + TIE_BREAK] {
        let mut c = f_coeffs.to_vec();
        for (j, &e) in a.iter().zip(eps) {
            c[j] += e;
        }
        for (j, &e) in b.iter().zip(eta) {
            c[j] += e.scale(scale);
        }
        out.push(c);
    }
    out
}

/// `1_A + (1 + 1e-6) 1_{B₀∖A}` with `B₀` the first `|A|`-subset of `B`,
/// and the plain `1_B`.
pub fn democracy_tuples<S: Scalar>(n: usize, a: IndexSet, b: IndexSet) -> Vec<Vec<S>> {
    let one = S::from_real(1.0);
    let mut out = Vec::new();
    if let Some(b0) = b.subsets_of_size(a.len()).into_iter().next() {
        let mut c = vec![S::zero(); n];
        for j in a.iter() {
            c[j] = one;
        }
        for j in b0.minus(a).iter() {
            c[j] = S::from_real(1.0 + TIE_BREAK);
        }
        out.push(c);
    }
    out.push(scatter(n, b, &vec![one; b.len()]));
    out
}

/// `g = f − α 1_{B}` with `α` the threshold of the greedy set `A` and `B`
/// the first `|A|`-subset of `Aᶜ`.
pub fn thag_difference<S: Scalar>(coeffs: &[S], m: usize, a: IndexSet) -> Option<Vec<S>> {
    let n = coeffs.len();
    let alpha = threshold_from_coeffs(coeffs, m);
    let b = a.complement(n).subsets_of_size(m).into_iter().next()?;
    let mut g = coeffs.to_vec();
    for j in b.iter() {
        g[j] -= S::from_real(alpha);
    }
    Some(g)
}

/// Coefficient vectors that cover one estimator witness: the padding and
/// splitting partners of a projection witness, and the tuples of an SLC or
/// democracy witness.
pub fn covering_vectors<S: Scalar>(basis: &Basis, witness: &Witness<S>, flags: ClosureFlags) -> Vec<Vec<S>> {
    let n = basis.dim();
    let mut out = Vec::new();
    match witness {
        Witness::Projection { f, set } => {
            let c = basis.coeffs(f);
            if flags.lemma41 || flags.lemma42 {
                if let Some((h, _, _)) = padding(&c, *set) {
                    out.push(h);
                }
            }
            if flags.lemma32_real && !S::IS_COMPLEX {
                let parts = split_partners(&c, *set);
                for p in &parts {
                    if flags.lemma41 || flags.lemma42 {
                        if let Some((h, _, _)) = padding(p, *set) {
                            out.push(h);
                        }
                    }
                }
                out.extend(parts);
            }
        }
        Witness::Slc { f, a, b } if flags.lemma41 => {
            out.extend(slc_tuples(&basis.coeffs(f), a.indices, &a.values, b.indices, &b.values));
        }
        Witness::Democracy { a, b } if flags.lemma42 => {
            out.extend(democracy_tuples(n, a.indices, b.indices));
        }
        Witness::Greedy { f, m, set, .. } | Witness::Thag { f, m, set, .. } if flags.thag_proof => {
            if let Some(g) = thag_difference(&basis.coeffs(f), *m, *set) {
                out.push(g);
            }
        }
        _ => {}
    }
    out
}

/// Best projection ratio of one element: `(ratio, S)` for `K` and, over
/// the admissible sets, for `C₊`.
fn projection_witnesses<S: Scalar>(basis: &Basis, c: &[S]) -> ((f64, IndexSet), (f64, IndexSet)) {
    let n = c.len();
    let norm_f = basis.norm(&basis.combine(c, IndexSet::full(n)));
    let forced = IndexSet::from_indices((0..n).filter(|&j| !c[j].is_nonneg_real(ZERO_TOL)));
    let mut k = (0.0, IndexSet::EMPTY);
    let mut plus = (0.0, IndexSet::full(n));
    for set in IndexSet::all_subsets(n) {
        let v = basis.norm(&basis.combine(c, set)) / norm_f;
        if v > k.0 {
            k = (v, set);
        }
        if forced.is_subset(set) && v > plus.0 {
            plus = (v, set);
        }
    }
    (k, plus)
}

/// Largest `‖f + 1_{ε,A}‖ / ‖f + 1_{η,B}‖` for one element scaled to unit
/// largest coefficient.
fn slc_witness<S: Scalar>(basis: &Basis, c: &[S], net: &[S]) -> Option<(f64, Vec<S>, IndexSet, Vec<S>, IndexSet, Vec<S>)> {
    let n = c.len();
    let top = c.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
    if top <= ZERO_TOL {
        return None;
    }
    let g: Vec<S> = c.iter().map(|v| v.scale(1.0 / top)).collect();
    let free = support_of(&g).complement(n);
    let mut hi: Vec<Option<(f64, Vec<S>)>> = vec![None; 1 << n];
    let mut lo: Vec<Option<(f64, Vec<S>)>> = vec![None; 1 << n];
    for u in free.subsets() {
        for_each_sign_tuple(net, u.len(), |eps| {
            let mut h = g.clone();
            for (j, &e) in u.iter().zip(eps) {
                h[j] += e;
            }
            let v = basis.norm(&basis.combine(&h, IndexSet::full(n)));
            let k = u.bits() as usize;
            if hi[k].as_ref().is_none_or(|x| v > x.0) {
                hi[k] = Some((v, eps.to_vec()));
            }
            if lo[k].as_ref().is_none_or(|x| v < x.0) {
                lo[k] = Some((v, eps.to_vec()));
            }
        });
    }
    let mut best = None;
    let mut best_r = 0.0;
    for a in free.subsets() {
        let Some((h, ea)) = &hi[a.bits() as usize] else { continue };
        for b in free.minus(a).subsets() {
            if b.len() < a.len() {
                continue;
            }
            let Some((d, eb)) = &lo[b.bits() as usize] else { continue };
            if *d > ZERO_TOL && h / d > best_r {
                best_r = h / d;
                best = Some((best_r, g.clone(), a, ea.clone(), b, eb.clone()));
            }
        }
    }
    best
}

fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Appends the closure vectors for the highest-ranked elements of each
/// family, in a fixed order, until `spec.closure_additions` new vectors
/// have been added. Returns the enlarged corpus.
pub fn close_corpus<S: Scalar>(basis: &Basis, corpus: &Corpus<S>, spec: &CorpusSpec) -> Result<Corpus<S>> {
    let flags = spec.closure;
    if corpus.is_empty() || !flags.any() {
        return Ok(corpus.clone());
    }
    let n = basis.dim();
    let net: Vec<S> = S::unit_net(basis.space().field().sign_count());
    let coeffs: Vec<Vec<S>> = corpus.elements.iter().map(|f| basis.coeffs(f)).collect();
    let mut out = Collector::new(spec.cap);
    out.seed_with(&coeffs);
    let budget = spec.closure_additions;
    let mut added = 0usize;
    let mut add = |out: &mut Collector<S>, c: Vec<S>| -> Result<()> {
        if added < budget && out.push(c)? {
            added += 1;
        }
        Ok(())
    };

    let proj: Vec<_> = coeffs.iter().map(|c| projection_witnesses(basis, c)).collect();
    let k_scores: Vec<f64> = proj.iter().map(|p| p.0 .0).collect();
    let plus_scores: Vec<f64> = proj.iter().map(|p| p.1 .0).collect();
    let top = spec.closure_top;

    if flags.lemma41 || flags.lemma32_real {
        for i in top_indices(&k_scores, top) {
            let set = proj[i].0 .1;
            if flags.lemma41 {
                if let Some((h, _, _)) = padding(&coeffs[i], set) {
                    add(&mut out, h)?;
                }
            }
            if flags.lemma32_real && !S::IS_COMPLEX {
                for p in split_partners(&coeffs[i], set) {
                    add(&mut out, p)?;
                }
            }
        }
    }
    if flags.lemma42 {
        for i in top_indices(&plus_scores, top) {
            if let Some((h, _, _)) = padding(&coeffs[i], proj[i].1 .1) {
                add(&mut out, h)?;
            }
        }
    }
    if flags.lemma41 {
        let slc: Vec<_> = coeffs.iter().map(|c| slc_witness(basis, c, &net)).collect();
        let scores: Vec<f64> = slc.iter().map(|w| w.as_ref().map_or(0.0, |w| w.0)).collect();
        for i in top_indices(&scores, top) {
            if let Some((_, g, a, ea, b, eb)) = &slc[i] {
                for h in slc_tuples(g, *a, ea, *b, eb) {
                    add(&mut out, h)?;
                }
            }
        }
    }
    if flags.lemma42 {
        let full = IndexSet::full(n);
        for a in full.subsets().filter(|s| !s.is_empty()) {
            for b in full.subsets_of_size(a.len() + 1).into_iter().take(1) {
                for h in democracy_tuples::<S>(n, a, b) {
                    add(&mut out, h)?;
                }
            }
        }
    }
    if flags.thag_proof {
        let mut scores = Vec::with_capacity(coeffs.len());
        let mut best_sets = Vec::with_capacity(coeffs.len());
        for (c, f) in coeffs.iter().zip(&corpus.elements) {
            let norm_f = basis.norm(f);
            let mut best = (0.0, 0, IndexSet::EMPTY);
            for m in 1..n {
                for set in greedy_sets_from_coeffs(c, m).sets {
                    let r: Vec<S> = c.iter().enumerate().map(|(j, &v)| if set.contains(j) { S::zero() } else { v }).collect();
                    let v = basis.norm(&basis.combine(&r, IndexSet::full(n))) / norm_f;
                    if v > best.0 {
                        best = (v, m, set);
                    }
                }
            }
            scores.push(best.0);
            best_sets.push((best.1, best.2));
        }
        for i in top_indices(&scores, top) {
            let (m, set) = best_sets[i];
            if m == 0 {
                continue;
            }
            if let Some(g) = thag_difference(&coeffs[i], m, set) {
                add(&mut out, g)?;
            }
        }
    }

    let mut elements = corpus.elements.clone();
    elements.extend(out.coeffs.iter().map(|c| basis.combine(c, IndexSet::full(n))));
    Ok(Corpus::new(corpus.id.clone(), elements))
}

/// Coefficient vectors → ambient elements not already present in `corpus`.
pub fn new_elements<S: Scalar>(basis: &Basis, corpus: &Corpus<S>, candidates: Vec<Vec<S>>) -> Vec<Vec<S>> {
    let n = basis.dim();
    let mut seen: HashSet<Vec<u64>> = corpus.elements.iter().map(|f| key(f)).collect();
    let mut out = Vec::new();
    for c in candidates {
        if c.iter().all(|v| v.modulus() <= ZERO_TOL) {
            continue;
        }
        let f = basis.combine(&c, IndexSet::full(n));
        if seen.insert(key(&f)) {
            out.push(f);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tga::greedy_sets;

    fn real_spec() -> CorpusSpec {
        CorpusSpec {
            random: RandomSpec {
                count: 0,
                ..RandomSpec::default()
            },
            structured: StructuredSpec {
                indicators: false,
                perturbed_indicators: false,
                ..StructuredSpec::default()
            },
            closure: ClosureFlags::none(),
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn ids_round_trip() {
        for s in ["canonical:2:4", "weighted:1:4:1,0.5,0.25,0.125", "summing:3", "perturbed:4:0.5:2"] {
            let id: CatalogId = s.parse().unwrap();
            assert_eq!(id.to_string(), s);
        }
        assert_eq!("perturbed:4:0.5".parse::<CatalogId>().unwrap().to_string(), "perturbed:4:0.5:2");
        assert!("canonical:2".parse::<CatalogId>().is_err());
        assert!("weighted:1:3:1,2".parse::<CatalogId>().is_err());
        assert!("summing:17".parse::<CatalogId>().is_err());
        assert!("bogus:1".parse::<CatalogId>().is_err());
    }

    #[test]
    fn summing_dual_rows_are_differences() {
        let b = make_basis(&CatalogId::Summing { n: 3 }, Field::Real).unwrap();
        let d = b.dual();
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(0, 1)], -1.0);
        assert_eq!(d[(1, 1)], 1.0);
        assert_eq!(d[(1, 2)], -1.0);
        assert_eq!(d[(2, 2)], 1.0);
    }

    #[test]
    fn grid_counts() {
        let b = make_basis(&CatalogId::Canonical { q: 2.0, n: 2 }, Field::Real).unwrap();
        let spec = CorpusSpec {
            grid: GridSpec {
                levels: vec![0.0, 1.0, -1.0],
                ..GridSpec::default()
            },
            ..real_spec()
        };
        assert_eq!(generate_corpus::<f64>(&b, &spec).unwrap().len(), 8);
        let b4 = make_basis(&CatalogId::Canonical { q: 2.0, n: 4 }, Field::Real).unwrap();
        assert_eq!(generate_corpus::<f64>(&b4, &real_spec()).unwrap().len(), 7usize.pow(4) - 1);
    }

    #[test]
    fn indicator_family() {
        let b = make_basis(&CatalogId::Canonical { q: 2.0, n: 2 }, Field::Real).unwrap();
        let spec = CorpusSpec {
            grid: GridSpec {
                enabled: false,
                ..GridSpec::default()
            },
            structured: StructuredSpec {
                indicators: true,
                perturbed_indicators: false,
                ..StructuredSpec::default()
            },
            ..real_spec()
        };
        let c = generate_corpus::<f64>(&b, &spec).unwrap();
        assert_eq!(c.len(), 8);
        for v in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            assert!(c.elements.contains(&v.to_vec()), "{v:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let b = make_basis(&CatalogId::Summing { n: 3 }, Field::Real).unwrap();
        let spec = CorpusSpec::default();
        let a = generate_corpus::<f64>(&b, &spec).unwrap();
        let c = generate_corpus::<f64>(&b, &spec).unwrap();
        assert_eq!(a, c);
        let other = generate_corpus::<f64>(&b, &CorpusSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn cap_is_enforced() {
        let b = make_basis(&CatalogId::Canonical { q: 2.0, n: 4 }, Field::Real).unwrap();
        let spec = CorpusSpec {
            cap: 100,
            ..real_spec()
        };
        assert!(matches!(generate_corpus::<f64>(&b, &spec), Err(Error::CorpusCap { .. })));
    }

    #[test]
    fn padding_example() {
        // f = e1, g = e2 in dimension 3.
        let (h, a0, t0) = padding(&[1.0, 1.0, 0.0], IndexSet::singleton(0)).unwrap();
        assert_eq!(t0, 3.0);
        assert_eq!(h, vec![1.0, 4.0, 3.0]);
        assert_eq!(a0.to_one_based(), vec![2, 3]);
        assert!(padding(&[1.0, 1.0], IndexSet::singleton(0)).is_none());
    }

    #[test]
    fn padding_set_is_unique_greedy_set() {
        let b = make_basis(&CatalogId::Summing { n: 4 }, Field::Real).unwrap();
        let c = [0.5, -2.0, 0.0, 1.0];
        for set in IndexSet::all_subsets(4) {
            let (h, a0, t0) = padding(&c, set).unwrap();
            let f = b.combine(&h, IndexSet::full(4));
            let fam = greedy_sets(&b, &f, a0.len()).unwrap();
            assert_eq!(fam.sets, vec![a0]);
            assert!((crate::tga::mth_threshold(&b, &f, a0.len()).unwrap() - t0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_example() {
        let parts = split_partners(&[0.0, 1.0, -2.0], IndexSet::singleton(0));
        assert_eq!(parts[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(parts[1], vec![0.0, -1.0, 2.0]);
    }

    #[test]
    fn closure_of_empty_corpus_is_empty() {
        let b = make_basis(&CatalogId::Summing { n: 3 }, Field::Real).unwrap();
        let c = close_corpus(&b, &Corpus::<f64>::new("e", vec![]), &CorpusSpec::default()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn complex_grid_uses_net_phases() {
        let b = make_basis(&CatalogId::Canonical { q: 2.0, n: 2 }, Field::Complex { net_order: 4 }).unwrap();
        let spec = CorpusSpec {
            grid: GridSpec {
                levels: vec![0.0, 1.0, -1.0],
                ..GridSpec::default()
            },
            ..real_spec()
        };
        let c = generate_corpus::<num_complex::Complex64>(&b, &spec).unwrap();
        assert_eq!(c.len(), 24);
    }
}
