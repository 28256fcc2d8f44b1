//! Approximation errors: the best `m`-term error `σ_m`, the constant
//! coefficient errors `ρ_m` (signed) and `ϱ_m` (unsigned), and the best
//! projection error. Every value carries a witness candidate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, SignPattern};
use crate::budget::{Budget, Meter};
use crate::optimize::{coordinate_descent, DescentOptions};
use crate::scalar::Scalar;
use crate::sets::IndexSet;
use crate::spaces::{for_each_sign_tuple, Field, NormSpec};
use crate::tga::{greedy_sets_from_coeffs, threshold_from_coeffs, GreedyOrdering, GreedySetFamily};
use crate::{Error, Result};

/// Largest dimension accepted by the exhaustive searches.
pub const MAX_SEARCH_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    Exhaustive,
    GridRefine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SigmaSolver {
    /// Exact inner solvers where available, coordinate descent otherwise.
    #[default]
    Auto,
    /// Always use multistart coordinate descent.
    CoordinateDescent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SigmaOptions {
    pub solver: SigmaSolver,
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions {
            solver: SigmaSolver::Auto,
            starts: 8,
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0x5167_0001,
        }
    }
}

/// The approximant `Σ_{j∈set} coeffs[k] x_j`, `set` in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct ErrorWitness<S> {
    pub set: IndexSet,
    pub coeffs: Vec<S>,
    /// Sign pattern for the constant coefficient errors.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps: Option<SignPattern<S>>,
    /// Fixed coefficient modulus for the constant coefficient errors.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
}

impl<S: Scalar> ErrorWitness<S> {
    fn free(set: IndexSet, coeffs: Vec<S>) -> Self {
        ErrorWitness {
            set,
            coeffs,
            eps: None,
            alpha: None,
        }
    }

    pub fn candidate(&self, basis: &Basis) -> Vec<S> {
        basis.signed_indicator(self.set, &self.coeffs)
    }

    /// `‖f − candidate‖`.
    pub fn distance(&self, basis: &Basis, f: &[S]) -> f64 {
        let c = self.candidate(basis);
        let r: Vec<S> = f.iter().zip(&c).map(|(&a, &b)| a - b).collect();
        basis.norm(&r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct ErrorValue<S> {
    pub value: f64,
    pub witness: ErrorWitness<S>,
    pub method: Method,
    /// Set when the value is an infimum over a discretised sign family and
    /// may exceed the true infimum.
    #[serde(default)]
    pub upper_bound: bool,
    /// For upper bounds: `m (α r c₁)^p` with `r` the net covering radius,
    /// bounding `value^p − true^p`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub net_resolution: Option<f64>,
    #[serde(default)]
    pub evaluations: u64,
}

impl<S: Scalar> ErrorValue<S> {
    pub fn reevaluate(&self, basis: &Basis, f: &[S]) -> f64 {
        self.witness.distance(basis, f)
    }
}

/// Coefficients and scratch shared by all searches on one element.
pub(crate) struct Problem<'a, S: Scalar> {
    pub basis: &'a Basis,
    pub f: &'a [S],
    pub c: Vec<S>,
    pub norm_f: f64,
}

impl<'a, S: Scalar> Problem<'a, S> {
    pub fn new(basis: &'a Basis, f: &'a [S]) -> Result<Self> {
        let c = basis.coefficients(f)?;
        Ok(Problem {
            basis,
            f,
            c,
            norm_f: basis.norm(f),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `‖f − Σ_{j∈set} a_k x_j‖` using `buf` as scratch.
    #[inline]
    pub fn residual_norm(&self, set: IndexSet, a: &[S], buf: &mut Vec<S>) -> f64 {
        buf.clear();
        buf.extend_from_slice(self.f);
        for (j, &v) in set.iter().zip(a) {
            for (o, &x) in buf.iter_mut().zip(self.basis.column(j)) {
                if x != 0.0 {
                    *o -= v.scale(x);
                }
            }
        }
        self.basis.norm(buf)
    }

    pub fn projection_coeffs(&self, set: IndexSet) -> Vec<S> {
        set.iter().map(|j| self.c[j]).collect()
    }
}

fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut r: u64 = 1;
    for i in 0..k as u64 {
        r = r.saturating_mul(n as u64 - i) / (i + 1);
    }
    r
}

pub(crate) fn check_search_dim(basis: &Basis) -> Result<()> {
    if basis.dim() > MAX_SEARCH_DIM {
        return Err(Error::Budget {
            needed: 1u64 << basis.dim().min(63),
            limit: 1u64 << MAX_SEARCH_DIM,
        });
    }
    Ok(())
}

fn check_m(m: usize, dim: usize, min: usize) -> Result<()> {
    if m < min || m > dim {
        return Err(Error::input(format!("m = {m} outside {min}..={dim}")));
    }
    Ok(())
}

fn net_order(field: Field) -> usize {
    field.sign_count()
}

/// Covering radius of the `n`-th roots of unity on the unit circle.
pub fn net_covering_radius(n: usize) -> f64 {
    2.0 * (std::f64::consts::PI / (2.0 * n as f64)).sin()
}

/// `ρ_m` (`signed`) or `ϱ_m` by exhaustive enumeration of `|A| = m` and
/// sign tuples from the field's net. Ties keep the first candidate in
/// lexicographic set order, then odometer sign order.
pub(crate) fn constant_coefficient_error<S: Scalar>(
    pb: &Problem<S>,
    m: usize,
    signed: bool,
    meter: &Meter,
) -> Result<ErrorValue<S>> {
    let n = pb.dim();
    let alpha = threshold_from_coeffs(&pb.c, m);
    let net: Vec<S> = if signed {
        S::unit_net(net_order(pb.basis.space().field()))
    } else {
        vec![S::from_real(1.0)]
    };
    let count = binom(n, m).saturating_mul((net.len() as u64).saturating_pow(m as u32));
    meter.reserve(count)?;
    let mut buf = Vec::with_capacity(n);
    let mut coeffs = vec![S::zero(); m];
    let mut best: Option<(f64, IndexSet, Vec<S>)> = None;
    for set in IndexSet::full(n).subsets_of_size(m) {
        for_each_sign_tuple(&net, m, |eps| {
            for (o, &e) in coeffs.iter_mut().zip(eps) {
                *o = e.scale(alpha);
            }
            let v = pb.residual_norm(set, &coeffs, &mut buf);
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, set, eps.to_vec()));
            }
        });
    }
    meter.charge(count)?;
    let (value, set, eps) = best.expect("at least one candidate");
    let upper_bound = signed && S::IS_COMPLEX;
    let net_resolution = upper_bound.then(|| {
        let p = pb.basis.space().p();
        let r = net_covering_radius(net.len());
        m as f64 * (alpha * r * pb.basis.c1()).powf(p)
    });
    Ok(ErrorValue {
        value,
        witness: ErrorWitness {
            set,
            coeffs: eps.iter().map(|e| e.scale(alpha)).collect(),
            eps: Some(SignPattern {
                indices: set,
                values: eps,
            }),
            alpha: Some(alpha),
        },
        method: Method::Exhaustive,
        upper_bound,
        net_resolution,
        evaluations: count,
    })
}

/// `min_{|B| ≤ m} ‖f − P_B f‖`, sets visited by size then lexicographically.
pub(crate) fn projection_error<S: Scalar>(pb: &Problem<S>, m: usize, meter: &Meter) -> Result<ErrorValue<S>> {
    let n = pb.dim();
    let count: u64 = (0..=m).map(|k| binom(n, k)).sum();
    meter.reserve(count)?;
    let mut buf = Vec::with_capacity(n);
    let mut best: Option<(f64, IndexSet)> = None;
    for k in 0..=m {
        for set in IndexSet::full(n).subsets_of_size(k) {
            let a = pb.projection_coeffs(set);
            let v = pb.residual_norm(set, &a, &mut buf);
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, set));
            }
        }
    }
    meter.charge(count)?;
    let (value, set) = best.expect("B = ∅ is always a candidate");
    Ok(ErrorValue {
        value,
        witness: ErrorWitness::free(set, pb.projection_coeffs(set)),
        method: Method::Exhaustive,
        upper_bound: false,
        net_resolution: None,
        evaluations: count,
    })
}

/// Row operator `D` with `‖f‖` a function of `D f` applied coordinatewise:
/// `diag(√w)` for weighted `ℓ_2`, the identity for weighted `ℓ_q`, and `M`
/// for matrix-induced norms.
fn row_operator(basis: &Basis) -> DMatrix<f64> {
    let n = basis.dim();
    match basis.space().norm_spec() {
        NormSpec::WeightedLq { q, weights } => {
            if *q == 2.0 {
                DMatrix::from_diagonal(&DVector::from_iterator(n, weights.iter().map(|w| w.sqrt())))
            } else {
                DMatrix::identity(n, n)
            }
        }
        NormSpec::MatrixInduced { matrix, .. } => DMatrix::from_row_slice(n, n, matrix),
    }
}

fn columns_of(basis: &Basis, set: IndexSet) -> DMatrix<f64> {
    let n = basis.dim();
    let idx: Vec<usize> = set.iter().collect();
    DMatrix::from_fn(n, idx.len(), |i, k| basis.matrix()[(i, idx[k])])
}

/// Exact inner minimum for real scalars and `q ≤ 1`: the objective is
/// concave on every sign cell of the residual, so the minimum sits where
/// `|A|` independent residual rows vanish.
fn inner_vertex<S: Scalar>(pb: &Problem<S>, set: IndexSet, d: &DMatrix<f64>, buf: &mut Vec<S>) -> (f64, Vec<S>, u64) {
    let n = pb.dim();
    let k = set.len();
    let g = d * columns_of(pb.basis, set);
    let y = d * DVector::from_iterator(n, pb.f.iter().map(|v| v.re()));
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut best: Option<(f64, Vec<S>)> = None;
    let mut evals = 0;
    for rows in IndexSet::full(n).subsets_of_size(k) {
        let r: Vec<usize> = rows.iter().collect();
        let sub = DMatrix::from_fn(k, k, |i, j| g[(r[i], j)]);
        let rhs = DVector::from_iterator(k, r.iter().map(|&i| y[i]));
        let lu = sub.lu();
        if lu.determinant().abs() <= 1e-12 * scale.powi(k as i32) {
            continue;
        }
        let Some(sol) = lu.solve(&rhs) else { continue };
        let a: Vec<S> = sol.iter().map(|&v| S::from_real(v)).collect();
        let v = pb.residual_norm(set, &a, buf);
        evals += 1;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, a));
        }
    }
    let (v, a) = best.unwrap_or_else(|| {
        let a = pb.projection_coeffs(set);
        (pb.residual_norm(set, &a, buf), a)
    });
    (v, a, evals + 1)
}

/// Exact inner minimum for `q = 2`: weighted least squares, solved
/// separately for real and imaginary parts since the basis is real.
fn inner_least_squares<S: Scalar>(pb: &Problem<S>, set: IndexSet, d: &DMatrix<f64>, buf: &mut Vec<S>) -> (f64, Vec<S>, u64) {
    let n = pb.dim();
    let g = d * columns_of(pb.basis, set);
    let svd = g.svd(true, true);
    let solve = |part: &dyn Fn(S) -> f64| -> Vec<f64> {
        let y = d * DVector::from_iterator(n, pb.f.iter().map(|&v| part(v)));
        svd.solve(&y, 1e-13).map(|s| s.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; set.len()])
    };
    let re = solve(&|v: S| v.re());
    let a: Vec<S> = if S::IS_COMPLEX {
        let im = solve(&|v: S| v.im());
        re.iter().zip(&im).map(|(&r, &i)| S::from_parts(r, i)).collect()
    } else {
        re.iter().map(|&r| S::from_real(r)).collect()
    };
    let v = pb.residual_norm(set, &a, buf);
    let proj = pb.projection_coeffs(set);
    let vp = pb.residual_norm(set, &proj, buf);
    if vp < v {
        (vp, proj, 2)
    } else {
        (v, a, 2)
    }
}

/// Multistart coordinate descent from `P_A f` and seeded perturbations.
fn inner_descent<S: Scalar>(pb: &Problem<S>, set: IndexSet, opts: &SigmaOptions, buf: &mut Vec<S>) -> (f64, Vec<S>, u64) {
    let k = set.len();
    let rd = S::REAL_DIM;
    let start: Vec<S> = pb.projection_coeffs(set);
    let to_params = |a: &[S]| -> Vec<f64> {
        let mut x = Vec::with_capacity(k * rd);
        for v in a {
            x.push(v.re());
            if rd == 2 {
                x.push(v.im());
            }
        }
        x
    };
    let from_params = |x: &[f64]| -> Vec<S> {
        (0..k)
            .map(|j| if rd == 2 { S::from_parts(x[2 * j], x[2 * j + 1]) } else { S::from_real(x[j]) })
            .collect()
    };
    let x0 = to_params(&start);
    let spread = x0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ set.bits().wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut best = (pb.residual_norm(set, &start, buf), start.clone());
    let mut evals = 1u64;
    let descent = DescentOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        seed: opts.seed,
        ..DescentOptions::default()
    };
    let mut scratch = Vec::with_capacity(pb.dim());
    for s in 0..opts.starts.max(1) {
        let init: Vec<f64> = if s == 0 {
            x0.clone()
        } else {
            x0.iter().map(|v| v + spread * rng.gen_range(-1.0..1.0)).collect()
        };
        let r = coordinate_descent(
            |x| {
                let a = from_params(x);
                pb.residual_norm(set, &a, &mut scratch)
            },
            init,
            &descent,
        );
        evals += r.evaluations;
        if r.value < best.0 {
            best = (r.value, from_params(&r.x));
        }
    }
    (best.0, best.1, evals)
}

/// `σ_m` restricted to sets of size exactly `m` (smaller sets are covered
/// by zero coefficients), then lowered by any extra feasible candidates.
pub(crate) fn best_m_term_error<S: Scalar>(
    pb: &Problem<S>,
    m: usize,
    opts: &SigmaOptions,
    extras: &[&ErrorValue<S>],
    meter: &Meter,
) -> Result<ErrorValue<S>> {
    let n = pb.dim();
    let spec = pb.basis.space().norm_spec();
    let q = spec.q();
    let auto = opts.solver == SigmaSolver::Auto;
    let analytic = auto && pb.basis.is_diagonal() && spec.is_coordinate();
    let vertex = auto && !analytic && !S::IS_COMPLEX && q <= 1.0;
    let lsq = auto && !analytic && !vertex && q == 2.0;
    let method = if analytic || vertex || lsq {
        Method::Exhaustive
    } else {
        Method::GridRefine
    };
    let sets = binom(n, m);
    let per_set = if analytic || lsq {
        2
    } else if vertex {
        binom(n, m) + 1
    } else {
        1000
    };
    meter.reserve(sets.saturating_mul(per_set))?;
    let d = if vertex || lsq { Some(row_operator(pb.basis)) } else { None };
    let mut buf = Vec::with_capacity(n);
    let mut best: Option<(f64, IndexSet, Vec<S>)> = None;
    let mut evals = 0u64;
    for set in IndexSet::full(n).subsets_of_size(m) {
        let (v, a, e) = if m == n || m == 0 || analytic {
            let a = pb.projection_coeffs(set);
            (pb.residual_norm(set, &a, &mut buf), a, 1)
        } else if vertex {
            inner_vertex(pb, set, d.as_ref().unwrap(), &mut buf)
        } else if lsq {
            inner_least_squares(pb, set, d.as_ref().unwrap(), &mut buf)
        } else {
            inner_descent(pb, set, opts, &mut buf)
        };
        evals += e;
        meter.charge(e)?;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, set, a));
        }
    }
    let (mut value, set, a) = best.expect("at least one set");
    let mut witness = ErrorWitness::free(set, a);
    let mut method = method;
    for extra in extras {
        if extra.witness.set.len() <= m && extra.value < value {
            value = extra.value;
            witness = ErrorWitness::free(extra.witness.set, extra.witness.coeffs.clone());
            method = Method::Exhaustive;
        }
    }
    Ok(ErrorValue {
        value,
        witness,
        method,
        upper_bound: false,
        net_resolution: None,
        evaluations: evals,
    })
}

/// `σ_m(f) = inf{‖f − Σ_{j∈A} a_j x_j‖ : |A| ≤ m}`.
pub fn sigma_m<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<ErrorValue<S>> {
    sigma_m_with(basis, f, m, &SigmaOptions::default(), &Budget::from_env().meter())
}

pub fn sigma_m_with<S: Scalar>(
    basis: &Basis,
    f: &[S],
    m: usize,
    opts: &SigmaOptions,
    meter: &Meter,
) -> Result<ErrorValue<S>> {
    check_search_dim(basis)?;
    check_m(m, basis.dim(), 0)?;
    let pb = Problem::new(basis, f)?;
    let bpe = projection_error(&pb, m, meter)?;
    if m == 0 {
        return best_m_term_error(&pb, 0, opts, &[&bpe], meter);
    }
    let rho = constant_coefficient_error(&pb, m, true, meter)?;
    let varrho = constant_coefficient_error(&pb, m, false, meter)?;
    best_m_term_error(&pb, m, opts, &[&bpe, &rho, &varrho], meter)
}

/// `ρ_m(f)`: `α` is the `m`-th largest coefficient modulus, signs range
/// over the field's net.
pub fn rho_m<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<ErrorValue<S>> {
    rho_m_with(basis, f, m, &Budget::from_env().meter())
}

pub fn rho_m_with<S: Scalar>(basis: &Basis, f: &[S], m: usize, meter: &Meter) -> Result<ErrorValue<S>> {
    check_search_dim(basis)?;
    check_m(m, basis.dim(), 1)?;
    constant_coefficient_error(&Problem::new(basis, f)?, m, true, meter)
}

/// `ϱ_m(f)`: as `ρ_m` with `ε ≡ 1`.
pub fn varrho_m<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<ErrorValue<S>> {
    varrho_m_with(basis, f, m, &Budget::from_env().meter())
}

pub fn varrho_m_with<S: Scalar>(basis: &Basis, f: &[S], m: usize, meter: &Meter) -> Result<ErrorValue<S>> {
    check_search_dim(basis)?;
    check_m(m, basis.dim(), 1)?;
    constant_coefficient_error(&Problem::new(basis, f)?, m, false, meter)
}

/// `min{‖f − P_B f‖ : |B| ≤ m}`.
pub fn best_projection_error<S: Scalar>(basis: &Basis, f: &[S], m: usize) -> Result<ErrorValue<S>> {
    best_projection_error_with(basis, f, m, &Budget::from_env().meter())
}

pub fn best_projection_error_with<S: Scalar>(basis: &Basis, f: &[S], m: usize, meter: &Meter) -> Result<ErrorValue<S>> {
    check_search_dim(basis)?;
    check_m(m, basis.dim(), 0)?;
    projection_error(&Problem::new(basis, f)?, m, meter)
}

/// One row of an error profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct ProfileRow<S> {
    pub m: usize,
    pub greedy_sets: GreedySetFamily,
    /// `‖f − G_m f‖`.
    pub residual: f64,
    pub sigma: ErrorValue<S>,
    /// Absent for `m = 0`.
    pub rho: Option<ErrorValue<S>>,
    pub varrho: Option<ErrorValue<S>>,
    pub best_projection: ErrorValue<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "S: Scalar")]
pub struct ErrorProfile<S> {
    pub ordering: GreedyOrdering,
    pub norm: f64,
    pub rows: Vec<ProfileRow<S>>,
}

/// All errors for `m = 0..=dim`.
pub fn error_profile<S: Scalar>(basis: &Basis, f: &[S], opts: &SigmaOptions, meter: &Meter) -> Result<ErrorProfile<S>> {
    check_search_dim(basis)?;
    let pb = Problem::new(basis, f)?;
    Ok(ErrorProfile {
        ordering: GreedyOrdering::from_coeffs(&pb.c),
        norm: pb.norm_f,
        rows: profile_rows(&pb, opts, meter)?,
    })
}

pub(crate) fn profile_rows<S: Scalar>(pb: &Problem<S>, opts: &SigmaOptions, meter: &Meter) -> Result<Vec<ProfileRow<S>>> {
    let n = pb.dim();
    let ordering = GreedyOrdering::from_coeffs(&pb.c);
    let mut buf = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let g = ordering.prefix(m);
        let residual = pb.residual_norm(g, &pb.projection_coeffs(g), &mut buf);
        let bpe = projection_error(pb, m, meter)?;
        let (rho, varrho, sigma) = if m == 0 {
            (None, None, best_m_term_error(pb, 0, opts, &[&bpe], meter)?)
        } else {
            let rho = constant_coefficient_error(pb, m, true, meter)?;
            let varrho = constant_coefficient_error(pb, m, false, meter)?;
            let sigma = best_m_term_error(pb, m, opts, &[&bpe, &rho, &varrho], meter)?;
            (Some(rho), Some(varrho), sigma)
        };
        rows.push(ProfileRow {
            m,
            greedy_sets: greedy_sets_from_coeffs(&pb.c, m),
            residual,
            sigma,
            rho,
            varrho,
            best_projection: bpe,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::spaces::Space;
    use approx::assert_abs_diff_eq;

    fn canonical(q: f64, n: usize) -> Basis {
        build_basis(Space::new(n, Field::Real, NormSpec::lq(q, n)).unwrap(), DMatrix::identity(n, n)).unwrap()
    }

    fn summing(n: usize, q: f64) -> Basis {
        let x = DMatrix::from_fn(n, n, |i, j| if i <= j { 1.0 } else { 0.0 });
        build_basis(Space::new(n, Field::Real, NormSpec::lq(q, n)).unwrap(), x).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let b = canonical(2.0, 4);
        let f = [4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(sigma_m(&b, &f, 0).unwrap().value, 30f64.sqrt(), epsilon = 1e-12);
        let s = sigma_m(&b, &f, 2).unwrap();
        assert_abs_diff_eq!(s.value, 5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.witness.set.to_one_based(), vec![1, 2]);
        assert_abs_diff_eq!(s.reevaluate(&b, &f), s.value, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_m(&b, &f, 4).unwrap().value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rho_examples() {
        let b = canonical(2.0, 4);
        let f = [4.0, 3.0, 2.0, 1.0];
        let r = rho_m(&b, &f, 2).unwrap();
        assert_abs_diff_eq!(r.value, 6f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.witness.alpha, Some(3.0));
        assert_eq!(r.witness.set.to_one_based(), vec![1, 2]);
        assert_eq!(r.witness.eps.as_ref().unwrap().values, vec![1.0, 1.0]);
        assert_abs_diff_eq!(varrho_m(&b, &f, 2).unwrap().value, 6f64.sqrt(), epsilon = 1e-12);

        let ind = [1.0, 0.0, -1.0, 0.0];
        assert_abs_diff_eq!(rho_m(&b, &ind, 2).unwrap().value, 0.0, epsilon = 1e-15);
        let l1 = canonical(1.0, 2);
        assert_abs_diff_eq!(rho_m(&l1, &[1.0, 1.0], 2).unwrap().value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn signed_beats_unsigned() {
        let b = canonical(2.0, 2);
        let f = [-1.0, -1.0];
        assert_abs_diff_eq!(varrho_m(&b, &f, 1).unwrap().value, 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(rho_m(&b, &f, 1).unwrap().value, 1.0, epsilon = 1e-12);
        assert!(rho_m(&b, &f, 0).is_err());
    }

    #[test]
    fn projection_error_examples() {
        let b = summing(3, 1.0);
        let f = [1.0, 1.0, 1.0];
        let e = best_projection_error(&b, &f, 1).unwrap();
        assert_abs_diff_eq!(e.value, 0.0, epsilon = 1e-15);
        assert_eq!(e.witness.set.to_one_based(), vec![3]);
        assert_abs_diff_eq!(best_projection_error(&b, &f, 0).unwrap().value, 3.0, epsilon = 1e-15);
        let c = canonical(2.0, 4);
        let g = [0.5, -3.0, 1.0, 2.0];
        for m in 0..=4 {
            let s = sigma_m(&c, &g, m).unwrap().value;
            assert_abs_diff_eq!(best_projection_error(&c, &g, m).unwrap().value, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_solvers_agree_with_descent() {
        let opts_cd = SigmaOptions {
            solver: SigmaSolver::CoordinateDescent,
            ..SigmaOptions::default()
        };
        let f = [0.75, -0.5, 1.0, 0.25];
        for q in [1.0, 2.0] {
            let b = summing(4, q);
            for m in 0..=4 {
                let exact = sigma_m(&b, &f, m).unwrap();
                let cd = sigma_m_with(&b, &f, m, &opts_cd, &Meter::unlimited()).unwrap();
                assert!((exact.value - cd.value).abs() < 1e-6, "q={q} m={m}: {} vs {}", exact.value, cd.value);
                assert_abs_diff_eq!(exact.reevaluate(&b, &f), exact.value, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn concave_quasi_norm_uses_vertices() {
        let b = summing(3, 0.5);
        let f = [1.0, 0.3, 0.2];
        let s = sigma_m(&b, &f, 1).unwrap();
        assert_eq!(s.method, Method::Exhaustive);
        // A vertex solution zeroes one residual coordinate.
        let r: Vec<f64> = f.iter().zip(s.witness.candidate(&b)).map(|(a, c)| a - c).collect();
        assert!(r.iter().any(|v| v.abs() < 1e-12));
        let cd = sigma_m_with(
            &b,
            &f,
            1,
            &SigmaOptions {
                solver: SigmaSolver::CoordinateDescent,
                ..SigmaOptions::default()
            },
            &Meter::unlimited(),
        )
        .unwrap();
        assert!(s.value <= cd.value + 1e-9);
    }

    #[test]
    fn complex_rho_is_labelled_upper_bound() {
        use num_complex::Complex64;
        let space = Space::new(2, Field::Complex { net_order: 4 }, NormSpec::lq(2.0, 2)).unwrap();
        let b = build_basis(space, DMatrix::identity(2, 2)).unwrap();
        let f = [Complex64::new(0.0, 1.0), Complex64::new(0.5, 0.0)];
        let r = rho_m(&b, &f, 1).unwrap();
        assert!(r.upper_bound);
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-12);
        assert!(r.net_resolution.unwrap() > 0.0);
        assert!(!varrho_m(&b, &f, 1).unwrap().upper_bound);
    }

    #[test]
    fn budget_is_enforced() {
        let b = canonical(2.0, 4);
        let err = rho_m_with(&b, &[1.0; 4], 2, &Meter::new(5)).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn profile_rows_cover_all_m() {
        let b = canonical(2.0, 4);
        let p = error_profile(&b, &[4.0, 3.0, 2.0, 1.0], &SigmaOptions::default(), &Meter::unlimited()).unwrap();
        assert_eq!(p.rows.len(), 5);
        assert_abs_diff_eq!(p.rows[2].residual, 5f64.sqrt(), epsilon = 1e-12);
        assert!(p.rows[0].rho.is_none());
    }
}
