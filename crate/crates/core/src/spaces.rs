//! Finite-dimensional p-Banach spaces: quasi-norm evaluation, the geometry
//! constants `A_p`, `B_p`, and checks of the p-triangle inequality and the
//! convexity lemma for linear combinations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::sets::IndexSet;
use crate::{Error, Result};

/// Values below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;
/// Slack allowed on every asserted inequality.
pub const SLACK_TOL: f64 = 1e-9;
/// Largest collection accepted by [`verify_convexity_lemma`].
pub const MAX_LEMMA_TERMS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Field {
    Real,
    #[serde(rename_all = "camelCase")]
    Complex { net_order: usize },
}

impl Field {
    pub fn is_complex(self) -> bool {
        matches!(self, Field::Complex { .. })
    }

    /// Size of the sign family searched over: 2 for reals, the net order
    /// for complex scalars.
    pub fn sign_count(self) -> usize {
        match self {
            Field::Real => 2,
            Field::Complex { net_order } => net_order,
        }
    }
}

/// Concrete quasi-norm families.
///
/// `WeightedLq(f) = (Σ w_j |f_j|^q)^{1/q}` and
/// `MatrixInduced(f) = (Σ |(M f)_j|^q)^{1/q}` with `M` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum NormSpec {
    WeightedLq { q: f64, weights: Vec<f64> },
    MatrixInduced { q: f64, matrix: Vec<f64> },
}

impl NormSpec {
    pub fn lq(q: f64, dim: usize) -> Self {
        NormSpec::WeightedLq {
            q,
            weights: vec![1.0; dim],
        }
    }

    pub fn q(&self) -> f64 {
        match self {
            NormSpec::WeightedLq { q, .. } | NormSpec::MatrixInduced { q, .. } => *q,
        }
    }

    /// True for norms that act coordinatewise (weighted `ℓ_q`).
    pub fn is_coordinate(&self) -> bool {
        matches!(self, NormSpec::WeightedLq { .. })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let q = self.q();
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::input(format!("norm exponent q must be > 0, got {q}")));
        }
        match self {
            NormSpec::WeightedLq { weights, .. } => {
                if weights.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: weights.len(),
                    });
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    return Err(Error::input(format!("norm weights must be positive, got {w}")));
                }
            }
            NormSpec::MatrixInduced { matrix, .. } => {
                if matrix.len() != dim * dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim * dim,
                        got: matrix.len(),
                    });
                }
                let m = DMatrix::from_row_slice(dim, dim, matrix);
                let cond = condition_number(&m);
                if !(cond.is_finite() && cond <= 1e12) {
                    return Err(Error::input(format!(
                        "norm matrix is singular or ill-conditioned (condition {cond:e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// 2-norm condition number via singular values; infinite when singular.
pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Space {
    dim: usize,
    p: f64,
    field: Field,
    norm: NormSpec,
}

impl Space {
    /// Builds a space whose geometry exponent is `min(q, 1)`.
    pub fn new(dim: usize, field: Field, norm: NormSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dimension must be at least 1"));
        }
        if dim > crate::sets::MAX_DIM {
            return Err(Error::input(format!(
                "dimension {dim} exceeds the supported maximum {}",
                crate::sets::MAX_DIM
            )));
        }
        if let Field::Complex { net_order } = field {
            if net_order < 4 {
                return Err(Error::input(format!(
                    "complex sign net order must be at least 4, got {net_order}"
                )));
            }
        }
        norm.validate(dim)?;
        let p = norm.q().min(1.0);
        Ok(Space {
            dim,
            p,
            field,
            norm,
        })
    }

    /// Overrides the geometry exponent.
    pub fn with_p(mut self, p: f64) -> Result<Self> {
        check_p(p)?;
        self.p = p;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn norm_spec(&self) -> &NormSpec {
        &self.norm
    }

    pub fn geometry(&self) -> GeometryConstants {
        geometry_constants(self.p, self.field).expect("p validated at construction")
    }

    /// Quasi-norm without the dimension check; callers guarantee length.
    #[inline]
    pub fn norm<S: Scalar>(&self, f: &[S]) -> f64 {
        debug_assert_eq!(f.len(), self.dim);
        match &self.norm {
            NormSpec::WeightedLq { q, weights } => weighted_lq(f.iter().copied(), weights, *q),
            NormSpec::MatrixInduced { q, matrix } => {
                let n = self.dim;
                let mut acc = 0.0;
                for i in 0..n {
                    let row = &matrix[i * n..(i + 1) * n];
                    let mut y = S::zero();
                    for (m, &x) in row.iter().zip(f) {
                        if *m != 0.0 {
                            y += x.scale(*m);
                        }
                    }
                    acc += power_term(y, *q);
                }
                finish(acc, *q)
            }
        }
    }

    pub fn check_dim<S>(&self, f: &[S]) -> Result<()> {
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.len(),
            });
        }
        Ok(())
    }
}

#[inline]
fn power_term<S: Scalar>(x: S, q: f64) -> f64 {
    if q == 2.0 {
        x.modulus_sq()
    } else if q == 1.0 {
        x.modulus()
    } else {
        let r = x.modulus();
        if r == 0.0 {
            0.0
        } else {
            r.powf(q)
        }
    }
}

#[inline]
fn finish(acc: f64, q: f64) -> f64 {
    if q == 1.0 {
        acc
    } else if q == 2.0 {
        acc.sqrt()
    } else {
        acc.powf(1.0 / q)
    }
}

#[inline]
fn weighted_lq<S: Scalar>(f: impl Iterator<Item = S>, w: &[f64], q: f64) -> f64 {
    let acc: f64 = f.zip(w).map(|(x, &w)| w * power_term(x, q)).sum();
    finish(acc, q)
}

/// `‖f‖` with a dimension check.
pub fn eval_norm<S: Scalar>(space: &Space, f: &[S]) -> Result<f64> {
    space.check_dim(f)?;
    Ok(space.norm(f))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub a_p: f64,
    pub b_p: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::input(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// `A_p = (2^p - 1)^{-1/p}`; `B_p = 2^{1/p} A_p` (real) or `4^{1/p} A_p`
/// (complex).
pub fn geometry_constants(p: f64, field: Field) -> Result<GeometryConstants> {
    check_p(p)?;
    let a_p = (2f64.powf(p) - 1.0).powf(-1.0 / p);
    let base: f64 = if field.is_complex() { 4.0 } else { 2.0 };
    Ok(GeometryConstants {
        a_p,
        b_p: base.powf(1.0 / p) * a_p,
    })
}

/// Slack `‖f‖^p + ‖g‖^p − ‖f+g‖^p` of the p-triangle inequality.
pub fn check_p_triangle<S: Scalar>(space: &Space, f: &[S], g: &[S]) -> Result<f64> {
    space.check_dim(f)?;
    space.check_dim(g)?;
    let sum: Vec<S> = f.iter().zip(g).map(|(&a, &b)| a + b).collect();
    let p = space.p();
    Ok(space.norm(f).powf(p) + space.norm(g).powf(p) - space.norm(&sum).powf(p))
}

/// Both sides of the convexity lemma for `Σ a_j f_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityCheck {
    pub lhs: f64,
    /// `B_p · max|a_j| · max_{B ⊆ A} ‖Σ_{j∈B} f_j‖`
    pub rhs_b: f64,
    /// `A_p · max|a_j| · max_ε ‖Σ ε_j f_j‖`
    pub rhs_a: f64,
}

impl ConvexityCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs_b + tol && self.lhs <= self.rhs_a + tol
    }
}

/// Evaluates the convexity lemma by exhaustive search over subsets and
/// sign choices. For complex spaces the sign family is the configured net
/// together with the phase pattern of the coefficients themselves.
pub fn verify_convexity_lemma<S: Scalar>(
    space: &Space,
    vectors: &[Vec<S>],
    coeffs: &[S],
) -> Result<ConvexityCheck> {
    if vectors.len() != coeffs.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            got: coeffs.len(),
        });
    }
    if vectors.len() > MAX_LEMMA_TERMS {
        return Err(Error::Budget {
            needed: 1u64 << vectors.len().min(63),
            limit: 1u64 << MAX_LEMMA_TERMS,
        });
    }
    for v in vectors {
        space.check_dim(v)?;
    }
    let n = space.dim();
    let k = vectors.len();
    let geom = space.geometry();
    let max_coeff = coeffs.iter().map(|c| c.modulus()).fold(0.0, f64::max);

    let mut combo = vec![S::zero(); n];
    for (v, &a) in vectors.iter().zip(coeffs) {
        for (o, &x) in combo.iter_mut().zip(v) {
            *o += a * x;
        }
    }
    let lhs = space.norm(&combo);

    let mut best_subset = 0.0f64;
    let mut buf = vec![S::zero(); n];
    for b in IndexSet::all_subsets(k) {
        buf.iter_mut().for_each(|x| *x = S::zero());
        for j in b.iter() {
            for (o, &x) in buf.iter_mut().zip(&vectors[j]) {
                *o += x;
            }
        }
        best_subset = best_subset.max(space.norm(&buf));
    }

    let net = S::unit_net(space.field().sign_count());
    let mut best_sign = 0.0f64;
    let mut eval_signs = |signs: &[S], buf: &mut Vec<S>| {
        buf.iter_mut().for_each(|x| *x = S::zero());
        for (v, &e) in vectors.iter().zip(signs) {
            for (o, &x) in buf.iter_mut().zip(v) {
                *o += e * x;
            }
        }
        best_sign = best_sign.max(space.norm(buf));
    };
    for_each_sign_tuple(&net, k, |signs| eval_signs(signs, &mut buf));
    if S::IS_COMPLEX {
        let phases: Vec<S> = coeffs
            .iter()
            .map(|c| if c.modulus() > 0.0 { c.sign() } else { S::from_real(1.0) })
            .collect();
        eval_signs(&phases, &mut buf);
    }

    Ok(ConvexityCheck {
        lhs,
        rhs_b: geom.b_p * max_coeff * best_subset,
        rhs_a: geom.a_p * max_coeff * best_sign,
    })
}

/// Calls `visit` with every tuple in `net^k`, odometer order with the first
/// coordinate varying slowest.
pub fn for_each_sign_tuple<S: Scalar>(net: &[S], k: usize, mut visit: impl FnMut(&[S])) {
    let mut idx = vec![0usize; k];
    let mut tuple: Vec<S> = vec![net[0]; k];
    loop {
        visit(&tuple);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < net.len() {
                tuple[pos] = net[idx[pos]];
                break;
            }
            idx[pos] = 0;
            tuple[pos] = net[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn lq(q: f64, w: Vec<f64>) -> Space {
        Space::new(w.len(), Field::Real, NormSpec::WeightedLq { q, weights: w }).unwrap()
    }

    #[test]
    fn norm_examples() {
        let s = lq(2.0, vec![1.0; 4]);
        assert_eq!(eval_norm(&s, &[3.0, 4.0, 0.0, 0.0]).unwrap(), 5.0);
        let w = lq(1.0, vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(eval_norm(&w, &[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.125);
        let half = lq(0.5, vec![1.0, 1.0]);
        assert_relative_eq!(eval_norm(&half, &[1.0, 1.0]).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(half.p(), 0.5);
        assert!(matches!(
            eval_norm(&s, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn matrix_induced_norm() {
        let m = vec![1.0, 1.0, 0.0, 1.0];
        let s = Space::new(2, Field::Real, NormSpec::MatrixInduced { q: 1.0, matrix: m }).unwrap();
        assert_eq!(s.norm(&[1.0, -1.0]), 1.0);
        let bad = Space::new(
            2,
            Field::Real,
            NormSpec::MatrixInduced {
                q: 1.0,
                matrix: vec![1.0, 1.0, 1.0, 1.0],
            },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn invalid_spaces() {
        assert!(Space::new(0, Field::Real, NormSpec::lq(1.0, 0)).is_err());
        assert!(Space::new(2, Field::Real, NormSpec::lq(-1.0, 2)).is_err());
        assert!(Space::new(2, Field::Complex { net_order: 3 }, NormSpec::lq(1.0, 2)).is_err());
        let w = NormSpec::WeightedLq {
            q: 1.0,
            weights: vec![1.0, 0.0],
        };
        assert!(Space::new(2, Field::Real, w).is_err());
        let s = lq(2.0, vec![1.0; 2]);
        assert!(s.clone().with_p(0.0).is_err());
        assert_eq!(s.with_p(0.5).unwrap().p(), 0.5);
    }

    #[test]
    fn complex_norm_uses_modulus() {
        let s = Space::new(2, Field::Complex { net_order: 4 }, NormSpec::lq(2.0, 2)).unwrap();
        let f = [Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)];
        assert_relative_eq!(s.norm(&f), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn geometry_examples() {
        let g = geometry_constants(1.0, Field::Real).unwrap();
        assert_eq!((g.a_p, g.b_p), (1.0, 2.0));
        let g = geometry_constants(1.0, Field::Complex { net_order: 8 }).unwrap();
        assert_eq!((g.a_p, g.b_p), (1.0, 4.0));
        let g = geometry_constants(0.5, Field::Real).unwrap();
        let a = (2f64.sqrt() - 1.0).powi(-2);
        assert_relative_eq!(g.a_p, a, epsilon = 1e-12);
        assert_relative_eq!(g.a_p, 5.828427, epsilon = 1e-6);
        assert_relative_eq!(g.b_p, 23.313708, epsilon = 1e-6);
        assert!(geometry_constants(1.5, Field::Real).is_err());
        assert!(geometry_constants(0.0, Field::Real).is_err());
    }

    #[test]
    fn a_p_is_nonincreasing_on_grid() {
        let mut prev = f64::INFINITY;
        for k in 1..=10 {
            let p = k as f64 / 10.0;
            let a = geometry_constants(p, Field::Real).unwrap().a_p;
            assert!(a <= prev, "A_p increased at p = {p}");
            prev = a;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn p_triangle_examples() {
        let l1 = lq(1.0, vec![1.0; 2]);
        assert_eq!(check_p_triangle(&l1, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let l2 = lq(2.0, vec![1.0; 2]);
        assert_eq!(check_p_triangle(&l2, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        let lh = lq(0.5, vec![1.0; 2]);
        assert!(check_p_triangle(&lh, &[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn convexity_examples() {
        let l1 = lq(1.0, vec![1.0; 2]);
        let one = verify_convexity_lemma(&l1, &[vec![1.0, 2.0]], &[1.0]).unwrap();
        assert_eq!(one.lhs, 3.0);
        assert!(one.holds(1e-9));
        let zero = verify_convexity_lemma(&l1, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!((zero.lhs, zero.rhs_a, zero.rhs_b), (0.0, 0.0, 0.0));
        let pm = verify_convexity_lemma(&l1, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, -1.0]).unwrap();
        assert_eq!(pm.lhs, 2.0);
        assert_eq!(pm.rhs_a, 2.0);
        let too_many = vec![vec![1.0, 0.0]; 17];
        assert!(verify_convexity_lemma(&l1, &too_many, &[1.0; 17]).unwrap_err().is_budget());
    }

    #[test]
    fn sign_tuples_cover_product() {
        let mut seen = Vec::new();
        for_each_sign_tuple(&[1.0f64, -1.0], 2, |t| seen.push(t.to_vec()));
        assert_eq!(
            seen,
            vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]]
        );
        let mut count = 0;
        for_each_sign_tuple(&[1.0f64, -1.0], 0, |t| {
            assert!(t.is_empty());
            count += 1
        });
        assert_eq!(count, 1);
    }
}
