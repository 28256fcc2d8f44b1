//! Bases given by invertible matrices, their dual functionals, coefficient
//! extraction and signed indicator sums `1_{ε,A} = Σ_{j∈A} ε_j x_j`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{axpy, Scalar};
use crate::sets::IndexSet;
use crate::spaces::{condition_number, Space, ZERO_TOL};
use crate::{Error, Result};

/// Entrywise tolerance on `X* X = I`.
pub const BIORTHOGONALITY_TOL: f64 = 1e-10;
/// Largest accepted condition number of a basis matrix.
pub const MAX_CONDITION: f64 = 1e12;

const C2_PROBES: usize = 64;
const C2_SEED: u64 = 0xC2C2_0001;

#[derive(Clone, Debug)]
pub struct Basis {
    space: Space,
    x: DMatrix<f64>,
    dual: DMatrix<f64>,
    columns: Vec<Vec<f64>>,
    dual_rows: Vec<Vec<f64>>,
    c1: f64,
    c2_estimate: f64,
    diagonal: bool,
}

/// Builds the basis whose `j`-th vector is column `j` of `x`; the dual
/// functionals are the rows of `x^{-1}`.
pub fn build_basis(space: Space, x: DMatrix<f64>) -> Result<Basis> {
    check_square(&space, &x)?;
    let cond = condition_number(&x);
    if !(cond.is_finite() && cond <= MAX_CONDITION) {
        return Err(Error::Construction(format!(
            "basis matrix is singular or ill-conditioned (condition {cond:e})"
        )));
    }
    let dual = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Construction("basis matrix is not invertible".into()))?;
    Basis::with_dual(space, x, dual)
}

fn check_square(space: &Space, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::Construction(format!(
            "basis matrix must be square, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if x.nrows() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: x.nrows(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Construction("basis matrix has non-finite entries".into()));
    }
    Ok(())
}

impl Basis {
    /// Builds a basis from an explicit dual matrix, rejecting it unless
    /// `dual · x = I` entrywise within [`BIORTHOGONALITY_TOL`].
    pub fn with_dual(space: Space, x: DMatrix<f64>, dual: DMatrix<f64>) -> Result<Basis> {
        check_square(&space, &x)?;
        if dual.shape() != x.shape() {
            return Err(Error::Construction("dual matrix shape differs from basis".into()));
        }
        let err = biorthogonality_error(&x, &dual);
        if !(err < BIORTHOGONALITY_TOL) {
            return Err(Error::Construction(format!(
                "biorthogonality violated: max |X*X - I| = {err:e}"
            )));
        }
        let n = space.dim();
        let columns: Vec<Vec<f64>> = (0..n).map(|j| x.column(j).iter().copied().collect()).collect();
        let dual_rows: Vec<Vec<f64>> = (0..n).map(|i| dual.row(i).iter().copied().collect()).collect();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || x[(i, j)] == 0.0));
        let c1 = columns.iter().map(|c| space.norm(c)).fold(0.0, f64::max);
        let mut basis = Basis {
            space,
            x,
            dual,
            columns,
            dual_rows,
            c1,
            c2_estimate: 0.0,
            diagonal,
        };
        basis.c2_estimate = basis.estimate_c2();
        Ok(basis)
    }

    /// Same span and dual structure with every column scaled to unit norm.
    pub fn normalized(&self) -> Result<Basis> {
        let mut x = self.x.clone();
        for j in 0..self.dim() {
            let s = self.space.norm(&self.columns[j]);
            x.column_mut(j).scale_mut(1.0 / s);
        }
        build_basis(self.space.clone(), x)
    }

    // Dual quasi-norms have no closed form; this is a lower estimate of
    // sup_n ‖x_n^*‖ over a fixed probe set.
    fn estimate_c2(&self) -> f64 {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(C2_SEED);
        let mut probes: Vec<Vec<f64>> = self.columns.clone();
        probes.extend((0..n).map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        }));
        probes.extend((0..C2_PROBES).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()));
        let mut best = 0.0f64;
        for f in &probes {
            let nf = self.space.norm(f);
            if nf <= ZERO_TOL {
                continue;
            }
            let c = self.coeffs(f);
            let m = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
            best = best.max(m / nf);
        }
        best
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dual(&self) -> &DMatrix<f64> {
        &self.dual
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// `sup_n ‖x_n‖`, exact.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Empirical lower estimate of `sup_n ‖x_n^*‖`.
    pub fn c2_estimate(&self) -> f64 {
        self.c2_estimate
    }

    /// True when the matrix is diagonal, so coefficients are scaled
    /// coordinates.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn biorthogonality_error(&self) -> f64 {
        biorthogonality_error(&self.x, &self.dual)
    }

    #[inline]
    pub fn norm<S: Scalar>(&self, f: &[S]) -> f64 {
        self.space.norm(f)
    }

    /// `(x_n^*(f))_n` without a dimension check.
    #[inline]
    pub fn coeffs<S: Scalar>(&self, f: &[S]) -> Vec<S> {
        self.dual_rows
            .iter()
            .map(|row| {
                let mut acc = S::zero();
                for (&d, &v) in row.iter().zip(f) {
                    if d != 0.0 {
                        acc += v.scale(d);
                    }
                }
                acc
            })
            .collect()
    }

    /// `(x_n^*(f))_n`.
    pub fn coefficients<S: Scalar>(&self, f: &[S]) -> Result<Vec<S>> {
        self.space.check_dim(f)?;
        Ok(self.coeffs(f))
    }

    /// `Σ_{j∈A} c_j x_j`.
    #[inline]
    pub fn combine<S: Scalar>(&self, coeffs: &[S], set: IndexSet) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim()];
        for j in set.iter() {
            axpy(&mut out, coeffs[j], &self.columns[j]);
        }
        out
    }

    /// `Σ_j c_j x_j` over all indices.
    pub fn synthesize<S: Scalar>(&self, coeffs: &[S]) -> Result<Vec<S>> {
        self.space.check_dim(coeffs)?;
        Ok(self.combine(coeffs, IndexSet::full(self.dim())))
    }

    /// `1_{ε,A}`.
    pub fn indicator<S: Scalar>(&self, eps: &SignPattern<S>) -> Result<Vec<S>> {
        if let Some(i) = eps.indices.max_index() {
            if i >= self.dim() {
                return Err(Error::IndexOutOfRange {
                    index: i + 1,
                    dim: self.dim(),
                });
            }
        }
        Ok(self.signed_indicator(eps.indices, &eps.values))
    }

    /// `Σ_k values[k] x_{A_k}` with `A` traversed in ascending order.
    #[inline]
    pub fn signed_indicator<S: Scalar>(&self, set: IndexSet, values: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim()];
        for (j, &e) in set.iter().zip(values) {
            axpy(&mut out, e, &self.columns[j]);
        }
        out
    }

    /// `{n : |x_n^*(f)| > 1e-12}`.
    pub fn support<S: Scalar>(&self, f: &[S]) -> IndexSet {
        support_of(&self.coeffs(f))
    }
}

pub fn support_of<S: Scalar>(coeffs: &[S]) -> IndexSet {
    IndexSet::from_indices(
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.modulus() > ZERO_TOL)
            .map(|(i, _)| i),
    )
}

fn biorthogonality_error(x: &DMatrix<f64>, dual: &DMatrix<f64>) -> f64 {
    let prod = dual * x;
    let n = prod.nrows();
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = (prod[(i, j)] - target).abs();
            if d.is_nan() {
                return f64::INFINITY;
            }
            err = err.max(d);
        }
    }
    err
}

/// Unimodular values attached to an index set, stored in ascending index
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignPattern<S> {
    pub indices: IndexSet,
    pub values: Vec<S>,
}

impl<S: Scalar> SignPattern<S> {
    pub fn new(indices: IndexSet, values: Vec<S>) -> Result<Self> {
        if values.len() != indices.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| (v.modulus() - 1.0).abs() > 1e-12) {
            return Err(Error::input(format!("sign value {v:?} is not unimodular")));
        }
        Ok(SignPattern { indices, values })
    }

    pub(crate) fn new_unchecked(indices: IndexSet, values: Vec<S>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        SignPattern { indices, values }
    }

    /// `ε ≡ 1` on `indices`.
    pub fn ones(indices: IndexSet) -> Self {
        SignPattern {
            indices,
            values: vec![S::from_real(1.0); indices.len()],
        }
    }

    /// Every pattern on `indices` with values drawn from `net`.
    pub fn all(indices: IndexSet, net: &[S]) -> Vec<Self> {
        let mut out = Vec::new();
        crate::spaces::for_each_sign_tuple(net, indices.len(), |t| {
            out.push(SignPattern {
                indices,
                values: t.to_vec(),
            })
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{Field, NormSpec};

    fn space(q: f64, n: usize) -> Space {
        Space::new(n, Field::Real, NormSpec::lq(q, n)).unwrap()
    }

    fn summing(n: usize) -> Basis {
        let x = DMatrix::from_fn(n, n, |i, j| if i <= j { 1.0 } else { 0.0 });
        build_basis(space(1.0, n), x).unwrap()
    }

    #[test]
    fn canonical_dual_is_identity() {
        let b = build_basis(space(2.0, 3), DMatrix::identity(3, 3)).unwrap();
        assert_eq!(b.dual(), &DMatrix::<f64>::identity(3, 3));
        assert!(b.is_diagonal());
        assert_eq!(b.c1(), 1.0);
        assert_eq!(b.coefficients(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_scaling() {
        let b = build_basis(space(2.0, 2), DMatrix::from_diagonal_element(2, 2, 2.0)).unwrap();
        assert_eq!(b.dual()[(0, 0)], 0.5);
        assert_eq!(b.dual()[(1, 1)], 0.5);
        assert_eq!(b.coeffs(b.column(0)), vec![1.0, 0.0]);
    }

    #[test]
    fn summing_dual_rows_are_differences() {
        let b = summing(3);
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0]);
        assert!((b.dual() - expect).abs().max() < 1e-14);
        assert_eq!(b.coefficients(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(b.support(&[1.0, 1.0, 1.0]), IndexSet::singleton(2));
        assert!(!b.is_diagonal());
    }

    #[test]
    fn coefficient_of_basis_vector_is_unit() {
        let b = summing(4);
        let c = b.coeffs(b.column(1));
        assert_eq!(c, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn singular_and_corrupt_matrices_rejected() {
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(build_basis(space(1.0, 2), sing), Err(Error::Construction(_))));
        let bad_dual = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            Basis::with_dual(space(1.0, 2), DMatrix::identity(2, 2), bad_dual),
            Err(Error::Construction(_))
        ));
        assert!(build_basis(space(1.0, 3), DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn indicator_examples() {
        let b = build_basis(space(1.0, 4), DMatrix::identity(4, 4)).unwrap();
        let empty: Vec<f64> = b.indicator(&SignPattern::ones(IndexSet::EMPTY)).unwrap();
        assert_eq!(empty, vec![0.0; 4]);
        let a = IndexSet::from_indices([0, 2]);
        assert_eq!(b.indicator(&SignPattern::<f64>::ones(a)).unwrap(), vec![1.0, 0.0, 1.0, 0.0]);
        let pm = SignPattern::new(IndexSet::from_indices([0, 1]), vec![1.0, -1.0]).unwrap();
        let v = b.indicator(&pm).unwrap();
        assert_eq!(b.norm(&v), 2.0);
        assert_eq!(b.norm(&b.indicator(&SignPattern::<f64>::ones(pm.indices)).unwrap()), 2.0);
        let out = SignPattern::<f64>::ones(IndexSet::singleton(5));
        assert!(matches!(b.indicator(&out), Err(Error::IndexOutOfRange { .. })));
        assert!(SignPattern::new(IndexSet::singleton(0), vec![0.5]).is_err());
    }

    #[test]
    fn support_examples() {
        let b = build_basis(space(1.0, 3), DMatrix::identity(3, 3)).unwrap();
        assert_eq!(b.support(&[0.0, 0.0, 0.0]), IndexSet::EMPTY);
        assert_eq!(b.support(&[0.0, 5.0, 0.0]), IndexSet::singleton(1));
    }

    #[test]
    fn normalization_gives_unit_columns() {
        let w = Space::new(
            2,
            Field::Real,
            NormSpec::WeightedLq {
                q: 1.0,
                weights: vec![1.0, 0.25],
            },
        )
        .unwrap();
        let b = build_basis(w, DMatrix::identity(2, 2)).unwrap().normalized().unwrap();
        for j in 0..2 {
            assert!((b.norm(b.column(j)) - 1.0).abs() < 1e-12);
        }
        assert!(b.c2_estimate() > 0.0);
    }
}
