//! Row-compressed sparse matrices with sorted column indices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Entries with modulus below this are dropped at build time.
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a square matrix, summing duplicate `(row, col)` entries.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            debug_assert!(r < dim && c < dim);
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.abs_sqr() > DROP_TOL * DROP_TOL {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub(crate) fn from_parts(dim: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<T>) -> Self {
        debug_assert_eq!(row_ptr.len(), dim + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        CsrMatrix {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, T::one())).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, Vec::new())
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterates `(row, col, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        match cols.binary_search(&col) {
            Ok(k) => self.values[self.row_ptr[row] + k],
            Err(_) => T::zero(),
        }
    }

    /// `y = A x` without shape checks.
    #[inline]
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut y = vec![T::zero(); self.dim];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::from_element(self.dim, self.dim, T::zero());
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, c, v) in self.iter() {
            let d = v - self.get(c, r).conj();
            worst = worst.max(d.abs_sqr().sqrt());
        }
        worst
    }

    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        CsrMatrix {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|v| v.to_c64()).collect(),
        }
    }
}

/// Sparse operator over a many-body basis, kept real when every entry is real.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseMatrix {
    Real(CsrMatrix<f64>),
    Complex(CsrMatrix<Complex64>),
}

impl SparseMatrix {
    /// Demotes to the real representation when all imaginary parts vanish.
    pub fn from_complex(m: CsrMatrix<Complex64>) -> Self {
        if m.values.iter().all(|v| v.im == 0.0) {
            SparseMatrix::Real(CsrMatrix {
                dim: m.dim,
                row_ptr: m.row_ptr,
                col_idx: m.col_idx,
                values: m.values.iter().map(|v| v.re).collect(),
            })
        } else {
            SparseMatrix::Complex(m)
        }
    }

    pub fn identity(dim: usize) -> Self {
        SparseMatrix::Real(CsrMatrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            SparseMatrix::Real(m) => m.dim(),
            SparseMatrix::Complex(m) => m.dim(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            SparseMatrix::Real(m) => m.nnz(),
            SparseMatrix::Complex(m) => m.nnz(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, SparseMatrix::Real(_))
    }

    pub fn hermitian_defect(&self) -> f64 {
        match self {
            SparseMatrix::Real(m) => m.hermitian_defect(),
            SparseMatrix::Complex(m) => m.hermitian_defect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        match self {
            SparseMatrix::Real(m) => Complex64::new(m.get(row, col), 0.0),
            SparseMatrix::Complex(m) => m.get(row, col),
        }
    }

    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        match self {
            SparseMatrix::Real(m) => m.to_complex(),
            SparseMatrix::Complex(m) => m.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.to_complex().to_dense()
    }

    /// `y = A x` for a complex vector, no shape checks.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        match self {
            SparseMatrix::Complex(m) => m.matvec_into(x, y),
            SparseMatrix::Real(m) => {
                for (r, yr) in y.iter_mut().enumerate().take(m.dim) {
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                        let v = m.values[k];
                        let xk = x[m.col_idx[k]];
                        re += v * xk.re;
                        im += v * xk.im;
                    }
                    *yr = Complex64::new(re, im);
                }
            }
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `sum_i c_i A_i` over matrices of equal dimension.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let dim = terms
            .first()
            .map(|(_, m)| m.dim())
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut trips = Vec::new();
        for (c, m) in terms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
            for (r, col, v) in m.to_complex().iter() {
                trips.push((r, col, v * *c));
            }
        }
        Ok(SparseMatrix::from_complex(CsrMatrix::from_triplets(dim, trips)))
    }
}

/// `H v` for a sparse operator and a complex vector.
pub fn matvec(h: &SparseMatrix, v: &[Complex64]) -> Result<Vec<Complex64>> {
    h.apply(v)
}

/// Several operators stored on one shared sparsity pattern so that weighted sums are
/// a dense pass over the value arrays.
#[derive(Debug, Clone)]
pub struct OperatorStack {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `values[m][k]`: entry `k` of the shared pattern for operator `m`.
    values: Vec<Vec<Complex64>>,
    real_values: Option<Vec<Vec<f64>>>,
}

impl OperatorStack {
    pub fn new(mats: &[SparseMatrix]) -> Result<Self> {
        let dim = mats
            .first()
            .map(|m| m.dim())
            .ok_or_else(|| Error::InvalidArgument("operator stack needs at least one matrix".into()))?;
        let mats: Vec<CsrMatrix<Complex64>> = mats
            .iter()
            .map(|m| {
                if m.dim() == dim {
                    Ok(m.to_complex())
                } else {
                    Err(Error::DimensionMismatch {
                        expected: dim,
                        found: m.dim(),
                    })
                }
            })
            .collect::<Result<_>>()?;

        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::new();
        for r in 0..dim {
            let mut cols: Vec<usize> = mats
                .iter()
                .flat_map(|m| m.col_idx[m.row_ptr[r]..m.row_ptr[r + 1]].iter().copied())
                .collect();
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr[r + 1] = col_idx.len();
        }
        let values: Vec<Vec<Complex64>> = mats
            .iter()
            .map(|m| {
                let mut vals = vec![Complex64::new(0.0, 0.0); col_idx.len()];
                for r in 0..dim {
                    let pattern = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                    for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                        let pos = pattern.binary_search(&m.col_idx[k]).expect("column in union pattern");
                        vals[row_ptr[r] + pos] = m.values[k];
                    }
                }
                vals
            })
            .collect();
        let real_values = values
            .iter()
            .all(|v| v.iter().all(|x| x.im == 0.0))
            .then(|| values.iter().map(|v| v.iter().map(|x| x.re).collect()).collect());
        Ok(OperatorStack {
            dim,
            row_ptr,
            col_idx,
            values,
            real_values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `sum_m coeffs[m] * O_m`.
    pub fn combine(&self, coeffs: &[f64]) -> SparseMatrix {
        debug_assert_eq!(coeffs.len(), self.values.len());
        let nnz = self.col_idx.len();
        match &self.real_values {
            Some(real) => {
                let mut out = vec![0.0; nnz];
                for (c, vals) in coeffs.iter().zip(real) {
                    if *c == 0.0 {
                        continue;
                    }
                    for (o, v) in out.iter_mut().zip(vals) {
                        *o += c * v;
                    }
                }
                SparseMatrix::Real(CsrMatrix::from_parts(
                    self.dim,
                    self.row_ptr.clone(),
                    self.col_idx.clone(),
                    out,
                ))
            }
            None => {
                let mut out = vec![Complex64::new(0.0, 0.0); nnz];
                for (c, vals) in coeffs.iter().zip(&self.values) {
                    if *c == 0.0 {
                        continue;
                    }
                    for (o, v) in out.iter_mut().zip(vals) {
                        *o += v * *c;
                    }
                }
                SparseMatrix::Complex(CsrMatrix::from_parts(
                    self.dim,
                    self.row_ptr.clone(),
                    self.col_idx.clone(),
                    out,
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let m = CsrMatrix::from_triplets(2, vec![(1, 1, 2.0), (0, 1, 1.0), (1, 1, 3.0), (0, 0, 0.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 1), 5.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.col_idx(), &[1, 1]);
    }

    #[test]
    fn matvec_examples() {
        let id = CsrMatrix::<f64>::identity(3);
        assert_eq!(id.matvec(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
        let d = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        assert_eq!(d.matvec(&[1.0, 1.0]).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(d.matvec(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn complex_demotes_to_real() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 1, Complex64::new(1.0, 0.0)), (1, 0, Complex64::new(1.0, 0.0))]);
        assert!(SparseMatrix::from_complex(m).is_real());
        let y = CsrMatrix::from_triplets(
            2,
            vec![(0, 1, Complex64::new(0.0, -1.0)), (1, 0, Complex64::new(0.0, 1.0))],
        );
        let y = SparseMatrix::from_complex(y);
        assert!(!y.is_real());
        assert!(y.hermitian_defect() < 1e-15);
    }

    #[test]
    fn stack_combination_matches_direct_sum() {
        let a = SparseMatrix::from_complex(CsrMatrix::from_triplets(
            3,
            vec![(0, 0, Complex64::new(1.0, 0.0)), (1, 2, Complex64::new(2.0, 0.0))],
        ));
        let b = SparseMatrix::from_complex(CsrMatrix::from_triplets(
            3,
            vec![(1, 2, Complex64::new(-1.0, 0.0)), (2, 1, Complex64::new(4.0, 0.0))],
        ));
        let stack = OperatorStack::new(&[a.clone(), b.clone()]).unwrap();
        let combo = stack.combine(&[0.5, 2.0]);
        let direct = SparseMatrix::linear_combination(&[(0.5, &a), (2.0, &b)]).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((combo.get(r, c) - direct.get(r, c)).norm() < 1e-15);
            }
        }
    }
}
