//! Dense row-major matrices and the SVD utilities built on them.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense real matrix stored row-major.
///
/// Constructors that accept external data reject non-finite entries, so every
/// `Matrix` reaching the pipeline is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        let m = Matrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
    }

    /// Builds a matrix from row-major data the caller already knows is finite
    /// and correctly sized.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(p) => Err(Error::NonFinite {
                row: p / self.cols,
                col: p % self.cols,
            }),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|x| x * k)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    /// Matrix product `self * other`.
    pub fn dot(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[l * n..(l + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(Matrix::from_vec_unchecked(m, n, out))
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn tr_dot(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cannot form Aᵀ·B for {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (k, n) = (self.cols, other.cols);
        let mut out = vec![T::zero(); k * n];
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                let out_row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(Matrix::from_vec_unchecked(k, n, out))
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k <= self.cols, "requested {k} of {} columns", self.cols);
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Operator norm of `selfᵀ self − I`, i.e. how far the columns are from
    /// being orthonormal.
    pub fn orthonormality_residual(&self) -> Result<T> {
        let gram = self.tr_dot(self)?;
        let resid = gram.sub(&Matrix::identity(self.cols))?;
        op_norm(&resid)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Thin singular value decomposition `a = u · diag(s) · vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// `m x p`, orthonormal columns.
    pub u: Matrix<T>,
    /// Length `p = min(m, n)`, non-negative, descending.
    pub singular_values: Vec<T>,
    /// `n x p`, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn rank_capacity(&self) -> usize {
        self.singular_values.len()
    }

    /// `u_k · diag(values) · v_kᵀ` using the leading `values.len()` factors.
    pub fn compose(&self, values: &[T]) -> Matrix<T> {
        low_rank(&self.u, values, &self.v)
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.compose(&self.singular_values)
    }
}

/// `u[:, :k] · diag(values) · v[:, :k]ᵀ` with `k = values.len()`.
pub fn low_rank<T: Real>(u: &Matrix<T>, values: &[T], v: &Matrix<T>) -> Matrix<T> {
    let k = values.len();
    let (m, n) = (u.rows(), v.rows());
    let mut out = vec![T::zero(); m * n];
    for l in 0..k {
        let s = values[l];
        if s == T::zero() {
            continue;
        }
        for i in 0..m {
            let a = u[(i, l)] * s;
            let row = &mut out[i * n..(i + 1) * n];
            for (j, o) in row.iter_mut().enumerate() {
                *o = *o + a * v[(j, l)];
            }
        }
    }
    Matrix::from_vec_unchecked(m, n, out)
}

/// Thin SVD with singular values sorted descending.
///
/// Signs of singular vector pairs are whatever the backend produced.
pub fn svd<T: Real>(a: &Matrix<T>) -> Result<Svd<T>> {
    a.check_finite()?;
    let (m, n) = a.shape();
    let raw =
        T::svd_raw(m, n, a.as_slice(), true).ok_or(Error::SvdNoConvergence { rows: m, cols: n })?;
    let p = raw.s.len();
    let order = descending_order(&raw.s);

    let singular_values: Vec<T> = order.iter().map(|&i| raw.s[i]).collect();
    let u = Matrix::from_fn(m, p, |i, j| raw.u[i * p + order[j]]);
    let v = Matrix::from_fn(n, p, |i, j| raw.vt[order[j] * n + i]);
    if singular_values.iter().any(|s| !s.is_finite())
        || u.check_finite().is_err()
        || v.check_finite().is_err()
    {
        return Err(Error::SvdNoConvergence { rows: m, cols: n });
    }
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

/// Singular values only, descending.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    a.check_finite()?;
    let (m, n) = a.shape();
    let raw = T::svd_raw(m, n, a.as_slice(), false)
        .ok_or(Error::SvdNoConvergence { rows: m, cols: n })?;
    let mut s = raw.s;
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdNoConvergence { rows: m, cols: n });
    }
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Ok(s)
}

// Stable, so ties keep the backend's order.
fn descending_order<T: Real>(s: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Largest singular value.
pub fn op_norm<T: Real>(a: &Matrix<T>) -> Result<T> {
    Ok(singular_values(a)?.first().copied().unwrap_or_else(T::zero))
}

fn orthonormality_tol<T: Real>() -> T {
    T::of(1e-8).max(T::epsilon() * T::of(1e3))
}

/// Smallest singular value of `aᵀb` for two `m x k` blocks with orthonormal
/// columns. Equals the cosine of the largest principal angle between their
/// spans.
pub fn subspace_overlap<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "subspace blocks {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    let tol = orthonormality_tol::<T>();
    for m in [a, b] {
        let residual = m.orthonormality_residual()?;
        if residual > tol {
            return Err(Error::NotOrthonormal {
                residual: residual.as_f64(),
            });
        }
    }
    let prod = a.tr_dot(b)?;
    let s = singular_values(&prod)?;
    Ok(s.last().copied().unwrap_or_else(T::zero))
}

/// Serializes a matrix as comma-separated rows with 17 significant digits.
pub fn to_csv_string<T: Real>(a: &Matrix<T>) -> String {
    let mut out = String::with_capacity(a.len() * 24);
    for i in 0..a.rows() {
        for (j, x) in a.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{x:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv<T: Real>(text: &str) -> Result<Matrix<T>> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let x: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("`{}` is not a number", field.trim()),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("non-finite value `{}`", field.trim()),
                });
            }
            data.push(T::of(x));
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {c} fields, found {count}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::Parse {
        line: 0,
        msg: "no data rows".into(),
    })?;
    Matrix::new(rows, cols, data)
}

pub fn read_csv<T: Real>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn write_csv<T: Real>(path: impl AsRef<Path>, a: &Matrix<T>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv_string(a)).map_err(|e| Error::io(path, e))
}
