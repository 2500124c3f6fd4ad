use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::FeatureError;
use crate::scalar::Real;

/// Sparse row with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector<T> {
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Real> SparseVector<T> {
    /// Panics if the indices are not strictly increasing or lengths differ.
    pub fn from_sorted(indices: Vec<u32>, values: Vec<T>) -> SparseVector<T> {
        assert_eq!(indices.len(), values.len(), "index/value length mismatch");
        assert!(indices.windows(2).all(|w| w[0] < w[1]), "indices must be strictly increasing");
        SparseVector { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn dot(&self, dense: &[T]) -> T {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

/// Borrowed view of one CSR row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a, T> {
    pub indices: &'a [u32],
    pub values: &'a [T],
}

impl<T: Real> RowView<'_, T> {
    pub fn dot(&self, dense: &[T]) -> T {
        self.indices.iter().zip(self.values).map(|(&i, &v)| v * dense[i as usize]).sum()
    }

    pub fn to_vector(&self) -> SparseVector<T> {
        SparseVector::from_sorted(self.indices.to_vec(), self.values.to_vec())
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn from_rows(n_cols: usize, rows: &[SparseVector<T>]) -> CsrMatrix<T> {
        let nnz = rows.iter().map(SparseVector::nnz).sum();
        let mut m = CsrMatrix { n_cols, indptr: Vec::with_capacity(rows.len() + 1), indices: Vec::with_capacity(nnz), values: Vec::with_capacity(nnz) };
        m.indptr.push(0);
        for r in rows {
            assert!(r.indices.last().is_none_or(|&i| (i as usize) < n_cols), "column index out of range");
            m.indices.extend_from_slice(&r.indices);
            m.values.extend_from_slice(&r.values);
            m.indptr.push(m.indices.len());
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> RowView<'_, T> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        RowView { indices: &self.indices[a..b], values: &self.values[a..b] }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = RowView<'_, T>> + '_ {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> CsrMatrix<T> {
        let vecs: Vec<SparseVector<T>> = rows.iter().map(|&r| self.row(r).to_vector()).collect();
        CsrMatrix::from_rows(self.n_cols, &vecs)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        self.rows()
            .map(|r| {
                let mut d = vec![T::zero(); self.n_cols];
                for (&i, &v) in r.indices.iter().zip(r.values) {
                    d[i as usize] = v;
                }
                d
            })
            .collect()
    }
}

/// Text triplet format: a `rows cols nnz` header, then one
/// `row col value` line per stored entry (0-based, row-major order).
pub fn write_triplets<T: Real>(m: &CsrMatrix<T>, path: &Path) -> Result<(), FeatureError> {
    let io = |source| FeatureError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz()).map_err(io)?;
    for (r, row) in m.rows().enumerate() {
        for (&c, &v) in row.indices.iter().zip(row.values) {
            writeln!(w, "{r} {c} {v}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_triplets<T: Real>(path: &Path) -> Result<CsrMatrix<T>, FeatureError> {
    let io = |source| FeatureError::Io { path: path.to_path_buf(), source };
    let parse_err = |line: usize, message: String| FeatureError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?.map_err(io)?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(1, format!("header: {e}")))?;
    let [n_rows, n_cols, nnz] = dims[..] else {
        return Err(parse_err(1, "header must be `rows cols nnz`".into()));
    };
    let mut rows: Vec<(Vec<u32>, Vec<T>)> = vec![(Vec::new(), Vec::new()); n_rows];
    let mut seen = 0usize;
    let mut last: Option<(usize, u32)> = None;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split_whitespace();
        let (Some(r), Some(c), Some(v), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(parse_err(lineno, "expected `row col value`".into()));
        };
        let r: usize = r.parse().map_err(|e| parse_err(lineno, format!("row: {e}")))?;
        let c: u32 = c.parse().map_err(|e| parse_err(lineno, format!("col: {e}")))?;
        let v: f64 = v.parse().map_err(|e| parse_err(lineno, format!("value: {e}")))?;
        if r >= n_rows || c as usize >= n_cols {
            return Err(parse_err(lineno, format!("entry ({r}, {c}) outside {n_rows}x{n_cols}")));
        }
        if last.is_some_and(|p| p >= (r, c)) {
            return Err(parse_err(lineno, "entries must be in row-major order without duplicates".into()));
        }
        last = Some((r, c));
        rows[r].0.push(c);
        rows[r].1.push(T::of(v));
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(1, format!("header declares {nnz} entries, found {seen}")));
    }
    let vecs: Vec<SparseVector<T>> = rows.into_iter().map(|(i, v)| SparseVector::from_sorted(i, v)).collect();
    Ok(CsrMatrix::from_rows(n_cols, &vecs))
}
