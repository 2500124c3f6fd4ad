//! PCA and exact t-SNE projections of trajectory vectors, with scatter-plot
//! export.

mod pca;
mod scatter;
mod tsne;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::features::CsrMatrix;
use crate::scalar::Real;

pub use pca::{pca_fit, PcaModel};
pub use scatter::{export_scatter, write_scatter_csv, write_scatter_svg, Projection2D};
pub use tsne::{tsne, TsneConfig, TsneInit, TsneResult};

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid t-SNE config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<DenseMatrix<T>, ProjectError> {
        if data.len() != rows * cols {
            return Err(ProjectError::Dimension(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> DenseMatrix<T> {
        DenseMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<DenseMatrix<T>, ProjectError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(ProjectError::Dimension(format!("row {r} has {} values, expected {cols}", rows[r].len())));
        }
        Ok(DenseMatrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_csr(m: &CsrMatrix<T>) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(m.n_rows(), m.n_cols());
        for (i, row) in m.rows().enumerate() {
            for (&j, &v) in row.indices.iter().zip(row.values) {
                d.data[i * d.cols + j as usize] = v;
            }
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix<T> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Text form: a `rows cols` header, then one whitespace-separated row per line.
    pub fn write(&self, path: &Path) -> Result<(), ProjectError> {
        let io = |source| ProjectError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "{} {}", self.rows, self.cols).map_err(io)?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" ")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<DenseMatrix<T>, ProjectError> {
        let io = |source| ProjectError::Io { path: path.to_path_buf(), source };
        let parse = |line: usize, message: String| ProjectError::Parse { path: path.to_path_buf(), line, message };
        let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
        let header = lines.next().ok_or_else(|| parse(1, "missing header".into()))?.map_err(io)?;
        let dims: Vec<usize> =
            header.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|e| parse(1, format!("{e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(parse(1, "header must be `rows cols`".into()));
        };
        let mut data = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|e| parse(i + 2, format!("{tok:?}: {e}")))?;
                data.push(T::of(v));
            }
            if data.len() - before != cols {
                return Err(parse(i + 2, format!("expected {cols} values, found {}", data.len() - before)));
            }
            seen += 1;
        }
        if seen != rows {
            return Err(parse(1, format!("header declares {rows} rows, found {seen}")));
        }
        Ok(DenseMatrix { rows, cols, data })
    }
}

/// Mean silhouette coefficient of 2-D points under Euclidean distance.
/// Points alone in their class contribute 0.
pub fn silhouette_score<T: Real>(coords: &[[T; 2]], labels: &[u8]) -> Result<f64, ProjectError> {
    if coords.len() != labels.len() {
        return Err(ProjectError::Dimension(format!("{} points but {} labels", coords.len(), labels.len())));
    }
    let classes: std::collections::BTreeSet<u8> = labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(ProjectError::Dimension("silhouette needs at least two classes".into()));
    }
    let dist = |a: &[T; 2], b: &[T; 2]| {
        let dx = a[0].as_f64() - b[0].as_f64();
        let dy = a[1].as_f64() - b[1].as_f64();
        (dx * dx + dy * dy).sqrt()
    };
    let mut total = 0.0;
    for (i, (ci, &li)) in coords.iter().zip(labels).enumerate() {
        let mut sums = std::collections::BTreeMap::<u8, (f64, usize)>::new();
        for (j, (cj, &lj)) in coords.iter().zip(labels).enumerate() {
            if i != j {
                let e = sums.entry(lj).or_default();
                e.0 += dist(ci, cj);
                e.1 += 1;
            }
        }
        let Some(&(own, own_n)) = sums.get(&li) else { continue };
        let a = own / own_n as f64;
        let b = sums.iter().filter(|(&l, _)| l != li).map(|(_, &(s, k))| s / k as f64).fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    Ok(total / coords.len() as f64)
}
