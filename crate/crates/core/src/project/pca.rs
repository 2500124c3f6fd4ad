use nalgebra::{DMatrix, SymmetricEigen};

use super::{DenseMatrix, ProjectError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `k` orthonormal rows of length `dim`, by descending variance.
    pub components: Vec<Vec<T>>,
    pub explained_variance: Vec<T>,
    pub explained_variance_ratio: Vec<T>,
}

/// Principal directions of the centred data, via the eigendecomposition of
/// the covariance (or of the Gram matrix when there are fewer rows than
/// columns). Each component is signed so that its largest-magnitude entry
/// is positive.
pub fn pca_fit<T: Real>(x: &DenseMatrix<T>, k: usize) -> Result<PcaModel<T>, ProjectError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(ProjectError::Dimension(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > d || k > n - 1 {
        return Err(ProjectError::Dimension(format!("k = {k} must lie in [1, min(n-1, dim)] = [1, {}]", (n - 1).min(d))));
    }
    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let xc = DMatrix::from_fn(n, d, |i, j| x.get(i, j).as_f64() - mean[j]);
    let denom = (n - 1) as f64;
    let total_variance = xc.iter().map(|v| v * v).sum::<f64>() / denom;

    let (mut components, variances) = if d <= n {
        let cov = (xc.transpose() * &xc) / denom;
        let (vals, vecs) = sorted_eigen(cov);
        let comps: Vec<Vec<f64>> = (0..k).map(|c| vecs.column(c).iter().copied().collect()).collect();
        (comps, vals[..k].to_vec())
    } else {
        // eigenvectors u of X Xᵀ give directions Xᵀu / sqrt((n-1) λ)
        let gram = (&xc * xc.transpose()) / denom;
        let (vals, vecs) = sorted_eigen(gram);
        let mut comps = Vec::with_capacity(k);
        for c in 0..k {
            let v = xc.transpose() * vecs.column(c);
            let norm = v.norm();
            comps.push(if norm > 0.0 { v.iter().map(|a| a / norm).collect() } else { vec![0.0; d] });
        }
        (comps, vals[..k].to_vec())
    };
    orthonormalize(&mut components);
    for c in &mut components {
        let lead = c.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let variances: Vec<f64> = variances.into_iter().map(|v| v.max(0.0)).collect();
    let ratios: Vec<f64> = variances
        .iter()
        .map(|v| if total_variance > 0.0 { v / total_variance } else { 0.0 })
        .collect();
    let cast = |v: &[f64]| v.iter().map(|&a| T::of(a)).collect::<Vec<T>>();
    Ok(PcaModel {
        mean: cast(&mean),
        components: components.iter().map(|c| cast(c)).collect(),
        explained_variance: cast(&variances),
        explained_variance_ratio: cast(&ratios),
    })
}

/// Eigenpairs of a symmetric matrix by descending eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Two passes of modified Gram-Schmidt. A direction that collapses to zero
/// (rank-deficient data) is replaced by the first unit vector orthogonal to
/// the previous components.
fn orthonormalize(vs: &mut [Vec<f64>]) {
    let d = vs.first().map_or(0, Vec::len);
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let dot: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = vs.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = vs[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            vs[i].iter_mut().for_each(|a| *a /= norm);
            continue;
        }
        for e in 0..d {
            let mut cand = vec![0.0; d];
            cand[e] = 1.0;
            for j in 0..i {
                let dot = vs[j][e];
                cand.iter_mut().zip(&vs[j]).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = cand.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-6 {
                vs[i] = cand.into_iter().map(|a| a / norm).collect();
                break;
            }
        }
    }
}

impl<T: Real> PcaModel<T> {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Scores `(x - mean) Cᵀ`.
    pub fn transform(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>, ProjectError> {
        if x.cols() != self.mean.len() {
            return Err(ProjectError::Dimension(format!("{} columns, model expects {}", x.cols(), self.mean.len())));
        }
        let mut out = Vec::with_capacity(x.rows() * self.k());
        for i in 0..x.rows() {
            let row = x.row(i);
            for c in &self.components {
                let s: f64 = row.iter().zip(&self.mean).zip(c).map(|((v, m), w)| (v.as_f64() - m.as_f64()) * w.as_f64()).sum();
                out.push(T::of(s));
            }
        }
        DenseMatrix::new(x.rows(), self.k(), out)
    }

    /// Back-projection `mean + z C`.
    pub fn inverse_transform(&self, z: &DenseMatrix<T>) -> Result<DenseMatrix<T>, ProjectError> {
        if z.cols() != self.k() {
            return Err(ProjectError::Dimension(format!("{} columns, model has {} components", z.cols(), self.k())));
        }
        let d = self.mean.len();
        let mut out = Vec::with_capacity(z.rows() * d);
        for i in 0..z.rows() {
            let zr = z.row(i);
            for j in 0..d {
                let v: f64 = self.mean[j].as_f64() + zr.iter().zip(&self.components).map(|(a, c)| a.as_f64() * c[j].as_f64()).sum::<f64>();
                out.push(T::of(v));
            }
        }
        DenseMatrix::new(z.rows(), d, out)
    }
}
