use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pca_fit, DenseMatrix, ProjectError};
use crate::scalar::Real;

/// Largest input the exact method accepts.
pub const MAX_POINTS: usize = 50_000;
/// RNG stream reserved for random initialisation.
const INIT_STREAM: u64 = 0x5453_4e45;
const ENTROPY_TOL: f64 = 1e-5;
const MIN_PROB: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsneInit {
    Pca,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// `None` picks `max(n / early_exaggeration / 4, 50)`.
    pub learning_rate: Option<f64>,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub init: TsneInit,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: None,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            init: TsneInit::Pca,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), ProjectError> {
        let bad = |m: String| Err(ProjectError::Config(m));
        if n > MAX_POINTS {
            return bad(format!("{n} points exceed the exact-method limit of {MAX_POINTS}"));
        }
        if !(self.perplexity > 1.0 && self.perplexity < n as f64 / 3.0) {
            return bad(format!("perplexity {} must lie in (1, n/3) = (1, {:.3})", self.perplexity, n as f64 / 3.0));
        }
        if self.iterations < 250 {
            return bad(format!("iterations {} must be at least 250", self.iterations));
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0)) || !(self.early_exaggeration >= 1.0) {
            return bad("learning_rate must be positive and early_exaggeration at least 1".into());
        }
        Ok(())
    }

    pub fn effective_learning_rate(&self, n: usize) -> f64 {
        self.learning_rate.unwrap_or_else(|| (n as f64 / self.early_exaggeration / 4.0).max(50.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult<T> {
    /// Centred 2-D coordinates, one per input row.
    pub coords: Vec<[T; 2]>,
    /// KL(P || Q) of the initial layout.
    pub initial_kl: f64,
    pub final_kl: f64,
    /// Achieved Shannon entropy (nats) of each conditional distribution.
    pub row_entropies: Vec<f64>,
}

fn squared_distances(x: &DenseMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let a = x.row(i);
            (0..x.rows()).map(|j| a.iter().zip(x.row(j)).map(|(p, q)| (p - q) * (p - q)).sum()).collect()
        })
        .collect()
}

/// Conditional distribution of row `i` under precision `beta`, returning the
/// probabilities and their entropy. Distances are shifted by the row minimum
/// so the exponentials cannot all underflow.
fn conditional_row(d: &[f64], i: usize, beta: f64, d_min: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&dij, p)) in d.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *p = 0.0;
            continue;
        }
        let shifted = dij - d_min;
        *p = (-beta * shifted).exp();
        sum += *p;
        weighted += shifted * *p;
    }
    out.iter_mut().for_each(|p| *p /= sum);
    sum.ln() + beta * weighted / sum
}

/// Bisection on the precision so that the row entropy equals `target`.
fn calibrate_row(d: &[f64], i: usize, target: f64) -> (Vec<f64>, f64) {
    let d_min = d.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
    let mut p = vec![0.0; d.len()];
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut h = conditional_row(d, i, beta, d_min, &mut p);
    for _ in 0..200 {
        if (h - target).abs() < ENTROPY_TOL {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
        h = conditional_row(d, i, beta, d_min, &mut p);
    }
    (p, h)
}

/// Symmetrised joint affinities `(p_j|i + p_i|j) / 2n`, floored at 1e-12.
fn joint_affinities(x: &DenseMatrix<f64>, perplexity: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.rows();
    let d = squared_distances(x);
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n).into_par_iter().map(|i| calibrate_row(&d[i], i, target)).collect();
    let entropies = rows.iter().map(|r| r.1).collect();
    let cond: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let p = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(MIN_PROB) })
                .collect()
        })
        .collect();
    (p, entropies)
}

/// Student-t kernel row sums, gathered row-parallel and added in row order.
fn kernel_sum(y: &[[f64; 2]]) -> f64 {
    let sums: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..y.len() {
                if j != i {
                    s += kernel(&y[i], &y[j]);
                }
            }
            s
        })
        .collect();
    sums.iter().sum()
}

fn kernel(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    1.0 / (1.0 + dx * dx + dy * dy)
}

fn kl_divergence(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let z = kernel_sum(y);
    let terms: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..y.len() {
                if j != i {
                    let q = (kernel(&y[i], &y[j]) / z).max(MIN_PROB);
                    s += p[i][j] * (p[i][j] / q).ln();
                }
            }
            s
        })
        .collect();
    terms.iter().sum()
}

fn center(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= mx;
        p[1] -= my;
    }
}

fn initial_layout(x: &DenseMatrix<f64>, cfg: &TsneConfig) -> Result<Vec<[f64; 2]>, ProjectError> {
    let n = x.rows();
    let mut y: Vec<[f64; 2]> = match cfg.init {
        TsneInit::Pca if x.cols() >= 2 => {
            let m = pca_fit(x, 2)?;
            let z = m.transform(x)?;
            let mut y: Vec<[f64; 2]> = (0..n).map(|i| [z.get(i, 0), z.get(i, 1)]).collect();
            let sd = (y.iter().map(|p| p[0] * p[0]).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 {
                y.iter_mut().for_each(|p| *p = [p[0] / sd * 1e-4, p[1] / sd * 1e-4]);
            }
            y
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(INIT_STREAM);
            let normal = Normal::new(0.0, 1e-4).expect("valid normal");
            (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect()
        }
    };
    center(&mut y);
    Ok(y)
}

/// Exact t-SNE: perplexity-calibrated Gaussian affinities, Student-t
/// similarities in the plane, gradient descent on KL(P || Q) with momentum,
/// per-coordinate gains and early exaggeration.
pub fn tsne<T: Real>(x: &DenseMatrix<T>, config: &TsneConfig) -> Result<TsneResult<T>, ProjectError> {
    let n = x.rows();
    config.validate(n)?;
    let x64 = DenseMatrix::new(n, x.cols(), x.as_slice().iter().map(|v| v.as_f64()).collect())?;
    let (p, row_entropies) = joint_affinities(&x64, config.perplexity);
    let mut y = initial_layout(&x64, config)?;
    let initial_kl = kl_divergence(&p, &y);

    let lr = config.effective_learning_rate(n);
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations { config.early_exaggeration } else { 1.0 };
        let momentum = if iter < config.exaggeration_iterations { config.initial_momentum } else { config.final_momentum };
        let z = kernel_sum(&y);
        let grads: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0, 0.0];
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let k = kernel(&y[i], &y[j]);
                    let f = (exaggeration * p[i][j] - k / z) * k;
                    g[0] += f * (y[i][0] - y[j][0]);
                    g[1] += f * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for c in 0..2 {
                let same_sign = (grads[i][c] > 0.0) == (update[i][c] > 0.0);
                gains[i][c] = if same_sign { gains[i][c] * 0.8 } else { gains[i][c] + 0.2 };
                gains[i][c] = gains[i][c].max(0.01);
                update[i][c] = momentum * update[i][c] - lr * gains[i][c] * grads[i][c];
                y[i][c] += update[i][c];
            }
        }
        center(&mut y);
    }
    let final_kl = kl_divergence(&p, &y);
    Ok(TsneResult {
        coords: y.iter().map(|p| [T::of(p[0]), T::of(p[1])]).collect(),
        initial_kl,
        final_kl,
        row_entropies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn clusters(per: usize, sep: f64, seed: u64) -> (DenseMatrix<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2u8 {
            for _ in 0..per {
                let row: Vec<f64> = (0..10)
                    .map(|j| rng.sample::<f64, _>(StandardNormal) + if j == 0 { sep * c as f64 } else { 0.0 })
                    .collect();
                rows.push(row);
                labels.push(c);
            }
        }
        (DenseMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn config_bounds() {
        let c = TsneConfig::default();
        assert!(c.validate(31).is_ok());
        assert!(c.validate(30).is_err());
        assert!(TsneConfig { perplexity: 1.0, ..c }.validate(100).is_err());
        assert!(TsneConfig { iterations: 249, ..c }.validate(100).is_err());
        assert!(c.validate(MAX_POINTS + 1).is_err());
    }

    #[test]
    fn row_entropies_hit_target() {
        let (x, _) = clusters(30, 5.0, 1);
        let (_, h) = joint_affinities(&x, 10.0);
        for e in h {
            assert!((e - 10f64.ln()).abs() < 1e-4, "{e}");
        }
    }

    #[test]
    fn affinities_symmetric_and_normalised() {
        let (x, _) = clusters(20, 3.0, 2);
        let (p, _) = joint_affinities(&x, 5.0);
        let total: f64 = p.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-6);
        for i in 0..p.len() {
            for j in 0..p.len() {
                assert_eq!(p[i][j], p[j][i]);
            }
        }
    }

    #[test]
    fn kl_decreases_and_output_centred() {
        let (x, _) = clusters(40, 6.0, 3);
        let cfg = TsneConfig { iterations: 1000, init: TsneInit::Random, seed: 4, ..Default::default() };
        let r = tsne(&x, &cfg).unwrap();
        assert!(r.final_kl < r.initial_kl, "{} {}", r.initial_kl, r.final_kl);
        let mx = r.coords.iter().map(|c| c[0]).sum::<f64>() / r.coords.len() as f64;
        let my = r.coords.iter().map(|c| c[1]).sum::<f64>() / r.coords.len() as f64;
        assert!(mx.abs() < 1e-6 && my.abs() < 1e-6);
        assert!(r.coords.iter().all(|c| c[0].is_finite() && c[1].is_finite()));
    }

    #[test]
    fn separated_clusters_stay_apart() {
        let (x, labels) = clusters(100, 20.0, 6);
        let r = tsne(&x, &TsneConfig { seed: 1, perplexity: 30.0, ..Default::default() }).unwrap();
        let s = super::super::silhouette_score(&r.coords, &labels).unwrap();
        assert!(s > 0.8, "{s}");
    }

    #[test]
    fn duplicate_rows_land_together() {
        let (x, _) = clusters(30, 4.0, 7);
        let mut rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| x.row(i).to_vec()).collect();
        rows.push(rows[3].clone());
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let r = tsne(&x, &TsneConfig { iterations: 500, perplexity: 8.0, ..Default::default() }).unwrap();
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let dup = d(r.coords[3], r.coords[60]);
        let nearest_other = (0..60).filter(|&j| j != 3).map(|j| d(r.coords[3], r.coords[j])).fold(f64::INFINITY, f64::min);
        assert!(dup < nearest_other, "{dup} vs {nearest_other}");
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, _) = clusters(20, 4.0, 5);
        let cfg = TsneConfig { iterations: 250, perplexity: 5.0, init: TsneInit::Random, seed: 9, ..Default::default() };
        assert_eq!(tsne(&x, &cfg).unwrap(), tsne(&x, &cfg).unwrap());
    }
}
