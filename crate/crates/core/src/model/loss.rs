use super::ModelError;
use crate::features::CsrMatrix;
use crate::scalar::{sigmoid, softplus, Real};

pub(crate) fn check_labels(labels: &[u8]) -> Result<(), ModelError> {
    match labels.iter().position(|&y| y > 1) {
        Some(i) => Err(ModelError::NonBinaryLabel { index: i, value: labels[i] }),
        None => Ok(()),
    }
}

/// Class-weighted binary cross-entropy on logits, normalised by the total
/// weight, with its gradient with respect to each score.
pub fn weighted_ce_loss<T: Real>(scores: &[T], labels: &[u8], class_weights: [T; 2]) -> Result<(T, Vec<T>), ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::Dimension { expected: scores.len(), found: labels.len() });
    }
    check_labels(labels)?;
    let total: T = labels.iter().map(|&y| class_weights[y as usize]).sum();
    if total <= T::zero() {
        return Err(ModelError::Input("total sample weight must be positive".into()));
    }
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &y) in scores.iter().zip(labels) {
        let w = class_weights[y as usize];
        // -ln σ(s) = softplus(-s), -ln(1-σ(s)) = softplus(s)
        loss = loss + w * if y == 1 { softplus(-s) } else { softplus(s) };
        let target = if y == 1 { T::one() } else { T::zero() };
        grad.push(w * (sigmoid(s) - target) / total);
    }
    Ok((loss / total, grad))
}

/// Weighted loss of the linear model `params = [weights..., bias]` on the
/// rows `batch` of `x`, writing its gradient with respect to `params` into
/// `grad`.
pub fn batch_loss_and_gradient<T: Real>(
    params: &[T],
    x: &CsrMatrix<T>,
    labels: &[u8],
    batch: &[usize],
    class_weights: [T; 2],
    grad: &mut [T],
) -> Result<T, ModelError> {
    let dim = x.n_cols();
    if params.len() != dim + 1 || grad.len() != dim + 1 {
        return Err(ModelError::Dimension { expected: dim + 1, found: params.len().min(grad.len()) });
    }
    if labels.len() != x.n_rows() {
        return Err(ModelError::Dimension { expected: x.n_rows(), found: labels.len() });
    }
    let mut total = T::zero();
    for &i in batch {
        let y = *labels.get(i).ok_or(ModelError::Dimension { expected: labels.len(), found: i + 1 })?;
        if y > 1 {
            return Err(ModelError::NonBinaryLabel { index: i, value: y });
        }
        total = total + class_weights[y as usize];
    }
    if total <= T::zero() {
        return Err(ModelError::Input("total sample weight must be positive".into()));
    }
    let (w, b) = params.split_at(dim);
    let bias = b[0];
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut loss = T::zero();
    for &i in batch {
        let row = x.row(i);
        let s = row.dot(w) + bias;
        let y = labels[i];
        let wi = class_weights[y as usize];
        loss = loss + wi * if y == 1 { softplus(-s) } else { softplus(s) };
        let target = if y == 1 { T::one() } else { T::zero() };
        let g = wi * (sigmoid(s) - target) / total;
        for (&j, &v) in row.indices.iter().zip(row.values) {
            grad[j as usize] = grad[j as usize] + g * v;
        }
        grad[dim] = grad[dim] + g;
    }
    Ok(loss / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_score_is_ln2() {
        let (l, g) = weighted_ce_loss(&[0.0], &[1], [1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn saturated_scores() {
        let (l, _) = weighted_ce_loss(&[30.0, -30.0], &[1, 0], [1.0, 1.0]).unwrap();
        assert!(l < 1e-12);
        let (l, g) = weighted_ce_loss(&[1000.0f64, -1000.0], &[0, 1], [1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(l, 1000.0, epsilon = 1e-9);
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn weights_reweight_the_mean() {
        let (l, _) = weighted_ce_loss(&[0.0, 2.0], &[1, 0], [1.0, 3.0]).unwrap();
        let expected = (3.0 * std::f64::consts::LN_2 + 1.0 * (1.0 + 2f64.exp()).ln()) / 4.0;
        assert_abs_diff_eq!(l, expected, epsilon = 1e-14);
    }

    #[test]
    fn batch_gradient_chains_score_gradient() {
        let x = CsrMatrix::from_rows(
            3,
            &[
                crate::features::SparseVector::from_sorted(vec![0, 2], vec![1.0, -2.0]),
                crate::features::SparseVector::from_sorted(vec![1], vec![0.5]),
            ],
        );
        let params = [0.3, -0.7, 0.2, 0.1];
        let mut grad = [0.0; 4];
        let loss = batch_loss_and_gradient(&params, &x, &[1, 0], &[0, 1], [1.0, 2.0], &mut grad).unwrap();
        let scores = [0.3 - 0.4 + 0.1, -0.35 + 0.1];
        let (l, gs) = weighted_ce_loss(&scores, &[1, 0], [1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(loss, l, epsilon = 1e-15);
        let expected = [gs[0], 0.5 * gs[1], -2.0 * gs[0], gs[0] + gs[1]];
        for (a, b) in grad.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(batch_loss_and_gradient(&params[..3], &x, &[1, 0], &[0], [1.0, 1.0], &mut grad).is_err());
        assert!(batch_loss_and_gradient(&params, &x, &[1, 0], &[2], [1.0, 1.0], &mut grad).is_err());
    }

    #[test]
    fn rejects_bad_labels_and_lengths() {
        assert!(matches!(weighted_ce_loss(&[0.0], &[2], [1.0, 1.0]), Err(ModelError::NonBinaryLabel { index: 0, value: 2 })));
        assert!(matches!(weighted_ce_loss(&[0.0, 1.0], &[1], [1.0, 1.0]), Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn unit_weights_match_plain_mean() {
        let s = [0.3, -1.2, 2.5];
        let y = [1u8, 0, 0];
        let (l, _) = weighted_ce_loss(&s, &y, [1.0, 1.0]).unwrap();
        let plain: f64 = s
            .iter()
            .zip(y)
            .map(|(&s, y)| {
                let p = 1.0 / (1.0 + (-s as f64).exp());
                if y == 1 { -p.ln() } else { -(1.0 - p).ln() }
            })
            .sum::<f64>()
            / 3.0;
        assert_abs_diff_eq!(l, plain, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn f32_tracks_f64(s in prop::collection::vec(-20.0f64..20.0, 1..12), bits in any::<u16>()) {
            let y: Vec<u8> = (0..s.len()).map(|i| ((bits >> (i % 16)) & 1) as u8).collect();
            let s32: Vec<f32> = s.iter().map(|&x| x as f32).collect();
            let (l64, _) = weighted_ce_loss(&s, &y, [1.0, 2.0]).unwrap();
            let (l32, _) = weighted_ce_loss(&s32, &y, [1.0, 2.0]).unwrap();
            prop_assert!((l64 - l32 as f64).abs() < 1e-4 * (1.0 + l64));
        }
    }
}
