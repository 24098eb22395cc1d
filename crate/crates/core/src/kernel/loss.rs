use super::Matrix;
use crate::error::{Error, Result};

/// Probability clamp applied before taking logarithms in [`bce_loss`].
pub const BCE_EPSILON: f32 = 1e-7;

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f32, Matrix)> {
    let (loss, grad) = mse_loss_f64(pred, target)?;
    Ok((loss as f32, grad))
}

pub(crate) fn mse_loss_f64(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension {
            op: "mse_loss",
            left: pred.shape(),
            right: target.shape(),
        });
    }
    let n = pred.len().max(1) as f32;
    let diff = pred.sub(target)?;
    let sum: f64 = diff.as_slice().iter().map(|&d| (d as f64) * (d as f64)).sum();
    let grad = diff.scale(2.0 / n);
    Ok((sum / n as f64, grad))
}

/// Binary cross-entropy over post-softmax probabilities with labels in {0, 1}.
///
/// Probabilities are clamped to `[ε, 1-ε]`; the returned gradient is taken at
/// the clamped value.
pub fn bce_loss(probabilities: &Matrix, labels: &Matrix) -> Result<(f32, Matrix)> {
    let (loss, grad) = bce_loss_f64(probabilities, labels)?;
    Ok((loss as f32, grad))
}

pub(crate) fn bce_loss_f64(probabilities: &Matrix, labels: &Matrix) -> Result<(f64, Matrix)> {
    if probabilities.shape() != labels.shape() {
        return Err(Error::Dimension {
            op: "bce_loss",
            left: probabilities.shape(),
            right: labels.shape(),
        });
    }
    if let Some(bad) = labels.as_slice().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Validation(format!("label {bad} is not 0 or 1")));
    }
    let n = probabilities.len().max(1);
    let mut grad = Matrix::zeros(probabilities.rows(), probabilities.cols());
    let mut sum = 0.0f64;
    for ((g, &p), &y) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(probabilities.as_slice())
        .zip(labels.as_slice())
    {
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        let pd = p as f64;
        sum -= if y == 1.0 { pd.ln() } else { (1.0 - pd).ln() };
        *g = (p - y) / (p * (1.0 - p)) / n as f32;
    }
    Ok((sum / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_values() {
        let a = Matrix::from_rows(&[&[1.0, 1.0]]);
        let z = Matrix::zeros(1, 2);
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
        assert_eq!(mse_loss(&a, &z).unwrap().0, 1.0);
        assert!(mse_loss(&a, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn mse_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pred = Matrix::zeros(2, 4);
        let mut target = Matrix::zeros(2, 4);
        for v in pred.as_mut_slice() {
            *v = rng.random_range(-2.0..2.0);
        }
        for v in target.as_mut_slice() {
            *v = rng.random_range(-2.0..2.0);
        }
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let h = 1e-3f32;
        for i in 0..pred.len() {
            let mut plus = pred.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = pred.clone();
            minus.as_mut_slice()[i] -= h;
            let fp = mse_loss_f64(&plus, &target).unwrap().0;
            let fm = mse_loss_f64(&minus, &target).unwrap().0;
            let numeric = ((fp - fm) / (2.0 * h as f64)) as f32;
            let analytic = grad.as_slice()[i];
            assert!(
                (numeric - analytic).abs() <= 1e-3 * analytic.abs().max(1e-2),
                "{i}: {numeric} vs {analytic}"
            );
        }
    }

    #[test]
    fn bce_values() {
        let half = Matrix::column(&[0.5]);
        let one = Matrix::column(&[1.0]);
        let (l, _) = bce_loss(&half, &one).unwrap();
        assert!((l - std::f32::consts::LN_2).abs() < 1e-6);
        let (l, _) = bce_loss(&one, &one).unwrap();
        assert!(l >= 0.0 && l < 1e-6);
        let (l, _) = bce_loss(&Matrix::column(&[0.9]), &Matrix::column(&[0.0])).unwrap();
        assert!((l - 2.302585).abs() < 1e-5, "{l}");
    }

    #[test]
    fn bce_rejects_bad_labels() {
        let p = Matrix::column(&[0.3]);
        assert!(matches!(
            bce_loss(&p, &Matrix::column(&[0.5])),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn bce_is_non_negative_even_at_clamp() {
        let p = Matrix::from_rows(&[&[0.0, 1.0, 1e-9, 0.999_999_9]]);
        let y = Matrix::from_rows(&[&[0.0, 1.0, 0.0, 1.0]]);
        let (l, g) = bce_loss(&p, &y).unwrap();
        assert!(l >= 0.0);
        assert!(g.is_finite());
    }
}
