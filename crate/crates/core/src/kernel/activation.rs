use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    /// Softmax over each row independently.
    SoftmaxRows,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activate(x: &Matrix, kind: Activation) -> Matrix {
    match kind {
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(f32::tanh),
        Activation::SoftmaxRows => {
            let mut out = x.clone();
            let cols = x.cols();
            for row in out.as_mut_slice().chunks_mut(cols.max(1)) {
                softmax_in_place(row);
            }
            out
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        let s = activate(&Matrix::from_rows(&[&[0.0, 0.0]]), Activation::SoftmaxRows);
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let t = activate(&Matrix::column(&[0.5]), Activation::Tanh);
        assert!((t.get(0, 0) as f64 - 0.5f64.tanh()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn bounded_and_normalized(xs in prop::collection::vec(-15.0f32..15.0, 1..12)) {
            let m = Matrix::from_rows(&[&xs]);
            for &v in activate(&m, Activation::Sigmoid).as_slice() {
                prop_assert!(v > 0.0 && v < 1.0);
            }
            let t = activate(&m.map(|x| x / 2.0), Activation::Tanh);
            for &v in t.as_slice() {
                prop_assert!(v > -1.0 && v < 1.0);
            }
            let s = activate(&m, Activation::SoftmaxRows);
            let sum: f32 = s.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6);
            prop_assert!(s.as_slice().iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn finite_for_extreme_inputs(x in -1e30f32..1e30) {
            prop_assert!(sigmoid(x).is_finite());
            let s = activate(&Matrix::from_rows(&[&[x, -x]]), Activation::SoftmaxRows);
            prop_assert!(s.is_finite());
        }
    }
}
