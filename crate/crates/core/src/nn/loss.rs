use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Numerically stable softmax of a single logit vector.
pub fn softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    if logits.is_empty() {
        return Err(Error::dim("softmax of an empty vector"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("softmax input contains non-finite logits"));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `-Σ target_k · ln(max(prediction_k, ε))`, target first.
pub fn cross_entropy<T: Scalar>(target: &[T], prediction: &[T]) -> Result<T> {
    if target.len() != prediction.len() {
        return Err(Error::dim(format!(
            "cross-entropy target has {} classes, prediction {}",
            target.len(),
            prediction.len()
        )));
    }
    let eps = T::log_clamp();
    let mut total = T::zero();
    for (&t, &p) in target.iter().zip(prediction) {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::data(format!("prediction entry {p} outside [0, 1]")));
        }
        if t != T::zero() {
            total -= t * p.max(eps).ln();
        }
    }
    Ok(total)
}

/// Training loss applied to the network output.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind<T> {
    /// Cross-entropy between (soft) targets and predicted probabilities.
    CrossEntropy,
    /// Cross-entropy against targets after mapping predictions through a
    /// K×K row-stochastic transition matrix: `q_j = Σ_i T[i][j]·p_i`.
    ForwardCorrected(Tensor<T>),
}

impl<T: Scalar> LossKind<T> {
    /// Resolves a loss by name; `forward-corrected` needs a transition matrix.
    pub fn parse(name: &str, transition: Option<Tensor<T>>) -> Result<Self> {
        match (name, transition) {
            ("cross-entropy", _) => Ok(LossKind::CrossEntropy),
            ("forward-corrected", Some(t)) => Ok(LossKind::ForwardCorrected(t)),
            ("forward-corrected", None) => Err(Error::config("forward-corrected loss needs a transition matrix")),
            (other, _) => Err(Error::config(format!("unknown loss kind '{other}'"))),
        }
    }
}

fn check_targets<T: Scalar>(target: &Tensor<T>) -> Result<()> {
    for (i, row) in target.iter_rows().enumerate() {
        let s: T = row.iter().copied().sum();
        if row.iter().any(|&v| !(v >= T::zero() && v <= T::one())) || (s - T::one()).abs() > T::sum_tolerance() {
            return Err(Error::data(format!("target row {i} is not a probability vector")));
        }
    }
    Ok(())
}

/// Mean loss over the batch and its gradient with respect to `pred`.
pub fn batch_loss<T: Scalar>(kind: &LossKind<T>, pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(format!("prediction shape {:?} vs target shape {:?}", pred.shape(), target.shape())));
    }
    check_targets(target)?;
    let (n, k) = (pred.rows(), pred.cols());
    let scale = T::one() / T::from_count(n);
    let eps = T::log_clamp();
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(pred.shape().to_vec());

    // d/dq of -Σ t·ln(max(q, ε)) is -t/q above the clamp and 0 below it.
    let ce_grad = |t: &[T], q: &[T], out: &mut [T]| {
        for j in 0..t.len() {
            out[j] = if t[j] != T::zero() && q[j] > eps { -t[j] / q[j] * scale } else { T::zero() };
        }
    };

    match kind {
        LossKind::CrossEntropy => {
            for r in 0..n {
                loss += cross_entropy(target.row(r), pred.row(r))?;
                ce_grad(target.row(r), pred.row(r), grad.row_mut(r));
            }
        }
        LossKind::ForwardCorrected(tm) => {
            if tm.shape() != [k, k] {
                return Err(Error::dim(format!("transition matrix shape {:?} does not match {k} classes", tm.shape())));
            }
            let tmd = tm.data();
            let mut q = vec![T::zero(); k];
            let mut gq = vec![T::zero(); k];
            for r in 0..n {
                let p = pred.row(r);
                for j in 0..k {
                    q[j] = (0..k).map(|i| tmd[i * k + j] * p[i]).sum();
                }
                // Rounding can push q marginally past 1.
                for v in q.iter_mut() {
                    *v = v.min(T::one());
                }
                loss += cross_entropy(target.row(r), &q)?;
                ce_grad(target.row(r), &q, &mut gq);
                for (i, g) in grad.row_mut(r).iter_mut().enumerate() {
                    *g = (0..k).map(|j| tmd[i * k + j] * gq[j]).sum();
                }
            }
        }
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::numeric("loss is not finite"));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0f64, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_ln2_case() {
        let p = softmax(&[2f64.ln(), 0.0, 0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
        assert!((p[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(softmax::<f64>(&[]), Err(Error::Dimension(_))));
        assert!(matches!(softmax(&[0.0, f64::NAN]), Err(Error::Numeric(_))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::Numeric(_))));
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1000.0, 1000.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_cases() {
        let mut onehot = vec![0.0f64; 3];
        onehot[2] = 1.0;
        assert!(cross_entropy(&onehot, &onehot).unwrap().abs() < 1e-15);

        let mut t = vec![0.0; 10];
        t[4] = 1.0;
        let uniform = vec![0.1; 10];
        assert!((cross_entropy(&t, &uniform).unwrap() - 10f64.ln()).abs() < 1e-12);

        assert!(matches!(cross_entropy(&[1.0], &[0.5, 0.5]), Err(Error::Dimension(_))));
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let v = cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v + 1e-12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn unknown_loss_kind_is_config_error() {
        assert!(matches!(LossKind::<f64>::parse("hinge", None), Err(Error::Config(_))));
        assert!(matches!(LossKind::<f64>::parse("forward-corrected", None), Err(Error::Config(_))));
        assert_eq!(LossKind::<f64>::parse("cross-entropy", None).unwrap(), LossKind::CrossEntropy);
    }
}
