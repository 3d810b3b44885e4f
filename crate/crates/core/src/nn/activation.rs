use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Element-wise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: &Tensor<T>) -> Tensor<T> {
        match self {
            Activation::Relu => x.map(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Tanh => x.map(|v| v.tanh()),
            Activation::Sigmoid => x.map(sigmoid),
        }
    }

    /// Gradient w.r.t. the input, expressed through the forward output.
    pub fn backward<T: Scalar>(self, output: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let one = T::one();
        let data = output
            .data()
            .iter()
            .zip(dy.data())
            .map(|(&y, &g)| match self {
                Activation::Relu => {
                    if y > T::zero() {
                        g
                    } else {
                        T::zero()
                    }
                }
                Activation::Tanh => g * (one - y * y),
                Activation::Sigmoid => g * y * (one - y),
            })
            .collect();
        Tensor::new(output.shape().to_vec(), data).expect("same shape")
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    let one = T::one();
    if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

/// Softmax over the last axis, stabilised by subtracting the row maximum.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let width = *x.shape().last().expect("softmax needs rank >= 1");
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(width) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Backward of softmax over the last axis: `dz = p ⊙ (dp − Σ p·dp)`.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, dprobs: &Tensor<T>) -> Tensor<T> {
    let width = *probs.shape().last().expect("rank >= 1");
    let mut out = Vec::with_capacity(probs.len());
    for (p, dp) in probs
        .data()
        .chunks_exact(width)
        .zip(dprobs.data().chunks_exact(width))
    {
        let dot: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
        out.extend(p.iter().zip(dp).map(|(&a, &b)| a * (b - dot)));
    }
    Tensor::new(probs.shape().to_vec(), out).expect("same shape")
}

/// Scalar loss and its gradient w.r.t. the logits.
#[derive(Clone, Debug)]
pub struct LossOutput<T> {
    pub loss: f64,
    pub grad: Tensor<T>,
}

/// Softmax cross-entropy fused with its softmax; the gradient is
/// `w_r (p − y) / denom` for row weight `w_r`.
///
/// Every target row with non-zero weight must be a probability
/// distribution. The loss is the weighted sum of row losses divided by
/// `denom`, which lets callers normalise by a full batch while scoring only
/// part of it.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    targets: &Tensor<T>,
    row_weights: Option<&[T]>,
    denom: usize,
) -> Result<LossOutput<T>> {
    if logits.shape() != targets.shape() || logits.rank() != 2 {
        return Err(Error::dim(
            "cross_entropy",
            format!(
                "logits {:?} vs targets {:?}",
                logits.shape(),
                targets.shape()
            ),
        ));
    }
    let (rows, width) = (logits.dim(0), logits.dim(1));
    if row_weights.is_some_and(|w| w.len() != rows) {
        return Err(Error::dim("cross_entropy", "row weight count"));
    }
    let denom_t = T::from_usize(denom.max(1)).expect("usize fits");
    let mut grad = vec![T::zero(); logits.len()];
    let mut total = 0.0f64;
    for r in 0..rows {
        let w = row_weights.map_or(T::one(), |w| w[r]);
        if w == T::zero() {
            continue;
        }
        let z = &logits.data()[r * width..(r + 1) * width];
        let y = &targets.data()[r * width..(r + 1) * width];
        let sum: f64 = y.iter().map(|v| v.to_f64_lossy()).sum();
        if y.iter().any(|&v| v < T::zero() || !v.is_finite()) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidTarget(format!(
                "cross-entropy target row {r} is not a distribution (sum {sum})"
            )));
        }
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = z.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        let mut row_loss = T::zero();
        for k in 0..width {
            let log_p = z[k] - lse;
            if y[k] > T::zero() {
                row_loss += -y[k] * log_p;
            }
            grad[r * width + k] = w * (log_p.exp() - y[k]) / denom_t;
        }
        total += (w * row_loss).to_f64_lossy();
    }
    Ok(LossOutput {
        loss: total / denom.max(1) as f64,
        grad: Tensor::new(logits.shape().to_vec(), grad)?,
    })
}

/// Binary cross-entropy on logits, fused with the sigmoid; gradient is
/// `scale (σ(z) − y) / denom`. Targets must be exactly 0 or 1.
pub fn binary_cross_entropy_with_logits<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[T],
    scale: T,
    denom: usize,
) -> Result<LossOutput<T>> {
    if logits.len() != targets.len() {
        return Err(Error::dim(
            "binary_cross_entropy",
            format!("{} logits vs {} targets", logits.len(), targets.len()),
        ));
    }
    let denom_t = T::from_usize(denom.max(1)).expect("usize fits");
    let mut grad = Vec::with_capacity(targets.len());
    let mut total = 0.0f64;
    for (&z, &y) in logits.data().iter().zip(targets) {
        if y != T::zero() && y != T::one() {
            return Err(Error::InvalidTarget(format!(
                "binary target {:?} is not 0 or 1",
                y
            )));
        }
        // max(z, 0) − z y + ln(1 + e^{−|z|})
        let loss = z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
        total += (scale * loss).to_f64_lossy();
        grad.push(scale * (sigmoid(z) - y) / denom_t);
    }
    Ok(LossOutput {
        loss: total / denom.max(1) as f64,
        grad: Tensor::new(logits.shape().to_vec(), grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_uniform_logits_is_uniform() {
        let x = Tensor::<f64>::full(&[1, 19], 0.3);
        let p = softmax(&x);
        for &v in p.data() {
            assert!((v - 1.0 / 19.0).abs() < 1e-12);
        }
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let x = Tensor::<f32>::new(vec![1, 3], vec![1000.0, 1000.0, -1000.0]).unwrap();
        let p = softmax(&x);
        assert!(p.is_finite());
        assert!((p.data()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_and_bce_reference_values() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        let z = Tensor::<f64>::zeros(&[1]);
        let out = binary_cross_entropy_with_logits(&z, &[1.0], 1.0, 1).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_rejects_invalid_targets() {
        let z = Tensor::<f64>::zeros(&[1, 3]);
        let bad = Tensor::new(vec![1, 3], vec![0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&z, &bad, None, 1),
            Err(Error::InvalidTarget(_))
        ));
        let neg = Tensor::new(vec![1, 3], vec![1.5, -0.5, 0.0]).unwrap();
        assert!(softmax_cross_entropy(&z, &neg, None, 1).is_err());
        assert!(
            binary_cross_entropy_with_logits(&Tensor::<f64>::zeros(&[1]), &[0.5], 1.0, 1).is_err()
        );
    }

    #[test]
    fn uniform_prediction_costs_ln_k() {
        let k = 6;
        let z = Tensor::<f64>::zeros(&[2, k]);
        let mut y = Tensor::<f64>::zeros(&[2, k]);
        y.data_mut()[1] = 1.0;
        y.data_mut()[k + 4] = 1.0;
        let out = softmax_cross_entropy(&z, &y, None, 2).unwrap();
        assert!((out.loss - (k as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn fused_cross_entropy_gradient_matches_finite_differences() {
        let logits =
            Tensor::<f64>::new(vec![2, 4], vec![0.3, -1.2, 0.8, 0.1, 2.0, 0.5, -0.4, 1.1]).unwrap();
        let mut y = Tensor::<f64>::zeros(&[2, 4]);
        y.data_mut()[2] = 1.0;
        y.data_mut()[4] = 0.25;
        y.data_mut()[7] = 0.75;
        let analytic = softmax_cross_entropy(&logits, &y, None, 2).unwrap().grad;
        let eps = 1e-5;
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += eps;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= eps;
            let lp = softmax_cross_entropy(&plus, &y, None, 2).unwrap().loss;
            let lm = softmax_cross_entropy(&minus, &y, None, 2).unwrap().loss;
            let numeric = (lp - lm) / (2.0 * eps);
            let a = analytic.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "entry {i}: {a} vs {numeric}");
        }
    }

    #[test]
    fn activation_backward_uses_outputs() {
        let x = Tensor::<f64>::new(vec![3], vec![-1.0, 0.5, 2.0]).unwrap();
        let dy = Tensor::full(&[3], 1.0);
        let relu = Activation::Relu;
        assert_eq!(relu.backward(&relu.apply(&x), &dy).data(), &[0.0, 1.0, 1.0]);
        let s = Activation::Sigmoid.apply(&x);
        let g = Activation::Sigmoid.backward(&s, &dy);
        assert!((g.data()[1] - s.data()[1] * (1.0 - s.data()[1])).abs() < 1e-15);
        assert_eq!("tanh".parse::<Activation>().unwrap(), Activation::Tanh);
        assert!("gelu".parse::<Activation>().is_err());
    }
}
