use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// A trainable tensor together with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(Tensor::zeros(shape))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            value: self.value.cast(),
            grad: self.grad.cast(),
        }
    }
}

/// Uniform Glorot initialisation in `[-l, l]` with `l = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| {
        T::from_f64_lossy(rng.random_range(-limit..=limit))
    })
}

/// Anything owning named trainable parameters.
///
/// Visitation order is fixed by the implementor and is relied on by the
/// optimizer state, checkpoints and best-epoch snapshots.
pub trait Params<T: Scalar> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.len());
        n
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_params(&mut |name, _| names.push(name.to_string()));
        names
    }

    fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }

    /// Copies of all parameter values in visitation order.
    fn snapshot(&self) -> Vec<Tensor<T>> {
        let mut out = Vec::new();
        self.visit_params(&mut |_, p| out.push(p.value.clone()));
        out
    }

    fn restore(&mut self, values: &[Tensor<T>]) -> Result<()> {
        let mut idx = 0;
        let mut err = None;
        self.visit_params_mut(&mut |name, p| {
            match values.get(idx) {
                Some(v) if v.shape() == p.value.shape() => p.value = v.clone(),
                Some(v) if err.is_none() => {
                    err = Some(Error::dim(
                        name,
                        format!("restore shape {:?} vs {:?}", v.shape(), p.value.shape()),
                    ))
                }
                None if err.is_none() => {
                    err = Some(Error::dim(name, "snapshot has too few tensors"))
                }
                _ => {}
            }
            idx += 1;
        });
        match err {
            Some(e) => Err(e),
            None if idx != values.len() => Err(Error::dim(
                "restore",
                format!("snapshot has {} tensors, model has {idx}", values.len()),
            )),
            None => Ok(()),
        }
    }

    /// All `(name, value)` pairs in visitation order.
    fn named_values(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.visit_params(&mut |name, p| out.push((name.to_string(), p.value.clone())));
        out
    }
}

/// Visits the parameters of `child` with names prefixed by `prefix.`.
pub(crate) fn visit_child<T: Scalar, P: Params<T> + ?Sized>(
    prefix: &str,
    child: &P,
    f: &mut dyn FnMut(&str, &Param<T>),
) {
    child.visit_params(&mut |name, p| f(&format!("{prefix}.{name}"), p));
}

pub(crate) fn visit_child_mut<T: Scalar, P: Params<T> + ?Sized>(
    prefix: &str,
    child: &mut P,
    f: &mut dyn FnMut(&str, &mut Param<T>),
) {
    child.visit_params_mut(&mut |name, p| f(&format!("{prefix}.{name}"), p));
}
