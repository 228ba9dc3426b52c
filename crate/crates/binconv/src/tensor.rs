//! Dense row-major tensors and trainable parameters with Adam state.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![S::zero(); len],
        }
    }

    pub fn from_f64_slice(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| S::from_f64(v)).collect())
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A tensor with gradient and Adam moment buffers.
#[derive(Debug, Clone)]
pub struct Parameter<S: Scalar> {
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
    pub adam_m: Tensor<S>,
    pub adam_v: Tensor<S>,
    pub step: u64,
}

impl<S: Scalar> Parameter<S> {
    pub fn new(value: Tensor<S>) -> Self {
        let shape = value.shape().to_vec();
        Self {
            value,
            grad: Tensor::zeros(shape.clone()),
            adam_m: Tensor::zeros(shape.clone()),
            adam_v: Tensor::zeros(shape),
            step: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(S::zero());
    }

    pub fn accumulate_grad(&mut self, grad: &Tensor<S>) {
        debug_assert_eq!(self.grad.shape(), grad.shape());
        for (g, &d) in self.grad.data_mut().iter_mut().zip(grad.data()) {
            *g += d;
        }
    }
}
