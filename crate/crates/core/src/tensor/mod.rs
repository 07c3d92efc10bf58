//! Minimal differentiable tensor core: 4D tensors, the forward operations the
//! restoration network needs, reverse-mode gradients and an Adam optimizer.

mod adam;
mod ops;
mod tape;

pub use adam::{adam_step, AdamParams, OptimizerState};
pub use ops::{conv2d, conv2d_raw, l1_mean, leaky_relu, upsample_nearest};
pub use tape::{NodeId, Tape};

use std::fmt;

use crate::error::{Error, Result};

/// Shape of a 4D tensor: (batch, channels, height, width).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape4 { n, c, h, w }
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense 4D array in row-major (n, c, h, w) order, with an optional gradient
/// buffer of identical shape. Values are kept finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor4 {
    /// Builds a tensor, rejecting length mismatches and non-finite values.
    pub fn new(shape: Shape4, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "value buffer has {} elements but shape {} needs {}",
                values.len(),
                shape,
                shape.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "non-finite value {v} in tensor of shape {shape}"
            )));
        }
        Ok(Tensor4 {
            shape,
            values,
            grad: None,
        })
    }

    /// Builds without the finiteness scan. For op outputs only: overflow to
    /// inf/NaN inside a forward pass must stay representable so the training
    /// loop can report it as divergence at the loss, not as a tensor bug.
    pub(crate) fn from_raw(shape: Shape4, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Tensor4 {
            shape,
            values,
            grad: None,
        }
    }

    pub fn zeros(shape: Shape4) -> Self {
        Tensor4 {
            shape,
            values: vec![0.0; shape.len()],
            grad: None,
        }
    }

    pub fn filled(shape: Shape4, value: f64) -> Result<Self> {
        Tensor4::new(shape, vec![value; shape.len()])
    }

    /// 1x1x1x1 tensor holding one number.
    pub fn scalar_value(value: f64) -> Result<Self> {
        Tensor4::new(Shape4::new(1, 1, 1, 1), vec![value])
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for in-place parameter updates. The caller is
    /// responsible for keeping values finite; `adam_step` re-validates.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.values.len() {
            return Err(Error::Dimension(format!(
                "gradient buffer has {} elements, tensor {} needs {}",
                grad.len(),
                self.shape,
                self.values.len()
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Flat index of element (n, c, y, x).
    #[inline]
    pub fn idx(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.values[self.idx(n, c, y, x)]
    }

    /// The single value of a 1x1x1x1 tensor.
    pub fn scalar(&self) -> Result<f64> {
        if self.values.len() == 1 {
            Ok(self.values[0])
        } else {
            Err(Error::Contract(format!(
                "expected a scalar tensor, got shape {}",
                self.shape
            )))
        }
    }

    pub(crate) fn same_shape(&self, other: &Tensor4, context: &'static str) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                context,
                left: self.shape,
                right: other.shape,
            })
        }
    }
}

/// One convolution layer: weights laid out (out_channels, in_channels, kh, kw)
/// plus a per-output-channel bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Tensor4,
    pub bias: Vec<f64>,
}

impl ConvParams {
    #[allow(clippy::too_many_arguments)] // full layer geometry in one call
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
        weights: Tensor4,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("conv stride must be >= 1".into()));
        }
        let expected = Shape4::new(out_channels, in_channels, kernel_h, kernel_w);
        if weights.shape() != expected {
            return Err(Error::ShapeMismatch {
                context: "conv weights",
                left: weights.shape(),
                right: expected,
            });
        }
        if bias.len() != out_channels {
            return Err(Error::Dimension(format!(
                "bias length {} does not match {} output channels",
                bias.len(),
                out_channels
            )));
        }
        if let Some(b) = bias.iter().find(|b| !b.is_finite()) {
            return Err(Error::Contract(format!("non-finite bias value {b}")));
        }
        Ok(ConvParams {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            weights,
            bias,
        })
    }

    /// Number of trainable values in this layer.
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}
