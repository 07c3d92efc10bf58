//! Forward kernels and their vector-Jacobian products.
//!
//! Everything is plain f64 loops over row-major buffers; batch size is one in
//! practice and no kernel spawns threads.

use crate::error::{Error, Result};
use crate::tensor::{ConvParams, Shape4, Tensor4};

/// Output spatial extent of a convolution along one axis:
/// (input + 2*padding - kernel) / stride + 1 with integer division.
/// Errors when the kernel does not fit the padded input (the output dim
/// would not be a positive integer).
pub(crate) fn conv_out_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return Err(Error::Config(format!(
            "kernel extent {kernel} exceeds padded input extent {padded}: output dim would not be a positive integer"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// 2D cross-correlation with zero padding, plus bias.
pub fn conv2d(input: &Tensor4, params: &ConvParams) -> Result<Tensor4> {
    conv2d_raw(
        input,
        &params.weights,
        &params.bias,
        params.stride,
        params.padding,
    )
}

/// `conv2d` with the weight tensor and bias passed separately; this is the
/// form the tape records.
#[allow(clippy::needless_range_loop)] // index arithmetic over several arrays
pub fn conv2d_raw(
    input: &Tensor4,
    weights: &Tensor4,
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Result<Tensor4> {
    let ishape = input.shape();
    let wshape = weights.shape();
    if stride == 0 {
        return Err(Error::Config("conv stride must be >= 1".into()));
    }
    if ishape.c != wshape.c {
        return Err(Error::ShapeMismatch {
            context: "conv2d input channels vs kernel in_channels",
            left: ishape,
            right: wshape,
        });
    }
    if bias.len() != wshape.n {
        return Err(Error::Dimension(format!(
            "bias length {} does not match {} output channels",
            bias.len(),
            wshape.n
        )));
    }
    let out_h = conv_out_extent(ishape.h, wshape.h, stride, padding)?;
    let out_w = conv_out_extent(ishape.w, wshape.w, stride, padding)?;
    let oshape = Shape4::new(ishape.n, wshape.n, out_h, out_w);

    let mut out = vec![0.0; oshape.len()];
    let iv = input.values();
    let wv = weights.values();
    let mut o = 0;
    for n in 0..ishape.n {
        for oc in 0..wshape.n {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let mut acc = bias[oc];
                    for ic in 0..ishape.c {
                        for ky in 0..wshape.h {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= ishape.h as isize {
                                continue;
                            }
                            let irow = ((n * ishape.c + ic) * ishape.h + iy as usize) * ishape.w;
                            let wrow = ((oc * wshape.c + ic) * wshape.h + ky) * wshape.w;
                            for kx in 0..wshape.w {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= ishape.w as isize {
                                    continue;
                                }
                                acc += iv[irow + ix as usize] * wv[wrow + kx];
                            }
                        }
                    }
                    out[o] = acc;
                    o += 1;
                }
            }
        }
    }
    Ok(Tensor4::from_raw(oshape, out))
}

/// Gradients of `conv2d_raw` w.r.t. input, weights and bias.
#[allow(clippy::too_many_arguments)] // three optional gradient sinks plus geometry
pub(crate) fn conv2d_backward(
    input: &Tensor4,
    weights: &Tensor4,
    stride: usize,
    padding: usize,
    grad_out: &[f64],
    grad_input: Option<&mut [f64]>,
    grad_weights: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) {
    let ishape = input.shape();
    let wshape = weights.shape();
    let out_h = (ishape.h + 2 * padding - wshape.h) / stride + 1;
    let out_w = (ishape.w + 2 * padding - wshape.w) / stride + 1;
    let iv = input.values();
    let wv = weights.values();

    let mut gi = grad_input;
    let mut gw = grad_weights;
    let mut gb = grad_bias;

    let mut o = 0;
    for n in 0..ishape.n {
        for oc in 0..wshape.n {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let g = grad_out[o];
                    o += 1;
                    if let Some(gb) = gb.as_deref_mut() {
                        gb[oc] += g;
                    }
                    for ic in 0..ishape.c {
                        for ky in 0..wshape.h {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= ishape.h as isize {
                                continue;
                            }
                            let irow = ((n * ishape.c + ic) * ishape.h + iy as usize) * ishape.w;
                            let wrow = ((oc * wshape.c + ic) * wshape.h + ky) * wshape.w;
                            for kx in 0..wshape.w {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= ishape.w as isize {
                                    continue;
                                }
                                if let Some(gw) = gw.as_deref_mut() {
                                    gw[wrow + kx] += g * iv[irow + ix as usize];
                                }
                                if let Some(gi) = gi.as_deref_mut() {
                                    gi[irow + ix as usize] += g * wv[wrow + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Elementwise x -> x for x >= 0, slope * x otherwise.
pub fn leaky_relu(input: &Tensor4, slope: f64) -> Result<Tensor4> {
    check_slope(slope)?;
    let values = input
        .values()
        .iter()
        .map(|&x| if x >= 0.0 { x } else { slope * x })
        .collect();
    Ok(Tensor4::from_raw(input.shape(), values))
}

pub(crate) fn check_slope(slope: f64) -> Result<()> {
    if !(0.0..1.0).contains(&slope) {
        return Err(Error::Config(format!(
            "leaky_relu slope must be in [0, 1), got {slope}"
        )));
    }
    Ok(())
}

pub(crate) fn leaky_relu_backward(
    input: &Tensor4,
    slope: f64,
    grad_out: &[f64],
    grad_input: &mut [f64],
) {
    for (i, &x) in input.values().iter().enumerate() {
        let d = if x >= 0.0 { 1.0 } else { slope };
        grad_input[i] += grad_out[i] * d;
    }
}

/// Nearest-neighbour upsampling: every pixel becomes a factor x factor block.
pub fn upsample_nearest(input: &Tensor4, factor: usize) -> Result<Tensor4> {
    if factor == 0 {
        return Err(Error::Config("upsample factor must be >= 1".into()));
    }
    let s = input.shape();
    let oshape = Shape4::new(s.n, s.c, s.h * factor, s.w * factor);
    let iv = input.values();
    let mut out = vec![0.0; oshape.len()];
    for n in 0..s.n {
        for c in 0..s.c {
            for oy in 0..oshape.h {
                let irow = ((n * s.c + c) * s.h + oy / factor) * s.w;
                let orow = ((n * s.c + c) * oshape.h + oy) * oshape.w;
                for ox in 0..oshape.w {
                    out[orow + ox] = iv[irow + ox / factor];
                }
            }
        }
    }
    Ok(Tensor4::from_raw(oshape, out))
}

pub(crate) fn upsample_nearest_backward(
    in_shape: Shape4,
    factor: usize,
    grad_out: &[f64],
    grad_input: &mut [f64],
) {
    let oh = in_shape.h * factor;
    let ow = in_shape.w * factor;
    for n in 0..in_shape.n {
        for c in 0..in_shape.c {
            for oy in 0..oh {
                let irow = ((n * in_shape.c + c) * in_shape.h + oy / factor) * in_shape.w;
                let orow = ((n * in_shape.c + c) * oh + oy) * ow;
                for ox in 0..ow {
                    grad_input[irow + ox / factor] += grad_out[orow + ox];
                }
            }
        }
    }
}

/// Mean absolute difference over all elements.
pub fn l1_mean(a: &Tensor4, b: &Tensor4) -> Result<f64> {
    a.same_shape(b, "l1_mean")?;
    let n = a.len() as f64;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / n)
}

/// Subgradient of `l1_mean` w.r.t. both arguments: sign(a - b) / N into `a`,
/// the negation into `b`. Zero where the arguments agree.
pub(crate) fn l1_mean_backward(
    a: &Tensor4,
    b: &Tensor4,
    grad_scalar: f64,
    grad_a: Option<&mut [f64]>,
    grad_b: Option<&mut [f64]>,
) {
    let inv_n = grad_scalar / a.len() as f64;
    let mut ga = grad_a;
    let mut gb = grad_b;
    for (i, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        let s = if x > y {
            1.0
        } else if x < y {
            -1.0
        } else {
            0.0
        };
        if let Some(ga) = ga.as_deref_mut() {
            ga[i] += s * inv_n;
        }
        if let Some(gb) = gb.as_deref_mut() {
            gb[i] -= s * inv_n;
        }
    }
}
