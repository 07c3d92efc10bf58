//! Synthetic distortions with controlled severity.
//!
//! Three kinds: additive white Gaussian noise (severity = sigma in intensity
//! units), separable Gaussian blur (sigma in pixels, truncated at 3 sigma,
//! edge replication), and 8x8 block quantization (step in intensity units, a
//! cheap blockiness surrogate). Severity 0 is the bit-exact identity for all
//! kinds; output intensities are clamped back to [0,1].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;
use crate::video::FrameSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistortionKind {
    Awgn,
    GaussianBlur,
    BlockQuantize,
}

impl DistortionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistortionKind::Awgn => "awgn",
            DistortionKind::GaussianBlur => "gaussian_blur",
            DistortionKind::BlockQuantize => "block_quantize",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(DistortionKind::Awgn),
            "gaussian_blur" => Ok(DistortionKind::GaussianBlur),
            "block_quantize" => Ok(DistortionKind::BlockQuantize),
            other => Err(Error::Config(format!("unknown distortion kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub severity: f64,
    /// Drives the noise generator; ignored by the deterministic kinds.
    pub seed: u64,
}

impl DistortionSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.severity.is_finite() || self.severity < 0.0 {
            return Err(Error::Config(format!(
                "severity must be finite and >= 0, got {}",
                self.severity
            )));
        }
        Ok(())
    }
}

pub fn apply_distortion(seq: &FrameSequence, spec: &DistortionSpec) -> Result<FrameSequence> {
    spec.validate()?;
    if spec.severity == 0.0 {
        return Ok(seq.clone());
    }
    let frames = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(t, frame)| match spec.kind {
            DistortionKind::Awgn => awgn_frame(frame, spec.severity, spec.seed ^ t as u64),
            DistortionKind::GaussianBlur => blur_frame(frame, spec.severity),
            DistortionKind::BlockQuantize => block_quantize_frame(frame, spec.severity),
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, seq.channel_mode())
}

/// One distorted copy per severity; rung i uses seed base_seed + i, so a
/// ladder is reproducible from (sequence, kind, severities, base_seed).
pub fn severity_ladder(
    seq: &FrameSequence,
    kind: DistortionKind,
    severities: &[f64],
    base_seed: u64,
) -> Result<Vec<FrameSequence>> {
    let strictly_rising = |pair: &[f64]| {
        pair[0].partial_cmp(&pair[1]) == Some(std::cmp::Ordering::Less)
    };
    if !severities.windows(2).all(strictly_rising) {
        return Err(Error::Config(format!(
            "severities must be strictly increasing, got {severities:?}"
        )));
    }
    severities
        .iter()
        .enumerate()
        .map(|(i, &severity)| {
            let spec = DistortionSpec { kind, severity, seed: base_seed + i as u64 };
            apply_distortion(seq, &spec)
        })
        .collect()
}

fn awgn_frame(frame: &Tensor4, sigma: f64, seed: u64) -> Result<Tensor4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = frame
        .values()
        .iter()
        .map(|&v| {
            let noise: f64 = rng.sample(StandardNormal);
            (v + sigma * noise).clamp(0.0, 1.0)
        })
        .collect();
    Tensor4::new(frame.shape(), values)
}

/// Half kernel [k_0 .. k_r] of a Gaussian truncated at 3 sigma, normalized so
/// the full symmetric kernel sums to 1.
fn gaussian_half_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut half: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = half[0] + 2.0 * half[1..].iter().sum::<f64>();
    for k in half.iter_mut() {
        *k /= total;
    }
    half
}

fn blur_frame(frame: &Tensor4, sigma: f64) -> Result<Tensor4> {
    let half = gaussian_half_kernel(sigma);
    let horizontal = blur_axis(frame, &half, false)?;
    let vertical = blur_axis(&horizontal, &half, true)?;
    let values = vertical.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Tensor4::new(frame.shape(), values)
}

/// One separable pass. Written as center + sum of weighted neighbor deltas,
/// which is algebraically the normalized kernel but bit-exact on constant
/// inputs (every delta is exactly zero).
fn blur_axis(frame: &Tensor4, half: &[f64], vertical: bool) -> Result<Tensor4> {
    let shape = frame.shape();
    let mut values = Vec::with_capacity(shape.len());
    for n in 0..shape.n {
        for c in 0..shape.c {
            for y in 0..shape.h {
                for x in 0..shape.w {
                    let center = frame.at(n, c, y, x);
                    let mut acc = center;
                    for (i, &weight) in half.iter().enumerate().skip(1) {
                        let (lo, hi) = if vertical {
                            let lo_y = y.saturating_sub(i);
                            let hi_y = (y + i).min(shape.h - 1);
                            (frame.at(n, c, lo_y, x), frame.at(n, c, hi_y, x))
                        } else {
                            let lo_x = x.saturating_sub(i);
                            let hi_x = (x + i).min(shape.w - 1);
                            (frame.at(n, c, y, lo_x), frame.at(n, c, y, hi_x))
                        };
                        acc += weight * ((lo - center) + (hi - center));
                    }
                    values.push(acc);
                }
            }
        }
    }
    Tensor4::new(shape, values)
}

const BLOCK: usize = 8;

/// Per 8x8 block (clipped at borders): keep the block mean, round the
/// deviation from it to multiples of `step`.
fn block_quantize_frame(frame: &Tensor4, step: f64) -> Result<Tensor4> {
    let shape = frame.shape();
    let mut values = frame.values().to_vec();
    for n in 0..shape.n {
        for c in 0..shape.c {
            for by in (0..shape.h).step_by(BLOCK) {
                for bx in (0..shape.w).step_by(BLOCK) {
                    let y_end = (by + BLOCK).min(shape.h);
                    let x_end = (bx + BLOCK).min(shape.w);
                    let count = ((y_end - by) * (x_end - bx)) as f64;
                    let mut dc = 0.0;
                    for y in by..y_end {
                        for x in bx..x_end {
                            dc += frame.at(n, c, y, x);
                        }
                    }
                    dc /= count;
                    for y in by..y_end {
                        for x in bx..x_end {
                            let idx = frame.idx(n, c, y, x);
                            let quantized = dc + ((values[idx] - dc) / step).round() * step;
                            values[idx] = quantized.clamp(0.0, 1.0);
                        }
                    }
                }
            }
        }
    }
    Tensor4::new(shape, values)
}
