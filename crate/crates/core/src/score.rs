//! Blind quality scoring: restore each frame with the trained network and
//! summarize how close the restoration stays to the distorted input.
//!
//! The per-frame measure is PSNR between the clamped restoration and the
//! distorted frame; the video score is the mean of the natural logs of those
//! PSNRs. Two floors make the score total: MSE is floored so identical
//! frames give exactly 100 dB (at peak 1), and PSNR is floored above 0 dB
//! before the log.

use crate::error::{Error, Result};
use crate::net::{NetworkRole, NetworkWeights};
use crate::tensor::Tensor4;
use crate::video::{crop_frame, pad_to_divisible, FrameSequence};

/// MSE below this counts as a perfect match: at peak 1.0 the PSNR cap is
/// exactly 100.0 dB.
pub const MSE_FLOOR: f64 = 1e-10;

/// PSNRs below this (in dB) are lifted to it before taking the log.
pub const PSNR_FLOOR_DB: f64 = 1e-3;

/// Peak signal-to-noise ratio in dB: 10 log10(peak^2 / MSE).
pub fn psnr(a: &Tensor4, b: &Tensor4, peak: f64) -> Result<f64> {
    a.same_shape(b, "psnr")?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Config(format!("peak must be finite and > 0, got {peak}")));
    }
    let mut sum = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = x - y;
        sum += d * d;
    }
    let mse = sum / a.len() as f64;
    if !mse.is_finite() {
        return Err(Error::Contract("psnr inputs must be finite".into()));
    }
    if mse <= MSE_FLOOR {
        // evaluated at the floor; written so peak 1.0 gives exactly 100.0
        return Ok(20.0 * peak.log10() + 100.0);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// A scored video: the mean-log-PSNR score plus the raw (unfloored)
/// per-frame PSNRs that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityScore {
    pub score: f64,
    pub per_frame_psnr: Vec<f64>,
}

impl QualityScore {
    fn from_psnrs(per_frame_psnr: Vec<f64>) -> Self {
        let score = per_frame_psnr
            .iter()
            .map(|&p| p.max(PSNR_FLOOR_DB).ln())
            .sum::<f64>()
            / per_frame_psnr.len() as f64;
        QualityScore { score, per_frame_psnr }
    }

    pub fn frame_count(&self) -> usize {
        self.per_frame_psnr.len()
    }

    /// Recomputes the score from the stored PSNRs; equals `score` exactly.
    pub fn recompute(&self) -> f64 {
        Self::from_psnrs(self.per_frame_psnr.clone()).score
    }

    /// The score under a different log base (the mean rescales exactly).
    pub fn score_with_log_base(&self, base: f64) -> Result<f64> {
        if !(base.is_finite() && base > 0.0 && base != 1.0) {
            return Err(Error::Config(format!("log base must be > 0 and != 1, got {base}")));
        }
        Ok(self.score / base.ln())
    }

    pub fn min_psnr(&self) -> f64 {
        self.per_frame_psnr.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_psnr(&self) -> f64 {
        self.per_frame_psnr.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scores a distorted video against its own restorations. Frames are padded
/// to the network's divisibility factor, restored, cropped back, clamped to
/// [0,1], and compared to the unpadded input.
pub fn score_video(g: &NetworkWeights, distorted: &FrameSequence) -> Result<QualityScore> {
    if g.role() != NetworkRole::Restorer {
        return Err(Error::Contract("scoring requires restorer weights".into()));
    }
    let (padded, original_size) = pad_to_divisible(distorted, g.config().downsample_factor())?;
    let mut per_frame_psnr = Vec::with_capacity(distorted.frame_count());
    for (t, (padded_frame, original_frame)) in
        padded.frames().iter().zip(distorted.frames()).enumerate()
    {
        let restored = g.restore_frame(padded_frame)?;
        if restored.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Scoring(format!(
                "restoration of frame {} is not finite",
                t + 1
            )));
        }
        let restored = crop_frame(&restored, original_size)?;
        let clamped = Tensor4::new(
            restored.shape(),
            restored.values().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )?;
        per_frame_psnr.push(psnr(&clamped, original_frame, 1.0)?);
    }
    Ok(QualityScore::from_psnrs(per_frame_psnr))
}

/// One-line report: `video_id,score,T,min_psnr,max_psnr`, floats at full
/// round-trip precision.
pub fn report_line(video_id: &str, quality: &QualityScore) -> String {
    format!(
        "{video_id},{:?},{},{:?},{:?}",
        quality.score,
        quality.frame_count(),
        quality.min_psnr(),
        quality.max_psnr()
    )
}
