//! Single-pair training: fit the restorer so it maps each distorted frame
//! toward its original, under the feature-space L1 loss.
//!
//! One optimizer step per frame, frames in temporal order, for a fixed number
//! of epochs. The feature extractor is rebuilt from its fixed seed and never
//! updated; only the restorer's parameters move.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config;
use crate::error::{Error, Result};
use crate::net::{
    build_feature_extractor, build_network, check_loss_weights, FeatureStack, NetworkConfig,
    NetworkRole, NetworkWeights, TapedNetwork,
};
use crate::tensor::{adam_step, AdamParams, NodeId, OptimizerState, Tape, Tensor4};
use crate::video::{pad_to_divisible, FrameSequence};

/// Training knobs. `loss_layer_weights` may be left empty to mean "1.0 for
/// the pixel term and every feature map" (its required length depends on the
/// network config).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: AdamParams,
    pub loss_layer_weights: Vec<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            optimizer: AdamParams::default(),
            loss_layer_weights: Vec::new(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }

    /// The effective per-layer loss weights for a network with `stages`
    /// feature maps (empty means all ones).
    pub fn resolve_loss_weights(&self, stages: usize) -> Result<Vec<f64>> {
        let weights = if self.loss_layer_weights.is_empty() {
            vec![1.0; stages + 1]
        } else {
            self.loss_layer_weights.clone()
        };
        check_loss_weights(&weights, stages)?;
        Ok(weights)
    }

    pub fn to_kv_pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = vec![
            ("epochs", self.epochs.to_string()),
            ("learning_rate", format!("{:?}", self.optimizer.learning_rate)),
            ("beta1", format!("{:?}", self.optimizer.beta1)),
            ("beta2", format!("{:?}", self.optimizer.beta2)),
            ("epsilon", format!("{:?}", self.optimizer.epsilon)),
            ("train_seed", self.seed.to_string()),
        ];
        if !self.loss_layer_weights.is_empty() {
            pairs.push(("loss_layer_weights", config::format_list(&self.loss_layer_weights)));
        }
        pairs
    }

    /// Consumes this type's keys from a parsed map; absent keys keep their
    /// defaults. The seed key is `train_seed` (never `seed`) so a config file
    /// shared with a NetworkConfig stays unambiguous.
    pub fn from_kv_map(map: &mut BTreeMap<String, String>) -> Result<Self> {
        let defaults = TrainConfig::default();
        let loss_layer_weights = match map.remove("loss_layer_weights") {
            Some(raw) => config::parse_list(&raw, "loss_layer_weights")?,
            None => Vec::new(),
        };
        let cfg = TrainConfig {
            epochs: config::take_or(map, "epochs", defaults.epochs)?,
            optimizer: AdamParams {
                learning_rate: config::take_or(
                    map,
                    "learning_rate",
                    defaults.optimizer.learning_rate,
                )?,
                beta1: config::take_or(map, "beta1", defaults.optimizer.beta1)?,
                beta2: config::take_or(map, "beta2", defaults.optimizer.beta2)?,
                epsilon: config::take_or(map, "epsilon", defaults.optimizer.epsilon)?,
            },
            loss_layer_weights,
            seed: config::take_or(map, "train_seed", defaults.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// 1-based frame index within the epoch.
    pub frame: usize,
    pub loss: f64,
}

/// Every per-step loss of a training run, in (epoch, frame) order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    records: Vec<LossRecord>,
}

impl LossTrace {
    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Mean loss over one 1-based epoch, or None if the epoch is absent.
    pub fn epoch_mean(&self, epoch: usize) -> Option<f64> {
        let losses: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.epoch == epoch)
            .map(|r| r.loss)
            .collect();
        if losses.is_empty() {
            None
        } else {
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        }
    }

    pub fn last_epoch(&self) -> Option<usize> {
        self.records.last().map(|r| r.epoch)
    }

    /// CSV with header `epoch,frame,loss`; losses keep full round-trip
    /// precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,frame,loss\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{:?}\n", r.epoch, r.frame, r.loss));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Records the loss graph on a tape: weighted sum of the pixel-space L1 term
/// and per-layer feature L1 terms against precomputed original features.
/// Zero-weight terms are skipped (they contribute nothing to value or grad).
pub fn stage_perceptual_loss(
    tape: &mut Tape,
    restored: NodeId,
    original: &Tensor4,
    original_features: &FeatureStack,
    extractor: &TapedNetwork,
    weights: &[f64],
) -> Result<NodeId> {
    check_loss_weights(weights, original_features.len())?;
    let mut terms = Vec::with_capacity(weights.len());
    if weights[0] != 0.0 {
        let original_node = tape.constant(original.clone());
        let pixel = tape.l1_mean(restored, original_node)?;
        terms.push((weights[0], pixel));
    }
    if weights[1..].iter().any(|&w| w != 0.0) {
        let restored_maps = extractor.features(tape, restored)?;
        for ((node, map), &w) in restored_maps.iter().zip(original_features.maps()).zip(&weights[1..])
        {
            if w != 0.0 {
                let target = tape.constant(map.clone());
                let term = tape.l1_mean(*node, target)?;
                terms.push((w, term));
            }
        }
    }
    tape.weighted_sum(&terms)
}

/// Trains the restorer on one original/distorted pair. The restorer is
/// initialized from the network config with the train seed; the returned
/// trace has exactly epochs x frame_count records.
pub fn train_pair(
    original: &FrameSequence,
    distorted: &FrameSequence,
    net_cfg: &NetworkConfig,
    train_cfg: &TrainConfig,
) -> Result<(NetworkWeights, LossTrace)> {
    train_cfg.validate()?;
    if original.frame_count() != distorted.frame_count() {
        return Err(Error::Pairing(format!(
            "original has {} frames, distorted has {}",
            original.frame_count(),
            distorted.frame_count()
        )));
    }
    if original.frame_shape() != distorted.frame_shape() {
        return Err(Error::Pairing(format!(
            "original frames are {}, distorted frames are {}",
            original.frame_shape(),
            distorted.frame_shape()
        )));
    }
    let channels = original.frame_shape().c;
    if net_cfg.in_channels != channels || net_cfg.out_channels != channels {
        return Err(Error::Dimension(format!(
            "network is {}->{} channels but the pair has {channels}",
            net_cfg.in_channels, net_cfg.out_channels
        )));
    }

    // The train seed fixes the restorer init; one run, one seed.
    let mut init_cfg = net_cfg.clone();
    init_cfg.seed = train_cfg.seed;
    let mut restorer = build_network(&init_cfg, NetworkRole::Restorer)?;
    let extractor = build_feature_extractor(&init_cfg)?;
    let loss_weights = train_cfg.resolve_loss_weights(init_cfg.stage_count())?;

    let factor = init_cfg.downsample_factor();
    let (original, _) = pad_to_divisible(original, factor)?;
    let (distorted, _) = pad_to_divisible(distorted, factor)?;

    // F(O_t) never changes across steps; compute the stacks once.
    let original_features: Vec<FeatureStack> = original
        .frames()
        .iter()
        .map(|frame| extractor.extract_features(frame))
        .collect::<Result<Vec<_>>>()?;

    let mut flat = restorer.flatten_params();
    let mut opt = OptimizerState::new(flat.len(), train_cfg.optimizer);
    let mut records = Vec::with_capacity(train_cfg.epochs * distorted.frame_count());

    for epoch in 1..=train_cfg.epochs {
        for (t, d_frame) in distorted.frames().iter().enumerate() {
            let mut tape = Tape::new();
            let staged_restorer = restorer.stage_on_tape(&mut tape, true)?;
            let staged_extractor = extractor.stage_on_tape(&mut tape, false)?;
            let input = tape.constant(d_frame.clone());
            let restored = staged_restorer.restore(&mut tape, input)?;
            let loss_node = stage_perceptual_loss(
                &mut tape,
                restored,
                &original.frames()[t],
                &original_features[t],
                &staged_extractor,
                &loss_weights,
            )?;
            let loss = tape.value(loss_node).scalar()?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, frame: t + 1 });
            }
            tape.backward(loss_node)?;
            let grads = staged_restorer.flat_grads(&tape)?;
            adam_step(&mut flat, &grads, &mut opt).map_err(|e| match e {
                // non-finite parameters after the update are divergence too
                Error::State(_) => Error::Divergence { epoch, frame: t + 1 },
                other => other,
            })?;
            restorer.unflatten_params(&flat)?;
            records.push(LossRecord { epoch, frame: t + 1, loss });
        }
    }
    Ok((restorer, LossTrace { records }))
}
