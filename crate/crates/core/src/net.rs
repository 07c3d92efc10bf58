//! The restoration network and the frozen feature extractor.
//!
//! Both are small fully convolutional nets built from one config. The
//! restorer is an encoder-decoder whose output shape equals its input shape;
//! the extractor is the encoder alone, with randomly initialized weights that
//! are never trained. Feature maps from the extractor feed the training loss.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config;
use crate::error::{Error, Result};
use crate::tensor::{conv2d, l1_mean, leaky_relu, upsample_nearest};
use crate::tensor::{ConvParams, NodeId, Shape4, Tape, Tensor4};

/// Seed for the shared frozen feature extractor. Fixed so every training run
/// measures features in the same space regardless of the restorer's seed.
pub const EXTRACTOR_SEED: u64 = 0x0f_ea_7e_5e;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"DVPW";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkRole {
    /// Maps a distorted frame to a restored frame (shape preserved).
    Restorer,
    /// Encoder-only net producing the feature stack used by the loss.
    Extractor,
}

impl NetworkRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkRole::Restorer => "restorer",
            NetworkRole::Extractor => "extractor",
        }
    }
}

impl fmt::Display for NetworkRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "restorer" => Ok(NetworkRole::Restorer),
            "extractor" => Ok(NetworkRole::Extractor),
            other => Err(Error::Config(format!("unknown network role `{other}`"))),
        }
    }
}

/// Architecture description. `encoder_channels` lists the output channels of
/// each stride-2 encoder stage; the decoder mirrors it.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub encoder_channels: Vec<usize>,
    pub kernel_size: usize,
    pub activation_slope: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            in_channels: 1,
            out_channels: 1,
            encoder_channels: vec![16, 32, 64],
            kernel_size: 3,
            activation_slope: 0.2,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("channel counts must be >= 1".into()));
        }
        if self.encoder_channels.is_empty() {
            return Err(Error::Config("encoder_channels must be non-empty".into()));
        }
        if self.encoder_channels.contains(&0) {
            return Err(Error::Config("encoder channel counts must be >= 1".into()));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if !(0.0..1.0).contains(&self.activation_slope) {
            return Err(Error::Config(format!(
                "activation_slope must lie in [0, 1), got {}",
                self.activation_slope
            )));
        }
        Ok(())
    }

    /// Number of encoder stages (and of feature maps in a stack).
    pub fn stage_count(&self) -> usize {
        self.encoder_channels.len()
    }

    /// Spatial shrink factor across the whole encoder: 2 per stage.
    pub fn downsample_factor(&self) -> usize {
        1 << self.stage_count()
    }

    pub fn to_kv_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("in_channels", self.in_channels.to_string()),
            ("out_channels", self.out_channels.to_string()),
            ("encoder_channels", config::format_list(&self.encoder_channels)),
            ("kernel_size", self.kernel_size.to_string()),
            ("activation_slope", format!("{:?}", self.activation_slope)),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Consumes this type's keys from a parsed key/value map; absent keys keep
    /// their defaults. Leftover-key detection is the caller's job.
    pub fn from_kv_map(map: &mut BTreeMap<String, String>) -> Result<Self> {
        let defaults = NetworkConfig::default();
        let encoder_channels = match map.remove("encoder_channels") {
            Some(raw) => config::parse_list(&raw, "encoder_channels")?,
            None => defaults.encoder_channels.clone(),
        };
        let cfg = NetworkConfig {
            in_channels: config::take_or(map, "in_channels", defaults.in_channels)?,
            out_channels: config::take_or(map, "out_channels", defaults.out_channels)?,
            encoder_channels,
            kernel_size: config::take_or(map, "kernel_size", defaults.kernel_size)?,
            activation_slope: config::take_or(map, "activation_slope", defaults.activation_slope)?,
            seed: config::take_or(map, "seed", defaults.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Shape and wiring of one conv stage in forward order.
#[derive(Clone, Copy, Debug)]
struct StagePlan {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    upsample_before: bool,
    activated: bool,
}

fn layer_plan(cfg: &NetworkConfig, role: NetworkRole) -> Result<Vec<StagePlan>> {
    cfg.validate()?;
    let enc = &cfg.encoder_channels;
    let stages = enc.len();
    let pad = (cfg.kernel_size - 1) / 2;
    let mut plan = Vec::new();
    for (i, &oc) in enc.iter().enumerate() {
        plan.push(StagePlan {
            out_channels: oc,
            in_channels: if i == 0 { cfg.in_channels } else { enc[i - 1] },
            kernel: cfg.kernel_size,
            stride: 2,
            padding: pad,
            upsample_before: false,
            activated: true,
        });
    }
    if role == NetworkRole::Restorer {
        for j in 0..stages {
            let depth = stages - 1 - j; // encoder stage being undone
            plan.push(StagePlan {
                out_channels: if depth == 0 { enc[0] } else { enc[depth - 1] },
                in_channels: enc[depth],
                kernel: cfg.kernel_size,
                stride: 1,
                padding: pad,
                upsample_before: true,
                activated: true,
            });
        }
        plan.push(StagePlan {
            out_channels: cfg.out_channels,
            in_channels: enc[0],
            kernel: 1,
            stride: 1,
            padding: 0,
            upsample_before: false,
            activated: false,
        });
    }
    Ok(plan)
}

/// Feature maps from each extractor stage, shallowest first.
#[derive(Clone, Debug)]
pub struct FeatureStack {
    maps: Vec<Tensor4>,
}

impl FeatureStack {
    pub fn maps(&self) -> &[Tensor4] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// A built network: config, role, and one ConvParams per stage in forward
/// order. Immutable during inference.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    config: NetworkConfig,
    role: NetworkRole,
    layers: Vec<ConvParams>,
}

/// Builds a network with weights drawn uniformly from [-a, a) per layer,
/// a = 1/sqrt(in_channels * kernel_h * kernel_w), biases zero. Deterministic
/// in (config, seed): the same pair always yields bit-identical weights.
pub fn build_network(cfg: &NetworkConfig, role: NetworkRole) -> Result<NetworkWeights> {
    let plan = layer_plan(cfg, role)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers = Vec::with_capacity(plan.len());
    for stage in &plan {
        let shape = Shape4::new(stage.out_channels, stage.in_channels, stage.kernel, stage.kernel);
        let fan_in = (stage.in_channels * stage.kernel * stage.kernel) as f64;
        let bound = (1.0 / fan_in).sqrt();
        let values: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(-bound..bound)).collect();
        layers.push(ConvParams::new(
            stage.out_channels,
            stage.in_channels,
            stage.kernel,
            stage.kernel,
            stage.stride,
            stage.padding,
            Tensor4::new(shape, values)?,
            vec![0.0; stage.out_channels],
        )?);
    }
    Ok(NetworkWeights { config: cfg.clone(), role, layers })
}

/// Builds the frozen extractor that all training runs share: same
/// architecture knobs as `cfg` but the fixed extractor seed.
pub fn build_feature_extractor(cfg: &NetworkConfig) -> Result<NetworkWeights> {
    let mut extractor_cfg = cfg.clone();
    extractor_cfg.seed = EXTRACTOR_SEED;
    build_network(&extractor_cfg, NetworkRole::Extractor)
}

impl NetworkWeights {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn role(&self) -> NetworkRole {
        self.role
    }

    pub fn layers(&self) -> &[ConvParams] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvParams::param_count).sum()
    }

    fn plan(&self) -> Vec<StagePlan> {
        layer_plan(&self.config, self.role).expect("stored config was validated at build time")
    }

    fn check_input_channels(&self, frame: &Tensor4) -> Result<()> {
        if frame.shape().c != self.config.in_channels {
            return Err(Error::Dimension(format!(
                "input has {} channels, network expects {}",
                frame.shape().c,
                self.config.in_channels
            )));
        }
        Ok(())
    }

    fn check_divisible(&self, frame: &Tensor4) -> Result<()> {
        let factor = self.config.downsample_factor();
        let shape = frame.shape();
        if !shape.h.is_multiple_of(factor) || !shape.w.is_multiple_of(factor) {
            return Err(Error::Dimension(format!(
                "spatial dims {}x{} are not divisible by the downsample factor {factor}; \
                 pad the input (pad_to_divisible) and crop the result back",
                shape.h, shape.w
            )));
        }
        Ok(())
    }

    /// Runs the restorer on one frame. Output shape equals input shape.
    pub fn restore_frame(&self, frame: &Tensor4) -> Result<Tensor4> {
        if self.role != NetworkRole::Restorer {
            return Err(Error::Contract(
                "restore_frame requires restorer weights, got an extractor".into(),
            ));
        }
        self.check_input_channels(frame)?;
        self.check_divisible(frame)?;
        let mut x = frame.clone();
        for (stage, params) in self.plan().iter().zip(&self.layers) {
            if stage.upsample_before {
                x = upsample_nearest(&x, 2)?;
            }
            x = conv2d(&x, params)?;
            if stage.activated {
                x = leaky_relu(&x, self.config.activation_slope)?;
            }
        }
        Ok(x)
    }

    /// Runs the extractor on one frame, returning one feature map per stage.
    pub fn extract_features(&self, frame: &Tensor4) -> Result<FeatureStack> {
        if self.role != NetworkRole::Extractor {
            return Err(Error::Contract(
                "extract_features requires extractor weights, got a restorer".into(),
            ));
        }
        self.check_input_channels(frame)?;
        let mut maps = Vec::with_capacity(self.layers.len());
        let mut x = frame.clone();
        for params in &self.layers {
            x = leaky_relu(&conv2d(&x, params)?, self.config.activation_slope)?;
            maps.push(x.clone());
        }
        Ok(FeatureStack { maps })
    }

    /// All trainable values in declaration order: each layer's weights then
    /// its bias. The inverse of `unflatten_params`.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            flat.extend_from_slice(layer.weights.values());
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    /// Writes a flat parameter vector (same order as `flatten_params`) back
    /// into the layers.
    pub fn unflatten_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::State(format!(
                "parameter vector length {} does not match network parameter count {}",
                flat.len(),
                self.param_count()
            )));
        }
        if let Some(v) = flat.iter().find(|v| !v.is_finite()) {
            return Err(Error::State(format!("non-finite parameter value {v}")));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.len();
            layer.weights.values_mut().copy_from_slice(&flat[offset..offset + w]);
            offset += w;
            let b = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + b]);
            offset += b;
        }
        Ok(())
    }

    /// Registers every layer on a tape. With `trainable` the parameters
    /// become gradient-bearing leaves; otherwise they are constants and
    /// gradients flow through inputs only.
    pub fn stage_on_tape(&self, tape: &mut Tape, trainable: bool) -> Result<TapedNetwork> {
        let mut stages = Vec::with_capacity(self.layers.len());
        for (stage, params) in self.plan().iter().zip(&self.layers) {
            let weights = if trainable {
                tape.param(params.weights.clone())
            } else {
                tape.constant(params.weights.clone())
            };
            let bias = tape.bias_param(&params.bias, trainable)?;
            stages.push(TapedStage {
                weights,
                bias,
                stride: params.stride,
                padding: params.padding,
                upsample_before: stage.upsample_before,
                activated: stage.activated,
            });
        }
        Ok(TapedNetwork {
            role: self.role,
            slope: self.config.activation_slope,
            downsample_factor: self.config.downsample_factor(),
            trainable,
            stages,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut pairs = self.config.to_kv_pairs();
        pairs.push(("role", self.role.to_string()));
        let header = config::format_kv(pairs);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(WEIGHTS_MAGIC);
        bytes.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for layer in &self.layers {
            for &v in layer.weights.values() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            for &v in &layer.bias {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: &str| Error::Format(format!("weights data: {msg}"));
        if bytes.len() < 12 {
            return Err(fail("shorter than the fixed header"));
        }
        if &bytes[0..4] != WEIGHTS_MAGIC {
            return Err(fail(&format!(
                "bad magic {:?}, expected {:?}",
                &bytes[0..4],
                WEIGHTS_MAGIC
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != WEIGHTS_VERSION {
            return Err(fail(&format!(
                "unsupported format version {version}, expected {WEIGHTS_VERSION}"
            )));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body_start = 12 + header_len;
        if bytes.len() < body_start {
            return Err(fail("config header is truncated"));
        }
        let header = std::str::from_utf8(&bytes[12..body_start])
            .map_err(|_| fail("config header is not UTF-8"))?;
        let mut map = config::parse_kv(header)?;
        let role: NetworkRole = config::take_required::<String>(&mut map, "role")?.parse()?;
        let cfg = NetworkConfig::from_kv_map(&mut map)?;
        config::reject_unknown(&map, "weights config header")?;

        let plan = layer_plan(&cfg, role)?;
        let value_count: usize = plan
            .iter()
            .map(|s| s.out_channels * (s.in_channels * s.kernel * s.kernel + 1))
            .sum();
        let expected = body_start + 4 * value_count;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "weights data: expected {expected} bytes for this config, got {}",
                bytes.len()
            )));
        }

        let mut offset = body_start;
        let mut read_f32s = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let raw = f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
                if !raw.is_finite() {
                    return Err(Error::Format(format!(
                        "weights data: non-finite value {raw} at byte {offset}"
                    )));
                }
                out.push(raw as f64);
                offset += 4;
            }
            Ok(out)
        };
        let mut layers = Vec::with_capacity(plan.len());
        for stage in &plan {
            let shape =
                Shape4::new(stage.out_channels, stage.in_channels, stage.kernel, stage.kernel);
            let weights = Tensor4::new(shape, read_f32s(shape.len())?)?;
            let bias = read_f32s(stage.out_channels)?;
            layers.push(ConvParams::new(
                stage.out_channels,
                stage.in_channels,
                stage.kernel,
                stage.kernel,
                stage.stride,
                stage.padding,
                weights,
                bias,
            )?);
        }
        Ok(NetworkWeights { config: cfg, role, layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// One network's stages registered on a tape, ready to run on input nodes.
pub struct TapedNetwork {
    role: NetworkRole,
    slope: f64,
    downsample_factor: usize,
    trainable: bool,
    stages: Vec<TapedStage>,
}

struct TapedStage {
    weights: NodeId,
    bias: NodeId,
    stride: usize,
    padding: usize,
    upsample_before: bool,
    activated: bool,
}

impl TapedNetwork {
    /// Records the restorer forward pass; returns the output node.
    pub fn restore(&self, tape: &mut Tape, input: NodeId) -> Result<NodeId> {
        if self.role != NetworkRole::Restorer {
            return Err(Error::Contract("restore requires restorer weights".into()));
        }
        let shape = tape.value(input).shape();
        if !shape.h.is_multiple_of(self.downsample_factor)
            || !shape.w.is_multiple_of(self.downsample_factor)
        {
            return Err(Error::Dimension(format!(
                "spatial dims {}x{} are not divisible by the downsample factor {}; \
                 pad the input (pad_to_divisible) and crop the result back",
                shape.h, shape.w, self.downsample_factor
            )));
        }
        let mut x = input;
        for stage in &self.stages {
            if stage.upsample_before {
                x = tape.upsample_nearest(x, 2)?;
            }
            x = tape.conv2d(x, stage.weights, stage.bias, stage.stride, stage.padding)?;
            if stage.activated {
                x = tape.leaky_relu(x, self.slope)?;
            }
        }
        Ok(x)
    }

    /// Records the extractor forward pass; returns one node per feature map.
    pub fn features(&self, tape: &mut Tape, input: NodeId) -> Result<Vec<NodeId>> {
        if self.role != NetworkRole::Extractor {
            return Err(Error::Contract("features requires extractor weights".into()));
        }
        let mut maps = Vec::with_capacity(self.stages.len());
        let mut x = input;
        for stage in &self.stages {
            x = tape.conv2d(x, stage.weights, stage.bias, stage.stride, stage.padding)?;
            x = tape.leaky_relu(x, self.slope)?;
            maps.push(x);
        }
        Ok(maps)
    }

    /// Gathers gradients into a flat vector matching `flatten_params` order.
    /// Callable only after `Tape::backward` on a loss that reaches every
    /// layer.
    pub fn flat_grads(&self, tape: &Tape) -> Result<Vec<f64>> {
        if !self.trainable {
            return Err(Error::Contract(
                "flat_grads requires a network staged as trainable".into(),
            ));
        }
        let mut flat = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            for id in [stage.weights, stage.bias] {
                let grad = tape.grad(id).ok_or_else(|| {
                    Error::State(format!("no gradient recorded for layer {i}; run backward first"))
                })?;
                flat.extend_from_slice(grad);
            }
        }
        Ok(flat)
    }
}

/// Perceptual distance: weighted sum of per-layer mean-L1 feature distances,
/// with index 0 the raw pixel term. `weights` has length stage_count + 1.
pub fn perceptual_loss(
    restored: &Tensor4,
    original: &Tensor4,
    extractor: &NetworkWeights,
    weights: &[f64],
) -> Result<f64> {
    check_loss_weights(weights, extractor.config().stage_count())?;
    restored.same_shape(original, "perceptual_loss")?;
    let mut total = weights[0] * l1_mean(restored, original)?;
    if weights[1..].iter().any(|&w| w != 0.0) {
        let fr = extractor.extract_features(restored)?;
        let fo = extractor.extract_features(original)?;
        for ((r, o), &w) in fr.maps().iter().zip(fo.maps()).zip(&weights[1..]) {
            if w != 0.0 {
                total += w * l1_mean(r, o)?;
            }
        }
    }
    Ok(total)
}

pub(crate) fn check_loss_weights(weights: &[f64], stages: usize) -> Result<()> {
    if weights.len() != stages + 1 {
        return Err(Error::Config(format!(
            "loss needs {} layer weights (pixel term + {stages} feature maps), got {}",
            stages + 1,
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::Config("loss layer weights must be finite and >= 0".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Config("at least one loss layer weight must be positive".into()));
    }
    Ok(())
}
