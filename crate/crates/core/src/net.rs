//! The shared-trunk multi-task network.
//!
//! Three convolutional layers (each conv -> batch norm -> ReLU) form a trunk
//! shared by all tasks. The grasp head scores 18 discrete grasp angles from
//! one patch; the push head runs the trunk as two siamese towers over the
//! before/after images, adds one convolution per tower, and regresses the
//! 5-dimensional push action from the concatenated tower features; the poke
//! head regresses the 2-parameter poke response. Every channel and hidden
//! width scales by a rational `width_scale`, while the head outputs stay
//! fixed at 18/5/2.
//!
//! Geometry from a 64x64 input: conv1 11x11 stride 3 pad 2 -> 20x20,
//! conv2 11x11 stride 1 -> 10x10, conv3 5x5 stride 1 -> 6x6, and the push
//! tower conv 5x5 stride 1 -> 2x2.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ops::{self, BnState, Mode};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const INPUT_SIDE: usize = 64;
pub const INPUT_CHANNELS: usize = 3;
pub const GRASP_ANGLES: usize = 18;
pub const PUSH_ACTION_DIM: usize = 5;
pub const POKE_RESPONSE_DIM: usize = 2;

const BASE_CONV1: usize = 96;
const BASE_CONV2: usize = 256;
const BASE_CONV3: usize = 128;
const BASE_PUSH_CONV: usize = 128;
const BASE_GRASP_HIDDEN: usize = 512;
const BASE_PUSH_HIDDEN: usize = 128;
const BASE_POKE_HIDDEN: usize = 128;

pub const DROPOUT_P: f64 = 0.5;

/// Rational width multiplier applied to all channel and hidden counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthScale {
    pub num: u32,
    pub den: u32,
}

impl WidthScale {
    pub const FULL: WidthScale = WidthScale { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::contract("width_scale", "numerator and denominator must be positive"));
        }
        Ok(WidthScale { num, den })
    }

    pub fn apply(&self, base: usize) -> usize {
        let scaled = (base as u64 * self.num as u64 + self.den as u64 / 2) / self.den as u64;
        (scaled as usize).max(1)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Architecture description; field defaults reproduce the full-size network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub width_scale: WidthScale,
}

impl NetConfig {
    pub fn full() -> Self {
        NetConfig { width_scale: WidthScale::FULL }
    }

    pub fn with_width_scale(num: u32, den: u32) -> Result<Self> {
        Ok(NetConfig { width_scale: WidthScale::new(num, den)? })
    }

    pub fn conv1_channels(&self) -> usize {
        self.width_scale.apply(BASE_CONV1)
    }

    pub fn conv2_channels(&self) -> usize {
        self.width_scale.apply(BASE_CONV2)
    }

    pub fn conv3_channels(&self) -> usize {
        self.width_scale.apply(BASE_CONV3)
    }

    pub fn push_conv_channels(&self) -> usize {
        self.width_scale.apply(BASE_PUSH_CONV)
    }

    pub fn grasp_hidden(&self) -> usize {
        self.width_scale.apply(BASE_GRASP_HIDDEN)
    }

    pub fn push_hidden(&self) -> usize {
        self.width_scale.apply(BASE_PUSH_HIDDEN)
    }

    pub fn poke_hidden(&self) -> usize {
        self.width_scale.apply(BASE_POKE_HIDDEN)
    }

    /// Side length of the trunk output feature map (6 for 64x64 input).
    pub fn trunk_side(&self) -> usize {
        6
    }

    pub fn trunk_flat_dim(&self) -> usize {
        self.trunk_side() * self.trunk_side() * self.conv3_channels()
    }

    /// Side length of the push tower conv output (2 for 64x64 input).
    pub fn push_tower_side(&self) -> usize {
        2
    }

    pub fn push_tower_flat_dim(&self) -> usize {
        self.push_tower_side() * self.push_tower_side() * self.push_conv_channels()
    }
}

pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub pad: usize,
}

impl ConvLayer {
    fn init(rng: &mut Rng, out_ch: usize, in_ch: usize, k: usize, stride: usize, pad: usize) -> Self {
        let fan_in = (in_ch * k * k) as f64;
        let std = (2.0 / fan_in).sqrt();
        let data: Vec<f64> = (0..out_ch * in_ch * k * k).map(|_| rng.normal() * std).collect();
        ConvLayer {
            weight: Tensor::param(&[out_ch, in_ch, k, k], data),
            bias: Tensor::param(&[out_ch], vec![0.0; out_ch]),
            stride,
            pad,
        }
    }
}

pub struct FcLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl FcLayer {
    fn init(rng: &mut Rng, out_dim: usize, in_dim: usize) -> Self {
        let std = (2.0 / in_dim as f64).sqrt();
        let data: Vec<f64> = (0..out_dim * in_dim).map(|_| rng.normal() * std).collect();
        FcLayer {
            weight: Tensor::param(&[out_dim, in_dim], data),
            bias: Tensor::param(&[out_dim], vec![0.0; out_dim]),
        }
    }
}

pub struct BnLayer {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub state: BnState,
}

impl BnLayer {
    fn init(channels: usize) -> Self {
        BnLayer {
            gamma: Tensor::param(&[channels], vec![1.0; channels]),
            beta: Tensor::param(&[channels], vec![0.0; channels]),
            state: BnState::new(channels),
        }
    }
}

/// Handles to the four disjoint learnable parameter sets.
///
/// The siamese towers run over the same trunk tensors, so the trunk group
/// appears exactly once here.
pub struct ParamGroups {
    pub trunk: Vec<Tensor>,
    pub grasp: Vec<Tensor>,
    pub push: Vec<Tensor>,
    pub poke: Vec<Tensor>,
}

impl ParamGroups {
    pub fn all(&self) -> impl Iterator<Item = &Tensor> {
        self.trunk.iter().chain(&self.grasp).chain(&self.push).chain(&self.poke)
    }
}

pub struct MultiTaskNet {
    pub config: NetConfig,
    pub conv1: ConvLayer,
    pub bn1: BnLayer,
    pub conv2: ConvLayer,
    pub bn2: BnLayer,
    pub conv3: ConvLayer,
    pub bn3: BnLayer,
    pub gr_fc1: FcLayer,
    pub gr_fc2: FcLayer,
    pub gr_fc3: FcLayer,
    pub pu_conv1: ConvLayer,
    pub pu_fc1: FcLayer,
    pub pu_fc2: FcLayer,
    pub po_fc1: FcLayer,
    pub po_fc2: FcLayer,
    pub po_fc3: FcLayer,
}

impl MultiTaskNet {
    /// Initialize with He-scaled Gaussian weights, zero biases, unit gamma.
    /// All draws come from a stream derived from `seed`, in a fixed layer
    /// order, so the same seed always builds the same network.
    pub fn new(config: NetConfig, seed: u64) -> Self {
        let mut rng = Rng::from_parts(&[seed, 0x6e65745f696e6974]); // "net_init"
        let c1 = config.conv1_channels();
        let c2 = config.conv2_channels();
        let c3 = config.conv3_channels();
        let pc = config.push_conv_channels();
        let gh = config.grasp_hidden();
        let ph = config.push_hidden();
        let kh = config.poke_hidden();
        MultiTaskNet {
            config,
            conv1: ConvLayer::init(&mut rng, c1, INPUT_CHANNELS, 11, 3, 2),
            bn1: BnLayer::init(c1),
            conv2: ConvLayer::init(&mut rng, c2, c1, 11, 1, 0),
            bn2: BnLayer::init(c2),
            conv3: ConvLayer::init(&mut rng, c3, c2, 5, 1, 0),
            bn3: BnLayer::init(c3),
            gr_fc1: FcLayer::init(&mut rng, gh, config.trunk_flat_dim()),
            gr_fc2: FcLayer::init(&mut rng, gh, gh),
            gr_fc3: FcLayer::init(&mut rng, GRASP_ANGLES, gh),
            pu_conv1: ConvLayer::init(&mut rng, pc, c3, 5, 1, 0),
            pu_fc1: FcLayer::init(&mut rng, ph, 2 * config.push_tower_flat_dim()),
            pu_fc2: FcLayer::init(&mut rng, PUSH_ACTION_DIM, ph),
            po_fc1: FcLayer::init(&mut rng, kh, config.trunk_flat_dim()),
            po_fc2: FcLayer::init(&mut rng, kh, kh),
            po_fc3: FcLayer::init(&mut rng, POKE_RESPONSE_DIM, kh),
        }
    }

    fn check_image_batch(op: &'static str, t: &Tensor) -> Result<usize> {
        let s = t.shape();
        if s.len() != 4 || s[1] != INPUT_CHANNELS || s[2] != INPUT_SIDE || s[3] != INPUT_SIDE {
            return Err(Error::dimension(
                op,
                format!("expected [N,{INPUT_CHANNELS},{INPUT_SIDE},{INPUT_SIDE}], got {s:?}"),
            ));
        }
        Ok(s[0])
    }

    /// Shared conv1-conv3 feature extractor; output [N, C3, 6, 6].
    pub fn trunk_forward(&mut self, g: &mut Graph, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let h = ops::conv2d(g, x, &self.conv1.weight, &self.conv1.bias, self.conv1.stride, self.conv1.pad)?;
        let h = ops::batch_norm(g, &h, &self.bn1.gamma, &self.bn1.beta, mode, &mut self.bn1.state)?;
        let h = ops::relu(g, &h);
        let h = ops::conv2d(g, &h, &self.conv2.weight, &self.conv2.bias, self.conv2.stride, self.conv2.pad)?;
        let h = ops::batch_norm(g, &h, &self.bn2.gamma, &self.bn2.beta, mode, &mut self.bn2.state)?;
        let h = ops::relu(g, &h);
        let h = ops::conv2d(g, &h, &self.conv3.weight, &self.conv3.bias, self.conv3.stride, self.conv3.pad)?;
        let h = ops::batch_norm(g, &h, &self.bn3.gamma, &self.bn3.beta, mode, &mut self.bn3.state)?;
        Ok(ops::relu(g, &h))
    }

    /// Grasp head: patch [N,3,64,64] -> pre-sigmoid logits [N,18], one per
    /// 10-degree angle bin.
    pub fn grasp_forward(
        &mut self,
        g: &mut Graph,
        patch: &Tensor,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Tensor> {
        Self::check_image_batch("grasp_forward", patch)?;
        let feat = self.trunk_forward(g, patch, mode)?;
        let flat = ops::flatten(g, &feat)?;
        let h = ops::fully_connected(g, &flat, &self.gr_fc1.weight, &self.gr_fc1.bias)?;
        let h = ops::dropout(g, &h, DROPOUT_P, mode, rng)?;
        let h = ops::relu(g, &h);
        let h = ops::fully_connected(g, &h, &self.gr_fc2.weight, &self.gr_fc2.bias)?;
        let h = ops::dropout(g, &h, DROPOUT_P, mode, rng)?;
        let h = ops::relu(g, &h);
        ops::fully_connected(g, &h, &self.gr_fc3.weight, &self.gr_fc3.bias)
    }

    /// Push head: before/after images -> predicted action [N,5].
    ///
    /// The first tower consumes `begin`, the second consumes `end`; both run
    /// over the same trunk and tower-conv tensors.
    pub fn push_forward(
        &mut self,
        g: &mut Graph,
        begin: &Tensor,
        end: &Tensor,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Tensor> {
        let nb = Self::check_image_batch("push_forward", begin)?;
        let ne = Self::check_image_batch("push_forward", end)?;
        if nb != ne {
            return Err(Error::dimension(
                "push_forward",
                format!("batch axis: begin has N={nb}, end has N={ne}"),
            ));
        }
        let tower = |g: &mut Graph, img: &Tensor, net: &mut Self| -> Result<Tensor> {
            let feat = net.trunk_forward(g, img, mode)?;
            let conv = ops::conv2d(
                g,
                &feat,
                &net.pu_conv1.weight,
                &net.pu_conv1.bias,
                net.pu_conv1.stride,
                net.pu_conv1.pad,
            )?;
            ops::flatten(g, &conv)
        };
        let tb = tower(g, begin, self)?;
        let te = tower(g, end, self)?;
        let joined = ops::concat(g, &[&tb, &te], 1)?;
        let h = ops::fully_connected(g, &joined, &self.pu_fc1.weight, &self.pu_fc1.bias)?;
        let h = ops::dropout(g, &h, DROPOUT_P, mode, rng)?;
        let h = ops::relu(g, &h);
        ops::fully_connected(g, &h, &self.pu_fc2.weight, &self.pu_fc2.bias)
    }

    /// Poke head: image -> predicted (slope, intercept) [N,2].
    pub fn poke_forward(
        &mut self,
        g: &mut Graph,
        image: &Tensor,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Tensor> {
        Self::check_image_batch("poke_forward", image)?;
        let feat = self.trunk_forward(g, image, mode)?;
        let flat = ops::flatten(g, &feat)?;
        let h = ops::fully_connected(g, &flat, &self.po_fc1.weight, &self.po_fc1.bias)?;
        let h = ops::dropout(g, &h, DROPOUT_P, mode, rng)?;
        let h = ops::relu(g, &h);
        let h = ops::fully_connected(g, &h, &self.po_fc2.weight, &self.po_fc2.bias)?;
        let h = ops::dropout(g, &h, DROPOUT_P, mode, rng)?;
        let h = ops::relu(g, &h);
        ops::fully_connected(g, &h, &self.po_fc3.weight, &self.po_fc3.bias)
    }

    pub fn param_groups(&self) -> ParamGroups {
        ParamGroups {
            trunk: vec![
                self.conv1.weight.clone(),
                self.conv1.bias.clone(),
                self.bn1.gamma.clone(),
                self.bn1.beta.clone(),
                self.conv2.weight.clone(),
                self.conv2.bias.clone(),
                self.bn2.gamma.clone(),
                self.bn2.beta.clone(),
                self.conv3.weight.clone(),
                self.conv3.bias.clone(),
                self.bn3.gamma.clone(),
                self.bn3.beta.clone(),
            ],
            grasp: vec![
                self.gr_fc1.weight.clone(),
                self.gr_fc1.bias.clone(),
                self.gr_fc2.weight.clone(),
                self.gr_fc2.bias.clone(),
                self.gr_fc3.weight.clone(),
                self.gr_fc3.bias.clone(),
            ],
            push: vec![
                self.pu_conv1.weight.clone(),
                self.pu_conv1.bias.clone(),
                self.pu_fc1.weight.clone(),
                self.pu_fc1.bias.clone(),
                self.pu_fc2.weight.clone(),
                self.pu_fc2.bias.clone(),
            ],
            poke: vec![
                self.po_fc1.weight.clone(),
                self.po_fc1.bias.clone(),
                self.po_fc2.weight.clone(),
                self.po_fc2.bias.clone(),
                self.po_fc3.weight.clone(),
                self.po_fc3.bias.clone(),
            ],
        }
    }

    /// Stable (name, tensor) pairs for every learnable parameter, in a fixed
    /// order used by the optimizer and the checkpoint format.
    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut push = |name: &str, t: &Tensor| out.push((name.to_string(), t.clone()));
        push("trunk.conv1.weight", &self.conv1.weight);
        push("trunk.conv1.bias", &self.conv1.bias);
        push("trunk.bn1.gamma", &self.bn1.gamma);
        push("trunk.bn1.beta", &self.bn1.beta);
        push("trunk.conv2.weight", &self.conv2.weight);
        push("trunk.conv2.bias", &self.conv2.bias);
        push("trunk.bn2.gamma", &self.bn2.gamma);
        push("trunk.bn2.beta", &self.bn2.beta);
        push("trunk.conv3.weight", &self.conv3.weight);
        push("trunk.conv3.bias", &self.conv3.bias);
        push("trunk.bn3.gamma", &self.bn3.gamma);
        push("trunk.bn3.beta", &self.bn3.beta);
        push("grasp.fc1.weight", &self.gr_fc1.weight);
        push("grasp.fc1.bias", &self.gr_fc1.bias);
        push("grasp.fc2.weight", &self.gr_fc2.weight);
        push("grasp.fc2.bias", &self.gr_fc2.bias);
        push("grasp.fc3.weight", &self.gr_fc3.weight);
        push("grasp.fc3.bias", &self.gr_fc3.bias);
        push("push.conv1.weight", &self.pu_conv1.weight);
        push("push.conv1.bias", &self.pu_conv1.bias);
        push("push.fc1.weight", &self.pu_fc1.weight);
        push("push.fc1.bias", &self.pu_fc1.bias);
        push("push.fc2.weight", &self.pu_fc2.weight);
        push("push.fc2.bias", &self.pu_fc2.bias);
        push("poke.fc1.weight", &self.po_fc1.weight);
        push("poke.fc1.bias", &self.po_fc1.bias);
        push("poke.fc2.weight", &self.po_fc2.weight);
        push("poke.fc2.bias", &self.po_fc2.bias);
        push("poke.fc3.weight", &self.po_fc3.weight);
        push("poke.fc3.bias", &self.po_fc3.bias);
        out
    }

    /// Non-learnable state that still belongs in checkpoints: the batch-norm
    /// running statistics, as (name, values) pairs in a fixed order.
    pub fn named_buffers(&self) -> Vec<(String, Vec<f64>)> {
        vec![
            ("trunk.bn1.running_mean".into(), self.bn1.state.running_mean.clone()),
            ("trunk.bn1.running_var".into(), self.bn1.state.running_var.clone()),
            ("trunk.bn2.running_mean".into(), self.bn2.state.running_mean.clone()),
            ("trunk.bn2.running_var".into(), self.bn2.state.running_var.clone()),
            ("trunk.bn3.running_mean".into(), self.bn3.state.running_mean.clone()),
            ("trunk.bn3.running_var".into(), self.bn3.state.running_var.clone()),
        ]
    }

    pub fn set_buffer(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let slot = match name {
            "trunk.bn1.running_mean" => &mut self.bn1.state.running_mean,
            "trunk.bn1.running_var" => &mut self.bn1.state.running_var,
            "trunk.bn2.running_mean" => &mut self.bn2.state.running_mean,
            "trunk.bn2.running_var" => &mut self.bn2.state.running_var,
            "trunk.bn3.running_mean" => &mut self.bn3.state.running_mean,
            "trunk.bn3.running_var" => &mut self.bn3.state.running_var,
            _ => return Err(Error::contract("set_buffer", format!("unknown buffer {name}"))),
        };
        if slot.len() != values.len() {
            return Err(Error::dimension(
                "set_buffer",
                format!("{name}: expected {} values, got {}", slot.len(), values.len()),
            ));
        }
        slot.copy_from_slice(values);
        Ok(())
    }

    /// Per-layer learnable parameter counts, as (layer, count) rows.
    pub fn parameter_audit(&self) -> Vec<(String, usize)> {
        let count = |w: &Tensor, b: &Tensor| w.numel() + b.numel();
        vec![
            ("conv1".into(), count(&self.conv1.weight, &self.conv1.bias)),
            ("bn1".into(), self.bn1.gamma.numel() + self.bn1.beta.numel()),
            ("conv2".into(), count(&self.conv2.weight, &self.conv2.bias)),
            ("bn2".into(), self.bn2.gamma.numel() + self.bn2.beta.numel()),
            ("conv3".into(), count(&self.conv3.weight, &self.conv3.bias)),
            ("bn3".into(), self.bn3.gamma.numel() + self.bn3.beta.numel()),
            ("gr_fc1".into(), count(&self.gr_fc1.weight, &self.gr_fc1.bias)),
            ("gr_fc2".into(), count(&self.gr_fc2.weight, &self.gr_fc2.bias)),
            ("gr_fc3".into(), count(&self.gr_fc3.weight, &self.gr_fc3.bias)),
            ("pu_conv1".into(), count(&self.pu_conv1.weight, &self.pu_conv1.bias)),
            ("pu_fc1".into(), count(&self.pu_fc1.weight, &self.pu_fc1.bias)),
            ("pu_fc2".into(), count(&self.pu_fc2.weight, &self.pu_fc2.bias)),
            ("po_fc1".into(), count(&self.po_fc1.weight, &self.po_fc1.bias)),
            ("po_fc2".into(), count(&self.po_fc2.weight, &self.po_fc2.bias)),
            ("po_fc3".into(), count(&self.po_fc3.weight, &self.po_fc3.bias)),
        ]
    }
}
