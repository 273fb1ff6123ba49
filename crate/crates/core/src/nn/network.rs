//! The two-stream Q-network.
//!
//! Global stream: a stack of convolutions over the full-canvas planes.
//! Local stream: convolutions over the patch pair around the pen. Both are
//! flattened, concatenated, passed through one ReLU hidden layer and a
//! linear output with one unit per action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canvas::MediaType;
use crate::env::{ActionSpec, Observation, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::nn::tensor::{conv_backward, conv_forward, dense_backward, dense_forward, ConvCache, ConvGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub const fn new(filters: usize, kernel: usize, stride: usize) -> Self {
        ConvSpec { filters, kernel, stride }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub side: usize,
    pub media: MediaType,
    pub global: Vec<ConvSpec>,
    /// Empty for the global-only variant.
    pub local: Vec<ConvSpec>,
    pub hidden: usize,
}

impl NetConfig {
    /// Full-size network for 84×84 canvases.
    pub fn standard(media: MediaType) -> Self {
        NetConfig {
            side: 84,
            media,
            global: vec![ConvSpec::new(32, 8, 4), ConvSpec::new(64, 4, 2), ConvSpec::new(64, 3, 1)],
            local: vec![ConvSpec::new(128, PATCH_SIZE, 1)],
            hidden: 512,
        }
    }

    /// Narrow network for 28×28 canvases: 28 → 13 → 11 → 9. Only the
    /// first layer strides, so the last map keeps enough resolution to
    /// locate the pen and the next stroke.
    pub fn desk(media: MediaType) -> Self {
        NetConfig {
            side: 28,
            media,
            global: vec![ConvSpec::new(8, 4, 2), ConvSpec::new(16, 3, 1), ConvSpec::new(16, 3, 1)],
            local: vec![ConvSpec::new(32, PATCH_SIZE, 1)],
            hidden: 128,
        }
    }

    pub fn without_local(mut self) -> Self {
        self.local.clear();
        self
    }

    pub fn global_channels(&self) -> usize {
        2 * self.media.channels() + 2
    }

    pub fn local_channels(&self) -> usize {
        2 * self.media.channels()
    }

    pub fn actions(&self) -> usize {
        ActionSpec::new(self.media).total()
    }

    /// Side length after each global convolution.
    pub fn global_sizes(&self) -> Result<Vec<usize>> {
        Ok(chain(&self.global, self.global_channels(), self.side)?
            .iter()
            .map(|g| g.out_size().expect("validated"))
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        Plan::new(self).map(|_| ())
    }
}

fn chain(specs: &[ConvSpec], channels: usize, side: usize) -> Result<Vec<ConvGeometry>> {
    let mut out = Vec::with_capacity(specs.len());
    let (mut c, mut s) = (channels, side);
    for spec in specs {
        let g = ConvGeometry {
            in_channels: c,
            in_size: s,
            filters: spec.filters,
            kernel: spec.kernel,
            stride: spec.stride,
        };
        s = g.out_size()?;
        c = spec.filters;
        out.push(g);
    }
    Ok(out)
}

fn flat_len(convs: &[ConvGeometry], channels: usize, side: usize) -> usize {
    match convs.last() {
        Some(g) => {
            let s = g.out_size().expect("validated");
            g.filters * s * s
        }
        None => channels * side * side,
    }
}

#[derive(Debug, Clone)]
struct Plan {
    global: Vec<ConvGeometry>,
    local: Vec<ConvGeometry>,
    global_features: usize,
    local_features: usize,
}

impl Plan {
    fn new(cfg: &NetConfig) -> Result<Self> {
        if cfg.global.is_empty() || cfg.hidden == 0 || cfg.side < PATCH_SIZE {
            return Err(Error::invalid(
                "network needs at least one global convolution, a hidden layer and side >= 11",
            ));
        }
        let global = chain(&cfg.global, cfg.global_channels(), cfg.side)?;
        let local = chain(&cfg.local, cfg.local_channels(), PATCH_SIZE)?;
        Ok(Plan {
            global_features: flat_len(&global, cfg.global_channels(), cfg.side),
            local_features: if local.is_empty() {
                0
            } else {
                flat_len(&local, cfg.local_channels(), PATCH_SIZE)
            },
            global,
            local,
        })
    }

    fn features(&self) -> usize {
        self.global_features + self.local_features
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Inputs feeding one output unit, used for initialization.
    fn fan_in(&self) -> usize {
        self.shape[1..].iter().product()
    }
}

/// A batch of observations in the network's input layout.
#[derive(Debug, Clone)]
pub struct NetInput {
    batch: usize,
    global: Vec<f64>,
    local: Vec<f64>,
}

impl NetInput {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn from_observations(cfg: &NetConfig, observations: &[&Observation]) -> Result<Self> {
        let batch = observations.len();
        if batch == 0 {
            return Err(Error::invalid("empty observation batch"));
        }
        let gp = cfg.side * cfg.side;
        let lp = PATCH_SIZE * PATCH_SIZE;
        let (gc, lc) = (cfg.global_channels(), cfg.local_channels());
        let mut global = vec![0.0; gc * batch * gp];
        let mut local = vec![0.0; if cfg.local.is_empty() { 0 } else { lc * batch * lp }];
        for (b, obs) in observations.iter().enumerate() {
            if obs.side() != cfg.side || obs.media() != cfg.media {
                return Err(Error::invalid(format!(
                    "observation is {}×{} {}, network expects {}×{} {}",
                    obs.side(),
                    obs.side(),
                    obs.media().name(),
                    cfg.side,
                    cfg.side,
                    cfg.media.name()
                )));
            }
            let planes = obs.global_planes();
            for c in 0..gc {
                global[(c * batch + b) * gp..][..gp].copy_from_slice(&planes[c * gp..][..gp]);
            }
            if !local.is_empty() {
                let planes = obs.local_planes();
                for c in 0..lc {
                    local[(c * batch + b) * lp..][..lp].copy_from_slice(&planes[c * lp..][..lp]);
                }
            }
        }
        Ok(NetInput { batch, global, local })
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    batch: usize,
    global: Vec<ConvCache>,
    local: Vec<ConvCache>,
    features: Vec<f64>,
    hidden: Vec<f64>,
    q: Vec<f64>,
    actions: usize,
}

impl ForwardPass {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Q-values, row-major `[batch, actions]`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q_row(&self, b: usize) -> &[f64] {
        &self.q[b * self.actions..(b + 1) * self.actions]
    }

    /// Which hidden units are active, across every ReLU layer.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.global
            .iter()
            .chain(&self.local)
            .flat_map(|c| c.output.iter())
            .chain(&self.hidden)
            .map(|&v| v > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    config: NetConfig,
    plan_layout: Vec<TensorInfo>,
    params: Vec<f64>,
}

impl QNetwork {
    /// All parameters zero.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        let plan = Plan::new(&config)?;
        let mut layout = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let info = TensorInfo { name, shape, offset };
            offset += info.len();
            layout.push(info);
        };
        for (prefix, convs) in [("global", &plan.global), ("local", &plan.local)] {
            for (i, g) in convs.iter().enumerate() {
                push(
                    format!("{prefix}.conv{}.weight", i + 1),
                    vec![g.filters, g.in_channels, g.kernel, g.kernel],
                );
                push(format!("{prefix}.conv{}.bias", i + 1), vec![g.filters]);
            }
        }
        push("fc_hidden.weight".into(), vec![config.hidden, plan.features()]);
        push("fc_hidden.bias".into(), vec![config.hidden]);
        push("fc_out.weight".into(), vec![config.actions(), config.hidden]);
        push("fc_out.bias".into(), vec![config.actions()]);
        Ok(QNetwork {
            params: vec![0.0; offset],
            plan_layout: layout,
            config,
        })
    }

    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        for info in &net.plan_layout {
            if info.name.ends_with(".weight") {
                let limit = (6.0 / info.fan_in() as f64).sqrt();
                for v in &mut net.params[info.range()] {
                    *v = rng.random_range(-limit..limit);
                }
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layout(&self) -> &[TensorInfo] {
        &self.plan_layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let info = self.plan_layout.iter().find(|t| t.name == name)?;
        Some(&self.params[info.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let info = self.plan_layout.iter().find(|t| t.name == name)?;
        Some(&mut self.params[info.range()])
    }

    /// Copies every tensor of `other` whose name and shape match one of ours.
    /// Returns the names copied.
    pub fn copy_matching_from(&mut self, other: &QNetwork) -> Vec<String> {
        let mut copied = Vec::new();
        for info in &self.plan_layout {
            if let Some(src) = other.plan_layout.iter().find(|t| t.name == info.name && t.shape == info.shape) {
                self.params[info.range()].copy_from_slice(&other.params[src.range()]);
                copied.push(info.name.clone());
            }
        }
        copied
    }

    fn slice(&self, i: usize) -> &[f64] {
        &self.params[self.plan_layout[i].range()]
    }

    pub fn forward(&self, input: &NetInput) -> Result<ForwardPass> {
        let plan = Plan::new(&self.config)?;
        let batch = input.batch;
        let mut t = 0;
        let mut run = |convs: &[ConvGeometry], input: &[f64]| -> Result<Vec<ConvCache>> {
            let mut caches: Vec<ConvCache> = Vec::with_capacity(convs.len());
            for g in convs {
                let x = caches.last().map_or(input, |c| &c.output[..]);
                let cache = conv_forward(g, batch, x, self.slice(t), self.slice(t + 1), true)?;
                t += 2;
                caches.push(cache);
            }
            Ok(caches)
        };
        let global = run(&plan.global, &input.global)?;
        let local = run(&plan.local, &input.local)?;

        let d = plan.features();
        let mut features = vec![0.0; batch * d];
        gather(&global.last().unwrap().output, batch, plan.global[plan.global.len() - 1].filters, &mut features, d, 0);
        if let Some(last) = local.last() {
            gather(&last.output, batch, plan.local[plan.local.len() - 1].filters, &mut features, d, plan.global_features);
        }
        let hidden = dense_forward(batch, &features, self.slice(t), self.slice(t + 1), true);
        let q = dense_forward(batch, &hidden, self.slice(t + 2), self.slice(t + 3), false);
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged("non-finite Q-value".into()));
        }
        Ok(ForwardPass {
            batch,
            global,
            local,
            features,
            hidden,
            q,
            actions: self.config.actions(),
        })
    }

    /// Gradient of `Σ grad_q · q` with respect to every parameter, in the
    /// same flat layout as [`QNetwork::params`].
    pub fn backward(&self, pass: &ForwardPass, grad_q: &[f64]) -> Result<Vec<f64>> {
        if grad_q.len() != pass.q.len() {
            return Err(Error::invalid("Q gradient has the wrong length"));
        }
        let plan = Plan::new(&self.config)?;
        let batch = pass.batch;
        let mut grads = vec![0.0; self.params.len()];
        let n = self.plan_layout.len();
        let (out_w, out_b) = (self.plan_layout[n - 2].range(), self.plan_layout[n - 1].range());
        let (gw, gb) = split2(&mut grads, out_w.clone(), out_b);
        let dh = dense_backward(batch, &pass.hidden, &pass.q, false, &self.params[out_w], grad_q, gw, gb);
        let (hid_w, hid_b) = (self.plan_layout[n - 4].range(), self.plan_layout[n - 3].range());
        let (gw, gb) = split2(&mut grads, hid_w.clone(), hid_b);
        let dfeat = dense_backward(batch, &pass.features, &pass.hidden, true, &self.params[hid_w], &dh, gw, gb);

        let d = plan.features();
        let g_last = plan.global.last().unwrap();
        let mut grad = scatter(&dfeat, batch, plan.global_features, d, 0, g_last.filters);
        self.conv_chain_backward(&plan.global, &pass.global, 0, batch, grad, &mut grads)?;
        if let Some(l_last) = plan.local.last() {
            grad = scatter(&dfeat, batch, plan.local_features, d, plan.global_features, l_last.filters);
            self.conv_chain_backward(&plan.local, &pass.local, 2 * plan.global.len(), batch, grad, &mut grads)?;
        }
        Ok(grads)
    }

    fn conv_chain_backward(
        &self,
        convs: &[ConvGeometry],
        caches: &[ConvCache],
        first_tensor: usize,
        batch: usize,
        mut grad: Vec<f64>,
        grads: &mut [f64],
    ) -> Result<()> {
        for i in (0..convs.len()).rev() {
            let w = self.plan_layout[first_tensor + 2 * i].range();
            let b = self.plan_layout[first_tensor + 2 * i + 1].range();
            let (gw, gb) = split2(grads, w.clone(), b);
            match conv_backward(&convs[i], batch, &caches[i], &self.params[w], &grad, gw, gb, i > 0)? {
                Some(g) => grad = g,
                None => break,
            }
        }
        Ok(())
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<f64>> {
        let input = NetInput::from_observations(&self.config, &[obs])?;
        Ok(self.forward(&input)?.q)
    }
}

/// Two disjoint mutable ranges of `v`, the first ending before the second.
fn split2(v: &mut [f64], a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.end <= b.start);
    let (head, tail) = v.split_at_mut(b.start);
    (&mut head[a], &mut tail[..b.end - b.start])
}

/// `[F, B, h, w]` conv output into columns `offset..` of the `[B, d]`
/// feature matrix.
fn gather(src: &[f64], batch: usize, filters: usize, dst: &mut [f64], d: usize, offset: usize) {
    let hw = src.len() / (filters * batch);
    for f in 0..filters {
        for b in 0..batch {
            dst[b * d + offset + f * hw..][..hw].copy_from_slice(&src[(f * batch + b) * hw..][..hw]);
        }
    }
}

/// Inverse of [`gather`].
fn scatter(src: &[f64], batch: usize, len: usize, d: usize, offset: usize, filters: usize) -> Vec<f64> {
    let hw = len / filters;
    let mut out = vec![0.0; len * batch];
    for f in 0..filters {
        for b in 0..batch {
            out[(f * batch + b) * hw..][..hw].copy_from_slice(&src[b * d + offset + f * hw..][..hw]);
        }
    }
    out
}
