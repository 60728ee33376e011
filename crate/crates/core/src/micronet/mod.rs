//! A small two-head dense-prediction network.
//!
//! A shared trunk produces stride-2 features. The localization head upsamples
//! them back to input resolution and ends in a sigmoid; the counting head
//! stays at stride 2 and emits a density map. All parameters live in one
//! flat vector; each layer owns a contiguous slice of it.
//!
//! Forward and backward passes are hand-written (im2col + GEMM) and exact in
//! double precision.

pub mod adam;
pub mod checkpoint;
pub mod ops;
pub mod train;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::DenseGrid;
use crate::rng::Rng;
use ops::{col2im, gemm, im2col, Geometry, Mat, Tensor};

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, store_checkpoint};
pub use train::{train, train_with_progress, EpochLoss, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Deconv,
    Upsample2Nearest,
    Relu,
    Prelu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: usize,
}

impl LayerSpec {
    fn pointwise(kind: LayerKind, channels: usize) -> Self {
        Self {
            kind,
            kernel: 1,
            stride: 1,
            in_channels: channels,
            out_channels: channels,
            padding: 0,
        }
    }

    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            kernel,
            stride,
            in_channels,
            out_channels,
            padding,
        }
    }

    /// "Same"-padded convolution for odd kernels.
    pub fn conv_same(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self::conv(in_channels, out_channels, kernel, stride, kernel / 2)
    }

    pub fn deconv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::Deconv,
            kernel,
            stride,
            in_channels,
            out_channels,
            padding,
        }
    }

    pub fn relu(channels: usize) -> Self {
        Self::pointwise(LayerKind::Relu, channels)
    }

    pub fn prelu(channels: usize) -> Self {
        Self::pointwise(LayerKind::Prelu, channels)
    }

    pub fn sigmoid(channels: usize) -> Self {
        Self::pointwise(LayerKind::Sigmoid, channels)
    }

    pub fn upsample2(channels: usize) -> Self {
        Self {
            stride: 2,
            ..Self::pointwise(LayerKind::Upsample2Nearest, channels)
        }
    }

    fn geometry(&self) -> Geometry {
        Geometry {
            kernel: self.kernel,
            stride: self.stride,
            padding: self.padding,
        }
    }

    /// `(weights, biases)` parameter counts.
    pub fn param_counts(&self) -> (usize, usize) {
        let k2 = self.kernel * self.kernel;
        match self.kind {
            LayerKind::Conv | LayerKind::Deconv => (self.in_channels * self.out_channels * k2, self.out_channels),
            LayerKind::Prelu => (self.out_channels, 0),
            _ => (0, 0),
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        match self.kind {
            LayerKind::Conv => Some((self.geometry().conv_out(h)?, self.geometry().conv_out(w)?)),
            LayerKind::Deconv => Some((self.geometry().deconv_out(h)?, self.geometry().deconv_out(w)?)),
            LayerKind::Upsample2Nearest => Some((2 * h, 2 * w)),
            _ => Some((h, w)),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("layer {self:?}: {m}")));
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be >= 1");
        }
        match self.kind {
            LayerKind::Conv | LayerKind::Deconv => {
                if self.kernel == 0 || self.stride == 0 {
                    return bad("kernel and stride must be >= 1");
                }
            }
            _ => {
                if self.in_channels != self.out_channels {
                    return bad("pointwise layers keep the channel count");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_channels: usize,
    pub trunk: Vec<LayerSpec>,
    pub loc_head: Vec<LayerSpec>,
    pub count_head: Vec<LayerSpec>,
}

impl Default for Architecture {
    /// Trunk: 3x3/16 -> 3x3 stride 2/32 -> 3x3/32, ReLU after each.
    /// Localization: 4x4 stride-2 deconv/16 + ReLU -> 3x3/8 + ReLU -> 1x1/1 + sigmoid.
    /// Counting: 3x3/8 + PReLU -> 1x1/1 + PReLU.
    fn default() -> Self {
        Self {
            input_channels: 1,
            trunk: vec![
                LayerSpec::conv_same(1, 16, 3, 1),
                LayerSpec::relu(16),
                LayerSpec::conv_same(16, 32, 3, 2),
                LayerSpec::relu(32),
                LayerSpec::conv_same(32, 32, 3, 1),
                LayerSpec::relu(32),
            ],
            loc_head: vec![
                LayerSpec::deconv(32, 16, 4, 2, 1),
                LayerSpec::relu(16),
                LayerSpec::conv_same(16, 8, 3, 1),
                LayerSpec::relu(8),
                LayerSpec::conv_same(8, 1, 1, 1),
                LayerSpec::sigmoid(1),
            ],
            count_head: vec![
                LayerSpec::conv_same(32, 8, 3, 1),
                LayerSpec::prelu(8),
                LayerSpec::conv_same(8, 1, 1, 1),
                LayerSpec::prelu(1),
            ],
        }
    }
}

impl Architecture {
    /// Reduced network with two convolutions per head, for gradient checks.
    pub fn tiny() -> Self {
        Self {
            input_channels: 1,
            trunk: vec![LayerSpec::conv_same(1, 3, 3, 2), LayerSpec::relu(3)],
            loc_head: vec![
                LayerSpec::deconv(3, 2, 4, 2, 1),
                LayerSpec::relu(2),
                LayerSpec::conv_same(2, 1, 3, 1),
                LayerSpec::sigmoid(1),
            ],
            count_head: vec![
                LayerSpec::conv_same(3, 2, 3, 1),
                LayerSpec::prelu(2),
                LayerSpec::conv_same(2, 1, 1, 1),
                LayerSpec::prelu(1),
            ],
        }
    }

    fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.trunk.iter().chain(&self.loc_head).chain(&self.count_head)
    }

    pub fn validate(&self) -> Result<()> {
        let check_chain = |name: &str, start: usize, chain: &[LayerSpec]| -> Result<usize> {
            let mut c = start;
            for l in chain {
                l.validate()?;
                if l.in_channels != c {
                    return Err(Error::Config(format!(
                        "{name}: layer expects {} channels, receives {c}",
                        l.in_channels
                    )));
                }
                c = l.out_channels;
            }
            Ok(c)
        };
        let feat = check_chain("trunk", self.input_channels, &self.trunk)?;
        for (name, head) in [("loc_head", &self.loc_head), ("count_head", &self.count_head)] {
            if check_chain(name, feat, head)? != 1 {
                return Err(Error::Config(format!("{name} must end with one channel")));
            }
        }
        if self.loc_head.last().map(|l| l.kind) != Some(LayerKind::Sigmoid) {
            return Err(Error::Config("loc_head must end in a sigmoid".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers()
            .map(|l| {
                let (w, b) = l.param_counts();
                w + b
            })
            .sum()
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("architecture serializes");
        Sha256::digest(&json).into()
    }
}

/// Offsets of one layer's parameters in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    spec: LayerSpec,
    weights: usize,
    biases: usize,
}

impl Slot {
    fn w<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.weights..self.weights + self.spec.param_counts().0]
    }

    fn b<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.biases..self.biases + self.spec.param_counts().1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroNet {
    arch: Architecture,
    trunk: Vec<Slot>,
    loc_head: Vec<Slot>,
    count_head: Vec<Slot>,
    params: Vec<f64>,
}

/// Network outputs for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub heatmap: DenseGrid,
    pub density: DenseGrid,
}

/// Activations retained by [`MicroNet::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Inputs of every trunk layer, then the trunk output.
    trunk: Vec<Tensor>,
    loc: Vec<Tensor>,
    count: Vec<Tensor>,
}

const PRELU_INIT: f64 = 0.25;
const LOC_PRIOR: f64 = 0.01;

impl MicroNet {
    /// Network with all parameters zero (PReLU slopes at their 0.25 default).
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let mut offset = 0;
        let mut place = |chain: &[LayerSpec]| -> Vec<Slot> {
            chain
                .iter()
                .map(|&spec| {
                    let (w, b) = spec.param_counts();
                    let slot = Slot {
                        spec,
                        weights: offset,
                        biases: offset + w,
                    };
                    offset += w + b;
                    slot
                })
                .collect()
        };
        let trunk = place(&arch.trunk);
        let loc_head = place(&arch.loc_head);
        let count_head = place(&arch.count_head);
        let mut net = Self {
            params: vec![0.0; offset],
            arch,
            trunk,
            loc_head,
            count_head,
        };
        for slot in net.slots().filter(|s| s.spec.kind == LayerKind::Prelu).collect::<Vec<_>>() {
            let n = slot.spec.param_counts().0;
            net.params[slot.weights..slot.weights + n].fill(PRELU_INIT);
        }
        Ok(net)
    }

    /// Fan-in scaled uniform weights, zero biases, and the last localization
    /// bias set so that the initial heatmap is about 0.01 everywhere.
    pub fn init(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        for slot in net.slots().collect::<Vec<_>>() {
            let s = slot.spec;
            let fan_in = match s.kind {
                LayerKind::Conv => s.in_channels * s.kernel * s.kernel,
                // Each deconv output pixel sees (k/s)^2 taps per input channel.
                LayerKind::Deconv => (s.in_channels * s.kernel * s.kernel / (s.stride * s.stride)).max(1),
                _ => continue,
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            let n = s.param_counts().0;
            for w in &mut net.params[slot.weights..slot.weights + n] {
                *w = rng.uniform_range(-bound, bound);
            }
        }
        if let Some(last_conv) = net
            .loc_head
            .iter()
            .rev()
            .find(|s| matches!(s.spec.kind, LayerKind::Conv | LayerKind::Deconv))
            .copied()
        {
            let logit = (LOC_PRIOR / (1.0 - LOC_PRIOR)).ln();
            let nb = last_conv.spec.param_counts().1;
            net.params[last_conv.biases..last_conv.biases + nb].fill(logit);
        }
        Ok(net)
    }

    fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.trunk.iter().chain(&self.loc_head).chain(&self.count_head).copied()
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// Bias slice of the last parameterized layer of the localization head.
    pub fn loc_output_bias(&self) -> Option<&[f64]> {
        self.loc_head
            .iter()
            .rev()
            .find(|s| s.spec.param_counts().1 > 0)
            .map(|s| s.b(&self.params))
    }

    fn check_input(&self, image: &DenseGrid) -> Result<()> {
        let (h, w) = image.shape();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "input dimensions must be even, got {h}x{w}"
            )));
        }
        if self.arch.input_channels != 1 {
            return Err(Error::Config("only single-channel input is supported".into()));
        }
        Ok(())
    }

    pub fn forward(&self, image: &DenseGrid) -> Result<Prediction> {
        self.forward_cached(image).map(|(p, _)| p)
    }

    pub fn forward_cached(&self, image: &DenseGrid) -> Result<(Prediction, ForwardCache)> {
        self.check_input(image)?;
        let (h, w) = image.shape();
        let input = Tensor {
            channels: 1,
            height: h,
            width: w,
            data: image.values().to_vec(),
        };
        let trunk = self.run_chain(&self.trunk, input)?;
        let feat = trunk.last().unwrap().clone();
        let loc = self.run_chain(&self.loc_head, feat.clone())?;
        let count = self.run_chain(&self.count_head, feat)?;

        let heat = loc.last().unwrap();
        if (heat.height, heat.width) != (h, w) {
            return Err(Error::Config(format!(
                "localization head produced {}x{} for a {h}x{w} input",
                heat.height, heat.width
            )));
        }
        let dens = count.last().unwrap();
        let want = (h.div_ceil(2), w.div_ceil(2));
        if (dens.height, dens.width) != want {
            return Err(Error::Config(format!(
                "counting head produced {}x{}, expected {}x{}",
                dens.height, dens.width, want.0, want.1
            )));
        }
        for (name, t) in [("heatmap", &heat), ("density", &dens)] {
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteOutput(name));
            }
        }
        let prediction = Prediction {
            heatmap: DenseGrid::from_vec(h, w, heat.data.clone())?,
            density: DenseGrid::from_vec(want.0, want.1, dens.data.clone())?,
        };
        Ok((prediction, ForwardCache { trunk, loc, count }))
    }

    /// Runs a layer chain, returning its input followed by every layer output.
    fn run_chain(&self, chain: &[Slot], input: Tensor) -> Result<Vec<Tensor>> {
        let mut acts = Vec::with_capacity(chain.len() + 1);
        acts.push(input);
        for slot in chain {
            let next = self.layer_forward(slot, acts.last().unwrap())?;
            acts.push(next);
        }
        Ok(acts)
    }

    fn layer_forward(&self, slot: &Slot, x: &Tensor) -> Result<Tensor> {
        let s = slot.spec;
        let (oh, ow) = s.output_hw(x.height, x.width).ok_or_else(|| {
            Error::InvalidArgument(format!("input {}x{} too small for {s:?}", x.height, x.width))
        })?;
        let mut y = Tensor::zeros(s.out_channels, oh, ow);
        match s.kind {
            LayerKind::Conv => {
                let k = s.in_channels * s.kernel * s.kernel;
                let p = oh * ow;
                let mut cols = vec![0.0; k * p];
                im2col(&x.data, x.shape(), s.geometry(), (oh, ow), &mut cols);
                for (co, b) in slot.b(&self.params).iter().enumerate() {
                    y.data[co * p..(co + 1) * p].fill(*b);
                }
                gemm(
                    Mat::new(slot.w(&self.params), s.out_channels, k),
                    Mat::new(&cols, k, p),
                    1.0,
                    &mut y.data,
                );
            }
            LayerKind::Deconv => {
                // Adjoint of a convolution from the output grid onto the input grid.
                let kk = s.out_channels * s.kernel * s.kernel;
                let mut cols = vec![0.0; kk * x.plane()];
                gemm(
                    Mat::new(slot.w(&self.params), s.in_channels, kk).t(),
                    Mat::new(&x.data, s.in_channels, x.plane()),
                    0.0,
                    &mut cols,
                );
                col2im(&cols, y.shape(), s.geometry(), (x.height, x.width), &mut y.data);
                let p = oh * ow;
                for (co, b) in slot.b(&self.params).iter().enumerate() {
                    for v in &mut y.data[co * p..(co + 1) * p] {
                        *v += b;
                    }
                }
            }
            LayerKind::Upsample2Nearest => {
                for c in 0..x.channels {
                    for yy in 0..oh {
                        for xx in 0..ow {
                            y.data[(c * oh + yy) * ow + xx] = x.data[(c * x.height + yy / 2) * x.width + xx / 2];
                        }
                    }
                }
            }
            LayerKind::Relu => {
                for (o, &v) in y.data.iter_mut().zip(&x.data) {
                    *o = v.max(0.0);
                }
            }
            LayerKind::Prelu => {
                let p = x.plane();
                for (c, &a) in slot.w(&self.params).iter().enumerate() {
                    for (o, &v) in y.data[c * p..(c + 1) * p].iter_mut().zip(&x.data[c * p..(c + 1) * p]) {
                        *o = if v > 0.0 { v } else { a * v };
                    }
                }
            }
            LayerKind::Sigmoid => {
                for (o, &v) in y.data.iter_mut().zip(&x.data) {
                    *o = sigmoid(v);
                }
            }
        }
        Ok(y)
    }

    /// Reverse-mode gradient of `<grad_heatmap, heatmap> + <grad_density,
    /// density>` with respect to every parameter.
    pub fn backward(&self, image: &DenseGrid, grad_heatmap: &DenseGrid, grad_density: &DenseGrid) -> Result<Vec<f64>> {
        let (_, cache) = self.forward_cached(image)?;
        let mut grads = vec![0.0; self.params.len()];
        self.backward_cached(&cache, grad_heatmap, grad_density, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates parameter gradients into `grads` using a cached forward pass.
    pub fn backward_cached(
        &self,
        cache: &ForwardCache,
        grad_heatmap: &DenseGrid,
        grad_density: &DenseGrid,
        grads: &mut [f64],
    ) -> Result<()> {
        assert_eq!(grads.len(), self.params.len());
        let heat = cache.loc.last().unwrap();
        let dens = cache.count.last().unwrap();
        for (g, t) in [(grad_heatmap, heat), (grad_density, dens)] {
            if g.shape() != (t.height, t.width) {
                return Err(Error::ShapeMismatch {
                    expected: (t.height, t.width),
                    actual: g.shape(),
                });
            }
        }
        let as_tensor = |g: &DenseGrid| Tensor {
            channels: 1,
            height: g.height(),
            width: g.width(),
            data: g.values().to_vec(),
        };
        let mut dfeat = self.chain_backward(&self.loc_head, &cache.loc, as_tensor(grad_heatmap), grads, true);
        let dcount = self.chain_backward(&self.count_head, &cache.count, as_tensor(grad_density), grads, true);
        for (a, b) in dfeat.data.iter_mut().zip(&dcount.data) {
            *a += b;
        }
        self.chain_backward(&self.trunk, &cache.trunk, dfeat, grads, false);
        Ok(())
    }

    /// Backpropagates through `chain`. `acts[i]` is the input of layer `i`;
    /// `acts[i + 1]` its output. Returns the gradient at the chain input,
    /// or an empty tensor when `need_input_grad` is false.
    fn chain_backward(
        &self,
        chain: &[Slot],
        acts: &[Tensor],
        mut dy: Tensor,
        grads: &mut [f64],
        need_input_grad: bool,
    ) -> Tensor {
        for (i, slot) in chain.iter().enumerate().rev() {
            let want_dx = need_input_grad || i > 0;
            dy = self.layer_backward(slot, &acts[i], &acts[i + 1], &dy, grads, want_dx);
        }
        dy
    }

    fn layer_backward(
        &self,
        slot: &Slot,
        x: &Tensor,
        y: &Tensor,
        dy: &Tensor,
        grads: &mut [f64],
        want_dx: bool,
    ) -> Tensor {
        let s = slot.spec;
        let (nw, nb) = s.param_counts();
        let mut dx = if want_dx {
            Tensor::zeros(x.channels, x.height, x.width)
        } else {
            Tensor::zeros(0, 0, 0)
        };
        match s.kind {
            LayerKind::Conv => {
                let k = s.in_channels * s.kernel * s.kernel;
                let p = y.plane();
                let mut cols = vec![0.0; k * p];
                im2col(&x.data, x.shape(), s.geometry(), (y.height, y.width), &mut cols);
                gemm(
                    Mat::new(&dy.data, s.out_channels, p),
                    Mat::new(&cols, k, p).t(),
                    1.0,
                    &mut grads[slot.weights..slot.weights + nw],
                );
                for (co, g) in grads[slot.biases..slot.biases + nb].iter_mut().enumerate() {
                    *g += dy.data[co * p..(co + 1) * p].iter().sum::<f64>();
                }
                if want_dx {
                    gemm(
                        Mat::new(slot.w(&self.params), s.out_channels, k).t(),
                        Mat::new(&dy.data, s.out_channels, p),
                        0.0,
                        &mut cols,
                    );
                    col2im(&cols, x.shape(), s.geometry(), (y.height, y.width), &mut dx.data);
                }
            }
            LayerKind::Deconv => {
                let kk = s.out_channels * s.kernel * s.kernel;
                let p = x.plane();
                let mut cols = vec![0.0; kk * p];
                im2col(&dy.data, dy.shape(), s.geometry(), (x.height, x.width), &mut cols);
                gemm(
                    Mat::new(&x.data, s.in_channels, p),
                    Mat::new(&cols, kk, p).t(),
                    1.0,
                    &mut grads[slot.weights..slot.weights + nw],
                );
                let q = y.plane();
                for (co, g) in grads[slot.biases..slot.biases + nb].iter_mut().enumerate() {
                    *g += dy.data[co * q..(co + 1) * q].iter().sum::<f64>();
                }
                if want_dx {
                    gemm(
                        Mat::new(slot.w(&self.params), s.in_channels, kk),
                        Mat::new(&cols, kk, p),
                        0.0,
                        &mut dx.data,
                    );
                }
            }
            LayerKind::Upsample2Nearest => {
                if want_dx {
                    for c in 0..y.channels {
                        for yy in 0..y.height {
                            for xx in 0..y.width {
                                dx.data[(c * x.height + yy / 2) * x.width + xx / 2] +=
                                    dy.data[(c * y.height + yy) * y.width + xx];
                            }
                        }
                    }
                }
            }
            LayerKind::Relu => {
                if want_dx {
                    for ((d, &g), &v) in dx.data.iter_mut().zip(&dy.data).zip(&x.data) {
                        *d = if v > 0.0 { g } else { 0.0 };
                    }
                }
            }
            LayerKind::Prelu => {
                let p = x.plane();
                let slopes = slot.w(&self.params);
                for (c, &a) in slopes.iter().enumerate() {
                    let range = c * p..(c + 1) * p;
                    let mut da = 0.0;
                    for (j, (&g, &v)) in dy.data[range.clone()].iter().zip(&x.data[range.clone()]).enumerate() {
                        if v > 0.0 {
                            if want_dx {
                                dx.data[c * p + j] = g;
                            }
                        } else {
                            da += g * v;
                            if want_dx {
                                dx.data[c * p + j] = a * g;
                            }
                        }
                    }
                    grads[slot.weights + c] += da;
                }
            }
            LayerKind::Sigmoid => {
                if want_dx {
                    for ((d, &g), &o) in dx.data.iter_mut().zip(&dy.data).zip(&y.data) {
                        *d = g * o * (1.0 - o);
                    }
                }
            }
        }
        dx
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
