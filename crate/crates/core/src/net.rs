//! The edge detection network: a stride-1-stem multi-resolution encoder,
//! a second-order derivative context module (SDMCM) on every skip
//! connection, and a densely connected refinement decoder (BRM) built on
//! conditionally parameterized convolutions.
//!
//! Topology per forward pass:
//!
//! ```text
//! image -> encoder stage features (H, H/2, H/4, H/8)
//!       -> SDMCM per stage (channels compressed by r)
//!       -> decoder: deepest BRM first; each shallower BRM consumes its
//!          SDMCM feature concatenated with the upsampled outputs of ALL
//!          deeper BRMs (dense links), a 1x1 conv absorbing the width
//!       -> 1x1 conv + sigmoid head at full resolution
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::ParamSet;
use crate::tensor::{ConvSpec, Result, Tensor, TensorError};

/// Fixed 4-neighbor Laplacian template; never trainable.
pub const LAPLACIAN_KERNEL: [f64; 9] = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];

/// Applies the fixed 4-neighbor Laplacian depthwise with zero padding 1.
pub fn laplacian_layer(x: &Tensor) -> Result<Tensor> {
    let [_, c, h, w] = x.shape();
    if h < 3 || w < 3 {
        return Err(TensorError::InvalidArgument {
            op: "laplacian_layer",
            detail: format!("spatial size {h}x{w} below 3x3"),
        });
    }
    let mut wdata = Vec::with_capacity(c * 9);
    for _ in 0..c {
        wdata.extend_from_slice(&LAPLACIAN_KERNEL);
    }
    let weight = Tensor::from_vec([c, 1, 3, 3], wdata)?;
    x.conv2d(&weight, None, ConvSpec::new(1, 1, 1, c))
}

/// Receptive field (one side) of a stack of 3x3 dilated convs.
pub fn receptive_field(dilations: &[usize]) -> usize {
    1 + 2 * dilations.iter().sum::<usize>()
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub input_channels: usize,
    /// Channel count per encoder stage; also fixes the SDMCM/BRM count.
    pub stage_widths: Vec<usize>,
    /// Channel compression ratio r of each SDMCM; one of 1/2, 1/4, 1/8.
    pub compression_ratio: f64,
    /// Dilation schedule of each parallel context branch; rates in {1,2,3}.
    pub branch_dilations: Vec<Vec<usize>>,
    /// Number of expert kernels per conditionally parameterized conv.
    pub expert_count: usize,
    /// Ablation switch for the second-order derivative path in the SDMCM.
    pub laplacian_path: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            input_channels: 3,
            stage_widths: vec![16, 32, 64, 128],
            compression_ratio: 0.25,
            branch_dilations: vec![vec![1], vec![1, 2], vec![1, 2, 3], vec![1, 2, 3, 3]],
            expert_count: 4,
            laplacian_path: true,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| TensorError::InvalidArgument { op: "net_config", detail };
        const RATIOS: [f64; 3] = [0.5, 0.25, 0.125];
        if !RATIOS.iter().any(|r| (r - self.compression_ratio).abs() < 1e-12) {
            return Err(bad(format!(
                "compression_ratio must be one of 1/2, 1/4, 1/8, got {}",
                self.compression_ratio
            )));
        }
        if self.stage_widths.is_empty() {
            return Err(bad("stage_widths must not be empty".into()));
        }
        for &w in &self.stage_widths {
            let compressed = w as f64 * self.compression_ratio;
            if (compressed - compressed.round()).abs() > 1e-9 || compressed < 1.0 {
                return Err(bad(format!(
                    "stage width {w} times ratio {} is not a positive integer",
                    self.compression_ratio
                )));
            }
        }
        if self.branch_dilations.is_empty() {
            return Err(bad("at least one context branch required".into()));
        }
        for branch in &self.branch_dilations {
            if branch.is_empty() {
                return Err(bad("empty dilation list in a context branch".into()));
            }
            for &d in branch {
                if !(1..=3).contains(&d) {
                    return Err(bad(format!("dilation {d} outside {{1,2,3}}")));
                }
            }
        }
        if self.expert_count < 1 {
            return Err(bad("expert_count must be >= 1".into()));
        }
        if self.input_channels < 1 {
            return Err(bad("input_channels must be >= 1".into()));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.stage_widths.len()
    }

    /// SDMCM output channels at stage `k`.
    pub fn compressed_width(&self, k: usize) -> usize {
        (self.stage_widths[k] as f64 * self.compression_ratio).round() as usize
    }
}

fn he_normal(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out.push(r * theta.cos() * std);
        if out.len() < n {
            out.push(r * theta.sin() * std);
        }
    }
    out
}

pub struct Conv2dLayer {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub spec: ConvSpec,
}

impl Conv2dLayer {
    fn new(rng: &mut ChaCha8Rng, cout: usize, cin_g: usize, k: usize, spec: ConvSpec, bias: bool) -> Self {
        let fan_in = cin_g * k * k;
        let weight = Tensor::param([cout, cin_g, k, k], he_normal(rng, cout * cin_g * k * k, fan_in)).unwrap();
        let bias = bias.then(|| Tensor::param([cout, 1, 1, 1], vec![0.0; cout]).unwrap());
        Conv2dLayer { weight, bias, spec }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.conv2d(&self.weight, self.bias.as_ref(), self.spec)
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        set.push(format!("{prefix}.weight"), self.weight.clone());
        if let Some(b) = &self.bias {
            set.push(format!("{prefix}.bias"), b.clone());
        }
    }
}

pub struct BatchNorm2d {
    pub gamma: Tensor,
    pub beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    momentum: f64,
    eps: f64,
}

impl BatchNorm2d {
    fn new(c: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::param([c, 1, 1, 1], vec![1.0; c]).unwrap(),
            beta: Tensor::param([c, 1, 1, 1], vec![0.0; c]).unwrap(),
            running_mean: Tensor::zeros([c, 1, 1, 1]),
            running_var: Tensor::full([c, 1, 1, 1], 1.0),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        if train {
            let mut rm = self.running_mean.data();
            let mut rv = self.running_var.data();
            let y = x.batchnorm2d_train(&self.gamma, &self.beta, &mut rm, &mut rv, self.momentum, self.eps)?;
            self.running_mean.set_data(&rm);
            self.running_var.set_data(&rv);
            Ok(y)
        } else {
            self.running_mean.with_data(|rm| {
                self.running_var
                    .with_data(|rv| x.batchnorm2d_eval(&self.gamma, &self.beta, rm, rv, self.eps))
            })
        }
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        set.push(format!("{prefix}.gamma"), self.gamma.clone());
        set.push(format!("{prefix}.beta"), self.beta.clone());
        set.push_buffer(format!("{prefix}.running_mean"), self.running_mean.clone());
        set.push_buffer(format!("{prefix}.running_var"), self.running_var.clone());
    }
}

/// Convolution whose kernel is a per-item sigmoid-routed mixture of experts.
pub struct CondConv {
    pub experts: Vec<Tensor>,
    pub bias: Tensor,
    pub route_weight: Tensor,
    pub route_bias: Tensor,
    spec: ConvSpec,
}

impl CondConv {
    fn new(rng: &mut ChaCha8Rng, experts: usize, cout: usize, cin: usize) -> Self {
        let fan_in = cin * 9;
        let experts: Vec<Tensor> = (0..experts)
            .map(|_| Tensor::param([cout, cin, 3, 3], he_normal(rng, cout * cin * 9, fan_in)).unwrap())
            .collect();
        let e = experts.len();
        CondConv {
            experts,
            bias: Tensor::param([cout, 1, 1, 1], vec![0.0; cout]).unwrap(),
            route_weight: Tensor::param([e, cin, 1, 1], he_normal(rng, e * cin, cin)).unwrap(),
            route_bias: Tensor::param([e, 1, 1, 1], vec![0.0; e]).unwrap(),
            spec: ConvSpec::same(1),
        }
    }

    /// Per-item routing weights in (0,1), shape `[N, E, 1, 1]`.
    pub fn routing(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.global_avg_pool()
            .fully_connected(&self.route_weight, Some(&self.route_bias))?
            .sigmoid())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let route = self.routing(x)?;
        let n = x.shape()[0];
        let mut items = Vec::with_capacity(n);
        for ni in 0..n {
            let mut kernel = self.experts[0].mul_scalar_tensor(&route.slice_scalar(ni, 0)?)?;
            for (ei, expert) in self.experts.iter().enumerate().skip(1) {
                kernel = kernel.add(&expert.mul_scalar_tensor(&route.slice_scalar(ni, ei)?)?)?;
            }
            let xi = x.slice_batch(ni)?;
            items.push(xi.conv2d(&kernel, Some(&self.bias), self.spec)?);
        }
        Tensor::concat_batch(&items)
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        for (i, e) in self.experts.iter().enumerate() {
            set.push(format!("{prefix}.expert{i}.weight"), e.clone());
        }
        set.push(format!("{prefix}.bias"), self.bias.clone());
        set.push(format!("{prefix}.route.weight"), self.route_weight.clone());
        set.push(format!("{prefix}.route.bias"), self.route_bias.clone());
    }
}

/// One multi-scale context branch: sequential 3x3 dilated conv + ReLU.
pub struct MscBranch {
    convs: Vec<Conv2dLayer>,
}

impl MscBranch {
    fn new(rng: &mut ChaCha8Rng, c: usize, dilations: &[usize]) -> Self {
        let convs = dilations
            .iter()
            .map(|&d| Conv2dLayer::new(rng, c, c, 3, ConvSpec::same(d), true))
            .collect();
        MscBranch { convs }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        for conv in &self.convs {
            y = conv.forward(&y)?.relu();
        }
        Ok(y)
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        for (i, c) in self.convs.iter().enumerate() {
            c.collect(&format!("{prefix}.conv{i}"), set);
        }
    }
}

/// Second-order derivative multi-scale context module.
///
/// Compress, run the parallel dilated branches, sum them with the compressed
/// shortcut, then refine through the fixed-Laplacian path whose conv stack is
/// bypassed by a shortcut rejoining before the final 1x1 projection.
pub struct Sdmcm {
    compress: Conv2dLayer,
    branches: Vec<MscBranch>,
    lap_bn1: BatchNorm2d,
    lap_conv: Conv2dLayer,
    lap_bn2: BatchNorm2d,
    project: Conv2dLayer,
    laplacian_path: bool,
}

impl Sdmcm {
    fn new(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize, cfg: &NetConfig) -> Self {
        Sdmcm {
            compress: Conv2dLayer::new(rng, c_out, c_in, 1, ConvSpec::default(), true),
            branches: cfg
                .branch_dilations
                .iter()
                .map(|d| MscBranch::new(rng, c_out, d))
                .collect(),
            lap_bn1: BatchNorm2d::new(c_out),
            lap_conv: Conv2dLayer::new(rng, c_out, c_out, 3, ConvSpec::same(1), false),
            lap_bn2: BatchNorm2d::new(c_out),
            project: Conv2dLayer::new(rng, c_out, c_out, 1, ConvSpec::default(), true),
            laplacian_path: cfg.laplacian_path,
        }
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let compressed = self.compress.forward(x)?;
        let mut mixed = compressed.clone();
        for b in &self.branches {
            mixed = mixed.add(&b.forward(&compressed)?)?;
        }
        if self.laplacian_path {
            let t = self.lap_bn1.forward(&laplacian_layer(&mixed)?, train)?.relu();
            let u = self.lap_bn2.forward(&self.lap_conv.forward(&t)?, train)?;
            self.project.forward(&u.add(&mixed)?)
        } else {
            self.project.forward(&mixed)
        }
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        self.compress.collect(&format!("{prefix}.compress"), set);
        for (i, b) in self.branches.iter().enumerate() {
            b.collect(&format!("{prefix}.branch{i}"), set);
        }
        if self.laplacian_path {
            self.lap_bn1.collect(&format!("{prefix}.lap_bn1"), set);
            self.lap_conv.collect(&format!("{prefix}.lap_conv"), set);
            self.lap_bn2.collect(&format!("{prefix}.lap_bn2"), set);
        }
        self.project.collect(&format!("{prefix}.project"), set);
    }
}

/// Boundary refinement module: width-absorbing 1x1 conv, a residual block,
/// then two CondConv-BN-ReLU sequences. Output width equals the absorbed width.
pub struct Brm {
    absorb: Conv2dLayer,
    absorb_bn: BatchNorm2d,
    res_conv1: Conv2dLayer,
    res_bn1: BatchNorm2d,
    res_conv2: Conv2dLayer,
    res_bn2: BatchNorm2d,
    cond1: CondConv,
    cond_bn1: BatchNorm2d,
    cond2: CondConv,
    cond_bn2: BatchNorm2d,
}

impl Brm {
    fn new(rng: &mut ChaCha8Rng, c_in: usize, width: usize, experts: usize) -> Self {
        Brm {
            absorb: Conv2dLayer::new(rng, width, c_in, 1, ConvSpec::default(), true),
            absorb_bn: BatchNorm2d::new(width),
            res_conv1: Conv2dLayer::new(rng, width, width, 3, ConvSpec::same(1), false),
            res_bn1: BatchNorm2d::new(width),
            res_conv2: Conv2dLayer::new(rng, width, width, 3, ConvSpec::same(1), false),
            res_bn2: BatchNorm2d::new(width),
            cond1: CondConv::new(rng, experts, width, width),
            cond_bn1: BatchNorm2d::new(width),
            cond2: CondConv::new(rng, experts, width, width),
            cond_bn2: BatchNorm2d::new(width),
        }
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let x = self.absorb_bn.forward(&self.absorb.forward(x)?, train)?.relu();
        let r = self.res_bn1.forward(&self.res_conv1.forward(&x)?, train)?.relu();
        let r = self.res_bn2.forward(&self.res_conv2.forward(&r)?, train)?;
        let x = r.add(&x)?.relu();
        let x = self.cond_bn1.forward(&self.cond1.forward(&x)?, train)?.relu();
        let x = self.cond_bn2.forward(&self.cond2.forward(&x)?, train)?.relu();
        Ok(x)
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        self.absorb.collect(&format!("{prefix}.absorb"), set);
        self.absorb_bn.collect(&format!("{prefix}.absorb_bn"), set);
        self.res_conv1.collect(&format!("{prefix}.res_conv1"), set);
        self.res_bn1.collect(&format!("{prefix}.res_bn1"), set);
        self.res_conv2.collect(&format!("{prefix}.res_conv2"), set);
        self.res_bn2.collect(&format!("{prefix}.res_bn2"), set);
        self.cond1.collect(&format!("{prefix}.cond1"), set);
        self.cond_bn1.collect(&format!("{prefix}.cond_bn1"), set);
        self.cond2.collect(&format!("{prefix}.cond2"), set);
        self.cond_bn2.collect(&format!("{prefix}.cond_bn2"), set);
    }
}

struct EncoderStage {
    down: Option<(Conv2dLayer, BatchNorm2d)>,
    conv: Conv2dLayer,
    bn: BatchNorm2d,
}

/// Plain-conv multi-resolution encoder with a stride-1 stem, so the first
/// stage keeps full resolution.
pub struct Encoder {
    stem: Conv2dLayer,
    stem_bn: BatchNorm2d,
    stages: Vec<EncoderStage>,
}

impl Encoder {
    fn new(rng: &mut ChaCha8Rng, cfg: &NetConfig) -> Self {
        let w = &cfg.stage_widths;
        let stem = Conv2dLayer::new(rng, w[0], cfg.input_channels, 3, ConvSpec::same(1), false);
        let stem_bn = BatchNorm2d::new(w[0]);
        let mut stages = Vec::with_capacity(w.len());
        for k in 0..w.len() {
            let down = (k > 0).then(|| {
                (
                    Conv2dLayer::new(rng, w[k], w[k - 1], 3, ConvSpec::new(2, 1, 1, 1), false),
                    BatchNorm2d::new(w[k]),
                )
            });
            stages.push(EncoderStage {
                down,
                conv: Conv2dLayer::new(rng, w[k], w[k], 3, ConvSpec::same(1), false),
                bn: BatchNorm2d::new(w[k]),
            });
        }
        Encoder { stem, stem_bn, stages }
    }

    /// One feature map per stage, resolutions H, H/2, ..., H/2^(stages-1).
    pub fn forward(&self, img: &Tensor, train: bool) -> Result<Vec<Tensor>> {
        let [_, _, h, w] = img.shape();
        let down_factor = 1usize << (self.stages.len() - 1);
        if h % down_factor != 0 || w % down_factor != 0 {
            return Err(TensorError::InvalidArgument {
                op: "encoder_forward",
                detail: format!("input {h}x{w} not divisible by {down_factor}"),
            });
        }
        let mut x = self.stem_bn.forward(&self.stem.forward(img)?, train)?.relu();
        let mut features = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            if let Some((down, down_bn)) = &stage.down {
                x = down_bn.forward(&down.forward(&x)?, train)?.relu();
            }
            x = stage.bn.forward(&stage.conv.forward(&x)?, train)?.relu();
            features.push(x.clone());
        }
        Ok(features)
    }

    fn collect(&self, set: &mut ParamSet) {
        self.stem.collect("encoder.stem", set);
        self.stem_bn.collect("encoder.stem_bn", set);
        for (k, s) in self.stages.iter().enumerate() {
            if let Some((down, down_bn)) = &s.down {
                down.collect(&format!("encoder.stage{k}.down"), set);
                down_bn.collect(&format!("encoder.stage{k}.down_bn"), set);
            }
            s.conv.collect(&format!("encoder.stage{k}.conv"), set);
            s.bn.collect(&format!("encoder.stage{k}.bn"), set);
        }
    }
}

/// Depthwise separable conv followed by integer-factor bilinear upsampling.
pub struct Upsampler {
    depthwise: Conv2dLayer,
    pointwise: Conv2dLayer,
}

impl Upsampler {
    fn new(rng: &mut ChaCha8Rng, c: usize) -> Self {
        Upsampler {
            depthwise: Conv2dLayer {
                weight: Tensor::param([c, 1, 3, 3], he_normal(rng, c * 9, 9)).unwrap(),
                bias: None,
                spec: ConvSpec::new(1, 1, 1, c),
            },
            pointwise: Conv2dLayer::new(rng, c, c, 1, ConvSpec::default(), true),
        }
    }

    pub fn forward(&self, x: &Tensor, scale: usize) -> Result<Tensor> {
        self.pointwise
            .forward(&self.depthwise.forward(x)?)?
            .upsample_bilinear(scale)
    }

    fn collect(&self, prefix: &str, set: &mut ParamSet) {
        self.depthwise.collect(&format!("{prefix}.depthwise"), set);
        self.pointwise.collect(&format!("{prefix}.pointwise"), set);
    }
}

/// Full detector: encoder, per-stage SDMCM, dense BRM decoder, sigmoid head.
pub struct EdgeNet {
    pub config: NetConfig,
    encoder: Encoder,
    sdmcms: Vec<Sdmcm>,
    brms: Vec<Brm>,
    upsamplers: Vec<Upsampler>,
    head: Conv2dLayer,
    train_mode: std::cell::Cell<bool>,
}

impl EdgeNet {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stages = config.stages();
        let encoder = Encoder::new(&mut rng, &config);
        let sdmcms: Vec<Sdmcm> = (0..stages)
            .map(|k| Sdmcm::new(&mut rng, config.stage_widths[k], config.compressed_width(k), &config))
            .collect();
        // BRM at level k consumes its SDMCM feature plus every deeper BRM output.
        let mut brms = Vec::with_capacity(stages);
        let mut upsamplers = Vec::with_capacity(stages);
        for k in 0..stages {
            let width = config.compressed_width(k);
            let fan_in: usize = config.compressed_width(k)
                + (k + 1..stages).map(|j| config.compressed_width(j)).sum::<usize>();
            brms.push(Brm::new(&mut rng, fan_in, width, config.expert_count));
            // Level 0 is never upsampled into anything shallower.
            if k > 0 {
                upsamplers.push(Upsampler::new(&mut rng, width));
            }
        }
        let head = Conv2dLayer::new(&mut rng, 1, config.compressed_width(0), 1, ConvSpec::default(), true);
        Ok(EdgeNet {
            config,
            encoder,
            sdmcms,
            brms,
            upsamplers,
            head,
            train_mode: std::cell::Cell::new(false),
        })
    }

    pub fn set_train(&self, train: bool) {
        self.train_mode.set(train);
    }

    /// Expected input channel count of BRM `k` (for shape tests).
    pub fn brm_fan_in(&self, k: usize) -> usize {
        self.config.compressed_width(k)
            + (k + 1..self.config.stages())
                .map(|j| self.config.compressed_width(j))
                .sum::<usize>()
    }

    pub fn decoder_forward(&self, skips: &[Tensor]) -> Result<Tensor> {
        let train = self.train_mode.get();
        let stages = skips.len();
        let mut outputs: Vec<Option<Tensor>> = vec![None; stages];
        for k in (0..stages).rev() {
            let mut parts = vec![skips[k].clone()];
            for j in k + 1..stages {
                let scale = 1 << (j - k);
                let up = self.upsamplers[j - 1].forward(outputs[j].as_ref().unwrap(), scale)?;
                if up.shape()[2] != skips[k].shape()[2] || up.shape()[3] != skips[k].shape()[3] {
                    return Err(TensorError::ShapeMismatch {
                        op: "decoder_forward",
                        detail: format!(
                            "upsampled level {j} is {:?}, level {k} skip is {:?}",
                            up.shape(),
                            skips[k].shape()
                        ),
                    });
                }
                parts.push(up);
            }
            let fused = Tensor::concat_channels(&parts)?;
            outputs[k] = Some(self.brms[k].forward(&fused, train)?);
        }
        let head = self.head.forward(outputs[0].as_ref().unwrap())?;
        Ok(head.sigmoid())
    }

    /// Full forward pass: probability map `[N,1,H,W]` in `[0,1]`.
    pub fn forward(&self, img: &Tensor) -> Result<Tensor> {
        let train = self.train_mode.get();
        let features = self.encoder.forward(img, train)?;
        let mut skips = Vec::with_capacity(features.len());
        for (k, f) in features.iter().enumerate() {
            skips.push(self.sdmcms[k].forward(f, train)?);
        }
        self.decoder_forward(&skips)
    }

    pub fn params(&self) -> ParamSet {
        let mut set = ParamSet::new();
        self.encoder.collect(&mut set);
        for (k, s) in self.sdmcms.iter().enumerate() {
            s.collect(&format!("sdmcm{k}"), &mut set);
        }
        for (k, b) in self.brms.iter().enumerate() {
            b.collect(&format!("brm{k}"), &mut set);
        }
        for (k, u) in self.upsamplers.iter().enumerate() {
            u.collect(&format!("up{}", k + 1), &mut set);
        }
        self.head.collect("head", &mut set);
        set
    }
}
