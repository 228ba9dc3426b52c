//! The BinConv network: M residual convolutional blocks over the C×D encoded
//! context, plus a wide convolutional head producing per-bin logits. Also the
//! three ablation variants (fully connected head, standard convolutions in
//! place of depthwise, one-hot encoding).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cbe::Binning;
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

/// Model hyperparameters. Defaults follow the univariate setting:
/// D = 1000 bins on [-5, 5], K = C channels, kernels 3/3/51, 3 blocks,
/// dropout 0.35.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinConvConfig {
    /// Number of bins D.
    pub bins: usize,
    /// Lower grid edge b0 (scaled units).
    pub lower: f64,
    /// Upper grid edge bD (scaled units).
    pub upper: f64,
    /// Channel count K of the block interior.
    pub channels: usize,
    /// Kernel size s1 of the full-context 2D convolution.
    pub kernel_context: usize,
    /// Kernel size s2 of the two depthwise 1D convolutions.
    pub kernel_inner: usize,
    /// Kernel size s3 of the final 1D convolution.
    pub kernel_head: usize,
    /// Block count M.
    pub blocks: usize,
    /// Dropout rate inside each block.
    pub dropout: f64,
    /// Context length C.
    pub context: usize,
}

impl BinConvConfig {
    pub fn univariate(context: usize) -> Self {
        Self {
            bins: 1000,
            lower: -5.0,
            upper: 5.0,
            channels: context,
            kernel_context: 3,
            kernel_inner: 3,
            kernel_head: 51,
            blocks: 3,
            dropout: 0.35,
            context,
        }
    }

    pub fn multivariate(context: usize) -> Self {
        Self {
            bins: 500,
            ..Self::univariate(context)
        }
    }

    pub fn binning<S: Scalar>(&self) -> Result<Binning<S>> {
        Binning::new(S::from_f64(self.lower), S::from_f64(self.upper), self.bins)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.context == 0 || self.channels == 0 || self.blocks == 0 {
            return Err(Error::InvalidConfig(
                "bins, context, channels, and blocks must be positive".into(),
            ));
        }
        if self.upper <= self.lower {
            return Err(Error::InvalidConfig("upper edge must exceed lower".into()));
        }
        for (name, s) in [
            ("kernel_context", self.kernel_context),
            ("kernel_inner", self.kernel_inner),
            ("kernel_head", self.kernel_head),
        ] {
            if s % 2 == 0 || s == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be odd, got {s}")));
            }
        }
        // Conv1d-2 maps K -> C with K groups, so K must divide C
        if self.context % self.channels != 0 {
            return Err(Error::GroupDivisibility {
                groups: self.channels,
                cin: self.channels,
                cout: self.context,
            });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Standard,
    FcHead,
    StandardConv,
    OneHot,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] = [
        VariantKind::Standard,
        VariantKind::FcHead,
        VariantKind::StandardConv,
        VariantKind::OneHot,
    ];
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariantKind::Standard => "standard",
            VariantKind::FcHead => "fc_head",
            VariantKind::StandardConv => "standard_conv",
            VariantKind::OneHot => "one_hot",
        };
        f.write_str(s)
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(VariantKind::Standard),
            "fc_head" => Ok(VariantKind::FcHead),
            "standard_conv" => Ok(VariantKind::StandardConv),
            "one_hot" => Ok(VariantKind::OneHot),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvLayer<S: Scalar> {
    pub kernels: Parameter<S>,
    pub bias: Parameter<S>,
    pub groups: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct DyTanhLayer<S: Scalar> {
    pub alpha: Parameter<S>,
    pub gamma: Parameter<S>,
    pub beta: Parameter<S>,
}

#[derive(Debug, Clone)]
pub(crate) struct Block<S: Scalar> {
    pub conv2d: ConvLayer<S>,
    pub dytanh: DyTanhLayer<S>,
    pub conv1: ConvLayer<S>,
    pub conv2: ConvLayer<S>,
}

#[derive(Debug, Clone)]
pub(crate) enum Head<S: Scalar> {
    Conv(ConvLayer<S>),
    Dense {
        weight: Parameter<S>,
        bias: Parameter<S>,
    },
}

#[derive(Debug, Clone)]
pub struct BinConvModel<S: Scalar> {
    pub config: BinConvConfig,
    pub variant: VariantKind,
    pub seed: u64,
    pub(crate) blocks: Vec<Block<S>>,
    pub(crate) head: Head<S>,
}

fn init_tensor<S: Scalar, R: Rng>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::new(shape, data).unwrap()
}

fn init_conv<S: Scalar, R: Rng>(
    cout: usize,
    kernel_shape: Vec<usize>,
    fan_in: usize,
    groups: usize,
    rng: &mut R,
) -> ConvLayer<S> {
    ConvLayer {
        kernels: Parameter::new(init_tensor(kernel_shape, fan_in, rng)),
        bias: Parameter::new(init_tensor(vec![cout], fan_in, rng)),
        groups,
    }
}

impl<S: Scalar> BinConvModel<S> {
    /// Build the standard model with weights uniform in ±1/sqrt(fan_in),
    /// DyTanh at alpha = 0.5, gamma = 1, beta = 0. Deterministic per seed.
    pub fn init(config: &BinConvConfig, seed: u64) -> Result<Self> {
        Self::build_variant(VariantKind::Standard, config, seed)
    }

    pub fn build_variant(kind: VariantKind, config: &BinConvConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config.context;
        let k = config.channels;
        let d = config.bins;
        let (s1, s2, s3) = (config.kernel_context, config.kernel_inner, config.kernel_head);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let depthwise = kind != VariantKind::StandardConv;
        let blocks = (0..config.blocks)
            .map(|_| {
                let conv2d = init_conv(k, vec![k, 1, c, s1], c * s1, 1, &mut rng);
                let dytanh = DyTanhLayer {
                    alpha: Parameter::new(Tensor::from_f64_slice(vec![1], &[0.5]).unwrap()),
                    gamma: Parameter::new(Tensor::new(vec![k], vec![S::one(); k]).unwrap()),
                    beta: Parameter::new(Tensor::zeros(vec![k])),
                };
                let (conv1, conv2) = if depthwise {
                    (
                        init_conv(k, vec![k, 1, s2], s2, k, &mut rng),
                        init_conv(c, vec![c, 1, s2], s2, k, &mut rng),
                    )
                } else {
                    (
                        init_conv(k, vec![k, k, s2], k * s2, 1, &mut rng),
                        init_conv(c, vec![c, k, s2], k * s2, 1, &mut rng),
                    )
                };
                Block {
                    conv2d,
                    dytanh,
                    conv1,
                    conv2,
                }
            })
            .collect();

        let head = match kind {
            VariantKind::FcHead => Head::Dense {
                weight: Parameter::new(init_tensor(vec![d, d], d, &mut rng)),
                bias: Parameter::new(init_tensor(vec![d], d, &mut rng)),
            },
            _ => Head::Conv(init_conv(1, vec![1, c, s3], c * s3, 1, &mut rng)),
        };

        Ok(Self {
            config: config.clone(),
            variant: kind,
            seed,
            blocks,
            head,
        })
    }

    /// Forward pass: encoded context `[C, D]` to logits `[D]`.
    pub fn forward<R: Rng>(
        &self,
        context: &Tensor<S>,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor<S>> {
        self.forward_cached(context, training, rng).map(|(y, _)| y)
    }

    pub fn forward_cached<R: Rng>(
        &self,
        context: &Tensor<S>,
        training: bool,
        rng: &mut R,
    ) -> Result<(Tensor<S>, ForwardCache<S>)> {
        let c = self.config.context;
        let d = self.config.bins;
        if context.shape() != [c, d] {
            return Err(Error::ShapeMismatch(format!(
                "context shape {:?}, model expects [{c}, {d}]",
                context.shape()
            )));
        }
        let h1 = (self.config.kernel_context - 1) / 2;
        let h2 = (self.config.kernel_inner - 1) / 2;

        let mut x = context.clone();
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let h_pad = ops::pad_bins(&x, h1, h1).reshaped(vec![1, c, d + 2 * h1])?;
            let a = ops::conv2d_full_context(&h_pad, &block.conv2d.kernels.value, &block.conv2d.bias.value)?;
            let dy = ops::dytanh(
                &a,
                block.dytanh.alpha.value.data()[0],
                &block.dytanh.gamma.value,
                &block.dytanh.beta.value,
            );
            let p1 = ops::pad_bins(&dy, h2, h2);
            let c1 = ops::grouped_conv1d(&p1, &block.conv1.kernels.value, &block.conv1.bias.value, block.conv1.groups)?;
            let r1 = ops::relu(&c1);
            let p2 = ops::pad_bins(&r1, h2, h2);
            let c2 = ops::grouped_conv1d(&p2, &block.conv2.kernels.value, &block.conv2.bias.value, block.conv2.groups)?;
            let r2 = ops::relu(&c2);
            let (dr, mask) = ops::dropout(&r2, self.config.dropout, rng, training);
            let out = ops::residual_add(&dr, &x)?;
            block_caches.push(BlockCache {
                h_pad,
                a,
                p1,
                c1,
                p2,
                c2,
                mask,
            });
            x = out;
        }

        let (logits, head_cache) = match &self.head {
            Head::Conv(conv) => {
                let h3 = (self.config.kernel_head - 1) / 2;
                let p = ops::pad_bins(&x, h3, h3);
                let y = ops::grouped_conv1d(&p, &conv.kernels.value, &conv.bias.value, conv.groups)?;
                (y.reshaped(vec![d])?, HeadCache::Conv { input_padded: p })
            }
            Head::Dense { weight, bias } => {
                // mean over the context axis, then a dense D -> D map
                let mut hbar = vec![0.0f64; d];
                for row in 0..c {
                    for j in 0..d {
                        hbar[j] += x.data()[row * d + j].to_f64_();
                    }
                }
                let inv_c = 1.0 / c as f64;
                for v in &mut hbar {
                    *v *= inv_c;
                }
                let w = weight.value.data();
                let mut z = vec![0.0f64; d];
                for (i, zi) in z.iter_mut().enumerate() {
                    let mut acc = bias.value.data()[i].to_f64_();
                    for (j, &h) in hbar.iter().enumerate() {
                        acc += w[i * d + j].to_f64_() * h;
                    }
                    *zi = acc;
                }
                (
                    Tensor::from_f64_slice(vec![d], &z)?,
                    HeadCache::Dense {
                        hbar: Tensor::from_f64_slice(vec![d], &hbar)?,
                    },
                )
            }
        };

        Ok((
            logits,
            ForwardCache {
                block_caches: block_caches,
                head: head_cache,
            },
        ))
    }

    /// Reverse pass accumulating parameter gradients; returns the gradient
    /// with respect to the encoded context (rarely needed, but cheap).
    pub fn backward(&mut self, cache: &ForwardCache<S>, grad_logits: &Tensor<S>) -> Result<Tensor<S>> {
        let c = self.config.context;
        let d = self.config.bins;
        let h1 = (self.config.kernel_context - 1) / 2;
        let h2 = (self.config.kernel_inner - 1) / 2;

        let mut grad = match (&mut self.head, &cache.head) {
            (Head::Conv(conv), HeadCache::Conv { input_padded }) => {
                let go = grad_logits.clone().reshaped(vec![1, d])?;
                let (gp, gk, gb) = ops::grouped_conv1d_backward(
                    input_padded,
                    &conv.kernels.value,
                    conv.groups,
                    &go,
                )?;
                conv.kernels.accumulate_grad(&gk);
                conv.bias.accumulate_grad(&gb);
                let h3 = (self.config.kernel_head - 1) / 2;
                ops::pad_bins_backward(&gp, h3, h3)
            }
            (Head::Dense { weight, bias }, HeadCache::Dense { hbar }) => {
                let gz = grad_logits;
                bias.accumulate_grad(&gz.clone().reshaped(vec![d])?);
                let w = weight.value.data();
                let mut gw = vec![0.0f64; d * d];
                let mut ghbar = vec![0.0f64; d];
                for i in 0..d {
                    let g = gz.data()[i].to_f64_();
                    for j in 0..d {
                        gw[i * d + j] = g * hbar.data()[j].to_f64_();
                        ghbar[j] += g * w[i * d + j].to_f64_();
                    }
                }
                weight.accumulate_grad(&Tensor::from_f64_slice(vec![d, d], &gw)?);
                let inv_c = 1.0 / c as f64;
                let mut gx = vec![S::zero(); c * d];
                for row in 0..c {
                    for j in 0..d {
                        gx[row * d + j] = S::from_f64(ghbar[j] * inv_c);
                    }
                }
                Tensor::new(vec![c, d], gx)?
            }
            _ => return Err(Error::ShapeMismatch("head/cache variant mismatch".into())),
        };

        for (block, bc) in self
            .blocks
            .iter_mut()
            .zip(cache.block_caches.iter())
            .rev()
        {
            // residual: gradient flows both into the block body and past it
            let g_residual = grad.clone();
            let g_dr = grad;
            let g_r2 = ops::dropout_backward(&g_dr, bc.mask.as_deref(), self.config.dropout);
            let g_c2 = ops::relu_backward(&bc.c2, &g_r2);
            let (g_p2, gk2, gb2) =
                ops::grouped_conv1d_backward(&bc.p2, &block.conv2.kernels.value, block.conv2.groups, &g_c2)?;
            block.conv2.kernels.accumulate_grad(&gk2);
            block.conv2.bias.accumulate_grad(&gb2);
            let g_r1 = ops::pad_bins_backward(&g_p2, h2, h2);
            let g_c1 = ops::relu_backward(&bc.c1, &g_r1);
            let (g_p1, gk1, gb1) =
                ops::grouped_conv1d_backward(&bc.p1, &block.conv1.kernels.value, block.conv1.groups, &g_c1)?;
            block.conv1.kernels.accumulate_grad(&gk1);
            block.conv1.bias.accumulate_grad(&gb1);
            let g_dy = ops::pad_bins_backward(&g_p1, h2, h2);
            let (g_a, g_alpha, g_gamma, g_beta) = ops::dytanh_backward(
                &bc.a,
                block.dytanh.alpha.value.data()[0],
                &block.dytanh.gamma.value,
                &g_dy,
            );
            block
                .dytanh
                .alpha
                .accumulate_grad(&Tensor::new(vec![1], vec![g_alpha])?);
            block.dytanh.gamma.accumulate_grad(&g_gamma);
            block.dytanh.beta.accumulate_grad(&g_beta);
            let (g_hpad, gk0, gb0) =
                ops::conv2d_full_context_backward(&bc.h_pad, &block.conv2d.kernels.value, &g_a)?;
            block.conv2d.kernels.accumulate_grad(&gk0);
            block.conv2d.bias.accumulate_grad(&gb0);
            let g_from_conv =
                ops::pad_bins_backward(&g_hpad.reshaped(vec![c, d + 2 * h1])?, h1, h1);
            grad = ops::residual_add(&g_from_conv, &g_residual)?;
        }
        Ok(grad)
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<S>> {
        let mut out = Vec::new();
        for block in &mut self.blocks {
            out.push(&mut block.conv2d.kernels);
            out.push(&mut block.conv2d.bias);
            out.push(&mut block.dytanh.alpha);
            out.push(&mut block.dytanh.gamma);
            out.push(&mut block.dytanh.beta);
            out.push(&mut block.conv1.kernels);
            out.push(&mut block.conv1.bias);
            out.push(&mut block.conv2.kernels);
            out.push(&mut block.conv2.bias);
        }
        match &mut self.head {
            Head::Conv(conv) => {
                out.push(&mut conv.kernels);
                out.push(&mut conv.bias);
            }
            Head::Dense { weight, bias } => {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn named_parameters(&self) -> Vec<(String, &Parameter<S>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.conv2d.weight"), &block.conv2d.kernels));
            out.push((format!("block{i}.conv2d.bias"), &block.conv2d.bias));
            out.push((format!("block{i}.dytanh.alpha"), &block.dytanh.alpha));
            out.push((format!("block{i}.dytanh.gamma"), &block.dytanh.gamma));
            out.push((format!("block{i}.dytanh.beta"), &block.dytanh.beta));
            out.push((format!("block{i}.conv1d1.weight"), &block.conv1.kernels));
            out.push((format!("block{i}.conv1d1.bias"), &block.conv1.bias));
            out.push((format!("block{i}.conv1d2.weight"), &block.conv2.kernels));
            out.push((format!("block{i}.conv1d2.bias"), &block.conv2.bias));
        }
        match &self.head {
            Head::Conv(conv) => {
                out.push(("head.conv.weight".into(), &conv.kernels));
                out.push(("head.conv.bias".into(), &conv.bias));
            }
            Head::Dense { weight, bias } => {
                out.push(("head.dense.weight".into(), weight));
                out.push(("head.dense.bias".into(), bias));
            }
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.named_parameters().iter().map(|(_, p)| p.value.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.named_parameters()
            .iter()
            .flat_map(|(_, p)| p.value.data().iter().map(|v| v.to_f64_()))
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for p in self.parameters_mut() {
            let n = p.value.len();
            for (dst, &src) in p.value.data_mut().iter_mut().zip(&flat[offset..offset + n]) {
                *dst = S::from_f64(src);
            }
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.named_parameters()
            .iter()
            .flat_map(|(_, p)| p.grad.data().iter().map(|v| v.to_f64_()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BlockCache<S: Scalar> {
    h_pad: Tensor<S>,
    a: Tensor<S>,
    p1: Tensor<S>,
    c1: Tensor<S>,
    p2: Tensor<S>,
    c2: Tensor<S>,
    mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub(crate) enum HeadCache<S: Scalar> {
    Conv { input_padded: Tensor<S> },
    Dense { hbar: Tensor<S> },
}

#[derive(Debug, Clone)]
pub struct ForwardCache<S: Scalar> {
    block_caches: Vec<BlockCache<S>>,
    head: HeadCache<S>,
}

/// Exact scalar-parameter count for a configuration and variant, including
/// biases and the DyTanh parameters.
pub fn param_count(config: &BinConvConfig, variant: VariantKind) -> usize {
    let c = config.context;
    let k = config.channels;
    let d = config.bins;
    let (s1, s2, s3) = (config.kernel_context, config.kernel_inner, config.kernel_head);
    let conv2d = k * c * s1 + k;
    let dytanh = 1 + 2 * k;
    let (conv1, conv2) = if variant == VariantKind::StandardConv {
        (k * k * s2 + k, c * k * s2 + c)
    } else {
        (k * s2 + k, c * s2 + c)
    };
    let per_block = conv2d + dytanh + conv1 + conv2;
    let head = match variant {
        VariantKind::FcHead => d * d + d,
        _ => c * s3 + 1,
    };
    config.blocks * per_block + head
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::mock::StepRng;

    fn tiny_config() -> BinConvConfig {
        BinConvConfig {
            bins: 12,
            lower: -5.0,
            upper: 5.0,
            channels: 4,
            kernel_context: 3,
            kernel_inner: 3,
            kernel_head: 3,
            blocks: 1,
            dropout: 0.0,
            context: 4,
        }
    }

    fn eval_rng() -> StepRng {
        StepRng::new(0, 1)
    }

    #[test]
    fn daily_weekly_param_counts_within_tolerance() {
        let daily = BinConvConfig::univariate(42);
        let n = param_count(&daily, VariantKind::Standard) as f64;
        assert!((n - 20_173.0).abs() / 20_173.0 < 0.10, "daily {n}");

        let weekly = BinConvConfig::univariate(39);
        let n = param_count(&weekly, VariantKind::Standard) as f64;
        assert!((n - 17_680.0).abs() / 17_680.0 < 0.10, "weekly {n}");
    }

    #[test]
    fn variant_param_counts_within_tolerance() {
        let daily = BinConvConfig::univariate(42);
        let fc = param_count(&daily, VariantKind::FcHead) as f64;
        assert!((fc - 1_019_540.0).abs() / 1_019_540.0 < 0.10, "fc {fc}");
        let sc = param_count(&daily, VariantKind::StandardConv) as f64;
        assert!((sc - 51_679.0).abs() / 51_679.0 < 0.10, "sc {sc}");
    }

    #[test]
    fn param_count_matches_built_model() {
        let cfg = tiny_config();
        for kind in VariantKind::ALL {
            let model = BinConvModel::<f64>::build_variant(kind, &cfg, 0).unwrap();
            assert_eq!(model.num_parameters(), param_count(&cfg, kind), "{kind}");
        }
    }

    #[test]
    fn per_block_count_is_constant_in_blocks() {
        let mut cfg = BinConvConfig::univariate(42);
        cfg.blocks = 3;
        let n3 = param_count(&cfg, VariantKind::Standard);
        cfg.blocks = 2;
        let n2 = param_count(&cfg, VariantKind::Standard);
        cfg.blocks = 1;
        let n1 = param_count(&cfg, VariantKind::Standard);
        assert_eq!(n3 - n2, n2 - n1);
    }

    #[test]
    fn param_count_monotone_in_size() {
        let base = BinConvConfig::univariate(42);
        let n = param_count(&base, VariantKind::Standard);
        let mut more_blocks = base.clone();
        more_blocks.blocks += 1;
        assert!(param_count(&more_blocks, VariantKind::Standard) > n);
        let mut more_bins = base.clone();
        more_bins.bins += 100;
        assert!(param_count(&more_bins, VariantKind::FcHead) > param_count(&base, VariantKind::FcHead));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = tiny_config();
        let a = BinConvModel::<f64>::init(&cfg, 7).unwrap();
        let b = BinConvModel::<f64>::init(&cfg, 7).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
        let c = BinConvModel::<f64>::init(&cfg, 8).unwrap();
        assert_ne!(a.flat_params(), c.flat_params());
    }

    #[test]
    fn invalid_group_divisibility_errors() {
        let mut cfg = tiny_config();
        cfg.channels = 3; // 3 does not divide context 4
        assert!(BinConvModel::<f64>::init(&cfg, 0).is_err());
    }

    #[test]
    fn zeroed_model_outputs_zero_logits() {
        let cfg = tiny_config();
        let mut model = BinConvModel::<f64>::init(&cfg, 0).unwrap();
        let n = model.num_parameters();
        model.set_flat_params(&vec![0.0; n]);
        let x = Tensor::zeros(vec![4, 12]);
        let logits = model.forward(&x, false, &mut eval_rng()).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        let probs = ops::sigmoid(&logits);
        assert!(probs.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn output_length_matches_bins() {
        for (c, d) in [(6usize, 20usize), (42, 1000)] {
            let mut cfg = BinConvConfig::univariate(c);
            cfg.bins = d;
            let model = BinConvModel::<f32>::init(&cfg, 1).unwrap();
            let x = Tensor::zeros(vec![c, d]);
            let logits = model.forward(&x, false, &mut eval_rng()).unwrap();
            assert_eq!(logits.shape(), [d]);
        }
    }

    #[test]
    fn forward_is_deterministic_in_eval() {
        let cfg = tiny_config();
        let model = BinConvModel::<f64>::init(&cfg, 3).unwrap();
        let x = Tensor::from_f64_slice(
            vec![4, 12],
            &(0..48).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
        )
        .unwrap();
        let a = model.forward(&x, false, &mut eval_rng()).unwrap();
        let b = model.forward(&x, false, &mut eval_rng()).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn depthwise_isolation_in_block_interior() {
        // Zeroing input channel j of Conv1d-1 changes only group-j
        // intermediate channels; observe via the conv1 output directly.
        let cfg = tiny_config();
        let model = BinConvModel::<f64>::init(&cfg, 5).unwrap();
        let block = &model.blocks[0];
        let k = cfg.channels;
        let d = cfg.bins;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let base: Vec<f64> = (0..k * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Tensor::from_f64_slice(vec![k, d], &base).unwrap();
        let p = ops::pad_bins(&x, 1, 1);
        let y0 = ops::grouped_conv1d(&p, &block.conv1.kernels.value, &block.conv1.bias.value, k).unwrap();
        let mut zeroed = base.clone();
        zeroed[2 * d..3 * d].fill(0.0);
        let xz = Tensor::from_f64_slice(vec![k, d], &zeroed).unwrap();
        let pz = ops::pad_bins(&xz, 1, 1);
        let y1 = ops::grouped_conv1d(&pz, &block.conv1.kernels.value, &block.conv1.bias.value, k).unwrap();
        for ch in 0..k {
            let same = y0.data()[ch * d..(ch + 1) * d] == y1.data()[ch * d..(ch + 1) * d];
            assert_eq!(same, ch != 2, "channel {ch}");
        }
    }
}
