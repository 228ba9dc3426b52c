//! One-step-ahead supervised training with Adam and per-bin BCE (categorical
//! cross-entropy for the one-hot variant).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cbe::{self, Binning, CbeVector};
use crate::error::{Error, Result};
use crate::model::{BinConvModel, VariantKind};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.001,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// One supervised example: a context window and the next value, original units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair<S: Scalar> {
    pub context: Vec<S>,
    pub target: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainHistory {
    pub epoch_losses: Vec<f64>,
    pub wall_time_secs: f64,
    pub seed: u64,
    pub config: TrainConfig,
}

/// How values are scaled before encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingMode<S: Scalar> {
    /// Mean-absolute scale of each sample's own context window.
    PerSample,
    /// One fixed scale for the whole dataset.
    Dataset(S),
}

impl<S: Scalar> ScalingMode<S> {
    pub fn scale_for(&self, context: &[S]) -> Result<S> {
        match self {
            ScalingMode::PerSample => Ok(cbe::mean_scale(context)?.value()),
            ScalingMode::Dataset(s) => Ok(*s),
        }
    }
}

/// Sliding windows with stride 1: pair i is (series[i..i+C], series[i+C]).
pub fn make_pairs<S: Scalar>(series: &[S], context_len: usize) -> Result<Vec<TrainingPair<S>>> {
    if series.len() < context_len + 1 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            needed: context_len + 1,
        });
    }
    Ok((0..series.len() - context_len)
        .map(|i| TrainingPair {
            context: series[i..i + context_len].to_vec(),
            target: series[i + context_len],
        })
        .collect())
}

/// Scale the pair by its context scale, then CBE-encode context and target.
pub fn prepare_batch<S: Scalar>(
    pair: &TrainingPair<S>,
    binning: &Binning<S>,
    scaling: ScalingMode<S>,
) -> Result<(Tensor<S>, CbeVector)> {
    let s = scaling.scale_for(&pair.context)?;
    let d = binning.bins();
    let c = pair.context.len();
    let mut data = vec![S::zero(); c * d];
    for (row, &x) in pair.context.iter().enumerate() {
        let v = cbe::encode(x / s, binning)?;
        for (dst, &bit) in data[row * d..(row + 1) * d].iter_mut().zip(v.bits()) {
            *dst = S::from_f64(bit as f64);
        }
    }
    let target = cbe::encode(pair.target / s, binning)?;
    Ok((Tensor::new(vec![c, d], data)?, target))
}

/// One-hot variant of `prepare_batch`: rows are one-hot bin indicators and the
/// target is a clamped bin index.
pub fn prepare_one_hot<S: Scalar>(
    pair: &TrainingPair<S>,
    binning: &Binning<S>,
    scaling: ScalingMode<S>,
) -> Result<(Tensor<S>, usize)> {
    let s = scaling.scale_for(&pair.context)?;
    let d = binning.bins();
    let c = pair.context.len();
    let mut data = vec![S::zero(); c * d];
    for (row, &x) in pair.context.iter().enumerate() {
        let idx = binning.clamped_bin_index(x / s);
        data[row * d + idx] = S::one();
    }
    let target = binning.clamped_bin_index(pair.target / s);
    Ok((Tensor::new(vec![c, d], data)?, target))
}

/// Standard Adam with bias correction; moments updated in place.
pub fn adam_step<S: Scalar>(params: &mut [&mut Parameter<S>], cfg: &TrainConfig) {
    for p in params.iter_mut() {
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - cfg.adam_beta1.powi(t);
        let bc2 = 1.0 - cfg.adam_beta2.powi(t);
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        for i in 0..p.value.len() {
            let g = p.grad.data()[i].to_f64_();
            let m = b1 * p.adam_m.data()[i].to_f64_() + (1.0 - b1) * g;
            let v = b2 * p.adam_v.data()[i].to_f64_() + (1.0 - b2) * g * g;
            p.adam_m.data_mut()[i] = S::from_f64(m);
            p.adam_v.data_mut()[i] = S::from_f64(v);
            let update = cfg.learning_rate * (m / bc1) / ((v / bc2).sqrt() + cfg.adam_eps);
            let w = p.value.data()[i].to_f64_() - update;
            p.value.data_mut()[i] = S::from_f64(w);
        }
    }
}

pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the combined words
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(a)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9)
        .wrapping_add(b);
    z ^= z >> 30;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train in place. Shuffles per epoch with an epoch-derived seed, averages the
/// loss gradient over each batch, and applies one Adam step per batch.
pub fn fit<S: Scalar>(
    model: &mut BinConvModel<S>,
    pairs: &[TrainingPair<S>],
    cfg: &TrainConfig,
    binning: &Binning<S>,
    scaling: ScalingMode<S>,
    seed: u64,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("no training pairs".into()));
    }
    let one_hot = model.variant == VariantKind::OneHot;
    let start = Instant::now();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, epoch as u64, 0)));
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, epoch as u64, 1));

        let mut loss_sum = 0.0f64;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            model.zero_grads();
            let inv = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0f64;
            for &i in chunk {
                let (loss, grad, cache) = if one_hot {
                    let (x, target) = prepare_one_hot(&pairs[i], binning, scaling)?;
                    let (logits, cache) = model.forward_cached(&x, true, &mut dropout_rng)?;
                    let (loss, grad) = ops::softmax_ce_loss(&logits, target)?;
                    (loss, grad, cache)
                } else {
                    let (x, target) = prepare_batch(&pairs[i], binning, scaling)?;
                    let (logits, cache) = model.forward_cached(&x, true, &mut dropout_rng)?;
                    let (loss, grad) = ops::bce_loss(&logits, &target)?;
                    (loss, grad, cache)
                };
                batch_loss += loss;
                let scaled = grad.map(|g| g * S::from_f64(inv));
                model.backward(&cache, &scaled)?;
            }
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            adam_step(&mut model.parameters_mut(), cfg);
            loss_sum += batch_loss * chunk.len() as f64;
        }
        epoch_losses.push(loss_sum / pairs.len() as f64);
    }

    Ok(TrainHistory {
        epoch_losses,
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed,
        config: cfg.clone(),
    })
}
