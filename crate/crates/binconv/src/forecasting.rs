//! Autoregressive forecasting in original units: argmax point paths and
//! n-trajectory sampling with per-step quantile summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cbe::{self, Binning};
use crate::error::{Error, Result};
use crate::metrics::quantile_levels;
use crate::model::{BinConvModel, VariantKind};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::mix_seed;

/// How the mean scale evolves during autoregression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForecastScaling<S: Scalar> {
    /// Recompute the scale from the sliding window every step (default).
    SlidingPerSample,
    /// Compute the scale once from the initial context and keep it fixed.
    FrozenPerSample,
    /// Fixed dataset-level scale.
    Dataset(S),
}

#[derive(Debug, Clone)]
pub struct SampleForecast<S: Scalar> {
    /// n×H decoded trajectories, original units, ordered by trajectory index.
    pub paths: Vec<Vec<S>>,
    /// 19×H empirical quantiles at levels 0.05..0.95.
    pub quantiles: Vec<Vec<S>>,
}

fn encode_window<S: Scalar>(
    window: &[S],
    scale: S,
    binning: &Binning<S>,
    one_hot: bool,
) -> Result<Tensor<S>> {
    let c = window.len();
    let d = binning.bins();
    let mut data = vec![S::zero(); c * d];
    for (row, &x) in window.iter().enumerate() {
        let scaled = x / scale;
        if one_hot {
            data[row * d + binning.clamped_bin_index(scaled)] = S::one();
        } else {
            let v = cbe::encode(scaled, binning)?;
            for (dst, &bit) in data[row * d..(row + 1) * d].iter_mut().zip(v.bits()) {
                *dst = S::from_f64(bit as f64);
            }
        }
    }
    Tensor::new(vec![c, d], data)
}

/// One-step predictive distribution over decoded scaled values.
/// Outcome `m` decodes via the CBE rule; the one-hot variant's categorical
/// outcome `i` is bin `i`'s midpoint.
fn step_distribution<S: Scalar>(
    model: &BinConvModel<S>,
    x: &Tensor<S>,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0); // eval mode draws nothing
    let logits = model.forward(x, false, &mut rng)?;
    if model.variant == VariantKind::OneHot {
        let probs = ops::softmax(&logits);
        Ok(probs.data().iter().map(|p| p.to_f64_().max(1e-300).ln()).collect())
    } else {
        let probs = ops::sigmoid(&logits);
        let dist = cbe::valid_sequence_log_probs(probs.data())?;
        Ok(dist.log_probs().iter().map(|lp| lp.to_f64_()).collect())
    }
}

fn decode_outcome<S: Scalar>(
    model: &BinConvModel<S>,
    outcome: usize,
    binning: &Binning<S>,
) -> Result<S> {
    if model.variant == VariantKind::OneHot {
        cbe::decode(outcome + 1, binning)
    } else {
        cbe::decode(outcome, binning)
    }
}

fn argmax(log_probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &lp) in log_probs.iter().enumerate().skip(1) {
        if lp > log_probs[best] {
            best = i;
        }
    }
    best
}

fn sample_outcome<R: Rng>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        cum += lp.exp();
        if u < cum {
            return i;
        }
    }
    log_probs.len() - 1
}

fn check_context<S: Scalar>(model: &BinConvModel<S>, context: &[S], horizon: usize) -> Result<()> {
    if context.len() != model.config.context {
        return Err(Error::ShapeMismatch(format!(
            "context length {} does not match model context {}",
            context.len(),
            model.config.context
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    Ok(())
}

fn roll_one<S: Scalar, F: FnMut(&[f64]) -> usize>(
    model: &BinConvModel<S>,
    context: &[S],
    horizon: usize,
    binning: &Binning<S>,
    scaling: ForecastScaling<S>,
    mut choose: F,
) -> Result<Vec<S>> {
    let one_hot = model.variant == VariantKind::OneHot;
    let frozen = match scaling {
        ForecastScaling::FrozenPerSample => Some(cbe::mean_scale(context)?.value()),
        _ => None,
    };
    let mut window = context.to_vec();
    let mut path = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let s = match scaling {
            ForecastScaling::SlidingPerSample => cbe::mean_scale(&window)?.value(),
            ForecastScaling::FrozenPerSample => frozen.unwrap(),
            ForecastScaling::Dataset(s) => s,
        };
        let x = encode_window(&window, s, binning, one_hot)?;
        let log_probs = step_distribution(model, &x)?;
        let outcome = choose(&log_probs);
        let y = s * decode_outcome(model, outcome, binning)?;
        path.push(y);
        window.remove(0);
        window.push(y);
    }
    Ok(path)
}

/// Argmax point forecast, reversing the mean scaling at every step.
pub fn forecast_point<S: Scalar>(
    model: &BinConvModel<S>,
    context: &[S],
    horizon: usize,
    binning: &Binning<S>,
    scaling: ForecastScaling<S>,
) -> Result<Vec<S>> {
    check_context(model, context, horizon)?;
    roll_one(model, context, horizon, binning, scaling, |lp| argmax(lp))
}

/// n sampled trajectories with per-step empirical quantiles at the 19 levels.
/// Each trajectory has its own rng stream derived from (seed, index).
pub fn forecast_samples<S: Scalar>(
    model: &BinConvModel<S>,
    context: &[S],
    horizon: usize,
    n_samples: usize,
    seed: u64,
    binning: &Binning<S>,
    scaling: ForecastScaling<S>,
) -> Result<SampleForecast<S>> {
    check_context(model, context, horizon)?;
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
    }
    let mut paths = Vec::with_capacity(n_samples);
    for traj in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, traj as u64, 0x5a));
        let path = roll_one(model, context, horizon, binning, scaling, |lp| {
            sample_outcome(lp, &mut rng)
        })?;
        paths.push(path);
    }

    let levels = quantile_levels();
    let mut quantiles = vec![vec![S::zero(); horizon]; levels.len()];
    let mut column = vec![0.0f64; n_samples];
    for t in 0..horizon {
        for (j, path) in paths.iter().enumerate() {
            column[j] = path[t].to_f64_();
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (qi, &alpha) in levels.iter().enumerate() {
            quantiles[qi][t] = S::from_f64(interpolated_quantile(&column, alpha));
        }
    }
    Ok(SampleForecast { paths, quantiles })
}

/// Linear interpolation between order statistics of a sorted sample.
pub fn interpolated_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = alpha * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
