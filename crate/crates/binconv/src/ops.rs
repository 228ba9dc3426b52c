//! Layer forward/backward kernels: asymmetric bin padding, direct-sum
//! convolutions, DyTanh, elementwise activations, dropout, and the losses.
//!
//! All reductions accumulate in f64 with a fixed summation order so runs are
//! bit-reproducible per seed regardless of the storage scalar.

use rand::Rng;

use crate::cbe::CbeVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Pad the last axis with constant ones on the left and zeros on the right.
pub fn pad_bins<S: Scalar>(x: &Tensor<S>, left: usize, right: usize) -> Tensor<S> {
    let shape = x.shape();
    let d = *shape.last().expect("pad_bins needs at least 1 axis");
    let rows: usize = shape[..shape.len() - 1].iter().product();
    let dp = d + left + right;
    let mut out = vec![S::zero(); rows * dp];
    let one = S::one();
    for r in 0..rows {
        let src = &x.data()[r * d..(r + 1) * d];
        let dst = &mut out[r * dp..(r + 1) * dp];
        dst[..left].fill(one);
        dst[left..left + d].copy_from_slice(src);
        // right tail stays zero
    }
    let mut new_shape = shape.to_vec();
    *new_shape.last_mut().unwrap() = dp;
    Tensor::new(new_shape, out).unwrap()
}

/// Gradient of `pad_bins`: padded positions are constants, so just slice.
pub fn pad_bins_backward<S: Scalar>(grad_out: &Tensor<S>, left: usize, right: usize) -> Tensor<S> {
    let shape = grad_out.shape();
    let dp = *shape.last().unwrap();
    let d = dp - left - right;
    let rows: usize = shape[..shape.len() - 1].iter().product();
    let mut out = vec![S::zero(); rows * d];
    for r in 0..rows {
        let src = &grad_out.data()[r * dp + left..r * dp + left + d];
        out[r * d..(r + 1) * d].copy_from_slice(src);
    }
    let mut new_shape = shape.to_vec();
    *new_shape.last_mut().unwrap() = d;
    Tensor::new(new_shape, out).unwrap()
}

fn check_grouped_shapes<S: Scalar>(
    x: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
    groups: usize,
) -> Result<(usize, usize, usize, usize, usize)> {
    let (cin, dp) = match x.shape() {
        [cin, dp] => (*cin, *dp),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "conv1d input must be [Cin, D_pad], got {other:?}"
            )))
        }
    };
    let (cout, cpg, s) = match kernels.shape() {
        [cout, cpg, s] => (*cout, *cpg, *s),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "conv1d kernels must be [Cout, Cin/g, s], got {other:?}"
            )))
        }
    };
    if groups == 0 || cin % groups != 0 || cout % groups != 0 {
        return Err(Error::GroupDivisibility { groups, cin, cout });
    }
    if cpg != cin / groups {
        return Err(Error::ShapeMismatch(format!(
            "kernels expect {cpg} channels per group, input has {}",
            cin / groups
        )));
    }
    if bias.len() != cout {
        return Err(Error::ShapeMismatch(format!(
            "bias length {} != out channels {cout}",
            bias.len()
        )));
    }
    if dp < s {
        return Err(Error::ShapeMismatch(format!(
            "padded length {dp} shorter than kernel {s}"
        )));
    }
    Ok((cin, dp, cout, cpg, s))
}

/// Valid cross-correlation with channel groups. `g = Cin = Cout` is depthwise,
/// `g = 1` is a standard convolution.
pub fn grouped_conv1d<S: Scalar>(
    x: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
    groups: usize,
) -> Result<Tensor<S>> {
    let (_cin, dp, cout, cpg, s) = check_grouped_shapes(x, kernels, bias, groups)?;
    let dout = dp - s + 1;
    let out_per_group = cout / groups;
    let xd = x.data();
    let kd = kernels.data();
    let mut out = vec![S::zero(); cout * dout];
    let mut acc = vec![0.0f64; dout];
    for o in 0..cout {
        let group = o / out_per_group;
        let in_base = group * cpg;
        acc.fill(bias.data()[o].to_f64_());
        for ci in 0..cpg {
            let row = &xd[(in_base + ci) * dp..(in_base + ci + 1) * dp];
            for t in 0..s {
                let k = kd[(o * cpg + ci) * s + t].to_f64_();
                let src = &row[t..t + dout];
                for (a, &v) in acc.iter_mut().zip(src) {
                    *a += k * v.to_f64_();
                }
            }
        }
        for (dst, &a) in out[o * dout..(o + 1) * dout].iter_mut().zip(&acc) {
            *dst = S::from_f64(a);
        }
    }
    Tensor::new(vec![cout, dout], out)
}

/// Gradients of `grouped_conv1d` for input, kernels, and bias.
pub fn grouped_conv1d_backward<S: Scalar>(
    x: &Tensor<S>,
    kernels: &Tensor<S>,
    groups: usize,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let (cin, dp, cout, cpg, s) = {
        let bias = Tensor::zeros(vec![kernels.shape()[0]]);
        check_grouped_shapes(x, kernels, &bias, groups)?
    };
    let dout = dp - s + 1;
    if grad_out.shape() != [cout, dout] {
        return Err(Error::ShapeMismatch(format!(
            "grad_out shape {:?}, expected [{cout}, {dout}]",
            grad_out.shape()
        )));
    }
    let out_per_group = cout / groups;
    let xd = x.data();
    let kd = kernels.data();
    let gd = grad_out.data();

    let mut gx = vec![0.0f64; cin * dp];
    let mut gk = vec![0.0f64; kernels.len()];
    let mut gb = vec![0.0f64; cout];

    for o in 0..cout {
        let group = o / out_per_group;
        let in_base = group * cpg;
        let go = &gd[o * dout..(o + 1) * dout];
        gb[o] = go.iter().map(|v| v.to_f64_()).sum();
        for ci in 0..cpg {
            let xrow = &xd[(in_base + ci) * dp..(in_base + ci + 1) * dp];
            let gxrow = &mut gx[(in_base + ci) * dp..(in_base + ci + 1) * dp];
            for t in 0..s {
                let k = kd[(o * cpg + ci) * s + t].to_f64_();
                let mut dot = 0.0f64;
                for (j, &g) in go.iter().enumerate() {
                    let g = g.to_f64_();
                    dot += g * xrow[j + t].to_f64_();
                    gxrow[j + t] += g * k;
                }
                gk[(o * cpg + ci) * s + t] = dot;
            }
        }
    }
    Ok((
        Tensor::from_f64_slice(vec![cin, dp], &gx)?,
        Tensor::from_f64_slice(kernels.shape().to_vec(), &gk)?,
        Tensor::from_f64_slice(vec![cout], &gb)?,
    ))
}

/// 2D convolution whose kernel spans the whole context axis: input
/// `[1, C, D_pad]`, kernels `[K, 1, C, s1]`, output `[K, D]`. Equivalent to a
/// group-1 conv1d over C input channels, which is how it is evaluated.
pub fn conv2d_full_context<S: Scalar>(
    x: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (c, dp) = match x.shape() {
        [1, c, dp] => (*c, *dp),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "conv2d input must be [1, C, D_pad], got {other:?}"
            )))
        }
    };
    let (k, c2, s1) = match kernels.shape() {
        [k, 1, c2, s1] => (*k, *c2, *s1),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "conv2d kernels must be [K, 1, C, s1], got {other:?}"
            )))
        }
    };
    if c != c2 {
        return Err(Error::ShapeMismatch(format!(
            "context axis mismatch: input C={c}, kernel C={c2}"
        )));
    }
    let x1 = x.clone().reshaped(vec![c, dp])?;
    let k1 = kernels.clone().reshaped(vec![k, c, s1])?;
    grouped_conv1d(&x1, &k1, bias, 1)
}

pub fn conv2d_full_context_backward<S: Scalar>(
    x: &Tensor<S>,
    kernels: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>)> {
    let [_, c, dp] = *x.shape() else {
        return Err(Error::ShapeMismatch("conv2d input must be 3-axis".into()));
    };
    let kshape = kernels.shape().to_vec();
    let [k, _, _, s1] = kshape[..] else {
        return Err(Error::ShapeMismatch("conv2d kernels must be 4-axis".into()));
    };
    let x1 = x.clone().reshaped(vec![c, dp])?;
    let k1 = kernels.clone().reshaped(vec![k, c, s1])?;
    let (gx, gk, gb) = grouped_conv1d_backward(&x1, &k1, 1, grad_out)?;
    Ok((gx.reshaped(vec![1, c, dp])?, gk.reshaped(kshape)?, gb))
}

/// y[k, j] = gamma[k] * tanh(alpha * x[k, j]) + beta[k]
pub fn dytanh<S: Scalar>(x: &Tensor<S>, alpha: S, gamma: &Tensor<S>, beta: &Tensor<S>) -> Tensor<S> {
    let [k, d] = *x.shape() else {
        panic!("dytanh expects [K, D], got {:?}", x.shape());
    };
    assert_eq!(gamma.len(), k, "gamma length");
    assert_eq!(beta.len(), k, "beta length");
    let a = alpha.to_f64_();
    let mut out = vec![S::zero(); k * d];
    for ch in 0..k {
        let g = gamma.data()[ch].to_f64_();
        let b = beta.data()[ch].to_f64_();
        for j in 0..d {
            let v = x.data()[ch * d + j].to_f64_();
            out[ch * d + j] = S::from_f64(g * (a * v).tanh() + b);
        }
    }
    Tensor::new(vec![k, d], out).unwrap()
}

/// Gradients of `dytanh` for input, alpha, gamma, and beta.
pub fn dytanh_backward<S: Scalar>(
    x: &Tensor<S>,
    alpha: S,
    gamma: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> (Tensor<S>, S, Tensor<S>, Tensor<S>) {
    let [k, d] = *x.shape() else {
        panic!("dytanh expects [K, D]");
    };
    let a = alpha.to_f64_();
    let mut gx = vec![0.0f64; k * d];
    let mut galpha = 0.0f64;
    let mut ggamma = vec![0.0f64; k];
    let mut gbeta = vec![0.0f64; k];
    for ch in 0..k {
        let g = gamma.data()[ch].to_f64_();
        for j in 0..d {
            let v = x.data()[ch * d + j].to_f64_();
            let go = grad_out.data()[ch * d + j].to_f64_();
            let t = (a * v).tanh();
            let sech2 = 1.0 - t * t;
            gx[ch * d + j] = go * g * a * sech2;
            galpha += go * g * v * sech2;
            ggamma[ch] += go * t;
            gbeta[ch] += go;
        }
    }
    (
        Tensor::from_f64_slice(vec![k, d], &gx).unwrap(),
        S::from_f64(galpha),
        Tensor::from_f64_slice(vec![k], &ggamma).unwrap(),
        Tensor::from_f64_slice(vec![k], &gbeta).unwrap(),
    )
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| if v > S::zero() { v } else { S::zero() })
}

pub fn relu_backward<S: Scalar>(x: &Tensor<S>, grad_out: &Tensor<S>) -> Tensor<S> {
    debug_assert_eq!(x.shape(), grad_out.shape());
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > S::zero() { g } else { S::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data).unwrap()
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| S::from_f64(sigmoid_scalar(v.to_f64_())))
}

/// Inverted dropout: train mode zeroes entries with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the exact identity.
pub fn dropout<S: Scalar, R: Rng>(
    x: &Tensor<S>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> (Tensor<S>, Option<Vec<bool>>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return (x.clone(), None);
    }
    let scale = S::from_f64(1.0 / (1.0 - rate));
    let mut mask = Vec::with_capacity(x.len());
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let keep = rng.gen::<f64>() >= rate;
            mask.push(keep);
            if keep {
                v * scale
            } else {
                S::zero()
            }
        })
        .collect();
    (Tensor::new(x.shape().to_vec(), data).unwrap(), Some(mask))
}

pub fn dropout_backward<S: Scalar>(
    grad_out: &Tensor<S>,
    mask: Option<&[bool]>,
    rate: f64,
) -> Tensor<S> {
    match mask {
        None => grad_out.clone(),
        Some(mask) => {
            let scale = S::from_f64(1.0 / (1.0 - rate));
            let data = grad_out
                .data()
                .iter()
                .zip(mask)
                .map(|(&g, &keep)| if keep { g * scale } else { S::zero() })
                .collect();
            Tensor::new(grad_out.shape().to_vec(), data).unwrap()
        }
    }
}

pub fn residual_add<S: Scalar>(x: &Tensor<S>, y: &Tensor<S>) -> Result<Tensor<S>> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch(format!(
            "residual shapes {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| a + b)
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Mean per-bin binary cross-entropy on logits, softplus-stabilized.
/// Returns the loss and its gradient w.r.t. the logits.
pub fn bce_loss<S: Scalar>(logits: &Tensor<S>, target: &CbeVector) -> Result<(f64, Tensor<S>)> {
    let d = logits.len();
    if target.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "logits length {d} vs target length {}",
            target.len()
        )));
    }
    let mut loss = 0.0f64;
    let mut grad = vec![0.0f64; d];
    let inv_d = 1.0 / d as f64;
    for i in 0..d {
        let z = logits.data()[i].to_f64_();
        let t = target.bits()[i] as f64;
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        grad[i] = (sigmoid_scalar(z) - t) * inv_d;
    }
    loss *= inv_d;
    Ok((loss, Tensor::from_f64_slice(vec![d], &grad)?))
}

/// Multi-class cross-entropy on logits over D bins (one-hot variant).
pub fn softmax_ce_loss<S: Scalar>(
    logits: &Tensor<S>,
    target_bin: usize,
) -> Result<(f64, Tensor<S>)> {
    let d = logits.len();
    if target_bin >= d {
        return Err(Error::ShapeMismatch(format!(
            "target bin {target_bin} out of range 0..{d}"
        )));
    }
    let z: Vec<f64> = logits.data().iter().map(|v| v.to_f64_()).collect();
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    let log_z = max + sum_exp.ln();
    let loss = log_z - z[target_bin];
    let mut grad: Vec<f64> = z.iter().map(|&v| (v - log_z).exp()).collect();
    grad[target_bin] -= 1.0;
    Ok((loss, Tensor::from_f64_slice(vec![d], &grad)?))
}

/// Softmax probabilities over the bin axis (one-hot variant head).
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Tensor<S> {
    let z: Vec<f64> = logits.data().iter().map(|v| v.to_f64_()).collect();
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    let data = z
        .iter()
        .map(|&v| S::from_f64((v - max).exp() / sum_exp))
        .collect();
    Tensor::new(logits.shape().to_vec(), data).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t2(shape: [usize; 2], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64_slice(shape.to_vec(), data).unwrap()
    }

    /// Naive quadruple-loop grouped conv reference.
    fn naive_grouped_conv1d(
        x: &Tensor<f64>,
        k: &Tensor<f64>,
        b: &Tensor<f64>,
        g: usize,
    ) -> Tensor<f64> {
        let [cin, dp] = *x.shape() else { panic!() };
        let [cout, cpg, s] = *k.shape() else { panic!() };
        let dout = dp - s + 1;
        let opg = cout / g;
        let mut out = vec![0.0; cout * dout];
        for o in 0..cout {
            let base = (o / opg) * cpg;
            for j in 0..dout {
                let mut acc = b.data()[o];
                for ci in 0..cpg {
                    for t in 0..s {
                        acc += x.data()[(base + ci) * dp + j + t] * k.data()[(o * cpg + ci) * s + t];
                    }
                }
                out[o * dout + j] = acc;
            }
        }
        assert_eq!(cin % g, 0);
        t2([cout, dout], &out)
    }

    #[test]
    fn pad_bins_example() {
        let x = Tensor::<f64>::from_f64_slice(vec![1, 2], &[0.3, 0.7]).unwrap();
        let padded = pad_bins(&x, 1, 1);
        assert_eq!(padded.data(), &[1.0, 0.3, 0.7, 0.0]);
        let same = pad_bins(&x, 0, 0);
        assert_eq!(same.data(), x.data());
        // padding is constant: grad of sum w.r.t. x is all ones
        let gout = Tensor::<f64>::from_f64_slice(vec![1, 4], &[1.0; 4]).unwrap();
        assert_eq!(pad_bins_backward(&gout, 1, 1).data(), &[1.0, 1.0]);
    }

    #[test]
    fn conv_identity_kernel() {
        let x = Tensor::<f64>::from_f64_slice(vec![1, 1, 3], &[1.0, 2.0, 3.0]).unwrap();
        let k = Tensor::<f64>::from_f64_slice(vec![1, 1, 1, 1], &[1.0]).unwrap();
        let b = Tensor::<f64>::from_f64_slice(vec![1], &[0.0]).unwrap();
        let y = conv2d_full_context(&x, &k, &b).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn conv2d_all_ones_with_padding() {
        // C=2, D=3, s1=3: pad the bin axis then convolve with all-ones kernel
        let x = t2([2, 3], &[1.0; 6]);
        let xp = pad_bins(&x, 1, 1); // [2, 5]
        let x3 = xp.reshaped(vec![1, 2, 5]).unwrap();
        let k = Tensor::<f64>::from_f64_slice(vec![2, 1, 2, 3], &[1.0; 12]).unwrap();
        let b = Tensor::<f64>::from_f64_slice(vec![2], &[0.0, 0.0]).unwrap();
        let y = conv2d_full_context(&x3, &k, &b).unwrap();
        // interior column sums 6; left edge picks up the ones padding (also 6),
        // right edge loses one column to the zero padding
        assert_eq!(y.data(), &[6.0, 6.0, 4.0, 6.0, 6.0, 4.0]);
    }

    #[test]
    fn grouped_conv_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(cin, cout, g, s, dp) in
            &[(1, 1, 1, 3, 6), (4, 4, 4, 3, 8), (4, 2, 2, 3, 7), (6, 3, 3, 5, 9), (2, 8, 1, 3, 5)]
        {
            let x = t2([cin, dp], &(0..cin * dp).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let cpg = cin / g;
            let k = Tensor::<f64>::from_f64_slice(
                vec![cout, cpg, s],
                &(0..cout * cpg * s).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
            )
            .unwrap();
            let b = Tensor::<f64>::from_f64_slice(
                vec![cout],
                &(0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
            )
            .unwrap();
            let fast = grouped_conv1d(&x, &k, &b, g).unwrap();
            let slow = naive_grouped_conv1d(&x, &k, &b, g);
            for (a, o) in fast.data().iter().zip(slow.data()) {
                assert!((a - o).abs() < 1e-12, "{a} vs {o}");
            }
        }
    }

    #[test]
    fn depthwise_channel_isolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cin = 3;
        let dp = 8;
        let base: Vec<f64> = (0..cin * dp).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = Tensor::<f64>::from_f64_slice(
            vec![cin, 1, 3],
            &(0..cin * 3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let b = Tensor::<f64>::from_f64_slice(vec![cin], &[0.1, 0.2, 0.3]).unwrap();
        let y0 = grouped_conv1d(&t2([cin, dp], &base), &k, &b, cin).unwrap();
        // perturb channel 1, channels 0 and 2 of the output must be unchanged
        let mut pert = base.clone();
        for v in &mut pert[dp..2 * dp] {
            *v += 0.5;
        }
        let y1 = grouped_conv1d(&t2([cin, dp], &pert), &k, &b, cin).unwrap();
        let dout = dp - 2;
        assert_eq!(&y0.data()[..dout], &y1.data()[..dout]);
        assert_eq!(&y0.data()[2 * dout..], &y1.data()[2 * dout..]);
        assert_ne!(&y0.data()[dout..2 * dout], &y1.data()[dout..2 * dout]);
    }

    #[test]
    fn delta_kernel_shifts_with_ones_padding() {
        // g=1, Cin=Cout=1, kernel [0,1,0] is the identity on the padded input
        let x = t2([1, 4], &[0.5, -1.0, 2.0, 0.25]);
        let xp = pad_bins(&x, 1, 1);
        let k = Tensor::<f64>::from_f64_slice(vec![1, 1, 3], &[0.0, 1.0, 0.0]).unwrap();
        let b = Tensor::<f64>::from_f64_slice(vec![1], &[0.0]).unwrap();
        let y = grouped_conv1d(&xp, &k, &b, 1).unwrap();
        assert_eq!(y.data(), x.data());
        // left-shifted kernel exposes the ones padding at the left edge
        let kl = Tensor::<f64>::from_f64_slice(vec![1, 1, 3], &[1.0, 0.0, 0.0]).unwrap();
        let yl = grouped_conv1d(&xp, &kl, &b, 1).unwrap();
        assert_eq!(yl.data(), &[1.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn divisibility_violation_errors() {
        let x = t2([3, 5], &[0.0; 15]);
        let k = Tensor::<f64>::from_f64_slice(vec![2, 1, 3], &[0.0; 6]).unwrap();
        let b = Tensor::<f64>::from_f64_slice(vec![2], &[0.0; 2]).unwrap();
        assert!(matches!(
            grouped_conv1d(&x, &k, &b, 2),
            Err(Error::GroupDivisibility { .. })
        ));
    }

    #[test]
    fn dytanh_basics() {
        let x = t2([2, 2], &[0.3, -0.7, 1.1, 0.0]);
        let gamma = Tensor::<f64>::from_f64_slice(vec![2], &[1.0, 1.0]).unwrap();
        let beta = Tensor::<f64>::from_f64_slice(vec![2], &[0.0, 0.0]).unwrap();
        let y0 = dytanh(&x, 0.0, &gamma, &beta);
        assert!(y0.data().iter().all(|&v| v == 0.0));
        let y1 = dytanh(&t2([1, 1], &[0.0]), 1.0, &t2([1, 1], &[1.0]).reshaped(vec![1]).unwrap(),
                        &Tensor::<f64>::from_f64_slice(vec![1], &[0.0]).unwrap());
        assert_eq!(y1.data(), &[0.0]);
    }

    #[test]
    fn sigmoid_stable_and_relu() {
        let x = Tensor::<f64>::from_f64_slice(vec![3], &[0.0, 30.0, -40.0]).unwrap();
        let y = sigmoid(&x);
        assert_eq!(y.data()[0], 0.5);
        assert!(y.data()[1] < 1.0 && y.data()[1] > 0.999);
        assert!(y.data()[2] > 0.0 && y.data()[2] < 1e-15);
        let r = relu(&Tensor::<f64>::from_f64_slice(vec![3], &[-1.0, 0.0, 2.0]).unwrap());
        assert_eq!(r.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn dropout_eval_identity_and_mean_preserving() {
        let x = Tensor::<f64>::from_f64_slice(vec![4], &[1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, mask) = dropout(&x, 0.35, &mut rng, false);
        assert_eq!(y.data(), x.data());
        assert!(mask.is_none());

        // E[dropout(x)] ≈ x with inverted scaling
        let mut sums = [0.0f64; 4];
        let trials = 100_000;
        for _ in 0..trials {
            let (y, _) = dropout(&x, 0.35, &mut rng, true);
            for (s, &v) in sums.iter_mut().zip(y.data()) {
                *s += v;
            }
        }
        for (s, &v) in sums.iter().zip(x.data()) {
            let mean = s / trials as f64;
            assert!((mean - v).abs() < 0.01 * v.abs().max(1.0), "{mean} vs {v}");
        }
    }

    #[test]
    fn dropout_mask_is_seed_deterministic() {
        let x = Tensor::<f64>::from_f64_slice(vec![64], &[1.0; 64]).unwrap();
        let (a, ma) = dropout(&x, 0.5, &mut ChaCha8Rng::seed_from_u64(9), true);
        let (b, mb) = dropout(&x, 0.5, &mut ChaCha8Rng::seed_from_u64(9), true);
        assert_eq!(a.data(), b.data());
        assert_eq!(ma, mb);
    }

    #[test]
    fn bce_loss_examples() {
        let target = CbeVector::from_ones_count(2, 4).unwrap();
        let zeros = Tensor::<f64>::from_f64_slice(vec![4], &[0.0; 4]).unwrap();
        let (loss, _) = bce_loss(&zeros, &target).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);

        let sat = Tensor::<f64>::from_f64_slice(vec![4], &[40.0, 40.0, -40.0, -40.0]).unwrap();
        let (loss_sat, _) = bce_loss(&sat, &target).unwrap();
        assert!(loss_sat < 1e-10);
    }

    #[test]
    fn softmax_ce_grad_sums_to_zero() {
        let logits = Tensor::from_f64_slice(vec![5], &[0.1, -0.4, 2.0, 0.0, 1.0]).unwrap();
        let (loss, grad) = softmax_ce_loss(&logits, 2).unwrap();
        assert!(loss > 0.0);
        let sum: f64 = grad.data().iter().sum();
        assert!(sum.abs() < 1e-12);
        let sm = softmax(&logits);
        let total: f64 = sm.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
