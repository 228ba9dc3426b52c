//! Central finite-difference gradient verification (64-bit only).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cbe::CbeVector;
use crate::model::{BinConvConfig, BinConvModel};
use crate::ops;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error between an analytic and a numeric derivative.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1.0);
    (analytic - numeric).abs() / denom
}

/// Central difference of a scalar function along coordinate `i`.
pub fn central_diff_at(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] = x[i] + h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

/// Worst relative error of `analytic_grad` against central differences over
/// every coordinate.
pub fn max_rel_error_full(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic_grad: &[f64],
    h: f64,
) -> f64 {
    assert_eq!(x.len(), analytic_grad.len());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let numeric = central_diff_at(f, x, i, h);
        worst = worst.max(rel_error(analytic_grad[i], numeric));
    }
    worst
}

/// Same as `max_rel_error_full` but probing only `probes` random coordinates.
pub fn max_rel_error_probed<R: Rng>(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic_grad: &[f64],
    h: f64,
    probes: usize,
    rng: &mut R,
) -> f64 {
    assert_eq!(x.len(), analytic_grad.len());
    let mut indices: Vec<usize> = (0..x.len()).collect();
    indices.shuffle(rng);
    indices.truncate(probes);
    let mut worst = 0.0f64;
    for &i in &indices {
        let numeric = central_diff_at(f, x, i, h);
        worst = worst.max(rel_error(analytic_grad[i], numeric));
    }
    worst
}

/// Outcome of one finite-difference check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub const LAYER_TOL: f64 = 1e-4;
pub const END_TO_END_TOL: f64 = 1e-3;

fn rand_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn check_conv2d<R: Rng>(rng: &mut R) -> CheckResult {
    let (c, dp, k, s) = (3usize, 8usize, 2usize, 3usize);
    let dout = dp - s + 1;
    let (nx, nk) = (c * dp, k * c * s);
    let w = rand_vec(k * dout, rng);
    let theta = rand_vec(nx + nk + k, rng);
    let unpack = |t: &[f64]| {
        (
            Tensor::from_f64_slice(vec![1, c, dp], &t[..nx]).unwrap(),
            Tensor::from_f64_slice(vec![k, 1, c, s], &t[nx..nx + nk]).unwrap(),
            Tensor::from_f64_slice(vec![k], &t[nx + nk..]).unwrap(),
        )
    };
    let mut f = |t: &[f64]| {
        let (x, kk, b) = unpack(t);
        let y = ops::conv2d_full_context(&x, &kk, &b).unwrap();
        y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let (x, kk, _) = unpack(&theta);
    let go = Tensor::from_f64_slice(vec![k, dout], &w).unwrap();
    let (gx, gk, gb) = ops::conv2d_full_context_backward(&x, &kk, &go).unwrap();
    let grad: Vec<f64> = gx
        .data()
        .iter()
        .chain(gk.data())
        .chain(gb.data())
        .copied()
        .collect();
    CheckResult {
        name: "conv2d_full_context",
        max_rel_error: max_rel_error_full(&mut f, &theta, &grad, DEFAULT_STEP),
        tolerance: LAYER_TOL,
    }
}

fn check_grouped<R: Rng>(
    name: &'static str,
    cin: usize,
    cout: usize,
    groups: usize,
    rng: &mut R,
) -> CheckResult {
    let (dp, s) = (8usize, 3usize);
    let dout = dp - s + 1;
    let cpg = cin / groups;
    let (nx, nk) = (cin * dp, cout * cpg * s);
    let w = rand_vec(cout * dout, rng);
    let theta = rand_vec(nx + nk + cout, rng);
    let unpack = |t: &[f64]| {
        (
            Tensor::from_f64_slice(vec![cin, dp], &t[..nx]).unwrap(),
            Tensor::from_f64_slice(vec![cout, cpg, s], &t[nx..nx + nk]).unwrap(),
            Tensor::from_f64_slice(vec![cout], &t[nx + nk..]).unwrap(),
        )
    };
    let mut f = |t: &[f64]| {
        let (x, kk, b) = unpack(t);
        let y = ops::grouped_conv1d(&x, &kk, &b, groups).unwrap();
        y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let (x, kk, _) = unpack(&theta);
    let go = Tensor::from_f64_slice(vec![cout, dout], &w).unwrap();
    let (gx, gk, gb) = ops::grouped_conv1d_backward(&x, &kk, groups, &go).unwrap();
    let grad: Vec<f64> = gx
        .data()
        .iter()
        .chain(gk.data())
        .chain(gb.data())
        .copied()
        .collect();
    CheckResult {
        name,
        max_rel_error: max_rel_error_full(&mut f, &theta, &grad, DEFAULT_STEP),
        tolerance: LAYER_TOL,
    }
}

fn check_dytanh<R: Rng>(rng: &mut R) -> CheckResult {
    let (k, d) = (2usize, 5usize);
    let nx = k * d;
    let w = rand_vec(nx, rng);
    let theta = rand_vec(nx + 1 + 2 * k, rng);
    let unpack = |t: &[f64]| {
        (
            Tensor::from_f64_slice(vec![k, d], &t[..nx]).unwrap(),
            t[nx],
            Tensor::from_f64_slice(vec![k], &t[nx + 1..nx + 1 + k]).unwrap(),
            Tensor::from_f64_slice(vec![k], &t[nx + 1 + k..]).unwrap(),
        )
    };
    let mut f = |t: &[f64]| {
        let (x, alpha, gamma, beta) = unpack(t);
        let y = ops::dytanh(&x, alpha, &gamma, &beta);
        y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let (x, alpha, gamma, _) = unpack(&theta);
    let go = Tensor::from_f64_slice(vec![k, d], &w).unwrap();
    let (gx, galpha, ggamma, gbeta) = ops::dytanh_backward(&x, alpha, &gamma, &go);
    let grad: Vec<f64> = gx
        .data()
        .iter()
        .copied()
        .chain(std::iter::once(galpha))
        .chain(ggamma.data().iter().copied())
        .chain(gbeta.data().iter().copied())
        .collect();
    CheckResult {
        name: "dytanh",
        max_rel_error: max_rel_error_full(&mut f, &theta, &grad, DEFAULT_STEP),
        tolerance: LAYER_TOL,
    }
}

fn check_relu_chain<R: Rng>(rng: &mut R) -> CheckResult {
    // conv followed by relu; the seed keeps pre-activations away from the kink
    let (cin, cout, dp, s) = (2usize, 3usize, 8usize, 3usize);
    let dout = dp - s + 1;
    let (nx, nk) = (cin * dp, cout * cin * s);
    let w = rand_vec(cout * dout, rng);
    let theta = rand_vec(nx + nk + cout, rng);
    let unpack = |t: &[f64]| {
        (
            Tensor::from_f64_slice(vec![cin, dp], &t[..nx]).unwrap(),
            Tensor::from_f64_slice(vec![cout, cin, s], &t[nx..nx + nk]).unwrap(),
            Tensor::from_f64_slice(vec![cout], &t[nx + nk..]).unwrap(),
        )
    };
    let mut f = |t: &[f64]| {
        let (x, kk, b) = unpack(t);
        let y = ops::relu(&ops::grouped_conv1d(&x, &kk, &b, 1).unwrap());
        y.data().iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let (x, kk, b) = unpack(&theta);
    let pre = ops::grouped_conv1d(&x, &kk, &b, 1).unwrap();
    let go = Tensor::from_f64_slice(vec![cout, dout], &w).unwrap();
    let g_pre = ops::relu_backward(&pre, &go);
    let (gx, gk, gb) = ops::grouped_conv1d_backward(&x, &kk, 1, &g_pre).unwrap();
    let grad: Vec<f64> = gx
        .data()
        .iter()
        .chain(gk.data())
        .chain(gb.data())
        .copied()
        .collect();
    CheckResult {
        name: "relu_chain",
        max_rel_error: max_rel_error_full(&mut f, &theta, &grad, DEFAULT_STEP),
        tolerance: LAYER_TOL,
    }
}

fn check_bce<R: Rng>(rng: &mut R) -> CheckResult {
    let d = 8usize;
    let target = CbeVector::from_ones_count(3, d).unwrap();
    let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let tref = target.clone();
    let mut f = |t: &[f64]| {
        let logits = Tensor::<f64>::from_f64_slice(vec![d], t).unwrap();
        ops::bce_loss(&logits, &tref).unwrap().0
    };
    let logits = Tensor::<f64>::from_f64_slice(vec![d], &theta).unwrap();
    let (_, grad) = ops::bce_loss(&logits, &target).unwrap();
    CheckResult {
        name: "bce_loss",
        max_rel_error: max_rel_error_full(&mut f, &theta, grad.data(), DEFAULT_STEP),
        tolerance: LAYER_TOL,
    }
}

fn check_end_to_end<R: Rng>(probes: usize, rng: &mut R) -> CheckResult {
    let cfg = BinConvConfig {
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
    };
    let model = BinConvModel::<f64>::init(&cfg, 17).unwrap();
    let mut x = vec![0.0f64; 4 * 12];
    for (row, ones) in [8usize, 9, 8, 10].iter().enumerate() {
        x[row * 12..row * 12 + ones].fill(1.0);
    }
    let x = Tensor::from_f64_slice(vec![4, 12], &x).unwrap();
    let target = CbeVector::from_ones_count(9, 12).unwrap();

    let theta = model.flat_params();
    let base = model.clone();
    let xin = x.clone();
    let tref = target.clone();
    let mut f = move |t: &[f64]| {
        let mut m = base.clone();
        m.set_flat_params(t);
        let mut eval_rng = ChaCha8Rng::seed_from_u64(0);
        let logits = m.forward(&xin, false, &mut eval_rng).unwrap();
        ops::bce_loss(&logits, &tref).unwrap().0
    };

    let mut m = model.clone();
    m.zero_grads();
    let mut eval_rng = ChaCha8Rng::seed_from_u64(0);
    let (logits, cache) = m.forward_cached(&x, false, &mut eval_rng).unwrap();
    let (_, grad_logits) = ops::bce_loss(&logits, &target).unwrap();
    m.backward(&cache, &grad_logits).unwrap();
    let grad = m.flat_grads();

    CheckResult {
        name: "end_to_end",
        max_rel_error: max_rel_error_probed(&mut f, &theta, &grad, DEFAULT_STEP, probes, rng),
        tolerance: END_TO_END_TOL,
    }
}

/// Full finite-difference battery over every layer plus a probed end-to-end
/// pass through a small model.
pub fn suite() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    vec![
        check_conv2d(&mut rng),
        check_grouped("grouped_conv1d_g1", 2, 4, 1, &mut rng),
        check_grouped("grouped_conv1d_depthwise", 4, 4, 4, &mut rng),
        check_dytanh(&mut rng),
        check_relu_chain(&mut rng),
        check_bce(&mut rng),
        check_end_to_end(32, &mut rng),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_map_is_exact() {
        let w = [2.0, -3.0, 0.5];
        let mut f = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let x = [0.4, 1.2, -0.7];
        let err = max_rel_error_full(&mut f, &x, &w, DEFAULT_STEP);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn quadratic_probed() {
        let mut f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x: Vec<f64> = (0..50).map(|i| (i as f64) * 0.1 - 2.0).collect();
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = max_rel_error_probed(&mut f, &x, &grad, DEFAULT_STEP, 16, &mut rng);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn layer_suite_passes() {
        for r in suite() {
            assert!(r.passed(), "{}: err {} tol {}", r.name, r.max_rel_error, r.tolerance);
        }
    }
}
