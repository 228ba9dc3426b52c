//! Cumulative binary encoding: mean scaling, quantization to monotone bit
//! vectors, the inverse transform, and the machinery that turns per-bin
//! Bernoulli probabilities into a normalized distribution over the D+1
//! valid encodings.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Clamp applied to per-bin probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Uniform quantization grid shared by encoder, decoder, and model head.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning<S: Scalar> {
    b0: S,
    bd: S,
    d: usize,
}

impl<S: Scalar> Binning<S> {
    pub fn new(b0: S, bd: S, d: usize) -> Result<Self> {
        if !(b0.is_finite() && bd.is_finite()) {
            return Err(Error::InvalidBinning("edges must be finite".into()));
        }
        if bd <= b0 {
            return Err(Error::InvalidBinning(format!(
                "upper edge {bd} must exceed lower edge {b0}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidBinning("bin count must be >= 1".into()));
        }
        Ok(Self { b0, bd, d })
    }

    #[inline]
    pub fn lower(&self) -> S {
        self.b0
    }

    #[inline]
    pub fn upper(&self) -> S {
        self.bd
    }

    #[inline]
    pub fn bins(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn width(&self) -> S {
        (self.bd - self.b0) / S::from_f64(self.d as f64)
    }

    /// Edge `d` for `d` in `0..=D`.
    #[inline]
    pub fn edge(&self, d: usize) -> S {
        self.b0 + self.width() * S::from_f64(d as f64)
    }

    /// Index of the bin containing `x`, clamped into `0..D`.
    pub fn clamped_bin_index(&self, x: S) -> usize {
        let rel = (x - self.b0) / self.width();
        let idx = rel.to_f64_().floor();
        if idx < 0.0 {
            0
        } else if idx as usize >= self.d {
            self.d - 1
        } else {
            idx as usize
        }
    }
}

/// Monotone binary vector of the form 1...10...0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbeVector {
    bits: Vec<u8>,
    ones: usize,
}

impl CbeVector {
    pub fn from_ones_count(ones: usize, d: usize) -> Result<Self> {
        if ones > d {
            return Err(Error::OnesCountOutOfRange { m: ones, d });
        }
        let mut bits = vec![0u8; d];
        bits[..ones].fill(1);
        Ok(Self { bits, ones })
    }

    #[inline]
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn ones_count(&self) -> usize {
        self.ones
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Mean-absolute-value scale of a context window, original units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale<S: Scalar>(S);

impl<S: Scalar> Scale<S> {
    #[inline]
    pub fn value(&self) -> S {
        self.0
    }
}

/// Normalized log-probabilities over the D+1 valid encodings.
#[derive(Debug, Clone)]
pub struct BinDistribution<S: Scalar> {
    log_probs: Vec<S>,
    log_z: S,
}

impl<S: Scalar> BinDistribution<S> {
    /// Log-probability of outcome `m` (m ones), for `m` in `0..=D`.
    #[inline]
    pub fn log_probs(&self) -> &[S] {
        &self.log_probs
    }

    #[inline]
    pub fn log_normalizer(&self) -> S {
        self.log_z
    }

    pub fn outcomes(&self) -> usize {
        self.log_probs.len()
    }
}

/// s = mean |x| over the context; falls back to 1 when the context is all zero.
pub fn mean_scale<S: Scalar>(context: &[S]) -> Result<Scale<S>> {
    if context.is_empty() {
        return Err(Error::EmptyContext);
    }
    let mut acc = 0.0f64;
    for &x in context {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("context value {x}")));
        }
        acc += x.to_f64_().abs();
    }
    let s = acc / context.len() as f64;
    let s = if s == 0.0 { 1.0 } else { s };
    Ok(Scale(S::from_f64(s)))
}

/// Quantize a scaled value: bit d (1-based) is set iff x >= edge(d-1).
///
/// Values below the lower edge give all zeros; values at or above the upper
/// edge clamp to all ones.
pub fn encode<S: Scalar>(x_scaled: S, binning: &Binning<S>) -> Result<CbeVector> {
    if !x_scaled.is_finite() {
        return Err(Error::NonFinite(format!("encode input {x_scaled}")));
    }
    let d = binning.bins();
    let rel = ((x_scaled - binning.lower()) / binning.width()).to_f64_();
    let ones = if rel < 0.0 {
        0
    } else {
        // bit d set iff x >= edge(d-1), so ones = floor(rel) + 1, capped at D
        ((rel.floor() as usize) + 1).min(d)
    };
    CbeVector::from_ones_count(ones, d)
}

/// Inverse transform: midpoint of the bin indicated by the ones count.
/// m = 0 means "below the grid" and clamps to the lower edge.
pub fn decode<S: Scalar>(m: usize, binning: &Binning<S>) -> Result<S> {
    let d = binning.bins();
    if m > d {
        return Err(Error::OnesCountOutOfRange { m, d });
    }
    if m == 0 {
        return Ok(binning.lower());
    }
    let half = S::from_f64(0.5);
    Ok((binning.edge(m - 1) + binning.edge(m)) * half)
}

/// Eq-2 style normalized distribution over valid sequences, computed in
/// O(D) log space with prefix sums and a stable log-sum-exp.
pub fn valid_sequence_log_probs<S: Scalar>(p: &[S]) -> Result<BinDistribution<S>> {
    let d = p.len();
    let mut log_p = Vec::with_capacity(d);
    let mut log_q = Vec::with_capacity(d);
    for (i, &pi) in p.iter().enumerate() {
        let v = pi.to_f64_();
        if !v.is_finite() || v < -1e-9 || v > 1.0 + 1e-9 {
            return Err(Error::ProbabilityOutOfRange { index: i, value: v });
        }
        let v = v.clamp(PROB_EPS, 1.0 - PROB_EPS);
        log_p.push(v.ln());
        log_q.push((1.0 - v).ln());
    }

    // unnormalized log p̂(e_m) = Σ_{i<=m} log p_i + Σ_{i>m} log(1-p_i)
    let mut suffix_q = vec![0.0f64; d + 1];
    for i in (0..d).rev() {
        suffix_q[i] = suffix_q[i + 1] + log_q[i];
    }
    let mut raw = Vec::with_capacity(d + 1);
    let mut prefix_p = 0.0f64;
    raw.push(suffix_q[0]);
    for m in 1..=d {
        prefix_p += log_p[m - 1];
        raw.push(prefix_p + suffix_q[m]);
    }

    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = raw.iter().map(|&v| (v - max).exp()).sum();
    let log_z = max + sum_exp.ln();

    let log_probs = raw.iter().map(|&v| S::from_f64(v - log_z)).collect();
    Ok(BinDistribution {
        log_probs,
        log_z: S::from_f64(log_z),
    })
}

/// Smallest m attaining the maximum log-probability.
pub fn argmax_bin<S: Scalar>(dist: &BinDistribution<S>) -> usize {
    let mut best = 0;
    let mut best_lp = dist.log_probs[0];
    for (m, &lp) in dist.log_probs.iter().enumerate().skip(1) {
        if lp > best_lp {
            best = m;
            best_lp = lp;
        }
    }
    best
}

/// n i.i.d. categorical draws over m = 0..=D via inverse CDF.
pub fn sample_bins<S: Scalar, R: Rng>(dist: &BinDistribution<S>, rng: &mut R, n: usize) -> Vec<usize> {
    let probs: Vec<f64> = dist.log_probs.iter().map(|lp| lp.to_f64_().exp()).collect();
    let last = probs.len() - 1;
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            for (m, &p) in probs.iter().enumerate() {
                cum += p;
                if u < cum {
                    return m;
                }
            }
            last
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binning(b0: f64, bd: f64, d: usize) -> Binning<f64> {
        Binning::new(b0, bd, d).unwrap()
    }

    /// Brute-force direct-product reference for the Eq-2 distribution.
    fn brute_force_probs(p: &[f64]) -> Vec<f64> {
        let d = p.len();
        let pc: Vec<f64> = p
            .iter()
            .map(|v| v.clamp(PROB_EPS, 1.0 - PROB_EPS))
            .collect();
        let mut raw = Vec::with_capacity(d + 1);
        for m in 0..=d {
            let mut prod = 1.0;
            for (i, &pi) in pc.iter().enumerate() {
                prod *= if i < m { pi } else { 1.0 - pi };
            }
            raw.push(prod);
        }
        let z: f64 = raw.iter().sum();
        raw.iter().map(|v| v / z).collect()
    }

    #[test]
    fn mean_scale_examples() {
        assert_eq!(mean_scale(&[1.0, -2.0, 3.0]).unwrap().value(), 2.0);
        assert_eq!(mean_scale(&[0.0, 0.0, 0.0]).unwrap().value(), 1.0);
        assert_eq!(mean_scale(&[5.0]).unwrap().value(), 5.0);
        assert!(matches!(
            mean_scale::<f64>(&[]),
            Err(Error::EmptyContext)
        ));
    }

    #[test]
    fn encode_examples() {
        let b = binning(0.0, 4.0, 4);
        assert_eq!(encode(2.5, &b).unwrap().bits(), &[1, 1, 1, 0]);
        assert_eq!(encode(4.0, &b).unwrap().bits(), &[1, 1, 1, 1]);
        let wide = binning(-5.0, 5.0, 1000);
        assert_eq!(encode(-7.0, &wide).unwrap().ones_count(), 0);
        assert!(encode(f64::NAN, &b).is_err());
    }

    #[test]
    fn decode_examples() {
        let b = binning(0.0, 4.0, 4);
        assert_eq!(decode(3, &b).unwrap(), 2.5);
        assert_eq!(decode(4, &b).unwrap(), 3.5);
        assert_eq!(decode(0, &binning(-5.0, 5.0, 1000)).unwrap(), -5.0);
        assert!(decode(5, &b).is_err());
    }

    #[test]
    fn figure3_distribution() {
        let dist = valid_sequence_log_probs(&[0.4f64, 0.9, 0.2]).unwrap();
        let probs: Vec<f64> = dist.log_probs().iter().map(|lp| lp.exp()).collect();
        assert!((dist.log_normalizer().exp() - 0.44).abs() < 1e-12);
        let expected = [0.109, 0.073, 0.654, 0.164];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-3, "{p} vs {e}");
        }
        assert_eq!(argmax_bin(&dist), 2);
    }

    #[test]
    fn uniform_distribution_from_half_probs() {
        let dist = valid_sequence_log_probs(&[0.5f64, 0.5, 0.5]).unwrap();
        for lp in dist.log_probs() {
            assert!((lp.exp() - 0.25).abs() < 1e-12);
        }
        assert_eq!(argmax_bin(&dist), 0); // tie-break to smallest
    }

    #[test]
    fn all_ones_dominates() {
        let p = vec![1.0 - 1e-9; 8];
        let dist = valid_sequence_log_probs(&p).unwrap();
        assert_eq!(argmax_bin(&dist), 8);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(valid_sequence_log_probs(&[0.5, 1.5]).is_err());
        assert!(valid_sequence_log_probs(&[-0.1, 0.5]).is_err());
        // within slack is fine
        assert!(valid_sequence_log_probs(&[1.0 + 1e-10, 0.0]).is_ok());
    }

    #[test]
    fn sampling_matches_figure3_frequencies() {
        let dist = valid_sequence_log_probs(&[0.4f64, 0.9, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = sample_bins(&dist, &mut rng, 100_000);
        let freq2 = draws.iter().filter(|&&m| m == 2).count() as f64 / 1e5;
        assert!((freq2 - 0.654).abs() < 0.01, "freq {freq2}");
    }

    #[test]
    fn sampling_is_deterministic_and_degenerate_collapses() {
        let dist = valid_sequence_log_probs(&[1.0, 1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = sample_bins(&dist, &mut rng, 50);
        assert!(draws.iter().all(|&m| m == 2));

        let d2 = valid_sequence_log_probs(&[0.4, 0.9, 0.2]).unwrap();
        let a = sample_bins(&d2, &mut ChaCha8Rng::seed_from_u64(11), 100);
        let b = sample_bins(&d2, &mut ChaCha8Rng::seed_from_u64(11), 100);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn encode_is_monotone_and_round_trips(x in -6.0f64..6.0) {
            let b = binning(-5.0, 5.0, 100);
            let v = encode(x, &b).unwrap();
            for w in v.bits().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            if (-5.0..5.0).contains(&x) {
                let back = decode(v.ones_count(), &b).unwrap();
                prop_assert!((back - x).abs() <= b.width() / 2.0 + 1e-12);
            }
        }

        #[test]
        fn normalization_sums_to_one(p in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let dist = valid_sequence_log_probs(&p).unwrap();
            let total: f64 = dist.log_probs().iter().map(|lp| lp.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn matches_brute_force_oracle(p in proptest::collection::vec(0.0f64..=1.0, 1..=12)) {
            let dist = valid_sequence_log_probs(&p).unwrap();
            let oracle = brute_force_probs(&p);
            for (lp, o) in dist.log_probs().iter().zip(oracle) {
                prop_assert!((lp.exp() - o).abs() < 1e-12);
            }
        }

        #[test]
        fn mean_scale_homogeneous(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..20),
            c in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        ) {
            prop_assume!(xs.iter().any(|&x| x != 0.0));
            let s = mean_scale(&xs).unwrap().value();
            let scaled: Vec<f64> = xs.iter().map(|&x| c * x).collect();
            let s2 = mean_scale(&scaled).unwrap().value();
            prop_assert!((s2 - c.abs() * s).abs() < 1e-9 * s2.max(1.0));
        }
    }

    #[test]
    fn argmax_invariant_under_log_shift() {
        let dist = valid_sequence_log_probs(&[0.3, 0.8, 0.6, 0.1]).unwrap();
        let shifted = BinDistribution {
            log_probs: dist.log_probs().iter().map(|&lp| lp + 17.0).collect(),
            log_z: dist.log_normalizer(),
        };
        assert_eq!(argmax_bin(&dist), argmax_bin(&shifted));
    }
}
