//! Point and probabilistic evaluation: NMAE, quantile loss, and a
//! quantile-discretized CRPS sharing NMAE's absolute-actuals denominator.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The 19 quantile levels 0.05, 0.10, ..., 0.95.
pub fn quantile_levels() -> [f64; 19] {
    let mut levels = [0.0; 19];
    for (i, l) in levels.iter_mut().enumerate() {
        *l = (i + 1) as f64 * 0.05;
    }
    levels
}

/// Actuals and forecasts for a panel of series over a shared horizon.
#[derive(Debug, Clone)]
pub struct EvalPanel<S: Scalar> {
    /// num_series × T actual values, original units.
    pub actuals: Vec<Vec<S>>,
    /// num_series × T point forecasts.
    pub point_forecasts: Vec<Vec<S>>,
    /// Optional num_series × 19 × T quantile forecasts.
    pub quantile_forecasts: Option<Vec<Vec<Vec<S>>>>,
}

impl<S: Scalar> EvalPanel<S> {
    fn validate(&self) -> Result<()> {
        if self.actuals.is_empty() {
            return Err(Error::ShapeMismatch("empty panel".into()));
        }
        if self.actuals.len() != self.point_forecasts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} actual series vs {} forecast series",
                self.actuals.len(),
                self.point_forecasts.len()
            )));
        }
        for (a, f) in self.actuals.iter().zip(&self.point_forecasts) {
            if a.len() != f.len() {
                return Err(Error::ShapeMismatch(
                    "actual/forecast horizon mismatch".into(),
                ));
            }
        }
        if let Some(q) = &self.quantile_forecasts {
            if q.len() != self.actuals.len() {
                return Err(Error::ShapeMismatch("quantile series count".into()));
            }
            for (qs, a) in q.iter().zip(&self.actuals) {
                if qs.len() != 19 || qs.iter().any(|row| row.len() != a.len()) {
                    return Err(Error::ShapeMismatch(
                        "quantile forecasts must be 19 × T".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn abs_actual_sum(&self) -> Result<f64> {
        let denom: f64 = self
            .actuals
            .iter()
            .flatten()
            .map(|v| v.to_f64_().abs())
            .sum();
        if denom == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(denom)
    }
}

/// Σ|x − x̂| / Σ|x| over all series and steps.
pub fn nmae<S: Scalar>(panel: &EvalPanel<S>) -> Result<f64> {
    panel.validate()?;
    let denom = panel.abs_actual_sum()?;
    let num: f64 = panel
        .actuals
        .iter()
        .zip(&panel.point_forecasts)
        .flat_map(|(a, f)| a.iter().zip(f))
        .map(|(x, y)| (x.to_f64_() - y.to_f64_()).abs())
        .sum();
    Ok(num / denom)
}

/// Pinball loss Λ_α(q, z) = (α − 1{z < q})·(z − q).
pub fn quantile_loss(alpha: f64, q: f64, z: f64) -> f64 {
    let indicator = if z < q { 1.0 } else { 0.0 };
    (alpha - indicator) * (z - q)
}

/// CRPS discretized as the mean of 2Λ_α over the 19 levels, summed over the
/// panel and normalized by Σ|x| like NMAE.
pub fn crps<S: Scalar>(panel: &EvalPanel<S>) -> Result<f64> {
    panel.validate()?;
    let quantiles = panel
        .quantile_forecasts
        .as_ref()
        .ok_or_else(|| Error::ShapeMismatch("panel has no quantile forecasts".into()))?;
    let denom = panel.abs_actual_sum()?;
    let levels = quantile_levels();
    let mut total = 0.0f64;
    for (series_q, actual) in quantiles.iter().zip(&panel.actuals) {
        for (t, z) in actual.iter().enumerate() {
            let z = z.to_f64_();
            let mean_loss: f64 = levels
                .iter()
                .enumerate()
                .map(|(qi, &alpha)| 2.0 * quantile_loss(alpha, series_q[qi][t].to_f64_(), z))
                .sum::<f64>()
                / levels.len() as f64;
            total += mean_loss;
        }
    }
    Ok(total / denom)
}
