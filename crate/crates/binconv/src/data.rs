//! Dataset ingestion (long-format CSV), splitting, and the synthetic
//! linear-trend generator used by the extrapolation experiment.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord<S: Scalar> {
    pub series_id: String,
    pub values: Vec<S>,
}

/// Context/horizon split; univariate runs use C = 3H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub context: usize,
    pub horizon: usize,
}

impl SplitSpec {
    pub fn univariate(horizon: usize) -> Self {
        Self {
            context: 3 * horizon,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "context and horizon must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters of the synthetic trend s_t = (intercept + slope·t)(1 + σ_t)
/// with σ_t ~ N(0, noise_stdev²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub length: usize,
    pub intercept: f64,
    pub slope: f64,
    pub noise_stdev: f64,
    pub train_len: usize,
    pub context: usize,
    pub horizon: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            length: 144,
            intercept: 100.0,
            slope: 1.5,
            noise_stdev: 1e-2,
            train_len: 120,
            context: 72,
            horizon: 24,
        }
    }
}

/// Read `series_id,value` rows, grouping by id in order of first appearance.
pub fn load_csv<S: Scalar>(path: &Path) -> Result<Vec<SeriesRecord<S>>> {
    let err = |message: String| Error::Csv {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "series_id" || &headers[1] != "value" {
        return Err(err(format!(
            "expected header 'series_id,value', got '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records: Vec<SeriesRecord<S>> = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let id = row.get(0).unwrap_or("").to_string();
        let raw = row.get(1).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| err(format!("non-numeric value '{raw}' at row {}", row_no + 2)))?;
        if !value.is_finite() {
            return Err(err(format!(
                "non-finite value '{raw}' at row {}",
                row_no + 2
            )));
        }
        match records.iter_mut().find(|r| r.series_id == id) {
            Some(r) => r.values.push(S::from_f64(value)),
            None => records.push(SeriesRecord {
                series_id: id,
                values: vec![S::from_f64(value)],
            }),
        }
    }
    if records.is_empty() {
        return Err(err("empty file".into()));
    }
    Ok(records)
}

pub fn write_csv<S: Scalar>(path: &Path, records: &[SeriesRecord<S>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writer.write_record(["series_id", "value"])?;
    for record in records {
        for v in &record.values {
            writer.write_record([record.series_id.as_str(), &format!("{}", v.to_f64_())])?;
        }
    }
    writer.flush()?;
    Ok(())
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv {
            path: String::new(),
            message: e.to_string(),
        }
    }
}

/// Seeded standard normal via Box-Muller.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate the linear-trend series with multiplicative Gaussian noise.
pub fn synth_linear_trend<S: Scalar>(spec: &SynthSpec, seed: u64) -> SeriesRecord<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..spec.length)
        .map(|t| {
            let sigma = if spec.noise_stdev == 0.0 {
                0.0
            } else {
                spec.noise_stdev * gaussian(&mut rng)
            };
            S::from_f64((spec.intercept + spec.slope * t as f64) * (1.0 + sigma))
        })
        .collect();
    SeriesRecord {
        series_id: "synthetic_linear_trend".into(),
        values,
    }
}

/// Prefix/suffix split with no shuffling.
pub fn train_test_split<S: Scalar>(
    record: &SeriesRecord<S>,
    train_len: usize,
) -> Result<(Vec<S>, Vec<S>)> {
    if train_len >= record.values.len() {
        return Err(Error::SeriesTooShort {
            len: record.values.len(),
            needed: train_len + 1,
        });
    }
    Ok((
        record.values[..train_len].to_vec(),
        record.values[train_len..].to_vec(),
    ))
}
