//! Command-line front end: synthetic data generation, training, forecasting,
//! evaluation, the ablation sweep, and the gradient-check battery.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use binconv::checkpoint::{load_checkpoint, save_checkpoint, Manifest};
use binconv::data::{load_csv, synth_linear_trend, write_csv, SeriesRecord, SplitSpec, SynthSpec};
use binconv::forecasting::{forecast_point, forecast_samples, ForecastScaling};
use binconv::gradcheck;
use binconv::metrics::{crps, nmae, quantile_levels, EvalPanel};
use binconv::training::{fit, make_pairs, ScalingMode, TrainingPair};
use binconv::{param_count, BinConvConfig, BinConvModel, Error, Result, TrainConfig, VariantKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    Argmax,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    #[value(name = "per_sample")]
    PerSample,
    Dataset,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    /// Long-format CSV with a `series_id,value` header.
    pub path: String,
    /// Training prefix length per series; defaults to `len - horizon`.
    #[serde(default)]
    pub train_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub mode: ForecastMode,
    pub n_samples: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            mode: ForecastMode::Argmax,
            n_samples: 100,
        }
    }
}

/// One experiment, end to end. `model` defaults to the univariate
/// configuration at the split's context length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataConfig,
    pub split: SplitSpec,
    #[serde(default)]
    pub model: Option<BinConvConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_variant")]
    pub variant: VariantKind,
    #[serde(default = "default_scaling")]
    pub scaling: ScalingKind,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_variant() -> VariantKind {
    VariantKind::Standard
}

fn default_scaling() -> ScalingKind {
    ScalingKind::PerSample
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let cfg: RunConfig = serde_json::from_slice(&bytes)?;
        cfg.split.validate()?;
        Ok(cfg)
    }

    /// The model configuration with the context pinned to the split.
    pub fn model_config(&self) -> Result<BinConvConfig> {
        let cfg = match &self.model {
            Some(m) => {
                if m.context != self.split.context {
                    return Err(Error::InvalidConfig(format!(
                        "model context {} disagrees with split context {}",
                        m.context, self.split.context
                    )));
                }
                m.clone()
            }
            None => BinConvConfig::univariate(self.split.context),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Parser)]
#[command(name = "binconv", version, about = "Bin-encoded convolutional forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic linear-trend series as a CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 144)]
        length: usize,
        #[arg(long, default_value_t = 100.0)]
        intercept: f64,
        #[arg(long, default_value_t = 1.5)]
        slope: f64,
        #[arg(long, default_value_t = 1e-2)]
        noise_stdev: f64,
    },
    /// Train a model and write checkpoint, history, and config snapshot.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        scaling: Option<ScalingKind>,
    },
    /// Roll a trained model forward over the holdout horizon.
    Forecast {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        mode: Option<ForecastMode>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score forecasts against the holdout, or aggregate prior metric files.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        forecast_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Metric files to aggregate instead of scoring a forecast.
        #[arg(long, num_args = 1..)]
        aggregate: Option<Vec<PathBuf>>,
    },
    /// Train and score every model variant on the same data.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-difference verification of every layer gradient.
    Gradcheck,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Synth {
            out,
            seed,
            length,
            intercept,
            slope,
            noise_stdev,
        } => {
            let spec = SynthSpec {
                length,
                intercept,
                slope,
                noise_stdev,
                ..SynthSpec::default()
            };
            let record: SeriesRecord<f32> = synth_linear_trend(&spec, seed);
            write_csv(&out, &[record])?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Train {
            config,
            out_dir,
            seed,
            variant,
            scaling,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_overrides(&mut cfg, seed, variant, scaling, None, None)?;
            cmd_train(&cfg, &out_dir)?;
            Ok(0)
        }
        Command::Forecast {
            config,
            checkpoint,
            out_dir,
            mode,
            n_samples,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_overrides(&mut cfg, seed, None, None, mode, n_samples)?;
            cmd_forecast(&cfg, &checkpoint, &out_dir)?;
            Ok(0)
        }
        Command::Eval {
            config,
            forecast_dir,
            out,
            aggregate,
        } => {
            match aggregate {
                Some(files) => cmd_aggregate(&files, &out)?,
                None => {
                    let config = config.ok_or_else(|| {
                        Error::InvalidConfig("eval needs --config (or --aggregate)".into())
                    })?;
                    let dir = forecast_dir.ok_or_else(|| {
                        Error::InvalidConfig("eval needs --forecast-dir (or --aggregate)".into())
                    })?;
                    let cfg = RunConfig::load(&config)?;
                    cmd_eval(&cfg, &dir, &out)?;
                }
            }
            Ok(0)
        }
        Command::Ablate {
            config,
            out_dir,
            seed,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_overrides(&mut cfg, seed, None, None, None, None)?;
            cmd_ablate(&cfg, &out_dir)?;
            Ok(0)
        }
        Command::Gradcheck => {
            let mut failed = false;
            for r in gradcheck::suite() {
                let status = if r.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {name}: max_rel_error {err:.3e} (tolerance {tol:.0e})",
                    name = r.name,
                    err = r.max_rel_error,
                    tol = r.tolerance
                );
                failed |= !r.passed();
            }
            Ok(if failed { 1 } else { 0 })
        }
    }
}

fn apply_overrides(
    cfg: &mut RunConfig,
    seed: Option<u64>,
    variant: Option<String>,
    scaling: Option<ScalingKind>,
    mode: Option<ForecastMode>,
    n_samples: Option<usize>,
) -> Result<()> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = variant {
        cfg.variant = v.parse()?;
    }
    if let Some(s) = scaling {
        cfg.scaling = s;
    }
    if let Some(m) = mode {
        cfg.forecast.mode = m;
    }
    if let Some(n) = n_samples {
        cfg.forecast.n_samples = n;
    }
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Training prefix length for one series under the config's split.
fn resolve_train_len(cfg: &RunConfig, series_len: usize) -> Result<usize> {
    let train_len = cfg
        .data
        .train_len
        .unwrap_or_else(|| series_len.saturating_sub(cfg.split.horizon));
    if train_len < cfg.split.context + 1 || train_len > series_len {
        return Err(Error::SeriesTooShort {
            len: series_len,
            needed: cfg.split.context + 1 + cfg.split.horizon,
        });
    }
    Ok(train_len)
}

fn training_pairs(
    cfg: &RunConfig,
    records: &[SeriesRecord<f32>],
) -> Result<(Vec<TrainingPair<f32>>, f64)> {
    let mut pairs = Vec::new();
    let mut abs_sum = 0.0f64;
    let mut count = 0usize;
    for record in records {
        let train_len = resolve_train_len(cfg, record.values.len())?;
        let train = &record.values[..train_len];
        pairs.extend(make_pairs(train, cfg.split.context)?);
        abs_sum += train.iter().map(|v| (*v as f64).abs()).sum::<f64>();
        count += train.len();
    }
    let mean_abs = abs_sum / count as f64;
    let dataset_scale = if mean_abs == 0.0 { 1.0 } else { mean_abs };
    Ok((pairs, dataset_scale))
}

fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let model_cfg = cfg.model_config()?;
    let records: Vec<SeriesRecord<f32>> = load_csv(Path::new(&cfg.data.path))?;
    let (pairs, dataset_scale) = training_pairs(cfg, &records)?;
    let (scaling, saved_scale) = match cfg.scaling {
        ScalingKind::PerSample => (ScalingMode::PerSample, None),
        ScalingKind::Dataset => (
            ScalingMode::Dataset(dataset_scale as f32),
            Some(dataset_scale),
        ),
    };

    let mut model = BinConvModel::<f32>::build_variant(cfg.variant, &model_cfg, cfg.seed)?;
    let binning = model_cfg.binning()?;
    let history = fit(&mut model, &pairs, &cfg.train, &binning, scaling, cfg.seed)?;

    fs::create_dir_all(out_dir)?;
    let ckpt = out_dir.join("model.ckpt");
    save_checkpoint(&model, &ckpt, cfg.train.epochs, saved_scale)?;
    write_json_atomic(&out_dir.join("history.json"), &history)?;
    write_json_atomic(&out_dir.join("config.json"), cfg)?;
    println!(
        "trained {variant} ({params} parameters) on {n} pairs; final loss {loss:.6}",
        variant = cfg.variant,
        params = model.num_parameters(),
        n = pairs.len(),
        loss = history.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    println!("wrote {}", ckpt.display());
    Ok(())
}

/// The per-series forecast context: the last C training values.
fn forecast_context<'a>(
    cfg: &RunConfig,
    record: &'a SeriesRecord<f32>,
) -> Result<&'a [f32]> {
    let train_len = resolve_train_len(cfg, record.values.len())?;
    Ok(&record.values[train_len - cfg.split.context..train_len])
}

fn forecast_scaling(cfg: &RunConfig, manifest: &Manifest) -> Result<ForecastScaling<f32>> {
    match cfg.scaling {
        ScalingKind::PerSample => Ok(ForecastScaling::SlidingPerSample),
        ScalingKind::Dataset => {
            let s = manifest.dataset_scale.ok_or_else(|| {
                Error::InvalidConfig(
                    "dataset scaling requested but the checkpoint was trained per-sample".into(),
                )
            })?;
            Ok(ForecastScaling::Dataset(s as f32))
        }
    }
}

fn quantile_headers() -> Vec<String> {
    quantile_levels()
        .iter()
        .map(|a| format!("q{:02}", (a * 100.0).round() as u32))
        .collect()
}

fn cmd_forecast(cfg: &RunConfig, checkpoint: &Path, out_dir: &Path) -> Result<()> {
    let (model, manifest) = load_checkpoint::<f32>(checkpoint)?;
    if model.config.context != cfg.split.context {
        return Err(Error::InvalidConfig(format!(
            "checkpoint context {} disagrees with split context {}",
            model.config.context, cfg.split.context
        )));
    }
    let records: Vec<SeriesRecord<f32>> = load_csv(Path::new(&cfg.data.path))?;
    let binning = model.config.binning()?;
    let scaling = forecast_scaling(cfg, &manifest)?;
    let horizon = cfg.split.horizon;
    fs::create_dir_all(out_dir)?;

    let point_path = out_dir.join("point.csv");
    let mut point_writer = csv::Writer::from_path(&point_path)?;
    point_writer.write_record(["series_id", "step", "point"])?;

    let mut quantile_writer = match cfg.forecast.mode {
        ForecastMode::Sampling => {
            let mut w = csv::Writer::from_path(out_dir.join("quantiles.csv"))?;
            let mut header = vec!["series_id".to_string(), "step".to_string()];
            header.extend(quantile_headers());
            w.write_record(&header)?;
            Some(w)
        }
        ForecastMode::Argmax => None,
    };

    for record in &records {
        let context = forecast_context(cfg, record)?;
        match cfg.forecast.mode {
            ForecastMode::Argmax => {
                let path = forecast_point(&model, context, horizon, &binning, scaling)?;
                for (t, v) in path.iter().enumerate() {
                    point_writer.write_record([
                        record.series_id.as_str(),
                        &(t + 1).to_string(),
                        &v.to_string(),
                    ])?;
                }
            }
            ForecastMode::Sampling => {
                let sf = forecast_samples(
                    &model,
                    context,
                    horizon,
                    cfg.forecast.n_samples,
                    cfg.seed,
                    &binning,
                    scaling,
                )?;
                // the median trajectory quantile doubles as the point forecast
                for t in 0..horizon {
                    point_writer.write_record([
                        record.series_id.as_str(),
                        &(t + 1).to_string(),
                        &sf.quantiles[9][t].to_string(),
                    ])?;
                    let mut row = vec![record.series_id.clone(), (t + 1).to_string()];
                    row.extend(sf.quantiles.iter().map(|q| q[t].to_string()));
                    quantile_writer.as_mut().unwrap().write_record(&row)?;
                }
            }
        }
    }
    point_writer.flush()?;
    if let Some(mut w) = quantile_writer {
        w.flush()?;
    }
    println!("wrote {}", point_path.display());
    Ok(())
}

fn read_point_csv(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let err = |message: String| Error::Csv {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let id = row.get(0).unwrap_or("").to_string();
        let v: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| err("non-numeric point forecast".into()))?;
        out.entry(id).or_default().push(v);
    }
    if out.is_empty() {
        return Err(err("no forecasts found".into()));
    }
    Ok(out)
}

fn read_quantiles_csv(path: &Path) -> Result<BTreeMap<String, Vec<Vec<f64>>>> {
    let err = |message: String| Error::Csv {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    // per series: 19 rows of per-step values
    let mut out: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let id = row.get(0).unwrap_or("").to_string();
        let series = out.entry(id).or_insert_with(|| vec![Vec::new(); 19]);
        for qi in 0..19 {
            let v: f64 = row
                .get(qi + 2)
                .unwrap_or("")
                .parse()
                .map_err(|_| err("non-numeric quantile".into()))?;
            series[qi].push(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct Metrics {
    nmae: f64,
    crps: Option<f64>,
    per_series_nmae: BTreeMap<String, f64>,
}

fn cmd_eval(cfg: &RunConfig, forecast_dir: &Path, out: &Path) -> Result<()> {
    let records: Vec<SeriesRecord<f64>> = load_csv(Path::new(&cfg.data.path))?;
    let points = read_point_csv(&forecast_dir.join("point.csv"))?;
    let quantiles_path = forecast_dir.join("quantiles.csv");
    let quantiles = if quantiles_path.exists() {
        Some(read_quantiles_csv(&quantiles_path)?)
    } else {
        None
    };

    let mut actuals = Vec::new();
    let mut point_forecasts = Vec::new();
    let mut quantile_forecasts = Vec::new();
    let mut per_series_nmae = BTreeMap::new();
    for record in &records {
        let train_len = resolve_train_len(cfg, record.values.len())?;
        let horizon = cfg.split.horizon.min(record.values.len() - train_len);
        let actual = record.values[train_len..train_len + horizon].to_vec();
        let forecast = points.get(&record.series_id).ok_or_else(|| {
            Error::InvalidConfig(format!("no forecast for series '{}'", record.series_id))
        })?;
        if forecast.len() < horizon {
            return Err(Error::ShapeMismatch(format!(
                "forecast for '{}' is shorter than the holdout",
                record.series_id
            )));
        }
        let forecast = forecast[..horizon].to_vec();
        let one = EvalPanel {
            actuals: vec![actual.clone()],
            point_forecasts: vec![forecast.clone()],
            quantile_forecasts: None,
        };
        per_series_nmae.insert(record.series_id.clone(), nmae(&one)?);
        if let Some(q) = &quantiles {
            let series_q = q.get(&record.series_id).ok_or_else(|| {
                Error::InvalidConfig(format!("no quantiles for series '{}'", record.series_id))
            })?;
            quantile_forecasts.push(
                series_q
                    .iter()
                    .map(|row| row[..horizon].to_vec())
                    .collect::<Vec<_>>(),
            );
        }
        actuals.push(actual);
        point_forecasts.push(forecast);
    }

    let panel = EvalPanel {
        actuals,
        point_forecasts,
        quantile_forecasts: if quantiles.is_some() {
            Some(quantile_forecasts)
        } else {
            None
        },
    };
    let metrics = Metrics {
        nmae: nmae(&panel)?,
        crps: if panel.quantile_forecasts.is_some() {
            Some(crps(&panel)?)
        } else {
            None
        },
        per_series_nmae,
    };
    write_json_atomic(out, &metrics)?;
    match metrics.crps {
        Some(c) => println!("nmae {:.6}  crps {:.6}", metrics.nmae, c),
        None => println!("nmae {:.6}", metrics.nmae),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    count: usize,
    mean: f64,
    min: f64,
    max: f64,
}

fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Summary {
        count,
        mean,
        min,
        max,
    }
}

fn cmd_aggregate(files: &[PathBuf], out: &Path) -> Result<()> {
    let mut nmaes = Vec::new();
    let mut crpss = Vec::new();
    for file in files {
        let metrics: Metrics = serde_json::from_slice(&fs::read(file)?)?;
        nmaes.push(metrics.nmae);
        if let Some(c) = metrics.crps {
            crpss.push(c);
        }
    }
    if nmaes.is_empty() {
        return Err(Error::InvalidConfig("no metric files to aggregate".into()));
    }
    #[derive(Serialize)]
    struct Aggregate {
        nmae: Summary,
        #[serde(skip_serializing_if = "Option::is_none")]
        crps: Option<Summary>,
    }
    let agg = Aggregate {
        nmae: summarize(&nmaes),
        crps: if crpss.is_empty() {
            None
        } else {
            Some(summarize(&crpss))
        },
    };
    write_json_atomic(out, &agg)?;
    println!("aggregated {} metric files into {}", nmaes.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct AblationEntry {
    variant: String,
    parameters: usize,
    nmae: f64,
    max_forecast: f64,
    train_max: f64,
    cap_threshold: f64,
    /// True when every forecast stays below the largest training value plus
    /// one decoded bin width, i.e. the head cannot extrapolate past its grid.
    capped: bool,
}

fn cmd_ablate(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let model_cfg = cfg.model_config()?;
    let records: Vec<SeriesRecord<f32>> = load_csv(Path::new(&cfg.data.path))?;
    let (pairs, dataset_scale) = training_pairs(cfg, &records)?;
    let binning = model_cfg.binning::<f32>()?;
    fs::create_dir_all(out_dir)?;

    let mut entries = Vec::new();
    for variant in VariantKind::ALL {
        let (scaling, forecast_scaling) = match cfg.scaling {
            ScalingKind::PerSample => (ScalingMode::PerSample, None),
            ScalingKind::Dataset => (
                ScalingMode::Dataset(dataset_scale as f32),
                Some(ForecastScaling::Dataset(dataset_scale as f32)),
            ),
        };
        let mut model = BinConvModel::<f32>::build_variant(variant, &model_cfg, cfg.seed)?;
        fit(&mut model, &pairs, &cfg.train, &binning, scaling, cfg.seed)?;

        let mut actuals = Vec::new();
        let mut forecasts = Vec::new();
        let mut max_forecast = f64::NEG_INFINITY;
        let mut train_max = f64::NEG_INFINITY;
        let mut cap_threshold = f64::NEG_INFINITY;
        let mut capped = true;
        for record in &records {
            let train_len = resolve_train_len(cfg, record.values.len())?;
            let horizon = cfg.split.horizon.min(record.values.len() - train_len);
            let context = forecast_context(cfg, record)?;
            let fscaling = forecast_scaling.unwrap_or(ForecastScaling::SlidingPerSample);
            let path = forecast_point(&model, context, horizon, &binning, fscaling)?;

            let series_train_max = record.values[..train_len]
                .iter()
                .map(|v| *v as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            let scale = match fscaling {
                ForecastScaling::Dataset(s) => s as f64,
                _ => {
                    let mean = context.iter().map(|v| (*v as f64).abs()).sum::<f64>()
                        / context.len() as f64;
                    if mean == 0.0 {
                        1.0
                    } else {
                        mean
                    }
                }
            };
            let threshold = series_train_max + binning.width() as f64 * scale;
            let series_max = path
                .iter()
                .map(|v| *v as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            capped &= series_max <= threshold;
            max_forecast = max_forecast.max(series_max);
            train_max = train_max.max(series_train_max);
            cap_threshold = cap_threshold.max(threshold);

            actuals.push(
                record.values[train_len..train_len + horizon]
                    .iter()
                    .map(|v| *v as f64)
                    .collect::<Vec<_>>(),
            );
            forecasts.push(path.iter().map(|v| *v as f64).collect::<Vec<_>>());
        }
        let panel = EvalPanel {
            actuals,
            point_forecasts: forecasts,
            quantile_forecasts: None,
        };
        let entry = AblationEntry {
            variant: variant.to_string(),
            parameters: param_count(&model_cfg, variant),
            nmae: nmae(&panel)?,
            max_forecast,
            train_max,
            cap_threshold,
            capped,
        };
        println!(
            "{variant}: nmae {nmae:.4}, {params} parameters, capped {capped}",
            variant = entry.variant,
            nmae = entry.nmae,
            params = entry.parameters,
            capped = entry.capped
        );
        entries.push(entry);
    }

    #[derive(Serialize)]
    struct Ablation {
        seed: u64,
        results: Vec<AblationEntry>,
    }
    let report = Ablation {
        seed: cfg.seed,
        results: entries,
    };
    write_json_atomic(&out_dir.join("ablation.json"), &report)?;
    Ok(())
}
