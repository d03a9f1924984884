//! Optimizer, loss and metrics, the historical-average baseline, the
//! early-stopped training loop and the evaluation protocol.

mod baseline;
mod metrics;
mod optim;

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Tape;
use crate::data::{
    inject_noise, make_channels_from, split_train_val_test, zscore, ChannelBatch, Direction, NormStats, SeriesTable,
    SplitAnchors,
};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, StModel};

pub use baseline::{ha_baseline, Forecaster, HistoricalAverage};
pub use metrics::{mae_loss, metrics, MetricAccumulator, Metrics};
pub use optim::Adam;

/// Horizon steps reported individually (15, 30 and 60 minutes at 5-minute slices).
pub const REPORT_STEPS: [usize; 3] = [3, 6, 12];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Smallest drop in validation MAE that counts as an improvement.
    pub min_delta: f64,
    pub seed: u64,
    pub mape_epsilon: f64,
    /// Use every `train_stride`-th training anchor.
    pub train_stride: usize,
    /// Use every `val_stride`-th validation anchor for early stopping.
    pub val_stride: usize,
    /// Windows per forward pass during evaluation.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 64,
            max_epochs: 200,
            patience: 15,
            min_delta: 1e-6,
            seed: 0,
            mape_epsilon: 1.0,
            train_stride: 1,
            val_stride: 1,
            eval_batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("train.lr must be finite and >= 0, got {}", self.lr)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("max_epochs", self.max_epochs),
            ("train_stride", self.train_stride),
            ("val_stride", self.val_stride),
            ("eval_batch_size", self.eval_batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("train.{name} must be positive")));
            }
        }
        if !(self.min_delta >= 0.0) || !(self.mape_epsilon >= 0.0) {
            return Err(Error::Config("train.min_delta and train.mape_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// A series split into anchors, with inputs normalized by training statistics.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub raw: SeriesTable,
    pub normalized: SeriesTable,
    pub norm: NormStats,
    pub split: SplitAnchors,
    pub config: ModelConfig,
}

impl Dataset {
    /// Splits 6:2:2 and z-scores with statistics of the training rows.
    /// With `normalize` false the identity transform is used.
    pub fn prepare(raw: SeriesTable, config: &ModelConfig, normalize: bool) -> Result<Self> {
        let split = split_train_val_test(&raw, config, [6, 2, 2])?;
        let norm = if normalize {
            NormStats::from_training(&raw, &split.train, config.horizon)?
        } else {
            NormStats::IDENTITY
        };
        Self::with_norm(raw, config, split, norm)
    }

    pub fn with_norm(raw: SeriesTable, config: &ModelConfig, split: SplitAnchors, norm: NormStats) -> Result<Self> {
        let normalized = zscore(&raw, norm, Direction::Normalize)?;
        Ok(Self {
            raw,
            normalized,
            norm,
            split,
            config: config.clone(),
        })
    }

    /// Windows for `anchors` with normalized inputs and targets.
    pub fn training_batch(&self, anchors: &[usize]) -> Result<ChannelBatch> {
        make_channels_from(&self.normalized, &self.normalized, anchors, &self.config)
    }
}

/// Tracks validation improvement for early stopping.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val: f64) -> StopDecision {
        if val < self.best - self.min_delta || (self.best.is_infinite() && val.is_finite()) {
            self.best = val;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch, in denormalized units.
    pub train_mae: f64,
    pub val_mae: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The model at the epoch with the lowest validation MAE.
    pub model: StModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
}

/// One optimizer step on `batch`; returns the normalized loss before the update.
pub fn train_step(model: &mut StModel, opt: &mut Adam, batch: &ChannelBatch) -> Result<f64> {
    let loss = {
        let tape = Tape::new();
        let bound = model.params.bind(&tape);
        let out = model.forward(&tape, &bound, batch)?;
        let loss = mae_loss(out.prediction, tape.constant(batch.y.clone()))?;
        let value = loss.item();
        if !value.is_finite() {
            return Ok(value);
        }
        let grads = tape.backward(loss)?;
        model.params.accumulate_grads(&bound, &grads)?;
        value
    };
    opt.step(&mut model.params)?;
    Ok(loss)
}

/// Mini-batch training with per-epoch validation and early stopping.
pub fn train(mut model: StModel, ds: &Dataset, tc: &TrainConfig) -> Result<TrainOutcome> {
    tc.validate()?;
    if model.config != ds.config {
        return Err(Error::Config("model and dataset configs differ".into()));
    }
    let mut anchors: Vec<usize> = ds.split.train.iter().copied().step_by(tc.train_stride).collect();
    let val: Vec<usize> = ds.split.val.iter().copied().step_by(tc.val_stride).collect();
    if anchors.is_empty() || val.is_empty() {
        return Err(Error::Config("empty training or validation split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut opt = Adam::new(tc.lr);
    let mut stopper = EarlyStopping::new(tc.patience, tc.min_delta);
    let mut best = model.clone();
    let mut history = Vec::new();
    let start = Instant::now();
    let eval_opts = EvalOptions {
        mape_epsilon: tc.mape_epsilon,
        batch_size: tc.eval_batch_size,
        noise: None,
    };

    for epoch in 1..=tc.max_epochs {
        anchors.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in anchors.chunks(tc.batch_size).enumerate() {
            let batch = ds.training_batch(chunk)?;
            let loss = train_step(&mut model, &mut opt, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi + 1,
                    loss,
                });
            }
            total += loss * chunk.len() as f64;
        }
        let train_mae = total / anchors.len() as f64 * ds.norm.std;
        let val_mae = evaluate(&model, ds, &val, &eval_opts)?.average.mae;
        if !val_mae.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: val_mae,
            });
        }
        let elapsed_s = start.elapsed().as_secs_f64();
        log::info!("epoch {epoch}: train_mae {train_mae:.4} val_mae {val_mae:.4} ({elapsed_s:.1}s)");
        history.push(EpochRecord {
            epoch,
            train_mae,
            val_mae,
            elapsed_s,
        });
        match stopper.observe(epoch, val_mae) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                log::info!("no improvement for {} epochs, stopping", tc.patience);
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch: stopper.best_epoch(),
        best_val_mae: stopper.best(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub mape_epsilon: f64,
    pub batch_size: usize,
    /// `(std, seed)` of Gaussian noise added to the normalized inputs.
    pub noise: Option<(f64, u64)>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mape_epsilon: 1.0,
            batch_size: 256,
            noise: None,
        }
    }
}

/// Per-step and averaged metrics in denormalized units.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastReport {
    pub tag: String,
    /// One entry per horizon step `1..=q`.
    pub per_step: Vec<Metrics>,
    pub average: Metrics,
    pub elapsed_s: f64,
}

impl ForecastReport {
    pub fn horizon(&self) -> usize {
        self.per_step.len()
    }

    /// Metrics at `step` (1-based).
    pub fn step(&self, step: usize) -> Option<Metrics> {
        step.checked_sub(1).and_then(|i| self.per_step.get(i)).copied()
    }

    /// The standard report steps that exist for this horizon.
    pub fn reported_steps(&self) -> Vec<usize> {
        REPORT_STEPS.into_iter().filter(|&s| s <= self.horizon()).collect()
    }
}

/// Evaluates `forecaster` on `anchors`. Inputs come from the normalized
/// table (optionally with noise), forecasts are denormalized, and targets
/// are read from the raw table.
pub fn evaluate<F: Forecaster + ?Sized>(
    forecaster: &F,
    ds: &Dataset,
    anchors: &[usize],
    opts: &EvalOptions,
) -> Result<ForecastReport> {
    let start = Instant::now();
    let noisy;
    let inputs = match opts.noise {
        Some((std, seed)) => {
            noisy = inject_noise(&ds.normalized, 0.0, std, seed)?;
            &noisy
        }
        None => &ds.normalized,
    };
    let q = ds.config.horizon;
    let mut per_step = vec![MetricAccumulator::default(); q];
    let mut all = MetricAccumulator::default();
    for chunk in anchors.chunks(opts.batch_size.max(1)) {
        let batch = make_channels_from(inputs, &ds.raw, chunk, &ds.config)?;
        let pred = forecaster.forecast(&batch)?;
        if pred.shape() != batch.y.shape() {
            return Err(Error::dim("evaluate", pred.shape(), batch.y.shape()));
        }
        for (i, (p, t)) in pred.data().iter().zip(batch.y.data()).enumerate() {
            let p = ds.norm.apply(*p, Direction::Denormalize);
            per_step[i % q].push(p, *t, opts.mape_epsilon);
            all.push(p, *t, opts.mape_epsilon);
        }
    }
    Ok(ForecastReport {
        tag: String::new(),
        per_step: per_step.iter().map(MetricAccumulator::finish).collect::<Result<_>>()?,
        average: all.finish()?,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

fn fmt_mape(m: Option<f64>) -> String {
    m.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// `step,mae,mape,rmse` rows for the report steps and an `avg` row. With
/// `noisy`, the same metrics of the noisy-input run follow as extra columns.
pub fn report_csv(header: &str, clean: &ForecastReport, noisy: Option<&ForecastReport>) -> String {
    let mut out = String::from(header);
    out.push_str("step,mae,mape,rmse");
    if noisy.is_some() {
        out.push_str(",noisy_mae,noisy_mape,noisy_rmse");
    }
    out.push('\n');
    let mut row = |label: String, c: Metrics, n: Option<Metrics>| {
        let _ = write!(out, "{label},{},{},{}", c.mae, fmt_mape(c.mape), c.rmse);
        if let Some(n) = n {
            let _ = write!(out, ",{},{},{}", n.mae, fmt_mape(n.mape), n.rmse);
        }
        out.push('\n');
    };
    for s in clean.reported_steps() {
        let c = clean.step(s).expect("reported step exists");
        row(s.to_string(), c, noisy.and_then(|n| n.step(s)));
    }
    row("avg".into(), clean.average, noisy.map(|n| n.average));
    out
}

/// `epoch,train_mae,val_mae,elapsed_s`. Wall-clock time is written as `-`
/// unless `with_elapsed`, so that reruns produce identical files.
pub fn history_csv(header: &str, history: &[EpochRecord], with_elapsed: bool) -> String {
    let mut out = String::from(header);
    out.push_str("epoch,train_mae,val_mae,elapsed_s\n");
    for r in history {
        let elapsed = if with_elapsed {
            format!("{:.3}", r.elapsed_s)
        } else {
            "-".to_string()
        };
        let _ = writeln!(out, "{},{},{},{elapsed}", r.epoch, r.train_mae, r.val_mae);
    }
    out
}
