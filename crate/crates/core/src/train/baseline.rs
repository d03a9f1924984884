use crate::data::ChannelBatch;
use crate::error::{Error, Result};
use crate::model::StModel;
use crate::tensor::Tensor;

/// Anything that maps a batch of channel windows to `[B, M, q, 1]` forecasts.
pub trait Forecaster {
    fn forecast(&self, batch: &ChannelBatch) -> Result<Tensor>;
}

impl Forecaster for StModel {
    fn forecast(&self, batch: &ChannelBatch) -> Result<Tensor> {
        self.predict(batch)
    }
}

/// Historical average: a weighted mean of the hour window, repeated for
/// every horizon step.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoricalAverage {
    weights: Vec<f64>,
}

impl HistoricalAverage {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("HA weights must be non-negative and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("HA weights must sum to 1, got {total}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(p: usize) -> Result<Self> {
        Self::new(vec![1.0 / p as f64; p])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// All weight on the most recent slice.
    pub fn persistence(p: usize) -> Result<Self> {
        let mut w = vec![0.0; p];
        *w.last_mut().ok_or_else(|| Error::Config("empty hour window".into()))? = 1.0;
        Self::new(w)
    }
}

impl Forecaster for HistoricalAverage {
    fn forecast(&self, batch: &ChannelBatch) -> Result<Tensor> {
        ha_baseline(batch, &self.weights)
    }
}

pub fn ha_baseline(batch: &ChannelBatch, weights: &[f64]) -> Result<Tensor> {
    HistoricalAverage::new(weights.to_vec())?;
    let xs = batch.x_hour.shape();
    let (b, m, p) = (xs[0], xs[1], xs[2]);
    if weights.len() != p {
        return Err(Error::Config(format!("HA needs {p} weights, got {}", weights.len())));
    }
    let q = batch.y.shape()[2];
    let mut out = Vec::with_capacity(b * m * q);
    for window in batch.x_hour.data().chunks(p) {
        // Offsets from the latest value keep constant windows exact.
        let last = window[p - 1];
        let avg = last + window.iter().zip(weights).map(|(x, w)| (x - last) * w).sum::<f64>();
        out.extend(std::iter::repeat_n(avg, q));
    }
    Tensor::new(&[b, m, q, 1], out)
}
