use serde::{Deserialize, Serialize};

use crate::data::SeriesTable;
use crate::error::{Error, Result};

/// Scalar z-score statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Normalize,
    Denormalize,
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats { mean: 0.0, std: 1.0 };

    /// Mean and population std over rows `0..rows` of `table`.
    pub fn from_rows(table: &SeriesTable, rows: usize) -> Result<Self> {
        if rows == 0 || rows > table.rows() {
            return Err(Error::Config(format!(
                "cannot compute statistics over {rows} of {} rows",
                table.rows()
            )));
        }
        let vals = &table.values()[..rows * table.nodes()];
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let stats = Self { mean, std };
        stats.validate()?;
        Ok(stats)
    }

    /// Statistics over every row touched by the training anchors: from the
    /// start of the table through the last training target.
    pub fn from_training(table: &SeriesTable, train_anchors: &[usize], horizon: usize) -> Result<Self> {
        let last = train_anchors
            .iter()
            .max()
            .ok_or_else(|| Error::Config("no training anchors".into()))?;
        Self::from_rows(table, (last + horizon + 1).min(table.rows()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0) || !self.std.is_finite() || !self.mean.is_finite() {
            return Err(Error::Config(format!(
                "normalization needs a positive finite std, got mean {} std {}",
                self.mean, self.std
            )));
        }
        Ok(())
    }

    pub fn apply(&self, v: f64, direction: Direction) -> f64 {
        match direction {
            Direction::Normalize => (v - self.mean) / self.std,
            Direction::Denormalize => v * self.std + self.mean,
        }
    }
}

pub fn zscore(table: &SeriesTable, stats: NormStats, direction: Direction) -> Result<SeriesTable> {
    stats.validate()?;
    table.map_values(|v| stats.apply(v, direction))
}
