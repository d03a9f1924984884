use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::SeriesTable;
use crate::error::{Error, Result};

/// Adds seeded i.i.d. Gaussian noise `N(mean, std²)` to every cell.
pub fn inject_noise(table: &SeriesTable, mean: f64, std: f64, seed: u64) -> Result<SeriesTable> {
    if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
        return Err(Error::Config(format!("noise needs finite mean and std >= 0, got {mean}, {std}")));
    }
    if std == 0.0 && mean == 0.0 {
        return Ok(table.clone());
    }
    let normal = Normal::new(mean, std).map_err(|e| Error::Config(format!("noise std {std}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = table.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
    table.with_values(vals)
}
