use crate::data::windows::valid_anchors;
use crate::data::SeriesTable;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Chronological train/validation/test anchors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAnchors {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Anchors dropped because their target reaches into the next split's
    /// hour window.
    pub purged: Vec<usize>,
}

/// Nominal split sizes for `n` anchors and integer ratios, before purging.
/// Rounding remainders go to the last split.
pub fn nominal_counts(n: usize, ratios: [usize; 3]) -> [usize; 3] {
    let total: usize = ratios.iter().sum();
    let a = n * ratios[0] / total;
    let b = n * ratios[1] / total;
    [a, b, n - a - b]
}

/// Splits the valid anchors of `table` chronologically by `ratios`
/// (6:2:2 by default in callers).
///
/// Anchors whose target `[t+1, t+q]` reaches the first hour-window row of
/// the following split are removed, so no target value of one split is an
/// input of another.
pub fn split_train_val_test(table: &SeriesTable, cfg: &ModelConfig, ratios: [usize; 3]) -> Result<SplitAnchors> {
    if ratios.contains(&0) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    let anchors = valid_anchors(table, cfg);
    let [a, b, _] = nominal_counts(anchors.len(), ratios);
    let mut train = anchors[..a].to_vec();
    let mut val = anchors[a..a + b].to_vec();
    let test = anchors[a + b..].to_vec();
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "{} rows give {} valid anchors, too few for a three-way split",
            table.rows(),
            anchors.len()
        )));
    }

    let mut purged = Vec::new();
    let mut purge = |split: &mut Vec<usize>, next_first: usize| {
        let first_input = next_first + 1 - cfg.hour_len;
        let keep = split.partition_point(|&t| t + cfg.horizon < first_input);
        purged.extend(split.drain(keep..));
    };
    purge(&mut train, val[0]);
    purge(&mut val, test[0]);
    purged.sort_unstable();

    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(format!(
            "{} valid anchors leave an empty split after removing boundary windows",
            anchors.len()
        )));
    }
    Ok(SplitAnchors {
        train,
        val,
        test,
        purged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_ratios() {
        assert_eq!(nominal_counts(100, [6, 2, 2]), [60, 20, 20]);
        assert_eq!(nominal_counts(10, [6, 2, 2]), [6, 2, 2]);
    }

    #[test]
    fn boundary_windows_removed() {
        let cfg = ModelConfig {
            hour_len: 2,
            day_len: 1,
            horizon: 2,
            slices_per_day: 4,
            ..ModelConfig::new(1)
        };
        // anchors 4..=103 -> 100 anchors
        let table = SeriesTable::from_fn(106, 1, 4, |r, _| r as f64).unwrap();
        let s = split_train_val_test(&table, &cfg, [6, 2, 2]).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len() + s.purged.len(), 100);
        // q + p - 1 anchors lost at each of the two boundaries
        assert_eq!(s.train.len(), 60 - 3);
        assert_eq!(s.val.len(), 20 - 3);
        assert_eq!(s.test.len(), 20);
        assert!(s.train.last().unwrap() + 2 < s.val[0] - 1);
    }

    #[test]
    fn too_short_table_is_config_error() {
        let cfg = ModelConfig {
            hour_len: 2,
            day_len: 1,
            horizon: 2,
            slices_per_day: 4,
            ..ModelConfig::new(1)
        };
        let table = SeriesTable::from_fn(9, 1, 4, |r, _| r as f64).unwrap();
        assert!(matches!(split_train_val_test(&table, &cfg, [6, 2, 2]), Err(Error::Config(_))));
    }
}
