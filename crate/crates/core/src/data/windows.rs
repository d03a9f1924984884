use crate::data::SeriesTable;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::Tensor;

/// Hour/day input windows and targets for a set of anchors.
///
/// Anchors are row indices into the source table. Time indices are absolute
/// slice indices (row + `start_index`) flattened in batch order, which is
/// what the positional encoding consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelBatch {
    pub anchors: Vec<usize>,
    /// `[B, M, p, 1]`
    pub x_hour: Tensor,
    /// `[B, M, d, 1]`
    pub x_day: Tensor,
    /// `[B, M, q, 1]`
    pub y: Tensor,
    /// `B·p` entries
    pub hour_time_index: Vec<usize>,
    /// `B·d` entries
    pub day_time_index: Vec<usize>,
}

impl ChannelBatch {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Rows read by the hour window of anchor `t`: `t-p+1 ..= t`.
pub fn hour_rows(t: usize, p: usize) -> impl Iterator<Item = usize> {
    (t + 1 - p)..=t
}

/// Rows read by the day window of anchor `t`: `t-d·s, ..., t-s`.
pub fn day_rows(t: usize, d: usize, s: usize) -> impl Iterator<Item = usize> {
    (1..=d).rev().map(move |j| t - j * s)
}

/// Smallest and largest valid anchor row for a table of `rows` rows.
pub fn anchor_range(rows: usize, cfg: &ModelConfig) -> Option<(usize, usize)> {
    let lo = (cfg.hour_len - 1).max(cfg.day_len * cfg.slices_per_day);
    let hi = rows.checked_sub(cfg.horizon + 1)?;
    (lo <= hi).then_some((lo, hi))
}

/// Every anchor for which both windows and the target fit in the table.
pub fn valid_anchors(table: &SeriesTable, cfg: &ModelConfig) -> Vec<usize> {
    match anchor_range(table.rows(), cfg) {
        Some((lo, hi)) => (lo..=hi).collect(),
        None => Vec::new(),
    }
}

fn check_anchor(t: usize, rows: usize, cfg: &ModelConfig) -> Result<()> {
    let bad = |reason: String| Err(Error::Window { anchor: t, reason });
    if t + 1 < cfg.hour_len {
        return bad(format!("has fewer than p = {} slices of history", cfg.hour_len));
    }
    if t < cfg.day_len * cfg.slices_per_day {
        return bad(format!(
            "has fewer than d·s = {} slices of history",
            cfg.day_len * cfg.slices_per_day
        ));
    }
    if t + cfg.horizon >= rows {
        return bad(format!("target extends past the last row ({})", rows - 1));
    }
    Ok(())
}

/// Builds channel windows for `anchors`.
pub fn make_channels(table: &SeriesTable, anchors: &[usize], cfg: &ModelConfig) -> Result<ChannelBatch> {
    make_channels_from(table, table, anchors, cfg)
}

/// Like [`make_channels`] but reading inputs and targets from separate
/// tables of identical layout, as needed for noisy-input evaluation.
pub fn make_channels_from(
    inputs: &SeriesTable,
    targets: &SeriesTable,
    anchors: &[usize],
    cfg: &ModelConfig,
) -> Result<ChannelBatch> {
    if inputs.rows() != targets.rows() || inputs.nodes() != targets.nodes() {
        return Err(Error::dim(
            "make_channels",
            &[inputs.rows(), inputs.nodes()],
            &[targets.rows(), targets.nodes()],
        ));
    }
    if inputs.nodes() != cfg.nodes {
        return Err(Error::dim("make_channels", &[inputs.nodes()], &[cfg.nodes]));
    }
    if anchors.is_empty() {
        return Err(Error::Input("no anchors to build windows for".into()));
    }
    let (m, p, d, q, s) = (cfg.nodes, cfg.hour_len, cfg.day_len, cfg.horizon, cfg.slices_per_day);
    let b = anchors.len();
    let mut x_hour = vec![0.0; b * m * p];
    let mut x_day = vec![0.0; b * m * d];
    let mut y = vec![0.0; b * m * q];
    let mut hour_time_index = Vec::with_capacity(b * p);
    let mut day_time_index = Vec::with_capacity(b * d);

    for (bi, &t) in anchors.iter().enumerate() {
        check_anchor(t, inputs.rows(), cfg)?;
        for (k, r) in hour_rows(t, p).enumerate() {
            hour_time_index.push(inputs.slice_index(r));
            for (n, v) in inputs.row(r).iter().enumerate() {
                x_hour[(bi * m + n) * p + k] = *v;
            }
        }
        for (k, r) in day_rows(t, d, s).enumerate() {
            day_time_index.push(inputs.slice_index(r));
            for (n, v) in inputs.row(r).iter().enumerate() {
                x_day[(bi * m + n) * d + k] = *v;
            }
        }
        for k in 0..q {
            for (n, v) in targets.row(t + 1 + k).iter().enumerate() {
                y[(bi * m + n) * q + k] = *v;
            }
        }
    }
    Ok(ChannelBatch {
        anchors: anchors.to_vec(),
        x_hour: Tensor::new(&[b, m, p, 1], x_hour)?,
        x_day: Tensor::new(&[b, m, d, 1], x_day)?,
        y: Tensor::new(&[b, m, q, 1], y)?,
        hour_time_index,
        day_time_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, p: usize, d: usize, q: usize, s: usize) -> ModelConfig {
        ModelConfig {
            hour_len: p,
            day_len: d,
            horizon: q,
            slices_per_day: s,
            ..ModelConfig::new(m)
        }
    }

    #[test]
    fn week_anchor_indices() {
        let c = cfg(2, 12, 7, 12, 288);
        let table = SeriesTable::from_fn(2016 + 13, 2, 288, |r, n| (r * 10 + n) as f64).unwrap();
        let b = make_channels(&table, &[2016], &c).unwrap();
        assert_eq!(b.hour_time_index, (2005..=2016).collect::<Vec<_>>());
        assert_eq!(b.day_time_index, vec![0, 288, 576, 864, 1152, 1440, 1728]);
        assert_eq!(b.x_hour.at(&[0, 1, 0, 0]), 20051.0);
        assert_eq!(b.x_day.at(&[0, 0, 6, 0]), 17280.0);
        assert_eq!(b.y.at(&[0, 1, 11, 0]), 20281.0);
    }

    #[test]
    fn single_slice_windows() {
        let c = cfg(1, 1, 1, 1, 4);
        let table = SeriesTable::from_fn(10, 1, 4, |r, _| r as f64).unwrap();
        let b = make_channels(&table, &[5], &c).unwrap();
        assert_eq!(b.hour_time_index, vec![5]);
        assert_eq!(b.day_time_index, vec![1]);
        assert_eq!(b.y.data(), &[6.0]);
    }

    #[test]
    fn out_of_range_anchor_named() {
        let c = cfg(1, 2, 1, 2, 4);
        let table = SeriesTable::from_fn(10, 1, 4, |r, _| r as f64).unwrap();
        for bad in [3, 8, 9] {
            match make_channels(&table, &[bad], &c) {
                Err(Error::Window { anchor, .. }) => assert_eq!(anchor, bad),
                other => panic!("anchor {bad}: {other:?}"),
            }
        }
        assert_eq!(valid_anchors(&table, &c), vec![4, 5, 6, 7]);
    }

    #[test]
    fn time_index_is_absolute() {
        let c = cfg(1, 2, 1, 1, 4);
        let mut table = SeriesTable::from_fn(10, 1, 4, |r, _| r as f64).unwrap();
        table.start_index = 100;
        let b = make_channels(&table, &[4], &c).unwrap();
        assert_eq!(b.hour_time_index, vec![103, 104]);
        assert_eq!(b.day_time_index, vec![100]);
    }
}
