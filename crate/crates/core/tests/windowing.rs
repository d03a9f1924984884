mod common;

use common::windows_match_naive;
use mcsttm::data::{
    anchor_range, inject_noise, split_train_val_test, valid_anchors, zscore, Direction, NormStats, SeriesTable,
};
use mcsttm::model::ModelConfig;
use mcsttm::train::Dataset;

fn cfg(p: usize, d: usize, q: usize, s: usize, m: usize) -> ModelConfig {
    ModelConfig {
        nodes: m,
        hour_len: p,
        day_len: d,
        horizon: q,
        slices_per_day: s,
        ..ModelConfig::new(m)
    }
}

fn distinct_table(days: usize, s: usize, m: usize) -> SeriesTable {
    // Every cell distinct so any misplaced index shows up.
    SeriesTable::from_fn(days * s, m, s, |r, n| (r * m + n) as f64 + 0.25).unwrap()
}

#[test]
fn every_anchor_of_a_fifteen_day_table_matches_index_loops() {
    let table = distinct_table(15, 288, 3);
    let c = cfg(12, 7, 12, 288, 3);
    let checked = windows_match_naive(&table, &c).unwrap();
    assert_eq!(checked, 15 * 288 - 12 - 7 * 288);
    assert_eq!(anchor_range(table.rows(), &c), Some((7 * 288, 15 * 288 - 13)));
}

#[test]
fn small_shapes_match_index_loops() {
    for (p, d, q, s) in [(1, 1, 1, 4), (3, 2, 5, 6), (8, 1, 2, 3), (2, 4, 1, 5)] {
        let table = distinct_table(9, s, 2);
        windows_match_naive(&table, &cfg(p, d, q, s, 2)).unwrap();
    }
}

#[test]
fn absolute_start_index_shifts_time_indices_only() {
    let mut table = distinct_table(10, 12, 2);
    table.start_index = 5000;
    windows_match_naive(&table, &cfg(4, 3, 2, 12, 2)).unwrap();
}

#[test]
fn splits_are_disjoint_and_chronological_for_every_row_count() {
    let (p, d, q, s) = (3, 2, 4, 6);
    let c = cfg(p, d, q, s, 1);
    for rows in 40..200 {
        let table = SeriesTable::from_fn(rows, 1, s, |r, _| r as f64).unwrap();
        let Ok(split) = split_train_val_test(&table, &c, [6, 2, 2]) else { continue };
        let mut all: Vec<usize> = [&split.train, &split.val, &split.test, &split.purged].into_iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, valid_anchors(&table, &c), "rows {rows}");
        let parts = [&split.train, &split.val, &split.test];
        for w in parts.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(a.last() < b.first());
            // No target row of the earlier split is an hour-window input of the later one.
            let first_input = b[0] + 1 - p;
            assert!(a.iter().all(|&t| t + q < first_input), "rows {rows}");
        }
        // Targets of different splits never overlap.
        let targets = |v: &[usize]| v.iter().flat_map(|&t| t + 1..=t + q).collect::<std::collections::BTreeSet<_>>();
        assert!(targets(&split.train).is_disjoint(&targets(&split.val)));
        assert!(targets(&split.val).is_disjoint(&targets(&split.test)));
    }
}

#[test]
fn normalization_statistics_ignore_later_splits() {
    let s = 12;
    let c = cfg(4, 2, 3, s, 2);
    let drifting = SeriesTable::from_fn(30 * s, 2, s, |r, n| r as f64 * 0.5 + n as f64).unwrap();
    let split = split_train_val_test(&drifting, &c, [6, 2, 2]).unwrap();
    let stats = NormStats::from_training(&drifting, &split.train, c.horizon).unwrap();
    let cutoff = split.train.last().unwrap() + c.horizon + 1;
    let tampered = drifting
        .with_values(
            drifting
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| if i / 2 >= cutoff { v * 1e3 } else { v })
                .collect(),
        )
        .unwrap();
    assert_eq!(NormStats::from_training(&tampered, &split.train, c.horizon).unwrap(), stats);
    // The whole-table mean of a rising series is strictly larger.
    assert!(NormStats::from_rows(&drifting, drifting.rows()).unwrap().mean > stats.mean);

    let ds = Dataset::prepare(drifting.clone(), &c, true).unwrap();
    assert_eq!(ds.norm, stats);
    let back = zscore(&ds.normalized, stats, Direction::Denormalize).unwrap();
    for (a, b) in back.values().iter().zip(drifting.values()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn injected_noise_has_requested_moments() {
    let table = SeriesTable::from_fn(50_000, 2, 288, |_, _| 3.0).unwrap();
    let noisy = inject_noise(&table, 0.0, 0.01, 11).unwrap();
    let d: Vec<f64> = noisy.values().iter().map(|v| v - 3.0).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-3 * 0.5, "mean {mean}");
    assert!((std / 0.01 - 1.0).abs() < 0.02, "std {std}");
}
