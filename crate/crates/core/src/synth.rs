//! Deterministic traffic-like series with daily and weekly structure.
//!
//! `value(n, t) = base_n + periodic_n(t) + coupling · mean_{j→n} periodic_j(t−1) + noise`
//! where `periodic_n(t) = amp_n · sin(2π (t mod s)/s + phase_n) · weekmod(day of week)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::SeriesTable;
use crate::error::{Error, Result};
use crate::graph::{Edge, RoadGraph};
use crate::temporal::DAYS_PER_WEEK;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub days: usize,
    pub slices_per_day: usize,
    pub base: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    /// Multiplier of the daily swing on days 5 and 6 of each week; 1 turns
    /// weekly modulation off.
    pub weekend_factor: f64,
    pub coupling: f64,
    /// Directed edges; node `n` is driven by the sources of its in-edges.
    pub edges: Vec<Edge>,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// A ring of `nodes` nodes with heterogeneous levels, swings and phases
    /// drawn from `seed`.
    pub fn ring(nodes: usize, days: usize, slices_per_day: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let base = (0..nodes).map(|_| rng.random_range(150.0..250.0)).collect();
        let amplitude = (0..nodes).map(|_| rng.random_range(50.0..120.0)).collect();
        let phase = (0..nodes).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let edges = if nodes > 1 {
            (0..nodes)
                .map(|n| Edge {
                    from: n,
                    to: (n + 1) % nodes,
                    distance: rng.random_range(0.5..2.0),
                })
                .filter(|e| e.from != e.to)
                .collect()
        } else {
            Vec::new()
        };
        Self {
            days,
            slices_per_day,
            base,
            amplitude,
            phase,
            weekend_factor: 0.6,
            coupling: 0.3,
            edges,
            noise_std: 5.0,
            seed,
        }
    }

    pub fn nodes(&self) -> usize {
        self.base.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.nodes();
        if m == 0 || self.days == 0 || self.slices_per_day == 0 {
            return Err(Error::Config("synthetic spec needs positive nodes, days and slices".into()));
        }
        if self.amplitude.len() != m || self.phase.len() != m {
            return Err(Error::Config("base, amplitude and phase must have one entry per node".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        RoadGraph::with_indices(m, self.edges.clone())?;
        Ok(())
    }

    fn weekmod(&self, t: i64) -> f64 {
        let day = t.div_euclid(self.slices_per_day as i64).rem_euclid(DAYS_PER_WEEK as i64);
        if day >= 5 {
            self.weekend_factor
        } else {
            1.0
        }
    }

    /// Daily-periodic part of node `n` at slice `t` (negative `t` wraps).
    pub fn periodic(&self, n: usize, t: i64) -> f64 {
        let s = self.slices_per_day as i64;
        let angle = 2.0 * PI * t.rem_euclid(s) as f64 / s as f64 + self.phase[n];
        self.amplitude[n] * angle.sin() * self.weekmod(t)
    }

    /// The series without noise.
    pub fn noiseless(&self, n: usize, t: i64, sources: &[Vec<usize>]) -> f64 {
        let drive = if sources[n].is_empty() {
            0.0
        } else {
            sources[n].iter().map(|&j| self.periodic(j, t - 1)).sum::<f64>() / sources[n].len() as f64
        };
        self.base[n] + self.periodic(n, t) + self.coupling * drive
    }

    /// In-neighbors of every node.
    pub fn sources(&self) -> Vec<Vec<usize>> {
        let mut src = vec![Vec::new(); self.nodes()];
        for e in &self.edges {
            src[e.to].push(e.from);
        }
        src
    }
}

/// Generates the series table and road graph described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<(SeriesTable, RoadGraph)> {
    spec.validate()?;
    let m = spec.nodes();
    let rows = spec.days * spec.slices_per_day;
    let sources = spec.sources();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut values = Vec::with_capacity(rows * m);
    for t in 0..rows {
        for n in 0..m {
            let mut v = spec.noiseless(n, t as i64, &sources);
            if spec.noise_std > 0.0 {
                v += noise.sample(&mut rng);
            }
            values.push(v);
        }
    }
    let ids: Vec<String> = (0..m).map(|i| i.to_string()).collect();
    let table = SeriesTable::new(values, rows, ids.clone(), 0, spec.slices_per_day)?;
    let graph = RoadGraph::new(ids, spec.edges.clone())?;
    Ok((table, graph))
}
