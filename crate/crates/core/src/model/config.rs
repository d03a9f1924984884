use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of nodes `M`.
    pub nodes: usize,
    /// Hour-channel length `p`.
    pub hour_len: usize,
    /// Day-channel length `d` (days of history).
    pub day_len: usize,
    /// Forecast horizon `q`.
    pub horizon: usize,
    /// Slices per day `s`.
    pub slices_per_day: usize,
    /// Expanded feature width `f_d`.
    pub feat_dim: usize,
    /// Number of stacked spatial-temporal blocks `K`.
    pub blocks: usize,
    pub heads: usize,
    /// Rank `r` of the adaptive adjacency factors.
    pub adaptive_rank: usize,
    /// Hidden width `f_h` of the temporal feed-forward.
    pub ff_width: usize,
}

impl ModelConfig {
    /// Defaults for a graph of `nodes` nodes at 5-minute resolution.
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            hour_len: 12,
            day_len: 7,
            horizon: 12,
            slices_per_day: 288,
            feat_dim: 64,
            blocks: 2,
            heads: 4,
            adaptive_rank: 10,
            ff_width: 256,
        }
    }

    /// Width of the intermediate prediction layer, `f_d / 2` (at least 1).
    pub fn mid_width(&self) -> usize {
        (self.feat_dim / 2).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("nodes", self.nodes),
            ("hour_len", self.hour_len),
            ("day_len", self.day_len),
            ("horizon", self.horizon),
            ("slices_per_day", self.slices_per_day),
            ("feat_dim", self.feat_dim),
            ("blocks", self.blocks),
            ("heads", self.heads),
            ("adaptive_rank", self.adaptive_rank),
            ("ff_width", self.ff_width),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        if !self.feat_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "model.feat_dim ({}) must be divisible by model.heads ({})",
                self.feat_dim, self.heads
            )));
        }
        Ok(())
    }
}

/// Components removed from the full model for ablation studies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub no_adaptive: bool,
    pub no_fixed_graph: bool,
    pub no_s_block: bool,
    pub no_t_block: bool,
    pub no_multi_channel: bool,
}

impl Ablation {
    pub const NAMES: [&'static str; 5] = [
        "no_adaptive",
        "no_fixed_graph",
        "no_s_block",
        "no_t_block",
        "no_multi_channel",
    ];

    pub fn full() -> Self {
        Self::default()
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut a = Self::default();
        for name in names {
            a.set(name.as_ref())?;
        }
        a.validate()?;
        Ok(a)
    }

    pub fn set(&mut self, name: &str) -> Result<()> {
        match name {
            "no_adaptive" => self.no_adaptive = true,
            "no_fixed_graph" => self.no_fixed_graph = true,
            "no_s_block" => self.no_s_block = true,
            "no_t_block" => self.no_t_block = true,
            "no_multi_channel" => self.no_multi_channel = true,
            "full" | "" => {}
            other => return Err(Error::Config(format!("unknown ablation '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.no_s_block && self.no_t_block {
            return Err(Error::Config(
                "no_s_block and no_t_block together leave no spatial-temporal block".into(),
            ));
        }
        Ok(())
    }

    fn flags(&self) -> [bool; 5] {
        [
            self.no_adaptive,
            self.no_fixed_graph,
            self.no_s_block,
            self.no_t_block,
            self.no_multi_channel,
        ]
    }

    /// `full`, or the active flag names joined with `+`.
    pub fn variant_name(&self) -> String {
        let active: Vec<&str> = Self::NAMES
            .iter()
            .zip(self.flags())
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect();
        if active.is_empty() {
            "full".to_string()
        } else {
            active.join("+")
        }
    }
}
