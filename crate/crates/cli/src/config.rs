//! `section.key = value` run configuration with command-line overrides.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use mcsttm::model::{Ablation, ModelConfig};
use mcsttm::train::TrainConfig;
use mcsttm::Error;
use sha2::{Digest, Sha256};

/// Every tunable of a run. File paths are command-line arguments and are
/// not part of the configuration hash.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ablation: Ablation,
    pub normalize: bool,
    /// Gaussian kernel width; 0 selects the std of the edge distances.
    pub sigma: f64,
    pub kappa: f64,
    pub eval_split: String,
    pub noise_std: f64,
    pub noise_seed: u64,
    pub with_ha: bool,
    pub op_tol: f64,
    pub model_tol: f64,
    /// Keys assigned explicitly by a file or an override.
    pub explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::new(1),
            train: TrainConfig::default(),
            ablation: Ablation::full(),
            normalize: true,
            sigma: 0.0,
            kappa: 0.1,
            eval_split: "test".into(),
            noise_std: 0.0,
            noise_seed: 0,
            with_ha: false,
            op_tol: 1e-4,
            model_tol: 1e-3,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Error>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = '{value}': {e}")))
}

/// Generates `set` and `entries` from one key table so the two cannot drift.
macro_rules! schema {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        pub const KEYS: &[&str] = &[$($key),*];

        impl RunConfig {
            fn assign(&mut self, key: &str, value: &str) -> Result<(), Error> {
                match key {
                    $($key => self.$($field).+ = parse(key, value)?,)*
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown key '{key}' (known keys: {})",
                            KEYS.join(", ")
                        )))
                    }
                }
                Ok(())
            }

            /// Resolved `(key, value)` pairs in key order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                let mut v = vec![$(($key, self.$($field).+.to_string())),*];
                v.sort();
                v
            }
        }
    };
}

schema! {
    "data.normalize" => normalize,
    "graph.sigma" => sigma,
    "graph.kappa" => kappa,
    "model.hour_len" => model.hour_len,
    "model.day_len" => model.day_len,
    "model.horizon" => model.horizon,
    "model.slices_per_day" => model.slices_per_day,
    "model.feat_dim" => model.feat_dim,
    "model.blocks" => model.blocks,
    "model.heads" => model.heads,
    "model.adaptive_rank" => model.adaptive_rank,
    "model.ff_width" => model.ff_width,
    "train.lr" => train.lr,
    "train.batch_size" => train.batch_size,
    "train.max_epochs" => train.max_epochs,
    "train.patience" => train.patience,
    "train.min_delta" => train.min_delta,
    "train.seed" => train.seed,
    "train.mape_epsilon" => train.mape_epsilon,
    "train.train_stride" => train.train_stride,
    "train.val_stride" => train.val_stride,
    "train.eval_batch_size" => train.eval_batch_size,
    "ablation.no_adaptive" => ablation.no_adaptive,
    "ablation.no_fixed_graph" => ablation.no_fixed_graph,
    "ablation.no_s_block" => ablation.no_s_block,
    "ablation.no_t_block" => ablation.no_t_block,
    "ablation.no_multi_channel" => ablation.no_multi_channel,
    "eval.split" => eval_split,
    "eval.noise_std" => noise_std,
    "eval.noise_seed" => noise_seed,
    "eval.with_ha" => with_ha,
    "gradcheck.op_tol" => op_tol,
    "gradcheck.model_tol" => model_tol,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        self.assign(key, value)?;
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), Error> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{pair}' is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    /// Reads `section.key = value` lines; `#` starts a comment.
    pub fn load_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'section.key = value'", i + 1))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(format!("line {}: '{k}' assigned twice", i + 1));
            }
            self.set(k, v.trim()).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.train.validate()?;
        self.ablation.validate()?;
        if !matches!(self.eval_split.as_str(), "test" | "val") {
            return Err(Error::Config(format!("eval.split must be 'test' or 'val', got '{}'", self.eval_split)));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::Config(format!("eval.noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config(format!("graph.sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// The canonical text whose hash identifies this configuration.
    pub fn canonical(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Comment line placed at the top of every artifact.
    pub fn header(&self, command: &str) -> String {
        format!(
            "# config_hash={} variant={} command={command}\n",
            self.hash(),
            self.ablation.variant_name()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nmodel.feat_dim = 16  # trailing\n\ntrain.lr=0.01\n").unwrap();
        c.set_pair("train.lr=0.5").unwrap();
        assert_eq!(c.model.feat_dim, 16);
        assert_eq!(c.train.lr, 0.5);
        assert!(c.explicit.contains("model.feat_dim"));
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("model.bogus = 1").unwrap_err().contains("unknown key"));
        assert!(c.apply_text("model.feat_dim").is_err());
        assert!(c.apply_text("model.feat_dim = x").is_err());
        assert!(c.apply_text("train.lr = 1\ntrain.lr = 2").unwrap_err().contains("twice"));
        assert!(c.set_pair("noequals").is_err());
    }

    #[test]
    fn hash_tracks_values_not_formatting() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.apply_text("train.lr = 0.0010").unwrap();
        b.apply_text("train.lr=1e-3").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("train.seed", "9").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn every_key_round_trips_through_entries() {
        let c = RunConfig::default();
        let mut d = RunConfig::default();
        for (k, v) in c.entries() {
            d.set(k, &v).unwrap();
        }
        assert_eq!(c.canonical(), d.canonical());
        assert_eq!(c.entries().len(), KEYS.len());
    }
}
