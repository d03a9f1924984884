use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mcsttm::data::{
    load_edges_csv, load_series_csv, make_channels, split_train_val_test, valid_anchors, write_edges_csv,
    write_series_csv, zscore, Direction, SeriesTable,
};
use mcsttm::diagnostics::{gradient_suite, SuiteOptions};
use mcsttm::graph::{build_fixed_adjacency, KernelParams, RoadGraph};
use mcsttm::model::{load_checkpoint, save_checkpoint, Checkpoint, ModelConfig, StModel};
use mcsttm::train::{evaluate, report_csv, history_csv, train, Dataset, EvalOptions, HistoricalAverage};
use mcsttm::{Error, Result, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SERIES_FILE: &str = "series.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const VAL_REPORT_FILE: &str = "val_report.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const HA_REPORT_FILE: &str = "ha_report.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// Dataset facts written next to an ingested bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub nodes: usize,
    pub slices: usize,
    pub edges: usize,
    pub slices_per_day: usize,
    pub start_index: usize,
    pub mean: f64,
    pub std: f64,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_bundle(dir: &Path, slices_per_day: usize) -> Result<(SeriesTable, RoadGraph)> {
    let table = load_series_csv(dir.join(SERIES_FILE), slices_per_day)?;
    let edges = load_edges_csv(dir.join(EDGES_FILE), table.node_ids())?;
    Ok((table, edges.graph))
}

fn kernel(cfg: &RunConfig, graph: &RoadGraph) -> KernelParams {
    let mut k = KernelParams::default_for(graph);
    if cfg.sigma > 0.0 {
        k.sigma = cfg.sigma;
    }
    k.kappa = cfg.kappa;
    k
}

pub fn ingest(cfg: &RunConfig, series: &Path, edges: &Path, out: &Path) -> Result<Summary> {
    let s = cfg.model.slices_per_day;
    let table = load_series_csv(series, s)?;
    let loaded = load_edges_csv(edges, table.node_ids())?;
    // Fail here rather than at training time if the graph cannot be turned
    // into an adjacency.
    build_fixed_adjacency(&loaded.graph, kernel(cfg, &loaded.graph))?;
    let n = table.values().len() as f64;
    let mean = table.values().iter().sum::<f64>() / n;
    let summary = Summary {
        nodes: table.nodes(),
        slices: table.rows(),
        edges: loaded.graph.edges().len(),
        slices_per_day: s,
        start_index: table.start_index,
        mean,
        std: table.std(),
    };
    create_dir(out)?;
    let header = cfg.header("ingest");
    write_series_csv(&table, out.join(SERIES_FILE), &header)?;
    write_edges_csv(&loaded.graph, out.join(EDGES_FILE), &header)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Input(e.to_string()))?;
    write(&out.join(SUMMARY_FILE), &(json + "\n"))?;
    log::info!(
        "ingested {} nodes x {} slices, {} edges into {}",
        summary.nodes,
        summary.slices,
        summary.edges,
        out.display()
    );
    Ok(summary)
}

fn model_config(cfg: &RunConfig, nodes: usize) -> ModelConfig {
    ModelConfig {
        nodes,
        ..cfg.model.clone()
    }
}

pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub best_val_mae: f64,
}

pub fn train_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<TrainArtifacts> {
    let (table, graph) = load_bundle(data, cfg.model.slices_per_day)?;
    let mcfg = model_config(cfg, table.nodes());
    let adjacency = build_fixed_adjacency(&graph, kernel(cfg, &graph))?;
    let ds = Dataset::prepare(table, &mcfg, cfg.normalize)?;
    log::info!(
        "split: {} train / {} val / {} test anchors ({} dropped at boundaries)",
        ds.split.train.len(),
        ds.split.val.len(),
        ds.split.test.len(),
        ds.split.purged.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let model = StModel::new(mcfg, cfg.ablation, adjacency, &mut rng)?;
    log::info!("variant {}: {} parameters", cfg.ablation.variant_name(), model.params.scalar_count());
    let outcome = train(model, &ds, &cfg.train)?;

    create_dir(out)?;
    let header = cfg.header("train");
    let meta: BTreeMap<String, String> = [
        ("config_hash", cfg.hash()),
        ("variant", cfg.ablation.variant_name()),
        ("seed", cfg.train.seed.to_string()),
        ("best_epoch", outcome.best_epoch.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let checkpoint = out.join(CHECKPOINT_FILE);
    save_checkpoint(
        &Checkpoint {
            model: outcome.model.clone(),
            norm: ds.norm,
            meta,
        },
        &checkpoint,
    )?;
    let history = out.join(HISTORY_FILE);
    write(&history, &history_csv(&header, &outcome.history, false))?;
    let opts = eval_options(cfg, None);
    let mut val = evaluate(&outcome.model, &ds, &ds.split.val, &opts)?;
    val.tag = "val".into();
    write(&out.join(VAL_REPORT_FILE), &report_csv(&header, &val, None))?;
    log::info!(
        "best epoch {} with validation MAE {:.4}; wrote {}",
        outcome.best_epoch,
        outcome.best_val_mae,
        out.display()
    );
    Ok(TrainArtifacts {
        checkpoint,
        history,
        best_val_mae: outcome.best_val_mae,
    })
}

fn eval_options(cfg: &RunConfig, noise: Option<(f64, u64)>) -> EvalOptions {
    EvalOptions {
        mape_epsilon: cfg.train.mape_epsilon,
        batch_size: cfg.train.eval_batch_size,
        noise,
    }
}

/// Loads a checkpoint and checks it against the explicitly configured
/// model keys and the data it is about to see.
fn compatible_checkpoint(cfg: &RunConfig, path: &Path, nodes: Option<usize>) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    let stored = &ckpt.model.config;
    let asked = model_config(cfg, stored.nodes);
    for (key, have, want) in [
        ("model.hour_len", stored.hour_len, asked.hour_len),
        ("model.day_len", stored.day_len, asked.day_len),
        ("model.horizon", stored.horizon, asked.horizon),
        ("model.slices_per_day", stored.slices_per_day, asked.slices_per_day),
        ("model.feat_dim", stored.feat_dim, asked.feat_dim),
        ("model.blocks", stored.blocks, asked.blocks),
        ("model.heads", stored.heads, asked.heads),
        ("model.adaptive_rank", stored.adaptive_rank, asked.adaptive_rank),
        ("model.ff_width", stored.ff_width, asked.ff_width),
    ] {
        if cfg.explicit.contains(key) && have != want {
            return Err(Error::Checkpoint(format!(
                "{key} is {want} in the config but {have} in {}",
                path.display()
            )));
        }
    }
    if let Some(m) = nodes {
        if m != stored.nodes {
            return Err(Error::Checkpoint(format!(
                "data has {m} nodes but {} was trained on {}",
                path.display(),
                stored.nodes
            )));
        }
    }
    Ok(ckpt)
}

fn load_for_checkpoint(cfg: &RunConfig, ckpt_path: &Path, data: &Path) -> Result<(Checkpoint, SeriesTable)> {
    let peek = load_checkpoint(ckpt_path)?;
    let table = load_series_csv(data.join(SERIES_FILE), peek.model.config.slices_per_day)?;
    let ckpt = compatible_checkpoint(cfg, ckpt_path, Some(table.nodes()))?;
    Ok((ckpt, table))
}

pub fn adjacency_csv(header: &str, ids: &[String], a: &Tensor) -> String {
    let m = ids.len();
    let mut out = String::from(header);
    out.push_str("node");
    for id in ids {
        let _ = write!(out, ",node_{id}");
    }
    out.push('\n');
    for (i, row) in a.data().chunks(m).enumerate() {
        out.push_str(&ids[i]);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn eval_cmd(
    cfg: &RunConfig,
    checkpoint: &Path,
    data: &Path,
    out: &Path,
    export_adjacency: Option<&Path>,
) -> Result<PathBuf> {
    let (ckpt, table) = load_for_checkpoint(cfg, checkpoint, data)?;
    let mcfg = ckpt.model.config.clone();
    let split = split_train_val_test(&table, &mcfg, [6, 2, 2])?;
    let ds = Dataset::with_norm(table, &mcfg, split, ckpt.norm)?;
    let anchors = if cfg.eval_split == "val" { &ds.split.val } else { &ds.split.test };
    // The header records the variant stored in the checkpoint.
    let mut hcfg = cfg.clone();
    hcfg.ablation = ckpt.model.ablation;
    let header = hcfg.header("eval");

    let mut clean = evaluate(&ckpt.model, &ds, anchors, &eval_options(cfg, None))?;
    clean.tag = cfg.eval_split.clone();
    let noisy = if cfg.explicit.contains("eval.noise_std") {
        let mut r = evaluate(&ckpt.model, &ds, anchors, &eval_options(cfg, Some((cfg.noise_std, cfg.noise_seed))))?;
        r.tag = format!("{} noise_std={}", cfg.eval_split, cfg.noise_std);
        Some(r)
    } else {
        None
    };
    create_dir(out)?;
    let report = out.join(REPORT_FILE);
    write(&report, &report_csv(&header, &clean, noisy.as_ref()))?;
    if cfg.with_ha {
        let ha = HistoricalAverage::uniform(mcfg.hour_len)?;
        let r = evaluate(&ha, &ds, anchors, &eval_options(cfg, None))?;
        write(&out.join(HA_REPORT_FILE), &report_csv(&header, &r, None))?;
    }
    if let Some(path) = export_adjacency {
        let a = ckpt.model.adaptive_adjacency()?;
        write(path, &adjacency_csv(&header, ds.raw.node_ids(), &a))?;
    }
    log::info!(
        "{} anchors: avg MAE {:.4}, RMSE {:.4}",
        anchors.len(),
        clean.average.mae,
        clean.average.rmse
    );
    Ok(report)
}

/// Forecasts the `q` slices following the end of the series.
pub fn predict_cmd(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &Path) -> Result<PathBuf> {
    let (ckpt, table) = load_for_checkpoint(cfg, checkpoint, data)?;
    let mcfg = &ckpt.model.config;
    let q = mcfg.horizon;
    let normalized = zscore(&table, ckpt.norm, Direction::Normalize)?;
    // Targets are not needed; pad q placeholder rows so the last observed
    // slice can serve as the anchor.
    let mut padded = normalized.values().to_vec();
    padded.extend(std::iter::repeat_n(0.0, q * table.nodes()));
    let padded = SeriesTable::new(
        padded,
        table.rows() + q,
        table.node_ids().to_vec(),
        table.start_index,
        table.slices_per_day,
    )?;
    let anchor = table.rows() - 1;
    if !valid_anchors(&padded, mcfg).contains(&anchor) {
        return Err(Error::Input(format!(
            "{} slices are too few for a forecast with p={}, d={}, s={}",
            table.rows(),
            mcfg.hour_len,
            mcfg.day_len,
            mcfg.slices_per_day
        )));
    }
    let pred = ckpt.model.predict(&make_channels(&padded, &[anchor], mcfg)?)?;
    let mut hcfg = cfg.clone();
    hcfg.ablation = ckpt.model.ablation;
    let mut csv = hcfg.header("predict");
    csv.push_str("node,step,slice_index,value\n");
    for (n, id) in table.node_ids().iter().enumerate() {
        for k in 0..q {
            let v = ckpt.norm.apply(pred.at(&[0, n, k, 0]), Direction::Denormalize);
            let _ = writeln!(csv, "{id},{},{},{v}", k + 1, table.slice_index(anchor) + k + 1);
        }
    }
    create_dir(out)?;
    let path = out.join(PREDICTIONS_FILE);
    write(&path, &csv)?;
    Ok(path)
}

/// Runs the gradient suite and prints one line per check. Returns whether
/// every check passed.
pub fn gradcheck_cmd(cfg: &RunConfig, corrupt_backward: bool) -> Result<bool> {
    let suite = gradient_suite(SuiteOptions {
        op_tol: cfg.op_tol,
        model_tol: cfg.model_tol,
        corrupt_backward,
    })?;
    print!("{}", cfg.header("gradcheck"));
    let mut ok = true;
    for entry in &suite {
        let status = if entry.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<22} max_rel_err={:.3e}", entry.name, entry.report.max_rel_error());
        for input in entry.report.inputs.iter().filter(|i| !i.passed) {
            println!("     {} max_rel_err={:.3e}", input.name, input.max_rel_error);
        }
        ok &= entry.passed();
    }
    println!("{} of {} checks passed", suite.iter().filter(|e| e.passed()).count(), suite.len());
    Ok(ok)
}
