//! Gradient-check suite over every differentiable operation and a tiny
//! full model.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{grad_check_with, Activation, temporal_conv, GradCheckConfig, GradCheckReport, Tape, Var};
use crate::data::{make_channels, SeriesTable};
use crate::error::Result;
use crate::graph::{adaptive_adjacency, AdjacencyPair};
use crate::model::{
    gated_fusion, init_params, model_forward, param_specs, prediction_head, Ablation, ChannelInputs, ModelConfig,
    ModelVars,
};
use crate::spatial::{spatial_forward, GraphSupports, SpatialParams};
use crate::temporal::{attention_scores, position_encode, qkv_project, temporal_forward, AttentionParams, PositionCodebook};
use crate::tensor::Tensor;
use crate::train::mae_loss;

/// Result of checking one operation.
#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub name: String,
    pub report: GradCheckReport,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Tolerances and the corrupted-backward hook for [`gradient_suite`].
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub op_tol: f64,
    pub model_tol: f64,
    #[doc(hidden)]
    pub corrupt_backward: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            op_tol: 1e-4,
            model_tol: 1e-3,
            corrupt_backward: false,
        }
    }
}

/// The tiny model used for the full-model check.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        nodes: 3,
        hour_len: 4,
        day_len: 2,
        horizon: 2,
        slices_per_day: 4,
        feat_dim: 4,
        blocks: 1,
        heads: 2,
        adaptive_rank: 2,
        ff_width: 6,
    }
}

struct Suite {
    rng: ChaCha8Rng,
    opts: SuiteOptions,
    entries: Vec<SuiteEntry>,
}

impl Suite {
    fn rand(&mut self, shape: &[usize]) -> Tensor {
        Tensor::uniform(shape, -1.0, 1.0, &mut self.rng)
    }

    fn named(&mut self, shapes: &[(&str, &[usize])]) -> Vec<(String, Tensor)> {
        shapes.iter().map(|(n, s)| (n.to_string(), self.rand(s))).collect()
    }

    fn check<F>(&mut self, name: &str, tol: f64, inputs: Vec<(String, Tensor)>, f: F) -> Result<()>
    where
        F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
    {
        let cfg = GradCheckConfig::with_tol(tol);
        let report = grad_check_with(f, &inputs, cfg, self.opts.corrupt_backward)?;
        self.entries.push(SuiteEntry {
            name: name.to_string(),
            report,
        });
        Ok(())
    }

    /// Checks `f`, reduced to a scalar by a fixed random weighting of its output.
    fn check_weighted<F>(&mut self, name: &str, out_shape: &[usize], inputs: Vec<(String, Tensor)>, f: F) -> Result<()>
    where
        F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
    {
        let w = self.rand(out_shape);
        let tol = self.opts.op_tol;
        self.check(name, tol, inputs, move |tape, v| {
            Ok(f(tape, v)?.mul(tape.constant(w.clone()))?.sum())
        })
    }
}

fn attn<'t>(v: &[Var<'t>]) -> AttentionParams<'t> {
    AttentionParams {
        w_q: v[1],
        w_k: v[2],
        w_v: v[3],
        ff_w0: v[4],
        ff_w1: v[5],
        ff_w2: v[6],
        heads: 2,
    }
}

/// Runs every check and returns one entry per operation.
pub fn gradient_suite(opts: SuiteOptions) -> Result<Vec<SuiteEntry>> {
    let mut s = Suite {
        rng: ChaCha8Rng::seed_from_u64(0x6C4A),
        opts,
        entries: Vec::new(),
    };

    let i = s.named(&[("a", &[2, 3, 4]), ("b", &[3, 4])]);
    s.check_weighted("add", &[2, 3, 4], i, |_, v| v[0].add(v[1]))?;
    let i = s.named(&[("a", &[2, 3, 4]), ("b", &[1, 4])]);
    s.check_weighted("sub", &[2, 3, 4], i, |_, v| v[0].sub(v[1]))?;
    let i = s.named(&[("a", &[2, 3, 4]), ("b", &[2, 1, 4])]);
    s.check_weighted("mul", &[2, 3, 4], i, |_, v| v[0].mul(v[1]))?;
    let i = s.named(&[("a", &[3, 2])]);
    s.check_weighted("scale_add_scalar", &[3, 2], i, |_, v| Ok(v[0].scale(-1.7).add_scalar(0.3)))?;
    let i = s.named(&[("a", &[2, 3, 4]), ("b", &[4, 5])]);
    s.check_weighted("matmul", &[2, 3, 5], i, |_, v| v[0].matmul(v[1]))?;
    let i = s.named(&[("a", &[2, 1, 3, 4]), ("b", &[3, 4, 2])]);
    s.check_weighted("matmul_batched", &[2, 3, 3, 2], i, |_, v| v[0].matmul(v[1]))?;
    for (name, act) in [
        ("relu", Activation::Relu),
        ("sigmoid", Activation::Sigmoid),
        ("tanh", Activation::Tanh),
    ] {
        let i = s.named(&[("x", &[4, 5])]);
        s.check_weighted(name, &[4, 5], i, move |_, v| Ok(v[0].activation(act)))?;
    }
    let i = s.named(&[("x", &[4, 5])]);
    s.check_weighted("abs", &[4, 5], i, |_, v| Ok(v[0].abs()))?;
    let i = s.named(&[("x", &[3, 5])]);
    s.check_weighted("softmax", &[3, 5], i, |_, v| Ok(v[0].softmax_lastdim()))?;
    let i = s.named(&[("x", &[2, 3, 4])]);
    s.check_weighted("reshape_permute", &[4, 2, 3], i, |_, v| v[0].reshape(&[6, 4])?.reshape(&[2, 3, 4])?.permute(&[2, 0, 1]))?;
    let i = s.named(&[("x", &[5, 3])]);
    s.check_weighted("gather_rows", &[4, 3], i, |_, v| v[0].gather_rows(&[4, 0, 4, 2]))?;
    let i = s.named(&[("x", &[3, 4])]);
    s.check("sum_mean", s.opts.op_tol, i, |_, v| v[0].sum().add(v[0].mean().scale(3.0)))?;
    let i = s.named(&[("x", &[2, 3, 4, 2]), ("k", &[8, 6])]);
    s.check_weighted("temporal_conv", &[2, 3, 2, 3], i, |_, v| temporal_conv(v[0], v[1], 2, 3))?;
    let i = s.named(&[("pred", &[2, 3]), ("target", &[2, 3])]);
    s.check("mae_loss", s.opts.op_tol, i, |_, v| mae_loss(v[0], v[1]))?;

    let i = s.named(&[("e_c", &[4, 3]), ("e_r", &[3, 4])]);
    s.check_weighted("adaptive_adjacency", &[4, 4], i, |_, v| adaptive_adjacency(v[0], v[1]))?;

    let i = s.named(&[
        ("x", &[2, 3, 2, 4]),
        ("a_adp", &[3, 3]),
        ("a_fwd", &[3, 3]),
        ("a_bwd", &[3, 3]),
        ("w0", &[4, 4]),
        ("w1", &[4, 4]),
        ("w2", &[4, 4]),
    ]);
    s.check_weighted("spatial_forward", &[2, 3, 2, 4], i, |_, v| {
        let supports = GraphSupports {
            adaptive: Some(v[1]),
            fwd: Some(v[2]),
            bwd: Some(v[3]),
        };
        spatial_forward(v[0], supports, SpatialParams { w0: v[4], w1: v[5], w2: v[6] })
    })?;

    let i = s.named(&[("x", &[2, 3, 3, 4]), ("tod", &[5, 4]), ("dow", &[7, 4])]);
    s.check_weighted("position_encode", &[2, 3, 3, 4], i, |_, v| {
        position_encode(v[0], &[3, 4, 5, 31, 32, 33], PositionCodebook { tod: v[1], dow: v[2] })
    })?;

    let attn_inputs = |s: &mut Suite| {
        s.named(&[
            ("x", &[2, 3, 4]),
            ("wq", &[4, 4]),
            ("wk", &[4, 4]),
            ("wv", &[4, 4]),
            ("ff_w0", &[4, 5]),
            ("ff_w1", &[5, 5]),
            ("ff_w2", &[5, 4]),
        ])
    };
    let i = attn_inputs(&mut s);
    s.check_weighted("attention_scores", &[2, 2, 3, 3], i, |_, v| {
        let (q, k, _) = qkv_project(v[0], &attn(v))?;
        attention_scores(q, k, 4)
    })?;
    let i = attn_inputs(&mut s);
    s.check_weighted("temporal_forward", &[2, 3, 4], i, |_, v| temporal_forward(v[0], &attn(v)))?;

    let i = s.named(&[("x_hour", &[3, 4, 4]), ("x_day", &[3, 4, 4]), ("f1", &[4, 1]), ("f2", &[4, 1])]);
    s.check_weighted("gated_fusion", &[3, 4, 4], i, |_, v| Ok(gated_fusion(v[0], v[1], v[2], v[3])?.fused))?;
    let i = s.named(&[("fused", &[3, 4, 4]), ("conv_a", &[16, 4]), ("conv_b", &[4, 2])]);
    s.check_weighted("prediction_head", &[3, 2, 1], i, |_, v| prediction_head(v[0], v[1], v[2], 2, 2))?;

    full_model(&mut s)?;
    Ok(s.entries)
}

fn full_model(s: &mut Suite) -> Result<()> {
    let cfg = tiny_model_config();
    let params = init_params(&cfg, &mut s.rng)?;
    let table = SeriesTable::from_fn(30, cfg.nodes, cfg.slices_per_day, |_, _| 0.0)?;
    let vals = (0..table.values().len()).map(|_| s.rand(&[1]).item()).collect();
    let table = table.with_values(vals)?;
    let batch = make_channels(&table, &[8, 17], &cfg)?;
    let adjacency = AdjacencyPair {
        fwd: s.rand(&[3, 3]),
        bwd: s.rand(&[3, 3]),
    };
    let names: Vec<String> = param_specs(&cfg).into_iter().map(|p| p.name).collect();
    let inputs: Vec<(String, Tensor)> = names
        .iter()
        .map(|n| Ok((n.clone(), params.get(n)?.clone())))
        .collect::<Result<_>>()?;
    let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let w = s.rand(&[2, cfg.nodes, cfg.horizon, 1]);
    let tol = s.opts.model_tol;
    s.check("full_model", tol, inputs, move |tape, v| {
        let fixed = (tape.constant(adjacency.fwd.clone()), tape.constant(adjacency.bwd.clone()));
        let vars = ModelVars::resolve(&cfg, fixed, |n| Ok(v[index[n]]))?;
        let inputs = ChannelInputs {
            x_hour: tape.constant(batch.x_hour.clone()),
            x_day: tape.constant(batch.x_day.clone()),
            hour_time_index: &batch.hour_time_index,
            day_time_index: &batch.day_time_index,
        };
        let out = model_forward(inputs, &vars, &cfg, Ablation::full())?;
        Ok(out.prediction.mul(tape.constant(w.clone()))?.sum())
    })
}
