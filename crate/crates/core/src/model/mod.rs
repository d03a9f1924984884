//! Model assembly: per-channel stacks of spatial-temporal blocks, gated
//! fusion of the hour and day channels, and the two-stage prediction head.

pub mod checkpoint;
mod config;
mod params;

use rand::Rng;

use crate::autograd::{temporal_conv, Tape, Var};
use crate::data::ChannelBatch;
use crate::error::{Error, Result};
use crate::graph::{adaptive_adjacency, AdjacencyPair};
use crate::spatial::{spatial_forward, GraphSupports, SpatialParams};
use crate::temporal::{position_encode, temporal_forward, AttentionParams, PositionCodebook, DAYS_PER_WEEK};
use crate::tensor::Tensor;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{Ablation, ModelConfig};
pub use params::{BoundParams, ParamStore};

/// The two input channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Hour,
    Day,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Hour, Channel::Day];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Hour => "hour",
            Channel::Day => "day",
        }
    }

    /// Input length of the channel: `p` or `d`.
    pub fn len(self, cfg: &ModelConfig) -> usize {
        match self {
            Channel::Hour => cfg.hour_len,
            Channel::Day => cfg.day_len,
        }
    }
}

/// Name, shape and init bound of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub bound: f64,
}

fn spec(name: String, shape: &[usize], fan_in: usize) -> ParamSpec {
    ParamSpec {
        name,
        shape: shape.to_vec(),
        bound: 1.0 / (fan_in as f64).sqrt(),
    }
}

/// Every learnable array of a model with configuration `cfg`, in init order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (m, r, f, fh) = (cfg.nodes, cfg.adaptive_rank, cfg.feat_dim, cfg.ff_width);
    let (p, q, fm) = (cfg.hour_len, cfg.horizon, cfg.mid_width());
    let mut v = vec![
        spec("adaptive.e_c".into(), &[m, r], r),
        spec("adaptive.e_r".into(), &[r, m], r),
    ];
    for ch in Channel::ALL {
        let (c, t) = (ch.name(), ch.len(cfg));
        v.push(spec(format!("{c}.expand"), &[1, f], 1));
        v.push(spec(format!("{c}.pos.tod"), &[cfg.slices_per_day, f], f));
        v.push(spec(format!("{c}.pos.dow"), &[DAYS_PER_WEEK, f], f));
        for k in 0..cfg.blocks {
            for w in ["w0", "w1", "w2"] {
                v.push(spec(format!("{c}.block{k}.spatial.{w}"), &[f, f], f));
            }
            for w in ["wq", "wk", "wv"] {
                v.push(spec(format!("{c}.block{k}.attn.{w}"), &[f, f], f));
            }
            v.push(spec(format!("{c}.block{k}.ff.w0"), &[f, fh], f));
            v.push(spec(format!("{c}.block{k}.ff.w1"), &[fh, fh], fh));
            v.push(spec(format!("{c}.block{k}.ff.w2"), &[fh, f], fh));
        }
        v.push(spec(format!("{c}.out_conv"), &[t * f, t * f], t * f));
        v.push(spec(format!("{c}.align"), &[t * f, p * f], t * f));
    }
    v.push(spec("gate.f1".into(), &[f, 1], f));
    v.push(spec("gate.f2".into(), &[f, 1], f));
    v.push(spec("head.conv_a".into(), &[p * f, q * fm], p * f));
    v.push(spec("head.conv_b".into(), &[q * fm, q], q * fm));
    v
}

/// Uniform `±1/√fan_in` initialization of every parameter.
pub fn init_params<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    for s in param_specs(cfg) {
        store.insert(s.name, Tensor::uniform(&s.shape, -s.bound, s.bound, rng));
    }
    Ok(store)
}

/// Parameters of one spatial-temporal block.
#[derive(Clone, Copy, Debug)]
pub struct BlockVars<'t> {
    pub spatial: SpatialParams<'t>,
    pub attention: AttentionParams<'t>,
}

/// Parameters of one channel pipeline.
#[derive(Clone, Debug)]
pub struct ChannelVars<'t> {
    /// `[1, f_d]`
    pub expand: Var<'t>,
    pub codebook: PositionCodebook<'t>,
    pub blocks: Vec<BlockVars<'t>>,
    /// `[T·f_d, T·f_d]`
    pub out_conv: Var<'t>,
    /// `[T·f_d, p·f_d]`
    pub align: Var<'t>,
}

/// Every array the forward pass reads, recorded on one tape.
#[derive(Clone, Debug)]
pub struct ModelVars<'t> {
    pub e_c: Var<'t>,
    pub e_r: Var<'t>,
    pub fixed_fwd: Var<'t>,
    pub fixed_bwd: Var<'t>,
    pub hour: ChannelVars<'t>,
    pub day: ChannelVars<'t>,
    pub f1: Var<'t>,
    pub f2: Var<'t>,
    pub conv_a: Var<'t>,
    pub conv_b: Var<'t>,
}

impl<'t> ModelVars<'t> {
    /// Assembles the variables by name through `lookup`.
    pub fn resolve(
        cfg: &ModelConfig,
        fixed: (Var<'t>, Var<'t>),
        mut lookup: impl FnMut(&str) -> Result<Var<'t>>,
    ) -> Result<Self> {
        let mut channel = |c: &str| -> Result<ChannelVars<'t>> {
            let mut blocks = Vec::with_capacity(cfg.blocks);
            for k in 0..cfg.blocks {
                let mut g = |n: &str| lookup(&format!("{c}.block{k}.{n}"));
                blocks.push(BlockVars {
                    spatial: SpatialParams {
                        w0: g("spatial.w0")?,
                        w1: g("spatial.w1")?,
                        w2: g("spatial.w2")?,
                    },
                    attention: AttentionParams {
                        w_q: g("attn.wq")?,
                        w_k: g("attn.wk")?,
                        w_v: g("attn.wv")?,
                        ff_w0: g("ff.w0")?,
                        ff_w1: g("ff.w1")?,
                        ff_w2: g("ff.w2")?,
                        heads: cfg.heads,
                    },
                });
            }
            Ok(ChannelVars {
                expand: lookup(&format!("{c}.expand"))?,
                codebook: PositionCodebook {
                    tod: lookup(&format!("{c}.pos.tod"))?,
                    dow: lookup(&format!("{c}.pos.dow"))?,
                },
                blocks,
                out_conv: lookup(&format!("{c}.out_conv"))?,
                align: lookup(&format!("{c}.align"))?,
            })
        };
        let hour = channel("hour")?;
        let day = channel("day")?;
        Ok(Self {
            e_c: lookup("adaptive.e_c")?,
            e_r: lookup("adaptive.e_r")?,
            fixed_fwd: fixed.0,
            fixed_bwd: fixed.1,
            hour,
            day,
            f1: lookup("gate.f1")?,
            f2: lookup("gate.f2")?,
            conv_a: lookup("head.conv_a")?,
            conv_b: lookup("head.conv_b")?,
        })
    }
}

/// Spatial block, then position encoding, then temporal block.
/// Ablated stages are skipped; the encoding is always applied.
pub fn st_block_forward<'t>(
    x: Var<'t>,
    time_index: &[usize],
    supports: GraphSupports<'t>,
    codebook: PositionCodebook<'t>,
    block: &BlockVars<'t>,
    ablation: Ablation,
) -> Result<Var<'t>> {
    let s = if ablation.no_s_block {
        x
    } else {
        spatial_forward(x, supports, block.spatial)?
    };
    let e = position_encode(s, time_index, codebook)?;
    if ablation.no_t_block {
        Ok(e)
    } else {
        temporal_forward(e, &block.attention)
    }
}

/// Expands `x: [.., M, T, 1]` to `f_d` features, runs the residual block
/// stack, and maps the time axis to `out_len` steps.
pub fn channel_pipeline<'t>(
    x: Var<'t>,
    time_index: &[usize],
    ch: &ChannelVars<'t>,
    supports: GraphSupports<'t>,
    ablation: Ablation,
    out_len: usize,
) -> Result<Var<'t>> {
    let xs = x.shape();
    if xs.len() < 3 || xs[xs.len() - 1] != 1 {
        return Err(Error::dim("channel_pipeline", &xs, &ch.expand.shape()));
    }
    let mut r = x.matmul(ch.expand)?;
    for block in &ch.blocks {
        let out = st_block_forward(r, time_index, supports, ch.codebook, block, ablation)?;
        r = r.add(out)?;
    }
    let rs = r.shape();
    let (t, f) = (rs[rs.len() - 2], rs[rs.len() - 1]);
    let o = temporal_conv(r, ch.out_conv, t, f)?;
    temporal_conv(o, ch.align, out_len, f)
}

/// Gate values and the fused representation.
#[derive(Clone, Copy, Debug)]
pub struct GateOutput<'t> {
    /// `[.., M, p, 1]`, broadcast over features.
    pub gate: Var<'t>,
    /// `[.., M, p, f_d]`
    pub fused: Var<'t>,
}

/// `g = sigmoid(x_hour·f1 + x_day·f2)`, `fused = g·x_hour + (1 − g)·x_day`.
pub fn gated_fusion<'t>(x_hour: Var<'t>, x_day: Var<'t>, f1: Var<'t>, f2: Var<'t>) -> Result<GateOutput<'t>> {
    let (hs, ds) = (x_hour.shape(), x_day.shape());
    if hs != ds {
        return Err(Error::dim("gated_fusion", &hs, &ds));
    }
    let gate = x_hour.matmul(f1)?.add(x_day.matmul(f2)?)?.sigmoid();
    // x_day + g·(x_hour − x_day), exact when both channels agree
    let fused = x_day.add(gate.mul(x_hour.sub(x_day)?)?)?;
    Ok(GateOutput { gate, fused })
}

/// Two chained time convolutions: `(p, f_d) → (q, f_mid) → (q, 1)`.
pub fn prediction_head<'t>(
    fused: Var<'t>,
    conv_a: Var<'t>,
    conv_b: Var<'t>,
    horizon: usize,
    mid_width: usize,
) -> Result<Var<'t>> {
    let h = temporal_conv(fused, conv_a, horizon, mid_width)?;
    temporal_conv(h, conv_b, horizon, 1)
}

/// Forecast and gate of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput<'t> {
    /// `[.., M, q, 1]`
    pub prediction: Var<'t>,
    pub gate: Var<'t>,
}

/// Hour and day channel inputs with their absolute time indices.
#[derive(Clone, Copy, Debug)]
pub struct ChannelInputs<'a, 't> {
    pub x_hour: Var<'t>,
    pub x_day: Var<'t>,
    pub hour_time_index: &'a [usize],
    pub day_time_index: &'a [usize],
}

/// Both channel pipelines, gated fusion and the prediction head.
pub fn model_forward<'t>(
    inputs: ChannelInputs<'_, 't>,
    vars: &ModelVars<'t>,
    cfg: &ModelConfig,
    ablation: Ablation,
) -> Result<ForwardOutput<'t>> {
    let supports = GraphSupports {
        adaptive: if ablation.no_adaptive {
            None
        } else {
            Some(adaptive_adjacency(vars.e_c, vars.e_r)?)
        },
        fwd: (!ablation.no_fixed_graph).then_some(vars.fixed_fwd),
        bwd: (!ablation.no_fixed_graph).then_some(vars.fixed_bwd),
    };
    let p = cfg.hour_len;
    let hour = channel_pipeline(inputs.x_hour, inputs.hour_time_index, &vars.hour, supports, ablation, p)?;
    let day = if ablation.no_multi_channel {
        hour
    } else {
        channel_pipeline(inputs.x_day, inputs.day_time_index, &vars.day, supports, ablation, p)?
    };
    let g = gated_fusion(hour, day, vars.f1, vars.f2)?;
    let prediction = prediction_head(g.fused, vars.conv_a, vars.conv_b, cfg.horizon, cfg.mid_width())?;
    Ok(ForwardOutput {
        prediction,
        gate: g.gate,
    })
}

/// A configured model with its fixed graph and learned parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct StModel {
    pub config: ModelConfig,
    pub ablation: Ablation,
    pub adjacency: AdjacencyPair,
    pub params: ParamStore,
}

impl StModel {
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        ablation: Ablation,
        adjacency: AdjacencyPair,
        rng: &mut R,
    ) -> Result<Self> {
        let params = init_params(&config, rng)?;
        Self::from_parts(config, ablation, adjacency, params)
    }

    /// Checks that `params` and `adjacency` match `config`.
    pub fn from_parts(
        config: ModelConfig,
        ablation: Ablation,
        adjacency: AdjacencyPair,
        params: ParamStore,
    ) -> Result<Self> {
        config.validate()?;
        ablation.validate()?;
        let m = config.nodes;
        if adjacency.fwd.shape() != [m, m] || adjacency.bwd.shape() != [m, m] {
            return Err(Error::Checkpoint(format!(
                "fixed adjacency is {:?}, config expects {m} nodes",
                adjacency.fwd.shape()
            )));
        }
        let specs = param_specs(&config);
        if specs.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "config expects {} parameter arrays, found {}",
                specs.len(),
                params.len()
            )));
        }
        for s in &specs {
            let t = params.get(&s.name)?;
            if t.shape() != s.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter '{}' has shape {:?}, config expects {:?}",
                    s.name,
                    t.shape(),
                    s.shape
                )));
            }
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        Ok(Self {
            config,
            ablation,
            adjacency,
            params,
        })
    }

    /// Resolves model variables from parameters already bound on a tape.
    pub fn vars<'t>(&self, tape: &'t Tape, bound: &BoundParams<'t>) -> Result<ModelVars<'t>> {
        let fixed = (
            tape.constant(self.adjacency.fwd.clone()),
            tape.constant(self.adjacency.bwd.clone()),
        );
        ModelVars::resolve(&self.config, fixed, |n| bound.get(n))
    }

    /// Forward pass on `batch` with the given bound parameters.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        bound: &BoundParams<'t>,
        batch: &ChannelBatch,
    ) -> Result<ForwardOutput<'t>> {
        self.forward_inputs(tape, bound, &batch.x_hour, &batch.x_day, &batch.hour_time_index, &batch.day_time_index)
    }

    pub fn forward_inputs<'t>(
        &self,
        tape: &'t Tape,
        bound: &BoundParams<'t>,
        x_hour: &Tensor,
        x_day: &Tensor,
        hour_time_index: &[usize],
        day_time_index: &[usize],
    ) -> Result<ForwardOutput<'t>> {
        let vars = self.vars(tape, bound)?;
        let inputs = ChannelInputs {
            x_hour: tape.constant(x_hour.clone()),
            x_day: tape.constant(x_day.clone()),
            hour_time_index,
            day_time_index,
        };
        model_forward(inputs, &vars, &self.config, self.ablation)
    }

    /// Forecast `[B, M, q, 1]` with frozen parameters.
    pub fn predict(&self, batch: &ChannelBatch) -> Result<Tensor> {
        let tape = Tape::new();
        let bound = self.params.bind_frozen(&tape);
        Ok(self.forward(&tape, &bound, batch)?.prediction.value())
    }

    /// Gate values `[B, M, p, 1]` with frozen parameters.
    pub fn gate_values(&self, batch: &ChannelBatch) -> Result<Tensor> {
        let tape = Tape::new();
        let bound = self.params.bind_frozen(&tape);
        Ok(self.forward(&tape, &bound, batch)?.gate.value())
    }

    /// The learned `M × M` adaptive adjacency.
    pub fn adaptive_adjacency(&self) -> Result<Tensor> {
        let tape = Tape::new();
        let a = adaptive_adjacency(
            tape.constant(self.params.get("adaptive.e_c")?.clone()),
            tape.constant(self.params.get("adaptive.e_r")?.clone()),
        )?;
        Ok(a.value())
    }
}
