//! Temporal transformer block: additive time-of-day/day-of-week encoding,
//! multi-head scaled dot-product attention over the time axis, and a
//! residual three-layer feed-forward output.

use crate::autograd::Var;
use crate::error::{Error, Result};

/// Days in the day-of-week table.
pub const DAYS_PER_WEEK: usize = 7;

/// Learned lookup tables added to features at each time step.
#[derive(Clone, Copy, Debug)]
pub struct PositionCodebook<'t> {
    /// `[s, f_d]`, one row per slice of the day.
    pub tod: Var<'t>,
    /// `[7, f_d]`, one row per weekday; slice 0 falls on row 0.
    pub dow: Var<'t>,
}

/// Table rows used for an absolute slice index.
pub fn codebook_rows(slice_index: usize, slices_per_day: usize) -> (usize, usize) {
    (
        slice_index % slices_per_day,
        (slice_index / slices_per_day) % DAYS_PER_WEEK,
    )
}

/// Adds `tod[idx mod s] + dow[(idx div s) mod 7]` to every node's features.
///
/// `x` is `[.., M, T, f_d]`. `time_index` holds the absolute slice indices of
/// the `T` steps for each leading batch element, flattened in batch order.
pub fn position_encode<'t>(x: Var<'t>, time_index: &[usize], codebook: PositionCodebook<'t>) -> Result<Var<'t>> {
    let xs = x.shape();
    let nd = xs.len();
    if nd < 3 {
        return Err(Error::dim("position_encode", &xs, &[time_index.len()]));
    }
    let (t, f) = (xs[nd - 2], xs[nd - 1]);
    let batch: usize = xs[..nd - 3].iter().product();
    if time_index.len() != batch * t {
        return Err(Error::dim("position_encode", &xs, &[time_index.len()]));
    }
    let tod_shape = codebook.tod.shape();
    let dow_shape = codebook.dow.shape();
    if tod_shape.len() != 2 || tod_shape[1] != f || dow_shape != [DAYS_PER_WEEK, f] {
        return Err(Error::dim("position_encode", &tod_shape, &dow_shape));
    }
    let s = tod_shape[0];
    let (tod_rows, dow_rows): (Vec<usize>, Vec<usize>) =
        time_index.iter().map(|&i| codebook_rows(i, s)).unzip();

    let mut enc_shape = xs[..nd - 3].to_vec();
    enc_shape.extend([1, t, f]);
    let enc = codebook
        .tod
        .gather_rows(&tod_rows)?
        .add(codebook.dow.gather_rows(&dow_rows)?)?
        .reshape(&enc_shape)?;
    x.add(enc)
}

/// Projection and feed-forward weights of one temporal block.
#[derive(Clone, Copy, Debug)]
pub struct AttentionParams<'t> {
    pub w_q: Var<'t>,
    pub w_k: Var<'t>,
    pub w_v: Var<'t>,
    /// `[f_d, f_h]`
    pub ff_w0: Var<'t>,
    /// `[f_h, f_h]`
    pub ff_w1: Var<'t>,
    /// `[f_h, f_d]`
    pub ff_w2: Var<'t>,
    pub heads: usize,
}

fn split_heads<'t>(x: Var<'t>, heads: usize) -> Result<Var<'t>> {
    let xs = x.shape();
    let nd = xs.len();
    let (t, f) = (xs[nd - 2], xs[nd - 1]);
    let mut split = xs[..nd - 2].to_vec();
    split.extend([t, heads, f / heads]);
    let mut perm: Vec<usize> = (0..split.len()).collect();
    perm.swap(nd - 2, nd - 1);
    x.reshape(&split)?.permute(&perm)
}

/// Inverse of the head split: `[.., h, T, d_h]` back to `[.., T, h·d_h]`.
pub fn merge_heads<'t>(x: Var<'t>) -> Result<Var<'t>> {
    let xs = x.shape();
    let nd = xs.len();
    let mut perm: Vec<usize> = (0..nd).collect();
    perm.swap(nd - 3, nd - 2);
    let mut merged = xs[..nd - 3].to_vec();
    merged.extend([xs[nd - 2], xs[nd - 3] * xs[nd - 1]]);
    x.permute(&perm)?.reshape(&merged)
}

/// Projects `x: [.., M, T, f_d]` to per-head `Q, K, V: [.., M, h, T, f_d/h]`.
pub fn qkv_project<'t>(x: Var<'t>, params: &AttentionParams<'t>) -> Result<(Var<'t>, Var<'t>, Var<'t>)> {
    let xs = x.shape();
    let f = *xs.last().unwrap_or(&0);
    if params.heads == 0 || f % params.heads != 0 {
        return Err(Error::Config(format!(
            "feature width {f} is not divisible by {} heads",
            params.heads
        )));
    }
    let q = split_heads(x.matmul(params.w_q)?, params.heads)?;
    let k = split_heads(x.matmul(params.w_k)?, params.heads)?;
    let v = split_heads(x.matmul(params.w_v)?, params.heads)?;
    Ok((q, k, v))
}

/// `softmax(Q Kᵀ / √f_d)` over the key-time axis. No causal mask.
pub fn attention_scores<'t>(q: Var<'t>, k: Var<'t>, feat_dim: usize) -> Result<Var<'t>> {
    let (qs, ks) = (q.shape(), k.shape());
    if qs != ks {
        return Err(Error::dim("attention_scores", &qs, &ks));
    }
    let logits = q.matmul(k.transpose_last2()?)?;
    Ok(logits.scale(1.0 / (feat_dim as f64).sqrt()).softmax_lastdim())
}

/// Output of the temporal block along with its attention scores.
pub struct TemporalOutput<'t> {
    pub output: Var<'t>,
    pub scores: Var<'t>,
}

/// `M = merge(S·V) + x́`, then `relu(relu(M W0) W1) W2 + M`.
pub fn temporal_forward<'t>(x: Var<'t>, params: &AttentionParams<'t>) -> Result<Var<'t>> {
    Ok(temporal_forward_with_scores(x, params)?.output)
}

pub fn temporal_forward_with_scores<'t>(x: Var<'t>, params: &AttentionParams<'t>) -> Result<TemporalOutput<'t>> {
    let xs = x.shape();
    if xs.len() < 3 {
        return Err(Error::dim("temporal_forward", &xs, &[]));
    }
    let f = xs[xs.len() - 1];
    let (q, k, v) = qkv_project(x, params)?;
    let scores = attention_scores(q, k, f)?;
    let attended = merge_heads(scores.matmul(v)?)?;
    let m = attended.add(x)?;
    let ff = m
        .matmul(params.ff_w0)?
        .relu()
        .matmul(params.ff_w1)?
        .relu()
        .matmul(params.ff_w2)?;
    Ok(TemporalOutput {
        output: ff.add(m)?,
        scores,
    })
}
