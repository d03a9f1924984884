//! Graph convolution mixing one adaptive and two fixed directional
//! adjacencies: `Â X W0 + A_fwd X W1 + A_bwd X W2`, applied per time step.

use rand::Rng;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weight matrices for the three adjacency terms, each `[f_d, f_d]`.
#[derive(Clone, Copy, Debug)]
pub struct SpatialParams<'t> {
    pub w0: Var<'t>,
    pub w1: Var<'t>,
    pub w2: Var<'t>,
}

/// Adjacency operands of one spatial layer. A `None` term is dropped from
/// the sum, which is how the adaptive/fixed ablations are expressed.
#[derive(Clone, Copy, Debug)]
pub struct GraphSupports<'t> {
    pub adaptive: Option<Var<'t>>,
    pub fwd: Option<Var<'t>>,
    pub bwd: Option<Var<'t>>,
}

/// Uniform init in `[-1/√f_d, 1/√f_d]` for one `[f_d, f_d]` weight.
pub fn init_weight<R: Rng + ?Sized>(feat: usize, rng: &mut R) -> Tensor {
    let b = 1.0 / (feat as f64).sqrt();
    Tensor::uniform(&[feat, feat], -b, b, rng)
}

/// `A · X · W` for `x: [.., M, T, f]`, mixing nodes independently at each step.
fn graph_term<'t>(a: Var<'t>, x: Var<'t>, w: Var<'t>) -> Result<Var<'t>> {
    let xs = x.shape();
    let nd = xs.len();
    let (m, t, f) = (xs[nd - 3], xs[nd - 2], xs[nd - 1]);
    let a_shape = a.shape();
    if a_shape != [m, m] {
        return Err(Error::dim("spatial_forward", &xs, &a_shape));
    }
    let w_shape = w.shape();
    if w_shape != [f, f] {
        return Err(Error::dim("spatial_forward", &xs, &w_shape));
    }
    let mut flat = xs[..nd - 3].to_vec();
    flat.extend([m, t * f]);
    let mixed = a.matmul(x.reshape(&flat)?)?.reshape(&xs)?;
    mixed.matmul(w)
}

/// Spatial block forward pass. `x` is `[.., M, T, f_d]`; output has the same shape.
pub fn spatial_forward<'t>(x: Var<'t>, supports: GraphSupports<'t>, params: SpatialParams<'t>) -> Result<Var<'t>> {
    let xs = x.shape();
    if xs.len() < 3 {
        return Err(Error::dim("spatial_forward", &xs, &[]));
    }
    let terms = [
        (supports.adaptive, params.w0),
        (supports.fwd, params.w1),
        (supports.bwd, params.w2),
    ];
    let mut acc: Option<Var<'t>> = None;
    for (a, w) in terms {
        let Some(a) = a else { continue };
        let term = graph_term(a, x, w)?;
        acc = Some(match acc {
            Some(prev) => prev.add(term)?,
            None => term,
        });
    }
    Ok(acc.unwrap_or_else(|| x.scale(0.0)))
}

/// Two-layer GCN `relu(A · relu(A · X · W0) · W1)`, kept as a reference
/// operation for comparisons; the forecasting model does not use it.
pub fn gcn_two_layer_reference<'t>(x: Var<'t>, a: Var<'t>, w0: Var<'t>, w1: Var<'t>) -> Result<Var<'t>> {
    let (xs, as_) = (x.shape(), a.shape());
    if xs.len() != 2 || as_ != [xs[0], xs[0]] {
        return Err(Error::dim("gcn_two_layer_reference", &xs, &as_));
    }
    let h1 = a.matmul(x)?.matmul(w0)?.relu();
    Ok(a.matmul(h1)?.matmul(w1)?.relu())
}

/// Evaluates [`spatial_forward`] on plain tensors.
pub fn spatial_forward_values(
    x: &Tensor,
    adaptive: Option<&Tensor>,
    fwd: Option<&Tensor>,
    bwd: Option<&Tensor>,
    w: [&Tensor; 3],
) -> Result<Tensor> {
    let tape = Tape::new();
    let c = |t: &Tensor| tape.constant(t.clone());
    let supports = GraphSupports {
        adaptive: adaptive.map(c),
        fwd: fwd.map(c),
        bwd: bwd.map(c),
    };
    let params = SpatialParams {
        w0: c(w[0]),
        w1: c(w[1]),
        w2: c(w[2]),
    };
    Ok(spatial_forward(c(x), supports, params)?.value())
}
