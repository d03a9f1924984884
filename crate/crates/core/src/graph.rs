//! Road graphs and the adjacency matrices derived from them.
//!
//! Two kinds of adjacency feed the spatial block: a fixed pair built from
//! physical distances in forward and reverse edge orientation, and an
//! adaptive matrix `softmax(relu(E_c · E_r))` learned from node embeddings.

use rand::Rng;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadGraph {
    node_ids: Vec<String>,
    edges: Vec<Edge>,
}

impl RoadGraph {
    pub fn new(node_ids: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if node_ids.is_empty() {
            return Err(Error::Input("road graph needs at least one node".into()));
        }
        let m = node_ids.len();
        for e in &edges {
            if e.from >= m || e.to >= m {
                return Err(Error::Input(format!(
                    "edge {}->{} references a node outside 0..{m}",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::Input(format!("self-loop edge on node {}", e.from)));
            }
            if !(e.distance >= 0.0 && e.distance.is_finite()) {
                return Err(Error::Input(format!(
                    "edge {}->{} has invalid distance {}",
                    e.from, e.to, e.distance
                )));
            }
        }
        Ok(Self { node_ids, edges })
    }

    /// Graph with nodes named `0..m` and the given edges.
    pub fn with_indices(m: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::new((0..m).map(|i| i.to_string()).collect(), edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn reversed(&self) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                from: e.to,
                to: e.from,
                distance: e.distance,
            })
            .collect();
        Self {
            node_ids: self.node_ids.clone(),
            edges,
        }
    }

    /// Population standard deviation of the edge distances, the default
    /// Gaussian kernel width. Falls back to 1 when undefined or zero.
    pub fn distance_std(&self) -> f64 {
        let n = self.edges.len();
        if n == 0 {
            return 1.0;
        }
        let mean = self.edges.iter().map(|e| e.distance).sum::<f64>() / n as f64;
        let var = self
            .edges
            .iter()
            .map(|e| (e.distance - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        if std > 0.0 {
            std
        } else {
            1.0
        }
    }
}

/// Row-stochastic forward/backward adjacency built from distances.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyPair {
    pub fwd: Tensor,
    pub bwd: Tensor,
}

impl AdjacencyPair {
    pub fn identity(m: usize) -> Self {
        Self {
            fwd: Tensor::eye(m),
            bwd: Tensor::eye(m),
        }
    }

    pub fn node_count(&self) -> usize {
        self.fwd.shape()[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub sigma: f64,
    pub kappa: f64,
}

impl KernelParams {
    /// Kernel width from the graph's distance spread, threshold 0.1.
    pub fn default_for(graph: &RoadGraph) -> Self {
        Self {
            sigma: graph.distance_std(),
            kappa: 0.1,
        }
    }
}

/// Gaussian kernel weight `exp(-d²/σ²)`, zeroed below `kappa`.
pub fn edge_weight(distance: f64, kernel: KernelParams) -> f64 {
    let w = (-(distance * distance) / (kernel.sigma * kernel.sigma)).exp();
    if w < kernel.kappa {
        0.0
    } else {
        w
    }
}

fn normalized_with_self_loops(m: usize, edges: &[Edge], kernel: KernelParams) -> Tensor {
    let mut w = Tensor::eye(m);
    for e in edges {
        // a repeated (from, to) pair keeps the last weight seen
        w.set(&[e.from, e.to], edge_weight(e.distance, kernel));
    }
    let data = w.data_mut();
    for row in data.chunks_mut(m) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    w
}

/// Builds the fixed adjacency pair: `fwd` from edges as given and `bwd`
/// from reversed edges, each with self-loops added and rows normalized.
pub fn build_fixed_adjacency(graph: &RoadGraph, kernel: KernelParams) -> Result<AdjacencyPair> {
    if !(kernel.sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {}", kernel.sigma)));
    }
    if !(0.0..1.0).contains(&kernel.kappa) {
        return Err(Error::Config(format!("kappa must lie in [0, 1), got {}", kernel.kappa)));
    }
    let m = graph.node_count();
    Ok(AdjacencyPair {
        fwd: normalized_with_self_loops(m, graph.edges(), kernel),
        bwd: normalized_with_self_loops(m, graph.reversed().edges(), kernel),
    })
}

/// Learnable factors of the adaptive adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveEmbeddings {
    /// `[M, r]`
    pub e_c: Tensor,
    /// `[r, M]`
    pub e_r: Tensor,
}

impl AdaptiveEmbeddings {
    /// Uniform in `[-1/√r, 1/√r]`.
    pub fn init<R: Rng + ?Sized>(m: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if rank == 0 || m == 0 {
            return Err(Error::Config("adaptive rank and node count must be positive".into()));
        }
        let bound = 1.0 / (rank as f64).sqrt();
        Ok(Self {
            e_c: Tensor::uniform(&[m, rank], -bound, bound, rng),
            e_r: Tensor::uniform(&[rank, m], -bound, bound, rng),
        })
    }

    /// Evaluates the adaptive adjacency without recording gradients.
    pub fn adjacency(&self) -> Result<Tensor> {
        let tape = Tape::new();
        let a = adaptive_adjacency(tape.constant(self.e_c.clone()), tape.constant(self.e_r.clone()))?;
        Ok(a.value())
    }
}

/// `softmax(relu(e_c · e_r))` with the softmax taken along rows.
pub fn adaptive_adjacency<'t>(e_c: Var<'t>, e_r: Var<'t>) -> Result<Var<'t>> {
    let (sc, sr) = (e_c.shape(), e_r.shape());
    if sc.len() != 2 || sr.len() != 2 || sc[1] != sr[0] || sc[0] != sr[1] {
        return Err(Error::dim("adaptive_adjacency", &sc, &sr));
    }
    Ok(e_c.matmul(e_r)?.relu().softmax_lastdim())
}
