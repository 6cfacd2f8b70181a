//! Message-passing encoder with a feature stream and a parallel position
//! stream. Each block maps `concat(x, aggregate(x))` through a ReLU layer and
//! re-attaches the block-0 input as a skip connection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::numerics::{ParamBinder, ParamId, ParamStore, Tensor, Var};

/// How neighbor rows are pooled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Degree-normalized mean; isolated nodes aggregate to zero.
    #[default]
    Mean,
    /// Plain neighbor sum.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub d_f: usize,
    pub k: usize,
    pub d_hidden: usize,
    pub layers: usize,
}

impl EncoderDims {
    /// Width of the feature-stream output.
    pub fn d_h(&self) -> usize {
        self.d_hidden + self.d_f
    }

    /// Width of the position-stream output.
    pub fn d_p(&self) -> usize {
        self.d_hidden + self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub w_f: ParamId,
    pub b_f: ParamId,
    pub w_p: ParamId,
    pub b_p: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: EncoderDims,
    pub aggregation: Aggregation,
    pub blocks: Vec<EncoderBlock>,
}

/// Per-node embeddings: `h` is `n x d_h`, `p` is `n x d_p`.
#[derive(Debug, Clone, Copy)]
pub struct NodeEmbeddings<'t> {
    pub h: Var<'t>,
    pub p: Var<'t>,
}

impl<'t> NodeEmbeddings<'t> {
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    /// `concat(h, p)` along columns.
    pub fn joined(&self) -> Result<Var<'t>> {
        Ok(self.h.tape().concat(&[self.h, self.p], 1)?)
    }
}

/// The `n x n` pooling operator applied to node rows.
pub fn aggregation_matrix(g: &Graph, kind: Aggregation) -> Tensor {
    let n = g.n();
    let mut m = Tensor::zeros(n, n);
    for i in 0..n {
        let w = match kind {
            Aggregation::Mean if g.degree(i) > 0 => 1.0 / g.degree(i) as f64,
            Aggregation::Mean => continue,
            Aggregation::Sum => 1.0,
        };
        for &j in g.neighbors(i) {
            m.set(i, j, w);
        }
    }
    m
}

impl EncoderParams {
    /// Glorot weights and zero biases, registered under `prefix`.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        dims: EncoderDims,
        aggregation: Aggregation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dims.layers == 0 {
            return Err(Error::Width { what: "encoder layers", expected: 1, got: 0 });
        }
        let mut blocks = Vec::with_capacity(dims.layers);
        let (mut in_f, mut in_p) = (dims.d_f, dims.k);
        for l in 0..dims.layers {
            blocks.push(EncoderBlock {
                w_f: store.add_glorot(format!("{prefix}.block{l}.w_f"), 2 * in_f, dims.d_hidden, rng),
                b_f: store.add_zeros(format!("{prefix}.block{l}.b_f"), 1, dims.d_hidden),
                w_p: store.add_glorot(format!("{prefix}.block{l}.w_p"), 2 * in_p, dims.d_hidden, rng),
                b_p: store.add_zeros(format!("{prefix}.block{l}.b_p"), 1, dims.d_hidden),
            });
            in_f = dims.d_h();
            in_p = dims.d_p();
        }
        Ok(EncoderParams { dims, aggregation, blocks })
    }

    pub fn encode<'t>(&self, b: &ParamBinder<'t, '_>, g: &Graph, pos: &Tensor) -> Result<NodeEmbeddings<'t>> {
        if g.attribute_dim() != self.dims.d_f {
            return Err(Error::Width { what: "encoder attributes", expected: self.dims.d_f, got: g.attribute_dim() });
        }
        if pos.cols() != self.dims.k {
            return Err(Error::Width { what: "encoder positions", expected: self.dims.k, got: pos.cols() });
        }
        if pos.rows() != g.n() {
            return Err(Error::Rows { what: "encoder positions", left: pos.rows(), right: g.n() });
        }
        let tape = b.tape();
        let agg = tape.constant(aggregation_matrix(g, self.aggregation));
        let f0 = tape.constant(g.attributes().clone());
        let p0 = tape.constant(pos.clone());
        let (mut h, mut p) = (f0, p0);
        for block in &self.blocks {
            h = propagate(b, agg, h, block.w_f, block.b_f, f0)?;
            p = propagate(b, agg, p, block.w_p, block.b_p, p0)?;
        }
        Ok(NodeEmbeddings { h, p })
    }
}

fn propagate<'t>(
    b: &ParamBinder<'t, '_>,
    agg: Var<'t>,
    x: Var<'t>,
    w: ParamId,
    bias: ParamId,
    skip: Var<'t>,
) -> Result<Var<'t>> {
    let tape = b.tape();
    let pooled = agg.matmul(x)?;
    let z = tape.concat(&[x, pooled], 1)?.matmul(b.var(w))?.add_row(b.var(bias))?.relu();
    Ok(tape.concat(&[z, skip], 1)?)
}
