//! Attention decoder: positions attend over features, then a bilinear link
//! score and an attribute MLP read out the graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::NodeEmbeddings;
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::numerics::{ParamBinder, ParamId, ParamStore, Tape, Tensor, Var};

/// Map from bilinear scores to edge probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFunction {
    /// Elementwise sigmoid.
    #[default]
    Sigmoid,
    /// Sigmoid followed by a softmax over each row.
    RowSoftmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderDims {
    pub d_h: usize,
    pub d_p: usize,
    pub d_f: usize,
    /// Attention blocks; 0 passes `H` straight through.
    pub blocks: usize,
    pub heads: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub mlp_hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    pub heads: Vec<AttentionHead>,
    pub w_o: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub dims: DecoderDims,
    pub link: LinkFunction,
    pub blocks: Vec<AttentionBlock>,
    pub s_bilinear: ParamId,
    pub mlp_w1: ParamId,
    pub mlp_b1: ParamId,
    pub mlp_w2: ParamId,
    pub mlp_b2: ParamId,
}

/// `a_pred` is `n x n`, `f_pred` is `n x d_f`.
#[derive(Debug, Clone, Copy)]
pub struct Decoded<'t> {
    pub a_pred: Var<'t>,
    pub f_pred: Var<'t>,
}

impl DecoderParams {
    pub fn init(store: &mut ParamStore, prefix: &str, dims: DecoderDims, link: LinkFunction, rng: &mut impl Rng) -> Self {
        let blocks = (0..dims.blocks)
            .map(|b| AttentionBlock {
                heads: (0..dims.heads)
                    .map(|h| AttentionHead {
                        w_q: store.add_glorot(format!("{prefix}.attn{b}.head{h}.w_q"), dims.d_p, dims.d_k, rng),
                        w_k: store.add_glorot(format!("{prefix}.attn{b}.head{h}.w_k"), dims.d_p, dims.d_k, rng),
                        w_v: store.add_glorot(format!("{prefix}.attn{b}.head{h}.w_v"), dims.d_h, dims.d_v, rng),
                    })
                    .collect(),
                w_o: store.add_glorot(format!("{prefix}.attn{b}.w_o"), dims.heads * dims.d_v, dims.d_h, rng),
            })
            .collect();
        let e = dims.d_h + dims.d_p;
        DecoderParams {
            dims,
            link,
            blocks,
            s_bilinear: store.add_glorot(format!("{prefix}.link.s"), e, e, rng),
            mlp_w1: store.add_glorot(format!("{prefix}.attr.w1"), e, dims.mlp_hidden, rng),
            mlp_b1: store.add_zeros(format!("{prefix}.attr.b1"), 1, dims.mlp_hidden),
            mlp_w2: store.add_glorot(format!("{prefix}.attr.w2"), dims.mlp_hidden, dims.d_f, rng),
            mlp_b2: store.add_zeros(format!("{prefix}.attr.b2"), 1, dims.d_f),
        }
    }

    pub fn decode<'t>(&self, b: &ParamBinder<'t, '_>, emb: &NodeEmbeddings<'t>) -> Result<Decoded<'t>> {
        if emb.h.cols() != self.dims.d_h {
            return Err(Error::Width { what: "decoder H", expected: self.dims.d_h, got: emb.h.cols() });
        }
        if emb.p.cols() != self.dims.d_p {
            return Err(Error::Width { what: "decoder P", expected: self.dims.d_p, got: emb.p.cols() });
        }
        let mut h = emb.h;
        for (i, block) in self.blocks.iter().enumerate() {
            h = attention_block(b, block, i, emb.p, h)?;
        }
        let e = b.tape().concat(&[h, emb.p], 1)?;
        Ok(Decoded {
            a_pred: predict_adjacency(e, b.var(self.s_bilinear), self.link)?,
            f_pred: predict_attributes(b, self, e)?,
        })
    }
}

/// Row-softmax attention weights of one head, `n x n`.
pub fn head_weights<'t>(b: &ParamBinder<'t, '_>, head: &AttentionHead, p: Var<'t>, block: usize) -> Result<Var<'t>> {
    let q = p.matmul(b.var(head.w_q))?;
    let k = p.matmul(b.var(head.w_k))?;
    let d_k = k.cols() as f64;
    let scores = q.matmul_t(k)?.scale(1.0 / d_k.sqrt());
    if scores.value_ref().has_non_finite() {
        return Err(Error::NonFiniteScores { block });
    }
    Ok(scores.row_softmax())
}

/// Multi-head attention with queries and keys from `p` and values from `h`.
pub fn attention_block<'t>(
    b: &ParamBinder<'t, '_>,
    block: &AttentionBlock,
    index: usize,
    p: Var<'t>,
    h: Var<'t>,
) -> Result<Var<'t>> {
    let heads = block
        .heads
        .iter()
        .map(|head| Ok(head_weights(b, head, p, index)?.matmul(h.matmul(b.var(head.w_v))?)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(b.tape().concat(&heads, 1)?.matmul(b.var(block.w_o))?)
}

/// Edge probabilities from the bilinear score `E S Eᵀ`.
pub fn predict_adjacency<'t>(e: Var<'t>, s: Var<'t>, link: LinkFunction) -> Result<Var<'t>> {
    let probs = e.matmul(s)?.matmul_t(e)?.sigmoid();
    Ok(match link {
        LinkFunction::Sigmoid => probs,
        LinkFunction::RowSoftmax => probs.row_softmax(),
    })
}

/// Two-layer ReLU MLP applied to each row of `e`.
pub fn predict_attributes<'t>(b: &ParamBinder<'t, '_>, dec: &DecoderParams, e: Var<'t>) -> Result<Var<'t>> {
    let hidden = e.matmul(b.var(dec.mlp_w1))?.add_row(b.var(dec.mlp_b1))?.relu();
    Ok(hidden.matmul(b.var(dec.mlp_w2))?.add_row(b.var(dec.mlp_b2))?)
}

/// 1 on edges, `delta` everywhere else including the diagonal.
pub fn edge_weight_mask(g: &Graph, delta: f64) -> Result<Tensor> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::EdgeWeight(delta));
    }
    Ok(Tensor::from_fn(g.n(), g.n(), |i, j| if g.has_edge(i, j) { 1.0 } else { delta }))
}

/// `‖mask ⊙ (A_pred − A)‖² + ‖F_pred − F‖²`, summed over entries rather
/// than averaged; the attribute term is dropped when `d_F = 0`.
pub fn reconstruction_loss<'t>(tape: &'t Tape, g: &Graph, dec: &Decoded<'t>, delta: f64) -> Result<Var<'t>> {
    let n = g.n();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if dec.a_pred.shape() != [n, n] {
        return Err(Error::Rows { what: "reconstruction adjacency", left: dec.a_pred.rows(), right: n });
    }
    if dec.f_pred.shape() != g.attributes().shape() {
        return Err(Error::Width { what: "reconstruction attributes", expected: g.attribute_dim(), got: dec.f_pred.cols() });
    }
    let mask = tape.constant(edge_weight_mask(g, delta)?);
    let a = tape.constant(g.adjacency_tensor());
    let adj = dec.a_pred.sub(a)?.mul(mask)?.frobenius_sq();
    if g.attribute_dim() == 0 {
        return Ok(adj);
    }
    let f = tape.constant(g.attributes().clone());
    let attr = dec.f_pred.sub(f)?.frobenius_sq();
    Ok(adj.add(attr)?)
}
