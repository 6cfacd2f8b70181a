//! Bridge between the source and target embedding spaces: a node-wise MLP
//! conditioned on a graph readout, the paired translation loss, and a
//! Jensen–Shannon mutual-information estimator for unpaired graphs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::NodeEmbeddings;
use crate::error::{Error, Result};
use crate::numerics::{ParamBinder, ParamId, ParamStore, Tensor, Var};

/// Graph-level pooling of node rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Mean,
    Sum,
}

/// Pools `concat(h, p)` over nodes into a `1 x (d_h + d_p)` row.
pub fn readout<'t>(emb: &NodeEmbeddings<'t>, kind: Readout) -> Result<Var<'t>> {
    if emb.h.rows() != emb.p.rows() {
        return Err(Error::Rows { what: "readout", left: emb.h.rows(), right: emb.p.rows() });
    }
    if emb.n() == 0 {
        return Err(Error::EmptyReadout);
    }
    let mean = emb.joined()?.mean_rows()?;
    Ok(match kind {
        Readout::Mean => mean,
        Readout::Sum => mean.scale(emb.n() as f64),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorParams {
    /// Input feature width.
    pub d_h: usize,
    pub d_p: usize,
    /// Output feature width; the position width is shared by both domains.
    pub d_h_out: usize,
    pub readout: Readout,
    /// `(weight, bias)` for the two hidden layers and the output layer.
    pub layers: [(ParamId, ParamId); 3],
}

impl TranslatorParams {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        (d_h, d_p, d_h_out): (usize, usize, usize),
        hidden: usize,
        readout: Readout,
        rng: &mut impl Rng,
    ) -> Self {
        let e = d_h + d_p;
        let widths = [(2 * e, hidden), (hidden, hidden), (hidden, d_h_out + d_p)];
        let layers = std::array::from_fn(|l| {
            let (fan_in, fan_out) = widths[l];
            (
                store.add_glorot(format!("{prefix}.layer{l}.w"), fan_in, fan_out, rng),
                store.add_zeros(format!("{prefix}.layer{l}.b"), 1, fan_out),
            )
        });
        TranslatorParams { d_h, d_p, d_h_out, readout, layers }
    }

    /// Maps source embeddings to predicted target embeddings, node by node.
    pub fn translate<'t>(&self, b: &ParamBinder<'t, '_>, emb: &NodeEmbeddings<'t>) -> Result<NodeEmbeddings<'t>> {
        if emb.h.cols() != self.d_h {
            return Err(Error::Width { what: "translator H", expected: self.d_h, got: emb.h.cols() });
        }
        if emb.p.cols() != self.d_p {
            return Err(Error::Width { what: "translator P", expected: self.d_p, got: emb.p.cols() });
        }
        let tape = b.tape();
        let g = readout(emb, self.readout)?;
        let broadcast = tape.constant(Tensor::filled(emb.n(), 1, 1.0)).matmul(g)?;
        let mut x = tape.concat(&[emb.h, emb.p, broadcast], 1)?;
        for (l, &(w, bias)) in self.layers.iter().enumerate() {
            x = x.matmul(b.var(w))?.add_row(b.var(bias))?;
            if l + 1 < self.layers.len() {
                x = x.relu();
            }
        }
        Ok(NodeEmbeddings { h: x.slice_cols(0, self.d_h_out)?, p: x.slice_cols(self.d_h_out, self.d_h_out + self.d_p)? })
    }
}

/// `‖ΔH‖² + ‖ΔP‖²`, summed over entries.
pub fn translation_loss<'t>(pred: &NodeEmbeddings<'t>, target: &NodeEmbeddings<'t>) -> Result<Var<'t>> {
    let term = |a: Var<'t>, b: Var<'t>| -> Result<Var<'t>> {
        if a.shape() != b.shape() {
            return Err(Error::Width { what: "translation loss", expected: b.cols(), got: a.cols() });
        }
        if a.rows() * a.cols() == 0 {
            return Ok(a.tape().constant(Tensor::scalar(0.0)));
        }
        Ok(a.sub(b)?.frobenius_sq())
    };
    Ok(term(pred.h, target.h)?.add(term(pred.p, target.p)?)?)
}

/// Discriminator scoring `(g_s, g_t)` pairs: `concat → hidden → 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MiEstimatorParams {
    pub width_s: usize,
    pub width_t: usize,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl MiEstimatorParams {
    pub fn init(store: &mut ParamStore, prefix: &str, (width_s, width_t): (usize, usize), hidden: usize, rng: &mut impl Rng) -> Self {
        MiEstimatorParams {
            width_s,
            width_t,
            w1: store.add_glorot(format!("{prefix}.w1"), width_s + width_t, hidden, rng),
            b1: store.add_zeros(format!("{prefix}.b1"), 1, hidden),
            w2: store.add_glorot(format!("{prefix}.w2"), hidden, 1, rng),
            b2: store.add_zeros(format!("{prefix}.b2"), 1, 1),
        }
    }

    /// Scores for row-aligned `m x width` stacks, `m x 1`.
    pub fn score<'t>(&self, b: &ParamBinder<'t, '_>, g_s: Var<'t>, g_t: Var<'t>) -> Result<Var<'t>> {
        for (v, width) in [(g_s, self.width_s), (g_t, self.width_t)] {
            if v.cols() != width {
                return Err(Error::Width { what: "estimator input", expected: width, got: v.cols() });
            }
        }
        let x = b.tape().concat(&[g_s, g_t], 1)?;
        let hidden = x.matmul(b.var(self.w1))?.add_row(b.var(self.b1))?.relu();
        Ok(hidden.matmul(b.var(self.w2))?.add_row(b.var(self.b2))?)
    }
}

/// Uniform random permutation of `0..m` with no fixed point, by rejection.
pub fn derangement(m: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if m < 2 {
        return Err(Error::MiBatch(m));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    loop {
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MiTerms<'t> {
    /// `-mi`, minimized by the estimator.
    pub estimator_loss: Var<'t>,
    /// `mean_pos[-softplus(-T)] - mean_neg[softplus(T)]`.
    pub mi: Var<'t>,
}

/// Jensen–Shannon estimate over stacked global features, with negatives
/// `(g_s[i], g_t[perm[i]])` for the derangement `perm`.
pub fn mi_objective<'t>(
    est: &MiEstimatorParams,
    b: &ParamBinder<'t, '_>,
    g_s: Var<'t>,
    g_t: Var<'t>,
    perm: &[usize],
) -> Result<MiTerms<'t>> {
    let m = g_s.rows();
    if m < 2 {
        return Err(Error::MiBatch(m));
    }
    if g_t.rows() != m || perm.len() != m {
        return Err(Error::Rows { what: "estimator pairs", left: m, right: g_t.rows().min(perm.len()) });
    }
    let pos = est.score(b, g_s, g_t)?;
    let neg = est.score(b, g_s, g_t.select_rows(perm)?)?;
    let mi = pos.neg().softplus().neg().mean()?.sub(neg.softplus().mean()?)?;
    Ok(MiTerms { estimator_loss: mi.neg(), mi })
}
