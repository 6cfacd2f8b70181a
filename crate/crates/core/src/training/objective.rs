use crate::decoder::reconstruction_loss;
use crate::encoder::NodeEmbeddings;
use crate::error::{Error, Result};
use crate::graphs::{Graph, PairedExample};
use crate::model::Model;
use crate::numerics::{ParamBinder, Var};
use crate::translator::{mi_objective, readout, translation_loss, MiTerms};

/// Loss weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub lambda: f64,
    pub mu: f64,
    pub delta: f64,
}

/// A paired example with anchors drawn on its source graph; the target
/// reuses the same node indices.
#[derive(Debug, Clone)]
pub struct PairedItem<'a> {
    pub pair: &'a PairedExample,
    pub anchors: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GraphItem<'a> {
    pub graph: &'a Graph,
    pub anchors: Vec<usize>,
}

/// Graphs contributing to one optimizer step.
#[derive(Debug, Clone, Default)]
pub struct Batch<'a> {
    pub paired: Vec<PairedItem<'a>>,
    /// Source-domain graphs without a target.
    pub sources: Vec<GraphItem<'a>>,
    /// Target-domain graphs without a source.
    pub targets: Vec<GraphItem<'a>>,
    /// Negative pairing over `sources` for the MI term; `None` skips it.
    pub derangement: Option<Vec<usize>>,
}

impl Batch<'_> {
    pub fn is_empty(&self) -> bool {
        self.paired.is_empty() && self.sources.is_empty() && self.targets.is_empty()
    }
}

/// Running sums for epoch-level logging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub rec_s: (f64, usize),
    pub rec_t: (f64, usize),
    pub trans: (f64, usize),
    /// One entry per batch that carried an MI estimate.
    pub mi: (f64, usize),
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        for (a, b) in [
            (&mut self.rec_s, other.rec_s),
            (&mut self.rec_t, other.rec_t),
            (&mut self.trans, other.trans),
            (&mut self.mi, other.mi),
        ] {
            a.0 += b.0;
            a.1 += b.1;
        }
    }

    pub fn mean(part: (f64, usize)) -> f64 {
        if part.1 == 0 {
            0.0
        } else {
            part.0 / part.1 as f64
        }
    }
}

pub struct Objective<'t> {
    pub total: Var<'t>,
    pub tally: Tally,
}

#[derive(Default)]
struct Acc<'t> {
    terms: Vec<Var<'t>>,
}

impl<'t> Acc<'t> {
    fn push(&mut self, v: Var<'t>) {
        self.terms.push(v);
    }

    fn mean(&self) -> Result<Option<Var<'t>>> {
        let Some((first, rest)) = self.terms.split_first() else { return Ok(None) };
        let mut sum = *first;
        for v in rest {
            sum = sum.add(*v)?;
        }
        Ok(Some(sum.scale(1.0 / self.terms.len() as f64)))
    }

    fn sum_value(&self) -> f64 {
        self.terms.iter().map(|v| v.item()).sum()
    }
}

/// Stacked global features `(g_s, g_t_pred)` of source graphs, one row per
/// graph.
pub fn global_pairs<'t>(model: &Model, b: &ParamBinder<'t, '_>, items: &[GraphItem<'_>]) -> Result<(Var<'t>, Var<'t>)> {
    let mut gs = Vec::with_capacity(items.len());
    let mut gt = Vec::with_capacity(items.len());
    for item in items {
        let emb = model.encode_source(b, item.graph, &item.anchors)?;
        push_globals(model, b, &emb, &mut gs, &mut gt)?;
    }
    Ok((b.tape().concat(&gs, 0)?, b.tape().concat(&gt, 0)?))
}

fn push_globals<'t>(
    model: &Model,
    b: &ParamBinder<'t, '_>,
    emb: &NodeEmbeddings<'t>,
    gs: &mut Vec<Var<'t>>,
    gt: &mut Vec<Var<'t>>,
) -> Result<()> {
    let kind = model.config.readout;
    gs.push(readout(emb, kind)?);
    gt.push(readout(&model.translate(b, emb)?, kind)?);
    Ok(())
}

/// Discriminator loss on unpaired source graphs.
pub fn estimator_objective<'t>(model: &Model, b: &ParamBinder<'t, '_>, items: &[GraphItem<'_>], perm: &[usize]) -> Result<MiTerms<'t>> {
    let est = model.mi.as_ref().ok_or(Error::MiBatch(0))?;
    let (gs, gt) = global_pairs(model, b, items)?;
    mi_objective(est, b, gs, gt, perm)
}

/// `mean L_trans + λ·(mean L_rec over source graphs + mean L_rec over
/// target graphs) − μ·MI`, each term present only when the batch carries
/// the graphs it needs. Reconstruction is skipped entirely when `λ = 0`.
pub fn full_objective<'t>(model: &Model, b: &ParamBinder<'t, '_>, batch: &Batch<'_>, w: Weights) -> Result<Objective<'t>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let tape = b.tape();
    let with_rec = w.lambda != 0.0;
    let (mut rec_s, mut rec_t, mut trans) = (Acc::default(), Acc::default(), Acc::default());
    for item in &batch.paired {
        let (gs, gt) = (item.pair.source(), item.pair.target());
        let emb_s = model.encode_source(b, gs, &item.anchors)?;
        let emb_t = model.encode_target(b, gt, &item.anchors)?;
        trans.push(translation_loss(&model.translate(b, &emb_s)?, &emb_t)?);
        if with_rec {
            rec_s.push(reconstruction_loss(tape, gs, &model.dec_s.decode(b, &emb_s)?, w.delta)?);
            rec_t.push(reconstruction_loss(tape, gt, &model.dec_t.decode(b, &emb_t)?, w.delta)?);
        }
    }
    let mi_perm = batch.derangement.as_ref().filter(|_| model.mi.is_some() && batch.sources.len() >= 2);
    let (mut gs, mut gt) = (Vec::new(), Vec::new());
    for item in &batch.sources {
        let emb = model.encode_source(b, item.graph, &item.anchors)?;
        if with_rec {
            rec_s.push(reconstruction_loss(tape, item.graph, &model.dec_s.decode(b, &emb)?, w.delta)?);
        }
        if mi_perm.is_some() {
            push_globals(model, b, &emb, &mut gs, &mut gt)?;
        }
    }
    if with_rec {
        for item in &batch.targets {
            let emb = model.encode_target(b, item.graph, &item.anchors)?;
            rec_t.push(reconstruction_loss(tape, item.graph, &model.dec_t.decode(b, &emb)?, w.delta)?);
        }
    }
    let mi = match (mi_perm, &model.mi) {
        (Some(perm), Some(est)) => Some(mi_objective(est, b, tape.concat(&gs, 0)?, tape.concat(&gt, 0)?, perm)?.mi),
        _ => None,
    };

    let mut total: Option<Var<'t>> = trans.mean()?;
    let mut add = |v: Var<'t>| -> Result<()> {
        total = Some(match total {
            Some(t) => t.add(v)?,
            None => v,
        });
        Ok(())
    };
    for part in [rec_s.mean()?, rec_t.mean()?].into_iter().flatten() {
        add(part.scale(w.lambda))?;
    }
    if let Some(m) = mi {
        add(m.scale(-w.mu))?;
    }
    let total = total.unwrap_or_else(|| tape.constant(crate::numerics::Tensor::scalar(0.0)));
    let tally = Tally {
        rec_s: (rec_s.sum_value(), rec_s.terms.len()),
        rec_t: (rec_t.sum_value(), rec_t.terms.len()),
        trans: (trans.sum_value(), trans.terms.len()),
        mi: mi.map_or((0.0, 0), |m| (m.item(), 1)),
    };
    Ok(Objective { total, tally })
}
