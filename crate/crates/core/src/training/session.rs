//! The staged training run: autoencoder pretraining, translator
//! pretraining, discriminator pretraining, then joint fine-tuning.
//!
//! Every epoch draws its shuffles, anchors and negatives from streams keyed
//! by `(seed, phase, epoch)`, so a run restored from a checkpoint continues
//! bit-for-bit.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Dataset, Graph, PairedExample};
use crate::model::{Model, DEC_S, DEC_T, ENC_S, ENC_T, MI, TRANS};
use crate::numerics::{Adam, Checkpoint, ParamBinder, ParamId, ParamStore, Tape, Var};
use crate::rng::{stream_at, RunRng};
use crate::translator::derangement;

use super::config::TrainConfig;
use super::objective::{estimator_objective, full_objective, Batch, GraphItem, PairedItem, Tally, Weights};
use super::report::{EpochRecord, Phase};

const AUTOENCODER: [&str; 4] = [ENC_S, ENC_T, DEC_S, DEC_T];

fn in_groups(name: &str, groups: &[&str]) -> bool {
    groups.iter().any(|g| name.strip_prefix(g).is_some_and(|rest| rest.starts_with('.')))
}

fn group_ids(store: &ParamStore, groups: &[&str]) -> Vec<ParamId> {
    store.ids().filter(|&id| in_groups(&store.get(id).name, groups)).collect()
}

fn not_mi(store: &ParamStore) -> Vec<ParamId> {
    store.ids().filter(|&id| !in_groups(&store.get(id).name, &[MI])).collect()
}

fn rng(cfg: &TrainConfig, phase: Phase, what: &str, epoch: usize) -> RunRng {
    stream_at(cfg.seed, &format!("{phase}/{what}"), epoch as u64)
}

fn shuffled<'a, T>(items: impl IntoIterator<Item = &'a T>, rng: &mut RunRng) -> Vec<&'a T>
where
    T: 'a,
{
    let mut v: Vec<&T> = items.into_iter().collect();
    v.shuffle(rng);
    v
}

/// Positions `[j·bs, (j+1)·bs)` of a list of length `len`, wrapping around
/// so shorter lists cycle to keep pace with the longest one.
fn cycled<'a, T>(list: &[&'a T], start: usize, count: usize) -> Vec<&'a T> {
    if list.is_empty() {
        return Vec::new();
    }
    (start..start + count).map(|p| list[p % list.len()]).collect()
}

/// Splits `0..len` into chunks of `bs`, folding a trailing singleton into
/// the previous chunk.
fn chunks_without_singletons(len: usize, bs: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<_> = (0..len).step_by(bs).map(|s| s..(s + bs).min(len)).collect();
    if out.len() >= 2 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").end = last.end;
    }
    out
}

fn graph_items<'a>(model: &Model, graphs: &[&'a Graph], rng: &mut RunRng) -> Result<Vec<GraphItem<'a>>> {
    graphs.iter().map(|&g| Ok(GraphItem { graph: g, anchors: model.draw_anchors(g, rng)? })).collect()
}

fn paired_items<'a>(model: &Model, pairs: &[&'a PairedExample], rng: &mut RunRng) -> Result<Vec<PairedItem<'a>>> {
    pairs.iter().map(|&p| Ok(PairedItem { pair: p, anchors: model.draw_anchors(p.source(), rng)? })).collect()
}

/// Backpropagates `loss` into the store and applies one Adam update. A loss
/// with no trainable inputs is a no-op.
fn apply(model: &mut Model, tape: &Tape, loss: Var<'_>, opt: &mut Adam, lr: f64) -> Result<()> {
    if !loss.requires_grad() {
        return Ok(());
    }
    if !loss.item().is_finite() {
        return Err(Error::NonFiniteLoss(loss.item()));
    }
    tape.backward(loss, &mut model.store)?;
    opt.step(&mut model.store, lr)?;
    model.store.zero_grad();
    Ok(())
}

/// Attribute widths of the source and target domains.
fn domain_widths(data: &Dataset) -> Result<(usize, usize)> {
    let source = data.paired_train.iter().map(|p| p.source()).chain(&data.unpaired_source).next();
    let target = data.paired_train.iter().map(|p| p.target()).chain(&data.unpaired_target).next();
    match (source, target) {
        (Some(s), Some(t)) => Ok((s.attribute_dim(), t.attribute_dim())),
        (Some(s), None) => Ok((s.attribute_dim(), s.attribute_dim())),
        (None, Some(t)) => Ok((t.attribute_dim(), t.attribute_dim())),
        (None, None) => Err(Error::EmptyDataset),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
struct Steps {
    opt_model: Option<u64>,
    opt_mi: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionMeta {
    phase: Phase,
    epoch: usize,
    d_f_source: usize,
    d_f_target: usize,
    steps: Steps,
    config: TrainConfig,
    records: Vec<EpochRecord>,
}

/// A training run in progress. `(phase, epoch)` names the next epoch to run.
#[derive(Debug, Clone)]
pub struct Session {
    pub config: TrainConfig,
    pub model: Model,
    phase: Phase,
    epoch: usize,
    records: Vec<EpochRecord>,
    opt_model: Option<Adam>,
    opt_mi: Option<Adam>,
    widths: (usize, usize),
}

impl Session {
    /// Fresh model for `data` under `config`. Fails early if a scheduled
    /// phase cannot run on this data.
    pub fn new(config: &TrainConfig, data: &Dataset) -> Result<Self> {
        config.validate()?;
        let widths = domain_widths(data)?;
        let model = Model::new(&config.model, config.ablation, widths.0, widths.1, config.seed)?;
        let mut s = Session {
            config: config.clone(),
            model,
            phase: Phase::PretrainAe,
            epoch: 0,
            records: Vec::new(),
            opt_model: None,
            opt_mi: None,
            widths,
        };
        s.check_data(data)?;
        s.settle();
        Ok(s)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if self.scheduled(Phase::PretrainTrans) > 0 && data.paired_train.is_empty() {
            return Err(Error::NoPairedData);
        }
        if self.scheduled(Phase::PretrainMi) > 0 && data.unpaired_source.len() < 2 {
            return Err(Error::TooFewUnpaired(data.unpaired_source.len()));
        }
        Ok(())
    }

    /// Epochs `phase` will run: its budget, or 0 when the parameters it
    /// trains were ablated away.
    pub fn scheduled(&self, phase: Phase) -> usize {
        let e = &self.config.epochs;
        match phase {
            Phase::PretrainAe => e.pretrain_ae,
            Phase::PretrainTrans if self.model.trans.is_some() => e.pretrain_trans,
            Phase::PretrainMi if self.model.mi.is_some() => e.pretrain_mi,
            Phase::Finetune => e.finetune,
            _ => 0,
        }
    }

    /// Moves past finished or empty phases.
    fn settle(&mut self) {
        while self.phase != Phase::Done && self.epoch >= self.scheduled(self.phase) {
            self.phase = self.phase.next();
            self.epoch = 0;
            self.opt_model = None;
            self.opt_mi = None;
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    fn weights(&self) -> Weights {
        Weights { lambda: self.config.lambda, mu: self.config.effective_mu(), delta: self.config.delta }
    }

    /// Runs the next epoch and returns its record, or `None` once every
    /// phase has finished.
    pub fn step_epoch(&mut self, data: &Dataset) -> Result<Option<EpochRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let (phase, epoch) = (self.phase, self.epoch);
        let w = self.weights();
        let store = &self.model.store;
        let tally = match phase {
            Phase::PretrainAe => {
                let opt = self.opt_model.get_or_insert_with(|| Adam::new(store, group_ids(store, &AUTOENCODER)));
                autoencoder_epoch(&mut self.model, opt, data, &self.config, epoch)?
            }
            Phase::PretrainTrans => {
                let opt = self.opt_model.get_or_insert_with(|| Adam::new(store, group_ids(store, &[TRANS])));
                translator_epoch(&mut self.model, opt, data, &self.config, epoch)?
            }
            Phase::PretrainMi => {
                let opt = self.opt_mi.get_or_insert_with(|| Adam::new(store, group_ids(store, &[MI])));
                estimator_epoch(&mut self.model, opt, data, &self.config, epoch)?
            }
            Phase::Finetune => {
                let opt = self.opt_model.get_or_insert_with(|| Adam::new(store, not_mi(store)));
                let opt_mi = self.model.mi.is_some().then(|| self.opt_mi.get_or_insert_with(|| Adam::new(store, group_ids(store, &[MI]))));
                finetune_epoch(&mut self.model, opt, opt_mi, data, &self.config, w, epoch)?
            }
            Phase::Done => unreachable!("checked above"),
        };
        let (rec_s, rec_t, trans, mi) = (Tally::mean(tally.rec_s), Tally::mean(tally.rec_t), Tally::mean(tally.trans), Tally::mean(tally.mi));
        let total = match phase {
            Phase::PretrainAe => rec_s + rec_t,
            Phase::PretrainTrans => trans,
            Phase::PretrainMi => -mi,
            _ => trans + w.lambda * (rec_s + rec_t) - w.mu * mi,
        };
        let record = EpochRecord { phase, epoch, rec_s, rec_t, trans, mi, total };
        self.records.push(record);
        self.epoch += 1;
        self.settle();
        Ok(Some(record))
    }

    /// Runs to completion. With `checkpoints`, writes `checkpoint.{json,bin}`
    /// there every `checkpoint_every` fine-tune epochs.
    pub fn run(&mut self, data: &Dataset, checkpoints: Option<&Path>) -> Result<()> {
        self.run_until(data, Phase::Done, 0, checkpoints)
    }

    /// Runs until the next epoch to run is `(phase, epoch)` or later.
    pub fn run_until(&mut self, data: &Dataset, phase: Phase, epoch: usize, checkpoints: Option<&Path>) -> Result<()> {
        while (self.phase, self.epoch) < (phase, epoch) {
            let Some(r) = self.step_epoch(data)? else { break };
            if let Some(dir) = checkpoints.filter(|_| self.checkpoint_due(&r)) {
                self.save(dir, "checkpoint")?;
            }
        }
        Ok(())
    }

    /// Whether `config.checkpoint_every` asks for a checkpoint after `r`.
    pub fn checkpoint_due(&self, r: &EpochRecord) -> bool {
        let every = self.config.checkpoint_every;
        r.phase == Phase::Finetune && every > 0 && (r.epoch + 1) % every == 0
    }

    /// Writes parameters, optimizer moments and progress to
    /// `<dir>/<stem>.json` and `<dir>/<stem>.bin`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut ck = Checkpoint::new();
        ck.push_params(&self.model.store);
        let mut steps = Steps::default();
        if let Some(opt) = &self.opt_model {
            ck.push_adam("opt_model", opt, &self.model.store);
            steps.opt_model = Some(opt.steps());
        }
        if let Some(opt) = &self.opt_mi {
            ck.push_adam("opt_mi", opt, &self.model.store);
            steps.opt_mi = Some(opt.steps());
        }
        let meta = SessionMeta {
            phase: self.phase,
            epoch: self.epoch,
            d_f_source: self.widths.0,
            d_f_target: self.widths.1,
            steps,
            config: self.config.clone(),
            records: self.records.clone(),
        };
        ck.meta = serde_json::to_value(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.save(dir, stem)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let ck = Checkpoint::load(dir, stem)?;
        let meta: SessionMeta = serde_json::from_value(ck.meta.clone()).map_err(|e| Error::Checkpoint(format!("meta: {e}")))?;
        let cfg = meta.config;
        let mut model = Model::new(&cfg.model, cfg.ablation, meta.d_f_source, meta.d_f_target, cfg.seed)?;
        ck.restore_params(&mut model.store)?;
        let store = &model.store;
        let opt_model = match (meta.phase, meta.steps.opt_model) {
            (_, None) => None,
            (phase, Some(t)) => {
                let ids = match phase {
                    Phase::PretrainAe => group_ids(store, &AUTOENCODER),
                    Phase::PretrainTrans => group_ids(store, &[TRANS]),
                    _ => not_mi(store),
                };
                let mut opt = Adam::new(store, ids);
                ck.restore_adam("opt_model", &mut opt, store, t)?;
                Some(opt)
            }
        };
        let opt_mi = match meta.steps.opt_mi {
            None => None,
            Some(t) => {
                let mut opt = Adam::new(store, group_ids(store, &[MI]));
                ck.restore_adam("opt_mi", &mut opt, store, t)?;
                Some(opt)
            }
        };
        Ok(Session {
            config: cfg,
            model,
            phase: meta.phase,
            epoch: meta.epoch,
            records: meta.records,
            opt_model,
            opt_mi,
            widths: (meta.d_f_source, meta.d_f_target),
        })
    }
}

/// Trains a fresh model through every scheduled phase.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<Session> {
    let mut s = Session::new(config, data)?;
    s.run(data, None)?;
    Ok(s)
}

fn autoencoder_epoch(model: &mut Model, opt: &mut Adam, data: &Dataset, cfg: &TrainConfig, epoch: usize) -> Result<Tally> {
    let phase = Phase::PretrainAe;
    let mut order = rng(cfg, phase, "batching", epoch);
    let sources = shuffled(data.paired_train.iter().map(|p| p.source()).chain(&data.unpaired_source), &mut order);
    let targets = shuffled(data.paired_train.iter().map(|p| p.target()).chain(&data.unpaired_target), &mut order);
    let mut anchors = rng(cfg, phase, "anchors", epoch);
    let w = Weights { lambda: 1.0, mu: 0.0, delta: cfg.delta };
    let bs = cfg.batch_size;
    let longest = sources.len().max(targets.len());
    let mut tally = Tally::default();
    for start in (0..longest).step_by(bs) {
        let count = bs.min(longest - start);
        let batch = Batch {
            sources: graph_items(model, &cycled(&sources, start, count), &mut anchors)?,
            targets: graph_items(model, &cycled(&targets, start, count), &mut anchors)?,
            ..Default::default()
        };
        let tape = Tape::new();
        let obj = {
            let b = ParamBinder::with_filter(&tape, &model.store, |n| in_groups(n, &AUTOENCODER));
            full_objective(model, &b, &batch, w)?
        };
        tally.merge(&obj.tally);
        apply(model, &tape, obj.total, opt, cfg.lr)?;
    }
    Ok(tally)
}

fn translator_epoch(model: &mut Model, opt: &mut Adam, data: &Dataset, cfg: &TrainConfig, epoch: usize) -> Result<Tally> {
    let phase = Phase::PretrainTrans;
    let pairs = shuffled(&data.paired_train, &mut rng(cfg, phase, "batching", epoch));
    let mut anchors = rng(cfg, phase, "anchors", epoch);
    let w = Weights { lambda: 0.0, mu: 0.0, delta: cfg.delta };
    let mut tally = Tally::default();
    for chunk in pairs.chunks(cfg.batch_size) {
        let batch = Batch { paired: paired_items(model, chunk, &mut anchors)?, ..Default::default() };
        let tape = Tape::new();
        let obj = {
            let b = ParamBinder::with_filter(&tape, &model.store, |n| in_groups(n, &[TRANS]));
            full_objective(model, &b, &batch, w)?
        };
        tally.merge(&obj.tally);
        apply(model, &tape, obj.total, opt, cfg.lr)?;
    }
    Ok(tally)
}

fn estimator_step(model: &mut Model, opt: &mut Adam, items: &[GraphItem<'_>], perm: &[usize], lr: f64) -> Result<f64> {
    let tape = Tape::new();
    let terms = {
        let b = ParamBinder::with_filter(&tape, &model.store, |n| in_groups(n, &[MI]));
        estimator_objective(model, &b, items, perm)?
    };
    let mi = terms.mi.item();
    apply(model, &tape, terms.estimator_loss, opt, lr)?;
    Ok(mi)
}

fn estimator_epoch(model: &mut Model, opt: &mut Adam, data: &Dataset, cfg: &TrainConfig, epoch: usize) -> Result<Tally> {
    let phase = Phase::PretrainMi;
    let sources = shuffled(&data.unpaired_source, &mut rng(cfg, phase, "batching", epoch));
    let mut anchors = rng(cfg, phase, "anchors", epoch);
    let mut negatives = rng(cfg, phase, "derangement", epoch);
    let mut tally = Tally::default();
    for range in chunks_without_singletons(sources.len(), cfg.batch_size) {
        let items = graph_items(model, &sources[range], &mut anchors)?;
        let perm = derangement(items.len(), &mut negatives)?;
        let mi = estimator_step(model, opt, &items, &perm, cfg.lr)?;
        tally.mi.0 += mi;
        tally.mi.1 += 1;
    }
    Ok(tally)
}

/// Each iteration takes (a) one step on a paired batch, then on an unpaired
/// batch (b) one discriminator step and (c) one step of the model against
/// the updated discriminator. The shorter batch list cycles.
fn finetune_epoch(
    model: &mut Model,
    opt: &mut Adam,
    mut opt_mi: Option<&mut Adam>,
    data: &Dataset,
    cfg: &TrainConfig,
    w: Weights,
    epoch: usize,
) -> Result<Tally> {
    let phase = Phase::Finetune;
    let bs = cfg.batch_size;
    let pairs = shuffled(&data.paired_train, &mut rng(cfg, phase, "paired_batching", epoch));
    let mut order = rng(cfg, phase, "unpaired_batching", epoch);
    let sources = shuffled(&data.unpaired_source, &mut order);
    let targets = shuffled(&data.unpaired_target, &mut order);
    let mut paired_anchors = rng(cfg, phase, "paired_anchors", epoch);
    let mut unpaired_anchors = rng(cfg, phase, "unpaired_anchors", epoch);
    let mut negatives = rng(cfg, phase, "derangement", epoch);
    let paired_batches = pairs.len().div_ceil(bs);
    let longest = sources.len().max(targets.len());
    let unpaired_batches = longest.div_ceil(bs);
    let trainable = |n: &str| !in_groups(n, &[MI]);
    let mut tally = Tally::default();
    for it in 0..paired_batches.max(unpaired_batches) {
        if paired_batches > 0 {
            let j = it % paired_batches;
            let chunk = &pairs[j * bs..((j + 1) * bs).min(pairs.len())];
            let batch = Batch { paired: paired_items(model, chunk, &mut paired_anchors)?, ..Default::default() };
            let tape = Tape::new();
            let obj = {
                let b = ParamBinder::with_filter(&tape, &model.store, trainable);
                full_objective(model, &b, &batch, w)?
            };
            tally.merge(&obj.tally);
            apply(model, &tape, obj.total, opt, cfg.lr)?;
        }
        if unpaired_batches > 0 {
            let start = (it % unpaired_batches) * bs;
            let count = bs.min(longest - start);
            let mut batch = Batch {
                sources: graph_items(model, &cycled(&sources, start, count), &mut unpaired_anchors)?,
                targets: graph_items(model, &cycled(&targets, start, count), &mut unpaired_anchors)?,
                ..Default::default()
            };
            if let Some(opt_mi) = opt_mi.as_deref_mut() {
                if batch.sources.len() >= 2 {
                    let perm = derangement(batch.sources.len(), &mut negatives)?;
                    estimator_step(model, opt_mi, &batch.sources, &perm, cfg.lr)?;
                    batch.derangement = Some(perm);
                }
            }
            let tape = Tape::new();
            let obj = {
                let b = ParamBinder::with_filter(&tape, &model.store, trainable);
                full_objective(model, &b, &batch, w)?
            };
            tally.merge(&obj.tally);
            apply(model, &tape, obj.total, opt, cfg.lr)?;
        }
    }
    Ok(tally)
}
