//! The full parameter set: one encoder and decoder per domain, the
//! translator, and the mutual-information discriminator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{Decoded, DecoderDims, DecoderParams, LinkFunction};
use crate::encoder::{Aggregation, EncoderDims, EncoderParams, NodeEmbeddings};
use crate::error::{Error, Result};
use crate::graphs::{position_embedding, select_anchors, Graph, PositionTransform};
use crate::numerics::{ParamBinder, ParamStore, Tape, Tensor};
use crate::rng::stream;
use crate::translator::{MiEstimatorParams, Readout, TranslatorParams};

/// Parameter-name prefixes.
pub const ENC_S: &str = "enc_s";
pub const ENC_T: &str = "enc_t";
pub const DEC_S: &str = "dec_s";
pub const DEC_T: &str = "dec_t";
pub const TRANS: &str = "trans";
pub const MI: &str = "mi";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of anchors, i.e. position-embedding width.
    pub k: usize,
    pub d_hidden: usize,
    pub encoder_layers: usize,
    pub aggregation: Aggregation,
    pub position: PositionTransform,
    pub attention_blocks: usize,
    pub heads: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub attribute_hidden: usize,
    pub link: LinkFunction,
    pub translator_hidden: usize,
    pub readout: Readout,
    pub mi_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 8,
            d_hidden: 16,
            encoder_layers: 2,
            aggregation: Aggregation::Mean,
            position: PositionTransform::Reciprocal,
            attention_blocks: 2,
            heads: 4,
            d_k: 16,
            d_v: 16,
            attribute_hidden: 32,
            link: LinkFunction::Sigmoid,
            translator_hidden: 64,
            readout: Readout::Mean,
            mi_hidden: 32,
        }
    }
}

/// Components removed for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// No translator and no estimator: source embeddings feed the target
    /// decoder directly.
    pub shared_embedding: bool,
    /// First `k` attribute columns (zero-padded) replace anchor distances.
    pub no_position: bool,
    /// No estimator, no MI term, no MI pretraining.
    pub no_mi: bool,
    /// Decoders skip attention (`H_O = H`).
    pub no_attention: bool,
}

impl Ablation {
    pub fn uses_translator(&self) -> bool {
        !self.shared_embedding
    }

    pub fn uses_mi(&self) -> bool {
        !self.shared_embedding && !self.no_mi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub ablation: Ablation,
    pub store: ParamStore,
    pub enc_s: EncoderParams,
    pub enc_t: EncoderParams,
    pub dec_s: DecoderParams,
    pub dec_t: DecoderParams,
    pub trans: Option<TranslatorParams>,
    pub mi: Option<MiEstimatorParams>,
}

impl Model {
    /// Initializes every component from its own substream of `seed`, so
    /// dropping a component leaves the others' initial values unchanged.
    pub fn new(config: &ModelConfig, ablation: Ablation, d_f_source: usize, d_f_target: usize, seed: u64) -> Result<Self> {
        let c = config;
        for (key, v) in [
            ("model.k", c.k),
            ("model.d_hidden", c.d_hidden),
            ("model.encoder_layers", c.encoder_layers),
            ("model.heads", c.heads),
            ("model.d_k", c.d_k),
            ("model.d_v", c.d_v),
            ("model.attribute_hidden", c.attribute_hidden),
            ("model.translator_hidden", c.translator_hidden),
            ("model.mi_hidden", c.mi_hidden),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if ablation.shared_embedding && d_f_source != d_f_target {
            return Err(Error::Width { what: "shared embedding attributes", expected: d_f_source, got: d_f_target });
        }
        let mut store = ParamStore::new();
        let enc_dims = |d_f| EncoderDims { d_f, k: c.k, d_hidden: c.d_hidden, layers: c.encoder_layers };
        let (es, et) = (enc_dims(d_f_source), enc_dims(d_f_target));
        let enc_s = EncoderParams::init(&mut store, ENC_S, es, c.aggregation, &mut stream(seed, "init/enc_s"))?;
        let enc_t = EncoderParams::init(&mut store, ENC_T, et, c.aggregation, &mut stream(seed, "init/enc_t"))?;
        let dec_dims = |e: EncoderDims| DecoderDims {
            d_h: e.d_h(),
            d_p: e.d_p(),
            d_f: e.d_f,
            blocks: if ablation.no_attention { 0 } else { c.attention_blocks },
            heads: c.heads,
            d_k: c.d_k,
            d_v: c.d_v,
            mlp_hidden: c.attribute_hidden,
        };
        let dec_s = DecoderParams::init(&mut store, DEC_S, dec_dims(es), c.link, &mut stream(seed, "init/dec_s"));
        let dec_t = DecoderParams::init(&mut store, DEC_T, dec_dims(et), c.link, &mut stream(seed, "init/dec_t"));
        let trans = ablation.uses_translator().then(|| {
            let widths = (es.d_h(), es.d_p(), et.d_h());
            TranslatorParams::init(&mut store, TRANS, widths, c.translator_hidden, c.readout, &mut stream(seed, "init/trans"))
        });
        let mi = ablation.uses_mi().then(|| {
            let widths = (es.d_h() + es.d_p(), et.d_h() + et.d_p());
            MiEstimatorParams::init(&mut store, MI, widths, c.mi_hidden, &mut stream(seed, "init/mi"))
        });
        Ok(Model { config: c.clone(), ablation, store, enc_s, enc_t, dec_s, dec_t, trans, mi })
    }

    pub fn draw_anchors(&self, g: &Graph, rng: &mut impl Rng) -> Result<Vec<usize>> {
        Ok(select_anchors(g, self.config.k, rng)?)
    }

    /// Position input for `g`: anchor distances, or under `no_position` the
    /// first `k` attribute columns zero-padded to width `k`.
    pub fn position_input(&self, g: &Graph, anchors: &[usize]) -> Result<Tensor> {
        let k = self.config.k;
        if self.ablation.no_position {
            let f = g.attributes();
            return Ok(Tensor::from_fn(g.n(), k, |i, c| if c < f.cols() { f.get(i, c) } else { 0.0 }));
        }
        Ok(position_embedding(g, anchors, self.config.position)?.values)
    }

    pub fn encode_source<'t>(&self, b: &ParamBinder<'t, '_>, g: &Graph, anchors: &[usize]) -> Result<NodeEmbeddings<'t>> {
        self.enc_s.encode(b, g, &self.position_input(g, anchors)?)
    }

    pub fn encode_target<'t>(&self, b: &ParamBinder<'t, '_>, g: &Graph, anchors: &[usize]) -> Result<NodeEmbeddings<'t>> {
        self.enc_t.encode(b, g, &self.position_input(g, anchors)?)
    }

    /// Source embeddings mapped into the target space; the identity under
    /// `shared_embedding`.
    pub fn translate<'t>(&self, b: &ParamBinder<'t, '_>, emb: &NodeEmbeddings<'t>) -> Result<NodeEmbeddings<'t>> {
        match &self.trans {
            Some(t) => t.translate(b, emb),
            None => Ok(*emb),
        }
    }

    /// Source graph → predicted target graph, with `anchors` drawn on the
    /// source.
    pub fn predict<'t>(&self, b: &ParamBinder<'t, '_>, source: &Graph, anchors: &[usize]) -> Result<Decoded<'t>> {
        let emb = self.encode_source(b, source, anchors)?;
        let translated = self.translate(b, &emb)?;
        self.dec_t.decode(b, &translated)
    }

    /// Predicted target adjacency probabilities and attributes as plain
    /// tensors.
    pub fn predict_values(&self, source: &Graph, anchors: &[usize]) -> Result<(Tensor, Tensor)> {
        let tape = Tape::new();
        let b = ParamBinder::frozen(&tape, &self.store);
        let out = self.predict(&b, source, anchors)?;
        Ok((out.a_pred.value(), out.f_pred.value()))
    }

    /// Number of scalar parameters whose names start with `prefix.`.
    pub fn param_count(&self, prefix: &str) -> usize {
        self.store.ids_with_prefix(prefix).map(|id| self.store.value(id).len()).sum()
    }
}
