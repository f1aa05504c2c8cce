//! C-BERT (which sentence is the continuity error) and U-BERT (what
//! fraction of the ending is missing), each with an optional GATv2 branch
//! over the story's knowledge graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{StoryEncoding, EMBED_DIM};
use crate::error::ModelError;
use crate::kg::KnowledgeGraph;
use crate::nn::{
    length_mask, sinusoidal_positions, DecoderReduce, EncoderLayer, FeedForward, GatV2Layer, GraphBatch, LayerNorm, Linear,
    OutputActivation, ParamStore, Tape, Tensor, Var,
};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CBert,
    UBert,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::CBert => "C-BERT",
            ModelKind::UBert => "U-BERT",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_emb: usize,
    pub n_enc_layers: usize,
    pub n_heads: usize,
    pub ffn_hidden: usize,
    pub use_kg: bool,
    pub gnn_out_dim: usize,
    pub gnn_layers: usize,
    /// Feed relation-text embeddings into GATv2 attention.
    pub gnn_edge_features: bool,
    pub gnn_activation: OutputActivation,
    pub leaky_slope: f64,
    pub n_dec_layers: usize,
    pub positional: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_emb: 64,
            n_enc_layers: 2,
            n_heads: 4,
            ffn_hidden: 128,
            use_kg: false,
            gnn_out_dim: 16,
            gnn_layers: 1,
            gnn_edge_features: true,
            gnn_activation: OutputActivation::Elu,
            leaky_slope: 0.2,
            n_dec_layers: 1,
            positional: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d_emb == 0 || self.n_heads == 0 || self.d_emb % self.n_heads != 0 {
            return bad(format!("d_emb {} must be a positive multiple of n_heads {}", self.d_emb, self.n_heads));
        }
        if self.ffn_hidden == 0 {
            return bad("ffn_hidden must be positive".into());
        }
        if self.use_kg && (self.gnn_out_dim == 0 || self.gnn_layers == 0) {
            return bad("gnn_out_dim and gnn_layers must be at least 1 when use_kg is set".into());
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky_slope {} must lie in (0, 1)", self.leaky_slope));
        }
        Ok(())
    }
}

/// Dataset-dependent input widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    /// Sentence embedding width.
    pub d_sent: usize,
    /// Node one-hot width (dataset-wide maximum entity count).
    pub d_node: usize,
    /// Edge embedding width.
    pub d_edge: usize,
    /// Padded story length.
    pub n_max: usize,
}

impl InputDims {
    pub fn new(d_node: usize, n_max: usize) -> Self {
        Self { d_sent: EMBED_DIM, d_node, d_edge: EMBED_DIM, n_max }
    }
}

/// A knowledge graph in canonical edge order, ready for the GATv2 stack.
#[derive(Clone, Debug)]
pub struct PreparedGraph<T> {
    pub nodes: Tensor<T>,
    pub edges: Vec<(usize, usize)>,
    pub edge_feats: Tensor<T>,
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(kg: &KnowledgeGraph) -> Result<Self, ModelError> {
        let batch = GraphBatch::new(kg.node_embeddings.cast::<T>(), kg.edges.clone(), Some(kg.edge_embeddings.cast::<T>()))?;
        let order = batch.canonical_order();
        let feats = batch.edge_feats.as_ref().expect("edge features present");
        let mut sorted = Tensor::zeros(order.len(), feats.cols());
        for (r, &i) in order.iter().enumerate() {
            sorted.row_mut(r).copy_from_slice(feats.row(i));
        }
        Ok(Self { edges: order.iter().map(|&i| batch.edges[i]).collect(), nodes: batch.node_feats, edge_feats: sorted })
    }
}

/// One model input: the padded story and, for KG variants, its graph.
#[derive(Clone, Copy, Debug)]
pub struct ModelInput<'a, T> {
    pub encoding: &'a StoryEncoding<T>,
    pub graph: Option<&'a PreparedGraph<T>>,
}

/// Layer layout of a model; parameters live in a separate store.
#[derive(Clone, Debug)]
pub struct Architecture {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub dims: InputDims,
    input_proj: Linear,
    encoder: Vec<EncoderLayer>,
    final_norm: LayerNorm,
    decoder: Option<DecoderReduce>,
    gat: Vec<GatV2Layer>,
    head: FeedForward,
    positions: Tensor<f64>,
}

impl Architecture {
    fn head_width(&self) -> usize {
        self.config.d_emb + if self.config.use_kg { self.config.gnn_out_dim } else { 0 }
    }

    /// Graph readout: GATv2 stack, then the mean over nodes. An empty graph
    /// reads out as zeros.
    fn graph_readout<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, graph: &PreparedGraph<T>) -> Var {
        if graph.nodes.rows() == 0 {
            return tape.constant(Tensor::zeros(1, self.config.gnn_out_dim));
        }
        let mut h = tape.constant(graph.nodes.clone());
        let feats = self.config.gnn_edge_features.then(|| tape.constant(graph.edge_feats.clone()));
        for layer in &self.gat {
            h = layer.forward(tape, store, h, &graph.edges, feats).output;
        }
        tape.mean_rows(h)
    }

    fn encode<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, enc: &StoryEncoding<T>, mask: &[bool]) -> Var {
        let x = tape.constant(enc.matrix.clone());
        let mut h = self.input_proj.forward(tape, store, x);
        if self.config.positional {
            let pos = tape.constant(self.positions.cast::<T>());
            h = tape.add(h, pos);
        }
        for layer in &self.encoder {
            h = layer.forward(tape, store, h, mask);
        }
        self.final_norm.forward(tape, store, h)
    }

    fn check_input<T: Scalar>(&self, input: &ModelInput<'_, T>) -> Result<Vec<bool>, ModelError> {
        let (rows, cols) = input.encoding.matrix.shape();
        if rows != self.dims.n_max || cols != self.dims.d_sent {
            return Err(ModelError::Shape(format!(
                "story {:?} encoding is ({rows}, {cols}), expected ({}, {})",
                input.encoding.story_id, self.dims.n_max, self.dims.d_sent
            )));
        }
        if input.encoding.valid_len == 0 {
            return Err(ModelError::Shape(format!("story {:?} has no sentences", input.encoding.story_id)));
        }
        if self.config.use_kg {
            let g = input.graph.ok_or_else(|| ModelError::MissingGraph(input.encoding.story_id.clone()))?;
            if g.nodes.rows() > 0 && g.nodes.cols() != self.dims.d_node {
                return Err(ModelError::Shape(format!(
                    "story {:?} node features have width {}, expected {}",
                    input.encoding.story_id,
                    g.nodes.cols(),
                    self.dims.d_node
                )));
            }
        }
        Ok(length_mask(input.encoding.valid_len, rows))
    }

    /// Model output on the tape: `(1, N)` sentence probabilities for C-BERT,
    /// `(1, 1)` missing fraction for U-BERT.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, input: &ModelInput<'_, T>) -> Result<Var, ModelError> {
        let mask = self.check_input(input)?;
        let seq = self.encode(tape, store, input.encoding, &mask);
        let g = match (self.config.use_kg, input.graph) {
            (true, Some(graph)) => Some(self.graph_readout(tape, store, graph)),
            _ => None,
        };
        Ok(match self.kind {
            ModelKind::CBert => {
                let feats = match g {
                    Some(g) => {
                        let rows = tape.broadcast_rows(g, self.dims.n_max);
                        tape.concat_cols(&[seq, rows])
                    }
                    None => seq,
                };
                let logits = self.head.forward(tape, store, feats);
                let logits = tape.transpose(logits);
                tape.masked_softmax(logits, &mask)
            }
            ModelKind::UBert => {
                let decoder = self.decoder.as_ref().expect("U-BERT has a decoder");
                let pooled = decoder.forward(tape, store, seq, &mask);
                let feats = match g {
                    Some(g) => tape.concat_cols(&[pooled, g]),
                    None => pooled,
                };
                let out = self.head.forward(tape, store, feats);
                tape.sigmoid(out)
            }
        })
    }

    /// Training loss: negative log-probability of the true sentence, or the
    /// squared error of the predicted fraction.
    pub fn loss<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        input: &ModelInput<'_, T>,
        target: Target,
    ) -> Result<Var, ModelError> {
        let out = self.forward(tape, store, input)?;
        Ok(match (self.kind, target) {
            (ModelKind::CBert, Target::Index(y)) => {
                if y >= input.encoding.valid_len {
                    return Err(ModelError::Shape(format!("label {y} outside {} valid sentences", input.encoding.valid_len)));
                }
                let p = tape.pick(out, 0, y);
                let lp = tape.log(p);
                tape.scale(lp, -T::one())
            }
            (ModelKind::UBert, Target::Fraction(r)) => {
                let t = tape.constant(Tensor::scalar(T::lit(r)));
                let d = tape.sub(out, t);
                tape.mul(d, d)
            }
            _ => return Err(ModelError::Config(format!("target {target:?} does not match {}", self.kind.name()))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Index(usize),
    Fraction(f64),
}

/// An architecture together with its parameters.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub arch: Architecture,
    pub store: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(kind: ModelKind, config: &ModelConfig, dims: InputDims) -> Result<Self, ModelError> {
        config.validate()?;
        let c = config;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let mut store = ParamStore::new();
        let input_proj = Linear::new(&mut store, "input", dims.d_sent, c.d_emb, &mut rng);
        let encoder = (0..c.n_enc_layers)
            .map(|i| EncoderLayer::new(&mut store, &format!("enc{i}"), c.d_emb, c.n_heads, c.ffn_hidden, &mut rng))
            .collect();
        let final_norm = LayerNorm::new(&mut store, "enc_out", c.d_emb);
        let decoder = (kind == ModelKind::UBert)
            .then(|| DecoderReduce::new(&mut store, "dec", c.d_emb, c.n_heads, c.ffn_hidden, c.n_dec_layers, &mut rng));
        let gat = if c.use_kg {
            let d_edge = if c.gnn_edge_features { dims.d_edge } else { 0 };
            (0..c.gnn_layers)
                .map(|i| {
                    let d_in = if i == 0 { dims.d_node } else { c.gnn_out_dim };
                    let mut l = GatV2Layer::new(&mut store, &format!("gat{i}"), d_in, d_edge, c.gnn_out_dim, &mut rng);
                    l.leaky_slope = c.leaky_slope;
                    l.activation = c.gnn_activation;
                    l
                })
                .collect()
        } else {
            Vec::new()
        };
        let head_in = c.d_emb + if c.use_kg { c.gnn_out_dim } else { 0 };
        let head = FeedForward::new(&mut store, "head", head_in, c.ffn_hidden, 1, &mut rng);
        let positions = sinusoidal_positions(dims.n_max, c.d_emb);
        let arch = Architecture {
            kind,
            config: c.clone(),
            dims,
            input_proj,
            encoder,
            final_norm,
            decoder,
            gat,
            head,
            positions,
        };
        debug_assert_eq!(arch.head_width(), head_in);
        Ok(Self { arch, store })
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn head_input_width(&self) -> usize {
        self.arch.head_width()
    }

    /// Sentence probabilities (C-BERT); padded positions are exactly zero.
    pub fn predict_probs(&self, input: &ModelInput<'_, T>) -> Result<Vec<T>, ModelError> {
        self.expect_kind(ModelKind::CBert)?;
        let mut tape = Tape::new();
        let out = self.arch.forward(&mut tape, &self.store, input)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Most probable sentence (C-BERT).
    pub fn predict_index(&self, input: &ModelInput<'_, T>) -> Result<usize, ModelError> {
        let p = self.predict_probs(input)?;
        let valid = &p[..input.encoding.valid_len];
        Ok(valid.iter().enumerate().fold(0, |best, (i, &v)| if v > valid[best] { i } else { best }))
    }

    /// Missing fraction (U-BERT).
    pub fn predict_fraction(&self, input: &ModelInput<'_, T>) -> Result<T, ModelError> {
        self.expect_kind(ModelKind::UBert)?;
        let mut tape = Tape::new();
        let out = self.arch.forward(&mut tape, &self.store, input)?;
        Ok(tape.value(out).get(0, 0))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<(), ModelError> {
        if self.arch.kind != kind {
            return Err(ModelError::Config(format!("{} cannot do what {} does", self.arch.kind.name(), kind.name())));
        }
        Ok(())
    }
}

/// Trainable scalar count of a model built from `config`.
pub fn count_params(kind: ModelKind, config: &ModelConfig, dims: InputDims) -> Result<usize, ModelError> {
    Ok(Model::<f64>::new(kind, config, dims)?.param_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::pad;

    fn dims() -> InputDims {
        InputDims { d_sent: 6, d_node: 3, d_edge: 5, n_max: 5 }
    }

    fn small(use_kg: bool) -> ModelConfig {
        ModelConfig { d_emb: 8, n_heads: 2, ffn_hidden: 8, n_enc_layers: 1, gnn_out_dim: 4, use_kg, ..Default::default() }
    }

    fn encoding(n: usize) -> StoryEncoding<f64> {
        let t = Tensor::from_vec(n, 6, (0..n * 6).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect());
        pad("s", &t, 5).unwrap()
    }

    fn graph() -> PreparedGraph<f64> {
        let kg = KnowledgeGraph {
            node_embeddings: Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]),
            edges: vec![(0, 1), (1, 0)],
            edge_embeddings: Tensor::from_vec(2, 5, (0..10).map(|i| i as f64 / 10.0).collect()),
        };
        PreparedGraph::new(&kg).unwrap()
    }

    #[test]
    fn cbert_outputs_distribution() {
        for use_kg in [false, true] {
            let m = Model::<f64>::new(ModelKind::CBert, &small(use_kg), dims()).unwrap();
            let enc = encoding(3);
            let g = graph();
            let p = m.predict_probs(&ModelInput { encoding: &enc, graph: Some(&g) }).unwrap();
            assert!((p[..3].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(&p[3..], &[0.0, 0.0]);
            assert!(m.predict_index(&ModelInput { encoding: &enc, graph: Some(&g) }).unwrap() < 3);
        }
    }

    #[test]
    fn ubert_in_unit_interval() {
        let m = Model::<f64>::new(ModelKind::UBert, &small(true), dims()).unwrap();
        let enc = encoding(4);
        let f = m.predict_fraction(&ModelInput { encoding: &enc, graph: Some(&graph()) }).unwrap();
        assert!(f > 0.0 && f < 1.0);
    }

    #[test]
    fn kg_branch_widens_head_and_needs_a_graph() {
        let m = Model::<f64>::new(ModelKind::CBert, &small(true), dims()).unwrap();
        assert_eq!(m.head_input_width(), 8 + 4);
        let enc = encoding(2);
        assert!(matches!(m.predict_probs(&ModelInput { encoding: &enc, graph: None }), Err(ModelError::MissingGraph(_))));
        let empty = PreparedGraph::new(&KnowledgeGraph {
            node_embeddings: Tensor::zeros(0, 3),
            edges: vec![],
            edge_embeddings: Tensor::zeros(0, 5),
        })
        .unwrap();
        assert!(m.predict_probs(&ModelInput { encoding: &enc, graph: Some(&empty) }).is_ok());
    }

    #[test]
    fn without_kg_graph_is_ignored() {
        let m = Model::<f64>::new(ModelKind::UBert, &small(false), dims()).unwrap();
        let enc = encoding(4);
        let a = m.predict_fraction(&ModelInput { encoding: &enc, graph: None }).unwrap();
        let b = m.predict_fraction(&ModelInput { encoding: &enc, graph: Some(&graph()) }).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn param_count_monotonicity() {
        let base = small(false);
        let c = |cfg: &ModelConfig| count_params(ModelKind::CBert, cfg, dims()).unwrap();
        assert!(c(&ModelConfig { ffn_hidden: 16, ..base.clone() }) > c(&base));
        assert!(c(&small(true)) > c(&base));
        assert_eq!(c(&base), c(&base));
    }

    #[test]
    fn config_validation() {
        let bad = ModelConfig { d_emb: 10, n_heads: 4, ..Default::default() };
        assert!(Model::<f64>::new(ModelKind::CBert, &bad, dims()).is_err());
        let bad = ModelConfig { use_kg: true, gnn_out_dim: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
