use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::scalar::Scalar;

const LN_EPS: f64 = 1e-5;

/// Affine map `x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add_glorot(format!("{name}.w"), d_in, d_out, rng);
        let b = store.add_zeros(format!("{name}.b"), 1, d_out);
        Self { w, b }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Var {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let xw = tape.matmul(x, w);
        tape.add_row(xw, b)
    }
}

/// Layer normalisation with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, d: usize) -> Self {
        let gain = store.add_filled(format!("{name}.gain"), 1, d, T::one());
        let bias = store.add_zeros(format!("{name}.bias"), 1, d);
        Self { gain, bias }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Var {
        let norm = tape.layer_norm(x, T::lit(LN_EPS));
        let g = tape.param(store, self.gain);
        let b = tape.param(store, self.bias);
        let scaled = tape.mul_row(norm, g);
        tape.add_row(scaled, b)
    }
}

/// Two-layer ReLU feed-forward block.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d: usize,
        hidden: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            inner: Linear::new(store, &format!("{name}.inner"), d, hidden, rng),
            outer: Linear::new(store, &format!("{name}.outer"), hidden, d_out, rng),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Var {
        let h = self.inner.forward(tape, store, x);
        let h = tape.relu(h);
        self.outer.forward(tape, store, h)
    }
}

/// Scaled dot-product attention split across `heads` column blocks.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub heads: usize,
    pub d_model: usize,
}

/// Attention output plus the per-head weight matrices.
pub struct Attended {
    pub output: Var,
    pub weights: Vec<Var>,
}

impl MultiHeadAttention {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(heads > 0 && d_model % heads == 0, "d_model {d_model} not divisible by {heads} heads");
        Self {
            query: Linear::new(store, &format!("{name}.q"), d_model, d_model, rng),
            key: Linear::new(store, &format!("{name}.k"), d_model, d_model, rng),
            value: Linear::new(store, &format!("{name}.v"), d_model, d_model, rng),
            out: Linear::new(store, &format!("{name}.o"), d_model, d_model, rng),
            heads,
            d_model,
        }
    }

    /// `queries` is `(q, d)`, `memory` is `(k, d)`; `key_mask[j]` marks
    /// memory rows that may be attended to.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        queries: Var,
        memory: Var,
        key_mask: &[bool],
    ) -> Attended {
        assert!(key_mask.iter().any(|&m| m), "attention over zero valid positions");
        let q = self.query.forward(tape, store, queries);
        let k = self.key.forward(tape, store, memory);
        let v = self.value.forward(tape, store, memory);
        let dh = self.d_model / self.heads;
        let scale = T::one() / T::lit(dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (s, e) = (h * dh, (h + 1) * dh);
            let qh = tape.slice_cols(q, s, e);
            let kh = tape.slice_cols(k, s, e);
            let vh = tape.slice_cols(v, s, e);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let scores = tape.scale(scores, scale);
            let attn = tape.masked_softmax(scores, key_mask);
            outs.push(tape.matmul(attn, vh));
            weights.push(attn);
        }
        let joined = if outs.len() == 1 { outs[0] } else { tape.concat_cols(&outs) };
        let output = self.out.forward(tape, store, joined);
        Attended { output, weights }
    }
}

/// Pre-norm transformer encoder layer: self-attention then feed-forward,
/// each wrapped in a residual connection.
#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub norm_attn: LayerNorm,
    pub attn: MultiHeadAttention,
    pub norm_ff: LayerNorm,
    pub ff: FeedForward,
}

impl EncoderLayer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        ffn_hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            norm_attn: LayerNorm::new(store, &format!("{name}.ln_attn"), d_model),
            attn: MultiHeadAttention::new(store, &format!("{name}.attn"), d_model, heads, rng),
            norm_ff: LayerNorm::new(store, &format!("{name}.ln_ff"), d_model),
            ff: FeedForward::new(store, &format!("{name}.ff"), d_model, ffn_hidden, d_model, rng),
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        seq: Var,
        mask: &[bool],
    ) -> Var {
        let normed = self.norm_attn.forward(tape, store, seq);
        let attended = self.attn.forward(tape, store, normed, normed, mask).output;
        let h = tape.add(seq, attended);
        let normed = self.norm_ff.forward(tape, store, h);
        let ff = self.ff.forward(tape, store, normed);
        tape.add(h, ff)
    }
}

/// One cross-attention decoder block applied to a single query row.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub norm_query: LayerNorm,
    pub cross: MultiHeadAttention,
    pub norm_ff: LayerNorm,
    pub ff: FeedForward,
}

/// Reduces a masked sequence to one row: a learned query vector
/// cross-attends over the sequence through a stack of decoder blocks.
#[derive(Clone, Debug)]
pub struct DecoderReduce {
    pub query: ParamId,
    pub blocks: Vec<DecoderBlock>,
    pub norm_out: LayerNorm,
}

impl DecoderReduce {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        ffn_hidden: usize,
        layers: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let query = store.add_glorot(format!("{name}.query"), 1, d_model, rng);
        let blocks = (0..layers)
            .map(|i| {
                let n = format!("{name}.block{i}");
                DecoderBlock {
                    norm_query: LayerNorm::new(store, &format!("{n}.ln_q"), d_model),
                    cross: MultiHeadAttention::new(store, &format!("{n}.cross"), d_model, heads, rng),
                    norm_ff: LayerNorm::new(store, &format!("{n}.ln_ff"), d_model),
                    ff: FeedForward::new(store, &format!("{n}.ff"), d_model, ffn_hidden, d_model, rng),
                }
            })
            .collect();
        let norm_out = LayerNorm::new(store, &format!("{name}.ln_out"), d_model);
        Self { query, blocks, norm_out }
    }

    /// `(N, d) -> (1, d)`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        memory: Var,
        mask: &[bool],
    ) -> Var {
        assert!(mask.iter().any(|&m| m), "decoder_reduce: valid_len = 0");
        let mut q = tape.param(store, self.query);
        for block in &self.blocks {
            let normed = block.norm_query.forward(tape, store, q);
            let attended = block.cross.forward(tape, store, normed, memory, mask).output;
            q = tape.add(q, attended);
            let normed = block.norm_ff.forward(tape, store, q);
            let ff = block.ff.forward(tape, store, normed);
            q = tape.add(q, ff);
        }
        self.norm_out.forward(tape, store, q)
    }
}

/// Sinusoidal position table of shape `(n, d)`.
pub fn sinusoidal_positions<T: Scalar>(n: usize, d: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(n, d);
    for pos in 0..n {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
            let v = if i % 2 == 0 { angle.sin() } else { angle.cos() };
            out.set(pos, i, T::lit(v));
        }
    }
    out
}

/// `mask[i] = i < valid_len`.
pub fn length_mask(valid_len: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| i < valid_len).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor<f64> {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn attention_rows_are_distributions_over_valid_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let mha = MultiHeadAttention::new(&mut store, "mha", 8, 2, &mut rng);
        let mut tape = Tape::new();
        let x = tape.constant(random(5, 8, &mut rng));
        let mask = length_mask(3, 5);
        let att = mha.forward(&mut tape, &store, x, x, &mask);
        for w in att.weights {
            let w = tape.value(w);
            for r in 0..w.rows() {
                let row = w.row(r);
                let total: f64 = row[..3].iter().sum();
                assert!((total - 1.0).abs() < 1e-6);
                assert!(row[3..].iter().all(|&p| p < 1e-12));
            }
        }
    }

    #[test]
    fn decoder_reduce_yields_one_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::<f64>::new();
        let dec = DecoderReduce::new(&mut store, "dec", 8, 4, 16, 1, &mut rng);
        let mut tape = Tape::new();
        let x = tape.constant(random(6, 8, &mut rng));
        let out = dec.forward(&mut tape, &store, x, &length_mask(4, 6));
        assert_eq!(tape.shape(out), (1, 8));
    }

    #[test]
    fn encoder_ignores_padded_row_content() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::<f64>::new();
        let layer = EncoderLayer::new(&mut store, "enc", 8, 2, 16, &mut rng);
        let base = random(6, 8, &mut rng);
        let mut garbage = base.clone();
        for r in 4..6 {
            for v in garbage.row_mut(r) {
                *v = rng.gen_range(-50.0..50.0);
            }
        }
        let mask = length_mask(4, 6);
        let run = |input: Tensor<f64>| {
            let mut tape = Tape::new();
            let x = tape.constant(input);
            let out = layer.forward(&mut tape, &store, x, &mask);
            tape.value(out).data()[..4 * 8].to_vec()
        };
        assert_eq!(run(base), run(garbage));
    }

    #[test]
    fn positions_start_with_sin_cos() {
        let pe = sinusoidal_positions::<f64>(2, 4);
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.get(1, 0) - 1f64.sin()).abs() < 1e-15);
    }
}
