//! Finite-difference checks of every tape op, layer and full model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Story;
use crate::encode::{pad, Encoder, EMBED_DIM};
use crate::kg::{embed_graph, extract_graph};
use crate::lexicon::NameLexicon;
use crate::models::{InputDims, Model, ModelConfig, ModelInput, ModelKind, PreparedGraph, Target};
use crate::nn::gradcheck::{compare_gradients, gradient_check, GradCheckOptions, GradCheckReport};
use crate::nn::{DecoderReduce, EncoderLayer, GatV2Layer, LayerNorm, Linear, MultiHeadAttention, ParamId, ParamStore, Tape, Tensor, Var};

/// Maximum relative error accepted by the suite.
pub const TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCase {
    pub name: String,
    pub tolerance: f64,
    pub report: GradCheckReport,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error < self.tolerance
    }
}

fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Projects an arbitrary-shaped output onto a fixed random direction so
/// every output coordinate contributes to the scalar loss.
fn project(tape: &mut Tape<f64>, out: Var, seed: u64) -> Var {
    let (r, c) = tape.shape(out);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = tape.constant(random(r, c, &mut rng));
    let prod = tape.mul(out, dir);
    tape.sum_all(prod)
}

fn check<F>(out: &mut Vec<GradCase>, name: &str, store: &ParamStore<f64>, f: F)
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Var,
{
    let report = gradient_check(store, f, &GradCheckOptions::default());
    out.push(GradCase { name: name.to_string(), tolerance: TOL, report });
}

fn inputs(shapes: &[(usize, usize)], seed: u64) -> (ParamStore<f64>, Vec<ParamId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ids = shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| store.add(format!("x{i}"), random(r, c, &mut rng)))
        .collect();
    (store, ids)
}

fn binary_ops(out: &mut Vec<GradCase>) {
    let (store, ids) = inputs(&[(3, 4), (4, 2), (3, 4), (1, 4), (3, 1)], 1);
    let [a, b, c, row, col] = ids[..] else { unreachable!() };
    check(out, "matmul", &store, |t, s| {
        let (x, y) = (t.param(s, a), t.param(s, b));
        let y = t.matmul(x, y);
        project(t, y, 10)
    });
    check(out, "add/sub/mul", &store, |t, s| {
        let (x, y) = (t.param(s, a), t.param(s, c));
        let p = t.add(x, y);
        let q = t.sub(x, y);
        let y = t.mul(p, q);
        project(t, y, 11)
    });
    check(out, "add_row/mul_row", &store, |t, s| {
        let (x, r) = (t.param(s, a), t.param(s, row));
        let p = t.add_row(x, r);
        let y = t.mul_row(p, r);
        project(t, y, 12)
    });
    check(out, "mul_col", &store, |t, s| {
        let (x, k) = (t.param(s, a), t.param(s, col));
        let y = t.mul_col(x, k);
        project(t, y, 13)
    });
}

fn shape_ops(out: &mut Vec<GradCase>) {
    let (store, ids) = inputs(&[(3, 4), (3, 2), (1, 3)], 2);
    let [a, b, r] = ids[..] else { unreachable!() };
    check(out, "transpose/scale", &store, |t, s| {
        let x = t.param(s, a);
        let xt = t.transpose(x);
        let y = t.scale(xt, -1.7);
        project(t, y, 20)
    });
    check(out, "concat/slice", &store, |t, s| {
        let (x, y) = (t.param(s, a), t.param(s, b));
        let cat = t.concat_cols(&[x, y]);
        let mid = t.slice_cols(cat, 2, 5);
        let rows = t.slice_rows(mid, 1, 3);
        project(t, rows, 21)
    });
    check(out, "broadcast_rows/mean_rows", &store, |t, s| {
        let x = t.param(s, r);
        let rep = t.broadcast_rows(x, 4);
        let sq = t.mul(rep, rep);
        let y = t.mean_rows(sq);
        project(t, y, 22)
    });
    check(out, "gather/segment_sum", &store, |t, s| {
        let x = t.param(s, a);
        let g = t.gather_rows(x, &[2, 0, 2, 1, 1]);
        let y = t.segment_sum(g, &[1, 1, 0, 3, 0], 4);
        project(t, y, 23)
    });
    check(out, "pick", &store, |t, s| {
        let x = t.param(s, a);
        let sq = t.mul(x, x);
        t.pick(sq, 2, 3)
    });
}

fn activations(out: &mut Vec<GradCase>) {
    let (store, ids) = inputs(&[(4, 5)], 3);
    let a = ids[0];
    check(out, "relu", &store, |t, s| {
        let x = t.param(s, a);
        let y = t.relu(x);
        project(t, y, 30)
    });
    check(out, "leaky_relu", &store, |t, s| {
        let x = t.param(s, a);
        let y = t.leaky_relu(x, 0.2);
        project(t, y, 31)
    });
    check(out, "elu", &store, |t, s| {
        let x = t.param(s, a);
        let y = t.elu(x, 1.0);
        project(t, y, 32)
    });
    check(out, "sigmoid", &store, |t, s| {
        let x = t.param(s, a);
        let y = t.sigmoid(x);
        project(t, y, 33)
    });
    check(out, "log", &store, |t, s| {
        let x = t.param(s, a);
        let sq = t.mul(x, x);
        let y = t.log(sq);
        project(t, y, 34)
    });
}

fn normalisations(out: &mut Vec<GradCase>) {
    let (store, ids) = inputs(&[(3, 6), (5, 1)], 4);
    let [a, e] = ids[..] else { unreachable!() };
    check(out, "masked_softmax", &store, |t, s| {
        let x = t.param(s, a);
        let y = t.masked_softmax(x, &[true, false, true, true, false, true]);
        project(t, y, 40)
    });
    check(out, "layer_norm", &store, |t, s| {
        let x = t.param(s, a);
        let y = t.layer_norm(x, 1e-5);
        project(t, y, 41)
    });
    check(out, "segment_softmax", &store, |t, s| {
        let x = t.param(s, e);
        let y = t.segment_softmax(x, &[0, 1, 0, 2, 1], 3);
        project(t, y, 42)
    });
}

fn linear_layer(out: &mut Vec<GradCase>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let lin = Linear::new(&mut store, "lin", 4, 3, &mut rng);
    let x = random(5, 4, &mut rng);
    let report = gradient_check(
        &store,
        |t, s| {
            let xv = t.constant(x.clone());
            let y = lin.forward(t, s, xv);
            project(t, y, 50)
        },
        &GradCheckOptions::default(),
    );
    out.push(GradCase { name: "linear".into(), tolerance: 1e-6, report });
}

fn transformer_blocks(out: &mut Vec<GradCase>) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::new();
    let ln = LayerNorm::new(&mut store, "ln", 8);
    let mha = MultiHeadAttention::new(&mut store, "mha", 8, 2, &mut rng);
    let enc = EncoderLayer::new(&mut store, "enc", 8, 2, 12, &mut rng);
    let dec = DecoderReduce::new(&mut store, "dec", 8, 2, 12, 1, &mut rng);
    let x = random(5, 8, &mut rng);
    let mask = [true, true, true, false, false];
    check(out, "layer_norm affine", &store, |t, s| {
        let xv = t.constant(x.clone());
        let y = ln.forward(t, s, xv);
        project(t, y, 60)
    });
    check(out, "multi_head_attention", &store, |t, s| {
        let xv = t.constant(x.clone());
        let y = mha.forward(t, s, xv, xv, &mask).output;
        project(t, y, 61)
    });
    check(out, "encoder_layer", &store, |t, s| {
        let xv = t.constant(x.clone());
        let y = enc.forward(t, s, xv, &mask);
        let valid = t.slice_rows(y, 0, 3);
        project(t, valid, 62)
    });
    check(out, "decoder_reduce", &store, |t, s| {
        let xv = t.constant(x.clone());
        let y = dec.forward(t, s, xv, &mask);
        project(t, y, 63)
    });
}

fn gat_check(out: &mut Vec<GradCase>, d_edge: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let gat = GatV2Layer::new(&mut store, "gat", 4, d_edge, 3, &mut rng);
    let nodes = store.add("nodes", random(5, 4, &mut rng));
    let edges = vec![(0, 1), (2, 1), (3, 1), (4, 0), (1, 4), (2, 4), (3, 3)];
    let feats = (d_edge > 0).then(|| store.add("edge_feats", random(edges.len(), d_edge, &mut rng)));
    check(out, &format!("gatv2 d_edge={d_edge}"), &store, |t, s| {
        let n = t.param(s, nodes);
        let ef = feats.map(|f| t.param(s, f));
        let y = gat.forward(t, s, n, &edges, ef).output;
        project(t, y, seed + 100)
    });
}

fn full_model(out: &mut Vec<GradCase>, kind: ModelKind, use_kg: bool) {
    let text = "Alice loved Bob. Bob trusted Alice. She gave him the key. He was happy.";
    let story = Story::from_text("g", None, None, text).expect("fixture story");
    let enc = Encoder::Hashed { dim: EMBED_DIM, seed: 0 };
    let padded = pad::<f64>("g", &enc.encode_story(&story).expect("hashed"), 6).expect("fits");
    let kg = embed_graph(&extract_graph(&story, NameLexicon::builtin()), 3, &enc).expect("fits");
    let graph = PreparedGraph::<f64>::new(&kg).expect("valid graph");
    let config = ModelConfig { use_kg, seed: 5, ..Default::default() };
    let model = Model::<f64>::new(kind, &config, InputDims::new(3, 6)).expect("valid config");
    let target = match kind {
        ModelKind::CBert => Target::Index(2),
        ModelKind::UBert => Target::Fraction(0.08),
    };
    let input = ModelInput { encoding: &padded, graph: use_kg.then_some(&graph) };
    let opts = GradCheckOptions { max_coords: Some(400), seed: 3, ..Default::default() };
    let report = gradient_check(&model.store, |t, s| model.arch.loss(t, s, &input, target).expect("shapes agree"), &opts);
    let name = format!("{}{}", kind.name(), if use_kg { "+GAT" } else { "" });
    out.push(GradCase { name, tolerance: TOL, report });
}

/// Every op and layer group (cheap).
pub fn op_cases() -> Vec<GradCase> {
    let mut out = Vec::new();
    binary_ops(&mut out);
    shape_ops(&mut out);
    activations(&mut out);
    normalisations(&mut out);
    linear_layer(&mut out);
    transformer_blocks(&mut out);
    gat_check(&mut out, 0, 7);
    gat_check(&mut out, 6, 8);
    out
}

/// Both models with and without the GATv2 branch.
pub fn model_cases() -> Vec<GradCase> {
    let mut out = Vec::new();
    for kind in [ModelKind::CBert, ModelKind::UBert] {
        for kg in [false, true] {
            full_model(&mut out, kind, kg);
        }
    }
    out
}

/// Negated analytic gradients of a matmul; a working checker reports a
/// large error here.
pub fn corrupted_backward() -> GradCheckReport {
    let (store, ids) = inputs(&[(3, 4), (4, 2)], 9);
    let [a, b] = ids[..] else { unreachable!() };
    let f = |t: &mut Tape<f64>, s: &ParamStore<f64>| {
        let (x, y) = (t.param(s, a), t.param(s, b));
        let m = t.matmul(x, y);
        project(t, m, 90)
    };
    let mut tape = Tape::new();
    let loss = f(&mut tape, &store);
    let flipped: Vec<Tensor<f64>> = tape.backward(loss).dense_params(&store).iter().map(|g| g.map(|v| -v)).collect();
    compare_gradients(&store, f, &flipped, &GradCheckOptions::default())
}
