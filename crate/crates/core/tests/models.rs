use plothole::encode::{pad, EMBED_DIM};
use plothole::kg::KnowledgeGraph;
use plothole::models::{count_params, InputDims, Model, ModelConfig, ModelInput, ModelKind, PreparedGraph};
use plothole::nn::Tensor;
use proptest::prelude::*;

fn toy() -> ModelConfig {
    ModelConfig { d_emb: 4, n_enc_layers: 1, n_heads: 1, ffn_hidden: 8, gnn_out_dim: 2, ..Default::default() }
}

#[test]
fn toy_parameter_counts_match_hand_count() {
    let dims = InputDims::new(3, 10);
    // input 384*4+4; encoder layer: 2 norms (8+8), q/k/v/o (4*20), ffn (4*8+8)+(8*4+4);
    // output norm 8; head (4*8+8)+(8+1).
    let cbert = 1540 + (16 + 80 + 76) + 8 + 49;
    assert_eq!(count_params(ModelKind::CBert, &toy(), dims).unwrap(), cbert);
    // Decoder: query 4 + one block (172) + output norm 8.
    assert_eq!(count_params(ModelKind::UBert, &toy(), dims).unwrap(), cbert + 4 + 172 + 8);
    // GATv2: W (2*3+384)x2 and a (1x2); head inner widens from 4 to 6 inputs.
    let kg = ModelConfig { use_kg: true, ..toy() };
    assert_eq!(count_params(ModelKind::CBert, &kg, dims).unwrap(), cbert + 780 + 2 + 16);
}

fn graph(n_nodes: usize, edges: Vec<(usize, usize)>, seed: u64) -> KnowledgeGraph {
    let mut nodes = Tensor::zeros(n_nodes, 4);
    for i in 0..n_nodes {
        nodes.set(i, i, 1.0);
    }
    let feats = (0..edges.len() * EMBED_DIM).map(|i| (((i as u64 + seed) * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
    KnowledgeGraph { node_embeddings: nodes, edge_embeddings: Tensor::from_vec(edges.len(), EMBED_DIM, feats), edges }
}

fn random_encoding(rows: &[Vec<f64>], n_max: usize) -> plothole::encode::StoryEncoding<f64> {
    let t = Tensor::from_rows(rows);
    pad("p", &t, n_max).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_ignore_pad_rows_and_edge_order(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, EMBED_DIM), 1..6),
        garbage in prop::collection::vec(-50.0f64..50.0, EMBED_DIM * 6),
        rotate in 0usize..4,
        seed in 0u64..1000,
    ) {
        let n_max = 6;
        let dims = InputDims::new(4, n_max);
        let clean = random_encoding(&rows, n_max);
        let mut dirty = clean.clone();
        for r in clean.valid_len..n_max {
            dirty.matrix.row_mut(r).copy_from_slice(&garbage[r * EMBED_DIM..(r + 1) * EMBED_DIM]);
        }
        let edges = vec![(0, 1), (1, 2), (2, 0), (3, 1)];
        let mut shuffled = graph(4, edges.clone(), seed);
        let base = PreparedGraph::new(&graph(4, edges, seed)).unwrap();
        shuffled.edges.rotate_left(rotate);
        let feats = shuffled.edge_embeddings.clone();
        for r in 0..4 {
            shuffled.edge_embeddings.row_mut(r).copy_from_slice(feats.row((r + rotate) % 4));
        }
        let shuffled = PreparedGraph::new(&shuffled).unwrap();
        let config = ModelConfig { use_kg: true, seed, ..Default::default() };

        let c = Model::<f64>::new(ModelKind::CBert, &config, dims).unwrap();
        let p = c.predict_probs(&ModelInput { encoding: &clean, graph: Some(&base) }).unwrap();
        let valid: f64 = p[..clean.valid_len].iter().sum();
        prop_assert!((valid - 1.0).abs() < 1e-6);
        prop_assert!(p[clean.valid_len..].iter().sum::<f64>() < 1e-12);
        let q = c.predict_probs(&ModelInput { encoding: &dirty, graph: Some(&shuffled) }).unwrap();
        prop_assert_eq!(p.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), q.iter().map(|x| x.to_bits()).collect::<Vec<_>>());

        let u = Model::<f64>::new(ModelKind::UBert, &config, dims).unwrap();
        let a = u.predict_fraction(&ModelInput { encoding: &clean, graph: Some(&base) }).unwrap();
        let b = u.predict_fraction(&ModelInput { encoding: &dirty, graph: Some(&shuffled) }).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a > 0.0 && a < 1.0);
    }
}

#[test]
fn single_precision_models_run() {
    let dims = InputDims::new(2, 4);
    let m = Model::<f32>::new(ModelKind::CBert, &ModelConfig::default(), dims).unwrap();
    let enc = pad::<f32>("s", &Tensor::filled(3, EMBED_DIM, 0.05), 4).unwrap();
    let p = m.predict_probs(&ModelInput { encoding: &enc, graph: None }).unwrap();
    assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-5);
}
