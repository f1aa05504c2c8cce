//! Message-passing graph layers.
//!
//! A layer computes, for every node `u`, a message `ρ(h_u, h_v, h_uv)` per
//! in-neighbour `v`, aggregates the messages with `ζ`, and updates the node
//! with `φ(m_u, h_u)`. [`gnn_layer`] exposes that contract with pluggable
//! functions; [`GatV2Layer`] is the attention instance used by the models.

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::NnError;
use crate::scalar::Scalar;

/// A directed graph with node features and optional edge features.
/// Edges are `(src, dst)`; messages flow from `src` into `dst`.
#[derive(Clone, Debug)]
pub struct GraphBatch<T> {
    pub node_feats: Tensor<T>,
    pub edges: Vec<(usize, usize)>,
    pub edge_feats: Option<Tensor<T>>,
}

impl<T: Scalar> GraphBatch<T> {
    pub fn new(
        node_feats: Tensor<T>,
        edges: Vec<(usize, usize)>,
        edge_feats: Option<Tensor<T>>,
    ) -> Result<Self, NnError> {
        let batch = Self { node_feats, edges, edge_feats };
        batch.validate()?;
        Ok(batch)
    }

    pub fn n_nodes(&self) -> usize {
        self.node_feats.rows()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let n = self.n_nodes();
        if let Some(&(s, d)) = self.edges.iter().find(|&&(s, d)| s >= n || d >= n) {
            return Err(NnError::EdgeOutOfRange { src: s, dst: d, n_nodes: n });
        }
        if let Some(f) = &self.edge_feats {
            if f.rows() != self.edges.len() {
                return Err(NnError::EdgeFeatureRows { rows: f.rows(), edges: self.edges.len() });
            }
        }
        Ok(())
    }

    /// Edge permutation sorted by `(dst, src, feature bits)`. Processing edges
    /// in this order makes every floating-point reduction independent of the
    /// order the edge list was supplied in.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        let key = |i: usize| -> (usize, usize, Vec<u64>) {
            let (s, d) = self.edges[i];
            let feats = self
                .edge_feats
                .as_ref()
                .map(|f| f.row(i).iter().map(|v| v.as_f64().to_bits()).collect())
                .unwrap_or_default();
            (d, s, feats)
        };
        order.sort_by_cached_key(|&i| key(i));
        order
    }
}

/// ζ: how per-edge messages are combined at the receiving node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Mean,
}

/// Generic message-passing layer.
///
/// `rho(tape, h_u, h_v, h_uv)` receives edge-aligned row blocks (row `i`
/// belongs to edge `i`, `h_u` is the receiving node) and returns one message
/// row per edge. `phi(tape, m, h)` maps node-aligned aggregated messages and
/// current features to the new features. Nodes without neighbours receive a
/// zero message.
pub fn gnn_layer<T, R, P>(
    tape: &mut Tape<T>,
    nodes: Var,
    edges: &[(usize, usize)],
    edge_feats: Option<Var>,
    mut rho: R,
    zeta: Aggregation,
    mut phi: P,
) -> Var
where
    T: Scalar,
    R: FnMut(&mut Tape<T>, Var, Var, Option<Var>) -> Var,
    P: FnMut(&mut Tape<T>, Var, Var) -> Var,
{
    let n = tape.shape(nodes).0;
    let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let h_u = tape.gather_rows(nodes, &dst);
    let h_v = tape.gather_rows(nodes, &src);
    let messages = rho(tape, h_u, h_v, edge_feats);
    let summed = tape.segment_sum(messages, &dst, n);
    let aggregated = match zeta {
        Aggregation::Sum => summed,
        Aggregation::Mean => {
            let mut degree = vec![0usize; n];
            for &d in &dst {
                degree[d] += 1;
            }
            let inv = degree
                .iter()
                .map(|&k| if k == 0 { T::zero() } else { T::one() / T::lit(k as f64) })
                .collect();
            let inv = tape.constant(Tensor::from_vec(n, 1, inv));
            tape.mul_col(summed, inv)
        }
    };
    phi(tape, aggregated, nodes)
}

/// Output nonlinearity σ applied after attention-weighted aggregation.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Elu,
    Relu,
    Identity,
}

/// GATv2 convolution parameters.
///
/// `w` has shape `(2·d_in + d_edge, d_out)`; its row blocks multiply the
/// receiving node, the sending node, and the edge feature respectively.
/// The same sending-node block produces the aggregated values.
#[derive(Clone, Debug)]
pub struct GatV2Layer {
    pub w: ParamId,
    pub a: ParamId,
    pub d_in: usize,
    pub d_edge: usize,
    pub d_out: usize,
    pub leaky_slope: f64,
    pub activation: OutputActivation,
}

/// GATv2 output with the attention coefficients it used.
pub struct GatOutput {
    pub output: Var,
    /// `(edges + self loops, 1)` coefficients, aligned with `edges`.
    pub attention: Option<Var>,
    /// Edge list actually convolved: canonical order, then one self loop per node.
    pub edges: Vec<(usize, usize)>,
}

impl GatV2Layer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        d_edge: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add_glorot(format!("{name}.w"), 2 * d_in + d_edge, d_out, rng);
        let a = store.add_glorot(format!("{name}.a"), 1, d_out, rng);
        Self { w, a, d_in, d_edge, d_out, leaky_slope: 0.2, activation: OutputActivation::Elu }
    }

    /// `sorted` must already be in [`GraphBatch::canonical_order`];
    /// `edge_feats`, when the layer uses them, is aligned with `sorted`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        nodes: Var,
        sorted: &[(usize, usize)],
        edge_feats: Option<Var>,
    ) -> GatOutput {
        let (n, d) = tape.shape(nodes);
        assert_eq!(d, self.d_in, "gatv2: node features ({n}, {d}) vs d_in {}", self.d_in);
        if n == 0 {
            let output = tape.constant(Tensor::zeros(0, self.d_out));
            return GatOutput { output, attention: None, edges: Vec::new() };
        }
        let mut edges = sorted.to_vec();
        edges.extend((0..n).map(|v| (v, v)));
        let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();

        let w = tape.param(store, self.w);
        let w_recv = tape.slice_rows(w, 0, self.d_in);
        let w_send = tape.slice_rows(w, self.d_in, 2 * self.d_in);
        let recv = tape.matmul(nodes, w_recv);
        let send = tape.matmul(nodes, w_send);
        let recv_e = tape.gather_rows(recv, &dst);
        let send_e = tape.gather_rows(send, &src);
        let mut z = tape.add(recv_e, send_e);
        if self.d_edge > 0 {
            if let Some(ef) = edge_feats {
                let (rows, cols) = tape.shape(ef);
                assert_eq!(rows, sorted.len(), "gatv2: {rows} edge feature rows for {} edges", sorted.len());
                assert_eq!(cols, self.d_edge, "gatv2: edge features ({rows}, {cols}) vs d_edge {}", self.d_edge);
                let w_edge = tape.slice_rows(w, 2 * self.d_in, 2 * self.d_in + self.d_edge);
                let proj = tape.matmul(ef, w_edge);
                // Self loops carry a zero edge feature.
                let ident: Vec<usize> = (0..rows).collect();
                let padded = tape.segment_sum(proj, &ident, edges.len());
                z = tape.add(z, padded);
            }
        }
        let act = tape.leaky_relu(z, T::lit(self.leaky_slope));
        let a = tape.param(store, self.a);
        let a_col = tape.transpose(a);
        let scores = tape.matmul(act, a_col);
        let alpha = tape.segment_softmax(scores, &dst, n);
        let weighted = tape.mul_col(send_e, alpha);
        let agg = tape.segment_sum(weighted, &dst, n);
        let output = match self.activation {
            OutputActivation::Elu => tape.elu(agg, T::one()),
            OutputActivation::Relu => tape.relu(agg),
            OutputActivation::Identity => agg,
        };
        GatOutput { output, attention: Some(alpha), edges }
    }

    /// Convenience wrapper: canonicalises the batch and runs the layer.
    pub fn forward_batch<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        batch: &GraphBatch<T>,
    ) -> GatOutput {
        let order = batch.canonical_order();
        let sorted: Vec<_> = order.iter().map(|&i| batch.edges[i]).collect();
        let nodes = tape.constant(batch.node_feats.clone());
        let feats = batch.edge_feats.as_ref().filter(|_| self.d_edge > 0).map(|f| {
            let mut t = Tensor::zeros(order.len(), f.cols());
            for (r, &i) in order.iter().enumerate() {
                t.row_mut(r).copy_from_slice(f.row(i));
            }
            tape.constant(t)
        });
        self.forward(tape, store, nodes, &sorted, feats)
    }
}
