//! Fast correctness suites shared by the `selfcheck` command and the
//! acceptance harness: injection invariants, gradients, output
//! distribution and masking, metric and statistics oracles, baselines.

pub mod gradients;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::synth::synthetic_corpus;
use crate::corpus::tokenize;
use crate::encode::{pad, EMBED_DIM};
use crate::experiment::metrics::{expected_guess_f1, expected_guess_mse, f1_continuity, mse_unresolved};
use crate::experiment::stats::{t_test_1sample, t_test_2sample_welch};
use crate::inject::{build_datasets, first_verb, Lexicon};
use crate::kg::KnowledgeGraph;
use crate::models::{InputDims, Model, ModelConfig, ModelInput, ModelKind, PreparedGraph};
use crate::nn::{GatV2Layer, GraphBatch, ParamStore, Tape, Tensor};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Check {
    fn new(name: &str, started: Instant, failures: Vec<String>, summary: String) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            summary
        } else {
            let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
            format!("{} failure(s): {}", failures.len(), shown.join("; "))
        };
        Self { name: name.to_string(), passed, detail, elapsed: started.elapsed() }
    }

    /// `PASS name (detail)` / `FAIL name (detail)`.
    pub fn line(&self) -> String {
        format!(
            "{} {} ({}; {:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Continuity samples differ from their source in exactly the labelled
/// sentence, be-verb picks gain a "not", and unresolved samples are strict
/// prefixes with `r = m / n` exactly.
pub fn injection_suite(n_stories: usize, seed: u64, limit: Duration) -> Check {
    let t0 = Instant::now();
    let corpus = synthetic_corpus(n_stories, seed);
    let lexicon = Lexicon::builtin();
    let mut fail = Vec::new();
    let d = match build_datasets(&corpus, lexicon, seed) {
        Ok(d) => d,
        Err(e) => return Check::new("injection", t0, vec![e.to_string()], String::new()),
    };
    let sources: HashMap<&str, Vec<String>> = corpus.iter().map(|s| (s.id.as_str(), s.sentence_texts())).collect();
    let mut be_picks = 0;
    for s in &d.continuity {
        let src = &sources[s.story.id.as_str()];
        let now = s.story.sentence_texts();
        if now.len() != src.len() {
            fail.push(format!("{}: sentence count changed", s.story.id));
            continue;
        }
        let diffs: Vec<usize> = (0..src.len()).filter(|&i| now[i] != src[i]).collect();
        if diffs != [s.label_index] {
            fail.push(format!("{}: differs at {diffs:?}, label {}", s.story.id, s.label_index));
        }
        if src[s.label_index] != s.original_sentence {
            fail.push(format!("{}: original sentence mismatch", s.story.id));
        }
        let orig = &corpus.iter().find(|c| c.id == s.story.id).expect("source").sentences[s.label_index];
        if let Some(v) = first_verb(orig) {
            let is_be = orig.lemmas[v] == "be" || lexicon.is_be_form(&orig.tokens[v]);
            if is_be || lexicon.antonyms(&orig.lemmas[v]).is_empty() {
                be_picks += usize::from(is_be);
                let count = |t: &str| tokenize(t).iter().filter(|w| w.eq_ignore_ascii_case("not")).count();
                if count(&now[s.label_index]) != count(&src[s.label_index]) + 1 {
                    fail.push(format!("{}: verb {:?} picked without an inserted \"not\"", s.story.id, orig.tokens[v]));
                }
            }
        }
    }
    for s in &d.unresolved {
        let src = &sources[s.story.id.as_str()];
        let now = s.story.sentence_texts();
        if s.label_fraction != s.removed_count as f64 / s.source_length as f64 {
            fail.push(format!("{}: r != m/n", s.story.id));
        }
        if s.source_length != src.len() || now.len() + s.removed_count != src.len() || s.removed_count == 0 {
            fail.push(format!("{}: lengths inconsistent", s.story.id));
        }
        if now[..] != src[..now.len()] {
            fail.push(format!("{}: not a prefix", s.story.id));
        }
    }
    if t0.elapsed() > limit {
        fail.push(format!("took {:.1}s, limit {:.0}s", t0.elapsed().as_secs_f64(), limit.as_secs_f64()));
    }
    let summary = format!(
        "{} continuity ({} be-verb), {} unresolved samples, {} skipped",
        d.continuity.len(),
        be_picks,
        d.unresolved.len(),
        d.skipped.len()
    );
    Check::new("injection", t0, fail, summary)
}

/// Every op, layer and model against central differences, plus the
/// corrupted-backward negative control.
pub fn gradient_suite(limit: Duration) -> Check {
    let t0 = Instant::now();
    let mut cases = gradients::op_cases();
    cases.extend(gradients::model_cases());
    let mut fail: Vec<String> = cases
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{}: {:.3e}", c.name, c.report.max_rel_error))
        .collect();
    let worst = cases.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    let control = gradients::corrupted_backward();
    if control.max_rel_error <= 1e-1 {
        fail.push(format!("negative control not detected ({:.3e})", control.max_rel_error));
    }
    if t0.elapsed() > limit {
        fail.push(format!("took {:.1}s, limit {:.0}s", t0.elapsed().as_secs_f64(), limit.as_secs_f64()));
    }
    let summary = format!("{} cases, worst relative error {worst:.2e}, control {:.2e}", cases.len(), control.max_rel_error);
    Check::new("gradients", t0, fail, summary)
}

/// C-BERT distributions over random padded inputs, pad-content
/// invariance, and even GATv2 attention over identical neighbours.
pub fn distribution_suite(trials: usize, seed: u64) -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fail = Vec::new();
    let n_max = 8;
    let dims = InputDims::new(3, n_max);
    for trial in 0..trials {
        let n = rng.gen_range(1..=n_max);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..EMBED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let clean = pad::<f64>("d", &Tensor::from_rows(&rows), n_max).expect("fits");
        let mut dirty = clean.clone();
        for r in n..n_max {
            for x in dirty.matrix.row_mut(r) {
                *x = rng.gen_range(-100.0..100.0);
            }
        }
        let mut nodes = Tensor::zeros(3, 3);
        (0..3).for_each(|i| nodes.set(i, i, 1.0));
        let kg = KnowledgeGraph {
            node_embeddings: nodes,
            edges: vec![(0, 1), (1, 2)],
            edge_embeddings: Tensor::from_vec(2, EMBED_DIM, (0..2 * EMBED_DIM).map(|_| rng.gen_range(-0.1..0.1)).collect()),
        };
        let graph = PreparedGraph::new(&kg).expect("valid graph");
        for use_kg in [false, true] {
            let config = ModelConfig { use_kg, seed: trial as u64, ..Default::default() };
            let m = Model::<f64>::new(ModelKind::CBert, &config, dims).expect("valid config");
            let g = use_kg.then_some(&graph);
            let p = m.predict_probs(&ModelInput { encoding: &clean, graph: g }).expect("shapes");
            let q = m.predict_probs(&ModelInput { encoding: &dirty, graph: g }).expect("shapes");
            let valid: f64 = p[..n].iter().sum();
            let pad_mass: f64 = p[n..].iter().sum();
            if (valid - 1.0).abs() > 1e-6 || pad_mass >= 1e-12 {
                fail.push(format!("trial {trial}: valid mass {valid}, pad mass {pad_mass:e}"));
            }
            if p.iter().map(|x| x.to_bits()).ne(q.iter().map(|x| x.to_bits())) {
                fail.push(format!("trial {trial}: C-BERT output depends on pad rows"));
            }
            let u = Model::<f64>::new(ModelKind::UBert, &config, dims).expect("valid config");
            let a = u.predict_fraction(&ModelInput { encoding: &clean, graph: g }).expect("shapes");
            let b = u.predict_fraction(&ModelInput { encoding: &dirty, graph: g }).expect("shapes");
            if a.to_bits() != b.to_bits() {
                fail.push(format!("trial {trial}: U-BERT output depends on pad rows"));
            }
        }
    }
    let mut store = ParamStore::<f64>::new();
    let layer = GatV2Layer::new(&mut store, "gat", 3, 0, 4, &mut rng);
    let row = vec![0.3, -0.7, 1.1];
    let batch = GraphBatch::new(Tensor::from_rows(&[row.clone(), row]), vec![(1, 0)], None).expect("valid graph");
    let mut tape = Tape::new();
    let out = layer.forward_batch(&mut tape, &store, &batch);
    let alpha = tape.value(out.attention.expect("nonempty graph")).clone();
    let into0: Vec<f64> = out.edges.iter().enumerate().filter(|(_, e)| e.1 == 0).map(|(i, _)| alpha.get(i, 0)).collect();
    if into0.len() != 2 || into0.iter().any(|a| (a - 0.5).abs() > 1e-12) {
        fail.push(format!("identical neighbours got attention {into0:?}"));
    }
    Check::new("distribution/masking", t0, fail, format!("{trials} random padded inputs, both models, with and without KG"))
}

fn brute_f1(pred: &[usize], labels: &[usize], lengths: &[usize]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for ((&p, &l), &n) in pred.iter().zip(labels).zip(lengths) {
        for s in 0..n {
            match (s == p, s == l) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) }
}

/// F1 and MSE against a per-sentence confusion matrix and a plain loop;
/// t-test fixtures and degenerate cases.
pub fn metric_suite(instances: usize, seed: u64) -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fail = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let k = rng.gen_range(1..40);
        let lengths: Vec<usize> = (0..k).map(|_| rng.gen_range(1..30)).collect();
        let labels: Vec<usize> = lengths.iter().map(|&n| rng.gen_range(0..n)).collect();
        let preds: Vec<usize> =
            lengths.iter().zip(&labels).map(|(&n, &l)| if rng.gen_bool(0.4) { l } else { rng.gen_range(0..n) }).collect();
        let f1 = f1_continuity(&preds, &labels).expect("same length");
        let e = (f1 - brute_f1(&preds, &labels, &lengths)).abs();
        worst = worst.max(e);
        if e > 1e-12 {
            fail.push(format!("F1 instance {i}: error {e:e}"));
        }
        let yr: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..0.2)).collect();
        let pr: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut acc = 0.0;
        for j in 0..k {
            acc += (pr[j] - yr[j]) * (pr[j] - yr[j]);
        }
        let e = (mse_unresolved(&pr, &yr).expect("same length") - acc / k as f64).abs();
        worst = worst.max(e);
        if e > 1e-12 {
            fail.push(format!("MSE instance {i}: error {e:e}"));
        }
    }
    match t_test_1sample(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.0) {
        Ok(t) if (t.t - 4.2426).abs() < 1e-3 && (t.p - 0.0132).abs() < 1e-3 && t.df == 4.0 => {}
        other => fail.push(format!("[1..5] vs 0 gave {other:?}")),
    }
    match t_test_1sample(&[0.3; 5], 0.3) {
        Ok(t) if t.t == 0.0 && t.p == 1.0 => {}
        other => fail.push(format!("all-equal 1-sample gave {other:?}")),
    }
    match t_test_2sample_welch(&[0.2; 4], &[0.2; 4]) {
        Ok(t) if t.t == 0.0 && t.p == 1.0 => {}
        other => fail.push(format!("all-equal Welch gave {other:?}")),
    }
    let a = [0.18, 0.21, 0.19, 0.2, 0.17];
    match t_test_2sample_welch(&a, &a) {
        Ok(t) if t.t == 0.0 && t.p == 1.0 => {}
        other => fail.push(format!("identical Welch groups gave {other:?}")),
    }
    Check::new("metric/statistics oracles", t0, fail, format!("{instances} random instances, worst error {worst:.1e}"))
}

/// Exact expected-guess values on the hand fixtures.
pub fn baseline_suite() -> Check {
    let t0 = Instant::now();
    let mut fail = Vec::new();
    let f1 = expected_guess_f1(&[2, 4]).expect("nonempty");
    if f1 != 0.375 {
        fail.push(format!("lengths {{2,4}} gave F1 {f1:?}"));
    }
    let mse = expected_guess_mse(&[0.0, 0.1]).expect("nonempty");
    if mse != 2.5e-3 {
        fail.push(format!("labels {{0, 0.1}} gave MSE {mse:?}"));
    }
    Check::new("baseline oracles", t0, fail, format!("F1 {f1}, MSE {mse}"))
}

/// The suites run by the `selfcheck` command.
pub fn run_all() -> Vec<Check> {
    vec![
        injection_suite(200, 0, Duration::from_secs(30)),
        gradient_suite(Duration::from_secs(120)),
        distribution_suite(25, 0),
        metric_suite(1000, 0),
        baseline_suite(),
    ]
}
