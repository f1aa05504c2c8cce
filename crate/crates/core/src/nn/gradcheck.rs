//! Central finite-difference gradient checking in double precision.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Denominator floor for the relative error. Central-difference round-off is
/// about `1e-16 · |f| / eps ≈ 1e-10 · |f|` at `eps = 1e-6`; with losses of
/// order 1–10 this floor keeps round-off below `1e-4` for gradients that are
/// analytically zero (e.g. attention key biases).
pub const GRAD_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many coordinates (sampled uniformly, at least 200
    /// when the total is larger); `None` checks all of them.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-6, max_coords: None, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Analytic gradients of `loss` with respect to every parameter.
pub fn analytic_gradients<F>(store: &ParamStore<f64>, loss: &F) -> Vec<Tensor<f64>>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Var,
{
    let mut tape = Tape::new();
    let out = loss(&mut tape, store);
    tape.backward(out).dense_params(store)
}

/// Compares tape gradients of `loss` against central differences.
pub fn gradient_check<F>(store: &ParamStore<f64>, loss: F, opts: &GradCheckOptions) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Var,
{
    let analytic = analytic_gradients(store, &loss);
    compare_gradients(store, loss, &analytic, opts)
}

/// Compares caller-supplied gradients against central differences. Used
/// directly by negative controls that corrupt `analytic` on purpose.
pub fn compare_gradients<F>(
    store: &ParamStore<f64>,
    loss: F,
    analytic: &[Tensor<f64>],
    opts: &GradCheckOptions,
) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Var,
{
    let coords: Vec<(ParamId, usize)> =
        store.ids().flat_map(|id| (0..store.get(id).len()).map(move |k| (id, k))).collect();
    let chosen: Vec<(ParamId, usize)> = match opts.max_coords {
        Some(limit) if coords.len() > limit => {
            let take = limit.max(200).min(coords.len());
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut picked: Vec<usize> = sample(&mut rng, coords.len(), take).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| coords[i]).collect()
        }
        _ => coords,
    };

    let eval = |s: &ParamStore<f64>| {
        let mut tape = Tape::new();
        let out = loss(&mut tape, s);
        tape.value(out).get(0, 0)
    };
    let mut work = store.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    for (id, k) in chosen {
        let orig = work.get(id).data()[k];
        work.get_mut(id).data_mut()[k] = orig + opts.eps;
        let plus = eval(&work);
        work.get_mut(id).data_mut()[k] = orig - opts.eps;
        let minus = eval(&work);
        work.get_mut(id).data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * opts.eps);
        let err = relative_error(analytic[id.index()].data()[k], numeric);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((store.name(id).to_string(), k));
        }
    }
    report
}
