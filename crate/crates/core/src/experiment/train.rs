//! Mini-batch Adam training of C-BERT / U-BERT.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::StoryEncoding;
use crate::error::TrainError;
use crate::models::{InputDims, Model, ModelConfig, ModelInput, ModelKind, PreparedGraph, Target};
use crate::nn::{Adam, Tape, Tensor};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 8, learning_rate: 1e-3 }
    }
}

/// One training or evaluation example.
#[derive(Clone, Debug)]
pub struct PreparedSample<T> {
    pub encoding: StoryEncoding<T>,
    pub graph: Option<PreparedGraph<T>>,
    pub target: Target,
}

impl<T> PreparedSample<T> {
    pub fn input(&self) -> ModelInput<'_, T> {
        ModelInput { encoding: &self.encoding, graph: self.graph.as_ref() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean training loss per epoch, measured during the epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean loss of `model` over `samples` without updating it.
pub fn mean_loss<T: Scalar>(model: &Model<T>, samples: &[PreparedSample<T>]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for s in samples {
        let mut tape = Tape::new();
        let l = model.arch.loss(&mut tape, &model.store, &s.input(), s.target)?;
        total += tape.value(l).get(0, 0).as_f64();
    }
    Ok(total / samples.len() as f64)
}

/// Trains a fresh model initialized from `seed`. Samples are visited in a
/// seeded shuffle each epoch; per-sample gradients are summed in visit order
/// and averaged per batch, so runs are bit-reproducible.
pub fn train<T: Scalar>(
    kind: ModelKind,
    config: &ModelConfig,
    dims: InputDims,
    samples: &[PreparedSample<T>],
    opts: &TrainOptions,
    seed: u64,
) -> Result<(Model<T>, TrainLog), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if opts.batch_size == 0 || !(opts.learning_rate >= 0.0) {
        return Err(TrainError::Options(format!(
            "batch_size {} and learning_rate {} must be positive",
            opts.batch_size, opts.learning_rate
        )));
    }
    let config = ModelConfig { seed, ..config.clone() };
    let mut model = Model::<T>::new(kind, &config, dims)?;
    let mut adam = Adam::new(&model.store, opts.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let mut acc: Option<Vec<Tensor<T>>> = None;
            for &i in batch {
                let s = &samples[i];
                let mut tape = Tape::new();
                let l = model.arch.loss(&mut tape, &model.store, &s.input(), s.target)?;
                let value = tape.value(l).get(0, 0).as_f64();
                if !value.is_finite() {
                    return Err(TrainError::Diverged { epoch });
                }
                epoch_loss += value;
                let grads = tape.backward(l).dense_params(&model.store);
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(a) => a.iter_mut().zip(&grads).for_each(|(a, g)| a.add_assign(g)),
                }
            }
            let scale = T::one() / T::lit(batch.len() as f64);
            let grads: Vec<Tensor<T>> = acc.unwrap().into_iter().map(|g| g.map(|x| x * scale)).collect();
            adam.step(&mut model.store, &grads);
        }
        let mean = epoch_loss / samples.len() as f64;
        debug!("{} seed {seed} epoch {epoch}: loss {mean:.6}", kind.name());
        log.epoch_losses.push(mean);
    }
    if model.store.iter().any(|(_, t)| !t.all_finite()) {
        return Err(TrainError::Diverged { epoch: opts.epochs.saturating_sub(1) });
    }
    Ok((model, log))
}

pub fn predict_indices<T: Scalar>(model: &Model<T>, samples: &[PreparedSample<T>]) -> Result<Vec<usize>, TrainError> {
    samples.iter().map(|s| Ok(model.predict_index(&s.input())?)).collect()
}

pub fn predict_fractions<T: Scalar>(model: &Model<T>, samples: &[PreparedSample<T>]) -> Result<Vec<f64>, TrainError> {
    samples.iter().map(|s| Ok(model.predict_fraction(&s.input())?.as_f64())).collect()
}
