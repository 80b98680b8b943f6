use std::fmt::Write as _;

use masi_core::{ClusterSample, DatasetSplits};
use masi_numerics::AdamState;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::network::Model;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// One-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs.iter().min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
    }

    pub fn min_train_loss(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.train_loss).min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
        }
        s
    }
}

/// Sample-weighted mean teacher-forced loss over `samples` in batches.
pub fn mean_loss(model: &Model, samples: &[ClusterSample]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in samples.chunks(model.config().batch) {
        let refs: Vec<&ClusterSample> = chunk.iter().collect();
        total += model.loss(&refs)? * chunk.len() as f64;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Trains with Adam on shuffled mini-batches and returns the weights of the
/// epoch with the lowest validation loss. Without a validation split the
/// training loss decides.
pub fn fit(splits: &DatasetSplits, config: &ModelConfig) -> Result<(Model, History)> {
    fit_with(splits, config, |_| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with(
    splits: &DatasetSplits,
    config: &ModelConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Model, History)> {
    if splits.framework != config.framework {
        return Err(ModelError::Compatibility(format!(
            "dataset is {} but the model is {}",
            splits.framework.name(),
            config.framework.name()
        )));
    }
    fit_samples(&splits.train, &splits.validation, config, &mut on_epoch)
}

pub fn fit_samples(
    train: &[ClusterSample],
    validation: &[ClusterSample],
    config: &ModelConfig,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<(Model, History)> {
    if train.is_empty() {
        return Err(ModelError::usage("training split is empty"));
    }
    let mut model = Model::new(config.clone())?;
    for s in train.iter().chain(validation) {
        model.check_sample(s)?;
    }
    let mut adam = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, masi_numerics::ParamStore)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch) {
            let batch: Vec<&ClusterSample> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, mut grads) = model.loss_and_gradients(&batch)?;
            grads.clip_global_norm(config.clip_norm);
            adam.step(model.params_mut(), &grads, config.lr)?;
            total += loss * batch.len() as f64;
        }
        let train_loss = total / train.len() as f64;
        let val_loss = if validation.is_empty() { train_loss } else { mean_loss(&model, validation)? };
        let stats = EpochStats {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&stats);
        history.epochs.push(stats);
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.params().clone()));
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok((model, history))
}
