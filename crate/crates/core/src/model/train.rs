use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, Instance};
use crate::error::{Error, Result};
use crate::eval::{score_labels, EvalReport};
use crate::featurize::{ContextualVectors, InputMode};
use crate::params::{Adam, AdamConfig, GradStore};

use super::TowModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Share of the training split held out for model selection.
    pub dev_fraction: f64,
    /// Stop after this many epochs without a dev improvement.
    pub patience: Option<usize>,
    /// Rescale gradients whose global norm exceeds this value.
    pub clip_norm: Option<f64>,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::glove()
    }
}

impl TrainConfig {
    pub fn glove() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 16,
            seed: 1,
            dev_fraction: 0.2,
            patience: None,
            clip_norm: Some(5.0),
            weight_decay: 0.0,
        }
    }

    pub fn contextual() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            epochs: 10,
            batch_size: 6,
            patience: Some(3),
            ..Self::glove()
        }
    }

    pub fn for_mode(mode: InputMode) -> Self {
        match mode {
            InputMode::Glove => Self::glove(),
            InputMode::Contextual => Self::contextual(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::Config("dev_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean token loss over the epoch's training batches; absent for epoch 0.
    pub train_loss: Option<f64>,
    pub dev: EvalReport,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best dev F1.
    pub model: TowModel,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev: EvalReport,
    /// Training and dev instance counts after the split.
    pub num_train: usize,
    pub num_dev: usize,
}

/// Seeded train/dev partition of `n >= 2` instance indices; both sides are
/// non-empty.
pub fn dev_split(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    assert!(n >= 2, "dev_split needs at least two items");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let dev = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let dev_idx = idx[..dev].to_vec();
    let train_idx = idx[dev..].to_vec();
    (train_idx, dev_idx)
}

/// Minibatch Adam on `split` minus a held-out dev slice; keeps the
/// parameters of the epoch with the best dev F1.
pub fn train(
    mut model: TowModel,
    split: &DatasetSplit,
    config: &TrainConfig,
    contextual: Option<&ContextualVectors>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if split.len() < 2 {
        return Err(Error::Precondition(
            "training needs at least two instances (one for dev)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut train_idx, dev_idx) = dev_split(split.len(), config.dev_fraction, &mut rng);
    let dev: Vec<Instance> = dev_idx.iter().map(|&i| split.instances[i].clone()).collect();

    let evaluate = |model: &TowModel| -> Result<EvalReport> {
        let preds = model.predict_all(&dev, contextual)?;
        score_labels(&preds, &dev)
    };

    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            weight_decay: config.weight_decay,
            ..AdamConfig::default()
        },
        &model.store,
    );
    let mut grads = GradStore::new(&model.store);

    let initial = evaluate(&model)?;
    let mut history = vec![EpochLog {
        epoch: 0,
        train_loss: None,
        dev: initial.clone(),
    }];
    let mut best_store = model.store.clone();
    let mut best_dev = initial;
    let mut best_epoch = 0;

    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in train_idx.chunks(config.batch_size) {
            grads.zero();
            let mut batch_loss = 0.0;
            let mut tokens = 0usize;
            for &i in batch {
                let inst = &split.instances[i];
                batch_loss += model.accumulate_gradient(inst, contextual, &mut rng, &mut grads)?;
                tokens += inst.len();
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {batch_loss} at epoch {epoch}; lower the learning rate or check inputs"
                )));
            }
            grads.scale(1.0 / tokens as f64);
            if let Some(max) = config.clip_norm {
                let norm = grads.global_norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            adam.step(&mut model.store, &grads);
            epoch_loss += batch_loss;
            epoch_tokens += tokens;
        }

        let dev_report = evaluate(&model)?;
        log::debug!(
            "epoch {epoch}: loss {:.4} dev F1 {:.2}",
            epoch_loss / epoch_tokens as f64,
            dev_report.f1 * 100.0
        );
        if dev_report.f1 > best_dev.f1 {
            best_dev = dev_report.clone();
            best_epoch = epoch;
            best_store = model.store.clone();
        }
        history.push(EpochLog {
            epoch,
            train_loss: Some(epoch_loss / epoch_tokens as f64),
            dev: dev_report,
        });
        if let Some(p) = config.patience {
            if epoch - best_epoch >= p {
                break;
            }
        }
    }

    model.store = best_store;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_dev,
        num_train: train_idx.len(),
        num_dev: dev_idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dev_split_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, d) = dev_split(10, 0.2, &mut rng);
        assert_eq!((t.len(), d.len()), (8, 2));
        let (t, d) = dev_split(2, 0.2, &mut rng);
        assert_eq!((t.len(), d.len()), (1, 1));
        let mut all: Vec<_> = t.into_iter().chain(d).collect();
        all.sort();
        assert_eq!(all, vec![0, 1]);
    }
}
