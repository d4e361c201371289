use crate::graphs::UnifiedGraph;
use crate::rng::SplitMix64;
use crate::Scalar;

use super::{grad, Architecture, Model, MpnnError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MpnnError> {
        if self.epochs == 0 {
            return Err(MpnnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(MpnnError::InvalidConfig(format!(
                "learning rate {} is not a finite non-negative number",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean per-example loss seen during each epoch, before each example's update.
    pub epoch_losses: Vec<f64>,
}

/// Plain per-example SGD starting from `model`.
///
/// Each epoch visits the examples in a fresh permutation drawn from
/// `SplitMix64::derive(seed, 2)`. Fully deterministic for a fixed dataset order,
/// seed and configuration.
pub fn train<T: Scalar>(
    mut model: Model<T>,
    dataset: &[(UnifiedGraph<T>, bool)],
    config: &TrainConfig,
) -> Result<(Model<T>, TrainReport), MpnnError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(MpnnError::EmptyDataset);
    }
    let step = -T::of(config.learning_rate);
    let mut rng = SplitMix64::derive(config.seed, 2);
    let mut report = TrainReport::default();
    for _ in 0..config.epochs {
        let order = rng.permutation(dataset.len());
        let mut total = 0.0;
        for i in order {
            let (graph, label) = &dataset[i];
            let (g, l) = grad(&model, graph, *label)?;
            total += l.as_f64();
            if config.learning_rate != 0.0 {
                model.add_scaled(&g, step);
            }
        }
        report.epoch_losses.push(total / dataset.len() as f64);
    }
    Ok((model, report))
}

/// Initialize from `config.seed` and train.
pub fn fit<T: Scalar>(
    arch: Architecture,
    dataset: &[(UnifiedGraph<T>, bool)],
    config: &TrainConfig,
) -> Result<(Model<T>, TrainReport), MpnnError> {
    train(Model::init(arch, config.seed), dataset, config)
}
