use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{Architecture, FlowModel, TrainItem};
use super::optim::{AdamW, AdamWConfig};
use super::synth::SynthItem;
use super::Latent;
use crate::error::{Error, Result};
use crate::stats;

/// Steps averaged for the running-mean loss at either end of a run.
pub const RUNNING_MEAN_WINDOW: usize = 100;
const INIT_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: AdamWConfig,
    /// Probability of replacing a training condition by the null condition.
    pub condition_dropout: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            optimizer: AdamWConfig::default(),
            condition_dropout: 0.10,
            steps: 2000,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        // 1.0 is allowed: it trains a purely unconditional model
        if !(0.0..=1.0).contains(&self.condition_dropout) {
            return Err(Error::InvalidConfig(format!(
                "condition dropout must lie in [0, 1], got {}",
                self.condition_dropout
            )));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("steps and batch size must be positive".into()));
        }
        self.optimizer.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FlowModel,
    /// Batch loss at every step.
    pub loss_trace: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_running_mean(&self) -> f64 {
        let n = RUNNING_MEAN_WINDOW.min(self.loss_trace.len());
        stats::mean(&self.loss_trace[..n])
    }

    pub fn final_running_mean(&self) -> f64 {
        let n = RUNNING_MEAN_WINDOW.min(self.loss_trace.len());
        stats::mean(&self.loss_trace[self.loss_trace.len() - n..])
    }
}

/// Minibatch AdamW on the flow-matching loss. Each draw picks a dataset item,
/// `t ~ U[0, 1)` and fresh noise; with probability `condition_dropout` the
/// item's curve and class are replaced by the null condition. Fully
/// determined by `cfg.seed`.
pub fn train(cfg: &TrainConfig, arch: Architecture, dataset: &[SynthItem]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidData("training dataset is empty".into()));
    }
    if let Some(bad) = dataset
        .iter()
        .find(|it| it.x0.shape() != (arch.channels, arch.length) || it.curve.len() != arch.length)
    {
        return Err(Error::Shape(format!(
            "dataset item of shape {:?} with curve length {} does not fit architecture {}x{}",
            bad.x0.shape(),
            bad.curve.len(),
            arch.channels,
            arch.length
        )));
    }
    if let Some(bad) = dataset.iter().find(|it| it.class_id >= arch.class_count) {
        return Err(Error::InvalidData(format!("class id {} out of range", bad.class_id)));
    }

    let mut model = FlowModel::new(arch, cfg.seed ^ INIT_STREAM_SALT)?;
    let mut opt = AdamW::new(model.param_count(), cfg.learning_rate, cfg.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut loss_trace = Vec::with_capacity(cfg.steps);
    let (d, l) = (arch.channels, arch.length);

    for step in 0..cfg.steps {
        let mut draws = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let idx = rng.random_range(0..dataset.len());
            let t: f64 = rng.random();
            let eps: Vec<f64> = (0..d * l).map(|_| StandardNormal.sample(&mut rng)).collect();
            let dropped = rng.random::<f64>() < cfg.condition_dropout;
            draws.push((idx, t, Latent::new(d, l, eps)?, dropped));
        }
        let batch: Vec<TrainItem> = draws
            .iter()
            .map(|(idx, t, eps, dropped)| {
                let item = &dataset[*idx];
                TrainItem {
                    x0: &item.x0,
                    eps,
                    t: *t,
                    curve: (!dropped).then(|| item.curve.values()),
                    class_id: (!dropped).then_some(item.class_id),
                }
            })
            .collect();
        let out = match model.loss_and_grad(&batch) {
            Ok(out) => out,
            Err(Error::Numerical(_)) => return Err(Error::TrainingDiverged { step }),
            Err(e) => return Err(e),
        };
        if !out.loss.is_finite() || out.grads.0.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { step });
        }
        opt.step(model.params_mut(), &out.grads.0);
        loss_trace.push(out.loss);
        if step % 250 == 0 {
            debug!("step {step}: loss {:.4}", out.loss);
        }
    }
    let outcome = TrainOutcome { model, loss_trace };
    info!(
        "trained {} steps: running loss {:.3} -> {:.3}",
        cfg.steps,
        outcome.initial_running_mean(),
        outcome.final_running_mean()
    );
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::synth_dataset;

    fn small_arch() -> Architecture {
        Architecture {
            channels: 3,
            length: 8,
            hidden: [16, 16],
            time_dim: 4,
            class_dim: 4,
            class_count: 2,
        }
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(TrainConfig::from_json(r#"{"learning_rate": 0.001, "steps": 10}"#).is_ok());
        assert!(matches!(
            TrainConfig::from_json(r#"{"learning_rate": 0.001, "momentum": 0.5}"#),
            Err(Error::InvalidConfig(_))
        ));
        assert!(TrainConfig::from_json(r#"{"condition_dropout": 1.5}"#).is_err());
    }

    #[test]
    fn same_seed_same_model() {
        let data = synth_dataset(1, 16, 3, 8, 2).unwrap();
        let cfg = TrainConfig {
            steps: 20,
            batch_size: 4,
            seed: 9,
            ..Default::default()
        };
        let a = train(&cfg, small_arch(), &data).unwrap();
        let b = train(&cfg, small_arch(), &data).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let data = synth_dataset(1, 16, 3, 8, 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e200,
            steps: 50,
            batch_size: 4,
            optimizer: AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            train(&cfg, small_arch(), &data),
            Err(Error::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn rejects_mismatched_dataset() {
        let data = synth_dataset(1, 4, 3, 16, 2).unwrap();
        assert!(matches!(
            train(&TrainConfig::default(), small_arch(), &data),
            Err(Error::Shape(_))
        ));
    }
}
