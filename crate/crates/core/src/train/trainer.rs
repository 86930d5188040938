use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, cosine_lr, load_checkpoint, save_checkpoint, AdamConfig, OptimState, Tape, Var};
use crate::error::{config_err, Error, Result};
use crate::kspace::sample_seed;
use crate::models::{Model, ModelSpec};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr0: 1e-3,
            lr_min: 1e-5,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return config_err("epochs must be positive");
        }
        if !(self.lr0 > 0.0 && self.lr_min > 0.0 && self.lr_min <= self.lr0) {
            return config_err(format!("need 0 < lr_min <= lr0, got {} and {}", self.lr_min, self.lr0));
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        cosine_lr(epoch, self.epochs, self.lr0, self.lr_min).expect("validated schedule")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// A training sample: records its loss for `model` on `tape`. `draw` seeds
/// any per-visit randomness (for example which transients are averaged).
pub trait Example<T: Real> {
    fn loss(&self, model: &Model<T>, tape: &mut Tape<T>, draw: u64) -> Result<Var>;
}

/// Batch-1 Adam training with a per-epoch cosine learning rate.
pub struct Trainer<T> {
    pub model: Model<T>,
    pub optim: OptimState<T>,
    pub config: TrainConfig,
    /// Epochs completed so far.
    pub epoch: usize,
    pub curve: Vec<CurveRow>,
}

/// Seed of visit `i` in `epoch`.
pub fn draw_seed(seed: u64, epoch: usize, i: usize) -> u64 {
    sample_seed(sample_seed(seed, epoch), i)
}

/// Fixed draw used for validation and testing.
pub fn eval_seed(i: usize) -> u64 {
    sample_seed(0x5eed, i)
}

fn scalar<T: Real>(tape: &Tape<T>, v: Var) -> f64 {
    tape.value(v).re()[0].f64()
}

impl<T: Real> Trainer<T> {
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optim = OptimState::new(&model.store, config.adam);
        Ok(Self {
            model,
            optim,
            config,
            epoch: 0,
            curve: Vec::new(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Mean loss without updates.
    pub fn evaluate<E: Example<T>>(&self, set: &[E]) -> Result<f64> {
        if set.is_empty() {
            return Ok(f64::NAN);
        }
        let mut total = 0.0;
        for (i, ex) in set.iter().enumerate() {
            let mut tape = Tape::new();
            let l = ex.loss(&self.model, &mut tape, eval_seed(i))?;
            total += scalar(&tape, l);
        }
        Ok(total / set.len() as f64)
    }

    /// One pass over `train` in a seeded order, then validation.
    pub fn run_epoch<E: Example<T>>(&mut self, train: &[E], val: &[E]) -> Result<CurveRow> {
        if self.is_done() {
            return Err(Error::Usage("training schedule already complete".into()));
        }
        if train.is_empty() {
            return config_err("empty training set");
        }
        let e = self.epoch;
        let lr = self.config.lr(e);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(sample_seed(self.config.seed, e)));
        let mut total = 0.0;
        for (visit, &i) in order.iter().enumerate() {
            let mut tape = Tape::new();
            let l = train[i].loss(&self.model, &mut tape, draw_seed(self.config.seed, e, visit))?;
            let lv = scalar(&tape, l);
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("loss is {} at epoch {} sample {}", lv, e, i)));
            }
            total += lv;
            let grads = tape.backward(l)?;
            self.model.store.zero_grad();
            tape.accumulate_param_grads(&grads, &mut self.model.store);
            drop(tape);
            adam_step(&mut self.model.store, &mut self.optim, lr)?;
        }
        let val_loss = self.evaluate(val)?;
        let row = CurveRow {
            epoch: e + 1,
            lr,
            train_loss: total / train.len() as f64,
            val_loss,
        };
        self.curve.push(row.clone());
        self.epoch += 1;
        Ok(row)
    }

    /// Runs the remaining epochs, calling `after_epoch` after each.
    pub fn fit<E: Example<T>>(
        &mut self,
        train: &[E],
        val: &[E],
        mut after_epoch: impl FnMut(&Self, &CurveRow) -> Result<()>,
    ) -> Result<()> {
        while !self.is_done() {
            let row = self.run_epoch(train, val)?;
            after_epoch(self, &row)?;
        }
        Ok(())
    }

    /// Writes parameters, Adam state, the model spec, config and curve.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let extra = serde_json::json!({
            "spec": self.model.spec,
            "train": self.config,
            "curve": self.curve,
        });
        save_checkpoint(dir, &self.model.store, Some(&self.optim), self.epoch, extra)
    }

    /// Restores a trainer saved with [`Trainer::save`].
    pub fn resume(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = crate::autodiff::read_manifest(dir)?;
        let spec: ModelSpec = serde_json::from_value(manifest.extra["spec"].clone())?;
        let config: TrainConfig = serde_json::from_value(manifest.extra["train"].clone())?;
        let curve: Vec<CurveRow> = serde_json::from_value(manifest.extra["curve"].clone())?;
        let mut t = Trainer::new(Model::new(spec)?, config)?;
        let m = load_checkpoint(dir, &mut t.model.store, Some(&mut t.optim))?;
        t.epoch = m.epoch;
        t.curve = curve;
        Ok(t)
    }
}

/// Loads a model (without optimizer state) from a checkpoint directory.
pub fn load_model<T: Real>(dir: impl AsRef<Path>) -> Result<Model<T>> {
    let dir = dir.as_ref();
    let manifest = crate::autodiff::read_manifest(dir)?;
    let spec: ModelSpec = serde_json::from_value(manifest.extra["spec"].clone())
        .map_err(|e| Error::Format(format!("checkpoint lacks a model spec: {}", e)))?;
    let mut model = Model::new(spec)?;
    load_checkpoint(dir, &mut model.store, None)?;
    Ok(model)
}

/// Saves a model without optimizer state.
pub fn save_model<T: Real>(dir: impl AsRef<Path>, model: &Model<T>) -> Result<()> {
    save_checkpoint(dir, &model.store, None, 0, serde_json::json!({ "spec": model.spec }))
}
