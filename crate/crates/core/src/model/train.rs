use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::autoencoder::AutoencoderModel;
use super::loss::{l1_loss, laplacian_loss, LaplacianOperator};
use super::optim::{lr_schedule, Adam};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::mesh::{MeshDataset, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub decay: f64,
    pub epochs: usize,
    /// Stop after this many optimizer steps in total, even mid-epoch.
    pub max_steps: Option<usize>,
    pub l1_weight: f64,
    pub laplacian_weight: f64,
    /// Seed of the shuffling stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 1e-4,
            decay: 0.9,
            epochs: 1,
            max_steps: None,
            l1_weight: 1.0,
            laplacian_weight: 0.0,
            seed: 0,
        }
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub adam: Adam,
    pub epoch: usize,
    pub batch_in_epoch: usize,
    pub total_steps: usize,
    /// Shuffle stream positioned at the start of the current epoch.
    pub rng: ChaCha8Rng,
    pub epoch_loss_sum: f64,
    pub epoch_l1_sum: f64,
    pub epoch_batches: usize,
}

impl TrainState {
    pub fn fresh(model: &AutoencoderModel, seed: u64) -> Self {
        TrainState {
            adam: Adam::new(&model.params),
            epoch: 0,
            batch_in_epoch: 0,
            total_steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch_loss_sum: 0.0,
            epoch_l1_sum: 0.0,
            epoch_batches: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_l1: f64,
    pub val_l1: Option<f64>,
}

impl EpochRecord {
    /// Tab-separated `epoch, lr, train L1[, val L1]`.
    pub fn tsv_line(&self) -> String {
        match self.val_l1 {
            Some(v) => format!("{}\t{:e}\t{}\t{}", self.epoch, self.lr, self.train_l1, v),
            None => format!("{}\t{:e}\t{}", self.epoch, self.lr, self.train_l1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

/// Stacks the listed samples into one `[batch · N, C]` tensor.
pub fn stack_samples(data: &MeshDataset, indices: &[usize]) -> Tensor {
    let n = data.topology.num_vertices();
    let c = data.samples.first().map_or(0, |s| s.channels());
    let mut buf = Vec::with_capacity(indices.len() * n * c);
    for &i in indices {
        buf.extend_from_slice(data.samples[i].values());
    }
    Tensor::matrix(indices.len() * n, c, buf).unwrap()
}

/// Mean reconstruction L1 over the listed samples.
pub fn evaluate_l1(model: &AutoencoderModel, data: &MeshDataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for chunk in indices.chunks(16) {
        let mut tape = Tape::new();
        let x = tape.leaf(stack_samples(data, chunk));
        let y = model.net.forward(&mut tape, &model.params, x)?;
        let l = l1_loss(&mut tape, y, x)?;
        total += tape.value(l).data()[0] * chunk.len() as f64;
    }
    Ok(total / indices.len() as f64)
}

pub struct Trainer<'a> {
    model: &'a mut AutoencoderModel,
    data: &'a MeshDataset,
    pub config: TrainConfig,
    pub state: TrainState,
    train: Vec<usize>,
    val: Vec<usize>,
    laplacian: Option<LaplacianOperator>,
    order: Option<(usize, Vec<usize>)>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a mut AutoencoderModel, data: &'a MeshDataset, config: TrainConfig) -> Result<Self> {
        let state = TrainState::fresh(model, config.seed);
        Self::resume(model, data, config, state)
    }

    pub fn resume(
        model: &'a mut AutoencoderModel,
        data: &'a MeshDataset,
        config: TrainConfig,
        state: TrainState,
    ) -> Result<Self> {
        if data.topology != model.net.hierarchy.base {
            return Err(Error::InvalidInput(
                "dataset topology differs from the model hierarchy's base mesh".into(),
            ));
        }
        if let Some(s) = data.samples.first() {
            if s.channels() != model.net.input_channels() {
                return Err(Error::InvalidInput(format!(
                    "dataset has {} channels, model expects {}",
                    s.channels(),
                    model.net.input_channels()
                )));
            }
        }
        if config.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let train = data.indices(Split::Train);
        if train.is_empty() {
            return Err(Error::InvalidInput("dataset has no training samples".into()));
        }
        if state.adam.m.len() != model.params.len() {
            return Err(Error::InvalidInput("optimizer state does not match the model".into()));
        }
        let laplacian = (config.laplacian_weight != 0.0).then(|| LaplacianOperator::new(&data.topology));
        Ok(Trainer {
            val: data.indices(Split::Validation),
            model,
            data,
            config,
            state,
            train,
            laplacian,
            order: None,
        })
    }

    pub fn model(&self) -> &AutoencoderModel {
        self.model
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.train.len().div_ceil(self.config.batch_size)
    }

    pub fn current_lr(&self) -> f64 {
        lr_schedule(self.config.learning_rate, self.config.decay, self.state.epoch)
    }

    pub fn finished(&self) -> bool {
        self.state.epoch >= self.config.epochs || self.config.max_steps.is_some_and(|m| self.state.total_steps >= m)
    }

    fn epoch_order(&mut self) -> &[usize] {
        let epoch = self.state.epoch;
        if self.order.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut rng = self.state.rng.clone();
            let mut perm = self.train.clone();
            perm.shuffle(&mut rng);
            self.order = Some((epoch, perm));
        }
        &self.order.as_ref().unwrap().1
    }

    fn batch_loss(&self, tape: &mut Tape, x: Var) -> Result<(Var, Var)> {
        let y = self.model.net.forward(tape, &self.model.params, x)?;
        let l1 = l1_loss(tape, y, x)?;
        let mut loss = tape.scale(l1, self.config.l1_weight);
        if let Some(lap) = &self.laplacian {
            let ll = laplacian_loss(tape, y, x, lap)?;
            let ll = tape.scale(ll, self.config.laplacian_weight);
            loss = tape.add(loss, ll)?;
        }
        Ok((loss, l1))
    }

    /// One optimizer step on the next mini-batch. Returns the epoch record
    /// when the step completes an epoch.
    pub fn step(&mut self) -> Result<(StepRecord, Option<EpochRecord>)> {
        let bs = self.config.batch_size;
        let b = self.state.batch_in_epoch;
        let batch: Vec<usize> = {
            let order = self.epoch_order();
            order[b * bs..((b + 1) * bs).min(order.len())].to_vec()
        };
        let lr = self.current_lr();
        let mut tape = Tape::new();
        let x = tape.leaf(stack_samples(self.data, &batch));
        let (loss, l1) = self.batch_loss(&mut tape, x)?;
        let grads = tape.backward(loss)?;
        self.model.params.zero_grads();
        grads.accumulate_into(&mut self.model.params);
        self.state.adam.step(&mut self.model.params, lr)?;

        let record = StepRecord {
            step: self.state.total_steps,
            epoch: self.state.epoch,
            lr,
            loss: tape.value(loss).data()[0],
            l1: tape.value(l1).data()[0],
        };
        self.state.total_steps += 1;
        self.state.batch_in_epoch += 1;
        self.state.epoch_loss_sum += record.loss;
        self.state.epoch_l1_sum += record.l1;
        self.state.epoch_batches += 1;

        if self.state.batch_in_epoch < self.batches_per_epoch() {
            return Ok((record, None));
        }
        let n = self.state.epoch_batches as f64;
        let val_l1 = if self.val.is_empty() {
            None
        } else {
            Some(evaluate_l1(self.model, self.data, &self.val)?)
        };
        let epoch = EpochRecord {
            epoch: self.state.epoch,
            lr,
            train_loss: self.state.epoch_loss_sum / n,
            train_l1: self.state.epoch_l1_sum / n,
            val_l1,
        };
        // Advance the shuffle stream past this epoch's permutation.
        let mut perm = self.train.clone();
        perm.shuffle(&mut self.state.rng);
        self.state.epoch += 1;
        self.state.batch_in_epoch = 0;
        self.state.epoch_loss_sum = 0.0;
        self.state.epoch_l1_sum = 0.0;
        self.state.epoch_batches = 0;
        Ok((record, Some(epoch)))
    }

    /// Steps until the epoch or step budget is spent, calling `on_epoch` after
    /// every completed epoch.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochRecord, &Trainer) -> Result<()>) -> Result<TrainingLog> {
        let mut log = TrainingLog::default();
        while !self.finished() {
            let (step, epoch) = self.step()?;
            log.steps.push(step);
            if let Some(e) = epoch {
                on_epoch(&e, self)?;
                log.epochs.push(e);
            }
        }
        Ok(log)
    }
}

/// Trains `model` on the training split of `data`.
pub fn train(model: &mut AutoencoderModel, data: &MeshDataset, config: &TrainConfig) -> Result<TrainingLog> {
    Trainer::new(model, data, config.clone())?.run(|_, _| Ok(()))
}
