//! Supervised pretraining: next-action classification on demonstrations.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::demo::{DemoEpisode, DemoSample};
use crate::error::{Error, Result};
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::loss::{argmax, softmax_cross_entropy};
use crate::nn::network::{NetInput, QNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub batch: usize,
    pub epochs: usize,
    /// Fraction of episodes held out for validation.
    pub val_fraction: f64,
    /// Randomly mirrored, rotated and shifted copies of every training
    /// episode, redrawn each epoch. 0 trains on the episodes as given.
    pub augment: usize,
    pub adam: AdamConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            batch: 128,
            epochs: 20,
            val_fraction: 0.1,
            augment: 16,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the predictions made while training on each batch.
    pub train_accuracy: f64,
    /// `None` when nothing was held out.
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub net: QNetwork,
    pub metrics: Vec<EpochMetrics>,
    /// Training samples seen per epoch, augmented copies included.
    pub train_samples: usize,
    pub val_samples: usize,
}

/// Splits episodes into training and validation sets. Whole episodes go to
/// one side so consecutive, nearly identical frames never straddle it.
pub fn split_episodes<R: Rng + ?Sized>(
    episodes: &[DemoEpisode],
    val_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<DemoEpisode>, Vec<DemoEpisode>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::invalid("val_fraction must lie in [0, 1)"));
    }
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    order.shuffle(rng);
    let n_val = if episodes.len() < 2 {
        0
    } else {
        ((episodes.len() as f64 * val_fraction).round() as usize).min(episodes.len() - 1)
    };
    let val = order[..n_val].iter().map(|&i| episodes[i].clone()).collect();
    let train = order[n_val..].iter().map(|&i| episodes[i].clone()).collect();
    Ok((train, val))
}

fn samples_of(episodes: &[DemoEpisode]) -> Result<Vec<DemoSample>> {
    let mut out = Vec::new();
    for e in episodes {
        out.extend(e.samples()?);
    }
    Ok(out)
}

/// [`split_episodes`], then every episode unrolled into samples.
pub fn split_samples<R: Rng + ?Sized>(
    episodes: &[DemoEpisode],
    val_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<DemoSample>, Vec<DemoSample>)> {
    let (train, val) = split_episodes(episodes, val_fraction, rng)?;
    Ok((samples_of(&train)?, samples_of(&val)?))
}

fn labels(net: &QNetwork, samples: &[&DemoSample]) -> Result<Vec<usize>> {
    samples.iter().map(|s| s.action.index(net.config().media)).collect()
}

/// Fraction of samples whose argmax output is the demonstrated action.
pub fn accuracy(net: &QNetwork, samples: &[DemoSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to score"));
    }
    let mut correct = 0;
    for chunk in samples.chunks(256) {
        let refs: Vec<&DemoSample> = chunk.iter().collect();
        let obs: Vec<_> = refs.iter().map(|s| &s.observation).collect();
        let pass = net.forward(&NetInput::from_observations(net.config(), &obs)?)?;
        for (b, label) in labels(net, &refs)?.into_iter().enumerate() {
            correct += usize::from(argmax(pass.q_row(b)) == label);
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// One shuffled pass of minibatch softmax cross-entropy. Returns the summed
/// loss and the number of correct predictions.
fn train_epoch<R: Rng + ?Sized>(
    net: &mut QNetwork,
    adam: &mut Adam,
    train: &[DemoSample],
    batch: usize,
    epoch: usize,
    rng: &mut R,
) -> Result<(f64, usize)> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);
    let (mut loss_sum, mut correct) = (0.0, 0);
    for idx in order.chunks(batch) {
        let batch: Vec<&DemoSample> = idx.iter().map(|&i| &train[i]).collect();
        let obs: Vec<_> = batch.iter().map(|s| &s.observation).collect();
        let pass = net.forward(&NetInput::from_observations(net.config(), &obs)?)?;
        let n = batch.len() as f64;
        let mut grad = Vec::with_capacity(pass.q().len());
        for (b, label) in labels(net, &batch)?.into_iter().enumerate() {
            let row = pass.q_row(b);
            correct += usize::from(argmax(row) == label);
            let (loss, g) = softmax_cross_entropy(row, label)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(format!("non-finite loss in epoch {epoch}")));
            }
            loss_sum += loss;
            grad.extend(g.into_iter().map(|v| v / n));
        }
        let grads = net.backward(&pass, &grad)?;
        adam.step(net.params_mut(), &grads)?;
    }
    Ok((loss_sum, correct))
}

fn fit<R, F>(
    mut net: QNetwork,
    val: &[DemoSample],
    cfg: &PretrainConfig,
    rng: &mut R,
    mut epoch_data: F,
) -> Result<PretrainOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<Vec<DemoSample>>,
{
    if cfg.batch == 0 {
        return Err(Error::invalid("batch must be at least 1"));
    }
    let mut adam = Adam::new(cfg.adam, net.param_count());
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut train_samples = 0;
    for epoch in 0..cfg.epochs {
        let train = epoch_data(rng)?;
        if train.is_empty() {
            return Err(Error::EmptyDataset("no demonstration samples to train on".into()));
        }
        train_samples = train.len();
        let (loss_sum, correct) = train_epoch(&mut net, &mut adam, &train, cfg.batch, epoch, rng)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_accuracy: if val.is_empty() { None } else { Some(accuracy(&net, val)?) },
        });
    }
    Ok(PretrainOutcome {
        net,
        metrics,
        train_samples,
        val_samples: val.len(),
    })
}

/// Trains `net` on pre-split samples, without augmentation.
pub fn pretrain_samples<R: Rng + ?Sized>(
    net: QNetwork,
    train: &[DemoSample],
    val: &[DemoSample],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("no demonstration samples to train on".into()));
    }
    let mut out = fit(net, val, cfg, rng, |_| Ok(train.to_vec()))?;
    out.train_samples = train.len();
    Ok(out)
}

/// Splits `episodes` by episode, then trains, augmenting the training side
/// when the config asks for it.
pub fn pretrain<R: Rng + ?Sized>(
    net: QNetwork,
    episodes: &[DemoEpisode],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainOutcome> {
    if episodes.is_empty() {
        return Err(Error::EmptyDataset("no demonstration episodes".into()));
    }
    let (train_eps, val_eps) = split_episodes(episodes, cfg.val_fraction, rng)?;
    let val = samples_of(&val_eps)?;
    if cfg.augment == 0 {
        let train = samples_of(&train_eps)?;
        return pretrain_samples(net, &train, &val, cfg, rng);
    }
    fit(net, &val, cfg, rng, |rng| {
        let mut train = Vec::new();
        for e in &train_eps {
            for _ in 0..cfg.augment {
                train.extend(e.augmented(rng)?.samples()?);
            }
        }
        Ok(train)
    })
}
