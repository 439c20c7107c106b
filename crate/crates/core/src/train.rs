//! Deterministic training loop: Adam with the stepped learning-rate
//! schedule, configurable objective, per-epoch CSV logging, and final plus
//! best-validation checkpoints. Given a fixed seed, initialization, data
//! order, and augmentation draws are all reproducible bit for bit.

use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::classic::GrayImage;
use crate::config::{LossKind, RunConfig};
use crate::data::{augment, DataError, SamplePair};
use crate::eval::{evaluate, EvalError, EvalMode, EvalReport};
use crate::loss::{focal_loss, focal_tversky_loss, hybrid_focal_loss, weighted_ce, LossConfig};
use crate::net::EdgeNet;
use crate::optim::{AdamConfig, AdamState};
use crate::params::CheckpointError;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("non-finite loss {value} at epoch {epoch}, step {step}; aborting")]
    NonFiniteLoss { value: f64, epoch: usize, step: usize },
    #[error("training set is empty")]
    EmptyDataset,
}

/// Stack samples into `[N,3,H,W]` input and `[N,1,H,W]` target tensors.
/// The first annotator map is the training target.
pub fn batch_tensors(samples: &[&SamplePair]) -> Result<(Tensor, Tensor), TrainError> {
    let n = samples.len();
    let (h, w) = (samples[0].h, samples[0].w);
    let mut img = Vec::with_capacity(n * 3 * h * w);
    let mut gt = Vec::with_capacity(n * h * w);
    for s in samples {
        img.extend_from_slice(&s.image);
        gt.extend(s.gt.maps()[0].values.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    }
    Ok((
        Tensor::from_vec([n, 3, h, w], img)?,
        Tensor::from_vec([n, 1, h, w], gt)?,
    ))
}

/// Dispatch on the configured objective.
pub fn compute_loss(
    kind: LossKind,
    p: &Tensor,
    g: &Tensor,
    cfg: &LossConfig,
) -> Result<Tensor, TensorError> {
    match kind {
        LossKind::HybridFocal => hybrid_focal_loss(p, g, cfg),
        LossKind::Focal => focal_loss(p, g, cfg.alpha_fl, cfg.gamma_fl, cfg.clamp_eps),
        LossKind::FocalTversky => focal_tversky_loss(p, g, cfg),
        LossKind::WeightedCe => weighted_ce(p, g, cfg.clamp_eps),
    }
}

fn check_finite(value: f64, epoch: usize, step: usize) -> Result<f64, TrainError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(TrainError::NonFiniteLoss { value, epoch, step })
    }
}

/// Eval-mode forward pass on one sample, returned as a probability image.
pub fn predict_probmap(net: &EdgeNet, pair: &SamplePair) -> Result<GrayImage, TrainError> {
    net.set_train(false);
    let x = Tensor::from_vec([1, 3, pair.h, pair.w], pair.image.clone())?;
    let p = net.forward(&x)?;
    Ok(GrayImage::new(pair.h, pair.w, p.data()))
}

/// Predict every sample and run the evaluation protocol against its labels.
pub fn evaluate_model(
    net: &EdgeNet,
    dataset: &[SamplePair],
    mode: EvalMode,
    thresholds: &[f64],
    tol_px: f64,
) -> Result<EvalReport, TrainError> {
    let preds: Result<Vec<GrayImage>, TrainError> =
        dataset.iter().map(|s| predict_probmap(net, s)).collect();
    let gts: Vec<_> = dataset.iter().map(|s| s.gt.clone()).collect();
    Ok(evaluate(&preds?, &gts, mode, thresholds, tol_px)?)
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean validation loss per epoch (empty without a validation set).
    pub val_losses: Vec<f64>,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
    pub log_path: PathBuf,
}

/// Run the configured recipe on an in-memory dataset. Writes
/// `train_log.csv`, `final.ckpt`, and (with a validation set)
/// `best.ckpt` into `out_dir`.
pub fn train(
    cfg: &RunConfig,
    dataset: &[SamplePair],
    val_set: &[SamplePair],
    out_dir: &Path,
) -> Result<TrainOutcome, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| TrainError::Io { path: out_dir.to_path_buf(), source: e })?;

    let net = EdgeNet::new(cfg.net.clone(), cfg.train.seed)?;
    let params = net.params();
    let adam_cfg = AdamConfig {
        lr: cfg.train.lr,
        weight_decay: cfg.train.weight_decay,
        lr_decay: cfg.train.lr_decay,
        decay_every: cfg.train.decay_every,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(&params, adam_cfg.clone());

    let mut epoch_losses = Vec::with_capacity(cfg.train.epochs);
    let mut val_losses = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_path = None;
    let mut log = String::from(if val_set.is_empty() {
        "epoch,lr,train_loss\n"
    } else {
        "epoch,lr,train_loss,val_loss\n"
    });

    for epoch in 0..cfg.train.epochs {
        let lr = adam_cfg.lr_at_epoch(epoch);
        // Data order and augmentation draws derive from (seed, epoch) only.
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.train.seed ^ (epoch as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15),
        );
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);

        net.set_train(true);
        let mut epoch_loss = 0.0;
        let mut steps = 0usize;
        for (step, chunk) in order.chunks(cfg.train.batch_size).enumerate() {
            let samples: Vec<SamplePair> = if cfg.data.augment {
                chunk
                    .iter()
                    .map(|&i| augment(&dataset[i], &cfg.data.augment_cfg, &mut rng))
                    .collect::<Result<_, _>>()?
            } else {
                chunk.iter().map(|&i| dataset[i].clone()).collect()
            };
            let refs: Vec<&SamplePair> = samples.iter().collect();
            let (x, g) = batch_tensors(&refs)?;
            let p = net.forward(&x)?;
            let loss = compute_loss(cfg.train.loss, &p, &g, &cfg.loss)?;
            let value = check_finite(loss.item(), epoch, step)?;
            params.zero_grads();
            loss.backward()?;
            adam.step(&params, lr)?;
            epoch_loss += value;
            steps += 1;
        }
        let mean_loss = epoch_loss / steps as f64;
        epoch_losses.push(mean_loss);

        if val_set.is_empty() {
            log.push_str(&format!("{epoch},{lr:e},{mean_loss:.9}\n"));
        } else {
            net.set_train(false);
            let mut vl = 0.0;
            for chunk in val_set.chunks(cfg.train.batch_size) {
                let refs: Vec<&SamplePair> = chunk.iter().collect();
                let (x, g) = batch_tensors(&refs)?;
                let p = net.forward(&x)?;
                vl += compute_loss(cfg.train.loss, &p, &g, &cfg.loss)?.item()
                    * chunk.len() as f64;
            }
            let val_loss = check_finite(vl / val_set.len() as f64, epoch, usize::MAX)?;
            val_losses.push(val_loss);
            if val_loss < best_val {
                best_val = val_loss;
                let p = out_dir.join("best.ckpt");
                params.save(&p)?;
                best_path = Some(p);
            }
            log.push_str(&format!("{epoch},{lr:e},{mean_loss:.9},{val_loss:.9}\n"));
        }
    }

    let final_path = out_dir.join("final.ckpt");
    params.save(&final_path)?;
    let log_path = out_dir.join("train_log.csv");
    std::fs::write(&log_path, log)
        .map_err(|e| TrainError::Io { path: log_path.clone(), source: e })?;
    Ok(TrainOutcome {
        epoch_losses,
        val_losses,
        final_checkpoint: final_path,
        best_checkpoint: best_path,
        log_path,
    })
}
