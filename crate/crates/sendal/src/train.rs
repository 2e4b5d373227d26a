//! Three-phase bottom-up training.
//!
//! Phase 1 trains the linear and component branches independently on mean
//! squared error. Phase 2 derives routing labels from the two branches'
//! comparative errors and trains the gate on binary cross-entropy against
//! the soft labels. Phase 3 partitions the training windows with the frozen
//! gate and fine-tunes only the two output layers (fc_out1 / fc_out2) on
//! their partitions; everything else stays bit-identical.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labels::{build_label_set, LabelSet};
use crate::model::{
    ComponentBranch, CoreKind, EmbeddingLayer, LinearBranch, ModelDims, SendalModel,
};
use crate::nn::act::{bce_with_logit, bce_with_logit_grad, leaky_relu, LEAKY_SLOPE};
use crate::nn::adam::Adam;
use crate::nn::dense::Dense;
use crate::nn::FlatParams;
use crate::scalar::Scalar;
use crate::series::{make_windows, SensorPairDataset};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Margin of the hard-label decision boundary (>= 0; biases routing
    /// toward the linear branch).
    pub xi: f64,
    /// Trailing-window length for label smoothing and instability.
    pub lambda_smooth: usize,
    /// Instability weight in the soft label.
    pub w: f64,
    /// Magnifier parameter (> 0).
    pub n_mag: f64,
    /// Routing threshold.
    pub theta: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub epochs_phase3: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub window_n: usize,
    pub h_lin: usize,
    pub core_in: usize,
    pub core_hidden: usize,
    pub attn_model: usize,
    pub skip_period: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            xi: 0.0,
            lambda_smooth: 10,
            w: 0.25,
            n_mag: 4.0,
            theta: 0.5,
            epochs_phase1: 100,
            epochs_phase2: 50,
            epochs_phase3: 30,
            lr: 1e-3,
            batch_size: 64,
            seed: 42,
            window_n: 20,
            h_lin: 8,
            core_in: 4,
            core_hidden: 16,
            attn_model: 8,
            skip_period: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.xi < 0.0 {
            return Err(Error::invalid("xi must be >= 0"));
        }
        if self.lambda_smooth < 1 {
            return Err(Error::invalid("lambda_smooth must be >= 1"));
        }
        if !(self.n_mag > 0.0) {
            return Err(Error::invalid("n_mag must be > 0"));
        }
        if self.w < 0.0 {
            return Err(Error::invalid("w must be >= 0"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::invalid("theta must lie in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.window_n == 0 {
            return Err(Error::invalid("window_n must be >= 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr must be > 0"));
        }
        if self.skip_period == 0 {
            return Err(Error::invalid("skip_period must be >= 1"));
        }
        Ok(())
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            window_n: self.window_n,
            h_lin: self.h_lin,
            core_in: self.core_in,
            core_hidden: self.core_hidden,
            attn_model: self.attn_model,
        }
    }
}

/// Training-log phases; phase 1 trains two models so it logs as two streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainPhase {
    SingleLinear,
    SingleComponent,
    Classifier,
    FineTune,
}

impl fmt::Display for TrainPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainPhase::SingleLinear => "1-linear",
            TrainPhase::SingleComponent => "1-component",
            TrainPhase::Classifier => "2",
            TrainPhase::FineTune => "3",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLoss {
    pub phase: TrainPhase,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome<T> {
    pub model: SendalModel<T>,
    pub labels: LabelSet<T>,
    pub history: Vec<PhaseLoss>,
    /// Phase-1 branches before fine-tuning; the individually-trained
    /// baselines the evaluation protocol compares against.
    pub phase1_linear: LinearBranch<T>,
    pub phase1_component: ComponentBranch<T>,
}

fn collect_windows<T: Scalar>(
    ds: &SensorPairDataset<T>,
    n: usize,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let pairs = make_windows(ds, n)?;
    if pairs.len() < 2 {
        return Err(Error::invalid("training needs at least 2 windows"));
    }
    let mut windows = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for (w, y) in pairs {
        windows.push(w.values.to_vec());
        targets.push(y);
    }
    Ok((windows, targets))
}

fn batches(count: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|chunk| chunk.to_vec())
        .collect()
}

/// Phase-1 regression training for the linear branch. Returns per-epoch
/// mean squared errors.
fn fit_linear_branch<T: Scalar>(
    branch: &mut LinearBranch<T>,
    windows: &[Vec<T>],
    targets: &[T],
    epochs: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut opt = Adam::new(cfg.lr, branch.param_count());
    let mut losses = Vec::with_capacity(epochs);
    let two = T::from_f64(2.0);
    for _ in 0..epochs {
        let mut epoch_sq = 0.0f64;
        for batch in batches(windows.len(), cfg.batch_size, rng) {
            let mut grads = branch.grads_like();
            let scale = T::from_f64(1.0 / batch.len() as f64);
            for &i in &batch {
                let (pred, cache) = branch.forward_cached(&windows[i]);
                let diff = pred - targets[i];
                epoch_sq += diff.as_f64() * diff.as_f64();
                branch.backward(&windows[i], &cache, two * diff * scale, &mut grads);
            }
            let mut flat = branch.to_flat();
            opt.step(&mut flat, &grads.to_flat());
            branch.assign_flat(&flat);
        }
        losses.push(epoch_sq / windows.len() as f64);
    }
    losses
}

/// Phase-1 regression training for the component branch.
fn fit_component_branch<T: Scalar>(
    branch: &mut ComponentBranch<T>,
    windows: &[Vec<T>],
    targets: &[T],
    epochs: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut opt = Adam::new(cfg.lr, branch.param_count());
    let mut losses = Vec::with_capacity(epochs);
    let two = T::from_f64(2.0);
    for _ in 0..epochs {
        let mut epoch_sq = 0.0f64;
        for batch in batches(windows.len(), cfg.batch_size, rng) {
            let mut grads = branch.grads_like();
            let scale = T::from_f64(1.0 / batch.len() as f64);
            for &i in &batch {
                let (pred, cache) = branch.forward_cached(&windows[i]);
                let diff = pred - targets[i];
                epoch_sq += diff.as_f64() * diff.as_f64();
                branch.backward(&windows[i], &cache, two * diff * scale, &mut grads);
            }
            let mut flat = branch.to_flat();
            opt.step(&mut flat, &grads.to_flat());
            branch.assign_flat(&flat);
        }
        losses.push(epoch_sq / windows.len() as f64);
    }
    losses
}

/// Phase 1: train each calibration branch individually on MSE.
pub fn train_single_models<T: Scalar>(
    ds: &SensorPairDataset<T>,
    cfg: &TrainConfig,
    core_kind: CoreKind,
) -> Result<(LinearBranch<T>, ComponentBranch<T>, Vec<PhaseLoss>)> {
    cfg.validate()?;
    if ds.len() < cfg.window_n + 1 {
        return Err(Error::invalid(format!(
            "need at least {} aligned samples, have {}",
            cfg.window_n + 1,
            ds.len()
        )));
    }
    let (windows, targets) = collect_windows(ds, cfg.window_n)?;

    // Seed a full model so branch shapes and init match the final assembly.
    let proto = SendalModel::<T>::init(core_kind, &cfg.dims(), cfg.theta, cfg.skip_period, cfg.seed)?;
    let mut linear = proto.linear.clone();
    let mut component = proto.component.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x51)); // phase-1 shuffle stream
    let lin_losses = fit_linear_branch(&mut linear, &windows, &targets, cfg.epochs_phase1, cfg, &mut rng);
    let comp_losses =
        fit_component_branch(&mut component, &windows, &targets, cfg.epochs_phase1, cfg, &mut rng);

    let mut history = Vec::new();
    for (e, l) in lin_losses.iter().enumerate() {
        history.push(PhaseLoss {
            phase: TrainPhase::SingleLinear,
            epoch: e + 1,
            loss: *l,
        });
    }
    for (e, l) in comp_losses.iter().enumerate() {
        history.push(PhaseLoss {
            phase: TrainPhase::SingleComponent,
            epoch: e + 1,
            loss: *l,
        });
    }
    Ok((linear, component, history))
}

/// Phase 2: train the gate on BCE against soft labels.
pub fn train_classifier<T: Scalar>(
    windows: &[Vec<T>],
    soft: &[T],
    cfg: &TrainConfig,
) -> Result<(EmbeddingLayer<T>, Vec<PhaseLoss>)> {
    cfg.validate()?;
    if windows.len() != soft.len() {
        return Err(Error::invalid("classifier: windows/labels length mismatch"));
    }
    if windows.is_empty() {
        return Err(Error::invalid("classifier: no training windows"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x52));
    let mut layer = EmbeddingLayer {
        linear: Dense::init(1, cfg.window_n, &mut rng),
    };
    let mut opt = Adam::new(cfg.lr, layer.param_count());
    let mut history = Vec::with_capacity(cfg.epochs_phase2);
    for epoch in 0..cfg.epochs_phase2 {
        let mut epoch_loss = 0.0f64;
        for batch in batches(windows.len(), cfg.batch_size, &mut rng) {
            let mut grads = layer.linear.grads_like();
            let scale = T::from_f64(1.0 / batch.len() as f64);
            for &i in &batch {
                let z = layer.logit(&windows[i]);
                epoch_loss += bce_with_logit(z, soft[i]).as_f64();
                let dz = bce_with_logit_grad(z, soft[i]) * scale;
                layer.linear.backward(&windows[i], &[dz], &mut grads);
            }
            let mut flat = layer.to_flat();
            opt.step(&mut flat, &grads.to_flat());
            layer.assign_flat(&flat);
        }
        history.push(PhaseLoss {
            phase: TrainPhase::Classifier,
            epoch: epoch + 1,
            loss: epoch_loss / windows.len() as f64,
        });
    }
    Ok((layer, history))
}

/// Train one output layer on cached frozen features, keeping the best
/// iterate seen (so the partition MSE never ends above its starting point).
fn fit_output_layer<T: Scalar>(
    fc_out: &mut Dense<T>,
    features: &[Vec<T>],
    targets: &[T],
    epochs: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mse = |layer: &Dense<T>| -> f64 {
        let mut acc = 0.0;
        for (f, y) in features.iter().zip(targets.iter()) {
            let d = layer.forward(f)[0] - *y;
            acc += d.as_f64() * d.as_f64();
        }
        acc / features.len() as f64
    };
    let mut opt = Adam::new(cfg.lr, fc_out.param_count());
    let mut best = fc_out.clone();
    let mut best_loss = mse(fc_out);
    let mut losses = Vec::with_capacity(epochs);
    let two = T::from_f64(2.0);
    for _ in 0..epochs {
        for batch in batches(features.len(), cfg.batch_size, rng) {
            let mut grads = fc_out.grads_like();
            let scale = T::from_f64(1.0 / batch.len() as f64);
            for &i in &batch {
                let diff = fc_out.forward(&features[i])[0] - targets[i];
                fc_out.backward(&features[i], &[two * diff * scale], &mut grads);
            }
            let mut flat = fc_out.to_flat();
            opt.step(&mut flat, &grads.to_flat());
            fc_out.assign_flat(&flat);
        }
        let loss = mse(fc_out);
        if loss < best_loss {
            best_loss = loss;
            best = fc_out.clone();
        }
        losses.push(loss);
    }
    *fc_out = best;
    losses
}

/// Phase 3: partition the training windows with the frozen gate and
/// fine-tune only the two output layers on their partitions. An empty
/// partition skips that branch's fine-tuning with a warning on stderr.
pub fn unified_fine_tune<T: Scalar>(
    model: &mut SendalModel<T>,
    ds: &SensorPairDataset<T>,
    cfg: &TrainConfig,
) -> Result<Vec<PhaseLoss>> {
    cfg.validate()?;
    let (windows, targets) = collect_windows(ds, cfg.window_n)?;
    let slope = T::from_f64(LEAKY_SLOPE);

    let mut lin_features = Vec::new();
    let mut lin_targets = Vec::new();
    let mut comp_features = Vec::new();
    let mut comp_targets = Vec::new();
    for (w, y) in windows.iter().zip(targets.iter()) {
        let gate = model.embedding.gate_value(w).as_f64();
        if gate > model.theta {
            comp_features.push(model.component.features(w));
            comp_targets.push(*y);
        } else {
            let hidden: Vec<T> = model
                .linear
                .fc_in
                .forward(w)
                .into_iter()
                .map(|v| leaky_relu(v, slope))
                .collect();
            lin_features.push(hidden);
            lin_targets.push(*y);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x53));
    let epochs = cfg.epochs_phase3;
    let mut lin_losses = vec![f64::NAN; epochs];
    let mut comp_losses = vec![f64::NAN; epochs];
    if lin_features.is_empty() {
        eprintln!("warning: fine-tune skipped for linear branch (empty partition)");
    } else {
        lin_losses = fit_output_layer(
            &mut model.linear.fc_out,
            &lin_features,
            &lin_targets,
            epochs,
            cfg,
            &mut rng,
        );
    }
    if comp_features.is_empty() {
        eprintln!("warning: fine-tune skipped for component branch (empty partition)");
    } else {
        comp_losses = fit_output_layer(
            &mut model.component.fc_out,
            &comp_features,
            &comp_targets,
            epochs,
            cfg,
            &mut rng,
        );
    }

    // Combined objective per epoch: mean squared error over all training
    // windows under the frozen partition.
    let total = windows.len() as f64;
    let history = (0..epochs)
        .map(|e| {
            let lin = if lin_losses[e].is_nan() {
                0.0
            } else {
                lin_losses[e] * lin_features.len() as f64
            };
            let comp = if comp_losses[e].is_nan() {
                0.0
            } else {
                comp_losses[e] * comp_features.len() as f64
            };
            PhaseLoss {
                phase: TrainPhase::FineTune,
                epoch: e + 1,
                loss: (lin + comp) / total,
            }
        })
        .collect();
    Ok(history)
}

/// The full three-phase bottom-up pipeline.
pub fn train_full<T: Scalar>(
    ds: &SensorPairDataset<T>,
    cfg: &TrainConfig,
    core_kind: CoreKind,
) -> Result<TrainOutcome<T>> {
    let (linear, component, mut history) = train_single_models(ds, cfg, core_kind)?;
    let (windows, targets) = collect_windows(ds, cfg.window_n)?;

    let err_linear: Vec<T> = windows
        .iter()
        .zip(targets.iter())
        .map(|(w, y)| *y - linear.forward(w))
        .collect();
    let err_component: Vec<T> = windows
        .iter()
        .zip(targets.iter())
        .map(|(w, y)| *y - component.forward(w))
        .collect();
    let labels = build_label_set(
        &err_linear,
        &err_component,
        cfg.xi,
        cfg.lambda_smooth,
        cfg.w,
        cfg.n_mag,
    )?;

    let (embedding, classifier_history) = train_classifier(&windows, &labels.soft, cfg)?;
    history.extend(classifier_history);

    let phase1_linear = linear.clone();
    let phase1_component = component.clone();
    let mut model = SendalModel::from_parts(
        embedding,
        linear,
        component,
        cfg.window_n,
        cfg.theta,
        cfg.skip_period,
    )?;
    history.extend(unified_fine_tune(&mut model, ds, cfg)?);

    Ok(TrainOutcome {
        model,
        labels,
        history,
        phase1_linear,
        phase1_component,
    })
}
