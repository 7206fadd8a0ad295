use std::time::Instant;

use faf_core::{CompiledFeatures, LabeledSplits, Split};
use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MlError, Result};
use crate::metrics::{evaluate, MetricKind};
use crate::mlp::{Classifier, Mlp, MlpConfig, Mode};
use crate::optim::AdamW;

const DROPOUT_STREAM: u64 = 1;
const FD_STEP: f64 = 1e-4;
const FD_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: MlpConfig,
    pub metric_kind: MetricKind,
    pub input_dim: usize,
    pub num_parameters: usize,
    pub loss_curve: Vec<f64>,
    pub train_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    pub test_curve: Vec<f64>,
    /// Zero-based index into the curves.
    pub best_val_epoch: usize,
    pub val_at_best: f64,
    pub train_at_best_val: f64,
    pub test_at_best_val: f64,
    pub wall_time_seconds: f64,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.val_curve.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A finished run: the report and the best-validation parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: Mlp,
}

/// Trains on split `split_index` of `data`.
pub fn train(
    features: &CompiledFeatures,
    data: &LabeledSplits,
    split_index: usize,
    cfg: &MlpConfig,
    metric: MetricKind,
) -> Result<TrainOutcome> {
    if features.num_nodes() != data.num_nodes() {
        return Err(MlError::DimensionMismatch {
            expected: data.num_nodes(),
            found: features.num_nodes(),
        });
    }
    let split = data.splits().get(split_index).ok_or_else(|| {
        MlError::InvalidConfig(format!(
            "split {split_index} requested but only {} available",
            data.splits().len()
        ))
    })?;
    train_matrix(features.matrix(), data.labels(), data.num_classes(), split, cfg, metric)
}

fn check_split(labels: &[i64], num_classes: usize, split: &Split, metric: MetricKind) -> Result<()> {
    for (name, rows) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if rows.is_empty() {
            return Err(MlError::DegenerateSplit(format!("{name} mask is empty")));
        }
        for &v in rows.iter() {
            match labels.get(v) {
                None => {
                    return Err(MlError::DegenerateSplit(format!(
                        "{name} node {v} out of range for {} labels",
                        labels.len()
                    )))
                }
                Some(&y) if y < 0 || y as usize >= num_classes => {
                    return Err(MlError::DegenerateSplit(format!(
                        "{name} node {v} has label {y} outside 0..{num_classes}"
                    )))
                }
                _ => {}
            }
        }
        if metric == MetricKind::RocAuc {
            if num_classes != 2 {
                return Err(MlError::InvalidConfig(format!(
                    "ROC-AUC needs two classes, data has {num_classes}"
                )));
            }
            let first = labels[rows[0]];
            if rows.iter().all(|&v| labels[v] == first) {
                return Err(MlError::SingleClass { class: first });
            }
        }
    }
    Ok(())
}

/// Full-batch training on a dense matrix. Every epoch takes one AdamW step
/// on the train-mask loss, then scores all three masks with the
/// deterministic forward pass. Ties in validation keep the earliest epoch.
pub fn train_matrix(
    x: ArrayView2<'_, f64>,
    labels: &[i64],
    num_classes: usize,
    split: &Split,
    cfg: &MlpConfig,
    metric: MetricKind,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    if x.nrows() != labels.len() {
        return Err(MlError::DimensionMismatch {
            expected: labels.len(),
            found: x.nrows(),
        });
    }
    check_split(labels, num_classes, split, metric)?;

    let mut model = Mlp::new(cfg, x.ncols(), num_classes)?;
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise.set_stream(DROPOUT_STREAM);
    let mut opt = AdamW::new(cfg.learning_rate, cfg.weight_decay);

    let mut loss_curve = Vec::with_capacity(cfg.max_epochs);
    let mut train_curve = Vec::with_capacity(cfg.max_epochs);
    let mut val_curve = Vec::with_capacity(cfg.max_epochs);
    let mut test_curve = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(usize, f64, Mlp)> = None;

    for epoch in 0..cfg.max_epochs {
        let (logits, tape) = model.forward(x, Mode::Train, Some(&mut noise), true);
        let tape = tape.expect("recorded");
        let (loss, dlogits) = crate::mlp::softmax_cross_entropy(logits.view(), labels, &split.train);
        if !loss.is_finite() {
            return Err(MlError::NonFiniteLoss { epoch });
        }
        let grads = model.backward(&tape, dlogits);
        model.update_running_stats(&tape, x.nrows());
        drop(tape);
        opt.step(model.param_slices_mut(), &grads);

        let eval = model.predict_logits(x);
        if eval.iter().any(|v| !v.is_finite()) {
            return Err(MlError::NonFiniteLoss { epoch });
        }
        let val = evaluate(eval.view(), labels, &split.val, metric)?;
        loss_curve.push(loss);
        train_curve.push(evaluate(eval.view(), labels, &split.train, metric)?);
        val_curve.push(val);
        test_curve.push(evaluate(eval.view(), labels, &split.test, metric)?);
        if best.as_ref().is_none_or(|(_, b, _)| val > *b) {
            best = Some((epoch, val, model.clone()));
        }
    }

    let (best_val_epoch, val_at_best, best_model) = best.expect("at least one epoch");
    let report = TrainReport {
        config: cfg.clone(),
        metric_kind: metric,
        input_dim: x.ncols(),
        num_parameters: best_model.num_parameters(),
        train_at_best_val: train_curve[best_val_epoch],
        test_at_best_val: test_curve[best_val_epoch],
        loss_curve,
        train_curve,
        val_curve,
        test_curve,
        best_val_epoch,
        val_at_best,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        report,
        model: best_model,
    })
}

/// Largest relative gap between analytic and central-difference gradients
/// of the full-data loss of a freshly initialized model. Dropout is off and
/// batch norm uses its running statistics.
pub fn gradient_check(cfg: &MlpConfig, x: ArrayView2<'_, f64>, labels: &[i64]) -> Result<f64> {
    let cfg = MlpConfig {
        dropout: 0.0,
        ..cfg.clone()
    };
    let num_classes = labels.iter().copied().max().unwrap_or(0).max(1) as usize + 1;
    let model = Mlp::new(&cfg, x.ncols(), num_classes)?;
    gradient_check_model(&model, x, labels, Mode::Eval)
}

/// [`gradient_check`] on a given model and statistics mode.
pub fn gradient_check_model(model: &Mlp, x: ArrayView2<'_, f64>, labels: &[i64], mode: Mode) -> Result<f64> {
    if x.nrows() != labels.len() {
        return Err(MlError::DimensionMismatch {
            expected: labels.len(),
            found: x.nrows(),
        });
    }
    let rows: Vec<usize> = (0..labels.len()).filter(|&v| labels[v] >= 0).collect();
    let (_, analytic) = model.loss_and_gradients(x, labels, &rows, mode)?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (t, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let mut central = |step: f64| -> Result<f64> {
                let original = probe.param_slices_mut()[t][i];
                probe.param_slices_mut()[t][i] = original + step;
                let up = probe.loss(x, labels, &rows, mode)?;
                probe.param_slices_mut()[t][i] = original - step;
                let down = probe.loss(x, labels, &rows, mode)?;
                probe.param_slices_mut()[t][i] = original;
                Ok((up - down) / (2.0 * step))
            };
            // a window that straddles a ReLU kink disagrees with a narrower one
            let mut step = FD_STEP;
            let mut numeric = central(step)?;
            for _ in 0..FD_REFINEMENTS {
                let narrower = central(step / 10.0)?;
                if (narrower - numeric).abs() <= 1e-5 * narrower.abs().max(numeric.abs()).max(1e-4) {
                    break;
                }
                step /= 10.0;
                numeric = narrower;
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
