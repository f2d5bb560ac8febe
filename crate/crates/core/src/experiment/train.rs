use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, AdamConfig, AdamState, Tape};
use crate::dataset::SplitMasks;
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::models::{Model, ModelInputs};
use crate::rng::{seeded, Stream};
use crate::{Error, Result};

use super::{total_loss, LossConfig, RegTarget, TrainConfig};

/// Losses of one epoch's training forward pass, before the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub ce: f64,
    pub cmd: f64,
    pub mmd: f64,
    pub total: f64,
    /// Validation F1 of the parameters after this epoch's update.
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    /// Sorted training node indices.
    pub train_indices: Vec<usize>,
    /// PPR seed of the biased sampler, when one was used.
    pub sampler_seed_node: Option<usize>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    /// Test F1-micro of the best-validation parameters.
    pub test_f1: f64,
    /// Kept out of serialized reports so repeated runs produce identical files.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Fraction of `rows` whose arg-max logit (ties to the lowest class) matches
/// the label. For single-label multiclass data this is micro-averaged F1.
pub fn evaluate_f1_micro(logits: &Matrix, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::input("F1 over an empty mask"));
    }
    let mut correct = 0usize;
    for &r in rows {
        if r >= logits.rows() || r >= labels.len() {
            return Err(Error::input(format!("row {r} out of range")));
        }
        if logits.argmax_row(r) == labels[r] {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Nodes the regularizers compare the training nodes against.
pub fn reg_rows(masks: &SplitMasks, target: RegTarget) -> Vec<usize> {
    match target {
        RegTarget::TestOnly => masks.test_indices(),
        RegTarget::AllUnlabeled => (0..masks.num_nodes())
            .filter(|&i| !masks.train[i])
            .collect(),
    }
}

/// Trains one model on `masks.train` with seed `cfg.seed`.
///
/// Every epoch runs one full-graph forward pass in training mode, one Adam
/// update, and an evaluation-mode pass for validation F1. Training stops
/// once `patience` epochs pass without a strict improvement; the parameters
/// of the best validation epoch are restored for the test evaluation.
pub fn train(cfg: &TrainConfig, graph: &Graph, masks: &SplitMasks) -> Result<TrialReport> {
    cfg.validate()?;
    let start = Instant::now();
    let train_rows = masks.train_indices();
    let val_rows = masks.val_indices();
    let test_rows = masks.test_indices();
    if train_rows.is_empty() || val_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::input(
            "train, validation and test masks must be non-empty",
        ));
    }
    let reg = reg_rows(masks, cfg.reg_target);
    let loss_cfg = LossConfig {
        lambda: cfg.lambda,
        beta: cfg.beta,
        cmd: cfg.cmd,
        mmd: cfg.mmd,
        space: cfg.reg_space,
    };

    let inputs = ModelInputs::new(graph);
    let mut model = Model::init(
        cfg.model,
        graph.num_features(),
        cfg.hidden,
        graph.num_classes(),
        cfg.propagation_steps,
        cfg.alpha,
        cfg.dropout,
        cfg.seed,
    )?;
    let initial: Vec<Matrix> = model.parameters().into_iter().cloned().collect();
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(&initial, adam_cfg)
        .with_weight_decay(model.weight_decay_mask(cfg.weight_decay));
    let mut dropout_rng = seeded(cfg.seed, Stream::Dropout);

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Model)> = None;
    for epoch in 0..cfg.max_epochs {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &inputs, true, &mut dropout_rng)?;
        let terms = total_loss(
            &mut tape,
            fwd.logits,
            graph.labels(),
            &train_rows,
            &reg,
            &loss_cfg,
        )?;
        let total = terms.total_value(&tape);
        if !total.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!(
                    "loss is {total} (ce {}, cmd {}, mmd {})",
                    terms.ce, terms.cmd, terms.mmd
                ),
            });
        }
        let grads = tape.backward(terms.total)?;
        let grads: Vec<Matrix> = fwd
            .params
            .iter()
            .map(|&v| grads.get_or_zeros(v, &tape))
            .collect();
        if let Some(k) = grads
            .iter()
            .position(|g| g.data().iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Divergence {
                epoch,
                detail: format!("non-finite gradient for `{}`", model.parameter_names()[k]),
            });
        }
        drop(tape);
        let mut params: Vec<Matrix> = model.parameters().into_iter().cloned().collect();
        adam_step(&mut params, &grads, &mut adam)?;
        for (slot, p) in model.parameters_mut().into_iter().zip(params) {
            *slot = p;
        }

        let logits = model.predict(&inputs)?;
        let val_f1 = evaluate_f1_micro(&logits, graph.labels(), &val_rows)?;
        history.push(EpochRecord {
            epoch,
            ce: terms.ce,
            cmd: terms.cmd,
            mmd: terms.mmd,
            total,
            val_f1,
        });
        if best.as_ref().is_none_or(|(_, f1, _)| val_f1 > *f1) {
            best = Some((epoch, val_f1, model.clone()));
        }
        let best_epoch = best.as_ref().expect("set above").0;
        if epoch - best_epoch >= cfg.patience {
            log::debug!("early stop at epoch {epoch}, best epoch {best_epoch}");
            break;
        }
    }

    let (best_epoch, best_val_f1, best_model) = best.expect("at least one epoch runs");
    let logits = best_model.predict(&inputs)?;
    let test_f1 = evaluate_f1_micro(&logits, graph.labels(), &test_rows)?;
    Ok(TrialReport {
        seed: cfg.seed,
        train_indices: train_rows,
        sampler_seed_node: None,
        history,
        best_epoch,
        best_val_f1,
        test_f1,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_counts() {
        let logits = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 1.0], [0.5, 0.5]]).unwrap();
        let rows = [0, 1, 2, 3];
        assert_eq!(
            evaluate_f1_micro(&logits, &[0, 1, 0, 0], &rows).unwrap(),
            1.0
        );
        assert_eq!(
            evaluate_f1_micro(&logits, &[1, 0, 1, 1], &rows).unwrap(),
            0.0
        );
        // the tied last row predicts class 0
        assert_eq!(
            evaluate_f1_micro(&logits, &[0, 1, 0, 1], &rows).unwrap(),
            0.75
        );
        assert!(evaluate_f1_micro(&logits, &[0, 1, 0, 1], &[]).is_err());
    }
}
