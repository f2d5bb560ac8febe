use crate::autodiff::{Tape, Var};
use crate::discrepancy::{cmd, mmd, CmdConfig, MmdConfig};
use crate::{Error, Result};

use super::RegSpace;

/// Settings of the regularized objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub beta: f64,
    pub cmd: CmdConfig,
    pub mmd: MmdConfig,
    pub space: RegSpace,
}

/// The recorded objective and its parts.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub ce: f64,
    /// Zero when `lambda` is 0 (the term is not evaluated).
    pub cmd: f64,
    /// Zero when `beta` is 0 (the term is not evaluated).
    pub mmd: f64,
}

impl LossTerms {
    pub fn total_value(&self, tape: &Tape) -> f64 {
        tape.value(self.total).item()
    }
}

/// Cross-entropy over `train_rows` plus `λ·CMD + β·MMD` between the
/// representations of `train_rows` and `reg_rows`.
///
/// A weight of exactly 0 skips its term, so `λ = β = 0` records the same
/// operations as plain cross-entropy training.
pub fn total_loss(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    train_rows: &[usize],
    reg_rows: &[usize],
    cfg: &LossConfig,
) -> Result<LossTerms> {
    for (name, w) in [("lambda", cfg.lambda), ("beta", cfg.beta)] {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::input(format!(
                "{name} must be a finite value ≥ 0, got {w}"
            )));
        }
    }
    let ce = tape.softmax_cross_entropy(logits, labels, train_rows)?;
    let ce_value = tape.value(ce).item();
    if cfg.lambda == 0.0 && cfg.beta == 0.0 {
        return Ok(LossTerms {
            total: ce,
            ce: ce_value,
            cmd: 0.0,
            mmd: 0.0,
        });
    }
    if reg_rows.is_empty() {
        return Err(Error::input("regularizer target set is empty"));
    }
    let n = tape.value(logits).rows();
    let mut in_train = vec![false; n];
    for &r in train_rows {
        in_train[r] = true;
    }
    if reg_rows.iter().any(|&r| r >= n || in_train[r]) {
        return Err(Error::input(
            "regularizer rows overlap the training rows or are out of range",
        ));
    }
    let p = tape.select_rows(logits, train_rows)?;
    let q = tape.select_rows(logits, reg_rows)?;
    let (p, q) = match cfg.space {
        RegSpace::Probabilities => (tape.row_softmax(p), tape.row_softmax(q)),
        RegSpace::Logits => (p, q),
    };
    let mut total = ce;
    let mut cmd_value = 0.0;
    let mut mmd_value = 0.0;
    if cfg.lambda != 0.0 {
        let d = cmd(tape, p, q, &cfg.cmd)?;
        cmd_value = tape.value(d).item();
        let weighted = tape.scale(d, cfg.lambda);
        total = tape.add(total, weighted)?;
    }
    if cfg.beta != 0.0 {
        let d = mmd(tape, p, q, &cfg.mmd)?;
        mmd_value = tape.value(d).item();
        let weighted = tape.scale(d, cfg.beta);
        total = tape.add(total, weighted)?;
    }
    Ok(LossTerms {
        total,
        ce: ce_value,
        cmd: cmd_value,
        mmd: mmd_value,
    })
}
