//! Differentiable distances between two samples of representation rows:
//! central moment discrepancy (CMD) and maximum mean discrepancy (MMD).

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmdConfig {
    /// Highest moment order included; order 1 is the mean.
    pub num_moments: usize,
    pub support_lo: f64,
    pub support_hi: f64,
}

impl Default for CmdConfig {
    fn default() -> Self {
        Self {
            num_moments: 5,
            support_lo: 0.0,
            support_hi: 1.0,
        }
    }
}

impl CmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_moments == 0 {
            return Err(Error::input("CMD needs at least one moment"));
        }
        if self.support_hi.partial_cmp(&self.support_lo) != Some(std::cmp::Ordering::Greater)
            || !(self.support_hi - self.support_lo).is_finite()
        {
            return Err(Error::input(format!(
                "CMD support [{}, {}] is empty",
                self.support_lo, self.support_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median pairwise distance of the pooled sample, see [`median_bandwidth`].
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Rbf,
            bandwidth: Bandwidth::Median,
        }
    }
}

impl MmdConfig {
    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::input(format!("MMD bandwidth {s} must be positive")));
            }
        }
        Ok(())
    }
}

fn check_samples(tape: &Tape, p: Var, q: Var, op: &'static str) -> Result<()> {
    let (x, y) = (tape.value(p), tape.value(q));
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::input(format!("{op} of an empty sample")));
    }
    if x.cols() != y.cols() {
        return Err(Error::Shape {
            op,
            lhs: x.shape(),
            rhs: y.shape(),
        });
    }
    Ok(())
}

/// `‖E(P) − E(Q)‖ / |b − a| + Σ_{k=2..K} ‖c_k(P) − c_k(Q)‖`, where `c_k` is
/// the column-wise k-th central sample moment.
pub fn cmd(tape: &mut Tape, p: Var, q: Var, cfg: &CmdConfig) -> Result<Var> {
    cfg.validate()?;
    check_samples(tape, p, q, "cmd")?;
    let mean_p = tape.mean_rows(p)?;
    let mean_q = tape.mean_rows(q)?;
    let diff = tape.sub(mean_p, mean_q)?;
    let first = tape.l2_norm(diff);
    let mut total = tape.scale(first, 1.0 / (cfg.support_hi - cfg.support_lo).abs());
    if cfg.num_moments < 2 {
        return Ok(total);
    }
    let centered_p = tape.sub_broadcast(p, mean_p)?;
    let centered_q = tape.sub_broadcast(q, mean_q)?;
    for k in 2..=cfg.num_moments as i32 {
        let pk = tape.powi(centered_p, k);
        let qk = tape.powi(centered_q, k);
        let cp = tape.mean_rows(pk)?;
        let cq = tape.mean_rows(qk)?;
        let d = tape.sub(cp, cq)?;
        let term = tape.l2_norm(d);
        total = tape.add(total, term)?;
    }
    Ok(total)
}

/// Linear kernel: `‖mean(P) − mean(Q)‖`. RBF kernel: the square root of the
/// biased estimate `mean k(P,P) + mean k(Q,Q) − 2·mean k(P,Q)`, clamped at 0,
/// with `k(x, y) = exp(−‖x − y‖² / (2σ²))`.
///
/// A median bandwidth is computed from the current values and treated as a
/// constant; no gradient flows through it.
pub fn mmd(tape: &mut Tape, p: Var, q: Var, cfg: &MmdConfig) -> Result<Var> {
    cfg.validate()?;
    check_samples(tape, p, q, "mmd")?;
    match cfg.kernel {
        Kernel::Linear => {
            let mp = tape.mean_rows(p)?;
            let mq = tape.mean_rows(q)?;
            let d = tape.sub(mp, mq)?;
            Ok(tape.l2_norm(d))
        }
        Kernel::Rbf => {
            let sigma = match cfg.bandwidth {
                Bandwidth::Fixed(s) => s,
                Bandwidth::Median => median_bandwidth(tape.value(p), tape.value(q))?,
            };
            let kpp = tape.rbf_kernel_mean(p, p, sigma)?;
            let kqq = tape.rbf_kernel_mean(q, q, sigma)?;
            let kpq = tape.rbf_kernel_mean(p, q, sigma)?;
            let within = tape.add(kpp, kqq)?;
            let cross = tape.scale(kpq, 2.0);
            let sq = tape.sub(within, cross)?;
            Ok(tape.sqrt_clamped(sq))
        }
    }
}

/// Median Euclidean distance over all pairs of rows of `P` stacked on `Q`,
/// averaging the two middle values for an even pair count. Falls back to
/// 1.0 when the median is 0.
pub fn median_bandwidth(p: &Matrix, q: &Matrix) -> Result<f64> {
    if p.cols() != q.cols() {
        return Err(Error::Shape {
            op: "median_bandwidth",
            lhs: p.shape(),
            rhs: q.shape(),
        });
    }
    let rows: Vec<&[f64]> = (0..p.rows())
        .map(|i| p.row(i))
        .chain((0..q.rows()).map(|i| q.row(i)))
        .collect();
    if rows.len() < 2 {
        return Err(Error::input("median bandwidth needs at least two rows"));
    }
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let sq: f64 = rows[i]
                .iter()
                .zip(rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, &mut upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}
