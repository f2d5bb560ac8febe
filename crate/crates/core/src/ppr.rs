//! Personalized PageRank and the biased training-set sampler.
//!
//! Scores follow `Π = (I − (1 − α) Ã)⁻¹` as written, without the usual `α`
//! prefactor; rankings are unaffected by the constant.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::draw_per_class;
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::rng::{seeded, Stream};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PprMode {
    ExactSolve,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PprConfig {
    /// Teleport probability in `(0, 1]`.
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop once the max-abs change between iterates is at most this.
    pub tolerance: f64,
    pub mode: PprMode,
    /// Largest graph the exact solver accepts.
    pub dense_cap: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            max_iters: 10_000,
            tolerance: 1e-10,
            mode: PprMode::PowerIteration,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::input(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::input("PPR tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::input("PPR max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Dense `(I − (1 − α) Ã)⁻¹`.
///
/// The system matrix is symmetric positive definite (its spectrum lies in
/// `[α, 2 − α]`), so a Cholesky factorization is used and the columns of the
/// inverse are solved independently in parallel.
pub fn ppr_exact(norm_adj: &SparseMatrix, alpha: f64, dense_cap: usize) -> Result<Matrix> {
    let n = norm_adj.num_rows();
    if n > dense_cap {
        return Err(Error::DenseCap { n, cap: dense_cap });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::input(format!("alpha {alpha} outside (0, 1]")));
    }
    let mut system = Matrix::identity(n);
    for i in 0..n {
        for (j, v) in norm_adj.row(i) {
            system[(i, j)] -= (1.0 - alpha) * v;
        }
    }
    let chol = cholesky(system)?;
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cholesky_solve(&chol, e)
        })
        .collect();
    let mut pi = Matrix::zeros(n, n);
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            pi[(i, j)] = v;
        }
    }
    Ok(pi)
}

/// Lower-triangular `L` with `L Lᵀ = a`.
fn cholesky(mut a: Matrix) -> Result<Matrix> {
    let n = a.rows();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::input("PPR system matrix is not positive definite"));
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in j + 1..n {
            let (ri, rj) = (i * n, j * n);
            let data = a.data();
            let dot: f64 = data[ri..ri + j]
                .iter()
                .zip(&data[rj..rj + j])
                .map(|(x, y)| x * y)
                .sum();
            a[(i, j)] = (a[(i, j)] - dot) / d;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            a[(i, j)] = 0.0;
        }
    }
    Ok(a)
}

fn cholesky_solve(l: &Matrix, mut b: Vec<f64>) -> Vec<f64> {
    let n = l.rows();
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&b[..i]).map(|(x, y)| x * y).sum();
        b[i] = (b[i] - s) / row[i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    b
}

/// Column `source` of `Π` by iterating `π ← (1 − α) Ã π + e_source` from `e_source`.
pub fn ppr_power(
    norm_adj: &SparseMatrix,
    alpha: f64,
    source: usize,
    cfg: &PprConfig,
) -> Result<Vec<f64>> {
    let n = norm_adj.num_rows();
    if source >= n {
        return Err(Error::input(format!(
            "PPR source {source} outside [0, {n})"
        )));
    }
    PprConfig { alpha, ..*cfg }.validate()?;
    let mut pi = vec![0.0; n];
    pi[source] = 1.0;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        residual = 0.0;
        for (i, out) in next.iter_mut().enumerate() {
            let mut acc = if i == source { 1.0 } else { 0.0 };
            let mut prop = 0.0;
            for (j, v) in norm_adj.row(i) {
                prop += v * pi[j];
            }
            acc += (1.0 - alpha) * prop;
            residual = f64::max(residual, (acc - pi[i]).abs());
            *out = acc;
        }
        std::mem::swap(&mut pi, &mut next);
        if residual <= cfg.tolerance {
            return Ok(pi);
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual,
    })
}

/// Several columns of `Π` by power iteration, computed in parallel and
/// returned as an `n × sources.len()` matrix.
pub fn ppr_columns(norm_adj: &SparseMatrix, sources: &[usize], cfg: &PprConfig) -> Result<Matrix> {
    let cols = sources
        .par_iter()
        .map(|&s| ppr_power(norm_adj, cfg.alpha, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let n = norm_adj.num_rows();
    let mut out = Matrix::zeros(n, sources.len());
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Anything that can produce the PPR score vector of a seed node.
pub trait PprScores {
    fn num_nodes(&self) -> usize;
    fn scores_for(&self, seed: usize) -> Result<Vec<f64>>;
}

/// A precomputed dense `Π`. `Π` is symmetric, so the row is used.
impl PprScores for Matrix {
    fn num_nodes(&self) -> usize {
        self.rows()
    }

    fn scores_for(&self, seed: usize) -> Result<Vec<f64>> {
        if seed >= self.rows() {
            return Err(Error::input(format!("seed node {seed} out of range")));
        }
        Ok(self.row(seed).to_vec())
    }
}

/// Scores computed on demand, by power iteration or exact solve per `cfg.mode`.
pub struct LazyPpr<'a> {
    pub norm_adj: &'a SparseMatrix,
    pub cfg: PprConfig,
}

impl PprScores for LazyPpr<'_> {
    fn num_nodes(&self) -> usize {
        self.norm_adj.num_rows()
    }

    fn scores_for(&self, seed: usize) -> Result<Vec<f64>> {
        match self.cfg.mode {
            PprMode::PowerIteration => ppr_power(self.norm_adj, self.cfg.alpha, seed, &self.cfg),
            PprMode::ExactSolve => {
                ppr_exact(self.norm_adj, self.cfg.alpha, self.cfg.dense_cap)?.scores_for(seed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    /// Probability that a training slot goes to the top-ranked remaining
    /// candidate instead of a uniform draw.
    pub epsilon: f64,
    pub per_class_train: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasedSelection {
    pub seed_node: usize,
    /// Sorted training node indices.
    pub indices: Vec<usize>,
}

/// Serialized form of a drawn training mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMaskRecord {
    pub seed: u64,
    pub epsilon: f64,
    pub indices: Vec<usize>,
}

impl TrainMaskRecord {
    pub fn new(cfg: &BiasConfig, selection: &BiasedSelection) -> Self {
        Self {
            seed: cfg.seed,
            epsilon: cfg.epsilon,
            indices: selection.indices.clone(),
        }
    }
}

/// Draws a localized training set.
///
/// One seed node is chosen uniformly among `candidates`; for each class the
/// budget is filled slot by slot, taking the candidate with the highest PPR
/// score from the seed (ties to the lower index) with probability `epsilon`
/// and a uniform remaining candidate otherwise. At `epsilon = 0` the result
/// equals [`crate::dataset::select_uniform_train`] for the same seed.
pub fn biased_train_select(
    graph: &Graph,
    scores: &dyn PprScores,
    candidates: &[bool],
    cfg: &BiasConfig,
) -> Result<BiasedSelection> {
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::input(format!(
            "bias epsilon {} outside [0, 1]",
            cfg.epsilon
        )));
    }
    if scores.num_nodes() != graph.num_nodes() || candidates.len() != graph.num_nodes() {
        return Err(Error::input(
            "PPR scores or candidate mask do not match the graph",
        ));
    }
    let pool: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i]).collect();
    if pool.is_empty() {
        return Err(Error::input("no candidate training nodes"));
    }
    let mut coins = seeded(cfg.seed, Stream::BiasCoins);
    let seed_node = pool[coins.random_range(0..pool.len())];
    let ppr = scores.scores_for(seed_node)?;
    let epsilon = cfg.epsilon;
    let indices = draw_per_class(
        graph,
        candidates,
        cfg.per_class_train,
        cfg.seed,
        |_, remaining| {
            if coins.random::<f64>() < epsilon {
                Some(top_ranked(&ppr, remaining))
            } else {
                None
            }
        },
    )?;
    Ok(BiasedSelection { seed_node, indices })
}

fn top_ranked(scores: &[f64], remaining: &[usize]) -> usize {
    let mut best = 0;
    for (pos, &node) in remaining.iter().enumerate().skip(1) {
        let b = remaining[best];
        if scores[node] > scores[b] || (scores[node] == scores[b] && node < b) {
            best = pos;
        }
    }
    best
}
