use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{make_uniform_splits, SplitMasks};
use crate::graph::Graph;
use crate::ppr::{biased_train_select, ppr_exact, BiasConfig, LazyPpr, PprMode, PprScores};
use crate::stats::{mean, population_std};
use crate::{Error, Result};

use super::{train, TrainConfig, TrialReport};

pub const AGGREGATE_SCHEMA: &str = "shiftreg.aggregate/v1";
pub const SWEEP_SCHEMA: &str = "shiftreg.sweep/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema: String,
    pub config: TrainConfig,
    /// Successful trials in seed order.
    pub trials: Vec<TrialReport>,
    /// Trials that failed; they are excluded from the statistics.
    pub failures: Vec<TrialFailure>,
    pub f1_mean: f64,
    /// Population standard deviation over trials.
    pub f1_std: f64,
}

impl AggregateReport {
    /// Aggregates finished trials. Fails when none succeeded.
    pub fn from_trials(
        config: TrainConfig,
        trials: Vec<TrialReport>,
        failures: Vec<TrialFailure>,
    ) -> Result<Self> {
        if trials.is_empty() {
            let detail = failures
                .iter()
                .map(|f| format!("seed {}: {}", f.seed, f.error))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::TrialsFailed(detail));
        }
        let f1s = Self::f1_values(&trials);
        Ok(Self {
            schema: AGGREGATE_SCHEMA.to_string(),
            config,
            f1_mean: mean(&f1s),
            f1_std: population_std(&f1s),
            trials,
            failures,
        })
    }

    fn f1_values(trials: &[TrialReport]) -> Vec<f64> {
        trials.iter().map(|t| t.test_f1).collect()
    }

    pub fn test_f1s(&self) -> Vec<f64> {
        Self::f1_values(&self.trials)
    }

    pub fn num_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn wall_time_secs(&self) -> f64 {
        self.trials.iter().map(|t| t.wall_time_secs).sum()
    }
}

/// Validation and test sets shared by every trial of `cfg`, drawn from the
/// base seed.
pub fn fixed_splits(cfg: &TrainConfig, graph: &Graph) -> Result<SplitMasks> {
    make_uniform_splits(
        graph,
        cfg.per_class_train,
        cfg.val_size,
        cfg.test_size,
        cfg.seed,
    )
}

/// The training mask of trial seed `seed`: `per_class_train` nodes per class
/// from outside validation/test, biased toward a random PPR seed node with
/// strength `cfg.epsilon`.
pub fn draw_train_mask(
    cfg: &TrainConfig,
    graph: &Graph,
    base: &SplitMasks,
    scores: &dyn PprScores,
    seed: u64,
) -> Result<(SplitMasks, usize)> {
    let bias = BiasConfig {
        epsilon: cfg.epsilon,
        per_class_train: cfg.per_class_train,
        seed,
    };
    let selection = biased_train_select(graph, scores, &base.train_candidates(), &bias)?;
    Ok((base.with_train(&selection.indices)?, selection.seed_node))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::input(format!("cannot start {jobs} worker threads: {e}")))
}

/// Runs `n_trials` trials with seeds `cfg.seed, cfg.seed + 1, …`.
///
/// Validation and test sets stay fixed; each trial draws its own training
/// mask, initialization and dropout from its seed. Failed trials are
/// recorded and left out of the mean and standard deviation.
pub fn run_trials(cfg: &TrainConfig, graph: &Graph, n_trials: usize) -> Result<AggregateReport> {
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    let base = fixed_splits(cfg, graph)?;
    let dense;
    let lazy;
    let scores: &(dyn PprScores + Sync) = match cfg.ppr.mode {
        PprMode::ExactSolve => {
            dense = ppr_exact(graph.norm_adjacency(), cfg.ppr.alpha, cfg.ppr.dense_cap)?;
            &dense
        }
        PprMode::PowerIteration => {
            lazy = LazyPpr {
                norm_adj: graph.norm_adjacency(),
                cfg: cfg.ppr,
            };
            &lazy
        }
    };

    let run_one = |i: usize| -> Result<TrialReport> {
        let seed = cfg.seed + i as u64;
        let (masks, seed_node) = draw_train_mask(cfg, graph, &base, scores, seed)?;
        let trial_cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let mut report = train(&trial_cfg, graph, &masks)?;
        report.sampler_seed_node = Some(seed_node);
        Ok(report)
    };
    let outcomes: Vec<Result<TrialReport>> =
        pool(cfg.jobs)?.install(|| (0..n_trials).into_par_iter().map(run_one).collect());

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => {
                let seed = cfg.seed + i as u64;
                log::warn!("trial with seed {seed} failed: {e}");
                failures.push(TrialFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let mut config = cfg.clone();
    config.trials = n_trials;
    AggregateReport::from_trials(config, trials, failures)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    Beta,
    Epsilon,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Beta => "beta",
            SweepAxis::Epsilon => "epsilon",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepAxis::Lambda),
            "beta" => Ok(SweepAxis::Beta),
            "epsilon" => Ok(SweepAxis::Epsilon),
            other => Err(Error::input(format!(
                "unknown sweep axis `{other}` (expected lambda, beta or epsilon)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub schema: String,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

/// One [`run_trials`] aggregate per value of `axis`, in input order, with
/// everything else taken from `base`.
pub fn sweep(
    base: &TrainConfig,
    graph: &Graph,
    axis: SweepAxis,
    values: &[f64],
    n_trials: usize,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::input("sweep needs at least one value"));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base.clone();
        match axis {
            SweepAxis::Lambda => cfg.lambda = value,
            SweepAxis::Beta => cfg.beta = value,
            SweepAxis::Epsilon => cfg.epsilon = value,
        }
        log::info!("sweep {} = {value}", axis.name());
        points.push(SweepPoint {
            value,
            report: run_trials(&cfg, graph, n_trials)?,
        });
    }
    Ok(SweepTable {
        schema: SWEEP_SCHEMA.to_string(),
        axis,
        points,
    })
}
