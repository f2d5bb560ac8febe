//! Helpers shared by the integration tests: random inputs, brute-force
//! oracles and the gradient-check cases.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng as _;
use shiftreg::autodiff::gradcheck::{gradcheck, GradcheckReport, DEFAULT_STEP};
use shiftreg::autodiff::{Tape, Var};
use shiftreg::discrepancy::{cmd, mmd, Bandwidth, CmdConfig, Kernel, MmdConfig};
use shiftreg::experiment::{total_loss, LossConfig, RegSpace};
use shiftreg::rng::{seeded, Rng, Stream};
use shiftreg::sparse::{build_csr, normalize_adjacency};
use shiftreg::{Graph, Matrix, Result, SparseMatrix};

pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

pub fn rng(seed: u64) -> Rng {
    seeded(seed, Stream::Synthetic)
}

pub fn uniform(rng: &mut Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Like [`uniform`] on `[-1, 1]` but every entry at least `margin` away from 0.
pub fn away_from_zero(rng: &mut Rng, rows: usize, cols: usize, margin: f64) -> Matrix {
    uniform(rng, rows, cols, -1.0, 1.0).map(|v| {
        if v.abs() < margin {
            v.signum() * margin + v
        } else {
            v
        }
    })
}

/// Erdős–Rényi edge list on `n` nodes.
pub fn random_edges(rng: &mut Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn random_norm_adjacency(rng: &mut Rng, n: usize, p: f64) -> SparseMatrix {
    normalize_adjacency(&build_csr(&random_edges(rng, n, p), n).unwrap())
}

/// `exp(−‖x − y‖² / (2σ²))` for every ordered pair, averaged.
pub fn pairwise_kernel_mean(x: &Matrix, y: &Matrix, sigma: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        for j in 0..y.rows() {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(y.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += (-d2 / (2.0 * sigma * sigma)).exp();
        }
    }
    total / (x.rows() * y.rows()) as f64
}

/// Biased squared-MMD estimate by an explicit double loop, then the clamped root.
pub fn mmd_rbf_oracle(p: &Matrix, q: &Matrix, sigma: f64) -> f64 {
    let sq = pairwise_kernel_mean(p, p, sigma) + pairwise_kernel_mean(q, q, sigma)
        - 2.0 * pairwise_kernel_mean(p, q, sigma);
    sq.max(0.0).sqrt()
}

/// Median of all pairwise distances, by sorting.
pub fn median_distance_oracle(p: &Matrix, q: &Matrix) -> f64 {
    let mut rows: Vec<Vec<f64>> = (0..p.rows()).map(|i| p.row(i).to_vec()).collect();
    rows.extend((0..q.rows()).map(|i| q.row(i).to_vec()));
    let mut d = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Column-wise moments computed directly from the definition.
pub fn cmd_oracle(p: &Matrix, q: &Matrix, cfg: &CmdConfig) -> f64 {
    let means = |m: &Matrix| -> Vec<f64> {
        (0..m.cols())
            .map(|j| m.column(j).iter().sum::<f64>() / m.rows() as f64)
            .collect()
    };
    let central = |m: &Matrix, mu: &[f64], k: i32| -> Vec<f64> {
        (0..m.cols())
            .map(|j| m.column(j).iter().map(|v| (v - mu[j]).powi(k)).sum::<f64>() / m.rows() as f64)
            .collect()
    };
    let norm = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let (mp, mq) = (means(p), means(q));
    let mut total = norm(&mp, &mq) / (cfg.support_hi - cfg.support_lo).abs();
    for k in 2..=cfg.num_moments as i32 {
        total += norm(&central(p, &mp, k), &central(q, &mq, k));
    }
    total
}

pub fn scalar_of(f: impl FnOnce(&mut Tape) -> Result<Var>) -> f64 {
    let mut t = Tape::new();
    let v = f(&mut t).unwrap();
    t.value(v).item()
}

/// Reduces a matrix output to a scalar with fixed random weights, so that
/// every output entry influences the checked value differently.
fn weighted_sum(t: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let (r, c) = t.value(out).shape();
    let w = t.constant(uniform(&mut rng(seed ^ 0x5eed), r, c, -1.0, 1.0));
    let prod = t.mul(out, w)?;
    Ok(t.sum(prod))
}

fn dims(seed: u64) -> (usize, usize, usize) {
    let mut r = rng(seed);
    (
        r.random_range(1..6),
        r.random_range(1..5),
        r.random_range(1..5),
    )
}

type CaseFn = fn(u64) -> Result<GradcheckReport>;

fn check(
    inputs: &[Matrix],
    seed: u64,
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> Result<GradcheckReport> {
    gradcheck(inputs, DEFAULT_STEP, |t, v| {
        let out = f(t, v)?;
        if t.value(out).shape() == (1, 1) {
            Ok(out)
        } else {
            weighted_sum(t, out, seed)
        }
    })
}

/// Every differentiable operation plus the metrics and the full loss, each
/// as a function of a shape seed.
pub fn gradcheck_cases() -> Vec<(&'static str, CaseFn)> {
    vec![
        ("matmul", |s| {
            let (n, k, m) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, k, -1.0, 1.0),
                uniform(&mut r, k, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| t.matmul(v[0], v[1]))
        }),
        ("spmm", |s| {
            let (n, _, m) = dims(s);
            let mut r = rng(s);
            let adj = Arc::new(random_norm_adjacency(&mut r, n, 0.5));
            let b = uniform(&mut r, n, m, -1.0, 1.0);
            check(&[b], s, move |t, v| t.spmm(Arc::clone(&adj), v[0]))
        }),
        ("add", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, m, -1.0, 1.0),
                uniform(&mut r, n, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| t.add(v[0], v[1]))
        }),
        ("sub", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, m, -1.0, 1.0),
                uniform(&mut r, n, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| t.sub(v[0], v[1]))
        }),
        ("mul", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, m, -1.0, 1.0),
                uniform(&mut r, n, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| t.mul(v[0], v[1]))
        }),
        ("add_broadcast", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, m, -1.0, 1.0),
                uniform(&mut r, 1, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| t.add_broadcast(v[0], v[1]))
        }),
        ("sub_broadcast", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, m, -1.0, 1.0),
                uniform(&mut r, 1, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| t.sub_broadcast(v[0], v[1]))
        }),
        ("scale", |s| {
            let (n, m, _) = dims(s);
            let a = uniform(&mut rng(s), n, m, -1.0, 1.0);
            check(&[a], s, |t, v| Ok(t.scale(v[0], -1.7)))
        }),
        ("relu", |s| {
            let (n, m, _) = dims(s);
            let a = away_from_zero(&mut rng(s), n, m, 1e-3);
            check(&[a], s, |t, v| Ok(t.relu(v[0])))
        }),
        ("dropout", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let a = uniform(&mut r, n, m, -1.0, 1.0);
            let mask: Vec<f64> = (0..n * m)
                .map(|_| if r.random::<f64>() < 0.5 { 0.0 } else { 2.0 })
                .collect();
            check(&[a], s, move |t, v| {
                Ok(t.dropout_with_mask(v[0], mask.clone()))
            })
        }),
        ("powi", |s| {
            let (n, m, k) = dims(s);
            let a = uniform(&mut rng(s), n, m, -1.0, 1.0);
            check(&[a], s, move |t, v| Ok(t.powi(v[0], k as i32 + 1)))
        }),
        ("row_softmax", |s| {
            let (n, m, _) = dims(s);
            let a = uniform(&mut rng(s), n, m, -2.0, 2.0);
            check(&[a], s, |t, v| Ok(t.row_softmax(v[0])))
        }),
        ("mean_rows", |s| {
            let (n, m, _) = dims(s);
            let a = uniform(&mut rng(s), n, m, -1.0, 1.0);
            check(&[a], s, |t, v| t.mean_rows(v[0]))
        }),
        ("sum", |s| {
            let (n, m, _) = dims(s);
            let a = uniform(&mut rng(s), n, m, -1.0, 1.0);
            check(&[a], s, |t, v| Ok(t.sum(v[0])))
        }),
        ("mean", |s| {
            let (n, m, _) = dims(s);
            let a = uniform(&mut rng(s), n, m, -1.0, 1.0);
            check(&[a], s, |t, v| t.mean(v[0]))
        }),
        ("select_rows", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let a = uniform(&mut r, n, m, -1.0, 1.0);
            // repeated rows exercise gradient accumulation
            let rows: Vec<usize> = (0..n + 2).map(|_| r.random_range(0..n)).collect();
            check(&[a], s, move |t, v| t.select_rows(v[0], &rows))
        }),
        ("l2_norm", |s| {
            let (n, m, _) = dims(s);
            let a = away_from_zero(&mut rng(s), n, m, 0.1);
            check(&[a], s, |t, v| Ok(t.l2_norm(v[0])))
        }),
        ("sqrt_clamped", |s| {
            let (n, m, _) = dims(s);
            let a = uniform(&mut rng(s), n, m, 0.1, 2.0);
            check(&[a], s, |t, v| Ok(t.sqrt_clamped(v[0])))
        }),
        ("softmax_cross_entropy", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let a = uniform(&mut r, n, m + 1, -2.0, 2.0);
            let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..m + 1)).collect();
            let rows: Vec<usize> = (0..n).filter(|_| r.random::<f64>() < 0.7).collect();
            let rows = if rows.is_empty() { vec![0] } else { rows };
            check(&[a], s, move |t, v| {
                t.softmax_cross_entropy(v[0], &labels, &rows)
            })
        }),
        ("rbf_kernel_mean", |s| {
            let (n, m, k) = dims(s);
            let mut r = rng(s);
            let (a, b) = (
                uniform(&mut r, n, m, -1.0, 1.0),
                uniform(&mut r, k, m, -1.0, 1.0),
            );
            check(&[a, b], s, |t, v| {
                let cross = t.rbf_kernel_mean(v[0], v[1], 0.8)?;
                let within = t.rbf_kernel_mean(v[0], v[0], 0.8)?;
                let within = t.scale(within, 0.7);
                t.add(cross, within)
            })
        }),
        ("cmd", |s| {
            let (n, m, k) = dims(s);
            let mut r = rng(s);
            let (p, q) = (
                uniform(&mut r, n + 1, m, 0.0, 1.0),
                uniform(&mut r, k + 1, m, 0.0, 1.0),
            );
            check(&[p, q], s, |t, v| cmd(t, v[0], v[1], &CmdConfig::default()))
        }),
        ("mmd_rbf", |s| {
            let (n, m, k) = dims(s);
            let mut r = rng(s);
            let (p, q) = (
                uniform(&mut r, n, m, 0.0, 1.0),
                uniform(&mut r, k, m, 0.0, 1.0),
            );
            let cfg = MmdConfig {
                kernel: Kernel::Rbf,
                bandwidth: Bandwidth::Fixed(0.5),
            };
            check(&[p, q], s, move |t, v| mmd(t, v[0], v[1], &cfg))
        }),
        ("mmd_linear", |s| {
            let (n, m, k) = dims(s);
            let mut r = rng(s);
            let (p, q) = (
                uniform(&mut r, n, m, 0.0, 1.0),
                uniform(&mut r, k, m, 0.0, 1.0),
            );
            let cfg = MmdConfig {
                kernel: Kernel::Linear,
                bandwidth: Bandwidth::Median,
            };
            check(&[p, q], s, move |t, v| mmd(t, v[0], v[1], &cfg))
        }),
        ("total_loss", |s| {
            let (n, m, _) = dims(s);
            let mut r = rng(s);
            let rows = n + 4;
            let logits = uniform(&mut r, rows, m + 1, -2.0, 2.0);
            let labels: Vec<usize> = (0..rows).map(|_| r.random_range(0..m + 1)).collect();
            let split = 1 + r.random_range(0..rows - 2);
            let train: Vec<usize> = (0..split).collect();
            let reg: Vec<usize> = (split..rows).collect();
            let cfg = LossConfig {
                lambda: 0.5,
                beta: 1.0,
                cmd: CmdConfig::default(),
                mmd: MmdConfig {
                    kernel: Kernel::Rbf,
                    bandwidth: Bandwidth::Fixed(0.4),
                },
                space: RegSpace::Probabilities,
            };
            check(&[logits], s, move |t, v| {
                Ok(total_loss(t, v[0], &labels, &train, &reg, &cfg)?.total)
            })
        }),
    ]
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    let u = rng.random::<f64>().max(1e-300);
    let v = rng.random::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Blocks laid out on a line: dense inside a block, sparse between
/// neighbouring blocks, nothing further apart. Block `b` has class
/// `b % classes`, and features mix a weak class prototype with a strong
/// per-block prototype, so a training set drawn from a few neighbouring
/// blocks generalizes poorly to the rest of the graph.
pub fn block_chain_graph(
    blocks: usize,
    per_block: usize,
    classes: usize,
    class_signal: f64,
    seed: u64,
) -> Graph {
    let mut r = rng(seed);
    let n = blocks * per_block;
    let block = |i: usize| i / per_block;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = match block(j) - block(i) {
                0 => 0.3,
                1 => 0.02,
                _ => 0.0,
            };
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let d = 16;
    let mut proto = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..d).map(|_| gaussian(&mut r)).collect())
            .collect()
    };
    let class_proto = proto(classes);
    let block_proto = proto(blocks);
    let labels: Vec<usize> = (0..n).map(|i| block(i) % classes).collect();
    let mut features = Matrix::zeros(n, d);
    for i in 0..n {
        for k in 0..d {
            features[(i, k)] = class_signal * class_proto[labels[i]][k]
                + block_proto[block(i)][k]
                + gaussian(&mut r);
        }
    }
    Graph::new(
        "block-chain",
        build_csr(&edges, n).unwrap(),
        features,
        labels,
        classes,
        vec![],
    )
    .unwrap()
}
