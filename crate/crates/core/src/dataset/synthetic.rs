use rand::Rng as _;

use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::rng::{seeded, Stream};
use crate::sparse::build_csr;
use crate::{Error, Result};

/// Stochastic block model with block-major node order.
///
/// Each unordered pair is linked with probability `p_in` inside a block and
/// `p_out` across blocks. Labels are block ids; features are a one-hot block
/// indicator (column `block % d`) plus uniform noise in `[0, 0.1)`.
pub fn generate_sbm(
    blocks: usize,
    nodes_per_block: usize,
    p_in: f64,
    p_out: f64,
    d: usize,
    seed: u64,
) -> Result<Graph> {
    if blocks == 0 || nodes_per_block == 0 {
        return Err(Error::input(
            "stochastic block model needs non-empty blocks",
        ));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::input(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in} p_out={p_out}"
        )));
    }
    if d == 0 {
        return Err(Error::input("feature dimension must be positive"));
    }
    let n = blocks * nodes_per_block;
    let block = |i: usize| i / nodes_per_block;
    let mut rng = seeded(seed, Stream::Synthetic);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut features = Matrix::zeros(n, d);
    for i in 0..n {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = 0.1 * rng.random::<f64>();
        }
        row[block(i) % d] += 1.0;
    }
    let labels = (0..n).map(block).collect();
    let names = (0..blocks).map(|b| format!("block{b}")).collect();
    Graph::new(
        format!("sbm-{blocks}x{nodes_per_block}"),
        build_csr(&edges, n)?,
        features,
        labels,
        blocks,
        names,
    )
}
