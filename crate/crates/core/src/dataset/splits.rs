use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::rng::{seeded, Stream};
use crate::{Error, Result};

/// Disjoint train / validation / test node masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn num_nodes(&self) -> usize {
        self.train.len()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn val_indices(&self) -> Vec<usize> {
        indices(&self.val)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        indices(&self.test)
    }

    /// Nodes outside validation and test: the pool training nodes come from.
    pub fn train_candidates(&self) -> Vec<bool> {
        self.val
            .iter()
            .zip(&self.test)
            .map(|(&v, &t)| !v && !t)
            .collect()
    }

    /// Same validation and test sets with a different training set.
    pub fn with_train(&self, train_indices: &[usize]) -> Result<SplitMasks> {
        let mut train = vec![false; self.num_nodes()];
        for &i in train_indices {
            if i >= train.len() || self.val[i] || self.test[i] {
                return Err(Error::input(format!(
                    "training node {i} is out of range or held out"
                )));
            }
            train[i] = true;
        }
        Ok(SplitMasks {
            train,
            val: self.val.clone(),
            test: self.test.clone(),
        })
    }

    /// Checks disjointness, sizes and that every class has a training node.
    pub fn validate(&self, graph: &Graph, val_size: usize, test_size: usize) -> Result<()> {
        let n = graph.num_nodes();
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return Err(Error::input("split masks do not match the node count"));
        }
        for i in 0..n {
            if [self.train[i], self.val[i], self.test[i]]
                .iter()
                .filter(|&&b| b)
                .count()
                > 1
            {
                return Err(Error::input(format!("node {i} is in more than one split")));
            }
        }
        let (v, t) = (count(&self.val), count(&self.test));
        if v != val_size || t != test_size {
            return Err(Error::input(format!(
                "split sizes val={v} test={t}, expected {val_size}/{test_size}"
            )));
        }
        let mut has_train = vec![false; graph.num_classes()];
        for i in self.train_indices() {
            has_train[graph.labels()[i]] = true;
        }
        if let Some(c) = has_train.iter().position(|&b| !b) {
            return Err(Error::input(format!(
                "class `{}` has no training node",
                graph.label_names()[c]
            )));
        }
        Ok(())
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

/// Unbiased splits: test and validation drawn uniformly without replacement,
/// then `per_class_train` training nodes per class from what is left.
pub fn make_uniform_splits(
    graph: &Graph,
    per_class_train: usize,
    val_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<SplitMasks> {
    let n = graph.num_nodes();
    let needed = val_size + test_size + per_class_train * graph.num_classes();
    if needed > n {
        return Err(Error::input(format!(
            "split needs {needed} nodes but the graph has {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed, Stream::EvalSplit));
    let mut masks = SplitMasks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    for &i in &order[..test_size] {
        masks.test[i] = true;
    }
    for &i in &order[test_size..test_size + val_size] {
        masks.val[i] = true;
    }
    let train = select_uniform_train(graph, &masks.train_candidates(), per_class_train, seed)?;
    masks.with_train(&train)
}

/// Draws `per_class` training nodes per class uniformly among `candidates`.
///
/// The biased sampler at zero bias strength reproduces this selection exactly
/// for the same seed.
pub fn select_uniform_train(
    graph: &Graph,
    candidates: &[bool],
    per_class: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    draw_per_class(graph, candidates, per_class, seed, |_, _| None)
}

/// Fills a per-class budget slot by slot. `ranked_pick` may claim a slot by
/// returning a position in the class's remaining candidates; otherwise the
/// slot is drawn uniformly from the uniform-train stream of `seed`.
pub(crate) fn draw_per_class(
    graph: &Graph,
    candidates: &[bool],
    per_class: usize,
    seed: u64,
    mut ranked_pick: impl FnMut(usize, &[usize]) -> Option<usize>,
) -> Result<Vec<usize>> {
    if per_class == 0 {
        return Err(Error::input("per-class training budget must be at least 1"));
    }
    if candidates.len() != graph.num_nodes() {
        return Err(Error::input("candidate mask does not match the node count"));
    }
    let mut rng = seeded(seed, Stream::TrainUniform);
    let mut chosen = Vec::with_capacity(per_class * graph.num_classes());
    for (class, nodes) in graph.nodes_by_class().into_iter().enumerate() {
        let mut remaining: Vec<usize> = nodes.into_iter().filter(|&i| candidates[i]).collect();
        if remaining.len() < per_class {
            return Err(Error::input(format!(
                "class `{}` has {} candidate nodes, fewer than the budget of {per_class}",
                graph.label_names()[class],
                remaining.len()
            )));
        }
        for _ in 0..per_class {
            let pos = match ranked_pick(class, &remaining) {
                Some(pos) => pos,
                None => rng.random_range(0..remaining.len()),
            };
            chosen.push(remaining.swap_remove(pos));
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}
