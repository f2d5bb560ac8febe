//! The immutable graph container shared by every other module.

use crate::matrix::Matrix;
use crate::sparse::{normalize_adjacency, SparseMatrix};
use crate::{Error, Result};

/// An undirected, unweighted, labeled graph with node features.
///
/// The normalized adjacency `Ã` and a CSR copy of the features are derived
/// once at construction; the graph never changes afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    adjacency: SparseMatrix,
    norm_adjacency: SparseMatrix,
    features: Matrix,
    feature_csr: SparseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
    label_names: Vec<String>,
}

impl Graph {
    /// `adjacency` must be binary, symmetric and free of self-loops (what
    /// [`crate::sparse::build_csr`] produces). An empty `label_names` gets
    /// numeric names.
    pub fn new(
        name: impl Into<String>,
        adjacency: SparseMatrix,
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = adjacency.num_rows();
        if n == 0 {
            return Err(Error::input("graph has zero nodes"));
        }
        if !adjacency.is_symmetric() {
            return Err(Error::input("adjacency matrix is not symmetric"));
        }
        if (0..n).any(|i| adjacency.get(i, i) != 0.0) {
            return Err(Error::input("adjacency matrix contains self-loops"));
        }
        if adjacency.values().iter().any(|&v| v != 1.0) {
            return Err(Error::input("adjacency matrix is not binary"));
        }
        if features.rows() != n {
            return Err(Error::input(format!(
                "feature matrix has {} rows for {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(Error::input(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::input(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        let label_names = if label_names.is_empty() {
            (0..num_classes).map(|c| c.to_string()).collect()
        } else if label_names.len() == num_classes {
            label_names
        } else {
            return Err(Error::input(format!(
                "{} label names for {num_classes} classes",
                label_names.len()
            )));
        };
        let norm_adjacency = normalize_adjacency(&adjacency);
        let feature_csr = SparseMatrix::from_dense(&features);
        Ok(Self {
            name: name.into(),
            adjacency,
            norm_adjacency,
            features,
            feature_csr,
            labels,
            num_classes,
            label_names,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_rows()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn norm_adjacency(&self) -> &SparseMatrix {
        &self.norm_adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// The feature matrix in CSR form, for products with sparse bag-of-words inputs.
    pub fn feature_csr(&self) -> &SparseMatrix {
        &self.feature_csr
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Node indices grouped by class.
    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Relabels nodes so that node `i` becomes node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::input("not a permutation of the node set"));
        }
        let adjacency = self.adjacency.permute_symmetric(perm)?;
        let mut features = Matrix::zeros(n, self.num_features());
        let mut labels = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            features.row_mut(p).copy_from_slice(self.features.row(i));
            labels[p] = self.labels[i];
        }
        Graph::new(
            self.name.clone(),
            adjacency,
            features,
            labels,
            self.num_classes,
            self.label_names.clone(),
        )
    }
}
