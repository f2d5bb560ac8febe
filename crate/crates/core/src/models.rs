//! APPNP and a two-layer GCN on the autodiff tape.
//!
//! Both models read node features through a CSR copy of the feature matrix,
//! since citation features are sparse bag-of-words vectors.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot_uniform, Tape, Var};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::rng::{seeded, Rng, Stream};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Appnp,
    Gcn,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "appnp" => Ok(ModelKind::Appnp),
            "gcn" => Ok(ModelKind::Gcn),
            other => Err(Error::input(format!(
                "unknown model `{other}` (expected appnp or gcn)"
            ))),
        }
    }
}

/// Graph inputs shared by every forward pass of a trial.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub features: Arc<SparseMatrix>,
    pub norm_adjacency: Arc<SparseMatrix>,
}

impl ModelInputs {
    pub fn new(graph: &Graph) -> Self {
        Self {
            features: Arc::new(graph.feature_csr().clone()),
            norm_adjacency: Arc::new(graph.norm_adjacency().clone()),
        }
    }
}

/// Drops each stored feature with probability `rate` and scales survivors.
fn sparse_dropout(
    x: &Arc<SparseMatrix>,
    rate: f64,
    rng: &mut Rng,
    train: bool,
) -> Arc<SparseMatrix> {
    if !train || rate == 0.0 {
        return Arc::clone(x);
    }
    let keep = 1.0 / (1.0 - rate);
    Arc::new(x.filter_map_values(|_, _, v| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            v * keep
        }
    }))
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::input(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

fn check_features(inputs: &ModelInputs, first: &Matrix) -> Result<()> {
    if inputs.features.num_cols() != first.rows() {
        return Err(Error::input(format!(
            "features have {} columns but the first layer expects {}",
            inputs.features.num_cols(),
            first.rows()
        )));
    }
    Ok(())
}

/// MLP `d → hidden → C` followed by `K` steps of
/// `Z ← (1 − α) Ã Z + α H`, starting from `Z = H`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppnpParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub propagation_steps: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl AppnpParams {
    pub fn new(
        in_dim: usize,
        hidden: usize,
        num_classes: usize,
        propagation_steps: usize,
        alpha: f64,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::input(format!("alpha {alpha} outside (0, 1]")));
        }
        check_rate(dropout)?;
        let w1 = glorot_uniform(in_dim, hidden, rng);
        let w2 = glorot_uniform(hidden, num_classes, rng);
        Ok(Self {
            w1,
            b1: Matrix::zeros(1, hidden),
            w2,
            b2: Matrix::zeros(1, num_classes),
            propagation_steps,
            alpha,
            dropout,
        })
    }
}

/// `Ã · ReLU(Ã X W₀) · W₁`, without biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w0: Matrix,
    pub w1: Matrix,
    pub dropout: f64,
}

impl GcnParams {
    pub fn new(
        in_dim: usize,
        hidden: usize,
        num_classes: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_rate(dropout)?;
        let w0 = glorot_uniform(in_dim, hidden, rng);
        let w1 = glorot_uniform(hidden, num_classes, rng);
        Ok(Self { w0, w1, dropout })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Appnp(AppnpParams),
    Gcn(GcnParams),
}

/// Result of a forward pass: logits plus one tape variable per parameter,
/// in [`Model::parameters`] order.
pub struct Forward {
    pub logits: Var,
    pub params: Vec<Var>,
}

impl Model {
    /// Glorot-initialized weights from the init stream of `seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        kind: ModelKind,
        in_dim: usize,
        hidden: usize,
        num_classes: usize,
        propagation_steps: usize,
        alpha: f64,
        dropout: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = seeded(seed, Stream::Init);
        Ok(match kind {
            ModelKind::Appnp => Model::Appnp(AppnpParams::new(
                in_dim,
                hidden,
                num_classes,
                propagation_steps,
                alpha,
                dropout,
                &mut rng,
            )?),
            ModelKind::Gcn => Model::Gcn(GcnParams::new(
                in_dim,
                hidden,
                num_classes,
                dropout,
                &mut rng,
            )?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Appnp(_) => ModelKind::Appnp,
            Model::Gcn(_) => ModelKind::Gcn,
        }
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        match self {
            Model::Appnp(p) => vec![&p.w1, &p.b1, &p.w2, &p.b2],
            Model::Gcn(p) => vec![&p.w0, &p.w1],
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Model::Appnp(p) => vec![&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2],
            Model::Gcn(p) => vec![&mut p.w0, &mut p.w1],
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Model::Appnp(_) => &["w1", "b1", "w2", "b2"],
            Model::Gcn(_) => &["w0", "w1"],
        }
    }

    /// Parameters paired with their names, for checkpoints.
    pub fn named_parameters(&self) -> Vec<(String, Matrix)> {
        self.parameter_names()
            .iter()
            .zip(self.parameters())
            .map(|(n, m)| (n.to_string(), m.clone()))
            .collect()
    }

    /// Replaces every parameter from a checkpoint with matching names and shapes.
    pub fn load_named_parameters(&mut self, named: &[(String, Matrix)]) -> Result<()> {
        let names = self.parameter_names();
        if named.len() != names.len() {
            return Err(Error::input(format!(
                "checkpoint has {} parameters, model has {}",
                named.len(),
                names.len()
            )));
        }
        for ((slot, name), (got_name, value)) in
            self.parameters_mut().into_iter().zip(names).zip(named)
        {
            if got_name != name || slot.shape() != value.shape() {
                return Err(Error::input(format!(
                    "checkpoint entry `{got_name}` {:?} does not match `{name}` {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            *slot = value.clone();
        }
        Ok(())
    }

    /// Weight decay per parameter: applied to the first linear layer only.
    pub fn weight_decay_mask(&self, weight_decay: f64) -> Vec<f64> {
        let mut mask = vec![0.0; self.parameters().len()];
        mask[0] = weight_decay;
        mask
    }

    /// Records a full-graph forward pass. Dropout is active only when `train`
    /// is set and draws from `rng`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        inputs: &ModelInputs,
        train: bool,
        rng: &mut Rng,
    ) -> Result<Forward> {
        match self {
            Model::Appnp(p) => appnp_forward(tape, inputs, p, train, rng),
            Model::Gcn(p) => gcn_forward(tape, inputs, p, train, rng),
        }
    }

    /// Logits in evaluation mode, with no tape kept around.
    pub fn predict(&self, inputs: &ModelInputs) -> Result<Matrix> {
        let mut tape = Tape::new();
        // evaluation mode never draws from the generator
        let mut rng = seeded(0, Stream::Dropout);
        let out = self.forward(&mut tape, inputs, false, &mut rng)?;
        Ok(tape.value(out.logits).clone())
    }
}

pub fn appnp_forward(
    tape: &mut Tape,
    inputs: &ModelInputs,
    p: &AppnpParams,
    train: bool,
    rng: &mut Rng,
) -> Result<Forward> {
    check_features(inputs, &p.w1)?;
    let params = vec![
        tape.parameter(p.w1.clone()),
        tape.parameter(p.b1.clone()),
        tape.parameter(p.w2.clone()),
        tape.parameter(p.b2.clone()),
    ];
    let x = sparse_dropout(&inputs.features, p.dropout, rng, train);
    let h = tape.spmm(x, params[0])?;
    let h = tape.add_broadcast(h, params[1])?;
    let h = tape.relu(h);
    let h = tape.dropout(h, p.dropout, rng, train)?;
    let h = tape.matmul(h, params[2])?;
    let h = tape.add_broadcast(h, params[3])?;

    let mut z = h;
    if p.propagation_steps > 0 {
        let teleport = tape.scale(h, p.alpha);
        for _ in 0..p.propagation_steps {
            let spread = tape.spmm(Arc::clone(&inputs.norm_adjacency), z)?;
            let spread = tape.scale(spread, 1.0 - p.alpha);
            z = tape.add(spread, teleport)?;
        }
    }
    Ok(Forward { logits: z, params })
}

pub fn gcn_forward(
    tape: &mut Tape,
    inputs: &ModelInputs,
    p: &GcnParams,
    train: bool,
    rng: &mut Rng,
) -> Result<Forward> {
    check_features(inputs, &p.w0)?;
    let params = vec![tape.parameter(p.w0.clone()), tape.parameter(p.w1.clone())];
    let x = sparse_dropout(&inputs.features, p.dropout, rng, train);
    let xw = tape.spmm(x, params[0])?;
    let h = tape.spmm(Arc::clone(&inputs.norm_adjacency), xw)?;
    let h = tape.relu(h);
    let h = tape.dropout(h, p.dropout, rng, train)?;
    let hw = tape.matmul(h, params[1])?;
    let logits = tape.spmm(Arc::clone(&inputs.norm_adjacency), hw)?;
    Ok(Forward { logits, params })
}

/// Iterates `Z ← (1 − α) Ã Z + α H` from `Z = H` and returns every iterate
/// `Z⁽⁰⁾ … Z⁽ᴷ⁾`.
pub fn propagation_trajectory(
    norm_adjacency: &SparseMatrix,
    h: &Matrix,
    alpha: f64,
    steps: usize,
) -> Result<Vec<Matrix>> {
    let mut out = vec![h.clone()];
    for _ in 0..steps {
        let spread = norm_adjacency.spmm(out.last().expect("nonempty"))?;
        out.push(spread.zip_map(h, |s, hv| (1.0 - alpha) * s + alpha * hv));
    }
    Ok(out)
}
