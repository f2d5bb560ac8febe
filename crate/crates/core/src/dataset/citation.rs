use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::sparse::build_csr;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// 0/1 bag-of-words indicators (Cora, Citeseer).
    Binary,
    /// Arbitrary real values such as TF-IDF weights (Pubmed).
    Real,
}

/// Where a citation dataset lives and what it is expected to contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub content_path: PathBuf,
    pub cites_path: PathBuf,
    pub feature_kind: FeatureKind,
    pub expected_nodes: Option<usize>,
    pub expected_classes: Option<usize>,
    /// Divide each feature row by its sum; all-zero rows stay zero.
    pub row_normalize: bool,
}

impl DatasetManifest {
    pub fn new(
        name: impl Into<String>,
        content_path: impl Into<PathBuf>,
        cites_path: impl Into<PathBuf>,
    ) -> Self {
        Self {
            name: name.into(),
            content_path: content_path.into(),
            cites_path: cites_path.into(),
            feature_kind: FeatureKind::Binary,
            expected_nodes: None,
            expected_classes: None,
            row_normalize: true,
        }
    }

    /// `<dir>/<name>.content` and `<dir>/<name>.cites`, the layout of the
    /// public raw distributions.
    pub fn in_dir(dir: impl AsRef<Path>, name: &str) -> Self {
        let dir = dir.as_ref();
        Self::new(
            name,
            dir.join(format!("{name}.content")),
            dir.join(format!("{name}.cites")),
        )
    }
}

/// Non-fatal findings from a load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Cites lines naming an id absent from the content file.
    pub skipped_edges: usize,
}

/// Loads a `.content` / `.cites` pair.
///
/// Content lines are `<id> <f_1> ... <f_d> <label>`, cites lines are
/// `<citing> <cited>`. Node indices follow first appearance in the content
/// file and class ids follow the lexicographic order of label strings.
pub fn load_citation_text(manifest: &DatasetManifest) -> Result<(Graph, LoadReport)> {
    let content = read(&manifest.content_path)?;
    let cites = read(&manifest.cites_path)?;

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut raw_labels: Vec<&str> = Vec::new();
    let mut feature_data: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;

    for (lineno, line) in content.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: manifest.content_path.clone(),
            line: lineno + 1,
            message,
        };
        if tokens.len() < 3 {
            return Err(parse_err(format!(
                "expected `<id> <features...> <label>`, found {} fields",
                tokens.len()
            )));
        }
        let d = tokens.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(format!(
                    "{d} features, previous lines had {expected}"
                )))
            }
            _ => {}
        }
        for tok in &tokens[1..tokens.len() - 1] {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(format!("feature `{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("feature `{tok}` is not finite")));
            }
            if manifest.feature_kind == FeatureKind::Binary && v != 0.0 && v != 1.0 {
                return Err(parse_err(format!("binary feature `{tok}` is not 0 or 1")));
            }
            feature_data.push(v);
        }
        let next = ids.len();
        if ids.insert(tokens[0], next).is_some() {
            return Err(parse_err(format!("duplicate node id `{}`", tokens[0])));
        }
        raw_labels.push(tokens[tokens.len() - 1]);
    }

    let n = ids.len();
    if n == 0 {
        return Err(Error::input(format!(
            "{} contains zero nodes",
            manifest.content_path.display()
        )));
    }
    let d = dim.unwrap_or(0);

    let label_names: Vec<String> = raw_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let class_of: HashMap<&str, usize> = label_names
        .iter()
        .enumerate()
        .map(|(c, s)| (s.as_str(), c))
        .collect();
    let labels: Vec<usize> = raw_labels.iter().map(|l| class_of[l]).collect();

    let mut edges = Vec::new();
    let mut report = LoadReport::default();
    for (lineno, line) in cites.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(Error::Parse {
                path: manifest.cites_path.clone(),
                line: lineno + 1,
                message: format!("expected `<citing> <cited>`, found {} fields", tokens.len()),
            });
        }
        match (ids.get(tokens[0]), ids.get(tokens[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => report.skipped_edges += 1,
        }
    }
    if report.skipped_edges > 0 {
        log::warn!(
            "{}: skipped {} edges referencing unknown node ids",
            manifest.cites_path.display(),
            report.skipped_edges
        );
    }

    let mut features = Matrix::from_vec(n, d, feature_data)?;
    if manifest.row_normalize {
        for i in 0..n {
            let row = features.row_mut(i);
            let sum: f64 = row.iter().sum();
            if sum != 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }

    let adjacency = build_csr(&edges, n)?;
    let graph = Graph::new(
        manifest.name.clone(),
        adjacency,
        features,
        labels,
        label_names.len(),
        label_names,
    )?;

    if let Some(expected) = manifest.expected_nodes {
        if expected != n {
            return Err(Error::input(format!(
                "{}: expected {expected} nodes, loaded {n}",
                manifest.name
            )));
        }
    }
    if let Some(expected) = manifest.expected_classes {
        if expected != graph.num_classes() {
            return Err(Error::input(format!(
                "{}: expected {expected} classes, loaded {}",
                manifest.name,
                graph.num_classes()
            )));
        }
    }
    Ok((graph, report))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}
