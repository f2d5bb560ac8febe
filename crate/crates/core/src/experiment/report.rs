//! Report files: JSON with every field, flat CSV summaries, plot-ready sweep
//! CSV and comparison tables across reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

use super::{AggregateReport, RegTarget, SweepTable, AGGREGATE_SCHEMA};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Reads an aggregate report, rejecting any other schema.
pub fn read_aggregate(path: &Path) -> Result<AggregateReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(AGGREGATE_SCHEMA) => Ok(serde_json::from_value(value)?),
        Some(other) => Err(Error::input(format!(
            "{}: schema `{other}` is not `{AGGREGATE_SCHEMA}`",
            path.display()
        ))),
        None => Err(Error::input(format!(
            "{}: not a report file",
            path.display()
        ))),
    }
}

/// One-row CSV: `dataset,model,lambda,beta,epsilon,reg_target,n,f1_mean,f1_std`.
pub fn aggregate_csv(report: &AggregateReport) -> String {
    let c = &report.config;
    let mut out = String::from("dataset,model,lambda,beta,epsilon,reg_target,n,f1_mean,f1_std\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        csv_field(&c.dataset),
        c.get("model").expect("known key"),
        c.lambda,
        c.beta,
        c.epsilon,
        match c.reg_target {
            RegTarget::AllUnlabeled => "all_unlabeled",
            RegTarget::TestOnly => "test_only",
        },
        report.num_trials(),
        report.f1_mean,
        report.f1_std
    );
    out
}

/// Per-trial CSV: `seed,sampler_seed_node,best_epoch,epochs,best_val_f1,test_f1`.
pub fn trials_csv(report: &AggregateReport) -> String {
    let mut out = String::from("seed,sampler_seed_node,best_epoch,epochs,best_val_f1,test_f1\n");
    for t in &report.trials {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.seed,
            t.sampler_seed_node.map_or(String::new(), |s| s.to_string()),
            t.best_epoch,
            t.history.len(),
            t.best_val_f1,
            t.test_f1
        );
    }
    out
}

/// Plot-ready CSV: `axis,value,f1_mean,f1_std`, one row per sweep point.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("axis,value,f1_mean,f1_std\n");
    for p in &table.points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            table.axis.name(),
            p.value,
            p.report.f1_mean,
            p.report.f1_std
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Row label of a configuration, e.g. `APPNP (unbiased)`, `Reg-APPNP`,
/// `Reg-APPNP w.o. MMD`.
pub fn config_label(report: &AggregateReport) -> String {
    let c = &report.config;
    let model = match c.model {
        crate::models::ModelKind::Appnp => "APPNP",
        crate::models::ModelKind::Gcn => "GCN",
    };
    let mut label = match (c.lambda > 0.0, c.beta > 0.0) {
        (false, false) => model.to_string(),
        (true, true) => format!("Reg-{model}"),
        (true, false) => format!("Reg-{model} w.o. MMD"),
        (false, true) => format!("Reg-{model} w.o. CMD"),
    };
    if c.epsilon == 0.0 {
        label.push_str(" (unbiased)");
    } else if c.epsilon < 1.0 {
        let _ = write!(label, " (epsilon={})", c.epsilon);
    }
    label
}

/// The dataset reference may be a path; the table shows its last component.
fn dataset_label(report: &AggregateReport) -> String {
    let reference = report.config.dataset.trim_end_matches(['/', '\\']);
    match Path::new(reference).file_name() {
        Some(name) => name.to_string_lossy().into_owned(),
        None if reference.is_empty() => "dataset".to_string(),
        None => reference.to_string(),
    }
}

/// Configurations as rows, datasets as columns, cells `mean ± std` in
/// percent. Row and column order follow first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[row][col]`: `(mean, std)` in percent.
    pub cells: Vec<Vec<Option<(f64, f64)>>>,
}

impl ComparisonTable {
    pub fn build(reports: &[AggregateReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::input("no reports to compare"));
        }
        let mut rows: Vec<String> = Vec::new();
        let mut columns: Vec<String> = Vec::new();
        let mut entries = Vec::new();
        for r in reports {
            let (row, col) = (config_label(r), dataset_label(r));
            let ri = rows.iter().position(|x| *x == row).unwrap_or_else(|| {
                rows.push(row.clone());
                rows.len() - 1
            });
            let ci = columns.iter().position(|x| *x == col).unwrap_or_else(|| {
                columns.push(col.clone());
                columns.len() - 1
            });
            entries.push((ri, ci, (100.0 * r.f1_mean, 100.0 * r.f1_std)));
        }
        let mut cells = vec![vec![None; columns.len()]; rows.len()];
        for (ri, ci, v) in entries {
            if cells[ri][ci].replace(v).is_some() {
                return Err(Error::input(format!(
                    "two reports for `{}` on `{}`",
                    rows[ri], columns[ci]
                )));
            }
        }
        Ok(Self {
            rows,
            columns,
            cells,
        })
    }

    fn cell(&self, r: usize, c: usize) -> String {
        self.cells[r][c].map_or_else(|| "-".to_string(), |(m, s)| format!("{m:.2} ± {s:.2}"))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| Method | {} |\n", self.columns.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(self.columns.len()));
        for (r, name) in self.rows.iter().enumerate() {
            let cells: Vec<String> = (0..self.columns.len()).map(|c| self.cell(r, c)).collect();
            let _ = writeln!(out, "| {name} | {} |", cells.join(" | "));
        }
        out
    }

    /// Long format: `method,dataset,f1_mean,f1_std`, same rounding as the
    /// markdown table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,dataset,f1_mean,f1_std\n");
        for (r, name) in self.rows.iter().enumerate() {
            for (c, col) in self.columns.iter().enumerate() {
                if let Some((m, s)) = self.cells[r][c] {
                    let _ = writeln!(out, "{},{},{m:.2},{s:.2}", csv_field(name), csv_field(col));
                }
            }
        }
        out
    }
}
