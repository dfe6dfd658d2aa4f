use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fairchain::chain::ChainBundle;
use fairchain::tabular::{load_csv, ChainPlan, Role, SpecFile, Table, VariableSpec};

use crate::user_error;

pub fn load_spec(path: &Path) -> Result<SpecFile> {
    SpecFile::load(path).with_context(|| format!("reading spec {}", path.display()))
}

pub fn load_plan(spec: &SpecFile, m: Option<usize>, seed: Option<u64>) -> Result<ChainPlan> {
    Ok(spec.plan(m, seed)?)
}

pub fn load_data(path: &Path, spec: &SpecFile) -> Result<Table> {
    load_csv(path, &spec.variables).with_context(|| format!("reading data {}", path.display()))
}

/// Specs of the columns present in an adjusted file.
fn adjusted_specs(spec: &SpecFile) -> Vec<VariableSpec> {
    spec.variables
        .iter()
        .filter(|v| v.role != Role::Protected)
        .cloned()
        .collect()
}

/// `adjusted_<k>.csv` files in `dir`, ordered by `k`.
pub fn adjusted_files(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| user_error(format!("cannot read adjusted directory {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(k) = name
            .strip_prefix("adjusted_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            files.push((k, path));
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(user_error(format!(
            "no adjusted_<k>.csv files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

pub fn load_adjusted(dir: &Path, spec: &SpecFile, n_rows: usize) -> Result<Vec<(usize, Table)>> {
    let specs = adjusted_specs(spec);
    adjusted_files(dir)?
        .into_iter()
        .map(|(k, path)| {
            let table = load_csv(&path, &specs).with_context(|| format!("reading {}", path.display()))?;
            if table.n_rows != n_rows {
                return Err(user_error(format!(
                    "{} has {} rows but the data has {n_rows}",
                    path.display(),
                    table.n_rows
                )));
            }
            Ok((k, table))
        })
        .collect()
}

pub fn load_bundle(dir: &Path) -> Result<Option<ChainBundle>> {
    let path = dir.join("chain.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let bundle = serde_json::from_str(&text)
        .map_err(|e| user_error(format!("{} is not a valid chain file: {e}", path.display())))?;
    Ok(Some(bundle))
}

/// Per-row group label over all protected columns.
pub fn group_labels(data: &Table, plan: &ChainPlan) -> Result<Vec<String>> {
    let cols = plan
        .protected
        .iter()
        .map(|p| data.require(p))
        .collect::<fairchain::Result<Vec<_>>>()?;
    Ok((0..data.n_rows)
        .map(|i| {
            cols.iter()
                .map(|c| c.group_label(i))
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect())
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
