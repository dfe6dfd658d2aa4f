//! Columnar datasets, CSV ingestion and variable-role configuration.
//!
//! A [`Table`] stores every column as `f64` on the *modeling scale*: binary and
//! count columns hold integers, categorical columns hold level codes into a
//! recorded level set, and log-transformed continuous columns hold the logged
//! values (the file values are kept alongside so exports reproduce them).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::condmodels::Family;
use crate::error::{Error, Result};

/// Default number of fair replicates when the configuration does not set one.
pub const DEFAULT_REPLICATES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Count,
    Categorical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Binary => "binary",
            ColumnKind::Count => "count",
            ColumnKind::Categorical => "categorical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Protected,
    Adjust,
    Outcome,
    Drop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreTransform {
    #[default]
    None,
    Log,
}

/// Requested conditional model for an adjust-role variable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    #[default]
    Auto,
    LinearResidualEcdf,
    GaussianLinear,
    Logistic,
    Poisson,
    Negbin,
    Zip,
    Zinb,
}

impl ModelChoice {
    pub fn family(self) -> Option<Family> {
        match self {
            ModelChoice::Auto => None,
            ModelChoice::LinearResidualEcdf => Some(Family::LinearResidualEcdf),
            ModelChoice::GaussianLinear => Some(Family::GaussianLinear),
            ModelChoice::Logistic => Some(Family::Logistic),
            ModelChoice::Poisson => Some(Family::Poisson),
            ModelChoice::Negbin => Some(Family::NegBin),
            ModelChoice::Zip => Some(Family::Zip),
            ModelChoice::Zinb => Some(Family::Zinb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: Role,
    pub kind: ColumnKind,
    #[serde(default)]
    pub pre_transform: PreTransform,
    #[serde(default)]
    pub model: ModelChoice,
    /// Binary: the two file labels mapped to 0 and 1. Categorical: the level
    /// order (first level is the dummy-coding reference). Absent means binary
    /// cells are literal `0`/`1` and categorical levels are sorted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl VariableSpec {
    pub fn new(name: &str, role: Role, kind: ColumnKind) -> Self {
        VariableSpec {
            name: name.to_string(),
            role,
            kind,
            pre_transform: PreTransform::None,
            model: ModelChoice::Auto,
            levels: None,
        }
    }

    pub fn with_log(mut self) -> Self {
        self.pre_transform = PreTransform::Log;
        self
    }

    pub fn with_model(mut self, model: ModelChoice) -> Self {
        self.model = model;
        self
    }

    pub fn with_levels(mut self, levels: &[&str]) -> Self {
        self.levels = Some(levels.iter().map(|s| s.to_string()).collect());
        self
    }
}

/// On-disk configuration document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecFile {
    pub variables: Vec<VariableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SpecFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Validates the document, letting explicit `m`/`seed` arguments override the file.
    pub fn plan(&self, m: Option<usize>, seed: Option<u64>) -> Result<ChainPlan> {
        validate_plan(
            &self.variables,
            self.order.as_deref(),
            m.or(self.m).unwrap_or(DEFAULT_REPLICATES),
            seed.or(self.seed).unwrap_or(0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Modeling-scale values; level codes for categorical columns.
    pub values: Vec<f64>,
    /// Level labels for categorical columns and for labelled binary columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default)]
    pub pre_transform: PreTransform,
    /// File-scale values, present only when a pre-transform was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<f64>>,
}

impl Column {
    pub fn continuous(name: &str, values: Vec<f64>) -> Self {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Continuous,
            values,
            levels: None,
            pre_transform: PreTransform::None,
            raw: None,
        }
    }

    pub fn binary(name: &str, values: Vec<f64>) -> Self {
        Column {
            kind: ColumnKind::Binary,
            ..Column::continuous(name, values)
        }
    }

    pub fn count(name: &str, values: Vec<f64>) -> Self {
        Column {
            kind: ColumnKind::Count,
            ..Column::continuous(name, values)
        }
    }

    /// Builds a categorical column with levels in sorted order.
    pub fn categorical<S: AsRef<str>>(name: &str, labels: &[S]) -> Self {
        let mut levels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        levels.sort();
        levels.dedup();
        let values = labels
            .iter()
            .map(|s| levels.binary_search_by(|l| l.as_str().cmp(s.as_ref())).unwrap() as f64)
            .collect();
        Column {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            values,
            levels: Some(levels),
            pre_transform: PreTransform::None,
            raw: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Label of row `i` for categorical or labelled binary columns.
    pub fn label(&self, i: usize) -> Option<&str> {
        self.levels
            .as_ref()
            .map(|levels| levels[self.values[i] as usize].as_str())
    }

    /// Group label of row `i`: the level label when present, else the value.
    pub fn group_label(&self, i: usize) -> String {
        match self.label(i) {
            Some(l) => l.to_string(),
            None => format_number(self.kind, self.values[i]),
        }
    }

    /// Value of row `i` as written to CSV.
    pub fn cell(&self, i: usize) -> String {
        if let Some(label) = self.label(i) {
            return label.to_string();
        }
        let v = match &self.raw {
            Some(raw) => raw[i],
            None => self.values[i],
        };
        format_number(self.kind, v)
    }

    fn check(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            let ok = match self.kind {
                ColumnKind::Continuous => v.is_finite(),
                ColumnKind::Binary => v == 0.0 || v == 1.0,
                ColumnKind::Count => v.is_finite() && v >= 0.0 && v.fract() == 0.0,
                ColumnKind::Categorical => {
                    let n_levels = self.levels.as_ref().map_or(0, Vec::len);
                    v >= 0.0 && v.fract() == 0.0 && (v as usize) < n_levels
                }
            };
            if !ok {
                return Err(Error::Parse {
                    row: i + 1,
                    column: self.name.clone(),
                    value: v.to_string(),
                    reason: format!("not a valid {} value", self.kind),
                });
            }
        }
        if self.kind == ColumnKind::Binary {
            if let Some(levels) = &self.levels {
                if levels.len() != 2 {
                    return Err(Error::InvalidVariable {
                        name: self.name.clone(),
                        reason: "binary columns need exactly two levels".into(),
                    });
                }
            }
        }
        if let Some(raw) = &self.raw {
            if raw.len() != self.values.len() {
                return Err(Error::LengthMismatch(format!(
                    "column `{}` raw values",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn format_number(kind: ColumnKind, v: f64) -> String {
    match kind {
        ColumnKind::Binary | ColumnKind::Count | ColumnKind::Categorical => {
            format!("{}", v as i64)
        }
        ColumnKind::Continuous => format!("{v}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub n_rows: usize,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(Error::LengthMismatch(format!(
                    "column `{}` has {} rows, expected {}",
                    c.name,
                    c.len(),
                    n_rows
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateName(c.name.clone()));
            }
            c.check()?;
        }
        Ok(Table { n_rows, columns })
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// New table holding the named columns in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Table> {
        let columns = names
            .iter()
            .map(|n| self.require(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Table::new(columns)
    }

    /// Table without the named columns.
    pub fn without(&self, names: &[&str]) -> Table {
        Table {
            n_rows: self.n_rows,
            columns: self
                .columns
                .iter()
                .filter(|c| !names.contains(&c.name.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Rows `indices` of every column, in that order.
    pub fn take_rows(&self, indices: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                values: indices.iter().map(|&i| c.values[i]).collect(),
                raw: c
                    .raw
                    .as_ref()
                    .map(|r| indices.iter().map(|&i| r[i]).collect()),
                ..c.clone()
            })
            .collect();
        Table {
            n_rows: indices.len(),
            columns,
        }
    }

    /// Row-major copy of the numeric values of every column.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| self.columns.iter().map(|c| c.values[i]).collect())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cell(i)))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Reads a CSV file into a [`Table`], keeping only the columns named in `specs`
/// (minus drop-role ones) in spec order.
pub fn load_csv(path: impl AsRef<Path>, specs: &[VariableSpec]) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, specs)
}

pub fn read_csv<R: Read>(reader: R, specs: &[VariableSpec]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    // duplicated header names resolve to their first occurrence
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        index.entry(h.trim()).or_insert(i);
    }
    let mut positions = Vec::with_capacity(specs.len());
    for spec in specs {
        let pos = *index
            .get(spec.name.as_str())
            .ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
        positions.push(pos);
    }
    let kept: Vec<(usize, &VariableSpec)> = positions
        .into_iter()
        .zip(specs)
        .filter(|(_, s)| s.role != Role::Drop)
        .collect();

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); kept.len()];
    for record in rdr.records() {
        let record = record?;
        for (slot, (pos, _)) in cells.iter_mut().zip(&kept) {
            slot.push(record.get(*pos).unwrap_or("").trim().to_string());
        }
    }

    let columns = kept
        .iter()
        .zip(cells)
        .map(|((_, spec), raw)| parse_column(spec, &raw))
        .collect::<Result<Vec<_>>>()?;
    Table::new(columns)
}

fn parse_column(spec: &VariableSpec, cells: &[String]) -> Result<Column> {
    let err = |row: usize, value: &str, reason: &str| Error::Parse {
        row: row + 1,
        column: spec.name.clone(),
        value: value.to_string(),
        reason: reason.to_string(),
    };
    for (i, c) in cells.iter().enumerate() {
        if c.is_empty() {
            return Err(err(i, c, "missing value"));
        }
    }
    match spec.kind {
        ColumnKind::Continuous => {
            let mut values = Vec::with_capacity(cells.len());
            for (i, c) in cells.iter().enumerate() {
                let v: f64 = c.parse().map_err(|_| err(i, c, "expected a number"))?;
                if !v.is_finite() {
                    return Err(err(i, c, "expected a finite number"));
                }
                values.push(v);
            }
            let mut col = Column::continuous(&spec.name, values);
            if spec.pre_transform == PreTransform::Log {
                let mut logged = Vec::with_capacity(col.values.len());
                for (i, &v) in col.values.iter().enumerate() {
                    if v <= 0.0 {
                        return Err(Error::NonPositiveLog {
                            row: i + 1,
                            column: spec.name.clone(),
                            value: v,
                        });
                    }
                    logged.push(v.ln());
                }
                col.raw = Some(std::mem::replace(&mut col.values, logged));
                col.pre_transform = PreTransform::Log;
            }
            Ok(col)
        }
        ColumnKind::Binary => {
            let mut values = Vec::with_capacity(cells.len());
            for (i, c) in cells.iter().enumerate() {
                let v = match &spec.levels {
                    Some(levels) => match levels.iter().position(|l| l == c) {
                        Some(p) => p as f64,
                        None => return Err(err(i, c, &format!("expected one of {levels:?}"))),
                    },
                    None => match c.as_str() {
                        "0" => 0.0,
                        "1" => 1.0,
                        _ => return Err(err(i, c, "binary value must be 0 or 1")),
                    },
                };
                values.push(v);
            }
            let mut col = Column::binary(&spec.name, values);
            col.levels = spec.levels.clone();
            Ok(col)
        }
        ColumnKind::Count => {
            let mut values = Vec::with_capacity(cells.len());
            for (i, c) in cells.iter().enumerate() {
                let v: u64 = c
                    .parse()
                    .map_err(|_| err(i, c, "expected a non-negative integer"))?;
                values.push(v as f64);
            }
            Ok(Column::count(&spec.name, values))
        }
        ColumnKind::Categorical => match &spec.levels {
            None => Ok(Column::categorical(&spec.name, cells)),
            Some(levels) => {
                let mut values = Vec::with_capacity(cells.len());
                for (i, c) in cells.iter().enumerate() {
                    match levels.iter().position(|l| l == c) {
                        Some(p) => values.push(p as f64),
                        None => return Err(err(i, c, "level not in the declared level set")),
                    }
                }
                Ok(Column {
                    levels: Some(levels.clone()),
                    kind: ColumnKind::Categorical,
                    ..Column::continuous(&spec.name, values)
                })
            }
        },
    }
}

/// How the conditional model of one chained variable is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlannedModel {
    Fixed(Family),
    Select(SelectionRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Fit poisson, negbin, zip and zinb; keep the minimum-AIC model.
    CountAic,
}

/// A validated adjustment plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub protected: Vec<String>,
    pub order: Vec<String>,
    pub model_per_variable: BTreeMap<String, PlannedModel>,
    pub outcome: String,
    pub m_replicates: usize,
    pub seed: u64,
    pub variables: Vec<VariableSpec>,
}

impl ChainPlan {
    pub fn spec(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn model(&self, name: &str) -> PlannedModel {
        self.model_per_variable[name]
    }
}

pub fn validate_plan(
    specs: &[VariableSpec],
    order: Option<&[String]>,
    m: usize,
    seed: u64,
) -> Result<ChainPlan> {
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::DuplicateName(s.name.clone()));
        }
    }
    let invalid = |name: &str, reason: String| Error::InvalidVariable {
        name: name.to_string(),
        reason,
    };

    let outcomes: Vec<&VariableSpec> = specs.iter().filter(|s| s.role == Role::Outcome).collect();
    if outcomes.len() != 1 {
        return Err(Error::InvalidPlan(format!(
            "exactly one outcome variable required, found {}",
            outcomes.len()
        )));
    }
    let protected: Vec<String> = specs
        .iter()
        .filter(|s| s.role == Role::Protected)
        .map(|s| s.name.clone())
        .collect();
    if protected.is_empty() {
        return Err(Error::InvalidPlan("at least one protected variable required".into()));
    }
    let adjust: Vec<&VariableSpec> = specs.iter().filter(|s| s.role == Role::Adjust).collect();
    if adjust.is_empty() {
        return Err(Error::InvalidPlan("at least one adjust variable required".into()));
    }
    if m == 0 {
        return Err(Error::InvalidPlan("number of replicates must be at least 1".into()));
    }

    for s in specs {
        if s.pre_transform == PreTransform::Log && s.kind != ColumnKind::Continuous {
            return Err(invalid(&s.name, "log pre-transform needs a continuous column".into()));
        }
        if let Some(levels) = &s.levels {
            let distinct: HashSet<&String> = levels.iter().collect();
            if distinct.len() != levels.len() {
                return Err(invalid(&s.name, "levels must be distinct".into()));
            }
            match s.kind {
                ColumnKind::Binary if levels.len() != 2 => {
                    return Err(invalid(&s.name, "binary columns need exactly two levels".into()))
                }
                ColumnKind::Continuous | ColumnKind::Count => {
                    return Err(invalid(&s.name, format!("levels are not allowed on {} columns", s.kind)))
                }
                _ => {}
            }
        }
    }

    let mut models = BTreeMap::new();
    for s in &adjust {
        let planned = match (s.kind, s.model.family()) {
            (ColumnKind::Categorical, _) => {
                return Err(invalid(&s.name, "categorical variables cannot be adjusted".into()))
            }
            (ColumnKind::Continuous, None) => PlannedModel::Fixed(Family::LinearResidualEcdf),
            (ColumnKind::Binary, None) => PlannedModel::Fixed(Family::Logistic),
            (ColumnKind::Count, None) => PlannedModel::Select(SelectionRule::CountAic),
            (kind, Some(f)) => {
                if !f.accepts(kind) {
                    return Err(invalid(&s.name, format!("model {f} does not fit {kind} data")));
                }
                PlannedModel::Fixed(f)
            }
        };
        models.insert(s.name.clone(), planned);
    }

    let order: Vec<String> = match order {
        None => adjust.iter().map(|s| s.name.clone()).collect(),
        Some(order) => {
            let mut seen = HashSet::new();
            for name in order {
                if !seen.insert(name.as_str()) {
                    return Err(Error::DuplicateName(name.clone()));
                }
                match specs.iter().find(|s| &s.name == name) {
                    None => return Err(Error::MissingColumn(name.clone())),
                    Some(s) if s.role == Role::Outcome => {
                        return Err(Error::InvalidPlan(format!("outcome `{name}` listed in order")))
                    }
                    Some(s) if s.role != Role::Adjust => {
                        return Err(Error::InvalidPlan(format!(
                            "`{name}` listed in order is not an adjust variable"
                        )))
                    }
                    _ => {}
                }
            }
            if order.len() != adjust.len() {
                return Err(Error::InvalidPlan(
                    "order is not a permutation of the adjust variables".into(),
                ));
            }
            order.to_vec()
        }
    };

    Ok(ChainPlan {
        protected,
        order,
        model_per_variable: models,
        outcome: outcomes[0].name.clone(),
        m_replicates: m,
        seed,
        variables: specs.to_vec(),
    })
}
