//! The chained transformation.
//!
//! For each adjustable variable `x_j` in plan order the engine fits a
//! conditional model given the protected attributes and the already adjusted
//! `x~_1..x~_{j-1}`, maps every observation to `u = F(x | z~)` (a uniform draw
//! on `(F(x-), F(x))` for discrete variables) and sets `x~_j = Q_j(u)` where
//! `Q_j` is the empirical quantile function of the original column.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condmodels::{self, ConditionalModel, DesignMatrix};
use crate::empdist::{randomized_pit, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::{ChainPlan, Column, ColumnKind, PlannedModel, SelectionRule, Table};

pub const CHAIN_FORMAT_VERSION: u32 = 1;

/// Random streams of one replicate; row `i` of variable `j` draws from its own
/// stream keyed by `(seed, replicate, j, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicateStream {
    pub seed: u64,
    pub replicate: usize,
}

impl ReplicateStream {
    pub fn new(seed: u64, replicate: usize) -> Self {
        ReplicateStream { seed, replicate }
    }

    pub fn row_rng(&self, variable: usize, row: usize) -> ChaCha8Rng {
        rng::stream(&[self.seed, self.replicate as u64, variable as u64, row as u64])
    }
}

/// Design encoding of one protected variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedEncoding {
    pub name: String,
    pub kind: ColumnKind,
    /// Levels of a categorical variable; the first is the reference level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

impl ProtectedEncoding {
    fn from_column(col: &Column) -> Self {
        ProtectedEncoding {
            name: col.name.clone(),
            kind: col.kind,
            levels: (col.kind == ColumnKind::Categorical).then(|| col.levels.clone().unwrap_or_default()),
        }
    }

    /// Design columns for `col`, whose level codes may follow a different level list.
    fn encode(&self, col: &Column) -> Result<Vec<(String, Vec<f64>)>> {
        if col.kind != self.kind {
            return Err(Error::SchemaMismatch(format!(
                "protected column `{}` is {}, expected {}",
                self.name, col.kind, self.kind
            )));
        }
        let Some(levels) = &self.levels else {
            return Ok(vec![(self.name.clone(), col.values.clone())]);
        };
        let own = col.levels.as_deref().unwrap_or(&[]);
        let mut remap = Vec::with_capacity(own.len());
        for label in own {
            remap.push(levels.iter().position(|l| l == label));
        }
        let mut codes = Vec::with_capacity(col.len());
        for &v in &col.values {
            match remap[v as usize] {
                Some(c) => codes.push(c),
                None => {
                    return Err(Error::UnseenLevel {
                        column: self.name.clone(),
                        level: own[v as usize].clone(),
                    })
                }
            }
        }
        Ok(levels
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, level)| {
                let dummy = codes.iter().map(|&c| if c == k { 1.0 } else { 0.0 }).collect();
                (format!("{}={}", self.name, level), dummy)
            })
            .collect())
    }
}

/// Fitted map `g_j` for one chained variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub variable: String,
    pub kind: ColumnKind,
    pub model: ConditionalModel,
    /// ECDF of the original column (modeling scale).
    pub marginal: EmpiricalDistribution,
    /// File-scale value of each marginal support point, for pre-transformed columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_support: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedChain {
    pub plan: ChainPlan,
    pub replicate: usize,
    pub protected: Vec<ProtectedEncoding>,
    pub steps: Vec<ChainStep>,
    /// Realized `F(x | z~)` (or `q(x)`) per variable, per row.
    #[serde(skip)]
    pub pit_values: Vec<Vec<f64>>,
}

impl FittedChain {
    pub fn step(&self, variable: &str) -> Option<&ChainStep> {
        self.steps.iter().find(|s| s.variable == variable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedDataset {
    pub replicate_index: usize,
    pub table: Table,
}

impl AdjustedDataset {
    pub fn file_name(&self) -> String {
        format!("adjusted_{}.csv", self.replicate_index)
    }
}

/// Serialized form of the chains of all replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainBundle {
    pub format_version: u32,
    pub plan: ChainPlan,
    pub replicates: Vec<FittedChain>,
}

impl ChainBundle {
    pub fn new(plan: ChainPlan, replicates: Vec<FittedChain>) -> Self {
        ChainBundle {
            format_version: CHAIN_FORMAT_VERSION,
            plan,
            replicates,
        }
    }
}

fn check_table(table: &Table, plan: &ChainPlan) -> Result<()> {
    if table.n_rows == 0 {
        return Err(Error::EmptyInput("table has no rows"));
    }
    for name in plan.protected.iter().chain(&plan.order) {
        let col = table.require(name)?;
        if let Some(spec) = plan.spec(name) {
            if spec.kind != col.kind {
                return Err(Error::SchemaMismatch(format!(
                    "column `{name}` is {}, plan expects {}",
                    col.kind, spec.kind
                )));
            }
        }
    }
    Ok(())
}

fn adjusted_name(name: &str) -> String {
    format!("{name}~")
}

/// Maps one column through a fitted step; returns `(u, x~)`.
fn apply_step(
    step: &ChainStep,
    index: usize,
    values: &[f64],
    design: &DesignMatrix,
    stream: ReplicateStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let model = &step.model;
    let mut pits = Vec::with_capacity(values.len());
    let mut adjusted = Vec::with_capacity(values.len());
    for (i, &x) in values.iter().enumerate() {
        let cov = design.row(i);
        let u = if model.family.is_discrete() {
            let pair = model.cdf_pair(x, &cov)?;
            if pair.is_degenerate() && model.family.is_count() {
                // positive mass lost to rounding or tail truncation
                pair.upper
            } else {
                randomized_pit(pair, &mut stream.row_rng(index, i))?
            }
        } else {
            model.cdf(x, &cov)?
        };
        pits.push(u);
        adjusted.push(step.marginal.quantile(u)?);
    }
    Ok((pits, adjusted))
}

fn raw_lookup(step: &ChainStep, adjusted: &[f64]) -> Option<Vec<f64>> {
    let raw = step.raw_support.as_ref()?;
    let support = step.marginal.support();
    Some(
        adjusted
            .iter()
            .map(|v| {
                let idx = support.partition_point(|s| s < v);
                raw[idx]
            })
            .collect(),
    )
}

/// Name, modeling-scale values and (for pre-transformed columns) file-scale values.
type AdjustedColumn = (String, Vec<f64>, Option<Vec<f64>>);

fn assemble(
    source: &Table,
    protected: &[String],
    adjusted: &[AdjustedColumn],
) -> Result<Table> {
    let mut columns = Vec::new();
    for col in &source.columns {
        if protected.contains(&col.name) {
            continue;
        }
        match adjusted.iter().find(|(n, _, _)| *n == col.name) {
            Some((_, values, raw)) => columns.push(Column {
                values: values.clone(),
                raw: raw.clone(),
                ..col.clone()
            }),
            None => columns.push(col.clone()),
        }
    }
    Table::new(columns)
}

fn protected_block(encodings: &[ProtectedEncoding], table: &Table) -> Result<Vec<(String, Vec<f64>)>> {
    let mut block = Vec::new();
    for enc in encodings {
        block.extend(enc.encode(table.require(&enc.name)?)?);
    }
    Ok(block)
}

/// Fits the chain on `table` and produces one fair replicate.
pub fn fit_and_transform(
    table: &Table,
    plan: &ChainPlan,
    stream: ReplicateStream,
) -> Result<(FittedChain, AdjustedDataset)> {
    check_table(table, plan)?;
    let n = table.n_rows;
    let encodings: Vec<ProtectedEncoding> = plan
        .protected
        .iter()
        .map(|name| table.require(name).map(ProtectedEncoding::from_column))
        .collect::<Result<_>>()?;
    let mut regressors = protected_block(&encodings, table)?;
    let mut steps = Vec::with_capacity(plan.order.len());
    let mut pit_values = Vec::with_capacity(plan.order.len());
    let mut adjusted = Vec::with_capacity(plan.order.len());

    for (j, name) in plan.order.iter().enumerate() {
        let col = table.require(name)?;
        let design = DesignMatrix::from_columns(n, &regressors)?;
        let model = match plan.model(name) {
            PlannedModel::Fixed(family) => condmodels::fit(family, &col.values, &design)?,
            PlannedModel::Select(SelectionRule::CountAic) => {
                condmodels::select_count_model(&col.values, &design)?
            }
        };
        let marginal = EmpiricalDistribution::new(&col.values)?;
        let raw_support = col.raw.as_ref().map(|raw| {
            marginal
                .support()
                .iter()
                .map(|s| raw[col.values.iter().position(|v| v == s).expect("support value occurs")])
                .collect()
        });
        let step = ChainStep {
            variable: name.clone(),
            kind: col.kind,
            model,
            marginal,
            raw_support,
        };
        let (pits, values) = apply_step(&step, j, &col.values, &design, stream)?;
        let raw = raw_lookup(&step, &values);
        regressors.push((adjusted_name(name), values.clone()));
        adjusted.push((name.clone(), values, raw));
        pit_values.push(pits);
        steps.push(step);
    }

    let out = assemble(table, &plan.protected, &adjusted)?;
    let chain = FittedChain {
        plan: plan.clone(),
        replicate: stream.replicate,
        protected: encodings,
        steps,
        pit_values,
    };
    Ok((
        chain,
        AdjustedDataset {
            replicate_index: stream.replicate,
            table: out,
        },
    ))
}

/// Fits `plan.m_replicates` independent replicates (in parallel) ordered by index.
pub fn fit_many(table: &Table, plan: &ChainPlan) -> Result<Vec<(FittedChain, AdjustedDataset)>> {
    (1..=plan.m_replicates)
        .into_par_iter()
        .map(|k| fit_and_transform(table, plan, ReplicateStream::new(plan.seed, k)))
        .collect()
}

pub fn adjust_many(table: &Table, plan: &ChainPlan) -> Result<Vec<AdjustedDataset>> {
    Ok(fit_many(table, plan)?.into_iter().map(|(_, a)| a).collect())
}

/// Applies a frozen chain to new rows. Returns the adjusted rows and the PIT values.
pub fn transform_new(
    chain: &FittedChain,
    rows: &Table,
    stream: ReplicateStream,
) -> Result<(AdjustedDataset, Vec<Vec<f64>>)> {
    if rows.n_rows == 0 {
        return Err(Error::EmptyInput("no rows to transform"));
    }
    for step in &chain.steps {
        let col = rows.require(&step.variable)?;
        if col.kind != step.kind {
            return Err(Error::SchemaMismatch(format!(
                "column `{}` is {}, chain expects {}",
                step.variable, col.kind, step.kind
            )));
        }
    }
    let n = rows.n_rows;
    let mut regressors = protected_block(&chain.protected, rows)?;
    let mut pit_values = Vec::with_capacity(chain.steps.len());
    let mut adjusted = Vec::with_capacity(chain.steps.len());
    for (j, step) in chain.steps.iter().enumerate() {
        let col = rows.require(&step.variable)?;
        let design = DesignMatrix::from_columns(n, &regressors)?;
        if design.names() != step.model.design_names.as_slice() {
            return Err(Error::SchemaMismatch(format!(
                "design for `{}` has columns {:?}, model expects {:?}",
                step.variable,
                design.names(),
                step.model.design_names
            )));
        }
        let (pits, values) = apply_step(step, j, &col.values, &design, stream)?;
        let raw = raw_lookup(step, &values);
        regressors.push((adjusted_name(&step.variable), values.clone()));
        adjusted.push((step.variable.clone(), values, raw));
        pit_values.push(pits);
    }
    let out = assemble(rows, &chain.plan.protected, &adjusted)?;
    Ok((
        AdjustedDataset {
            replicate_index: stream.replicate,
            table: out,
        },
        pit_values,
    ))
}
