//! Kolmogorov–Smirnov fit and group-parity tests, and the protected-attribute
//! leakage audit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{cross_validated_scores, roc_and_auc, ForestParams};
use crate::tabular::{Column, ColumnKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsVariant {
    Uniform,
    TwoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    pub p_value: f64,
    pub variant: KsVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

impl KsReport {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let p = if t < 1.18 {
        // Jacobi-transformed series, fast for small t
        let w = std::f64::consts::PI.powi(2) / (8.0 * t * t);
        let s: f64 = (1..=6)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * w).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * t * t).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

fn p_value(d: f64, n_eff: f64) -> f64 {
    let rn = n_eff.sqrt();
    kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)
}

/// One-sample test of `u` against Uniform(0, 1).
pub fn ks_uniform(u: &[f64]) -> Result<KsReport> {
    if u.is_empty() {
        return Err(Error::EmptyInput("ks test needs at least one value"));
    }
    if let Some(&v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::ProbabilityOutOfRange(v));
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - v).max(v - i as f64 / n);
    }
    Ok(KsReport {
        statistic: d,
        n: sorted.len(),
        n2: None,
        p_value: p_value(d, n),
        variant: KsVariant::Uniform,
        caveat: None,
    })
}

/// Two-sample test; the p-value is conservative when the samples contain ties.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("two-sample ks needs two non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    // |i/na - j/nb| scaled by na*nb, kept integral so swapping samples is exact
    let mut best: u128 = 0;
    let mut ties = false;
    while i < na && j < nb {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        let (i0, j0) = (i, j);
        while i < na && a[i] == v {
            i += 1;
        }
        while j < nb && b[j] == v {
            j += 1;
        }
        ties |= (i - i0) + (j - j0) > 1;
        let gap = (i as u128 * nb as u128).abs_diff(j as u128 * na as u128);
        best = best.max(gap);
    }
    ties |= a[i.min(na - 1)..].windows(2).any(|w| w[0] == w[1])
        || b[j.min(nb - 1)..].windows(2).any(|w| w[0] == w[1]);
    let d = best as f64 / (na as u128 * nb as u128) as f64;
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsReport {
        statistic: d,
        n: na,
        n2: Some(nb),
        p_value: p_value(d, n_eff),
        variant: KsVariant::TwoSample,
        caveat: ties.then(|| "samples contain ties; p-value is conservative".to_string()),
    })
}

/// Row groups of a protected column: its levels when categorical or binary,
/// otherwise a split at the median.
pub fn protected_groups(protected: &Column) -> Vec<(String, Vec<usize>)> {
    match protected.kind {
        ColumnKind::Categorical | ColumnKind::Binary => {
            let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
            let mut keys: Vec<f64> = protected.values.clone();
            keys.sort_by(f64::total_cmp);
            keys.dedup();
            for key in keys {
                let rows: Vec<usize> = (0..protected.len())
                    .filter(|&i| protected.values[i] == key)
                    .collect();
                groups.push((protected.group_label(rows[0]), rows));
            }
            groups
        }
        ColumnKind::Continuous | ColumnKind::Count => {
            let mut sorted = protected.values.clone();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[(sorted.len() - 1) / 2];
            let (low, high): (Vec<usize>, Vec<usize>) =
                (0..protected.len()).partition(|&i| protected.values[i] <= median);
            let mut groups = vec![(format!("<={median}"), low)];
            if !high.is_empty() {
                groups.push((format!(">{median}"), high));
            }
            groups
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAuc {
    pub level: String,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub protected: String,
    pub folds: usize,
    pub n_trees: usize,
    pub levels: Vec<LevelAuc>,
}

/// Cross-validated forest AUC for recovering each protected group (one vs
/// rest) from `features`. Two-group attributes report only the second group.
pub fn leakage_audit(
    features: &Table,
    protected: &Column,
    folds: usize,
    seed: u64,
    params: &ForestParams,
) -> Result<LeakageReport> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if protected.len() != features.n_rows {
        return Err(Error::LengthMismatch(format!(
            "protected column has {} rows, features {}",
            protected.len(),
            features.n_rows
        )));
    }
    let groups = protected_groups(protected);
    if groups.len() < 2 {
        return Err(Error::SingleClass);
    }
    let skip = usize::from(groups.len() == 2);
    let mut levels = Vec::new();
    for (label, rows) in groups.into_iter().skip(skip) {
        let mut target = vec![0.0; features.n_rows];
        for i in rows {
            target[i] = 1.0;
        }
        let members = target.iter().filter(|&&t| t == 1.0).count();
        if members < folds || features.n_rows - members < folds {
            return Err(Error::SingleClass);
        }
        let scores = cross_validated_scores(features, &target, folds, params, seed)?;
        levels.push(LevelAuc {
            level: label,
            auc: roc_and_auc(&scores, &target)?.auc,
        });
    }
    Ok(LeakageReport {
        protected: protected.name.clone(),
        folds,
        n_trees: params.n_trees,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityTest {
    pub variable: String,
    pub protected: String,
    pub group: String,
    pub before: KsReport,
    pub after: KsReport,
}

/// Two-sample KS of each variable between each protected group and the rest,
/// on the original and on the adjusted values.
pub fn group_parity(
    original: &Table,
    adjusted: &Table,
    protected: &Column,
    variables: &[String],
) -> Result<Vec<ParityTest>> {
    if original.n_rows != adjusted.n_rows || protected.len() != original.n_rows {
        return Err(Error::LengthMismatch(format!(
            "original {} rows, adjusted {} rows, protected {} rows",
            original.n_rows,
            adjusted.n_rows,
            protected.len()
        )));
    }
    let groups = protected_groups(protected);
    let skip = usize::from(groups.len() == 2);
    let mut out = Vec::new();
    for name in variables {
        let before = &original.require(name)?.values;
        let after = &adjusted.require(name)?.values;
        for (label, rows) in groups.iter().skip(skip) {
            if rows.len() == protected.len() {
                continue;
            }
            let mut inside = vec![false; protected.len()];
            for &i in rows {
                inside[i] = true;
            }
            let split = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for (i, &x) in v.iter().enumerate() {
                    if inside[i] {
                        a.push(x);
                    } else {
                        b.push(x);
                    }
                }
                (a, b)
            };
            let (ba, bb) = split(before);
            let (aa, ab) = split(after);
            out.push(ParityTest {
                variable: name.clone(),
                protected: protected.name.clone(),
                group: label.clone(),
                before: ks_two_sample(&ba, &bb)?,
                after: ks_two_sample(&aa, &ab)?,
            });
        }
    }
    Ok(out)
}

/// True when any adjusted parity test rejects at `alpha` after a Bonferroni
/// correction over all tests.
pub fn parity_flag(tests: &[ParityTest], alpha: f64) -> bool {
    let level = alpha / tests.len().max(1) as f64;
    tests.iter().any(|t| t.after.rejects(level))
}
