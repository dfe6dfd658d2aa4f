//! Random forest classifier, replicate averaging, ROC curves and AUC.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::{Column, ColumnKind, Table};

const TREE_STREAM: u64 = 0x7472_6565;
const FOLD_STREAM: u64 = 0x666f_6c64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub min_leaf_size: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            features_per_split: None,
            min_leaf_size: 5,
            max_depth: None,
        }
    }
}

impl ForestParams {
    pub fn with_trees(n_trees: usize) -> Self {
        ForestParams {
            n_trees,
            ..Self::default()
        }
    }

    fn mtry(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or(((d as f64).sqrt().floor()) as usize)
            .clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class frequencies `(class 0, class 1)`.
    Leaf { frequencies: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(p1: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf {
                frequencies: (1.0 - p1, p1),
            }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { frequencies } => return frequencies.1,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub features: Vec<FeatureSchema>,
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub seed: u64,
}

/// Column-major feature values; categorical columns hold level codes.
struct Features {
    columns: Vec<Vec<f64>>,
    n: usize,
}

/// Per-feature distinct sorted values and the rank of each row within them.
struct Ranked {
    values: Vec<Vec<f64>>,
    ranks: Vec<Vec<u32>>,
}

impl Ranked {
    fn new(features: &Features) -> Self {
        let mut values = Vec::with_capacity(features.columns.len());
        let mut ranks = Vec::with_capacity(features.columns.len());
        for col in &features.columns {
            let mut distinct = col.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            ranks.push(
                col.iter()
                    .map(|v| distinct.partition_point(|d| d < v) as u32)
                    .collect(),
            );
            values.push(distinct);
        }
        Ranked { values, ranks }
    }
}

fn schema_of(table: &Table) -> Vec<FeatureSchema> {
    table
        .columns
        .iter()
        .map(|c| FeatureSchema {
            name: c.name.clone(),
            kind: c.kind,
            levels: c.levels.clone(),
        })
        .collect()
}

fn check_finite(table: &Table) -> Result<()> {
    for col in &table.columns {
        if let Some(v) = col.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "feature `{}` has non-finite value {v}",
                col.name
            )));
        }
    }
    Ok(())
}

fn features_for(schema: &[FeatureSchema], rows: &Table) -> Result<Features> {
    let mut columns = Vec::with_capacity(schema.len());
    for f in schema {
        let col = rows.require(&f.name)?;
        if col.kind != f.kind {
            return Err(Error::SchemaMismatch(format!(
                "feature `{}` is {}, forest expects {}",
                f.name, col.kind, f.kind
            )));
        }
        columns.push(match &f.levels {
            Some(levels) if col.levels.as_ref() != Some(levels) => recode(col, levels)?,
            _ => col.values.clone(),
        });
    }
    Ok(Features {
        columns,
        n: rows.n_rows,
    })
}

fn recode(col: &Column, levels: &[String]) -> Result<Vec<f64>> {
    (0..col.len())
        .map(|i| {
            let label = col.label(i).unwrap_or_default();
            levels
                .iter()
                .position(|l| l == label)
                .map(|p| p as f64)
                .ok_or_else(|| Error::UnseenLevel {
                    column: col.name.clone(),
                    level: label.to_string(),
                })
        })
        .collect()
}

fn check_labels(labels: &[f64], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if let Some(v) = labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidParameter(format!("label {v} is not 0 or 1")));
    }
    let ones = labels.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClass);
    }
    Ok(())
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// Weighted Gini as the fraction `num / den`.
    num: u128,
    den: u128,
    left_count: usize,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        self.num * other.den < other.num * self.den
    }
}

struct Builder<'a> {
    ranked: &'a Ranked,
    labels: &'a [u8],
    params: &'a ForestParams,
    mtry: usize,
    // per-rank class counts, reused across nodes
    hist: Vec<[u32; 2]>,
    pairs: Vec<(u32, u8)>,
}

impl Builder<'_> {
    fn best_split(&mut self, rows: &[u32], features: &[usize], ones: usize) -> Option<Candidate> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf_size.max(1);
        let mut best: Option<Candidate> = None;
        for &f in features {
            let ranks = &self.ranked.ranks[f];
            let values = &self.ranked.values[f];
            // class counts by distinct value, in increasing value order
            let mut bins: Vec<(u32, [u32; 2])> = Vec::new();
            if n < values.len() / 4 {
                self.pairs.clear();
                self.pairs
                    .extend(rows.iter().map(|&r| (ranks[r as usize], self.labels[r as usize])));
                self.pairs.sort_unstable();
                for &(rank, y) in &self.pairs {
                    match bins.last_mut() {
                        Some((r, c)) if *r == rank => c[y as usize] += 1,
                        _ => {
                            let mut c = [0, 0];
                            c[y as usize] += 1;
                            bins.push((rank, c));
                        }
                    }
                }
            } else {
                self.hist.resize(values.len(), [0, 0]);
                for &r in rows {
                    self.hist[ranks[r as usize] as usize][self.labels[r as usize] as usize] += 1;
                }
                for (rank, c) in self.hist.iter_mut().enumerate() {
                    if c[0] + c[1] > 0 {
                        bins.push((rank as u32, *c));
                        *c = [0, 0];
                    }
                }
            }
            let total = [(n - ones) as u128, ones as u128];
            let mut left = [0u128, 0u128];
            for w in bins.windows(2) {
                left[0] += w[0].1[0] as u128;
                left[1] += w[0].1[1] as u128;
                let nl = left[0] + left[1];
                let nr = n as u128 - nl;
                if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                    continue;
                }
                let r0 = total[0] - left[0];
                let r1 = total[1] - left[1];
                let cand = Candidate {
                    feature: f,
                    threshold: 0.5 * (values[w[0].0 as usize] + values[w[1].0 as usize]),
                    num: left[0] * left[1] * nr + r0 * r1 * nl,
                    den: nl * nr,
                    left_count: nl as usize,
                };
                if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    fn grow(&mut self, mut rows: Vec<u32>, rng: &mut ChaCha8Rng) -> Tree {
        let d = self.ranked.values.len();
        let mut nodes = Vec::new();
        // (node index, row range, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        nodes.push(Node::Leaf {
            frequencies: (0.0, 0.0),
        });
        while let Some((at, lo, hi, depth)) = stack.pop() {
            let slice = &mut rows[lo..hi];
            let n = slice.len();
            let ones = slice.iter().filter(|&&r| self.labels[r as usize] == 1).count();
            let leaf = Node::Leaf {
                frequencies: ((n - ones) as f64 / n as f64, ones as f64 / n as f64),
            };
            let can_split = ones > 0
                && ones < n
                && n >= 2 * self.params.min_leaf_size.max(1)
                && self.params.max_depth.is_none_or(|m| depth < m);
            if !can_split {
                nodes[at] = leaf;
                continue;
            }
            let mut features = index::sample(rng, d, self.mtry).into_vec();
            features.sort_unstable();
            let Some(split) = self.best_split(slice, &features, ones) else {
                nodes[at] = leaf;
                continue;
            };
            let column = &self.ranked.ranks[split.feature];
            let values = &self.ranked.values[split.feature];
            let mut boundary = 0;
            for i in 0..n {
                if values[column[slice[i] as usize] as usize] <= split.threshold {
                    slice.swap(i, boundary);
                    boundary += 1;
                }
            }
            debug_assert_eq!(boundary, split.left_count);
            let left = nodes.len();
            nodes.push(Node::Leaf {
                frequencies: (0.0, 0.0),
            });
            let right = nodes.len();
            nodes.push(Node::Leaf {
                frequencies: (0.0, 0.0),
            });
            nodes[at] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            stack.push((right, lo + boundary, hi, depth + 1));
            stack.push((left, lo, lo + boundary, depth + 1));
        }
        Tree { nodes }
    }
}

/// Fits a forest of CART trees on bootstrap resamples.
pub fn fit_forest(features: &Table, labels: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
    if features.columns.is_empty() {
        return Err(Error::EmptyInput("forest needs at least one feature"));
    }
    if features.n_rows < 2 {
        return Err(Error::EmptyInput("forest needs at least two rows"));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be positive".into()));
    }
    check_labels(labels, features.n_rows)?;
    check_finite(features)?;
    let schema = schema_of(features);
    let x = features_for(&schema, features)?;
    let ranked = Ranked::new(&x);
    let y: Vec<u8> = labels.iter().map(|&v| v as u8).collect();
    let n = x.n;
    let mtry = params.mtry(schema.len());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(&[TREE_STREAM, seed, t as u64]);
            let rows: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
            let mut builder = Builder {
                ranked: &ranked,
                labels: &y,
                params,
                mtry,
                hist: Vec::new(),
                pairs: Vec::new(),
            };
            builder.grow(rows, &mut rng)
        })
        .collect();
    Ok(Forest {
        features: schema,
        trees,
        params: *params,
        seed,
    })
}

/// Mean over trees of the leaf class-1 frequency, per row.
pub fn predict_proba(forest: &Forest, rows: &Table) -> Result<Vec<f64>> {
    let x = features_for(&forest.features, rows)?;
    let m = forest.trees.len() as f64;
    Ok((0..x.n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = x.columns.iter().map(|c| c[i]).collect();
            forest.trees.iter().map(|t| t.predict(&row)).sum::<f64>() / m
        })
        .collect())
}

/// Element-wise mean of per-replicate scores.
pub fn average_over_replicates(per_replicate: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = per_replicate
        .first()
        .ok_or(Error::EmptyInput("no replicate scores"))?;
    if let Some(bad) = per_replicate.iter().find(|s| s.len() != first.len()) {
        return Err(Error::LengthMismatch(format!(
            "replicate scores of length {} and {}",
            first.len(),
            bad.len()
        )));
    }
    let m = per_replicate.len() as f64;
    Ok((0..first.len())
        .map(|i| per_replicate.iter().map(|s| s[i]).sum::<f64>() / m)
        .collect())
}

/// Stratified fold index for every row; each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[f64], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = rng::stream(&[FOLD_STREAM, seed]);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [0.0, 1.0] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Out-of-fold forest probabilities for every row.
pub fn cross_validated_scores(
    features: &Table,
    labels: &[f64],
    folds: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<Vec<f64>> {
    check_labels(labels, features.n_rows)?;
    let assignment = stratified_folds(labels, folds, seed)?;
    let mut scores = vec![0.0; features.n_rows];
    for k in 0..folds {
        let train: Vec<usize> = (0..features.n_rows).filter(|&i| assignment[i] != k).collect();
        let test: Vec<usize> = (0..features.n_rows).filter(|&i| assignment[i] == k).collect();
        if test.is_empty() {
            continue;
        }
        let train_labels: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let forest = fit_forest(
            &features.take_rows(&train),
            &train_labels,
            params,
            seed.wrapping_add(k as u64),
        )?;
        let predicted = predict_proba(&forest, &features.take_rows(&test))?;
        for (i, p) in test.into_iter().zip(predicted) {
            scores[i] = p;
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows with score `>= threshold` are classified positive; the first point uses `+inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fpr", "tpr", "threshold"])?;
        for p in &self.points {
            w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<roc csv>", e))?;
        Ok(())
    }
}

/// ROC curve over all distinct score thresholds with tied scores grouped,
/// and the trapezoid-rule area under it.
pub fn roc_and_auc(scores: &[f64], labels: &[f64]) -> Result<RocCurve> {
    check_labels(labels, scores.len())?;
    if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite score {v}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let pos = labels.iter().filter(|&&v| v == 1.0).count() as u128;
    let neg = labels.len() as u128 - pos;
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u128, 0u128);
    // twice the area, in units of 1 / (pos * neg)
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2 * pos * neg) as f64,
    })
}

/// Scores split by group label, groups in first-appearance order.
pub fn scores_by_group(scores: &[f64], groups: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    if scores.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores for {} group labels",
            scores.len(),
            groups.len()
        )));
    }
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (s, g) in scores.iter().zip(groups) {
        match out.iter_mut().find(|(name, _)| name == g) {
            Some((_, v)) => v.push(*s),
            None => out.push((g.clone(), vec![*s])),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn concordance(scores: &[f64], labels: &[f64]) -> f64 {
        let (mut twice, mut p, mut q) = (0u128, 0u128, 0u128);
        for (i, &yi) in labels.iter().enumerate() {
            if yi != 1.0 {
                continue;
            }
            p += 1;
            for (j, &yj) in labels.iter().enumerate() {
                if yj == 0.0 {
                    twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        }
        for &y in labels {
            if y == 0.0 {
                q += 1;
            }
        }
        twice as f64 / (2 * p * q) as f64
    }

    #[test]
    fn auc_examples() {
        let r = roc_and_auc(&[0.9, 0.8, 0.1], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(r.auc, 1.0);
        let r = roc_and_auc(&[0.9, 0.4, 0.5], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(concordance(&[0.9, 0.4, 0.5], &[1.0, 1.0, 0.0]), 0.5);
        assert_eq!(r.auc, 0.5);
        assert!(matches!(roc_and_auc(&[0.1, 0.2], &[1.0, 1.0]), Err(Error::SingleClass)));
        let first = r.points[0];
        let last = *r.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn auc_matches_concordance_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(2..120);
            let mut labels: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
            labels[0] = 0.0;
            labels[1] = 1.0;
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
            let r = roc_and_auc(&scores, &labels).unwrap();
            assert_eq!(r.auc, concordance(&scores, &labels));
            let shifted: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            assert_eq!(roc_and_auc(&shifted, &labels).unwrap().auc, r.auc);
            for w in r.points.windows(2) {
                assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
        }
    }

    #[test]
    fn random_scores_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<f64> = (0..10_000).map(|_| rng.random_range(0..2) as f64).collect();
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let auc = roc_and_auc(&scores, &labels).unwrap().auc;
        assert!((0.48..=0.52).contains(&auc), "auc {auc}");
    }

    #[test]
    fn averaging() {
        let avg = average_over_replicates(&[vec![0.2, 0.4], vec![0.4, 0.6]]).unwrap();
        assert!((avg[0] - 0.3).abs() < 1e-15 && (avg[1] - 0.5).abs() < 1e-15);
        assert_eq!(average_over_replicates(&[vec![0.1, 0.7]]).unwrap(), vec![0.1, 0.7]);
        assert!(matches!(
            average_over_replicates(&[vec![0.1], vec![0.1, 0.2]]),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn leaf_frequency_means() {
        let forest = Forest {
            features: vec![FeatureSchema {
                name: "x".into(),
                kind: ColumnKind::Continuous,
                levels: None,
            }],
            trees: vec![Tree::leaf(0.75)],
            params: ForestParams::with_trees(1),
            seed: 0,
        };
        let rows = Table::new(vec![Column::continuous("x", vec![-3.0, 0.0, 8.0])]).unwrap();
        assert_eq!(predict_proba(&forest, &rows).unwrap(), vec![0.75; 3]);
        let two = Forest {
            trees: vec![Tree::leaf(0.2), Tree::leaf(0.6)],
            ..forest
        };
        let p = predict_proba(&two, &rows).unwrap();
        assert!(p.iter().all(|v| (v - 0.4).abs() < 1e-15));
        let wrong = Table::new(vec![Column::continuous("w", vec![1.0])]).unwrap();
        assert!(predict_proba(&two, &wrong).is_err());
    }

    #[test]
    fn separable_feature() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 - 99.5) / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let table = Table::new(vec![Column::continuous("x", x)]).unwrap();
        let forest = fit_forest(&table, &y, &ForestParams::with_trees(50), 1).unwrap();
        let p = predict_proba(&forest, &table).unwrap();
        let correct = p.iter().zip(&y).filter(|(p, y)| (**p >= 0.5) == (**y == 1.0)).count();
        assert_eq!(correct, 200);
        let probe = Table::new(vec![Column::continuous("x", vec![-10.0, 10.0])]).unwrap();
        let p = predict_proba(&forest, &probe).unwrap();
        assert!(p[0] <= 0.05 && p[1] >= 0.95, "{p:?}");
        for tree in &forest.trees {
            for node in &tree.nodes {
                if let Node::Leaf { frequencies } = node {
                    assert!((frequencies.0 + frequencies.1 - 1.0).abs() < 1e-15);
                }
            }
        }
        let all_one = vec![1.0; 200];
        assert!(matches!(
            fit_forest(&table, &all_one, &ForestParams::with_trees(5), 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn forest_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.random_range(0..5) as f64).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(a, b)| ((a + b / 5.0) > 0.9) as u8 as f64).collect();
        let table = Table::new(vec![Column::continuous("a", a), Column::count("b", b)]).unwrap();
        let f1 = fit_forest(&table, &y, &ForestParams::with_trees(20), 3).unwrap();
        let f2 = fit_forest(&table, &y, &ForestParams::with_trees(20), 3).unwrap();
        assert_eq!(f1, f2);
        let f3 = fit_forest(&table, &y, &ForestParams::with_trees(20), 4).unwrap();
        assert_ne!(f1, f3);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<f64> = (0..103).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let folds = stratified_folds(&labels, 5, 1).unwrap();
        for k in 0..5 {
            let ones = (0..103).filter(|&i| folds[i] == k && labels[i] == 1.0).count();
            assert!((6..=7).contains(&ones));
        }
        assert!(stratified_folds(&labels, 1, 1).is_err());
    }
}
