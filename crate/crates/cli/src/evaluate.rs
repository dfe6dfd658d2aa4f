use anyhow::Result;
use fairchain::diagnostics::{ks_two_sample, KsReport};
use fairchain::evaluate::{
    average_over_replicates, cross_validated_scores, roc_and_auc, scores_by_group, ForestParams, RocCurve,
};
use fairchain::tabular::Table;
use fairchain::Error;
use serde::Serialize;

use crate::inputs::{display, group_labels, load_adjusted, load_data, load_plan, load_spec};
use crate::output::{timestamp, OutputDir, RunManifest, CSV_FORMAT_VERSION, REPORT_FORMAT_VERSION};
use crate::{user_error, EvaluateArgs};

#[derive(Serialize)]
struct GroupScoreKs {
    group_a: String,
    group_b: String,
    unadjusted: KsReport,
    adjusted: KsReport,
}

#[derive(Serialize)]
struct EvaluationReport {
    format_version: u32,
    auc_unadjusted: f64,
    auc_adjusted: f64,
    n_rows: usize,
    replicates: usize,
    trees: usize,
    folds: usize,
    seed: u64,
    features: Vec<String>,
    scoring: &'static str,
    group_score_ks: Vec<GroupScoreKs>,
}

pub fn run(args: &EvaluateArgs) -> Result<u8> {
    if args.trees == 0 {
        return Err(user_error("--trees must be positive"));
    }
    let started_at = timestamp();
    let spec = load_spec(&args.spec)?;
    let plan = load_plan(&spec, None, args.seed)?;
    let seed = plan.seed;
    let data = load_data(&args.data, &spec)?;
    let labels = data.require(&plan.outcome)?.values.clone();
    let ones = labels.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == labels.len() {
        return Err(user_error(format!(
            "outcome `{}` has a single class",
            plan.outcome
        )));
    }
    let replicates = load_adjusted(&args.adjusted, &spec, data.n_rows)?;
    let params = ForestParams::with_trees(args.trees);

    let features = feature_table(&data, &plan.protected, &plan.outcome);
    let unadjusted = cross_validated_scores(&features, &labels, args.folds, &params, seed)?;
    let mut per_replicate = Vec::with_capacity(replicates.len());
    for (_, table) in &replicates {
        let replicate_labels = &table.require(&plan.outcome)?.values;
        if *replicate_labels != labels {
            return Err(user_error("outcome column of an adjusted file differs from the data"));
        }
        let f = feature_table(table, &plan.protected, &plan.outcome);
        if f.names() != features.names() {
            return Err(Error::SchemaMismatch(format!(
                "adjusted features {:?} differ from data features {:?}",
                f.names(),
                features.names()
            ))
            .into());
        }
        per_replicate.push(cross_validated_scores(&f, &labels, args.folds, &params, seed)?);
    }
    let adjusted = average_over_replicates(&per_replicate)?;

    let roc_unadjusted = roc_and_auc(&unadjusted, &labels)?;
    let roc_adjusted = roc_and_auc(&adjusted, &labels)?;
    let groups = group_labels(&data, &plan)?;
    let by_group_raw = scores_by_group(&unadjusted, &groups)?;
    let by_group_adj = scores_by_group(&adjusted, &groups)?;
    let mut order: Vec<usize> = (0..by_group_raw.len()).collect();
    order.sort_by(|&a, &b| by_group_raw[a].0.cmp(&by_group_raw[b].0));
    let mut group_score_ks = Vec::new();
    for (x, &a) in order.iter().enumerate() {
        for &b in &order[x + 1..] {
            group_score_ks.push(GroupScoreKs {
                group_a: by_group_raw[a].0.clone(),
                group_b: by_group_raw[b].0.clone(),
                unadjusted: ks_two_sample(&by_group_raw[a].1, &by_group_raw[b].1)?,
                adjusted: ks_two_sample(&by_group_adj[a].1, &by_group_adj[b].1)?,
            });
        }
    }

    let report = EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        auc_unadjusted: roc_unadjusted.auc,
        auc_adjusted: roc_adjusted.auc,
        n_rows: data.n_rows,
        replicates: replicates.len(),
        trees: args.trees,
        folds: args.folds,
        seed,
        features: features.names().iter().map(|s| s.to_string()).collect(),
        scoring: "out-of-fold probabilities; one forest per replicate, probabilities averaged",
        group_score_ks,
    };

    let mut out = OutputDir::create(&args.out)?;
    out.write_json("evaluation.json", &report, REPORT_FORMAT_VERSION)?;
    out.write("roc_adjusted.csv", &roc_csv(&roc_adjusted)?, CSV_FORMAT_VERSION)?;
    out.write("roc_unadjusted.csv", &roc_csv(&roc_unadjusted)?, CSV_FORMAT_VERSION)?;
    out.write(
        "scores_by_group.csv",
        &group_csv(&[("unadjusted", &unadjusted), ("adjusted", &adjusted)], &groups)?,
        CSV_FORMAT_VERSION,
    )?;
    out.finish(
        "evaluate_manifest.json",
        RunManifest {
            command: "evaluate".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            input: display(&args.data),
            spec: display(&args.spec),
            adjusted: Some(display(&args.adjusted)),
            output_dir: display(&args.out),
            seed,
            m: Some(replicates.len()),
            started_at,
            finished_at: timestamp(),
            artifacts: Vec::new(),
        },
    )?;
    println!(
        "auc unadjusted {:.4}, adjusted {:.4} ({} replicates, {} trees)",
        report.auc_unadjusted, report.auc_adjusted, report.replicates, args.trees
    );
    Ok(0)
}

fn feature_table(table: &Table, protected: &[String], outcome: &str) -> Table {
    let mut drop: Vec<&str> = protected.iter().map(String::as_str).collect();
    drop.push(outcome);
    table.without(&drop)
}

fn roc_csv(curve: &RocCurve) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    Ok(buf)
}

fn group_csv(runs: &[(&str, &Vec<f64>)], groups: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "group", "score"])?;
    for (run, scores) in runs {
        for (g, s) in groups.iter().zip(scores.iter()) {
            w.write_record([*run, g.as_str(), &s.to_string()])?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}
