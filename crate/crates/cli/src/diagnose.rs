use anyhow::Result;
use fairchain::chain::{fit_and_transform, transform_new, ReplicateStream};
use fairchain::condmodels::Family;
use fairchain::diagnostics::{
    group_parity, ks_uniform, leakage_audit, parity_flag, KsReport, LeakageReport, ParityTest,
};
use fairchain::evaluate::ForestParams;
use fairchain::tabular::Table;
use serde::Serialize;

use crate::inputs::{display, load_adjusted, load_bundle, load_data, load_plan, load_spec};
use crate::output::{timestamp, OutputDir, RunManifest, REPORT_FORMAT_VERSION};
use crate::{user_error, DiagnoseArgs, EXIT_FLAGGED};

#[derive(Serialize)]
struct FitTest {
    replicate: usize,
    variable: String,
    family: Family,
    ks: KsReport,
    rejected: bool,
}

#[derive(Serialize)]
struct ParityEntry {
    replicate: usize,
    #[serde(flatten)]
    test: ParityTest,
    rejected_after: bool,
}

#[derive(Serialize)]
struct LeakageEntry {
    features: &'static str,
    #[serde(flatten)]
    report: LeakageReport,
}

#[derive(Serialize)]
struct DiagnosticsReport {
    format_version: u32,
    alpha: f64,
    /// `stored_chain` when PIT values come from chain.json, `refit` otherwise.
    pit_source: &'static str,
    fit_tests: Vec<FitTest>,
    fit_rejections: usize,
    parity: Vec<ParityEntry>,
    /// Per-test level after Bonferroni correction.
    parity_level: f64,
    parity_flag: bool,
    leakage: Vec<LeakageEntry>,
}

pub fn run(args: &DiagnoseArgs) -> Result<u8> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(user_error(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let started_at = timestamp();
    let spec = load_spec(&args.spec)?;
    let data = load_data(&args.data, &spec)?;
    let replicates = load_adjusted(&args.adjusted, &spec, data.n_rows)?;
    let bundle = load_bundle(&args.adjusted)?;
    let plan = match &bundle {
        Some(b) => b.plan.clone(),
        None => load_plan(&spec, Some(replicates.len()), args.seed)?,
    };
    let seed = args.seed.unwrap_or(plan.seed);

    let mut fit_tests = Vec::new();
    let pit_source = match &bundle {
        Some(b) => {
            for chain in &b.replicates {
                let stream = ReplicateStream::new(b.plan.seed, chain.replicate);
                let (_, pits) = transform_new(chain, &data, stream)?;
                for (step, u) in chain.steps.iter().zip(&pits) {
                    fit_tests.push(fit_test(chain.replicate, &step.variable, step.model.family, u, args.alpha)?);
                }
            }
            "stored_chain"
        }
        None => {
            let (chain, _) = fit_and_transform(&data, &plan, ReplicateStream::new(plan.seed, 1))?;
            for (step, u) in chain.steps.iter().zip(&chain.pit_values) {
                fit_tests.push(fit_test(1, &step.variable, step.model.family, u, args.alpha)?);
            }
            "refit"
        }
    };
    let fit_rejections = fit_tests.iter().filter(|t| t.rejected).count();
    for t in fit_tests.iter().filter(|t| t.rejected) {
        eprintln!(
            "warning: replicate {} `{}` ({}) fails the uniformity test (D = {:.4}, p = {:.3e})",
            t.replicate, t.variable, t.family, t.ks.statistic, t.ks.p_value
        );
    }

    let mut tests = Vec::new();
    for (k, adjusted) in &replicates {
        for p in &plan.protected {
            for test in group_parity(&data, adjusted, data.require(p)?, &plan.order)? {
                tests.push((*k, test));
            }
        }
    }
    let parity_level = args.alpha / tests.len().max(1) as f64;
    let flagged = parity_flag(
        &tests.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>(),
        args.alpha,
    );
    let parity = tests
        .into_iter()
        .map(|(replicate, test)| ParityEntry {
            replicate,
            rejected_after: test.after.rejects(parity_level),
            test,
        })
        .collect();

    let params = ForestParams::with_trees(args.trees);
    let order: Vec<&str> = plan.order.iter().map(String::as_str).collect();
    let raw_features = data.select(&order)?;
    let adjusted_features: Table = replicates[0].1.select(&order)?;
    let mut leakage = Vec::new();
    for p in &plan.protected {
        let z = data.require(p)?;
        for (label, features) in [("raw", &raw_features), ("adjusted", &adjusted_features)] {
            let report = leakage_audit(features, z, args.folds, seed, &params)?;
            for level in &report.levels {
                println!("leakage {p}={} ({label}): auc {:.3}", level.level, level.auc);
            }
            leakage.push(LeakageEntry {
                features: label,
                report,
            });
        }
    }

    let report = DiagnosticsReport {
        format_version: REPORT_FORMAT_VERSION,
        alpha: args.alpha,
        pit_source,
        fit_rejections,
        fit_tests,
        parity,
        parity_level,
        parity_flag: flagged,
        leakage,
    };
    let mut out = OutputDir::create(&args.out)?;
    out.write_json("diagnostics.json", &report, REPORT_FORMAT_VERSION)?;
    out.finish(
        "diagnose_manifest.json",
        RunManifest {
            command: "diagnose".into(),
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
        "{} of {} uniformity tests reject at {}",
        fit_rejections,
        report.fit_tests.len(),
        args.alpha
    );
    if flagged {
        eprintln!("warning: a group-parity test rejects after adjustment (level {parity_level:.3e})");
        return Ok(EXIT_FLAGGED);
    }
    Ok(0)
}

fn fit_test(replicate: usize, variable: &str, family: Family, u: &[f64], alpha: f64) -> Result<FitTest> {
    let ks = ks_uniform(u)?;
    Ok(FitTest {
        replicate,
        variable: variable.to_string(),
        family,
        rejected: ks.rejects(alpha),
        ks,
    })
}
