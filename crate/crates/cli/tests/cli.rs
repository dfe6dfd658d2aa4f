mod support;

use support::{biased_csv, code, snapshot, stderr, Workspace, SPEC};

const EPOCH: (&str, &str) = ("SOURCE_DATE_EPOCH", "1700000000");

#[test]
fn adjust_writes_replicates_chain_and_manifest() {
    let ws = Workspace::new(&biased_csv(400, 1), SPEC);
    let out = ws.adjust("run", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let names: Vec<String> = snapshot(&ws.path("run")).into_iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        ["adjusted_1.csv", "adjusted_2.csv", "adjusted_3.csv", "chain.json", "manifest.json"]
    );
    let header = std::fs::read_to_string(ws.path("run/adjusted_1.csv")).unwrap();
    // columns absent from the spec (here `id`) are not carried through
    assert_eq!(header.lines().next().unwrap(), "sex,age,priors,outcome");

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(ws.path("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "adjust");
    assert_eq!(manifest["m"], 3);
    assert_eq!(manifest["seed"], 17);
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 4);
    for a in artifacts {
        assert!(ws.path("run").join(a["path"].as_str().unwrap()).exists());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let ws = Workspace::new(&biased_csv(400, 2), SPEC);
    assert_eq!(code(&ws.adjust("run", &[EPOCH])), 0);
    let first = snapshot(&ws.path("run"));
    assert_eq!(code(&ws.adjust("run", &[EPOCH])), 0);
    assert_eq!(first, snapshot(&ws.path("run")));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let ws = Workspace::new(&biased_csv(400, 3), SPEC);
    assert_eq!(code(&ws.adjust("one", &[("FAIRCHAIN_THREADS", "1")])), 0);
    assert_eq!(code(&ws.adjust("three", &[("FAIRCHAIN_THREADS", "3")])), 0);
    let (a, b) = (snapshot(&ws.path("one")), snapshot(&ws.path("three")));
    for ((na, ca), (_, cb)) in a.iter().zip(&b) {
        if na != "manifest.json" {
            assert_eq!(ca, cb, "{na} differs");
        }
    }
    let bad = ws.adjust("bad", &[("FAIRCHAIN_THREADS", "zero")]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn missing_column_is_a_user_error_naming_it() {
    let csv = biased_csv(100, 4).replace("priors", "prior_count");
    let ws = Workspace::new(&csv, SPEC);
    let out = ws.adjust("run", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("priors"), "{}", stderr(&out));
}

#[test]
fn diagnose_accepts_a_correct_chain() {
    let ws = Workspace::new(&biased_csv(1500, 5), SPEC);
    assert_eq!(code(&ws.adjust("run", &[])), 0);
    let out = ws.run(
        &["diagnose", "--data", "data.csv", "--adjusted", "run", "--spec", "spec.json", "--out", "diag", "--trees", "50"],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(ws.path("diag/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(report["pit_source"], "stored_chain");
    assert_eq!(report["fit_tests"].as_array().unwrap().len(), 9);
    assert_eq!(report["parity_flag"], false);
    assert!(ws.path("diag/diagnose_manifest.json").exists());
}

#[test]
fn diagnose_flags_unadjusted_data() {
    let csv = biased_csv(1500, 6);
    let ws = Workspace::new(&csv, SPEC);
    std::fs::create_dir(ws.path("raw")).unwrap();
    std::fs::write(ws.path("raw/adjusted_1.csv"), &csv).unwrap();
    let out = ws.run(
        &["diagnose", "--data", "data.csv", "--adjusted", "raw", "--spec", "spec.json", "--out", "diag", "--trees", "20"],
        &[],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(ws.path("diag/diagnostics.json").exists());
}

#[test]
fn diagnose_without_adjusted_files_is_a_user_error() {
    let ws = Workspace::new(&biased_csv(100, 7), SPEC);
    std::fs::create_dir(ws.path("empty")).unwrap();
    let out = ws.run(
        &["diagnose", "--data", "data.csv", "--adjusted", "empty", "--spec", "spec.json", "--out", "diag"],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("adjusted_"), "{}", stderr(&out));
}

#[test]
fn evaluate_with_one_tree_writes_every_output() {
    let ws = Workspace::new(&biased_csv(600, 8), SPEC);
    assert_eq!(code(&ws.adjust("run", &[])), 0);
    let out = ws.run(
        &["evaluate", "--data", "data.csv", "--adjusted", "run", "--spec", "spec.json", "--out", "eval", "--trees", "1"],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(ws.path("eval/evaluation.json")).unwrap()).unwrap();
    for key in ["auc_unadjusted", "auc_adjusted"] {
        let auc = report[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc));
    }
    assert_eq!(report["features"], serde_json::json!(["sex", "age", "priors"]));
    let roc = std::fs::read_to_string(ws.path("eval/roc_adjusted.csv")).unwrap();
    assert_eq!(roc.lines().next().unwrap(), "fpr,tpr,threshold");
    assert!(roc.lines().nth(1).unwrap().starts_with("0,0,"));
    assert!(roc.trim_end().lines().last().unwrap().starts_with("1,1,"));
    let groups = std::fs::read_to_string(ws.path("eval/scores_by_group.csv")).unwrap();
    assert_eq!(groups.lines().next().unwrap(), "run,group,score");
    assert_eq!(groups.lines().count(), 1 + 2 * 600);
    assert!(ws.path("eval/roc_unadjusted.csv").exists());
    assert!(ws.path("eval/evaluate_manifest.json").exists());
}

#[test]
fn evaluate_rejects_a_single_class_outcome() {
    let csv: String = biased_csv(200, 9)
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l}\n")
            } else {
                let cut = l.rfind(',').unwrap();
                format!("{},0\n", &l[..cut])
            }
        })
        .collect();
    let ws = Workspace::new(&csv, SPEC);
    std::fs::create_dir(ws.path("adj")).unwrap();
    std::fs::write(ws.path("adj/adjusted_1.csv"), &csv).unwrap();
    let out = ws.run(
        &["evaluate", "--data", "data.csv", "--adjusted", "adj", "--spec", "spec.json", "--out", "eval"],
        &[],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("single class"));
}

#[test]
fn help_lists_subcommands() {
    let ws = Workspace::new("", SPEC);
    let out = ws.run(&["--help"], &[]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["adjust", "diagnose", "evaluate"] {
        assert!(text.contains(sub));
    }
}
