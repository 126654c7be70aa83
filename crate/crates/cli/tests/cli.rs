use std::path::Path;
use std::process::{Command, Output};

fn cascadefin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascadefin"))
        .args(args)
        .current_dir(dir)
        .env_remove("CASCADEFIN_SEED")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", stderr(out));
    serde_json::from_slice(&out.stdout).unwrap()
}

const CLEAN: &str = "bank_id,total_assets,total_liabilities,asset_00,asset_01\n\
a,100,90,60,40\n\
b,50,40,10,40\n\
c,80,60,0,80\n";

const BLANKS: &str = "bank_id,total_assets,total_liabilities,asset_00,asset_01,asset_02\n\
a,100,90,60,,20\n\
b,50,40,,10,\n\
c,80,60,20,20,40\n";

#[test]
fn ingest_complete_input_is_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let out = cascadefin(&["ingest", "--input", "in.csv", "--out", "done"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let completed = std::fs::read_to_string(tmp.path().join("done/completed.csv")).unwrap();
    assert_eq!(completed, CLEAN);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("done/repairs.json")).unwrap()).unwrap();
    assert_eq!(report["repaired"], 0);
    assert_eq!(report["imputed_cells"], 0);
    assert!(report["repairs"].as_array().unwrap().is_empty());
    assert!(tmp.path().join("done/manifest.json").exists());
}

#[test]
fn ingest_fills_blanks_to_totals() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), BLANKS).unwrap();
    let out = cascadefin(&["ingest", "--input", "in.csv", "--out", "done"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(tmp.path().join("done/completed.csv")).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').skip(1).map(|f| f.parse().unwrap()).collect();
        let sum: f64 = fields[2..].iter().sum();
        assert!((sum - fields[0]).abs() <= 1e-9 * fields[0], "{line}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("done/repairs.json")).unwrap()).unwrap();
    assert_eq!(report["imputed_rows"], 2);
    assert_eq!(report["imputed_cells"], 3);
}

#[test]
fn malformed_row_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.csv"),
        "bank_id,total_assets,total_liabilities,asset_00\na,1,0.5,1\nb,2,1,oops\n",
    )
    .unwrap();
    let out = cascadefin(&["ingest", "--input", "bad.csv", "--out", "done"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 3") && msg.contains("asset_00"), "{msg}");

    std::fs::write(tmp.path().join("hdr.csv"), "bank_id,total_assets,debts,asset_00\n").unwrap();
    let out = cascadefin(&["ingest", "--input", "hdr.csv", "--out", "done"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("total_liabilities"), "{}", stderr(&out));
}

#[test]
fn run_requires_seed_for_noisy_barrier() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let args = [
        "run", "--input", "in.csv", "--p", "0.6", "--alpha", "0.14", "--eta", "0.26",
    ];
    let out = cascadefin(&args, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--seed"));

    let out = Command::new(env!("CARGO_BIN_EXE_cascadefin"))
        .args(args)
        .current_dir(tmp.path())
        .env("CASCADEFIN_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "environment seed must not satisfy eta > 0");
}

#[test]
fn run_echoes_params_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let args = [
        "run", "--input", "in.csv", "--asset", "0", "--p", "0.6", "--alpha", "0.14", "--eta", "0.26", "--seed", "7",
    ];
    let first = cascadefin(&args, tmp.path());
    let v = json(&first);
    assert_eq!(v["params"]["alpha"], 0.14);
    assert_eq!(v["params"]["eta"], 0.26);
    assert_eq!(v["params"]["shocks"]["0"], 0.6);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["fates"].as_array().unwrap().len(), 3);
    assert_eq!(cascadefin(&args, tmp.path()).stdout, first.stdout);
}

#[test]
fn unit_shock_without_fire_sales_fails_nobody() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let v = json(&cascadefin(
        &["run", "--input", "in.csv", "--p", "1", "--alpha", "0", "--eta", "0"],
        tmp.path(),
    ));
    assert!(v["failures_per_round"].as_array().unwrap().iter().all(|n| n == 0));
    assert_eq!(v["survival_fraction_all"], 1.0);
}

#[test]
fn env_seed_is_used_for_deterministic_runs() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cascadefin"))
        .args(["run", "--input", "in.csv", "--p", "0.5", "--alpha", "0.1", "--eta", "0"])
        .current_dir(tmp.path())
        .env("CASCADEFIN_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(json(&out)["seed"], 42);
}

#[test]
fn roc_without_labels_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let out = cascadefin(
        &[
            "roc", "--input", "in.csv", "--p", "0.6", "--alpha", "0.1", "--eta", "0", "--out", "r",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--labels"));
}

#[test]
fn roc_on_oracle_labels_contains_perfect_point() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = cascadefin(
        &[
            "generate",
            "--synthetic",
            "banks=300,seed=2,label_p=0.6,label_alpha=0.1",
            "--out",
            "gen",
        ],
        tmp.path(),
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
    let out = cascadefin(
        &[
            "roc",
            "--input",
            "gen/network.csv",
            "--labels",
            "gen/labels.csv",
            "--p",
            "0.5:0.7:0.1",
            "--alpha",
            "0:0.2:0.1",
            "--eta",
            "0",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("r/roc.csv")).unwrap();
    assert!(csv.starts_with("alpha,eta,p,split,fpr,tpr,tp_count\n"));
    assert!(csv.lines().any(|l| l.starts_with("0.1,0,0.6,full,0,1,")), "{csv}");
}

#[test]
fn sweep_produces_one_line_per_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cascadefin(
        &[
            "sweep",
            "--synthetic",
            "banks=200,seed=1,label_p=0.5,label_alpha=0.05",
            "--p",
            "0:1:0.1",
            "--alpha",
            "0:0.1:0.01",
            "--eta",
            "0",
            "--out",
            "s",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("s/survival.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 11 * 11);
    let alphas: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(alphas.len(), 11);
    // p = 1 leaves every bank of a clean network standing.
    assert!(rows.iter().filter(|r| r[2] == "1").all(|r| r[3] == "1" && r[5] == "1"));
}

#[test]
fn phase_writes_regions_and_transition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cascadefin(
        &[
            "phase",
            "--synthetic",
            "banks=200,seed=1",
            "--p",
            "0.4:0.8:0.2",
            "--alpha",
            "0:0.4:0.1",
            "--eta",
            "0",
            "--out",
            "ph",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let phase = std::fs::read_to_string(tmp.path().join("ph/phase.csv")).unwrap();
    assert_eq!(phase.lines().count(), 1 + 3 * 5);
    assert!(phase.lines().skip(1).all(|l| l.ends_with(",I") || l.ends_with(",II")));
    let transition = std::fs::read_to_string(tmp.path().join("ph/transition.csv")).unwrap();
    assert_eq!(transition.lines().count(), 1 + 3);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    std::fs::write(tmp.path().join("exp.conf"), "input=in.csv\np=0.5\nalpha=0.1\neta=0\n").unwrap();
    let v = json(&cascadefin(&["run", "--config", "exp.conf", "--p", "0.9"], tmp.path()));
    assert_eq!(v["params"]["shocks"]["0"], 0.9);
    assert_eq!(v["params"]["alpha"], 0.1);

    std::fs::write(tmp.path().join("bad.conf"), "input=in.csv\nwhatever=1\n").unwrap();
    assert_eq!(
        cascadefin(&["run", "--config", "bad.conf"], tmp.path()).status.code(),
        Some(2)
    );
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("in.csv"), CLEAN).unwrap();
    let out = cascadefin(
        &[
            "run", "--input", "in.csv", "--p", "0.5", "--alpha", "0.1", "--eta", "0.2", "--seed", "3", "--out", "o",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["master"], 3);
    assert_eq!(manifest["inputs"][0]["path"], "in.csv");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["eta"], "0.2");
    let files: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["cascade.json", "experiment.conf"]);
}

#[test]
fn stats_writes_densities() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cascadefin(
        &[
            "stats",
            "--synthetic",
            "banks=100,seed=1,label_p=0.5",
            "--bins",
            "10",
            "--out",
            "st",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("st/densities.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 14 * 10);
}
