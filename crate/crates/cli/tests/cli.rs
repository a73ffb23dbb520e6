use std::path::Path;
use std::process::{Command, Output};

fn langsup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langsup"))
        .current_dir(dir)
        .env_remove("LANGSUP_PARAPHRASE_URL")
        .env_remove("LANGSUP_PARAPHRASE_TOKEN")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = langsup(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_train_probe() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let said = ok(d, &["--seed", "3", "gen", "--n", "160", "--captions-per-image", "2", "-o", "data.jsonl"]);
    assert!(said.contains("160 examples"));
    ok(d, &["--seed", "3", "paraphrase", "--data", "data.jsonl", "-k", "3", "-o", "para.jsonl"]);
    ok(
        d,
        &[
            "--seed",
            "3",
            "train",
            "--data",
            "para.jsonl",
            "--mode",
            "clip_s(3)",
            "--epochs",
            "2",
            "--batch-size",
            "32",
            "-o",
            "m.ckpt",
        ],
    );
    let records = ok(d, &["--seed", "3", "probe", "--checkpoint", "m.ckpt", "--format", "records"]);
    assert_eq!(records.lines().count(), 7);
    assert_eq!(records, ok(d, &["--seed", "3", "probe", "--checkpoint", "m.ckpt", "--format", "records"]));
    for line in records.lines() {
        let _: serde_json::Value = serde_json::from_str(line).unwrap();
    }
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = langsup(d, &["train", "--data", "missing.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
    ok(d, &["gen", "--n", "40", "-o", "data.jsonl"]);
    assert!(!langsup(d, &["train", "--data", "data.jsonl", "--mode", "moco"]).status.success());
    assert!(!langsup(d, &["gen", "--descriptiveness", "2"]).status.success());
}

#[test]
fn plan_run_resumes_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("plan.toml"),
        r#"name = "cli"
sweep_axis = "dataset_size"
points = [128, 160]
modes = ["clip"]
repeats = 1

[base.train]
epochs = 2
batch_size = 32

[base.probe]
epochs = 3
batch_size = 64
weight_decay = 1e-6
momentum = 0.9
lr_grid = [0.1]
seeds = 1
resamples = 200
"#,
    )
    .unwrap();
    let first = ok(d, &["--out-dir", "out", "plan", "run", "plan.toml", "--format", "csv"]);
    assert_eq!(first.lines().count(), 3);
    assert!(first.lines().next().unwrap().starts_with("plan,axis,axis_value,mode"));
    let second = ok(d, &["--out-dir", "out", "plan", "run", "plan.toml", "--format", "csv"]);
    assert_eq!(first, second);
    let table = ok(d, &["plan", "report", "out/cli"]);
    assert!(table.contains("128") && table.contains("160") && table.contains("clip"));
    ok(d, &["plan", "report", "out/cli", "--format", "records", "-o", "rows.jsonl"]);
    assert_eq!(std::fs::read_to_string(d.join("rows.jsonl")).unwrap().lines().count(), 2);
}
