use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stablearn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn skewed_thresholds2(dir: &Path) -> PathBuf {
    write(
        dir,
        "t2.toml",
        "domain_size = 2\nkind = \"thresholds\"\nmarginal = [0.04, 0.96]\ntarget = 1\n",
    )
}

#[test]
fn params_table_d1() {
    let o = run(&["params", "--d", "1", "--alpha", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for line in [
        "n               16",
        "N               131072",
        "m               131088",
        "freq_threshold  2^-8",
        "eta_guarantee   1/1024",
    ] {
        assert!(text.contains(line), "missing {line:?} in\n{text}");
    }
}

#[test]
fn params_table_d2_is_exact() {
    let o = run(&["params", "--d", "2", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stability"]["cap"], "268435456");
    assert_eq!(v["stability"]["eta_guarantee"], "1/393216");
    let total: String = v["private_learner"]["total_n"].as_str().unwrap().into();
    assert!(total.len() > 15);
}

#[test]
fn ldim_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let class = write(
        dir.path(),
        "t8.toml",
        "domain_size = 8\nkind = \"thresholds\"\n",
    );
    let o = run(&["ldim", "--class", class.to_str().unwrap(), "--witness"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("ldim = 3\nx="));
    assert_eq!(text.matches("x=").count(), 7);
}

#[test]
fn soa_run_on_csv_sample() {
    let dir = tempfile::tempdir().unwrap();
    let class = write(
        dir.path(),
        "t2.toml",
        "domain_size = 2\nkind = \"thresholds\"\n",
    );
    let sample = write(dir.path(), "s.csv", "point,label\n0,-1\n1,1\n0,-1\n");
    let o = run(&[
        "soa-run",
        "--class",
        class.to_str().unwrap(),
        "--sample",
        sample.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mistake_count"], 1);
    assert_eq!(v["mistake_positions"], serde_json::json!([0]));
    assert_eq!(v["final_hypothesis"], "-+");
}

#[test]
fn stability_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let class = skewed_thresholds2(dir.path());
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("r{i}.json"));
            let o = run(&[
                "stability",
                "--class",
                class.to_str().unwrap(),
                "--runs",
                "300",
                "--seed",
                "17",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let v: serde_json::Value = serde_json::from_slice(&outs[0]).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["params"]["eta_guarantee"], "1/1024");
}

#[test]
fn csv_output_has_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let class = skewed_thresholds2(dir.path());
    let out = dir.path().join("rows.csv");
    let o = run(&[
        "stability",
        "--class",
        class.to_str().unwrap(),
        "--runs",
        "25",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 26);
    assert!(text
        .starts_with("run_id,k_chosen,failed,draws_used,hypothesis_fingerprint,population_loss\n"));
    assert!(dir.path().join("rows.csv.summary.json").exists());
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    skewed_thresholds2(dir.path());
    let cfg = write(
        dir.path(),
        "run.toml",
        "class = \"t2.toml\"\nruns = 20\nlength = 10\nseed = 3\nformat = \"json\"\n",
    );
    let o = run(&["mistakes", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["runs"], 20);
    assert_eq!(v["sample_len"], 10);
    assert_eq!(v["seed"], 3);

    let bad = write(dir.path(), "bad.toml", "clas = \"t2.toml\"\n");
    assert_eq!(
        run(&["mistakes", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn dp_audit_modes() {
    let o = run(&[
        "dp-audit",
        "--mode",
        "hist",
        "--epsilon",
        "0.5",
        "--delta",
        "1e-6",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["audited"], 201);
    let dir = tempfile::tempdir().unwrap();
    let class = write(
        dir.path(),
        "t4.toml",
        "domain_size = 4\nkind = \"thresholds\"\n",
    );
    let o = run(&[
        "dp-audit",
        "--mode",
        "em",
        "--class",
        class.to_str().unwrap(),
        "--runs",
        "30",
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("worst log-ratio"));
}

#[test]
fn private_learn_on_singleton() {
    let dir = tempfile::tempdir().unwrap();
    let class = write(
        dir.path(),
        "one.toml",
        "domain_size = 2\nkind = \"explicit\"\nmembers = [[1, -1]]\n",
    );
    let o = run(&[
        "private-learn",
        "--class",
        class.to_str().unwrap(),
        "--batches-log2",
        "10",
        "--trials",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let row: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(row["fingerprint"], "+-");
    assert_eq!(row["hist_epsilon"], 0.5);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["stability"]).status.code(), Some(1));
    assert_eq!(
        run(&["stability", "--class", "/nonexistent.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["params", "--d", "1", "--alpha", "0.9"]).status.code(),
        Some(1)
    );

    let dir = tempfile::tempdir().unwrap();
    let t4 = write(
        dir.path(),
        "t4.toml",
        "domain_size = 4\nkind = \"thresholds\"\n",
    );
    assert_eq!(
        run(&["e2e", "--class", t4.to_str().unwrap()]).status.code(),
        Some(1)
    );

    // An unreachable success rate fails a check.
    let one = write(
        dir.path(),
        "one.toml",
        "domain_size = 1\nkind = \"explicit\"\nmembers = [[1]]\n",
    );
    let o = run(&[
        "e2e",
        "--class",
        one.to_str().unwrap(),
        "--trials",
        "1",
        "--batches-log2",
        "8",
        "--slack=-1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[FAIL] accuracy"));
}
