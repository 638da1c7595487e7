use std::path::Path;
use std::process::{Command, Output};

fn unlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unlearn"))
        .args(args)
        .env_remove("UNLEARN_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_SWEEP: &str = r#"
experiment = "passive_logloss"
n_grid = [40, 80]
lambda_grid = [1e-4, 1.0]
seeds = [1, 2]
oracle_trials = 3

[dataset]
source = "synthetic"
generator = "gaussian_blob"
d = 4
"#;

#[test]
fn selftest_passes() {
    let out = unlearn(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn sweep_writes_versioned_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", SMALL_SWEEP);
    let out_dir = dir.path().join("out");
    let out_dir = out_dir.to_str().unwrap();
    let out = unlearn(&["sweep", "--config", &config, "--output-dir", out_dir, "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["rows"], 8);
    assert_eq!(v["failed"], 0);

    let report = Path::new(out_dir).join("passive_logloss.csv");
    let summary = Path::new(out_dir).join("passive_logloss.summary.csv");
    let first = std::fs::read(&report).unwrap();
    assert!(first.starts_with(b"# schema: v1\n"));
    assert!(std::fs::read_to_string(&summary).unwrap().starts_with("# schema: v1\n"));

    let out = unlearn(&["sweep", "--config", &config, "--output-dir", out_dir, "--workers", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&report).unwrap(), first);

    let out = unlearn(&["sweep", "--config", &config, "--output-dir", out_dir, "--master-seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(std::fs::read(&report).unwrap(), first);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", SMALL_SWEEP);
    let out = Command::new(env!("CARGO_BIN_EXE_unlearn"))
        .args(["sweep", "--config", &config])
        .env("UNLEARN_OUTPUT_DIR", dir.path().join("env_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("env_out/passive_logloss.csv").exists());
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let bad_config = write(dir.path(), "bad.toml", "n_grid = []\n");
    assert_eq!(unlearn(&["sweep", "--config", &bad_config]).status.code(), Some(2));
    assert_eq!(unlearn(&["sweep"]).status.code(), Some(2));

    let ragged = write(dir.path(), "ragged.csv", "a,b,y\n0.1,0.2,1\n0.3,1\n");
    let out = unlearn(&["sensitivity", "--problem", "mse", "--data", &ragged]);
    assert_eq!(out.status.code(), Some(3));

    // Unregularized least squares with more features than rows.
    let wide = write(dir.path(), "wide.csv", "a,b,c,y\n0.1,0.2,0.1,1\n0.3,0.1,0.2,-1\n");
    let out = unlearn(&[
        "unlearn", "--method", "newton", "--loss", "mse", "--data", &wide, "--delete-index", "0", "--lambda", "0",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sensitivity_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,y\n");
    for i in 0..30 {
        let t = i as f64 / 30.0;
        let y = if i % 2 == 0 { 1 } else { -1 };
        text.push_str(&format!("{},{},{}\n", 0.5 * t, 0.4 * (1.0 - t) * y as f64, y));
    }
    let data = write(dir.path(), "d.csv", &text);
    let out = unlearn(&["sensitivity", "--problem", "logistic", "--data", &data, "--lambda", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let rs = v["retain"]["value"].as_f64().unwrap();
    let gs = v["global"]["value"].as_f64().unwrap();
    let lambda_r = v["details"]["curvature"]["lambda_r"].as_f64().unwrap();
    assert!(rs <= gs);
    assert!((v["ratio"].as_f64().unwrap() - 0.01 / lambda_r).abs() < 1e-12);
    assert!(v["sigma"].as_f64().unwrap() > 0.0);

    let edges = write(dir.path(), "g.txt", "# triangle plus a tail\na b 1\nb c 2\na c 3\nc d 0.5\n");
    let out = unlearn(&["sensitivity", "--problem", "mst", "--data", &edges]);
    let v = json(&out);
    assert_eq!(v["n"], 4);
    assert_eq!(v["retain"]["value"], 2.0);
    assert_eq!(v["global"]["value"], 3.0);
}

#[test]
fn unlearn_emits_audit() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,y\n");
    for i in 0..40 {
        let y = if i % 3 == 0 { -1.0 } else { 1.0 };
        text.push_str(&format!("{},{},{}\n", 0.6 * y, 0.02 * i as f64 - 0.4, y));
    }
    let data = write(dir.path(), "d.csv", &text);
    for method in ["d2d", "newton"] {
        let out = unlearn(&[
            "unlearn", "--method", method, "--data", &data, "--delete-index", "5", "--lambda", "0.05", "--seed", "3",
        ]);
        assert_eq!(out.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_eq!(v["w_out"].as_array().unwrap().len(), 2);
        assert_eq!(v["audit"]["calibration"], "retain");
        assert!(v["audit"]["sigma"].as_f64().unwrap() > 0.0);
    }
}
