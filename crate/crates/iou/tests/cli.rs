use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iou::csv_io::{default_names, write_table, Table};
use iou::formats::{Cache, EstimateDoc, SciDoc};
use iou_core::diagnostics::DistributionSpec;
use iou_core::rng::{derive_stream, RngKey, StreamKind};
use iou_core::DataMatrix;

fn iou(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iou"))
        .args(args)
        .env_remove("IOU_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_csv(dir: &Path, name: &str, matrix: DataMatrix) -> PathBuf {
    let path = dir.join(name);
    let table = Table {
        feature_names: default_names(matrix.cols()),
        response_name: matrix.response().map(|_| "y".to_owned()),
        matrix,
    };
    write_table(&table, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn gaussian_csv(dir: &Path, n: usize, p: usize) -> PathBuf {
    let dist = DistributionSpec::GaussianIid { mean: 0.0, sd: 1.0, p };
    let m = dist.sample(n, &mut derive_stream(RngKey::new(42, StreamKind::Simulation, 0))).unwrap();
    write_csv(dir, "gauss.csv", m)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_tiny_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("tiny.csv");
    std::fs::write(&data, "x\n1\n2\n3\n4\n5\n").unwrap();
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    for out in [&out1, &out2] {
        let o = iou(&["estimate", "--data", s(&data), "--r", "2", "--budget", "10", "--seed", "7", "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stderr(&o).contains("p_n=1e0"));
        assert!(stderr(&o).contains("warning: p_n"));
    }
    let a = std::fs::read(&out1).unwrap();
    assert_eq!(a, std::fs::read(&out2).unwrap());
    let doc: EstimateDoc = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc.u_prime, vec![3.0]);
    assert_eq!(doc.design.n_hat, 10);
    assert_eq!(doc.design.p_n, 1.0);
}

#[test]
fn estimate_writes_cache() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 60, 3);
    let cache = dir.path().join("h.bin");
    let o = iou(&[
        "estimate", "--data", s(&data), "--kernel", "coord_max", "--r", "4", "--budget", "200", "--cache", s(&cache),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!stderr(&o).contains("warning"));
    let doc: EstimateDoc = serde_json::from_slice(&o.stdout).unwrap();
    let c = Cache::read(&cache).unwrap();
    assert_eq!((c.rows, c.cols), (doc.design.n_hat, 3));
    assert_eq!(std::fs::metadata(&cache).unwrap().len() as usize, 16 + 8 * c.values.len());
    for j in 0..3 {
        let mean = (0..c.rows).map(|k| c.values[k * 3 + j]).sum::<f64>() / c.rows as f64;
        assert!((mean - doc.u_prime[j]).abs() < 1e-12);
    }
}

#[test]
fn data_errors_exit_3() {
    let o = iou(&["estimate", "--data", "/nonexistent/sample.csv", "--r", "2", "--budget", "5"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("/nonexistent/sample.csv"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    let o = iou(&["estimate", "--data", s(&bad), "--r", "1", "--budget", "5"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("oops"));

    let neg = dir.path().join("neg.csv");
    std::fs::write(&neg, "a\n-1\n-2\n-3\n").unwrap();
    let o = iou(&["estimate", "--data", s(&neg), "--kernel", "log_mean", "--r", "2", "--budget", "5"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 20, 2);
    for args in [
        vec!["estimate", "--data", s(&data), "--budget", "5"],
        vec!["estimate", "--data", s(&data), "--r", "2"],
        vec!["estimate", "--data", s(&data), "--r", "30", "--budget", "5"],
        vec!["estimate", "--data", s(&data), "--r", "2", "--budget", "5", "--kernel", "median"],
        vec!["estimate", "--data", s(&data), "--r", "2", "--budget", "5", "--dim", "3"],
        vec!["sci", "--data", s(&data), "--r", "2", "--budget", "5", "--alpha", "1.5"],
        vec!["sci", "--data", s(&data), "--r", "2", "--budget", "5", "--bootstrap-reps", "0"],
    ] {
        let o = iou(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 40, 2);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("seed = 3\n[data]\npath = \"{}\"\n[kernel]\nkind = \"mean\"\nr = 3\n[design]\nbudget = 50\n", s(&data)),
    )
    .unwrap();
    let o = iou(&["estimate", "--config", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a: EstimateDoc = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(a.design.r, 3);
    let o = iou(&["estimate", "--config", s(&cfg), "--r", "4"]);
    let b: EstimateDoc = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(b.design.r, 4);
    assert_eq!(b.design.seed, 3);

    std::fs::write(&cfg, "[kernel]\norder = 3\n").unwrap();
    assert_eq!(code(&iou(&["estimate", "--config", s(&cfg)])), 2);
}

#[test]
fn sci_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 200, 3);
    let o = iou(&[
        "sci", "--data", s(&data), "--r", "5", "--budget", "1000", "--bootstrap-reps", "400", "--n1", "100", "--alpha",
        "0.1", "--seed", "42",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("q_hat"));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sci_seed42.json");
    if std::env::var_os("IOU_BLESS").is_some() {
        std::fs::write(&golden, &o.stdout).unwrap();
    }
    assert_eq!(String::from_utf8_lossy(&o.stdout), std::fs::read_to_string(&golden).unwrap());
    let doc: SciDoc = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc.intervals.iter().all(|iv| iv.lower < 0.0 && 0.0 < iv.upper));
}

#[test]
fn sci_quantile_monotone_in_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 100, 4);
    let q = |alpha: &str| {
        let o = iou(&["sci", "--data", s(&data), "--r", "3", "--budget", "500", "--alpha", alpha, "--seed", "42"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        serde_json::from_slice::<SciDoc>(&o.stdout).unwrap().q_hat
    };
    assert!(q("0.5") <= q("0.1"));
}

#[test]
fn sci_zero_variance_coordinate_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    let mut text = String::from("a,b,c\n");
    for i in 0..30 {
        text.push_str(&format!("{},{},{}\n", i as f64 * 0.1, 2.5, (i * i % 7) as f64));
    }
    std::fs::write(&data, text).unwrap();
    let o = iou(&["sci", "--data", s(&data), "--r", "3", "--budget", "200", "--bootstrap-reps", "50"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("coordinate 1"), "{}", stderr(&o));
}

#[test]
fn sci_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 150, 3);
    let args = ["sci", "--data", s(&data), "--r", "6", "--budget", "800", "--bootstrap-reps", "300", "--seed", "5"];
    let base = iou(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(code(&base), 0);
    let four = iou(&[&args[..], &["--threads", "4"]].concat());
    assert_eq!(base.stdout, four.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_iou")).args(args).env("IOU_THREADS", "8").output().unwrap();
    assert_eq!(base.stdout, env.stdout);
}

#[test]
fn simulate_refuses_to_clobber() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let args = [
        "simulate", "--n", "60", "--r", "3", "--dim", "2", "--budget", "300", "--bootstrap-reps", "100", "--alpha", "0.1",
        "--reps", "8", "--seed", "1", "--out", s(&out),
    ];
    let o = iou(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["reps"], 8);
    assert!(v["wilson_lower"].as_f64().unwrap() <= v["empirical_coverage"].as_f64().unwrap());
    let rows = std::fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(rows.lines().count(), 9);
    assert!(rows.starts_with("rep,covered,degenerate,sup_deviation,q_hat,p_value,width_0,width_1"));

    let again = iou(&args);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--overwrite"));
    let forced = iou(&[&args[..], &["--overwrite"]].concat());
    assert_eq!(code(&forced), 0);
    assert_eq!(std::fs::read_to_string(out.join("replicates.csv")).unwrap(), rows);
}

#[test]
fn simulate_zero_reps_is_config_error() {
    let o = iou(&["simulate", "--n", "50", "--r", "3", "--budget", "100", "--reps", "0"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn oracle_suite_exit_codes() {
    let o = iou(&["oracle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));

    let o = iou(&["oracle", "--inject-failure", "linear/sample-mean"]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("linear/sample-mean/r1/j0"));

    let o = iou(&["oracle", "--n", "60", "--r", "6", "--cap", "1000000"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("refused enumeration"));
}

#[test]
fn cost_probe_emits_table() {
    let o = iou(&[
        "cost-probe", "--n", "80", "--r-grid", "2,4", "--dim", "2", "--budget", "200", "--bootstrap-reps", "20", "--n1",
        "20", "--runs", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,n,budget,n_hat,d,b_reps,kernel_secs,bootstrap_secs");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,80,200,"));
}

#[test]
fn sci_json_schema() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_csv(dir.path(), 50, 2);
    let o = iou(&["sci", "--data", s(&data), "--r", "3", "--budget", "100", "--bootstrap-reps", "50", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["alpha", "q_hat", "n", "r", "d", "N", "B", "intervals", "lambda_hat", "seed"] {
        assert!(v.get(key).is_some(), "missing `{key}`");
    }
    assert_eq!(v["B"], 50);
    assert_eq!(v["N"], 100);
    for key in ["j", "lower", "upper"] {
        assert!(v["intervals"][1].get(key).is_some(), "missing interval `{key}`");
    }
    assert_eq!(v["lambda_hat"].as_array().unwrap().len(), 2);
}
