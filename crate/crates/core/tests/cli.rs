use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hawkes-lasso"))
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.csv");
    let status = bin()
        .args(["simulate", "--preset", "exp1", "--T", "5", "--seed", "3", "--out"])
        .arg(&points)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&points).unwrap();
    assert!(text.starts_with("# window,"));

    let out = dir.path().join("est");
    let status = bin()
        .args(["estimate", "--marks", "2", "--T", "5", "--dump-design", "--points"])
        .arg(&points)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["coefficients.csv", "reconstruction.csv", "gram.csv", "vectors.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let rec = fs::read_to_string(out.join("reconstruction.csv")).unwrap();
    assert!(rec.starts_with("target,source,left,right,level\n1,0,-,-,"));
}

#[test]
fn experiment_from_config_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "preset = \"exp1\"\nT = 5.0\nn_replicates = 3\nbase_seed = 9\nmethods = [\"B\", \"AO\"]\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = bin()
            .arg("experiment")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((
            fs::read(out.join("runs.csv")).unwrap(),
            fs::read(out.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let runs = String::from_utf8(outputs[0].0.clone()).unwrap();
    // 3 replicates x 2 methods x 3 gammas plus the header
    assert_eq!(runs.lines().count(), 1 + 18);
}

#[test]
fn poisson_pipeline_and_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("poisson");
    let status = bin()
        .args(["experiment", "--preset", "poisson", "--K", "8", "--reps", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("poisson_summary.csv").exists());

    let out = dir.path().join("rec");
    let status = bin()
        .args(["reconstruct", "--preset", "exp2", "--T", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in [
        "reconstruction_B.csv",
        "reconstruction_BO.csv",
        "reconstruction_A.csv",
        "truth.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn bad_arguments_fail() {
    let status = bin().args(["experiment", "--T", "0.5"]).status().unwrap();
    assert!(!status.success());
    let status = bin().args(["experiment", "--preset", "nope"]).status().unwrap();
    assert!(!status.success());
}
