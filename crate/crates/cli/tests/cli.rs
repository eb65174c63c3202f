use std::path::Path;
use std::process::{Command, Output};

use bergman_core::sweep::read_csv;
use tempfile::tempdir;

fn bergman(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn bergman")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_j2_passes_for_small_dimensions() {
    let dir = tempdir().unwrap();
    for dim in 1..=3 {
        let d = dim.to_string();
        let out = bergman(&["verify-j2", "--dim", &d, "--emit", "goldens"], dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
        let rec = json(&dir.path().join(format!("goldens/j2_dim{dim}.json")));
        assert_eq!(rec["dim"], dim);
        assert_eq!(rec["equal"], true);
        assert!(rec["mismatches"].as_array().unwrap().is_empty());
        let computed =
            std::fs::read_to_string(dir.path().join(format!("goldens/j2_dim{dim}_computed.txt")))
                .unwrap();
        let reference = std::fs::read_to_string(
            dir.path()
                .join(format!("goldens/j2_dim{dim}_reference.txt")),
        )
        .unwrap();
        assert_eq!(computed, reference);
        assert_eq!(
            computed.lines().count() as u64,
            rec["num_terms"].as_u64().unwrap()
        );
    }
}

#[test]
fn verify_j2_rejects_unsupported_dimension() {
    let dir = tempdir().unwrap();
    assert_eq!(
        bergman(&["verify-j2", "--dim", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn model_run_is_deterministic() {
    let dir = tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = bergman(
            &[
                "model-run",
                "--manifold",
                "cp1",
                "--count",
                "8",
                "--out",
                name,
            ],
            dir.path(),
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let rows = read_csv(&a[..]).unwrap();
    assert_eq!(rows.len(), 8 * 16);
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "manifold = \"flat-torus\"\np_values = [30, 36, 49]\noutput = \"from_config.csv\"\n[samples]\ncount = 2\nsigma = 0.5\n",
    )
    .unwrap();
    let out = bergman(
        &["model-run", "--config", "run.toml", "--count", "3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(std::fs::File::open(dir.path().join("from_config.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows
        .iter()
        .all(|r| r.u.iter().chain(&r.up).all(|v| v.abs() <= 0.5)));

    std::fs::write(dir.path().join("bad.toml"), "[samples]\nsigma = 3.0\n").unwrap();
    assert_eq!(
        bergman(&["model-run", "--config", "bad.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
    std::fs::write(dir.path().join("typo.toml"), "manifol = \"cp1\"\n").unwrap();
    assert_eq!(
        bergman(&["model-run", "--config", "typo.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bergman(&["model-run", "--p", "4,25"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn torus_run_deviations_are_tiny() {
    let dir = tempdir().unwrap();
    let out = bergman(
        &["model-run", "--manifold", "flat-torus", "--out", "t.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(std::fs::File::open(dir.path().join("t.csv")).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r.p < 30));
    assert!(rows
        .iter()
        .filter(|r| r.p >= 30)
        .all(|r| r.deviation <= 1e-8));

    let fit = bergman(
        &["fit", "--input", "t.csv", "--output", "t.json"],
        dir.path(),
    );
    assert_eq!(
        fit.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
    let report = json(&dir.path().join("t.json"));
    assert_eq!(report["passed"], true);
    for point in report["points"].as_array().unwrap() {
        for c in &point["c"].as_array().unwrap()[1..] {
            let (re, im) = (c[0].as_f64().unwrap(), c[1].as_f64().unwrap());
            assert!(re.hypot(im) <= 1e-6);
        }
    }
}

#[test]
fn cp1_pipeline_end_to_end() {
    let dir = tempdir().unwrap();
    assert_eq!(
        bergman(&["model-run", "--out", "s.csv"], dir.path())
            .status
            .code(),
        Some(0)
    );
    let fit = bergman(
        &["fit", "--input", "s.csv", "--output", "s.json"],
        dir.path(),
    );
    assert_eq!(
        fit.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
    let report = json(&dir.path().join("s.json"));
    assert_eq!(report["passed"], true);
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 8);
    for p in points {
        for key in ["c1_small", "c2_match_rel"] {
            assert_eq!(p["checks"][key]["passed"], true);
        }
        assert!(p["residual"].as_f64().unwrap().is_finite());
        assert!(p["condition"].as_f64().unwrap() < 1e12);
    }

    // a fit order the sweep cannot support fails loudly
    let strict = bergman(&["fit", "--input", "s.csv", "--max-r", "12"], dir.path());
    assert_eq!(strict.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("add more distinct p values"));
}

#[test]
fn failing_checks_exit_with_one() {
    let dir = tempdir().unwrap();
    let run = bergman(
        &[
            "model-run",
            "--p",
            "25,36,49,64,81,100,121,144,169",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(0));
    // too short a sweep for the fitted order leaves c1 and c2 inaccurate
    let fit = bergman(&["fit", "--input", "s.csv", "--max-r", "2"], dir.path());
    assert_eq!(
        fit.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );
}

#[test]
fn empty_or_malformed_csv_is_an_input_error() {
    let dir = tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = bergman(&["fit", "--input", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
    std::fs::write(dir.path().join("bad.csv"), "p,x\n1,2\n").unwrap();
    assert_eq!(
        bergman(&["fit", "--input", "bad.csv"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bergman(&["fit", "--input", "missing.csv"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn consolidated_report_passes() {
    let dir = tempdir().unwrap();
    let out = bergman(&["report", "--output", "report.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["passed"], true);
    let checks = report["checks"].as_array().unwrap();
    for id in [
        "j2-golden-dim3",
        "diagonal-b1",
        "cp1/j2-prediction",
        "flat-torus/torus-sup-deviation",
    ] {
        let c = checks
            .iter()
            .find(|c| c["id"] == id)
            .unwrap_or_else(|| panic!("missing {id}"));
        assert_eq!(c["passed"], true);
        assert!(c.get("tolerance").is_some() && c.get("measured").is_some());
    }
}
