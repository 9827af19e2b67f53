//! Integration tests for the `decay` binary: determinism, round trips,
//! exit codes, and the figure presets.

use decay_core::cli::output::CsvTable;
use std::process::Command;

fn decay() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decay"))
}

#[test]
fn survival_csv_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let status = decay()
            .args([
                "--tmin", "0.1", "--tmax", "5", "--points", "25", "--spacing", "log",
                "--csv",
            ])
            .arg(out)
            .arg("survival")
            .status()
            .unwrap();
        assert!(status.success());
    }
    let text1 = std::fs::read(&out1).unwrap();
    let text2 = std::fs::read(&out2).unwrap();
    assert_eq!(text1, text2, "identical configs must emit identical bytes");
    let table = CsvTable::parse(std::str::from_utf8(&text1).unwrap()).unwrap();
    assert_eq!(table.columns, ["t", "re_a", "im_a", "p"]);
    assert_eq!(table.rows.len(), 25);
    assert!(table.comments.iter().any(|c| c.starts_with("decay ")));
    // P(0.1) ~ e^{-0.1} for the default resonance
    assert!((table.rows[0][3] - (-0.1f64).exp()).abs() < 0.02);
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("w1.csv");
    let out2 = dir.path().join("w4.csv");
    for (out, workers) in [(&out1, "1"), (&out2, "4")] {
        let status = decay()
            .args(["--workers", workers, "--tmin", "0.5", "--tmax", "3", "--points", "16"])
            .args(["--csv"])
            .arg(out)
            .arg("heff")
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn tas_prints_crossover() {
    let output = decay().arg("tas").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("t_as"), "{text}");
    let field = text
        .split("t_as/tau = ")
        .nth(1)
        .and_then(|s| s.split(')').next())
        .unwrap();
    let t_as_tau: f64 = field.trim().parse().unwrap();
    assert!((t_as_tau - 22.8).abs() < 0.3, "t_as/tau = {t_as_tau}");
}

#[test]
fn fig1_emits_svg_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig1.csv");
    let svg = dir.path().join("fig1.svg");
    let status = decay()
        .args(["--tmin", "0.1", "--tmax", "30", "--points", "80"])
        .args(["--csv"])
        .arg(&csv)
        .args(["--svg"])
        .arg(&svg)
        .arg("fig1")
        .status()
        .unwrap();
    assert!(status.success());
    let table = CsvTable::parse(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(table.columns, ["t_over_tau", "p"]);
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert!(svg_text.contains("<polyline"));
}

#[test]
fn config_file_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[density]\ne0 25\n").unwrap();
    let output = decay().args(["--config"]).arg(&cfg).arg("tas").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn missing_model_exits_2_and_bad_model_exits_4() {
    let output = decay().arg("subspace").output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("bad.model");
    std::fs::write(&model, "dim 2 1\n0\n0 3 1.0 0.0\n").unwrap();
    let output = decay().args(["--model"]).arg(&model).arg("subspace").output().unwrap();
    assert_eq!(output.status.code(), Some(4));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn numeric_failure_exits_3() {
    // the crossover balance needs a resonance pole; the linear-onset
    // density has none
    let output = decay()
        .args(["--density", "linear-onset"])
        .arg("tas")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn subspace_reproduces_loy_model() {
    // degenerate diagonal subspace against a flat continuum: the emitted
    // H equals m0 - Sigma(m0) entrywise
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("loy.model");
    std::fs::write(
        &model_path,
        "dim 2 2\n0 1\n0 0 4.0 0.0\n1 1 4.0 0.0\ncontinuum 0.0\nflat 0.2 25.0\nflat 0.35 25.0\n",
    )
    .unwrap();
    let csv = dir.path().join("loy.csv");
    let status = decay()
        .args(["--model"])
        .arg(&model_path)
        .args(["--csv"])
        .arg(&csv)
        .arg("subspace")
        .status()
        .unwrap();
    assert!(status.success());
    let table = CsvTable::parse(&std::fs::read_to_string(&csv).unwrap()).unwrap();

    let model = decay_core::subspace::load_model(&model_path).unwrap();
    let sigma = decay_core::subspace::sigma(&model, 4.0, 0.0).unwrap();
    for row in &table.rows {
        let (i, j) = (row[0] as usize, row[1] as usize);
        let expect_re = if i == j { 4.0 - sigma[(i, j)].re } else { -sigma[(i, j)].re };
        let expect_im = -sigma[(i, j)].im;
        assert!((row[4] - expect_re).abs() < 1e-9, "H[{i}{j}] re");
        assert!((row[5] - expect_im).abs() < 1e-9, "H[{i}{j}] im");
    }
}

#[test]
fn exact_compare_zero_coupling_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("diag.model");
    std::fs::write(
        &model_path,
        "dim 3 1\n0\n0 0 1.0 0.0\n1 1 2.0 0.0\n2 2 3.0 0.0\n",
    )
    .unwrap();
    let csv = dir.path().join("cmp.csv");
    let status = decay()
        .args(["--model"])
        .arg(&model_path)
        .args(["--tmin", "0", "--tmax", "2", "--points", "21"])
        .args(["--csv"])
        .arg(&csv)
        .arg("exact-compare")
        .status()
        .unwrap();
    assert!(status.success());
    let table = CsvTable::parse(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 21);
    for row in &table.rows {
        assert_eq!(row[5], 0.0, "no singular rows expected");
        for &err in &row[1..4] {
            assert!(err.abs() < 1e-12, "error column should vanish, got {err}");
        }
    }
}
