//! End-to-end tests of the `phrec` binary: golden cells, CSV shapes, exit
//! codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn phrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn stanford() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/stanford_heart.csv")
        .display()
        .to_string()
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("phrec-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Parse one CSV line into the f64 cells after `skip` label columns.
fn cells(line: &str, skip: usize) -> Vec<f64> {
    line.split(',')
        .skip(skip)
        .map(|c| c.trim().parse::<f64>().expect("numeric cell"))
        .collect()
}

#[test]
fn validate_accepts_good_model() {
    let out = phrec(&["validate", &fixture("staged_cancer.json")]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("valid: 6 stages x 5 states"), "{text}");
    assert!(text.contains("time unit month"), "{text}");
}

#[test]
fn validate_rejects_garbage_json() {
    let dir = scratch_dir("badjson");
    let path = dir.join("model.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = phrec(&["validate", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("stage"), "{}", stderr(&out));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn validate_rejects_sign_violation() {
    let dir = scratch_dir("badsign");
    let path = dir.join("model.json");
    std::fs::write(
        &path,
        r#"{"k":2,"n":1,"alpha":[1.0,0.0],"T":[[0.5,0.2],[0.1,-0.9]],"stage_labels":["a","b"],"time_unit":"day"}"#,
    )
    .unwrap();
    let out = phrec(&["validate", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("sign pattern"), "{}", stderr(&out));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn missing_file_is_a_validation_error() {
    let out = phrec(&["validate", "/nonexistent/model.json"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn count_prob_at_zero_is_a_point_mass() {
    let out = phrec(&[
        "count-prob",
        "--model",
        &fixture("staged_cancer.json"),
        "--start-stage",
        "1",
        "--t",
        "0",
        "--lmax",
        "3",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,n0,n1,n2,n3,tail");
    let row = cells(lines.next().unwrap(), 0);
    assert_eq!(row[0], 0.0);
    assert_eq!(row[1], 1.0);
    assert!(row[2..].iter().all(|&v| v == 0.0));
}

#[test]
fn count_prob_unit_suffixes_convert() {
    // The staged model counts months: 182.625d = 6m = 0.5y, all one horizon.
    let out = phrec(&[
        "count-prob",
        "--model",
        &fixture("staged_cancer.json"),
        "--start-stage",
        "1",
        "--t",
        "182.625d,6m,0.5y",
        "--lmax",
        "2",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| cells(l, 0)).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!((row[0] - 6.0).abs() < 1e-12);
        assert!((row[1] - 0.27496).abs() < 1e-4);
    }
    assert_eq!(rows[0], rows[1]);
    assert_eq!(rows[1], rows[2]);
}

#[test]
fn count_prob_rows_sum_to_one() {
    let out = phrec(&[
        "count-prob",
        "--model",
        &fixture("staged_cancer.json"),
        "--start-stage",
        "1",
        "--t",
        "3,9,30",
        "--lmax",
        "6",
    ]);
    assert_eq!(exit_code(&out), 0);
    for line in stdout(&out).lines().skip(1) {
        let row = cells(line, 0);
        let total: f64 = row[1..].iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "{line}");
    }
}

#[test]
fn count_prob_rejects_negative_horizon() {
    let out = phrec(&[
        "count-prob",
        "--model",
        &fixture("staged_cancer.json"),
        "--start-stage",
        "1",
        "--t=-3",
    ]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn count_prob_rejects_unknown_stage() {
    let out = phrec(&[
        "count-prob",
        "--model",
        &fixture("staged_cancer.json"),
        "--start-stage",
        "nonsense",
        "--t",
        "6",
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("unknown stage"));
}

#[test]
fn sojourn_is_monotone_in_the_horizon() {
    let out = phrec(&[
        "sojourn",
        "--model",
        &fixture("staged_cancer.json"),
        "--stage",
        "1",
        "--t",
        "6,12,24,36",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let values: Vec<f64> = stdout(&out).lines().skip(1).map(|l| cells(l, 0)[1]).collect();
    assert_eq!(values.len(), 4);
    assert!((values[0] - 3.3702).abs() < 1e-3);
    for w in values.windows(2) {
        assert!(w[0] < w[1]);
    }
}

#[test]
fn transprob_death_is_monotone() {
    let out = phrec(&[
        "transprob",
        "--model",
        &fixture("staged_cancer.json"),
        "--from",
        "1",
        "--to",
        "death",
        "--t",
        "6,12,24",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let values: Vec<f64> = stdout(&out).lines().skip(1).map(|l| cells(l, 0)[1]).collect();
    for w in values.windows(2) {
        assert!(w[0] <= w[1]);
    }
    assert!(values.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn transprob_from_unoccupied_stage_is_numerical_failure() {
    let out = phrec(&[
        "transprob",
        "--model",
        &fixture("staged_cancer.json"),
        "--from",
        "3",
        "--to",
        "death",
        "--t",
        "6",
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("probability zero"));
}

#[test]
fn cancer_demo_matches_reference_cells() {
    let out = phrec(&["cancer-demo"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);

    // CSV section: input stage 0, l = 0 row starts with the 6-month cell.
    let count_row = text
        .lines()
        .find(|l| l.starts_with("0,0,"))
        .expect("stage-0 count row");
    let row = cells(count_row, 2);
    assert!((row[0] - 0.5382).abs() < 1e-3, "{count_row}");
    assert!((row[1] - 0.2885).abs() < 1e-3);

    let sojourn_row = text
        .lines()
        .skip_while(|l| !l.starts_with("# sojourn"))
        .find(|l| l.starts_with("0,"))
        .expect("stage-0 sojourn row");
    let row = cells(sojourn_row, 1);
    assert!((row[0] - 4.5).abs() < 0.06, "{sojourn_row}");

    let single_row = text
        .lines()
        .skip_while(|l| !l.starts_with("# single"))
        .find(|l| l.starts_with("0,6,"))
        .expect("stage-0 single row");
    let row = cells(single_row, 2);
    assert!((row[0] - 0.4440).abs() < 1e-3, "{single_row}");
    // Structural zeros stay zero in print.
    assert_eq!(row[1], 0.0);
}

#[test]
fn cancer_demo_writes_csv_files() {
    let dir = scratch_dir("cancerdemo");
    let out = phrec(&["cancer-demo", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    for name in ["count.csv", "sojourn.csv", "single.csv"] {
        assert!(dir.join(name).is_file(), "{name} missing");
    }
    let count = std::fs::read_to_string(dir.join("count.csv")).unwrap();
    let row = count
        .lines()
        .find(|l| l.starts_with("0,0,"))
        .expect("stage-0 row");
    assert!((cells(row, 2)[0] - 0.5382).abs() < 1e-3);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn cancer_demo_alternate_forward_reading_kills_an_arc() {
    let out = phrec(&["cancer-demo", "--forward", "shifted-down"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    // Stage 3 can no longer reach stage 4 in one transition.
    let single_row = text
        .lines()
        .skip_while(|l| !l.starts_with("# single"))
        .find(|l| l.starts_with("3,6,"))
        .expect("stage-3 single row");
    let row = cells(single_row, 2);
    assert_eq!(row[5], 0.0, "{single_row}");
}

#[test]
fn heart_demo_reproduces_the_reference_likelihood() {
    let out = phrec(&["heart-demo", "--data", &stanford()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let ll_line = text
        .lines()
        .find(|l| l.contains("log-likelihood"))
        .expect("likelihood line");
    let ll: f64 = ll_line
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .expect("parses");
    assert!((ll - (-885.1849)).abs() < 2e-3, "{ll_line}");
    assert!(text.contains("censored 4, censored post-transplant 24, died 30"));

    // Count CSV: age 30, year 3, no surgery, N=0 row.
    let row = text
        .lines()
        .skip_while(|l| !l.starts_with("# count"))
        .find(|l| l.starts_with("30,3,0,0,"))
        .expect("count row");
    let values = cells(row, 4);
    assert!((values[0] - 0.6221).abs() < 1e-3, "{row}");

    // Sojourn CSV row for age 30 (printed in days, one decimal).
    let row = text
        .lines()
        .skip_while(|l| !l.starts_with("# sojourn"))
        .find(|l| l.starts_with("30,"))
        .expect("sojourn row");
    let values = cells(row, 1);
    assert!((values[0] - 24.2).abs() < 0.2, "{row}");
}

#[test]
fn heart_demo_without_data_prints_reference_parameters() {
    let out = phrec(&["heart-demo"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("parameters (reference)"));
    assert!(!text.contains("log-likelihood"));
    let row = text.lines().find(|l| l.starts_with("p,")).unwrap();
    assert!((cells(row, 1)[0] - 9.3).abs() < 1e-9);
}

#[test]
fn heart_demo_refit_requires_data() {
    let out = phrec(&["heart-demo", "--refit"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("--refit needs --data"));
}

#[test]
fn fit_smoke_run_produces_a_sane_likelihood() {
    let out = phrec(&[
        "fit",
        "--data",
        &stanford(),
        "--starts",
        "4",
        "--seed",
        "1",
        "--max-evals",
        "400",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let ll_line = text.lines().find(|l| l.starts_with("loglik,")).unwrap();
    let ll: f64 = ll_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!(ll.is_finite());
    assert!(ll > -1200.0 && ll < -800.0, "{ll_line}");
    for name in ["a,", "b,", "q,", "p,", "lambda0,", "gamma3,"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "missing {name}");
    }
}

#[test]
fn fit_freeze_pins_the_parameter() {
    let out = phrec(&[
        "fit",
        "--data",
        &stanford(),
        "--starts",
        "1",
        "--seed",
        "7",
        "--max-evals",
        "100",
        "--freeze",
        "b=0",
        "--freeze",
        "gamma3=0",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let b_row = text.lines().find(|l| l.starts_with("b,")).unwrap();
    assert_eq!(cells(b_row, 1)[0], 0.0);
    let g_row = text.lines().find(|l| l.starts_with("gamma3,")).unwrap();
    assert_eq!(cells(g_row, 1)[0], 0.0);
}

#[test]
fn fit_rejects_unknown_freeze_name() {
    let out = phrec(&[
        "fit",
        "--data",
        &stanford(),
        "--freeze",
        "banana=0",
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("unknown parameter"));
}

#[test]
fn fit_writes_json_artifact() {
    let dir = scratch_dir("fitjson");
    let path = dir.join("fit.json");
    let out = phrec(&[
        "fit",
        "--data",
        &stanford(),
        "--starts",
        "4",
        "--seed",
        "1",
        "--max-evals",
        "400",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let loglik = doc["loglik"].as_f64().unwrap();
    assert!(loglik.is_finite() && loglik > -1.0e4, "stuck at penalty: {loglik}");
    assert!(doc["params"]["lambda1"].as_f64().unwrap() > 0.0);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn simulate_emits_parseable_json_and_csv() {
    let out = phrec(&[
        "simulate",
        "--model",
        &fixture("staged_cancer.json"),
        "--start-stage",
        "1",
        "--t",
        "6,12",
        "--lmax",
        "2",
        "--paths",
        "4000",
        "--seed",
        "11",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let json_end = text.rfind("}\n").expect("json block") + 2;
    let doc: serde_json::Value = serde_json::from_str(&text[..json_end]).unwrap();
    assert_eq!(doc["paths"], 4000);
    let freq = doc["freq"].as_array().unwrap();
    assert_eq!(freq.len(), 2);
    for row in freq {
        let total: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    // The CSV after the JSON block repeats the frequencies.
    let csv: Vec<&str> = text[json_end..].lines().collect();
    assert_eq!(csv[0], "t,n0,n1,n2,overflow");
    assert_eq!(csv.len(), 3);
    // ODE cross-check: P[N=0] at 6 months is about 0.275.
    let row = cells(csv[1], 0);
    assert!((row[1] - 0.275).abs() < 0.03, "{}", csv[1]);
}

#[test]
fn bootstrap_rejects_single_replicate() {
    let out = phrec(&[
        "bootstrap",
        "--data",
        &stanford(),
        "--replicates",
        "1",
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("replicates"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = phrec(&["cancer-demo", "--bogus"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn help_and_version_exit_cleanly() {
    for args in [["--help"], ["--version"]] {
        let out = phrec(&args);
        assert_eq!(exit_code(&out), 0);
    }
    let out = phrec(&["count-prob", "--help"]);
    assert_eq!(exit_code(&out), 0);
    assert!(stdout(&out).contains("--lmax"));
}

#[test]
fn threads_env_is_respected() {
    let out = Command::new(env!("CARGO_BIN_EXE_phrec"))
        .args(["cancer-demo"])
        .env("PHREC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
