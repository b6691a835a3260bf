//! End-to-end tests of the `ams` binary: exit codes, output shapes,
//! provenance, determinism across thread counts, and the documented
//! config-file/flag precedence.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ams(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ams"));
    cmd.args(args);
    cmd
}

fn run_ok(args: &[&str]) -> String {
    let out = ams(args).output().expect("spawn ams");
    assert!(
        out.status.success(),
        "ams {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// Data rows of a CSV artifact: comments and the header stripped.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn parse_json(text: &str) -> Value {
    serde_json::from_str(text).expect("valid JSON")
}

// --- run -----------------------------------------------------------------------

#[test]
fn run_at_target_is_trivial() {
    let doc = parse_json(&run_ok(&["run", "-x", "1.0", "-a", "1.0"]));
    assert_eq!(doc["J"], 0);
    assert_eq!(doc["C"], 1.0);
    assert_eq!(doc["estimate"], 1.0);
    assert_eq!(doc["provenance"]["seed"], 0);
}

#[test]
fn run_is_reproducible_from_the_seed() {
    let first = run_ok(&["run", "-n", "16", "-k", "3", "--seed", "11"]);
    let second = run_ok(&["run", "-n", "16", "-k", "3", "--seed", "11"]);
    assert_eq!(first, second);
    let other = run_ok(&["run", "-n", "16", "-k", "3", "--seed", "12"]);
    assert_ne!(parse_json(&first)["levels"], parse_json(&other)["levels"]);
}

#[test]
fn invalid_kill_count_exits_2_naming_the_invariant() {
    let out = ams(&["run", "-n", "5", "-k", "5"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k = 5"), "stderr: {err}");
    assert!(err.contains("n - 1"), "stderr: {err}");
}

#[test]
fn exhausted_iteration_budget_exits_3() {
    let out = ams(&["run", "-n", "4", "-a", "8.0", "--max-iterations", "2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2 iterations"), "stderr: {err}");
}

#[test]
fn unknown_model_key_exits_2() {
    let out = ams(&["run", "--model", "cauchy"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cauchy"));
}

// --- replicate --------------------------------------------------------------------

#[test]
fn replicate_csv_is_stable_and_thread_count_invariant() {
    let args = [
        "replicate",
        "-n",
        "20",
        "-k",
        "2",
        "-m",
        "400",
        "--seed",
        "5",
    ];
    let strip_wallclock = |text: String| -> (String, Vec<Vec<String>>) {
        let mut rows = csv_rows(&text);
        for row in &mut rows {
            row.pop();
        }
        (text, rows)
    };
    let (text_a, rows_a) = strip_wallclock(
        String::from_utf8(ams(&args).env("AMS_THREADS", "1").output().unwrap().stdout).unwrap(),
    );
    let (_, rows_b) = strip_wallclock(
        String::from_utf8(ams(&args).env("AMS_THREADS", "3").output().unwrap().stdout).unwrap(),
    );
    assert_eq!(rows_a, rows_b, "summary depends on worker count");

    assert!(text_a.starts_with("# seed: 5\n"));
    assert!(!text_a.contains('\r'));
    assert_eq!(rows_a.len(), 1);
    let row = &rows_a[0];
    assert_eq!(row[0], "20");
    assert_eq!(row[4], "400");
    // 17 significant digits: d.dddddddddddddddde[sign]dd.
    let mean = &row[5];
    let mantissa = mean.split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
    let mean: f64 = mean.parse().unwrap();
    assert!(mean > 0.2 && mean < 0.6, "mean {mean} far from e^-1");
}

#[test]
fn replicate_run_zero_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let runs_path = dir.path().join("runs.csv");
    run_ok(&[
        "replicate",
        "-n",
        "12",
        "-k",
        "3",
        "-m",
        "8",
        "--seed",
        "99",
        "--runs-out",
        runs_path.to_str().unwrap(),
    ]);
    let runs = std::fs::read_to_string(&runs_path).unwrap();
    let rows = csv_rows(&runs);
    assert_eq!(rows.len(), 8);

    let single = parse_json(&run_ok(&["run", "-n", "12", "-k", "3", "--seed", "99"]));
    let estimate: f64 = rows[0][1].parse().unwrap();
    assert_eq!(estimate, single["estimate"].as_f64().unwrap());
    let j: u64 = rows[0][2].parse().unwrap();
    assert_eq!(j, single["J"].as_u64().unwrap());
}

#[test]
fn replicate_rejects_single_run_plans() {
    let out = ams(&["replicate", "-m", "1"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("m_reps"));
}

#[test]
fn replicate_json_summary_has_histogram() {
    let doc = parse_json(&run_ok(&[
        "replicate",
        "-n",
        "10",
        "-m",
        "50",
        "--seed",
        "3",
        "--format",
        "json",
    ]));
    let hist = doc["summary"]["j_histogram"].as_array().unwrap();
    let total: u64 = hist.iter().map(|pair| pair[1].as_u64().unwrap()).sum();
    assert_eq!(total, 50);
    assert_eq!(doc["config"]["n"], 10);
    assert!(doc["wallclock_s"].as_f64().unwrap() >= 0.0);
}

// --- config file ---------------------------------------------------------------

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn config_file_supplies_fields_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "n": 64, "k": 4, "x": 1.0, "a": 1.0, "seed": 21 }"#,
    );
    // File alone: x = a, trivial run.
    let doc = parse_json(&run_ok(&["run", "--config", &cfg]));
    assert_eq!(doc["J"], 0);
    assert_eq!(doc["provenance"]["seed"], 21);
    // Flag pushes the target out again.
    let doc = parse_json(&run_ok(&["run", "--config", &cfg, "-a", "2.0"]));
    assert!(doc["J"].as_u64().unwrap() > 0);
}

#[test]
fn config_file_with_unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "n": 64, "particles": 7 }"#);
    let out = ams(&["run", "--config", &cfg]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("particles"));
}

#[test]
fn config_output_block_sets_format_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("summary.json");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{ "n": 10, "m_reps": 30, "output": {{ "format": "json", "path": {:?} }} }}"#,
            out_path.to_str().unwrap()
        ),
    );
    let stdout = run_ok(&["replicate", "--config", &cfg]);
    assert!(stdout.is_empty());
    let doc = parse_json(&std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(doc["summary"]["m_reps"], 30);
}

// --- oracle --------------------------------------------------------------------

#[test]
fn oracle_grid_csv_ends_at_the_boundary_value() {
    let text = run_ok(&[
        "oracle",
        "--moment",
        "mean-iterations",
        "-n",
        "10",
        "-k",
        "2",
        "-a",
        "1.0",
        "--grid-size",
        "512",
    ]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 513);
    assert_eq!(rows[0].len(), 3);
    let last_value: f64 = rows.last().unwrap()[1].parse().unwrap();
    assert_eq!(last_value, 1.0);
    let origin: f64 = rows[0][1].parse().unwrap();
    assert!((origin - 5.4875).abs() < 1e-2);
}

#[test]
fn oracle_spectral_json_dumps_roots_and_exact_slope() {
    let doc = parse_json(&run_ok(&[
        "oracle",
        "--solver",
        "spectral",
        "--moment",
        "mean-iterations",
        "-n",
        "10",
        "-k",
        "2",
        "-a",
        "1.0",
        "--format",
        "json",
    ]));
    assert_eq!(doc["slope_exact"], "90/19");
    assert_eq!(doc["exponents"][0]["re"], 19.0);
    let origin = doc["at_origin"].as_f64().unwrap();
    assert!((origin - 5.4875346274356).abs() < 1e-10);
}

#[test]
fn oracle_spectral_hitting_probability_is_rejected() {
    let out = ams(&[
        "oracle",
        "--solver",
        "spectral",
        "--moment",
        "hitting-probability",
    ])
    .output()
    .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exp(x - a)"));
}

#[test]
fn oracle_agrees_across_solvers() {
    let grid = parse_json(&run_ok(&[
        "oracle",
        "--moment",
        "second-moment",
        "-n",
        "8",
        "-k",
        "2",
        "-a",
        "1.0",
        "--format",
        "json",
    ]));
    let spectral = parse_json(&run_ok(&[
        "oracle",
        "--solver",
        "spectral",
        "--moment",
        "second-moment",
        "-n",
        "8",
        "-k",
        "2",
        "-a",
        "1.0",
        "--format",
        "json",
    ]));
    let g = grid["at_origin"].as_f64().unwrap();
    let s = spectral["at_origin"].as_f64().unwrap();
    assert!((g - s).abs() < 1e-6, "grid {g} vs spectral {s}");
}

// --- verify --------------------------------------------------------------------

#[test]
fn verify_lists_the_catalog() {
    let text = run_ok(&["verify", "--list"]);
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names.len(), 12);
    assert!(names.contains(&"unbiasedness_exponential"));
    assert!(names.contains(&"iid_structure"));
}

#[test]
fn verify_filtered_criterion_passes_with_reports() {
    let text = run_ok(&["verify", "--only", "coefficient"]);
    assert!(text.contains("[PASS] coefficient_identities"));
    assert!(text.contains("1 of 1 checks passed"));
}

#[test]
fn verify_unmatched_filter_exits_2() {
    let out = ams(&["verify", "--only", "no-such-criterion"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn verify_csv_artifact_has_verdict_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reports.csv");
    run_ok(&[
        "verify",
        "--only",
        "cost_limit",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    let rows = csv_rows(&std::fs::read_to_string(&path).unwrap());
    assert!(!rows.is_empty());
    for row in &rows {
        assert_eq!(row.len(), 6);
        assert_eq!(row[4], "pass");
    }
}

// --- compare ----------------------------------------------------------------------

#[test]
fn compare_table_crosses_over_and_scales_with_epsilon() {
    let base = run_ok(&["compare", "-n", "100", "-k", "1"]);
    assert!(base.contains("# splitting overtakes direct sampling"));
    let rows = csv_rows(&base);
    assert_eq!(rows.len(), 12);
    let ratio_first: f64 = rows[0][7].parse().unwrap();
    let ratio_last: f64 = rows[11][7].parse().unwrap();
    assert!(ratio_first > 1.0, "direct should win at p = e^-1");
    assert!(ratio_last < 1.0, "splitting should win at p = e^-12");

    // Halving epsilon multiplies both cost columns by exactly 4.
    let fine = run_ok(&["compare", "-n", "100", "-k", "1", "--epsilon", "0.05"]);
    let fine_rows = csv_rows(&fine);
    for (row, fine_row) in rows.iter().zip(&fine_rows) {
        let ams: f64 = row[4].parse().unwrap();
        let ams_fine: f64 = fine_row[4].parse().unwrap();
        assert_eq!(ams * 4.0, ams_fine);
        let direct: f64 = row[6].parse().unwrap();
        let direct_fine: f64 = fine_row[6].parse().unwrap();
        assert_eq!(direct * 4.0, direct_fine);
    }
}

#[test]
fn compare_json_reports_monotone_ratio() {
    let doc = parse_json(&run_ok(&[
        "compare", "-n", "50", "-k", "2", "--format", "json",
    ]));
    assert_eq!(doc["ratio_monotone"], true);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 12);
    assert!(doc["crossover"].as_str().unwrap().contains("overtakes"));
}

#[test]
fn compare_rejects_probabilities_outside_the_unit_interval() {
    let out = ams(&["compare", "--p", "0.5,1.5"]).output().unwrap();
    assert_eq!(exit_code(&out), 2);
}

// --- provenance ------------------------------------------------------------------

#[test]
fn artifacts_embed_seed_digest_and_build() {
    let text = run_ok(&["replicate", "-n", "10", "-m", "20", "--seed", "123"]);
    assert!(text.contains("# seed: 123\n"));
    let digest_line = text
        .lines()
        .find(|l| l.starts_with("# config: "))
        .expect("config digest comment");
    let digest = digest_line.trim_start_matches("# config: ");
    assert_eq!(digest.len(), 16);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(text.contains("# build: ams "));

    let doc = parse_json(&run_ok(&["run", "--seed", "123"]));
    assert_eq!(
        doc["provenance"]["build"],
        format!("ams {}", env!("CARGO_PKG_VERSION"))
    );
}
