//! CLI acceptance: every bundled example runs its documented command with
//! the documented exit code, and two runs with the same seed produce
//! byte-identical artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    full.push("--out".into());
    full.push(out_dir.to_string_lossy().into_owned());
    Command::new(env!("CARGO_BIN_EXE_treemarket"))
        .args(&full)
        .output()
        .expect("binary runs")
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let bytes = std::fs::read(entry.path()).unwrap();
            out.push((name, bytes));
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_8_cli_determinism() {
    let start = std::time::Instant::now();
    let fx = fixtures();
    let model = |name: &str| fx.join(name).to_string_lossy().into_owned();
    let claim_csv = model("binomial_call.csv");

    // (fixture commands, expected exit code)
    let runs: Vec<(Vec<String>, i32)> = vec![
        (vec!["validate".into(), "--model".into(), model("binomial.json")], 0),
        (vec!["check-axioms".into(), "--model".into(), model("binomial.json")], 0),
        (vec!["check-na".into(), "--model".into(), model("binomial.json")], 0),
        (vec!["superhedge".into(), "--model".into(), model("binomial.json")], 0),
        (
            vec![
                "superhedge".into(),
                "--model".into(),
                model("binomial.json"),
                "--claim".into(),
                claim_csv.clone(),
                "--grid".into(),
                "101".into(),
                "--box".into(),
                "2".into(),
            ],
            0,
        ),
        (
            vec![
                "reconstruct".into(),
                "--model".into(),
                model("binomial.json"),
                "--grid".into(),
                "21".into(),
                "--box".into(),
                "2".into(),
            ],
            0,
        ),
        (
            vec![
                "recession".into(),
                "--model".into(),
                model("binomial.json"),
                "--grid".into(),
                "21".into(),
                "--box".into(),
                "2".into(),
            ],
            0,
        ),
        (
            vec![
                "maximize-utility".into(),
                "--model".into(),
                model("binomial.json"),
                "--utility".into(),
                "linear".into(),
                "--grid".into(),
                "9".into(),
                "--box".into(),
                "2".into(),
            ],
            0,
        ),
        (vec!["check-na".into(), "--model".into(), model("monotone.json")], 2),
        (vec!["superhedge".into(), "--model".into(), model("fixed_cost.json")], 0),
        (vec!["check-na".into(), "--model".into(), model("two_state.json")], 0),
        (vec!["validate".into(), "--model".into(), model("trinomial.json")], 0),
        (vec!["check-axioms".into(), "--model".into(), model("trinomial.json")], 0),
        (vec!["check-na".into(), "--model".into(), model("trinomial.json")], 0),
        (vec!["recession".into(), "--model".into(), model("lob.json")], 0),
        (vec!["check-axioms".into(), "--model".into(), model("lob.json")], 0),
        (
            vec!["check-na".into(), "--vector".into(), "--model".into(), model("kabanov.json")],
            0,
        ),
        (vec!["cone-check".into(), "--model".into(), model("kabanov.json")], 0),
        (vec!["check-axioms".into(), "--model".into(), model("consumption.json")], 0),
        (
            vec![
                "maximize-utility".into(),
                "--model".into(),
                model("consumption.json"),
                "--utility".into(),
                "linear".into(),
            ],
            0,
        ),
    ];

    let scratch = std::env::temp_dir().join(format!("treemarket-accept-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&scratch);
    for (i, (args, expected_code)) in runs.iter().enumerate() {
        let args_ref: Vec<&str> = args.iter().map(String::as_str).collect();
        let out_a = scratch.join(format!("run{i}-a"));
        let out_b = scratch.join(format!("run{i}-b"));
        let ra = run(&args_ref, &out_a);
        let rb = run(&args_ref, &out_b);
        assert_eq!(
            ra.status.code(),
            Some(*expected_code),
            "run {i} ({args:?}): exit {:?}, stderr: {}",
            ra.status.code(),
            String::from_utf8_lossy(&ra.stderr)
        );
        assert_eq!(ra.status.code(), rb.status.code(), "run {i}: exit codes differ across runs");
        assert_eq!(
            ra.stdout, rb.stdout,
            "run {i} ({args:?}): stdout differs across identical runs"
        );
        let arts_a = artifacts(&out_a);
        let arts_b = artifacts(&out_b);
        assert_eq!(
            arts_a.len(),
            arts_b.len(),
            "run {i}: artifact sets differ across identical runs"
        );
        for ((name_a, bytes_a), (name_b, bytes_b)) in arts_a.iter().zip(&arts_b) {
            assert_eq!(name_a, name_b, "run {i}: artifact names differ");
            assert_eq!(
                bytes_a, bytes_b,
                "run {i}: artifact {name_a} is not byte-identical across runs"
            );
        }
    }
    let _ = std::fs::remove_dir_all(&scratch);

    println!(
        "ACCEPTANCE 8 (cli determinism): PASS - {} command runs byte-identical with documented exit codes, {:.1?}",
        runs.len(),
        start.elapsed()
    );
}

#[test]
fn superhedge_prints_the_binomial_call_price() {
    let fx = fixtures();
    let out = std::env::temp_dir().join(format!("treemarket-price-{}", std::process::id()));
    let result = run(
        &["superhedge", "--model", &fx.join("binomial.json").to_string_lossy()],
        &out,
    );
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("price 0.33"), "expected a one-third-ish price, got: {stdout}");
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn arbitrage_witness_is_emitted_on_exit_2() {
    let fx = fixtures();
    let out = std::env::temp_dir().join(format!("treemarket-witness-{}", std::process::id()));
    let result = run(
        &["check-na", "--model", &fx.join("monotone.json").to_string_lossy()],
        &out,
    );
    assert_eq!(result.status.code(), Some(2));
    let witness = std::fs::read_to_string(out.join("witness.csv")).unwrap();
    assert!(witness.starts_with("node_id,theta_0"));
    assert!(witness.lines().count() >= 2);
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn json_verdicts_are_machine_readable() {
    let fx = fixtures();
    let out = std::env::temp_dir().join(format!("treemarket-json-{}", std::process::id()));
    let result = run(
        &["check-na", "--json", "--model", &fx.join("binomial.json").to_string_lossy()],
        &out,
    );
    let stdout = String::from_utf8_lossy(&result.stdout);
    let verdict: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(verdict["status"], "na_certified");
    let _ = std::fs::remove_dir_all(&out);
}
