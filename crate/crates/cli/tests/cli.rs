//! End-to-end checks of the binary: output contracts and exit codes.

use std::process::{Command, Output};

fn tmatrix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmatrix"))
        .args(args)
        .env_remove("TMATRIX_FORMAT")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn element_prints_value_and_flags() {
    let out = tmatrix(&["element", "2", "3"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "a(2;3) = 77 [defining]\n");

    let out = tmatrix(&["element", "1", "1"]);
    assert_eq!(stdout(&out), "a(1;1) = 25 [leading]\n");
}

#[test]
fn row_lists_defining_elements() {
    let out = tmatrix(&["row", "2", "--from", "49", "--count", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for value in ["77", "91", "119"] {
        assert!(text.contains(value), "missing {value} in {text}");
    }
}

#[test]
fn active_set_desk_example() {
    let out = tmatrix(&["active-set", "3"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "m=3 k1=2 q=2 H=[77, 91] C=119 k1_next=4\n");
}

#[test]
fn scheme_trace_ends_at_the_terminal_leading_square() {
    let out = tmatrix(&["scheme", "3", "--trace"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("down-failure"));
    assert!(text.trim_end().ends_with("terminal leading: 169"));
}

#[test]
fn pi_prints_the_count() {
    let out = tmatrix(&["pi", "100"]);
    assert_eq!(stdout(&out).trim(), "25");
    // Real inputs are floored.
    let out = tmatrix(&["pi", "10.9"]);
    assert_eq!(stdout(&out).trim(), "4");
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(tmatrix(&["active-set", "2"]).status.code(), Some(2));
    assert_eq!(tmatrix(&["verify", "--from", "3", "--to", "2"]).status.code(), Some(2));
    assert_eq!(tmatrix(&["upper-defining", "10"]).status.code(), Some(2));
    assert_eq!(tmatrix(&["element", "0", "1"]).status.code(), Some(2));
    // Unknown flags are clap usage errors.
    assert_eq!(tmatrix(&["element", "--bogus"]).status.code(), Some(2));
    // The max-m guard applies to m-ranged commands.
    assert_eq!(
        tmatrix(&["active-set", "50", "--max-m", "10"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_passes_and_emits_canonical_json() {
    let out = tmatrix(&["verify", "--from", "3", "--to", "25", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["range"]["from"], 3);
    assert_eq!(report["range"]["to"], 25);
    assert_eq!(report["first_violation"], serde_json::Value::Null);
    for (_, status) in report["claims"].as_object().unwrap() {
        assert_eq!(status, "pass");
    }

    // Byte-identical round trip through the typed report.
    let typed: tmatrix::legendre::VerificationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&typed).unwrap(), text.trim_end());
}

#[test]
fn export_csv_has_the_pinned_columns() {
    let out = tmatrix(&["export", "--from", "3", "--to", "4", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,k1,q,H,C,k1_next"));
    assert_eq!(lines.next(), Some("3,2,2,77;91,119,4"));
    assert_eq!(lines.next(), Some("4,4,3,221;247;299,377,7"));
}

#[test]
fn env_vars_mirror_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_tmatrix"))
        .args(["active-set", "3"])
        .env("TMATRIX_FORMAT", "csv")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("m,k1,q,H,C,k1_next"));
}

#[test]
fn cache_file_round_trips_through_the_cli() {
    let dir = std::env::temp_dir().join(format!("tmx-cli-cache-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cache = dir.join("primes.bin");
    let cache_arg = cache.to_str().unwrap();

    let first = tmatrix(&["pi", "100000", "--cache", cache_arg]);
    assert!(first.status.success());
    assert!(cache.exists());

    let second = tmatrix(&["pi", "100000", "--cache", cache_arg]);
    assert_eq!(stdout(&second).trim(), "9592");

    std::fs::remove_dir_all(&dir).ok();
}
