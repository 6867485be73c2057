//! End-to-end CLI checks through the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_modsolver")
}

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn")
}

#[test]
fn solve_exit_codes() {
    // Converged solve: exit 0 with the report on stdout.
    let out = run(&[
        "solve",
        fixture_path("example2.mod").to_str().unwrap(),
        "--report",
        "Solved",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("solved in"), "{stdout}");
    assert!(stdout.contains("v2 ="), "{stdout}");

    // Missing input: exit 2 with a message on stderr.
    let out = run(&["solve", "definitely-missing.mod"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // Unknown flag: exit 2 with usage text.
    let out = run(&["solve", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bare_path_is_solve_shorthand() {
    let out = run(&[fixture_path("example1.mod").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("v_2 ="));
}

#[test]
fn validation_errors_exit_2_with_locations() {
    let dir = std::env::temp_dir().join("modsolver-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.mod");
    std::fs::write(&bad, "Header: end\nModel:\nVars: end=1\nNLEs: 1=1\nend").unwrap();
    let out = run(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("3:7"), "{stderr}");
    assert!(stderr.contains("reserved word"), "{stderr}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let input = fixture_path("example7.mod");
    let args = [
        "solve",
        input.to_str().unwrap(),
        "--seed",
        "42",
        "--report",
        "AllDetails",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn convert_then_solve_agrees_with_handwritten_model() {
    // `solve` on the handwritten three-node model and `convert`+`solve` on
    // the equivalent case file agree within 1e-8.
    let dir = std::env::temp_dir().join("modsolver-cli-convert");
    std::fs::create_dir_all(&dir).unwrap();
    let case_path = dir.join("three_node.m");
    std::fs::write(
        &case_path,
        "function mpc = three_node\nmpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1.0 0 230 1 1.1 0.9;\n2 1 0 0 0 0 1 1.0 0 230 1 1.1 0.9;\n3 1 100 30 0 0 1 1.0 0 230 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 300 -300 1.0 100 1 250 10;\n];\nmpc.branch = [\n1 2 0.005 0.03 0 250 250 250 0 0 1 -360 360;\n2 3 0.005 0.03 0 250 250 250 0 0 1 -360 360;\n];\n",
    )
    .unwrap();
    let out = run(&[
        "convert",
        case_path.to_str().unwrap(),
        "--format",
        "complex",
        "--symbols",
        "ascii",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let mod_path = dir.join("three_node.mod");
    assert!(mod_path.exists(), "converted file written next to input");

    let converted = run(&["solve", mod_path.to_str().unwrap(), "--report", "Solved"]);
    assert_eq!(converted.status.code(), Some(0));
    let text = String::from_utf8_lossy(&converted.stdout);
    // v_3 from the converted model vs the handwritten complex model.
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with("v_3 ="))
        .unwrap_or_else(|| panic!("no v_3 in {text}"));
    let value = line.split('=').nth(1).unwrap().trim();
    let (re, im) = parse_complex(value);
    let handwritten = run(&[
        "solve",
        fixture_path("example2.mod").to_str().unwrap(),
        "--report",
        "Solved",
    ]);
    let text = String::from_utf8_lossy(&handwritten.stdout);
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with("v3 ="))
        .unwrap();
    let (re2, im2) = parse_complex(line.split('=').nth(1).unwrap().trim());
    let diff = ((re - re2).powi(2) + (im - im2).powi(2)).sqrt();
    assert!(diff < 1e-8, "v3 differs by {diff}");
}

/// Parse the report's `a+bi` / `a-bi` rendering.
fn parse_complex(s: &str) -> (f64, f64) {
    let s = s.trim().trim_end_matches('i');
    // Split on the sign of the imaginary part (skip a leading sign).
    for (idx, c) in s.char_indices().skip(1) {
        if (c == '+' || c == '-') && !matches!(&s[idx - 1..idx], "e" | "E") {
            let re: f64 = s[..idx].parse().unwrap();
            let im: f64 = s[idx..].parse().unwrap();
            return (re, im);
        }
    }
    (s.parse().unwrap(), 0.0)
}

#[test]
fn repeats_write_trace_file() {
    let dir = std::env::temp_dir().join("modsolver-cli-trace");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("report.txt");
    let out = run(&[
        "solve",
        fixture_path("example5_noreinit.mod").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    // The loadability run ends at the nose: exit 1, but both files exist.
    assert_eq!(out.status.code(), Some(1));
    assert!(out_path.exists());
    let trace_path = dir.join("report.trace.csv");
    assert!(trace_path.exists());
    let trace = std::fs::read_to_string(&trace_path).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("repeat,"), "{header}");
    assert!(header.contains("v3_re"), "{header}");
    assert!(trace.lines().count() > 10);
}
