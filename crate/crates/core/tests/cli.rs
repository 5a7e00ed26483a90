use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn pem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pem"))
        .args(args)
        .output()
        .unwrap()
}

fn pem_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pem"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "simulate",
        "--out-dir",
        s(dir),
        "--n-patients",
        "1500",
        "--n-null-events",
        "30",
    ];
    args.extend_from_slice(extra);
    let out = pem(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn data_rows(report: &str) -> Vec<&str> {
    report.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn simulate_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path(), &["--seed", "7"]);
    simulate(b.path(), &["--seed", "7"]);
    for f in ["therapy.csv", "medical.csv", "dictionary.tsv", "synth.toml"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn detect_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, &["--seed", "3"]);
    let report = d.join("report.tsv");
    let dumps = d.join("dump");
    let out = pem(&[
        "detect",
        "--therapy",
        s(&d.join("therapy.csv")),
        "--medical",
        s(&d.join("medical.csv")),
        "--dictionary",
        s(&d.join("dictionary.tsv")),
        "--drug-prefix",
        "PRAVA",
        "-o",
        s(&report),
        "--dump-dir",
        s(&dumps),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let rows = data_rows(&text);
    assert!(!rows.is_empty() && rows.len() <= 20);
    assert!(text.lines().any(|l| l.starts_with("rank\treadcode")));
    for m in ["A.tsv", "B.tsv", "X.tsv", "Y.tsv"] {
        assert!(dumps.join(m).exists(), "{m}");
    }

    let out = pem(&[
        "evaluate",
        "--report",
        s(&report),
        "--config",
        s(&d.join("synth.toml")),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let recall: f64 = stdout
        .lines()
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(recall >= 0.6, "{stdout}");

    let nothing = d.join("nothing.toml");
    std::fs::write(&nothing, "planted = []\n").unwrap();
    let out = pem(&["evaluate", "--report", s(&report), "--config", s(&nothing)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("recall_at_20\t0.0000"));
}

#[test]
fn level13_report_only_has_coarse_keys() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, &["--seed", "9"]);
    let report = d.join("r13.tsv");
    let out = pem(&[
        "detect",
        "--therapy",
        s(&d.join("therapy.csv")),
        "--medical",
        s(&d.join("medical.csv")),
        "--drug-prefix",
        "PRAVA",
        "--mode",
        "level13",
        "--alpha",
        "1",
        "--allow-decrease",
        "--top-k",
        "1000",
        "-o",
        s(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let rows = data_rows(&text);
    assert!(!rows.is_empty());
    for row in rows {
        let code = pem_core::parse_readcode(row.split('\t').nth(1).unwrap()).unwrap();
        assert!(code.level() <= 3, "{code}");
    }
}

#[test]
fn missing_input_is_an_io_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.tsv");
    let out = pem(&[
        "detect",
        "--therapy",
        s(&dir.path().join("absent.csv")),
        "--medical",
        s(&dir.path().join("absent2.csv")),
        "--drug-prefix",
        "X",
        "-o",
        s(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error\tio\t"));
    assert!(!report.exists());
}

#[test]
fn rollup_reads_stdin() {
    let out = pem_stdin(&["rollup"], "N245111\nN245.16\n\nC34..00\n");
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "N24..00\nN24..00\nC34..00\n"
    );
    let out = pem_stdin(&["rollup", "--level", "4"], "N245111\n");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "N245.00\n");

    let out = pem_stdin(&["rollup"], "N2.4500\n");
    assert_eq!(out.status.code(), Some(3));
    let out = pem_stdin(&["rollup", "--level", "9"], "N245111\n");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(pem(&["detect", "--bogus"]).status.code(), Some(1));
    assert_eq!(pem(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = pem(&[
        "detect",
        "--therapy",
        "a",
        "--medical",
        "b",
        "--drug-prefix",
        "X",
        "--alpha",
        "0",
        "-o",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let help = pem(&["detect", "--help"]);
    assert!(help.status.success());
    let text = String::from_utf8(help.stdout).unwrap();
    for default in [
        "[default: 60]",
        "[default: 100]",
        "[default: 0.05]",
        "[default: 20]",
    ] {
        assert!(text.contains(default), "{default}");
    }
}
