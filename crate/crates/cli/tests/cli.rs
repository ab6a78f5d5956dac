//! End-to-end checks of the command-line surface.

use std::path::{Path, PathBuf};
use std::process::Command;

fn svmfuzz() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svmfuzz"))
}

fn corpus_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svmfuzz-corpus"))
}

/// Writes the bundled corpus into a temp dir and returns (dir, hex, abi) for
/// one named contract.
fn corpus_with(name: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let status = corpus_bin().arg("--out").arg(dir.path()).status().unwrap();
    assert!(status.success());
    let hex = dir.path().join(format!("{name}.hex"));
    let abi = dir.path().join(format!("{name}.abi.json"));
    assert!(hex.exists() && abi.exists());
    (dir, hex, abi)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn single_contract_run_writes_all_outputs() {
    let (_corpus, hex, abi) = corpus_with("gasless_send");
    let out = tempfile::tempdir().unwrap();
    let output = svmfuzz()
        .args(["--duration", "600", "--generations", "12", "--seed", "7"])
        .arg("--bytecode")
        .arg(&hex)
        .arg("--abi")
        .arg(&abi)
        .arg("--out")
        .arg(out.path())
        .args(["--dump-cfg", "--dump-trace", "--emit-script"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    // vulnerabilities are reported in files and on stdout, exit stays 0
    assert!(stdout.contains("GaslessSend"), "{stdout}");
    assert!(out.path().join("report.json").exists());
    assert!(out.path().join("stats.csv").exists());
    assert!(out.path().join("cfg.dot").exists());
    assert!(out.path().join("run.sh").exists());
    assert!(out.path().join("suite/tc-00000.json").exists());
    assert!(out.path().join("traces/tc-00000.trace").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&read(&out.path().join("report.json"))).unwrap();
    assert!(report
        .as_array()
        .unwrap()
        .iter()
        .any(|r| r["oracle"] == "GaslessSend"));
    let script = String::from_utf8(read(&out.path().join("run.sh"))).unwrap();
    assert!(script.contains("--attacker normal"));
}

#[test]
fn same_seed_and_generation_bound_give_identical_outputs() {
    let (_corpus, hex, abi) = corpus_with("nonlinear");
    let run = |dir: &Path| {
        let status = svmfuzz()
            .args(["--duration", "600", "--generations", "10", "--seed", "3"])
            .arg("--bytecode")
            .arg(&hex)
            .arg("--abi")
            .arg(&abi)
            .arg("--out")
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    assert_eq!(
        read(&a.path().join("report.json")),
        read(&b.path().join("report.json"))
    );
    let suite = |p: &Path| {
        let mut names: Vec<_> = std::fs::read_dir(p.join("suite"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        names
    };
    let names = suite(a.path());
    assert_eq!(names, suite(b.path()));
    for n in names {
        assert_eq!(
            read(&a.path().join("suite").join(&n)),
            read(&b.path().join("suite").join(&n)),
            "{n:?} differs"
        );
    }
}

#[test]
fn env_variables_override_defaults() {
    let (_corpus, hex, abi) = corpus_with("nonlinear");
    let out = tempfile::tempdir().unwrap();
    let status = svmfuzz()
        .env("SVMFUZZ_BYTECODE", &hex)
        .env("SVMFUZZ_ABI", &abi)
        .env("SVMFUZZ_OUT", out.path())
        .env("SVMFUZZ_DURATION", "600")
        .env("SVMFUZZ_GENERATIONS", "5")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("stats.csv").exists());
}

#[test]
fn manifest_runs_contracts_in_worker_processes() {
    let (corpus, _, _) = corpus_with("nonlinear");
    // restrict the manifest to two small contracts
    let manifest = corpus.path().join("two.txt");
    let lines = format!(
        "{} {}\n{} {}\n",
        corpus.path().join("nonlinear.hex").display(),
        corpus.path().join("nonlinear.abi.json").display(),
        corpus.path().join("overflow.hex").display(),
        corpus.path().join("overflow.abi.json").display(),
    );
    std::fs::write(&manifest, lines).unwrap();
    let out = tempfile::tempdir().unwrap();
    let status = svmfuzz()
        .args(["--duration", "600", "--generations", "5", "--jobs", "2"])
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.path().join("nonlinear/stats.csv").exists());
    assert!(out.path().join("overflow/report.json").exists());
}

#[test]
fn option_errors_exit_nonzero() {
    let out = svmfuzz().output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--bytecode"), "{err}");

    let bad = svmfuzz()
        .args(["--bytecode", "/nonexistent.hex", "--abi", "/nonexistent.json"])
        .output()
        .unwrap();
    assert!(!bad.status.success());

    let zero = svmfuzz().args(["--duration", "0"]).output().unwrap();
    assert!(!zero.status.success());
}

#[test]
fn stats_csv_execs_per_sec_matches_execs_over_elapsed() {
    let (_corpus, hex, abi) = corpus_with("nonlinear");
    let out = tempfile::tempdir().unwrap();
    assert!(svmfuzz()
        .args(["--duration", "600", "--generations", "8"])
        .arg("--bytecode")
        .arg(&hex)
        .arg("--abi")
        .arg(&abi)
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(out.path().join("stats.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let elapsed: f64 = cols[1].parse().unwrap();
        let execs: f64 = cols[2].parse().unwrap();
        let eps: f64 = cols[3].parse().unwrap();
        if elapsed > 0.0 && eps > 0.0 {
            let expected = execs / elapsed;
            let err = (eps - expected).abs() / expected;
            assert!(err < 0.01, "execs/sec off by {err}");
        }
        rows += 1;
    }
    assert_eq!(rows, 8);
}
