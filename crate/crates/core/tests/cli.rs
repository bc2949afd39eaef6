use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/appendix_a.tt");

fn dsimon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsimon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_fixture_is_byte_identical() {
    let out = dsimon(&[
        "gen",
        "-n",
        "4",
        "-m",
        "6",
        "-s",
        "1001",
        "--fixture",
        "appendix_a",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(out.stdout, std::fs::read(FIXTURE).unwrap());
    let mismatch = dsimon(&["gen", "-n", "5", "--fixture", "appendix_a"]);
    assert_eq!(code(&mismatch), 6);
}

#[test]
fn gen_is_deterministic_and_reveals_on_request() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.tt");
    let b = dir.path().join("b.tt");
    for path in [&a, &b] {
        let out = dsimon(&[
            "gen",
            "-n",
            "9",
            "-m",
            "10",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        assert!(out.stderr.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let revealed = dsimon(&["gen", "-n", "9", "-m", "10", "--seed", "3", "--reveal"]);
    let stderr = String::from_utf8(revealed.stderr).unwrap();
    let s = stderr.trim().strip_prefix("s = ").unwrap().to_string();
    let text = String::from_utf8(revealed.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), format!("# s={s}"));
    // the revealed file differs from the plain one only by that line
    let plain = std::fs::read_to_string(&a).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(1);
    assert_eq!(lines.join("\n") + "\n", plain);
}

#[test]
fn gen_zero_shift_is_injective() {
    let out = dsimon(&["gen", "-n", "2", "-m", "2", "-s", "00", "--seed", "7"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut values: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(values.len(), 4);
    values.sort();
    values.dedup();
    assert_eq!(values.len(), 4);
}

#[test]
fn gen_rejects_narrow_codomain() {
    assert_eq!(code(&dsimon(&["gen", "-n", "6", "-m", "4"])), 6);
    assert_eq!(code(&dsimon(&["gen", "-n", "6"])), 2);
}

#[test]
fn solve_reports_json() {
    let out = dsimon(&[
        "solve",
        FIXTURE,
        "-t",
        "2",
        "-a",
        "distributed",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["recovered_s"], "1001");
    assert_eq!(report["s1"], "10");
    assert_eq!(report["s2"], "01");
    assert_eq!(report["verified"], true);
    assert_eq!(report["seed"], 1);
    assert_eq!(report["node_queries"].as_object().unwrap().len(), 4);

    let classical = dsimon(&[
        "solve",
        FIXTURE,
        "-t",
        "2",
        "-a",
        "classical",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&classical), 0);
    let c: serde_json::Value = serde_json::from_str(&stdout(&classical)).unwrap();
    assert_eq!(c["recovered_s"], "1001");
}

#[test]
fn solve_exit_codes() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(FIXTURE).unwrap();
    // three inputs sharing one value break the promise
    let triple = text.replacen("000100", "100101", 1);
    let bad = write(&dir, "triple.tt", &triple);
    assert_eq!(code(&dsimon(&["solve", &bad, "-t", "2"])), 4);

    let garbled = write(&dir, "garbled.tt", &text.replacen("101100", "10x100", 1));
    assert_eq!(code(&dsimon(&["solve", &garbled, "-t", "2"])), 3);

    let missing = dir.path().join("nope.tt");
    assert_eq!(code(&dsimon(&["solve", missing.to_str().unwrap()])), 7);

    assert_eq!(code(&dsimon(&["solve", FIXTURE, "-t", "4"])), 6);
    assert_eq!(code(&dsimon(&["solve", FIXTURE, "-a", "grover"])), 2);

    // with s = 0^n the rank must reach n - t, which this seed misses in the minimum budget
    let zero = dsimon(&[
        "gen",
        "-n",
        "12",
        "-m",
        "12",
        "-s",
        "000000000000",
        "--seed",
        "2",
    ]);
    let zero = write(&dir, "zero.tt", &stdout(&zero));
    assert_eq!(
        code(&dsimon(&[
            "solve",
            &zero,
            "-t",
            "1",
            "--max-runs",
            "11",
            "--seed",
            "0"
        ])),
        5
    );
    assert_eq!(
        code(&dsimon(&["solve", &zero, "-t", "1", "--max-runs", "10"])),
        6
    );
}

#[test]
fn verify_prints_tables() {
    let out = dsimon(&["verify", FIXTURE, "-t", "2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for row in [
        "00  {100101,101100,000100,110101}",
        "01  {101010,011001,001101,111100}",
        "10  {101100,100101,110101,000100}",
        "11  {011001,101010,111100,001101}",
        "00  000100100101101100110101",
        "01  001101011001101010111100",
        "10  000100100101101100110101",
        "11  001101011001101010111100",
    ] {
        assert!(text.contains(row), "missing {row:?} in\n{text}");
    }
    assert!(!text.contains("FAILED"));
}

#[test]
fn verify_names_the_failed_property() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(FIXTURE).unwrap();
    let bad = write(&dir, "bad.tt", &text.replacen("000100", "100101", 1));
    let out = dsimon(&["verify", &bad, "-t", "2"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("promise"));

    let zero = dsimon(&["gen", "-n", "4", "-m", "4", "-s", "0000"]);
    let zero = write(&dir, "zero.tt", &stdout(&zero));
    let out = dsimon(&["verify", &zero, "-t", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("skipped (s = 0^n hypothesis unmet)"));
}

#[test]
fn verify_runs_statevector_on_small_tables() {
    let dir = TempDir::new().unwrap();
    let small = dsimon(&["gen", "-n", "3", "-m", "3", "-s", "110", "--seed", "4"]);
    let small = write(&dir, "small.tt", &stdout(&small));
    let out = dsimon(&["verify", &small, "-t", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("statevector: ok"));

    let json = dsimon(&["verify", &small, "-t", "1", "--json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(report["s"], "110");
}

fn bench_config(dir: &Path, trials: usize) -> String {
    let out = dir.join("sweep");
    let config = format!(
        "n_values = [6, 8]\nt_values = [1, 2]\ntrials = {trials}\nseed = 99\n\
         algorithms = [\"distributed\", \"centralized\", \"classical\"]\noutput_path = {:?}\n",
        out.to_str().unwrap()
    );
    let path = dir.join("bench.toml");
    std::fs::write(&path, config).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bench_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = bench_config(dir.path(), 4);
    let read = |ext: &str| std::fs::read(dir.path().join(format!("sweep.{ext}"))).unwrap();
    assert_eq!(code(&dsimon(&["bench", &config, "--quiet"])), 0);
    let (jsonl, csv) = (read("jsonl"), read("csv"));
    assert_eq!(code(&dsimon(&["bench", &config, "--quiet"])), 0);
    assert_eq!(read("jsonl"), jsonl);
    assert_eq!(read("csv"), csv);
    assert_eq!(
        String::from_utf8(jsonl).unwrap().lines().count(),
        2 * 2 * 3 * 4
    );
    assert_eq!(
        String::from_utf8(csv).unwrap().lines().count(),
        1 + 2 * 2 * 3
    );
}

#[test]
fn bench_single_trial_writes_one_line() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("one.toml");
    std::fs::write(
        &config,
        format!(
            "n_values = [5]\nt_values = [2]\ntrials = 1\nseed = 1\nalgorithms = [\"distributed\"]\noutput_path = {:?}\n",
            dir.path().join("one").to_str().unwrap()
        ),
    )
    .unwrap();
    assert_eq!(
        code(&dsimon(&["bench", config.to_str().unwrap(), "--quiet"])),
        0
    );
    let jsonl = std::fs::read_to_string(dir.path().join("one.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1);
}

#[test]
fn bench_rejects_invalid_config() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "n_values = [4]\nt_values = [4]\ntrials = 1\nseed = 0\nalgorithms = [\"classical\"]\noutput_path = \"x\"\n");
    assert_eq!(code(&dsimon(&["bench", &bad])), 6);
    let garbled = write(&dir, "garbled.toml", "n_values = [4\n");
    assert_eq!(code(&dsimon(&["bench", &garbled])), 3);
}
