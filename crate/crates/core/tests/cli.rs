use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn x3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_x3"))
        .args(args)
        .output()
        .expect("failed to run x3")
}

fn text(n: usize) -> Vec<u8> {
    let words = ["alpha ", "beta ", "gamma ", "delta\n", "epsilon ", "the ", "of "];
    let mut state = 12345u32;
    let mut out = Vec::new();
    while out.len() < n {
        state = state.wrapping_mul(1103515245).wrapping_add(12345);
        out.extend_from_slice(words[(state >> 16) as usize % words.len()].as_bytes());
    }
    out.truncate(n);
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn compress_decompress_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "in.txt");
    fs::write(&input, text(50_000)).unwrap();
    let packed = path(dir.path(), "in.x3");
    let stats = path(dir.path(), "stats.json");
    let out = x3(&[
        "c",
        &input,
        &packed,
        "--window",
        "4096",
        "--guard-window",
        "on",
        "--stats",
        &stats,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let unpacked = path(dir.path(), "out.txt");
    let out = x3(&["decompress", &packed, &unpacked]);
    assert!(out.status.success());
    assert_eq!(fs::read(&input).unwrap(), fs::read(&unpacked).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&fs::read(&stats).unwrap()).unwrap();
    assert_eq!(report["input_bytes"], 50_000);
    assert_eq!(report["compressed_bytes"], fs::metadata(&packed).unwrap().len());
    assert!(report["dict_refs"].as_u64().unwrap() > report["raw_fragments"].as_u64().unwrap());
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let junk = path(dir.path(), "junk");
    fs::write(&junk, b"definitely not a container").unwrap();
    let out_path = path(dir.path(), "out");

    let corrupt = x3(&["d", &junk, &out_path]).status.code().unwrap();
    let missing = x3(&["d", &path(dir.path(), "missing"), &out_path])
        .status
        .code()
        .unwrap();
    let bad_params = x3(&["c", &junk, &out_path, "--max-matches", "0"])
        .status
        .code()
        .unwrap();
    let usage = x3(&["c", &junk, &out_path, "--guard-dict", "maybe"])
        .status
        .code()
        .unwrap();

    let codes = [corrupt, missing, bad_params, usage];
    assert!(codes.iter().all(|&c| c != 0));
    for i in 0..codes.len() {
        for j in i + 1..codes.len() {
            assert_ne!(codes[i], codes[j], "{codes:?}");
        }
    }
    assert!(!Path::new(&out_path).exists());
}

#[test]
fn bench_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    let csv = path(dir.path(), "r.csv");
    let out = x3(&["bench", corpus.to_str().unwrap(), "--csv", &csv]);
    assert!(out.status.success());
    let body = fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("name,size,compressed,ratio,seconds,structure_bytes,factor\n"));
}

#[test]
fn bench_with_reference_csv() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("a.txt"), text(20_000)).unwrap();
    fs::write(corpus.join("b.txt"), text(3_000)).unwrap();
    let reference = path(dir.path(), "ref.csv");
    fs::write(&reference, "name,gzip\na.txt,2.5000\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_x3"))
        .args(["bench", corpus.to_str().unwrap(), "--reference", &reference])
        .env("X3_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("gzip"));
    assert!(table.contains("2.5000"));
    assert!(table.contains("| b.txt |"));
    assert!(table.contains("| TOTAL |"));
}

#[test]
fn opt_singleton_and_apply() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(dir.path(), "in.txt");
    fs::write(&input, text(20_000)).unwrap();
    let applied = path(dir.path(), "best.x3");
    let log = path(dir.path(), "log.csv");
    let out = x3(&[
        "opt",
        &input,
        "--windows",
        "2048",
        "--matches",
        "9",
        "--guard-dict",
        "off",
        "--log",
        &log,
        "--apply",
        &applied,
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("--window 2048 --max-matches 9 --max-len 64 --guard-dict off --guard-window off"));
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 2);

    let restored = path(dir.path(), "restored");
    assert!(x3(&["d", &applied, &restored]).status.success());
    assert_eq!(fs::read(&input).unwrap(), fs::read(&restored).unwrap());
}
