use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tfree(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfree"))
        .args(args)
        .current_dir(dir)
        .env_remove("TFREE_THREADS")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn core_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

#[test]
fn split_prints_one_line_per_token() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in.txt"), "In 2024").unwrap();
    let out = stdout(&tfree(&["split", "in.txt"], dir.path()));
    assert_eq!(out, "word\tIn\ndigit\t2\ndigit\t0\ndigit\t2\ndigit\t4\n");
}

#[test]
fn pattern_matches_frozen_golden_line() {
    let dir = TempDir::new().unwrap();
    let out = stdout(&tfree(
        &["pattern", "Hello", "--v", "8000", "--m", "10", "--k", "0"],
        dir.path(),
    ));
    let golden = fs::read_to_string(core_data("golden_v8000_m10_k0.txt")).unwrap();
    let hello = golden
        .lines()
        .find_map(|l| l.strip_prefix("Hello\t"))
        .unwrap();
    assert_eq!(out.trim_end(), hello);
}

#[test]
fn golden_reproduces_reference_files() {
    let dir = TempDir::new().unwrap();
    stdout(&tfree(&["golden", "--out", "g.txt"], dir.path()));
    assert_eq!(
        fs::read_to_string(dir.path().join("g.txt")).unwrap(),
        fs::read_to_string(core_data("golden_v8000_m10_k0.txt")).unwrap()
    );
    let out = stdout(&tfree(
        &[
            "golden", "--preset", "3b", "Hello", "hello", "World", "world", "HELLO", "Straße",
        ],
        dir.path(),
    ));
    assert_eq!(
        out,
        fs::read_to_string(core_data("golden_v8000_m7_k3.txt")).unwrap()
    );
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        tfree(&["--no-such-flag"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(tfree(&["split"], dir.path()).status.code(), Some(1));
    assert_eq!(tfree(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(tfree(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn bad_input_exits_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        tfree(&["split", "missing.txt"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        tfree(&["pattern", "x", "--m", "2", "--k", "2"], dir.path())
            .status
            .code(),
        Some(1)
    );
    fs::write(dir.path().join("bad.txt"), [0xff, 0xfe]).unwrap();
    assert_eq!(
        tfree(&["split", "bad.txt"], dir.path()).status.code(),
        Some(1)
    );
    fs::write(dir.path().join("w.txt"), "two words\n").unwrap();
    let out = tfree(&["compile-dict", "w.txt", "--out", "d.bin"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fertility_of_alphabetic_sample_is_one() {
    let dir = TempDir::new().unwrap();
    let path = data("alphabetic.txt");
    let report = json(&tfree(&["fertility", path.to_str().unwrap()], dir.path()));
    assert_eq!(report["fertility"], 1.0);
}

#[test]
fn fertility_uses_external_counts() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.txt"), "In 2024\nhello world\n").unwrap();
    fs::write(
        dir.path().join("n.jsonl"),
        "{\"token_count\": 2}\n{\"token_count\": 6}\n",
    )
    .unwrap();
    let report = json(&tfree(
        &["fertility", "c.txt", "--counts", "n.jsonl"],
        dir.path(),
    ));
    assert_eq!(report["tokens"], 8);
    assert_eq!(report["fertility"], 2.0);
    fs::write(dir.path().join("n.jsonl"), "{\"token_count\": 2}\n").unwrap();
    let out = tfree(&["fertility", "c.txt", "--counts", "n.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dupes_reports_percentages() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("v.txt"), "word\nWord\n␣word\n12\nx\n").unwrap();
    let r = json(&tfree(&["dupes", "v.txt", "--ws-marker", "␣"], dir.path()));
    assert_eq!(
        [
            &r["capitalization_pct"],
            &r["whitespace_pct"],
            &r["digit_pct"],
            &r["total_pct"]
        ],
        [20.0, 20.0, 20.0, 60.0]
    );
    let r = json(&tfree(&["dupes", "--tfree"], dir.path()));
    assert_eq!(r["total_pct"], 0.0);
}

#[test]
fn stats_is_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let corpus = core_data("english_sample.txt");
    let corpus = corpus.to_str().unwrap();
    let one = stdout(&tfree(&["stats", corpus, "--threads", "1"], dir.path()));
    let many = Command::new(env!("CARGO_BIN_EXE_tfree"))
        .args(["stats", corpus])
        .env("TFREE_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one, stdout(&many));
    assert!(one.starts_with("curve,x,cumulative_pct\nby_length,1,"));
    for curve in ["by_length", "top_words", "top_trigrams"] {
        let last = one.lines().rfind(|l| l.starts_with(curve)).unwrap();
        assert!(last.ends_with(",100"), "{last}");
    }
}

#[test]
fn decode_reads_cache_and_plain_logits() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("w.txt"), "# words\nalpha\nbeta\n").unwrap();
    stdout(&tfree(
        &[
            "compile-dict",
            "w.txt",
            "--v",
            "64",
            "--m",
            "3",
            "--out",
            "d.bin",
        ],
        dir.path(),
    ));
    let beta = stdout(&tfree(
        &["pattern", "beta", "--v", "64", "--m", "3"],
        dir.path(),
    ));
    let active: Vec<usize> = beta
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    let logits: Vec<String> = (0..64)
        .map(|j| if active.contains(&j) { "20" } else { "-20" }.to_string())
        .collect();
    fs::write(dir.path().join("z.txt"), logits.join("\n")).unwrap();
    let r = json(&tfree(
        &[
            "decode", "--logits", "z.txt", "--dict", "d.bin", "--top", "2",
        ],
        dir.path(),
    ));
    assert_eq!(r["token"], "beta");
    assert_eq!(r["index"], 1);
    assert_eq!(r["rank_scores"].as_array().unwrap().len(), 2);

    fs::write(dir.path().join("short.txt"), "0 0").unwrap();
    let out = tfree(
        &["decode", "--logits", "short.txt", "--dict", "d.bin"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.cfg"), "v = 100\nm = 4\n").unwrap();
    let via_file = stdout(&tfree(
        &["pattern", "word", "--config", "c.cfg"],
        dir.path(),
    ));
    let via_flags = stdout(&tfree(
        &["pattern", "word", "--v", "100", "--m", "4"],
        dir.path(),
    ));
    assert_eq!(via_file, via_flags);
    let overridden = stdout(&tfree(
        &["pattern", "word", "--config", "c.cfg", "--v", "8000"],
        dir.path(),
    ));
    let expected = stdout(&tfree(&["pattern", "word", "--m", "4"], dir.path()));
    assert_eq!(overridden, expected);
    fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    let out = tfree(&["pattern", "word", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_generate_and_encode_round() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("c.txt"),
        "the cat sat on the mat ".repeat(20),
    )
    .unwrap();
    fs::write(dir.path().join("w.txt"), "the\ncat\nsat\non\nmat\n").unwrap();
    let train = [
        "train-toy",
        "c.txt",
        "--v",
        "512",
        "--m",
        "5",
        "--k",
        "1",
        "--h",
        "64",
        "--steps",
        "2000",
        "--lr",
        "0.05",
        "--seed",
        "0",
        "--context",
        "3",
        "--out",
        "toy.bin",
        "--loss-csv",
        "loss.csv",
    ];
    let summary = json(&tfree(&train, dir.path()));
    assert!(summary["final_loss"].as_f64().unwrap() < summary["initial_loss"].as_f64().unwrap());
    let first = fs::read(dir.path().join("toy.bin")).unwrap();
    let loss = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,loss\n0,"));
    assert_eq!(loss.lines().count(), 2002);

    stdout(&tfree(&train, dir.path()));
    assert_eq!(fs::read(dir.path().join("toy.bin")).unwrap(), first);

    let gen = [
        "generate",
        "--checkpoint",
        "toy.bin",
        "--dict",
        "w.txt",
        "--prefix",
        "the cat",
        "--steps",
        "4",
    ];
    assert_eq!(stdout(&tfree(&gen, dir.path())), "the cat sat on the mat\n");

    fs::write(dir.path().join("e.txt"), "the  cat").unwrap();
    let csv = stdout(&tfree(
        &["encode", "e.txt", "--checkpoint", "toy.bin"],
        dir.path(),
    ));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("position,kind,token,e0,"));
    assert!(lines[2].starts_with("1,ws_run,<ws2>,"));
    assert_eq!(lines[0].split(',').count(), 3 + 64);

    stdout(&tfree(
        &[
            "encode",
            "e.txt",
            "--checkpoint",
            "toy.bin",
            "--format",
            "bin",
            "--out",
            "e.bin",
        ],
        dir.path(),
    ));
    let bin = fs::read(dir.path().join("e.bin")).unwrap();
    assert_eq!(&bin[..4], b"TFEV");
    assert_eq!(bin.len(), 4 + 4 + 8 + 8 + 3 * 64 * 4);

    fs::write(dir.path().join("d.txt"), "the\ncat\n").unwrap();
    stdout(&tfree(
        &["compile-dict", "d.txt", "--out", "d.bin"],
        dir.path(),
    ));
    let gen = [
        "generate",
        "--checkpoint",
        "toy.bin",
        "--dict",
        "d.bin",
        "--prefix",
        "the",
    ];
    assert_eq!(tfree(&gen, dir.path()).status.code(), Some(1));
}
