//! End-to-end runs of the `kms` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kms_core::extension::SolenoidalSpec;
use kms_core::fields::{random_band_limited, read_field, write_field};
use kms_core::{Field, GridGeometry};
use serde_json::Value;
use tempfile::TempDir;

fn kms(args: &[&str]) -> Output {
    kms_env(args, None)
}

fn kms_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kms"));
    cmd.args(args).env_remove("KMS_SEED");
    if let Some(s) = seed {
        cmd.env("KMS_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One `error: <category>: <reason>` line on stderr.
fn assert_one_line_error(o: &Output, category: &str) {
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error: {category}: ")), "{err}");
}

const SUBCOMMANDS: [&str; 7] = [
    "check-elliptic",
    "decompose",
    "verify",
    "verify-variant",
    "verify2",
    "counterexample",
    "extend",
];

#[test]
fn help_matches_golden_files() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("KMS_UPDATE_GOLDEN").is_some();
    let mut cases = vec![("help.txt".to_owned(), vec!["--help".to_owned()])];
    for sub in SUBCOMMANDS {
        cases.push((format!("help-{sub}.txt"), vec![sub.to_owned(), "--help".to_owned()]));
    }
    for (file, args) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = kms(&args);
        assert_eq!(code(&out), 0);
        let text = String::from_utf8(out.stdout).unwrap();
        let golden = dir.join(&file);
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&golden, &text).unwrap();
        }
        let expected = std::fs::read_to_string(&golden).expect("golden file present");
        assert_eq!(text, expected, "{file} differs; rerun with KMS_UPDATE_GOLDEN=1 after review");
    }
}

#[test]
fn help_lists_defaults_for_every_optional_flag() {
    for sub in SUBCOMMANDS {
        let text = String::from_utf8(kms(&[sub, "--help"]).stdout).unwrap();
        for flag in ["--seed", "--p", "--grids", "--corpus", "--kmax", "--samples", "--tol", "--ks", "--grid "] {
            if let Some(pos) = text.find(&format!("      {flag}")) {
                let mut lines = text[pos..].lines();
                let first = lines.next().unwrap();
                let entry = if first.contains("  ") && first.trim_start().contains("  ") {
                    first.to_owned()
                } else {
                    format!("{first} {}", lines.next().unwrap())
                };
                assert!(entry.contains("[default:"), "{sub} {flag}: {entry}");
            }
        }
    }
}

#[test]
fn check_elliptic_exit_codes() {
    let out = kms(&["check-elliptic", "--operator", "sym"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["min_singular"].as_f64().unwrap() - 0.70711).abs() < 1e-3);
    assert_eq!(v["is_elliptic"], true);
    assert_eq!(code(&kms(&["check-elliptic", "--operator", "skew"])), 2);
    assert_eq!(code(&kms(&["check-elliptic", "--operator", "trace"])), 2);
}

#[test]
fn usage_errors_exit_one_with_a_single_line() {
    let out = kms(&["verify", "--operator", "sym", "--bogus"]);
    assert_eq!(code(&out), 1);
    assert_one_line_error(&out, "usage");
    let out = kms(&["check-elliptic"]);
    assert_eq!(code(&out), 1);
    assert_one_line_error(&out, "usage");
    let out = kms(&["verify", "--operator", "skew", "--grids", "8", "--corpus", "2"]);
    assert_eq!(code(&out), 1);
    assert_one_line_error(&out, "usage");
    assert!(stderr(&out).contains("counterexample"));
    let out = kms(&["verify-variant", "--kind", "morrey", "--p", "2", "--grids", "8", "--corpus", "2"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("3 < p"));
}

#[test]
fn verify_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let csv = path(&dir, &format!("r{run}.csv"));
        let sum = path(&dir, &format!("s{run}.json"));
        let out = kms(&[
            "verify", "--operator", "sym", "--p", "1", "--grids", "8,12", "--corpus", "5", "--seed",
            "7", "--out", s(&csv), "--summary", s(&sum),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&sum).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(csv.starts_with("index,lhs,rhs_elliptic,rhs_curl,ratio,flag\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
}

#[test]
fn env_seed_overrides_flag() {
    let args = ["verify", "--operator", "sym", "--grids", "8", "--corpus", "2", "--seed", "1"];
    let out = kms_env(&args, Some("42"));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 42);
    let out = kms_env(&args, Some("forty-two"));
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_round_trip_and_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let flags = [
        "verify2", "--mode", "dev", "--p", "1.5", "--grids", "8", "--corpus", "3", "--seed", "5",
    ];
    let dumped = kms(&[&flags[..], &["--dump-config"]].concat());
    assert_eq!(code(&dumped), 0);
    let cfg = path(&dir, "run.toml");
    std::fs::write(&cfg, &dumped.stdout).unwrap();
    let from_flags = kms(&flags);
    let from_file = kms(&["verify2", "--config", s(&cfg)]);
    assert_eq!(code(&from_file), 0, "{}", stderr(&from_file));
    assert_eq!(from_flags.stdout, from_file.stdout);
    let redumped = kms(&["verify2", "--config", s(&cfg), "--dump-config"]);
    assert_eq!(redumped.stdout, dumped.stdout);

    let bad = path(&dir, "bad.toml");
    std::fs::write(&bad, "mode = \"sym\"\nbogus = 1\n").unwrap();
    let out = kms(&["verify2", "--config", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert_one_line_error(&out, "usage");
    assert!(stderr(&out).contains("bogus"));

    std::fs::write(&bad, "mode = \"sym\"\nks = [4]\n").unwrap();
    let out = kms(&["verify2", "--config", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not apply"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.toml");
    std::fs::write(&cfg, "operator = \"sym\"\ngrids = [8]\ncorpus = 2\nseed = 3\n").unwrap();
    let out = kms(&["verify", "--config", s(&cfg), "--seed", "9"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["seed"].as_u64(), v["corpus_size"].as_u64()), (Some(9), Some(2)));
}

#[test]
fn decompose_writes_both_parts() {
    let dir = TempDir::new().unwrap();
    let g = GridGeometry::periodic_cube(8, 3.0).unwrap();
    let f = random_band_limited(1, &g, 1, 1.2).unwrap();
    let input = path(&dir, "f.kmsf");
    write_field(&f, &input).unwrap();
    let (d, c) = (path(&dir, "d.kmsf"), path(&dir, "c.kmsf"));
    let out = kms(&["decompose", "--in", s(&input), "--out-div", s(&d), "--out-curl", s(&c)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sum = read_field(&d).unwrap().add(&read_field(&c).unwrap()).unwrap();
    assert!(sum.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs());
}

#[test]
fn non_finite_input_exits_three() {
    let dir = TempDir::new().unwrap();
    let g = GridGeometry::periodic_cube(4, 1.0).unwrap();
    let input = path(&dir, "nan.kmsf");
    write_field(&Field::zeros(g, 3), &input).unwrap();
    let mut bytes = std::fs::read(&input).unwrap();
    let n = bytes.len();
    bytes[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
    std::fs::write(&input, bytes).unwrap();
    let (d, c) = (path(&dir, "d.kmsf"), path(&dir, "c.kmsf"));
    let out = kms(&["decompose", "--in", s(&input), "--out-div", s(&d), "--out-curl", s(&c)]);
    assert_eq!(code(&out), 3);
    assert_one_line_error(&out, "numerical");
}

#[test]
fn extend_reports_tripled_l1() {
    let dir = TempDir::new().unwrap();
    let g = GridGeometry::unit_cube(8).unwrap();
    let phi = SolenoidalSpec::random(2, &g, 1, 0.45).unwrap().sample(&g);
    let input = path(&dir, "phi.kmsf");
    write_field(&phi, &input).unwrap();
    let (ext, rep) = (path(&dir, "ext.kmsf"), path(&dir, "ext.json"));
    for _ in 0..2 {
        let out = kms(&["extend", "--in", s(&input), "--out", s(&ext), "--report", s(&rep)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let v: Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert!((v["l1_ratio"].as_f64().unwrap() - 27.0).abs() < 1e-12);
    assert_eq!(read_field(&ext).unwrap().geometry().dims(), [24; 3]);
}

#[test]
fn counterexample_csv() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "seq.csv");
    let out = kms(&["counterexample", "--operator", "skew", "--ks", "2,4", "--grid", "16", "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("k,grad_norm,op_norm,ratio"));
    assert_eq!(text.lines().count(), 3);
    let out = kms(&["counterexample", "--operator", "sym", "--ks", "2", "--grid", "16"]);
    assert_eq!(code(&out), 1);
}
