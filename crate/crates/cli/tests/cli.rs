//! End-to-end tests of the command-line binary: exit codes, config
//! precedence, artifact production, and bit-exact reruns, all on a tiny
//! synthetic dataset written in the standard IDX layout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use tempfile::TempDir;

// ---------------------------------------------------------------------------
// Synthetic IDX dataset
// ---------------------------------------------------------------------------

const SIDE: usize = 28;

/// A 12x12 bright block whose corner depends on the class, with a little
/// per-sample intensity variation so images are not identical.
fn synth_image(digit: u8, i: usize) -> Vec<u8> {
    let mut px = vec![0u8; SIDE * SIDE];
    let (r0, c0) = if digit == 0 { (3, 3) } else { (13, 13) };
    for r in 0..12 {
        for c in 0..12 {
            px[(r0 + r) * SIDE + (c0 + c)] = 140 + ((i * 13 + r * 5 + c * 3) % 100) as u8;
        }
    }
    px
}

fn idx_images(images: &[Vec<u8>]) -> Vec<u8> {
    let mut v = Vec::new();
    v.extend_from_slice(&2051u32.to_be_bytes());
    v.extend_from_slice(&(images.len() as u32).to_be_bytes());
    v.extend_from_slice(&(SIDE as u32).to_be_bytes());
    v.extend_from_slice(&(SIDE as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.len(), SIDE * SIDE);
        v.extend_from_slice(img);
    }
    v
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut v = Vec::new();
    v.extend_from_slice(&2049u32.to_be_bytes());
    v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    v.extend_from_slice(labels);
    v
}

fn write_dataset(dir: &Path, train: &[(Vec<u8>, u8)], test: &[(Vec<u8>, u8)]) {
    let split = |pairs: &[(Vec<u8>, u8)]| {
        let images: Vec<Vec<u8>> = pairs.iter().map(|(im, _)| im.clone()).collect();
        let labels: Vec<u8> = pairs.iter().map(|&(_, l)| l).collect();
        (idx_images(&images), idx_labels(&labels))
    };
    let (ti, tl) = split(train);
    let (vi, vl) = split(test);
    fs::write(dir.join("train-images-idx3-ubyte"), ti).unwrap();
    fs::write(dir.join("train-labels-idx1-ubyte"), tl).unwrap();
    fs::write(dir.join("t10k-images-idx3-ubyte"), vi).unwrap();
    fs::write(dir.join("t10k-labels-idx1-ubyte"), vl).unwrap();
}

/// Shared two-class dataset: 12 training and 6 test images of digits 0/1.
fn data_dir() -> &'static Path {
    static DATA: OnceLock<TempDir> = OnceLock::new();
    DATA.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        let train: Vec<(Vec<u8>, u8)> = (0..12)
            .map(|i| {
                let digit = (i % 2) as u8;
                (synth_image(digit, i), digit)
            })
            .collect();
        let test: Vec<(Vec<u8>, u8)> = (0..6)
            .map(|i| {
                let digit = (i % 2) as u8;
                (synth_image(digit, i + 50), digit)
            })
            .collect();
        write_dataset(d.path(), &train, &test);
        d
    })
    .path()
}

// ---------------------------------------------------------------------------
// Process driver
// ---------------------------------------------------------------------------

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_env(cwd: &Path, args: &[&str], envs: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spikegan"));
    cmd.args(args).current_dir(cwd).env_remove("SPIKEGAN_DATA");
    for &(k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary should run");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn spikegan(cwd: &Path, args: &[&str]) -> Run {
    run_env(cwd, args, &[])
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// One quick classifier training run shared by the tests that need a
/// checkpoint. Returns the run directory holding `model.ckpt`.
fn trained_model_dir() -> &'static Path {
    static MODEL: OnceLock<TempDir> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let d = tempfile::tempdir().unwrap();
            let out = d.path().join("clf");
            let r = spikegan(
                d.path(),
                &[
                    "train-classifier",
                    "--data",
                    &s(data_dir()),
                    "--out",
                    &s(&out),
                    "--arch",
                    "784,6,2",
                    "--tmax",
                    "64",
                    "--epochs",
                    "1",
                    "--filters",
                    "4",
                    "--filter-columns",
                    "2",
                    "--image-format",
                    "pgm",
                ],
            );
            assert_eq!(r.code, 0, "training fixture failed: {}", r.stderr);
            d
        })
        .path()
}

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

#[test]
fn missing_data_dir_is_a_usage_error_naming_every_source() {
    let tmp = tempfile::tempdir().unwrap();
    let r = spikegan(
        tmp.path(),
        &["coding-report", "--data", "/no/such/dir/anywhere"],
    );
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("--data"), "stderr: {}", r.stderr);
    assert!(r.stderr.contains("SPIKEGAN_DATA"), "stderr: {}", r.stderr);
}

#[test]
fn corrupt_idx_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("train-images-idx3-ubyte"), b"not idx at all").unwrap();
    fs::write(tmp.path().join("train-labels-idx1-ubyte"), idx_labels(&[0])).unwrap();
    fs::write(
        tmp.path().join("t10k-images-idx3-ubyte"),
        idx_images(&[synth_image(0, 0)]),
    )
    .unwrap();
    fs::write(tmp.path().join("t10k-labels-idx1-ubyte"), idx_labels(&[0])).unwrap();
    let r = spikegan(tmp.path(), &["coding-report", "--data", &s(tmp.path())]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
}

#[test]
fn unknown_config_file_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "epohcs = 9\n").unwrap();
    let r = spikegan(
        tmp.path(),
        &[
            "coding-report",
            "--config",
            &s(&cfg),
            "--data",
            &s(data_dir()),
        ],
    );
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("epohcs"), "stderr: {}", r.stderr);
}

#[test]
fn malformed_config_line_is_rejected_with_its_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "seed = 3\nthis line has no equals sign\n").unwrap();
    let r = spikegan(
        tmp.path(),
        &[
            "coding-report",
            "--config",
            &s(&cfg),
            "--data",
            &s(data_dir()),
        ],
    );
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains(":2"), "stderr: {}", r.stderr);
}

#[test]
fn train_gan_requires_a_digit() {
    let tmp = tempfile::tempdir().unwrap();
    let r = spikegan(tmp.path(), &["train-gan", "--data", &s(data_dir())]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("digit"), "stderr: {}", r.stderr);
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let r = spikegan(
        tmp.path(),
        &["coding-report", "--threads", "0", "--data", &s(data_dir())],
    );
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("threads"), "stderr: {}", r.stderr);
}

#[test]
fn missing_checkpoint_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let r = spikegan(
        tmp.path(),
        &[
            "eval",
            "--model",
            "/no/such/model.ckpt",
            "--data",
            &s(data_dir()),
        ],
    );
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
}

#[test]
fn bad_split_is_a_usage_error() {
    let model = trained_model_dir().join("clf/model.ckpt");
    let tmp = tempfile::tempdir().unwrap();
    let r = spikegan(
        tmp.path(),
        &[
            "eval",
            "--model",
            &s(&model),
            "--data",
            &s(data_dir()),
            "--split",
            "validation",
        ],
    );
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("split"), "stderr: {}", r.stderr);
}

// ---------------------------------------------------------------------------
// Config precedence and artifacts
// ---------------------------------------------------------------------------

#[test]
fn flags_beat_config_file_beats_defaults_and_manifest_records_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(
        &cfg,
        "# training settings\nepochs = 2\nlr = 0.05\narch = 784,6,2\n",
    )
    .unwrap();
    let out = tmp.path().join("run");
    let r = spikegan(
        tmp.path(),
        &[
            "train-classifier",
            "--config",
            &s(&cfg),
            "--data",
            &s(data_dir()),
            "--out",
            &s(&out),
            "--tmax",
            "64",
            "--epochs",
            "1",
            "--filters",
            "0",
        ],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("accuracy"), "stdout: {}", r.stdout);

    for f in ["model.ckpt", "epochs.csv", "summary.csv", "per-digit.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing artifact {f}");
    }
    assert!(!out.join("filters.pgm").exists());
    assert!(!out.join("filters.png").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let conf = &manifest["config"];
    assert_eq!(conf["epochs"], "1", "flag beats file");
    assert_eq!(conf["lr"], "0.05", "file beats default");
    assert_eq!(conf["arch"], "784,6,2", "file beats default");
    assert_eq!(conf["seed"], "7", "documented default seed");
    assert_eq!(conf["threads"], "1", "default is single-threaded");
    assert_eq!(manifest["command"], "train-classifier");
    assert!(manifest["versions"]["spikegan"].is_string());

    // One header line plus exactly one epoch row.
    let epochs = fs::read_to_string(out.join("epochs.csv")).unwrap();
    assert_eq!(epochs.trim_end().lines().count(), 2, "{epochs}");
}

#[test]
fn training_rerun_with_same_settings_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "train-classifier".to_string(),
            "--data".into(),
            s(data_dir()),
            "--out".into(),
            s(out),
            "--arch".into(),
            "784,6,2".into(),
            "--tmax".into(),
            "64".into(),
            "--epochs".into(),
            "1".into(),
            "--filters".into(),
            "0".into(),
        ]
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let argv: Vec<String> = args(out);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let r = spikegan(tmp.path(), &argv);
        assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    }
    for f in ["model.ckpt", "epochs.csv", "summary.csv", "per-digit.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }
}

#[test]
fn eval_reads_back_a_trained_checkpoint_and_writes_csvs() {
    let model = trained_model_dir().join("clf/model.ckpt");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("report");
    let r = spikegan(
        tmp.path(),
        &[
            "eval",
            "--model",
            &s(&model),
            "--data",
            &s(data_dir()),
            "--split",
            "test",
            "--out",
            &s(&out),
        ],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("accuracy"), "stdout: {}", r.stdout);
    assert!(r.stdout.contains("mean decision time"));
    for f in ["summary.csv", "per-digit.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing artifact {f}");
    }
}

#[test]
fn coding_report_honours_the_data_env_var() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("coding");
    let r = run_env(
        tmp.path(),
        &["coding-report", "--limit", "4", "--out", &s(&out)],
        &[("SPIKEGAN_DATA", &s(data_dir()))],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("first-spike"), "stdout: {}", r.stdout);
    assert!(out.join("coding.csv").is_file());
    assert!(out.join("manifest.json").is_file());

    // First-spike coding emits exactly one spike per pixel.
    let csv = fs::read_to_string(out.join("coding.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let ttfs: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(ttfs, 784.0, "{csv}");
}

// ---------------------------------------------------------------------------
// Adversarial training and sampling
// ---------------------------------------------------------------------------

#[test]
fn gan_smoke_run_trains_samples_and_reruns_bit_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gan");
    let r = spikegan(
        tmp.path(),
        &[
            "train-gan",
            "--digit",
            "0",
            "--data",
            &s(data_dir()),
            "--out",
            &s(&out),
            "--tmax",
            "64",
            "--noise-dim",
            "4",
            "--g-hidden",
            "8",
            "--d-hidden",
            "6",
            "--epochs",
            "2",
            "--checkpoint-every",
            "0",
            "--grid-samples",
            "4",
            "--grid-columns",
            "2",
            "--train-limit",
            "4",
        ],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("losses"), "stdout: {}", r.stdout);
    for f in [
        "manifest.json",
        "losses.csv",
        "gan-epoch-000.ckpt",
        "gan-epoch-002.ckpt",
        "samples-epoch-000.pgm",
        "samples-epoch-002.png",
    ] {
        assert!(out.join(f).is_file(), "missing artifact {f}");
    }
    assert!(!out.join("gan-epoch-001.ckpt").exists());

    // Sampling the final checkpoint twice into the same directory must
    // reproduce every byte.
    let model = out.join("gan-epoch-002.ckpt");
    let gen_out = tmp.path().join("generated");
    let gen_args = [
        "generate",
        "--model",
        &s(&model),
        "--out",
        &s(&gen_out),
        "-n",
        "8",
        "--columns",
        "4",
    ];
    let r1 = spikegan(tmp.path(), &gen_args);
    assert_eq!(r1.code, 0, "stderr: {}", r1.stderr);
    assert!(
        r1.stdout.contains("discriminator votes real"),
        "stdout: {}",
        r1.stdout
    );
    let first: Vec<(PathBuf, Vec<u8>)> = ["samples.pgm", "samples.png", "manifest.json"]
        .iter()
        .map(|f| {
            let p = gen_out.join(f);
            let bytes = fs::read(&p).expect(f);
            (p, bytes)
        })
        .collect();

    let r2 = spikegan(tmp.path(), &gen_args);
    assert_eq!(r2.code, 0, "stderr: {}", r2.stderr);
    assert_eq!(r1.stdout, r2.stdout, "sampling reports must match");
    for (p, bytes) in &first {
        assert_eq!(
            &fs::read(p).unwrap(),
            bytes,
            "{} differs after rerun",
            p.display()
        );
    }
}

#[test]
fn f32_precision_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run32");
    let r = spikegan(
        tmp.path(),
        &[
            "train-classifier",
            "--precision",
            "f32",
            "--data",
            &s(data_dir()),
            "--out",
            &s(&out),
            "--arch",
            "784,6,2",
            "--tmax",
            "64",
            "--epochs",
            "1",
            "--filters",
            "0",
        ],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(out.join("model.ckpt").is_file());

    // Checkpoints store weights at full width, so a 32-bit training run
    // is readable at either evaluation precision.
    let tmp2 = tempfile::tempdir().unwrap();
    let model = s(&out.join("model.ckpt"));
    let data = s(data_dir());
    for extra in [&[][..], &["--precision", "f32"][..]] {
        let mut args = vec!["eval"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--model", &model, "--data", &data]);
        let r = spikegan(tmp2.path(), &args);
        assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    }
}
