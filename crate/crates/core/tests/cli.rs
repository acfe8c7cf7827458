use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "scale=0.01\nhidden=16/16\npretrain_epochs=2\nfinetune_epochs=2\nsnr_grid=20:-20:10\n";

fn ssda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssda"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(code(&ssda(d, &[])), 2);
    assert_eq!(code(&ssda(d, &["bogus"])), 2);
    assert_eq!(code(&ssda(d, &["--config", "tiny.cfg", "--arch", "Z", "gen"])), 2);
    assert_eq!(code(&ssda(d, &["--scale", "3", "gen"])), 2);
    assert_eq!(code(&ssda(d, &["--config", "missing.cfg", "gen"])), 2);
    std::fs::write(d.join("bad.cfg"), "no_such_key=1\n").unwrap();
    assert_eq!(code(&ssda(d, &["--config", "bad.cfg", "gen"])), 2);
    assert_eq!(code(&ssda(d, &["--help"])), 0);
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = setup();
    let d = dir.path();
    let out = ssda(
        d,
        &[
            "--config",
            "tiny.cfg",
            "--out",
            "o",
            "eval",
            "--model",
            "nope.ssda",
        ],
    );
    assert_eq!(code(&out), 1);
    std::fs::write(d.join("junk.bin"), b"JUNKJUNK").unwrap();
    assert_eq!(code(&ssda(d, &["inspect", "junk.bin"])), 1);
}

#[test]
fn gen_is_reproducible_and_seed_sensitive() {
    let dir = setup();
    let d = dir.path();
    for out in ["a", "b"] {
        assert_eq!(code(&ssda(d, &["--config", "tiny.cfg", "--out", out, "gen"])), 0);
    }
    assert_eq!(
        code(&ssda(
            d,
            &["--config", "tiny.cfg", "--seed", "9", "--out", "c", "gen"]
        )),
        0
    );
    assert_eq!(read(d, "a/train.iqd"), read(d, "b/train.iqd"));
    assert_eq!(read(d, "a/test.iqd"), read(d, "b/test.iqd"));
    assert_ne!(read(d, "a/train.iqd"), read(d, "c/train.iqd"));
    assert_eq!(read(d, "a/train.iqd").len(), read(d, "c/train.iqd").len());
    let meta = String::from_utf8(read(d, "a/train.iqd.meta")).unwrap();
    assert!(meta.contains("split=train"));
    assert!(meta.contains("count=600"));
    assert!(meta.contains("count.OFDM=100"));
    let log = String::from_utf8(read(d, "a/gen.provenance.log")).unwrap();
    assert!(log.contains("seed=0"));
    assert!(log.contains("scale=0.01"));
    assert!(log.contains("rng=ChaCha8Rng"));
}

#[test]
fn full_workflow() {
    let dir = setup();
    let d = dir.path();
    let base = ["--config", "tiny.cfg", "--out", "o"];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        let out = ssda(d, &args);
        assert_eq!(
            code(&out),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    run(&["gen"]);
    let train = run(&["--arch", "d", "train"]);
    assert!(train.contains("pretrain layer 2 epoch 1"));
    assert!(train.contains("finetune epoch 1"));
    assert!(train.contains("clean test P_cc"));
    assert!(d.join("o/model_d.ssda").exists());

    run(&["eval", "--model", "o/model_d.ssda"]);
    let metrics = String::from_utf8(read(d, "o/metrics_clean.csv")).unwrap();
    assert!(metrics.starts_with("snr_db,pcc,accuracy,precision_OOK,sensitivity_OOK"));
    assert_eq!(metrics.lines().count(), 2);
    let confusion = String::from_utf8(read(d, "o/confusion_clean.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 7);

    run(&["--snr", "0", "eval", "--model", "o/model_d.ssda"]);
    let first = read(d, "o/metrics_snr0.csv");
    run(&["--snr", "0", "eval", "--model", "o/model_d.ssda"]);
    assert_eq!(first, read(d, "o/metrics_snr0.csv"));

    run(&["sweep", "--model", "o/model_d.ssda"]);
    let sweep = String::from_utf8(read(d, "o/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 5);
    // the 0 dB sweep row uses the same noise stream as `eval --snr 0`
    let eval_row = String::from_utf8(first)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(sweep.lines().any(|l| l == eval_row));

    run(&["export-rf", "--model", "o/model_d.ssda", "--layer", "2"]);
    let rf = String::from_utf8(read(d, "o/rf_layer2.csv")).unwrap();
    assert_eq!(rf.lines().count(), 1 + 16);
    assert!(read(d, "o/rf_layer2.pgm").starts_with(b"P5\n"));
    let out = ssda(
        d,
        &[
            "--out",
            "o",
            "export-rf",
            "--model",
            "o/model_d.ssda",
            "--layer",
            "3",
        ],
    );
    assert_eq!(code(&out), 1);

    let inspect = run(&["inspect", "o/model_d.ssda"]);
    assert!(inspect.contains("hidden: 16/16"));
    assert!(inspect.contains("arch.name: D"));
    let inspect = run(&["inspect", "o/test.iqd"]);
    assert!(inspect.contains("vectors: 96"));
}

#[test]
fn mismatched_dimensions_fail() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("short.cfg"), format!("{TINY}samples_per_vector=50\n")).unwrap();
    assert_eq!(code(&ssda(d, &["--config", "tiny.cfg", "--out", "o", "gen"])), 0);
    assert_eq!(code(&ssda(d, &["--config", "short.cfg", "--out", "s", "gen"])), 0);
    assert_eq!(
        code(&ssda(
            d,
            &["--config", "tiny.cfg", "--out", "o", "--arch", "a", "train"]
        )),
        0
    );
    let out = ssda(
        d,
        &[
            "--config",
            "tiny.cfg",
            "--out",
            "o",
            "eval",
            "--model",
            "o/model_a.ssda",
            "--data",
            "s/test.iqd",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}
