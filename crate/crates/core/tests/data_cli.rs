mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use amdnet::data::*;
use amdnet::synthetic::write_synthetic_dataset;
use amdnet::Error;

fn amdnet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_amdnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("AMDNET_CONFIG")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_finds_every_class() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic_dataset(tmp.path(), 5, 64, 1).unwrap();
    let report = scan_dataset(tmp.path()).unwrap();
    assert_eq!(report.manifest.len(), 20);
    assert_eq!(report.manifest.class_counts(), [5; 4]);
    assert!(report.skipped.is_empty() && report.empty_classes.is_empty());

    let csv = tmp.path().join("m.csv");
    report.manifest.write_csv(&csv).unwrap();
    assert_eq!(Manifest::read_csv(&csv).unwrap(), report.manifest);
}

#[test]
fn scan_rejects_unknown_class_directories() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic_dataset(tmp.path(), 1, 32, 1).unwrap();
    fs::create_dir(tmp.path().join("Glaucoma")).unwrap();
    match scan_dataset(tmp.path()) {
        Err(Error::UnknownClasses { names, .. }) => assert_eq!(names, ["Glaucoma"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn split_is_stratified_and_reproducible() {
    let manifest = common::synthetic_manifest(500);
    let a = stratified_split(&manifest, 0.2, 7).unwrap();
    assert_eq!(a.test.class_counts(), [100; 4]);
    assert_eq!(a.train.class_counts(), [400; 4]);
    let b = stratified_split(&manifest, 0.2, 7).unwrap();
    assert_eq!(a.record(), b.record());
    let c = stratified_split(&manifest, 0.2, 8).unwrap();
    assert_ne!(a.record(), c.record());
    assert!(stratified_split(&manifest, 1.0, 7).is_err());
}

#[test]
fn batches_cover_every_sample_once() {
    let order = batch_order(70, 32, 3, 0);
    assert_eq!(order.iter().map(Vec::len).collect::<Vec<_>>(), [32, 32, 6]);
    let mut all: Vec<usize> = order.concat();
    all.sort_unstable();
    assert_eq!(all, (0..70).collect::<Vec<_>>());
    assert_ne!(order, batch_order(70, 32, 3, 1));
    assert_eq!(order, batch_order(70, 32, 3, 0));
}

#[test]
fn cli_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synthetic_dataset(&data, 4, 256, 5).unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, common::SMALL_RUN_TOML).unwrap();
    let out = tmp.path().join("out");
    let base = ["--config", s(&config), "--out-dir", s(&out)];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        amdnet(&args)
    };

    let o = run(&["assess", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let quality = fs::read_to_string(out.join("quality.csv")).unwrap();
    assert_eq!(quality.lines().count(), 17);

    let o = run(&["enhance", s(&data), "--histograms"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("fidelity.csv"))
            .unwrap()
            .lines()
            .count(),
        17
    );
    let written: usize = fs::read_dir(out.join("enhanced"))
        .unwrap()
        .map(|class| fs::read_dir(class.unwrap().path()).unwrap().count())
        .sum();
    assert_eq!(written, 16 * 3);

    let o = run(&["train", "--data", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "history.csv",
        "checkpoint.amdnet",
        "split.json",
        "manifest.csv",
        "config.provenance.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = run(&["eval"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let parsed = amdnet::metrics::parse_report_csv(&metrics).unwrap();
    assert!((0.0..=1.0).contains(&parsed.accuracy));
    assert!(out.join("confusion.csv").exists());

    let image = data.join("AMD").join("amd_0000.png");
    let o = run(&["predict", s(&image)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let total: f64 = stdout
        .lines()
        .filter(|l| !l.starts_with("prediction") && !l.starts_with("class"))
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-6, "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("prediction,")));
}

#[test]
fn cli_accuracy_floor_sets_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synthetic_dataset(&data, 4, 256, 6).unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        format!("{}\n[eval]\naccuracy_floor = 1.0\n", common::SMALL_RUN_TOML),
    )
    .unwrap();
    let out = tmp.path().join("out");
    let base = ["--config", s(&config), "--out-dir", s(&out)];
    assert!(
        amdnet(&[&base[..], &["train", "--data", s(&data)]].concat())
            .status
            .success()
    );
    let o = amdnet(&[&base[..], &["eval"]].concat());
    assert_eq!(o.status.code(), Some(amdnet::cli::EXIT_BELOW_FLOOR));
}

#[test]
fn cli_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[train]\nbatch_size = 0\n").unwrap();
    assert!(!amdnet(&["--config", s(&config), "assess", s(tmp.path())])
        .status
        .success());
    fs::write(&config, "[train]\nunknown_key = 1\n").unwrap();
    assert!(!amdnet(&["--config", s(&config), "assess", s(tmp.path())])
        .status
        .success());
    assert_eq!(
        amdnet(&["--threads", "0", "assess", "."]).status.code(),
        Some(2)
    );
    assert!(amdnet(&["--help"]).status.success());
}

#[test]
fn cli_train_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_synthetic_dataset(&data, 4, 256, 9).unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, common::SMALL_RUN_TOML).unwrap();
    let mut seen = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let code = common::run_cli(&[
            "--config",
            s(&config),
            "--seed",
            "5",
            "--out-dir",
            s(&out),
            "train",
            "--data",
            s(&data),
        ]);
        assert_eq!(code, 0);
        seen.push((
            fs::read(out.join("history.csv")).unwrap(),
            fs::read(out.join("checkpoint.amdnet")).unwrap(),
        ));
    }
    assert_eq!(seen[0], seen[1]);
}
