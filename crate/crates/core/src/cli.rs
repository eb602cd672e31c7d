//! Command-line front end: `assess`, `enhance`, `train`, `eval`, `predict`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::{
    describe_keys, parse_config, parse_config_str, provenance_csv, Origin, ParsedConfig, CONFIG_ENV,
};
use crate::data::{
    gate_manifest, scan_dataset, stratified_split, ClassLabel, GateDecision, ImageDataset,
    Manifest, ManifestEntry, SplitRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, confusion_matrix, emit_report, ReportFormat};
use crate::model::{
    build_model, evaluate, fit, load_checkpoint, load_checkpoint_for, predict, save_checkpoint,
    ModelState,
};
use crate::preprocess::{
    channel_extract, enhance_pipeline, histogram, is_image_path, load_rgb, resize, rgb_to_lab,
    save_png, to_network_input,
};
use crate::quality::{
    assess_quality, fidelity, fidelity_csv_row, quality_csv_row, FIDELITY_CSV_HEADER,
    QUALITY_CSV_HEADER,
};

/// Exit status when `eval` accuracy falls below `eval.accuracy_floor`.
pub const EXIT_BELOW_FLOOR: i32 = 3;

pub const CHECKPOINT_FILE: &str = "checkpoint.amdnet";
pub const HISTORY_FILE: &str = "history.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Parser)]
#[command(
    name = "amdnet",
    version,
    about = "Fundus image quality gating, enhancement and classification"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides dataset.seed and train.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (at least 1). Kernels currently run sequentially.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every image under DIR and write quality.csv.
    Assess { dir: PathBuf },
    /// Enhance every image under DIR into enhanced/ and write fidelity.csv.
    Enhance {
        dir: PathBuf,
        /// Also write before/after histogram CSVs.
        #[arg(long)]
        histograms: bool,
    },
    /// Gate, split and train on a class-per-directory dataset.
    Train {
        /// Dataset root; overrides dataset.root.
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the recorded test split.
    Eval {
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
    },
    /// Print class probabilities for one image.
    Predict {
        image: PathBuf,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ParsedConfig> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut parsed = match path {
        Some(p) => parse_config(p)?,
        None => parse_config_str("")?,
    };
    if let Some(seed) = cli.seed {
        parsed.config.dataset.seed = seed;
        parsed.config.train.seed = seed;
        parsed.provenance.set("dataset.seed", Origin::Flag);
        parsed.provenance.set("train.seed", Origin::Flag);
    }
    if let Some(dir) = &cli.out_dir {
        parsed.config.output.dir = dir.clone();
        parsed.provenance.set("output.dir", Origin::Flag);
    }
    Ok(parsed)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Image files under `dir`, recursively, in sorted order.
pub fn collect_images(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Precondition(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut out = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                pending.push(path);
            } else if is_image_path(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn relative_name(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn cmd_assess(cfg: &ParsedConfig, dir: &Path) -> Result<i32> {
    let out = &cfg.config.output.dir;
    create_dir(out)?;
    let path = out.join("quality.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(QUALITY_CSV_HEADER)?;
    let (mut accepted, mut total) = (0, 0);
    for img_path in collect_images(dir)? {
        let name = relative_name(dir, &img_path);
        let img = match load_rgb(&img_path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {e}");
                continue;
            }
        };
        let report = assess_quality(&img, &cfg.config.quality);
        accepted += usize::from(report.accepted());
        total += 1;
        w.write_record(quality_csv_row(&name, &report))?;
    }
    flush(w, &path)?;
    println!(
        "{accepted} of {total} images accepted; report at {}",
        path.display()
    );
    Ok(0)
}

fn cmd_enhance(cfg: &ParsedConfig, dir: &Path, histograms: bool) -> Result<i32> {
    let out = &cfg.config.output.dir;
    let enhanced_dir = out.join("enhanced");
    create_dir(&enhanced_dir)?;
    let enhance = cfg.config.enhance_config();
    let path = out.join("fidelity.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(FIDELITY_CSV_HEADER)?;
    let mut count = 0;
    for img_path in collect_images(dir)? {
        let name = relative_name(dir, &img_path);
        let img = match load_rgb(&img_path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {e}");
                continue;
            }
        };
        let result = enhance_pipeline(&img, &enhance)?;
        log::debug!("{name}: {}", result.stages.join(" -> "));
        // Fidelity is measured against the unenhanced lightness channel at
        // the output resolution.
        let n = enhance.output_size;
        let reference = resize(&channel_extract(&rgb_to_lab(&img)?, 0)?, n, n)?;
        let scores = fidelity(&reference, &result.image)?;
        w.write_record(fidelity_csv_row(&name, &scores))?;
        let target = enhanced_dir.join(&name).with_extension("png");
        if let Some(parent) = target.parent() {
            create_dir(parent)?;
        }
        save_png(&result.image, &target)?;
        if histograms {
            let stem = target.with_extension("");
            write_file(
                &stem.with_extension("before.csv"),
                histogram(&reference)?.to_csv(),
            )?;
            write_file(
                &stem.with_extension("after.csv"),
                histogram(&result.image)?.to_csv(),
            )?;
        }
        count += 1;
    }
    flush(w, &path)?;
    println!("enhanced {count} images into {}", enhanced_dir.display());
    Ok(0)
}

fn cmd_train(cfg: &ParsedConfig, data: Option<&Path>) -> Result<i32> {
    let c = &cfg.config;
    let root = data
        .map(Path::to_path_buf)
        .or_else(|| c.dataset.root.clone())
        .ok_or_else(|| Error::Config("no dataset: pass --data or set dataset.root".into()))?;
    let out = &c.output.dir;
    create_dir(out)?;
    write_file(&out.join("config.provenance.csv"), provenance_csv(cfg))?;

    let scan = scan_dataset(&root)?;
    let manifest = gate_manifest(&scan.manifest, &c.quality, c.dataset.include_all)?;
    manifest.write_csv(out.join(MANIFEST_FILE))?;
    let usable = Manifest {
        entries: manifest
            .entries
            .iter()
            .filter(|e| e.decision == GateDecision::Accept || c.dataset.include_all)
            .cloned()
            .collect(),
    };
    let split = stratified_split(&usable, c.dataset.test_fraction, c.dataset.seed)?;
    split.record().write(out.join(SPLIT_FILE))?;
    log::info!(
        "{} train / {} test images after gating",
        split.train.len(),
        split.test.len()
    );

    let enhance = c.enhance_config();
    let train = ImageDataset::from_manifest(&split.train, enhance.clone(), c.augment.clone());
    let test = ImageDataset::from_manifest(&split.test, enhance, c.augment.clone());
    let (mut state, trace) = build_model(&c.model, c.train.seed)?;
    log::info!("model with {} parameters", trace.total_params());
    let validation: Option<&dyn crate::data::BatchSource> = if split.test.is_empty() {
        None
    } else {
        Some(&test)
    };
    let history = fit(&mut state, &train, validation, &c.train)?;
    write_file(&out.join(HISTORY_FILE), history.to_csv())?;
    save_checkpoint(&state, &out.join(CHECKPOINT_FILE))?;
    if let Some(last) = history.epochs.last() {
        println!(
            "trained {} epochs: loss {:.4}, accuracy {:.4}; checkpoint at {}",
            history.epochs.len(),
            last.train_loss,
            last.train_acc,
            out.join(CHECKPOINT_FILE).display()
        );
    }
    Ok(0)
}

fn load_model(cfg: &ParsedConfig, checkpoint: Option<&Path>) -> Result<ModelState> {
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.config.output.dir.join(CHECKPOINT_FILE));
    if !path.exists() {
        return Err(Error::Precondition(format!(
            "checkpoint {} not found",
            path.display()
        )));
    }
    // An explicitly configured model must match the checkpoint; otherwise
    // the checkpoint's own layout is used.
    if cfg.provenance.section_overridden("model") {
        load_checkpoint_for(&path, &cfg.config.model)
    } else {
        load_checkpoint(&path)
    }
}

fn label_from_path(path: &Path) -> Result<ClassLabel> {
    let dir = path
        .parent()
        .and_then(Path::file_name)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    dir.parse()
        .map_err(|_| Error::Validation(format!("cannot infer class of {}", path.display())))
}

fn cmd_eval(cfg: &ParsedConfig, checkpoint: Option<&Path>, split: Option<&Path>) -> Result<i32> {
    let c = &cfg.config;
    let out = &c.output.dir;
    let state = load_model(cfg, checkpoint)?;
    let split_path = split
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join(SPLIT_FILE));
    if !split_path.exists() {
        return Err(Error::Precondition(format!(
            "split file {} not found",
            split_path.display()
        )));
    }
    let record = SplitRecord::read(&split_path)?;
    let entries = record
        .test
        .iter()
        .map(|p| {
            Ok(ManifestEntry {
                path: p.clone(),
                label: label_from_path(p)?,
                decision: GateDecision::Unchecked,
                source: String::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let test = Manifest { entries };
    let mut enhance = c.enhance_config();
    enhance.output_size = state.spec.input_size;
    let dataset = ImageDataset::from_manifest(&test, enhance, c.augment.clone());
    let result = evaluate(&state, &dataset, c.eval.batch_size)?;
    let cm = confusion_matrix(&result.actual, &result.predicted, ClassLabel::names())?;
    let report = compute_metrics(&cm)?;
    create_dir(out)?;
    let text = emit_report(&report, ReportFormat::Text);
    write_file(&out.join("metrics.txt"), &text)?;
    write_file(
        &out.join("metrics.csv"),
        emit_report(&report, ReportFormat::Csv),
    )?;
    let mut matrix = String::from("actual\\predicted,");
    matrix.push_str(&cm.classes.join(","));
    matrix.push('\n');
    for (name, row) in cm.classes.iter().zip(&cm.counts) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        matrix.push_str(&format!("{name},{}\n", cells.join(",")));
    }
    write_file(&out.join("confusion.csv"), matrix)?;
    print!("{text}");
    if report.accuracy < c.eval.accuracy_floor {
        eprintln!(
            "accuracy {:.4} is below the floor {:.4}",
            report.accuracy, c.eval.accuracy_floor
        );
        return Ok(EXIT_BELOW_FLOOR);
    }
    Ok(0)
}

fn cmd_predict(cfg: &ParsedConfig, image: &Path, checkpoint: Option<&Path>) -> Result<i32> {
    let state = load_model(cfg, checkpoint)?;
    let mut enhance = cfg.config.enhance_config();
    enhance.output_size = state.spec.input_size;
    let img = enhance_pipeline(&load_rgb(image)?, &enhance)?.image;
    let prediction = predict(&state, &to_network_input(&[img])?)?;
    println!("class,probability");
    for (class, p) in ClassLabel::ALL.iter().zip(prediction.probabilities.data()) {
        println!("{class},{p:.6}");
    }
    let label = ClassLabel::from_index(prediction.labels[0]).expect("class index in range");
    println!("prediction,{label}");
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command().after_long_help(describe_keys());
    let matches = match command.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return Ok(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = load_config(&cli)?;
    if cli.threads > 1 {
        log::info!("--threads {} requested; running sequentially", cli.threads);
    }
    match &cli.command {
        Command::Assess { dir } => cmd_assess(&cfg, dir),
        Command::Enhance { dir, histograms } => cmd_enhance(&cfg, dir, *histograms),
        Command::Train { data } => cmd_train(&cfg, data.as_deref()),
        Command::Eval { checkpoint, split } => {
            cmd_eval(&cfg, checkpoint.as_deref(), split.as_deref())
        }
        Command::Predict { image, checkpoint } => cmd_predict(&cfg, image, checkpoint.as_deref()),
    }
}
