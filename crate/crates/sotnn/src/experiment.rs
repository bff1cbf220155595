//! Subcommand implementations. Each `cmd_*` takes a validated config and
//! writes its artifacts under `config.out_dir`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sotnn_core::analog::CrossbarLayer;
use sotnn_core::arch::{power_area_report, MlpPipeline, PowerAreaReport, SpeedupReport};
use sotnn_core::data::{normalize, parse_idx_images, Dataset, Split};
use sotnn_core::train::{
    argmax, evaluate_network, evaluate_pipeline, map_to_crossbar, predict, EpochMetrics, Evaluation, Metrics,
    StudentView, TeacherNet, Trainer,
};

use crate::checkpoint::{Checkpoint, LoadedCheckpoint};
use crate::config::{ExperimentConfig, KEYS};
use crate::files::{csv_bytes, load_mnist, metrics_csv, read_maybe_gz, write_atomic};
use crate::report::{HardwareReport, RunReport, REPORT_SCHEMA};
use crate::CliError;

pub const ORACLE_CSV: &str = "metrics_oracle.csv";
pub const CROSSBAR_CSV: &str = "metrics_crossbar.csv";
pub const CHECKPOINT_JSON: &str = "checkpoint.json";
pub const REPORT_JSON: &str = "report.json";
pub const CONFIG_ECHO: &str = "config_echo.toml";
pub const VTC_CSV: &str = "vtc.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const HARDWARE_JSON: &str = "hardware.json";

pub const SWEEP_HEADER: [&str; 5] = ["param", "value", "oracle_test_acc", "crossbar_test_acc", "gap"];
pub const VTC_HEADER: [&str; 2] = ["v_in", "v_out"];

/// Crossbar pipeline with the configured device, read voltage and neuron.
pub fn build_pipeline(cfg: &ExperimentConfig) -> Result<MlpPipeline, CliError> {
    let device = cfg.device_params()?;
    let neuron = cfg.neuron()?;
    let layers = cfg
        .topology
        .windows(2)
        .map(|w| CrossbarLayer::new(device, w[0], w[1], cfg.read_voltage, cfg.nonideal)?.with_neuron(neuron))
        .collect::<sotnn_core::Result<Vec<_>>>()?;
    Ok(MlpPipeline::new(layers)?)
}

/// MNIST from `cfg.data_dir`, truncated to the configured limits.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let mut data = load_mnist(&cfg.data_dir)?;
    if cfg.train_limit > 0 && cfg.train_limit < data.train.len() {
        data.train = data.train.head(cfg.train_limit);
    }
    if cfg.test_limit > 0 && cfg.test_limit < data.test.len() {
        data.test = data.test.head(cfg.test_limit);
    }
    Ok(data)
}

fn deploy(cfg: &ExperimentConfig, student: &StudentView) -> Result<MlpPipeline, CliError> {
    let mut pipeline = build_pipeline(cfg)?;
    map_to_crossbar(student, &mut pipeline)?;
    Ok(pipeline)
}

/// Splits off the last `fraction` of `train` as a validation set.
pub fn split_validation(train: &Split, fraction: f64) -> Result<(Split, Option<Split>), CliError> {
    let len = train.len();
    let n_val = (len as f64 * fraction).round() as usize;
    if n_val == 0 {
        return Ok((train.clone(), None));
    }
    if n_val >= len {
        return Err(CliError::Config(format!(
            "train.validation_fraction {fraction} leaves no training images out of {len}"
        )));
    }
    let fit: Vec<usize> = (0..len - n_val).collect();
    let val: Vec<usize> = (len - n_val..len).collect();
    Ok((train.select(&fit), Some(train.select(&val))))
}

/// The epoch whose student is deployed.
#[derive(Debug, Clone)]
pub struct Selected {
    pub epoch: usize,
    /// `None` when no validation split was held out.
    pub validation_acc: Option<f64>,
    pub teacher: TeacherNet,
    pub oracle: Evaluation,
    pub crossbar: Evaluation,
    /// Programmed with the selected student; its counter covers one pass
    /// over the test split.
    pub pipeline: MlpPipeline,
}

/// In-memory result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub oracle: Metrics,
    pub crossbar: Metrics,
    /// `None` only when no epochs ran.
    pub selected: Option<Selected>,
    pub trainer: Trainer,
}

impl TrainOutcome {
    /// Teacher and student that get deployed and checkpointed.
    pub fn deployed(&self) -> (TeacherNet, StudentView, usize) {
        match &self.selected {
            Some(s) => (
                s.teacher.clone(),
                s.teacher.binarize_deterministic(self.trainer.config().delta_b),
                s.epoch,
            ),
            None => (self.trainer.teacher().clone(), self.trainer.student(), 0),
        }
    }
}

/// Trains and evaluates without touching the filesystem. `progress`
/// receives the oracle and crossbar rows after every epoch.
///
/// Training uses the head of `data.train`; its tail
/// (`cfg.validation_fraction`) picks the deployed epoch, latest epoch on
/// ties. Without a validation split the last epoch is deployed.
pub fn run_training(
    cfg: &ExperimentConfig,
    data: &Dataset,
    mut progress: impl FnMut(&EpochMetrics, &EpochMetrics),
) -> Result<TrainOutcome, CliError> {
    if cfg.topology.first() != Some(&data.train.inputs().cols()) {
        return Err(CliError::Config(format!(
            "model.topology {:?} does not take {}-pixel images",
            cfg.topology,
            data.train.inputs().cols()
        )));
    }
    let (fit, val) = split_validation(&data.train, cfg.validation_fraction)?;
    let mut trainer = Trainer::new(&cfg.topology, cfg.train_config())?;
    let mut oracle = Metrics::default();
    let mut crossbar = Metrics::default();
    let mut selected: Option<Selected> = None;
    for _ in 0..cfg.epochs {
        let o = trainer.train_epoch(&fit, &data.test)?;
        let student = trainer.student();
        let pipeline = deploy(cfg, &student)?;
        let train_acc = if cfg.crossbar_train {
            evaluate_pipeline(&pipeline.clone(), &fit)?.accuracy
        } else {
            f64::NAN
        };
        let test = evaluate_pipeline(&pipeline, &data.test)?;
        let c = EpochMetrics {
            epoch: o.epoch,
            train_acc,
            test_acc: test.accuracy,
            mean_loss: test.mean_loss,
        };
        progress(&o, &c);
        oracle.epochs.push(o);
        crossbar.epochs.push(c);

        let validation_acc = match &val {
            Some(v) => Some(evaluate_network(student.network(), v)?.accuracy),
            None => None,
        };
        let better = match (&selected, validation_acc) {
            (Some(best), Some(acc)) => acc >= best.validation_acc.unwrap_or(f64::NEG_INFINITY),
            _ => true,
        };
        if better {
            selected = Some(Selected {
                epoch: o.epoch,
                validation_acc,
                teacher: trainer.teacher().clone(),
                oracle: evaluate_network(student.network(), &data.test)?,
                crossbar: test,
                pipeline,
            });
        }
    }
    if let Some(s) = &selected {
        oracle.confusion = Some(s.oracle.confusion.clone());
        crossbar.confusion = Some(s.crossbar.confusion.clone());
    }
    Ok(TrainOutcome {
        oracle,
        crossbar,
        selected,
        trainer,
    })
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", cfg.out_dir.display())))?;
    Ok(cfg.out_dir.join(name))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn power_area(cfg: &ExperimentConfig, p: &MlpPipeline) -> PowerAreaReport {
    power_area_report(p, cfg.neuron_power_w, cfg.neuron_area_m2())
}

/// `sotnn train`: writes both metric series, the checkpoint, the report and
/// the config echo.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    progress: impl FnMut(&EpochMetrics, &EpochMetrics),
) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let data = load_dataset(cfg)?;
    let outcome = run_training(cfg, &data, progress)?;

    let echo = cfg.to_echo();
    let (teacher, student, _) = outcome.deployed();
    let pipeline = match &outcome.selected {
        Some(s) => s.pipeline.clone(),
        None => deploy(cfg, &student)?,
    };
    let cycles = pipeline.counter().snapshot();
    let sel = outcome.selected.as_ref();
    let report = RunReport {
        schema_version: REPORT_SCHEMA,
        seed: cfg.seed,
        topology: cfg.topology.clone(),
        nonideal: cfg.nonideal,
        selected_epoch: sel.map(|s| s.epoch),
        validation_acc: sel.and_then(|s| s.validation_acc),
        oracle_test_acc: sel.map(|s| s.oracle.accuracy),
        crossbar_test_acc: sel.map(|s| s.crossbar.accuracy),
        accuracy_gap: sel.map(|s| s.oracle.accuracy - s.crossbar.accuracy),
        oracle: outcome.oracle,
        crossbar: outcome.crossbar,
        cycles,
        power_area: power_area(cfg, &pipeline),
        speedup: SpeedupReport::new(cycles.inference_cycles, cfg.gpu_cycles_per_image),
        config_echo: echo.clone(),
        duration_s: start.elapsed().as_secs_f64(),
    };

    write_atomic(&out_path(cfg, ORACLE_CSV)?, &metrics_csv(&report.oracle.epochs)?)?;
    write_atomic(&out_path(cfg, CROSSBAR_CSV)?, &metrics_csv(&report.crossbar.epochs)?)?;
    Checkpoint::new(&teacher, &student, cfg.delta_b).save(&out_path(cfg, CHECKPOINT_JSON)?)?;
    write_atomic(&out_path(cfg, CONFIG_ECHO)?, echo.as_bytes())?;
    write_atomic(&out_path(cfg, REPORT_JSON)?, &json(&report)?)?;
    Ok(report)
}

/// Where `sotnn infer` takes its images from.
#[derive(Debug, Clone)]
pub enum InferSource {
    /// `count` consecutive MNIST test images starting at `index`.
    TestSplit { index: usize, count: usize },
    /// An IDX image file (optionally gzipped); every image in it is used.
    ImageFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// Test-split index, or position within the image file.
    pub index: usize,
    pub class: usize,
    pub oracle_class: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    pub activations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferReport {
    pub schema_version: u32,
    pub predictions: Vec<Prediction>,
    pub cycles_crossbar: u64,
    pub cycles_gpu: u64,
    pub speedup: f64,
}

fn image_file_split(path: &Path) -> Result<Split, CliError> {
    let bytes = read_maybe_gz(path)?;
    let images = parse_idx_images(&bytes).map_err(|e| CliError::data(path, e))?;
    let count = images.count;
    Ok(Split::new(normalize(&images), vec![0; count])?)
}

/// `sotnn infer`: classifies images with the checkpointed student mapped
/// onto a fresh crossbar.
pub fn cmd_infer(cfg: &ExperimentConfig, checkpoint: &Path, source: &InferSource) -> Result<InferReport, CliError> {
    let LoadedCheckpoint { student, .. } = Checkpoint::load(checkpoint)?;
    let mut cfg = cfg.clone();
    cfg.topology = student.network().topology();
    let pipeline = deploy(&cfg, &student)?;
    let before = pipeline.counter().inference_cycles();

    let (split, first, labelled) = match source {
        InferSource::TestSplit { index, count } => {
            let test = load_mnist(&cfg.data_dir)?.test;
            let end = index
                .checked_add(*count)
                .filter(|&e| e <= test.len() && *count > 0)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "images {index}..{index}+{count} outside the {}-image test split",
                        test.len()
                    ))
                })?;
            (test.select(&(*index..end).collect::<Vec<_>>()), *index, true)
        }
        InferSource::ImageFile(path) => (image_file_split(path)?, 0, false),
    };
    if split.inputs().cols() != cfg.topology[0] {
        return Err(CliError::Config(format!(
            "checkpoint expects {} inputs, images have {}",
            cfg.topology[0],
            split.inputs().cols()
        )));
    }

    let (outputs, _) = pipeline.infer_batch(split.inputs())?;
    let mut predictions = Vec::with_capacity(split.len());
    for i in 0..split.len() {
        let activations = outputs.row(i).to_vec();
        let oracle = predict(student.network(), split.input(i))?;
        predictions.push(Prediction {
            index: first + i,
            class: argmax(&activations),
            oracle_class: argmax(&oracle),
            label: labelled.then(|| split.labels()[i]),
            activations,
        });
    }
    let cycles = pipeline.counter().inference_cycles() - before;
    let speedup = SpeedupReport::new(cycles, cfg.gpu_cycles_per_image);
    Ok(InferReport {
        schema_version: REPORT_SCHEMA,
        predictions,
        cycles_crossbar: speedup.crossbar_cycles,
        cycles_gpu: speedup.gpu_cycles,
        speedup: speedup.speedup,
    })
}

/// `(v_in, v_out)` samples of the divider neuron from `from` to `to`.
pub fn vtc_points(cfg: &ExperimentConfig, from: f64, to: f64, points: usize) -> Result<Vec<(f64, f64)>, CliError> {
    if points < 2 {
        return Err(CliError::Config(format!("need at least 2 points, got {points}")));
    }
    if !(from.is_finite() && to.is_finite() && from < to) {
        return Err(CliError::Config(format!("invalid sweep range {from}..{to}")));
    }
    let neuron = cfg.neuron()?;
    let step = (to - from) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let v_in = if i == points - 1 { to } else { from + step * i as f64 };
            (v_in, neuron.vtc_divider(v_in).1)
        })
        .collect())
}

/// `sotnn export-vtc`. Returns the path written.
pub fn cmd_export_vtc(cfg: &ExperimentConfig, from: f64, to: f64, points: usize) -> Result<PathBuf, CliError> {
    let rows: Vec<Vec<String>> = vtc_points(cfg, from, to, points)?
        .into_iter()
        .map(|(a, b)| vec![a.to_string(), b.to_string()])
        .collect();
    let path = out_path(cfg, VTC_CSV)?;
    write_atomic(&path, &csv_bytes(&VTC_HEADER, &rows)?)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub oracle_test_acc: f64,
    pub crossbar_test_acc: f64,
    pub gap: f64,
}

/// Directory name for one sweep point.
fn sweep_dir(param: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{param}={clean}")
}

/// `sotnn sweep`: one full training run per value, each in its own
/// subdirectory, plus an aggregate `sweep.csv`.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    param: &str,
    values: &[String],
    mut progress: impl FnMut(&str, &EpochMetrics, &EpochMetrics),
) -> Result<Vec<SweepRow>, CliError> {
    if !KEYS.contains(&param) || param == "schema_version" || param == "output.dir" {
        return Err(CliError::Config(format!("cannot sweep `{param}`")));
    }
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let runs = values
        .iter()
        .map(|v| {
            let mut run = cfg.clone();
            run.set_str(param, v)?;
            run.out_dir = cfg.out_dir.join(sweep_dir(param, v));
            run.validate()?;
            Ok((v.clone(), run))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut rows = Vec::with_capacity(runs.len());
    for (value, run) in runs {
        let report = cmd_train(&run, |o, c| progress(&value, o, c))?;
        let o = report.oracle_test_acc.unwrap_or(f64::NAN);
        let c = report.crossbar_test_acc.unwrap_or(f64::NAN);
        rows.push(SweepRow {
            param: param.to_string(),
            value,
            oracle_test_acc: o,
            crossbar_test_acc: c,
            gap: o - c,
        });
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.param.clone(),
                r.value.clone(),
                r.oracle_test_acc.to_string(),
                r.crossbar_test_acc.to_string(),
                r.gap.to_string(),
            ]
        })
        .collect();
    write_atomic(&out_path(cfg, SWEEP_CSV)?, &csv_bytes(&SWEEP_HEADER, &table)?)?;
    Ok(rows)
}

/// `sotnn report`: programs a crossbar (from a checkpoint, or all `+1`) and
/// runs one inference to report cycle, power and area bookkeeping.
pub fn cmd_report(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<HardwareReport, CliError> {
    let mut cfg = cfg.clone();
    let student = match checkpoint {
        Some(path) => {
            let loaded = Checkpoint::load(path)?;
            cfg.topology = loaded.student.network().topology();
            loaded.student
        }
        None => TeacherNet::init(&cfg.topology, 0.0, cfg.seed).binarize_deterministic(0.0),
    };
    let pipeline = deploy(&cfg, &student)?;
    let programming_cycles = pipeline.counter().training_cycles();
    let (_, per_image) = pipeline.infer(&vec![0.0; cfg.topology[0]])?;
    let report = HardwareReport {
        schema_version: REPORT_SCHEMA,
        topology: cfg.topology.clone(),
        programming_cycles,
        inference_cycles_per_image: per_image,
        speedup: SpeedupReport::new(per_image, cfg.gpu_cycles_per_image),
        power_area: power_area(&cfg, &pipeline),
    };
    write_atomic(&out_path(&cfg, HARDWARE_JSON)?, &json(&report)?)?;
    Ok(report)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    json(value).map(|b| String::from_utf8(b).expect("serde_json emits UTF-8"))
}
