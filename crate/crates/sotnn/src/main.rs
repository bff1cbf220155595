use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sotnn::config::{ExperimentConfig, DATA_DIR_ENV};
use sotnn::experiment::{self, InferSource};
use sotnn::CliError;

#[derive(Parser)]
#[command(name = "sotnn", version, about = "SOT-MRAM neuromorphic MLP simulator and trainer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config with flat dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Voltage-dependent TMR during inference.
    #[arg(long, global = true)]
    nonideal: Option<Switch>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// MNIST directory with the four IDX files (plain or .gz).
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    data: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.delta_b=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate the binary student and its crossbar mapping per epoch.
    Train,
    /// Classify images with a checkpoint mapped onto the crossbar.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// First MNIST test image.
        #[arg(long, default_value_t = 0, conflicts_with = "image")]
        index: usize,
        #[arg(long, default_value_t = 1, conflicts_with = "image")]
        count: usize,
        /// IDX image file instead of the test split.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Write the neuron's voltage transfer curve as CSV.
    ExportVtc {
        /// Defaults to circuit.vss.
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        /// Defaults to circuit.vdd.
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Train once per value of one config key.
    Sweep {
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Cycle, power and area bookkeeping for a programmed crossbar.
    Report {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set_str(k.trim(), v.trim())?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = c.epochs {
        cfg.epochs = epochs;
    }
    if let Some(s) = c.nonideal {
        cfg.nonideal = matches!(s, Switch::On);
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(data) = &c.data {
        cfg.data_dir = data.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn epoch_line(tag: &str, o: &sotnn_core::train::EpochMetrics, c: &sotnn_core::train::EpochMetrics) {
    eprintln!(
        "{tag}epoch {:>3}  loss {:.4}  oracle train {:.4} test {:.4}  crossbar train {:.4} test {:.4}",
        o.epoch, o.mean_loss, o.train_acc, o.test_acc, c.train_acc, c.test_acc
    );
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Train => {
            let report = experiment::cmd_train(&cfg, |o, c| epoch_line("", o, c))?;
            eprintln!("wrote {} in {:.1} s", cfg.out_dir.display(), report.duration_s);
            if let (Some(e), Some(o), Some(c)) =
                (report.selected_epoch, report.oracle_test_acc, report.crossbar_test_acc)
            {
                println!(
                    "selected_epoch={e} oracle_test_acc={o} crossbar_test_acc={c} gap={}",
                    o - c
                );
            }
        }
        Command::Infer {
            checkpoint,
            index,
            count,
            image,
        } => {
            let source = match image {
                Some(path) => InferSource::ImageFile(path),
                None => InferSource::TestSplit { index, count },
            };
            let report = experiment::cmd_infer(&cfg, &checkpoint, &source)?;
            print!("{}", experiment::to_json(&report)?);
        }
        Command::ExportVtc { from, to, points } => {
            let path = experiment::cmd_export_vtc(&cfg, from.unwrap_or(cfg.vss), to.unwrap_or(cfg.vdd), points)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Sweep { param, values } => {
            let rows = experiment::cmd_sweep(&cfg, &param, &values, |v, o, c| {
                epoch_line(&format!("[{param}={v}] "), o, c)
            })?;
            for r in rows {
                println!(
                    "{}={} oracle {:.4} crossbar {:.4} gap {:.4}",
                    r.param, r.value, r.oracle_test_acc, r.crossbar_test_acc, r.gap
                );
            }
        }
        Command::Report { checkpoint } => {
            let report = experiment::cmd_report(&cfg, checkpoint.as_deref())?;
            print!("{}", experiment::to_json(&report)?);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("sotnn: error: {e}");
        process::exit(e.exit_code() as i32);
    }
}
