mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{env_overrides, resolve, ConfigError, Override};

#[derive(Debug, Parser)]
#[command(name = "emofuse", version, about = "Speech and audiovisual emotion recognition pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML config file with [run], [paths], [signal], [dataset], [models] and [training] sections
    #[arg(long, global = true, env = "EMOFUSE_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for data generation, splitting, initialization and training
    #[arg(long, global = true, env = "EMOFUSE_SEED")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, env = "EMOFUSE_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for preprocessing and fixture generation
    #[arg(long, global = true, env = "EMOFUSE_JOBS")]
    jobs: Option<usize>,
    /// Rewrite outputs that already exist
    #[arg(long, global = true)]
    force: bool,
    /// Any config value, as section.key=value (repeatable)
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a raw corpus into spectrograms and head-crop clips
    Preprocess {
        /// Raw corpus directory
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// DS1, DS2, DS3 or DS4
        #[arg(long)]
        segment: Option<String>,
    },
    /// Generate a synthetic, preprocessed fixture dataset
    Synth {
        /// Utterances per class
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        /// Also render video and extract clips
        #[arg(long)]
        video: bool,
        /// Also write the raw corpus here
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Contrastive pretraining of the two-stream network
    Pretrain {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
        /// Pretraining epochs
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Supervised training
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        /// cnn, cnn_rnn, cnn_lstm or two_stream
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Initial weights, e.g. a pretrained checkpoint
        #[arg(long)]
        init: Option<PathBuf>,
        /// Continue from the last checkpoint in the output directory
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate the best and last checkpoints of a run
    Eval {
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Evaluate this checkpoint instead
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Plots and summary table for a run
    Report {
        #[arg(long)]
        run: Option<PathBuf>,
        /// Directory holding the eval metrics (default: <run>/eval)
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
    },
}

fn path(section: &str, key: &str, p: &Option<PathBuf>) -> Option<Override> {
    p.as_ref()
        .map(|p| Override::new(section, key, p.to_string_lossy().into_owned()))
}

fn classes(k: Option<usize>) -> Vec<Override> {
    k.map(|k| {
        vec![
            Override::new("training", "class_mode", k as i64),
            Override::new("models", "num_classes", k as i64),
        ]
    })
    .unwrap_or_default()
}

/// Command-line overrides, lowest precedence first.
fn overrides(g: &Global, cmd: &Command) -> Result<Vec<Override>> {
    let mut o = env_overrides(std::env::vars());
    for s in &g.set {
        o.push(Override::parse(s)?);
    }
    if let Some(seed) = g.seed {
        let seed = seed as i64;
        o.extend([Override::new("training", "seed", seed), Override::new("dataset", "seed", seed)]);
    }
    if let Some(j) = g.jobs {
        o.push(Override::new("run", "jobs", j as i64));
    }
    if g.force {
        o.push(Override::new("dataset", "force", true));
    }
    match cmd {
        Command::Preprocess { input, segment } => {
            o.extend(path("paths", "raw", input));
            o.extend(path("paths", "data", &g.out));
            o.extend(segment.as_ref().map(|s| Override::new("dataset", "segment", s.to_ascii_uppercase())));
        }
        Command::Synth { n, classes: k, video, raw } => {
            o.extend(path("paths", "data", &g.out));
            o.extend(path("paths", "raw", raw));
            o.extend(n.map(|n| Override::new("dataset", "utterances_per_class", n as i64)));
            o.extend(classes(*k));
            if *video {
                o.push(Override::new("dataset", "video", true));
            }
        }
        Command::Pretrain { data, classes: k, epochs } => {
            o.extend(path("paths", "data", data));
            o.extend(path("paths", "out", &g.out));
            o.extend(classes(*k));
            o.extend(epochs.map(|e| Override::new("training", "pretrain_epochs", e as i64)));
        }
        Command::Train { data, variant, classes: k, epochs, init, .. } => {
            o.extend(path("paths", "data", data));
            o.extend(path("paths", "out", &g.out));
            o.extend(path("paths", "init", init));
            o.extend(variant.as_ref().map(|v| Override::new("models", "variant", v.to_ascii_lowercase())));
            o.extend(classes(*k));
            o.extend(epochs.map(|e| Override::new("training", "epochs", e as i64)));
        }
        Command::Eval { run, data, classes: k, .. } => {
            o.extend(path("paths", "run", run));
            o.extend(path("paths", "data", data));
            o.extend(path("paths", "out", &g.out));
            o.extend(classes(*k));
        }
        Command::Report { run, classes: k, .. } => {
            o.extend(path("paths", "run", run));
            o.extend(path("paths", "out", &g.out));
            o.extend(classes(*k));
        }
    }
    Ok(o)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(cli.global.config.as_deref(), &overrides(&cli.global, &cli.command)?)?;
    log::debug!("resolved config:\n{}", cfg.to_toml()?);
    match &cli.command {
        Command::Preprocess { .. } => commands::preprocess(&cfg),
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Pretrain { .. } => commands::pretrain_cmd(&cfg),
        Command::Train { resume, .. } => commands::train_cmd(&cfg, *resume),
        Command::Eval { checkpoint, .. } => commands::eval_cmd(&cfg, checkpoint.as_deref()),
        Command::Report { eval, .. } => commands::report_cmd(&cfg, eval.as_deref()),
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>() || c.downcast_ref::<emofuse::Error>().is_some_and(emofuse::Error::is_config)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("EMOFUSE_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
