//! Command-line front end. `run` parses arguments, applies flag overrides
//! on top of the config file and dispatches to [`Pipeline`] stages.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, CONFIG_ENV};
use crate::encoders::Scheme;
use crate::error::{Error, Result};
use crate::pipeline::{EvalMode, Pipeline};

#[derive(Debug, Parser)]
#[command(
    name = "adjacency",
    version,
    about = "Domain-adjacent sentence detection"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pre-trained vector file.
    #[arg(long, global = true)]
    pub vectors: Option<PathBuf>,
    /// Comma-separated weighting schemes.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<Scheme>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one domain mapping per configured domain.
    TrainMapping {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        train_window: Option<usize>,
    },
    /// Encode all splits with one scheme (default: every configured method).
    Encode {
        #[arg(long)]
        scheme: Option<Scheme>,
        /// Surprise context half-width.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Score test sentences from encoded files and flag them.
    Score {
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        flag_fraction: Option<f64>,
    },
    /// Write AUC or downstream accuracy reports.
    Evaluate {
        #[arg(long, value_enum, default_value_t = Mode::Auc)]
        mode: Mode,
        /// Build all upstream artifacts first.
        #[arg(long)]
        end_to_end: bool,
    },
    /// Compare all four weighting schemes by AUC.
    Ablate,
    /// Write one domain's mapped vocabulary as a text vector file.
    ExportDomainTable {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auc,
    Downstream,
}

impl Cli {
    /// Loads the config and applies flag overrides. Flags win.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let path = self.global.config.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "no configuration given; pass --config or set {CONFIG_ENV}"
            ))
        })?;
        let mut c = RunConfig::load(path)?;
        let g = &self.global;
        if let Some(s) = g.seed {
            c.seed = s;
        }
        if let Some(j) = g.jobs {
            c.jobs = Some(j);
        }
        if let Some(o) = &g.out {
            c.paths.output_dir = o.clone();
        }
        if let Some(v) = &g.vectors {
            c.paths.pretrained = v.clone();
        }
        if let Some(m) = &g.methods {
            c.methods = m.clone();
        }
        let h = &mut c.hyperparams;
        match &self.command {
            Command::TrainMapping {
                epochs,
                learning_rate,
                train_window,
            } => {
                override_with(&mut h.epochs, *epochs);
                override_with(&mut h.learning_rate, *learning_rate);
                override_with(&mut h.train_window, *train_window);
            }
            Command::Encode { window, .. } => override_with(&mut h.window, *window),
            Command::Score {
                k, flag_fraction, ..
            } => {
                override_with(&mut h.k, *k);
                override_with(&mut h.flag_fraction, *flag_fraction);
            }
            _ => {}
        }
        Ok(c)
    }
}

fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    match config.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| dispatch(&cli.command, config))
        }
        None => dispatch(&cli.command, config),
    }
}

fn dispatch(command: &Command, config: RunConfig) -> Result<()> {
    let pipeline = Pipeline::load(config)?;
    let methods = pipeline.config().methods.clone();
    let selected = |scheme: &Option<Scheme>| scheme.map_or_else(|| methods.clone(), |s| vec![s]);
    match command {
        Command::TrainMapping { .. } => {
            for (domain, losses) in pipeline.train_mappings()? {
                for (epoch, loss) in losses.iter().enumerate() {
                    println!("{domain}\tepoch {}\tloss {loss:.6}", epoch + 1);
                }
                println!("{domain}\twrote {}", pipeline.model_path(&domain).display());
            }
        }
        Command::Encode { scheme, .. } => {
            for s in selected(scheme) {
                for (domain, records, skipped) in pipeline.encode(s)? {
                    println!("{domain}\t{s}\t{records} encoded\t{skipped} skipped");
                }
            }
        }
        Command::Score { scheme, .. } => {
            for s in selected(scheme) {
                for (domain, threshold, dev_rate) in pipeline.score(s)? {
                    println!("{domain}\t{s}\tthreshold {threshold:.6}\tdev flagged {dev_rate:.4}");
                }
            }
        }
        Command::Evaluate { mode, end_to_end } => {
            let mode = match mode {
                Mode::Auc => EvalMode::Auc,
                Mode::Downstream => EvalMode::Downstream,
            };
            print!(
                "{}",
                pipeline.evaluate(mode, &methods, *end_to_end)?.render()
            );
        }
        Command::Ablate => print!("{}", pipeline.ablate()?.render()),
        Command::ExportDomainTable { domain, output } => {
            if !pipeline.domains().iter().any(|d| d.spec.domain() == domain) {
                return Err(Error::InvalidArgument(format!(
                    "domain {domain:?} is not configured"
                )));
            }
            let n = pipeline.export_domain_table(domain, output)?;
            println!("wrote {n} vectors to {}", output.display());
        }
    }
    Ok(())
}
