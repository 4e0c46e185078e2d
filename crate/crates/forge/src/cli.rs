//! `proleg-forge` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use proleg_core::augment::{dataset_stats, Dataset};
use proleg_core::explainer::{render, Format, RenderOptions};
use proleg_core::reasoner::Solver;
use proleg_core::semparser::{parse_case, train_model};
use serde::Serialize;

use crate::error::{ForgeError, Result, Stage};
use crate::formats::{
    parse_goal, read_facts, read_jsonl, read_model, read_program, read_program_dir, read_text,
    to_json, write_jsonl, write_model, write_stdout, write_text, FormatError,
};
use crate::pipeline::{augment, evaluation_report, run_pipeline, BackendChoice, PipelineConfig};

#[derive(Debug, Parser)]
#[command(
    name = "proleg-forge",
    version,
    about = "Augment legal cases, train a lookup parser and reason over PROLEG contracts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Offline,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProofFormat {
    Text,
    Dot,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParseFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate assets and write an augmented dataset as JSONL.
    Augment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Number of samples; defaults to the config's dataset size.
        #[arg(long)]
        count: Option<usize>,
        /// Sampling seed; defaults to the config's dataset seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a parser model from JSONL samples.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline config whose bundles supply contract roles and goals.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse one legal case into facts.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        text: Option<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ParseFormat,
    },
    /// Solve a goal and print its proof tree.
    Reason {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        facts: Option<PathBuf>,
        #[arg(long)]
        goal: String,
        #[arg(long, value_enum, default_value = "text")]
        format: ProofFormat,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        hide_exceptions: bool,
    },
    /// Score a model on JSONL samples.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory of `<contract>.proleg` programs for entailment checks.
        #[arg(long)]
        programs: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Entity counts per contract, role and surface.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate, augment, split, train and evaluate in one run.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load(stage: Stage) -> impl Fn(FormatError) -> ForgeError {
    move |e| ForgeError::new(stage, e)
}

fn write_err(e: FormatError) -> ForgeError {
    ForgeError::new(Stage::Write, e)
}

fn json_stdout<T: Serialize>(v: &T) {
    write_stdout(&to_json(v));
}

fn attach_schemas(data: &mut Dataset, config: &Path) -> Result<()> {
    let cfg = PipelineConfig::load(config)?;
    for b in cfg.load_bundles()? {
        data.schemas
            .insert(b.contract_id().to_string(), b.bundle.schema.clone());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment {
            config,
            backend,
            count,
            seed,
            out,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(b) = backend {
                cfg.backend = match b {
                    BackendArg::Offline => BackendChoice::Offline,
                    BackendArg::Llm => BackendChoice::Llm,
                };
            }
            if let Some(n) = count {
                if n == 0 {
                    return Err(ForgeError::new(
                        Stage::LoadConfig,
                        "--count must be positive",
                    ));
                }
                cfg.dataset.samples = n;
            }
            if let Some(s) = seed {
                cfg.dataset.seed = s;
            }
            let aug = augment(&cfg)?;
            write_jsonl(&out, &aug.dataset.samples).map_err(write_err)?;
            log::info!("wrote {} samples to {}", aug.dataset.len(), out.display());
            Ok(())
        }
        Command::Train { data, out, config } => {
            let mut dataset =
                Dataset::from_samples(read_jsonl(&data).map_err(load(Stage::LoadData))?);
            if let Some(c) = config {
                attach_schemas(&mut dataset, &c)?;
            }
            let model = train_model(&dataset).map_err(|e| ForgeError::new(Stage::Train, e))?;
            write_model(&out, &model).map_err(write_err)
        }
        Command::Parse {
            model,
            text,
            input,
            format,
        } => {
            let model = read_model(&model).map_err(load(Stage::LoadData))?;
            let text = match (text, input) {
                (Some(t), _) => t,
                (None, Some(p)) => read_text(&p).map_err(load(Stage::LoadData))?,
                (None, None) => unreachable!("clap requires --text or --in"),
            };
            let result = parse_case(&model, &text).map_err(|e| ForgeError::new(Stage::Parse, e))?;
            match format {
                ParseFormat::Json => json_stdout(&result),
                ParseFormat::Text => {
                    let mut out = format!("% contract {}\n", result.contract_id);
                    for f in &result.facts {
                        out.push_str(&format!("{f}.\n"));
                    }
                    for d in &result.diagnostics {
                        out.push_str(&format!("% warning: {d}\n"));
                    }
                    write_stdout(&out);
                }
            }
            Ok(())
        }
        Command::Reason {
            program,
            facts,
            goal,
            format,
            max_depth,
            hide_exceptions,
        } => {
            let program = read_program(&program).map_err(load(Stage::LoadData))?;
            let facts = match facts {
                Some(p) => read_facts(&p).map_err(load(Stage::LoadData))?,
                None => Vec::new(),
            };
            let goal = parse_goal(&goal)
                .map_err(|e| ForgeError::new(Stage::LoadData, format!("goal: {e}")))?;
            let proof = Solver::new(&program, &facts)
                .and_then(|mut s| s.solve(&goal))
                .map_err(|e| ForgeError::new(Stage::Reason, e))?;
            let opts = RenderOptions {
                format: match format {
                    ProofFormat::Text => Format::Text,
                    ProofFormat::Dot => Format::Dot,
                    ProofFormat::Json => Format::Json,
                },
                max_depth,
                show_exceptions: !hide_exceptions,
            };
            let mut out = render(&proof, &opts);
            if !out.ends_with('\n') {
                out.push('\n');
            }
            write_stdout(&out);
            Ok(())
        }
        Command::Evaluate {
            model,
            data,
            programs,
            report,
        } => {
            let model = read_model(&model).map_err(load(Stage::LoadData))?;
            let test = Dataset::from_samples(read_jsonl(&data).map_err(load(Stage::LoadData))?);
            let programs: Option<BTreeMap<_, _>> = programs
                .map(|d| read_program_dir(&d))
                .transpose()
                .map_err(load(Stage::LoadData))?;
            let r = evaluation_report(&model, &test, programs.as_ref());
            write_text(&report, &to_json(&r)).map_err(write_err)?;
            json_stdout(&r.metrics);
            Ok(())
        }
        Command::Stats { data } => {
            let d = Dataset::from_samples(read_jsonl(&data).map_err(load(Stage::LoadData))?);
            json_stdout(&dataset_stats(&d));
            Ok(())
        }
        Command::Pipeline { config, report } => {
            let cfg = PipelineConfig::load(&config)?;
            let out = run_pipeline(&cfg, report.as_deref())?;
            json_stdout(&serde_json::json!({
                "samples": out.report.dataset.samples,
                "test": out.report.test.metrics,
                "resubstitution": out.report.resubstitution,
            }));
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
