//! The `textent` command line.
//!
//! Subcommands mirror the pipeline stages. `--config FILE` supplies flag
//! values from a flat TOML table keyed by long flag names (`min-score = 0.1`);
//! flags given on the command line win, and keys the subcommand does not
//! know are ignored. Every run that produces an output file also writes
//! `<output>.manifest.json` recording the resolved configuration, input
//! hashes, seed, wall time and artifacts.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod args;
mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::Path;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{CommandFactory, FromArgMatches};
use serde::Serialize;

pub use args::{Cli, Command};
pub use commands::ModelSidecar;
pub use manifest::{file_sha256, RunManifest};

use crate::error::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

const USAGE_EXIT: i32 = 1;
const DATA_EXIT: i32 = 2;

fn report_clap(e: clap::Error) -> i32 {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => USAGE_EXIT,
    }
}

fn toml_scalar(key: &str, value: &toml::Value) -> Result<Option<String>, CliError> {
    Ok(match value {
        toml::Value::Boolean(true) => None,
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        other => {
            return Err(CliError::Usage(format!(
                "config key {key:?}: unsupported value {other}"
            )))
        }
    })
}

/// Command-line arguments for every config entry the command line did not
/// set explicitly.
fn config_arguments(path: &Path, matches: &clap::ArgMatches) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::malformed(format!("{}: {e}", path.display())))?;
    let (name, sub) = matches
        .subcommand()
        .expect("a subcommand is required by the parser");
    let command = Cli::command();
    let subcommand = command
        .find_subcommand(name)
        .expect("matched subcommand exists");
    let mut extra = Vec::new();
    for arg in subcommand.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        let Some(value) = table.get(long) else { continue };
        if matches!(long, "config" | "dump-config" | "help" | "version") {
            continue;
        }
        if sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        if value.as_bool() == Some(false) {
            continue;
        }
        match toml_scalar(long, value)? {
            None => extra.push(format!("--{long}").into()),
            Some(v) => extra.push(format!("--{long}={v}").into()),
        }
    }
    Ok(extra)
}

fn parse(argv: Vec<OsString>) -> Result<Cli, i32> {
    let matches = Cli::command()
        .try_get_matches_from(&argv)
        .map_err(report_clap)?;
    let Some(config) = matches.get_one::<std::path::PathBuf>("config") else {
        return Cli::from_arg_matches(&matches).map_err(report_clap);
    };
    let extra = config_arguments(config, &matches).map_err(report_error)?;
    let mut merged = argv;
    merged.extend(extra);
    Cli::command()
        .try_get_matches_from(merged)
        .and_then(|m| Cli::from_arg_matches(&m))
        .map_err(report_clap)
}

/// Writes to stdout, treating a closed reader (`textent ... | head`) as
/// success.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing to stdout: {e}");
        }
    }
}

fn report_error(e: CliError) -> i32 {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            USAGE_EXIT
        }
        CliError::Data(err) => {
            eprintln!("error: {err}");
            DATA_EXIT
        }
    }
}

fn config_table<T: Serialize>(args: &T) -> toml::Table {
    toml::Table::try_from(args).expect("arguments serialize to a table")
}

fn resolved_config(command: &Command) -> toml::Table {
    match command {
        Command::BuildCorpus(a) => config_table(a),
        Command::Pretrain(a) => config_table(a),
        Command::Train(a) => config_table(a),
        Command::Encode(a) => config_table(a),
        Command::EvalTyping(a) => config_table(a),
        Command::EvalClassify(a) => config_table(a),
        Command::Nn(a) => config_table(a),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolved_config(&cli.command);
    if cli.dump_config {
        emit(&toml::to_string(&config).expect("table serializes"));
        return Ok(());
    }
    let start = Instant::now();
    let record = match &cli.command {
        Command::BuildCorpus(a) => commands::build_corpus(a),
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Train(a) => commands::train(a),
        Command::Encode(a) => commands::encode_cmd(a),
        Command::EvalTyping(a) => commands::eval_typing(a),
        Command::EvalClassify(a) => commands::eval_classify(a),
        Command::Nn(a) => commands::nn(a),
    }?;
    let Some(anchor) = &record.anchor else {
        return Ok(());
    };
    let mut inputs = std::collections::BTreeMap::new();
    if let Some(c) = &cli.config {
        inputs.insert(c.display().to_string(), file_sha256(c)?);
    }
    for p in &record.inputs {
        inputs.insert(p.display().to_string(), file_sha256(p)?);
    }
    let manifest = RunManifest {
        subcommand: cli.command.name().to_owned(),
        config,
        inputs,
        seed: record.seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
        artifacts: record.artifacts.iter().map(|p| p.display().to_string()).collect(),
    };
    manifest.write(anchor)?;
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => report_error(e),
    }
}
