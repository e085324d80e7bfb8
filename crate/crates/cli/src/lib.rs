//! Command-line front end: `audit`, `bounds`, `simulate` and `summarize`.
//!
//! Each run writes `<out>/<subcommand>.json` holding the resolved flags and
//! the result, plus `<subcommand>.timing.json` with the wall time and thread
//! count. Only the timing file varies between identical runs.

mod args;
mod commands;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::Parser;
use serde_json::Value;

pub use args::{Cli, Command};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(dropaudit::Error),
}

impl From<dropaudit::Error> for CliError {
    fn from(e: dropaudit::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dropaudit::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(
                E::Io(_)
                | E::Csv(_)
                | E::Json(_)
                | E::MissingColumn(_)
                | E::NonFiniteValue { .. }
                | E::EmptyAfterDrops
                | E::DimensionMismatch { .. },
            ) => EXIT_DATA,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

const GLOBAL_WITH_VALUE: [&str; 4] = ["--out", "--threads", "--seed", "--config"];
const SUBCOMMANDS: [&str; 4] = ["audit", "bounds", "simulate", "summarize"];

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn flag_tokens(obj: &serde_json::Map<String, Value>, skip: &[&str]) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (key, value) in obj {
        if skip.contains(&key.as_str()) || value.is_object() {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> Result<String, CliError> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Bool(b) => Ok(b.to_string()),
                _ => Err(usage(format!("config value for `{key}` must be a scalar or a list of scalars"))),
            }
        };
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag),
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(flag);
                out.push(parts.join(","));
            }
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok(out)
}

/// Splices the flags of a JSON config file into `argv` ahead of the user's
/// own flags, so that later (command-line) occurrences win.
///
/// Top-level keys are global flags; an object under a subcommand name holds
/// that subcommand's flags.
fn overlay_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let value: Value = read_json_file(Path::new(&path))?;
    let Value::Object(obj) = value else {
        return Err(usage("config file must hold a JSON object"));
    };
    let globals = flag_tokens(&obj, &["config"])?;
    // position of the subcommand name in argv
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].as_str();
        if GLOBAL_WITH_VALUE.contains(&a) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            break;
        }
    }
    let mut out = vec![argv[0].clone()];
    out.extend(globals);
    out.extend_from_slice(&argv[1..i.min(argv.len())]);
    if i < argv.len() {
        let sub = argv[i].clone();
        out.push(sub.clone());
        if SUBCOMMANDS.contains(&sub.as_str()) {
            if let Some(Value::Object(sub_obj)) = obj.get(&sub) {
                out.extend(flag_tokens(sub_obj, &[])?);
            }
        }
        out.extend_from_slice(&argv[i + 1..]);
    }
    Ok(out)
}

fn with_path(path: &Path, e: impl std::fmt::Display, kind: std::io::ErrorKind) -> CliError {
    CliError::Core(std::io::Error::new(kind, format!("{}: {e}", path.display())).into())
}

/// Reads and parses a JSON file; errors name the file.
pub(crate) fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| with_path(path, &e, e.kind()))?;
    serde_json::from_str(&text).map_err(|e| with_path(path, e, std::io::ErrorKind::InvalidData))
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| usage(format!("cannot start worker pool: {e}")))
}

pub(crate) fn write_timing(out: &Path, name: &str, seconds: f64, threads: usize) -> Result<(), CliError> {
    let timing = serde_json::json!({ "wall_seconds": seconds, "threads": threads });
    fs::create_dir_all(out).map_err(|e| CliError::Core(e.into()))?;
    fs::write(
        out.join(format!("{name}.timing.json")),
        serde_json::to_string_pretty(&timing).map_err(|e| CliError::Core(e.into()))? + "\n",
    )
    .map_err(|e| CliError::Core(e.into()))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|s| s.into().to_string_lossy().into_owned())
        .collect();
    let argv = match overlay_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = thread_pool(cli.threads).and_then(|pool| {
        let threads = pool.current_num_threads();
        pool.install(|| commands::dispatch(&cli, threads))
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
