//! Command-line front end: configuration parsing, command dispatch and
//! artifact writing.

pub mod config;
pub mod error;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, Command, RawConfig, RunConfig};
pub use error::CliError;
pub use run::{run, Outcome};

#[derive(Debug, Parser)]
#[command(name = "plap", version, about = "Singular p-Laplacian numerical lab")]
pub struct Args {
    /// Command; overrides `command` from the config file.
    pub command: Option<String>,

    /// INI-style run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Per-key override `key=value`, applied in order after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Args {
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let mut overrides = Vec::new();
        if let Some(c) = &self.command {
            overrides.push(format!("command={c}"));
        }
        overrides.extend(self.set.iter().cloned());
        if let Some(out) = &self.out {
            overrides.push(format!("output.directory={}", out.display()));
        }
        parse_config(self.config.as_deref(), &overrides)
    }
}

/// Runs the parsed arguments and returns the process exit code. Failures
/// are printed as JSON on stderr and, when possible, written to
/// `failure.json` in the output directory.
pub fn main_with(args: &Args) -> i32 {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => return fail(&e, args.out.as_deref()),
    };
    match run(&cfg) {
        Ok(out) => {
            print!("{}", plap_core::verification::summary_table(&out.checks));
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            out.exit_code
        }
        Err(e) => fail(&e, Some(&cfg.output.directory)),
    }
}

fn fail(e: &CliError, dir: Option<&std::path::Path>) -> i32 {
    let f = e.failure();
    let text = serde_json::to_string_pretty(&f).unwrap_or_else(|_| e.to_string());
    eprintln!("{text}");
    if let Some(dir) = dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("failure.json"), format!("{text}\n"));
        }
    }
    f.exit_code
}
