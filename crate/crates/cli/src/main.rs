//! `droplab` command-line driver.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible or exhausted,
//! 4 internal invariant violation.

mod args;
mod commands;
mod config;
mod surgery_cmd;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use droplab::harness::Manifest;
use droplab::model::ParamsReport;
use droplab::{Error, RcParams, Result};
use serde::Serialize;
use serde_json::json;

use crate::args::{Cli, Command, Global};
use crate::config::{merge, ConfigFile};

/// Resolved global settings of one invocation.
pub struct Ctx {
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    timings: bool,
    started: Instant,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let threads = g.threads.unwrap_or(1);
        if threads == 0 {
            return Err(Error::input("threads must be positive"));
        }
        let out = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)?;
        Ok(Ctx { seed: g.seed.unwrap_or(0), threads, out, timings: g.timings, started: Instant::now() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Manifest with the resolved arguments and, when given, the model.
    pub fn manifest(&self, command: &str, args: &impl Serialize, params: Option<&RcParams>) -> Result<Manifest> {
        let mut parameters = json!({ "threads": self.threads, "args": serde_json::to_value(args)? });
        if let Some(p) = params {
            parameters["model"] = serde_json::to_value(ParamsReport::from(p))?;
        }
        Ok(Manifest::new(command, self.seed, parameters))
    }

    pub fn finish(&self, mut m: Manifest) -> Result<()> {
        if self.timings {
            m.wall_clock_seconds = Some(self.started.elapsed().as_secs_f64());
        }
        let name = format!("manifest_{}.json", m.command);
        m.write(&self.path(&name))
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.global.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    let global = merge(&cli.global, file.globals(&Command::NAMES), "config")?;
    let name = cli.command.name();
    let section = file.section(name)?;
    let ctx = Ctx::new(&global)?;
    match cli.command {
        Command::Sample(a) => commands::sample(&ctx, &merge(&a, section, name)?),
        Command::ExactEnum(a) => commands::exact_enum(&ctx, &merge(&a, section, name)?),
        Command::Condition(a) => commands::condition(&ctx, &merge(&a, section, name)?),
        Command::Measure(a) => commands::measure(&ctx, &merge(&a, section, name)?),
        Command::WulffEstimate(a) => commands::wulff_estimate(&ctx, &merge(&a, section, name)?),
        Command::Surgery(a) => surgery_cmd::surgery(&ctx, &merge(&a, section, name)?),
        Command::Scan(a) => commands::scan(&ctx, &merge(&a, section, name)?),
        Command::Fit(a) => commands::fit(&ctx, &merge(&a, section, name)?),
        Command::Report(a) => commands::report(&ctx, &merge(&a, section, name)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("droplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
