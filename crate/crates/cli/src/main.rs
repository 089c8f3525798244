use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use isinglace::current::Caps;
use isinglace::suite::{default_corpus, emit_corpus, render_summary, run_suite, suite_names, write_reports, RunConfig};

/// Exact random-current checks on small graphs and proxy-field checks on tori.
#[derive(Parser)]
#[command(name = "isinglace", version)]
struct Cli {
    /// Run configuration in TOML; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Single-layer enumeration cap in bonds; the other caps scale with it.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in graph corpus as one TOML file per instance.
    Corpus,
    /// Run one suite, or `all` for every suite listed in the configuration.
    Run { suite: String },
}

enum Outcome {
    Pass,
    Failed,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        c.out = out.clone();
    }
    if let Some(n) = cli.cap {
        c.caps = Caps::with_single(n);
    }
    c.validate()?;
    Ok(c)
}

fn execute(cli: &Cli, c: &RunConfig) -> Result<Outcome> {
    match &cli.command {
        Command::Corpus => {
            let dir = c.out.join("corpus");
            let paths = emit_corpus(&dir, &default_corpus(&c.betas)?)?;
            println!("wrote {} graph files to {}", paths.len(), dir.display());
            Ok(Outcome::Pass)
        }
        Command::Run { suite } => {
            let names: Vec<String> = if suite == "all" { c.suites.clone() } else { vec![suite.clone()] };
            let corpus = c.corpus()?;
            let reports = names.iter().map(|n| run_suite(n, c, &corpus)).collect::<isinglace::Result<Vec<_>>>()?;
            write_reports(&c.out, &reports)?;
            print!("{}", render_summary(&reports));
            Ok(if reports.iter().any(|r| r.failed()) { Outcome::Failed } else { Outcome::Pass })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Run { suite } = &cli.command {
        if suite != "all" && !suite_names().contains(&suite.as_str()) {
            eprintln!("error: unknown suite `{suite}`; expected one of {} or all", suite_names().join(", "));
            return ExitCode::from(2);
        }
    }
    let prepared = config(&cli).and_then(|c| {
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
        Ok(c)
    });
    let c = match prepared {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &c) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
