use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use appi::lts::{ExplorationConfig, OutputLabelMode};
use appi::query::{exit_code, reports_json, run_all, Format};
use appi::selftest::run_selftest;
use appi::syntax::parse_spec;

/// Applied pi-calculus workbench: normal forms, transition systems and
/// bounded equivalence checking.
#[derive(Parser, Debug)]
#[command(name = "appi", version)]
struct Cli {
    /// Recipe height for inputs and static equivalence.
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Unfoldings allowed per replication.
    #[arg(long = "repl-bound", global = true)]
    repl_bound: Option<u32>,
    /// State budget per exploration.
    #[arg(long = "max-states", global = true)]
    max_states: Option<usize>,
    #[arg(long = "output-label-mode", value_enum, global = true)]
    output_label_mode: Option<LabelMode>,
    #[arg(long, value_enum, global = true)]
    format: Option<OutFormat>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with default settings.
    #[arg(long, env = "APPI_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every query of a specification file.
    Run { file: PathBuf },
    /// Probe demonstrations and normal-form invariants on built-in fixtures.
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LabelMode {
    Literal,
    Alias,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Text,
    Json,
    Dot,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    depth: Option<u32>,
    repl_bound: Option<u32>,
    max_states: Option<usize>,
    output_label_mode: Option<LabelMode>,
    format: Option<OutFormat>,
    seed: Option<u64>,
}

fn load_config(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => match load_config(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
        },
        None => FileConfig::default(),
    };
    let mut cfg = ExplorationConfig::default();
    if let Some(d) = cli.depth.or(file.depth) {
        cfg = cfg.with_depth(d);
    }
    if let Some(b) = cli.repl_bound.or(file.repl_bound) {
        cfg.replication_bound = b;
    }
    if let Some(m) = cli.max_states.or(file.max_states) {
        cfg.max_states = m;
    }
    if let Some(m) = cli.output_label_mode.or(file.output_label_mode) {
        cfg.output_label_mode = match m {
            LabelMode::Literal => OutputLabelMode::Literal,
            LabelMode::Alias => OutputLabelMode::Alias,
        };
    }
    let format = match cli.format.or(file.format).unwrap_or(OutFormat::Text) {
        OutFormat::Text => Format::Text,
        OutFormat::Json => Format::Json,
        OutFormat::Dot => Format::Dot,
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);

    match &cli.command {
        Command::Run { file } => {
            let spec = match parse_spec(file) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{}:{e}", file.display());
                    return ExitCode::from(3);
                }
            };
            let base = file.parent().unwrap_or(Path::new("."));
            let reports = run_all(&spec, &cfg, base);
            let mut out = std::io::stdout().lock();
            match format {
                Format::Json => {
                    let _ = writeln!(out, "{}", reports_json(&reports, &cfg));
                }
                Format::Dot => {
                    // graphs on stdout, everything else on stderr
                    let mut err = std::io::stderr().lock();
                    for r in &reports {
                        let _ = match r.dot {
                            Some(_) => writeln!(out, "{}", r.render(format)),
                            None => writeln!(err, "{}", r.render(format)),
                        };
                    }
                }
                Format::Text => {
                    for r in &reports {
                        let _ = writeln!(out, "{}", r.render(format));
                    }
                }
            }
            ExitCode::from(exit_code(&reports) as u8)
        }
        Command::Selftest => {
            let checks = run_selftest(seed, &cfg);
            let mut out = std::io::stdout().lock();
            let mut ok = true;
            for c in &checks {
                ok &= c.passed;
                let _ = writeln!(out, "{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
