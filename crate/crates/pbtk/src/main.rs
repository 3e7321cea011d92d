use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pbtk::cli::{
    self, cmd_categories, cmd_compare, cmd_embed, cmd_fetch, cmd_run, cmd_validate, CliError,
    EmbedSource, OutputFormat, RunRequest,
};

#[derive(Parser)]
#[command(name = "pbtk", version, about = "Participatory budgeting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RuleFlags {
    /// Rule to run: `ug`, `mes`, or a full spec like `mes:cost:add1u`.
    /// Repeatable.
    #[arg(long = "rule")]
    rules: Vec<String>,
    /// Utility model for bare rule names.
    #[arg(long, default_value = "cost")]
    utility: String,
    /// Equal Shares completion for bare rule names.
    #[arg(long, default_value = "none")]
    completion: String,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate election files; exit 0 iff all are valid.
    Validate {
        /// Files, directories of `.pb` files, or URLs.
        inputs: Vec<String>,
    },
    /// Run rules on grouped elections and report outcomes and metrics.
    Run {
        inputs: Vec<String>,
        #[command(flatten)]
        rules: RuleFlags,
        /// How files sharing a unit+instance are combined.
        #[arg(long, default_value = "citywide")]
        scheme: String,
        /// Comma-separated metric names; defaults to all.
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run exactly two rules and report pairwise dominance per instance.
    Compare {
        inputs: Vec<String>,
        #[command(flatten)]
        rules: RuleFlags,
        #[arg(long, default_value = "citywide")]
        scheme: String,
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download `.pb` files over HTTP, skipping unchanged content.
    Fetch {
        urls: Vec<String>,
        /// Destination directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Export map data comparing Equal Shares with Utilitarian Greedy.
    Embed {
        inputs: Vec<String>,
        /// Position source: `gps` or `jaccard`.
        #[arg(long, default_value = "jaccard")]
        source: String,
        /// Equal Shares spec placed on the map.
        #[arg(long, default_value = "mes:cost:add1u")]
        es_rule: String,
        /// Utilitarian Greedy spec compared against.
        #[arg(long, default_value = "ug:cost")]
        ug_rule: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-category vote and spending shares for each instance and rule.
    Categories {
        inputs: Vec<String>,
        #[command(flatten)]
        rules: RuleFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rule_specs(flags: &RuleFlags, default: &[&str]) -> Result<Vec<pbtk::rules::RuleSpec>, CliError> {
    let names: Vec<String> = if flags.rules.is_empty() {
        default.iter().map(|s| s.to_string()).collect()
    } else {
        flags.rules.clone()
    };
    cli::parse_rule_specs(&names, &flags.utility, &flags.completion)
}

fn metric_list(metrics: &Option<String>) -> Vec<String> {
    metrics
        .as_deref()
        .map(|m| {
            m.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
        .unwrap_or_default()
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { inputs } => {
            let (text, code) = cmd_validate(&inputs)?;
            emit(&text, None)?;
            Ok(code)
        }
        Command::Run {
            inputs,
            rules,
            scheme,
            metrics,
            format,
            seed,
            jobs,
            out,
        } => {
            let req = RunRequest {
                inputs,
                scheme: cli::parse_scheme(&scheme)?,
                rule_specs: rule_specs(&rules, &["ug"])?,
                metrics: metric_list(&metrics),
                output_format: OutputFormat::parse(&format)?,
                seed,
                parallelism: jobs,
            };
            let (text, code) = cmd_run(&req)?;
            emit(&text, out.as_ref())?;
            Ok(code)
        }
        Command::Compare {
            inputs,
            rules,
            scheme,
            metrics,
            format,
            seed,
            jobs,
            out,
        } => {
            let req = RunRequest {
                inputs,
                scheme: cli::parse_scheme(&scheme)?,
                rule_specs: rule_specs(&rules, &[])?,
                metrics: metric_list(&metrics),
                output_format: OutputFormat::parse(&format)?,
                seed,
                parallelism: jobs,
            };
            let (text, code) = cmd_compare(&req)?;
            emit(&text, out.as_ref())?;
            Ok(code)
        }
        Command::Fetch { urls, out } => {
            let (text, code) = cmd_fetch(&urls, &out)?;
            emit(&text, None)?;
            Ok(code)
        }
        Command::Embed {
            inputs,
            source,
            es_rule,
            ug_rule,
            seed,
            out,
        } => {
            let source = EmbedSource::parse(&source)?;
            let es = cli::parse_rule_spec(&es_rule, "cost", "add1u")?;
            let ug = cli::parse_rule_spec(&ug_rule, "cost", "none")?;
            let (text, code) = cmd_embed(&inputs, source, &es, &ug, seed)?;
            emit(&text, out.as_ref())?;
            Ok(code)
        }
        Command::Categories { inputs, rules, out } => {
            let specs = rule_specs(&rules, &["ug"])?;
            let (text, code) = cmd_categories(&inputs, &specs)?;
            emit(&text, out.as_ref())?;
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("pbtk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
