use std::io::Read as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emoharness_core::affect::{self, MarkerLexicon};
use emoharness_core::campaign::{Runner, StopAfter};
use emoharness_core::metrics::ReportFormat;
use emoharness_core::Error;

#[derive(Parser)]
#[command(name = "emoharness", version, about = "Safety evaluation harness for emotionally modulated adversarial prompts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score the emotional intensity of a text (argument or stdin).
    Lambda {
        /// Text to score; reads stdin when omitted.
        text: Option<String>,
        /// Marker lexicon file (defaults to the built-in lexicon).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Also list every detected marker hit.
        #[arg(long)]
        verbose: bool,
    },
    /// Produce prompt variants only and print λ statistics (no target calls).
    Transform {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute a campaign end to end.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop after a stage: variants, responses, judgments, report.
        #[arg(long)]
        stop_after: Option<String>,
        /// Transform against mocks only; print λ statistics.
        #[arg(long)]
        dry_run: bool,
    },
    /// Continue an interrupted campaign.
    Resume {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render the metric report for a completed campaign.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Output format: text, csv, or markdown.
        #[arg(long, default_value = "text")]
        format: String,
        /// Append the per-category ASR breakdown.
        #[arg(long)]
        per_category: bool,
    },
    /// Re-judge persisted responses with a different template set.
    Judge {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the replacement judge templates.
        #[arg(long)]
        templates: PathBuf,
    },
}

fn stop_after(s: Option<&str>) -> Result<StopAfter, Error> {
    match s {
        None | Some("report") => Ok(StopAfter::Report),
        Some("variants") => Ok(StopAfter::Variants),
        Some("responses") => Ok(StopAfter::Responses),
        Some("judgments") => Ok(StopAfter::Judgments),
        Some(other) => Err(Error::Config(format!("unknown stage '{other}'"))),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Lambda {
            text,
            lexicon,
            verbose,
        } => {
            let text = match text {
                Some(t) => t,
                None => {
                    let mut buf = String::new();
                    std::io::stdin()
                        .read_to_string(&mut buf)
                        .map_err(|e| Error::io("stdin".to_string(), e))?;
                    buf
                }
            };
            let lexicon = match lexicon {
                Some(path) => MarkerLexicon::load(&path)?,
                None => MarkerLexicon::default_lexicon(),
            };
            let report = affect::compute_lambda(&text, &lexicon);
            println!(
                "count_emo={} count_total={} lambda={}/{} ({:.4}) band={}",
                report.count_emo,
                report.count_total,
                report.lambda.num,
                report.lambda.den,
                report.lambda.as_f64(),
                report.band
            );
            if verbose {
                for hit in &report.hits {
                    println!(
                        "  {:>4}..{:<4} {:20} {}",
                        hit.span.0,
                        hit.span.1,
                        format!("{:?}", hit.kind),
                        hit.surface
                    );
                }
            }
            Ok(())
        }
        Command::Transform { config } => {
            let runner = Runner::from_config_file(&config)?;
            print!("{}", runner.dry_run()?);
            Ok(())
        }
        Command::Run {
            config,
            stop_after: stage,
            dry_run,
        } => {
            let runner = Runner::from_config_file(&config)?;
            if dry_run {
                print!("{}", runner.dry_run()?);
                return Ok(());
            }
            let manifest = runner.run(stop_after(stage.as_deref())?)?;
            println!(
                "run '{}' complete through {:?}; counts: {:?}",
                manifest.run_id,
                manifest.stages,
                manifest.counts
            );
            Ok(())
        }
        Command::Resume { config } => {
            let runner = Runner::from_config_file(&config)?;
            let manifest = runner.resume()?;
            println!(
                "run '{}' resumed; counts: {:?}",
                manifest.run_id, manifest.counts
            );
            Ok(())
        }
        Command::Report {
            config,
            format,
            per_category,
        } => {
            let runner = Runner::from_config_file(&config)?;
            let format = ReportFormat::parse(&format)?;
            print!("{}", runner.render_report(format, per_category)?);
            Ok(())
        }
        Command::Judge { config, templates } => {
            let runner = Runner::from_config_file(&config)?;
            let n = runner.rejudge(&templates)?;
            println!("re-judged {n} responses");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
