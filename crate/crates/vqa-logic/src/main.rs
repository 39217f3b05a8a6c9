use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use vqa_logic::harness::{self, ReportFormat, RunOptions};
use vqa_logic::{compile, infer, sentence, FunctionalProgram, QuestionFamily};

#[derive(Parser)]
#[command(
    name = "vqa-logic",
    version,
    about = "Answer scene-graph questions by logic inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a scenes file and a questions file.
    Run {
        /// Scenes JSON; defaults to the bundled fixtures.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Questions JSON; defaults to the bundled fixtures.
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Evaluate at most N questions.
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
        /// Only evaluate one question family.
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Round-trip every program through the sentence codec.
        #[arg(long)]
        via_sentence: bool,
        #[arg(long, value_enum, default_value = "text")]
        report: ReportArg,
        /// Print each question's rules and solution sets.
        #[arg(long)]
        trace: bool,
    },
    /// Compile one question and dump its rules and target sentence.
    Compile {
        /// Index into the questions file.
        #[arg(long, value_name = "I")]
        question_index: usize,
        /// Questions JSON; defaults to the bundled fixtures.
        #[arg(long)]
        questions: Option<PathBuf>,
    },
    /// Parse a target sentence and dump the reconstructed rules.
    Parse { sentence: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Count,
    Exist,
    CompareNumber,
    CompareAttribute,
    QueryAttribute,
}

impl From<FamilyArg> for QuestionFamily {
    fn from(arg: FamilyArg) -> Self {
        match arg {
            FamilyArg::Count => QuestionFamily::Count,
            FamilyArg::Exist => QuestionFamily::Exist,
            FamilyArg::CompareNumber => QuestionFamily::CompareNumber,
            FamilyArg::CompareAttribute => QuestionFamily::CompareAttribute,
            FamilyArg::QueryAttribute => QuestionFamily::QueryAttribute,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Text,
    Json,
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            scenes,
            questions,
            limit,
            family,
            via_sentence,
            report,
            trace,
        } => {
            let (default_scenes, default_questions) = harness::fixture_paths();
            let options = RunOptions {
                limit,
                family: family.map(QuestionFamily::from),
                via_sentence,
                trace,
            };
            let summary = harness::run_dataset(
                &scenes.unwrap_or(default_scenes),
                &questions.unwrap_or(default_questions),
                &options,
            )
            .map_err(|e| e.to_string())?;

            if trace {
                for outcome in &summary.outcomes {
                    let family = outcome
                        .family
                        .map_or_else(|| "unclassified".to_string(), |f| f.to_string());
                    println!(
                        "-- question {} [{family}] answer={} truth={}",
                        outcome.index,
                        outcome.answer,
                        outcome.truth.as_deref().unwrap_or("-"),
                    );
                    if let Some(trace) = &outcome.trace {
                        print!("{trace}");
                    }
                    println!();
                }
            }
            let format = match report {
                ReportArg::Text => ReportFormat::Text,
                ReportArg::Json => ReportFormat::Json,
            };
            print!("{}", harness::emit_report(&summary.report, format));
            Ok(())
        }
        Command::Compile {
            question_index,
            questions,
        } => {
            let path = questions.unwrap_or_else(|| harness::fixture_paths().1);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let records = compile::questions_from_json(&text)
                .map_err(|e| format!("cannot parse {}: {e}", path.display()))?;
            let record = records
                .get(question_index)
                .ok_or_else(|| format!("question {question_index} is out of range"))?;

            if let Some(question) = &record.question {
                println!("question: {question}");
            }
            let program =
                FunctionalProgram::new(record.program.clone()).map_err(|e| e.to_string())?;
            println!(
                "family:   {}",
                compile::classify(&program).map_err(|e| e.to_string())?
            );
            let rules = compile::compile(&program).map_err(|e| e.to_string())?;
            println!("rules:\n{rules}");
            let sentence = sentence::serialize(&rules).map_err(|e| e.to_string())?;
            println!("sentence: {sentence}");
            Ok(())
        }
        Command::Parse { sentence: text } => {
            match sentence::parse(&text) {
                Ok(rules) => {
                    println!("rules:\n{rules}");
                    println!("answer kind: {:?}", rules.answer_kind());
                }
                // A rejected sentence is the NULL path, not a tool failure.
                Err(error) => {
                    println!("parse error: {error}");
                    println!("answer: {}", infer::Answer::Null);
                }
            }
            Ok(())
        }
    }
}
