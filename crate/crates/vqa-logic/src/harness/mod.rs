//! Dataset runner: the full pipeline over scenes/questions files, per-family
//! accuracy tallies, and report rendering.

pub mod oracle;

use crate::compile::{self, FunctionalProgram, QuestionFamily, QuestionRecord};
use crate::infer::{self, Answer};
use crate::scene::{self, FactBase, SceneGraph};
use crate::sentence;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Root of the bundled fixture files; `VQA_LOGIC_FIXTURES` overrides it.
pub fn fixture_root() -> PathBuf {
    std::env::var_os("VQA_LOGIC_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

/// Bundled fixture scenes and questions paths, in that order.
pub fn fixture_paths() -> (PathBuf, PathBuf) {
    let root = fixture_root();
    (root.join("scenes.json"), root.join("questions.json"))
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

/// Run configuration for [`run_dataset`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Evaluate at most this many questions (after family filtering).
    pub limit: Option<usize>,
    /// Only evaluate questions of this family.
    pub family: Option<QuestionFamily>,
    /// Round-trip each compiled program through the sentence codec before
    /// inference, exercising the full translation seam.
    pub via_sentence: bool,
    /// Record a per-question solution trace in the outcomes.
    pub trace: bool,
}

/// Accuracy tally for one bucket of questions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub correct: usize,
    pub null: usize,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, other: &Tally) {
        self.total += other.total;
        self.correct += other.correct;
        self.null += other.null;
    }
}

/// Per-family accuracy tallies plus the wall-clock duration of the run.
/// `other` collects questions whose output operation fits no family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: Tally,
    pub exist: Tally,
    pub compare_number: Tally,
    pub compare_attribute: Tally,
    pub query_attribute: Tally,
    pub other: Tally,
    pub duration_ms: u64,
}

impl EvalReport {
    pub fn family(&self, family: QuestionFamily) -> &Tally {
        match family {
            QuestionFamily::Count => &self.count,
            QuestionFamily::Exist => &self.exist,
            QuestionFamily::CompareNumber => &self.compare_number,
            QuestionFamily::CompareAttribute => &self.compare_attribute,
            QuestionFamily::QueryAttribute => &self.query_attribute,
        }
    }

    fn bucket_mut(&mut self, family: Option<QuestionFamily>) -> &mut Tally {
        match family {
            Some(QuestionFamily::Count) => &mut self.count,
            Some(QuestionFamily::Exist) => &mut self.exist,
            Some(QuestionFamily::CompareNumber) => &mut self.compare_number,
            Some(QuestionFamily::CompareAttribute) => &mut self.compare_attribute,
            Some(QuestionFamily::QueryAttribute) => &mut self.query_attribute,
            None => &mut self.other,
        }
    }

    /// Sum over every bucket; overall accuracy is `correct / total` of this.
    pub fn overall(&self) -> Tally {
        let mut sum = Tally::default();
        for family in QuestionFamily::ALL {
            sum.add(self.family(family));
        }
        sum.add(&self.other);
        sum
    }

    /// Tally equality, ignoring the wall clock.
    pub fn same_tallies(&self, other: &EvalReport) -> bool {
        QuestionFamily::ALL
            .iter()
            .all(|&f| self.family(f) == other.family(f))
            && self.other == other.other
    }
}

/// How one question fared.
#[derive(Clone, Debug)]
pub struct QuestionOutcome {
    /// Index of the question in the questions file.
    pub index: usize,
    pub family: Option<QuestionFamily>,
    pub answer: Answer,
    pub truth: Option<String>,
    pub correct: bool,
    pub trace: Option<String>,
}

/// An [`EvalReport`] plus the per-question outcomes behind it.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub report: EvalReport,
    pub outcomes: Vec<QuestionOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

/// Parse a target sentence and answer it; parse errors are the NULL answer.
pub fn answer_sentence(fb: &FactBase, text: &str) -> Answer {
    match sentence::parse(text) {
        Ok(program) => infer::answer(fb, &program),
        Err(error) => {
            log::debug!("sentence rejected, answering NULL: {error}");
            Answer::Null
        }
    }
}

/// Run the pipeline over a scenes file and a questions file.
///
/// Fact bases are built once per scene and shared across its questions. A
/// question that fails anywhere — missing scene, malformed program,
/// compilation, codec round-trip, inference — scores as incorrect with a NULL
/// answer; it never aborts the run.
pub fn run_dataset(
    scenes_path: &Path,
    questions_path: &Path,
    options: &RunOptions,
) -> Result<RunSummary, RunError> {
    let scenes = load_scenes(scenes_path)?;
    let questions = load_questions(questions_path)?;

    let start = Instant::now();
    let mut fact_bases: BTreeMap<usize, Option<FactBase>> = BTreeMap::new();
    let mut report = EvalReport::default();
    let mut outcomes = Vec::new();

    let selected = questions
        .iter()
        .enumerate()
        .filter(|(_, q)| match options.family {
            None => true,
            Some(wanted) => family_of(q) == Some(wanted),
        })
        .take(options.limit.unwrap_or(usize::MAX));

    for (index, question) in selected {
        let family = family_of(question);
        let fact_base = fact_bases.entry(question.image_index).or_insert_with(|| {
            scenes.get(&question.image_index).and_then(|scene| {
                scene::ingest_scene(scene)
                    .map_err(|error| log::warn!("scene {}: {error}", question.image_index))
                    .ok()
            })
        });

        let (answer, trace) = match fact_base {
            Some(fb) => answer_question(fb, question, options),
            None => (
                Answer::Null,
                options.trace.then(|| "scene unavailable\n".into()),
            ),
        };
        let correct = match &question.answer {
            Some(truth) => answer.matches(truth),
            None => false,
        };

        let bucket = report.bucket_mut(family);
        bucket.total += 1;
        if correct {
            bucket.correct += 1;
        }
        if answer == Answer::Null {
            bucket.null += 1;
        }
        outcomes.push(QuestionOutcome {
            index,
            family,
            answer,
            truth: question.answer.clone(),
            correct,
            trace,
        });
    }

    report.duration_ms = start.elapsed().as_millis() as u64;
    Ok(RunSummary { report, outcomes })
}

fn family_of(question: &QuestionRecord) -> Option<QuestionFamily> {
    let program = FunctionalProgram::new(question.program.clone()).ok()?;
    compile::classify(&program).ok()
}

fn answer_question(
    fb: &FactBase,
    question: &QuestionRecord,
    options: &RunOptions,
) -> (Answer, Option<String>) {
    let null = |reason: String| {
        log::debug!("question answered NULL: {reason}");
        (Answer::Null, options.trace.then(|| format!("{reason}\n")))
    };

    let program = match FunctionalProgram::new(question.program.clone()) {
        Ok(program) => program,
        Err(error) => return null(error.to_string()),
    };
    let rules = match compile::compile(&program) {
        Ok(rules) => rules,
        Err(error) => return null(error.to_string()),
    };
    let rules = if options.via_sentence {
        let serialized = match sentence::serialize(&rules) {
            Ok(sentence) => sentence,
            Err(error) => return null(error.to_string()),
        };
        match sentence::parse(serialized.as_str()) {
            Ok(parsed) => parsed,
            Err(error) => return null(error.to_string()),
        }
    } else {
        rules
    };

    if options.trace {
        let (answer, trace) = infer::answer_with_trace(fb, &rules);
        (answer, Some(trace))
    } else {
        (infer::answer(fb, &rules), None)
    }
}

fn load_scenes(path: &Path) -> Result<BTreeMap<usize, SceneGraph>, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let entries = scene::scenes_from_json(&text).map_err(|error| RunError::Format {
        path: path.to_path_buf(),
        detail: error.to_string(),
    })?;
    Ok(entries
        .into_iter()
        .map(|entry| (entry.image_index, entry.scene))
        .collect())
}

fn load_questions(path: &Path) -> Result<Vec<QuestionRecord>, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    compile::questions_from_json(&text).map_err(|error| RunError::Format {
        path: path.to_path_buf(),
        detail: error.to_string(),
    })
}

/// Render a report: a per-family accuracy table, or stable-keyed JSON.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut json = serde_json::to_string_pretty(report).expect("reports always serialize");
            json.push('\n');
            json
        }
        ReportFormat::Text => {
            let overall = report.overall();
            let cell = |tally: &Tally| match tally.accuracy() {
                Some(accuracy) => format!("{:.1}", accuracy * 100.0),
                None => "n/a".to_string(),
            };
            let columns: Vec<(&str, String)> = QuestionFamily::ALL
                .iter()
                .map(|&family| {
                    (
                        match family {
                            QuestionFamily::Count => "Count",
                            QuestionFamily::Exist => "Exist",
                            QuestionFamily::CompareNumber => "Compare Number",
                            QuestionFamily::CompareAttribute => "Compare Attribute",
                            QuestionFamily::QueryAttribute => "Query Attribute",
                        },
                        cell(report.family(family)),
                    )
                })
                .chain([("Overall", cell(&overall))])
                .collect();

            let mut header = String::new();
            let mut row = String::new();
            for (name, value) in &columns {
                let width = name.len().max(5);
                header.push_str(&format!("{name:>width$}  "));
                row.push_str(&format!("{value:>width$}  "));
            }
            let mut out = format!("{}\n{}\n", header.trim_end(), row.trim_end());
            out.push_str(&format!(
                "{} questions, {} correct, {} null, {} ms\n",
                overall.total, overall.correct, overall.null, report.duration_ms
            ));
            if report.other.total > 0 {
                out.push_str(&format!(
                    "unclassified questions: {} (tallied in Overall only)\n",
                    report.other.total
                ));
            }
            out
        }
    }
}
