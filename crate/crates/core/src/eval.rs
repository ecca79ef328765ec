//! Question-set loading, stratified sampling, answer matching, and the
//! Hits@k evaluation loop with per-type breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::llm::LlmClient;
use crate::memory::MethodologyCluster;
use crate::reasoner::{answer_question, ReasonerConfig, Trace};
use crate::time::{Granularity, Timestamp};
use crate::tkg::{normalize_surface, TemporalKg};

/// Question-set dialects; each carries its own category taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionFormat {
    MultiTq,
    CronQuestions,
}

impl std::str::FromStr for QuestionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multitq" => Ok(QuestionFormat::MultiTq),
            "cronquestions" | "cron" => Ok(QuestionFormat::CronQuestions),
            other => Err(Error::Config(format!("unknown question format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerType {
    Entity,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

fn default_split() -> Split {
    Split::Test
}

/// One evaluation question with its annotations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    #[serde(default, alias = "entities")]
    pub anchors: Vec<String>,
    #[serde(alias = "answers")]
    pub golds: Vec<String>,
    #[serde(alias = "atype")]
    pub answer_type: AnswerType,
    #[serde(alias = "qtype", alias = "qlabel")]
    pub category: String,
    #[serde(default, alias = "time_level", skip_serializing_if = "Option::is_none")]
    pub granularity: Option<Granularity>,
    #[serde(default = "default_split")]
    pub split: Split,
}

const MULTITQ_SIMPLE: [&str; 3] = ["equal", "before/after", "first/last"];
const MULTITQ_COMPLEX: [&str; 3] = ["equal-multi", "after-first", "before-last"];
const CRON_SIMPLE: [&str; 2] = ["simple-entity", "simple-time"];
const CRON_COMPLEX: [&str; 3] = ["time-join", "first/last", "before/after"];

/// Normalize a category label: lowercase, whitespace and underscores become
/// hyphens (slashes survive, e.g. `Before/After` -> `before/after`).
pub fn normalize_category(raw: &str) -> String {
    raw.trim()
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

fn category_tables(format: QuestionFormat) -> (&'static [&'static str], &'static [&'static str]) {
    match format {
        QuestionFormat::MultiTq => (&MULTITQ_SIMPLE, &MULTITQ_COMPLEX),
        QuestionFormat::CronQuestions => (&CRON_SIMPLE, &CRON_COMPLEX),
    }
}

/// Simple vs. complex, per the dataset's taxonomy.
pub fn question_type(format: QuestionFormat, category: &str) -> Result<&'static str> {
    let normalized = normalize_category(category);
    let (simple, complex) = category_tables(format);
    if simple.contains(&normalized.as_str()) {
        Ok("simple")
    } else if complex.contains(&normalized.as_str()) {
        Ok("complex")
    } else {
        Err(Error::Config(format!(
            "unknown category {category:?} for {format:?}; expected one of {:?}",
            simple.iter().chain(complex.iter()).collect::<Vec<_>>()
        )))
    }
}

/// Load a line-delimited question file, validating categories against the
/// format's taxonomy and the granularity/answer-type invariant.
pub fn load_questions(path: &Path, format: QuestionFormat) -> Result<Vec<QuestionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let load_err = |message: String| Error::Load {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        let mut record: QuestionRecord =
            serde_json::from_str(line).map_err(|e| load_err(e.to_string()))?;
        if record.golds.is_empty() {
            return Err(load_err(format!("record {} has no gold answers", record.id)));
        }
        question_type(format, &record.category).map_err(|e| load_err(e.to_string()))?;
        record.category = normalize_category(&record.category);
        match (record.answer_type, record.granularity) {
            (AnswerType::Time, None) => {
                return Err(load_err(format!(
                    "time-answer record {} is missing a granularity",
                    record.id
                )))
            }
            (AnswerType::Entity, Some(_)) => {
                return Err(load_err(format!(
                    "entity-answer record {} must not carry a granularity",
                    record.id
                )))
            }
            _ => {}
        }
        records.push(record);
    }
    Ok(records)
}

/// Proportional per-category sample of size `n` with largest-remainder
/// rounding and a seeded shuffle inside each category. Deterministic for a
/// fixed seed regardless of input order.
pub fn stratified_sample(
    records: &[QuestionRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<QuestionRecord>> {
    if n > records.len() {
        return Err(Error::Config(format!(
            "cannot sample {n} questions from {}",
            records.len()
        )));
    }
    let mut by_category: BTreeMap<String, Vec<&QuestionRecord>> = BTreeMap::new();
    for record in records {
        by_category.entry(record.category.clone()).or_default().push(record);
    }
    for group in by_category.values_mut() {
        group.sort_by(|a, b| a.id.cmp(&b.id));
    }

    let total = records.len();
    let mut quotas: Vec<(String, usize, f64)> = by_category
        .iter()
        .map(|(category, group)| {
            let exact = n as f64 * group.len() as f64 / total as f64;
            let floor = exact.floor() as usize;
            (category.clone(), floor, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|(_, q, _)| q).sum();
    let mut leftovers = n - assigned;
    // Largest remainder first; ties go to the lexicographically first name.
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        quotas[b]
            .2
            .partial_cmp(&quotas[a].2)
            .expect("finite remainders")
            .then_with(|| quotas[a].0.cmp(&quotas[b].0))
    });
    for idx in order {
        if leftovers == 0 {
            break;
        }
        quotas[idx].1 += 1;
        leftovers -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::with_capacity(n);
    for (category, quota, _) in quotas {
        let mut group = by_category.remove(&category).expect("category exists");
        group.shuffle(&mut rng);
        sample.extend(group.into_iter().take(quota).cloned());
    }
    Ok(sample)
}

/// Score one predicted literal against one gold literal.
///
/// Entities compare under the same normalization as entity resolution; time
/// answers truncate the prediction to the gold's granularity and compare
/// rendered text (a day-level prediction can match a month-level gold).
pub fn match_answer(
    predicted: &str,
    gold: &str,
    answer_type: AnswerType,
    granularity: Option<Granularity>,
) -> bool {
    match answer_type {
        AnswerType::Entity => normalize_surface(predicted) == normalize_surface(gold),
        AnswerType::Time => {
            let (Ok(predicted_ts), Ok(gold_ts)) =
                (Timestamp::parse(predicted), Timestamp::parse(gold))
            else {
                return predicted.trim() == gold.trim();
            };
            let target = granularity.unwrap_or_else(|| gold_ts.granularity());
            match (predicted_ts.truncate(target), gold_ts.truncate(target)) {
                (Some(p), Some(g)) => p.to_string() == g.to_string(),
                _ => false,
            }
        }
    }
}

/// Hit counts for one slice of the evaluation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsCell {
    pub count: usize,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
}

#[derive(Debug, Default)]
struct CellAccumulator {
    count: usize,
    hit1: usize,
    hit10: usize,
}

impl CellAccumulator {
    fn add(&mut self, rank: Option<usize>) {
        self.count += 1;
        if rank == Some(0) {
            self.hit1 += 1;
        }
        if rank.is_some_and(|r| r < 10) {
            self.hit10 += 1;
        }
    }

    fn finish(&self) -> MetricsCell {
        let denom = self.count.max(1) as f64;
        MetricsCell {
            count: self.count,
            hits_at_1: self.hit1 as f64 / denom,
            hits_at_10: self.hit10 as f64 / denom,
        }
    }
}

/// Evaluation results: overall and per-slice Hits@k, reasoning cost, and
/// outcome counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Which configuration produced this report (`full` or an ablation tag).
    pub ablation: String,
    pub overall: MetricsCell,
    pub by_question_type: BTreeMap<String, MetricsCell>,
    pub by_answer_type: BTreeMap<String, MetricsCell>,
    pub by_category: BTreeMap<String, MetricsCell>,
    pub average_steps: f64,
    pub outcomes: BTreeMap<String, usize>,
    /// The artifact-defined top-k ranking rule, reported alongside Hits@10.
    pub ranking_rule: String,
}

const RANKING_RULE: &str = "answer literal first, then remaining working-list entities in \
result order, deduplicated, truncated to 10";

impl MetricsReport {
    /// CSV of the per-category cells.
    pub fn category_csv(&self) -> String {
        let mut out = String::from("category,count,hits_at_1,hits_at_10\n");
        for (name, cell) in &self.by_category {
            let _ = writeln!(
                out,
                "{name},{},{:.6},{:.6}",
                cell.count, cell.hits_at_1, cell.hits_at_10
            );
        }
        out
    }

    /// Render a human-readable table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "configuration: {}", self.ablation);
        let _ = writeln!(out, "{:<24} {:>7} {:>9} {:>9}", "slice", "count", "hits@1", "hits@10");
        let mut row = |name: &str, cell: &MetricsCell| {
            let _ = writeln!(
                out,
                "{:<24} {:>7} {:>9.3} {:>9.3}",
                name, cell.count, cell.hits_at_1, cell.hits_at_10
            );
        };
        row("overall", &self.overall);
        for (name, cell) in &self.by_question_type {
            row(&format!("question-type/{name}"), cell);
        }
        for (name, cell) in &self.by_answer_type {
            row(&format!("answer-type/{name}"), cell);
        }
        for (name, cell) in &self.by_category {
            row(&format!("category/{name}"), cell);
        }
        let _ = writeln!(out, "average reasoning steps: {:.4}", self.average_steps);
        for (outcome, count) in &self.outcomes {
            let _ = writeln!(out, "outcome/{outcome}: {count}");
        }
        let _ = writeln!(out, "ranking rule: {}", self.ranking_rule);
        out
    }
}

/// Evaluate the reasoner over `records`.
///
/// Episodes are independent; `jobs > 1` runs them on a rayon pool (sequence
/// backends should stay at 1). Aggregation folds completed traces in record
/// order, so metrics are independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_run(
    records: &[QuestionRecord],
    format: QuestionFormat,
    cfg: &ReasonerConfig,
    kg: &TemporalKg,
    clusters: Option<&[MethodologyCluster]>,
    llm: &dyn LlmClient,
    embedder: &dyn Embedder,
    jobs: usize,
    ablation: &str,
) -> Result<(MetricsReport, Vec<Trace>)> {
    let run_one = |record: &QuestionRecord| -> Trace {
        let anchors: Vec<String> = record
            .anchors
            .iter()
            .filter_map(|surface| kg.resolve_entity(surface).ok())
            .collect();
        answer_question(&record.question, &anchors, kg, clusters, llm, embedder, cfg)
    };

    let traces: Vec<Trace> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            records.par_iter().map(run_one).collect()
        })
    } else {
        records.iter().map(run_one).collect()
    };

    let mut overall = CellAccumulator::default();
    let mut by_question_type: BTreeMap<String, CellAccumulator> = BTreeMap::new();
    let mut by_answer_type: BTreeMap<String, CellAccumulator> = BTreeMap::new();
    let mut by_category: BTreeMap<String, CellAccumulator> = BTreeMap::new();
    let mut outcomes: BTreeMap<String, usize> = BTreeMap::new();
    let mut total_steps = 0usize;

    for (record, trace) in records.iter().zip(&traces) {
        let rank = trace.ranked_answers.iter().position(|predicted| {
            record
                .golds
                .iter()
                .any(|gold| match_answer(predicted, gold, record.answer_type, record.granularity))
        });
        overall.add(rank);
        let qtype = question_type(format, &record.category)?;
        by_question_type.entry(qtype.to_string()).or_default().add(rank);
        let atype = match record.answer_type {
            AnswerType::Entity => "entity",
            AnswerType::Time => "time",
        };
        by_answer_type.entry(atype.to_string()).or_default().add(rank);
        by_category.entry(record.category.clone()).or_default().add(rank);
        *outcomes.entry(trace.outcome.as_str().to_string()).or_insert(0) += 1;
        total_steps += trace.steps.len();
    }

    let report = MetricsReport {
        ablation: ablation.to_string(),
        overall: overall.finish(),
        by_question_type: by_question_type.iter().map(|(k, v)| (k.clone(), v.finish())).collect(),
        by_answer_type: by_answer_type.iter().map(|(k, v)| (k.clone(), v.finish())).collect(),
        by_category: by_category.iter().map(|(k, v)| (k.clone(), v.finish())).collect(),
        average_steps: total_steps as f64 / records.len().max(1) as f64,
        outcomes,
        ranking_rule: RANKING_RULE.to_string(),
    };
    Ok((report, traces))
}

/// Write traces as line-delimited JSON, one episode per line.
pub fn save_traces(traces: &[Trace], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Storage(e.to_string()))?;
    let mut writer = BufWriter::new(file);
    for trace in traces {
        let line = serde_json::to_string(trace)?;
        writeln!(writer, "{line}").map_err(|e| Error::Storage(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Storage(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashedBowEmbedder;
    use crate::llm::ScriptedClient;
    use crate::tkg::TemporalFact;

    fn record(id: &str, category: &str, answer_type: AnswerType, golds: &[&str]) -> QuestionRecord {
        QuestionRecord {
            id: id.to_string(),
            question: format!("question {id}"),
            anchors: vec![],
            golds: golds.iter().map(|s| s.to_string()).collect(),
            answer_type,
            category: normalize_category(category),
            granularity: match answer_type {
                AnswerType::Time => Some(Granularity::Month),
                AnswerType::Entity => None,
            },
            split: Split::Test,
        }
    }

    #[test]
    fn before_last_is_complex_in_multitq() {
        assert_eq!(question_type(QuestionFormat::MultiTq, "Before Last").unwrap(), "complex");
        assert_eq!(question_type(QuestionFormat::MultiTq, "Equal").unwrap(), "simple");
        assert!(question_type(QuestionFormat::MultiTq, "Time Join").is_err());
        assert_eq!(question_type(QuestionFormat::CronQuestions, "Time Join").unwrap(), "complex");
    }

    #[test]
    fn loading_validates_category_and_granularity() {
        let good = r#"{"id":"q1","question":"when?","anchors":["A"],"golds":["2014-10"],"answer_type":"time","category":"First/Last","granularity":"month","split":"test"}"#;
        let bad_category = r#"{"id":"q2","question":"?","golds":["X"],"answer_type":"entity","category":"Nonsense"}"#;
        let no_granularity = r#"{"id":"q3","question":"?","golds":["2014"],"answer_type":"time","category":"Equal"}"#;

        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{good}").unwrap();
        let records = load_questions(file.path(), QuestionFormat::MultiTq).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].category, "first/last");

        for bad in [bad_category, no_granularity] {
            let mut file = tempfile::NamedTempFile::new().unwrap();
            writeln!(file, "{bad}").unwrap();
            assert!(load_questions(file.path(), QuestionFormat::MultiTq).is_err());
        }
    }

    #[test]
    fn empty_file_loads_empty() {
        let file = tempfile::NamedTempFile::new().unwrap();
        assert!(load_questions(file.path(), QuestionFormat::MultiTq).unwrap().is_empty());
    }

    #[test]
    fn sampling_all_records_returns_all() {
        let records: Vec<QuestionRecord> = (0..200)
            .map(|i| {
                let category = if i < 150 { "Equal" } else { "Before/After" };
                record(&format!("q{i:03}"), category, AnswerType::Entity, &["X"])
            })
            .collect();
        let sample = stratified_sample(&records, 200, 1).unwrap();
        assert_eq!(sample.len(), 200);
    }

    #[test]
    fn equal_categories_split_evenly() {
        let records: Vec<QuestionRecord> = (0..200)
            .map(|i| {
                let category = if i % 2 == 0 { "Equal" } else { "First/Last" };
                record(&format!("q{i:03}"), category, AnswerType::Entity, &["X"])
            })
            .collect();
        for seed in [0u64, 7, 99] {
            let sample = stratified_sample(&records, 10, seed).unwrap();
            let equal = sample.iter().filter(|r| r.category == "equal").count();
            assert_eq!(equal, 5, "seed {seed}");
            assert_eq!(sample.len(), 10);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_order_independent() {
        let records: Vec<QuestionRecord> = (0..60)
            .map(|i| record(&format!("q{i:02}"), if i % 3 == 0 { "Equal" } else { "Before/After" }, AnswerType::Entity, &["X"]))
            .collect();
        let mut reversed = records.clone();
        reversed.reverse();
        let a = stratified_sample(&records, 20, 5).unwrap();
        let b = stratified_sample(&records, 20, 5).unwrap();
        let c = stratified_sample(&reversed, 20, 5).unwrap();
        let ids = |s: &[QuestionRecord]| s.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        assert_eq!(ids(&a), ids(&c));
    }

    #[test]
    fn oversampling_errors() {
        let records = vec![record("q1", "Equal", AnswerType::Entity, &["X"])];
        assert!(stratified_sample(&records, 2, 0).is_err());
    }

    #[test]
    fn answer_matching_honors_granularity_and_normalization() {
        assert!(match_answer("2014-10-07", "2014-10", AnswerType::Time, Some(Granularity::Month)));
        assert!(!match_answer("2014-11-01", "2014-10", AnswerType::Time, Some(Granularity::Month)));
        assert!(match_answer("south korea", "South_Korea", AnswerType::Entity, None));
        assert!(!match_answer("north korea", "South_Korea", AnswerType::Entity, None));
        // A year-level prediction cannot satisfy a month-level gold.
        assert!(!match_answer("2014", "2014-10", AnswerType::Time, Some(Granularity::Month)));
    }

    #[test]
    fn definitional_two_question_fixture() {
        // One question answered correctly at rank 1, one at rank 3.
        let kg = TemporalKg::from_facts(
            [
                TemporalFact::point("A", "r", "B", Timestamp::parse("2001").unwrap()),
                TemporalFact::point("C", "r", "B", Timestamp::parse("2002").unwrap()),
                TemporalFact::point("D", "r", "B", Timestamp::parse("2003").unwrap()),
            ],
            [],
        );
        let mut first = record("q1", "Equal", AnswerType::Entity, &["A"]);
        first.anchors = vec!["B".to_string()];
        let mut second = record("q2", "Equal", AnswerType::Entity, &["D"]);
        second.anchors = vec!["B".to_string()];
        let llm = ScriptedClient::from_responses([
            "$getHeadEntity(B,r,no time)$",
            "$answer(A)$",
            "$getHeadEntity(B,r,no time)$",
            "$answer(A)$", // wrong literal; D sits at rank 3 of the ranked list
        ]);
        let embedder = HashedBowEmbedder::default();
        let (report, traces) = evaluate_run(
            &[first, second],
            QuestionFormat::MultiTq,
            &ReasonerConfig::default(),
            &kg,
            None,
            &llm,
            &embedder,
            1,
            "full",
        )
        .unwrap();
        assert_eq!(traces[1].ranked_answers, vec!["A", "C", "D"]);
        assert_eq!(report.overall.count, 2);
        assert!((report.overall.hits_at_1 - 0.5).abs() < 1e-12);
        assert!((report.overall.hits_at_10 - 1.0).abs() < 1e-12);
        assert!((report.average_steps - 2.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_invariant_to_record_order() {
        let kg = TemporalKg::from_facts(
            [TemporalFact::point("A", "r", "B", Timestamp::parse("2001").unwrap())],
            [],
        );
        let mut first = record("q1", "Equal", AnswerType::Entity, &["B"]);
        first.anchors = vec!["A".to_string()];
        let mut second = record("q2", "Equal", AnswerType::Entity, &["Missing"]);
        second.anchors = vec!["A".to_string()];
        // Every response is identical, so record order cannot change any
        // per-record result.
        let run = |records: &[QuestionRecord]| {
            let llm = ScriptedClient::from_responses(vec!["$answer(B)$"; records.len()]);
            let embedder = HashedBowEmbedder::default();
            evaluate_run(
                records,
                QuestionFormat::MultiTq,
                &ReasonerConfig::default(),
                &kg,
                None,
                &llm,
                &embedder,
                1,
                "full",
            )
            .unwrap()
            .0
        };
        let forward = run(&[first.clone(), second.clone()]);
        let backward = run(&[second, first]);
        assert_eq!(
            serde_json::to_string(&forward).unwrap(),
            serde_json::to_string(&backward).unwrap()
        );
    }

    #[test]
    fn cells_sum_to_overall_and_hits_are_monotone() {
        let records: Vec<QuestionRecord> = vec![
            record("q1", "Equal", AnswerType::Entity, &["X"]),
            record("q2", "Before Last", AnswerType::Entity, &["X"]),
        ];
        let kg = TemporalKg::from_facts([], []);
        let llm = ScriptedClient::from_responses(Vec::<String>::new());
        let embedder = HashedBowEmbedder::default();
        let (report, _) = evaluate_run(
            &records,
            QuestionFormat::MultiTq,
            &ReasonerConfig::default(),
            &kg,
            None,
            &llm,
            &embedder,
            1,
            "full",
        )
        .unwrap();
        let type_total: usize = report.by_question_type.values().map(|c| c.count).sum();
        let category_total: usize = report.by_category.values().map(|c| c.count).sum();
        assert_eq!(type_total, report.overall.count);
        assert_eq!(category_total, report.overall.count);
        for cell in report
            .by_question_type
            .values()
            .chain(report.by_answer_type.values())
            .chain(report.by_category.values())
            .chain(std::iter::once(&report.overall))
        {
            assert!(cell.hits_at_1 <= cell.hits_at_10 + 1e-12);
        }
    }
}
