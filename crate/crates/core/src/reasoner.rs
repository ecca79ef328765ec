//! The per-question reasoning loop: enumerate grounded actions, filter them,
//! ask the LLM to pick one under methodology guidance, execute it, and
//! repeat until an answer is given or the step cap is hit.
//!
//! No failure escapes as an error; every way an episode can end is encoded
//! in the trace outcome.

use serde::{Deserialize, Serialize};

use crate::candidates::{enumerate_candidates, filter_candidates, DEFAULT_TOP_K};
use crate::dsl::{
    execute_action, parse_action, render_action, ActionExpr, ActionOutcome, StepEnv,
};
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::Result;
use crate::llm::{CompletionRequest, LlmClient};
use crate::memory::{select_methodology, Episode, EpisodeStep, MethodologyCluster};
use crate::prompts::{action_selection_prompt, HistoryLine};
use crate::tkg::TemporalKg;

/// Default reasoning step cap.
pub const DEFAULT_MAX_STEPS: usize = 5;
/// Default number of re-prompts after a rejected or unparsable response.
pub const DEFAULT_PARSE_RETRIES: usize = 2;
/// Ranked answer lists are truncated to this length.
pub const RANKED_ANSWER_CAP: usize = 10;

/// Knobs of the reasoning loop, including the three ablation switches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReasonerConfig {
    pub max_steps: usize,
    pub top_k: usize,
    pub use_methodology: bool,
    pub use_clustering: bool,
    pub use_filter: bool,
    pub parse_retries: usize,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            max_steps: DEFAULT_MAX_STEPS,
            top_k: DEFAULT_TOP_K,
            use_methodology: true,
            use_clustering: true,
            use_filter: true,
            parse_retries: DEFAULT_PARSE_RETRIES,
        }
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Answered,
    StepCapReached,
    NoCandidates,
    ParseFailure,
}

impl TraceOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceOutcome::Answered => "answered",
            TraceOutcome::StepCapReached => "step_cap_reached",
            TraceOutcome::NoCandidates => "no_candidates",
            TraceOutcome::ParseFailure => "parse_failure",
        }
    }
}

/// One committed step: the prompt sent, the raw response, the parsed action
/// (absent when parsing never succeeded), and what executing it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub prompt: String,
    pub raw_response: String,
    pub action: Option<String>,
    pub result_summary: String,
    pub candidates: Vec<String>,
}

/// Full record of one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methodology: Option<String>,
    pub steps: Vec<TraceStep>,
    pub outcome: TraceOutcome,
    /// Answer literal first, then the remaining working-list entities in
    /// result order, deduplicated, truncated to [`RANKED_ANSWER_CAP`].
    pub ranked_answers: Vec<String>,
}

impl Trace {
    /// Convert into a history episode. The caller supplies the question
    /// embedding and, for labeled training questions, the gold answer with
    /// the correctness verdict.
    pub fn to_episode(
        &self,
        embedding: EmbeddingVector,
        gold_answer: Option<String>,
        correct: Option<bool>,
    ) -> Episode {
        Episode {
            question: self.question.clone(),
            embedding,
            steps: self
                .steps
                .iter()
                .map(|step| EpisodeStep {
                    index: step.index,
                    candidates: step.candidates.clone(),
                    chosen: step
                        .action
                        .clone()
                        .unwrap_or_else(|| "(no parsable action)".to_string()),
                    result: step.result_summary.clone(),
                })
                .collect(),
            final_answer: self
                .ranked_answers
                .first()
                .cloned()
                .unwrap_or_default(),
            gold_answer,
            correct,
        }
    }
}

/// Render the action-selection prompt for one decision.
pub fn build_action_prompt(
    question: &str,
    methodology: Option<&str>,
    history: &[TraceStep],
    available: &[String],
    feedback: Option<&str>,
) -> String {
    let lines: Vec<HistoryLine> = history
        .iter()
        .filter_map(|step| {
            step.action.as_ref().map(|action| HistoryLine {
                action: action.clone(),
                result: step.result_summary.clone(),
            })
        })
        .collect();
    action_selection_prompt(question, methodology, &lines, available, feedback)
}

/// Parse a raw model response into an action; the error text doubles as
/// next-turn feedback.
pub fn parse_decision(raw: &str) -> Result<ActionExpr> {
    parse_action(raw)
}

/// A non-answer action is admitted iff the menu contains it, where the
/// optional time slots of entity queries and the time arguments of list
/// filters are free: the prompt explicitly invites the model to substitute
/// a concrete time into a presented template.
fn menu_admits(menu: &[ActionExpr], chosen: &ActionExpr) -> bool {
    menu.iter().any(|item| match (item, chosen) {
        (
            ActionExpr::GetTailEntity {
                head: mh,
                relation: mr,
                ..
            },
            ActionExpr::GetTailEntity {
                head: ch,
                relation: cr,
                ..
            },
        ) => mh == ch && mr == cr,
        (
            ActionExpr::GetHeadEntity {
                tail: mt,
                relation: mr,
                ..
            },
            ActionExpr::GetHeadEntity {
                tail: ct,
                relation: cr,
                ..
            },
        ) => mt == ct && mr == cr,
        (ActionExpr::GetBefore { .. }, ActionExpr::GetBefore { .. }) => true,
        (ActionExpr::GetAfter { .. }, ActionExpr::GetAfter { .. }) => true,
        (ActionExpr::GetBetween { .. }, ActionExpr::GetBetween { .. }) => true,
        (a, b) => a == b,
    })
}

/// Run the full reasoning loop for one question.
///
/// `anchors` are resolved entity identifiers (the question's annotated
/// subjects); unknown ones are ignored. When `cfg.use_methodology` is set
/// and clusters are supplied, the closest cluster's methodology guides every
/// prompt of the episode.
pub fn answer_question(
    question: &str,
    anchors: &[String],
    kg: &TemporalKg,
    clusters: Option<&[MethodologyCluster]>,
    llm: &dyn LlmClient,
    embedder: &dyn Embedder,
    cfg: &ReasonerConfig,
) -> Trace {
    let selected = if cfg.use_methodology {
        clusters.and_then(|cs| select_methodology(cs, question, embedder).ok())
    } else {
        None
    };
    let (cluster_id, methodology) = match selected {
        Some((id, text)) => (Some(id), Some(text)),
        None => (None, None),
    };

    let known_anchors: Vec<String> = {
        let mut seen = Vec::new();
        for anchor in anchors {
            if kg.contains_entity(anchor) && !seen.contains(anchor) {
                seen.push(anchor.clone());
            }
        }
        seen
    };

    let mut env = StepEnv::new();
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut outcome = TraceOutcome::StepCapReached;
    let mut final_literal: Option<String> = None;

    'episode: for step_index in 0..cfg.max_steps {
        let step_anchors: Vec<String> = if step_index == 0 {
            known_anchors.clone()
        } else {
            // Entities discovered so far, then the original question anchors
            // so the agent can always return to them.
            let mut merged = env.current().entities();
            for anchor in &known_anchors {
                if !merged.contains(anchor) {
                    merged.push(anchor.clone());
                }
            }
            merged
        };

        let enumerated = enumerate_candidates(kg, &env, &step_anchors, question)
            .unwrap_or_default();
        if enumerated.is_empty() {
            outcome = TraceOutcome::NoCandidates;
            break;
        }

        let (menu, menu_texts) = if cfg.use_filter {
            let set = filter_candidates(
                &enumerated,
                question,
                kg,
                &env,
                embedder,
                cfg.top_k,
                step_index,
            )
            .unwrap_or_default();
            if set.is_empty() {
                outcome = TraceOutcome::NoCandidates;
                break;
            }
            (set.exprs(), set.canonical_texts())
        } else {
            // Ablated filter: present everything, unranked and uncapped.
            let texts = enumerated.iter().map(render_action).collect();
            (enumerated, texts)
        };

        let mut decision: Option<ActionExpr> = None;
        let mut last_prompt = String::new();
        let mut last_raw = String::new();

        for _attempt in 0..=cfg.parse_retries {
            let feedback = env.feedback.take();
            last_prompt = build_action_prompt(
                question,
                methodology.as_deref(),
                &steps,
                &menu_texts,
                feedback.as_deref(),
            );
            let request = CompletionRequest::action_selection(last_prompt.clone());
            last_raw = match llm.complete(&request) {
                Ok(raw) => raw,
                Err(e) => {
                    steps.push(TraceStep {
                        index: step_index,
                        prompt: last_prompt,
                        raw_response: String::new(),
                        action: None,
                        result_summary: format!("backend failure: {e}"),
                        candidates: menu_texts,
                    });
                    outcome = TraceOutcome::ParseFailure;
                    break 'episode;
                }
            };
            match parse_decision(&last_raw) {
                Ok(expr) if expr.is_answer() || menu_admits(&menu, &expr) => {
                    decision = Some(expr);
                    break;
                }
                Ok(expr) => {
                    env.feedback = Some(format!(
                        "the action {} is not one of the available actions; choose an action \
                         from the list exactly as shown",
                        render_action(&expr)
                    ));
                }
                Err(e) => {
                    env.feedback = Some(e.to_string());
                }
            }
        }

        let Some(chosen) = decision else {
            steps.push(TraceStep {
                index: step_index,
                prompt: last_prompt,
                raw_response: last_raw,
                action: None,
                result_summary: env
                    .feedback
                    .take()
                    .unwrap_or_else(|| "no parsable action".into()),
                candidates: menu_texts,
            });
            outcome = TraceOutcome::ParseFailure;
            break;
        };

        let canonical = render_action(&chosen);
        let result_summary = match execute_action(&chosen, kg, &env) {
            Ok(ActionOutcome::Final(answer)) => {
                final_literal = Some(answer.literal.clone());
                outcome = TraceOutcome::Answered;
                format!("final answer: {}", answer.literal)
            }
            Ok(ActionOutcome::Results(results)) => {
                env.update(&results);
                results.display_truncated(10)
            }
            Err(e) => format!("execution failed: {e}"),
        };
        steps.push(TraceStep {
            index: step_index,
            prompt: last_prompt,
            raw_response: last_raw,
            action: Some(canonical),
            result_summary,
            candidates: menu_texts,
        });
        if outcome == TraceOutcome::Answered {
            break;
        }
    }

    let mut ranked: Vec<String> = Vec::new();
    if let Some(literal) = final_literal {
        ranked.push(literal);
    }
    for entity in env.current().entities() {
        if !ranked.contains(&entity) {
            ranked.push(entity);
        }
    }
    ranked.truncate(RANKED_ANSWER_CAP);

    Trace {
        question: question.to_string(),
        cluster_id,
        methodology,
        steps,
        outcome,
        ranked_answers: ranked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashedBowEmbedder;
    use crate::llm::ScriptedClient;
    use crate::time::Timestamp;
    use crate::tkg::TemporalFact;

    fn ts(text: &str) -> Timestamp {
        Timestamp::parse(text).unwrap()
    }

    fn q1_kg() -> TemporalKg {
        TemporalKg::from_facts(
            [TemporalFact::point(
                "City_Mayor_(Philippines)",
                "Praise_or_endorse",
                "Ona",
                ts("2014-10-07"),
            )],
            [],
        )
    }

    #[test]
    fn scripted_walk_answers_in_three_steps() {
        let kg = q1_kg();
        let llm = ScriptedClient::from_responses([
            "Action:\n$getTime(City_Mayor_(Philippines),Praise_or_endorse,Ona)$\nReason: anchor the event.",
            "Action:\n$getFirst({entities})$\nReason: earliest occurrence.",
            "Action:\n$answer(2014-10)$\nReason: month asked.",
        ]);
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "In which month did the City Mayor of Philippines first praise Ona?",
            &["City_Mayor_(Philippines)".to_string(), "Ona".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.outcome, TraceOutcome::Answered);
        assert_eq!(trace.steps.len(), 3);
        assert_eq!(trace.ranked_answers[0], "2014-10");
    }

    #[test]
    fn never_answering_policy_hits_the_step_cap() {
        let kg = q1_kg();
        let llm = ScriptedClient::from_responses(vec![
            "$getTime(City_Mayor_(Philippines),Praise_or_endorse,Ona)$";
            5
        ]);
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "irrelevant",
            &["City_Mayor_(Philippines)".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.outcome, TraceOutcome::StepCapReached);
        assert_eq!(trace.steps.len(), DEFAULT_MAX_STEPS);
    }

    #[test]
    fn isolated_anchor_ends_with_no_candidates() {
        let kg = TemporalKg::from_facts(
            [TemporalFact::point("A", "r", "B", ts("2014"))],
            [("Loner".to_string(), "alias".to_string())],
        );
        let llm = ScriptedClient::from_responses(Vec::<String>::new());
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "q",
            &["Loner".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.outcome, TraceOutcome::NoCandidates);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn unparsable_responses_exhaust_retries_then_fail() {
        let kg = q1_kg();
        let llm = ScriptedClient::from_responses([
            "I think the answer is obvious",
            "still no action here",
            "nope",
        ]);
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "q",
            &["Ona".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.outcome, TraceOutcome::ParseFailure);
        assert_eq!(trace.steps.len(), 1);
        assert!(trace.steps[0].action.is_none());
    }

    #[test]
    fn out_of_menu_actions_are_rejected_with_feedback() {
        let kg = q1_kg();
        // First response walks off the menu; the retry stays on it.
        let llm = ScriptedClient::from_responses([
            "$getTailEntity(Ona,Made_up_relation,no time)$",
            "$getTime(City_Mayor_(Philippines),Praise_or_endorse,Ona)$",
        ]);
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "q",
            &["City_Mayor_(Philippines)".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        let first = &trace.steps[0];
        assert_eq!(
            first.action.as_deref(),
            Some("$getTime(City_Mayor_(Philippines),Praise_or_endorse,Ona)$")
        );
        assert!(first.prompt.contains("not one of the available actions"));
    }

    #[test]
    fn refined_time_slots_stay_in_menu() {
        let kg = TemporalKg::from_facts(
            [
                TemporalFact::point("Russia", "Express_intent_to_cooperate", "Japan", ts("2005-11-02")),
                TemporalFact::point("South_Korea", "Express_intent_to_cooperate", "Japan", ts("2005-11-16")),
                TemporalFact::point("China", "Express_intent_to_cooperate", "Japan", ts("2006-03-01")),
            ],
            [],
        );
        // The menu offers getHeadEntity(Japan, ..., no time); the model adds
        // a time constraint, which must be admitted.
        let llm = ScriptedClient::from_responses([
            "$getHeadEntity(Japan,Express_intent_to_cooperate,2005-11)$",
            "$answer(South_Korea)$",
        ]);
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "Who wanted to cooperate with Japan in November, 2005?",
            &["Japan".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.outcome, TraceOutcome::Answered);
        assert_eq!(trace.steps.len(), 2);
        assert_eq!(trace.ranked_answers[0], "South_Korea");
        assert!(trace.steps[0].result_summary.contains("Russia"));
        assert!(!trace.steps[0].result_summary.contains("China"));
    }

    #[test]
    fn ranked_answers_lead_with_the_literal_then_env_entities() {
        let kg = TemporalKg::from_facts(
            [
                TemporalFact::point("A", "r", "B", ts("2014-01-01")),
                TemporalFact::point("C", "r", "B", ts("2014-02-01")),
            ],
            [],
        );
        let llm = ScriptedClient::from_responses([
            "$getHeadEntity(B,r,no time)$",
            "$answer(A)$",
        ]);
        let embedder = HashedBowEmbedder::default();
        let trace = answer_question(
            "who r'd B?",
            &["B".to_string()],
            &kg,
            None,
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.ranked_answers, vec!["A".to_string(), "C".to_string()]);
    }

    #[test]
    fn methodology_flows_into_the_prompt() {
        let kg = q1_kg();
        let embedder = HashedBowEmbedder::default();
        let clusters = vec![MethodologyCluster {
            id: 0,
            centroid: embedder.embed("any question").unwrap(),
            member_indices: vec![],
            methodology: Some("Anchor the time first.".into()),
        }];
        let llm = ScriptedClient::from_responses(["$answer(Ona)$"]);
        let trace = answer_question(
            "any question",
            &["Ona".to_string()],
            &kg,
            Some(&clusters),
            &llm,
            &embedder,
            &ReasonerConfig::default(),
        );
        assert_eq!(trace.cluster_id, Some(0));
        assert!(trace.steps[0].prompt.contains("Methodology: Anchor the time first."));
        // Ablated methodology leaves the slot empty.
        let llm2 = ScriptedClient::from_responses(["$answer(Ona)$"]);
        let ablated_cfg = ReasonerConfig {
            use_methodology: false,
            ..ReasonerConfig::default()
        };
        let ablated = answer_question(
            "any question",
            &["Ona".to_string()],
            &kg,
            Some(&clusters),
            &llm2,
            &embedder,
            &ablated_cfg,
        );
        assert!(ablated.steps[0].prompt.contains("Methodology: (none)"));
    }
}
