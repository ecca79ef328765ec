//! Candidate action enumeration and filtration.
//!
//! Enumeration walks the 1-hop neighborhood of the current anchors and
//! instantiates every action template that is grounded there; filtration
//! keeps only candidates whose trial execution returns something, ranked by
//! semantic similarity to the question, capped at the top K.

use crate::dsl::{execute_action, render_action, ActionExpr, ActionOutcome, StepEnv};
use crate::embed::{cosine_similarity, Embedder};
use crate::error::Result;
use crate::time::{extract_timestamps, Timestamp};
use crate::tkg::{Direction, TemporalKg};

/// Default filtration cap.
pub const DEFAULT_TOP_K: usize = 20;

/// One surviving candidate: executed non-empty at construction time.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub expr: ActionExpr,
    pub score: f64,
    pub result_size: usize,
}

/// The filtered, similarity-ranked action menu for one step.
#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub step_index: usize,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn exprs(&self) -> Vec<ActionExpr> {
        self.candidates.iter().map(|c| c.expr.clone()).collect()
    }

    pub fn canonical_texts(&self) -> Vec<String> {
        self.candidates
            .iter()
            .map(|c| render_action(&c.expr))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }
}

/// Enumerate every grounded action for the current environment.
///
/// Per anchor and incident pair: outgoing edges yield
/// `getTailEntity(anchor, r, no time)` and `getTime(anchor, r, neighbor)`;
/// incoming edges the mirrored `getHeadEntity(anchor, r, no time)` and
/// `getTime(neighbor, r, anchor)`. Once a working list exists, list
/// operators are instantiated with every timestamp literal in the question
/// plus every timestamp in the working list, and `answer(top item)` is
/// offered. Duplicates are removed by canonical text, first occurrence wins.
pub fn enumerate_candidates(
    kg: &TemporalKg,
    env: &StepEnv,
    anchors: &[String],
    question: &str,
) -> Result<Vec<ActionExpr>> {
    let mut out: Vec<ActionExpr> = Vec::new();
    let mut seen_text: Vec<String> = Vec::new();
    let push = |expr: ActionExpr, out: &mut Vec<ActionExpr>, seen: &mut Vec<String>| {
        let text = render_action(&expr);
        if !seen.contains(&text) {
            seen.push(text);
            out.push(expr);
        }
    };

    let mut visited_anchors: Vec<&String> = Vec::new();
    for anchor in anchors {
        if visited_anchors.contains(&anchor) {
            continue;
        }
        visited_anchors.push(anchor);
        let subgraph = kg.one_hop_subgraph(anchor)?;
        for pair in &subgraph.pairs {
            match pair.direction {
                Direction::Outgoing => {
                    push(
                        ActionExpr::GetTailEntity {
                            head: anchor.clone(),
                            relation: pair.relation.clone(),
                            time: None,
                        },
                        &mut out,
                        &mut seen_text,
                    );
                    push(
                        ActionExpr::GetTime {
                            head: anchor.clone(),
                            relation: pair.relation.clone(),
                            tail: pair.neighbor.clone(),
                        },
                        &mut out,
                        &mut seen_text,
                    );
                }
                Direction::Incoming => {
                    push(
                        ActionExpr::GetHeadEntity {
                            tail: anchor.clone(),
                            relation: pair.relation.clone(),
                            time: None,
                        },
                        &mut out,
                        &mut seen_text,
                    );
                    push(
                        ActionExpr::GetTime {
                            head: pair.neighbor.clone(),
                            relation: pair.relation.clone(),
                            tail: anchor.clone(),
                        },
                        &mut out,
                        &mut seen_text,
                    );
                }
            }
        }
    }

    if !env.current().is_empty() {
        push(ActionExpr::GetFirst, &mut out, &mut seen_text);
        push(ActionExpr::GetLast, &mut out, &mut seen_text);

        let mut times: Vec<Timestamp> = extract_timestamps(question);
        for ts in env.current().timestamps() {
            if !times.contains(&ts) {
                times.push(ts);
            }
        }
        for ts in &times {
            push(ActionExpr::GetBefore { time: *ts }, &mut out, &mut seen_text);
            push(ActionExpr::GetAfter { time: *ts }, &mut out, &mut seen_text);
        }
        for from in &times {
            for to in &times {
                if from <= to {
                    push(
                        ActionExpr::GetBetween {
                            from: *from,
                            to: *to,
                        },
                        &mut out,
                        &mut seen_text,
                    );
                }
            }
        }

        if let Some(top) = env.current().first() {
            push(
                ActionExpr::Answer {
                    literal: top.entity.clone(),
                },
                &mut out,
                &mut seen_text,
            );
        }
    }

    Ok(out)
}

/// Trial-execute every candidate against a sandboxed view of the
/// environment, drop the ones that error or come back empty, score the
/// survivors by cosine similarity to the question, and keep the top `k`.
///
/// Ordering is similarity descending, ties by canonical text ascending.
/// Trial execution never mutates `env`.
pub fn filter_candidates(
    candidates: &[ActionExpr],
    question: &str,
    kg: &TemporalKg,
    env: &StepEnv,
    embedder: &dyn Embedder,
    k: usize,
    step_index: usize,
) -> Result<CandidateSet> {
    let question_vec = embedder.embed(question)?;
    let mut survivors: Vec<(Candidate, String)> = Vec::new();
    for expr in candidates {
        let result_size = match execute_action(expr, kg, env) {
            Ok(ActionOutcome::Results(rs)) if !rs.is_empty() => rs.len(),
            Ok(ActionOutcome::Final(fa)) => fa.support.len().max(1),
            // Empty results and execution errors fail the feasibility test.
            Ok(ActionOutcome::Results(_)) | Err(_) => continue,
        };
        let text = render_action(expr);
        let similarity_text = text.replace('_', " ");
        let score = cosine_similarity(&question_vec, &embedder.embed(&similarity_text)?)
            .expect("embedder yields a fixed dimension");
        survivors.push((
            Candidate {
                expr: expr.clone(),
                score,
                result_size,
            },
            text,
        ));
    }
    survivors.sort_by(|(a, a_text), (b, b_text)| {
        b.score
            .partial_cmp(&a.score)
            .expect("cosine is finite")
            .then_with(|| a_text.cmp(b_text))
    });
    survivors.truncate(k);
    Ok(CandidateSet {
        step_index,
        candidates: survivors.into_iter().map(|(c, _)| c).collect(),
    })
}
