//! Shared test support: independent brute-force oracles and seeded random
//! generators.
//!
//! The oracles re-derive interval bounds from raw timestamp fields and scan
//! fact slices directly, so they share no execution path with the indexed
//! store or the DSL executors they check.

#![allow(dead_code)]

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tkgqa_core::dsl::ActionExpr;
use tkgqa_core::time::Timestamp;
use tkgqa_core::tkg::{TemporalFact, TemporalKg};

pub type Item = (String, Timestamp);

/// Inclusive day-interval of a timestamp, derived from its raw fields.
pub fn interval(ts: &Timestamp) -> (NaiveDate, NaiveDate) {
    let (year, month, day) = ts.parts();
    let ymd = |y: i32, m: u32, d: u32| NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
    match (month, day) {
        (Some(m), Some(d)) => (ymd(year, m, d), ymd(year, m, d)),
        (Some(m), None) => {
            let first = ymd(year, m, 1);
            let next = if m == 12 {
                ymd(year + 1, 1, 1)
            } else {
                ymd(year, m + 1, 1)
            };
            (first, next.pred_opt().expect("valid date"))
        }
        _ => (ymd(year, 1, 1), ymd(year, 12, 31)),
    }
}

fn fact_window(fact: &TemporalFact) -> (NaiveDate, NaiveDate) {
    (interval(&fact.start).0, interval(&fact.end).1)
}

fn windows_overlap(a: (NaiveDate, NaiveDate), b: (NaiveDate, NaiveDate)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Normalize a result list: ascending interval start, ties by entity, then
/// interval end; exact duplicates removed.
pub fn normalize_items(mut items: Vec<Item>) -> Vec<Item> {
    items.sort_by(|(ea, ta), (eb, tb)| {
        let (sa, na) = interval(ta);
        let (sb, nb) = interval(tb);
        (sa, ea, na).cmp(&(sb, eb, nb))
    });
    items.dedup();
    items
}

/// Linear-scan fact matching: the oracle for the indexed store.
pub fn scan_facts<'a>(
    facts: &'a [TemporalFact],
    head: Option<&str>,
    relation: Option<&str>,
    tail: Option<&str>,
    time: Option<&Timestamp>,
) -> Vec<&'a TemporalFact> {
    let mut hits: Vec<&TemporalFact> = facts
        .iter()
        .filter(|f| head.is_none_or(|h| f.head == h))
        .filter(|f| relation.is_none_or(|r| f.relation == r))
        .filter(|f| tail.is_none_or(|t| f.tail == t))
        .filter(|f| time.is_none_or(|ts| windows_overlap(fact_window(f), interval(ts))))
        .collect();
    hits.sort_by(|a, b| {
        let ka = (interval(&a.start), &a.head, &a.relation, &a.tail);
        let kb = (interval(&b.start), &b.head, &b.relation, &b.tail);
        ka.cmp(&kb)
    });
    hits
}

/// What the reference executor produced.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Items(Vec<Item>),
    Answer { literal: String, support: Vec<Item> },
    /// Unbound `{entities}` placeholder.
    Error,
}

/// Straight-line reference execution of one action over a fact slice and a
/// plain working list.
pub fn execute(expr: &ActionExpr, facts: &[TemporalFact], current: &[Item]) -> OracleOutcome {
    let need_list = || -> Option<&[Item]> {
        if current.is_empty() {
            None
        } else {
            Some(current)
        }
    };
    match expr {
        ActionExpr::GetTailEntity {
            head,
            relation,
            time,
        } => OracleOutcome::Items(normalize_items(
            scan_facts(facts, Some(head), Some(relation), None, time.as_ref())
                .into_iter()
                .map(|f| (f.tail.clone(), f.start))
                .collect(),
        )),
        ActionExpr::GetHeadEntity {
            tail,
            relation,
            time,
        } => OracleOutcome::Items(normalize_items(
            scan_facts(facts, None, Some(relation), Some(tail), time.as_ref())
                .into_iter()
                .map(|f| (f.head.clone(), f.start))
                .collect(),
        )),
        ActionExpr::GetTime {
            head,
            relation,
            tail,
        } => OracleOutcome::Items(normalize_items(
            scan_facts(facts, Some(head), Some(relation), Some(tail), None)
                .into_iter()
                .map(|f| (f.head.clone(), f.start))
                .collect(),
        )),
        ActionExpr::GetBefore { time } => match need_list() {
            None => OracleOutcome::Error,
            Some(list) => OracleOutcome::Items(normalize_items(
                list.iter()
                    .filter(|(_, ts)| interval(ts).1 < interval(time).0)
                    .cloned()
                    .collect(),
            )),
        },
        ActionExpr::GetAfter { time } => match need_list() {
            None => OracleOutcome::Error,
            Some(list) => OracleOutcome::Items(normalize_items(
                list.iter()
                    .filter(|(_, ts)| interval(ts).0 > interval(time).1)
                    .cloned()
                    .collect(),
            )),
        },
        ActionExpr::GetBetween { from, to } => match need_list() {
            None => OracleOutcome::Error,
            Some(list) => {
                let window = (interval(from).0, interval(to).1);
                OracleOutcome::Items(normalize_items(
                    list.iter()
                        .filter(|(_, ts)| windows_overlap(interval(ts), window))
                        .cloned()
                        .collect(),
                ))
            }
        },
        ActionExpr::GetFirst => match need_list() {
            None => OracleOutcome::Error,
            Some(list) => {
                let earliest = list.iter().map(|(_, ts)| interval(ts).0).min().unwrap();
                OracleOutcome::Items(normalize_items(
                    list.iter()
                        .filter(|(_, ts)| interval(ts).0 == earliest)
                        .cloned()
                        .collect(),
                ))
            }
        },
        ActionExpr::GetLast => match need_list() {
            None => OracleOutcome::Error,
            Some(list) => {
                let latest = list.iter().map(|(_, ts)| interval(ts).0).max().unwrap();
                OracleOutcome::Items(normalize_items(
                    list.iter()
                        .filter(|(_, ts)| interval(ts).0 == latest)
                        .cloned()
                        .collect(),
                ))
            }
        },
        ActionExpr::Answer { literal } => OracleOutcome::Answer {
            literal: literal.clone(),
            support: current.to_vec(),
        },
    }
}

// ---------------------------------------------------------------------------
// Seeded random generators
// ---------------------------------------------------------------------------

pub fn entity_pool() -> Vec<String> {
    (0..8).map(|i| format!("E{i}")).collect()
}

pub fn relation_pool() -> Vec<String> {
    (0..4).map(|i| format!("r{i}")).collect()
}

pub fn random_timestamp(rng: &mut ChaCha8Rng) -> Timestamp {
    let year = rng.gen_range(2000..2016);
    let month = rng.gen_range(1..=12u32);
    let day = rng.gen_range(1..=28u32);
    match rng.gen_range(0..3) {
        0 => Timestamp::parse(&format!("{year:04}")).unwrap(),
        1 => Timestamp::parse(&format!("{year:04}-{month:02}")).unwrap(),
        _ => Timestamp::parse(&format!("{year:04}-{month:02}-{day:02}")).unwrap(),
    }
}

pub fn random_facts(rng: &mut ChaCha8Rng, max_facts: usize) -> Vec<TemporalFact> {
    let entities = entity_pool();
    let relations = relation_pool();
    let count = rng.gen_range(0..=max_facts);
    let mut facts = Vec::with_capacity(count);
    for _ in 0..count {
        let head = entities.choose(rng).unwrap().clone();
        let tail = entities.choose(rng).unwrap().clone();
        let relation = relations.choose(rng).unwrap().clone();
        let a = random_timestamp(rng);
        let fact = if rng.gen_bool(0.2) {
            let b = random_timestamp(rng);
            let (start, end) = if a <= b { (a, b) } else { (b, a) };
            TemporalFact::new(head, relation, tail, start, end).unwrap()
        } else {
            TemporalFact::point(head, relation, tail, a)
        };
        facts.push(fact);
    }
    facts
}

pub fn random_kg(rng: &mut ChaCha8Rng, max_facts: usize) -> (TemporalKg, Vec<TemporalFact>) {
    let facts = random_facts(rng, max_facts);
    let kg = TemporalKg::from_facts(facts.clone(), []);
    // Deduplicated, sorted view for the oracle: scan the store's own fact
    // list would defeat independence, so rebuild from the raw generator
    // output with oracle-side dedup.
    let mut unique: Vec<TemporalFact> = Vec::new();
    for fact in facts {
        if !unique.contains(&fact) {
            unique.push(fact);
        }
    }
    (kg, unique)
}

pub fn random_items(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<Item> {
    let entities = entity_pool();
    let count = rng.gen_range(0..=max_len);
    (0..count)
        .map(|_| {
            (
                entities.choose(rng).unwrap().clone(),
                random_timestamp(rng),
            )
        })
        .collect()
}

/// One random, valid expression covering all nine templates.
pub fn random_expr(rng: &mut ChaCha8Rng) -> ActionExpr {
    let kind = rng.gen_range(0..9);
    random_expr_of(rng, kind)
}

/// A random expression of a fixed template (0..9), for stratified coverage.
pub fn random_expr_of(rng: &mut ChaCha8Rng, kind: usize) -> ActionExpr {
    let entities = entity_pool();
    let relations = relation_pool();
    let entity = |rng: &mut ChaCha8Rng| entities.choose(rng).unwrap().clone();
    let relation = |rng: &mut ChaCha8Rng| relations.choose(rng).unwrap().clone();
    match kind {
        0 => ActionExpr::GetTailEntity {
            head: entity(rng),
            relation: relation(rng),
            time: rng.gen_bool(0.5).then(|| random_timestamp(rng)),
        },
        1 => ActionExpr::GetHeadEntity {
            tail: entity(rng),
            relation: relation(rng),
            time: rng.gen_bool(0.5).then(|| random_timestamp(rng)),
        },
        2 => ActionExpr::GetTime {
            head: entity(rng),
            relation: relation(rng),
            tail: entity(rng),
        },
        3 => {
            let a = random_timestamp(rng);
            let b = random_timestamp(rng);
            let (from, to) = if interval(&a).0 <= interval(&b).0 {
                (a, b)
            } else {
                (b, a)
            };
            ActionExpr::GetBetween { from, to }
        }
        4 => ActionExpr::GetBefore {
            time: random_timestamp(rng),
        },
        5 => ActionExpr::GetAfter {
            time: random_timestamp(rng),
        },
        6 => ActionExpr::GetFirst,
        7 => ActionExpr::GetLast,
        _ => ActionExpr::Answer {
            literal: if rng.gen_bool(0.5) {
                entity(rng)
            } else {
                random_timestamp(rng).to_string()
            },
        },
    }
}
