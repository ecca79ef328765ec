//! The nine-function action language the agent speaks: parsing raw model
//! output, rendering canonical action text, and executing actions against a
//! temporal knowledge graph and a per-episode environment.
//!
//! Canonical text is bit-exact: `$fn(arg1,arg2,...)$` with no spaces after
//! commas, the `{entities}` placeholder for the working list, and `no time`
//! for an absent time constraint.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;
use crate::tkg::TemporalKg;

/// A parsed, validated instance of one of the nine action templates.
///
/// List operators (`getBetween`, `getBefore`, `getAfter`, `getFirst`,
/// `getLast`) operate on the `{entities}` placeholder, which resolves to the
/// most recent non-empty [`ResultSet`] of the episode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionExpr {
    GetTailEntity {
        head: String,
        relation: String,
        time: Option<Timestamp>,
    },
    GetHeadEntity {
        tail: String,
        relation: String,
        time: Option<Timestamp>,
    },
    GetTime {
        head: String,
        relation: String,
        tail: String,
    },
    GetBetween {
        from: Timestamp,
        to: Timestamp,
    },
    GetBefore {
        time: Timestamp,
    },
    GetAfter {
        time: Timestamp,
    },
    GetFirst,
    GetLast,
    Answer {
        literal: String,
    },
}

impl ActionExpr {
    pub fn function_name(&self) -> &'static str {
        match self {
            ActionExpr::GetTailEntity { .. } => "getTailEntity",
            ActionExpr::GetHeadEntity { .. } => "getHeadEntity",
            ActionExpr::GetTime { .. } => "getTime",
            ActionExpr::GetBetween { .. } => "getBetween",
            ActionExpr::GetBefore { .. } => "getBefore",
            ActionExpr::GetAfter { .. } => "getAfter",
            ActionExpr::GetFirst => "getFirst",
            ActionExpr::GetLast => "getLast",
            ActionExpr::Answer { .. } => "answer",
        }
    }

    pub fn is_answer(&self) -> bool {
        matches!(self, ActionExpr::Answer { .. })
    }

    /// True when the action reads the `{entities}` placeholder.
    pub fn uses_placeholder(&self) -> bool {
        matches!(
            self,
            ActionExpr::GetBetween { .. }
                | ActionExpr::GetBefore { .. }
                | ActionExpr::GetAfter { .. }
                | ActionExpr::GetFirst
                | ActionExpr::GetLast
        )
    }
}

/// One `(entity, timestamp)` pair produced by an action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResultItem {
    pub entity: String,
    pub time: Timestamp,
}

impl ResultItem {
    pub fn new(entity: impl Into<String>, time: Timestamp) -> Self {
        ResultItem {
            entity: entity.into(),
            time,
        }
    }
}

/// An ordered, deduplicated list of `(entity, timestamp)` pairs: the value
/// every action produces and the `{entities}` binding for the next step.
///
/// Items are sorted ascending by timestamp interval start, ties broken by
/// entity identifier.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResultSet {
    items: Vec<ResultItem>,
}

impl ResultSet {
    pub fn new(items: Vec<ResultItem>) -> Self {
        let mut set = ResultSet { items };
        set.normalize();
        set
    }

    fn normalize(&mut self) {
        self.items.sort_by(|a, b| {
            (a.time.interval_start(), &a.entity, a.time.interval_end()).cmp(&(
                b.time.interval_start(),
                &b.entity,
                b.time.interval_end(),
            ))
        });
        self.items.dedup();
    }

    pub fn items(&self) -> &[ResultItem] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn first(&self) -> Option<&ResultItem> {
        self.items.first()
    }

    /// Entity identifiers in list order, deduplicated.
    pub fn entities(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for item in &self.items {
            if !seen.contains(&item.entity) {
                seen.push(item.entity.clone());
            }
        }
        seen
    }

    /// Distinct timestamps in list order.
    pub fn timestamps(&self) -> Vec<Timestamp> {
        let mut seen = Vec::new();
        for item in &self.items {
            if !seen.contains(&item.time) {
                seen.push(item.time);
            }
        }
        seen
    }

    /// Render at most `max` items in the exchange format,
    /// e.g. `entities = [('Ona', '2014-10-07'), ...]`.
    pub fn display_truncated(&self, max: usize) -> String {
        let mut out = String::from("entities = [");
        for (i, item) in self.items.iter().take(max).enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("('{}', '{}')", item.entity, item.time));
        }
        if self.items.len() > max {
            out.push_str(", ...");
        }
        out.push(']');
        out
    }
}

impl fmt::Display for ResultSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_truncated(usize::MAX))
    }
}

/// Terminal value of an episode: the literal passed to `answer(...)` plus
/// the working list at answer time, kept for top-k ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalAnswer {
    pub literal: String,
    pub support: ResultSet,
}

/// What executing one action yields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionOutcome {
    Results(ResultSet),
    Final(FinalAnswer),
}

/// Per-episode mutable state: the `{entities}` binding and the feedback text
/// shown on the next prompt after a rejected or unparsable response.
#[derive(Debug, Clone, Default)]
pub struct StepEnv {
    current: ResultSet,
    pub feedback: Option<String>,
}

impl StepEnv {
    pub fn new() -> Self {
        StepEnv::default()
    }

    /// The most recent non-empty result of this episode; empty before the
    /// first productive step.
    pub fn current(&self) -> &ResultSet {
        &self.current
    }

    /// Rebind `{entities}` iff the result is non-empty.
    pub fn update(&mut self, result: &ResultSet) {
        if !result.is_empty() {
            self.current = result.clone();
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

const FUNCTION_NAMES: [&str; 9] = [
    "getTailEntity",
    "getHeadEntity",
    "getTime",
    "getBetween",
    "getBefore",
    "getAfter",
    "getFirst",
    "getLast",
    "answer",
];

/// Parse raw model output into a validated [`ActionExpr`].
///
/// The action span is located in priority order: the first `$...$` span after
/// an `Action:` marker, then the first `$...$` span anywhere, then a bare
/// `fn(...)` pattern. Entity and relation surfaces are normalized (quotes
/// stripped, whitespace runs collapsed to underscores); function names accept
/// camelCase and snake_case spellings.
pub fn parse_action(text: &str) -> Result<ActionExpr> {
    let span = locate_action_span(text)
        .ok_or_else(|| Error::Parse("no action found in the response".into()))?;
    parse_call(&span)
}

fn locate_action_span(text: &str) -> Option<String> {
    if let Some(pos) = text.find("Action:") {
        if let Some(span) = first_dollar_span(&text[pos..]) {
            return Some(span);
        }
    }
    if let Some(span) = first_dollar_span(text) {
        return Some(span);
    }
    bare_call_span(text)
}

fn first_dollar_span(text: &str) -> Option<String> {
    let mut rest = text;
    loop {
        let open = rest.find('$')?;
        let after = &rest[open + 1..];
        let close = after.find('$')?;
        let inner = after[..close].trim();
        if !inner.is_empty() {
            return Some(inner.to_string());
        }
        rest = &after[close + 1..];
    }
}

fn bare_call_span(text: &str) -> Option<String> {
    let pattern = regex::Regex::new(
        r"(?i)\b(get_?tail_?entity|get_?head_?entity|get_?time|get_?between|get_?before|get_?after|get_?first|get_?last|answer)\s*\(",
    )
    .expect("static regex");
    let m = pattern.find(text)?;
    let open = text[m.start()..].find('(')? + m.start();
    let mut depth = 0usize;
    for (offset, ch) in text[open..].char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(text[m.start()..open + offset + 1].to_string());
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_call(span: &str) -> Result<ActionExpr> {
    let span = span.trim();
    let open = span
        .find('(')
        .ok_or_else(|| Error::Parse(format!("no action call in {span:?}")))?;
    if !span.ends_with(')') {
        return Err(Error::Parse(format!("unbalanced action call in {span:?}")));
    }
    let raw_name = span[..open].trim();
    let inner = &span[open + 1..span.len() - 1];
    let name = canonical_function(raw_name)
        .ok_or_else(|| Error::Parse(format!("unknown function name {raw_name:?}")))?;
    let args = split_top_level(inner);
    build_expr(name, &args)
}

fn canonical_function(raw: &str) -> Option<&'static str> {
    let folded: String = raw
        .chars()
        .filter(|c| *c != '_')
        .flat_map(char::to_lowercase)
        .collect();
    FUNCTION_NAMES
        .iter()
        .find(|name| {
            let canon: String = name.chars().flat_map(char::to_lowercase).collect();
            canon == folded
        })
        .copied()
}

/// Split on commas at depth zero, respecting parentheses, brackets, and
/// braces so entity names like `City_Mayor_(Philippines)` survive.
fn split_top_level(inner: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for ch in inner.chars() {
        match ch {
            '(' | '[' | '{' => {
                depth += 1;
                current.push(ch);
            }
            ')' | ']' | '}' => {
                depth -= 1;
                current.push(ch);
            }
            ',' if depth == 0 => {
                parts.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    let last = current.trim().to_string();
    if !last.is_empty() || !parts.is_empty() {
        parts.push(last);
    }
    parts
}

fn build_expr(name: &'static str, args: &[String]) -> Result<ActionExpr> {
    let arity_err = |expected: &str| {
        Error::Parse(format!(
            "{name} expects {expected} argument(s), found {}",
            args.len()
        ))
    };
    match name {
        "getTailEntity" | "getHeadEntity" => {
            if args.len() != 2 && args.len() != 3 {
                return Err(arity_err("2 or 3"));
            }
            let first = surface_arg(name, &args[0])?;
            let relation = surface_arg(name, &args[1])?;
            let time = match args.get(2) {
                None => None,
                Some(raw) => optional_time_arg(name, raw)?,
            };
            if name == "getTailEntity" {
                Ok(ActionExpr::GetTailEntity {
                    head: first,
                    relation,
                    time,
                })
            } else {
                Ok(ActionExpr::GetHeadEntity {
                    tail: first,
                    relation,
                    time,
                })
            }
        }
        "getTime" => {
            if args.len() != 3 {
                return Err(arity_err("3"));
            }
            Ok(ActionExpr::GetTime {
                head: surface_arg(name, &args[0])?,
                relation: surface_arg(name, &args[1])?,
                tail: surface_arg(name, &args[2])?,
            })
        }
        "getBetween" => {
            if args.len() != 3 {
                return Err(arity_err("3"));
            }
            placeholder_arg(name, &args[0])?;
            Ok(ActionExpr::GetBetween {
                from: time_arg(name, &args[1])?,
                to: time_arg(name, &args[2])?,
            })
        }
        "getBefore" | "getAfter" => {
            if args.len() != 2 {
                return Err(arity_err("2"));
            }
            placeholder_arg(name, &args[0])?;
            let time = time_arg(name, &args[1])?;
            if name == "getBefore" {
                Ok(ActionExpr::GetBefore { time })
            } else {
                Ok(ActionExpr::GetAfter { time })
            }
        }
        "getFirst" | "getLast" => {
            if args.len() != 1 {
                return Err(arity_err("1"));
            }
            placeholder_arg(name, &args[0])?;
            if name == "getFirst" {
                Ok(ActionExpr::GetFirst)
            } else {
                Ok(ActionExpr::GetLast)
            }
        }
        "answer" => {
            if args.len() != 1 {
                return Err(arity_err("1"));
            }
            let literal = strip_quotes(args[0].trim()).trim().to_string();
            if literal.is_empty() {
                return Err(Error::Parse("answer requires a non-empty literal".into()));
            }
            Ok(ActionExpr::Answer { literal })
        }
        _ => unreachable!("canonical_function only yields known names"),
    }
}

fn strip_quotes(s: &str) -> &str {
    for quote in ['"', '\''] {
        if s.len() >= 2 && s.starts_with(quote) && s.ends_with(quote) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Normalize an entity or relation surface: strip quotes, collapse
/// whitespace runs to single underscores.
fn surface_arg(name: &str, raw: &str) -> Result<String> {
    let cleaned = strip_quotes(raw.trim());
    let normalized: String = cleaned.split_whitespace().collect::<Vec<_>>().join("_");
    if normalized.is_empty() {
        return Err(Error::Parse(format!("{name} has an empty argument")));
    }
    Ok(normalized)
}

fn is_no_time(raw: &str) -> bool {
    matches!(
        raw.trim().to_ascii_lowercase().as_str(),
        "no time" | "no_time" | "notime" | "none"
    )
}

fn optional_time_arg(name: &str, raw: &str) -> Result<Option<Timestamp>> {
    let cleaned = strip_quotes(raw.trim());
    if is_no_time(cleaned) {
        return Ok(None);
    }
    Ok(Some(time_arg(name, cleaned)?))
}

fn time_arg(name: &str, raw: &str) -> Result<Timestamp> {
    let cleaned = strip_quotes(raw.trim());
    Timestamp::parse(cleaned)
        .map_err(|e| Error::Parse(format!("bad timestamp in {name}: {e}")))
}

fn placeholder_arg(name: &str, raw: &str) -> Result<()> {
    if raw.trim().eq_ignore_ascii_case("{entities}") {
        Ok(())
    } else {
        Err(Error::Parse(format!(
            "{name} takes the {{entities}} placeholder, found {raw:?}"
        )))
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Canonical single-line form: `$fn(arg1,arg2,...)$`.
pub fn render_action(expr: &ActionExpr) -> String {
    let body = match expr {
        ActionExpr::GetTailEntity {
            head,
            relation,
            time,
        } => format!("getTailEntity({head},{relation},{})", render_time(time)),
        ActionExpr::GetHeadEntity {
            tail,
            relation,
            time,
        } => format!("getHeadEntity({tail},{relation},{})", render_time(time)),
        ActionExpr::GetTime {
            head,
            relation,
            tail,
        } => format!("getTime({head},{relation},{tail})"),
        ActionExpr::GetBetween { from, to } => format!("getBetween({{entities}},{from},{to})"),
        ActionExpr::GetBefore { time } => format!("getBefore({{entities}},{time})"),
        ActionExpr::GetAfter { time } => format!("getAfter({{entities}},{time})"),
        ActionExpr::GetFirst => "getFirst({entities})".to_string(),
        ActionExpr::GetLast => "getLast({entities})".to_string(),
        ActionExpr::Answer { literal } => format!("answer({literal})"),
    };
    format!("${body}$")
}

fn render_time(time: &Option<Timestamp>) -> String {
    match time {
        Some(ts) => ts.to_string(),
        None => "no time".to_string(),
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Execute a validated action against the graph and environment.
///
/// Entity and time queries pair every matching fact with the fact's start
/// timestamp. List operators read the `{entities}` binding; using one before
/// any result exists is an execution error. `answer` never mutates the
/// environment: it returns the literal plus the current working list.
pub fn execute_action(
    expr: &ActionExpr,
    kg: &TemporalKg,
    env: &StepEnv,
) -> Result<ActionOutcome> {
    let resolve_list = || -> Result<&ResultSet> {
        if env.current().is_empty() {
            Err(Error::Execution(
                "{entities} is unbound: no prior step produced a result".into(),
            ))
        } else {
            Ok(env.current())
        }
    };

    let results = match expr {
        ActionExpr::GetTailEntity {
            head,
            relation,
            time,
        } => {
            let facts = kg.match_facts(Some(head), Some(relation), None, time.as_ref())?;
            ResultSet::new(
                facts
                    .iter()
                    .map(|f| ResultItem::new(f.tail.clone(), f.start))
                    .collect(),
            )
        }
        ActionExpr::GetHeadEntity {
            tail,
            relation,
            time,
        } => {
            let facts = kg.match_facts(None, Some(relation), Some(tail), time.as_ref())?;
            ResultSet::new(
                facts
                    .iter()
                    .map(|f| ResultItem::new(f.head.clone(), f.start))
                    .collect(),
            )
        }
        ActionExpr::GetTime {
            head,
            relation,
            tail,
        } => {
            let facts = kg.match_facts(Some(head), Some(relation), Some(tail), None)?;
            ResultSet::new(
                facts
                    .iter()
                    .map(|f| ResultItem::new(f.head.clone(), f.start))
                    .collect(),
            )
        }
        ActionExpr::GetBefore { time } => {
            let list = resolve_list()?;
            ResultSet::new(
                list.items()
                    .iter()
                    .filter(|item| item.time.strictly_before(time))
                    .cloned()
                    .collect(),
            )
        }
        ActionExpr::GetAfter { time } => {
            let list = resolve_list()?;
            ResultSet::new(
                list.items()
                    .iter()
                    .filter(|item| item.time.strictly_after(time))
                    .cloned()
                    .collect(),
            )
        }
        ActionExpr::GetBetween { from, to } => {
            let list = resolve_list()?;
            let window_start = from.interval_start();
            let window_end = to.interval_end();
            ResultSet::new(
                list.items()
                    .iter()
                    .filter(|item| {
                        item.time.interval_start() <= window_end
                            && item.time.interval_end() >= window_start
                    })
                    .cloned()
                    .collect(),
            )
        }
        ActionExpr::GetFirst => {
            let list = resolve_list()?;
            let earliest = list
                .items()
                .iter()
                .map(|item| item.time.interval_start())
                .min()
                .expect("non-empty list");
            ResultSet::new(
                list.items()
                    .iter()
                    .filter(|item| item.time.interval_start() == earliest)
                    .cloned()
                    .collect(),
            )
        }
        ActionExpr::GetLast => {
            let list = resolve_list()?;
            let latest = list
                .items()
                .iter()
                .map(|item| item.time.interval_start())
                .max()
                .expect("non-empty list");
            ResultSet::new(
                list.items()
                    .iter()
                    .filter(|item| item.time.interval_start() == latest)
                    .cloned()
                    .collect(),
            )
        }
        ActionExpr::Answer { literal } => {
            return Ok(ActionOutcome::Final(FinalAnswer {
                literal: literal.clone(),
                support: env.current().clone(),
            }));
        }
    };
    Ok(ActionOutcome::Results(results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tkg::TemporalFact;

    fn ts(text: &str) -> Timestamp {
        Timestamp::parse(text).unwrap()
    }

    fn exec(expr: &ActionExpr, kg: &TemporalKg, env: &StepEnv) -> ResultSet {
        match execute_action(expr, kg, env).unwrap() {
            ActionOutcome::Results(rs) => rs,
            other => panic!("expected results, got {other:?}"),
        }
    }

    #[test]
    fn parses_the_action_marker_form() {
        let raw = "Action:\n$getTime(City_Mayor_(Philippines),Praise_or_endorse,Ona)$\nReason: the first step.";
        let expr = parse_action(raw).unwrap();
        assert_eq!(
            expr,
            ActionExpr::GetTime {
                head: "City_Mayor_(Philippines)".into(),
                relation: "Praise_or_endorse".into(),
                tail: "Ona".into(),
            }
        );
    }

    #[test]
    fn parses_answer_time_literal() {
        assert_eq!(
            parse_action("$answer(2014-10)$").unwrap(),
            ActionExpr::Answer {
                literal: "2014-10".into()
            }
        );
    }

    #[test]
    fn parses_entities_placeholder() {
        assert_eq!(parse_action("$getFirst({entities})$").unwrap(), ActionExpr::GetFirst);
    }

    #[test]
    fn parses_bare_call_and_snake_case() {
        let expr = parse_action("I will call get_head_entity(Iran, Criticize or denounce, no time) now").unwrap();
        assert_eq!(
            expr,
            ActionExpr::GetHeadEntity {
                tail: "Iran".into(),
                relation: "Criticize_or_denounce".into(),
                time: None,
            }
        );
    }

    #[test]
    fn no_span_is_a_parse_error() {
        let err = parse_action("I think the answer is X").unwrap_err();
        assert!(err.to_string().contains("no action"), "got {err}");
    }

    #[test]
    fn unknown_function_is_named() {
        let err = parse_action("$getEverything(A,B)$").unwrap_err();
        assert!(err.to_string().contains("getEverything"), "got {err}");
    }

    #[test]
    fn arity_error_names_the_function() {
        let err = parse_action("$getTime(A,B)$").unwrap_err();
        assert!(err.to_string().contains("getTime"), "got {err}");
    }

    #[test]
    fn bad_timestamp_is_a_parse_error() {
        let err = parse_action("$getBefore({entities},October)$").unwrap_err();
        assert!(err.to_string().contains("timestamp"), "got {err}");
    }

    #[test]
    fn renders_canonically() {
        assert_eq!(
            render_action(&ActionExpr::GetTime {
                head: "Pervez_Musharraf".into(),
                relation: "Criticize_or_denounce".into(),
                tail: "Iran".into(),
            }),
            "$getTime(Pervez_Musharraf,Criticize_or_denounce,Iran)$"
        );
        assert_eq!(
            render_action(&ActionExpr::GetHeadEntity {
                tail: "Iran".into(),
                relation: "Criticize_or_denounce".into(),
                time: None,
            }),
            "$getHeadEntity(Iran,Criticize_or_denounce,no time)$"
        );
        assert_eq!(render_action(&ActionExpr::GetFirst), "$getFirst({entities})$");
    }

    #[test]
    fn get_time_pairs_head_with_fact_start() {
        let kg = TemporalKg::from_facts(
            [TemporalFact::point(
                "City_Mayor_(Philippines)",
                "Praise_or_endorse",
                "Ona",
                ts("2014-10-07"),
            )],
            [],
        );
        let expr = parse_action("$getTime(City_Mayor_(Philippines),Praise_or_endorse,Ona)$").unwrap();
        let rs = exec(&expr, &kg, &StepEnv::new());
        assert_eq!(
            rs.items(),
            &[ResultItem::new("City_Mayor_(Philippines)", ts("2014-10-07"))]
        );
    }

    #[test]
    fn get_first_is_identity_on_singletons() {
        let kg = TemporalKg::from_facts([], []);
        let mut env = StepEnv::new();
        let singleton = ResultSet::new(vec![ResultItem::new("X", ts("2014-10-07"))]);
        env.update(&singleton);
        assert_eq!(exec(&ActionExpr::GetFirst, &kg, &env), singleton);
    }

    #[test]
    fn before_then_last_reproduces_the_paper_walk() {
        let kg = TemporalKg::from_facts([], []);
        let mut env = StepEnv::new();
        env.update(&ResultSet::new(vec![
            ResultItem::new("Shirin_Ebadi", ts("2005-01-05")),
            ResultItem::new("Angela_Merkel", ts("2006-01-16")),
            ResultItem::new("X", ts("2006-02-01")),
        ]));
        let before = exec(
            &ActionExpr::GetBefore {
                time: ts("2006-01-17"),
            },
            &kg,
            &env,
        );
        env.update(&before);
        let last = exec(&ActionExpr::GetLast, &kg, &env);
        assert_eq!(
            last.items(),
            &[ResultItem::new("Angela_Merkel", ts("2006-01-16"))]
        );
    }

    #[test]
    fn placeholder_without_history_is_an_execution_error() {
        let kg = TemporalKg::from_facts([], []);
        let err = execute_action(&ActionExpr::GetFirst, &kg, &StepEnv::new()).unwrap_err();
        assert!(matches!(err, Error::Execution(_)));
    }

    #[test]
    fn answer_carries_support_and_leaves_env_alone() {
        let kg = TemporalKg::from_facts([], []);
        let mut env = StepEnv::new();
        let support = ResultSet::new(vec![ResultItem::new("A", ts("2014"))]);
        env.update(&support);
        let before = env.current().clone();
        let out = execute_action(
            &ActionExpr::Answer {
                literal: "2014-10".into(),
            },
            &kg,
            &env,
        )
        .unwrap();
        match out {
            ActionOutcome::Final(fa) => {
                assert_eq!(fa.literal, "2014-10");
                assert_eq!(fa.support, support);
            }
            other => panic!("expected final answer, got {other:?}"),
        }
        assert_eq!(env.current(), &before);
    }

    #[test]
    fn empty_results_do_not_rebind_the_placeholder() {
        let mut env = StepEnv::new();
        let full = ResultSet::new(vec![ResultItem::new("A", ts("2014"))]);
        env.update(&full);
        env.update(&ResultSet::default());
        assert_eq!(env.current(), &full);
    }

    #[test]
    fn result_sets_sort_and_dedup() {
        let rs = ResultSet::new(vec![
            ResultItem::new("B", ts("2014-10-07")),
            ResultItem::new("A", ts("2014-10-07")),
            ResultItem::new("A", ts("2013")),
            ResultItem::new("A", ts("2013")),
        ]);
        let rendered: Vec<String> = rs
            .items()
            .iter()
            .map(|i| format!("{}@{}", i.entity, i.time))
            .collect();
        assert_eq!(rendered, vec!["A@2013", "A@2014-10-07", "B@2014-10-07"]);
    }

    #[test]
    fn display_matches_the_exchange_format() {
        let rs = ResultSet::new(vec![ResultItem::new("City_Mayor_(Philippines)", ts("2014-10-07"))]);
        assert_eq!(
            rs.to_string(),
            "entities = [('City_Mayor_(Philippines)', '2014-10-07')]"
        );
    }
}
