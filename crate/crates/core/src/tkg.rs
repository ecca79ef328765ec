//! Temporal knowledge graph store: load, index, and query timestamped facts.
//!
//! Facts are `(head, relation, tail, [start, end])` edges. Point events carry
//! `start == end`; interval-valued graphs use a genuine range. The store is
//! immutable after construction, so concurrent readers need no coordination.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

/// Supported fact-file encodings.
///
/// `Tsv` covers both point-event exports (four columns) and interval exports
/// (five columns); a missing end column means `end = start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactFormat {
    Tsv,
}

/// One timestamped edge of the graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalFact {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TemporalFact {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
        start: Timestamp,
        end: Timestamp,
    ) -> Result<Self> {
        // Interval-start ordering: the end timestamp may be coarser.
        if start.interval_start() > end.interval_start() {
            return Err(Error::Precondition(format!(
                "fact interval start {start} after end {end}"
            )));
        }
        Ok(TemporalFact {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
            start,
            end,
        })
    }

    /// Point fact: a single-timestamp event.
    pub fn point(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
        at: Timestamp,
    ) -> Self {
        TemporalFact {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
            start: at,
            end: at,
        }
    }

    /// The fact's full day-interval intersects the timestamp's day-interval.
    pub fn overlaps(&self, time: &Timestamp) -> bool {
        self.start.interval_start() <= time.interval_end()
            && time.interval_start() <= self.end.interval_end()
    }

    fn sort_key(&self) -> (Timestamp, &str, &str, &str) {
        (self.start, &self.head, &self.relation, &self.tail)
    }
}

/// Direction of an incident pair relative to the subgraph center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outgoing,
    Incoming,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Outgoing => write!(f, "outgoing"),
            Direction::Incoming => write!(f, "incoming"),
        }
    }
}

/// One `(neighbor, relation, direction)` pair incident to a center entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IncidentPair {
    pub neighbor: String,
    pub relation: String,
    pub direction: Direction,
}

/// The 1-hop undirected neighborhood of an entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub center: String,
    pub pairs: Vec<IncidentPair>,
}

/// A fully indexed, immutable temporal knowledge graph.
#[derive(Debug)]
pub struct TemporalKg {
    facts: Vec<TemporalFact>,
    by_head: HashMap<String, Vec<usize>>,
    by_tail: HashMap<String, Vec<usize>>,
    by_relation: HashMap<String, Vec<usize>>,
    by_head_relation: HashMap<(String, String), Vec<usize>>,
    by_tail_relation: HashMap<(String, String), Vec<usize>>,
    entities: BTreeSet<String>,
    relations: BTreeSet<String>,
    // normalized surface -> canonical names sharing it
    normalized: BTreeMap<String, Vec<String>>,
    // alias surface (exact and normalized) -> canonical names
    aliases: BTreeMap<String, Vec<String>>,
    duplicates_dropped: usize,
}

/// Case- and underscore-insensitive form used for entity lookup.
pub fn normalize_surface(surface: &str) -> String {
    surface
        .to_lowercase()
        .split(|c: char| c == '_' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

impl TemporalKg {
    /// Build a graph from in-memory facts plus `(canonical, alias)` pairs.
    /// Duplicate facts are dropped; facts are stored sorted by
    /// `(start, head, relation, tail)` so every index yields results in
    /// query order.
    pub fn from_facts(
        facts: impl IntoIterator<Item = TemporalFact>,
        alias_pairs: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        let mut unique = Vec::new();
        let mut seen = HashSet::new();
        let mut duplicates_dropped = 0usize;
        for fact in facts {
            if seen.insert(fact.clone()) {
                unique.push(fact);
            } else {
                duplicates_dropped += 1;
            }
        }
        unique.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

        let mut kg = TemporalKg {
            facts: unique,
            by_head: HashMap::new(),
            by_tail: HashMap::new(),
            by_relation: HashMap::new(),
            by_head_relation: HashMap::new(),
            by_tail_relation: HashMap::new(),
            entities: BTreeSet::new(),
            relations: BTreeSet::new(),
            normalized: BTreeMap::new(),
            aliases: BTreeMap::new(),
            duplicates_dropped,
        };

        for (idx, fact) in kg.facts.iter().enumerate() {
            kg.by_head.entry(fact.head.clone()).or_default().push(idx);
            kg.by_tail.entry(fact.tail.clone()).or_default().push(idx);
            kg.by_relation
                .entry(fact.relation.clone())
                .or_default()
                .push(idx);
            kg.by_head_relation
                .entry((fact.head.clone(), fact.relation.clone()))
                .or_default()
                .push(idx);
            kg.by_tail_relation
                .entry((fact.tail.clone(), fact.relation.clone()))
                .or_default()
                .push(idx);
            kg.entities.insert(fact.head.clone());
            kg.entities.insert(fact.tail.clone());
            kg.relations.insert(fact.relation.clone());
        }

        for (canonical, alias) in alias_pairs {
            kg.entities.insert(canonical.clone());
            for key in [alias.clone(), normalize_surface(&alias)] {
                let entry = kg.aliases.entry(key).or_default();
                if !entry.contains(&canonical) {
                    entry.push(canonical.clone());
                }
            }
        }

        let entity_names: Vec<String> = kg.entities.iter().cloned().collect();
        for name in entity_names {
            kg.normalized
                .entry(normalize_surface(&name))
                .or_default()
                .push(name);
        }

        kg
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn facts(&self) -> &[TemporalFact] {
        &self.facts
    }

    pub fn contains_entity(&self, id: &str) -> bool {
        self.entities.contains(id)
    }

    /// All `(neighbor, relation, direction)` pairs incident to `entity`,
    /// deduplicated and sorted by `(relation, neighbor, direction)`.
    pub fn one_hop_subgraph(&self, entity: &str) -> Result<Subgraph> {
        if !self.contains_entity(entity) {
            return Err(Error::EntityNotFound(entity.to_string()));
        }
        let mut pairs = BTreeSet::new();
        for &idx in self.by_head.get(entity).map(Vec::as_slice).unwrap_or(&[]) {
            let fact = &self.facts[idx];
            pairs.insert(IncidentPair {
                neighbor: fact.tail.clone(),
                relation: fact.relation.clone(),
                direction: Direction::Outgoing,
            });
        }
        for &idx in self.by_tail.get(entity).map(Vec::as_slice).unwrap_or(&[]) {
            let fact = &self.facts[idx];
            pairs.insert(IncidentPair {
                neighbor: fact.head.clone(),
                relation: fact.relation.clone(),
                direction: Direction::Incoming,
            });
        }
        let mut pairs: Vec<IncidentPair> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| {
            (&a.relation, &a.neighbor, a.direction).cmp(&(&b.relation, &b.neighbor, b.direction))
        });
        Ok(Subgraph {
            center: entity.to_string(),
            pairs,
        })
    }

    /// All facts matching every bound field, sorted by
    /// `(start, head, relation, tail)`. A bound time matches a fact iff the
    /// fact's interval intersects the timestamp's day-interval. Unknown
    /// identifiers yield empty results.
    pub fn match_facts(
        &self,
        head: Option<&str>,
        relation: Option<&str>,
        tail: Option<&str>,
        time: Option<&Timestamp>,
    ) -> Result<Vec<&TemporalFact>> {
        if head.is_none() && relation.is_none() && tail.is_none() {
            return Err(Error::Precondition(
                "match_facts requires at least one of head/relation/tail".into(),
            ));
        }
        static EMPTY: &[usize] = &[];
        // Most selective available index; remaining fields filter below.
        let indices: &[usize] = match (head, relation, tail) {
            (Some(h), Some(r), _) => self
                .by_head_relation
                .get(&(h.to_string(), r.to_string()))
                .map(Vec::as_slice)
                .unwrap_or(EMPTY),
            (None, Some(r), Some(t)) => self
                .by_tail_relation
                .get(&(t.to_string(), r.to_string()))
                .map(Vec::as_slice)
                .unwrap_or(EMPTY),
            (Some(h), None, _) => self.by_head.get(h).map(Vec::as_slice).unwrap_or(EMPTY),
            (None, None, Some(t)) => self.by_tail.get(t).map(Vec::as_slice).unwrap_or(EMPTY),
            (None, Some(r), None) => self.by_relation.get(r).map(Vec::as_slice).unwrap_or(EMPTY),
            (None, None, None) => unreachable!("guarded above"),
        };
        let matches = indices
            .iter()
            .map(|&idx| &self.facts[idx])
            .filter(|fact| head.is_none_or(|h| fact.head == h))
            .filter(|fact| relation.is_none_or(|r| fact.relation == r))
            .filter(|fact| tail.is_none_or(|t| fact.tail == t))
            .filter(|fact| time.is_none_or(|ts| fact.overlaps(ts)))
            .collect();
        Ok(matches)
    }

    /// Map a surface form to its canonical entity identifier: exact match
    /// first, then case/underscore-insensitive match, then the alias table.
    pub fn resolve_entity(&self, surface: &str) -> Result<String> {
        if self.entities.contains(surface) {
            return Ok(surface.to_string());
        }
        let normalized = normalize_surface(surface);
        if let Some(candidates) = self.normalized.get(&normalized) {
            return Self::unique(surface, candidates);
        }
        for key in [surface.to_string(), normalized] {
            if let Some(candidates) = self.aliases.get(&key) {
                return Self::unique(surface, candidates);
            }
        }
        Err(Error::EntityNotFound(surface.to_string()))
    }

    fn unique(surface: &str, candidates: &[String]) -> Result<String> {
        match candidates {
            [only] => Ok(only.clone()),
            [] => Err(Error::EntityNotFound(surface.to_string())),
            many => Err(Error::AmbiguousEntity {
                surface: surface.to_string(),
                candidates: many.to_vec(),
            }),
        }
    }
}

/// Load a fact file: UTF-8, one fact per line, tab-separated
/// `head TAB relation TAB tail TAB start [TAB end]`. Blank lines are skipped.
pub fn load_facts(path: &Path, format: FactFormat) -> Result<TemporalKg> {
    let FactFormat::Tsv = format;
    let text = fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let facts = parse_fact_lines(&text, &path.display().to_string())?;
    Ok(TemporalKg::from_facts(facts, []))
}

fn parse_fact_lines(text: &str, path: &str) -> Result<Vec<TemporalFact>> {
    let mut facts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let load_err = |message: String| Error::Load {
            path: path.to_string(),
            line: lineno + 1,
            message,
        };
        if fields.len() < 4 || fields.len() > 5 {
            return Err(load_err(format!(
                "expected 4 or 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let start = Timestamp::parse(fields[3]).map_err(|e| load_err(e.to_string()))?;
        let end = if fields.len() == 5 {
            Timestamp::parse(fields[4]).map_err(|e| load_err(e.to_string()))?
        } else {
            start
        };
        let fact = TemporalFact::new(fields[0], fields[1], fields[2], start, end)
            .map_err(|e| load_err(e.to_string()))?;
        facts.push(fact);
    }
    Ok(facts)
}

/// Load `(canonical, alias)` pairs from a tab-separated alias file.
pub fn load_alias_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Load {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(pairs)
}
