//! Episodic memory: record reasoning episodes, cluster their questions,
//! distill one abstract methodology per cluster through the LLM, and select
//! the methodology for a new question.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::{cosine_similarity, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::kmeans::kmeans;
use crate::llm::{CompletionRequest, LlmClient};
use crate::prompts::methodology_prompt;

/// Default number of history clusters.
pub const DEFAULT_CLUSTERS: usize = 10;
/// Default number of history episodes gathered before induction.
pub const DEFAULT_HISTORY_SIZE: usize = 200;
/// Default character budget for each transcript section of the induction
/// prompt.
pub const DEFAULT_TRANSCRIPT_BUDGET: usize = 6000;

/// One recorded step of an episode: the candidate menu shown, the action
/// taken, and what it returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub index: usize,
    pub candidates: Vec<String>,
    pub chosen: String,
    pub result: String,
}

/// One question's full reasoning trace, as stored in history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub question: String,
    pub embedding: EmbeddingVector,
    pub steps: Vec<EpisodeStep>,
    pub final_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl Episode {
    fn validate(&self) -> Result<()> {
        for (expected, step) in self.steps.iter().enumerate() {
            if step.index != expected {
                return Err(Error::Precondition(format!(
                    "episode step indices must be consecutive from 0, found {} at position {expected}",
                    step.index
                )));
            }
        }
        if self.gold_answer.is_some() != self.correct.is_some() {
            return Err(Error::Precondition(
                "correct label must be present exactly when a gold answer is".into(),
            ));
        }
        Ok(())
    }

    /// Content-addressed identifier: identical episodes share an id.
    pub fn content_id(&self) -> String {
        let json = serde_json::to_string(self).expect("episode serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

/// Append-only, content-deduplicated episode store backed by a JSONL file.
///
/// Single writer, many readers: all mutation goes through [`record`], and
/// the in-memory view is the source of truth for reads.
///
/// [`record`]: HistoryStore::record
#[derive(Debug)]
pub struct HistoryStore {
    path: Option<PathBuf>,
    episodes: Vec<Episode>,
    ids: HashMap<String, usize>,
}

impl HistoryStore {
    /// Open (or create) a store at `path`, loading any existing records.
    pub fn open(path: &Path) -> Result<Self> {
        let mut store = HistoryStore {
            path: Some(path.to_path_buf()),
            episodes: Vec::new(),
            ids: HashMap::new(),
        };
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Storage(e.to_string()))?;
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let episode: Episode = serde_json::from_str(line).map_err(|e| Error::Load {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: e.to_string(),
                })?;
                store.insert(episode);
            }
        }
        Ok(store)
    }

    /// Volatile store for tests and one-shot runs.
    pub fn in_memory() -> Self {
        HistoryStore {
            path: None,
            episodes: Vec::new(),
            ids: HashMap::new(),
        }
    }

    fn insert(&mut self, episode: Episode) -> (String, bool) {
        let id = episode.content_id();
        if self.ids.contains_key(&id) {
            return (id, false);
        }
        self.ids.insert(id.clone(), self.episodes.len());
        self.episodes.push(episode);
        (id, true)
    }

    /// Append an episode; identical content returns the existing id and
    /// leaves the store unchanged.
    pub fn record(&mut self, episode: Episode) -> Result<String> {
        episode.validate()?;
        let line = serde_json::to_string(&episode)?;
        let (id, fresh) = self.insert(episode);
        if fresh {
            if let Some(path) = &self.path {
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::Storage(e.to_string()))?;
                let mut writer = BufWriter::new(file);
                writeln!(writer, "{line}").map_err(|e| Error::Storage(e.to_string()))?;
                writer.flush().map_err(|e| Error::Storage(e.to_string()))?;
            }
        }
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn get(&self, id: &str) -> Option<&Episode> {
        self.ids.get(id).map(|&idx| &self.episodes[idx])
    }

    pub fn episode_id(&self, index: usize) -> String {
        self.episodes[index].content_id()
    }
}

/// A cluster of episodes with its centroid and, once induced, the abstract
/// methodology text distilled from its members.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodologyCluster {
    pub id: usize,
    pub centroid: EmbeddingVector,
    pub member_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methodology: Option<String>,
}

/// Cluster the store's question embeddings into `k` groups with seeded
/// k-means. Every episode lands in exactly one cluster; a fixed seed gives
/// bit-identical assignments.
pub fn cluster_history(store: &HistoryStore, k: usize, seed: u64) -> Result<Vec<MethodologyCluster>> {
    if store.len() < k {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {} recorded episodes",
            store.len()
        )));
    }
    let points: Vec<Vec<f64>> = store
        .episodes()
        .iter()
        .map(|e| e.embedding.values().to_vec())
        .collect();
    let result = kmeans(&points, k, seed)?;
    let mut clusters: Vec<MethodologyCluster> = result
        .centroids
        .into_iter()
        .enumerate()
        .map(|(id, centroid)| MethodologyCluster {
            id,
            centroid: EmbeddingVector::new(centroid),
            member_indices: Vec::new(),
            methodology: None,
        })
        .collect();
    for (episode_idx, &cluster_idx) in result.assignments.iter().enumerate() {
        clusters[cluster_idx].member_indices.push(episode_idx);
    }
    Ok(clusters)
}

/// Render one episode as a compact transcript block for the induction
/// prompt.
pub fn render_transcript(episode: &Episode) -> String {
    let mut out = format!("- Question: {}\n", episode.question);
    for step in &episode.steps {
        out.push_str(&format!("  Action {}: {}\n", step.index, step.chosen));
        out.push_str(&format!("  Response {}: {}\n", step.index, step.result));
    }
    out.push_str(&format!("  Final answer: {}\n", episode.final_answer));
    if let Some(correct) = episode.correct {
        out.push_str(if correct {
            "  Outcome: Correct!\n"
        } else {
            "  Outcome: Incorrect.\n"
        });
    }
    out
}

/// Shorter transcripts first, as many as fit in `budget` characters; the
/// first one is truncated if even it alone is too long.
fn pack_transcripts(mut transcripts: Vec<String>, budget: usize) -> Vec<String> {
    transcripts.sort_by_key(String::len);
    let mut packed = Vec::new();
    let mut used = 0usize;
    for transcript in transcripts {
        let chars = transcript.chars().count();
        if used + chars <= budget {
            used += chars;
            packed.push(transcript);
        } else if packed.is_empty() {
            packed.push(transcript.chars().take(budget).collect());
            break;
        } else {
            break;
        }
    }
    packed
}

/// Build the induction prompt for a cluster, call the LLM once, and return
/// the methodology text verbatim.
///
/// Requires at least one labeled member (gold answer present). Member
/// transcripts are split into correct and incorrect sample sections.
pub fn induce_methodology(
    cluster: &MethodologyCluster,
    store: &HistoryStore,
    llm: &dyn LlmClient,
    transcript_budget: usize,
) -> Result<String> {
    let members: Vec<&Episode> = cluster
        .member_indices
        .iter()
        .map(|&idx| &store.episodes()[idx])
        .collect();
    if members.iter().all(|e| e.correct.is_none()) {
        return Err(Error::Precondition(format!(
            "cluster {} has no labeled members to learn from",
            cluster.id
        )));
    }
    let correct: Vec<String> = members
        .iter()
        .filter(|e| e.correct == Some(true))
        .map(|e| render_transcript(e))
        .collect();
    let incorrect: Vec<String> = members
        .iter()
        .filter(|e| e.correct == Some(false))
        .map(|e| render_transcript(e))
        .collect();
    let prompt = methodology_prompt(
        &pack_transcripts(correct, transcript_budget),
        &pack_transcripts(incorrect, transcript_budget),
    );
    let request = CompletionRequest::methodology_induction(prompt);
    llm.complete(&request)
        .map_err(|e| Error::Induction(e.to_string()))
}

/// Induce a methodology for every cluster that does not have one yet.
pub fn induce_all(
    clusters: &mut [MethodologyCluster],
    store: &HistoryStore,
    llm: &dyn LlmClient,
    transcript_budget: usize,
) -> Result<()> {
    for cluster in clusters.iter_mut() {
        if cluster.methodology.is_none() {
            let text = induce_methodology(cluster, store, llm, transcript_budget)?;
            cluster.methodology = Some(text);
        }
    }
    Ok(())
}

/// Pick the cluster whose centroid is most similar to the question; ties go
/// to the lowest cluster id. Every cluster must already carry a methodology.
pub fn select_methodology(
    clusters: &[MethodologyCluster],
    question: &str,
    embedder: &dyn Embedder,
) -> Result<(usize, String)> {
    if clusters.is_empty() {
        return Err(Error::Precondition("no methodology clusters available".into()));
    }
    let question_vec = embedder.embed(question)?;
    let mut ordered: Vec<&MethodologyCluster> = clusters.iter().collect();
    ordered.sort_by_key(|c| c.id);
    let mut best: Option<(&MethodologyCluster, f64)> = None;
    for cluster in ordered {
        let score = cosine_similarity(&question_vec, &cluster.centroid)?;
        match best {
            Some((_, best_score)) if score <= best_score => {}
            _ => best = Some((cluster, score)),
        }
    }
    let (cluster, _) = best.expect("clusters non-empty");
    let methodology = cluster.methodology.clone().ok_or_else(|| {
        Error::Precondition(format!("cluster {} has no induced methodology", cluster.id))
    })?;
    Ok((cluster.id, methodology))
}

/// Persist clusters (centroid + methodology) as one JSON record per line.
pub fn save_methodologies(clusters: &[MethodologyCluster], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Storage(e.to_string()))?;
    let mut writer = BufWriter::new(file);
    for cluster in clusters {
        let line = serde_json::to_string(cluster)?;
        writeln!(writer, "{line}").map_err(|e| Error::Storage(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Storage(e.to_string()))?;
    Ok(())
}

pub fn load_methodologies(path: &Path) -> Result<Vec<MethodologyCluster>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Storage(e.to_string()))?;
    let mut clusters = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cluster: MethodologyCluster = serde_json::from_str(line).map_err(|e| Error::Load {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        clusters.push(cluster);
    }
    Ok(clusters)
}

/// CSV export of `(episode id, cluster id, similarity to centroid)`.
pub fn cluster_report_csv(clusters: &[MethodologyCluster], store: &HistoryStore) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["episode_id", "cluster_id", "similarity"])
        .map_err(|e| Error::Storage(e.to_string()))?;
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for cluster in clusters {
        for &member in &cluster.member_indices {
            rows.push((member, cluster.id));
        }
    }
    rows.sort_unstable();
    for (episode_idx, cluster_id) in rows {
        let episode = &store.episodes()[episode_idx];
        let cluster = clusters.iter().find(|c| c.id == cluster_id).expect("own id");
        let similarity = cosine_similarity(&episode.embedding, &cluster.centroid)?;
        writer
            .write_record([
                store.episode_id(episode_idx),
                cluster_id.to_string(),
                format!("{similarity:.6}"),
            ])
            .map_err(|e| Error::Storage(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Storage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Storage(e.to_string()))
}
