//! Snowball crawling of the response graph through a query interface, seed
//! selection by tag search, and checks of what a crawl captured.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{degrees, scc_decompose, ResponseGraph};
use crate::ingest::{InteractionTrace, ResponseRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown video `{0}`")]
    UnknownVideo(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrawlError {
    #[error("seed list is empty")]
    EmptySeeds,
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("dictionary exhausted with {found} candidate seeds, {needed} needed")]
    ExhaustedDictionary { needed: usize, found: usize },
    #[error("query {query} failed: {source}")]
    Source {
        query: String,
        #[source]
        source: SourceError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserInfo {
    pub user: String,
    pub uploads: usize,
    /// Uploaded videos that received at least one response.
    pub responded_videos: usize,
    /// Uploaded videos that are responses to another video.
    pub responses_posted: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VideoInfo {
    pub video_id: String,
    pub owner: String,
    pub response_count: usize,
    /// `(parent video, parent owner)` when this video is a response.
    pub response_to: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResponseInfo {
    pub response_video: String,
    pub responder: String,
    pub position: u32,
}

/// Read-only query surface of a video service.
pub trait DataSource {
    fn user_info(&self, user: &str) -> Result<UserInfo, SourceError>;
    /// The user's uploads, ordered by video id.
    fn user_videos(&self, user: &str) -> Result<Vec<VideoInfo>, SourceError>;
    /// Responses to `video` in position order.
    fn video_responses(&self, video: &str) -> Result<Vec<ResponseInfo>, SourceError>;
    /// Distinct contributors of videos carrying the tag, sorted.
    fn tag_search(&self, word: &str) -> Result<Vec<String>, SourceError>;
}

/// A `DataSource` answering from an in-memory trace.
#[derive(Debug, Clone)]
pub struct TraceSource<'a> {
    trace: &'a InteractionTrace,
    uploads: HashMap<&'a str, Vec<usize>>,
    response_of: HashMap<&'a str, &'a ResponseRecord>,
    responses_to: HashMap<&'a str, Vec<&'a ResponseRecord>>,
    tags: HashMap<String, BTreeSet<&'a str>>,
}

impl<'a> TraceSource<'a> {
    pub fn new(trace: &'a InteractionTrace) -> Self {
        let mut uploads: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, v) in trace.videos().iter().enumerate() {
            uploads.entry(v.owner.as_str()).or_default().push(i);
        }
        for list in uploads.values_mut() {
            list.sort_by(|&a, &b| trace.videos()[a].video_id.cmp(&trace.videos()[b].video_id));
        }
        let response_of = trace
            .responses()
            .iter()
            .map(|r| (r.response_video.as_str(), r))
            .collect();
        let responses_to = trace
            .responded_videos()
            .map(|(v, rs)| (v.video_id.as_str(), rs))
            .collect();
        Self {
            trace,
            uploads,
            response_of,
            responses_to,
            tags: HashMap::new(),
        }
    }

    /// Tags every video with `per_video` words drawn uniformly from
    /// `vocabulary`.
    pub fn with_random_tags(trace: &'a InteractionTrace, vocabulary: &[String], per_video: usize, seed: u64) -> Self {
        let mut source = Self::new(trace);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if !vocabulary.is_empty() {
            for v in trace.videos() {
                for _ in 0..per_video {
                    let word = &vocabulary[rng.random_range(0..vocabulary.len())];
                    source.tags.entry(word.clone()).or_default().insert(v.owner.as_str());
                }
            }
        }
        source
    }

    fn video_info(&self, i: usize) -> VideoInfo {
        let v = &self.trace.videos()[i];
        VideoInfo {
            video_id: v.video_id.clone(),
            owner: v.owner.clone(),
            response_count: self.responses_to.get(v.video_id.as_str()).map_or(0, Vec::len),
            response_to: self
                .response_of
                .get(v.video_id.as_str())
                .map(|r| (r.parent_video.clone(), self.trace.parent_owner(r).to_string())),
        }
    }
}

impl DataSource for TraceSource<'_> {
    fn user_info(&self, user: &str) -> Result<UserInfo, SourceError> {
        let list = self
            .uploads
            .get(user)
            .ok_or_else(|| SourceError::UnknownUser(user.to_string()))?;
        let infos: Vec<VideoInfo> = list.iter().map(|&i| self.video_info(i)).collect();
        Ok(UserInfo {
            user: user.to_string(),
            uploads: infos.len(),
            responded_videos: infos.iter().filter(|v| v.response_count > 0).count(),
            responses_posted: infos.iter().filter(|v| v.response_to.is_some()).count(),
        })
    }

    fn user_videos(&self, user: &str) -> Result<Vec<VideoInfo>, SourceError> {
        let list = self
            .uploads
            .get(user)
            .ok_or_else(|| SourceError::UnknownUser(user.to_string()))?;
        Ok(list.iter().map(|&i| self.video_info(i)).collect())
    }

    fn video_responses(&self, video: &str) -> Result<Vec<ResponseInfo>, SourceError> {
        if self.trace.video(video).is_none() {
            return Err(SourceError::UnknownVideo(video.to_string()));
        }
        Ok(self
            .responses_to
            .get(video)
            .map(|rs| {
                rs.iter()
                    .map(|r| ResponseInfo {
                        response_video: r.response_video.clone(),
                        responder: r.responder.clone(),
                        position: r.position,
                    })
                    .collect()
            })
            .unwrap_or_default())
    }

    fn tag_search(&self, word: &str) -> Result<Vec<String>, SourceError> {
        Ok(self
            .tags
            .get(word)
            .map(|s| s.iter().map(|u| u.to_string()).collect())
            .unwrap_or_default())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrawlState {
    pub frontier: VecDeque<String>,
    /// Users in the order they were processed.
    pub visited: Vec<String>,
    enqueued: HashSet<String>,
    pub videos: BTreeSet<String>,
    /// Response video id to `(responder, responded user)`.
    pub edges: BTreeMap<String, (String, String)>,
    pub queries: u64,
}

impl CrawlState {
    fn push(&mut self, user: &str) {
        if self.enqueued.insert(user.to_string()) {
            self.frontier.push_back(user.to_string());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlResult {
    /// Users joined by at least one collected response, with self-loops.
    pub sample: ResponseGraph,
    pub state: CrawlState,
}

fn query<T>(state: &mut CrawlState, what: impl FnOnce() -> String, r: Result<T, SourceError>) -> Result<T, CrawlError> {
    state.queries += 1;
    r.map_err(|source| CrawlError::Source { query: what(), source })
}

/// Breadth-first snowball crawl. Every processed user's uploads are
/// fetched; responders to those uploads and owners of videos those uploads
/// respond to join the queue. Each user is processed at most once.
pub fn crawl<S: DataSource + ?Sized>(source: &S, seeds: &[String]) -> Result<CrawlResult, CrawlError> {
    if seeds.is_empty() {
        return Err(CrawlError::EmptySeeds);
    }
    let mut state = CrawlState::default();
    for s in seeds {
        state.push(s);
    }
    while let Some(user) = state.frontier.pop_front() {
        let r = source.user_info(&user);
        query(&mut state, || format!("user_info({user})"), r)?;
        let r = source.user_videos(&user);
        let videos = query(&mut state, || format!("user_videos({user})"), r)?;
        for v in videos {
            state.videos.insert(v.video_id.clone());
            if v.response_count > 0 {
                let r = source.video_responses(&v.video_id);
                let responses = query(&mut state, || format!("video_responses({})", v.video_id), r)?;
                for resp in responses {
                    state
                        .edges
                        .insert(resp.response_video.clone(), (resp.responder.clone(), user.clone()));
                    state.push(&resp.responder);
                }
            }
            if let Some((_, parent_owner)) = &v.response_to {
                state
                    .edges
                    .insert(v.video_id.clone(), (user.clone(), parent_owner.clone()));
                state.push(parent_owner);
            }
        }
        state.visited.push(user);
    }
    let mut arcs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (u, v) in state.edges.values() {
        *arcs.entry((u.as_str(), v.as_str())).or_insert(0) += 1;
    }
    let sample = ResponseGraph::from_arcs(Vec::<&str>::new(), arcs.into_iter().map(|((u, v), w)| (u, v, w)));
    Ok(CrawlResult { sample, state })
}

/// Random seed users: tag searches on dictionary words, taken in a
/// shuffled order without repetition, collect contributors who are
/// responded or responsive until at least `count` are known; then `count`
/// of them are drawn uniformly.
pub fn random_seeds<S: DataSource + ?Sized>(
    source: &S,
    dictionary: &[String],
    count: usize,
    seed: u64,
) -> Result<Vec<String>, CrawlError> {
    if dictionary.is_empty() {
        return Err(CrawlError::EmptyDictionary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<&String> = dictionary.iter().collect();
    words.shuffle(&mut rng);
    let mut candidates: Vec<String> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut checked: HashSet<String> = HashSet::new();
    for word in words {
        if candidates.len() >= count {
            break;
        }
        let found = source.tag_search(word).map_err(|source| CrawlError::Source {
            query: format!("tag_search({word})"),
            source,
        })?;
        for c in found {
            if seen.contains(&c) || !checked.insert(c.clone()) {
                continue;
            }
            let info = source.user_info(&c).map_err(|source| CrawlError::Source {
                query: format!("user_info({c})"),
                source,
            })?;
            if info.responded_videos > 0 || info.responses_posted > 0 {
                seen.insert(c.clone());
                candidates.push(c);
            }
        }
    }
    if candidates.len() < count {
        return Err(CrawlError::ExhaustedDictionary {
            needed: count,
            found: candidates.len(),
        });
    }
    let picked = rand::seq::index::sample(&mut rng, candidates.len(), count);
    let mut out: Vec<String> = picked.into_iter().map(|i| candidates[i].clone()).collect();
    out.sort();
    Ok(out)
}

/// Users ranked by responses received, ties by id.
pub fn most_responded(graph: &ResponseGraph, k: usize) -> Vec<String> {
    let deg = degrees(graph);
    let mut order: Vec<usize> = (0..graph.node_count()).collect();
    order.sort_by(|&a, &b| {
        deg.weighted_in[b]
            .cmp(&deg.weighted_in[a])
            .then_with(|| graph.name(a).cmp(graph.name(b)))
    });
    order.into_iter().take(k).map(|u| graph.name(u).to_string()).collect()
}

/// Owners of the `k` videos with the most responses (ties by video id),
/// without repeats.
pub fn top_responded_video_owners(trace: &InteractionTrace, k: usize) -> Vec<String> {
    let mut videos: Vec<(usize, &str, &str)> = trace
        .responded_videos()
        .map(|(v, rs)| (rs.len(), v.video_id.as_str(), v.owner.as_str()))
        .collect();
    videos.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let mut seen = HashSet::new();
    videos
        .into_iter()
        .take(k)
        .filter(|v| seen.insert(v.2))
        .map(|v| v.2.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentViolation {
    /// Members of the offending sample component.
    pub component: Vec<String>,
    /// Truth-component members absent from the sample component.
    pub missing: Vec<String>,
    /// Sample members that are not truth nodes or belong elsewhere.
    pub foreign: Vec<String>,
    /// Whether the arcs inside the component differ from the truth.
    pub arcs_differ: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingReport {
    pub property1: bool,
    pub violations: Vec<ComponentViolation>,
    /// Share of truth users present in the sample.
    pub coverage: f64,
    /// Share of the truth's top-k most responded users present in the sample.
    pub top_k: BTreeMap<usize, f64>,
    pub sample_users: usize,
    pub truth_users: usize,
}

pub fn verify_sampling(sample: &ResponseGraph, truth: &ResponseGraph, top_k_list: &[usize]) -> SamplingReport {
    let truth_comp = scc_decompose(truth);
    let sample_comp = scc_decompose(sample);
    let mut violations = Vec::new();
    for comp in &sample_comp.wccs {
        let names: BTreeSet<&str> = comp.iter().map(|&u| sample.name(u)).collect();
        let anchor = names.iter().find_map(|n| truth.node_id(n));
        let truth_names: BTreeSet<&str> = anchor
            .map(|a| {
                truth_comp.wccs[truth_comp.wcc_of[a]]
                    .iter()
                    .map(|&u| truth.name(u))
                    .collect()
            })
            .unwrap_or_default();
        let missing: Vec<String> = truth_names.difference(&names).map(|s| s.to_string()).collect();
        let foreign: Vec<String> = names.difference(&truth_names).map(|s| s.to_string()).collect();
        let arcs_differ = missing.is_empty() && foreign.is_empty() && {
            let sample_arcs: BTreeSet<(&str, &str, u64)> = comp
                .iter()
                .flat_map(|&u| sample.out_arcs(u).iter().map(move |&(v, w)| (sample.name(u), sample.name(v), w)))
                .collect();
            let truth_arcs: BTreeSet<(&str, &str, u64)> = names
                .iter()
                .map(|n| truth.node_id(n).expect("component members are truth nodes"))
                .flat_map(|u| truth.out_arcs(u).iter().map(move |&(v, w)| (truth.name(u), truth.name(v), w)))
                .collect();
            sample_arcs != truth_arcs
        };
        if !missing.is_empty() || !foreign.is_empty() || arcs_differ {
            violations.push(ComponentViolation {
                component: names.iter().map(|s| s.to_string()).collect(),
                missing,
                foreign,
                arcs_differ,
            });
        }
    }

    let present = |name: &str| sample.node_id(name).is_some();
    let covered = truth.users().iter().filter(|u| present(u)).count();
    let coverage = if truth.is_empty() {
        1.0
    } else {
        covered as f64 / truth.node_count() as f64
    };
    let top_k = top_k_list
        .iter()
        .map(|&k| {
            let top = most_responded(truth, k);
            let frac = if top.is_empty() {
                1.0
            } else {
                top.iter().filter(|u| present(u)).count() as f64 / top.len() as f64
            };
            (k, frac)
        })
        .collect();
    SamplingReport {
        property1: violations.is_empty(),
        violations,
        coverage,
        top_k,
        sample_users: sample.node_count(),
        truth_users: truth.node_count(),
    }
}

/// The crawl summary written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrawlReport {
    pub visited: usize,
    pub coverage: f64,
    pub property1: bool,
    pub property3: BTreeMap<usize, f64>,
    pub queries: u64,
}

impl CrawlReport {
    pub fn new(result: &CrawlResult, report: &SamplingReport) -> Self {
        Self {
            visited: result.state.visited.len(),
            coverage: report.coverage,
            property1: report.property1,
            property3: report.top_k.clone(),
            queries: result.state.queries,
        }
    }
}

/// Synthetic dictionary `w0000, w0001, ...`.
pub fn synthetic_vocabulary(size: usize) -> Vec<String> {
    (0..size).map(|i| format!("w{i:04}")).collect()
}
