//! Per-video response sequences and the user behavior metrics built on them.
//!
//! A video's responses, in position order, split into maximal runs of
//! consecutive responses by the same user. The ratio of unique responders to
//! runs separates guest-book style videos (ratio 1) from dialogues (near 0).
//! The inter-reference distance (IRD) of a user on a video is the number of
//! other responses between two consecutive responses of that user.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::graph::{build_graph, degrees};
use crate::ingest::{Country, InteractionTrace};
use crate::statfit;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SequenceEntry {
    pub responder: String,
    pub response_video: String,
    pub position: u32,
}

/// A maximal run of consecutive responses by one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Run {
    pub user: String,
    pub start: u32,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResponseSequence {
    pub video: String,
    pub owner: String,
    pub responses: Vec<SequenceEntry>,
    pub runs: Vec<Run>,
}

/// Group consecutive equal responders. `start` is the 1-based position of
/// each run's first response.
pub fn runs_of<S: AsRef<str>>(responders: &[S]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, who) in responders.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.user == who.as_ref() => run.len += 1,
            _ => runs.push(Run {
                user: who.as_ref().to_string(),
                start: i as u32 + 1,
                len: 1,
            }),
        }
    }
    runs
}

/// One sequence per responded video, ordered by video id.
pub fn build_sequences(trace: &InteractionTrace) -> Vec<ResponseSequence> {
    trace
        .responded_videos()
        .map(|(video, responses)| {
            let entries: Vec<SequenceEntry> = responses
                .iter()
                .map(|r| SequenceEntry {
                    responder: r.responder.clone(),
                    response_video: r.response_video.clone(),
                    position: r.position,
                })
                .collect();
            let who: Vec<&str> = entries.iter().map(|e| e.responder.as_str()).collect();
            ResponseSequence {
                video: video.video_id.clone(),
                owner: video.owner.clone(),
                runs: runs_of(&who),
                responses: entries,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionProfile {
    pub video: String,
    pub unique_users: usize,
    pub sequences: usize,
    pub ratio: f64,
}

pub fn us_ratio(seq: &ResponseSequence) -> InteractionProfile {
    let unique: HashSet<&str> = seq.runs.iter().map(|r| r.user.as_str()).collect();
    let runs = seq.runs.len().max(1);
    InteractionProfile {
        video: seq.video.clone(),
        unique_users: unique.len(),
        sequences: seq.runs.len(),
        ratio: unique.len() as f64 / runs as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VriReport {
    /// `(response_video, response upload − parent upload)` in seconds.
    pub intervals: Vec<(String, i64)>,
    /// Responses skipped because either upload time is unknown.
    pub missing_timestamps: usize,
    pub fraction_negative: f64,
    pub fraction_over_100_days: f64,
    pub cdf: Vec<(f64, f64)>,
}

pub fn vri(trace: &InteractionTrace) -> VriReport {
    let mut intervals = Vec::new();
    let mut missing = 0;
    for (parent, responses) in trace.responded_videos() {
        for r in responses {
            let child = trace.video(&r.response_video).and_then(|v| v.upload_time);
            match (parent.upload_time, child) {
                (Some(p), Some(c)) => intervals.push((r.response_video.clone(), c - p)),
                _ => missing += 1,
            }
        }
    }
    let n = intervals.len().max(1) as f64;
    let negative = intervals.iter().filter(|(_, d)| *d < 0).count();
    let long = intervals
        .iter()
        .filter(|(_, d)| *d >= 100 * SECONDS_PER_DAY)
        .count();
    let values: Vec<f64> = intervals.iter().map(|(_, d)| *d as f64).collect();
    VriReport {
        fraction_negative: negative as f64 / n,
        fraction_over_100_days: long as f64 / n,
        cdf: statfit::ecdf(&values),
        intervals,
        missing_timestamps: missing,
    }
}

/// Histogram of VRI in whole days: `(day, count)` for populated days.
pub fn vri_histogram_days(report: &VriReport) -> Vec<(i64, u64)> {
    let mut h: BTreeMap<i64, u64> = BTreeMap::new();
    for (_, d) in &report.intervals {
        *h.entry(d.div_euclid(SECONDS_PER_DAY)).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfResponseStats {
    pub self_responses: usize,
    pub responses: usize,
    /// Share of all responses posted by the parent video's owner.
    pub response_fraction: f64,
    /// Share of responded videos with at least one self-response.
    pub videos_with_self: f64,
    /// Share of responded videos whose responses are all self-responses.
    pub videos_only_self: f64,
}

pub fn self_response_stats(trace: &InteractionTrace) -> SelfResponseStats {
    let mut self_total = 0;
    let mut any = 0;
    let mut only = 0;
    let mut videos = 0;
    for (parent, responses) in trace.responded_videos() {
        videos += 1;
        let s = responses.iter().filter(|r| r.responder == parent.owner).count();
        self_total += s;
        any += usize::from(s > 0);
        only += usize::from(s == responses.len());
    }
    let total = trace.responses().len();
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    SelfResponseStats {
        self_responses: self_total,
        responses: total,
        response_fraction: frac(self_total, total),
        videos_with_self: frac(any, videos),
        videos_only_self: frac(only, videos),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityReport {
    /// `(video, local share)` for every responded video with a known owner
    /// country and at least one responder of known country.
    pub per_video: Vec<(String, f64)>,
    pub skipped: usize,
    pub cdf: Vec<(f64, f64)>,
}

/// Share of each responded video's responses uploaded from the parent's
/// country. The responder side uses the country recorded on the response
/// video; unknown countries are left out of the denominator.
pub fn geo_locality(trace: &InteractionTrace) -> LocalityReport {
    let mut per_video = Vec::new();
    let mut skipped = 0;
    for (parent, responses) in trace.responded_videos() {
        if !parent.country.is_known() {
            skipped += 1;
            continue;
        }
        let known: Vec<&Country> = responses
            .iter()
            .filter_map(|r| trace.video(&r.response_video))
            .map(|v| &v.country)
            .filter(|c| c.is_known())
            .collect();
        if known.is_empty() {
            skipped += 1;
            continue;
        }
        let local = known.iter().filter(|&&c| *c == parent.country).count();
        per_video.push((parent.video_id.clone(), local as f64 / known.len() as f64));
    }
    let values: Vec<f64> = per_video.iter().map(|p| p.1).collect();
    LocalityReport {
        cdf: statfit::ecdf(&values),
        per_video,
        skipped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserBehaviorProfile {
    pub user: String,
    pub total_responses: u64,
    pub distinct_videos_responded: u64,
    pub avg_responses_per_video: f64,
    pub ird_gaps: Vec<u32>,
    /// Mean of the pooled gaps; `None` if the user never responded twice to
    /// the same video.
    pub avg_ird: Option<f64>,
    pub self_response_count: u64,
    pub in_degree: usize,
    pub out_degree: usize,
}

/// Gaps between consecutive positions: `q - p - 1`. Positions must be sorted.
pub fn ird_gaps(positions: &[u32]) -> Vec<u32> {
    positions.windows(2).map(|w| w[1] - w[0] - 1).collect()
}

/// Profiles for every responsive user, sorted by user id. Degrees are
/// distinct-neighbor counts on the graph with self-loops kept.
pub fn behavior_profiles(trace: &InteractionTrace) -> Vec<UserBehaviorProfile> {
    #[derive(Default)]
    struct Acc<'a> {
        total: u64,
        self_count: u64,
        positions: BTreeMap<&'a str, Vec<u32>>,
    }
    let mut acc: HashMap<&str, Acc> = HashMap::new();
    for (parent, responses) in trace.responded_videos() {
        for r in responses {
            let a = acc.entry(r.responder.as_str()).or_default();
            a.total += 1;
            a.self_count += u64::from(r.responder == parent.owner);
            a.positions
                .entry(r.parent_video.as_str())
                .or_default()
                .push(r.position);
        }
    }

    let graph = build_graph(trace, true);
    let deg = degrees(&graph);
    let users: BTreeSet<&str> = acc.keys().copied().collect();
    users
        .into_iter()
        .map(|user| {
            let a = &acc[user];
            // responded_videos yields positions in increasing order
            let gaps: Vec<u32> = a.positions.values().flat_map(|p| ird_gaps(p)).collect();
            let avg_ird = (!gaps.is_empty())
                .then(|| gaps.iter().map(|&g| f64::from(g)).sum::<f64>() / gaps.len() as f64);
            let distinct = a.positions.len() as u64;
            let id = graph.node_id(user).expect("responder is a graph node");
            UserBehaviorProfile {
                user: user.to_string(),
                total_responses: a.total,
                distinct_videos_responded: distinct,
                avg_responses_per_video: a.total as f64 / distinct as f64,
                ird_gaps: gaps,
                avg_ird,
                self_response_count: a.self_count,
                in_degree: deg.in_degree[id],
                out_degree: deg.out_degree[id],
            }
        })
        .collect()
}
