//! Synthetic interaction traces with known ground truth, and a
//! degree-preserving rewiring baseline.
//!
//! Normal users each own at least one parent video and post a number of
//! responses drawn from a truncated discrete power law. Responses target
//! parent videos by Zipf popularity, except for a fixed share of
//! self-responses. Spammers own no parent videos and post contiguous bursts
//! of responses on a few popular videos. Heavy users are ordinary posters
//! whose totals sit far above the natural maximum.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Weibull, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::ResponseGraph;
use crate::ingest::{Country, InteractionTrace, ResponseRecord, VideoMeta};

const START_TIME: i64 = 1_170_000_000;
const UPLOAD_WINDOW_S: i64 = 365 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid generator config: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeibullSpec {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpammerSpec {
    pub count: usize,
    /// Inclusive range of responses per targeted video.
    pub responses_per_video: (u64, u64),
    /// Inclusive range of distinct videos each spammer targets.
    pub videos: (usize, usize),
    /// Maximum number of other responses interleaved between two responses
    /// of one burst; 0 keeps bursts contiguous.
    pub interleave: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VriMix {
    pub negative_fraction: f64,
    /// Mean magnitude in days.
    pub scale_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub n_users: usize,
    /// Parent (non-response) videos; at least one per normal or heavy user.
    pub n_videos: usize,
    pub response_exponent: f64,
    pub response_min: u64,
    pub response_cap: u64,
    /// Zipf exponent of parent video popularity.
    pub popularity_exponent: f64,
    pub parent_duration: WeibullSpec,
    pub response_duration: WeibullSpec,
    pub self_response_rate: f64,
    pub locality_rate: f64,
    /// Country codes with sampling weights; `UNKNOWN` is allowed.
    pub countries: Vec<(String, f64)>,
    pub spammers: SpammerSpec,
    pub heavy_users: usize,
    /// Heavy user totals as a multiple of the largest normal total.
    pub heavy_factor: u64,
    pub vri: VriMix,
    pub views_per_response: u64,
}

impl Default for WeibullSpec {
    fn default() -> Self {
        Self {
            shape: 1.35,
            scale: 200.0,
        }
    }
}

impl Default for SpammerSpec {
    fn default() -> Self {
        Self {
            count: 20,
            responses_per_video: (12, 30),
            videos: (2, 5),
            interleave: 0,
        }
    }
}

impl Default for VriMix {
    fn default() -> Self {
        Self {
            negative_fraction: 0.27,
            scale_days: 20.0,
        }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_users: 10_000,
            n_videos: 20_000,
            response_exponent: 2.1,
            response_min: 1,
            response_cap: 1000,
            popularity_exponent: 1.0,
            parent_duration: WeibullSpec::default(),
            response_duration: WeibullSpec {
                shape: 1.15,
                scale: 150.0,
            },
            self_response_rate: 0.2,
            locality_rate: 0.7,
            countries: [("US", 0.4), ("GB", 0.1), ("BR", 0.1), ("JP", 0.1), ("DE", 0.1), ("CA", 0.1), ("UNKNOWN", 0.1)]
                .iter()
                .map(|&(c, w)| (c.to_string(), w))
                .collect(),
            spammers: SpammerSpec::default(),
            heavy_users: 0,
            heavy_factor: 50,
            vri: VriMix::default(),
            views_per_response: 100,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError(m.to_string()));
        let rate = |x: f64| (0.0..=1.0).contains(&x);
        if !rate(self.self_response_rate) || !rate(self.locality_rate) || !rate(self.vri.negative_fraction) {
            return fail("rates must lie in [0, 1]");
        }
        if !(self.response_exponent > 0.0) || !(self.popularity_exponent > 0.0) {
            return fail("exponents must be positive");
        }
        if self.response_min == 0 || self.response_cap < self.response_min {
            return fail("response counts need 1 <= response_min <= response_cap");
        }
        if self.n_users + self.heavy_users == 0 {
            return fail("at least one normal or heavy user is required");
        }
        if self.n_videos < self.n_users + self.heavy_users {
            return fail("n_videos must be at least n_users + heavy_users");
        }
        for w in [&self.parent_duration, &self.response_duration] {
            if !(w.shape > 0.0) || !(w.scale > 0.0) {
                return fail("Weibull shape and scale must be positive");
            }
        }
        if self.countries.is_empty() || self.countries.iter().any(|c| !(c.1 >= 0.0)) {
            return fail("country pool must be non-empty with non-negative weights");
        }
        if !(self.countries.iter().map(|c| c.1).sum::<f64>() > 0.0) {
            return fail("country weights must not all be zero");
        }
        let s = &self.spammers;
        if s.count > 0 {
            if s.responses_per_video.0 == 0 || s.responses_per_video.1 < s.responses_per_video.0 {
                return fail("spammer responses_per_video must be a non-empty range starting at 1 or more");
            }
            if s.videos.0 == 0 || s.videos.1 < s.videos.0 || s.videos.1 > self.n_videos {
                return fail("spammer video range must be non-empty and fit within n_videos");
            }
        }
        if !(self.vri.scale_days > 0.0) {
            return fail("vri scale must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Normal,
    Spammer,
    Heavy,
}

/// Counts fixed by the generator, each equal to a recount over the trace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub users: usize,
    pub parent_videos: usize,
    pub responses: u64,
    pub self_responses: u64,
    pub spam_responses: u64,
    pub negative_vri: u64,
    /// Responses whose video and parent both have a known country.
    pub locality_pairs: u64,
    pub local_responses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub roles: BTreeMap<String, Role>,
    /// Responses posted, per responsive user.
    pub response_counts: BTreeMap<String, u64>,
    pub tallies: Tallies,
}

impl GroundTruth {
    pub fn users_with(&self, role: Role) -> Vec<&str> {
        self.roles
            .iter()
            .filter(|(_, &r)| r == role)
            .map(|(u, _)| u.as_str())
            .collect()
    }
}

/// Inverse-transform sampler for the discrete power law `P(k) ∝ k^-alpha`
/// on `[x_min, cap]`.
#[derive(Debug, Clone)]
pub struct DiscretePowerLaw {
    x_min: u64,
    cdf: Vec<f64>,
}

impl DiscretePowerLaw {
    pub fn new(alpha: f64, x_min: u64, cap: u64) -> Self {
        let mut cdf = Vec::with_capacity((cap - x_min + 1) as usize);
        let mut acc = 0.0;
        for k in x_min..=cap {
            acc += (k as f64).powf(-alpha);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self { x_min, cdf }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.x_min + i as u64
    }
}

/// The per-user response totals `generate` would draw for normal users.
pub fn sample_response_counts(alpha: f64, x_min: u64, cap: u64, n: usize, seed: u64) -> Vec<u64> {
    let law = DiscretePowerLaw::new(alpha, x_min, cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| law.sample(&mut rng)).collect()
}

struct Pending {
    responder: usize,
    video: usize,
    time: i64,
    country: Country,
}

fn user_name(role: Role, i: usize) -> String {
    match role {
        Role::Normal => format!("u{i:07}"),
        Role::Spammer => format!("s{i:05}"),
        Role::Heavy => format!("h{i:03}"),
    }
}

pub fn generate(config: &GenConfig) -> Result<(InteractionTrace, GroundTruth), ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // users: owners (normal then heavy), then spammers
    let mut users: Vec<(String, Role)> = Vec::new();
    users.extend((0..config.n_users).map(|i| (user_name(Role::Normal, i), Role::Normal)));
    users.extend((0..config.heavy_users).map(|i| (user_name(Role::Heavy, i), Role::Heavy)));
    let owners = users.len();
    users.extend((0..config.spammers.count).map(|i| (user_name(Role::Spammer, i), Role::Spammer)));

    let weights: Vec<f64> = config.countries.iter().map(|c| c.1).collect();
    let country_dist = rand_distr::weighted::WeightedIndex::new(&weights)
        .map_err(|e| ConfigError(format!("country weights: {e}")))?;
    let draw_country = |rng: &mut ChaCha8Rng| Country::from(config.countries[country_dist.sample(rng)].0.as_str());
    let home: Vec<Country> = (0..users.len()).map(|_| draw_country(&mut rng)).collect();

    let parent_dur = Weibull::new(config.parent_duration.scale, config.parent_duration.shape)
        .map_err(|e| ConfigError(e.to_string()))?;
    let response_dur = Weibull::new(config.response_duration.scale, config.response_duration.shape)
        .map_err(|e| ConfigError(e.to_string()))?;
    let seconds = |x: f64| (x.round() as u64).max(1);

    // parent videos: one per owner, the rest to random owners
    let mut videos: Vec<VideoMeta> = Vec::with_capacity(config.n_videos);
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); owners];
    let mut video_owner: Vec<usize> = Vec::with_capacity(config.n_videos);
    for v in 0..config.n_videos {
        let owner = if v < owners { v } else { rng.random_range(0..owners) };
        owned[owner].push(v);
        video_owner.push(owner);
        videos.push(VideoMeta {
            video_id: format!("v{v:08}"),
            owner: users[owner].0.clone(),
            upload_time: Some(START_TIME + rng.random_range(0..UPLOAD_WINDOW_S)),
            duration: seconds(parent_dur.sample(&mut rng)),
            views: 0,
            country: home[owner].clone(),
        });
    }
    let mut popularity: Vec<usize> = (0..config.n_videos).collect();
    popularity.shuffle(&mut rng);
    let zipf = Zipf::new(config.n_videos as f64, config.popularity_exponent)
        .map_err(|e| ConfigError(e.to_string()))?;
    let pick_popular = |rng: &mut ChaCha8Rng| popularity[zipf.sample(rng) as usize - 1];

    // response totals
    let law = DiscretePowerLaw::new(config.response_exponent, config.response_min, config.response_cap);
    let mut totals: Vec<u64> = (0..config.n_users).map(|_| law.sample(&mut rng)).collect();
    let natural_max = totals.iter().copied().max().unwrap_or(config.response_min);
    for h in 0..config.heavy_users {
        totals.push(config.heavy_factor * natural_max + h as u64);
    }
    let slots: u64 = totals.iter().sum();
    let self_target = (config.self_response_rate * slots as f64).round() as usize;
    let self_slots: HashSet<usize> = rand::seq::index::sample(&mut rng, slots as usize, self_target)
        .into_iter()
        .collect();

    let exp = Exp::new(1.0 / (config.vri.scale_days * 86_400.0)).map_err(|e| ConfigError(e.to_string()))?;
    let signed_vri = |rng: &mut ChaCha8Rng| {
        let magnitude = (exp.sample(rng).round() as i64).max(1);
        if rng.random::<f64>() < config.vri.negative_fraction {
            -magnitude
        } else {
            magnitude
        }
    };

    let mut tallies = Tallies::default();
    let mut per_parent: Vec<Vec<Pending>> = (0..config.n_videos).map(|_| Vec::new()).collect();
    let mut slot = 0usize;
    for (u, &total) in totals.iter().enumerate() {
        for _ in 0..total {
            let video = if self_slots.contains(&slot) {
                tallies.self_responses += 1;
                owned[u][rng.random_range(0..owned[u].len())]
            } else {
                loop {
                    let v = pick_popular(&mut rng);
                    if video_owner[v] != u {
                        break v;
                    }
                }
            };
            slot += 1;
            let parent_country = &videos[video].country;
            let country = if parent_country.is_known() && rng.random::<f64>() < config.locality_rate {
                parent_country.clone()
            } else {
                draw_country(&mut rng)
            };
            let time = videos[video].upload_time.expect("parents are timestamped") + signed_vri(&mut rng);
            per_parent[video].push(Pending {
                responder: u,
                video,
                time,
                country,
            });
        }
    }

    // spam bursts, inserted into the chronological order afterwards
    let mut bursts: Vec<Vec<(usize, u64)>> = vec![Vec::new(); config.n_videos];
    for s in 0..config.spammers.count {
        let spammer = owners + s;
        let (lo, hi) = config.spammers.videos;
        let n_targets = rng.random_range(lo..=hi);
        let mut targets: Vec<usize> = Vec::with_capacity(n_targets);
        while targets.len() < n_targets {
            let v = pick_popular(&mut rng);
            if !targets.contains(&v) {
                targets.push(v);
            }
        }
        for v in targets {
            let (a, b) = config.spammers.responses_per_video;
            bursts[v].push((spammer, rng.random_range(a..=b)));
        }
    }

    let mut responses: Vec<ResponseRecord> = Vec::new();
    let mut response_videos: Vec<VideoMeta> = Vec::new();
    let mut received = vec![0u64; config.n_videos];
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for (v, mut pending) in per_parent.into_iter().enumerate() {
        pending.sort_by_key(|p| p.time);
        let parent_time = videos[v].upload_time.expect("parents are timestamped");
        let mut order: Vec<Pending> = Vec::with_capacity(pending.len());
        let mut rest = pending.into_iter().peekable();
        for &(spammer, len) in &bursts[v] {
            let remaining = rest.len();
            let skip = rng.random_range(0..=remaining);
            order.extend(rest.by_ref().take(skip));
            for k in 0..len {
                let time = order.last().map_or(parent_time, |p| p.time);
                order.push(Pending {
                    responder: spammer,
                    video: v,
                    time,
                    country: home[spammer].clone(),
                });
                tallies.spam_responses += 1;
                if k + 1 < len && config.spammers.interleave > 0 {
                    let gap = rng.random_range(0..=config.spammers.interleave) as usize;
                    order.extend(rest.by_ref().take(gap));
                }
            }
        }
        order.extend(rest);

        for (i, p) in order.into_iter().enumerate() {
            let id = format!("r{:08}", response_videos.len());
            let parent_country = &videos[p.video].country;
            if parent_country.is_known() && p.country.is_known() {
                tallies.locality_pairs += 1;
                tallies.local_responses += u64::from(*parent_country == p.country);
            }
            tallies.negative_vri += u64::from(p.time < parent_time);
            received[v] += 1;
            *counts.entry(users[p.responder].0.clone()).or_insert(0) += 1;
            response_videos.push(VideoMeta {
                video_id: id.clone(),
                owner: users[p.responder].0.clone(),
                upload_time: Some(p.time),
                duration: seconds(response_dur.sample(&mut rng)),
                views: rng.random_range(0..config.views_per_response.max(1)),
                country: p.country,
            });
            responses.push(ResponseRecord {
                parent_video: videos[v].video_id.clone(),
                response_video: id,
                responder: users[p.responder].0.clone(),
                position: i as u32 + 1,
            });
        }
    }
    for (v, meta) in videos.iter_mut().enumerate() {
        let vpr = config.views_per_response;
        meta.views = vpr * (1 + received[v]) + rng.random_range(0..vpr.max(1));
    }

    tallies.responses = responses.len() as u64;
    tallies.parent_videos = videos.len();
    tallies.users = users.len();
    videos.extend(response_videos);
    let trace = InteractionTrace::new(videos, responses)
        .map_err(|e| ConfigError(format!("generated trace failed validation: {e}")))?;
    let truth = GroundTruth {
        roles: users.into_iter().collect(),
        response_counts: counts,
        tallies,
    };
    Ok((trace, truth))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewired {
    pub graph: ResponseGraph,
    pub performed: u64,
    /// Attempts rejected because they would create a self-loop or a
    /// duplicate arc.
    pub skipped: u64,
}

/// Double-edge swaps `a→b, c→d` to `a→d, c→b`, keeping every node's in- and
/// out-degree. Each arc keeps its weight with its source.
pub fn configuration_model_rewire(graph: &ResponseGraph, seed: u64, swaps: u64) -> Rewired {
    let mut arcs: Vec<(usize, usize, u64)> = graph.arcs().collect();
    let mut present: HashSet<(usize, usize)> = arcs.iter().map(|&(u, v, _)| (u, v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut performed, mut skipped) = (0, 0);
    if arcs.len() >= 2 {
        for _ in 0..swaps {
            let i = rng.random_range(0..arcs.len());
            let j = rng.random_range(0..arcs.len());
            let (a, b, w1) = arcs[i];
            let (c, d, w2) = arcs[j];
            if i == j || a == d || c == b || present.contains(&(a, d)) || present.contains(&(c, b)) {
                skipped += 1;
                continue;
            }
            present.remove(&(a, b));
            present.remove(&(c, d));
            present.insert((a, d));
            present.insert((c, b));
            arcs[i] = (a, d, w1);
            arcs[j] = (c, b, w2);
            performed += 1;
        }
    } else {
        skipped = swaps;
    }
    Rewired {
        graph: graph.with_arcs(arcs),
        performed,
        skipped,
    }
}
