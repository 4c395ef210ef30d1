//! UserRank and the anti-social user heuristics.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{degrees, DegreeView, ResponseGraph};
use crate::ingest::InteractionTrace;
use crate::output;
use crate::sequences::UserBehaviorProfile;
use crate::statfit::{self, CorrelationResult, FitError, PowerLawFit};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Use response multiplicities as transition weights.
    pub weighted: bool,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-12,
            max_iter: 1000,
            weighted: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankResult {
    pub users: Vec<String>,
    pub scores: Vec<f64>,
    pub damping: f64,
    pub iterations: usize,
    /// L1 change of the last iteration.
    pub residual: f64,
    pub converged: bool,
}

impl RankResult {
    pub fn score_of(&self, user: &str) -> Option<f64> {
        self.users
            .binary_search_by(|u| u.as_str().cmp(user))
            .ok()
            .map(|i| self.scores[i])
    }

    pub fn csv(&self) -> std::io::Result<Vec<u8>> {
        let rows: Vec<(&str, f64)> = self
            .users
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
            .collect();
        output::csv_bytes_with_header(&["user", "score"], &rows)
    }
}

/// PageRank by power iteration. Rank flows along arcs responder to
/// responded; dangling nodes spread their mass uniformly. Each step is
/// applied as a correction to the current vector, which pulls the total
/// back toward 1 and leaves a stationary vector unchanged.
/// Panics on an empty graph or a damping factor outside `(0, 1)`.
pub fn user_rank(graph: &ResponseGraph, config: &RankConfig) -> RankResult {
    let n = graph.node_count();
    assert!(n > 0, "user_rank needs a non-empty graph");
    assert!(
        config.damping > 0.0 && config.damping < 1.0,
        "damping must lie in (0, 1)"
    );
    let d = config.damping;
    let nf = n as f64;
    let out_total: Vec<f64> = (0..n)
        .map(|u| {
            let arcs = graph.out_arcs(u);
            if config.weighted {
                arcs.iter().map(|&(_, w)| w as f64).sum()
            } else {
                arcs.len() as f64
            }
        })
        .collect();
    let dangling: Vec<usize> = (0..n).filter(|&u| out_total[u] == 0.0).collect();

    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < config.max_iter {
        iterations += 1;
        let dangling_mass: f64 = dangling.iter().map(|&u| x[u]).sum();
        let spread = dangling_mass / nf;
        let teleport = 1.0 / nf;
        next.par_iter_mut().enumerate().for_each(|(v, y)| {
            let inflow: f64 = graph
                .in_arcs(v)
                .iter()
                .map(|&(u, w)| {
                    let share = if config.weighted { w as f64 } else { 1.0 };
                    x[u] * share / out_total[u]
                })
                .sum();
            // written as a correction so a stationary vector maps to itself
            *y = x[v] + d * (inflow + spread - x[v]) + (1.0 - d) * (teleport - x[v]);
        });
        residual = 0.0;
        for (xi, yi) in x.iter_mut().zip(&next) {
            residual += (yi - *xi).abs();
            *xi = *yi;
        }
        if residual < config.tol {
            break;
        }
    }
    RankResult {
        users: graph.users().to_vec(),
        scores: x,
        damping: d,
        iterations,
        residual,
        converged: residual < config.tol,
    }
}

/// Correlation between UserRank and the total views of each user's uploads.
pub fn rank_vs_views(rank: &RankResult, trace: &InteractionTrace) -> Result<CorrelationResult, FitError> {
    let views = trace.views_by_owner();
    let v: Vec<f64> = rank
        .users
        .iter()
        .map(|u| views.get(u.as_str()).copied().unwrap_or(0) as f64)
        .collect();
    statfit::pearson(&rank.scores, &v)
}

/// Correlation between UserRank and distinct in-degree.
pub fn rank_vs_indegree(rank: &RankResult, degrees: &DegreeView) -> Result<CorrelationResult, FitError> {
    let k: Vec<f64> = degrees.in_degree.iter().map(|&d| d as f64).collect();
    statfit::pearson(&rank.scores, &k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    IrdThreshold,
    InoutRatio,
    PowerlawOutlier,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::IrdThreshold => "ird_threshold",
            Rule::InoutRatio => "inout_ratio",
            Rule::PowerlawOutlier => "powerlaw_outlier",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagReport {
    pub user: String,
    /// Sorted, without duplicates.
    pub rules: Vec<Rule>,
    pub avg_ird: Option<f64>,
    pub avg_resp_per_video: Option<f64>,
    pub out_in_ratio: Option<f64>,
    pub residual: Option<f64>,
    pub user_rank: Option<f64>,
}

impl FlagReport {
    fn clean(user: &str) -> Self {
        Self {
            user: user.to_string(),
            rules: Vec::new(),
            avg_ird: None,
            avg_resp_per_video: None,
            out_in_ratio: None,
            residual: None,
            user_rank: None,
        }
    }

    pub fn is_flagged(&self) -> bool {
        !self.rules.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.is_flagged() {
            "flagged"
        } else {
            "clean"
        }
    }
}

/// Flags users whose average IRD is below `ird_max` while averaging more
/// than `resp_min` responses per responded video. Users who never answered
/// the same video twice have no IRD and stay clean.
pub fn flag_ird(profiles: &[UserBehaviorProfile], ird_max: f64, resp_min: f64) -> Vec<FlagReport> {
    profiles
        .iter()
        .map(|p| {
            let mut r = FlagReport::clean(&p.user);
            r.avg_ird = p.avg_ird;
            r.avg_resp_per_video = Some(p.avg_responses_per_video);
            if p.avg_ird.is_some_and(|ird| ird < ird_max) && p.avg_responses_per_video > resp_min {
                r.rules.push(Rule::IrdThreshold);
            }
            r
        })
        .collect()
}

/// Flags users posting at least `min_out` responses whose weighted
/// out/in ratio reaches `ratio_min`. Self-responses are not counted on
/// either side; a user who received nothing has an infinite ratio.
pub fn flag_inout(graph: &ResponseGraph, ratio_min: f64, min_out: u64) -> Vec<FlagReport> {
    let deg = degrees(&graph.without_self_loops());
    graph
        .users()
        .iter()
        .enumerate()
        .map(|(u, name)| {
            let (out, inn) = (deg.weighted_out[u], deg.weighted_in[u]);
            let ratio = if inn == 0 {
                f64::INFINITY
            } else {
                out as f64 / inn as f64
            };
            let mut r = FlagReport::clean(name);
            r.out_in_ratio = Some(ratio);
            if out >= min_out && out > 0 && ratio >= ratio_min {
                r.rules.push(Rule::InoutRatio);
            }
            r
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierConfig {
    /// Maximum number of users flagged.
    pub k: usize,
    /// Threshold on the standardized log-residual.
    pub multiple: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self { k: 3, multiple: 2.5 }
    }
}

pub const MIN_OUTLIER_USERS: usize = 20;

fn digamma_int(r: usize) -> f64 {
    -EULER_GAMMA + (1..r).map(|i| 1.0 / i as f64).sum::<f64>()
}

fn trigamma_int(r: usize) -> f64 {
    std::f64::consts::PI.powi(2) / 6.0 - (1..r).map(|i| 1.0 / (i * i) as f64).sum::<f64>()
}

/// Upper-tail outliers against a fitted power law. For the user at rank
/// `r` (largest count first) the expected number of users at or above the
/// observed count is `u = n·P(X >= x_r)`; under the model `u` behaves like
/// the `r`-th arrival of a unit Poisson process, so `ψ(r) − ln u` is a
/// centred log-residual with standard deviation `sqrt(ψ'(r))`. The
/// standardized residual is evaluated at each rank `r <= k` that closes a
/// group of tied counts; if the largest one exceeds `multiple`, all users
/// at or above that rank are flagged. Each flagged report carries the
/// user's own standardized residual.
pub fn flag_powerlaw_outliers(
    samples: &[(String, u64)],
    fit: &PowerLawFit,
    config: OutlierConfig,
) -> Result<Vec<FlagReport>, FitError> {
    if samples.len() < MIN_OUTLIER_USERS {
        return Err(FitError::InsufficientData {
            needed: MIN_OUTLIER_USERS,
            got: samples.len(),
        });
    }
    let mut tail: Vec<&(String, u64)> = samples.iter().filter(|s| s.1 >= fit.x_min).collect();
    if tail.len() < MIN_OUTLIER_USERS {
        return Err(FitError::InsufficientData {
            needed: MIN_OUTLIER_USERS,
            got: tail.len(),
        });
    }
    tail.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let n = tail.len() as f64;
    let x_max = fit.x_max.max(tail[0].1);
    let survival = |x: u64| {
        if fit.alpha > 1.0 {
            statfit::power_law_tail(fit.alpha, fit.x_min, x)
        } else {
            statfit::truncated_power_law_tail(fit.alpha, fit.x_min, x_max, x)
        }
    };
    let z = |i: usize| {
        let u = (n * survival(tail[i].1)).max(f64::MIN_POSITIVE);
        (digamma_int(i + 1) - u.ln()) / trigamma_int(i + 1).sqrt()
    };

    let depth = config.k.min(tail.len());
    let best = (0..depth)
        .filter(|&i| i + 1 == tail.len() || tail[i + 1].1 < tail[i].1)
        .map(|i| (z(i), i))
        .filter(|&(e, _)| e > config.multiple)
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let flagged: Vec<(usize, f64)> = match best {
        Some((_, last)) => (0..=last).map(|i| (i, z(i))).collect(),
        None => Vec::new(),
    };

    let mut reports: Vec<FlagReport> = samples
        .iter()
        .map(|(user, _)| FlagReport::clean(user))
        .collect();
    let position: BTreeMap<&str, usize> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.0.as_str(), i))
        .collect();
    for (i, e) in flagged {
        let r = &mut reports[position[tail[i].0.as_str()]];
        r.residual = Some(e);
        r.rules.push(Rule::PowerlawOutlier);
    }
    Ok(reports)
}

/// Combines per-rule reports into one report per user, sorted by user.
/// Supporting values from later reports fill gaps but never overwrite.
pub fn merge_reports<I>(sets: I) -> Vec<FlagReport>
where
    I: IntoIterator<Item = Vec<FlagReport>>,
{
    let mut merged: BTreeMap<String, FlagReport> = BTreeMap::new();
    for set in sets {
        for r in set {
            let m = merged
                .entry(r.user.clone())
                .or_insert_with(|| FlagReport::clean(&r.user));
            m.rules.extend(r.rules);
            m.rules.sort_unstable();
            m.rules.dedup();
            m.avg_ird = m.avg_ird.or(r.avg_ird);
            m.avg_resp_per_video = m.avg_resp_per_video.or(r.avg_resp_per_video);
            m.out_in_ratio = m.out_in_ratio.or(r.out_in_ratio);
            m.residual = m.residual.or(r.residual);
            m.user_rank = m.user_rank.or(r.user_rank);
        }
    }
    merged.into_values().collect()
}

pub fn attach_rank(reports: &mut [FlagReport], rank: &RankResult) {
    for r in reports {
        r.user_rank = rank.score_of(&r.user);
    }
}

/// `flags.csv` content: flagged users only, rules joined by `;`.
pub fn flags_csv(reports: &[FlagReport]) -> std::io::Result<Vec<u8>> {
    let opt = |x: Option<f64>| x.map(output::fmt_f64).unwrap_or_default();
    let rows: Vec<[String; 7]> = reports
        .iter()
        .filter(|r| r.is_flagged())
        .map(|r| {
            let rules: Vec<&str> = r.rules.iter().map(|x| x.as_str()).collect();
            [
                r.user.clone(),
                rules.join(";"),
                opt(r.avg_ird),
                opt(r.avg_resp_per_video),
                opt(r.out_in_ratio),
                opt(r.residual),
                opt(r.user_rank),
            ]
        })
        .collect();
    output::csv_bytes_with_header(
        &["user", "rules", "avg_ird", "avg_resp_per_video", "out_in_ratio", "residual", "user_rank"],
        &rows,
    )
}

pub fn rule_counts(reports: &[FlagReport]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = [Rule::IrdThreshold, Rule::InoutRatio, Rule::PowerlawOutlier]
        .iter()
        .map(|r| (r.as_str().to_string(), 0))
        .collect();
    for r in reports {
        for rule in &r.rules {
            *counts.get_mut(rule.as_str()).expect("all rules present") += 1;
        }
    }
    counts
}
