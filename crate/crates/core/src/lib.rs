//! Analysis of video-response interaction traces: the user graph built
//! from responses, its structure, fitted distributions, per-video response
//! sequences, UserRank and heuristics for flagging anti-social posters.
//! Synthetic traces with planted ground truth and a crawler simulator
//! support evaluation.

pub mod cli;
pub mod crawlsim;
pub mod graph;
pub mod ingest;
pub mod netmetrics;
pub mod output;
pub mod rankdetect;
pub mod sequences;
pub mod statfit;
pub mod synthgen;
