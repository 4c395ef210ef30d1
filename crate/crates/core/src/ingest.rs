//! Interaction traces: parsing, validation and the shared data model.
//!
//! A trace is a set of videos plus, for every responded video, the ordered
//! list of video responses it received. Two on-disk layouts are supported:
//!
//! * CSV: a directory holding `videos.csv`
//!   (`video_id,owner,upload_time,duration_s,views,country`) and
//!   `responses.csv` (`parent_video,response_video,responder,position`).
//! * JSONL: one object per line with a `kind` field of `video` or `response`
//!   and the same fields as the CSV columns.
//!
//! Positions are taken verbatim from the input. Upload times are not used to
//! order responses, since a response may legitimately predate its parent.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::output;

pub const VIDEOS_FILE: &str = "videos.csv";
pub const RESPONSES_FILE: &str = "responses.csv";
pub const JSONL_FILE: &str = "trace.jsonl";

const UNKNOWN_COUNTRY: &str = "UNKNOWN";

/// ISO-3166 alpha-2 country code, or the `UNKNOWN` token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum Country {
    Known(String),
    Unknown,
}

impl Country {
    pub fn is_known(&self) -> bool {
        matches!(self, Country::Known(_))
    }

    pub fn code(&self) -> &str {
        match self {
            Country::Known(c) => c,
            Country::Unknown => UNKNOWN_COUNTRY,
        }
    }
}

impl From<String> for Country {
    fn from(s: String) -> Self {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case(UNKNOWN_COUNTRY) {
            Country::Unknown
        } else {
            Country::Known(t.to_ascii_uppercase())
        }
    }
}

impl From<&str> for Country {
    fn from(s: &str) -> Self {
        Country::from(s.to_string())
    }
}

impl From<Country> for String {
    fn from(c: Country) -> Self {
        c.code().to_string()
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub owner: String,
    /// Seconds since the epoch; `None` when the source did not record it.
    pub upload_time: Option<i64>,
    #[serde(rename = "duration_s")]
    pub duration: u64,
    pub views: u64,
    pub country: Country,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub parent_video: String,
    pub response_video: String,
    pub responder: String,
    /// 1-based index in the parent's chronological response list.
    pub position: u32,
}

/// Which trace invariant a file violated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("duplicate video_id `{0}`")]
    DuplicateVideo(String),
    #[error("response references unknown {role} video `{video}`")]
    DanglingVideo { role: &'static str, video: String },
    #[error("video `{0}` is listed as a response to itself")]
    SelfReference(String),
    #[error("video `{0}` appears as a response more than once")]
    DuplicateResponse(String),
    #[error("parent `{parent}` has position {position} more than once")]
    DuplicatePosition { parent: String, position: u32 },
    #[error("parent `{parent}` response positions are not contiguous from 1 (missing {missing})")]
    PositionGap { parent: String, missing: u32 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("integrity violation: {0}")]
    Integrity(#[from] IntegrityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl TraceFormat {
    /// Directories are read as CSV pairs, `.jsonl` files as JSONL.
    pub fn detect(path: &Path) -> Option<Self> {
        if path.is_dir() {
            if path.join(VIDEOS_FILE).exists() {
                Some(TraceFormat::Csv)
            } else if path.join(JSONL_FILE).exists() {
                Some(TraceFormat::Jsonl)
            } else {
                None
            }
        } else {
            match path.extension().and_then(|e| e.to_str()) {
                Some("jsonl") | Some("json") => Some(TraceFormat::Jsonl),
                _ => None,
            }
        }
    }
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" => Ok(TraceFormat::Jsonl),
            other => Err(format!("unknown trace format `{other}` (expected csv or jsonl)")),
        }
    }
}

/// A validated, immutable interaction trace.
#[derive(Debug, Clone)]
pub struct InteractionTrace {
    videos: Vec<VideoMeta>,
    responses: Vec<ResponseRecord>,
    video_index: HashMap<String, usize>,
    // parent video id -> response indices ordered by position
    by_parent: BTreeMap<String, Vec<usize>>,
}

impl PartialEq for InteractionTrace {
    fn eq(&self, other: &Self) -> bool {
        self.videos == other.videos && self.responses == other.responses
    }
}

impl InteractionTrace {
    pub fn new(
        videos: Vec<VideoMeta>,
        responses: Vec<ResponseRecord>,
    ) -> Result<Self, IntegrityError> {
        let mut video_index = HashMap::with_capacity(videos.len());
        for (i, v) in videos.iter().enumerate() {
            if video_index.insert(v.video_id.clone(), i).is_some() {
                return Err(IntegrityError::DuplicateVideo(v.video_id.clone()));
            }
        }

        let mut seen_responses = HashSet::with_capacity(responses.len());
        let mut by_parent: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in responses.iter().enumerate() {
            if !video_index.contains_key(&r.parent_video) {
                return Err(IntegrityError::DanglingVideo {
                    role: "parent",
                    video: r.parent_video.clone(),
                });
            }
            if !video_index.contains_key(&r.response_video) {
                return Err(IntegrityError::DanglingVideo {
                    role: "response",
                    video: r.response_video.clone(),
                });
            }
            if r.parent_video == r.response_video {
                return Err(IntegrityError::SelfReference(r.parent_video.clone()));
            }
            if !seen_responses.insert(r.response_video.as_str()) {
                return Err(IntegrityError::DuplicateResponse(r.response_video.clone()));
            }
            by_parent.entry(r.parent_video.clone()).or_default().push(i);
        }

        for (parent, idx) in by_parent.iter_mut() {
            idx.sort_by_key(|&i| responses[i].position);
            for (expected, &i) in (1u32..).zip(idx.iter()) {
                let pos = responses[i].position;
                if pos < expected {
                    return Err(IntegrityError::DuplicatePosition {
                        parent: parent.clone(),
                        position: pos,
                    });
                }
                if pos > expected {
                    return Err(IntegrityError::PositionGap {
                        parent: parent.clone(),
                        missing: expected,
                    });
                }
            }
        }

        Ok(Self {
            videos,
            responses,
            video_index,
            by_parent,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("empty trace is valid")
    }

    pub fn videos(&self) -> &[VideoMeta] {
        &self.videos
    }

    pub fn responses(&self) -> &[ResponseRecord] {
        &self.responses
    }

    pub fn video(&self, id: &str) -> Option<&VideoMeta> {
        self.video_index.get(id).map(|&i| &self.videos[i])
    }

    /// Owner of the video a response was posted to.
    pub fn parent_owner(&self, r: &ResponseRecord) -> &str {
        &self.videos[self.video_index[&r.parent_video]].owner
    }

    /// Responded videos in id order, each with its responses in position order.
    pub fn responded_videos(&self) -> impl Iterator<Item = (&VideoMeta, Vec<&ResponseRecord>)> + '_ {
        self.by_parent.iter().map(move |(parent, idx)| {
            let video = &self.videos[self.video_index[parent]];
            (video, idx.iter().map(|&i| &self.responses[i]).collect())
        })
    }

    pub fn responded_video_count(&self) -> usize {
        self.by_parent.len()
    }

    /// Every user that owns a video or posted a response, sorted.
    pub fn users(&self) -> BTreeSet<&str> {
        self.videos
            .iter()
            .map(|v| v.owner.as_str())
            .chain(self.responses.iter().map(|r| r.responder.as_str()))
            .collect()
    }

    /// Total views of every video each user uploaded.
    pub fn views_by_owner(&self) -> BTreeMap<&str, u64> {
        let mut out = BTreeMap::new();
        for v in &self.videos {
            *out.entry(v.owner.as_str()).or_insert(0) += v.views;
        }
        out
    }
}

/// Row structure of the crawl summary table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub videos: u64,
    pub responses: u64,
    pub views: u64,
    pub response_views: u64,
    pub videos_without_response: u64,
    pub users: u64,
    pub responded_videos: u64,
    pub responsive_users: u64,
    pub responded_users: u64,
}

pub fn trace_summary(trace: &InteractionTrace) -> SummaryStats {
    let views = trace.videos.iter().map(|v| v.views).sum();
    let response_views = trace
        .responses
        .iter()
        .map(|r| trace.video(&r.response_video).map_or(0, |v| v.views))
        .sum();
    let responsive: HashSet<&str> = trace.responses.iter().map(|r| r.responder.as_str()).collect();
    let responded: HashSet<&str> = trace
        .by_parent
        .keys()
        .filter_map(|p| trace.video(p))
        .map(|v| v.owner.as_str())
        .collect();
    let responded_videos = trace.by_parent.len() as u64;
    SummaryStats {
        videos: trace.videos.len() as u64,
        responses: trace.responses.len() as u64,
        views,
        response_views,
        videos_without_response: trace.videos.len() as u64 - responded_videos,
        users: trace.users().len() as u64,
        responded_videos,
        responsive_users: responsive.len() as u64,
        responded_users: responded.len() as u64,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VideoRow {
    video_id: String,
    owner: String,
    upload_time: Option<i64>,
    duration_s: u64,
    views: u64,
    country: String,
}

impl From<VideoRow> for VideoMeta {
    fn from(r: VideoRow) -> Self {
        VideoMeta {
            video_id: r.video_id,
            owner: r.owner,
            upload_time: r.upload_time,
            duration: r.duration_s,
            views: r.views,
            country: Country::from(r.country),
        }
    }
}

impl From<&VideoMeta> for VideoRow {
    fn from(v: &VideoMeta) -> Self {
        VideoRow {
            video_id: v.video_id.clone(),
            owner: v.owner.clone(),
            upload_time: v.upload_time,
            duration_s: v.duration,
            views: v.views,
            country: v.country.code().to_string(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum JsonlRecord {
    Video(VideoMeta),
    Response(ResponseRecord),
}

/// Load and validate a trace. CSV expects a directory, JSONL a file (or a
/// directory containing `trace.jsonl`).
pub fn load_trace(path: &Path, format: TraceFormat) -> Result<InteractionTrace, IngestError> {
    let (videos, responses) = match format {
        TraceFormat::Csv => (
            read_csv::<VideoRow>(&path.join(VIDEOS_FILE))?
                .into_iter()
                .map(VideoMeta::from)
                .collect(),
            read_csv::<ResponseRecord>(&path.join(RESPONSES_FILE))?,
        ),
        TraceFormat::Jsonl => {
            let file = if path.is_dir() {
                path.join(JSONL_FILE)
            } else {
                path.to_path_buf()
            };
            read_jsonl(&file)?
        }
    };
    Ok(InteractionTrace::new(videos, responses)?)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row.map_err(|e| csv_error(path, e))?);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => IngestError::Parse {
            path: path.to_path_buf(),
            line,
            message: match kind {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                other => format!("{other:?}"),
            },
        },
    }
}

fn read_jsonl(path: &Path) -> Result<(Vec<VideoMeta>, Vec<ResponseRecord>), IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut videos = Vec::new();
    let mut responses = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JsonlRecord>(&line) {
            Ok(JsonlRecord::Video(v)) => videos.push(v),
            Ok(JsonlRecord::Response(r)) => responses.push(r),
            Err(e) => {
                return Err(IngestError::Parse {
                    path: path.to_path_buf(),
                    line: n as u64 + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((videos, responses))
}

/// Serialize a trace in the given layout. Returns the files written.
pub fn save_trace(
    trace: &InteractionTrace,
    path: &Path,
    format: TraceFormat,
) -> std::io::Result<Vec<PathBuf>> {
    match format {
        TraceFormat::Csv => {
            std::fs::create_dir_all(path)?;
            let videos = path.join(VIDEOS_FILE);
            let rows: Vec<VideoRow> = trace.videos.iter().map(VideoRow::from).collect();
            output::write_csv_rows(&videos, &rows)?;
            let responses = path.join(RESPONSES_FILE);
            output::write_csv_rows(&responses, &trace.responses)?;
            Ok(vec![videos, responses])
        }
        TraceFormat::Jsonl => {
            let file = if path.is_dir() {
                path.join(JSONL_FILE)
            } else {
                path.to_path_buf()
            };
            let mut buf = Vec::new();
            for v in &trace.videos {
                serde_json::to_writer(&mut buf, &JsonlRecord::Video(v.clone()))?;
                buf.push(b'\n');
            }
            for r in &trace.responses {
                serde_json::to_writer(&mut buf, &JsonlRecord::Response(r.clone()))?;
                buf.push(b'\n');
            }
            output::write_atomic(&file, &buf)?;
            Ok(vec![file])
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn video(id: &str, owner: &str, t: i64, views: u64) -> VideoMeta {
        VideoMeta {
            video_id: id.into(),
            owner: owner.into(),
            upload_time: Some(t),
            duration: 60,
            views,
            country: Country::Unknown,
        }
    }

    pub fn response(parent: &str, resp: &str, who: &str, pos: u32) -> ResponseRecord {
        ResponseRecord {
            parent_video: parent.into(),
            response_video: resp.into(),
            responder: who.into(),
            position: pos,
        }
    }

    /// One parent video owned by `W` with responders in the given order.
    pub fn single_parent(responders: &[&str]) -> InteractionTrace {
        let mut videos = vec![video("V", "W", 0, 100)];
        let mut responses = Vec::new();
        for (i, who) in responders.iter().enumerate() {
            let id = format!("R{}", i + 1);
            videos.push(video(&id, who, 10 + i as i64, 1));
            responses.push(response("V", &id, who, i as u32 + 1));
        }
        InteractionTrace::new(videos, responses).unwrap()
    }
}
