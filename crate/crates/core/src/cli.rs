//! Command-line front end. `run` parses arguments, executes the requested
//! stages and maps failures to exit codes: 1 for invalid input, 2 for
//! internal errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::crawlsim::{self, CrawlReport, TraceSource};
use crate::graph::{build_graph, component_size_rank, degrees, scc_decompose};
use crate::ingest::{self, InteractionTrace, TraceFormat};
use crate::netmetrics::{self, AssortativityMode, DegreeKind};
use crate::output::{self, fmt_f64};
use crate::rankdetect::{self, OutlierConfig, RankConfig};
use crate::sequences;
use crate::statfit::{self, FitError, PowerLawMethod};
use crate::synthgen::{self, GenConfig};

const PAPER_IRD_MAX: f64 = 3.0;
const PAPER_RESP_MIN: f64 = 10.0;

#[derive(Debug)]
enum CliError {
    Validation(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "respgraph", version, about = "Video-response trace analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace totals: videos, responses, views, users
    Summary(SummaryCmd),
    /// User graph, components, degree distributions and network summary
    Graph(GraphCmd),
    /// Clustering, assortativity and in/out degree ratios
    Metrics(MetricsCmd),
    /// Power-law and Weibull fits
    Fit(FitCmd),
    /// Response sequences, U/S ratio, VRI, self-responses, locality, IRD
    Sequences(SummaryCmd),
    /// UserRank and anti-social user flags
    Detect(DetectCmd),
    /// Write a synthetic trace with ground truth
    Generate(GenerateCmd),
    /// Crawl the trace through the query interface and check the sample
    Crawlsim(CrawlCmd),
    /// Every analysis stage
    All(AllCmd),
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Trace directory (CSV) or JSONL file
    #[arg(long)]
    trace: PathBuf,
    /// Trace layout; detected from the path when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Output directory
    #[arg(long, env = "RESPGRAPH_OUT")]
    #[serde(skip)]
    out: PathBuf,
    /// Log-log regression fits and the default detection thresholds
    #[arg(long)]
    paper_mode: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for TraceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TraceFormat::Csv,
            FormatArg::Jsonl => TraceFormat::Jsonl,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct GraphOpts {
    /// BFS sources used to estimate the average distance
    #[arg(long, default_value_t = 100)]
    distance_samples: usize,
    /// Seed for every sampled quantity
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Degree of the arc source in the assortativity pairing
    #[arg(long, value_enum, default_value = "out")]
    assort_source: KindArg,
    /// Degree of the arc target in the assortativity pairing
    #[arg(long, value_enum, default_value = "in")]
    assort_target: KindArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    In,
    Out,
}

impl From<KindArg> for DegreeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::In => DegreeKind::In,
            KindArg::Out => DegreeKind::Out,
        }
    }
}

impl GraphOpts {
    fn mode(&self) -> AssortativityMode {
        AssortativityMode {
            source: self.assort_source.into(),
            target: self.assort_target.into(),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct RewireOpts {
    /// Swap attempts for the degree-preserving baseline; 0 means ten per arc
    #[arg(long, default_value_t = 0)]
    rewire_swaps: u64,
}

#[derive(Args, Debug, Serialize)]
struct FitOpts {
    /// Power-law estimator: mle_discrete or loglog_ls
    #[arg(long)]
    fit_method: Option<PowerLawMethod>,
    /// Smallest value included in power-law fits
    #[arg(long, default_value_t = 1)]
    x_min: u64,
}

#[derive(Args, Debug, Serialize)]
struct DetectOpts {
    /// IRD rule: flag when the average IRD is below this
    #[arg(long)]
    ird_max: Option<f64>,
    /// IRD rule: and average responses per video exceed this
    #[arg(long)]
    resp_min: Option<f64>,
    /// In/out rule: smallest out/in response ratio flagged
    #[arg(long, default_value_t = 10.0)]
    ratio_min: f64,
    /// In/out rule: smallest number of responses posted
    #[arg(long, default_value_t = 20)]
    min_out: u64,
    /// UserRank damping factor
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    /// UserRank convergence threshold on the L1 change
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// UserRank iteration cap
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// UserRank on distinct arcs instead of response counts
    #[arg(long)]
    unweighted: bool,
    /// Most users flagged as power-law outliers
    #[arg(long, default_value_t = 3)]
    outlier_k: usize,
    /// Outlier threshold on the standardized log-residual
    #[arg(long, default_value_t = 2.5)]
    outlier_multiple: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SeedStrategy {
    /// Owners of the most responded videos
    Top,
    /// Tag searches over a synthetic dictionary
    Random,
}

#[derive(Args, Debug, Serialize)]
struct CrawlOpts {
    #[arg(long, value_enum, default_value = "top")]
    seeds: SeedStrategy,
    /// Number of seed users or seed videos
    #[arg(long, default_value_t = 100)]
    seed_count: usize,
    /// Dictionary size for tag searches
    #[arg(long, default_value_t = 1000)]
    vocabulary: usize,
    /// Tags per video
    #[arg(long, default_value_t = 1)]
    tags_per_video: usize,
    /// Top-k lists checked for capture
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    top_k: Vec<usize>,
    /// Seed for tags and random seed selection
    #[arg(long, default_value_t = 1)]
    crawl_seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SummaryCmd {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args, Debug, Serialize)]
struct GraphCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    graph: GraphOpts,
}

#[derive(Args, Debug, Serialize)]
struct MetricsCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    graph: GraphOpts,
    #[command(flatten)]
    rewire: RewireOpts,
}

#[derive(Args, Debug, Serialize)]
struct FitCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
}

#[derive(Args, Debug, Serialize)]
struct DetectCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    fit: FitOpts,
    #[command(flatten)]
    detect: DetectOpts,
}

#[derive(Args, Debug, Serialize)]
struct CrawlCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    crawl: CrawlOpts,
}

#[derive(Args, Debug, Serialize)]
struct AllCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    graph: GraphOpts,
    #[command(flatten)]
    rewire: RewireOpts,
    #[command(flatten)]
    fit: FitOpts,
    #[command(flatten)]
    detect: DetectOpts,
    #[command(flatten)]
    crawl: CrawlOpts,
}

#[derive(Args, Debug, Serialize)]
struct GenerateCmd {
    /// Output directory for the trace and ground truth
    #[arg(long, env = "RESPGRAPH_OUT")]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// JSON generator config; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_users: Option<usize>,
    /// Parent videos; defaults to twice the user count
    #[arg(long)]
    n_videos: Option<usize>,
    /// Exponent of the per-user response count law
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest per-user response count
    #[arg(long)]
    response_cap: Option<u64>,
    #[arg(long)]
    spammers: Option<usize>,
    /// Spammer responses per video, smallest value
    #[arg(long)]
    spam_min: Option<u64>,
    /// Spammer responses per video, largest value
    #[arg(long)]
    spam_max: Option<u64>,
    /// Other responses allowed between two spam responses of one burst
    #[arg(long)]
    interleave: Option<u32>,
    #[arg(long)]
    heavy_users: Option<usize>,
    #[arg(long)]
    self_rate: Option<f64>,
    #[arg(long)]
    locality: Option<f64>,
    /// Share of responses uploaded before their parent
    #[arg(long)]
    negative_vri: Option<f64>,
}

/// Collects output files and their checksums.
struct Emitter {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| invalid(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        output::write_atomic(&self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), output::sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &output::json_bytes(value)?)
    }

    fn csv<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<(), CliError> {
        self.write(name, &output::csv_bytes_with_header(header, rows)?)
    }

    fn record(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)?;
        let name = path
            .strip_prefix(&self.dir)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.files.insert(name, output::sha256_hex(&bytes));
        Ok(())
    }

    fn finish<C: Serialize>(mut self, command: &str, config: &C) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "respgraph",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "outputs": self.files,
        });
        let bytes = output::json_bytes(&manifest)?;
        output::write_atomic(&self.dir.join("run.json"), &bytes)?;
        self.files.clear();
        Ok(())
    }
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Validation(_) => 1,
                CliError::Internal(_) => 2,
            }
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Summary(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_summary(&trace, &mut em)?;
            em.finish("summary", &c)
        }
        Command::Graph(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_graph(&trace, &c.graph, &mut em)?;
            em.finish("graph", &c)
        }
        Command::Metrics(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_metrics(&trace, &c.graph, &c.rewire, &mut em)?;
            em.finish("metrics", &c)
        }
        Command::Fit(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_fit(&trace, &c.fit, c.input.paper_mode, &mut em)?;
            em.finish("fit", &c)
        }
        Command::Sequences(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_sequences(&trace, &mut em)?;
            em.finish("sequences", &c)
        }
        Command::Detect(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_detect(&trace, &c.fit, &c.detect, c.input.paper_mode, &mut em)?;
            em.finish("detect", &c)
        }
        Command::Crawlsim(c) => {
            let (trace, mut em) = open(&c.input)?;
            stage_crawl(&trace, &c.crawl, &mut em)?;
            em.finish("crawlsim", &c)
        }
        Command::All(c) => {
            let (trace, mut em) = open(&c.input)?;
            validate_detect(&c.detect)?;
            stage_summary(&trace, &mut em)?;
            stage_graph(&trace, &c.graph, &mut em)?;
            stage_metrics(&trace, &c.graph, &c.rewire, &mut em)?;
            stage_fit(&trace, &c.fit, c.input.paper_mode, &mut em)?;
            stage_sequences(&trace, &mut em)?;
            stage_detect(&trace, &c.fit, &c.detect, c.input.paper_mode, &mut em)?;
            stage_crawl(&trace, &c.crawl, &mut em)?;
            em.finish("all", &c)
        }
        Command::Generate(c) => generate(&c),
    }
}

fn open(input: &InputArgs) -> Result<(InteractionTrace, Emitter), CliError> {
    if input.out.as_os_str().is_empty() {
        return Err(invalid("--out (or RESPGRAPH_OUT) must name a directory"));
    }
    let format = match input.format {
        Some(f) => f.into(),
        None => TraceFormat::detect(&input.trace).ok_or_else(|| {
            invalid(format!(
                "cannot detect the layout of {}; pass --format",
                input.trace.display()
            ))
        })?,
    };
    let trace = ingest::load_trace(&input.trace, format).map_err(|e| invalid(e.to_string()))?;
    Ok((trace, Emitter::new(&input.out)?))
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn gnuplot(em: &mut Emitter, name: &str, body: &str) -> Result<(), CliError> {
    let script = format!("set datafile separator \",\"\nset key autotitle columnhead\n{body}\n");
    em.write(name, script.as_bytes())
}

fn stage_summary(trace: &InteractionTrace, em: &mut Emitter) -> Result<(), CliError> {
    let s = ingest::trace_summary(trace);
    em.json("summary.json", &s)?;
    let rows = [
        ("videos", s.videos),
        ("responses", s.responses),
        ("views", s.views),
        ("response_views", s.response_views),
        ("videos_without_response", s.videos_without_response),
        ("users", s.users),
        ("responded_videos", s.responded_videos),
        ("responsive_users", s.responsive_users),
        ("responded_users", s.responded_users),
    ];
    em.csv("summary.csv", &["metric", "value"], &rows)
}

fn summary_rows(a: &netmetrics::NetworkSummary, b: &netmetrics::NetworkSummary) -> Vec<[String; 3]> {
    let int = |x: usize| x.to_string();
    let pairs: [(&str, String, String); 12] = [
        ("nodes", int(a.nodes), int(b.nodes)),
        ("arcs", int(a.arcs), int(b.arcs)),
        ("clustering", fmt_f64(a.clustering), fmt_f64(b.clustering)),
        ("largest_scc", int(a.largest_scc), int(b.largest_scc)),
        ("scc_components", int(a.components), int(b.components)),
        ("assortativity", opt_f64(a.assortativity), opt_f64(b.assortativity)),
        ("avg_distance", opt_f64(a.avg_distance), opt_f64(b.avg_distance)),
        ("avg_k_in", fmt_f64(a.k_in.mean), fmt_f64(b.k_in.mean)),
        ("cv_k_in", fmt_f64(a.k_in.cv), fmt_f64(b.k_in.cv)),
        ("avg_k_out", fmt_f64(a.k_out.mean), fmt_f64(b.k_out.mean)),
        ("cv_k_out", fmt_f64(a.k_out.cv), fmt_f64(b.k_out.cv)),
        ("avg_k", fmt_f64(a.avg_k), fmt_f64(b.avg_k)),
    ];
    pairs
        .into_iter()
        .map(|(m, x, y)| [m.to_string(), x, y])
        .collect()
}

fn stage_graph(trace: &InteractionTrace, opts: &GraphOpts, em: &mut Emitter) -> Result<(), CliError> {
    let full = build_graph(trace, true);
    em.write("edges.csv", &full.edge_list_csv()?)?;
    let g = full.without_self_loops();
    let comps = scc_decompose(&g);
    em.csv("scc_rank.csv", &["rank", "size"], &component_size_rank(&comps))?;
    let wcc_rank: Vec<(usize, usize)> = comps.wccs.iter().enumerate().map(|(i, c)| (i + 1, c.len())).collect();
    em.csv("wcc_rank.csv", &["rank", "size"], &wcc_rank)?;

    let deg = degrees(&g);
    let to_f = |v: &[usize]| v.iter().map(|&d| d as f64).collect::<Vec<f64>>();
    em.csv("in_degree_ccdf.csv", &["degree", "ccdf"], &statfit::ccdf(&to_f(&deg.in_degree)))?;
    em.csv("out_degree_ccdf.csv", &["degree", "ccdf"], &statfit::ccdf(&to_f(&deg.out_degree)))?;

    let whole = netmetrics::network_summary(&full, opts.distance_samples, opts.seed, opts.mode());
    let core = netmetrics::network_summary(
        &comps.largest_scc_subgraph(&g),
        opts.distance_samples,
        opts.seed,
        opts.mode(),
    );
    em.csv(
        "network_summary.csv",
        &["metric", "dataset", "largest_scc"],
        &summary_rows(&whole, &core),
    )?;
    em.json(
        "graph.json",
        &json!({
            "nodes": full.node_count(),
            "arcs": g.arc_count(),
            "self_loops": full.self_loop_count(),
            "scc_count": comps.sccs.len(),
            "singleton_sccs": comps.singleton_sccs(),
            "wcc_count": comps.wccs.len(),
            "largest_scc": comps.largest_scc().len(),
            "largest_wcc": comps.wccs.first().map_or(0, Vec::len),
            "dataset": whole,
            "largest_scc_summary": core,
        }),
    )?;
    gnuplot(
        em,
        "degree_ccdf.gp",
        "set logscale xy\nset xlabel \"degree\"\nset ylabel \"P(X >= x)\"\n\
         plot \"in_degree_ccdf.csv\" using 1:2 with points, \"out_degree_ccdf.csv\" using 1:2 with points",
    )?;
    gnuplot(
        em,
        "component_rank.gp",
        "set logscale xy\nset xlabel \"rank\"\nset ylabel \"component size\"\n\
         plot \"scc_rank.csv\" using 1:2 with points, \"wcc_rank.csv\" using 1:2 with points",
    )
}

fn stage_metrics(
    trace: &InteractionTrace,
    opts: &GraphOpts,
    rewire: &RewireOpts,
    em: &mut Emitter,
) -> Result<(), CliError> {
    let g = build_graph(trace, false);
    let cc = netmetrics::clustering(&g);
    let rows: Vec<(&str, f64)> = g.users().iter().map(String::as_str).zip(cc.per_node.iter().copied()).collect();
    em.csv("clustering.csv", &["node", "cc"], &rows)?;
    em.csv("clustering_cdf.csv", &["cc", "cdf"], &cc.cdf())?;
    let by_out: Vec<(usize, f64, usize)> = cc
        .by_out_degree
        .iter()
        .map(|b| (b.out_degree, b.mean_cc, b.nodes))
        .collect();
    em.csv("clustering_by_out_degree.csv", &["out_degree", "mean_cc", "nodes"], &by_out)?;

    let swaps = if rewire.rewire_swaps == 0 {
        10 * g.arc_count() as u64
    } else {
        rewire.rewire_swaps
    };
    let rewired = synthgen::configuration_model_rewire(&g, opts.seed, swaps);
    let rewired_cc = netmetrics::clustering(&rewired.graph).mean;

    let ratios = netmetrics::in_out_ratio_cdf(&degrees(&g));
    em.csv("inout_ratio_cdf.csv", &["ratio", "cdf"], &ratios.cdf)?;

    let assort = match netmetrics::assortativity(&g, opts.mode()) {
        Ok(a) => serde_json::to_value(a).map_err(std::io::Error::from)?,
        Err(e) => json!({ "state": "error", "message": e.to_string(), "arcs": g.arc_count() }),
    };
    em.json(
        "metrics.json",
        &json!({
            "clustering": cc.mean,
            "zero_clustering_fraction": cc.zero_fraction(),
            "rewired_clustering": rewired_cc,
            "rewire": { "swaps": swaps, "performed": rewired.performed, "skipped": rewired.skipped },
            "assortativity": assort,
            "assortativity_mode": opts.mode(),
            "arcs": g.arc_count(),
            "infinite_ratio_nodes": ratios.infinite.len(),
        }),
    )
}

fn fit_entry<T, F>(name: &str, r: Result<T, FitError>, record: F) -> Value
where
    F: FnOnce(&T, &str) -> statfit::FitRecord,
{
    match r {
        Ok(fit) => serde_json::to_value(record(&fit, name)).expect("fit records serialize"),
        Err(e) => json!({ "name": name, "error": e.to_string() }),
    }
}

fn stage_fit(trace: &InteractionTrace, opts: &FitOpts, paper_mode: bool, em: &mut Emitter) -> Result<(), CliError> {
    let method = opts.fit_method.unwrap_or(if paper_mode {
        PowerLawMethod::LoglogLs
    } else {
        PowerLawMethod::MleDiscrete
    });
    if opts.x_min == 0 {
        return Err(invalid("--x-min must be at least 1"));
    }
    let g = build_graph(trace, false);
    let deg = degrees(&g);
    let full = degrees(&build_graph(trace, true));
    let positive = |v: &[u64]| v.iter().copied().filter(|&x| x > 0).collect::<Vec<u64>>();
    let as_u64 = |v: &[usize]| v.iter().map(|&x| x as u64).collect::<Vec<u64>>();
    let mut per_video: Vec<u64> = trace.responded_videos().map(|(_, rs)| rs.len() as u64).collect();
    per_video.sort_unstable();

    let discrete: [(&str, Vec<u64>); 4] = [
        ("in_degree", positive(&as_u64(&deg.in_degree))),
        ("out_degree", positive(&as_u64(&deg.out_degree))),
        ("responses_per_user", positive(&full.weighted_out)),
        ("responses_per_video", per_video),
    ];
    let mut fits = Vec::new();
    for (name, values) in &discrete {
        let r = statfit::fit_power_law(values, method, opts.x_min);
        fits.push(fit_entry(name, r, |f, n| f.record(n)));
        let xs: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        em.csv(&format!("{name}_ccdf.csv"), &["value", "ccdf"], &statfit::ccdf(&xs))?;
    }

    let is_response: std::collections::HashSet<&str> =
        trace.responses().iter().map(|r| r.response_video.as_str()).collect();
    let (mut parent_d, mut resp_d) = (Vec::new(), Vec::new());
    for v in trace.videos() {
        if v.duration > 0 {
            if is_response.contains(v.video_id.as_str()) {
                resp_d.push(v.duration as f64);
            } else {
                parent_d.push(v.duration as f64);
            }
        }
    }
    for (name, values) in [("parent_duration", &parent_d), ("response_duration", &resp_d)] {
        fits.push(fit_entry(name, statfit::fit_weibull(values), |f, n| f.record(n)));
        em.csv(&format!("{name}_ccdf.csv"), &["seconds", "ccdf"], &statfit::ccdf(values))?;
    }
    em.json("fits.json", &fits)
}

fn stage_sequences(trace: &InteractionTrace, em: &mut Emitter) -> Result<(), CliError> {
    let seqs = sequences::build_sequences(trace);
    let us: Vec<(String, usize, usize, f64)> = seqs
        .iter()
        .map(sequences::us_ratio)
        .map(|p| (p.video, p.unique_users, p.sequences, p.ratio))
        .collect();
    em.csv("us_ratio.csv", &["video", "unique_users", "sequences", "ratio"], &us)?;
    let ratios: Vec<f64> = us.iter().map(|r| r.3).collect();
    em.csv("us_ratio_cdf.csv", &["ratio", "cdf"], &statfit::ecdf(&ratios))?;

    let profiles = sequences::behavior_profiles(trace);
    let rows: Vec<[String; 4]> = profiles
        .iter()
        .map(|p| {
            [
                p.user.clone(),
                opt_f64(p.avg_ird),
                fmt_f64(p.avg_responses_per_video),
                p.total_responses.to_string(),
            ]
        })
        .collect();
    em.csv(
        "user_profiles.csv",
        &["user", "avg_ird", "avg_resp_per_video", "total_responses"],
        &rows,
    )?;

    let vri = sequences::vri(trace);
    em.csv("vri_histogram.csv", &["day", "count"], &sequences::vri_histogram_days(&vri))?;
    em.csv("vri_cdf.csv", &["seconds", "cdf"], &vri.cdf)?;

    let loc = sequences::geo_locality(trace);
    let local: Vec<(&str, f64)> = loc.per_video.iter().map(|(v, s)| (v.as_str(), 100.0 * s)).collect();
    em.csv("locality.csv", &["video", "local_pct"], &local)?;
    let mean_local = if loc.per_video.is_empty() {
        None
    } else {
        Some(loc.per_video.iter().map(|p| p.1).sum::<f64>() / loc.per_video.len() as f64)
    };

    let mean_ratio = if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    };
    em.json(
        "sequences.json",
        &json!({
            "responded_videos": seqs.len(),
            "mean_us_ratio": mean_ratio,
            "self_responses": sequences::self_response_stats(trace),
            "vri": {
                "intervals": vri.intervals.len(),
                "missing_timestamps": vri.missing_timestamps,
                "fraction_negative": vri.fraction_negative,
                "fraction_over_100_days": vri.fraction_over_100_days,
            },
            "locality": { "videos": loc.per_video.len(), "skipped": loc.skipped, "mean_local_share": mean_local },
        }),
    )?;
    gnuplot(
        em,
        "ird_scatter.gp",
        "set logscale y\nset xlabel \"average IRD\"\nset ylabel \"responses per video\"\n\
         plot \"user_profiles.csv\" using 2:3 with points",
    )
}

fn validate_detect(opts: &DetectOpts) -> Result<(), CliError> {
    let positive = |x: f64| x > 0.0 && x.is_finite();
    for (name, v) in [
        ("--ird-max", opts.ird_max.unwrap_or(PAPER_IRD_MAX)),
        ("--resp-min", opts.resp_min.unwrap_or(PAPER_RESP_MIN)),
        ("--ratio-min", opts.ratio_min),
        ("--tol", opts.tol),
        ("--outlier-multiple", opts.outlier_multiple),
    ] {
        if !positive(v) {
            return Err(invalid(format!("{name} must be positive")));
        }
    }
    if !(opts.damping > 0.0 && opts.damping < 1.0) {
        return Err(invalid("--damping must lie strictly between 0 and 1"));
    }
    if opts.max_iter == 0 {
        return Err(invalid("--max-iter must be at least 1"));
    }
    Ok(())
}

fn stage_detect(
    trace: &InteractionTrace,
    fit: &FitOpts,
    opts: &DetectOpts,
    paper_mode: bool,
    em: &mut Emitter,
) -> Result<(), CliError> {
    validate_detect(opts)?;
    let (ird_max, resp_min) = if paper_mode {
        (PAPER_IRD_MAX, PAPER_RESP_MIN)
    } else {
        (
            opts.ird_max.unwrap_or(PAPER_IRD_MAX),
            opts.resp_min.unwrap_or(PAPER_RESP_MIN),
        )
    };
    let method = fit.fit_method.unwrap_or(if paper_mode {
        PowerLawMethod::LoglogLs
    } else {
        PowerLawMethod::MleDiscrete
    });

    let full = build_graph(trace, true);
    let profiles = sequences::behavior_profiles(trace);
    let ird = rankdetect::flag_ird(&profiles, ird_max, resp_min);
    let inout = rankdetect::flag_inout(&full, opts.ratio_min, opts.min_out);

    let counts: Vec<(String, u64)> = profiles.iter().map(|p| (p.user.clone(), p.total_responses)).collect();
    let values: Vec<u64> = counts.iter().map(|c| c.1).collect();
    let config = OutlierConfig {
        k: opts.outlier_k,
        multiple: opts.outlier_multiple,
    };
    let (outliers, outlier_note) = match statfit::fit_power_law(&values, method, fit.x_min)
        .and_then(|f| rankdetect::flag_powerlaw_outliers(&counts, &f, config).map(|r| (r, f)))
    {
        Ok((r, f)) => (r, json!(f.record("responses_per_user"))),
        Err(e) => (Vec::new(), json!({ "error": e.to_string() })),
    };

    let mut reports = rankdetect::merge_reports([ird, inout, outliers]);
    let g = full.without_self_loops();
    let rank_json;
    let mut corr = BTreeMap::new();
    if g.is_empty() {
        rank_json = json!(null);
        em.csv::<(String, f64)>("rank.csv", &["user", "score"], &[])?;
    } else {
        let rank = rankdetect::user_rank(
            &g,
            &RankConfig {
                damping: opts.damping,
                tol: opts.tol,
                max_iter: opts.max_iter,
                weighted: !opts.unweighted,
            },
        );
        rankdetect::attach_rank(&mut reports, &rank);
        em.write("rank.csv", &rank.csv()?)?;
        em.csv("userrank_ccdf.csv", &["score", "ccdf"], &statfit::ccdf(&rank.scores))?;
        let views = trace.views_by_owner();
        let rv: Vec<(&str, f64, u64)> = rank
            .users
            .iter()
            .zip(&rank.scores)
            .map(|(u, &s)| (u.as_str(), s, views.get(u.as_str()).copied().unwrap_or(0)))
            .collect();
        em.csv("rank_views.csv", &["user", "score", "views"], &rv)?;
        let as_json = |r: Result<statfit::CorrelationResult, FitError>| match r {
            Ok(c) => json!(c),
            Err(e) => json!({ "error": e.to_string() }),
        };
        corr.insert("rank_vs_views", as_json(rankdetect::rank_vs_views(&rank, trace)));
        corr.insert("rank_vs_indegree", as_json(rankdetect::rank_vs_indegree(&rank, &degrees(&g))));
        rank_json = json!({
            "damping": rank.damping,
            "iterations": rank.iterations,
            "residual": rank.residual,
            "converged": rank.converged,
            "weighted": !opts.unweighted,
        });
    }
    em.write("flags.csv", &rankdetect::flags_csv(&reports)?)?;
    em.json(
        "detect.json",
        &json!({
            "users_evaluated": reports.len(),
            "flagged": reports.iter().filter(|r| r.is_flagged()).count(),
            "rule_counts": rankdetect::rule_counts(&reports),
            "thresholds": {
                "ird_max": ird_max,
                "resp_min": resp_min,
                "ratio_min": opts.ratio_min,
                "min_out": opts.min_out,
                "outlier_k": opts.outlier_k,
                "outlier_multiple": opts.outlier_multiple,
            },
            "outlier_fit": outlier_note,
            "user_rank": rank_json,
            "correlations": corr,
        }),
    )?;
    gnuplot(
        em,
        "userrank_ccdf.gp",
        "set logscale xy\nset xlabel \"UserRank\"\nset ylabel \"P(X >= x)\"\n\
         plot \"userrank_ccdf.csv\" using 1:2 with points",
    )?;
    gnuplot(
        em,
        "rank_views.gp",
        "set logscale xy\nset xlabel \"UserRank\"\nset ylabel \"total views\"\n\
         plot \"rank_views.csv\" using 2:3 with points",
    )
}

fn stage_crawl(trace: &InteractionTrace, opts: &CrawlOpts, em: &mut Emitter) -> Result<(), CliError> {
    let truth = build_graph(trace, true);
    if truth.is_empty() {
        return Err(invalid("crawl simulation needs a trace with responses"));
    }
    let vocabulary = crawlsim::synthetic_vocabulary(opts.vocabulary);
    let source = TraceSource::with_random_tags(trace, &vocabulary, opts.tags_per_video, opts.crawl_seed);
    let seeds = match opts.seeds {
        SeedStrategy::Top => crawlsim::top_responded_video_owners(trace, opts.seed_count),
        SeedStrategy::Random => crawlsim::random_seeds(&source, &vocabulary, opts.seed_count, opts.crawl_seed)
            .map_err(|e| invalid(e.to_string()))?,
    };
    let result = crawlsim::crawl(&source, &seeds).map_err(|e| invalid(e.to_string()))?;
    let report = crawlsim::verify_sampling(&result.sample, &truth, &opts.top_k);
    em.json("crawl_report.json", &CrawlReport::new(&result, &report))?;
    em.json("crawl_violations.json", &report.violations)?;
    em.write("sample_edges.csv", &result.sample.edge_list_csv()?)
}

fn generate(c: &GenerateCmd) -> Result<(), CliError> {
    if c.out.as_os_str().is_empty() {
        return Err(invalid("--out (or RESPGRAPH_OUT) must name a directory"));
    }
    let mut cfg: GenConfig = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => GenConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.n_users {
        cfg.n_users = v;
        if c.n_videos.is_none() && c.config.is_none() {
            cfg.n_videos = 2 * (v + cfg.heavy_users);
        }
    }
    if let Some(v) = c.n_videos {
        cfg.n_videos = v;
    }
    if let Some(v) = c.alpha {
        cfg.response_exponent = v;
    }
    if let Some(v) = c.response_cap {
        cfg.response_cap = v;
    }
    if let Some(v) = c.spammers {
        cfg.spammers.count = v;
    }
    if let Some(v) = c.spam_min {
        cfg.spammers.responses_per_video.0 = v;
    }
    if let Some(v) = c.spam_max {
        cfg.spammers.responses_per_video.1 = v;
    }
    if let Some(v) = c.interleave {
        cfg.spammers.interleave = v;
    }
    if let Some(v) = c.heavy_users {
        cfg.heavy_users = v;
        cfg.n_videos = cfg.n_videos.max(cfg.n_users + v);
    }
    if let Some(v) = c.self_rate {
        cfg.self_response_rate = v;
    }
    if let Some(v) = c.locality {
        cfg.locality_rate = v;
    }
    if let Some(v) = c.negative_vri {
        cfg.vri.negative_fraction = v;
    }
    let (trace, truth) = synthgen::generate(&cfg).map_err(|e| invalid(e.to_string()))?;
    let mut em = Emitter::new(&c.out)?;
    let target = match c.format {
        FormatArg::Csv => c.out.clone(),
        FormatArg::Jsonl => c.out.join("trace.jsonl"),
    };
    for path in ingest::save_trace(&trace, &target, c.format.into())? {
        em.record(&path)?;
    }
    em.json("ground_truth.json", &truth)?;
    em.finish("generate", &json!({ "format": c.format, "generator": cfg }))
}
