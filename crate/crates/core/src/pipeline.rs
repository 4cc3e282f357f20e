//! End-to-end orchestration: ingest → neighbors → φ → threshold analytics →
//! latent space → clustering → report and exports.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::association::{critical_phi, score_graph};
use crate::cluster::{cluster, ClusterAssignment};
use crate::config::PipelineConfig;
use crate::corpus::{build_corpus, parse_events, ShareCorpus, ShareEvent};
use crate::error::{Error, ErrorKind, Result};
use crate::graphml::write_graphml;
use crate::latent::{l2_normalize_rows, scree, truncated_svd, CenteredOperator, LatentSpace};
use crate::matrix::{knn_graph, NeighborGraph};
use crate::plot;
use crate::report::{
    summarize_candidates, CandidateReport, CandidateUser, ClusteringSummary, ConfigEcho,
    GraphSummary, LatentSummary, RunReport, StageTiming,
};
use crate::structure::{
    extract_candidates, find_valley, phi_histogram, threshold_sweep, CandidateSet, HistogramBin,
    SweepPoint,
};
use crate::tables;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Neighbors,
    Association,
    Structure,
    Latent,
    Cluster,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Neighbors => "neighbors",
            Stage::Association => "association",
            Stage::Structure => "structure",
            Stage::Latent => "latent",
            Stage::Cluster => "cluster",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        self.source.kind()
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Everything computed by a run, before anything is written.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub corpus: ShareCorpus,
    pub graph: NeighborGraph,
    pub sweep: Vec<SweepPoint>,
    pub histogram: Vec<HistogramBin>,
    pub candidates: CandidateSet,
    pub latent: LatentSpace,
    pub normalized_scores: Vec<Vec<f64>>,
    pub clusters: ClusterAssignment,
    pub report: RunReport,
}

struct Timer {
    timings: Vec<StageTiming>,
    started: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            started: Instant::now(),
        }
    }

    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.started).as_secs_f64(),
        });
        self.started = now;
    }
}

/// Runs every analysis stage on in-memory events.
pub fn analyze(
    events: &[ShareEvent],
    cfg: &PipelineConfig,
) -> std::result::Result<Analysis, PipelineError> {
    cfg.validate().at(Stage::Config)?;
    let mut timer = Timer::new();

    let corpus = build_corpus(events, &cfg.filter).at(Stage::Ingest)?;
    timer.lap(Stage::Ingest);

    let m = corpus.incidence();
    let knn = knn_graph(m, cfg.graph.k).at(Stage::Neighbors)?;
    timer.lap(Stage::Neighbors);

    let graph = score_graph(&knn, m).at(Stage::Association)?;
    timer.lap(Stage::Association);

    let a = &cfg.analysis;
    let sweep = threshold_sweep(&graph, a.sweep_points);
    let histogram = phi_histogram(&graph, a.hist_bins);
    let phi_valley = find_valley(&histogram, a.valley_window);
    let candidates = extract_candidates(&graph, a.phi_threshold);
    let n_defined = graph.edges.iter().filter(|e| e.phi().is_some()).count();
    let critical = if graph.edges.is_empty() {
        None
    } else {
        Some(
            critical_phi(a.alpha, graph.edges.len() as u64, corpus.n_tweets() as u64)
                .at(Stage::Structure)?,
        )
    };
    timer.lap(Stage::Structure);

    let op = CenteredOperator::new(m).at(Stage::Latent)?;
    let latent = truncated_svd(&op, &cfg.latent.svd_options(cfg.seed)).at(Stage::Latent)?;
    let (normalized_scores, zero_rows) = l2_normalize_rows(&latent.user_scores);
    timer.lap(Stage::Latent);

    let clusters = cluster(&normalized_scores, &cfg.cluster, cfg.seed).at(Stage::Cluster)?;
    timer.lap(Stage::Cluster);

    let users = corpus.users();
    let max_phi = graph.max_incident_phi();
    let summary = summarize_candidates(&clusters, &candidates);
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ConfigEcho::from(cfg),
        corpus: corpus.stats(),
        graph: GraphSummary {
            k: graph.k,
            n_edges: graph.edges.len(),
            n_defined_phi: n_defined,
            n_undefined_phi: graph.edges.len() - n_defined,
            critical_phi: critical,
            phi_valley,
        },
        candidates: CandidateReport {
            threshold: candidates.threshold,
            total: candidates.len(),
            summary,
            users: candidates
                .members
                .iter()
                .map(|&u| CandidateUser {
                    user: users[u].clone(),
                    label: clusters.labels[u],
                    max_phi: max_phi[u].unwrap_or(f64::NAN),
                })
                .collect(),
        },
        latent: LatentSummary {
            scree: scree(&latent.singular_values),
            iterations: latent.iterations,
            max_residual: latent.residuals.iter().copied().fold(0.0, f64::max),
            zero_score_users: zero_rows.iter().map(|&i| users[i].clone()).collect(),
        },
        clustering: ClusteringSummary {
            n_clusters: clusters.n_clusters,
            sizes: clusters.cluster_sizes(),
            n_noise: clusters.noise_count(),
        },
        sweep: sweep.clone(),
        histogram: histogram.clone(),
        timings: Vec::new(),
    };
    let mut analysis = Analysis {
        corpus,
        graph,
        sweep,
        histogram,
        candidates,
        latent,
        normalized_scores,
        clusters,
        report,
    };
    analysis.report.timings = timer.timings;
    Ok(analysis)
}

/// Files written into the output directory; removed again if a later write
/// fails.
struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        fill(&mut out).map_err(|e| match e {
            Error::Stream(io) => Error::io(&path, io),
            other => other,
        })?;
        out.flush().map_err(|e| Error::io(&path, e))
    }

    fn discard(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

/// Writes report.json, timings.json, the TSV tables, graph.graphml and the
/// SVG charts for a finished analysis.
pub fn write_outputs(analysis: &Analysis, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = OutputSet {
        dir: dir.to_path_buf(),
        written: Vec::new(),
    };
    match write_all(analysis, &mut out) {
        Ok(()) => Ok(out.written),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn json<T: serde::Serialize>(value: &T, w: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::InvalidData(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn write_all(a: &Analysis, out: &mut OutputSet) -> Result<()> {
    let users = a.corpus.users();
    out.write("report.json", |w| json(&a.report, w))?;
    out.write("timings.json", |w| json(&a.report.timings, w))?;
    out.write("edges.tsv", |w| tables::write_edges(&a.graph, users, w))?;
    out.write("sweep.tsv", |w| tables::write_sweep(&a.sweep, w))?;
    out.write("hist.tsv", |w| tables::write_histogram(&a.histogram, w))?;
    out.write("scores.tsv", |w| {
        tables::write_scores("user", users, &a.latent.user_scores, w)
    })?;
    out.write("loadings.tsv", |w| {
        tables::write_scores("tweet", a.corpus.tweets(), &a.latent.tweet_loadings, w)
    })?;
    out.write("singular_values.tsv", |w| {
        tables::write_scree(&a.report.latent.scree, w)
    })?;
    out.write("clusters.tsv", |w| {
        tables::write_clusters(users, &a.clusters, w)
    })?;
    out.write("candidates.tsv", |w| {
        writeln!(w, "user\tlabel\tmax_phi")?;
        for c in &a.report.candidates.users {
            writeln!(w, "{}\t{}\t{}", c.user, c.label, c.max_phi)?;
        }
        Ok(())
    })?;
    out.write("graph.graphml", |w| {
        write_graphml(&a.graph, users, &a.clusters, &a.candidates, w)
    })?;

    let charts = render_charts(
        &a.sweep,
        &a.histogram,
        Some(a.candidates.threshold),
        &a.latent.user_scores,
        &a.clusters.labels,
    );
    for (name, svg) in charts {
        out.write(name, |w| {
            w.write_all(svg.as_bytes())?;
            Ok(())
        })?;
    }
    Ok(())
}

/// SVG charts keyed by file name: the fragmentation curve, the φ histogram
/// and the first two latent dimensions colored by cluster.
pub fn render_charts(
    sweep: &[SweepPoint],
    histogram: &[HistogramBin],
    threshold: Option<f64>,
    scores: &[Vec<f64>],
    labels: &[i64],
) -> Vec<(&'static str, String)> {
    let mut charts = Vec::new();
    let curve: Vec<(f64, Option<f64>)> = sweep.iter().map(|p| (p.threshold, p.log_ratio)).collect();
    charts.push((
        "sweep.svg",
        plot::line_chart(
            &curve,
            "Fragmentation by phi threshold",
            "phi threshold",
            "log10(edges / LCC edges)",
        ),
    ));
    let bars: Vec<(f64, f64, f64)> = histogram
        .iter()
        .map(|b| (b.lower, b.upper, b.count as f64))
        .collect();
    charts.push((
        "hist.svg",
        plot::bar_chart(
            &bars,
            threshold,
            "Phi of nearest-neighbor pairs",
            "phi",
            "edges",
        ),
    ));
    if scores.first().is_some_and(|r| r.len() >= 2) {
        let pts: Vec<(f64, f64, i64)> = scores
            .iter()
            .zip(labels)
            .map(|(r, &l)| (r[0], r[1], l))
            .collect();
        charts.push((
            "scores.svg",
            plot::scatter(&pts, "Latent sharing space", "dim1", "dim2"),
        ));
    }
    charts
}

pub fn read_events(cfg: &PipelineConfig) -> Result<Vec<ShareEvent>> {
    let path = &cfg.input.path;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_events(std::io::BufReader::new(file), cfg.input.format)
}

/// Reads the configured input, runs the analysis and writes all outputs to
/// `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<RunReport, PipelineError> {
    cfg.validate().at(Stage::Config)?;
    let started = Instant::now();
    let events = read_events(cfg).at(Stage::Ingest)?;
    let read_time = started.elapsed().as_secs_f64();
    let mut analysis = analyze(&events, cfg)?;
    if let Some(first) = analysis.report.timings.first_mut() {
        first.seconds += read_time;
    }

    let started = Instant::now();
    write_outputs(&analysis, &cfg.output_dir).at(Stage::Report)?;
    analysis.report.timings.push(StageTiming {
        stage: Stage::Report.to_string(),
        seconds: started.elapsed().as_secs_f64(),
    });
    // rewritten so the report stage itself is included
    let mut out = OutputSet {
        dir: cfg.output_dir.clone(),
        written: Vec::new(),
    };
    out.write("timings.json", |w| json(&analysis.report.timings, w))
        .at(Stage::Report)?;
    Ok(analysis.report)
}
