use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use coordnet::association::score_graph;
use coordnet::cluster::{cluster, ClusterAssignment};
use coordnet::config::PipelineConfig;
use coordnet::corpus::{build_corpus, ShareCorpus};
use coordnet::graphml::export_graphml;
use coordnet::latent::{l2_normalize_rows, scree, truncated_svd, CenteredOperator};
use coordnet::matrix::{knn_graph, NeighborGraph};
use coordnet::pipeline::{read_events, render_charts, run_pipeline, PipelineError};
use coordnet::report::summarize_candidates;
use coordnet::structure::{extract_candidates, find_valley, phi_histogram, threshold_sweep};
use coordnet::synth::{generate, write_events_csv, SynthConfig};
use coordnet::{tables, Error, ErrorKind};

/// Coordination detection in retweet networks.
#[derive(Parser)]
#[command(name = "coordnet", version, about)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

/// Configuration sources, applied in order: defaults, `--config`, the named
/// flags below, then `--set` overrides.
#[derive(Args)]
struct GlobalOpts {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set analysis.hist_bins=40`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Event file (input.path).
    #[arg(long, global = true)]
    input: Option<String>,
    /// csv or jsonl (input.format).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Output directory (output_dir).
    #[arg(long, global = true)]
    output_dir: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Neighbors per user (graph.k).
    #[arg(short = 'k', long = "k", global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    phi_threshold: Option<f64>,
    #[arg(long, global = true)]
    min_user_activity: Option<usize>,
    #[arg(long, global = true)]
    min_tweet_audience: Option<usize>,
    /// single_pass or fixed_point (filter.mode).
    #[arg(long, global = true)]
    filter_mode: Option<String>,
    /// Latent dimensions (latent.rank).
    #[arg(long, global = true)]
    rank: Option<usize>,
    #[arg(long, global = true)]
    min_cluster_size: Option<usize>,
    #[arg(long, global = true)]
    min_samples: Option<usize>,
    /// excess_of_mass or leaf (cluster.selection).
    #[arg(long, global = true)]
    selection: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all outputs to the output directory.
    Run,
    /// Inspect the filtered corpus.
    Corpus {
        #[command(subcommand)]
        action: Option<CorpusAction>,
    },
    /// Score nearest-neighbor pairs and write the edge table.
    Assoc {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Fragmentation of the largest component over φ thresholds.
    Sweep {
        /// Edge table; computed from the input events when omitted.
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Histogram of defined φ values.
    Hist {
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Truncated SVD of the double-centered incidence matrix.
    Latent {
        /// Directory for singular_values.tsv, scores.tsv and loadings.tsv
        /// (defaults to the output directory).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// HDBSCAN on row-normalized latent scores.
    Cluster {
        #[arg(long)]
        scores: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Users with an incident edge at or above the φ threshold.
    Candidates {
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Cluster table; adds labels and enables the per-cluster summary.
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write per-cluster size and candidate counts as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// GraphML export of the scored neighbor graph.
    Export {
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with planted coordinated groups.
    Synth {
        /// TOML file with generator settings.
        #[arg(long)]
        synth_config: Option<PathBuf>,
        /// Event CSV to write.
        #[arg(long)]
        events: PathBuf,
        /// Ground-truth JSON to write.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// SVG charts from sweep, histogram, score and cluster tables.
    Plot {
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum CorpusAction {
    /// Print user, tweet and entry counts as JSON.
    Stats,
}

impl GlobalOpts {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v));
            }
        };
        let quoted = |s: &Option<String>| s.as_ref().map(|v| toml_string(v));
        push("input.path", quoted(&self.input));
        push("input.format", quoted(&self.format));
        push("output_dir", quoted(&self.output_dir));
        push("seed", self.seed.map(|v| v.to_string()));
        push("graph.k", self.k.map(|v| v.to_string()));
        push("analysis.phi_threshold", self.phi_threshold.map(float));
        push(
            "filter.min_user_activity",
            self.min_user_activity.map(|v| v.to_string()),
        );
        push(
            "filter.min_tweet_audience",
            self.min_tweet_audience.map(|v| v.to_string()),
        );
        push("filter.mode", quoted(&self.filter_mode));
        push("latent.rank", self.rank.map(|v| v.to_string()));
        push(
            "cluster.min_cluster_size",
            self.min_cluster_size.map(|v| v.to_string()),
        );
        push(
            "cluster.min_samples",
            self.min_samples.map(|v| v.to_string()),
        );
        push("cluster.selection", quoted(&self.selection));
        out
    }

    fn load(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        for (key, value) in self.overrides() {
            cfg.set(&key, &value)?;
        }
        for item in &self.set {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {item}`: expected KEY=VALUE")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn toml_string(s: &str) -> String {
    let mut out = String::from("\"");
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn float(v: f64) -> String {
    // TOML needs a fractional part to read a float
    let s = v.to_string();
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Box::new(BufWriter::new(
                File::create(p).map_err(|e| Error::io(p, e))?,
            ))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn corpus(cfg: &PipelineConfig) -> anyhow::Result<ShareCorpus> {
    let events = read_events(cfg)?;
    Ok(build_corpus(&events, &cfg.filter)?)
}

fn scored_graph(corpus: &ShareCorpus, cfg: &PipelineConfig) -> anyhow::Result<NeighborGraph> {
    let m = corpus.incidence();
    Ok(score_graph(&knn_graph(m, cfg.graph.k)?, m)?)
}

/// Edge table from a file, or recomputed from the configured events.
fn load_graph(
    cfg: &PipelineConfig,
    edges: Option<&Path>,
    universe: Option<&[String]>,
) -> anyhow::Result<(Vec<String>, NeighborGraph)> {
    match edges {
        Some(path) => {
            let table = tables::read_edges(open(path)?, universe)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok((table.users, table.graph))
        }
        None => {
            let corpus = corpus(cfg)?;
            let graph = scored_graph(&corpus, cfg)?;
            Ok((corpus.users().to_vec(), graph))
        }
    }
}

fn load_clusters(path: Option<&Path>) -> anyhow::Result<Option<(Vec<String>, ClusterAssignment)>> {
    path.map(|p| {
        tables::read_clusters(open(p)?).with_context(|| format!("reading {}", p.display()))
    })
    .transpose()
}

/// Cluster labels aligned to `users`; users missing from the table are noise.
fn align_labels(
    users: &[String],
    table: Option<&(Vec<String>, ClusterAssignment)>,
) -> ClusterAssignment {
    let mut aligned = ClusterAssignment {
        labels: vec![-1; users.len()],
        n_clusters: 0,
        membership_strength: vec![0.0; users.len()],
    };
    if let Some((ids, assignment)) = table {
        aligned.n_clusters = assignment.n_clusters;
        for (i, user) in users.iter().enumerate() {
            if let Ok(j) = ids.binary_search(user) {
                aligned.labels[i] = assignment.labels[j];
                aligned.membership_strength[i] = assignment.membership_strength[j];
            }
        }
    }
    aligned
}

fn execute(command: &Command, opts: &GlobalOpts) -> anyhow::Result<()> {
    let cfg = opts.load()?;
    match command {
        Command::Run => {
            let report = run_pipeline(&cfg)?;
            let s = &report.candidates;
            info!(
                "{} users, {} edges, {} candidates, {} clusters; outputs in {}",
                report.corpus.n_users,
                report.graph.n_edges,
                s.total,
                report.clustering.n_clusters,
                cfg.output_dir.display()
            );
        }
        Command::Corpus { action } => {
            let CorpusAction::Stats = action.unwrap_or(CorpusAction::Stats);
            let stats = corpus(&cfg)?.stats();
            let mut out = sink(None)?;
            serde_json::to_writer(&mut out, &stats)?;
            writeln!(out)?;
            out.flush()?;
        }
        Command::Assoc { out } => {
            let corpus = corpus(&cfg)?;
            let graph = scored_graph(&corpus, &cfg)?;
            let mut w = sink(out.as_deref())?;
            tables::write_edges(&graph, corpus.users(), &mut w)?;
            w.flush()?;
        }
        Command::Sweep { edges, out } => {
            let (_, graph) = load_graph(&cfg, edges.as_deref(), None)?;
            let sweep = threshold_sweep(&graph, cfg.analysis.sweep_points);
            let mut w = sink(out.as_deref())?;
            tables::write_sweep(&sweep, &mut w)?;
            w.flush()?;
        }
        Command::Hist { edges, out } => {
            let (_, graph) = load_graph(&cfg, edges.as_deref(), None)?;
            let hist = phi_histogram(&graph, cfg.analysis.hist_bins);
            match find_valley(&hist, cfg.analysis.valley_window) {
                Some(v) => info!("histogram valley at phi = {v:.4}"),
                None => info!("histogram has no interior valley"),
            }
            let mut w = sink(out.as_deref())?;
            tables::write_histogram(&hist, &mut w)?;
            w.flush()?;
        }
        Command::Latent { dir } => {
            let corpus = corpus(&cfg)?;
            let op = CenteredOperator::new(corpus.incidence())?;
            let space = truncated_svd(&op, &cfg.latent.svd_options(cfg.seed))?;
            let dir = dir.as_deref().unwrap_or(&cfg.output_dir);
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let mut w = sink(Some(&dir.join("singular_values.tsv")))?;
            tables::write_scree(&scree(&space.singular_values), &mut w)?;
            w.flush()?;
            let mut w = sink(Some(&dir.join("scores.tsv")))?;
            tables::write_scores("user", corpus.users(), &space.user_scores, &mut w)?;
            w.flush()?;
            let mut w = sink(Some(&dir.join("loadings.tsv")))?;
            tables::write_scores("tweet", corpus.tweets(), &space.tweet_loadings, &mut w)?;
            w.flush()?;
        }
        Command::Cluster { scores, out } => {
            let (users, rows) = tables::read_scores(open(scores)?)
                .with_context(|| format!("reading {}", scores.display()))?;
            let (normalized, zero) = l2_normalize_rows(&rows);
            if !zero.is_empty() {
                log::warn!("{} users have all-zero scores", zero.len());
            }
            let assignment = cluster(&normalized, &cfg.cluster, cfg.seed)?;
            let mut w = sink(out.as_deref())?;
            tables::write_clusters(&users, &assignment, &mut w)?;
            w.flush()?;
        }
        Command::Candidates {
            edges,
            clusters,
            out,
            summary,
        } => {
            let table = load_clusters(clusters.as_deref())?;
            let universe = table.as_ref().map(|t| t.0.as_slice());
            let (users, graph) = load_graph(&cfg, edges.as_deref(), universe)?;
            let labels = align_labels(&users, table.as_ref());
            let cands = extract_candidates(&graph, cfg.analysis.phi_threshold);
            let max_phi = graph.max_incident_phi();
            let mut w = sink(out.as_deref())?;
            writeln!(w, "user\tlabel\tmax_phi")?;
            for &u in &cands.members {
                let phi = max_phi[u].map_or_else(|| "NA".to_string(), |v| v.to_string());
                writeln!(w, "{}\t{}\t{phi}", users[u], labels.labels[u])?;
            }
            w.flush()?;
            if let Some(path) = summary {
                let mut w = sink(Some(path))?;
                serde_json::to_writer_pretty(&mut w, &summarize_candidates(&labels, &cands))?;
                writeln!(w)?;
                w.flush()?;
            }
        }
        Command::Export {
            edges,
            clusters,
            out,
        } => {
            let table = load_clusters(clusters.as_deref())?;
            let universe = table.as_ref().map(|t| t.0.as_slice());
            let (users, graph) = load_graph(&cfg, edges.as_deref(), universe)?;
            let labels = align_labels(&users, table.as_ref());
            let cands = extract_candidates(&graph, cfg.analysis.phi_threshold);
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            export_graphml(&graph, &users, &labels, &cands, out)?;
        }
        Command::Synth {
            synth_config,
            events,
            truth,
        } => {
            let mut scfg = match synth_config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    SynthConfig::from_toml_str(&text)?
                }
                None => SynthConfig::default(),
            };
            if let Some(seed) = opts.seed {
                scfg.seed = seed;
            }
            let (evs, gt) = generate(&scfg)?;
            let mut w = sink(Some(events))?;
            write_events_csv(&evs, &mut w)?;
            w.flush()?;
            if let Some(path) = truth {
                let mut w = sink(Some(path))?;
                serde_json::to_writer_pretty(&mut w, &gt)?;
                writeln!(w)?;
                w.flush()?;
            }
            info!(
                "{} events, {} coordinated users",
                evs.len(),
                gt.coordinated_users.len()
            );
        }
        Command::Plot {
            sweep,
            hist,
            scores,
            clusters,
            dir,
        } => {
            let sweep = match sweep {
                Some(p) => tables::read_sweep(open(p)?)?,
                None => Vec::new(),
            };
            let hist = match hist {
                Some(p) => tables::read_histogram(open(p)?)?,
                None => Vec::new(),
            };
            let (ids, rows) = match scores {
                Some(p) => tables::read_scores(open(p)?)?,
                None => (Vec::new(), Vec::new()),
            };
            let table = load_clusters(clusters.as_deref())?;
            let mut sorted: Vec<(String, Vec<f64>)> = ids.into_iter().zip(rows).collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            let users: Vec<String> = sorted.iter().map(|r| r.0.clone()).collect();
            let rows: Vec<Vec<f64>> = sorted.into_iter().map(|r| r.1).collect();
            let labels = align_labels(&users, table.as_ref()).labels;

            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let charts = render_charts(
                &sweep,
                &hist,
                Some(cfg.analysis.phi_threshold),
                &rows,
                &labels,
            );
            let wanted = [
                ("sweep.svg", !sweep.is_empty()),
                ("hist.svg", !hist.is_empty()),
                ("scores.svg", !rows.is_empty()),
            ];
            for (name, svg) in charts {
                if wanted.iter().any(|&(n, on)| n == name && on) {
                    let path = dir.join(name);
                    fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
                }
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| {
            e.downcast_ref::<PipelineError>()
                .map(PipelineError::kind)
                .or_else(|| e.downcast_ref::<Error>().map(Error::kind))
        })
        .unwrap_or(ErrorKind::Data);
    kind.exit_code() as u8
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.opts.threads {
        Some(0) => Err(anyhow::Error::new(Error::Config(
            "--threads must be positive".into(),
        ))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| execute(&cli.command, &cli.opts))),
        None => execute(&cli.command, &cli.opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
