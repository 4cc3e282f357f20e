//! Run report and per-cluster candidate summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterAssignment, ClusterParams};
use crate::config::{AnalysisConfig, GraphConfig, InputConfig, LatentConfig, PipelineConfig};
use crate::corpus::{CorpusStats, FilterConfig};
use crate::latent::ScreeEntry;
use crate::structure::{CandidateSet, HistogramBin, SweepPoint};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCount {
    pub size: usize,
    pub candidates: usize,
}

/// Cluster sizes and candidate counts; noise-labeled users get their own row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub clusters: BTreeMap<usize, GroupCount>,
    pub noise: GroupCount,
}

impl CandidateSummary {
    pub fn total_candidates(&self) -> usize {
        self.clusters.values().map(|c| c.candidates).sum::<usize>() + self.noise.candidates
    }

    pub fn total_users(&self) -> usize {
        self.clusters.values().map(|c| c.size).sum::<usize>() + self.noise.size
    }
}

pub fn summarize_candidates(labels: &ClusterAssignment, cands: &CandidateSet) -> CandidateSummary {
    let mut summary = CandidateSummary {
        clusters: (0..labels.n_clusters)
            .map(|c| (c, GroupCount::default()))
            .collect(),
        noise: GroupCount::default(),
    };
    for (user, &label) in labels.labels.iter().enumerate() {
        let row = if label < 0 {
            &mut summary.noise
        } else {
            summary.clusters.entry(label as usize).or_default()
        };
        row.size += 1;
        if cands.contains(user) {
            row.candidates += 1;
        }
    }
    summary
}

/// The configuration as echoed into the report. The output directory is
/// left out so that runs into different directories compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub input: InputConfig,
    pub filter: FilterConfig,
    pub graph: GraphConfig,
    pub analysis: AnalysisConfig,
    pub latent: LatentConfig,
    pub cluster: ClusterParams,
}

impl From<&PipelineConfig> for ConfigEcho {
    fn from(cfg: &PipelineConfig) -> Self {
        Self {
            seed: cfg.seed,
            input: cfg.input.clone(),
            filter: cfg.filter,
            graph: cfg.graph,
            analysis: cfg.analysis,
            latent: cfg.latent,
            cluster: cfg.cluster,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub k: usize,
    pub n_edges: usize,
    pub n_defined_phi: usize,
    pub n_undefined_phi: usize,
    /// Bonferroni-corrected critical φ over all scored pairs; `None` without
    /// edges.
    pub critical_phi: Option<f64>,
    /// Valley between the two modes of the φ histogram, if bimodal.
    pub phi_valley: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateUser {
    pub user: String,
    pub label: i64,
    pub max_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub threshold: f64,
    pub total: usize,
    pub summary: CandidateSummary,
    pub users: Vec<CandidateUser>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSummary {
    pub scree: Vec<ScreeEntry>,
    pub iterations: usize,
    pub max_residual: f64,
    /// Users whose score vector is zero and could not be normalized.
    pub zero_score_users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub n_clusters: usize,
    pub sizes: Vec<usize>,
    pub n_noise: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: ConfigEcho,
    pub corpus: CorpusStats,
    pub graph: GraphSummary,
    pub candidates: CandidateReport,
    pub latent: LatentSummary,
    pub clustering: ClusteringSummary,
    pub sweep: Vec<SweepPoint>,
    pub histogram: Vec<HistogramBin>,
    /// Wall-clock time per stage. Kept out of `report.json` (written to
    /// `timings.json`) so reports of identical runs are byte-identical.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}
