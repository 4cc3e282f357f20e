mod common;

use std::collections::BTreeSet;
use std::fs;

use coordnet::association::score_graph;
use coordnet::cluster::ClusterAssignment;
use coordnet::config::PipelineConfig;
use coordnet::corpus::{build_corpus, FilterConfig, ShareEvent};
use coordnet::graphml::{export_graphml, write_graphml};
use coordnet::latent::{truncated_svd, CenteredOperator, SvdOptions};
use coordnet::matrix::knn_graph;
use coordnet::pipeline::{analyze, run_pipeline, Stage};
use coordnet::structure::extract_candidates;
use coordnet::synth::{generate, write_events_csv, CoordGroup, SynthConfig};
use coordnet::ErrorKind;

use common::*;

fn planted(groups: Vec<CoordGroup>, n_organic: usize, n_tweets: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_organic_users: n_organic,
        n_organic_clusters: 3,
        n_tweets,
        coord_groups: groups,
        organic_activity: 25.0,
        noise_rate: 0.02,
        seed,
    }
}

fn small_pipeline_config(dir: &std::path::Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        output_dir: dir.join("out"),
        filter: FilterConfig::new(5, 3),
        ..Default::default()
    };
    cfg.input.path = dir.join("events.csv");
    cfg.cluster.min_cluster_size = 10;
    cfg
}

#[test]
fn single_full_overlap_group_is_the_candidate_set() {
    let scfg = planted(
        vec![CoordGroup {
            group_size: 15,
            shared_pool: 30,
            overlap_rate: 1.0,
        }],
        300,
        1500,
        3,
    );
    let (events, truth) = generate(&scfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pipeline_config(dir.path());
    let a = analyze(&events, &cfg).unwrap();
    let found: BTreeSet<String> = a
        .candidates
        .members
        .iter()
        .map(|&u| a.corpus.users()[u].clone())
        .collect();
    assert_eq!(found, truth.coordinated_users);
    let s = &a.report.candidates.summary;
    assert_eq!(s.total_candidates(), found.len());
    assert_eq!(s.total_users(), a.corpus.n_users());
}

#[test]
fn identical_rows_give_unit_cosine_and_phi() {
    // two groups with disjoint pools so no tweet column is all-ones
    let scfg = SynthConfig {
        n_organic_users: 0,
        n_organic_clusters: 1,
        n_tweets: 60,
        coord_groups: vec![
            CoordGroup {
                group_size: 20,
                shared_pool: 30,
                overlap_rate: 1.0
            };
            2
        ],
        organic_activity: 1.0,
        noise_rate: 0.0,
        seed: 1,
    };
    let (events, _) = generate(&scfg).unwrap();
    let corpus = build_corpus(&events, &FilterConfig::new(1, 1)).unwrap();
    let m = corpus.incidence();
    let g = score_graph(&knn_graph(m, 3).unwrap(), m).unwrap();
    assert!(!g.edges.is_empty());
    for e in &g.edges {
        assert_eq!(e.cosine, 1.0);
        assert_eq!(e.phi(), Some(1.0));
    }
}

#[test]
fn disjoint_organic_clusters_split_on_first_dimension() {
    let scfg = SynthConfig {
        n_organic_users: 200,
        n_organic_clusters: 2,
        n_tweets: 400,
        coord_groups: Vec::new(),
        organic_activity: 30.0,
        noise_rate: 0.0,
        seed: 9,
    };
    let (events, truth) = generate(&scfg).unwrap();
    let corpus = build_corpus(&events, &FilterConfig::new(1, 1)).unwrap();
    let op = CenteredOperator::new(corpus.incidence()).unwrap();

    // dense oracle first dimension
    let dense = dense_centered(corpus.incidence());
    let svd = dense.clone().svd(true, false);
    let top = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let u = svd.u.unwrap();

    let space = truncated_svd(&op, &SvdOptions::default()).unwrap();
    for (i, user) in corpus.users().iter().enumerate() {
        let cluster = truth.organic_cluster_of[user];
        let mine = space.user_scores[i][0];
        let oracle = u[(i, top)];
        let first = corpus
            .users()
            .iter()
            .position(|x| truth.organic_cluster_of[x] == 0)
            .unwrap();
        let same_side = |s: f64, s0: f64| (s > 0.0) == (s0 > 0.0);
        assert_eq!(
            same_side(mine, space.user_scores[first][0]),
            cluster == 0,
            "user {user}"
        );
        assert_eq!(
            same_side(oracle, u[(first, top)]),
            cluster == 0,
            "oracle user {user}"
        );
        assert!(mine.abs() > 1e-9);
    }
}

#[test]
fn planted_groups_are_denser_than_cross_pairs() {
    let scfg = planted(
        vec![
            CoordGroup {
                group_size: 12,
                shared_pool: 40,
                overlap_rate: 0.9
            };
            3
        ],
        0,
        400,
        4,
    );
    let (events, truth) = generate(&scfg).unwrap();
    let corpus = build_corpus(&events, &FilterConfig::new(1, 1)).unwrap();
    let m = corpus.incidence();
    let group = |u: &str| u.split('_').next().unwrap().to_string();
    assert_eq!(truth.coordinated_users.len(), corpus.n_users());
    let mut within = f64::INFINITY;
    let mut across: f64 = 0.0;
    for u in 0..m.n_rows() {
        for v in (u + 1)..m.n_rows() {
            let c = coordnet::matrix::cosine(m, u, v).unwrap();
            if group(&corpus.users()[u]) == group(&corpus.users()[v]) {
                within = within.min(c);
            } else {
                across = across.max(c);
            }
        }
    }
    assert!(within > across, "within {within} across {across}");
}

#[test]
fn run_writes_every_output() {
    let scfg = planted(
        vec![
            CoordGroup {
                group_size: 15,
                shared_pool: 30,
                overlap_rate: 0.95
            };
            2
        ],
        200,
        1200,
        5,
    );
    let (events, _) = generate(&scfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pipeline_config(dir.path());
    write_events_csv(&events, fs::File::create(&cfg.input.path).unwrap()).unwrap();

    let report = run_pipeline(&cfg).unwrap();
    for name in [
        "report.json",
        "timings.json",
        "edges.tsv",
        "sweep.tsv",
        "hist.tsv",
        "scores.tsv",
        "loadings.tsv",
        "singular_values.tsv",
        "clusters.tsv",
        "candidates.tsv",
        "graph.graphml",
        "sweep.svg",
        "hist.svg",
        "scores.svg",
    ] {
        assert!(cfg.output_dir.join(name).is_file(), "missing {name}");
    }
    let text = fs::read_to_string(cfg.output_dir.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["corpus"]["n_users"], report.corpus.n_users);
    assert_eq!(json["sweep"].as_array().unwrap().len(), 100);
    assert!(json.get("timings").is_none());
    let timings: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.output_dir.join("timings.json")).unwrap())
            .unwrap();
    assert!(timings
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t["stage"] == "report"));
}

#[test]
fn empty_input_fails_at_ingest_and_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_pipeline_config(dir.path());
    fs::write(&cfg.input.path, "").unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(!cfg.output_dir.join("report.json").exists());
}

#[test]
fn invalid_config_is_a_config_error() {
    let mut cfg = PipelineConfig::default();
    cfg.graph.k = 0;
    let err = analyze(&[ShareEvent::new("a", "t")], &cfg).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn graphml_reparses_with_declared_keys() {
    let scfg = planted(
        vec![CoordGroup {
            group_size: 10,
            shared_pool: 20,
            overlap_rate: 1.0,
        }],
        60,
        600,
        8,
    );
    let (events, _) = generate(&scfg).unwrap();
    let corpus = build_corpus(&events, &FilterConfig::new(3, 2)).unwrap();
    let m = corpus.incidence();
    let g = score_graph(&knn_graph(m, 3).unwrap(), m).unwrap();
    let n = corpus.n_users();
    let labels = ClusterAssignment {
        labels: (0..n as i64).map(|i| i % 3 - 1).collect(),
        n_clusters: 2,
        membership_strength: vec![1.0; n],
    };
    let cands = extract_candidates(&g, 0.67);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.graphml");
    export_graphml(&g, corpus.users(), &labels, &cands, &path).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let keys: BTreeSet<(String, String)> = doc
        .descendants()
        .filter(|x| x.has_tag_name("key"))
        .map(|k| {
            (
                k.attribute("attr.name").unwrap().to_string(),
                k.attribute("for").unwrap().to_string(),
            )
        })
        .collect();
    for (name, domain) in [
        ("user", "node"),
        ("cluster", "node"),
        ("is_candidate", "node"),
        ("max_phi", "node"),
        ("degree", "node"),
        ("cosine", "edge"),
        ("phi", "edge"),
    ] {
        assert!(
            keys.contains(&(name.to_string(), domain.to_string())),
            "{name}"
        );
    }
    let nodes: Vec<_> = doc
        .descendants()
        .filter(|x| x.has_tag_name("node"))
        .collect();
    let edges = doc.descendants().filter(|x| x.has_tag_name("edge")).count();
    assert_eq!(nodes.len(), n);
    assert_eq!(edges, g.edges.len());

    let max_phi = g.max_incident_phi();
    for (i, node) in nodes.iter().enumerate() {
        let data = |key: &str| {
            node.children()
                .find(|c| c.has_tag_name("data") && c.attribute("key") == Some(key))
                .and_then(|c| c.text())
                .map(str::to_string)
        };
        assert_eq!(data("user").unwrap(), corpus.users()[i]);
        assert_eq!(data("is_candidate").unwrap(), cands.contains(i).to_string());
        assert_eq!(
            data("max_phi").map(|s| s.parse::<f64>().unwrap()),
            max_phi[i]
        );
    }
}

#[test]
fn two_node_graphml() {
    let x = coordnet::matrix::SparseBinaryMatrix::from_rows(3, &[vec![0, 1], vec![0, 1]]).unwrap();
    let g = score_graph(&knn_graph(&x, 1).unwrap(), &x).unwrap();
    let users = vec!["alice".to_string(), "bob & co".to_string()];
    let labels = ClusterAssignment {
        labels: vec![0, 0],
        n_clusters: 1,
        membership_strength: vec![1.0; 2],
    };
    let cands = extract_candidates(&g, 0.67);
    let mut buf = Vec::new();
    write_graphml(&g, &users, &labels, &cands, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(
        doc.descendants().filter(|x| x.has_tag_name("node")).count(),
        2
    );
    assert_eq!(
        doc.descendants().filter(|x| x.has_tag_name("edge")).count(),
        1
    );
    assert!(text.contains("bob &amp; co"));
    // one dead tweet column: a = 2, b = c = 0, d = 1
    assert!(text.contains(r#"<data key="phi">1</data>"#));
}

#[test]
fn graphml_io_error_names_the_path() {
    let x = coordnet::matrix::SparseBinaryMatrix::from_rows(2, &[vec![0], vec![0, 1]]).unwrap();
    let g = score_graph(&knn_graph(&x, 1).unwrap(), &x).unwrap();
    let labels = ClusterAssignment {
        labels: vec![-1, -1],
        n_clusters: 0,
        membership_strength: vec![0.0; 2],
    };
    let cands = extract_candidates(&g, 0.67);
    let path = std::path::Path::new("/nonexistent-dir/g.graphml");
    let err = export_graphml(&g, &["a".into(), "b".into()], &labels, &cands, path).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/g.graphml"));
}
