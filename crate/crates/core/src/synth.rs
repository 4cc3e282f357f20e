//! Synthetic share corpora with planted coordinated groups and organic
//! homophily clusters.
//!
//! Tweet layout: each coordinated group owns a private pool at the start of
//! the tweet range; the remaining tweets are split evenly into one pool per
//! organic cluster. Organic users draw from their cluster's pool with Zipf
//! popularity (exponent 1) and, with probability `noise_rate` per share, from
//! the whole range instead. Coordinated members share each pool tweet with
//! probability `overlap_rate`, plus Binomial(shared_pool, noise_rate) uniform
//! shares from outside their pool.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::corpus::ShareEvent;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordGroup {
    pub group_size: usize,
    pub shared_pool: usize,
    pub overlap_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_organic_users: usize,
    pub n_organic_clusters: usize,
    pub n_tweets: usize,
    pub coord_groups: Vec<CoordGroup>,
    /// Mean number of shares per organic user (Poisson).
    pub organic_activity: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_organic_users: 2000,
            n_organic_clusters: 5,
            n_tweets: 5000,
            coord_groups: vec![
                CoordGroup {
                    group_size: 20,
                    shared_pool: 40,
                    overlap_rate: 0.95,
                };
                10
            ],
            organic_activity: 40.0,
            noise_rate: 0.02,
            seed: 7,
        }
    }
}

impl SynthConfig {
    fn organic_pool_size(&self) -> usize {
        let coordinated: usize = self.coord_groups.iter().map(|g| g.shared_pool).sum();
        (self.n_tweets.saturating_sub(coordinated)) / self.n_organic_clusters.max(1)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let infeasible = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.noise_rate) {
            return infeasible(format!("noise_rate {} outside [0, 1)", self.noise_rate));
        }
        let coordinated: usize = self.coord_groups.iter().map(|g| g.shared_pool).sum();
        if coordinated > self.n_tweets {
            return infeasible(format!(
                "coordinated pools need {coordinated} tweets but only {} exist",
                self.n_tweets
            ));
        }
        for (i, g) in self.coord_groups.iter().enumerate() {
            if !(g.overlap_rate > 0.0 && g.overlap_rate <= 1.0) {
                return infeasible(format!(
                    "group {i}: overlap_rate {} outside (0, 1]",
                    g.overlap_rate
                ));
            }
            if g.overlap_rate <= self.noise_rate {
                return infeasible(format!(
                    "group {i}: overlap_rate {} must exceed noise_rate {}",
                    g.overlap_rate, self.noise_rate
                ));
            }
            if g.group_size == 0 || g.shared_pool == 0 {
                return infeasible(format!("group {i}: size and pool must be positive"));
            }
            if g.shared_pool >= self.n_tweets && self.noise_rate > 0.0 {
                return infeasible(format!(
                    "group {i}: no tweets left outside the pool for noise"
                ));
            }
        }
        if self.n_organic_users > 0 {
            if self.n_organic_clusters == 0 {
                return infeasible("organic users need at least one organic cluster".into());
            }
            if self.organic_activity.is_nan() || self.organic_activity < 1.0 {
                return infeasible("organic_activity must be at least 1".into());
            }
            let pool = self.organic_pool_size();
            if pool == 0 || self.organic_activity > pool as f64 {
                return infeasible(format!(
                    "organic activity {} exceeds the per-cluster pool of {pool} tweets",
                    self.organic_activity
                ));
            }
        }
        if self.n_organic_users == 0 && self.coord_groups.is_empty() {
            return infeasible("no users to generate".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub coordinated_users: BTreeSet<String>,
    #[serde(rename = "organic_clusters")]
    pub organic_cluster_of: BTreeMap<String, usize>,
}

pub fn tweet_token(i: usize) -> String {
    format!("t{i:06}")
}

fn coordinated_token(group: usize, member: usize) -> String {
    format!("c{group:03}_{member:04}")
}

fn organic_token(cluster: usize, user: usize) -> String {
    format!("o{cluster:03}_{user:06}")
}

/// Draws a tweet uniformly from `0..n_tweets`, skipping `excluded`.
fn uniform_outside(
    rng: &mut ChaCha8Rng,
    n_tweets: usize,
    excluded: std::ops::Range<usize>,
) -> usize {
    let span = n_tweets - excluded.len();
    let x = rng.random_range(0..span);
    if x >= excluded.start {
        x + excluded.len()
    } else {
        x
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<(Vec<ShareEvent>, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::new();
    let mut truth = GroundTruth::default();

    let mut offset = 0;
    for (g, group) in cfg.coord_groups.iter().enumerate() {
        let pool = offset..offset + group.shared_pool;
        offset = pool.end;
        let noise = Binomial::new(group.shared_pool as u64, cfg.noise_rate)
            .map_err(|e| Error::Config(e.to_string()))?;
        for member in 0..group.group_size {
            let user = coordinated_token(g, member);
            let mut shared = HashSet::new();
            for t in pool.clone() {
                if rng.random_bool(group.overlap_rate) {
                    shared.insert(t);
                    events.push(ShareEvent::new(&user, tweet_token(t)));
                }
            }
            let n_noise = noise.sample(&mut rng) as usize;
            let outside = cfg.n_tweets - pool.len();
            for _ in 0..n_noise.min(outside) {
                // rejection keeps the draws distinct
                loop {
                    let t = uniform_outside(&mut rng, cfg.n_tweets, pool.clone());
                    if shared.insert(t) {
                        events.push(ShareEvent::new(&user, tweet_token(t)));
                        break;
                    }
                }
            }
            truth.coordinated_users.insert(user);
        }
    }

    if cfg.n_organic_users > 0 {
        let pool_size = cfg.organic_pool_size();
        let zipf = Zipf::new(pool_size as f64, 1.0).map_err(|e| Error::Config(e.to_string()))?;
        let activity =
            Poisson::new(cfg.organic_activity).map_err(|e| Error::Config(e.to_string()))?;
        for u in 0..cfg.n_organic_users {
            let cluster = u * cfg.n_organic_clusters / cfg.n_organic_users;
            let pool_start = offset + cluster * pool_size;
            let user = organic_token(cluster, u);
            let target = (activity.sample(&mut rng) as usize).clamp(1, pool_size);
            let mut shared = HashSet::with_capacity(target);
            let mut attempts = 0;
            while shared.len() < target && attempts < 100 * target {
                attempts += 1;
                let t = if rng.random_bool(cfg.noise_rate) {
                    rng.random_range(0..cfg.n_tweets)
                } else {
                    pool_start + zipf.sample(&mut rng) as usize - 1
                };
                if shared.insert(t) {
                    events.push(ShareEvent::new(&user, tweet_token(t)));
                }
            }
            truth.organic_cluster_of.insert(user, cluster);
        }
    }
    Ok((events, truth))
}

/// Writes events as CSV with a `user_id,tweet_id` header.
pub fn write_events_csv<W: Write>(events: &[ShareEvent], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let has_timestamp = events.iter().any(|e| e.timestamp.is_some());
    let map_err = |e: csv::Error| Error::InvalidData(e.to_string());
    if has_timestamp {
        wtr.write_record(["user_id", "tweet_id", "timestamp"])
            .map_err(map_err)?;
    } else {
        wtr.write_record(["user_id", "tweet_id"]).map_err(map_err)?;
    }
    for e in events {
        if has_timestamp {
            let ts = e.timestamp.map(|t| t.to_string()).unwrap_or_default();
            wtr.write_record([e.user_id.as_str(), e.tweet_id.as_str(), ts.as_str()])
                .map_err(map_err)?;
        } else {
            wtr.write_record([e.user_id.as_str(), e.tweet_id.as_str()])
                .map_err(map_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_events, EventFormat};

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = SynthConfig {
            n_organic_users: 200,
            n_tweets: 800,
            coord_groups: vec![CoordGroup {
                group_size: 10,
                shared_pool: 30,
                overlap_rate: 0.9,
            }],
            ..SynthConfig::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_events_csv(&generate(&cfg).unwrap().0, &mut a).unwrap();
        write_events_csv(&generate(&cfg).unwrap().0, &mut b).unwrap();
        assert_eq!(a, b);

        let other = SynthConfig {
            seed: cfg.seed + 1,
            ..cfg
        };
        let mut c = Vec::new();
        write_events_csv(&generate(&other).unwrap().0, &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SynthConfig {
            n_organic_users: 20,
            n_tweets: 300,
            coord_groups: vec![],
            ..SynthConfig::default()
        };
        let (events, truth) = generate(&cfg).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&events, &mut buf).unwrap();
        assert_eq!(
            parse_events(buf.as_slice(), EventFormat::Csv).unwrap(),
            events
        );
        assert_eq!(truth.organic_cluster_of.len(), 20);
        assert!(truth.coordinated_users.is_empty());
    }

    #[test]
    fn full_overlap_group() {
        let cfg = SynthConfig {
            n_organic_users: 0,
            n_tweets: 30,
            coord_groups: vec![CoordGroup {
                group_size: 20,
                shared_pool: 30,
                overlap_rate: 1.0,
            }],
            noise_rate: 0.0,
            ..SynthConfig::default()
        };
        let (events, truth) = generate(&cfg).unwrap();
        assert_eq!(events.len(), 600);
        assert_eq!(truth.coordinated_users.len(), 20);
    }

    #[test]
    fn infeasible_configs() {
        let base = SynthConfig::default();
        let bad = [
            SynthConfig {
                organic_activity: 5000.0,
                ..base.clone()
            },
            SynthConfig {
                noise_rate: 1.0,
                ..base.clone()
            },
            SynthConfig {
                n_tweets: 100,
                ..base.clone()
            },
            SynthConfig {
                coord_groups: vec![CoordGroup {
                    group_size: 5,
                    shared_pool: 10,
                    overlap_rate: 0.01,
                }],
                ..base.clone()
            },
            SynthConfig {
                n_organic_clusters: 0,
                ..base.clone()
            },
        ];
        for cfg in bad {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn ground_truth_json_keys() {
        let mut truth = GroundTruth::default();
        truth.coordinated_users.insert("c1".into());
        truth.organic_cluster_of.insert("o1".into(), 0);
        let json = serde_json::to_string(&truth).unwrap();
        assert_eq!(
            json,
            r#"{"coordinated_users":["c1"],"organic_clusters":{"o1":0}}"#
        );
    }
}
