//! Share-event ingestion: parsing, ID interning and activity filters.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SparseBinaryMatrix;

/// A single share (retweet) of `tweet_id` by `user_id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShareEvent {
    pub user_id: String,
    pub tweet_id: String,
    pub timestamp: Option<i64>,
}

impl ShareEvent {
    pub fn new(user_id: impl Into<String>, tweet_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            tweet_id: tweet_id.into(),
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EventFormat::Csv),
            "jsonl" | "ndjson" => Ok(EventFormat::Jsonl),
            other => Err(Error::Config(format!("unknown input format `{other}`"))),
        }
    }
}

impl fmt::Display for EventFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventFormat::Csv => "csv",
            EventFormat::Jsonl => "jsonl",
        })
    }
}

/// How the two activity filters interact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Tweet-audience filter on the raw incidence, then the user-activity
    /// filter once.
    #[default]
    SinglePass,
    /// Alternate both filters until neither removes anything.
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Minimum number of distinct tweets a user must share.
    pub min_user_activity: usize,
    /// Minimum number of distinct users that must share a tweet.
    pub min_tweet_audience: usize,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_user_activity: 20,
            min_tweet_audience: 10,
            mode: FilterMode::SinglePass,
        }
    }
}

impl FilterConfig {
    pub fn new(min_user_activity: usize, min_tweet_audience: usize) -> Self {
        Self {
            min_user_activity,
            min_tweet_audience,
            mode: FilterMode::SinglePass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_user_activity == 0 || self.min_tweet_audience == 0 {
            return Err(Error::Config("filter thresholds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Size summary printed by `corpus stats`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_users: usize,
    pub n_tweets: usize,
    pub n_entries: usize,
}

/// Filtered user-by-tweet incidence with its token dictionaries.
///
/// Users and tweets are stored in ascending lexicographic token order, so a
/// token's position is its row (or column) index.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareCorpus {
    users: Vec<String>,
    tweets: Vec<String>,
    incidence: SparseBinaryMatrix,
}

impl ShareCorpus {
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn tweets(&self) -> &[String] {
        &self.tweets
    }

    pub fn incidence(&self) -> &SparseBinaryMatrix {
        &self.incidence
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_tweets(&self) -> usize {
        self.tweets.len()
    }

    pub fn n_entries(&self) -> usize {
        self.incidence.nnz()
    }

    pub fn user_index(&self, token: &str) -> Option<usize> {
        self.users.binary_search_by(|u| u.as_str().cmp(token)).ok()
    }

    pub fn tweet_index(&self, token: &str) -> Option<usize> {
        self.tweets.binary_search_by(|t| t.as_str().cmp(token)).ok()
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            n_users: self.n_users(),
            n_tweets: self.n_tweets(),
            n_entries: self.n_entries(),
        }
    }
}

/// Parses share events from CSV or JSON lines, preserving input order.
pub fn parse_events<R: Read>(reader: R, format: EventFormat) -> Result<Vec<ShareEvent>> {
    match format {
        EventFormat::Csv => parse_csv(reader),
        EventFormat::Jsonl => parse_jsonl(reader),
    }
}

fn parse_timestamp(raw: &str, line: u64) -> Result<Option<i64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("invalid timestamp `{raw}`"),
    })
}

fn required(field: Option<&str>, name: &str, line: u64) -> Result<String> {
    match field.map(str::trim) {
        Some(value) if !value.is_empty() => Ok(value.to_string()),
        _ => Err(Error::Parse {
            line,
            message: format!("missing {name}"),
        }),
    }
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<ShareEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    // column positions of user_id, tweet_id, timestamp
    let mut columns = (0usize, 1usize, Some(2usize));
    let mut events = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        let line = rdr.position().line();
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(line, |p| p.line());
        if first {
            first = false;
            if record.get(0).map(str::trim) == Some("user_id") {
                let find = |name: &str| record.iter().position(|f| f.trim() == name);
                let user = find("user_id").unwrap();
                let tweet = find("tweet_id").ok_or_else(|| Error::Parse {
                    line,
                    message: "header lacks a tweet_id column".into(),
                })?;
                columns = (user, tweet, find("timestamp"));
                continue;
            }
        }
        if record.len() == 1 && record.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        let user_id = required(record.get(columns.0), "user_id", line)?;
        let tweet_id = required(record.get(columns.1), "tweet_id", line)?;
        let timestamp = match columns.2.and_then(|c| record.get(c)) {
            Some(raw) => parse_timestamp(raw, line)?,
            None => None,
        };
        events.push(ShareEvent {
            user_id,
            tweet_id,
            timestamp,
        });
    }
    Ok(events)
}

fn json_token(value: Option<&serde_json::Value>, name: &str, line: u64) -> Result<String> {
    match value {
        Some(serde_json::Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
        _ => Err(Error::Parse {
            line,
            message: format!("missing {name}"),
        }),
    }
}

fn parse_jsonl<R: Read>(reader: R) -> Result<Vec<ShareEvent>> {
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        let timestamp = match obj.get("timestamp") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::Number(n)) => Some(n.as_i64().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("invalid timestamp `{n}`"),
            })?),
            Some(serde_json::Value::String(s)) => parse_timestamp(s, line_no)?,
            Some(other) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("invalid timestamp `{other}`"),
                })
            }
        };
        events.push(ShareEvent {
            user_id: json_token(obj.get("user_id"), "user_id", line_no)?,
            tweet_id: json_token(obj.get("tweet_id"), "tweet_id", line_no)?,
            timestamp,
        });
    }
    Ok(events)
}

/// Interns, binarizes and filters share events into a [`ShareCorpus`].
pub fn build_corpus(events: &[ShareEvent], cfg: &FilterConfig) -> Result<ShareCorpus> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(Error::EmptyCorpus("no share events".into()));
    }

    let users: Vec<&str> = events
        .iter()
        .map(|e| e.user_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tweets: Vec<&str> = events
        .iter()
        .map(|e| e.tweet_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lookup = |tokens: &[&str], key: &str| tokens.binary_search(&key).unwrap() as u32;

    let mut pairs: Vec<(u32, u32)> = events
        .iter()
        .map(|e| (lookup(&users, &e.user_id), lookup(&tweets, &e.tweet_id)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    let mut keep_user = vec![true; users.len()];
    let mut keep_tweet = vec![true; tweets.len()];
    loop {
        let before = pairs.len();
        filter_tweets(&mut pairs, &mut keep_tweet, cfg.min_tweet_audience);
        filter_users(&mut pairs, &mut keep_user, cfg.min_user_activity);
        if cfg.mode == FilterMode::SinglePass || pairs.len() == before {
            break;
        }
    }

    // tweets whose remaining audience was entirely removed leave the universe
    let mut has_entry = vec![false; tweets.len()];
    for &(_, t) in &pairs {
        has_entry[t as usize] = true;
    }
    for (keep, used) in keep_tweet.iter_mut().zip(&has_entry) {
        *keep &= *used;
    }

    if pairs.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no entries survive filtering (min_user_activity = {}, min_tweet_audience = {})",
            cfg.min_user_activity, cfg.min_tweet_audience
        )));
    }

    let user_map = compact(&keep_user);
    let tweet_map = compact(&keep_tweet);
    let kept_users: Vec<String> = select(&users, &keep_user);
    let kept_tweets: Vec<String> = select(&tweets, &keep_tweet);

    let mut rows = vec![Vec::new(); kept_users.len()];
    for &(u, t) in &pairs {
        rows[user_map[u as usize] as usize].push(tweet_map[t as usize]);
    }
    let incidence = SparseBinaryMatrix::from_rows(kept_tweets.len(), &rows)?;

    Ok(ShareCorpus {
        users: kept_users,
        tweets: kept_tweets,
        incidence,
    })
}

fn filter_tweets(pairs: &mut Vec<(u32, u32)>, keep: &mut [bool], min_audience: usize) {
    let mut audience = vec![0usize; keep.len()];
    for &(_, t) in pairs.iter() {
        audience[t as usize] += 1;
    }
    for (k, &n) in keep.iter_mut().zip(&audience) {
        *k &= n >= min_audience;
    }
    pairs.retain(|&(_, t)| keep[t as usize]);
}

fn filter_users(pairs: &mut Vec<(u32, u32)>, keep: &mut [bool], min_activity: usize) {
    let mut activity = vec![0usize; keep.len()];
    for &(u, _) in pairs.iter() {
        activity[u as usize] += 1;
    }
    for (k, &n) in keep.iter_mut().zip(&activity) {
        *k &= n >= min_activity;
    }
    pairs.retain(|&(u, _)| keep[u as usize]);
}

fn compact(keep: &[bool]) -> Vec<u32> {
    let mut next = 0u32;
    keep.iter()
        .map(|&k| {
            let idx = next;
            if k {
                next += 1;
            }
            idx
        })
        .collect()
}

fn select(tokens: &[&str], keep: &[bool]) -> Vec<String> {
    tokens
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(t, _)| t.to_string())
        .collect()
}
