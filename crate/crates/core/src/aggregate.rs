//! Groups cluster labels whose leading characters are similar enough.
//!
//! Every unordered pair of labels is compared on its normalized prefix with
//! [`lcs_similarity`]; pairs at or above `theta` are unioned, and the groups
//! are the connected components.

use crate::dbscan::ClusterSummary;
use crate::textprep::{compare_labels, lcs_similarity, prefix_key, DEFAULT_PREFIX_LEN};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_THETA: f64 = 0.85;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("duplicate input label {0:?}")]
    DuplicateLabel(String),
    #[error("label {0:?} has a zero count")]
    ZeroCount(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("override file {path}: {source}")]
    OverrideIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("override file {path}: {source}")]
    OverrideFormat {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    pub prefix_len: usize,
    pub theta: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self {
            prefix_len: DEFAULT_PREFIX_LEN,
            theta: DEFAULT_THETA,
        }
    }
}

impl AggregationParams {
    pub fn new(prefix_len: usize, theta: f64) -> Result<Self, AggregateError> {
        let p = Self { prefix_len, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AggregateError> {
        if self.prefix_len == 0 {
            return Err(AggregateError::InvalidParams("prefix_len must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(AggregateError::InvalidParams(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// User-supplied corrections applied on top of the similarity rule.
///
/// `merge` pairs are always unioned. `split` pairs never get a direct
/// similarity edge, though they can still end up together through a chain of
/// other labels. Labels not present in the input are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Overrides {
    pub merge: Vec<(String, String)>,
    pub split: Vec<(String, String)>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.merge.is_empty() && self.split.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, AggregateError> {
        let text = std::fs::read_to_string(path).map_err(|source| AggregateError::OverrideIo {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| AggregateError::OverrideFormat {
            path: path.display().to_string(),
            source,
        })
    }

    fn splits(&self, a: &str, b: &str) -> bool {
        self.split.iter().any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedGroup {
    pub members: Vec<String>,
    pub total_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub prefix_a: String,
    pub prefix_b: String,
    pub similarity: f64,
    pub theta: f64,
    pub merged: bool,
}

/// On-disk form of an aggregation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFile {
    pub params: AggregationParams,
    pub group_count: usize,
    pub groups: Vec<AggregatedGroup>,
}

impl GroupFile {
    pub fn new(params: AggregationParams, groups: Vec<AggregatedGroup>) -> Self {
        Self {
            params,
            group_count: groups.len(),
            groups,
        }
    }
}

pub fn explain_merge(a: &str, b: &str, params: AggregationParams) -> MergeTrace {
    let prefix_a = prefix_key(a, params.prefix_len);
    let prefix_b = prefix_key(b, params.prefix_len);
    let similarity = lcs_similarity(&prefix_a, &prefix_b);
    MergeTrace {
        merged: similarity >= params.theta,
        prefix_a,
        prefix_b,
        similarity,
        theta: params.theta,
    }
}

pub fn aggregate(
    summaries: &[ClusterSummary],
    params: AggregationParams,
) -> Result<Vec<AggregatedGroup>, AggregateError> {
    aggregate_with_overrides(summaries, params, &Overrides::default())
}

pub fn aggregate_with_overrides(
    summaries: &[ClusterSummary],
    params: AggregationParams,
    overrides: &Overrides,
) -> Result<Vec<AggregatedGroup>, AggregateError> {
    params.validate()?;
    let mut position: HashMap<&str, usize> = HashMap::with_capacity(summaries.len());
    for (i, s) in summaries.iter().enumerate() {
        if s.count == 0 {
            return Err(AggregateError::ZeroCount(s.label.clone()));
        }
        if position.insert(s.label.as_str(), i).is_some() {
            return Err(AggregateError::DuplicateLabel(s.label.clone()));
        }
    }

    let prefixes: Vec<String> = summaries
        .iter()
        .map(|s| prefix_key(&s.label, params.prefix_len))
        .collect();
    let mut sets = DisjointSet::new(summaries.len());
    for i in 0..summaries.len() {
        for j in (i + 1)..summaries.len() {
            if overrides.splits(&summaries[i].label, &summaries[j].label) {
                continue;
            }
            if lcs_similarity(&prefixes[i], &prefixes[j]) >= params.theta {
                sets.union(i, j);
            }
        }
    }
    for (a, b) in &overrides.merge {
        if let (Some(&i), Some(&j)) = (position.get(a.as_str()), position.get(b.as_str())) {
            sets.union(i, j);
        }
    }

    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..summaries.len() {
        components.entry(sets.find(i)).or_default().push(i);
    }
    let mut groups: Vec<AggregatedGroup> = components
        .into_values()
        .map(|idx| {
            let mut members: Vec<String> = idx.iter().map(|&i| summaries[i].label.clone()).collect();
            members.sort_by(|a, b| compare_labels(a, b));
            AggregatedGroup {
                members,
                total_count: idx.iter().map(|&i| summaries[i].count).sum(),
            }
        })
        .collect();
    groups.sort_by(compare_groups);
    Ok(groups)
}

fn compare_groups(a: &AggregatedGroup, b: &AggregatedGroup) -> Ordering {
    b.total_count
        .cmp(&a.total_count)
        .then_with(|| compare_labels(&a.members[0], &b.members[0]))
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            Ordering::Less => self.parent[a] = b,
            Ordering::Greater => self.parent[b] = a,
            Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] = self.rank[a].saturating_add(1);
            }
        }
    }
}
