//! Clustering of free-text root-cause labels: records with the same
//! normalized label are collapsed into one weighted point before DBSCAN runs,
//! and the result is expanded back to one label per record.

use super::{dbscan, dbscan_weighted, ClusterAssignment, DbscanError, DbscanParams, Label};
use crate::textprep::{compare_labels, cosine_distance, normalize_label, tf_vector, TokenVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One cluster: its canonical original-case label and record count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseEntry {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelClustering {
    /// Per-record assignment, aligned with the input labels.
    pub assignment: ClusterAssignment,
    /// Indexed by cluster id.
    pub summaries: Vec<ClusterSummary>,
    /// Noise grouped by original label, descending count.
    pub noise: Vec<NoiseEntry>,
}

impl LabelClustering {
    pub fn clustered_total(&self) -> usize {
        self.summaries.iter().map(|s| s.count).sum()
    }

    pub fn noise_total(&self) -> usize {
        self.noise.iter().map(|n| n.count).sum()
    }

    pub fn to_file(&self, params: DbscanParams) -> ClusterFile {
        let mut clusters: Vec<ClusterFileEntry> = self
            .summaries
            .iter()
            .enumerate()
            .map(|(id, s)| ClusterFileEntry {
                id,
                label: s.label.clone(),
                count: s.count,
            })
            .collect();
        clusters.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| compare_labels(&a.label, &b.label)));
        ClusterFile {
            params,
            cluster_count: self.summaries.len(),
            clusters,
            noise: self.noise.clone(),
        }
    }
}

/// On-disk form of a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub params: DbscanParams,
    pub cluster_count: usize,
    pub clusters: Vec<ClusterFileEntry>,
    pub noise: Vec<NoiseEntry>,
}

impl ClusterFile {
    pub fn summaries(&self) -> Vec<ClusterSummary> {
        self.clusters
            .iter()
            .map(|c| ClusterSummary {
                label: c.label.clone(),
                count: c.count,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterFileEntry {
    pub id: usize,
    pub label: String,
    pub count: usize,
}

/// Cluster root-cause strings with cosine distance over term frequencies.
pub fn cluster_root_causes<S: AsRef<str>>(labels: &[S], params: DbscanParams) -> Result<LabelClustering, DbscanError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut vectors: Vec<TokenVector> = Vec::new();
    let mut weights: Vec<usize> = Vec::new();
    let mut record_to_unique = Vec::with_capacity(labels.len());
    for label in labels {
        let norm = normalize_label(label.as_ref());
        let u = *index.entry(norm.clone()).or_insert_with(|| {
            vectors.push(tf_vector(&norm));
            weights.push(0);
            vectors.len() - 1
        });
        weights[u] += 1;
        record_to_unique.push(u);
    }

    let u = vectors.len();
    let mut matrix = vec![0.0f64; u * u];
    for i in 0..u {
        for j in (i + 1)..u {
            let d = cosine_distance(&vectors[i], &vectors[j]);
            matrix[i * u + j] = d;
            matrix[j * u + i] = d;
        }
    }
    let ids: Vec<usize> = (0..u).collect();
    let unique = dbscan_weighted(&ids, &weights, |&a, &b| matrix[a * u + b], params)?;

    let assignment = ClusterAssignment {
        labels: record_to_unique.iter().map(|&k| unique.labels[k]).collect(),
        core: record_to_unique.iter().map(|&k| unique.core[k]).collect(),
        cluster_count: unique.cluster_count,
    };
    Ok(summarize(labels, assignment))
}

/// Same result as [`cluster_root_causes`], computed point by point with no
/// label collapsing. Quadratic in the record count.
pub fn cluster_root_causes_unoptimized<S: AsRef<str>>(
    labels: &[S],
    params: DbscanParams,
) -> Result<LabelClustering, DbscanError> {
    let vectors: Vec<TokenVector> = labels.iter().map(|l| tf_vector(&normalize_label(l.as_ref()))).collect();
    let assignment = dbscan(&vectors, cosine_distance, params)?;
    Ok(summarize(labels, assignment))
}

fn summarize<S: AsRef<str>>(labels: &[S], assignment: ClusterAssignment) -> LabelClustering {
    // per cluster: original spelling -> (count, first index)
    let mut spellings: Vec<HashMap<&str, (usize, usize)>> = vec![HashMap::new(); assignment.cluster_count];
    let mut counts = vec![0usize; assignment.cluster_count];
    let mut noise: HashMap<&str, usize> = HashMap::new();
    for (i, (label, cluster)) in labels.iter().zip(&assignment.labels).enumerate() {
        let label = label.as_ref();
        match cluster {
            Label::Cluster(id) => {
                counts[*id] += 1;
                spellings[*id].entry(label).or_insert((0, i)).0 += 1;
            }
            Label::Noise => *noise.entry(label).or_insert(0) += 1,
        }
    }

    let summaries = spellings
        .iter()
        .zip(&counts)
        .map(|(spell, &count)| {
            let (label, _) = spell
                .iter()
                .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then_with(|| fb.cmp(fa)))
                .expect("every cluster has at least one member");
            ClusterSummary {
                label: label.to_string(),
                count,
            }
        })
        .collect();

    let mut noise: Vec<NoiseEntry> = noise
        .into_iter()
        .map(|(label, count)| NoiseEntry {
            label: label.to_string(),
            count,
        })
        .collect();
    noise.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| compare_labels(&a.label, &b.label)));

    LabelClustering {
        assignment,
        summaries,
        noise,
    }
}
