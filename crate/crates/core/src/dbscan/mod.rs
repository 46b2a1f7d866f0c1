//! Deterministic DBSCAN over an abstract point set and distance oracle.
//!
//! Points are scanned in input order and neighborhoods are expanded in
//! ascending index order, so cluster ids are assigned in order of first core
//! point discovery. `min_pts` counts the point itself.

mod labels;

pub use labels::{
    cluster_root_causes, cluster_root_causes_unoptimized, ClusterFile, ClusterFileEntry, ClusterSummary,
    LabelClustering, NoiseEntry,
};

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_MIN_PTS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum DbscanError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("distance oracle violates its contract at ({i}, {j}): {reason}")]
    Contract { i: usize, j: usize, reason: String },
    #[error("weights length {weights} does not match point count {points}")]
    WeightMismatch { weights: usize, points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self, DbscanError> {
        let params = Self { eps, min_pts };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DbscanError> {
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(DbscanError::InvalidParams(format!(
                "eps must be a finite non-negative number, got {}",
                self.eps
            )));
        }
        if self.min_pts == 0 {
            return Err(DbscanError::InvalidParams("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cluster membership of a single point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(id) => Some(id),
            Label::Noise => None,
        }
    }

    pub fn is_noise(self) -> bool {
        matches!(self, Label::Noise)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub cluster_count: usize,
}

impl ClusterAssignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_noise()).count()
    }

    /// Point indices of each cluster, by cluster id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, label) in self.labels.iter().enumerate() {
            if let Label::Cluster(id) = label {
                out[*id].push(i);
            }
        }
        out
    }
}

/// Run DBSCAN with every point carrying unit weight.
pub fn dbscan<P, D>(points: &[P], distance: D, params: DbscanParams) -> Result<ClusterAssignment, DbscanError>
where
    D: Fn(&P, &P) -> f64,
{
    let weights = vec![1usize; points.len()];
    dbscan_weighted(points, &weights, distance, params)
}

/// Run DBSCAN where point `i` stands for `weights[i]` coincident copies.
///
/// A point is core iff the summed weight of its eps-neighborhood (itself
/// included) reaches `min_pts`. The result equals running plain DBSCAN on
/// the expanded multiset with copies placed at their first occurrence.
pub fn dbscan_weighted<P, D>(
    points: &[P],
    weights: &[usize],
    distance: D,
    params: DbscanParams,
) -> Result<ClusterAssignment, DbscanError>
where
    D: Fn(&P, &P) -> f64,
{
    params.validate()?;
    if weights.len() != points.len() {
        return Err(DbscanError::WeightMismatch {
            weights: weights.len(),
            points: points.len(),
        });
    }
    let n = points.len();
    check_contract(points, &distance)?;

    let neighbors = |p: usize| -> Vec<usize> {
        (0..n)
            .filter(|&q| q == p || distance(&points[p], &points[q]) <= params.eps)
            .collect()
    };
    let mass = |hood: &[usize]| -> usize { hood.iter().map(|&q| weights[q]).sum() };

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut core = vec![false; n];
    let mut next_id = 0usize;

    for p in 0..n {
        if labels[p].is_some() {
            continue;
        }
        let hood = neighbors(p);
        if mass(&hood) < params.min_pts {
            labels[p] = Some(Label::Noise);
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[p] = Some(Label::Cluster(id));
        core[p] = true;

        let mut queue: VecDeque<usize> = hood.into_iter().filter(|&q| q != p).collect();
        while let Some(q) = queue.pop_front() {
            match labels[q] {
                Some(Label::Noise) => {
                    // previously rejected as a seed; it is a border point of this cluster
                    labels[q] = Some(Label::Cluster(id));
                    continue;
                }
                Some(Label::Cluster(_)) => continue,
                None => {}
            }
            labels[q] = Some(Label::Cluster(id));
            let q_hood = neighbors(q);
            if mass(&q_hood) >= params.min_pts {
                core[q] = true;
                queue.extend(
                    q_hood
                        .into_iter()
                        .filter(|&r| labels[r].is_none() || labels[r] == Some(Label::Noise)),
                );
            }
        }
    }

    Ok(ClusterAssignment {
        labels: labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect(),
        core,
        cluster_count: next_id,
    })
}

/// Check the oracle on a deterministic sample of pairs: self-distance zero,
/// non-negative, not NaN, symmetric.
fn check_contract<P, D>(points: &[P], distance: &D) -> Result<(), DbscanError>
where
    D: Fn(&P, &P) -> f64,
{
    let n = points.len();
    let violation = |i: usize, j: usize, reason: String| DbscanError::Contract { i, j, reason };
    for i in 0..n {
        let self_d = distance(&points[i], &points[i]);
        if self_d != 0.0 {
            return Err(violation(i, i, format!("self-distance is {self_d}, expected 0")));
        }
        for j in [(i + 1) % n, n - 1 - i] {
            if j == i {
                continue;
            }
            let dij = distance(&points[i], &points[j]);
            let dji = distance(&points[j], &points[i]);
            if dij.is_nan() || dij < 0.0 {
                return Err(violation(i, j, format!("distance {dij} is negative or NaN")));
            }
            if dij != dji {
                return Err(violation(i, j, format!("asymmetric: {dij} vs {dji}")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], eps: f64, min_pts: usize) -> ClusterAssignment {
        dbscan(points, |a, b| (a - b).abs(), DbscanParams::new(eps, min_pts).unwrap()).unwrap()
    }

    #[test]
    fn single_dense_category() {
        let a = line(&[0.0; 6], 0.1, 4);
        assert_eq!(a.cluster_count, 1);
        assert_eq!(a.noise_count(), 0);
        assert!(a.core.iter().all(|&c| c));
    }

    #[test]
    fn sparse_category_is_noise() {
        let pts = [0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0];
        let a = line(&pts, 0.1, 4);
        assert_eq!(a.cluster_count, 1);
        assert_eq!(&a.labels[..3], &[Label::Noise; 3]);
        assert_eq!(&a.labels[3..], &[Label::Cluster(0); 4]);
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // point 4 sits between two dense groups and is core for neither
        let pts = [-1.0, -1.0, -1.0, -0.2, 0.5, 1.2, 2.0, 2.0, 2.0];
        let a = line(&pts, 1.0, 4);
        assert_eq!(a.cluster_count, 2);
        assert!(!a.core[4]);
        assert_eq!(a.labels[4], Label::Cluster(0));
        assert_eq!(a.labels[5], Label::Cluster(1));
    }

    #[test]
    fn noise_seed_later_claimed_as_border() {
        let pts = [1.5, 0.6, 0.6, 0.0, 0.0];
        let a = line(&pts, 1.0, 5);
        assert!(!a.core[0]);
        assert!(a.core[1]);
        assert_eq!(a.labels[0], Label::Cluster(0));
        assert_eq!(a.noise_count(), 0);
    }

    #[test]
    fn empty_input() {
        let a = line(&[], 0.1, 4);
        assert_eq!(a.cluster_count, 0);
        assert!(a.labels.is_empty());
    }

    #[test]
    fn invalid_params() {
        assert!(DbscanParams::new(-0.1, 4).is_err());
        assert!(DbscanParams::new(f64::NAN, 4).is_err());
        assert!(DbscanParams::new(0.1, 0).is_err());
    }

    #[test]
    fn asymmetric_oracle_rejected() {
        let pts = [0usize, 1, 2];
        let err = dbscan(
            &pts,
            |a, b| {
                if a < b {
                    1.0
                } else if a > b {
                    2.0
                } else {
                    0.0
                }
            },
            DbscanParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DbscanError::Contract { .. }));
        let err = dbscan(&pts, |a, b| if a == b { 0.0 } else { -1.0 }, DbscanParams::default()).unwrap_err();
        assert!(matches!(err, DbscanError::Contract { .. }));
        let err = dbscan(&pts, |_, _| 0.5, DbscanParams::default()).unwrap_err();
        assert!(matches!(err, DbscanError::Contract { .. }));
    }

    #[test]
    fn weighted_matches_expanded() {
        let pts = [0.0f64, 3.0, 0.05, 9.0];
        let weights = [3, 4, 1, 3];
        let params = DbscanParams::new(0.1, 4).unwrap();
        let w = dbscan_weighted(&pts, &weights, |a, b| (a - b).abs(), params).unwrap();
        assert_eq!(
            w.labels,
            [Label::Cluster(0), Label::Cluster(1), Label::Cluster(0), Label::Noise]
        );
    }
}
