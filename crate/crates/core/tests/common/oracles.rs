//! Reference implementations used only by tests. Each one follows the
//! textbook definition directly and shares no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Per-point cluster id, `None` for noise.
///
/// Core points are those with at least `min_pts` points (themselves
/// included) within `eps`. Clusters are the connected components of core
/// points under the eps-relation, numbered by their smallest core index.
/// A border point belongs to the lowest-numbered cluster holding a core
/// point within `eps` of it.
pub fn reference_dbscan(dist: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = dist.len();
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| dist[i][j] <= eps).count() >= min_pts)
        .collect();

    let mut component = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = next;
        while let Some(p) = stack.pop() {
            for q in 0..n {
                if core[q] && component[q] == usize::MAX && dist[p][q] <= eps {
                    component[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }

    (0..n)
        .map(|i| {
            if core[i] {
                Some(component[i])
            } else {
                (0..n)
                    .filter(|&j| core[j] && dist[i][j] <= eps)
                    .map(|j| component[j])
                    .min()
            }
        })
        .collect()
}

/// LCS length from the full (m+1) x (n+1) table.
pub fn reference_lcs(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

/// LCS length by enumerating every subsequence of `a`. Exponential; only
/// for very short strings.
pub fn brute_force_lcs(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let is_subseq = |s: &[char]| {
        let mut it = b.iter();
        s.iter().all(|c| it.any(|d| d == c))
    };
    (0u32..(1 << a.len()))
        .filter_map(|mask| {
            let s: Vec<char> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).collect();
            is_subseq(&s).then_some(s.len())
        })
        .max()
        .unwrap_or(0)
}

pub fn reference_lcs_similarity(a: &str, b: &str) -> f64 {
    let total = a.chars().count() + b.chars().count();
    if total == 0 {
        1.0
    } else {
        2.0 * reference_lcs(a, b) as f64 / total as f64
    }
}

/// Cosine distance over dense count vectors built from whitespace tokens.
pub fn reference_cosine_distance(a: &str, b: &str) -> f64 {
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in a.split_whitespace().chain(b.split_whitespace()) {
        let next = vocab.len();
        vocab.entry(tok).or_insert(next);
    }
    let dense = |s: &str| {
        let mut v = vec![0.0f64; vocab.len()];
        for tok in s.split_whitespace() {
            v[vocab[tok]] += 1.0;
        }
        v
    };
    let (va, vb) = (dense(a), dense(b));
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => 1.0 - dot / (na * nb),
    }
}

/// Canonical form of a partition for comparison up to id renaming: clusters
/// renumbered by first appearance.
pub fn canonical_partition(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|id| {
                let next = map.len();
                *map.entry(id).or_insert(next)
            })
        })
        .collect()
}
