//! Root-cause text normalization and the two string metrics used downstream:
//! term-frequency cosine distance (clustering) and prefix LCS similarity
//! (aggregation).

use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Default number of leading characters compared during aggregation.
pub const DEFAULT_PREFIX_LEN: usize = 10;

/// Lowercase, drop parentheses, turn `/` and `-` into spaces, collapse
/// whitespace and trim.
pub fn normalize_label(s: &str) -> String {
    let mapped: String = s
        .chars()
        .filter(|c| *c != '(' && *c != ')')
        .map(|c| if c == '/' || c == '-' { ' ' } else { c })
        .flat_map(char::to_lowercase)
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Sparse term-frequency vector of a normalized label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVector {
    source_label: String,
    counts: BTreeMap<String, u32>,
}

impl TokenVector {
    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn norm(&self) -> f64 {
        self.counts
            .values()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt()
    }

    fn dot(&self, other: &TokenVector) -> f64 {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .filter_map(|(tok, &a)| large.counts.get(tok).map(|&b| f64::from(a) * f64::from(b)))
            .sum()
    }
}

/// Count tokens of an already-normalized string.
pub fn tf_vector(s: &str) -> TokenVector {
    let mut counts = BTreeMap::new();
    for tok in s.split(' ').filter(|t| !t.is_empty()) {
        *counts.entry(tok.to_string()).or_insert(0u32) += 1;
    }
    TokenVector {
        source_label: s.to_string(),
        counts,
    }
}

/// `1 - cos(a, b)`, clamped to `[0, 1]`.
///
/// Identical vectors are at distance exactly zero. One empty vector gives 1,
/// two empty vectors give 0.
pub fn cosine_distance(a: &TokenVector, b: &TokenVector) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    if a.counts == b.counts {
        return 0.0;
    }
    let sim = a.dot(b) / (a.norm() * b.norm());
    (1.0 - sim).clamp(0.0, 1.0)
}

/// First `n` characters of the normalized label.
pub fn prefix_key(s: &str, n: usize) -> String {
    normalize_label(s).chars().take(n).collect()
}

/// Length of the longest common subsequence, by characters.
pub fn lcs_len(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in &a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `2 * LCS(a, b) / (|a| + |b|)`; two empty strings are identical (1.0).
pub fn lcs_similarity(a: &str, b: &str) -> f64 {
    let total = a.chars().count() + b.chars().count();
    if total == 0 {
        return 1.0;
    }
    (2 * lcs_len(a, b)) as f64 / total as f64
}

/// Ordering used wherever labels are listed: case-insensitive first, raw
/// bytes as the tie-break, so the order is total and deterministic.
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    a.to_lowercase().cmp(&b.to_lowercase()).then_with(|| a.cmp(b))
}
