//! Random DBSCAN and string instances for oracle comparisons.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;

pub struct Instance {
    pub dist: Vec<Vec<f64>>,
    pub eps: f64,
    pub min_pts: usize,
    pub kind: &'static str,
}

const EPS_GRID: [f64; 7] = [0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0];

/// Cycles through 1-D points on a coarse grid (exact ties at eps), 2-D
/// Euclidean points and random symmetric non-metric matrices.
pub fn random_instance<R: Rng>(rng: &mut R, round: usize) -> Instance {
    let n = rng.random_range(0..=60);
    let (dist, kind) = match round % 3 {
        0 => {
            let pts: Vec<f64> = (0..n).map(|_| rng.random_range(0..40) as f64 * 0.05).collect();
            (matrix(n, |i, j| (pts[i] - pts[j]).abs()), "metric-1d")
        }
        1 => {
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)))
                .collect();
            (
                matrix(n, |i, j| {
                    ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
                }),
                "metric-2d",
            )
        }
        _ => {
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = rng.random_range(0..20) as f64 * 0.05;
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
            (d, "non-metric")
        }
    };
    Instance {
        dist,
        eps: EPS_GRID[rng.random_range(0..EPS_GRID.len())],
        min_pts: rng.random_range(1..=8),
        kind,
    }
}

fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { f(i, j) }).collect())
        .collect()
}

pub fn random_string<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect()
}

pub fn random_token_string<R: Rng>(rng: &mut R, vocab: &[&str], max_tokens: usize) -> String {
    let len = rng.random_range(0..=max_tokens);
    (0..len)
        .map(|_| vocab[rng.random_range(0..vocab.len())])
        .collect::<Vec<_>>()
        .join(" ")
}
