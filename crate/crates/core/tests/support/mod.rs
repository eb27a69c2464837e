//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's linear-algebra routines.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn scenario_path(n: u32) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("scenarios/scenario{n}.json"))
}

pub fn sample_csv() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sample_trajectories.csv")
}

fn sample_next(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

/// Mean number of steps to first reach `to` from `from`, averaged over
/// `replicas` independent walks, each with its own seed.
pub fn monte_carlo_passage(rows: &[Vec<f64>], from: usize, to: usize, replicas: u64, seed: u64) -> f64 {
    let mut total = 0u64;
    for r in 0..replicas {
        let mut rng = StdRng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ r);
        let mut state = from;
        let mut steps = 0u64;
        loop {
            state = sample_next(&rows[state], rng.gen::<f64>());
            steps += 1;
            if state == to {
                break;
            }
        }
        total += steps;
    }
    total as f64 / replicas as f64
}

/// Plain nested-loop product.
pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// `P^steps` by repeated squaring-free multiplication.
pub fn power_iterate(p: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut acc: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..steps {
        acc = mat_mul(&acc, p);
    }
    acc
}

/// Counts of consecutive pairs, by direct enumeration of index pairs.
pub fn brute_force_counts(states: &[usize], n: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..states.len().saturating_sub(1) {
                if states[k] == i && states[k + 1] == j {
                    counts[i][j] += 1;
                }
            }
        }
    }
    counts
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_positive_stochastic(n: usize, rng: &mut StdRng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn max_abs(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
