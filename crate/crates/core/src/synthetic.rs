//! Synthetic chains for the bundled scenarios.
//!
//! Each row keeps most of its mass on the diagonal and leaks the rest to
//! the adjacent lanes (or speed bins). Edge rows leak only to their single
//! neighbour. Such chains are irreducible and aperiodic, hence regular.
//!
//! Purely local symmetric leakage mixes slowly (second eigenvalue near 1),
//! so the bundled scenarios use [`home_drift_chain`]: rows off a home state
//! leak mostly toward it, which leaves a single sticky state and fast
//! convergence to the limiting matrix.

use crate::markov::{MarkovError, StochasticMatrix};

/// Row `i` has `stay[i]` on the diagonal; the remaining `1 − stay[i]` goes
/// to `i − 1` with share `down_share[i]` and to `i + 1` with the rest.
pub fn adjacent_leak_chain(stay: &[f64], down_share: &[f64]) -> Result<StochasticMatrix, MarkovError> {
    let n = stay.len();
    if n == 0 {
        return Err(MarkovError::Empty);
    }
    if down_share.len() != n {
        return Err(MarkovError::DimensionMismatch {
            expected: n,
            found: down_share.len(),
        });
    }
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        rows[i][i] = stay[i];
        let rest = 1.0 - stay[i];
        if n == 1 {
            continue;
        }
        if i == 0 {
            rows[i][1] += rest;
        } else if i == n - 1 {
            rows[i][n - 2] += rest;
        } else {
            rows[i][i - 1] += rest * down_share[i];
            rows[i][i + 1] += rest * (1.0 - down_share[i]);
        }
    }
    StochasticMatrix::from_rows(&rows)
}

/// Rows off `home` send `away_share` of their leak away from it and the
/// rest toward it; the home row sends `home_down_share` of its leak down.
/// A positive `away_share` keeps every state reachable.
pub fn home_drift_chain(
    stay: &[f64],
    home: usize,
    away_share: f64,
    home_down_share: f64,
) -> Result<StochasticMatrix, MarkovError> {
    let down: Vec<f64> = (0..stay.len())
        .map(|i| match i.cmp(&home) {
            std::cmp::Ordering::Less => away_share,
            std::cmp::Ordering::Greater => 1.0 - away_share,
            std::cmp::Ordering::Equal => home_down_share,
        })
        .collect();
    adjacent_leak_chain(stay, &down)
}

/// Same self-loop everywhere, symmetric leakage.
pub fn uniform_leak_chain(n: usize, stay: f64) -> Result<StochasticMatrix, MarkovError> {
    adjacent_leak_chain(&vec![stay; n], &vec![0.5; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::is_regular_default;

    #[test]
    fn rows_are_stochastic_and_regular() {
        let p = adjacent_leak_chain(&[0.9, 0.9, 0.9, 0.9, 0.97, 0.8], &[0.5; 6]).unwrap();
        assert_eq!(p.get(5, 4), 1.0 - 0.8);
        assert!((p.get(4, 3) - 0.015).abs() < 1e-15);
        assert!(is_regular_default(&p));
        assert_eq!(p.get(0, 2), 0.0);
    }

    #[test]
    fn home_drift_points_at_home() {
        let p = home_drift_chain(&[0.3, 0.3, 0.3, 0.3, 0.97, 0.78], 4, 0.1, 0.5).unwrap();
        assert!((p.get(1, 2) - 0.63).abs() < 1e-15);
        assert!((p.get(1, 0) - 0.07).abs() < 1e-15);
        assert!((p.get(5, 4) - 0.22).abs() < 1e-15);
        assert!((p.get(4, 5) - 0.015).abs() < 1e-15);
        assert!(is_regular_default(&p));
    }
}
