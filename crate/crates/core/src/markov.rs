//! Finite discrete-time Markov chain mathematics.
//!
//! Row-stochastic matrices, integer and real matrix powers, the stationary
//! distribution and limiting matrix of a regular chain, the fundamental
//! matrix `Z = (I − P + W)⁻¹` and mean first passage times derived from it.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::config::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("matrix has no rows")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("row {row} sums to {sum}, not 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },
    #[error("negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("probability vector is invalid: {0}")]
    InvalidVector(String),
    #[error("chain is not regular")]
    NotRegular,
    #[error("linear system is singular")]
    SingularSystem,
    #[error("eigendecomposition is ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("stationary probability of state {state} is zero")]
    ZeroStationaryEntry { state: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, MarkovError>;

/// An n×n row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    /// Validates `raw` against the default row-sum tolerance.
    pub fn new(raw: DMatrix<f64>) -> Result<Self> {
        validate_stochastic(&raw, Tolerances::default().row_sum)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Every row uniform over all `n` states.
    pub fn uniform(n: usize) -> Self {
        Self(DMatrix::from_element(n, n, 1.0 / n as f64))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.0.row(row).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Wraps a product of stochastic matrices without re-validating it.
    fn from_product(m: DMatrix<f64>) -> Self {
        Self(m)
    }
}

impl Serialize for StochasticMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        StochasticMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let tol = Tolerances::default().row_sum;
        if entries.is_empty() {
            return Err(MarkovError::InvalidVector("empty".into()));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0 || **x > 1.0 + tol) {
            return Err(MarkovError::InvalidVector(format!("entry {bad} outside [0, 1]")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(MarkovError::InvalidVector(format!("entries sum to {sum}")));
        }
        Ok(Self(entries.into_iter().map(|x| x / sum).collect()))
    }

    /// Certainty on `state`.
    pub fn unit(n: usize, state: usize) -> Self {
        let mut v = vec![0.0; n];
        v[state] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Mean first passage times in chain steps; zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageMatrix(DMatrix<f64>);

impl PassageMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Every entry multiplied by `seconds_per_step`.
    pub fn to_seconds(&self, seconds_per_step: f64) -> DMatrix<f64> {
        &self.0 * seconds_per_step
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(MarkovError::Empty);
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(MarkovError::NotSquare { rows: n, cols: bad.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Checks `raw` for squareness, nonnegativity and unit row sums, then
/// renormalizes each row so it sums to exactly one.
pub fn validate_stochastic(raw: &DMatrix<f64>, tolerance: f64) -> Result<StochasticMatrix> {
    let (rows, cols) = raw.shape();
    if rows == 0 {
        return Err(MarkovError::Empty);
    }
    if rows != cols {
        return Err(MarkovError::NotSquare { rows, cols });
    }
    let mut out = raw.clone();
    for i in 0..rows {
        for j in 0..cols {
            let x = raw[(i, j)];
            if !x.is_finite() {
                return Err(MarkovError::NonFinite { row: i, col: j });
            }
            if x < 0.0 {
                return Err(MarkovError::NegativeEntry { row: i, col: j });
            }
        }
        let sum: f64 = raw.row(i).sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(MarkovError::RowSumOutOfTolerance { row: i, sum });
        }
        out.row_mut(i).scale_mut(1.0 / sum);
    }
    Ok(StochasticMatrix(out))
}

/// Smallest `k ≤ max_power` for which `P^k` is entrywise positive.
///
/// Works on the zero pattern only, so the answer is exact regardless of
/// how small the positive entries are.
pub fn regularity_index(p: &StochasticMatrix, max_power: usize) -> Option<usize> {
    let n = p.n();
    let base: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| p.get(i, j) > 0.0).collect()).collect();
    let mut current = base.clone();
    for k in 1..=max_power {
        if current.iter().all(|row| row.iter().all(|&x| x)) {
            return Some(k);
        }
        current = (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|l| current[i][l] && base[l][j])).collect())
            .collect();
    }
    None
}

pub fn is_regular(p: &StochasticMatrix, max_power: usize) -> bool {
    regularity_index(p, max_power).is_some()
}

/// Regularity with the default cap of `n²` powers.
pub fn is_regular_default(p: &StochasticMatrix) -> bool {
    is_regular(p, p.n() * p.n())
}

/// `P^k` by repeated multiplication.
pub fn matrix_power(p: &StochasticMatrix, k: u32) -> StochasticMatrix {
    let mut acc = DMatrix::identity(p.n(), p.n());
    for _ in 0..k {
        acc = &acc * p.as_matrix();
    }
    StochasticMatrix::from_product(acc)
}

/// Result of a real-exponent power, which may have fallen back to an
/// integer power.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPower {
    pub matrix: StochasticMatrix,
    /// True when the eigendecomposition failed and `P^round(t)` was used.
    pub approximate: bool,
}

/// `P^t` for real `t ≥ 0` through the principal powers of the eigenvalues.
///
/// Integral exponents are routed to [`matrix_power`]. Rounding noise is
/// clipped to `[0, 1]` and rows renormalized; a principal power with
/// genuinely negative entries is not a transition matrix and is rejected.
pub fn matrix_power_real(p: &StochasticMatrix, t: f64, tol: &Tolerances) -> Result<StochasticMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MarkovError::IllConditioned(format!("exponent {t} is not a nonnegative real")));
    }
    let rounded = t.round();
    if (t - rounded).abs() <= tol.integral_exponent {
        return Ok(matrix_power(p, rounded as u32));
    }
    eigen_power(p, t, tol)
}

/// [`matrix_power_real`] with the integer fallback applied on failure.
pub fn fractional_power(p: &StochasticMatrix, t: f64, tol: &Tolerances) -> RealPower {
    match matrix_power_real(p, t, tol) {
        Ok(matrix) => RealPower { matrix, approximate: false },
        Err(err) => {
            tracing::debug!(%err, t, "falling back to integer matrix power");
            let k = round_half_up(t.max(0.0));
            RealPower {
                matrix: matrix_power(p, k),
                approximate: true,
            }
        }
    }
}

fn round_half_up(t: f64) -> u32 {
    (t + 0.5).floor() as u32
}

fn eigen_power(p: &StochasticMatrix, t: f64, tol: &Tolerances) -> Result<StochasticMatrix> {
    let n = p.n();
    let eigenvalues = p.as_matrix().clone().complex_eigenvalues();
    let pc: DMatrix<Complex<f64>> = p.as_matrix().map(|x| Complex::new(x, 0.0));

    // Group numerically repeated eigenvalues and take as many null vectors of
    // (P − λI) as the group's multiplicity.
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for &lambda in eigenvalues.iter() {
        let scale = lambda.norm().max(1.0);
        match clusters
            .iter_mut()
            .find(|(c, _)| (*c - lambda).norm() <= tol.eigenvalue_cluster * scale)
        {
            Some((c, m)) => {
                *c = (*c * (*m as f64) + lambda) / ((*m + 1) as f64);
                *m += 1;
            }
            None => clusters.push((lambda, 1)),
        }
    }

    let mut vectors: Vec<DVector<Complex<f64>>> = Vec::with_capacity(n);
    let mut values: Vec<Complex<f64>> = Vec::with_capacity(n);
    for &(lambda, multiplicity) in &clusters {
        let shifted = &pc - DMatrix::from_diagonal_element(n, n, lambda);
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| MarkovError::IllConditioned("SVD produced no right singular vectors".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        for &idx in order.iter().take(multiplicity) {
            let v: DVector<Complex<f64>> = v_t.row(idx).adjoint();
            vectors.push(v);
            values.push(lambda);
        }
    }

    let basis = DMatrix::from_columns(&vectors);
    let basis_svd = basis.clone().svd(false, false);
    let smax = basis_svd.singular_values.max();
    let smin = basis_svd.singular_values.min();
    if !(smin > 0.0) || smax / smin > tol.max_condition {
        return Err(MarkovError::IllConditioned(format!(
            "eigenvector matrix condition {}",
            smax / smin
        )));
    }
    let inverse = basis
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| MarkovError::IllConditioned("eigenvector matrix is singular".into()))?;

    let rebuilt = &basis * DMatrix::from_diagonal(&DVector::from_vec(values.clone())) * &inverse;
    let residual = (&rebuilt - &pc).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > tol.reconstruction {
        return Err(MarkovError::IllConditioned(format!("reconstruction residual {residual:e}")));
    }

    let powered: Vec<Complex<f64>> = values.iter().map(|&l| principal_power(l, t)).collect();
    let result = &basis * DMatrix::from_diagonal(&DVector::from_vec(powered)) * &inverse;
    let max_imag = result.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag > tol.imaginary_residue {
        return Err(MarkovError::IllConditioned(format!("imaginary residue {max_imag:e}")));
    }

    let min_entry = result.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_entry < -tol.negative_entry {
        return Err(MarkovError::IllConditioned(format!(
            "principal power has negative entry {min_entry:e}"
        )));
    }
    let mut real = result.map(|z| z.re.clamp(0.0, 1.0));
    for i in 0..n {
        let sum = real.row(i).sum();
        if !(sum > 0.0) {
            return Err(MarkovError::IllConditioned(format!("row {i} vanished after clipping")));
        }
        real.row_mut(i).scale_mut(1.0 / sum);
    }
    Ok(StochasticMatrix::from_product(real))
}

fn principal_power(lambda: Complex<f64>, t: f64) -> Complex<f64> {
    if lambda.norm() < f64::EPSILON {
        Complex::new(0.0, 0.0)
    } else {
        (lambda.ln() * t).exp()
    }
}

/// Solves `wP = w`, `Σw = 1` directly: the last equation of `(Pᵀ − I)wᵀ = 0`
/// is replaced by the normalization row.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<ProbabilityVector> {
    if !is_regular_default(p) {
        return Err(MarkovError::NotRegular);
    }
    let n = p.n();
    let mut system = p.as_matrix().transpose() - DMatrix::<f64>::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let w = system.lu().solve(&rhs).ok_or(MarkovError::SingularSystem)?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(MarkovError::SingularSystem);
    }
    let clipped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    ProbabilityVector::new(clipped.into_iter().map(|x| x / sum).collect())
}

/// `W`: every row equal to the stationary distribution.
pub fn limiting_matrix(p: &StochasticMatrix) -> Result<DMatrix<f64>> {
    let w = stationary_distribution(p)?;
    Ok(limiting_from(&w))
}

pub fn limiting_from(w: &ProbabilityVector) -> DMatrix<f64> {
    let n = w.len();
    DMatrix::from_fn(n, n, |_, j| w[j])
}

/// `Z = (I − P + W)⁻¹`.
pub fn fundamental_matrix(p: &StochasticMatrix, limiting: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.n();
    if limiting.shape() != (n, n) {
        return Err(MarkovError::DimensionMismatch {
            expected: n,
            found: limiting.nrows(),
        });
    }
    let system = DMatrix::<f64>::identity(n, n) - p.as_matrix() + limiting;
    system.lu().try_inverse().ok_or(MarkovError::SingularSystem)
}

/// `m_ij = (Z_jj − Z_ij) / w_j`, with the diagonal forced to exactly zero.
pub fn mean_first_passage(fundamental: &DMatrix<f64>, w: &ProbabilityVector) -> Result<PassageMatrix> {
    let n = w.len();
    if fundamental.shape() != (n, n) {
        return Err(MarkovError::DimensionMismatch {
            expected: n,
            found: fundamental.nrows(),
        });
    }
    if let Some(state) = (0..n).find(|&j| w[j] <= 0.0) {
        return Err(MarkovError::ZeroStationaryEntry { state });
    }
    Ok(PassageMatrix(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (fundamental[(j, j)] - fundamental[(i, j)]) / w[j]
        }
    })))
}

/// Stationary vector, limiting, fundamental and passage matrices of one chain.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub stationary: ProbabilityVector,
    pub limiting: DMatrix<f64>,
    pub fundamental: DMatrix<f64>,
    pub passage: PassageMatrix,
}

impl ChainAnalysis {
    pub fn of(p: &StochasticMatrix) -> Result<Self> {
        let stationary = stationary_distribution(p)?;
        let limiting = limiting_from(&stationary);
        let fundamental = fundamental_matrix(p, &limiting)?;
        let passage = mean_first_passage(&fundamental, &stationary)?;
        Ok(Self {
            stationary,
            limiting,
            fundamental,
            passage,
        })
    }
}

/// `π₀ · P^t`, reporting whether the integer fallback was needed.
pub fn propagate_flagged(
    pi0: &ProbabilityVector,
    p: &StochasticMatrix,
    t: f64,
    tol: &Tolerances,
) -> Result<(ProbabilityVector, bool)> {
    if pi0.len() != p.n() {
        return Err(MarkovError::DimensionMismatch {
            expected: p.n(),
            found: pi0.len(),
        });
    }
    let power = fractional_power(p, t, tol);
    let row = DVector::from_column_slice(pi0.as_slice()).transpose() * power.matrix.as_matrix();
    let mut entries: Vec<f64> = row.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let sum: f64 = entries.iter().sum();
    entries.iter_mut().for_each(|x| *x /= sum);
    Ok((ProbabilityVector(entries), power.approximate))
}

pub fn propagate(pi0: &ProbabilityVector, p: &StochasticMatrix, t: f64) -> Result<ProbabilityVector> {
    propagate_flagged(pi0, p, t, &Tolerances::default()).map(|(v, _)| v)
}

/// `‖A − B‖∞` as the largest absolute entry difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> StochasticMatrix {
        StochasticMatrix::from_rows(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    #[test]
    fn validate_accepts_identity_and_exact_rows() {
        let id = validate_stochastic(&DMatrix::identity(2, 2), 1e-9).unwrap();
        assert_eq!(id, StochasticMatrix::identity(2));
        assert!(StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.3, 0.7]]).is_ok());
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let err = StochasticMatrix::from_rows(&[vec![0.5, 0.6], vec![0.3, 0.7]]).unwrap_err();
        match err {
            MarkovError::RowSumOutOfTolerance { row, sum } => {
                assert_eq!(row, 0);
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            StochasticMatrix::from_rows(&[vec![1.5, -0.5], vec![0.3, 0.7]]).unwrap_err(),
            MarkovError::NegativeEntry { row: 0, col: 1 }
        );
        assert_eq!(
            validate_stochastic(&DMatrix::from_element(2, 3, 0.5), 1e-9).unwrap_err(),
            MarkovError::NotSquare { rows: 2, cols: 3 }
        );
    }

    #[test]
    fn validate_renormalizes_within_tolerance() {
        let m = StochasticMatrix::from_rows(&[vec![0.5, 0.5 + 5e-10], vec![0.3, 0.7]]).unwrap();
        assert!((m.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regularity_examples() {
        let swap = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(!is_regular(&swap, 16));
        let half = StochasticMatrix::uniform(2);
        assert_eq!(regularity_index(&half, 4), Some(1));
        let p = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(regularity_index(&p, 4), Some(2));
        assert!(!is_regular_default(&StochasticMatrix::identity(3)));
    }

    #[test]
    fn integer_powers() {
        let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert_eq!(matrix_power(&p, 0), StochasticMatrix::identity(2));
        assert_eq!(matrix_power(&p, 1).as_matrix(), p.as_matrix());
        let sq = matrix_power(&p, 2);
        let expected = DMatrix::from_row_slice(2, 2, &[0.83, 0.17, 0.34, 0.66]);
        assert!(max_abs_diff(sq.as_matrix(), &expected) < 1e-15);
    }

    #[test]
    fn real_power_square_root() {
        let tol = Tolerances::default();
        let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let root = matrix_power_real(&p, 0.5, &tol).unwrap();
        assert!(root.as_matrix().iter().all(|&x| x > 0.0));
        let back = root.as_matrix() * root.as_matrix();
        assert!(max_abs_diff(&back, p.as_matrix()) < 1e-8);
        assert_eq!(matrix_power_real(&p, 1.0, &tol).unwrap(), p);
        assert_eq!(matrix_power_real(&p, 2.0, &tol).unwrap(), matrix_power(&p, 2));
    }

    #[test]
    fn real_power_handles_repeated_eigenvalues() {
        let tol = Tolerances::default();
        let id = StochasticMatrix::identity(4);
        let r = matrix_power_real(&id, 1.7, &tol).unwrap();
        assert!(max_abs_diff(r.as_matrix(), id.as_matrix()) < 1e-12);
    }

    #[test]
    fn real_power_falls_back_on_periodic_chain() {
        let tol = Tolerances::default();
        let swap = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            matrix_power_real(&swap, 0.5, &tol),
            Err(MarkovError::IllConditioned(_))
        ));
        let fallback = fractional_power(&swap, 1.5, &tol);
        assert!(fallback.approximate);
        assert_eq!(fallback.matrix, StochasticMatrix::identity(2));
        let rounded_down = fractional_power(&swap, 1.4, &tol);
        assert_eq!(rounded_down.matrix, swap);
    }

    #[test]
    fn stationary_examples() {
        let w = stationary_distribution(&StochasticMatrix::uniform(2)).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        let w = stationary_distribution(&two_state(0.3, 0.2)).unwrap();
        assert!((w[0] - 0.4).abs() < 1e-12 && (w[1] - 0.6).abs() < 1e-12);
        let doubly = StochasticMatrix::from_rows(&[
            vec![0.2, 0.3, 0.5],
            vec![0.5, 0.2, 0.3],
            vec![0.3, 0.5, 0.2],
        ])
        .unwrap();
        let w = stationary_distribution(&doubly).unwrap();
        assert!(w.as_slice().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
        assert_eq!(
            stationary_distribution(&StochasticMatrix::identity(2)).unwrap_err(),
            MarkovError::NotRegular
        );
    }

    #[test]
    fn limiting_and_fundamental() {
        let half = StochasticMatrix::uniform(2);
        let w = limiting_matrix(&half).unwrap();
        assert!(max_abs_diff(&w, half.as_matrix()) < 1e-15);
        let z = fundamental_matrix(&half, &w).unwrap();
        assert!(max_abs_diff(&z, &DMatrix::identity(2, 2)) < 1e-15);

        let p = two_state(0.3, 0.2);
        let w = limiting_matrix(&p).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.4, 0.6, 0.4, 0.6]);
        assert!(max_abs_diff(&w, &expected) < 1e-12);
        let z = fundamental_matrix(&p, &w).unwrap();
        let back = &z * (DMatrix::identity(2, 2) - p.as_matrix() + &w);
        assert!(max_abs_diff(&back, &DMatrix::identity(2, 2)) < 1e-10);
        for i in 0..2 {
            assert!((z.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_state_passage_times() {
        let analysis = ChainAnalysis::of(&two_state(0.3, 0.2)).unwrap();
        let m = &analysis.passage;
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!((m.get(0, 1) - 10.0 / 3.0).abs() < 1e-9);
        assert!((m.get(1, 0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn passage_rejects_zero_stationary_entry() {
        let z = DMatrix::identity(2, 2);
        let w = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(
            mean_first_passage(&z, &w).unwrap_err(),
            MarkovError::ZeroStationaryEntry { state: 1 }
        );
    }

    #[test]
    fn propagation_examples() {
        let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let pi0 = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(propagate(&pi0, &p, 0.0).unwrap(), pi0);
        let one = propagate(&ProbabilityVector::unit(2, 0), &p, 1.0).unwrap();
        assert!((one[0] - 0.9).abs() < 1e-15 && (one[1] - 0.1).abs() < 1e-15);
        let w = stationary_distribution(&p).unwrap();
        for t in [1.0, 2.5, 7.0] {
            let moved = propagate(&w, &p, t).unwrap();
            assert!((moved[0] - w[0]).abs() < 1e-10);
        }
        assert_eq!(
            propagate(&ProbabilityVector::unit(3, 0), &p, 1.0).unwrap_err(),
            MarkovError::DimensionMismatch { expected: 2, found: 3 }
        );
    }
}
