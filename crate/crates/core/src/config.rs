//! Shared numeric tolerances and decision thresholds.

use serde::{Deserialize, Serialize};

/// Numeric tolerances used across the Markov routines and their tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum deviation of a row (or vector) sum from 1.
    pub row_sum: f64,
    /// Distance from an integer below which a real exponent is treated as integral.
    pub integral_exponent: f64,
    /// Largest imaginary residue accepted when reconstructing a real matrix power.
    pub imaginary_residue: f64,
    /// Largest reconstruction error `|V·Λ·V⁻¹ − P|∞` accepted for an eigendecomposition.
    pub reconstruction: f64,
    /// Most negative entry of a real matrix power still treated as rounding noise.
    pub negative_entry: f64,
    /// Largest accepted condition number of the eigenvector matrix.
    pub max_condition: f64,
    /// Relative distance under which two eigenvalues are grouped as one.
    pub eigenvalue_cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            row_sum: 1e-9,
            integral_exponent: 1e-9,
            imaginary_residue: 1e-8,
            reconstruction: 1e-9,
            negative_entry: 1e-9,
            max_condition: 1e12,
            eigenvalue_cluster: 1e-7,
        }
    }
}

/// Probability thresholds for the crash decision flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// A car whose probability of leaving its speed bin is at or above this is unstable.
    pub speed_stability: f64,
    /// Lanes whose joint crash probability reaches this get a safety action.
    pub crash: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            speed_stability: 0.5,
            crash: 0.3,
        }
    }
}

impl Thresholds {
    /// Both thresholds must lie strictly inside (0, 1).
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [("speed_stability", self.speed_stability), ("crash", self.crash)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(format!("{name} threshold {value} is outside (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Default sampling interval of trajectory data, seconds per chain step.
pub const DEFAULT_FRAME_INTERVAL_S: f64 = 0.1;
