//! Lidar range geometry and probable crash time.

use thiserror::Error;

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("time of flight {0} s is not positive")]
    NonPositiveTime(f64),
    #[error("range {hyp} m is shorter than lateral offset {lateral} m")]
    GeometryViolation { hyp: f64, lateral: f64 },
    #[error("closing speed {0} m/s is not positive")]
    NonClosingSpeeds(f64),
}

/// A single Lidar return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarReading {
    /// Round-trip pulse time, s.
    pub ltime: f64,
    /// Lateral distance between the two vehicles' centerlines, m.
    pub lateral_offset: f64,
}

impl LidarReading {
    /// The reading a Lidar would produce for a target `longitudinal` metres
    /// ahead and `lateral_offset` metres to the side.
    pub fn for_geometry(longitudinal: f64, lateral_offset: f64) -> Self {
        Self {
            ltime: 2.0 * longitudinal.hypot(lateral_offset) / SPEED_OF_LIGHT,
            lateral_offset,
        }
    }

    pub fn longitudinal_gap(&self) -> Result<f64, SensingError> {
        longitudinal_distance(hypotenuse_from_tof(self.ltime)?, self.lateral_offset)
    }
}

/// Diagonal range from round-trip time: `ltime · c / 2`.
pub fn hypotenuse_from_tof(ltime: f64) -> Result<f64, SensingError> {
    if !(ltime > 0.0) {
        return Err(SensingError::NonPositiveTime(ltime));
    }
    Ok(ltime * SPEED_OF_LIGHT / 2.0)
}

/// Along-road leg of the range triangle.
pub fn longitudinal_distance(hyp: f64, lateral_offset: f64) -> Result<f64, SensingError> {
    if hyp < lateral_offset || lateral_offset < 0.0 {
        return Err(SensingError::GeometryViolation {
            hyp,
            lateral: lateral_offset,
        });
    }
    Ok((hyp * hyp - lateral_offset * lateral_offset).sqrt())
}

/// `d / (v_trailing − v_leading)`; requires the trailing car to be closing.
pub fn probable_crash_time(gap: f64, v_leading: f64, v_trailing: f64) -> Result<f64, SensingError> {
    let closing = v_trailing - v_leading;
    if !(closing > 0.0) {
        return Err(SensingError::NonClosingSpeeds(closing));
    }
    Ok(gap / closing)
}
