//! Heater sweeps at one mixing-chamber setpoint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("setpoint {setpoint} K: sequence is empty")]
    Empty { setpoint: f64 },
    #[error("setpoint {setpoint} K: first point must have P = 0 (got {power} W)")]
    MissingZeroPowerAnchor { setpoint: f64, power: f64 },
    #[error("setpoint {setpoint} K: power decreases at point {index}")]
    PowerDecreasing { setpoint: f64, index: usize },
    #[error("setpoint {setpoint} K: invalid value at point {index}: {what}")]
    InvalidValue {
        setpoint: f64,
        index: usize,
        what: &'static str,
    },
    #[error("area and thickness must be positive (got A = {area} m², L = {thickness} m)")]
    BadGeometry { area: f64, thickness: f64 },
    #[error("point index {index} out of range for a sequence of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("point {0} is the P = 0 calibration anchor and cannot be excluded")]
    AnchorExcluded(usize),
    #[error("every powered point was excluded")]
    AllPointsExcluded,
}

/// How sensor readings are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadingUnit {
    /// Raw resistances, converted through a calibration.
    Ohm,
    /// Already temperatures.
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPoint {
    /// Heater power, W.
    pub power: f64,
    pub reading_hot: f64,
    pub reading_cold: f64,
    pub reading_mxc: f64,
}

/// One sweep of heater power at a fixed mixing-chamber setpoint, as read
/// from the sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSequence {
    pub setpoint: f64,
    pub points: Vec<MeasurementPoint>,
    /// Sample cross-section, m².
    pub area: f64,
    /// Stack thickness, m.
    pub thickness: f64,
    pub unit: ReadingUnit,
}

impl MeasurementSequence {
    pub fn validate(&self) -> Result<(), SequenceError> {
        let setpoint = self.setpoint;
        if !(self.area > 0.0 && self.thickness > 0.0) {
            return Err(SequenceError::BadGeometry {
                area: self.area,
                thickness: self.thickness,
            });
        }
        let first = self.points.first().ok_or(SequenceError::Empty { setpoint })?;
        if first.power != 0.0 {
            return Err(SequenceError::MissingZeroPowerAnchor {
                setpoint,
                power: first.power,
            });
        }
        for (index, p) in self.points.iter().enumerate() {
            let readings = [p.reading_hot, p.reading_cold, p.reading_mxc];
            if !(p.power.is_finite() && p.power >= 0.0) {
                return Err(SequenceError::InvalidValue {
                    setpoint,
                    index,
                    what: "power",
                });
            }
            if readings.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(SequenceError::InvalidValue {
                    setpoint,
                    index,
                    what: "reading",
                });
            }
            if index > 0 && p.power < self.points[index - 1].power {
                return Err(SequenceError::PowerDecreasing { setpoint, index });
            }
        }
        Ok(())
    }

    /// Indices of the points recorded without heater power.
    pub fn zero_power_indices(&self) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.power == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn powered_count(&self) -> usize {
        self.points.iter().filter(|p| p.power > 0.0).count()
    }
}

/// A point after sensor calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPoint {
    pub power: f64,
    pub t_hot: f64,
    pub t_cold: f64,
    pub t_mxc: f64,
    /// Some reading lay outside its calibration range.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSequence {
    pub setpoint: f64,
    pub points: Vec<CalibratedPoint>,
    pub area: f64,
    pub thickness: f64,
}

impl CalibratedSequence {
    /// Mixing-chamber temperature at zero power, where the heat integral of
    /// this sweep starts.
    pub fn anchor_temperature(&self) -> f64 {
        self.points
            .iter()
            .find(|p| p.power == 0.0)
            .map(|p| p.t_mxc)
            .unwrap_or(self.setpoint)
    }

    /// Heat flux density P/A of each point, W/m².
    pub fn flux(&self, index: usize) -> f64 {
        self.points[index].power / self.area
    }

    /// Removes the points at `indices` (positions in `points`). P = 0 points
    /// may not be removed.
    pub fn without(&self, indices: &[usize]) -> Result<Self, SequenceError> {
        let len = self.points.len();
        for &index in indices {
            if index >= len {
                return Err(SequenceError::IndexOutOfRange { index, len });
            }
            if self.points[index].power == 0.0 {
                return Err(SequenceError::AnchorExcluded(index));
            }
        }
        let points: Vec<_> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| !indices.contains(i))
            .map(|(_, p)| *p)
            .collect();
        if !indices.is_empty() && !points.iter().any(|p| p.power > 0.0) {
            return Err(SequenceError::AllPointsExcluded);
        }
        Ok(CalibratedSequence {
            points,
            ..self.clone()
        })
    }
}
