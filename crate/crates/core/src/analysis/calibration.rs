//! Resistance thermometer calibration: piecewise-linear in (ln R, ln T),
//! built from the zero-power points where every sensor sits at the
//! mixing-chamber temperature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sequence::{
    CalibratedPoint, CalibratedSequence, MeasurementSequence, ReadingUnit, SequenceError,
};
use crate::interp::{PiecewiseLinear, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("need at least {needed} calibration points, got {got}")]
    InsufficientAnchors { needed: usize, got: usize },
    #[error("calibration points are not monotone: R must fall as T rises (near T = {t} K)")]
    NonMonotoneAnchors { t: f64 },
    #[error("calibration point {0} is not a positive finite (R, T) pair")]
    InvalidKnot(usize),
    #[error("leave-one-out check needs at least 4 knots, got {0}")]
    TooFewKnots(usize),
    #[error("resistance readings need a reference calibration for the mixing-chamber sensor")]
    MissingReference,
    #[error("sequences mix readings in ohm and in kelvin")]
    MixedUnits,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// Temperature of a resistance reading and whether it lay outside the knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub temperature: f64,
    pub extrapolated: bool,
}

/// Monotone R → T map for a negative-temperature-coefficient sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct SensorCalibration {
    /// (R in Ω, T in K), T increasing and R decreasing.
    knots: Vec<(f64, f64)>,
    #[serde(skip)]
    map: Option<PiecewiseLinear>,
}

impl TryFrom<Vec<(f64, f64)>> for SensorCalibration {
    type Error = CalibrationError;
    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        SensorCalibration::new(knots)
    }
}

impl From<SensorCalibration> for Vec<(f64, f64)> {
    fn from(c: SensorCalibration) -> Self {
        c.knots
    }
}

impl SensorCalibration {
    /// `knots` are (R in Ω, T in K) in any order.
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self, CalibrationError> {
        if knots.len() < 2 {
            return Err(CalibrationError::InsufficientAnchors {
                needed: 2,
                got: knots.len(),
            });
        }
        for (i, &(r, t)) in knots.iter().enumerate() {
            if !(r.is_finite() && r > 0.0 && t.is_finite() && t > 0.0) {
                return Err(CalibrationError::InvalidKnot(i));
            }
        }
        knots.sort_by(|a, b| a.1.total_cmp(&b.1));
        for w in knots.windows(2) {
            if w[1].1 <= w[0].1 || w[1].0 >= w[0].0 {
                return Err(CalibrationError::NonMonotoneAnchors { t: w[1].1 });
            }
        }
        // ascending ln R means descending T
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            knots.iter().rev().map(|&(r, t)| (r.ln(), t.ln())).unzip();
        let map = PiecewiseLinear::new(xs, ys).map_err(|_| CalibrationError::NonMonotoneAnchors {
            t: knots[0].1,
        })?;
        Ok(SensorCalibration {
            knots,
            map: Some(map),
        })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Temperature for resistance `r`. Outside the knots the end segment is
    /// continued in log-log space.
    pub fn reading(&self, r: f64) -> Reading {
        let map = self.map.as_ref().expect("built by new()");
        let (lt, side) = map.eval_with_side(r.ln());
        Reading {
            temperature: lt.exp(),
            extrapolated: side != Side::Inside,
        }
    }

    pub fn temperature(&self, r: f64) -> f64 {
        self.reading(r).temperature
    }
}

/// Leave-one-out check: each interior knot is dropped, the calibration is
/// rebuilt, and (T_interp − T_true)/T_true at the dropped resistance is
/// reported with the knot index (in order of increasing T).
pub fn loocv_check(cal: &SensorCalibration) -> Result<Vec<(usize, f64)>, CalibrationError> {
    let n = cal.knots.len();
    if n < 4 {
        return Err(CalibrationError::TooFewKnots(n));
    }
    (1..n - 1)
        .map(|i| {
            let rest: Vec<_> = cal
                .knots
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, k)| *k)
                .collect();
            let (r, t) = cal.knots[i];
            let t_interp = SensorCalibration::new(rest)?.temperature(r);
            Ok((i, (t_interp - t) / t))
        })
        .collect()
}

/// Calibrations derived for the hot- and cold-side sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSet {
    pub hot: SensorCalibration,
    pub cold: SensorCalibration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub sequences: Vec<CalibratedSequence>,
    /// `None` when the readings were already temperatures.
    pub sensors: Option<SensorSet>,
}

/// Converts all readings to temperatures.
///
/// Resistance readings need `reference`, the calibration of the
/// mixing-chamber sensor. Every zero-power point of every sequence then gives
/// one anchor (R_sensor, T_MXC) for the hot and cold sensors; anchors at the
/// same temperature are merged by their geometric-mean resistance.
pub fn calibrate_sequences(
    seqs: &[MeasurementSequence],
    reference: Option<&SensorCalibration>,
) -> Result<CalibrationOutcome, CalibrationError> {
    for s in seqs {
        s.validate()?;
    }
    let unit = match seqs.first() {
        Some(s) => s.unit,
        None => {
            return Err(CalibrationError::InsufficientAnchors { needed: 2, got: 0 });
        }
    };
    if seqs.iter().any(|s| s.unit != unit) {
        return Err(CalibrationError::MixedUnits);
    }
    if unit == ReadingUnit::K {
        let sequences = seqs
            .iter()
            .map(|s| CalibratedSequence {
                setpoint: s.setpoint,
                area: s.area,
                thickness: s.thickness,
                points: s
                    .points
                    .iter()
                    .map(|p| CalibratedPoint {
                        power: p.power,
                        t_hot: p.reading_hot,
                        t_cold: p.reading_cold,
                        t_mxc: p.reading_mxc,
                        extrapolated: false,
                    })
                    .collect(),
            })
            .collect();
        return Ok(CalibrationOutcome {
            sequences,
            sensors: None,
        });
    }

    let reference = reference.ok_or(CalibrationError::MissingReference)?;
    let mut hot = Vec::new();
    let mut cold = Vec::new();
    for s in seqs {
        for i in s.zero_power_indices() {
            let p = &s.points[i];
            let t = reference.temperature(p.reading_mxc);
            hot.push((p.reading_hot, t));
            cold.push((p.reading_cold, t));
        }
    }
    let sensors = SensorSet {
        hot: SensorCalibration::new(merge_anchors(hot))?,
        cold: SensorCalibration::new(merge_anchors(cold))?,
    };
    let sequences = seqs
        .iter()
        .map(|s| CalibratedSequence {
            setpoint: s.setpoint,
            area: s.area,
            thickness: s.thickness,
            points: s
                .points
                .iter()
                .map(|p| {
                    let h = sensors.hot.reading(p.reading_hot);
                    let c = sensors.cold.reading(p.reading_cold);
                    let m = reference.reading(p.reading_mxc);
                    CalibratedPoint {
                        power: p.power,
                        t_hot: h.temperature,
                        t_cold: c.temperature,
                        t_mxc: m.temperature,
                        extrapolated: h.extrapolated || c.extrapolated || m.extrapolated,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(CalibrationOutcome {
        sequences,
        sensors: Some(sensors),
    })
}

fn merge_anchors(mut anchors: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    anchors.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for (r, t) in anchors {
        match out.last_mut() {
            Some((lr, lt, n)) if (t - *lt).abs() <= 1e-9 * t => {
                *lr += r.ln();
                *n += 1;
            }
            _ => out.push((r.ln(), t, 1)),
        }
    }
    out.into_iter()
        .map(|(lr, t, n)| ((lr / n as f64).exp(), t))
        .collect()
}
