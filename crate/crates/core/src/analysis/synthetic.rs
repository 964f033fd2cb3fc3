//! Forward model for synthetic heater sweeps with a known heat integral.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::calibration::SensorCalibration;
use super::sequence::{MeasurementPoint, MeasurementSequence, ReadingUnit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntheticError {
    #[error("invalid truth model: {0}")]
    BadTruth(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Ground-truth heat integral I(T)/L in W/m², zero at T = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthModel {
    /// scale · (T / 1 K)^exponent
    PowerLaw { scale: f64, exponent: f64 },
    /// Conductivity λ = dI/dT is a continuous piecewise power law, so on
    /// regime k the integral reads I = a_k + c_k·T^{exponents[k]}.
    /// Regimes are separated by `breaks` (K); `scale` is I at 1 K.
    Piecewise {
        scale: f64,
        breaks: Vec<f64>,
        exponents: Vec<f64>,
    },
}

impl TruthModel {
    pub fn quartic() -> Self {
        TruthModel::PowerLaw {
            scale: 10.0,
            exponent: 4.0,
        }
    }

    /// Three regimes with local log-log slopes 2, 3.5 and 4.5, splitting
    /// 0.35–1.8 K into roughly equal thirds of ln T.
    pub fn three_regime() -> Self {
        TruthModel::Piecewise {
            scale: 10.0,
            breaks: vec![0.6, 1.1],
            exponents: vec![2.0, 3.5, 4.5],
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        match self {
            TruthModel::PowerLaw { scale, exponent } => {
                if !(*scale > 0.0 && *exponent > 0.0) {
                    return Err(SyntheticError::BadTruth("scale and exponent must be positive".into()));
                }
            }
            TruthModel::Piecewise {
                scale,
                breaks,
                exponents,
            } => {
                if !(*scale > 0.0) || exponents.iter().any(|e| !(*e > 0.0)) {
                    return Err(SyntheticError::BadTruth("scale and exponents must be positive".into()));
                }
                if exponents.len() != breaks.len() + 1 {
                    return Err(SyntheticError::BadTruth("need one more exponent than breaks".into()));
                }
                if breaks.iter().any(|b| !(*b > 0.0)) || breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(SyntheticError::BadTruth("breaks must be positive and increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// (start temperature, a_k, c_k, exponent) of every regime.
    fn regimes(&self) -> Vec<(f64, f64, f64, f64)> {
        match self {
            TruthModel::PowerLaw { scale, exponent } => vec![(0.0, 0.0, *scale, *exponent)],
            TruthModel::Piecewise {
                scale,
                breaks,
                exponents,
            } => {
                let mut out = vec![(0.0, 0.0, 1.0, exponents[0])];
                for (k, &b) in breaks.iter().enumerate() {
                    let (_, a, c, e) = out[k];
                    let value = a + c * b.powf(e);
                    let slope = c * e * b.powf(e - 1.0);
                    let e_next = exponents[k + 1];
                    let c_next = slope / (e_next * b.powf(e_next - 1.0));
                    out.push((b, value - c_next * b.powf(e_next), c_next, e_next));
                }
                let k = out[1..].partition_point(|n| n.0 <= 1.0);
                let norm = scale / (out[k].1 + out[k].2);
                for r in &mut out {
                    r.1 *= norm;
                    r.2 *= norm;
                }
                out
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let r = self.regimes();
        let (_, a, c, e) = r[r[1..].partition_point(|n| n.0 <= t)];
        a + c * t.powf(e)
    }

    /// dI/dT.
    pub fn derivative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let r = self.regimes();
        let (_, _, c, e) = r[r[1..].partition_point(|n| n.0 <= t)];
        c * e * t.powf(e - 1.0)
    }

    /// Temperature at which I/L reaches `value`.
    pub fn inverse(&self, value: f64) -> f64 {
        if value <= 0.0 {
            return 0.0;
        }
        let r = self.regimes();
        let k = r[1..].partition_point(|n| n.1 + n.2 * n.0.powf(n.3) <= value);
        let (_, a, c, e) = r[k];
        ((value - a) / c).powf(1.0 / e)
    }
}

/// Heat leak from the cold side to the mixing chamber:
/// P = coefficient · (T_L^exponent − T_MXC^exponent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceModel {
    pub coefficient: f64,
    pub exponent: f64,
}

impl InterfaceModel {
    pub fn cold_temperature(&self, power: f64, t_mxc: f64) -> f64 {
        (power / self.coefficient + t_mxc.powf(self.exponent)).powf(1.0 / self.exponent)
    }
}

impl Default for InterfaceModel {
    /// Cold side near 0.7 K at 1 mW from a 0.1 K bath.
    fn default() -> Self {
        InterfaceModel {
            coefficient: 3e-3,
            exponent: 3.0,
        }
    }
}

/// Thermometer R = scale · T^exponent (exponent < 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub scale: f64,
    pub exponent: f64,
}

impl SensorModel {
    pub fn resistance(&self, t: f64) -> f64 {
        self.scale * t.powf(self.exponent)
    }

    pub fn temperature(&self, r: f64) -> f64 {
        (r / self.scale).powf(1.0 / self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub truth: TruthModel,
    pub interface: InterfaceModel,
    pub area: f64,
    pub thickness: f64,
    /// Setpoints with a full heater sweep.
    pub setpoints: Vec<f64>,
    /// Extra zero-power stops used only for calibration.
    pub calibration_setpoints: Vec<f64>,
    /// Powered points, W (a P = 0 point is always prepended).
    pub powers: Vec<f64>,
    pub sensor_hot: SensorModel,
    pub sensor_cold: SensorModel,
    pub sensor_mxc: SensorModel,
    /// Relative Gaussian noise on every resistance reading.
    pub reading_noise: f64,
    pub seed: u64,
    /// Sensor faults written into the readings (the truth is unaffected).
    pub outliers: Vec<OutlierInjection>,
}

/// The hot sensor of the last `count` points of one sweep reads
/// `(1 − hot_shift)·T_H`, as with a loosening thermal contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierInjection {
    pub setpoint: f64,
    pub count: usize,
    pub hot_shift: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            truth: TruthModel::quartic(),
            interface: InterfaceModel::default(),
            area: 3.5e-3 * 3.5e-3,
            thickness: 600e-9,
            setpoints: (1..=7).map(|k| k as f64 / 10.0).collect(),
            calibration_setpoints: vec![0.8, 0.9, 1.3, 1.7, 2.2],
            powers: log_spaced(1e-5, 1e-3, 13),
            sensor_hot: SensorModel {
                scale: 1000.0,
                exponent: -1.2,
            },
            sensor_cold: SensorModel {
                scale: 800.0,
                exponent: -1.4,
            },
            sensor_mxc: SensorModel {
                scale: 2000.0,
                exponent: -1.0,
            },
            reading_noise: 0.0,
            seed: 0,
            outliers: Vec::new(),
        }
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// True temperatures of one powered point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruePoint {
    pub power: f64,
    pub t_hot: f64,
    pub t_cold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Full sweeps first, then the calibration-only stops.
    pub sequences: Vec<MeasurementSequence>,
    /// Noise-free calibration of the mixing-chamber sensor.
    pub reference: SensorCalibration,
    /// True temperatures of each full sweep, in setpoint order.
    pub truth: Vec<(f64, Vec<TruePoint>)>,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        self.truth.validate()?;
        let bad = |m: &str| Err(SyntheticError::BadConfig(m.into()));
        if !(self.area > 0.0 && self.thickness > 0.0) {
            return bad("area and thickness must be positive");
        }
        if self.setpoints.is_empty() || self.setpoints.iter().chain(&self.calibration_setpoints).any(|t| !(*t > 0.0)) {
            return bad("setpoints must be positive");
        }
        if self.powers.iter().any(|p| !(*p > 0.0)) || self.powers.windows(2).any(|w| w[1] <= w[0]) {
            return bad("powers must be positive and increasing");
        }
        for s in [self.sensor_hot, self.sensor_cold, self.sensor_mxc] {
            if !(s.scale > 0.0 && s.exponent < 0.0) {
                return bad("sensors need a positive scale and a negative exponent");
            }
        }
        if !(self.interface.coefficient > 0.0 && self.interface.exponent > 0.0) {
            return bad("interface coefficient and exponent must be positive");
        }
        if !(self.reading_noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        for o in &self.outliers {
            if !self.setpoints.contains(&o.setpoint) {
                return bad("outliers must target a swept setpoint");
            }
            if o.count > self.powers.len() || !(o.hot_shift > 0.0 && o.hot_shift < 1.0) {
                return bad("outlier count must fit the sweep and hot_shift lie in (0, 1)");
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticDataset, SyntheticError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.reading_noise).expect("validated");
        let mut read = |sensor: &SensorModel, t: f64| {
            let r = sensor.resistance(t);
            if self.reading_noise > 0.0 {
                r * (1.0 + noise.sample(&mut rng))
            } else {
                r
            }
        };

        let mut sequences = Vec::new();
        let mut truth = Vec::new();
        for &t_mxc in &self.setpoints {
            let mut true_points = Vec::new();
            let mut points = vec![MeasurementPoint {
                power: 0.0,
                reading_hot: read(&self.sensor_hot, t_mxc),
                reading_cold: read(&self.sensor_cold, t_mxc),
                reading_mxc: read(&self.sensor_mxc, t_mxc),
            }];
            let faulty = self
                .outliers
                .iter()
                .rfind(|o| o.setpoint == t_mxc)
                .map_or((0, 0.0), |o| (o.count, o.hot_shift));
            for (k, &power) in self.powers.iter().enumerate() {
                let t_cold = self.interface.cold_temperature(power, t_mxc);
                let t_hot = self
                    .truth
                    .inverse(power / self.area + self.truth.eval(t_cold));
                true_points.push(TruePoint {
                    power,
                    t_hot,
                    t_cold,
                });
                let shift = if k + faulty.0 >= self.powers.len() {
                    faulty.1
                } else {
                    0.0
                };
                points.push(MeasurementPoint {
                    power,
                    reading_hot: read(&self.sensor_hot, t_hot * (1.0 - shift)),
                    reading_cold: read(&self.sensor_cold, t_cold),
                    reading_mxc: read(&self.sensor_mxc, t_mxc),
                });
            }
            sequences.push(MeasurementSequence {
                setpoint: t_mxc,
                points,
                area: self.area,
                thickness: self.thickness,
                unit: ReadingUnit::Ohm,
            });
            truth.push((t_mxc, true_points));
        }
        for &t_mxc in &self.calibration_setpoints {
            sequences.push(MeasurementSequence {
                setpoint: t_mxc,
                points: vec![MeasurementPoint {
                    power: 0.0,
                    reading_hot: read(&self.sensor_hot, t_mxc),
                    reading_cold: read(&self.sensor_cold, t_mxc),
                    reading_mxc: read(&self.sensor_mxc, t_mxc),
                }],
                area: self.area,
                thickness: self.thickness,
                unit: ReadingUnit::Ohm,
            });
        }
        let reference = SensorCalibration::new(
            log_spaced(0.02, 10.0, 40)
                .into_iter()
                .map(|t| (self.sensor_mxc.resistance(t), t))
                .collect(),
        )
        .expect("power-law sensor is monotone");
        Ok(SyntheticDataset {
            sequences,
            reference,
            truth,
        })
    }
}
