//! Heat-integral curves I(T)/L: monotone interpolant of knots plus an
//! additive integration constant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{InterpError, Pchip, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("need at least {needed} knots, got {got}")]
    TooFewKnots { needed: usize, got: usize },
    #[error("knot {index}: temperatures must be positive and strictly increasing")]
    NonIncreasingTemperature { index: usize },
    #[error("knot {index}: heat integral must be strictly increasing (and positive in log-log space)")]
    NonMonotone { index: usize },
    #[error("T = {t} K lies above the last knot at {last} K")]
    AboveRange { t: f64, last: f64 },
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// Coordinates the monotone cubic acts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationSpace {
    /// ln I against ln T; keeps I positive and handles multi-decade ranges.
    #[default]
    LogLog,
    /// I against T.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatIntegralCurve {
    knots: Vec<(f64, f64)>,
    offset: f64,
    space: InterpolationSpace,
    source_setpoint: Option<f64>,
    interp: Pchip,
}

impl HeatIntegralCurve {
    /// `knots` are (T in K, I/L in W/m²), both strictly increasing.
    pub fn new(knots: Vec<(f64, f64)>, space: InterpolationSpace) -> Result<Self, CurveError> {
        if knots.len() < 2 {
            return Err(CurveError::TooFewKnots {
                needed: 2,
                got: knots.len(),
            });
        }
        for (index, &(t, i)) in knots.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) || (index > 0 && t <= knots[index - 1].0) {
                return Err(CurveError::NonIncreasingTemperature { index });
            }
            let positive_ok = space == InterpolationSpace::Linear || i > 0.0;
            if !i.is_finite() || !positive_ok || (index > 0 && i <= knots[index - 1].1) {
                return Err(CurveError::NonMonotone { index });
            }
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = match space {
            InterpolationSpace::LogLog => knots.iter().map(|&(t, i)| (t.ln(), i.ln())).unzip(),
            InterpolationSpace::Linear => knots.iter().copied().unzip(),
        };
        let interp = Pchip::new(xs, ys)?;
        Ok(HeatIntegralCurve {
            knots,
            offset: 0.0,
            space,
            source_setpoint: None,
            interp,
        })
    }

    pub fn with_setpoint(mut self, t_mxc: f64) -> Self {
        self.source_setpoint = Some(t_mxc);
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    /// Adds `c` to the integration constant.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.offset += c;
        out
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn space(&self) -> InterpolationSpace {
        self.space
    }

    pub fn source_setpoint(&self) -> Option<f64> {
        self.source_setpoint
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    /// Interpolated knot function without the offset, and where `t` fell.
    fn base(&self, t: f64) -> (f64, Side) {
        match self.space {
            InterpolationSpace::LogLog => {
                if t <= 0.0 {
                    return (0.0, Side::Below);
                }
                let (v, side) = self.interp.eval_with_side(t.ln());
                (v.exp(), side)
            }
            InterpolationSpace::Linear => self.interp.eval_with_side(t),
        }
    }

    /// I(T)/L including the offset. Outside the knots the end segments are
    /// continued (power laws in log-log space).
    pub fn eval(&self, t: f64) -> f64 {
        self.base(t).0 + self.offset
    }

    /// Like [`eval`](Self::eval) but refuses temperatures above the last knot
    /// (beyond a relative slack of 1e-9).
    pub fn eval_checked(&self, t: f64) -> Result<f64, CurveError> {
        let last = self.t_range().1;
        if t > last * (1.0 + 1e-9) {
            return Err(CurveError::AboveRange { t, last });
        }
        Ok(self.eval(t))
    }

    /// d(I/L)/dT in W/(m²·K). Multiply by the thickness for λ_eff.
    pub fn derivative(&self, t: f64) -> f64 {
        match self.space {
            InterpolationSpace::LogLog => {
                if t <= 0.0 {
                    return 0.0;
                }
                let (v, _) = self.base(t);
                v / t * self.interp.derivative(t.ln())
            }
            InterpolationSpace::Linear => self.interp.derivative(t),
        }
    }

    /// Effective thermal conductivity λ_eff = L · d(I/L)/dT, W/(m·K).
    pub fn lambda_eff(&self, t: f64, thickness: f64) -> f64 {
        thickness * self.derivative(t)
    }
}
