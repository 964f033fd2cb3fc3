//! Self-consistent extraction of the heat integral from calibrated sweeps.
//!
//! Each sweep satisfies P/A = I(T_H)/L − I(T_L)/L. Starting from
//! I₀(T_L) = 0, pass n sets I_n(T_H)/L = P/A + I_{n−1}(T_L)/L at every
//! powered point and re-interpolates, until the recalculated heat flow
//! matches the measured one everywhere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::curve::{CurveError, HeatIntegralCurve, InterpolationSpace};
use super::sequence::{CalibratedSequence, SequenceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("setpoint {setpoint} K: need at least {needed} powered points, got {got}")]
    TooFewPoints {
        setpoint: f64,
        needed: usize,
        got: usize,
    },
    #[error(
        "setpoint {setpoint} K: point {index} has T_H = {t_hot} K, below an earlier point at \
         lower power; exclude it to continue"
    )]
    NonMonotoneAfterCleaning {
        setpoint: f64,
        index: usize,
        t_hot: f64,
    },
    #[error("setpoint {setpoint} K: not converged after {iterations} iterations (max |Δ_rel| = {max_rel})")]
    NotConverged {
        setpoint: f64,
        iterations: usize,
        max_rel: f64,
    },
    #[error("setpoint {setpoint} K: {source}")]
    Curve { setpoint: f64, source: CurveError },
    #[error("no curve for the lowest setpoint to align against")]
    MissingBaseCurve,
    #[error("base curve at {0} K did not converge")]
    BaseNotConverged(f64),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionOptions {
    /// Stop once max |Δ_rel| falls below this.
    pub threshold: f64,
    pub max_iter: usize,
    pub space: InterpolationSpace,
    /// Hot-side temperatures closer than this (K) share one knot.
    pub merge_tolerance: f64,
    pub min_powered_points: usize,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            threshold: 0.02,
            max_iter: 30,
            space: InterpolationSpace::default(),
            merge_tolerance: 1e-6,
            min_powered_points: 4,
        }
    }
}

/// Deviations of one pass, per powered point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDeviation {
    pub iteration: usize,
    /// P/A − (I_n(T_H) − I_n(T_L))/L, W/m².
    pub delta_abs: Vec<f64>,
    pub delta_rel: Vec<f64>,
}

impl IterationDeviation {
    pub fn max_abs(&self) -> f64 {
        self.delta_abs.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn max_rel(&self) -> f64 {
        self.delta_rel.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub setpoint: f64,
    /// Positions in the sequence of the points the deviations refer to.
    pub point_indices: Vec<usize>,
    /// Starts with the uncorrected pass 0.
    pub iterations: Vec<IterationDeviation>,
    pub n_iterations: usize,
    pub converged: bool,
    pub threshold: f64,
}

impl ConvergenceReport {
    pub fn last(&self) -> &IterationDeviation {
        self.iterations.last().expect("at least pass 0")
    }
}

/// Result for one setpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointExtraction {
    pub setpoint: f64,
    /// Mixing-chamber temperature at zero power.
    pub anchor_temperature: f64,
    pub curve: HeatIntegralCurve,
    pub report: ConvergenceReport,
}

impl SetpointExtraction {
    pub fn require_converged(&self) -> Result<(), ExtractionError> {
        if self.report.converged {
            Ok(())
        } else {
            Err(ExtractionError::NotConverged {
                setpoint: self.setpoint,
                iterations: self.report.n_iterations,
                max_rel: self.report.last().max_rel(),
            })
        }
    }
}

/// Runs the iteration for every sequence that has powered points.
/// Sequences holding only zero-power points (calibration stops) are skipped.
/// Non-convergence is reported in each result, not as an error.
pub fn extract_heat_integral(
    seqs: &[CalibratedSequence],
    opts: &ExtractionOptions,
) -> Result<Vec<SetpointExtraction>, ExtractionError> {
    seqs.par_iter()
        .filter(|s| s.points.iter().any(|p| p.power > 0.0))
        .map(|s| extract_one(s, opts))
        .collect()
}

struct Powered {
    index: usize,
    flux: f64,
    t_hot: f64,
    t_cold: f64,
}

pub fn extract_one(
    seq: &CalibratedSequence,
    opts: &ExtractionOptions,
) -> Result<SetpointExtraction, ExtractionError> {
    let setpoint = seq.setpoint;
    let pts: Vec<Powered> = seq
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.power > 0.0)
        .map(|(index, p)| Powered {
            index,
            flux: p.power / seq.area,
            t_hot: p.t_hot,
            t_cold: p.t_cold,
        })
        .collect();
    if pts.len() < opts.min_powered_points {
        return Err(ExtractionError::TooFewPoints {
            setpoint,
            needed: opts.min_powered_points,
            got: pts.len(),
        });
    }

    // knot groups: consecutive points whose T_H agree within the tolerance
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, p) in pts.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (p.t_hot - pts[g[0]].t_hot).abs() <= opts.merge_tolerance => g.push(k),
            Some(g) if p.t_hot < pts[g[0]].t_hot => {
                return Err(ExtractionError::NonMonotoneAfterCleaning {
                    setpoint,
                    index: p.index,
                    t_hot: p.t_hot,
                });
            }
            _ => groups.push(vec![k]),
        }
    }
    let knot_t: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&k| pts[k].t_hot).sum::<f64>() / g.len() as f64)
        .collect();

    let anchor = seq.anchor_temperature();
    let zero_knot = opts.space == InterpolationSpace::Linear
        && anchor < knot_t[0] - opts.merge_tolerance;
    let curve_err = |source| ExtractionError::Curve { setpoint, source };

    let mut previous: Option<HeatIntegralCurve> = None;
    let mut iterations = Vec::new();
    let mut n = 0;
    loop {
        let values: Vec<f64> = pts
            .iter()
            .map(|p| p.flux + previous.as_ref().map_or(0.0, |c| c.eval(p.t_cold)))
            .collect();
        let mut knots = Vec::with_capacity(groups.len() + 1);
        if zero_knot {
            knots.push((anchor, 0.0));
        }
        for (g, &t) in groups.iter().zip(&knot_t) {
            let mean = g.iter().map(|&k| values[k]).sum::<f64>() / g.len() as f64;
            knots.push((t, mean));
        }
        let curve = HeatIntegralCurve::new(knots, opts.space)
            .map_err(curve_err)?
            .with_setpoint(setpoint);

        let delta_abs: Vec<f64> = pts
            .iter()
            .map(|p| p.flux - (curve.eval(p.t_hot) - curve.eval(p.t_cold)))
            .collect();
        let delta_rel = delta_abs.iter().zip(&pts).map(|(d, p)| d / p.flux).collect();
        let dev = IterationDeviation {
            iteration: n,
            delta_abs,
            delta_rel,
        };
        let converged = dev.max_rel() < opts.threshold;
        iterations.push(dev);
        if converged || n >= opts.max_iter {
            let report = ConvergenceReport {
                setpoint,
                point_indices: pts.iter().map(|p| p.index).collect(),
                iterations,
                n_iterations: n,
                converged,
                threshold: opts.threshold,
            };
            return Ok(SetpointExtraction {
                setpoint,
                anchor_temperature: anchor,
                curve,
                report,
            });
        }
        previous = Some(curve);
        n += 1;
    }
}

/// Shifts every curve onto the integration constant of the lowest setpoint.
///
/// Each curve k receives the constant that makes it equal the base curve at
/// its own zero-power temperature:
/// C_k = I_base(T_MXC,k) − I_k(T_MXC,k). For a curve that starts at zero at
/// T_MXC,k this is simply I_base(T_MXC,k).
pub fn align_offsets(results: &[SetpointExtraction]) -> Result<Vec<HeatIntegralCurve>, ExtractionError> {
    let base = results
        .iter()
        .min_by(|a, b| a.setpoint.total_cmp(&b.setpoint))
        .ok_or(ExtractionError::MissingBaseCurve)?;
    if !base.report.converged {
        return Err(ExtractionError::BaseNotConverged(base.setpoint));
    }
    results
        .iter()
        .map(|r| {
            if std::ptr::eq(r, base) {
                return Ok(r.curve.clone());
            }
            let t = r.anchor_temperature;
            let target = base.curve.eval_checked(t).map_err(|source| ExtractionError::Curve {
                setpoint: r.setpoint,
                source,
            })?;
            Ok(r.curve.shifted(target - r.curve.eval(t)))
        })
        .collect()
}

/// Largest relative difference between any two curves, sampled on `samples`
/// log-spaced temperatures of each pair's common range. Pairs without
/// overlap are skipped.
pub fn pairwise_disagreement(curves: &[HeatIntegralCurve], samples: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            let lo = a.t_range().0.max(b.t_range().0);
            let hi = a.t_range().1.min(b.t_range().1);
            if hi <= lo {
                continue;
            }
            for k in 0..samples {
                let t = lo * (hi / lo).powf(k as f64 / (samples - 1).max(1) as f64);
                let (x, y) = (a.eval(t), b.eval(t));
                worst = worst.max((x - y).abs() / x.abs().max(y.abs()));
            }
        }
    }
    worst
}

/// Outcome of outlier handling on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    /// Sequence with the requested points removed.
    pub sequence: CalibratedSequence,
    /// Points (indices into the input sequence) that disagree with the
    /// reference. They are reported, not removed.
    pub flagged: Vec<usize>,
}

/// Removes the points listed in `exclusions`. With a `reference` curve from
/// another setpoint, also flags the trailing run of points whose P/A differs
/// from I_ref(T_H) − I_ref(T_L) by more than `tolerance` (relative).
pub fn exclude_outliers(
    seq: &CalibratedSequence,
    exclusions: &[usize],
    reference: Option<&HeatIntegralCurve>,
    tolerance: f64,
) -> Result<OutlierReport, ExtractionError> {
    let sequence = seq.without(exclusions)?;
    let mut flagged = Vec::new();
    if let Some(reference) = reference {
        let kept = (0..seq.points.len()).filter(|i| !exclusions.contains(i));
        let candidates: Vec<usize> = kept.filter(|&i| seq.points[i].power > 0.0).collect();
        for &i in candidates.iter().rev() {
            let p = &seq.points[i];
            let Ok(hot) = reference.eval_checked(p.t_hot) else {
                break;
            };
            let predicted = hot - reference.eval(p.t_cold);
            let measured = seq.flux(i);
            if ((measured - predicted) / measured).abs() <= tolerance {
                break;
            }
            flagged.push(i);
        }
        flagged.reverse();
    }
    Ok(OutlierReport { sequence, flagged })
}

/// Flags trailing outliers in every sequence against the extraction of the
/// neighbouring setpoint (the next higher one; the next lower for the top).
pub fn auto_flag_outliers(
    seqs: &[CalibratedSequence],
    results: &[SetpointExtraction],
    tolerance: f64,
) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<&SetpointExtraction> = results.iter().collect();
    order.sort_by(|a, b| a.setpoint.total_cmp(&b.setpoint));
    let mut out = Vec::new();
    for (k, r) in order.iter().enumerate() {
        let neighbour = order.get(k + 1).or(if k > 0 { order.get(k - 1) } else { None });
        let (Some(neighbour), Some(seq)) = (neighbour, seqs.iter().find(|s| s.setpoint == r.setpoint))
        else {
            continue;
        };
        if let Ok(rep) = exclude_outliers(seq, &[], Some(&neighbour.curve), tolerance) {
            if !rep.flagged.is_empty() {
                out.push((r.setpoint, rep.flagged));
            }
        }
    }
    out
}
