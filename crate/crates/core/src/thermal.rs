//! Ballistic phonon heat flux between two reservoirs through a layer stack.
//!
//! The hot substrate is an isotropic Debye gas with linear dispersion. The
//! one-sided flux per branch is
//!
//! ```text
//! I(T)/L = ∫ dω ħω n(ω,T) D(ω) v · ½ ∫₀¹ 𝒯(ω,μ) μ dμ,   D(ω) = ω² / (2π² v³)
//! ```
//!
//! The stack transmission 𝒯 does not depend on temperature, so the angular
//! average is computed once per grid ([`AngularSpectrum`]) and then weighted
//! with the Bose–Einstein factor for any number of temperatures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::{AcousticBranch, AcousticsError, LayerStack};
use crate::analysis::curve::{CurveError, HeatIntegralCurve, InterpolationSpace};
use crate::materials::Polarization;
use crate::quadrature::{composite_gauss_legendre, gauss_legendre};
use crate::units::{HBAR, K_B};

#[derive(Debug, Error, PartialEq)]
pub enum ThermalError {
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),
    #[error("temperatures must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("T_hot = {hot} K is below T_cold = {cold} K")]
    ReversedTemperatures { hot: f64, cold: f64 },
    #[error(transparent)]
    Acoustics(#[from] AcousticsError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Relative weights of the polarization branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchWeights {
    pub transverse: f64,
    pub longitudinal: f64,
}

impl Default for BranchWeights {
    /// Two transverse branches and one longitudinal.
    fn default() -> Self {
        BranchWeights {
            transverse: 2.0,
            longitudinal: 1.0,
        }
    }
}

impl BranchWeights {
    pub fn single_transverse() -> Self {
        BranchWeights {
            transverse: 1.0,
            longitudinal: 0.0,
        }
    }

    /// Branches actually evaluated for `stack`. If any medium lacks a
    /// longitudinal speed, the longitudinal weight is carried by the
    /// transverse branch.
    pub fn resolve(&self, stack: &LayerStack) -> Vec<(Polarization, f64)> {
        let mut out = Vec::new();
        if stack.supports(Polarization::Longitudinal) {
            if self.transverse > 0.0 {
                out.push((Polarization::Transverse, self.transverse));
            }
            if self.longitudinal > 0.0 {
                out.push((Polarization::Longitudinal, self.longitudinal));
            }
        } else {
            let w = self.transverse + self.longitudinal;
            if w > 0.0 {
                out.push((Polarization::Transverse, w));
            }
        }
        out
    }
}

/// Tunable quadrature density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Upper frequency cut as a multiple of k_B·T_max/ħ.
    pub cutoff_x: f64,
    /// Lower frequency cut as a multiple of k_B·T_min/ħ.
    pub floor_x: f64,
    /// Log-spaced frequency panels per decade.
    pub panels_per_decade: usize,
    /// Gauss–Legendre order inside each frequency panel.
    pub omega_order: usize,
    /// Minimum number of frequency nodes per Fabry–Pérot fringe.
    pub nodes_per_fringe: f64,
    pub mu_panels: usize,
    pub mu_order: usize,
    pub branches: BranchWeights,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cutoff_x: 30.0,
            floor_x: 1e-2,
            panels_per_decade: 8,
            omega_order: 6,
            nodes_per_fringe: 20.0,
            mu_panels: 8,
            mu_order: 8,
            branches: BranchWeights::default(),
        }
    }
}

impl GridConfig {
    /// Twice the node density in every direction.
    pub fn refined(&self) -> Self {
        GridConfig {
            panels_per_decade: self.panels_per_decade * 2,
            nodes_per_fringe: self.nodes_per_fringe * 2.0,
            mu_panels: self.mu_panels * 2,
            ..self.clone()
        }
    }

    /// Fewer nodes, for inner optimization loops.
    pub fn coarse() -> Self {
        GridConfig {
            panels_per_decade: 6,
            omega_order: 4,
            mu_panels: 4,
            mu_order: 8,
            ..GridConfig::default()
        }
    }
}

/// Quadrature nodes in ω (composite Gauss–Legendre on log-spaced panels,
/// split further where Fabry–Pérot fringes require it) and μ = cos θ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    omega_nodes: Vec<f64>,
    omega_weights: Vec<f64>,
    mu_nodes: Vec<f64>,
    mu_weights: Vec<f64>,
    max_panel_width: f64,
    omega_order: usize,
    t_max: f64,
    nodes_per_fringe: f64,
    branches: BranchWeights,
}

impl SpectralGrid {
    /// Grid covering temperatures `[t_min, t_max]` and resolving every
    /// fringe of `stack`.
    pub fn for_stack(
        stack: &LayerStack,
        t_min: f64,
        t_max: f64,
        cfg: &GridConfig,
    ) -> Result<Self, ThermalError> {
        let mut period = f64::INFINITY;
        for (pol, _) in cfg.branches.resolve(stack) {
            if let Some(p) = stack.branch(pol)?.fringe_period() {
                period = period.min(p);
            }
        }
        let debye = stack
            .media()
            .filter_map(|m| m.debye_freq)
            .fold(f64::INFINITY, f64::min);
        Self::build(t_min, t_max, period, debye, cfg)
    }

    /// Grid for a given fringe period (rad/s; infinite for a bare interface)
    /// and optional Debye cutoff.
    pub fn build(
        t_min: f64,
        t_max: f64,
        fringe_period: f64,
        debye_cutoff: f64,
        cfg: &GridConfig,
    ) -> Result<Self, ThermalError> {
        for t in [t_min, t_max] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ThermalError::NonPositiveTemperature(t));
            }
        }
        if t_max < t_min {
            return Err(ThermalError::NotIncreasing(1));
        }
        let w_lo = cfg.floor_x * K_B * t_min / HBAR;
        let w_hi = (cfg.cutoff_x * K_B * t_max / HBAR).min(debye_cutoff);
        let max_width = fringe_period * cfg.omega_order as f64 / cfg.nodes_per_fringe;

        let decades = (w_hi / w_lo).log10();
        let n_log = ((decades * cfg.panels_per_decade as f64).ceil() as usize).max(1);
        let mut edges = vec![w_lo];
        for k in 1..=n_log {
            let hi = w_lo * (w_hi / w_lo).powf(k as f64 / n_log as f64);
            let lo = *edges.last().unwrap();
            let pieces = ((hi - lo) / max_width).ceil().max(1.0) as usize;
            for j in 1..=pieces {
                edges.push(lo + (hi - lo) * j as f64 / pieces as f64);
            }
        }
        let (gx, gw) = gauss_legendre(cfg.omega_order);
        let mut omega_nodes = Vec::with_capacity((edges.len() - 1) * cfg.omega_order);
        let mut omega_weights = Vec::with_capacity(omega_nodes.capacity());
        let mut widest: f64 = 0.0;
        for e in edges.windows(2) {
            let half = 0.5 * (e[1] - e[0]);
            widest = widest.max(e[1] - e[0]);
            for (x, w) in gx.iter().zip(&gw) {
                omega_nodes.push(e[0] + half * (x + 1.0));
                omega_weights.push(half * w);
            }
        }
        let (mu_nodes, mu_weights) = composite_gauss_legendre(0.0, 1.0, cfg.mu_panels, cfg.mu_order);
        Ok(SpectralGrid {
            omega_nodes,
            omega_weights,
            mu_nodes,
            mu_weights,
            max_panel_width: widest,
            omega_order: cfg.omega_order,
            t_max: if debye_cutoff.is_finite() { f64::INFINITY } else { t_max },
            nodes_per_fringe: cfg.nodes_per_fringe,
            branches: cfg.branches,
        })
    }

    pub fn omega_nodes(&self) -> &[f64] {
        &self.omega_nodes
    }

    pub fn mu_nodes(&self) -> &[f64] {
        &self.mu_nodes
    }

    pub fn branches(&self) -> BranchWeights {
        self.branches
    }

    pub fn len(&self) -> usize {
        self.omega_nodes.len() * self.mu_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_nodes.is_empty()
    }

    /// Frequency nodes per fringe of period `period`, counted on the widest
    /// panel.
    pub fn nodes_per_fringe(&self, period: f64) -> f64 {
        period / self.max_panel_width * self.omega_order as f64
    }

    fn check_stack(&self, branch: &AcousticBranch) -> Result<(), ThermalError> {
        if let Some(period) = branch.fringe_period() {
            let n = self.nodes_per_fringe(period);
            // tiny slack for the ceil() in panel splitting
            if n < self.nodes_per_fringe * (1.0 - 1e-9) {
                return Err(ThermalError::GridTooCoarse(format!(
                    "{n:.1} nodes per fringe, need {}",
                    self.nodes_per_fringe
                )));
            }
        }
        Ok(())
    }

    fn check_temperature(&self, t: f64) -> Result<(), ThermalError> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ThermalError::NonPositiveTemperature(t));
        }
        if t > self.t_max * (1.0 + 1e-12) {
            return Err(ThermalError::GridTooCoarse(format!(
                "grid built for T <= {} K, asked for {t} K",
                self.t_max
            )));
        }
        Ok(())
    }
}

/// Angle-averaged transmission ½∫𝒯μ dμ at every frequency node, per branch.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSpectrum {
    /// (branch weight, emitter speed, τ(ω_k))
    branches: Vec<(f64, f64, Vec<f64>)>,
    grid: SpectralGrid,
}

impl AngularSpectrum {
    pub fn compute(stack: &LayerStack, grid: &SpectralGrid) -> Result<Self, ThermalError> {
        let mut branches = Vec::new();
        for (pol, weight) in grid.branches.resolve(stack) {
            let branch = stack.branch(pol)?;
            grid.check_stack(&branch)?;
            let oblique: Vec<_> = grid
                .mu_nodes
                .iter()
                .map(|&mu| branch.at_angle(mu.clamp(-1.0, 1.0).acos()))
                .collect();
            // collect keeps node order, so the sum below is thread-count independent
            let tau: Vec<f64> = grid
                .omega_nodes
                .par_iter()
                .map(|&omega| {
                    let mut acc = 0.0;
                    for ((ob, &mu), &w) in oblique.iter().zip(&grid.mu_nodes).zip(&grid.mu_weights) {
                        acc += w * mu * ob.transmission(omega);
                    }
                    0.5 * acc
                })
                .collect();
            branches.push((weight, branch.emitter_speed(), tau));
        }
        Ok(AngularSpectrum {
            branches,
            grid: grid.clone(),
        })
    }

    /// Spectrum with 𝒯 ≡ 1 for a single branch of emitter speed `speed`.
    pub fn unity(grid: &SpectralGrid, speed: f64) -> Self {
        let tau_full: f64 = grid
            .mu_nodes
            .iter()
            .zip(&grid.mu_weights)
            .map(|(mu, w)| 0.5 * w * mu)
            .sum();
        AngularSpectrum {
            branches: vec![(1.0, speed, vec![tau_full; grid.omega_nodes.len()])],
            grid: grid.clone(),
        }
    }

    /// One-sided flux I(T)/L, W/m².
    pub fn flux(&self, t: f64) -> Result<f64, ThermalError> {
        self.grid.check_temperature(t)?;
        let beta = HBAR / (K_B * t);
        let mut total = 0.0;
        for (weight, v, tau) in &self.branches {
            let pref = HBAR / (2.0 * std::f64::consts::PI.powi(2) * v * v);
            let mut acc = 0.0;
            for ((&w, &wq), &tk) in self.grid.omega_nodes.iter().zip(&self.grid.omega_weights).zip(tau) {
                let x = beta * w;
                if x > 700.0 {
                    continue;
                }
                acc += wq * w * w * w / x.exp_m1() * tk;
            }
            total += weight * pref * acc;
        }
        Ok(total)
    }

    /// Mean transmission of each branch at each frequency node,
    /// normalised so that 𝒯 ≡ 1 gives 1.
    pub fn mean_transmission(&self) -> Vec<(f64, Vec<f64>)> {
        self.branches
            .iter()
            .map(|(w, _, tau)| (*w, tau.iter().map(|t| 4.0 * t).collect()))
            .collect()
    }
}

/// One-sided flux I(T)/L emitted from the hot substrate at temperature `t`
/// and transmitted through the stack, W/m².
pub fn one_sided_flux(stack: &LayerStack, t: f64, grid: &SpectralGrid) -> Result<f64, ThermalError> {
    if !(t > 0.0) {
        return Err(ThermalError::NonPositiveTemperature(t));
    }
    AngularSpectrum::compute(stack, grid)?.flux(t)
}

/// Net flux I(T_hot)/L − I(T_cold)/L. Reciprocity lets both directions use
/// the same spectrum.
pub fn net_flux(
    stack: &LayerStack,
    t_hot: f64,
    t_cold: f64,
    grid: &SpectralGrid,
) -> Result<f64, ThermalError> {
    let spectrum = AngularSpectrum::compute(stack, grid)?;
    net_flux_from_spectrum(&spectrum, t_hot, t_cold)
}

pub fn net_flux_from_spectrum(
    spectrum: &AngularSpectrum,
    t_hot: f64,
    t_cold: f64,
) -> Result<f64, ThermalError> {
    if t_cold > t_hot {
        return Err(ThermalError::ReversedTemperatures {
            hot: t_hot,
            cold: t_cold,
        });
    }
    if t_hot == t_cold {
        spectrum.grid.check_temperature(t_hot)?;
        return Ok(0.0);
    }
    Ok(spectrum.flux(t_hot)? - spectrum.flux(t_cold)?)
}

/// Tabulated one-sided flux of a stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedHeatCurve {
    pub stack_id: String,
    /// (T in K, one-sided flux in W/m²)
    pub knots: Vec<(f64, f64)>,
}

impl SimulatedHeatCurve {
    /// Finite-difference slopes d ln I / d ln T between neighbouring knots.
    pub fn loglog_slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
            .collect()
    }
}

pub fn simulate_curve(
    stack: &LayerStack,
    stack_id: &str,
    temperatures: &[f64],
    grid: &SpectralGrid,
) -> Result<SimulatedHeatCurve, ThermalError> {
    for (i, w) in temperatures.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(ThermalError::NotIncreasing(i + 1));
        }
    }
    let spectrum = AngularSpectrum::compute(stack, grid)?;
    let knots = temperatures
        .iter()
        .map(|&t| Ok((t, spectrum.flux(t)?)))
        .collect::<Result<Vec<_>, ThermalError>>()?;
    Ok(SimulatedHeatCurve {
        stack_id: stack_id.to_string(),
        knots,
    })
}

/// Interpolant of a simulated curve whose derivative gives λ_eff/L.
pub fn lambda_eff_from_curve(curve: &SimulatedHeatCurve) -> Result<HeatIntegralCurve, ThermalError> {
    if curve.knots.len() < 4 {
        return Err(CurveError::TooFewKnots {
            needed: 4,
            got: curve.knots.len(),
        }
        .into());
    }
    Ok(HeatIntegralCurve::new(curve.knots.clone(), InterpolationSpace::LogLog)?)
}
