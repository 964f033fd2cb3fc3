//! Closed-form packaging heat-load estimates: superconducting via arrays,
//! series thermal impedances, bond-wire shunts, lateral gradients in the
//! sample pieces and the cooling-power check.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{tables, BulkConductivityTable, MaterialError};
use crate::units::{w_per_m2_to_mw_per_cm2, LORENZ_NUMBER, MW_PER_CM2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("invalid via geometry: {0}")]
    ViaGeometry(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("hot side at {t_hot} K is not below the critical temperature {t_c} K")]
    AboveTc { t_hot: f64, t_c: f64 },
    #[error(transparent)]
    Table(#[from] MaterialError),
    #[error("unknown conductivity table `{0}`")]
    UnknownTable(String),
    #[error("{0}")]
    Parse(String),
}

fn positive(name: &str, v: f64) -> Result<(), BudgetError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(BudgetError::Invalid(format!("{name} must be positive (got {v})")))
    }
}

fn check_pair(t_hot: f64, t_cold: f64) -> Result<(), BudgetError> {
    if !(t_cold.is_finite() && t_cold >= 0.0 && t_hot.is_finite()) || t_hot < t_cold {
        return Err(BudgetError::Invalid(format!(
            "need T_hot >= T_cold >= 0 (got {t_hot} K, {t_cold} K)"
        )));
    }
    Ok(())
}

fn default_suppression() -> f64 {
    0.01
}

/// Square array of hollow cylindrical vias with a metal shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaSpec {
    /// m
    pub outer_diameter: f64,
    /// m
    pub shell_thickness: f64,
    /// Center-to-center spacing, m.
    pub pitch: f64,
    /// Via length (matrix thickness), m.
    pub length: f64,
    /// Normal-state resistivity of the shell, Ω·m.
    pub rho_n: f64,
    /// Critical temperature of the shell, K.
    pub t_c: f64,
    /// Factor applied to the normal-state flux below `t_c`.
    #[serde(default = "default_suppression")]
    pub sc_suppression: f64,
}

impl ViaSpec {
    /// 1 µm NbTiN vias with a 20 nm shell on a 2 µm pitch through 10 µm.
    pub fn close_to_qubit_array() -> Self {
        ViaSpec {
            outer_diameter: 1e-6,
            shell_thickness: 20e-9,
            pitch: 2e-6,
            length: 10e-6,
            rho_n: 1e-5,
            t_c: 12.0,
            sc_suppression: default_suppression(),
        }
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        for (name, v) in [
            ("outer_diameter", self.outer_diameter),
            ("shell_thickness", self.shell_thickness),
            ("pitch", self.pitch),
            ("length", self.length),
            ("rho_n", self.rho_n),
            ("t_c", self.t_c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(BudgetError::ViaGeometry(format!(
                    "{name} must be positive (got {v})"
                )));
            }
        }
        if self.shell_thickness >= self.outer_diameter / 2.0 {
            return Err(BudgetError::ViaGeometry(
                "shell thickness must be below half the outer diameter".into(),
            ));
        }
        if self.pitch <= self.outer_diameter {
            return Err(BudgetError::ViaGeometry(
                "pitch must exceed the outer diameter".into(),
            ));
        }
        if !(self.sc_suppression.is_finite() && self.sc_suppression >= 0.0) {
            return Err(BudgetError::ViaGeometry(
                "sc_suppression must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Metal cross-section of one via, π(d·t − t²), m².
    pub fn via_area(&self) -> f64 {
        let (d, t) = (self.outer_diameter, self.shell_thickness);
        PI * (d * t - t * t)
    }

    /// Metal area fraction of the array.
    pub fn fill_factor(&self) -> f64 {
        self.via_area() / (self.pitch * self.pitch)
    }
}

/// Areal heat flux through a normal-metal via array from the
/// Wiedemann–Franz law, W/m².
pub fn via_flux_normal(spec: &ViaSpec, t_hot: f64, t_cold: f64) -> Result<f64, BudgetError> {
    spec.validate()?;
    check_pair(t_hot, t_cold)?;
    Ok(spec.fill_factor() / spec.length * LORENZ_NUMBER / (2.0 * spec.rho_n)
        * (t_hot * t_hot - t_cold * t_cold))
}

/// Normal-state flux scaled by the superconducting suppression factor.
pub fn via_flux_superconducting(
    spec: &ViaSpec,
    t_hot: f64,
    t_cold: f64,
) -> Result<f64, BudgetError> {
    let q = via_flux_normal(spec, t_hot, t_cold)?;
    if t_hot >= spec.t_c {
        return Err(BudgetError::AboveTc {
            t_hot,
            t_c: spec.t_c,
        });
    }
    Ok(q * spec.sc_suppression)
}

/// Areal thermal impedance of a slab, m²·K/W.
pub fn impedance_of_layer(thickness: f64, lambda: f64) -> Result<f64, BudgetError> {
    positive("thickness", thickness)?;
    positive("lambda", lambda)?;
    Ok(thickness / lambda)
}

/// Elements below this share of the total are reported as negligible.
pub const NEGLIGIBLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceElement {
    pub label: String,
    /// m²·K/W
    pub z: f64,
}

/// Series thermal impedances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpedanceStack {
    pub elements: Vec<ImpedanceElement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceShare {
    pub label: String,
    pub z: f64,
    pub fraction: f64,
    pub negligible: bool,
}

impl ImpedanceStack {
    pub fn new(elements: Vec<(String, f64)>) -> Result<Self, BudgetError> {
        let stack = ImpedanceStack {
            elements: elements
                .into_iter()
                .map(|(label, z)| ImpedanceElement { label, z })
                .collect(),
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        for e in &self.elements {
            if !(e.z.is_finite() && e.z >= 0.0) {
                return Err(BudgetError::Invalid(format!(
                    "impedance `{}` must be non-negative (got {})",
                    e.label, e.z
                )));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, label: impl Into<String>, z: f64) {
        self.elements.push(ImpedanceElement {
            label: label.into(),
            z,
        });
    }

    pub fn total(&self) -> f64 {
        self.elements.iter().map(|e| e.z).sum()
    }

    /// Share of each element in the total, flagged negligible below
    /// `threshold`.
    pub fn classify(&self, threshold: f64) -> Vec<ImpedanceShare> {
        let total = self.total();
        self.elements
            .iter()
            .map(|e| {
                let fraction = if total > 0.0 { e.z / total } else { 0.0 };
                ImpedanceShare {
                    label: e.label.clone(),
                    z: e.z,
                    fraction,
                    negligible: fraction < threshold,
                }
            })
            .collect()
    }
}

/// Parallel bond wires of one material.
#[derive(Debug, Clone, PartialEq)]
pub struct BondWireSpec {
    pub count: u32,
    /// m
    pub diameter: f64,
    /// m
    pub length: f64,
    pub table: BulkConductivityTable,
}

impl BondWireSpec {
    /// Four ⌀25 µm, 7.5 mm Al-1%Si wires.
    pub fn sample_wires() -> Self {
        BondWireSpec {
            count: 4,
            diameter: 25e-6,
            length: 7.5e-3,
            table: tables::al_1pct_si(),
        }
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        if self.count == 0 {
            return Err(BudgetError::Invalid("at least one bond wire".into()));
        }
        positive("wire diameter", self.diameter)?;
        positive("wire length", self.length)
    }

    /// Cross-section of one wire, m².
    pub fn wire_area(&self) -> f64 {
        PI * (self.diameter / 2.0).powi(2)
    }
}

/// Heat carried by the wires between `t_lo` and `t_hi`, W.
pub fn bond_wire_power(spec: &BondWireSpec, t_lo: f64, t_hi: f64) -> Result<f64, BudgetError> {
    spec.validate()?;
    check_pair(t_hi, t_lo)?;
    if t_hi == t_lo {
        return Ok(0.0);
    }
    let integral = spec.table.integrate(t_lo, t_hi)?;
    Ok(f64::from(spec.count) * spec.wire_area() / spec.length * integral)
}

/// Upper bound on the temperature drop when the full power `power` flows a
/// distance `length` through a cross-section `area` at temperature `t`, K.
pub fn lateral_gradient_bound(
    length: f64,
    area: f64,
    table: &BulkConductivityTable,
    power: f64,
    t: f64,
) -> Result<f64, BudgetError> {
    positive("length", length)?;
    positive("area", area)?;
    if !(power.is_finite() && power >= 0.0) {
        return Err(BudgetError::Invalid(format!(
            "power must be non-negative (got {power})"
        )));
    }
    let lambda = table.lambda(t)?;
    Ok(power * length / (lambda * area))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub verdict: Verdict,
    /// target / flux; above 1 means headroom.
    pub margin: f64,
}

/// Compares an areal flux with the allowed load.
pub fn budget_check(flux: f64, target: f64) -> BudgetCheck {
    let verdict = if flux < target {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    BudgetCheck {
        verdict,
        margin: target / flux,
    }
}

/// Default allowed load on the cold stage, 1 mW/cm² in W/m².
pub const DEFAULT_TARGET_FLUX: f64 = MW_PER_CM2;

/// One row of the measured heat-integral reference table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFlux {
    pub sample: String,
    pub n_samples: u32,
    #[serde(rename = "T_K")]
    pub t: f64,
    pub mean_mw_per_cm2: f64,
    pub std_mw_per_cm2: Option<f64>,
}

impl ReferenceFlux {
    pub fn mean_w_per_m2(&self) -> f64 {
        crate::units::mw_per_cm2_to_w_per_m2(self.mean_mw_per_cm2)
    }
}

/// Measured I(T)/L per sample type at 1.0, 1.5 and 1.8 K.
pub fn reference_fluxes() -> Vec<ReferenceFlux> {
    #[derive(Deserialize)]
    struct Row {
        sample: String,
        n_samples: u32,
        #[serde(rename = "T_K")]
        t: f64,
        #[serde(rename = "mean_mW_per_cm2")]
        mean: f64,
        #[serde(rename = "std_mW_per_cm2")]
        std: Option<f64>,
    }
    let text = include_str!("../data/heat_integral_reference.csv");
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize::<Row>()
        .map(|r| {
            let r = r.expect("bundled reference table");
            ReferenceFlux {
                sample: r.sample,
                n_samples: r.n_samples,
                t: r.t,
                mean_mw_per_cm2: r.mean,
                std_mw_per_cm2: r.std,
            }
        })
        .collect()
}

/// A heater-to-sensor path in the sample pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralPath {
    pub sensor: String,
    #[serde(rename = "offset_m")]
    pub offset: f64,
    #[serde(rename = "width_m")]
    pub width: f64,
    #[serde(rename = "thickness_m")]
    pub thickness: f64,
    #[serde(rename = "power_W")]
    pub power: f64,
    #[serde(rename = "T_K")]
    pub t: f64,
}

impl LateralPath {
    pub fn area(&self) -> f64 {
        self.width * self.thickness
    }

    pub fn bound(&self, table: &BulkConductivityTable) -> Result<f64, BudgetError> {
        lateral_gradient_bound(self.offset, self.area(), table, self.power, self.t)
    }
}

/// Worst-case operating points of the heater sweeps.
pub fn lateral_worst_case() -> Vec<LateralPath> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(include_str!("../data/lateral_worst_case.csv").as_bytes())
        .deserialize()
        .map(|r| r.expect("bundled lateral fixture"))
        .collect()
}

/// A conductivity table given by bundled name or inline knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    Named(String),
    Inline {
        material_name: String,
        knots: Vec<(f64, f64)>,
    },
}

impl TableSource {
    pub fn resolve(&self) -> Result<BulkConductivityTable, BudgetError> {
        match self {
            TableSource::Named(name) => {
                tables::by_name(name).ok_or_else(|| BudgetError::UnknownTable(name.clone()))
            }
            TableSource::Inline {
                material_name,
                knots,
            } => Ok(BulkConductivityTable::new(
                material_name.clone(),
                knots.clone(),
            )?),
        }
    }
}

fn schema_v1() -> u32 {
    crate::io::SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaScenario {
    #[serde(flatten)]
    pub spec: ViaSpec,
    pub t_hot: f64,
    pub t_cold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondWireScenario {
    #[serde(default)]
    pub label: String,
    pub count: u32,
    pub diameter: f64,
    pub length: f64,
    pub table: TableSource,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl BondWireScenario {
    pub fn spec(&self) -> Result<BondWireSpec, BudgetError> {
        Ok(BondWireSpec {
            count: self.count,
            diameter: self.diameter,
            length: self.length,
            table: self.table.resolve()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LateralScenario {
    #[serde(flatten)]
    pub path: LateralPath,
    pub table: TableSource,
    /// Allowed drop, K.
    pub max_delta_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    /// Allowed areal load on the cold stage, W/m².
    #[serde(default = "default_target")]
    pub flux: f64,
    /// Impedance share below which an element is negligible.
    #[serde(default = "default_negligible")]
    pub negligible_fraction: f64,
    /// Allowed bond-wire power, W.
    pub bond_wire_power: Option<f64>,
}

fn default_target() -> f64 {
    DEFAULT_TARGET_FLUX
}

fn default_negligible() -> f64 {
    NEGLIGIBLE_FRACTION
}

impl Default for Targets {
    fn default() -> Self {
        Targets {
            flux: default_target(),
            negligible_fraction: default_negligible(),
            bond_wire_power: None,
        }
    }
}

/// Input of the `budget` command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetScenario {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    #[serde(default)]
    pub via_spec: Option<ViaScenario>,
    #[serde(default)]
    pub impedance_elements: Vec<ImpedanceElement>,
    #[serde(default)]
    pub bond_wires: Vec<BondWireScenario>,
    #[serde(default)]
    pub lateral: Vec<LateralScenario>,
    #[serde(default)]
    pub targets: Targets,
}

impl BudgetScenario {
    pub fn from_json(text: &str) -> Result<Self, BudgetError> {
        let s: BudgetScenario =
            serde_json::from_str(text).map_err(|e| BudgetError::Parse(e.to_string()))?;
        if s.schema != crate::io::SCHEMA_VERSION {
            return Err(BudgetError::Parse(format!(
                "unsupported schema {} (expected {})",
                s.schema,
                crate::io::SCHEMA_VERSION
            )));
        }
        positive("targets.flux", s.targets.flux)?;
        Ok(s)
    }

    /// Validates every item up front; computation errors such as a hot side
    /// above T_c are reported per item instead.
    pub fn validate(&self) -> Result<(), BudgetError> {
        if let Some(v) = &self.via_spec {
            v.spec.validate()?;
            check_pair(v.t_hot, v.t_cold)?;
        }
        ImpedanceStack {
            elements: self.impedance_elements.clone(),
        }
        .validate()?;
        for w in &self.bond_wires {
            w.spec()?.validate()?;
            check_pair(w.t_hi, w.t_lo)?;
        }
        for l in &self.lateral {
            l.table.resolve()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaReport {
    pub fill_factor: f64,
    pub via_area_m2: f64,
    pub q_normal_w_per_m2: f64,
    pub q_normal_mw_per_cm2: f64,
    pub q_sc_w_per_m2: Option<f64>,
    pub q_sc_uw_per_cm2: Option<f64>,
    pub check: Option<BudgetCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceReport {
    pub total: f64,
    pub elements: Vec<ImpedanceShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondWireReport {
    pub label: String,
    pub power_w: Option<f64>,
    pub check: Option<BudgetCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralReport {
    pub sensor: String,
    pub delta_t_k: Option<f64>,
    pub within_limit: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub via: Option<ViaReport>,
    pub impedance: Option<ImpedanceReport>,
    pub bond_wires: Vec<BondWireReport>,
    pub lateral: Vec<LateralReport>,
    /// True if any item failed its check or could not be evaluated.
    pub flagged: bool,
}

/// Evaluates every item of a validated scenario.
pub fn evaluate_scenario(s: &BudgetScenario) -> BudgetReport {
    let mut flagged = false;
    let via = s.via_spec.as_ref().map(|v| {
        let q_n = via_flux_normal(&v.spec, v.t_hot, v.t_cold).unwrap_or(f64::NAN);
        let mut report = ViaReport {
            fill_factor: v.spec.fill_factor(),
            via_area_m2: v.spec.via_area(),
            q_normal_w_per_m2: q_n,
            q_normal_mw_per_cm2: w_per_m2_to_mw_per_cm2(q_n),
            q_sc_w_per_m2: None,
            q_sc_uw_per_cm2: None,
            check: None,
            error: None,
        };
        match via_flux_superconducting(&v.spec, v.t_hot, v.t_cold) {
            Ok(q) => {
                let check = budget_check(q, s.targets.flux);
                flagged |= check.verdict == Verdict::Fail;
                report.q_sc_w_per_m2 = Some(q);
                report.q_sc_uw_per_cm2 = Some(w_per_m2_to_mw_per_cm2(q) * 1e3);
                report.check = Some(check);
            }
            Err(e) => {
                flagged = true;
                report.error = Some(e.to_string());
            }
        }
        report
    });
    let impedance = (!s.impedance_elements.is_empty()).then(|| {
        let stack = ImpedanceStack {
            elements: s.impedance_elements.clone(),
        };
        ImpedanceReport {
            total: stack.total(),
            elements: stack.classify(s.targets.negligible_fraction),
        }
    });
    let bond_wires = s
        .bond_wires
        .iter()
        .map(|w| {
            let power = w.spec().and_then(|spec| bond_wire_power(&spec, w.t_lo, w.t_hi));
            match power {
                Ok(p) => {
                    let check = s.targets.bond_wire_power.map(|t| budget_check(p, t));
                    flagged |= check.is_some_and(|c| c.verdict == Verdict::Fail);
                    BondWireReport {
                        label: w.label.clone(),
                        power_w: Some(p),
                        check,
                        error: None,
                    }
                }
                Err(e) => {
                    flagged = true;
                    BondWireReport {
                        label: w.label.clone(),
                        power_w: None,
                        check: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let lateral = s
        .lateral
        .iter()
        .map(|l| {
            let dt = l.table.resolve().and_then(|t| l.path.bound(&t));
            match dt {
                Ok(dt) => {
                    let within = l.max_delta_t.map(|m| dt < m);
                    flagged |= within == Some(false);
                    LateralReport {
                        sensor: l.path.sensor.clone(),
                        delta_t_k: Some(dt),
                        within_limit: within,
                        error: None,
                    }
                }
                Err(e) => {
                    flagged = true;
                    LateralReport {
                        sensor: l.path.sensor.clone(),
                        delta_t_k: None,
                        within_limit: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    BudgetReport {
        via,
        impedance,
        bond_wires,
        lateral,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn via_array_geometry() {
        let v = ViaSpec::close_to_qubit_array();
        assert_relative_eq!(v.via_area(), 6.158e-14, max_relative = 1e-3);
        assert_relative_eq!(v.fill_factor(), 1.539e-2, max_relative = 1e-3);
    }

    #[test]
    fn via_fluxes() {
        let v = ViaSpec::close_to_qubit_array();
        let q_n = via_flux_normal(&v, 1.8, 0.1).unwrap();
        // f/l · L0/(2ρ) · (T_H² − T_L²) with the exact annulus
        let expect = 1.5394e-2 / 10e-6 * 2.44e-8 / 2e-5 * (3.24 - 0.01);
        assert_relative_eq!(q_n, expect, max_relative = 1e-4);
        assert!((w_per_m2_to_mw_per_cm2(q_n) - 0.6).abs() / 0.6 < 0.02);
        let q_sc = via_flux_superconducting(&v, 1.8, 0.1).unwrap();
        assert_relative_eq!(q_sc, q_n * 0.01, max_relative = 1e-15);
        assert_eq!(budget_check(q_sc, DEFAULT_TARGET_FLUX).verdict, Verdict::Pass);
        assert_eq!(via_flux_normal(&v, 0.5, 0.5).unwrap(), 0.0);
        let unsuppressed = ViaSpec {
            sc_suppression: 1.0,
            ..v.clone()
        };
        assert_eq!(via_flux_superconducting(&unsuppressed, 1.8, 0.1).unwrap(), q_n);
    }

    #[test]
    fn doubling_pitch_quarters_flux() {
        let v = ViaSpec::close_to_qubit_array();
        let wide = ViaSpec {
            pitch: 2.0 * v.pitch,
            ..v.clone()
        };
        let r = via_flux_normal(&wide, 1.8, 0.1).unwrap() / via_flux_normal(&v, 1.8, 0.1).unwrap();
        assert_relative_eq!(r, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn via_errors() {
        let v = ViaSpec::close_to_qubit_array();
        assert_eq!(
            via_flux_superconducting(&v, 13.0, 0.1),
            Err(BudgetError::AboveTc {
                t_hot: 13.0,
                t_c: 12.0
            })
        );
        assert!(via_flux_normal(&v, 0.1, 1.8).is_err());
        let thick = ViaSpec {
            shell_thickness: 0.5e-6,
            ..v.clone()
        };
        assert!(matches!(thick.validate(), Err(BudgetError::ViaGeometry(_))));
        let dense = ViaSpec {
            pitch: 0.9e-6,
            ..v
        };
        assert!(dense.validate().is_err());
    }

    #[test]
    fn substrate_and_epoxy_impedances() {
        let z_si = impedance_of_layer(750e-6, 1620.0).unwrap();
        assert_relative_eq!(z_si, 4.63e-7, max_relative = 1e-3);
        assert_eq!(impedance_of_layer(1.0, 1.0).unwrap(), 1.0);
        assert!(impedance_of_layer(0.0, 1.0).is_err());

        let stack = ImpedanceStack::new(vec![
            ("silver epoxy".into(), 0.004),
            ("rest".into(), 0.046),
        ])
        .unwrap();
        assert_relative_eq!(stack.total(), 0.05, max_relative = 1e-15);
        let shares = stack.classify(NEGLIGIBLE_FRACTION);
        assert_relative_eq!(shares[0].fraction, 0.08, max_relative = 1e-12);
        assert!(shares[0].negligible);
        assert!(!shares[1].negligible);
    }

    #[test]
    fn bond_wires() {
        let w = BondWireSpec::sample_wires();
        // λ = T³ W/(m·K): ∫_0.1^1 = (1 − 1e-4)/4
        let expect = 4.0 * PI * (12.5e-6f64).powi(2) / 7.5e-3 * (1.0 - 1e-4) / 4.0;
        let p = bond_wire_power(&w, 0.1, 1.0).unwrap();
        assert_relative_eq!(p, expect, max_relative = 1e-9);
        assert!(p > 0.05e-6 && p < 0.2e-6);
        assert_eq!(bond_wire_power(&w, 0.4, 0.4).unwrap(), 0.0);

        let normal = BondWireSpec {
            table: tables::al_1200_normal(),
            ..w
        };
        let p_hot = bond_wire_power(&normal, 1.0, 2.9).unwrap();
        assert!(p_hot > 6e-6 && p_hot < 24e-6, "{p_hot}");
    }

    #[test]
    fn lateral_bound_scaling() {
        let si = tables::silicon();
        assert_eq!(lateral_gradient_bound(7e-3, 2.6e-6, &si, 0.0, 1.5).unwrap(), 0.0);
        let dt = lateral_gradient_bound(7e-3, 2.625e-6, &si, 1e-3, 1.5).unwrap();
        assert_relative_eq!(dt, 1e-3 * 7e-3 / (1620.0 * 2.625e-6), max_relative = 1e-12);
        let doubled = BulkConductivityTable::new(
            "2Si",
            si.knots().iter().map(|&(t, l)| (t, 2.0 * l)).collect(),
        )
        .unwrap();
        let half = lateral_gradient_bound(7e-3, 2.625e-6, &doubled, 1e-3, 1.5).unwrap();
        assert_relative_eq!(half, dt / 2.0, max_relative = 1e-12);
        assert!(lateral_worst_case().len() >= 3);
    }

    #[test]
    fn checks_against_measured_fluxes() {
        let c = budget_check(8.0, 10.0);
        assert_eq!(c.verdict, Verdict::Pass);
        assert_relative_eq!(c.margin, 1.25, max_relative = 1e-15);
        let refs = reference_fluxes();
        let a = |t: f64| {
            refs.iter()
                .find(|r| r.sample == "A" && r.t == t)
                .unwrap()
                .mean_w_per_m2()
        };
        assert_eq!(budget_check(a(1.5), DEFAULT_TARGET_FLUX).verdict, Verdict::Pass);
        let hot = budget_check(a(1.8), DEFAULT_TARGET_FLUX);
        assert_eq!(hot.verdict, Verdict::Fail);
        assert!((hot.margin - 0.59).abs() < 0.005);
        assert!(refs.iter().any(|r| r.std_mw_per_cm2.is_none()));
    }

    #[test]
    fn scenario_roundtrip_and_report() {
        let json = r#"{
            "schema": 1,
            "via_spec": {"outer_diameter": 1e-6, "shell_thickness": 2e-8, "pitch": 2e-6,
                         "length": 1e-5, "rho_n": 1e-5, "t_c": 12.0, "t_hot": 1.8, "t_cold": 0.1},
            "impedance_elements": [{"label": "epoxy", "z": 0.004}, {"label": "dbr", "z": 0.046}],
            "bond_wires": [{"label": "sc", "count": 4, "diameter": 25e-6, "length": 7.5e-3,
                            "table": "al_1pct_si", "t_lo": 0.1, "t_hi": 1.0}]
        }"#;
        let s = BudgetScenario::from_json(json).unwrap();
        s.validate().unwrap();
        let r = evaluate_scenario(&s);
        assert!(!r.flagged);
        let via = r.via.unwrap();
        assert!((via.q_normal_mw_per_cm2 - 0.6).abs() < 0.012);
        assert!((via.q_sc_uw_per_cm2.unwrap() - 6.0).abs() < 0.12);
        assert!(r.impedance.unwrap().elements[0].negligible);

        let empty = evaluate_scenario(&BudgetScenario::from_json("{}").unwrap());
        assert!(empty.via.is_none() && empty.bond_wires.is_empty() && !empty.flagged);

        let hot = json.replace("\"t_hot\": 1.8", "\"t_hot\": 13.0");
        let r = evaluate_scenario(&BudgetScenario::from_json(&hot).unwrap());
        assert!(r.flagged);
        assert!(r.via.unwrap().error.unwrap().contains("critical"));

        assert!(BudgetScenario::from_json(r#"{"schema": 2}"#).is_err());
        assert!(BudgetScenario::from_json(r#"{"bogus": 1}"#).is_err());
    }

    proptest! {
        #[test]
        fn via_flux_is_quadratic(t_l in 0.0f64..2.0, dt in 0.0f64..3.0, a in 0.1f64..3.0) {
            let v = ViaSpec { t_c: 1e3, ..ViaSpec::close_to_qubit_array() };
            let q = via_flux_normal(&v, t_l + dt, t_l).unwrap();
            let qa = via_flux_normal(&v, a * (t_l + dt), a * t_l).unwrap();
            prop_assert!((qa - a * a * q).abs() <= 1e-12 * qa.abs().max(1e-300));
        }

        #[test]
        fn impedance_total_is_permutation_invariant(
            zs in proptest::collection::vec(0.0f64..1.0, 1..10),
            seed in any::<u64>(),
        ) {
            let mut stack = ImpedanceStack::default();
            for (i, &z) in zs.iter().enumerate() {
                stack.push(format!("e{i}"), z);
            }
            let mut shuffled = stack.clone();
            let n = shuffled.elements.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.elements.swap(i, (s >> 33) as usize % (i + 1));
            }
            let total = stack.total();
            prop_assert!((shuffled.total() - total).abs() <= 1e-12 * total.max(1e-300));
            let (left, right) = stack.elements.split_at(n / 2);
            let sum = |e: &[ImpedanceElement]| e.iter().map(|x| x.z).sum::<f64>();
            prop_assert!((sum(left) + sum(right) - total).abs() <= 1e-12 * total.max(1e-300));
        }
    }
}
