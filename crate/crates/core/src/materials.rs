//! Material registry: acoustic properties for the transfer-matrix model and
//! tabulated bulk thermal conductivities for the budget estimates.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("material `{material}` has no {polarization} sound speed")]
    MissingPolarizationSpeed {
        material: String,
        polarization: Polarization,
    },
    #[error("invalid material `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("temperature {t} K outside table `{table}` range [{min}, {max}] K")]
    OutOfRange {
        table: String,
        t: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid conductivity table `{table}`: {reason}")]
    InvalidTable { table: String, reason: String },
    #[error("unknown material `{0}`")]
    Unknown(String),
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Transverse,
    Longitudinal,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::Transverse => f.write_str("transverse"),
            Polarization::Longitudinal => f.write_str("longitudinal"),
        }
    }
}

/// Isotropic elastic medium. Impedance is always derived from density and
/// speed, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// kg/m³
    pub density: f64,
    /// Transverse sound speed, m/s.
    pub v_trans: f64,
    /// Longitudinal sound speed, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_long: Option<f64>,
    /// Debye angular frequency, rad/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debye_freq: Option<f64>,
}

impl Material {
    pub fn new(name: impl Into<String>, density: f64, v_trans: f64) -> Result<Self, MaterialError> {
        let m = Material {
            name: name.into(),
            density,
            v_trans,
            v_long: None,
            debye_freq: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_longitudinal(mut self, v_long: f64) -> Result<Self, MaterialError> {
        self.v_long = Some(v_long);
        self.validate()?;
        Ok(self)
    }

    pub fn with_debye_freq(mut self, omega_d: f64) -> Result<Self, MaterialError> {
        self.debye_freq = Some(omega_d);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let bad = |reason: &str| MaterialError::Invalid {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(bad("density must be positive"));
        }
        if !(self.v_trans.is_finite() && self.v_trans > 0.0) {
            return Err(bad("transverse speed must be positive"));
        }
        if let Some(v) = self.v_long {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad("longitudinal speed must be positive"));
            }
        }
        if let Some(w) = self.debye_freq {
            if !(w.is_finite() && w > 0.0) {
                return Err(bad("Debye frequency must be positive"));
            }
        }
        Ok(())
    }

    pub fn speed(&self, pol: Polarization) -> Result<f64, MaterialError> {
        match pol {
            Polarization::Transverse => Ok(self.v_trans),
            Polarization::Longitudinal => {
                self.v_long
                    .ok_or_else(|| MaterialError::MissingPolarizationSpeed {
                        material: self.name.clone(),
                        polarization: pol,
                    })
            }
        }
    }

    /// Acoustic impedance `Z = density * speed`, kg/(m²·s).
    pub fn impedance(&self, pol: Polarization) -> Result<f64, MaterialError> {
        Ok(self.density * self.speed(pol)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct MaterialRecord {
    density: f64,
    v_trans: f64,
    #[serde(default)]
    v_long: Option<f64>,
    #[serde(default)]
    debye_freq: Option<f64>,
}

/// Immutable name → material map.
#[derive(Debug, Clone, Default)]
pub struct MaterialRegistry {
    materials: BTreeMap<String, Material>,
}

const BUILTIN_MATERIALS: &str = include_str!("../data/materials.json");

impl MaterialRegistry {
    /// Registry with the tabulated DBR materials (SiO2, Ta, W, Ir; transverse
    /// data only) plus a silicon substrate entry.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_MATERIALS).expect("bundled materials.json is valid")
    }

    /// Parses `{name: {density, v_trans, v_long?, debye_freq?}}`.
    pub fn from_json(text: &str) -> Result<Self, MaterialError> {
        let raw: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| MaterialError::Parse(e.to_string()))?;
        let mut materials = BTreeMap::new();
        for (name, value) in raw {
            // keys starting with '_' carry provenance notes
            if name.starts_with('_') {
                continue;
            }
            let rec: MaterialRecord = serde_json::from_value(value)
                .map_err(|e| MaterialError::Parse(format!("material `{name}`: {e}")))?;
            let m = Material {
                name: name.clone(),
                density: rec.density,
                v_trans: rec.v_trans,
                v_long: rec.v_long,
                debye_freq: rec.debye_freq,
            };
            m.validate()?;
            materials.insert(name, m);
        }
        Ok(MaterialRegistry { materials })
    }

    pub fn from_path(path: &Path) -> Result<Self, MaterialError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MaterialError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Entries from `other` replace entries of the same name.
    pub fn merged(mut self, other: MaterialRegistry) -> Self {
        self.materials.extend(other.materials);
        self
    }

    pub fn get(&self, name: &str) -> Result<&Material, MaterialError> {
        self.materials
            .get(name)
            .ok_or_else(|| MaterialError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }
}

/// λ(T) table interpolated piecewise-linearly in log-log space.
///
/// Evaluation is allowed down to half the first knot temperature and up to
/// twice the last one, continuing the end-segment power laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkConductivityTable {
    pub material_name: String,
    /// (T in K, λ in W/(m·K)), strictly increasing in T.
    knots: Vec<(f64, f64)>,
}

impl BulkConductivityTable {
    pub fn new(
        material_name: impl Into<String>,
        knots: Vec<(f64, f64)>,
    ) -> Result<Self, MaterialError> {
        let material_name = material_name.into();
        let bad = |reason: String| MaterialError::InvalidTable {
            table: material_name.clone(),
            reason,
        };
        if knots.is_empty() {
            return Err(bad("no knots".into()));
        }
        for (i, &(t, l)) in knots.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(bad(format!("knot {i}: temperature must be positive")));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(bad(format!("knot {i}: conductivity must be positive")));
            }
            if i > 0 && t <= knots[i - 1].0 {
                return Err(bad(format!("knot {i}: temperatures must strictly increase")));
            }
        }
        Ok(BulkConductivityTable {
            material_name,
            knots,
        })
    }

    /// Parses CSV with header `T_K,lambda_W_per_mK`. Lines starting with `#`
    /// are comments.
    pub fn from_csv(material_name: &str, text: &str) -> Result<Self, MaterialError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| MaterialError::Parse(e.to_string()))?
            .clone();
        let t_col = headers.iter().position(|h| h == "T_K");
        let l_col = headers.iter().position(|h| h == "lambda_W_per_mK");
        let (t_col, l_col) = match (t_col, l_col) {
            (Some(a), Some(b)) => (a, b),
            (None, _) => return Err(MaterialError::Parse("missing header column `T_K`".into())),
            (_, None) => {
                return Err(MaterialError::Parse(
                    "missing header column `lambda_W_per_mK`".into(),
                ))
            }
        };
        let mut knots = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| MaterialError::Parse(e.to_string()))?;
            let parse = |col: usize| -> Result<f64, MaterialError> {
                rec.get(col)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| MaterialError::Parse(format!("row {}: {e}", i + 2)))
            };
            knots.push((parse(t_col)?, parse(l_col)?));
        }
        Self::new(material_name, knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].0 / 2.0, self.knots[self.knots.len() - 1].0 * 2.0)
    }

    fn check_range(&self, t: f64) -> Result<(), MaterialError> {
        let (min, max) = self.domain();
        if t.is_finite() && t >= min && t <= max {
            Ok(())
        } else {
            Err(MaterialError::OutOfRange {
                table: self.material_name.clone(),
                t,
                min,
                max,
            })
        }
    }

    /// Power-law segment `(coefficient, exponent)` such that λ = c·T^n
    /// on the segment containing `t` (or the end segment beyond the knots).
    fn segment(&self, t: f64) -> (f64, f64) {
        let k = &self.knots;
        if k.len() == 1 {
            return (k[0].1, 0.0);
        }
        let idx = match k.iter().position(|&(kt, _)| kt > t) {
            Some(0) => 0,
            Some(i) => (i - 1).min(k.len() - 2),
            None => k.len() - 2,
        };
        let (t0, l0) = k[idx];
        let (t1, l1) = k[idx + 1];
        let n = (l1 / l0).ln() / (t1 / t0).ln();
        (l0 / t0.powf(n), n)
    }

    /// λ(T) in W/(m·K).
    pub fn lambda(&self, t: f64) -> Result<f64, MaterialError> {
        self.check_range(t)?;
        let (c, n) = self.segment(t);
        Ok(c * t.powf(n))
    }

    /// ∫ λ dT over `[t_lo, t_hi]`, W/m, integrating each power-law segment in
    /// closed form.
    pub fn integrate(&self, t_lo: f64, t_hi: f64) -> Result<f64, MaterialError> {
        self.check_range(t_lo)?;
        self.check_range(t_hi)?;
        if t_hi < t_lo {
            return Ok(-self.integrate(t_hi, t_lo)?);
        }
        let mut cuts = vec![t_lo];
        cuts.extend(
            self.knots
                .iter()
                .map(|&(t, _)| t)
                .filter(|&t| t > t_lo && t < t_hi),
        );
        cuts.push(t_hi);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let (c, n) = self.segment(0.5 * (a + b));
            total += power_law_integral(c, n, a, b);
        }
        Ok(total)
    }
}

/// ∫_a^b c·T^n dT.
fn power_law_integral(c: f64, n: f64, a: f64, b: f64) -> f64 {
    if (n + 1.0).abs() < 1e-12 {
        c * (b / a).ln()
    } else {
        let m = n + 1.0;
        // a^m (r^m - 1) with r = b/a keeps precision for narrow intervals
        c * a.powf(m) * ((b / a).ln() * m).exp_m1() / m
    }
}

/// Bundled conductivity tables.
pub mod tables {
    use super::BulkConductivityTable;

    /// Al-1%Si bond-wire alloy: 0.001 W/(m·K) at 100 mK and 1 W/(m·K) at 1 K.
    pub fn al_1pct_si() -> BulkConductivityTable {
        BulkConductivityTable::from_csv("Al-1%Si", include_str!("../data/al_1pct_si.csv"))
            .expect("bundled table")
    }

    /// Normal-state Al 1200 estimate between 1 K and 4 K.
    pub fn al_1200_normal() -> BulkConductivityTable {
        BulkConductivityTable::from_csv("Al-1200", include_str!("../data/al_1200.csv"))
            .expect("bundled table")
    }

    /// Crystalline silicon substrate (boundary-scattering regime).
    pub fn silicon() -> BulkConductivityTable {
        BulkConductivityTable::from_csv("Si", include_str!("../data/si.csv")).expect("bundled table")
    }

    pub fn by_name(name: &str) -> Option<BulkConductivityTable> {
        match name {
            "al_1pct_si" | "Al-1%Si" => Some(al_1pct_si()),
            "al_1200" | "Al-1200" => Some(al_1200_normal()),
            "si" | "Si" => Some(silicon()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tabulated_impedances() {
        let reg = MaterialRegistry::builtin();
        let sio2 = reg.get("SiO2").unwrap();
        let z = sio2.impedance(Polarization::Transverse).unwrap();
        assert_relative_eq!(z, 2.41e3 * 3.53e3, max_relative = 1e-15);
        assert!((z / 1e7 - 0.85).abs() < 0.005);
        let ta = reg.get("Ta").unwrap();
        assert_relative_eq!(
            ta.impedance(Polarization::Transverse).unwrap(),
            3.3864e7,
            max_relative = 1e-12
        );
        for (name, z_tab) in [("W", 5.29e7), ("Ir", 6.91e7)] {
            let z = reg.get(name).unwrap().impedance(Polarization::Transverse).unwrap();
            assert!((z - z_tab).abs() / z_tab < 0.001, "{name}: {z}");
        }
        let unit = Material::new("unit", 1.0, 1.0).unwrap();
        assert_eq!(unit.impedance(Polarization::Transverse).unwrap(), 1.0);
    }

    #[test]
    fn missing_longitudinal_speed() {
        let reg = MaterialRegistry::builtin();
        let err = reg
            .get("Ta")
            .unwrap()
            .impedance(Polarization::Longitudinal)
            .unwrap_err();
        assert!(matches!(err, MaterialError::MissingPolarizationSpeed { .. }));
        assert!(reg.get("Si").unwrap().speed(Polarization::Longitudinal).is_ok());
    }

    #[test]
    fn rejects_nonpositive_properties() {
        assert!(Material::new("x", 0.0, 1.0).is_err());
        assert!(Material::new("x", 1.0, -1.0).is_err());
        assert!(Material::new("x", 1.0, 1.0).unwrap().with_longitudinal(0.0).is_err());
        assert!(MaterialRegistry::from_json(r#"{"bad": {"density": -1, "v_trans": 1}}"#).is_err());
    }

    #[test]
    fn json_registry_overrides() {
        let user = MaterialRegistry::from_json(
            r#"{"Ta": {"density": 16600, "v_trans": 2040, "v_long": 4100}}"#,
        )
        .unwrap();
        let reg = MaterialRegistry::builtin().merged(user);
        assert_eq!(reg.get("Ta").unwrap().v_long, Some(4100.0));
        assert!(reg.get("SiO2").is_ok());
        assert!(matches!(reg.get("Nb"), Err(MaterialError::Unknown(_))));
    }

    #[test]
    fn loglog_lambda_lookup() {
        let al = tables::al_1pct_si();
        assert_relative_eq!(al.lambda(0.1).unwrap(), 0.001, max_relative = 1e-12);
        assert_relative_eq!(al.lambda(1.0).unwrap(), 1.0, max_relative = 1e-12);
        let t = BulkConductivityTable::new("lin", vec![(1.0, 1.0), (10.0, 10.0)]).unwrap();
        assert_relative_eq!(t.lambda(3.1623).unwrap(), 3.1623, max_relative = 1e-12);
        // end-slope extrapolation within the margin, error beyond it
        assert_relative_eq!(t.lambda(20.0).unwrap(), 20.0, max_relative = 1e-12);
        assert!(matches!(t.lambda(20.1), Err(MaterialError::OutOfRange { .. })));
        assert!(t.lambda(0.49).is_err());
    }

    #[test]
    fn integrals() {
        let al = tables::al_1pct_si();
        let exact = (1.0 - 1e-4) / 4.0;
        assert_relative_eq!(al.integrate(0.1, 1.0).unwrap(), exact, max_relative = 1e-12);
        assert_relative_eq!(exact, 0.249_975, max_relative = 1e-12);

        let flat = BulkConductivityTable::new("flat", vec![(1.0, 2.0), (3.0, 2.0)]).unwrap();
        assert_relative_eq!(flat.integrate(1.0, 3.0).unwrap(), 4.0, max_relative = 1e-14);

        // narrow interval around 1.5 K: midpoint rule with λ(1.5 K) = 1620 W/(m·K)
        let si = tables::silicon();
        assert_relative_eq!(si.lambda(1.5).unwrap(), 1620.0, max_relative = 1e-12);
        let narrow = si.integrate(1.49, 1.51).unwrap();
        assert!((narrow - 0.02 * 1620.0).abs() / 32.4 < 1e-3, "{narrow}");

        assert!(al.integrate(0.01, 1.0).is_err());
        assert_eq!(al.integrate(0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn csv_header_errors() {
        let err = BulkConductivityTable::from_csv("x", "T,lambda\n1,1\n").unwrap_err();
        assert!(err.to_string().contains("T_K"));
        let err = BulkConductivityTable::from_csv("x", "T_K,lambda_W_per_mK\n2,1\n1,1\n");
        assert!(matches!(err, Err(MaterialError::InvalidTable { .. })));
    }
}
