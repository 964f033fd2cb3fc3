//! Versioned file formats: heater-sweep CSV, its metadata sidecar and the
//! extracted-curve CSV.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    HeatIntegralCurve, MeasurementPoint, MeasurementSequence, ReadingUnit, SensorCalibration,
};

pub const SCHEMA_VERSION: u32 = 1;

pub(crate) fn schema_v1() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Error, PartialEq)]
pub enum IoError {
    #[error("{file}: missing header column `{column}`")]
    MissingColumn { file: String, column: &'static str },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: unsupported schema {found} (expected {SCHEMA_VERSION})")]
    Schema { file: String, found: u32 },
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
}

/// Columns of the heater-sweep CSV.
pub const MEASUREMENT_COLUMNS: [&str; 6] = [
    "T_mxc_set_K",
    "P_W",
    "reading_H",
    "reading_L",
    "reading_MXC",
    "unit",
];

/// One row of a heater-sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRow {
    pub setpoint: f64,
    pub point: MeasurementPoint,
    pub unit: ReadingUnit,
    /// 1-based line in the source file.
    pub line: u64,
}

/// Parses a heater-sweep CSV in long format (any number of setpoints, rows
/// in sweep order). Lines starting with `#` are comments.
pub fn parse_measurements(text: &str, file: &str) -> Result<Vec<MeasurementRow>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Parse {
            file: file.into(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(MEASUREMENT_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(IoError::MissingColumn {
                file: file.into(),
                column: name,
            })?;
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::Parse {
            file: file.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| IoError::Parse {
            file: file.into(),
            line,
            message,
        };
        let num = |k: usize| -> Result<f64, IoError> {
            let raw = rec.get(cols[k]).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| err(format!("`{}` is not a number in column {}", raw, MEASUREMENT_COLUMNS[k])))
        };
        let unit = match rec.get(cols[5]).unwrap_or("").to_ascii_lowercase().as_str() {
            "ohm" => ReadingUnit::Ohm,
            "k" => ReadingUnit::K,
            other => return Err(err(format!("unit must be `ohm` or `K`, got `{other}`"))),
        };
        rows.push(MeasurementRow {
            setpoint: num(0)?,
            point: MeasurementPoint {
                power: num(1)?,
                reading_hot: num(2)?,
                reading_cold: num(3)?,
                reading_mxc: num(4)?,
            },
            unit,
            line,
        });
    }
    if rows.is_empty() {
        return Err(IoError::Invalid {
            file: file.into(),
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Points removed from one sweep before extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exclusion {
    #[serde(rename = "setpoint_K")]
    pub setpoint: f64,
    /// Row indices within that sweep, 0 being its P = 0 point.
    pub indices: Vec<usize>,
}

/// Sidecar describing the sample behind a heater-sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub area_m2: f64,
    pub thickness_m: f64,
    #[serde(default)]
    pub sample_id: String,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
    /// (R in Ω, T in K) of the mixing-chamber sensor; needed for `ohm` data.
    #[serde(default)]
    pub mxc_calibration: Option<SensorCalibration>,
}

impl Metadata {
    pub fn from_json(text: &str, file: &str) -> Result<Self, IoError> {
        let meta: Metadata = serde_json::from_str(text).map_err(|e| IoError::Parse {
            file: file.into(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        if meta.schema != SCHEMA_VERSION {
            return Err(IoError::Schema {
                file: file.into(),
                found: meta.schema,
            });
        }
        if !(meta.area_m2 > 0.0 && meta.thickness_m > 0.0) {
            return Err(IoError::Invalid {
                file: file.into(),
                message: "area_m2 and thickness_m must be positive".into(),
            });
        }
        Ok(meta)
    }

    /// Exclusions keyed by setpoint bits, merged and sorted.
    pub fn exclusions_for(&self, setpoint: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .exclusions
            .iter()
            .filter(|e| e.setpoint == setpoint)
            .flat_map(|e| e.indices.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Groups rows by setpoint (ascending), keeping the row order within each
/// sweep.
pub fn group_sequences(
    rows: &[MeasurementRow],
    meta: &Metadata,
    file: &str,
) -> Result<Vec<MeasurementSequence>, IoError> {
    let mut groups: BTreeMap<u64, Vec<&MeasurementRow>> = BTreeMap::new();
    for r in rows {
        if !(r.setpoint.is_finite() && r.setpoint > 0.0) {
            return Err(IoError::Parse {
                file: file.into(),
                line: r.line,
                message: format!("setpoint must be positive, got {}", r.setpoint),
            });
        }
        // positive floats order like their bit patterns
        groups.entry(r.setpoint.to_bits()).or_default().push(r);
    }
    let mut seqs = Vec::with_capacity(groups.len());
    for rows in groups.values() {
        let unit = rows[0].unit;
        if let Some(r) = rows.iter().find(|r| r.unit != unit) {
            return Err(IoError::Parse {
                file: file.into(),
                line: r.line,
                message: "unit changes within a sweep".into(),
            });
        }
        let seq = MeasurementSequence {
            setpoint: rows[0].setpoint,
            points: rows.iter().map(|r| r.point).collect(),
            area: meta.area_m2,
            thickness: meta.thickness_m,
            unit,
        };
        seq.validate().map_err(|e| {
            let line = match &e {
                crate::analysis::SequenceError::PowerDecreasing { index, .. }
                | crate::analysis::SequenceError::InvalidValue { index, .. } => rows[*index].line,
                _ => rows[0].line,
            };
            IoError::Parse {
                file: file.into(),
                line,
                message: e.to_string(),
            }
        })?;
        seqs.push(seq);
    }
    Ok(seqs)
}

fn unit_label(u: ReadingUnit) -> &'static str {
    match u {
        ReadingUnit::Ohm => "ohm",
        ReadingUnit::K => "K",
    }
}

/// Heater sweeps in long format, without comment lines.
pub fn write_measurements(seqs: &[MeasurementSequence]) -> String {
    let mut out = MEASUREMENT_COLUMNS.join(",");
    out.push('\n');
    for s in seqs {
        for p in &s.points {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{}\n",
                s.setpoint,
                p.power,
                p.reading_hot,
                p.reading_cold,
                p.reading_mxc,
                unit_label(s.unit)
            ));
        }
    }
    out
}

/// Knots of an extracted curve: `T_K,I_over_L_W_per_m2,offset_W_per_m2`.
/// The aligned value is the sum of the last two columns.
pub fn write_curve(curve: &HeatIntegralCurve) -> String {
    let mut out = String::from("T_K,I_over_L_W_per_m2,offset_W_per_m2\n");
    for &(t, i) in curve.knots() {
        out.push_str(&format!("{t:e},{i:e},{:e}\n", curve.offset()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const META: &str = r#"{"schema": 1, "area_m2": 1.2e-5, "thickness_m": 6e-7, "sample_id": "A1",
        "exclusions": [{"setpoint_K": 0.1, "indices": [3, 2]}]}"#;

    #[test]
    fn roundtrip_long_format() {
        let text = "# comment\nT_mxc_set_K,P_W,reading_H,reading_L,reading_MXC,unit\n\
                    0.2,0,0.2,0.2,0.2,K\n0.2,1e-5,0.9,0.3,0.2,K\n\
                    0.1,0,0.1,0.1,0.1,K\n0.1,2e-5,1.0,0.25,0.1,K\n";
        let meta = Metadata::from_json(META, "m.json").unwrap();
        let rows = parse_measurements(text, "a.csv").unwrap();
        assert_eq!(rows[0].line, 3);
        let seqs = group_sequences(&rows, &meta, "a.csv").unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].setpoint, 0.1);
        assert_eq!(seqs[1].points[1].reading_hot, 0.9);
        let again = group_sequences(
            &parse_measurements(&write_measurements(&seqs), "b.csv").unwrap(),
            &meta,
            "b.csv",
        )
        .unwrap();
        assert_eq!(again, seqs);
        assert_eq!(meta.exclusions_for(0.1), vec![2, 3]);
        assert!(meta.exclusions_for(0.2).is_empty());
    }

    #[test]
    fn errors_name_columns_and_lines() {
        assert_eq!(
            parse_measurements("", "e.csv"),
            Err(IoError::MissingColumn {
                file: "e.csv".into(),
                column: "T_mxc_set_K"
            })
        );
        let no_unit = "T_mxc_set_K,P_W,reading_H,reading_L,reading_MXC\n0.1,0,1,1,1\n";
        assert!(parse_measurements(no_unit, "x.csv")
            .unwrap_err()
            .to_string()
            .contains("`unit`"));
        let bad = "T_mxc_set_K,P_W,reading_H,reading_L,reading_MXC,unit\n0.1,0,1,1,1,K\n0.1,abc,1,1,1,K\n";
        match parse_measurements(bad, "x.csv") {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let decreasing = "T_mxc_set_K,P_W,reading_H,reading_L,reading_MXC,unit\n\
                          0.1,0,1,1,1,K\n0.1,2e-5,1,1,1,K\n0.1,1e-5,1,1,1,K\n";
        let meta = Metadata::from_json(META, "m.json").unwrap();
        let rows = parse_measurements(decreasing, "d.csv").unwrap();
        match group_sequences(&rows, &meta, "d.csv") {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Metadata::from_json(r#"{"schema": 2, "area_m2": 1, "thickness_m": 1}"#, "m"),
            Err(IoError::Schema { found: 2, .. })
        ));
    }
}
