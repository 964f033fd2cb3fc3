//! `calibrate-check`: leave-one-out cross validation of sensor calibrations.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args as ClapArgs;
use cryodbr::analysis::{calibrate_sequences, loocv_check, SensorCalibration};
use cryodbr::io::{group_sequences, parse_measurements, Metadata};
use serde_json::{json, Value};

use crate::output::{file_label, print_json, read_text, write_json, Provenance};
use crate::{CliError, Status};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// A calibration as a JSON list of [R_ohm, T_K] pairs.
    #[arg(long, conflicts_with_all = ["metadata", "inputs"])]
    calibration: Option<PathBuf>,
    /// Metadata of resistance-valued sweeps; the hot and cold sensor
    /// calibrations are rebuilt from their P = 0 points.
    #[arg(long, requires = "inputs")]
    metadata: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    /// Largest acceptable interior deviation |ΔT/T|.
    #[arg(long, default_value_t = 0.03)]
    max_deviation: f64,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn check(name: &str, cal: &SensorCalibration, limit: f64) -> anyhow::Result<(Value, f64)> {
    let dev = loocv_check(cal).map_err(|e| anyhow!("{name}: {e}"))?;
    let worst = dev.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
    Ok((
        json!({
            "sensor": name,
            "n_knots": cal.knots().len(),
            "deviations": dev.iter().map(|(i, d)| json!({"index": i, "relative": d})).collect::<Vec<_>>(),
            "max_abs_relative": worst,
            "within_limit": worst < limit,
        }),
        worst,
    ))
}

pub fn run(args: Args) -> Result<Status, CliError> {
    if !(args.max_deviation > 0.0) {
        return Err(anyhow!("--max-deviation must be positive").into());
    }
    let mut sensors: Vec<(String, SensorCalibration)> = Vec::new();
    let source;
    if let Some(p) = &args.calibration {
        let label = file_label(p);
        let cal: SensorCalibration =
            serde_json::from_str(&read_text(p)?).with_context(|| label.clone())?;
        sensors.push(("calibration".into(), cal));
        source = json!({ "calibration": label });
    } else if let Some(m) = &args.metadata {
        let meta_label = file_label(m);
        let meta = Metadata::from_json(&read_text(m)?, &meta_label).map_err(anyhow::Error::from)?;
        let mut rows = Vec::new();
        for p in &args.inputs {
            rows.extend(
                parse_measurements(&read_text(p)?, &file_label(p)).map_err(anyhow::Error::from)?,
            );
        }
        let seqs = group_sequences(&rows, &meta, "inputs").map_err(anyhow::Error::from)?;
        let outcome = calibrate_sequences(&seqs, meta.mxc_calibration.as_ref())
            .map_err(|e| anyhow!("calibration failed: {e}"))?;
        let set = outcome
            .sensors
            .ok_or_else(|| anyhow!("readings are already temperatures; nothing to check"))?;
        if let Some(mxc) = meta.mxc_calibration {
            sensors.push(("mxc".into(), mxc));
        }
        sensors.push(("hot".into(), set.hot));
        sensors.push(("cold".into(), set.cold));
        source = json!({
            "metadata": meta_label,
            "inputs": args.inputs.iter().map(|p| file_label(p)).collect::<Vec<_>>(),
        });
    } else {
        return Err(anyhow!("give --calibration or --metadata with sweep files").into());
    }

    let prov = Provenance::new(
        "calibrate-check",
        json!({ "source": source, "max_deviation": args.max_deviation }),
    );
    let mut items = Vec::new();
    let mut notes = Vec::new();
    for (name, cal) in &sensors {
        let (item, worst) = check(name, cal, args.max_deviation)?;
        if worst >= args.max_deviation {
            notes.push(format!("{name}: LOOCV deviation {worst:.4} exceeds {}", args.max_deviation));
        }
        items.push(item);
    }
    let value = prov.wrap(&json!({ "sensors": items }));
    match &args.out {
        Some(p) => write_json(p, &value)?,
        None => print_json(&value)?,
    }
    if notes.is_empty() {
        Ok(Status::Ok)
    } else {
        Ok(Status::Flagged(notes))
    }
}
