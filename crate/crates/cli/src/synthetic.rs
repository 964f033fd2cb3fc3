//! `gen-synthetic`: heater sweeps generated from a known I(T)/L.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args as ClapArgs, ValueEnum};
use cryodbr::analysis::synthetic::{OutlierInjection, SyntheticConfig, TruthModel};
use cryodbr::io::{write_measurements, Metadata};
use serde_json::json;

use crate::output::{file_label, read_text, write_json, write_text, Provenance};
use crate::{CliError, Status};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Truth {
    /// I/L = 10 W/m²·(T/1 K)⁴.
    Quartic,
    /// Exponents 2, 3.5 and 4.5 with breaks at 0.6 K and 1.1 K.
    ThreeRegime,
}

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Output directory (measurements.csv, metadata.json, truth.json).
    #[arg(long)]
    out: PathBuf,
    /// Full generator configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    truth: Option<Truth>,
    /// Relative Gaussian noise on every resistance reading.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hot-sensor fault on the tail of a sweep, `SETPOINT:COUNT:SHIFT`.
    #[arg(long, value_name = "SETPOINT:COUNT:SHIFT")]
    outliers: Vec<String>,
    #[arg(long, default_value = "synthetic")]
    sample_id: String,
}

fn parse_outlier(text: &str) -> anyhow::Result<OutlierInjection> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("outlier spec `{text}` must be SETPOINT:COUNT:SHIFT");
    }
    Ok(OutlierInjection {
        setpoint: parts[0].parse().with_context(|| format!("bad setpoint in `{text}`"))?,
        count: parts[1].parse().with_context(|| format!("bad count in `{text}`"))?,
        hot_shift: parts[2].parse().with_context(|| format!("bad shift in `{text}`"))?,
    })
}

pub fn run(args: Args) -> Result<Status, CliError> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str::<SyntheticConfig>(&read_text(p)?)
            .with_context(|| file_label(p))?,
        None => SyntheticConfig::default(),
    };
    if let Some(t) = args.truth {
        cfg.truth = match t {
            Truth::Quartic => TruthModel::quartic(),
            Truth::ThreeRegime => TruthModel::three_regime(),
        };
    }
    if let Some(n) = args.noise {
        cfg.reading_noise = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    for o in &args.outliers {
        cfg.outliers.push(parse_outlier(o)?);
    }
    let data = cfg.generate().context("invalid generator configuration")?;
    let prov = Provenance::new("gen-synthetic", serde_json::to_value(&cfg).expect("config"));

    let mut csv = prov.csv_header();
    csv.push_str(&write_measurements(&data.sequences));
    write_text(&args.out.join("measurements.csv"), &csv)?;

    let meta = Metadata {
        schema: cryodbr::io::SCHEMA_VERSION,
        area_m2: cfg.area,
        thickness_m: cfg.thickness,
        sample_id: args.sample_id.clone(),
        exclusions: Vec::new(),
        mxc_calibration: Some(data.reference.clone()),
    };
    write_json(
        &args.out.join("metadata.json"),
        &serde_json::to_value(&meta).expect("metadata"),
    )?;

    let truth: Vec<_> = data
        .truth
        .iter()
        .map(|(setpoint, pts)| {
            json!({
                "setpoint_K": setpoint,
                "points": pts.iter().map(|p| json!({
                    "P_W": p.power,
                    "T_H_K": p.t_hot,
                    "T_L_K": p.t_cold,
                    "I_over_L_at_T_H_W_per_m2": cfg.truth.eval(p.t_hot),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    write_json(
        &args.out.join("truth.json"),
        &prov.wrap(&json!({ "truth": cfg.truth, "sweeps": truth })),
    )?;
    Ok(Status::Ok)
}
