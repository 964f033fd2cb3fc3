//! `analyze`: calibrate, exclude, extract, align and differentiate.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args as ClapArgs, ValueEnum};
use cryodbr::analysis::{
    align_offsets, auto_flag_outliers, calibrate_sequences, extract_heat_integral,
    pairwise_disagreement, CalibratedSequence, ExtractionOptions, HeatIntegralCurve,
    InterpolationSpace,
};
use cryodbr::io::{group_sequences, parse_measurements, write_curve, Metadata};
use cryodbr::units::w_per_m2_to_mw_per_cm2;
use serde::Serialize;
use serde_json::json;

use crate::output::{file_label, read_text, write_json, write_text, Provenance};
use crate::svg::{loglog, Series};
use crate::{CliError, Status};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Space {
    Loglog,
    Linear,
}

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Heater-sweep CSV files (long format).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Metadata sidecar (area, thickness, exclusions, MXC calibration).
    #[arg(long)]
    metadata: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Stop once max |Δ_rel| falls below this.
    #[arg(long, default_value_t = 0.02)]
    threshold: f64,
    #[arg(long, default_value_t = 30)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Space::Loglog)]
    space: Space,
    /// Flag trailing points that disagree with the neighbouring setpoint.
    #[arg(long)]
    auto_flag_outliers: bool,
    /// Relative disagreement above which a point is flagged.
    #[arg(long, default_value_t = 0.1)]
    outlier_tolerance: f64,
    /// Points to drop, `SETPOINT:I,J,...` (in addition to the metadata).
    #[arg(long, value_name = "SETPOINT:INDICES")]
    exclude: Vec<String>,
}

fn parse_exclusion(text: &str) -> anyhow::Result<(f64, Vec<usize>)> {
    let (sp, idx) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("exclusion `{text}` must be SETPOINT:I,J,..."))?;
    let setpoint: f64 = sp.trim().parse().with_context(|| format!("bad setpoint in `{text}`"))?;
    let indices = idx
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad index in `{text}`")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((setpoint, indices))
}

#[derive(Serialize)]
struct SetpointReport {
    #[serde(rename = "setpoint_K")]
    setpoint: f64,
    #[serde(rename = "anchor_temperature_K")]
    anchor_temperature: f64,
    converged: bool,
    n_iterations: usize,
    /// Indices into the input sweep of the points that entered the fit.
    point_indices: Vec<usize>,
    excluded: Vec<usize>,
    #[serde(rename = "offset_W_per_m2")]
    offset: Option<f64>,
    iterations: Vec<cryodbr::analysis::IterationDeviation>,
    extrapolated_readings: usize,
}

#[derive(Serialize)]
struct FlaggedOutliers {
    #[serde(rename = "setpoint_K")]
    setpoint: f64,
    indices: Vec<usize>,
}

fn setpoint_tag(t: f64) -> String {
    format!("{t}K")
}

pub fn run(args: Args) -> Result<Status, CliError> {
    if !(args.threshold >= 0.0 && args.threshold.is_finite()) {
        return Err(anyhow!("--threshold must be non-negative").into());
    }
    if args.max_iter == 0 {
        return Err(anyhow!("--max-iter must be at least 1").into());
    }
    if !(args.outlier_tolerance > 0.0) {
        return Err(anyhow!("--outlier-tolerance must be positive").into());
    }
    let meta_label = file_label(&args.metadata);
    let meta = Metadata::from_json(&read_text(&args.metadata)?, &meta_label)
        .map_err(anyhow::Error::from)?;
    let mut rows = Vec::new();
    for path in &args.inputs {
        let label = file_label(path);
        rows.extend(parse_measurements(&read_text(path)?, &label).map_err(anyhow::Error::from)?);
    }
    let input_label = args.inputs.iter().map(|p| file_label(p)).collect::<Vec<_>>().join("+");
    let seqs = group_sequences(&rows, &meta, &input_label).map_err(anyhow::Error::from)?;

    let mut exclusions: Vec<(f64, Vec<usize>)> = seqs
        .iter()
        .map(|s| (s.setpoint, meta.exclusions_for(s.setpoint)))
        .collect();
    for e in &args.exclude {
        let (sp, idx) = parse_exclusion(e)?;
        let slot = exclusions
            .iter_mut()
            .find(|(s, _)| *s == sp)
            .ok_or_else(|| anyhow!("--exclude names setpoint {sp} K, which is not in the data"))?;
        slot.1.extend(idx);
        slot.1.sort_unstable();
        slot.1.dedup();
    }

    let opts = ExtractionOptions {
        threshold: args.threshold,
        max_iter: args.max_iter,
        space: match args.space {
            Space::Loglog => InterpolationSpace::LogLog,
            Space::Linear => InterpolationSpace::Linear,
        },
        ..ExtractionOptions::default()
    };
    let prov = Provenance::new(
        "analyze",
        json!({
            "inputs": args.inputs.iter().map(|p| file_label(p)).collect::<Vec<_>>(),
            "metadata": meta_label,
            "sample_id": meta.sample_id,
            "area_m2": meta.area_m2,
            "thickness_m": meta.thickness_m,
            "extraction": opts,
            "exclusions": exclusions.iter().filter(|(_, i)| !i.is_empty())
                .map(|(s, i)| json!({"setpoint_K": s, "indices": i})).collect::<Vec<_>>(),
            "auto_flag_outliers": args.auto_flag_outliers,
            "outlier_tolerance": args.outlier_tolerance,
        }),
    );

    let calibrated = calibrate_sequences(&seqs, meta.mxc_calibration.as_ref())
        .map_err(|e| anyhow!("calibration failed: {e}"))?;
    // kept[k][j] = input index of point j after exclusion
    let mut kept: Vec<Vec<usize>> = Vec::new();
    let mut cleaned: Vec<CalibratedSequence> = Vec::new();
    for (seq, (_, excl)) in calibrated.sequences.iter().zip(&exclusions) {
        cleaned.push(
            seq.without(excl)
                .with_context(|| format!("setpoint {} K", seq.setpoint))?,
        );
        kept.push((0..seq.points.len()).filter(|i| !excl.contains(i)).collect());
    }

    let results = extract_heat_integral(&cleaned, &opts)
        .map_err(|e| CliError::Computation(anyhow!(e)))?;
    if results.is_empty() {
        return Err(anyhow!("no sweep has powered points").into());
    }
    let position = |setpoint: f64| {
        cleaned
            .iter()
            .position(|s| s.setpoint == setpoint)
            .expect("result of an input sweep")
    };

    let mut notes = Vec::new();
    let aligned: Option<Vec<HeatIntegralCurve>> = match align_offsets(&results) {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("alignment skipped: {e}"));
            None
        }
    };
    let flagged: Vec<FlaggedOutliers> = if args.auto_flag_outliers {
        auto_flag_outliers(&cleaned, &results, args.outlier_tolerance)
            .into_iter()
            .map(|(setpoint, idx)| {
                let k = position(setpoint);
                FlaggedOutliers {
                    setpoint,
                    indices: idx.iter().map(|&j| kept[k][j]).collect(),
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    for f in &flagged {
        notes.push(format!(
            "setpoint {} K: outlier candidates {:?}; rerun with --exclude {}:{}",
            f.setpoint,
            f.indices,
            f.setpoint,
            f.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        ));
    }

    let mut reports = Vec::new();
    let mut plot_rows = String::from(
        "setpoint_K,T_K,I_over_L_W_per_m2,aligned_W_per_m2,aligned_mW_per_cm2\n",
    );
    let mut lambda_rows = String::from("setpoint_K,T_K,lambda_eff_W_per_mK\n");
    let mut series = Vec::new();
    for (n, r) in results.iter().enumerate() {
        let k = position(r.setpoint);
        if !r.report.converged {
            notes.push(format!(
                "setpoint {} K not converged after {} iterations (max |Δ_rel| = {:e})",
                r.setpoint,
                r.report.n_iterations,
                r.report.last().max_rel()
            ));
        }
        let curve = aligned.as_ref().map_or(&r.curve, |a| &a[n]);
        let mut text = prov.csv_header();
        text.push_str(&write_curve(curve));
        write_text(&args.out.join(format!("curve_{}.csv", setpoint_tag(r.setpoint))), &text)?;

        let mut points = Vec::new();
        for &(t, i) in curve.knots() {
            let v = i + curve.offset();
            plot_rows.push_str(&format!(
                "{},{t:e},{i:e},{v:e},{:e}\n",
                r.setpoint,
                w_per_m2_to_mw_per_cm2(v)
            ));
            lambda_rows.push_str(&format!(
                "{},{t:e},{:e}\n",
                r.setpoint,
                curve.lambda_eff(t, meta.thickness_m)
            ));
            points.push((t, v));
        }
        series.push(Series {
            label: format!("T_MXC = {} K", r.setpoint),
            points,
        });
        let excluded = exclusions[k].1.clone();
        reports.push(SetpointReport {
            setpoint: r.setpoint,
            anchor_temperature: r.anchor_temperature,
            converged: r.report.converged,
            n_iterations: r.report.n_iterations,
            point_indices: r.report.point_indices.iter().map(|&j| kept[k][j]).collect(),
            excluded,
            offset: aligned.as_ref().map(|a| a[n].offset()),
            iterations: r.report.iterations.clone(),
            extrapolated_readings: cleaned[k].points.iter().filter(|p| p.extrapolated).count(),
        });
    }
    let mut plot_csv = prov.csv_header();
    plot_csv.push_str(&plot_rows);
    write_text(&args.out.join("curves.csv"), &plot_csv)?;
    let mut lambda_csv = prov.csv_header();
    lambda_csv.push_str(&lambda_rows);
    write_text(&args.out.join("lambda_eff.csv"), &lambda_csv)?;
    write_text(
        &args.out.join("curves.svg"),
        &loglog(
            &format!("I(T)/L, sample {}", meta.sample_id),
            "T (K)",
            "I/L (W/m²)",
            &series,
        ),
    )?;

    let converged_all = results.iter().all(|r| r.report.converged);
    let disagreement = aligned.as_ref().map(|a| pairwise_disagreement(a, 50));
    write_json(
        &args.out.join("report.json"),
        &prov.wrap(&json!({
            "converged_all": converged_all,
            "pairwise_disagreement": disagreement,
            "flagged_outliers": flagged,
            "setpoints": reports,
            "notes": notes,
        })),
    )?;
    if notes.is_empty() {
        Ok(Status::Ok)
    } else {
        Ok(Status::Flagged(notes))
    }
}
