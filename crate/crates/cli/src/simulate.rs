//! `simulate`: one-sided phonon flux of a stack over a temperature list.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args as ClapArgs;
use cryodbr::acoustics::StackConfig;
use cryodbr::budget::reference_fluxes;
use cryodbr::materials::MaterialRegistry;
use cryodbr::thermal::{simulate_curve, GridConfig, SpectralGrid};
use cryodbr::units::{phonon_stefan_boltzmann, w_per_m2_to_mw_per_cm2};
use serde_json::json;

use crate::output::{file_label, parse_list, read_text, write_text, Provenance};
use crate::svg::{loglog, Series};
use crate::{CliError, Status};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Stack description (JSON, thicknesses in nm).
    #[arg(long)]
    stack: PathBuf,
    /// Strictly increasing temperatures in K, comma separated.
    #[arg(long, conflicts_with = "t_range")]
    temps: Option<String>,
    /// Log-spaced temperatures `LO:HI:N`.
    #[arg(long, value_name = "LO:HI:N")]
    t_range: Option<String>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write an SVG plot of the CSV.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Extra materials merged over the built-in registry.
    #[arg(long)]
    materials: Option<PathBuf>,
    /// Quadrature settings (JSON); missing fields keep their defaults.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Double the quadrature density.
    #[arg(long)]
    refine: bool,
    /// Print the measured values of this sample type next to the result.
    #[arg(long)]
    compare_sample: Option<String>,
}

fn temperatures(args: &Args) -> anyhow::Result<Vec<f64>> {
    let temps = match (&args.temps, &args.t_range) {
        (Some(list), None) => parse_list(list)?,
        (None, Some(range)) => {
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(anyhow!("--t-range must be LO:HI:N"));
            }
            let lo: f64 = parts[0].parse().context("bad LO in --t-range")?;
            let hi: f64 = parts[1].parse().context("bad HI in --t-range")?;
            let n: usize = parts[2].parse().context("bad N in --t-range")?;
            if n < 2 || !(lo > 0.0 && hi > lo) {
                return Err(anyhow!("--t-range needs 0 < LO < HI and N >= 2"));
            }
            cryodbr::analysis::synthetic::log_spaced(lo, hi, n)
        }
        _ => return Err(anyhow!("give either --temps or --t-range")),
    };
    if let Some(t) = temps.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(anyhow!("temperatures must be positive, got {t}"));
    }
    if let Some(i) = temps.windows(2).position(|w| w[1] <= w[0]) {
        return Err(anyhow!(
            "temperatures must be strictly increasing ({} then {})",
            temps[i],
            temps[i + 1]
        ));
    }
    Ok(temps)
}

pub fn run(args: Args) -> Result<Status, CliError> {
    let temps = temperatures(&args)?;
    let mut registry = MaterialRegistry::builtin();
    if let Some(p) = &args.materials {
        let extra = MaterialRegistry::from_json(&read_text(p)?)
            .with_context(|| file_label(p))?;
        registry = registry.merged(extra);
    }
    let label = file_label(&args.stack);
    let cfg: StackConfig =
        serde_json::from_str(&read_text(&args.stack)?).with_context(|| label.clone())?;
    let stack = cfg.build(&registry).with_context(|| label.clone())?;
    let mut grid_cfg = match &args.grid {
        Some(p) => serde_json::from_str::<GridConfig>(&read_text(p)?)
            .with_context(|| file_label(p))?,
        None => GridConfig::default(),
    };
    if args.refine {
        grid_cfg = grid_cfg.refined();
    }
    let stack_id = cfg.stack_id.clone().unwrap_or_else(|| label.clone());
    let prov = Provenance::new(
        "simulate",
        json!({
            "stack": cfg,
            "temperatures_K": temps,
            "grid": grid_cfg,
            "materials": args.materials.as_ref().map(|p| file_label(p)),
        }),
    );

    let t_min = temps[0];
    let t_max = temps[temps.len() - 1];
    let grid = SpectralGrid::for_stack(&stack, t_min, t_max, &grid_cfg)
        .map_err(|e| CliError::Computation(anyhow!(e)))?;
    let curve = simulate_curve(&stack, &stack_id, &temps, &grid)
        .map_err(|e| CliError::Computation(anyhow!(e)))?;

    // full transmission for the same branches and emitter
    let mut sigma = 0.0;
    for (pol, w) in grid_cfg.branches.resolve(&stack) {
        let v = stack
            .hot_substrate()
            .speed(pol)
            .map_err(|e| CliError::Computation(anyhow!(e)))?;
        sigma += w * phonon_stefan_boltzmann(v);
    }

    let mut text = prov.csv_header();
    text.push_str(&format!("# stack_id {stack_id}\n"));
    text.push_str("T_K,flux_W_per_m2,flux_mW_per_cm2,blackbody_W_per_m2\n");
    for &(t, q) in &curve.knots {
        text.push_str(&format!(
            "{t:e},{q:e},{:e},{:e}\n",
            w_per_m2_to_mw_per_cm2(q),
            sigma * t.powi(4)
        ));
    }
    write_text(&args.out, &text)?;
    if let Some(svg) = &args.svg {
        write_text(
            svg,
            &loglog(
                &format!("one-sided flux, {stack_id}"),
                "T (K)",
                "I/L (W/m²)",
                &[Series {
                    label: stack_id.clone(),
                    points: curve.knots.clone(),
                }],
            ),
        )?;
    }

    if let Some(sample) = &args.compare_sample {
        let refs: Vec<_> = reference_fluxes()
            .into_iter()
            .filter(|r| &r.sample == sample)
            .collect();
        if refs.is_empty() {
            return Err(anyhow!("no reference values for sample `{sample}`").into());
        }
        for r in refs {
            if let Some(&(_, q)) = curve.knots.iter().find(|(t, _)| *t == r.t) {
                eprintln!(
                    "info: {} K simulated {:.4} mW/cm², measured sample {} {} mW/cm² (ratio {:.2})",
                    r.t,
                    w_per_m2_to_mw_per_cm2(q),
                    r.sample,
                    r.mean_mw_per_cm2,
                    w_per_m2_to_mw_per_cm2(q) / r.mean_mw_per_cm2
                );
            }
        }
    }
    Ok(Status::Ok)
}
