//! `optimize`: graded-stack geometry search.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args as ClapArgs;
use cryodbr::materials::MaterialRegistry;
use cryodbr::optimizer::{optimize, DesignProblemConfig, Phase};
use cryodbr::units::w_per_m2_to_mw_per_cm2;
use serde_json::json;

use crate::output::{file_label, read_text, write_json, write_text, Provenance};
use crate::{CliError, Status};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Design problem (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Output directory (result.json, trace.csv).
    #[arg(long)]
    out: PathBuf,
    /// Extra materials merged over the built-in registry.
    #[arg(long)]
    materials: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<Status, CliError> {
    let mut registry = MaterialRegistry::builtin();
    if let Some(p) = &args.materials {
        let extra = MaterialRegistry::from_json(&read_text(p)?).with_context(|| file_label(p))?;
        registry = registry.merged(extra);
    }
    let label = file_label(&args.problem);
    let cfg: DesignProblemConfig =
        serde_json::from_str(&read_text(&args.problem)?).with_context(|| label.clone())?;
    let problem = cfg.problem(&registry).with_context(|| label.clone())?;
    let prov = Provenance::new(
        "optimize",
        json!({ "problem": cfg, "materials": args.materials.as_ref().map(|p| file_label(p)) }),
    );
    let result =
        optimize(&problem, cfg.method).map_err(|e| CliError::Computation(anyhow!(e)))?;

    let mut trace = prov.csv_header();
    trace.push_str("index,phase,ratio,split,flux_W_per_m2\n");
    for e in &result.trace {
        let phase = match e.phase {
            Phase::Lattice => "lattice",
            Phase::Simplex => "simplex",
        };
        trace.push_str(&format!(
            "{},{phase},{:e},{:e},{:e}\n",
            e.index, e.ratio, e.split, e.flux
        ));
    }
    write_text(&args.out.join("trace.csv"), &trace)?;
    let improvement = result.best_periodic_flux.map(|p| p / result.best.flux);
    write_json(
        &args.out.join("result.json"),
        &prov.wrap(&json!({
            "best": result.best,
            "best_mW_per_cm2": w_per_m2_to_mw_per_cm2(result.best.flux),
            "best_spec": result.best_spec,
            "best_periodic_flux_W_per_m2": result.best_periodic_flux,
            "periodic_over_best": improvement,
            "seed": result.seed,
            "flat": result.flat,
            "budget_exhausted": result.budget_exhausted,
            "evaluations": result.trace.len(),
        })),
    )?;
    if result.budget_exhausted {
        Ok(Status::Flagged(vec![format!(
            "evaluation budget of {} exhausted before the simplex converged; best so far reported",
            problem.max_evaluations
        )]))
    } else {
        Ok(Status::Ok)
    }
}
