//! `budget`: packaging heat-load scenario.

use std::path::PathBuf;

use clap::Args as ClapArgs;
use cryodbr::budget::{evaluate_scenario, BudgetScenario};
use anyhow::Context;

use crate::output::{file_label, print_json, read_text, write_json, Provenance};
use crate::{CliError, Status};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Scenario (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<Status, CliError> {
    let label = file_label(&args.scenario);
    let scenario = BudgetScenario::from_json(&read_text(&args.scenario)?)
        .with_context(|| label.clone())?;
    scenario.validate().with_context(|| label.clone())?;
    let report = evaluate_scenario(&scenario);
    let prov = Provenance::new(
        "budget",
        serde_json::to_value(&scenario).expect("scenario serializes"),
    );
    let value = prov.wrap(&report);
    match &args.out {
        Some(p) => write_json(p, &value)?,
        None => print_json(&value)?,
    }
    if report.flagged {
        Ok(Status::Flagged(vec!["at least one budget item failed or could not be evaluated".into()]))
    } else {
        Ok(Status::Ok)
    }
}
