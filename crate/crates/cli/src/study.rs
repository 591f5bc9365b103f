//! Feasibility of the refined network prediction as a function of the basis
//! point count, every net trained under the same budget.

use std::path::Path;

use bpsplan::dataset::Dataset;
use bpsplan::robot::RobotModel;
use bpsplan::worldgen::World;

use crate::config::Config;
use crate::error::CliResult;
use crate::stages::{csv_header, fit, network_first_feasible, new_model, phi, write_text};
use crate::svg;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub requested: usize,
    /// Points actually placed by the hexagonal packing.
    pub points: usize,
    pub phi: f64,
    pub final_loss: f64,
}

/// Trains on the train split of `ds` and evaluates on its test split.
pub fn run_bps_size_study(
    config: &Config,
    robot: &RobotModel,
    ds: &Dataset,
    worlds: &[World],
) -> CliResult<Vec<StudyRow>> {
    let study = &config.bps_study;
    let mut rows = Vec::with_capacity(study.sizes.len());
    for &n in &study.sizes {
        let mut model = new_model(config, robot, n)?;
        let history = fit(config, &mut model, ds, worlds, study.epochs)?;
        let first: Vec<Option<usize>> =
            network_first_feasible(&config.solver, robot, ds, worlds, &model, study.budget)?
                .into_iter()
                .map(|(_, f)| f)
                .collect();
        rows.push(StudyRow {
            requested: n,
            points: model.bps.len(),
            phi: phi(&first, study.budget),
            final_loss: *history.last().expect("at least one epoch"),
        });
    }
    Ok(rows)
}

pub fn write_study(dir: &Path, config: &Config, rows: &[StudyRow]) -> CliResult<()> {
    let mut csv = csv_header(config, "bps-study");
    csv.push_str("requested_points,points,phi,final_loss\n");
    for r in rows {
        csv.push_str(&format!("{},{},{:.6},{:.8e}\n", r.requested, r.points, r.phi, r.final_loss));
    }
    write_text(&dir.join("bps_study.csv"), &csv)?;
    let series = [svg::Series {
        name: "network".into(),
        points: rows.iter().map(|r| (r.points as f64, r.phi)).collect(),
    }];
    write_text(
        &dir.join("bps_study.svg"),
        &svg::line_chart(
            &format!("Feasibility after {} iterations vs. basis points", config.bps_study.budget),
            "basis points",
            "feasibility rate",
            &series,
        ),
    )
}
