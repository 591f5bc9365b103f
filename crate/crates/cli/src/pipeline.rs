//! Generate, augment, train, then alternate clean (plus optional extend and
//! boost) with retraining, and finally benchmark the last network.

use std::path::Path;
use std::time::Instant;

use bpsplan::dataset::{boost_weights, clean, extend, CleanReport, Dataset, ExtendReport, Split};
use bpsplan::robot::RobotModel;

use crate::bench::{run_benchmark, write_report, EvalReport};
use crate::config::Config;
use crate::error::CliResult;
use crate::stages::{
    augment, build_worlds, csv_header, fit, generate_dataset, network_first_feasible, new_model, phi,
    write_dataset, write_model, write_run_record, write_text,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Mean label objective over the originally generated train samples.
    pub mean_initial_label_objective: f64,
    pub mean_train_label_objective: f64,
    pub train_samples: usize,
    pub cleaned: CleanReport,
    pub extended: ExtendReport,
    pub final_loss: f64,
    /// Network φ on the test tasks at the bench budget.
    pub phi: f64,
}

pub struct PipelineOutcome {
    pub rounds: Vec<RoundRecord>,
    pub bench: EvalReport,
    pub stage_seconds: Vec<(String, f64)>,
}

pub fn dataset_file(round: usize) -> String {
    format!("dataset_round{round}.bpd")
}

pub fn model_file(round: usize) -> String {
    format!("model_round{round}.bpn")
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs everything into `out`. `timing.toml` is the only output that
/// differs between identical runs.
pub fn run_pipeline(
    config: &Config,
    robot: &RobotModel,
    out: &Path,
    log: &mut dyn FnMut(&str),
) -> CliResult<PipelineOutcome> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: String, timings: &mut Vec<(String, f64)>, log: &mut dyn FnMut(&str)| {
        let s = clock.elapsed().as_secs_f64();
        log(&format!("{name}: {s:.1} s"));
        timings.push((name, s));
        clock = Instant::now();
    };

    let generated = generate_dataset(config, robot)?;
    let mut ds = generated.dataset;
    let worlds = generated.worlds;
    log(&format!(
        "generated {} train / {} test samples (train candidates {:?})",
        ds.samples_in(Split::Train).count(),
        ds.samples_in(Split::Test).count(),
        generated.train_report
    ));
    let initial: Vec<usize> = (0..ds.samples.len())
        .filter(|&i| ds.split_of(&ds.samples[i]) == Split::Train)
        .collect();
    write_dataset(&out.join(dataset_file(0)), &ds)?;
    write_run_record(&out.join(dataset_file(0)), config, "pipeline")?;
    lap("generate".into(), &mut timings, log);

    let mut rounds = Vec::new();
    let mut model = None;
    for round in 0..=config.refine.clean_rounds {
        let mut cleaned = CleanReport::default();
        let mut extended = ExtendReport::default();
        if let Some(prev) = &model {
            let (c, report) = clean(&ds, &worlds, robot, prev, &config.solver)?;
            ds = c;
            cleaned = report;
            if config.refine.extend.budget > 0 {
                let (e, report) = extend(&ds, &worlds, robot, prev, &config.solver, &config.refine.extend)?;
                ds = e;
                extended = report;
            }
            write_dataset(&out.join(dataset_file(round)), &ds)?;
        }
        let mut aug: Dataset = augment(config, robot, &ds)?;
        let aug_worlds = build_worlds(&aug)?;
        if let (true, Some(prev)) = (config.refine.boost_training, &model) {
            boost_weights(&mut aug, &aug_worlds, robot, prev, &config.solver, &config.refine.boost)?;
        }
        let mut next = new_model(config, robot, config.model.bps_points)?;
        let history = fit(config, &mut next, &aug, &aug_worlds, config.train.epochs)?;
        write_model(&out.join(model_file(round)), &next)?;
        let first: Vec<Option<usize>> =
            network_first_feasible(&config.solver, robot, &ds, &worlds, &next, config.bench.budget)?
                .into_iter()
                .map(|(_, f)| f)
                .collect();
        let record = RoundRecord {
            round,
            mean_initial_label_objective: mean(initial.iter().map(|&i| ds.samples[i].label_objective)),
            mean_train_label_objective: mean(ds.samples_in(Split::Train).map(|s| s.label_objective)),
            train_samples: ds.samples_in(Split::Train).count(),
            cleaned,
            extended,
            final_loss: *history.last().expect("at least one epoch"),
            phi: phi(&first, config.bench.budget),
        };
        log(&format!(
            "round {round}: {} augmented train samples, loss {:.5}, mean label U {:.5}, phi {:.3}",
            aug.samples_in(Split::Train).count(),
            record.final_loss,
            record.mean_initial_label_objective,
            record.phi
        ));
        rounds.push(record);
        model = Some(next);
        lap(format!("round {round}"), &mut timings, log);
    }
    write_rounds(out, config, &rounds)?;

    let model = model.expect("at least one round");
    let bench = run_benchmark(config, robot, &ds, &worlds, &model)?;
    write_report(&out.join("bench"), config, &bench)?;
    lap("bench".into(), &mut timings, log);

    let total: f64 = timings.iter().map(|t| t.1).sum();
    let mut text = String::from("# wall-clock seconds; not part of the determinism contract\n");
    for (name, s) in &timings {
        text.push_str(&format!("\"{name}\" = {s:.1}\n"));
    }
    text.push_str(&format!("total = {total:.1}\n"));
    write_text(&out.join("timing.toml"), &text)?;
    Ok(PipelineOutcome {
        rounds,
        bench,
        stage_seconds: timings,
    })
}

pub fn write_rounds(out: &Path, config: &Config, rounds: &[RoundRecord]) -> CliResult<()> {
    let mut csv = csv_header(config, "pipeline");
    csv.push_str(
        "round,mean_initial_label_objective,mean_train_label_objective,train_samples,replaced,kept,extended,final_loss,phi\n",
    );
    for r in rounds {
        csv.push_str(&format!(
            "{},{:.9},{:.9},{},{},{},{},{:.8e},{:.6}\n",
            r.round,
            r.mean_initial_label_objective,
            r.mean_train_label_objective,
            r.train_samples,
            r.cleaned.replaced,
            r.cleaned.kept,
            r.extended.added,
            r.final_loss,
            r.phi
        ));
    }
    write_text(&out.join("rounds.csv"), &csv)
}
