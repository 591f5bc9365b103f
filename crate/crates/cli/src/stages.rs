//! Pipeline stages shared by the subcommands and the full pipeline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use bpsplan::bps::generate_hex_bps;
use bpsplan::dataset::{
    augment_dataset, generate_hard_samples, training_arrays, weights_from_hardness, world_features,
    Dataset, GenerationReport, Sample, Split, WorldEntry,
};
use bpsplan::multistart::SolverParams;
use bpsplan::net::{train, WarmStartModel};
use bpsplan::optimizer::descend;
use bpsplan::rng;
use bpsplan::robot::RobotModel;
use bpsplan::worldgen::{generate_world, world_is_usable, World};
use rayon::prelude::*;

use crate::config::{Config, WorldsConfig};
use crate::error::{CliError, CliResult};

const USABLE_KEY: u64 = 0x7573_6162;
const SEED_CHUNK: u64 = 16;

fn with_path<T>(path: &Path, r: bpsplan::Result<T>) -> CliResult<T> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    with_path(path, Dataset::read_from(&mut open(path)?))
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> CliResult<()> {
    let mut w = create(path)?;
    with_path(path, ds.write_to(&mut w))?;
    Ok(w.flush()?)
}

pub fn read_model(path: &Path) -> CliResult<WarmStartModel> {
    with_path(path, WarmStartModel::read_from(&mut open(path)?))
}

pub fn write_model(path: &Path, model: &WarmStartModel) -> CliResult<()> {
    let mut w = create(path)?;
    with_path(path, model.write_to(&mut w))?;
    Ok(w.flush()?)
}

pub fn write_world(path: &Path, world: &World) -> CliResult<()> {
    let mut w = create(path)?;
    with_path(path, world.write_to(&mut w))?;
    Ok(w.flush()?)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    Ok(w.flush()?)
}

/// Records the resolved config next to an output file as `<out>.run.toml`.
pub fn write_run_record(out: &Path, config: &Config, stage: &str) -> CliResult<()> {
    let mut name = out.as_os_str().to_owned();
    name.push(".run.toml");
    let text = format!(
        "# bpsplan {stage}\n# fingerprint = {}\n# seeds: {}\n{}",
        config.fingerprint(),
        config.seeds_line(),
        config.to_toml()
    );
    write_text(Path::new(&name), &text)
}

/// `# ` header line placed above every CSV table.
pub fn csv_header(config: &Config, stage: &str) -> String {
    format!(
        "# bpsplan {stage} fingerprint={} seeds: {}\n",
        config.fingerprint(),
        config.seeds_line()
    )
}

/// Usable worlds at consecutive seeds from `first_seed`, with their free
/// configuration count out of the filter sample.
pub fn usable_worlds(
    worlds: &WorldsConfig,
    robot: &RobotModel,
    count: usize,
) -> CliResult<Vec<(u64, World)>> {
    let mut out = Vec::with_capacity(count);
    let mut seed = worlds.first_seed;
    let end = worlds.first_seed.saturating_add(worlds.max_seeds);
    while out.len() < count {
        if seed >= end {
            return Err(CliError::Data(format!(
                "only {} usable worlds among {} seeds",
                out.len(),
                worlds.max_seeds
            )));
        }
        let hi = (seed + SEED_CHUNK).min(end);
        let found: Vec<Option<(u64, World)>> = (seed..hi)
            .into_par_iter()
            .map(|s| -> CliResult<_> {
                let grid = generate_world(&worlds.spec(s))?;
                let mut r = rng::stream(s, &[USABLE_KEY]);
                Ok(world_is_usable(&grid, robot, &mut r).then(|| (s, World::from_grid(grid))))
            })
            .collect::<CliResult<_>>()?;
        out.extend(found.into_iter().flatten().take(count - out.len()));
        seed = hi;
    }
    Ok(out)
}

/// World table: the first `train` usable seeds form the train split, the
/// next `test` the test split.
pub fn world_table(config: &Config, robot: &RobotModel) -> CliResult<(Vec<WorldEntry>, Vec<World>)> {
    let w = &config.worlds;
    let found = usable_worlds(w, robot, w.train + w.test)?;
    let mut entries = Vec::with_capacity(found.len());
    let mut worlds = Vec::with_capacity(found.len());
    for (i, (seed, world)) in found.into_iter().enumerate() {
        entries.push(WorldEntry {
            spec: w.spec(seed),
            split: if i < w.train { Split::Train } else { Split::Test },
        });
        worlds.push(world);
    }
    Ok((entries, worlds))
}

pub struct Generated {
    pub dataset: Dataset,
    pub worlds: Vec<World>,
    pub train_report: GenerationReport,
    pub test_report: GenerationReport,
}

/// World table plus hard train and test samples.
pub fn generate_dataset(config: &Config, robot: &RobotModel) -> CliResult<Generated> {
    let (entries, worlds) = world_table(config, robot)?;
    let mut dataset = Dataset::new(robot, entries, config.solver.n_t);
    let mut reports = Vec::new();
    for (split, test) in [(Split::Train, false), (Split::Test, true)] {
        let ids = dataset.world_ids(split);
        let hs = config.generate.hard_sample_config(test);
        if ids.is_empty() || hs.count == 0 {
            reports.push(GenerationReport::default());
            continue;
        }
        let (samples, report) = generate_hard_samples(&worlds, &ids, robot, &config.solver, &hs)?;
        if samples.len() < hs.count {
            return Err(CliError::Data(format!(
                "only {} of {} hard {} samples within {} candidates",
                samples.len(),
                hs.count,
                if test { "test" } else { "train" },
                hs.max_candidates
            )));
        }
        dataset.samples.extend(samples);
        reports.push(report);
    }
    let test_report = reports.pop().expect("two reports");
    let train_report = reports.pop().expect("two reports");
    Ok(Generated {
        dataset,
        worlds,
        train_report,
        test_report,
    })
}

pub fn augment(config: &Config, robot: &RobotModel, ds: &Dataset) -> CliResult<Dataset> {
    Ok(augment_dataset(ds, robot, &config.solver, &config.augment)?)
}

/// Untrained model for the configured architecture and basis point count.
pub fn new_model(config: &Config, robot: &RobotModel, bps_points: usize) -> CliResult<WarmStartModel> {
    let b = robot.base;
    let bps = generate_hex_bps([b[0], b[1], b[2]], robot.reach, bps_points, robot.dim)?;
    Ok(WarmStartModel::new(
        &config.model.mlp,
        bps,
        robot.name.clone(),
        robot.reach,
        robot.limits(),
        config.solver.n_t,
    )?)
}

/// Fits `model` to the train split of `ds`; returns the per-epoch loss.
pub fn fit(
    config: &Config,
    model: &mut WarmStartModel,
    ds: &Dataset,
    worlds: &[World],
    epochs: usize,
) -> CliResult<Vec<f64>> {
    check_compatible(ds, model)?;
    let features = world_features(worlds, model);
    let samples: Vec<&Sample> = ds.samples_in(Split::Train).collect();
    if samples.is_empty() {
        return Err(CliError::Data("dataset has no train samples".into()));
    }
    let (x, y) = training_arrays(&samples, &features, model)?;
    let weights = config.refine.boost_training.then(|| {
        let h: Vec<f64> = samples.iter().map(|s| s.hardness).collect();
        weights_from_hardness(&h, config.refine.boost.beta)
    });
    let tc = bpsplan::net::TrainConfig {
        epochs,
        ..config.train.clone()
    };
    let history = train(&mut model.net, &x, &y, weights.as_deref(), &tc)?;
    model.net.round_to_f32();
    Ok(history)
}

pub fn check_compatible(ds: &Dataset, model: &WarmStartModel) -> CliResult<()> {
    if model.robot_name != ds.robot_name || model.n_t != ds.n_t || model.n_dof() != ds.n_dof {
        return Err(CliError::Data(format!(
            "checkpoint ({}, {} waypoints) does not match dataset ({}, {} waypoints)",
            model.robot_name, model.n_t, ds.robot_name, ds.n_t
        )));
    }
    Ok(())
}

/// First feasible iteration of the refined network prediction for every
/// test sample, in sample order.
pub fn network_first_feasible(
    solver: &SolverParams,
    robot: &RobotModel,
    ds: &Dataset,
    worlds: &[World],
    model: &WarmStartModel,
    budget: usize,
) -> CliResult<Vec<(usize, Option<usize>)>> {
    check_compatible(ds, model)?;
    let features = world_features(worlds, model);
    let descent = solver.descent.with_max_iters(budget);
    let tests: Vec<(usize, &Sample)> = ds
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| ds.split_of(s) == Split::Test)
        .collect();
    tests
        .par_iter()
        .map(|&(i, s)| -> CliResult<_> {
            let guess = model.predict_path(&features[s.task.world], &s.task)?;
            let sdf = &worlds[s.task.world].sdf;
            let (_, trace) = descend(&guess, robot, sdf, &solver.objective, &descent)?;
            Ok((i, trace.first_feasible))
        })
        .collect()
}

/// Share of entries solved within `budget` iterations.
pub fn phi(first: &[Option<usize>], budget: usize) -> f64 {
    if first.is_empty() {
        return 0.0;
    }
    first.iter().filter(|f| f.is_some_and(|k| k <= budget)).count() as f64 / first.len() as f64
}

pub fn build_worlds(ds: &Dataset) -> CliResult<Vec<World>> {
    Ok(ds.build_worlds()?)
}
