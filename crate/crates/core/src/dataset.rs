//! Experience store: hard-sample labeling, symmetry augmentation and the
//! clean / boost / extend refinement moves.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bps::{encode_sdf, BpsFeatures};
use crate::error::{config_err, Error, Result};
use crate::multistart::{solve_multistart, straight_line_guess, MotionTask, SolverParams};
use crate::net::WarmStartModel;
use crate::objective::{evaluate, Path};
use crate::optimizer::{descend, is_path_feasible};
use crate::rng::{self, Rng};
use crate::robot::{RobotModel, Symmetry};
use crate::worldgen::{SignedDistanceField, World, WorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Multistart,
    Cleaned,
    Extended,
    Augmented,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Multistart,
        Provenance::Cleaned,
        Provenance::Extended,
        Provenance::Augmented,
    ];

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Result<Self> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown provenance {c}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Provenance::Multistart => "multistart",
            Provenance::Cleaned => "cleaned",
            Provenance::Extended => "extended",
            Provenance::Augmented => "augmented",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Split::Train),
            1 => Ok(Split::Test),
            _ => Err(Error::Format(format!("unknown split {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub task: MotionTask,
    pub label: Path,
    /// Objective value of the label.
    pub label_objective: f64,
    pub provenance: Provenance,
    pub hardness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldEntry {
    pub spec: WorldSpec,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub robot_name: String,
    pub worlds: Vec<WorldEntry>,
    pub n_t: usize,
    pub n_dof: usize,
    pub samples: Vec<Sample>,
}

/// Objective of `path` at the substep count the solver would use.
pub fn label_objective(
    path: &Path,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    solver: &SolverParams,
) -> Result<f64> {
    let n_sub = solver.descent.n_sub.resolve(path, robot, sdf.geometry.voxel_size);
    let (v, _) = evaluate(path, robot, sdf, &solver.objective.with_n_sub(n_sub), false)?;
    Ok(v.total)
}

fn quantize(q: &[f64]) -> Vec<f64> {
    q.iter().map(|&v| v as f32 as f64).collect()
}

/// A feasible configuration exactly representable in single precision.
fn draw_config(robot: &RobotModel, sdf: &SignedDistanceField, rng: &mut Rng) -> Option<Vec<f64>> {
    (0..1000).find_map(|_| {
        let q = quantize(&robot.random_config(rng));
        (robot.within_limits(&q) && robot.is_config_feasible(sdf, &q)).then_some(q)
    })
}

fn draw_task(
    world_ids: &[usize],
    worlds: &[World],
    robot: &RobotModel,
    rng: &mut Rng,
) -> Option<MotionTask> {
    let world = world_ids[rng.random_range(0..world_ids.len())];
    let sdf = &worlds[world].sdf;
    let q_start = draw_config(robot, sdf, rng)?;
    let q_goal = draw_config(robot, sdf, rng)?;
    (q_start != q_goal).then_some(MotionTask {
        world,
        q_start,
        q_goal,
    })
}

/// Labels a task with the shortest feasible multi-start result, stored in
/// single precision. `None` when no start succeeds.
fn label_task(
    task: &MotionTask,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    solver: &SolverParams,
    seed: u64,
    provenance: Provenance,
) -> Result<Option<Sample>> {
    let result = solve_multistart(task, robot, sdf, solver, seed)?;
    let Some((path, _)) = result.best else {
        return Ok(None);
    };
    let label = path.quantized();
    if !is_path_feasible(&label, robot, sdf) {
        return Ok(None);
    }
    Ok(Some(Sample {
        task: task.clone(),
        label_objective: label_objective(&label, robot, sdf, solver)?,
        label,
        provenance,
        hardness: 0.0,
    }))
}

/// Whether descent from the straight line reaches a feasible path at any
/// iteration within the solver budget.
pub fn straight_line_solves(
    task: &MotionTask,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    solver: &SolverParams,
) -> Result<bool> {
    let guess = straight_line_guess(task, solver.n_t)?;
    let (_, trace) = descend(&guess, robot, sdf, &solver.objective, &solver.descent)?;
    Ok(trace.first_feasible.is_some())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardSampleConfig {
    pub count: usize,
    /// Give up after this many drawn tasks.
    pub max_candidates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationReport {
    pub candidates: usize,
    pub easy: usize,
    pub unsolved: usize,
    pub accepted: usize,
}

enum Outcome {
    NoTask,
    Easy,
    Unsolved,
    Hard(Sample),
}

/// Candidates per parallel round.
const CHUNK: usize = 16;

/// Draws tasks from `world_ids` and keeps those that straight-line descent
/// cannot solve but multi-start can. Candidate `j` only depends on
/// `(seed, j)`, so results do not depend on the thread count.
pub fn generate_hard_samples(
    worlds: &[World],
    world_ids: &[usize],
    robot: &RobotModel,
    solver: &SolverParams,
    config: &HardSampleConfig,
) -> Result<(Vec<Sample>, GenerationReport)> {
    solver.validate()?;
    if world_ids.is_empty() {
        return config_err("no worlds to draw tasks from");
    }
    let mut report = GenerationReport::default();
    let mut samples = Vec::with_capacity(config.count);
    let mut next = 0usize;
    while samples.len() < config.count && next < config.max_candidates {
        let end = (next + CHUNK).min(config.max_candidates);
        let outcomes: Vec<Outcome> = (next..end)
            .into_par_iter()
            .map(|j| {
                let mut r = rng::stream(config.seed, &[0x6861_7264, j as u64]);
                let Some(task) = draw_task(world_ids, worlds, robot, &mut r) else {
                    return Ok(Outcome::NoTask);
                };
                let sdf = &worlds[task.world].sdf;
                if straight_line_solves(&task, robot, sdf, solver)? {
                    return Ok(Outcome::Easy);
                }
                let seed = r.random::<u64>();
                Ok(
                    match label_task(&task, robot, sdf, solver, seed, Provenance::Multistart)? {
                        Some(s) => Outcome::Hard(s),
                        None => Outcome::Unsolved,
                    },
                )
            })
            .collect::<Result<_>>()?;
        for outcome in outcomes {
            if samples.len() == config.count {
                break;
            }
            report.candidates += 1;
            match outcome {
                Outcome::NoTask => {}
                Outcome::Easy => report.easy += 1,
                Outcome::Unsolved => report.unsolved += 1,
                Outcome::Hard(s) => samples.push(s),
            }
        }
        next = end;
    }
    report.accepted = samples.len();
    Ok((samples, report))
}

/// The same motion played backwards.
pub fn augment_temporal(sample: &Sample) -> Sample {
    Sample {
        task: sample.task.reversed(),
        label: sample.label.reversed(),
        label_objective: sample.label_objective,
        provenance: Provenance::Augmented,
        hardness: sample.hardness,
    }
}

/// Maps a configuration through `quarter_turns` rotations of the world
/// about the grid center.
pub fn rotate_config(robot: &RobotModel, q: &[f64], quarter_turns: u8) -> Result<Vec<f64>> {
    let k = quarter_turns % 4;
    let mut out = q.to_vec();
    match robot.symmetry {
        Symmetry::None => {
            return Err(Error::Unsupported(format!(
                "robot {} declares no rotational symmetry",
                robot.name
            )))
        }
        Symmetry::GridRotation => {
            for _ in 0..k {
                let (x, y) = (out[0], out[1]);
                out[0] = -y;
                out[1] = x;
            }
        }
        Symmetry::BaseRotation => {
            if k != 0 {
                let [lo, hi] = robot.joints[0].limits;
                let tau = std::f64::consts::TAU;
                let base = q[0] + k as f64 * std::f64::consts::FRAC_PI_2;
                out[0] = [base, base - tau, base + tau]
                    .into_iter()
                    .find(|v| (lo..=hi).contains(v))
                    .ok_or_else(|| {
                        Error::Unsupported(format!(
                            "rotated base angle {base} leaves the joint range"
                        ))
                    })?;
            }
        }
    }
    Ok(out)
}

/// Rotates a sample into the world entry `world` (which must hold the
/// rotated occupancy). Values are rounded to single precision, so the
/// objective is recomputed by the caller.
pub fn augment_spatial(
    sample: &Sample,
    robot: &RobotModel,
    quarter_turns: u8,
    world: usize,
) -> Result<Sample> {
    if !(1..=3).contains(&quarter_turns) {
        return config_err("spatial augmentation takes 1 to 3 quarter turns");
    }
    let rows = (0..sample.label.n_t())
        .map(|t| rotate_config(robot, &sample.label.row(t), quarter_turns).map(|q| quantize(&q)))
        .collect::<Result<Vec<_>>>()?;
    let label = Path::from_rows(&rows)?;
    Ok(Sample {
        task: MotionTask {
            world,
            q_start: rows[0].clone(),
            q_goal: rows[rows.len() - 1].clone(),
        },
        label,
        label_objective: sample.label_objective,
        provenance: Provenance::Augmented,
        hardness: sample.hardness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default)]
    pub temporal: bool,
    /// Quarter-turn counts to add, each in 1..=3.
    #[serde(default)]
    pub rotations: Vec<u8>,
}

/// Adds reversed and rotated copies of every train sample. Test samples
/// are never augmented. Rotated worlds join the split of their source.
pub fn augment_dataset(
    dataset: &Dataset,
    robot: &RobotModel,
    solver: &SolverParams,
    config: &AugmentConfig,
) -> Result<Dataset> {
    let mut out = dataset.clone();
    let originals: Vec<&Sample> = dataset
        .samples
        .iter()
        .filter(|s| dataset.worlds[s.task.world].split == Split::Train)
        .collect();
    let mut bases: Vec<Sample> = originals.iter().map(|s| (*s).clone()).collect();
    if config.temporal {
        bases.extend(originals.iter().map(|s| augment_temporal(s)));
        out.samples.extend(bases[originals.len()..].iter().cloned());
    }
    let mut new = Vec::new();
    for &k in &config.rotations {
        for s in &bases {
            let src = &dataset.worlds[s.task.world];
            let spec = WorldSpec {
                rotation: (src.spec.rotation + k) % 4,
                ..src.spec.clone()
            };
            let world = match out.worlds.iter().position(|w| w.spec == spec) {
                Some(i) => i,
                None => {
                    out.worlds.push(WorldEntry {
                        spec,
                        split: src.split,
                    });
                    out.worlds.len() - 1
                }
            };
            new.push(augment_spatial(s, robot, k, world)?);
        }
    }
    if !new.is_empty() {
        let worlds = out.build_worlds()?;
        new.par_iter_mut().try_for_each(|s| -> Result<()> {
            s.label_objective = label_objective(&s.label, robot, &worlds[s.task.world].sdf, solver)?;
            Ok(())
        })?;
        out.samples.extend(new);
    }
    out.check_split_disjoint()?;
    Ok(out)
}

/// BPS features of every world, in world order.
pub fn world_features(worlds: &[World], model: &WarmStartModel) -> Vec<BpsFeatures> {
    worlds.par_iter().map(|w| encode_sdf(&w.sdf, &model.bps)).collect()
}

/// Network prediction refined by `solver.descent`, rounded to single
/// precision.
fn refine_prediction(
    sample_task: &MotionTask,
    features: &BpsFeatures,
    model: &WarmStartModel,
    robot: &RobotModel,
    sdf: &SignedDistanceField,
    solver: &SolverParams,
) -> Result<(Path, bool, f64)> {
    let guess = model.predict_path(features, sample_task)?;
    let (path, _) = descend(&guess, robot, sdf, &solver.objective, &solver.descent)?;
    let path = path.quantized();
    let feasible = is_path_feasible(&path, robot, sdf);
    let value = label_objective(&path, robot, sdf, solver)?;
    Ok((path, feasible, value))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub replaced: usize,
    pub kept: usize,
}

/// Replaces a label by the refined network prediction when that is feasible
/// and strictly better. Test samples are left alone.
pub fn clean(
    dataset: &Dataset,
    worlds: &[World],
    robot: &RobotModel,
    model: &WarmStartModel,
    solver: &SolverParams,
) -> Result<(Dataset, CleanReport)> {
    solver.validate()?;
    check_model(dataset, model)?;
    let features = world_features(worlds, model);
    let updates: Vec<Option<(Path, f64)>> = dataset
        .samples
        .par_iter()
        .map(|s| {
            if dataset.worlds[s.task.world].split != Split::Train {
                return Ok(None);
            }
            let sdf = &worlds[s.task.world].sdf;
            let (path, feasible, value) =
                refine_prediction(&s.task, &features[s.task.world], model, robot, sdf, solver)?;
            Ok((feasible && value < s.label_objective).then_some((path, value)))
        })
        .collect::<Result<_>>()?;
    let mut out = dataset.clone();
    let mut report = CleanReport::default();
    for (s, u) in out.samples.iter_mut().zip(updates) {
        match u {
            Some((path, value)) => {
                s.label = path;
                s.label_objective = value;
                s.provenance = Provenance::Cleaned;
                report.replaced += 1;
            }
            None => report.kept += 1,
        }
    }
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Descent iterations applied to each prediction.
    #[serde(default = "default_boost_iters")]
    pub iterations: usize,
}

fn default_beta() -> f64 {
    3.0
}

fn default_boost_iters() -> usize {
    20
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            iterations: default_boost_iters(),
        }
    }
}

/// `1 + β h_i / mean(h)`, rescaled to mean 1. All ones when every hardness
/// is zero.
pub fn weights_from_hardness(hardness: &[f64], beta: f64) -> Vec<f64> {
    if hardness.is_empty() {
        return Vec::new();
    }
    let mean = hardness.iter().sum::<f64>() / hardness.len() as f64;
    if !(mean > 0.0) {
        return vec![1.0; hardness.len()];
    }
    let raw: Vec<f64> = hardness.iter().map(|h| 1.0 + beta * h / mean).collect();
    let norm = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|w| w / norm).collect()
}

/// Sets each train sample's hardness to how much worse the briefly refined
/// prediction is than the label, and returns the resulting training
/// weights (in sample order, test samples included with hardness 0).
pub fn boost_weights(
    dataset: &mut Dataset,
    worlds: &[World],
    robot: &RobotModel,
    model: &WarmStartModel,
    solver: &SolverParams,
    config: &BoostConfig,
) -> Result<Vec<f64>> {
    if !(config.beta >= 0.0 && config.beta.is_finite()) {
        return config_err("beta must be non-negative");
    }
    check_model(dataset, model)?;
    let short = SolverParams {
        descent: solver.descent.with_max_iters(config.iterations),
        ..solver.clone()
    };
    let features = world_features(worlds, model);
    let hardness: Vec<f64> = dataset
        .samples
        .par_iter()
        .map(|s| {
            if dataset.worlds[s.task.world].split != Split::Train {
                return Ok(0.0);
            }
            let sdf = &worlds[s.task.world].sdf;
            let guess = model.predict_path(&features[s.task.world], &s.task)?;
            let (path, _) = descend(&guess, robot, sdf, &short.objective, &short.descent)?;
            let u = label_objective(&path, robot, sdf, &short)?;
            Ok(((u - s.label_objective).max(0.0)) as f32 as f64)
        })
        .collect::<Result<_>>()?;
    for (s, &h) in dataset.samples.iter_mut().zip(&hardness) {
        s.hardness = h;
    }
    Ok(weights_from_hardness(&hardness, config.beta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    /// Labeled additions to stop at.
    pub budget: usize,
    pub max_candidates: usize,
    /// Descent iterations applied to each prediction before the skip test.
    #[serde(default = "default_boost_iters")]
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtendReport {
    pub candidates: usize,
    pub skipped: usize,
    pub unsolved: usize,
    pub added: usize,
}

/// Draws train-world tasks, skips those the network already solves after a
/// short descent, and labels the rest with multi-start.
pub fn extend(
    dataset: &Dataset,
    worlds: &[World],
    robot: &RobotModel,
    model: &WarmStartModel,
    solver: &SolverParams,
    config: &ExtendConfig,
) -> Result<(Dataset, ExtendReport)> {
    solver.validate()?;
    check_model(dataset, model)?;
    let world_ids = dataset.world_ids(Split::Train);
    if world_ids.is_empty() {
        return config_err("dataset has no train worlds");
    }
    let short = SolverParams {
        descent: solver.descent.with_max_iters(config.iterations),
        ..solver.clone()
    };
    let features = world_features(worlds, model);
    let mut out = dataset.clone();
    let mut report = ExtendReport::default();
    let mut next = 0usize;
    while report.added < config.budget && next < config.max_candidates {
        let end = (next + CHUNK).min(config.max_candidates);
        let outcomes: Vec<Outcome> = (next..end)
            .into_par_iter()
            .map(|j| {
                let mut r = rng::stream(config.seed, &[0x6578_7464, j as u64]);
                let Some(task) = draw_task(&world_ids, worlds, robot, &mut r) else {
                    return Ok(Outcome::NoTask);
                };
                let sdf = &worlds[task.world].sdf;
                let (_, feasible, _) =
                    refine_prediction(&task, &features[task.world], model, robot, sdf, &short)?;
                if feasible {
                    return Ok(Outcome::Easy);
                }
                let seed = r.random::<u64>();
                Ok(match label_task(&task, robot, sdf, solver, seed, Provenance::Extended)? {
                    Some(s) => Outcome::Hard(s),
                    None => Outcome::Unsolved,
                })
            })
            .collect::<Result<_>>()?;
        for outcome in outcomes {
            if report.added == config.budget {
                break;
            }
            report.candidates += 1;
            match outcome {
                Outcome::NoTask => {}
                Outcome::Easy => report.skipped += 1,
                Outcome::Unsolved => report.unsolved += 1,
                Outcome::Hard(s) => {
                    out.samples.push(s);
                    report.added += 1;
                }
            }
        }
        next = end;
    }
    Ok((out, report))
}

fn check_model(dataset: &Dataset, model: &WarmStartModel) -> Result<()> {
    if model.robot_name != dataset.robot_name {
        return config_err(format!(
            "checkpoint is for robot {}, dataset for {}",
            model.robot_name, dataset.robot_name
        ));
    }
    if model.n_t != dataset.n_t || model.n_dof() != dataset.n_dof {
        return config_err("checkpoint path shape does not match the dataset");
    }
    Ok(())
}

/// First violated sample invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("sample {index}: {reason}")]
pub struct VerifyError {
    pub index: usize,
    pub reason: String,
}

// Stored label objectives come from the same code; reversal only changes
// the summation order.
const OBJECTIVE_RTOL: f64 = 1e-9;

/// Checks every sample invariant. Given solver settings, the stored label
/// objective is recomputed; with `hard_test` set, test samples must also
/// defeat straight-line descent under those settings.
pub fn verify(
    dataset: &Dataset,
    worlds: &[World],
    robot: &RobotModel,
    solver: Option<&SolverParams>,
    hard_test: bool,
) -> std::result::Result<(), VerifyError> {
    let fail = |index, reason: String| Err(VerifyError { index, reason });
    if let Err(e) = dataset.check_split_disjoint() {
        return fail(0, e.to_string());
    }
    if robot.name != dataset.robot_name || robot.n_dof() != dataset.n_dof {
        return fail(0, format!("dataset is for robot {}", dataset.robot_name));
    }
    let errors: Vec<Option<String>> = dataset
        .samples
        .par_iter()
        .map(|s| {
            let Some(world) = worlds.get(s.task.world) else {
                return Some(format!("world index {} out of range", s.task.world));
            };
            if s.label.n_t() != dataset.n_t || s.label.n_dof() != dataset.n_dof {
                return Some("label has the wrong shape".into());
            }
            if s.label.row(0) != s.task.q_start || s.label.row(dataset.n_t - 1) != s.task.q_goal {
                return Some("label endpoints differ from the task".into());
            }
            if !s.label_objective.is_finite() {
                return Some("label objective is not finite".into());
            }
            if !s.label.waypoints.rows().into_iter().all(|q| robot.within_limits(&q.to_vec())) {
                return Some("label leaves the joint limits".into());
            }
            if !is_path_feasible(&s.label, robot, &world.sdf) {
                return Some("label is infeasible".into());
            }
            if let Some(solver) = solver {
                match label_objective(&s.label, robot, &world.sdf, solver) {
                    Ok(u) if (u - s.label_objective).abs() <= OBJECTIVE_RTOL * u.abs().max(1.0) => {}
                    Ok(u) => return Some(format!("stored objective {} but recomputed {u}", s.label_objective)),
                    Err(e) => return Some(e.to_string()),
                }
                if hard_test && dataset.worlds[s.task.world].split == Split::Test {
                    match straight_line_solves(&s.task, robot, &world.sdf, solver) {
                        Ok(false) => {}
                        Ok(true) => return Some("test task is solved from the straight line".into()),
                        Err(e) => return Some(e.to_string()),
                    }
                }
            }
            None
        })
        .collect();
    match errors.into_iter().enumerate().find_map(|(i, e)| e.map(|e| (i, e))) {
        Some((i, e)) => fail(i, e),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub train_worlds: usize,
    pub test_worlds: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub by_provenance: [usize; 4],
    pub mean_label_objective: f64,
    pub mean_train_label_objective: f64,
}

impl Dataset {
    pub fn new(robot: &RobotModel, worlds: Vec<WorldEntry>, n_t: usize) -> Self {
        Self {
            robot_name: robot.name.clone(),
            worlds,
            n_t,
            n_dof: robot.n_dof(),
            samples: Vec::new(),
        }
    }

    pub fn world_ids(&self, split: Split) -> Vec<usize> {
        (0..self.worlds.len()).filter(|&i| self.worlds[i].split == split).collect()
    }

    pub fn split_of(&self, sample: &Sample) -> Split {
        self.worlds[sample.task.world].split
    }

    /// Generates every world in the table.
    pub fn build_worlds(&self) -> Result<Vec<World>> {
        self.worlds.par_iter().map(|w| World::from_spec(&w.spec)).collect()
    }

    /// Identical world specs must not appear in both splits.
    pub fn check_split_disjoint(&self) -> Result<()> {
        for (i, a) in self.worlds.iter().enumerate() {
            for b in &self.worlds[..i] {
                if a.split != b.split && a.spec.seed == b.spec.seed && a.spec.shape == b.spec.shape {
                    return config_err(format!("world seed {} appears in both splits", a.spec.seed));
                }
            }
        }
        Ok(())
    }

    pub fn samples_in(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| self.split_of(s) == split)
    }

    pub fn stats(&self) -> DatasetStats {
        let mut by_provenance = [0; 4];
        for s in &self.samples {
            by_provenance[s.provenance as usize] += 1;
        }
        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let (n, sum) = it.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        };
        DatasetStats {
            train_worlds: self.world_ids(Split::Train).len(),
            test_worlds: self.world_ids(Split::Test).len(),
            train_samples: self.samples_in(Split::Train).count(),
            test_samples: self.samples_in(Split::Test).count(),
            by_provenance,
            mean_label_objective: mean(&mut self.samples.iter().map(|s| s.label_objective)),
            mean_train_label_objective: mean(
                &mut self.samples_in(Split::Train).map(|s| s.label_objective),
            ),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"BPD1")?;
        w.write_u32::<LittleEndian>(self.robot_name.len() as u32)?;
        w.write_all(self.robot_name.as_bytes())?;
        w.write_u32::<LittleEndian>(self.worlds.len() as u32)?;
        for e in &self.worlds {
            let s = &e.spec;
            w.write_u64::<LittleEndian>(s.seed)?;
            w.write_f64::<LittleEndian>(s.noise_frequency)?;
            w.write_f64::<LittleEndian>(s.threshold)?;
            w.write_u8(s.shape.len() as u8)?;
            for &n in &s.shape {
                w.write_u32::<LittleEndian>(n as u32)?;
            }
            w.write_f64::<LittleEndian>(s.voxel_size)?;
            w.write_u8(s.rotation)?;
            w.write_u8(e.split as u8)?;
        }
        w.write_u32::<LittleEndian>(self.n_t as u32)?;
        w.write_u32::<LittleEndian>(self.n_dof as u32)?;
        w.write_u32::<LittleEndian>(self.samples.len() as u32)?;
        for s in &self.samples {
            w.write_u32::<LittleEndian>(s.task.world as u32)?;
            for &v in s.task.q_start.iter().chain(&s.task.q_goal).chain(s.label.waypoints.iter()) {
                w.write_f32::<LittleEndian>(v as f32)?;
            }
            w.write_f64::<LittleEndian>(s.label_objective)?;
            w.write_u8(s.provenance.code())?;
            w.write_f32::<LittleEndian>(s.hardness as f32)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"BPD1" {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let name_len = r.read_u32::<LittleEndian>()? as usize;
        if name_len > 4096 {
            return Err(Error::Format("robot name too long".into()));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let robot_name =
            String::from_utf8(name).map_err(|_| Error::Format("robot name is not UTF-8".into()))?;
        let n_worlds = r.read_u32::<LittleEndian>()? as usize;
        let mut worlds = Vec::with_capacity(n_worlds.min(1 << 16));
        for i in 0..n_worlds {
            let seed = r.read_u64::<LittleEndian>()?;
            let noise_frequency = r.read_f64::<LittleEndian>()?;
            let threshold = r.read_f64::<LittleEndian>()?;
            let d = r.read_u8()? as usize;
            if !(2..=3).contains(&d) {
                return Err(Error::Format(format!("world {i}: bad dimension {d}")));
            }
            let shape = (0..d)
                .map(|_| r.read_u32::<LittleEndian>().map(|n| n as usize))
                .collect::<std::io::Result<Vec<_>>>()?;
            let voxel_size = r.read_f64::<LittleEndian>()?;
            let rotation = r.read_u8()?;
            let split = Split::from_code(r.read_u8()?)?;
            let spec = WorldSpec {
                seed,
                noise_frequency,
                threshold,
                shape,
                voxel_size,
                rotation,
            };
            spec.validate()
                .map_err(|e| Error::Format(format!("world {i}: {e}")))?;
            worlds.push(WorldEntry { spec, split });
        }
        let n_t = r.read_u32::<LittleEndian>()? as usize;
        let n_dof = r.read_u32::<LittleEndian>()? as usize;
        if n_t < 3 || n_dof == 0 {
            return Err(Error::Format(format!("bad path shape {n_t}x{n_dof}")));
        }
        let n_samples = r.read_u32::<LittleEndian>()? as usize;
        let mut samples = Vec::with_capacity(n_samples.min(1 << 20));
        let mut buf = vec![0f32; (2 + n_t) * n_dof];
        for i in 0..n_samples {
            let sample = read_sample(r, &mut buf, n_t, n_dof, worlds.len()).map_err(|e| match e {
                Error::Io(io) => Error::Format(format!("sample {i}: {io}")),
                Error::Format(m) => Error::Format(format!("sample {i}: {m}")),
                other => other,
            })?;
            samples.push(sample);
        }
        Ok(Self {
            robot_name,
            worlds,
            n_t,
            n_dof,
            samples,
        })
    }
}

fn read_sample(r: &mut impl Read, buf: &mut [f32], n_t: usize, n_dof: usize, n_worlds: usize) -> Result<Sample> {
    let world = r.read_u32::<LittleEndian>()? as usize;
    if world >= n_worlds {
        return Err(Error::Format(format!("world index {world} out of range")));
    }
    r.read_f32_into::<LittleEndian>(buf)?;
    let vals: Vec<f64> = buf.iter().map(|&v| v as f64).collect();
    let label = Path::new(Array2::from_shape_vec((n_t, n_dof), vals[2 * n_dof..].to_vec()).expect("label shape"))?;
    let label_objective = r.read_f64::<LittleEndian>()?;
    let provenance = Provenance::from_code(r.read_u8()?)?;
    let hardness = r.read_f32::<LittleEndian>()? as f64;
    Ok(Sample {
        task: MotionTask {
            world,
            q_start: vals[..n_dof].to_vec(),
            q_goal: vals[n_dof..2 * n_dof].to_vec(),
        },
        label,
        label_objective,
        provenance,
        hardness,
    })
}

/// Network inputs and path-deviation targets for the given samples.
pub fn training_arrays(
    samples: &[&Sample],
    features: &[BpsFeatures],
    model: &WarmStartModel,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let in_w = model.net.input_width;
    let out_w = model.net.output_width;
    let mut x = Array2::zeros((samples.len(), in_w));
    let mut y = Array2::zeros((samples.len(), out_w));
    for (i, s) in samples.iter().enumerate() {
        let input = model.input_vector(&features[s.task.world], &s.task);
        if input.len() != in_w {
            return Err(Error::Dimension {
                expected: in_w,
                got: input.len(),
            });
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&input));
        let delta = crate::net::path_to_delta(&s.label)?;
        y.row_mut(i)
            .assign(&ndarray::ArrayView1::from(delta.as_slice().expect("contiguous delta")));
    }
    Ok((x, y))
}

#[cfg(test)]
#[path = "dataset_tests.rs"]
mod tests;
